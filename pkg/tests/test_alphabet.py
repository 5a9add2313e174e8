import pytest

from scribegen.alphabet import Alphabet, EncodingError, pad_text


def test_default_alphabet_contents(alphabet):
    assert "a" in alphabet and "Z" in alphabet and "7" in alphabet
    assert " " in alphabet and "!" in alphabet
    assert alphabet.epsilon_index == len(alphabet)
    assert alphabet.num_classes == len(alphabet) + 1


def test_symbols_must_be_unique():
    with pytest.raises(ValueError):
        Alphabet("aab")


def test_encode_decode_round_trip(alphabet):
    text = "Hello, world 42!"
    assert alphabet.decode(alphabet.encode(text)) == text


def test_decode_drops_padding(alphabet):
    eps = alphabet.epsilon_index
    indices = alphabet.encode("hi") + [eps, eps]
    assert alphabet.decode(indices) == "hi"


def test_out_of_alphabet_error_names_character(alphabet):
    with pytest.raises(EncodingError, match="'é'"):
        alphabet.encode("café")


def test_pad_text_shape_and_padding(alphabet):
    padded = pad_text("abc", 10, alphabet)
    assert len(padded) == 10
    assert padded.true_length == 3
    assert all(i == alphabet.epsilon_index for i in padded.indices[3:])


def test_pad_text_rejects_empty_and_overlong(alphabet):
    with pytest.raises(EncodingError):
        pad_text("", 10, alphabet)
    with pytest.raises(EncodingError):
        pad_text("x" * 11, 10, alphabet)
