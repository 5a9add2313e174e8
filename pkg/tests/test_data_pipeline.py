import filecmp
import os

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scribegen.alphabet import Alphabet
from scribegen.data import (
    CURRICULUM_CATEGORIES,
    Manifest,
    ManifestError,
    ManifestRecord,
    StyleSet,
    assign_category,
    dataset_statistics,
    expand_manifest_ngrams,
    load_manifest,
    load_samples,
    ngram_crop,
    save_manifest,
)
from scribegen.imaging import (
    InvalidImageError,
    WidthExceedsTargetError,
    normalize_image,
    periodic_pad,
)
from scribegen.toydata import make_toy_dataset


class TestNormalizeImage:
    def test_white_page_becomes_zero(self):
        out = normalize_image(np.full((128, 100), 255, dtype=np.uint8))
        assert out.shape == (64, 50)
        assert np.all(out == 0.0)

    def test_black_page_becomes_one(self):
        out = normalize_image(np.zeros((64, 300), dtype=np.uint8))
        assert out.shape == (64, 300)
        assert np.all(out == 1.0)

    def test_single_dark_pixel_upscale(self):
        # The resampled peak must sit inside the 2x2 block the source pixel
        # maps to, and bilinear weights keep it above 0.5.
        raw = np.full((32, 32), 255, dtype=np.uint8)
        raw[10, 20] = 0
        out = normalize_image(raw)
        assert out.shape == (64, 64)
        peak = np.unravel_index(np.argmax(out), out.shape)
        assert 20 <= peak[0] <= 21 and 40 <= peak[1] <= 41
        assert out[peak] > 0.5

    def test_zero_area_rejected(self):
        with pytest.raises(InvalidImageError):
            normalize_image(np.zeros((0, 10), dtype=np.uint8))

    @given(
        h=st.integers(1, 200),
        w=st.integers(1, 200),
        seed=st.integers(0, 2**31 - 1),
    )
    @settings(max_examples=40, deadline=None)
    def test_output_range_and_height(self, h, w, seed):
        raw = np.random.default_rng(seed).integers(0, 256, size=(h, w), dtype=np.uint8)
        out = normalize_image(raw)
        assert out.shape[0] == 64
        assert out.shape[1] >= 1
        assert float(out.min()) >= 0.0 and float(out.max()) <= 1.0


class TestPeriodicPad:
    def test_tiling_layout(self):
        img = np.random.default_rng(0).random((64, 100)).astype(np.float32)
        out = periodic_pad(img, 250)
        assert out.shape == (64, 250)
        assert np.array_equal(out[:, :100], img)
        assert np.array_equal(out[:, 100:200], img)
        assert np.array_equal(out[:, 200:250], img[:, :50])

    def test_exact_width_is_identity(self):
        img = np.random.default_rng(1).random((64, 80)).astype(np.float32)
        assert np.array_equal(periodic_pad(img, 80), img)

    def test_single_column_tiles(self):
        column = np.arange(64, dtype=np.float32).reshape(64, 1)
        out = periodic_pad(column, 7)
        assert out.shape == (64, 7)
        assert np.array_equal(out, np.tile(column, (1, 7)))

    def test_narrow_target_rejected(self):
        with pytest.raises(WidthExceedsTargetError):
            periodic_pad(np.zeros((64, 10), dtype=np.float32), 9)

    @given(w=st.integers(1, 120), extra=st.integers(0, 200), seed=st.integers(0, 10**6))
    @settings(max_examples=60, deadline=None)
    def test_column_equality_property(self, w, extra, seed):
        img = np.random.default_rng(seed).integers(0, 256, size=(8, w))
        target = w + extra
        out = periodic_pad(img, target)
        cols = np.arange(target)
        assert np.array_equal(out, img[:, cols % w])

    def test_idempotent_at_fixed_width(self):
        img = np.random.default_rng(2).random((64, 37)).astype(np.float32)
        once = periodic_pad(img, 200)
        twice = periodic_pad(once, 200)
        assert np.array_equal(once, twice)


class TestNgramCrop:
    @staticmethod
    def _line(num_words, word_width=40, gap=10):
        boxes = []
        x = 5
        for _ in range(num_words):
            boxes.append((x, x + word_width))
            x += word_width + gap
        image = np.random.default_rng(3).random((64, x)).astype(np.float32)
        texts = [f"word{k}" for k in range(num_words)]
        return image, boxes, texts

    def test_three_words_full_expansion(self):
        image, boxes, texts = self._line(3)
        samples = ngram_crop(image, boxes, texts, writer_id=0, order=3)
        assert len(samples) == 6
        transcripts = {s.transcription for s in samples}
        assert "word0" in transcripts
        assert "word0 word1 word2" in transcripts
        full = next(s for s in samples if s.transcription == "word0 word1 word2")
        assert full.width == boxes[2][1] - boxes[0][0]

    def test_single_word(self):
        image, boxes, texts = self._line(1)
        assert len(ngram_crop(image, boxes, texts, 0, 3)) == 1

    def test_overlapping_boxes_rejected(self):
        image, boxes, texts = self._line(2)
        boxes[1] = (boxes[0][1] - 5, boxes[1][1])
        with pytest.raises(ManifestError):
            ngram_crop(image, boxes, texts, 0, 2)

    def test_unsorted_boxes_rejected(self):
        image, boxes, texts = self._line(2)
        with pytest.raises(ManifestError):
            ngram_crop(image, list(reversed(boxes)), texts, 0, 2)

    @given(m=st.integers(1, 6), order=st.integers(1, 8))
    @settings(max_examples=30, deadline=None)
    def test_count_formula(self, m, order):
        image, boxes, texts = self._line(m)
        samples = ngram_crop(image, boxes, texts, 0, order)
        n = min(order, m)
        assert len(samples) == sum(m - k + 1 for k in range(1, n + 1))


class TestCurriculumCategories:
    @pytest.mark.parametrize(
        "chars,expected",
        [(1, 1), (10, 1), (24, 1), (25, 2), (48, 2), (49, 3), (88, 3)],
    )
    def test_boundaries(self, chars, expected):
        assert assign_category("x" * chars).id == expected

    @pytest.mark.parametrize("chars", [0, 89])
    def test_out_of_range(self, chars):
        with pytest.raises(ValueError):
            assign_category("x" * chars)

    def test_categories_partition_char_range(self):
        for chars in range(1, 89):
            hits = [
                cat
                for cat in CURRICULUM_CATEGORIES
                if cat.char_range[0] <= chars <= cat.char_range[1]
            ]
            assert len(hits) == 1

    def test_width_ranges_cover_table(self):
        assert CURRICULUM_CATEGORIES[0].width_range[0] == 64
        assert CURRICULUM_CATEGORIES[-1].width_range[1] == 2160


class TestManifest:
    def test_round_trip_with_escapes(self, tmp_path):
        records = [
            ManifestRecord("a.png", "w1", "plain text"),
            ManifestRecord("b.png", "w2", "tab\there\nand newline"),
            ManifestRecord("c.png", "w1", "boxed", word_boxes=[(0, 10), (12, 30)]),
        ]
        path = tmp_path / "m.tsv"
        save_manifest(Manifest(records), str(path))
        loaded = load_manifest(str(path))
        assert [r.transcription for r in loaded.records] == [
            r.transcription for r in records
        ]
        assert loaded.records[2].word_boxes == [(0, 10), (12, 30)]

    def test_malformed_line_rejected(self, tmp_path):
        path = tmp_path / "bad.tsv"
        path.write_text("only_one_field\n")
        with pytest.raises(ManifestError):
            load_manifest(str(path))

    def test_empty_transcription_rejected(self, tmp_path):
        path = tmp_path / "bad.tsv"
        path.write_text("a.png\tw1\t\n")
        with pytest.raises(ManifestError):
            load_manifest(str(path))

    def test_writer_index_dense_and_sorted(self):
        manifest = Manifest(
            [
                ManifestRecord("a.png", "zed", "x"),
                ManifestRecord("b.png", "abe", "y"),
            ]
        )
        assert manifest.writer_index() == {"abe": 0, "zed": 1}


class TestToyDataset:
    def test_deterministic_bytes(self, tmp_path):
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        make_toy_dataset(2, 10, seed=7, out_dir=str(out_a))
        make_toy_dataset(2, 10, seed=7, out_dir=str(out_b))
        names = sorted(os.listdir(out_a / "images"))
        assert names == sorted(os.listdir(out_b / "images"))
        match, mismatch, errors = filecmp.cmpfiles(
            out_a / "images", out_b / "images", names, shallow=False
        )
        assert not mismatch and not errors
        assert (out_a / "manifest.tsv").read_bytes() == (out_b / "manifest.tsv").read_bytes()

    def test_invariants(self, toy_samples, alphabet):
        for s in toy_samples:
            assert s.image.shape[0] == 64
            assert all(c in alphabet for c in s.transcription)
            assert 1 <= len(s.transcription) <= 12
            assert s.width <= 320

    def test_needs_two_writers(self, tmp_path):
        with pytest.raises(ValueError):
            make_toy_dataset(1, 5, seed=0, out_dir=str(tmp_path))

    def test_ngram_expansion_of_toy_manifest(self, toy_dir, alphabet):
        manifest = load_manifest(str(toy_dir / "manifest.tsv"))
        samples, report = expand_manifest_ngrams(manifest, alphabet, order=3)
        assert not report.rejected
        multi = [r for r in manifest.records if len(r.word_boxes) > 1]
        expected = sum(
            m * (m + 1) // 2 for m in (len(r.word_boxes) for r in manifest.records)
        )
        assert report.accepted == len(samples) == expected
        assert multi, "toy data should contain multi-word lines"


class TestIngestion:
    def test_rejection_report(self, tmp_path):
        import cv2

        img_path = tmp_path / "img.png"
        cv2.imwrite(str(img_path), np.full((64, 3000), 255, dtype=np.uint8))
        ok_path = tmp_path / "ok.png"
        cv2.imwrite(str(ok_path), np.full((64, 100), 255, dtype=np.uint8))
        manifest = Manifest(
            [
                ManifestRecord("img.png", "w", "too wide"),
                ManifestRecord("ok.png", "w", "badéchar"),
                ManifestRecord("ok.png", "w", "x" * 89),
                ManifestRecord("ok.png", "w", "fine"),
            ],
            root=str(tmp_path),
        )
        samples, report = load_samples(manifest, Alphabet())
        assert report.accepted == 1
        assert len(report.rejected) == 3
        assert len(samples) == 1
        assert "rejected 3" in report.summary()

    def test_statistics_table(self, toy_samples):
        table = dataset_statistics(toy_samples)
        assert "samples" in table and "writers" in table and "category 1" in table


class TestStyleSet:
    def test_requires_images(self):
        with pytest.raises(ValueError):
            StyleSet([], writer_id=0)

    def test_height_check(self):
        with pytest.raises(ValueError):
            StyleSet([np.zeros((32, 10), dtype=np.float32)], writer_id=0)


class TestWriterLearnability:
    def test_small_classifier_separates_toy_writers(self, tmp_path):
        # Gates the usefulness of the procedural writers: a small conv
        # classifier must tell two of them apart from held-out images.
        import torch

        from scribegen.metrics import desk_extractor, train_extractor

        make_toy_dataset(2, 100, seed=3, out_dir=str(tmp_path), max_chars=12, max_width=320)
        samples, _ = load_samples(load_manifest(str(tmp_path / "manifest.tsv")), Alphabet())
        order = np.random.default_rng(0).permutation(len(samples))
        train = [samples[i] for i in order[:160]]
        held_out = [samples[i] for i in order[160:]]
        torch.manual_seed(0)
        extractor = desk_extractor(num_writers=2)
        train_extractor(extractor, train, steps=250, seed=0)
        correct = sum(
            int(
                extractor(
                    torch.as_tensor(s.image, dtype=torch.float32)[None, None]
                ).argmax()
            )
            == s.writer_id
            for s in held_out
        )
        assert correct / len(held_out) >= 0.9
