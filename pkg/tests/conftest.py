import numpy as np
import pytest
import torch

from scribegen.alphabet import Alphabet
from scribegen.config import desk_config
from scribegen.data import load_manifest, load_samples
from scribegen.toydata import make_toy_dataset
from scribegen.training import SynthesisModel


@pytest.fixture(scope="session")
def alphabet():
    return Alphabet()


@pytest.fixture(scope="session")
def toy_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("toyset")
    make_toy_dataset(4, 30, seed=11, out_dir=str(out), max_chars=12, max_width=320)
    return out


@pytest.fixture(scope="session")
def toy_samples(toy_dir, alphabet):
    samples, report = load_samples(load_manifest(str(toy_dir / "manifest.tsv")), alphabet)
    assert not report.rejected
    return samples


@pytest.fixture(scope="session")
def tiny_config():
    # Smallest dimensions that keep every architectural constraint intact.
    return desk_config(
        style_width=8,
        critic_width=8,
        adain_dim=32,
        embed_dim=16,
        content_hidden=64,
        rec_d_model=64,
        rec_heads=2,
        rec_ff=128,
        rec_trunk_width=8,
        max_text_length=12,
        stage_max_chars="8,10,12",
    )


@pytest.fixture()
def tiny_model(tiny_config, alphabet):
    torch.manual_seed(0)
    return SynthesisModel(tiny_config, alphabet, num_writers=4)


@pytest.fixture()
def rng():
    return np.random.default_rng(0)
