import numpy as np
import pytest
import torch

from scribegen.htr import (
    HTRSettings,
    augment_image,
    build_recognizer,
    evaluate_recognizer,
    run_htr_experiment,
    style_pools_from_samples,
    synthesize_samples,
    train_recognizer,
)


class TestAugmentation:
    def test_height_and_range_preserved(self, rng):
        image = rng.random((64, 120)).astype(np.float32)
        out = augment_image(image, rng)
        assert out.shape[0] == 64
        assert out.min() >= 0.0 and out.max() <= 1.0

    def test_randomized_but_seeded(self):
        image = np.random.default_rng(1).random((64, 90)).astype(np.float32)
        a = augment_image(image, np.random.default_rng(5))
        b = augment_image(image, np.random.default_rng(5))
        c = augment_image(image, np.random.default_rng(6))
        assert np.array_equal(a, b)
        assert a.shape != c.shape or not np.array_equal(a, c)


class TestSynthesis:
    def test_generates_requested_count_with_pool_styles(self, tiny_model, toy_samples):
        pools = style_pools_from_samples(toy_samples)
        lexicon = ["sun", "moon", "tide pool"]
        out = synthesize_samples(tiny_model, pools, lexicon, count=6, seed=0)
        assert len(out) == 6
        for s in out:
            assert s.image.shape[0] == 64
            assert s.transcription in lexicon
            assert 0.0 <= s.image.min() and s.image.max() <= 1.0
            assert s.writer_id in pools

    def test_rejects_unusable_lexicon(self, tiny_model, toy_samples):
        pools = style_pools_from_samples(toy_samples)
        with pytest.raises(ValueError):
            synthesize_samples(tiny_model, pools, ["x" * 500], count=2)


class TestRecognizerTraining:
    def test_loss_decreases(self, tiny_config, alphabet, toy_samples):
        torch.manual_seed(0)
        recognizer = build_recognizer(tiny_config, alphabet)
        trace = train_recognizer(
            recognizer, toy_samples[:40], alphabet, tiny_config, iterations=30, lr=1e-3
        )
        assert np.mean(trace[:5]) > np.mean(trace[-5:])

    def test_evaluation_summary(self, tiny_config, alphabet, toy_samples):
        torch.manual_seed(0)
        recognizer = build_recognizer(tiny_config, alphabet)
        summary = evaluate_recognizer(recognizer, toy_samples[:4], alphabet)
        assert len(summary.rows) == 4
        assert summary.cer >= 0.0 and summary.wer >= 0.0


class TestExperimentDriver:
    @pytest.fixture()
    def split(self, toy_samples):
        source = [s for s in toy_samples if s.writer_id < 2]
        target = [s for s in toy_samples if s.writer_id >= 2]
        return source[:20], source[20:26], target[:16], target[16:22]

    def test_supervised_rows(self, tiny_model, alphabet, split):
        train, test, _, _ = split
        table = run_htr_experiment(
            "supervised",
            tiny_model,
            alphabet,
            train,
            test,
            settings=HTRSettings(iterations=2, finetune_iterations=2, synth_count=4),
        )
        assert [r.condition for r in table.rows] == [
            "real",
            "real+synthetic",
            "real+synthetic+augmented",
        ]
        assert table.rows[1].train_synth == 4
        tsv = table.to_tsv()
        assert tsv.splitlines()[0] == "condition\ttrain_real\ttrain_synth\tcer\twer"

    def test_transfer_rows(self, tiny_model, alphabet, split):
        train, _, target_train, target_test = split
        table = run_htr_experiment(
            "transfer",
            tiny_model,
            alphabet,
            train,
            train,
            target_train=target_train,
            target_test=target_test,
            settings=HTRSettings(iterations=2, finetune_iterations=2, synth_count=4),
        )
        assert [r.condition for r in table.rows] == [
            "source-only",
            "synthetic-target-style",
            "target-real-upper",
        ]

    def test_fewshot_rows(self, tiny_model, alphabet, split):
        train, _, target_train, target_test = split
        table = run_htr_experiment(
            "fewshot",
            tiny_model,
            alphabet,
            train,
            train,
            target_train=target_train,
            target_test=target_test,
            settings=HTRSettings(
                iterations=2, finetune_iterations=2, synth_count=4, fewshot_sizes=(2, 4)
            ),
        )
        conditions = [r.condition for r in table.rows]
        assert conditions[0] == "baseline"
        assert "real(2)" in conditions and "real(2)+synthetic" in conditions
        assert "real(4)" in conditions and "real(4)+synthetic" in conditions

    def test_transfer_requires_target(self, tiny_model, alphabet, split):
        train, test, _, _ = split
        with pytest.raises(ValueError):
            run_htr_experiment("transfer", tiny_model, alphabet, train, test)

    def test_unknown_mode_rejected(self, tiny_model, alphabet, split):
        train, test, _, _ = split
        with pytest.raises(ValueError):
            run_htr_experiment("zero-shot", tiny_model, alphabet, train, test)
