"""Independent recognizer training and the synthetic-data boosting experiments."""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import cv2
import numpy as np
import torch

from .alphabet import Alphabet, pad_text
from .config import TrainingConfig
from .data import StyleSet, TextLineSample
from .generation import default_pad_width
from .imaging import LINE_HEIGHT, round_up_to_multiple
from .metrics import cer, corpus_error_rate, wer
from .nets import Recognizer, content_loss, style_sets_to_tensor
from .training import SynthesisModel, collate_images


def build_recognizer(config: TrainingConfig, alphabet: Alphabet) -> Recognizer:
    return Recognizer(
        alphabet.num_classes,
        config.max_text_length,
        alphabet.epsilon_index,
        config.rec_d_model,
        config.rec_heads,
        config.rec_ff,
        config.rec_dropout,
        config.rec_trunk_width,
        process_width=round_up_to_multiple(config.max_image_width),
    )


def augment_image(image: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Mild shear/scale jitter on a [0, 1] inverted line image."""
    shear = rng.uniform(-0.12, 0.12)
    scale = rng.uniform(0.92, 1.08)
    h, w = image.shape
    matrix = np.array(
        [[scale, shear, -shear * h / 2], [0.0, 1.0, 0.0]], dtype=np.float32
    )
    out_w = max(1, int(round(w * scale + abs(shear) * h)))
    warped = cv2.warpAffine(
        image,
        matrix,
        (out_w, h),
        flags=cv2.INTER_LINEAR,
        borderMode=cv2.BORDER_CONSTANT,
        borderValue=0.0,
    )
    return np.clip(warped, 0.0, 1.0)


def train_recognizer(
    recognizer: Recognizer,
    samples,
    alphabet: Alphabet,
    config: TrainingConfig,
    iterations: int,
    lr: float = 1e-4,
    seed: int = 0,
    augment: bool = False,
) -> list:
    """Teacher-forced training on labeled samples; returns the loss trace."""
    rng = np.random.default_rng(seed)
    optim = torch.optim.Adam(
        recognizer.parameters(), lr=lr, betas=(config.adam_beta1, config.adam_beta2)
    )
    trace = []
    recognizer.train()
    for _ in range(iterations):
        picks = rng.integers(0, len(samples), size=config.batch_size)
        images = []
        texts = []
        for i in picks:
            img = samples[i].image
            if augment:
                img = augment_image(img, rng)
            images.append(img)
            texts.append(samples[i].transcription)
        batch = collate_images(images, max(img.shape[1] for img in images))
        targets = torch.tensor(
            [pad_text(t, config.max_text_length, alphabet).indices for t in texts],
            dtype=torch.long,
        )
        loss = content_loss(
            recognizer(batch, targets),
            targets,
            alphabet.epsilon_index,
            config.label_smoothing,
        )
        optim.zero_grad()
        loss.backward()
        optim.step()
        trace.append(float(loss))
    recognizer.eval()
    return trace


@dataclass
class EvaluationRow:
    reference: str
    hypothesis: str
    cer: float


@dataclass
class EvaluationSummary:
    rows: list
    cer: float
    wer: float


def evaluate_recognizer(recognizer: Recognizer, samples, alphabet: Alphabet) -> EvaluationSummary:
    """Greedy-decode every sample; corpus-pooled CER/WER."""
    rows = []
    char_reports = []
    word_reports = []
    recognizer.eval()
    for sample in samples:
        image = torch.as_tensor(sample.image, dtype=torch.float32).unsqueeze(0)
        decoded = recognizer.decode_greedy(image, alphabet)
        c = cer(sample.transcription, decoded.text)
        char_reports.append(c)
        word_reports.append(wer(sample.transcription, decoded.text))
        rows.append(EvaluationRow(sample.transcription, decoded.text, c.rate))
    return EvaluationSummary(
        rows=rows,
        cer=corpus_error_rate(char_reports),
        wer=corpus_error_rate(word_reports),
    )


def synthesize_samples(
    model: SynthesisModel,
    style_pools: dict,
    lexicon,
    count: int,
    seed: int = 0,
    pad_width: int | None = None,
) -> list:
    """Generate labeled samples from unlabeled style pools and a lexicon.

    Each line draws one style pool, K exemplar images uniformly from it and a
    text string from the lexicon.  The fixed set is generated once and
    reused by the consuming training run.
    """
    max_chars = min(model.config.stages("stage_max_chars")[-1], model.config.max_text_length)
    texts = [t for t in lexicon if 1 <= len(t) <= max_chars]
    if not texts:
        raise ValueError("no lexicon entries fit the trained text length")
    rng = np.random.default_rng(seed)
    pad_width = pad_width or default_pad_width(model)
    writers = sorted(style_pools)
    model.eval()
    out = []
    with torch.no_grad():
        for start in range(0, count, 4):
            n = min(4, count - start)
            sets, batch_texts = [], []
            for _ in range(n):
                w = writers[rng.integers(0, len(writers))]
                pool = style_pools[w]
                picks = rng.choice(len(pool), size=model.config.style_set_size, replace=True)
                sets.append(StyleSet([pool[i] for i in picks], w))
                batch_texts.append(texts[rng.integers(0, len(texts))])
            rasters = model.generate(batch_texts, style_sets_to_tensor(sets, pad_width))
            for i in range(n):
                image = ((rasters[i, 0].numpy() + 1.0) / 2.0).astype(np.float32)
                out.append(TextLineSample(image, batch_texts[i], sets[i].writer_id))
    return out


def style_pools_from_samples(samples) -> dict:
    pools = {}
    for s in samples:
        pools.setdefault(s.writer_id, []).append(s.image)
    return pools


@dataclass
class ExperimentRow:
    condition: str
    train_real: int
    train_synth: int
    cer: float
    wer: float


@dataclass
class ExperimentTable:
    mode: str
    rows: list = field(default_factory=list)

    def to_tsv(self) -> str:
        lines = ["condition\ttrain_real\ttrain_synth\tcer\twer"]
        lines.extend(
            f"{r.condition}\t{r.train_real}\t{r.train_synth}\t{r.cer:.4f}\t{r.wer:.4f}"
            for r in self.rows
        )
        return "\n".join(lines)


@dataclass
class HTRSettings:
    iterations: int = 300
    finetune_iterations: int = 150
    lr: float = 1e-4
    synth_count: int = 0          # 0 means: match the real training-set size
    fewshot_sizes: tuple = (2, 8, 32)
    seed: int = 0


def run_htr_experiment(
    mode: str,
    model: SynthesisModel,
    alphabet: Alphabet,
    train_samples,
    test_samples,
    lexicon=None,
    target_train=None,
    target_test=None,
    settings: HTRSettings | None = None,
) -> ExperimentTable:
    """Measure the recognition benefit of generated data in one of three modes.

    supervised: train on real, then on real plus synthetic (styles and
        lexicon from the training set), then the same with augmentation.
    transfer: train on the source set, evaluate on the target set; compare
        against fine-tuning with synthetic lines in the target style, and
        against the real-target upper bound.
    fewshot: fine-tune a source-trained recognizer on tiny labeled target
        subsets, with and without synthetic support.
    """
    settings = settings or HTRSettings()
    config = model.config
    table = ExperimentTable(mode=mode)
    lexicon = lexicon or sorted({s.transcription for s in train_samples})

    def fresh() -> Recognizer:
        torch.manual_seed(settings.seed)
        return build_recognizer(config, alphabet)

    def fit(recognizer, data, iterations, augment=False, lr=None):
        train_recognizer(
            recognizer,
            data,
            alphabet,
            config,
            iterations,
            lr=lr or settings.lr,
            seed=settings.seed,
            augment=augment,
        )
        return recognizer

    def add_row(condition, recognizer, eval_set, n_real, n_synth):
        summary = evaluate_recognizer(recognizer, eval_set, alphabet)
        table.rows.append(ExperimentRow(condition, n_real, n_synth, summary.cer, summary.wer))

    if mode == "supervised":
        synth_count = settings.synth_count or len(train_samples)
        synth = synthesize_samples(
            model,
            style_pools_from_samples(train_samples),
            lexicon,
            synth_count,
            seed=settings.seed,
        )
        base = fit(fresh(), train_samples, settings.iterations)
        add_row("real", base, test_samples, len(train_samples), 0)
        mixed = fit(fresh(), list(train_samples) + synth, settings.iterations)
        add_row("real+synthetic", mixed, test_samples, len(train_samples), len(synth))
        augmented = fit(fresh(), list(train_samples) + synth, settings.iterations, augment=True)
        add_row(
            "real+synthetic+augmented", augmented, test_samples, len(train_samples), len(synth)
        )
    elif mode == "transfer":
        if target_train is None or target_test is None:
            raise ValueError("transfer mode needs target_train and target_test")
        source = fit(fresh(), train_samples, settings.iterations)
        add_row("source-only", source, target_test, len(train_samples), 0)
        synth_count = settings.synth_count or len(train_samples)
        synth = synthesize_samples(
            model,
            style_pools_from_samples(target_train),
            lexicon,
            synth_count,
            seed=settings.seed,
        )
        adapted = fit(
            copy.deepcopy(source), synth, settings.finetune_iterations
        )
        add_row("synthetic-target-style", adapted, target_test, len(train_samples), len(synth))
        upper = fit(copy.deepcopy(source), target_train, settings.finetune_iterations)
        add_row("target-real-upper", upper, target_test, len(target_train), 0)
    elif mode == "fewshot":
        if target_train is None or target_test is None:
            raise ValueError("fewshot mode needs target_train and target_test")
        source = fit(fresh(), train_samples, settings.iterations)
        add_row("baseline", source, target_test, len(train_samples), 0)
        synth_count = settings.synth_count or max(settings.fewshot_sizes)
        synth = synthesize_samples(
            model,
            style_pools_from_samples(target_train),
            lexicon,
            synth_count,
            seed=settings.seed,
        )
        rng = np.random.default_rng(settings.seed)
        for n in settings.fewshot_sizes:
            n = min(n, len(target_train))
            picks = rng.choice(len(target_train), size=n, replace=False)
            subset = [target_train[i] for i in picks]
            real_only = fit(copy.deepcopy(source), subset, settings.finetune_iterations)
            add_row(f"real({n})", real_only, target_test, n, 0)
            boosted = fit(
                copy.deepcopy(source), subset + synth, settings.finetune_iterations
            )
            add_row(f"real({n})+synthetic", boosted, target_test, n, len(synth))
    else:
        raise ValueError(f"unknown experiment mode {mode!r}")
    return table
