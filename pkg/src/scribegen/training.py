"""Two-phase adversarial optimization, curriculum schedule and checkpoints."""

from __future__ import annotations

import hashlib
import os
import warnings

import numpy as np
import torch
import torch.nn as nn

from .alphabet import Alphabet, pad_text
from .config import TrainingConfig, config_from_text, config_hash, config_to_text
from .data import CURRICULUM_CATEGORIES, BatchSampler, assign_category
from .imaging import round_up_to_multiple
from .nets import (
    ContentEncoder,
    Discriminator,
    Generator,
    Recognizer,
    StyleEncoder,
    WriterClassifier,
    content_loss,
    discriminative_loss,
    generator_adversarial_loss,
    style_sets_to_tensor,
    writer_loss,
)

CHECKPOINT_VERSION = 1


class SynthesisModel(nn.Module):
    """Bundle of all five networks with the generator-side grouping."""

    def __init__(self, config: TrainingConfig, alphabet: Alphabet, num_writers: int):
        super().__init__()
        self.config = config
        self.alphabet = alphabet
        self.num_writers = num_writers
        self.content = ContentEncoder(
            alphabet.num_classes,
            config.max_text_length,
            config.embed_dim,
            config.adain_dim,
            config.content_hidden,
        )
        self.style = StyleEncoder(
            config.style_set_size, config.style_width, config.style_backbone
        )
        self.generator = Generator(
            self.style.out_channels + config.embed_dim, config.adain_dim
        )
        self.discriminator = Discriminator(config.critic_width)
        self.writer = WriterClassifier(num_writers, config.critic_width)
        self.recognizer = Recognizer(
            alphabet.num_classes,
            config.max_text_length,
            alphabet.epsilon_index,
            config.rec_d_model,
            config.rec_heads,
            config.rec_ff,
            config.rec_dropout,
            config.rec_trunk_width,
            process_width=round_up_to_multiple(config.stages("stage_max_widths")[-1]),
        )

    def generator_modules(self) -> dict:
        return {"content": self.content, "style": self.style, "generator": self.generator}

    def critic_modules(self) -> dict:
        return {
            "discriminator": self.discriminator,
            "writer": self.writer,
            "recognizer": self.recognizer,
        }

    def generator_parameters(self):
        for module in self.generator_modules().values():
            yield from module.parameters()

    def encode_texts(self, texts) -> torch.Tensor:
        rows = [pad_text(t, self.config.max_text_length, self.alphabet).indices for t in texts]
        return torch.tensor(rows, dtype=torch.long)

    def generate(self, texts, style_tensor: torch.Tensor, charwise_length=None) -> torch.Tensor:
        """Synthesize a batch conditioned on texts and padded style stacks.

        Output is (B, 1, 64, L) in tanh range, L being the style pad width.
        """
        style_map = self.style(style_tensor)
        width, height = style_map.shape[3], style_map.shape[2]
        indices = self.encode_texts(texts).to(style_tensor.device)
        features = self.content(indices, width, height, charwise_length)
        return self.generator(features, style_map)


def parameter_fingerprint(modules) -> str:
    """Order-stable hash of every parameter tensor in the given modules."""
    digest = hashlib.sha256()
    if isinstance(modules, nn.Module):
        modules = {"module": modules}
    for prefix in sorted(modules):
        for name, param in sorted(modules[prefix].named_parameters()):
            digest.update(f"{prefix}.{name}".encode())
            digest.update(param.detach().cpu().numpy().tobytes())
    return digest.hexdigest()


def collate_images(images, width: int) -> torch.Tensor:
    """Right-pad [0, 1] line images with background zeros into one batch."""
    batch = np.zeros((len(images), 1, 64, width), dtype=np.float32)
    for row, img in enumerate(images):
        if img.shape[1] > width:
            raise ValueError(f"image of width {img.shape[1]} exceeds batch width {width}")
        batch[row, 0, :, : img.shape[1]] = img
    return torch.from_numpy(batch)


class Trainer:
    """Runs the alternating optimization.

    Phase one scores real and generated samples with the discriminator and
    fits the writer classifier and recognizer on real data; phase two
    re-generates and updates only the generator-side parameters on the joint
    objective.
    """

    def __init__(self, model: SynthesisModel, config: TrainingConfig):
        self.model = model
        self.config = config
        betas = (config.adam_beta1, config.adam_beta2)
        self.d_opt = torch.optim.Adam(
            model.discriminator.parameters(), lr=config.lr_adversarial, betas=betas
        )
        self.aux_opt = torch.optim.Adam(
            list(model.writer.parameters()) + list(model.recognizer.parameters()),
            lr=config.lr_auxiliary,
            betas=betas,
        )
        self.h_opt = torch.optim.Adam(
            model.generator_parameters(), lr=config.lr_adversarial, betas=betas
        )
        self.charwise_length = None
        self.iteration = 0

    def prepare_batch(self, real_samples, style_sets, texts, pad_width: int) -> dict:
        pad_width = round_up_to_multiple(pad_width)
        return {
            "real_images": collate_images([s.image for s in real_samples], pad_width),
            "real_widths": [s.width for s in real_samples],
            "real_targets": self.model.encode_texts(
                [s.transcription for s in real_samples]
            ),
            "real_writers": torch.tensor(
                [s.writer_id for s in real_samples], dtype=torch.long
            ),
            "style_tensor": style_sets_to_tensor(style_sets, pad_width),
            "gen_texts": list(texts),
            "gen_targets": self.model.encode_texts(texts),
            "gen_writers": torch.tensor(
                [s.writer_id for s in style_sets], dtype=torch.long
            ),
        }

    def phase_one(self, batch: dict) -> dict:
        model = self.model
        with torch.no_grad():
            fake = model.generate(
                batch["gen_texts"], batch["style_tensor"], self.charwise_length
            )
        fake01 = (fake + 1.0) / 2.0
        d_real = model.discriminator.discriminate(batch["real_images"])
        d_fake = model.discriminator.discriminate(fake01)
        d_loss = discriminative_loss(d_real, d_fake)
        self.d_opt.zero_grad()
        (-d_loss).backward()  # gradient ascent on the discriminative objective
        self.d_opt.step()

        w_loss = writer_loss(
            model.writer.classify(batch["real_images"]), batch["real_writers"]
        )
        r_loss = content_loss(
            model.recognizer(batch["real_images"], batch["real_targets"]),
            batch["real_targets"],
            model.alphabet.epsilon_index,
            self.config.label_smoothing,
        )
        self.aux_opt.zero_grad()
        (w_loss + r_loss).backward()
        self.aux_opt.step()
        return {
            "d_loss": float(d_loss.detach()),
            "w_loss": float(w_loss.detach()),
            "r_loss": float(r_loss.detach()),
        }

    def phase_two(self, batch: dict) -> dict:
        model = self.model
        fake = model.generate(
            batch["gen_texts"], batch["style_tensor"], self.charwise_length
        )
        fake01 = (fake + 1.0) / 2.0
        adv = generator_adversarial_loss(model.discriminator.discriminate(fake01))
        w_gen = writer_loss(model.writer.classify(fake01), batch["gen_writers"])
        r_gen = content_loss(
            model.recognizer(fake01, batch["gen_targets"]),
            batch["gen_targets"],
            model.alphabet.epsilon_index,
            self.config.label_smoothing,
        )
        total = adv + w_gen + r_gen
        self.h_opt.zero_grad()
        # Critic parameters collect gradients here but their optimizers never
        # consume them; they are dropped by the next phase-one zero_grad.
        total.backward()
        self.h_opt.step()
        return {
            "g_adv": float(adv.detach()),
            "g_writer": float(w_gen.detach()),
            "g_content": float(r_gen.detach()),
            "g_total": float(total.detach()),
        }

    def train_step(self, real_samples, style_sets, texts, pad_width: int, batch_ids=None) -> dict:
        batch = self.prepare_batch(real_samples, style_sets, texts, pad_width)
        report = self.phase_one(batch)
        report.update(self.phase_two(batch))
        self.iteration += 1
        report["iteration"] = self.iteration
        if not all(np.isfinite(v) for v in report.values()):
            raise RuntimeError(
                f"non-finite loss at iteration {self.iteration}; "
                f"batch ids: {batch_ids if batch_ids is not None else 'unknown'}; "
                f"report: {report}"
            )
        return report

    def run(self, sampler: BatchSampler, iterations: int, pad_width: int, log_path=None) -> list:
        trace = []
        log = open(log_path, "a", encoding="utf-8") if log_path else None
        try:
            for _ in range(iterations):
                real, styles, texts, ids = sampler.next_batch(self.config.batch_size)
                report = self.train_step(real, styles, texts, pad_width, batch_ids=ids)
                trace.append(report)
                if log:
                    log.write(
                        "\t".join(
                            [
                                str(report["iteration"]),
                                f"{report['d_loss']:.6f}",
                                f"{report['w_loss']:.6f}",
                                f"{report['r_loss']:.6f}",
                                f"{report['g_total']:.6f}",
                            ]
                        )
                        + "\n"
                    )
        finally:
            if log:
                log.close()
        return trace


def save_checkpoint(path: str, model: SynthesisModel, iteration: int = 0) -> None:
    payload = {
        "version": CHECKPOINT_VERSION,
        "iteration": iteration,
        "config_text": config_to_text(model.config),
        "config_hash": config_hash(model.config),
        "alphabet": model.alphabet.symbols,
        "num_writers": model.num_writers,
        "states": {
            name: module.state_dict()
            for name, module in {
                **model.generator_modules(),
                **model.critic_modules(),
            }.items()
        },
    }
    torch.save(payload, path)


def load_checkpoint(path: str):
    """Rebuild the model bundle from a checkpoint; returns (model, iteration)."""
    payload = torch.load(path, map_location="cpu", weights_only=False)
    if payload.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {payload.get('version')!r}")
    config = config_from_text(payload["config_text"])
    model = SynthesisModel(config, Alphabet(payload["alphabet"]), payload["num_writers"])
    modules = {**model.generator_modules(), **model.critic_modules()}
    for name, module in modules.items():
        try:
            module.load_state_dict(payload["states"][name])
        except RuntimeError as exc:
            raise ValueError(f"checkpoint does not fit module {name!r}: {exc}") from exc
    return model, payload["iteration"]


def partition_by_category(samples) -> dict:
    partition = {cat.id: [] for cat in CURRICULUM_CATEGORIES}
    for idx, sample in enumerate(samples):
        partition[assign_category(sample).id].append(idx)
    return partition


def evaluate_vfid(model: SynthesisModel, samples, extractor, sampler, count: int = 16):
    """Frechet score of freshly generated lines against real ones."""
    from .metrics import vfid

    pad = round_up_to_multiple(max(s.width for s in samples))
    fakes = []
    was_training = model.training
    model.eval()
    with torch.no_grad():
        for _ in range(0, count, 4):
            real, styles, texts, _ = sampler.next_batch(min(4, count - len(fakes)))
            batch = model.generate(
                texts, style_sets_to_tensor(styles, pad), None
            )
            fakes.extend(((batch[i, 0].numpy() + 1.0) / 2.0) for i in range(batch.shape[0]))
    model.train(was_training)
    rng = np.random.default_rng(0)
    picks = rng.choice(len(samples), size=min(len(samples), max(count, 8)), replace=False)
    return vfid([samples[i].image for i in picks], fakes, extractor)


def run_curriculum(
    samples,
    config: TrainingConfig,
    alphabet: Alphabet,
    out_dir: str,
    eval_samples=None,
    extractor=None,
    model: SynthesisModel | None = None,
):
    """Stage-wise training from short to long lines.

    Every stage trains exclusively on its own category partition; the model
    carries over between stages (architecture is width-agnostic).  Returns
    (model, history) where history records per-stage sample ids and traces.
    """
    os.makedirs(out_dir, exist_ok=True)
    torch.manual_seed(config.seed)
    num_writers = max(s.writer_id for s in samples) + 1
    if model is None:
        model = SynthesisModel(config, alphabet, num_writers)
    trainer = Trainer(model, config)
    partition = partition_by_category(samples)
    stage_iters = config.stages("stage_iterations")
    stage_chars = config.stages("stage_max_chars")
    stage_widths = config.stages("stage_max_widths")

    history = {"stages": []}
    for stage_idx, category in enumerate(CURRICULUM_CATEGORIES):
        ids = partition[category.id]
        record = {
            "category": category.id,
            "sample_ids": list(ids),
            "max_width": stage_widths[stage_idx],
            "trace": [],
        }
        history["stages"].append(record)
        if not ids:
            warnings.warn(f"curriculum category {category.id} is empty; skipping stage")
            continue
        stage_samples = [samples[i] for i in ids]
        too_wide = [s.width for s in stage_samples if s.width > stage_widths[stage_idx]]
        if too_wide:
            raise ValueError(
                f"stage {category.id} has images wider ({max(too_wide)}) than the "
                f"stage limit {stage_widths[stage_idx]}"
            )
        sampler = BatchSampler(
            stage_samples, config.style_set_size, seed=config.seed + stage_idx
        )
        trainer.charwise_length = min(stage_chars[stage_idx], config.max_text_length)
        pad_width = round_up_to_multiple(stage_widths[stage_idx])
        model.recognizer.process_width = pad_width
        log_path = os.path.join(out_dir, f"stage{category.id}.log.tsv")

        plateau = (
            stage_idx == 0
            and config.eval_interval > 0
            and eval_samples is not None
            and extractor is not None
        )
        if not plateau:
            record["trace"] = trainer.run(sampler, stage_iters[stage_idx], pad_width, log_path)
        else:
            best, since_best = float("inf"), 0
            done = 0
            while done < stage_iters[stage_idx]:
                chunk = min(config.eval_interval, stage_iters[stage_idx] - done)
                record["trace"].extend(trainer.run(sampler, chunk, pad_width, log_path))
                done += chunk
                score = evaluate_vfid(model, eval_samples, extractor, sampler)
                if score < best - 1e-9:
                    best, since_best = score, 0
                else:
                    since_best += 1
                if since_best >= config.plateau_patience:
                    break
        save_checkpoint(
            os.path.join(out_dir, f"stage{category.id}.pt"), model, trainer.iteration
        )
    save_checkpoint(os.path.join(out_dir, "final.pt"), model, trainer.iteration)
    return model, history
