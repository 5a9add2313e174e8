"""Command-line entry point wiring the pipeline end to end."""

from __future__ import annotations

import argparse
import datetime
import os
import sys

import numpy as np
import torch

from .alphabet import Alphabet
from .config import (
    TrainingConfig,
    apply_overrides,
    config_hash,
    desk_config,
    load_config,
    save_config,
)
from .data import dataset_statistics, load_manifest, load_samples
from .generation import (
    build_style_set,
    generate_line,
    interpolate_styles,
    load_style_images,
    write_generated,
)
from .imaging import normalize_image, read_grayscale
from .metrics import (
    desk_extractor,
    histograms_tsv,
    train_extractor,
    vfid,
    writer_metric_histograms,
)
from .toydata import make_toy_dataset
from .training import load_checkpoint, run_curriculum


def _write_run_manifest(out_dir: str, args, config: TrainingConfig | None = None) -> None:
    os.makedirs(out_dir, exist_ok=True)
    lines = [
        f"command={' '.join(sys.argv)}",
        f"timestamp={datetime.datetime.now().isoformat(timespec='seconds')}",
        f"seed={getattr(args, 'seed', None)}",
    ]
    if config is not None:
        lines.append(f"config_hash={config_hash(config)}")
        save_config(config, os.path.join(out_dir, "effective-config.txt"))
    with open(os.path.join(out_dir, "run.txt"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def _resolve_config(args) -> TrainingConfig:
    config = desk_config() if args.preset == "desk" else TrainingConfig()
    if args.config:
        config = load_config(args.config, base=config)
    if args.set:
        config = apply_overrides(config, args.set)
    if args.seed is not None:
        config = config.replace(seed=args.seed)
    return config


def _load_dataset(manifest_path: str, alphabet: Alphabet, max_width: int, max_chars: int):
    manifest = load_manifest(manifest_path)
    samples, report = load_samples(manifest, alphabet, max_width, max_chars)
    if report.rejected:
        print(report.summary(), file=sys.stderr)
    if not samples:
        raise ValueError(f"no usable samples in {manifest_path}")
    return samples


def _images_from_path(path: str, alphabet: Alphabet):
    """A directory of PNGs or a manifest file, as the vfid inputs."""
    if os.path.isdir(path):
        return load_style_images(path)
    samples = _load_dataset(path, alphabet, max_width=10**9, max_chars=10**9)
    return [s.image for s in samples]


def cmd_make_toy_data(args) -> int:
    _write_run_manifest(args.out, args)
    manifest = make_toy_dataset(
        args.writers,
        args.per_writer,
        args.seed,
        args.out,
        max_chars=args.max_chars,
        max_width=args.max_width,
        max_words=args.max_words,
    )
    print(f"wrote {len(manifest)} samples under {args.out}")
    return 0


def cmd_train(args) -> int:
    config = _resolve_config(args)
    _write_run_manifest(args.out, args, config)
    alphabet = Alphabet()
    samples = _load_dataset(args.data, alphabet, config.max_image_width, config.max_text_length)
    print(dataset_statistics(samples))
    model, _ = run_curriculum(samples, config, alphabet, args.out)
    print(f"training complete; checkpoints under {args.out}")
    return 0


def cmd_generate(args) -> int:
    torch.manual_seed(args.seed)
    model, _ = load_checkpoint(args.checkpoint)
    images = load_style_images(args.style_dir)
    style_set = build_style_set(images, model.config.style_set_size, seed=args.seed)
    line = generate_line(model, args.text, style_set, pad_width=args.width or None)
    path = write_generated(line, args.out, "generated")
    print(path)
    return 0


def cmd_interpolate(args) -> int:
    torch.manual_seed(args.seed)
    model, _ = load_checkpoint(args.checkpoint)
    set_a = build_style_set(
        load_style_images(args.style_a), model.config.style_set_size, 0, args.seed
    )
    set_b = build_style_set(
        load_style_images(args.style_b), model.config.style_set_size, 1, args.seed
    )
    frames = interpolate_styles(
        model, args.text, set_a, set_b, args.steps, pad_width=args.width or None
    )
    for k, frame in enumerate(frames):
        write_generated(frame, args.out, f"interp_{k:03d}")
    print(f"wrote {len(frames)} frames under {args.out}")
    return 0


def cmd_vfid(args) -> int:
    torch.manual_seed(args.seed)
    alphabet = Alphabet()
    images_a = _images_from_path(args.set_a, alphabet)
    images_b = _images_from_path(args.set_b, alphabet)
    extractor = desk_extractor(num_writers=max(2, args.extractor_writers))
    if args.extractor:
        extractor.load_state_dict(torch.load(args.extractor, weights_only=True))
    else:
        print("note: using an untrained extractor; pass --extractor for a trained one",
              file=sys.stderr)
    score = vfid(images_a, images_b, extractor)
    print(f"{score:.6f}")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "vfid.txt"), "w", encoding="utf-8") as fh:
            fh.write(
                "{"
                + f'"set_a": "{args.set_a}", "set_b": "{args.set_b}", '
                + f'"count_a": {len(images_a)}, "count_b": {len(images_b)}, '
                + f'"vfid": {score:.6f}'
                + "}\n"
            )
    return 0


def cmd_histograms(args) -> int:
    torch.manual_seed(args.seed)
    np.random.seed(args.seed)
    alphabet = Alphabet()
    samples = _load_dataset(args.data, alphabet, 10**9, 10**9)
    num_writers = max(s.writer_id for s in samples) + 1
    os.makedirs(args.out, exist_ok=True)
    overlaps = {}
    for name, levels in (("vfid", (1, 2, 4)), ("fid", (1,))):
        torch.manual_seed(args.seed)
        extractor = desk_extractor(num_writers, levels=levels)
        train_extractor(extractor, samples, steps=args.train_steps, seed=args.seed)
        report = writer_metric_histograms(
            samples,
            extractor,
            num_pairs=args.pairs,
            subset_size=args.subset_size,
            seed=args.seed,
        )
        with open(os.path.join(args.out, f"{name}-histogram.tsv"), "w") as fh:
            fh.write(histograms_tsv(report) + "\n")
        overlaps[name] = report.overlap
        print(f"{name} overlap {report.overlap:.4f}")
    with open(os.path.join(args.out, "overlaps.txt"), "w") as fh:
        for name, value in overlaps.items():
            fh.write(f"{name}\t{value:.6f}\n")
    return 0


def cmd_htr_train(args) -> int:
    from .htr import HTRSettings, build_recognizer, run_htr_experiment, train_recognizer

    torch.manual_seed(args.seed)
    config = _resolve_config(args)
    _write_run_manifest(args.out, args, config)
    alphabet = Alphabet()
    samples = _load_dataset(args.data, alphabet, config.max_image_width, config.max_text_length)

    if args.experiment:
        model, _ = load_checkpoint(args.generator)
        rng = np.random.default_rng(args.seed)
        order = rng.permutation(len(samples))
        if args.experiment == "supervised":
            split = max(1, int(0.8 * len(samples)))
            train = [samples[i] for i in order[:split]]
            test = [samples[i] for i in order[split:]] or train
            table = run_htr_experiment(
                "supervised", model, alphabet, train, test,
                settings=HTRSettings(iterations=args.iterations, seed=args.seed),
            )
        else:
            writers = sorted({s.writer_id for s in samples})
            half = writers[: max(1, len(writers) // 2)]
            source = [s for s in samples if s.writer_id in half]
            target = [s for s in samples if s.writer_id not in half] or source
            t_split = max(1, int(0.7 * len(target)))
            table = run_htr_experiment(
                args.experiment, model, alphabet, source, source,
                target_train=target[:t_split], target_test=target[t_split:] or target,
                settings=HTRSettings(iterations=args.iterations, seed=args.seed),
            )
        out_path = os.path.join(args.out, f"htr-{args.experiment}.tsv")
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(table.to_tsv() + "\n")
        print(table.to_tsv())
        return 0

    recognizer = build_recognizer(config, alphabet)
    train_recognizer(
        recognizer, samples, alphabet, config, args.iterations,
        lr=args.lr, seed=args.seed, augment=args.augment,
    )
    from .config import config_to_text

    payload = {
        "recognizer": recognizer.state_dict(),
        "alphabet": alphabet.symbols,
        "config_text": config_to_text(config),
    }
    torch.save(payload, os.path.join(args.out, "recognizer.pt"))
    print(f"saved recognizer under {args.out}")
    return 0


def cmd_htr_eval(args) -> int:
    from .config import config_from_text
    from .htr import build_recognizer, evaluate_recognizer

    payload = torch.load(args.checkpoint, map_location="cpu", weights_only=False)
    alphabet = Alphabet(payload["alphabet"])
    config = config_from_text(payload["config_text"])
    recognizer = build_recognizer(config, alphabet)
    recognizer.load_state_dict(payload["recognizer"])
    samples = _load_dataset(args.data, alphabet, config.max_image_width, config.max_text_length)
    summary = evaluate_recognizer(recognizer, samples, alphabet)
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "predictions.tsv"), "w", encoding="utf-8") as fh:
        fh.write("reference\thypothesis\tcer\n")
        for row in summary.rows:
            fh.write(f"{row.reference}\t{row.hypothesis}\t{row.cer:.4f}\n")
    print(f"CER {summary.cer:.4f}  WER {summary.wer:.4f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scribegen",
        description="Few-shot handwritten text-line synthesis and evaluation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed_default=0):
        p.add_argument("--seed", type=int, default=seed_default)
        p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("make-toy-data", help="render the procedural toy dataset")
    common(p)
    p.add_argument("--writers", type=int, required=True)
    p.add_argument("--per-writer", type=int, required=True)
    p.add_argument("--max-chars", type=int, default=24)
    p.add_argument("--max-width", type=int, default=2160)
    p.add_argument("--max-words", type=int, default=3)
    p.set_defaults(func=cmd_make_toy_data)

    p = sub.add_parser("train", help="run curriculum training on a manifest")
    common(p, seed_default=None)
    p.add_argument("--data", required=True, help="manifest TSV")
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--preset", choices=["desk", "full"], default="desk")
    p.add_argument("--set", action="append", default=[], help="override key=value")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("generate", help="synthesize one line from style exemplars")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--style-dir", required=True)
    p.add_argument("--text", required=True)
    p.add_argument("--width", type=int, default=0)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("interpolate", help="traverse between two styles")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--style-a", required=True)
    p.add_argument("--style-b", required=True)
    p.add_argument("--text", required=True)
    p.add_argument("--steps", type=int, default=11)
    p.add_argument("--width", type=int, default=0)
    p.set_defaults(func=cmd_interpolate)

    p = sub.add_parser("vfid", help="variable-length Frechet distance of two sets")
    p.add_argument("set_a", help="directory of PNGs or manifest")
    p.add_argument("set_b", help="directory of PNGs or manifest")
    p.add_argument("--extractor", help="trained extractor state file")
    p.add_argument("--extractor-writers", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="")
    p.set_defaults(func=cmd_vfid)

    p = sub.add_parser("histograms", help="same/cross-writer separability study")
    common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--pairs", type=int, default=30)
    p.add_argument("--subset-size", type=int, default=12)
    p.add_argument("--train-steps", type=int, default=150)
    p.set_defaults(func=cmd_histograms)

    p = sub.add_parser("htr-train", help="train the standalone recognizer or run experiments")
    common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--preset", choices=["desk", "full"], default="desk")
    p.add_argument("--set", action="append", default=[])
    p.add_argument("--iterations", type=int, default=300)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--augment", action="store_true")
    p.add_argument("--experiment", choices=["supervised", "transfer", "fewshot"])
    p.add_argument("--generator", help="synthesis checkpoint for --experiment")
    p.set_defaults(func=cmd_htr_train)

    p = sub.add_parser("htr-eval", help="evaluate a trained recognizer on a manifest")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.set_defaults(func=cmd_htr_eval)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "seed", None) is not None:
        torch.manual_seed(args.seed)
        np.random.seed(args.seed)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: missing input: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:  # noqa: BLE001 - single-line contract for tooling
        message = str(exc).replace("\n", " ")
        print(f"error: {message}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
