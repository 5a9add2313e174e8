"""Evaluation: CER/WER, variable-length Fréchet distance, writer separability."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn

from .nets.backbones import group_norm

PYRAMID_LEVELS = (1, 2, 4)
COVARIANCE_RIDGE = 1e-6


# ---------------------------------------------------------------------------
# Edit distances
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EditDistanceReport:
    substitutions: int
    insertions: int
    deletions: int
    reference_length: int

    @property
    def distance(self) -> int:
        return self.substitutions + self.insertions + self.deletions

    @property
    def rate(self) -> float:
        return self.distance / self.reference_length


def edit_distance_counts(reference, hypothesis) -> tuple:
    """Minimum-cost alignment counts (substitutions, insertions, deletions).

    Insertions are hypothesis tokens without a reference partner, deletions
    are reference tokens missing from the hypothesis.
    """
    m, n = len(reference), len(hypothesis)
    dist = [[0] * (n + 1) for _ in range(m + 1)]
    for i in range(1, m + 1):
        dist[i][0] = i
    for j in range(1, n + 1):
        dist[0][j] = j
    for i in range(1, m + 1):
        ref_tok = reference[i - 1]
        row, prev = dist[i], dist[i - 1]
        for j in range(1, n + 1):
            sub = prev[j - 1] + (ref_tok != hypothesis[j - 1])
            row[j] = min(sub, prev[j] + 1, row[j - 1] + 1)
    subs = ins = dels = 0
    i, j = m, n
    while i > 0 or j > 0:
        if i > 0 and j > 0 and dist[i][j] == dist[i - 1][j - 1] + (
            reference[i - 1] != hypothesis[j - 1]
        ):
            subs += reference[i - 1] != hypothesis[j - 1]
            i, j = i - 1, j - 1
        elif i > 0 and dist[i][j] == dist[i - 1][j] + 1:
            dels += 1
            i -= 1
        else:
            ins += 1
            j -= 1
    return subs, ins, dels


def _edit_report(reference, hypothesis) -> EditDistanceReport:
    if len(reference) == 0:
        raise ValueError("error rate is undefined for an empty reference")
    s, i, d = edit_distance_counts(reference, hypothesis)
    return EditDistanceReport(s, i, d, len(reference))


def cer(reference: str, hypothesis: str) -> EditDistanceReport:
    """Character error report: edit counts normalized by the reference length."""
    return _edit_report(tuple(reference), tuple(hypothesis))


def wer(reference: str, hypothesis: str) -> EditDistanceReport:
    """Word error report over whitespace tokens."""
    ref_words = tuple(reference.split())
    if not ref_words:
        raise ValueError("error rate is undefined for a reference without words")
    return _edit_report(ref_words, tuple(hypothesis.split()))


def corpus_error_rate(pairs) -> float:
    """Pooled rate over (reference report) pairs: total edits / total length."""
    reports = list(pairs)
    total_len = sum(r.reference_length for r in reports)
    return sum(r.distance for r in reports) / total_len


# ---------------------------------------------------------------------------
# Pooling and feature extraction
# ---------------------------------------------------------------------------

class PyramidPool(nn.Module):
    """Width-wise pyramid averaging producing a width-independent vector.

    Each level splits the width axis into that many bins (earlier bins take
    the remainder) and averages them; the per-bin means of all levels are
    concatenated.  Level (1,) reduces to plain global average pooling.
    """

    def __init__(self, levels=PYRAMID_LEVELS):
        super().__init__()
        self.levels = tuple(levels)

    def output_dim(self, channels: int) -> int:
        return channels * sum(self.levels)

    def _pool_one(self, features: torch.Tensor) -> torch.Tensor:
        width = features.shape[-1]
        if width < max(self.levels):
            raise ValueError(
                f"feature width {width} is too narrow for pyramid levels {self.levels}"
            )
        pooled = []
        for level in self.levels:
            pooled.extend(chunk.mean(dim=-1) for chunk in features.tensor_split(level, dim=-1))
        return torch.cat(pooled, dim=-1)

    def forward(self, features: torch.Tensor, feature_widths=None) -> torch.Tensor:
        """(B, C, W) -> (B, C * sum(levels)).

        `feature_widths` restricts pooling to each sample's leading columns so
        batches padded to a common width pool exactly like unpadded images.
        """
        if feature_widths is None:
            return self._pool_one(features)
        rows = [
            self._pool_one(features[i, :, :w]) for i, w in enumerate(feature_widths)
        ]
        return torch.stack(rows)


class ConvWriterNet(nn.Module):
    """Six-layer conv feature trunk for desk-scale metric models.

    Collapses the 64-px height completely while keeping 1/16 of the width, so
    the output reads as a width-indexed feature sequence.
    """

    def __init__(self, base_width: int = 16):
        super().__init__()
        b = base_width
        plan = [b, 2 * b, 3 * b, 4 * b, 5 * b, 6 * b]
        pools = [(2, 2), (2, 2), (2, 2), (2, 2), (2, 1), (2, 1)]
        layers = []
        channels = 1
        for out, pool in zip(plan, pools):
            layers += [
                nn.Conv2d(channels, out, 3, 1, 1),
                group_norm(out),
                nn.ReLU(inplace=True),
                nn.AvgPool2d(pool, ceil_mode=True),
            ]
            channels = out
        self.features = nn.Sequential(*layers)
        self.out_channels = channels

    def feature_map(self, images: torch.Tensor) -> torch.Tensor:
        """(B, 1, 64, W) -> (B, C, ~W/16) with the height folded away."""
        fmap = self.features(images)
        b, c, h, w = fmap.shape
        return fmap.reshape(b, c * h, w)


class InceptionTrunk(nn.Module):
    """InceptionV3 layers up to Mixed_6e, tolerant of 64-px-tall inputs.

    The deeper 17x17 -> 8x8 reduction needs more than 64 rows, so the trunk
    stops where variable-height handwriting still fits.  Single-channel input
    is repeated to the three channels the stem expects.  Intended for the
    full-scale metric model; pretrained weights can be loaded into `.net`.
    """

    def __init__(self):
        super().__init__()
        from torchvision.models import inception_v3

        net = inception_v3(weights=None, aux_logits=True, init_weights=True)
        self.net = net
        self.stages = nn.Sequential(
            net.Conv2d_1a_3x3,
            net.Conv2d_2a_3x3,
            net.Conv2d_2b_3x3,
            net.maxpool1,
            net.Conv2d_3b_1x1,
            net.Conv2d_4a_3x3,
            net.maxpool2,
            net.Mixed_5b,
            net.Mixed_5c,
            net.Mixed_5d,
            net.Mixed_6a,
            net.Mixed_6b,
            net.Mixed_6c,
            net.Mixed_6d,
            net.Mixed_6e,
        )

    def feature_map(self, images: torch.Tensor) -> torch.Tensor:
        fmap = self.stages(images.repeat(1, 3, 1, 1))
        b, c, h, w = fmap.shape
        return fmap.reshape(b, c * h, w)


class FeatureExtractor(nn.Module):
    """Writer-classification model whose pooled embedding is the metric feature."""

    def __init__(self, trunk, feature_channels: int, num_writers: int, levels=PYRAMID_LEVELS):
        super().__init__()
        self.trunk = trunk
        self.pool = PyramidPool(levels)
        self.feature_dim = self.pool.output_dim(feature_channels)
        self.head = nn.Linear(self.feature_dim, num_writers)

    def pooled(self, images: torch.Tensor, image_widths=None) -> torch.Tensor:
        fmap = self.trunk.feature_map(images)
        widths = None
        if image_widths is not None:
            # The trunks shrink width 16x with ceil rounding at each pool.
            widths = [min(-(-w // 16), fmap.shape[-1]) for w in image_widths]
        return self.pool(fmap, widths)

    def forward(self, images: torch.Tensor, image_widths=None) -> torch.Tensor:
        return self.head(self.pooled(images, image_widths))

    @torch.no_grad()
    def extract(self, image: np.ndarray) -> np.ndarray:
        """Feature vector for one (64, W) image, processed alone (no padding)."""
        training = self.training
        self.eval()
        try:
            batch = torch.as_tensor(image, dtype=torch.float32)[None, None]
            return self.pooled(batch)[0].numpy()
        finally:
            self.train(training)

    @torch.no_grad()
    def extract_many(self, images) -> np.ndarray:
        return np.stack([self.extract(img) for img in images])


def desk_extractor(num_writers: int, levels=PYRAMID_LEVELS, base_width: int = 16):
    trunk = ConvWriterNet(base_width)
    return FeatureExtractor(trunk, trunk.out_channels, num_writers, levels)


def inception_extractor(num_writers: int, levels=PYRAMID_LEVELS):
    trunk = InceptionTrunk()
    return FeatureExtractor(trunk, 768 * 2, num_writers, levels)


def train_extractor(
    extractor: FeatureExtractor,
    samples,
    steps: int = 250,
    batch_size: int = 16,
    lr: float = 5e-4,
    weight_decay: float = 1e-3,
    seed: int = 0,
) -> list:
    """Fine-tune an extractor as a writer classifier; returns the loss trace."""
    rng = np.random.default_rng(seed)
    optim = torch.optim.Adam(extractor.parameters(), lr=lr, weight_decay=weight_decay)
    trace = []
    extractor.train()
    for _ in range(steps):
        picks = rng.integers(0, len(samples), size=batch_size)
        widths = [samples[i].width for i in picks]
        batch = np.zeros((batch_size, 1, 64, max(widths)), dtype=np.float32)
        targets = np.zeros(batch_size, dtype=np.int64)
        for row, i in enumerate(picks):
            s = samples[i]
            batch[row, 0, :, : s.width] = s.image
            targets[row] = s.writer_id
        logits = extractor(torch.from_numpy(batch), image_widths=widths)
        loss = nn.functional.cross_entropy(logits, torch.from_numpy(targets))
        optim.zero_grad()
        loss.backward()
        optim.step()
        trace.append(float(loss.detach()))
    extractor.eval()
    return trace


# ---------------------------------------------------------------------------
# Frechet distance
# ---------------------------------------------------------------------------

@dataclass
class FeatureGaussian:
    mean: np.ndarray
    cov: np.ndarray


def fit_feature_gaussian(features: np.ndarray, ridge: float = COVARIANCE_RIDGE) -> FeatureGaussian:
    """Gaussian fit of a (N, D) feature matrix; ridge-regularized when N < D.

    Rows are put into a canonical order first so the floating-point reductions
    do not depend on how the caller ordered or batched the images.
    """
    features = np.asarray(features, dtype=np.float64)
    n, dim = features.shape
    if n < 2:
        raise ValueError("need at least 2 samples to fit feature statistics")
    features = features[np.lexsort(features.T)]
    mean = features.mean(axis=0)
    cov = np.cov(features, rowvar=False)
    cov = np.atleast_2d(cov)
    cov = (cov + cov.T) / 2.0
    if n < dim:
        warnings.warn(
            f"only {n} samples for {dim} feature dimensions; "
            f"adding ridge {ridge:g} to the covariance",
            stacklevel=2,
        )
        cov = cov + ridge * np.eye(dim)
    return FeatureGaussian(mean=mean, cov=cov)


def _psd_sqrt(matrix: np.ndarray) -> np.ndarray:
    values, vectors = np.linalg.eigh(matrix)
    values = np.clip(values, 0.0, None)
    return (vectors * np.sqrt(values)) @ vectors.T


def frechet_distance(a: FeatureGaussian, b: FeatureGaussian) -> float:
    """Squared Frechet distance between two Gaussians.

    The cross trace uses the eigenvalues of the symmetrized product
    sqrt(Ca) Cb sqrt(Ca), with negative eigenvalues clipped to zero, which is
    robust for near-singular covariances.
    """
    diff = a.mean - b.mean
    sqrt_a = _psd_sqrt(a.cov)
    inner = sqrt_a @ b.cov @ sqrt_a
    inner = (inner + inner.T) / 2.0
    cross = np.sqrt(np.clip(np.linalg.eigvalsh(inner), 0.0, None)).sum()
    return float(diff @ diff + np.trace(a.cov) + np.trace(b.cov) - 2.0 * cross)


def frechet_from_features(features_a: np.ndarray, features_b: np.ndarray) -> float:
    return frechet_distance(fit_feature_gaussian(features_a), fit_feature_gaussian(features_b))


def vfid(images_a, images_b, extractor: FeatureExtractor) -> float:
    """Frechet distance between pooled-feature Gaussians of two image sets.

    Every image runs through the extractor alone at its own width, so the
    value does not depend on set order or batching.
    """
    if len(images_a) < 2 or len(images_b) < 2:
        raise ValueError("each image set needs at least 2 images")
    return frechet_from_features(
        extractor.extract_many(images_a), extractor.extract_many(images_b)
    )


# ---------------------------------------------------------------------------
# Same-writer / cross-writer separability
# ---------------------------------------------------------------------------

@dataclass
class SeparabilityReport:
    same_values: np.ndarray
    cross_values: np.ndarray
    bin_edges: np.ndarray
    same_mass: np.ndarray
    cross_mass: np.ndarray

    @property
    def overlap(self) -> float:
        """Shared area of the two unit-mass histograms (0 = fully separated)."""
        return float(np.minimum(self.same_mass, self.cross_mass).sum())


def writer_metric_histograms(
    samples,
    extractor: FeatureExtractor,
    num_pairs: int = 30,
    subset_size: int = 12,
    bins: int = 20,
    seed: int = 0,
) -> SeparabilityReport:
    """Metric distributions between same-writer and cross-writer subset pairs.

    Each pair draws two disjoint random subsets (from one writer, or from two
    different writers) and measures the Frechet distance between them; the
    two histograms share bin edges and are normalized to unit mass.
    """
    rng = np.random.default_rng(seed)
    by_writer = {}
    for s in samples:
        by_writer.setdefault(s.writer_id, []).append(s.image)
    eligible = [w for w, imgs in by_writer.items() if len(imgs) >= 2 * subset_size]
    if len(eligible) < 2:
        raise ValueError(
            f"need at least 2 writers with {2 * subset_size} images each"
        )
    features = {
        w: extractor.extract_many(by_writer[w]) for w in sorted(by_writer)
    }

    def subset(writer, exclude=None):
        pool = np.arange(len(features[writer]))
        if exclude is not None:
            pool = np.setdiff1d(pool, exclude)
        return rng.choice(pool, size=subset_size, replace=False)

    same = []
    for _ in range(num_pairs):
        w = eligible[rng.integers(0, len(eligible))]
        first = subset(w)
        second = subset(w, exclude=first)
        same.append(frechet_from_features(features[w][first], features[w][second]))
    cross = []
    for _ in range(num_pairs):
        wa, wb = rng.choice(len(eligible), size=2, replace=False)
        cross.append(
            frechet_from_features(
                features[eligible[wa]][subset(eligible[wa])],
                features[eligible[wb]][subset(eligible[wb])],
            )
        )

    same = np.array(same)
    cross = np.array(cross)
    all_values = np.concatenate([same, cross])
    edges = np.histogram_bin_edges(all_values, bins=bins)
    same_mass = np.histogram(same, bins=edges)[0] / len(same)
    cross_mass = np.histogram(cross, bins=edges)[0] / len(cross)
    return SeparabilityReport(same, cross, edges, same_mass, cross_mass)


def histograms_tsv(report: SeparabilityReport) -> str:
    lines = ["bin_start\tbin_end\tsame_writer\tcross_writer"]
    for k in range(len(report.same_mass)):
        lines.append(
            f"{report.bin_edges[k]:.6g}\t{report.bin_edges[k + 1]:.6g}"
            f"\t{report.same_mass[k]:.6g}\t{report.cross_mass[k]:.6g}"
        )
    lines.append(f"# overlap\t{report.overlap:.6g}")
    return "\n".join(lines)
