"""Per-pixel uncertainty measures over a sample stack.

All entropies and divergences are in bits (log base 2), and every logarithm
clamps its argument at ``EPS = 1e-12``.  Using one base and one clamp
everywhere is what keeps the decomposition identity

    total_entropy = expected_entropy + mutual_information

exact to rounding, pixel by pixel.

Distributions are arrays whose last axis holds the K category
probabilities; every function broadcasts over leading axes, so the same
code serves a single pixel, a map, or a whole stack.  The segmentation
pipeline uses K=2 (background, foreground) but nothing here assumes it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .raster import Raster
from .tta import SampleStack, aggregate_mean

EPS = 1e-12

# image_uncertainty_score / persistence names for the decomposition rasters
MAP_KINDS = ("total", "data", "model", "ekl", "variance")


def _checked_dist(p) -> np.ndarray:
    arr = np.asarray(p, dtype=np.float64)
    if arr.ndim < 1 or arr.shape[-1] < 2:
        raise DataError("a distribution needs at least two categories on the last axis")
    if not np.isfinite(arr).all() or arr.min() < 0.0 or arr.max() > 1.0:
        raise DataError("category probabilities must lie in [0, 1]")
    sums = arr.sum(axis=-1)
    if np.abs(sums - 1.0).max() > 1e-9:
        raise DataError("category probabilities must sum to 1 within 1e-9")
    return arr


def _log2c(arr: np.ndarray) -> np.ndarray:
    return np.log2(np.maximum(arr, EPS))


def entropy(p) -> float | np.ndarray:
    """Shannon entropy in bits, broadcasting over leading axes.

    Zero components contribute exactly zero (the 0 log 0 limit holds
    because 0.0 times the clamped log is IEEE zero).
    """
    arr = _checked_dist(p)
    h = -(arr * _log2c(arr)).sum(axis=-1) + 0.0   # + 0.0 turns -0.0 into +0.0
    return float(h) if h.ndim == 0 else h


def max_probability(p) -> float | np.ndarray:
    """Largest category probability, broadcasting over leading axes."""
    arr = _checked_dist(p)
    m = arr.max(axis=-1)
    return float(m) if m.ndim == 0 else m


def kl_bits(p, q) -> float | np.ndarray:
    """KL(p || q) in bits on the last axis, with the shared log clamp."""
    parr = _checked_dist(p)
    qarr = _checked_dist(q)
    d = (parr * (_log2c(parr) - _log2c(qarr))).sum(axis=-1) + 0.0
    return float(d) if d.ndim == 0 else d


def expected_softmax(stack: SampleStack) -> Raster:
    """Pixelwise mean probability of the stack (alias of aggregate_mean)."""
    return aggregate_mean(stack)


@dataclass(frozen=True)
class UncertaintyMaps:
    """The decomposition of a sample stack into per-pixel measures.

    total_entropy splits as expected_entropy (data/aleatoric part) plus
    mutual_information (model/epistemic part); ekl, variance and max_prob
    are companion measures over the same stack, and mean_prob is the
    expected softmax the measures are taken around.
    """

    total_entropy: Raster
    expected_entropy: Raster
    mutual_information: Raster
    ekl: Raster
    variance: Raster
    max_prob: Raster
    mean_prob: Raster

    def __post_init__(self):
        shape = self.mean_prob.shape
        for name in ("total_entropy", "expected_entropy", "mutual_information",
                     "ekl", "variance", "max_prob"):
            raster = getattr(self, name)
            if raster.shape != shape:
                raise DataError(f"{name} shape {raster.shape} != {shape}")

    def by_kind(self, kind: str) -> Raster:
        try:
            return {"total": self.total_entropy, "data": self.expected_entropy,
                    "model": self.mutual_information, "ekl": self.ekl,
                    "variance": self.variance}[kind]
        except KeyError:
            raise DataError(f"unknown uncertainty kind {kind!r}; "
                            f"expected one of {MAP_KINDS}") from None


def decompose(stack: SampleStack) -> UncertaintyMaps:
    """Compute every uncertainty measure of a stack in one pass.

    Pixels whose samples are all identical have zero spread by definition,
    and the epistemic measures there are forced to exactly zero: summing T
    equal floats and dividing by T leaves rounding residue on the order of
    1e-17, which would otherwise leak into MI, EKL and variance.  T=1 is
    the degenerate case of this rule, so a single-sample stack gets MI =
    EKL = variance = 0 and expected = total.
    """
    fg = stack.probs                                        # (T, h, w)
    no_spread = np.ptp(fg, axis=0) == 0.0
    mean_fg = np.where(no_spread, fg[0], fg.mean(axis=0))

    dist = np.stack([1.0 - fg, fg], axis=-1)                # (T, h, w, 2)
    mean_dist = np.stack([1.0 - mean_fg, mean_fg], axis=-1)

    total = entropy(mean_dist)
    expected = np.where(no_spread, total, entropy(dist).mean(axis=0))
    mi = np.where(no_spread, 0.0, np.maximum(total - expected, 0.0))
    # Gibbs guarantees KL >= 0, but the log clamp can undershoot by ~EPS
    # when samples straddle the clamp; floor the crumbs like mi above
    mean_kl = np.maximum(kl_bits(mean_dist, dist).mean(axis=0), 0.0)
    ekl_map = np.where(no_spread, 0.0, mean_kl)
    var = np.where(no_spread, 0.0, ((fg - mean_fg) ** 2).mean(axis=0))
    maxp = max_probability(mean_dist)

    return UncertaintyMaps(
        total_entropy=Raster(total, "uncertainty"),
        expected_entropy=Raster(expected, "uncertainty"),
        mutual_information=Raster(mi, "uncertainty"),
        ekl=Raster(ekl_map, "uncertainty"),
        variance=Raster(var, "uncertainty"),
        max_prob=Raster(maxp, "probability"),
        mean_prob=Raster(mean_fg, "probability"),
    )


def ekl(stack: SampleStack) -> Raster:
    """Mean over samples of KL(mean distribution || sample distribution)."""
    return decompose(stack).ekl


def variance(stack: SampleStack) -> Raster:
    """Population variance (divide by T) of the foreground probability."""
    return decompose(stack).variance


def image_uncertainty_score(maps: UncertaintyMaps, kind: str = "total") -> float:
    """Image-level score: the mean of the selected raster over all pixels."""
    if kind not in ("total", "data", "model"):
        raise DataError(f"score kind must be total, data or model, got {kind!r}")
    return float(maps.by_kind(kind).values.mean())
