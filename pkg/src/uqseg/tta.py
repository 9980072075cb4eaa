"""Test-time augmentation: sampled transforms, their spatial inverses, and
Monte Carlo aggregation of the resulting prediction stacks.

The spatial part of a transform (hflip, rotation, uniform scale, translation)
is composed into a single affine map and resampled once with bilinear
interpolation, so repeated warps do not compound interpolation error.
Photometric adjustments (brightness, contrast, additive noise) follow the
warp and are never inverted: discrete labels are invariant under them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import DataError, PredictorError
from .raster import BinaryMask, Raster
from .seeding import derive_seed

SCALE_BOUNDS = (0.5, 2.0)
TRANSLATE_BOUND = 0.25
CONTRAST_BOUNDS = (0.25, 4.0)


@dataclass(frozen=True)
class TransformSpec:
    """One sampled augmentation: spatial components plus photometric ones."""

    hflip: bool = False
    rotation_deg: float = 0.0
    scale: float = 1.0
    translate_frac: tuple[float, float] = (0.0, 0.0)
    brightness_delta: float = 0.0
    contrast_factor: float = 1.0
    noise_sigma: float = 0.0

    def __post_init__(self):
        if not SCALE_BOUNDS[0] <= self.scale <= SCALE_BOUNDS[1]:
            raise DataError(f"scale {self.scale} outside {SCALE_BOUNDS}")
        if max(abs(self.translate_frac[0]), abs(self.translate_frac[1])) > TRANSLATE_BOUND:
            raise DataError(f"|translate_frac| must be <= {TRANSLATE_BOUND} per axis")
        if not CONTRAST_BOUNDS[0] <= self.contrast_factor <= CONTRAST_BOUNDS[1]:
            raise DataError(f"contrast_factor {self.contrast_factor} outside {CONTRAST_BOUNDS}")
        if self.noise_sigma < 0:
            raise DataError("noise_sigma must be >= 0")

    @property
    def spatial_is_identity(self) -> bool:
        return (not self.hflip and self.rotation_deg == 0.0 and self.scale == 1.0
                and self.translate_frac == (0.0, 0.0))

    @property
    def spatial_is_pure_hflip(self) -> bool:
        return (self.hflip and self.rotation_deg == 0.0 and self.scale == 1.0
                and self.translate_frac == (0.0, 0.0))


@dataclass(frozen=True)
class AugmentationPriors:
    """Sampling ranges for TransformSpec components.

    Continuous parameters are uniform over their (low, high) range;
    noise_sigma is copied verbatim into every sample.
    """

    flip_prob: float = 0.5
    rotation_deg: tuple[float, float] = (-15.0, 15.0)
    scale: tuple[float, float] = (0.9, 1.1)
    translate_frac: tuple[float, float] = (-0.05, 0.05)
    brightness_delta: tuple[float, float] = (-0.1, 0.1)
    contrast_factor: tuple[float, float] = (0.9, 1.1)
    noise_sigma: float = 0.01

    def __post_init__(self):
        if not 0.0 <= self.flip_prob <= 1.0:
            raise DataError("flip_prob must lie in [0, 1]")
        for name in ("rotation_deg", "scale", "translate_frac",
                     "brightness_delta", "contrast_factor"):
            low, high = getattr(self, name)
            if low > high:
                raise DataError(f"priors.{name}: low {low} > high {high}")
        if not (SCALE_BOUNDS[0] <= self.scale[0] and self.scale[1] <= SCALE_BOUNDS[1]):
            raise DataError(f"priors.scale must stay inside {SCALE_BOUNDS}")
        if max(abs(self.translate_frac[0]), abs(self.translate_frac[1])) > TRANSLATE_BOUND:
            raise DataError(f"priors.translate_frac must stay inside +-{TRANSLATE_BOUND}")
        if not (CONTRAST_BOUNDS[0] <= self.contrast_factor[0]
                and self.contrast_factor[1] <= CONTRAST_BOUNDS[1]):
            raise DataError(f"priors.contrast_factor must stay inside {CONTRAST_BOUNDS}")
        if self.noise_sigma < 0:
            raise DataError("priors.noise_sigma must be >= 0")

    @classmethod
    def identity(cls) -> "AugmentationPriors":
        """Degenerate priors: every sample is the identity transform."""
        return cls(flip_prob=0.0, rotation_deg=(0.0, 0.0), scale=(1.0, 1.0),
                   translate_frac=(0.0, 0.0), brightness_delta=(0.0, 0.0),
                   contrast_factor=(1.0, 1.0), noise_sigma=0.0)

    def to_dict(self) -> dict:
        return {
            "flip_prob": self.flip_prob,
            "rotation_deg": list(self.rotation_deg),
            "scale": list(self.scale),
            "translate_frac": list(self.translate_frac),
            "brightness_delta": list(self.brightness_delta),
            "contrast_factor": list(self.contrast_factor),
            "noise_sigma": self.noise_sigma,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AugmentationPriors":
        kwargs = {}
        for key, value in d.items():
            if key == "flip_prob" or key == "noise_sigma":
                kwargs[key] = float(value)
            else:
                kwargs[key] = tuple(float(v) for v in value)
        return cls(**kwargs)


@dataclass
class SampleStack:
    """T aligned probability maps from TTA, MC passes, or a single baseline."""

    probs: np.ndarray                 # (T, height, width) float64 in [0, 1]
    provenance: str                   # "tta" | "mcd" | "baseline"
    specs: list[TransformSpec] | None = None
    seed: int | None = None

    def __post_init__(self):
        arr = np.ascontiguousarray(self.probs, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[0] < 1:
            raise DataError(f"stack must be (T, h, w) with T >= 1, got {arr.shape}")
        if not np.isfinite(arr).all() or arr.min() < 0.0 or arr.max() > 1.0:
            raise DataError("stack probabilities must lie in [0, 1]")
        if self.provenance not in ("tta", "mcd", "baseline"):
            raise DataError(f"unknown provenance {self.provenance!r}")
        if self.specs is not None and len(self.specs) != arr.shape[0]:
            raise DataError("one TransformSpec per sample required")
        arr.flags.writeable = False
        self.probs = arr

    @property
    def T(self) -> int:
        return self.probs.shape[0]

    @property
    def height(self) -> int:
        return self.probs.shape[1]

    @property
    def width(self) -> int:
        return self.probs.shape[2]

    def map_at(self, n: int) -> Raster:
        return Raster(self.probs[n], "probability")


def sample_transform(priors: AugmentationPriors, rng: np.random.Generator) -> TransformSpec:
    """Draw one TransformSpec from the priors. Draw order is fixed."""
    hflip = bool(rng.random() < priors.flip_prob)
    rotation = float(rng.uniform(*priors.rotation_deg))
    scale = float(rng.uniform(*priors.scale))
    tx = float(rng.uniform(*priors.translate_frac))
    ty = float(rng.uniform(*priors.translate_frac))
    brightness = float(rng.uniform(*priors.brightness_delta))
    contrast = float(rng.uniform(*priors.contrast_factor))
    return TransformSpec(hflip=hflip, rotation_deg=rotation, scale=scale,
                         translate_frac=(tx, ty), brightness_delta=brightness,
                         contrast_factor=contrast, noise_sigma=priors.noise_sigma)


def _forward_matrix(spec: TransformSpec, width: int, height: int) -> np.ndarray:
    """3x3 affine taking original pixel coordinates to augmented ones.

    Order of application: hflip, rotate about the raster center, uniform
    scale about the center, translate.
    """
    cx = (width - 1) / 2.0
    cy = (height - 1) / 2.0

    def about_center(m2x2):
        m = np.eye(3)
        m[:2, :2] = m2x2
        m[0, 2] = cx - m2x2[0, 0] * cx - m2x2[0, 1] * cy
        m[1, 2] = cy - m2x2[1, 0] * cx - m2x2[1, 1] * cy
        return m

    flip = about_center(np.array([[-1.0, 0.0], [0.0, 1.0]])) if spec.hflip else np.eye(3)
    theta = math.radians(spec.rotation_deg)
    rot = about_center(np.array([[math.cos(theta), -math.sin(theta)],
                                 [math.sin(theta), math.cos(theta)]]))
    scale = about_center(np.array([[spec.scale, 0.0], [0.0, spec.scale]]))
    trans = np.eye(3)
    trans[0, 2] = spec.translate_frac[0] * width
    trans[1, 2] = spec.translate_frac[1] * height
    return trans @ scale @ rot @ flip


def _warp(values: np.ndarray, gather: np.ndarray) -> np.ndarray:
    m = (gather[0, 0], gather[0, 1], gather[0, 2],
         gather[1, 0], gather[1, 1], gather[1, 2])
    return np.clip(kernels.warp_affine_bilinear(values, m), 0.0, 1.0)


def apply_transform(image: Raster, spec: TransformSpec,
                    rng: np.random.Generator | None = None) -> Raster:
    """Augment an intensity raster.

    The identity spec is a bit-exact copy and a pure hflip is an index
    reversal; anything else is one composed bilinear warp (out-of-bounds
    reads 0).  Then contrast/brightness with clamping, then additive
    Gaussian noise drawn from ``rng``, clamped to [0, 1].
    """
    if image.kind != "intensity":
        raise DataError(f"apply_transform expects an intensity raster, got {image.kind}")
    if spec.spatial_is_identity:
        values = image.values.copy()
    elif spec.spatial_is_pure_hflip:
        values = image.values[:, ::-1].copy()
    else:
        gather = np.linalg.inv(_forward_matrix(spec, image.width, image.height))
        values = _warp(image.values, gather)
    if spec.contrast_factor != 1.0 or spec.brightness_delta != 0.0:
        values = np.clip(spec.contrast_factor * (values - 0.5) + 0.5
                         + spec.brightness_delta, 0.0, 1.0)
    if spec.noise_sigma > 0.0:
        if rng is None:
            raise DataError("a generator is required when noise_sigma > 0")
        values = np.clip(values + rng.normal(0.0, spec.noise_sigma, values.shape), 0.0, 1.0)
    return Raster(values, "intensity")


def invert_spatial(probmap: Raster, spec: TransformSpec) -> Raster:
    """Map a prediction on the augmented grid back to the original grid.

    Only the spatial part is inverted (labels are invariant under the
    photometric part).  Exactly inverts the composed forward affine.
    """
    if probmap.kind != "probability":
        raise DataError(f"invert_spatial expects a probability raster, got {probmap.kind}")
    if spec.spatial_is_identity:
        return probmap
    if spec.spatial_is_pure_hflip:
        return Raster(probmap.values[:, ::-1], "probability")
    gather = _forward_matrix(spec, probmap.width, probmap.height)
    return Raster(_warp(probmap.values, gather), "probability")


def tta_sample_stack(predictor, image: Raster, T: int,
                     priors: AugmentationPriors, seed: int) -> SampleStack:
    """T rounds of augment -> predict -> invert, stacked.

    Per-sample seeds derive from ``(seed, n)``, so the stack is reproducible
    and samples could be computed concurrently.
    """
    if T < 1:
        raise DataError(f"T must be >= 1, got {T}")
    maps = np.empty((T, image.height, image.width))
    specs = []
    for n in range(T):
        rng = np.random.default_rng(derive_seed(seed, n))
        spec = sample_transform(priors, rng)
        augmented = apply_transform(image, spec, rng)
        try:
            predicted = predictor.predict(augmented)
        except Exception as exc:
            raise PredictorError(f"TTA sample {n} failed: {exc}") from exc
        if predicted.shape != image.shape:
            raise PredictorError(f"TTA sample {n}: predictor returned {predicted.shape}, "
                                 f"expected {image.shape}")
        maps[n] = invert_spatial(predicted, spec).values
        specs.append(spec)
    return SampleStack(maps, "tta", specs=specs, seed=seed)


def baseline_stack(predictor, image: Raster) -> SampleStack:
    """Single deterministic forward pass wrapped as a one-sample stack."""
    predicted = predictor.predict(image)
    if predicted.shape != image.shape:
        raise PredictorError(f"predictor returned {predicted.shape}, expected {image.shape}")
    return SampleStack(predicted.values[np.newaxis], "baseline")


def aggregate_mean(stack: SampleStack) -> Raster:
    """Pixelwise arithmetic mean of the stack."""
    return Raster(stack.probs.mean(axis=0), "probability")


def aggregate_mode(stack: SampleStack, threshold: float = 0.5) -> BinaryMask:
    """Majority vote: foreground where more than T/2 samples exceed the
    threshold; an exact tie goes to background."""
    if not 0.0 < threshold < 1.0:
        raise DataError(f"threshold must lie in (0, 1), got {threshold}")
    votes = (stack.probs > threshold).sum(axis=0)
    return BinaryMask(votes * 2 > stack.T)
