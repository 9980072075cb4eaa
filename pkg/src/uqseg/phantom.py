"""Synthetic phantoms with analytically known geometry.

Two shapes: an ellipse (head-like) and a capsule (femur-like; a rectangle
with semicircular caps).  The capsule's ``length`` is its full end-to-end
extent, which is exactly what the caliper long side measures, so both shapes
come with an exact measurement oracle.  All generation is deterministic in
``(spec, seed)`` down to the output bytes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import kernels
from .errors import DataError
from .raster import (BinaryMask, Calibration, CaseMeta, Raster, save_image,
                     save_mask)
from .seeding import derive_seed, rng_for


@dataclass(frozen=True)
class PhantomSpec:
    kind: str                      # "ellipse" | "capsule"
    width: int = 128
    height: int = 128
    center: tuple[float, float] = (64.0, 64.0)
    # ellipse parameters (semi-axes, px)
    semi_major: float = 40.0
    semi_minor: float = 28.0
    # capsule parameters (px); length is end to end, caps included
    length: float = 80.0
    radius: float = 9.0
    orientation_deg: float = 0.0
    inside_level: float = 0.8
    outside_level: float = 0.2
    noise_sigma: float = 0.0
    blur_passes: int = 0
    pixel_size_mm: float = 0.1

    def __post_init__(self):
        if self.kind not in ("ellipse", "capsule"):
            raise DataError(f"unknown phantom kind {self.kind!r}")
        for level in (self.inside_level, self.outside_level):
            if not 0.0 <= level <= 1.0:
                raise DataError("inside/outside levels must lie in [0, 1]")
        if self.inside_level == self.outside_level:
            raise DataError("inside_level must differ from outside_level")
        if self.noise_sigma < 0 or self.blur_passes < 0:
            raise DataError("noise_sigma and blur_passes must be >= 0")
        if self.pixel_size_mm <= 0:
            raise DataError("pixel_size_mm must be > 0")
        if self.kind == "ellipse":
            if not self.semi_major >= self.semi_minor > 0:
                raise DataError("ellipse needs semi_major >= semi_minor > 0")
        else:
            if self.radius <= 0 or self.length < 2 * self.radius:
                raise DataError("capsule needs radius > 0 and length >= 2*radius")
        ex, ey = self._extent()
        cx, cy = self.center
        if (cx - ex < 2 or cx + ex > self.width - 3
                or cy - ey < 2 or cy + ey > self.height - 3):
            raise DataError("shape must fit inside the canvas with a 2 px margin")

    def _extent(self) -> tuple[float, float]:
        """Half-extent of the shape along x and y."""
        theta = math.radians(self.orientation_deg)
        c, s = math.cos(theta), math.sin(theta)
        if self.kind == "ellipse":
            a, b = self.semi_major, self.semi_minor
            return (math.hypot(a * c, b * s), math.hypot(a * s, b * c))
        half = self.length / 2 - self.radius
        return (abs(half * c) + self.radius, abs(half * s) + self.radius)

    def contains(self, x: float, y: float) -> bool:
        """Point-in-shape test in pixel coordinates (boundary inclusive)."""
        cx, cy = self.center
        theta = math.radians(self.orientation_deg)
        c, s = math.cos(theta), math.sin(theta)
        # rotate into the shape frame
        u = (x - cx) * c + (y - cy) * s
        v = -(x - cx) * s + (y - cy) * c
        if self.kind == "ellipse":
            return (u / self.semi_major) ** 2 + (v / self.semi_minor) ** 2 <= 1.0
        half = self.length / 2 - self.radius
        du = min(max(u, -half), half)
        return (u - du) ** 2 + v ** 2 <= self.radius ** 2

    def gt_measurement_mm(self) -> float:
        """Analytic measurement: ellipse circumference or capsule length, in mm."""
        if self.kind == "ellipse":
            perimeter = 2 * math.pi * self.semi_minor + 4 * (self.semi_major - self.semi_minor)
            return perimeter * self.pixel_size_mm
        return self.length * self.pixel_size_mm

    @property
    def modality(self) -> str:
        return "head" if self.kind == "ellipse" else "femur"


def analytic_mask(spec: PhantomSpec) -> BinaryMask:
    """Rasterize the shape: a bit is set iff the pixel center lies inside."""
    ys, xs = np.mgrid[0:spec.height, 0:spec.width]
    cx, cy = spec.center
    theta = math.radians(spec.orientation_deg)
    c, s = math.cos(theta), math.sin(theta)
    u = (xs - cx) * c + (ys - cy) * s
    v = -(xs - cx) * s + (ys - cy) * c
    if spec.kind == "ellipse":
        inside = (u / spec.semi_major) ** 2 + (v / spec.semi_minor) ** 2 <= 1.0
    else:
        half = spec.length / 2 - spec.radius
        du = np.clip(u, -half, half)
        inside = (u - du) ** 2 + v ** 2 <= spec.radius ** 2
    return BinaryMask(inside)


def generate_phantom(spec: PhantomSpec, seed: int) -> tuple[Raster, BinaryMask, CaseMeta]:
    """Render one phantom image plus its ground-truth mask and metadata.

    The image is the two-level mask, box-blurred ``blur_passes`` times, with
    seeded Gaussian noise added and the result clamped to [0, 1].
    """
    mask = analytic_mask(spec)
    img = np.where(mask.values.astype(bool), spec.inside_level, spec.outside_level)
    if spec.blur_passes > 0:
        img = kernels.box_blur3(img, spec.blur_passes)
    if spec.noise_sigma > 0:
        rng = rng_for(seed, "phantom-noise")
        img = img + rng.normal(0.0, spec.noise_sigma, size=img.shape)
    img = np.clip(img, 0.0, 1.0)
    meta = CaseMeta(
        case_id=f"{spec.modality}_{seed:08x}",
        modality=spec.modality,
        calibration=Calibration(spec.pixel_size_mm),
        gt_measurement_mm=spec.gt_measurement_mm(),
    )
    return Raster(img, "intensity"), mask, meta


def noise_raster(width: int, height: int, seed: int) -> Raster:
    """Uniform-noise intensity raster, used as an out-of-domain probe."""
    rng = rng_for(seed, "ood-noise")
    return Raster(rng.random((height, width)), "intensity")


# parameter jitter ranges for dataset generation; the head minimum keeps the
# circumference >= ~210 px so pixel-center contour quantization (~3.5 px of
# perimeter) stays well under the 2% measurement tolerance
_HEAD_RANGES = {
    "semi_major": (40.0, 54.0),
    "axis_ratio": (1.0, 1.8),
    "orientation_deg": (0.0, 180.0),
    "center_jitter": 6.0,
    "inside_level": (0.7, 0.85),
    "outside_level": (0.15, 0.3),
}
_FEMUR_RANGES = {
    "length": (60.0, 92.0),
    "radius": (6.0, 12.0),
    "orientation_deg": (0.0, 180.0),
    "center_jitter": 6.0,
    "inside_level": (0.7, 0.85),
    "outside_level": (0.15, 0.3),
}


def sample_spec(kind: str, rng: np.random.Generator, *, width: int = 128,
                height: int = 128, noise_sigma: float = 0.02,
                blur_passes: int = 1, pixel_size_mm: float = 0.1) -> PhantomSpec:
    """Draw a randomized phantom spec within the per-kind jitter ranges."""
    if kind == "head":
        r = _HEAD_RANGES
        a = rng.uniform(*r["semi_major"])
        ratio = rng.uniform(*r["axis_ratio"])
        shape_kw = {"kind": "ellipse", "semi_major": a, "semi_minor": a / ratio}
    elif kind == "femur":
        r = _FEMUR_RANGES
        shape_kw = {"kind": "capsule",
                    "length": rng.uniform(*r["length"]),
                    "radius": rng.uniform(*r["radius"])}
    else:
        raise DataError(f"unknown dataset kind {kind!r}")
    orientation = rng.uniform(*r["orientation_deg"])
    jitter = r["center_jitter"]
    cx = width / 2 + rng.uniform(-jitter, jitter)
    cy = height / 2 + rng.uniform(-jitter, jitter)
    inside = rng.uniform(*r["inside_level"])
    outside = rng.uniform(*r["outside_level"])
    return PhantomSpec(width=width, height=height, center=(cx, cy),
                       orientation_deg=orientation, inside_level=inside,
                       outside_level=outside, noise_sigma=noise_sigma,
                       blur_passes=blur_passes, pixel_size_mm=pixel_size_mm,
                       **shape_kw)


def generate_dataset(kind: str, count: int, seed: int, out_dir,
                     noise_sigma: float = 0.02, width: int = 128,
                     height: int = 128, blur_passes: int = 1,
                     pixel_size_mm: float = 0.1) -> list[CaseMeta]:
    """Write ``count`` jittered phantom cases plus a ``dataset.json`` index.

    Per-case seeds derive from ``(seed, index)``, so the set reproduces
    byte-for-byte and cases are independent of each other.
    """
    if count < 1:
        raise DataError(f"count must be >= 1, got {count}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    index = []
    metas = []
    for i in range(count):
        case_seed = derive_seed(seed, i)
        spec = sample_spec(kind, np.random.default_rng(derive_seed(case_seed, "params")),
                           width=width, height=height, noise_sigma=noise_sigma,
                           blur_passes=blur_passes, pixel_size_mm=pixel_size_mm)
        image, mask, meta = generate_phantom(spec, case_seed)
        case_id = f"{kind}_{i:04d}"
        meta = replace(meta, case_id=case_id,
                       gt_mask_path=f"{case_id}_mask.pgm")
        save_image(image, out / f"{case_id}.pgm", meta.calibration)
        save_mask(mask, out / f"{case_id}_mask.pgm")
        index.append({
            "case_id": case_id,
            "image": f"{case_id}.pgm",
            "mask": f"{case_id}_mask.pgm",
            "pixel_size_mm": meta.calibration.pixel_size_mm,
            "modality": meta.modality,
            "gt_measurement_mm": meta.gt_measurement_mm,
        })
        metas.append(meta)
    (out / "dataset.json").write_text(json.dumps(index, indent=2, sort_keys=True) + "\n")
    return metas


def load_dataset_index(dataset_dir) -> list[dict]:
    """Read dataset.json; raises DataError when the directory is not a dataset."""
    path = Path(dataset_dir) / "dataset.json"
    if not path.exists():
        raise DataError(f"no dataset.json in {dataset_dir}")
    entries = json.loads(path.read_text())
    if not isinstance(entries, list) or not entries:
        raise DataError(f"{path}: dataset index is empty or malformed")
    return entries
