"""Canonical raster types and bit-exact file I/O.

Conventions used everywhere in this package:

* arrays are row-major with shape ``(height, width)``; pixel ``(x, y)`` is
  ``values[y, x]`` with the origin at the top-left corner,
* in-memory math is float64; probability maps are persisted as little-endian
  float32 (the ``UQP1`` container below), images and masks as 8-bit PGM,
* rasters are immutable after construction and safe to share across workers.

File formats:

* PGM ``P5`` (binary) and ``P2`` (ASCII), maxval 255 only.  Images map the
  stored byte to ``byte / 255``; masks store background as 0 and foreground
  as 255, and any nonzero byte loads as foreground.
* ``UQP1``: ASCII header ``UQP1\\n<width> <height>\\n`` followed by
  ``width*height`` little-endian binary32 values, row-major, top-left origin.
* optional JSON sidecar ``<stem>.meta.json`` carrying ``pixel_size_mm``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import DataError, FormatError

VALUE_KINDS = ("intensity", "probability", "uncertainty")


@dataclass(frozen=True)
class Calibration:
    """Isotropic physical pixel size in millimetres."""

    pixel_size_mm: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.pixel_size_mm) and self.pixel_size_mm > 0):
            raise DataError(f"pixel_size_mm must be finite and > 0, got {self.pixel_size_mm}")


@dataclass(frozen=True)
class CaseMeta:
    """Identity and ground-truth bookkeeping for one image."""

    case_id: str
    modality: str = "unknown"
    calibration: Calibration = Calibration()
    gt_measurement_mm: Optional[float] = None
    gt_mask_path: Optional[str] = None

    def __post_init__(self):
        if not self.case_id:
            raise DataError("case_id must be non-empty")
        if self.modality not in ("head", "femur", "unknown"):
            raise DataError(f"unknown modality {self.modality!r}")
        if self.gt_measurement_mm is not None and not self.gt_measurement_mm > 0:
            raise DataError("gt_measurement_mm must be > 0 when present")


class Raster:
    """A 2-D grid of float64 values with a declared value kind.

    ``intensity`` and ``probability`` rasters are constrained to [0, 1];
    ``uncertainty`` rasters to nonnegative values.  The backing array is
    frozen, so instances are immutable and shareable.
    """

    __slots__ = ("_values", "_kind")

    def __init__(self, values, kind: str):
        if kind not in VALUE_KINDS:
            raise DataError(f"unknown value kind {kind!r}")
        arr = np.array(values, dtype=np.float64, copy=True, order="C")
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise DataError(f"raster must be 2-D and non-empty, got shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise DataError("raster contains non-finite values")
        if kind in ("intensity", "probability"):
            if arr.min() < 0.0 or arr.max() > 1.0:
                raise DataError(f"{kind} raster values must lie in [0, 1]")
        else:
            if arr.min() < 0.0:
                raise DataError("uncertainty raster values must be >= 0")
        arr.flags.writeable = False
        self._values = arr
        self._kind = kind

    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def kind(self) -> str:
        return self._kind

    @property
    def width(self) -> int:
        return self._values.shape[1]

    @property
    def height(self) -> int:
        return self._values.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self._values.shape

    def __repr__(self):
        return f"Raster({self.width}x{self.height}, {self._kind})"


class BinaryMask:
    """Row-major foreground flags, dimensions matching the source raster."""

    __slots__ = ("_values",)

    def __init__(self, bits):
        arr = np.array(bits, copy=True, order="C")
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise DataError(f"mask must be 2-D and non-empty, got shape {arr.shape}")
        if arr.dtype == bool:
            arr = arr.astype(np.uint8)
        else:
            arr = arr.astype(np.uint8, casting="unsafe")
        if not np.isin(arr, (0, 1)).all():
            raise DataError("mask values must be 0 or 1")
        arr.flags.writeable = False
        self._values = arr

    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def width(self) -> int:
        return self._values.shape[1]

    @property
    def height(self) -> int:
        return self._values.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self._values.shape

    @property
    def foreground_count(self) -> int:
        return int(self._values.sum())

    def __repr__(self):
        return f"BinaryMask({self.width}x{self.height}, fg={self.foreground_count})"


def binarize(probmap: Raster, threshold: float = 0.5) -> BinaryMask:
    """Threshold a probability map; ties (value == threshold) go to background."""
    if probmap.kind != "probability":
        raise DataError(f"binarize expects a probability raster, got {probmap.kind}")
    if not 0.0 < threshold < 1.0:
        raise DataError(f"threshold must lie in (0, 1), got {threshold}")
    return BinaryMask(probmap.values > threshold)


# ---------------------------------------------------------------------------
# PGM

class _ByteScanner:
    """Tokenizer over a PGM header that tracks byte offsets for errors."""

    def __init__(self, data: bytes, path):
        self.data = data
        self.pos = 0
        self.path = path

    def fail(self, message, offset=None):
        raise FormatError(message, path=self.path, offset=self.pos if offset is None else offset)

    def skip_separators(self):
        data = self.data
        while self.pos < len(data):
            c = data[self.pos:self.pos + 1]
            if c in b" \t\r\n":
                self.pos += 1
            elif c == b"#":
                while self.pos < len(data) and data[self.pos:self.pos + 1] != b"\n":
                    self.pos += 1
            else:
                return

    def token(self) -> tuple[bytes, int]:
        self.skip_separators()
        start = self.pos
        data = self.data
        while self.pos < len(data) and data[self.pos:self.pos + 1] not in b" \t\r\n":
            self.pos += 1
        if self.pos == start:
            self.fail("unexpected end of header", offset=start)
        return data[start:self.pos], start

    def int_token(self, name) -> tuple[int, int]:
        tok, off = self.token()
        try:
            return int(tok), off
        except ValueError:
            self.fail(f"{name} is not an integer: {tok!r}", offset=off)


def _parse_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    scan = _ByteScanner(data, path)
    magic, off = scan.token()
    if magic not in (b"P5", b"P2"):
        scan.fail(f"not a PGM file (magic {magic!r})", offset=off)
    width, off_w = scan.int_token("width")
    height, off_h = scan.int_token("height")
    if width < 1 or height < 1:
        scan.fail(f"bad dimensions {width}x{height}", offset=off_w)
    maxval, off_m = scan.int_token("maxval")
    if maxval != 255:
        scan.fail(f"unsupported maxval {maxval} (only 255)", offset=off_m)
    n = width * height
    if magic == b"P5":
        # exactly one whitespace byte separates the header from the payload
        if scan.pos >= len(data) or data[scan.pos:scan.pos + 1] not in b" \t\r\n":
            scan.fail("missing separator before binary payload")
        scan.pos += 1
        payload = data[scan.pos:scan.pos + n]
        if len(payload) < n:
            raise FormatError(f"truncated payload: expected {n} bytes, got {len(payload)}",
                              path=path, offset=scan.pos + len(payload))
        arr = np.frombuffer(payload, dtype=np.uint8).reshape(height, width)
    else:
        values = []
        for _ in range(n):
            v, off_v = scan.int_token("pixel")
            if not 0 <= v <= maxval:
                scan.fail(f"pixel value {v} out of range", offset=off_v)
            values.append(v)
        arr = np.array(values, dtype=np.uint8).reshape(height, width)
    return arr


def _sidecar_path(path) -> Path:
    p = Path(path)
    return p.with_name(p.stem + ".meta.json")


def load_image(path) -> tuple[Raster, Calibration]:
    """Load a grayscale PGM as an intensity raster plus its calibration.

    The stored byte maps to ``byte / 255``.  Calibration comes from the
    ``<stem>.meta.json`` sidecar when present, else defaults to 1 mm/px.
    """
    arr = _parse_pgm(path)
    raster = Raster(arr.astype(np.float64) / 255.0, "intensity")
    sidecar = _sidecar_path(path)
    calibration = Calibration()
    if sidecar.exists():
        try:
            meta = json.loads(sidecar.read_text())
        except json.JSONDecodeError as exc:
            raise FormatError(f"malformed sidecar: {exc}", path=sidecar) from exc
        if "pixel_size_mm" in meta:
            calibration = Calibration(float(meta["pixel_size_mm"]))
    return raster, calibration


def save_image(raster: Raster, path, calibration: Calibration | None = None) -> None:
    """Quantize an intensity raster to 8 bits and write binary PGM.

    Writes the calibration sidecar alongside when one is given.
    """
    if raster.kind != "intensity":
        raise DataError(f"save_image expects an intensity raster, got {raster.kind}")
    bytes_ = np.rint(raster.values * 255.0).astype(np.uint8)
    _write_pgm(bytes_, path)
    if calibration is not None:
        _sidecar_path(path).write_text(
            json.dumps({"pixel_size_mm": calibration.pixel_size_mm}) + "\n")


def _write_pgm(bytes_: np.ndarray, path) -> None:
    header = f"P5\n{bytes_.shape[1]} {bytes_.shape[0]}\n255\n".encode()
    Path(path).write_bytes(header + bytes_.tobytes())


def save_mask(mask: BinaryMask, path) -> None:
    """Write a mask as binary PGM: background 0, foreground 255."""
    _write_pgm(mask.values * np.uint8(255), path)


def load_mask(path) -> BinaryMask:
    """Load a PGM mask; any byte > 0 counts as foreground."""
    return BinaryMask(_parse_pgm(path) > 0)


# ---------------------------------------------------------------------------
# UQP1 float maps

_UQP_MAGIC = b"UQP1\n"


def _write_uqp(values: np.ndarray, path) -> None:
    header = _UQP_MAGIC + f"{values.shape[1]} {values.shape[0]}\n".encode()
    payload = values.astype("<f4", copy=False).tobytes()
    Path(path).write_bytes(header + payload)


def _read_uqp(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if not data.startswith(_UQP_MAGIC):
        raise FormatError(f"bad magic {data[:4]!r}, expected UQP1", path=path, offset=0)
    dims_end = data.find(b"\n", len(_UQP_MAGIC))
    if dims_end < 0:
        raise FormatError("missing dimension line", path=path, offset=len(_UQP_MAGIC))
    dims = data[len(_UQP_MAGIC):dims_end].split()
    if len(dims) != 2:
        raise FormatError(f"dimension line must hold two integers, got {dims!r}",
                          path=path, offset=len(_UQP_MAGIC))
    try:
        width, height = int(dims[0]), int(dims[1])
    except ValueError:
        raise FormatError(f"non-integer dimensions {dims!r}", path=path,
                          offset=len(_UQP_MAGIC)) from None
    if width < 1 or height < 1:
        raise FormatError(f"bad dimensions {width}x{height}", path=path, offset=len(_UQP_MAGIC))
    payload = data[dims_end + 1:]
    expected = width * height * 4
    if len(payload) != expected:
        raise FormatError(f"payload holds {len(payload)} bytes, expected {expected}",
                          path=path, offset=dims_end + 1)
    arr = np.frombuffer(payload, dtype="<f4").reshape(height, width)
    if not np.isfinite(arr).all():
        bad = int(np.flatnonzero(~np.isfinite(arr).ravel())[0])
        raise FormatError("non-finite float in payload",
                          path=path, offset=dims_end + 1 + 4 * bad)
    return arr.astype(np.float64)


def save_probmap(raster: Raster, path) -> None:
    if raster.kind != "probability":
        raise DataError(f"save_probmap expects a probability raster, got {raster.kind}")
    _write_uqp(raster.values, path)


def load_probmap(path) -> Raster:
    return Raster(_read_uqp(path), "probability")


def save_uncertainty_map(raster: Raster, path) -> None:
    if raster.kind != "uncertainty":
        raise DataError(f"save_uncertainty_map expects an uncertainty raster, got {raster.kind}")
    _write_uqp(raster.values, path)


def load_uncertainty_map(path) -> Raster:
    return Raster(_read_uqp(path), "uncertainty")


def save_heatmap_pgm(raster: Raster, path) -> None:
    """8-bit quick-view quantization of an uncertainty map: value / max * 255."""
    values = raster.values
    peak = values.max()
    if peak > 0:
        bytes_ = np.rint(values / peak * 255.0).astype(np.uint8)
    else:
        bytes_ = np.zeros(values.shape, dtype=np.uint8)
    _write_pgm(bytes_, path)
