"""Metrics and batch analysis: IOU, measurement errors, the
uncertainty-vs-error-rate histogram, out-of-distribution flagging, and
grouped summary reports.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError
from .geometry import Measurement
from .raster import BinaryMask, CaseMeta, Calibration, Raster

ERROR_RATE_BIN_WIDTH = 0.05
ERROR_RATE_BINS = 20


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise DataError("confusion counts must be nonnegative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


def confusion(pred: BinaryMask, gt: BinaryMask) -> ConfusionCounts:
    if pred.shape != gt.shape:
        raise DataError(f"mask shapes differ: {pred.shape} vs {gt.shape}")
    p = pred.values.astype(bool)
    g = gt.values.astype(bool)
    return ConfusionCounts(tp=int(np.sum(p & g)), fp=int(np.sum(p & ~g)),
                           fn=int(np.sum(~p & g)), tn=int(np.sum(~p & ~g)))


def iou(pred: BinaryMask, gt: BinaryMask) -> float:
    """Intersection over union, tp/(tp+fp+fn).

    Two empty masks agree perfectly and score 1.0.
    """
    c = confusion(pred, gt)
    denom = c.tp + c.fp + c.fn
    if denom == 0:
        return 1.0
    return c.tp / denom


def relative_error_pct(x_mm: float, mu_mm: float) -> float:
    """|x - mu| / mu, as a percentage of the reference value mu."""
    if not mu_mm > 0:
        raise DataError(f"reference value must be > 0, got {mu_mm}")
    return abs(x_mm - mu_mm) / mu_mm * 100.0


@dataclass(frozen=True)
class UncErrorHistogram:
    """Sample-level 2-D histogram of (uncertainty bin, error-rate bin).

    Each image contributes one sample per occupied uncertainty bin: the
    error rate of its pixels falling in that bin.  ``curve`` is the mean
    error rate per uncertainty bin over contributing images (None where no
    image had pixels in the bin).
    """

    bin_width: float
    counts: np.ndarray                        # (n_unc_bins, ERROR_RATE_BINS) ints
    curve: tuple[float | None, ...]
    contributors: tuple[int, ...]             # images contributing per unc bin
    total_samples: int

    @property
    def n_bins(self) -> int:
        return self.counts.shape[0]

    def normalized_counts(self) -> np.ndarray:
        if self.total_samples == 0:
            return self.counts.astype(np.float64)
        return self.counts / self.total_samples

    def to_dict(self) -> dict:
        return {
            "uncertainty_bin_width": self.bin_width,
            "uncertainty_bin_edges": [round(k * self.bin_width, 12)
                                      for k in range(self.n_bins + 1)],
            "error_rate_bin_width": ERROR_RATE_BIN_WIDTH,
            "counts": self.counts.tolist(),
            "normalized_counts": self.normalized_counts().tolist(),
            "curve": list(self.curve),
            "contributors": list(self.contributors),
            "total_samples": self.total_samples,
        }


def unc_error_histogram(cases: list[tuple[Raster, BinaryMask, BinaryMask]],
                        bin_width: float = 0.05) -> UncErrorHistogram:
    """Tally per-image error rates inside uncertainty bins of ``bin_width``.

    For each image and each uncertainty bin [k*w, (k+1)*w) holding at least
    one pixel, the fraction of those pixels where prediction and ground
    truth disagree enters the histogram as one sample.
    """
    if not 0.0 < bin_width <= 0.5:
        raise DataError(f"bin_width must lie in (0, 0.5], got {bin_width}")
    per_image = []
    n_bins = 1
    for unc, pred, gt in cases:
        if unc.shape != pred.shape or unc.shape != gt.shape:
            raise DataError("uncertainty, prediction and ground truth must align")
        bins = np.floor(unc.values / bin_width).astype(np.int64).ravel()
        wrong = (pred.values != gt.values).ravel()
        per_image.append((bins, wrong))
        n_bins = max(n_bins, int(bins.max()) + 1)

    counts = np.zeros((n_bins, ERROR_RATE_BINS), dtype=np.int64)
    rate_sums = np.zeros(n_bins)
    contributors = np.zeros(n_bins, dtype=np.int64)
    for bins, wrong in per_image:
        in_bin = np.bincount(bins, minlength=n_bins)
        wrong_in_bin = np.bincount(bins, weights=wrong, minlength=n_bins)
        for k in np.nonzero(in_bin)[0]:
            rate = wrong_in_bin[k] / in_bin[k]
            rbin = min(int(rate / ERROR_RATE_BIN_WIDTH), ERROR_RATE_BINS - 1)
            counts[k, rbin] += 1
            rate_sums[k] += rate
            contributors[k] += 1

    curve = tuple(float(rate_sums[k] / contributors[k]) if contributors[k] else None
                  for k in range(n_bins))
    return UncErrorHistogram(bin_width=bin_width, counts=counts, curve=curve,
                             contributors=tuple(int(c) for c in contributors),
                             total_samples=int(contributors.sum()))


def default_ood_threshold(in_domain_scores: list[float]) -> float:
    """Mean plus two standard deviations of in-domain scores."""
    if not in_domain_scores:
        raise DataError("need at least one in-domain score")
    arr = np.asarray(in_domain_scores, dtype=np.float64)
    return float(arr.mean() + 2.0 * arr.std())


def ood_flag(score: float, threshold: float) -> bool:
    """Out-of-distribution alert: strictly above the threshold."""
    if not threshold > 0:
        raise DataError(f"threshold must be > 0, got {threshold}")
    return score > threshold


_DECISION_ACTIONS = ("pending", "accepted", "overridden", "rejected")


def check_decision(decision: dict) -> dict:
    """Validate a decision payload and return it normalized.

    Overrides carry a positive replacement value and an optional note;
    the other actions carry nothing.
    """
    if not isinstance(decision, dict):
        raise DataError("decision must be an object")
    action = decision.get("action")
    if action not in _DECISION_ACTIONS:
        raise DataError(f"decision action must be one of {_DECISION_ACTIONS}")
    out = {"action": action}
    if action == "overridden":
        value = decision.get("value_mm")
        if not isinstance(value, (int, float)) or isinstance(value, bool) or not value > 0:
            raise DataError("an override requires value_mm > 0")
        out["value_mm"] = float(value)
        note = decision.get("note", "")
        if not isinstance(note, str):
            raise DataError("override note must be a string")
        out["note"] = note
    elif "value_mm" in decision or "note" in decision:
        raise DataError(f"decision {action!r} does not take value_mm or note")
    return out


@dataclass
class CaseRecord:
    """Everything the pipeline knows about one processed case."""

    meta: CaseMeta
    method: str                               # "baseline" | "tta" | "mcd"
    mask_path: str | None = None
    prob_path: str | None = None
    uncertainty_paths: dict = field(default_factory=dict)
    measurement: Measurement | None = None
    iou: float | None = None
    abs_error_mm: float | None = None
    rel_error_pct: float | None = None
    uncertainty_score: float = 0.0
    ood_flag: bool = False
    decision: dict = field(default_factory=lambda: {"action": "pending"})
    error: str | None = None

    def __post_init__(self):
        if self.method not in ("baseline", "tta", "mcd"):
            raise DataError(f"unknown method {self.method!r}")
        if self.iou is not None and not 0.0 <= self.iou <= 1.0:
            raise DataError(f"iou must lie in [0, 1], got {self.iou}")
        if self.uncertainty_score < 0:
            raise DataError("uncertainty_score must be >= 0")
        self.decision = check_decision(self.decision)

    def to_dict(self) -> dict:
        return {
            "case_id": self.meta.case_id,
            "modality": self.meta.modality,
            "pixel_size_mm": self.meta.calibration.pixel_size_mm,
            "gt_measurement_mm": self.meta.gt_measurement_mm,
            "gt_mask_path": self.meta.gt_mask_path,
            "method": self.method,
            "mask_path": self.mask_path,
            "prob_path": self.prob_path,
            "uncertainty_paths": dict(self.uncertainty_paths),
            "measurement": self.measurement.to_dict() if self.measurement else None,
            "iou": self.iou,
            "abs_error_mm": self.abs_error_mm,
            "rel_error_pct": self.rel_error_pct,
            "uncertainty_score": self.uncertainty_score,
            "ood_flag": self.ood_flag,
            "decision": self.decision,
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CaseRecord":
        meta = CaseMeta(case_id=d["case_id"], modality=d.get("modality", "unknown"),
                        calibration=Calibration(d.get("pixel_size_mm", 1.0)),
                        gt_measurement_mm=d.get("gt_measurement_mm"),
                        gt_mask_path=d.get("gt_mask_path"))
        measurement = d.get("measurement")
        return cls(meta=meta, method=d["method"], mask_path=d.get("mask_path"),
                   prob_path=d.get("prob_path"),
                   uncertainty_paths=dict(d.get("uncertainty_paths", {})),
                   measurement=Measurement.from_dict(measurement) if measurement else None,
                   iou=d.get("iou"), abs_error_mm=d.get("abs_error_mm"),
                   rel_error_pct=d.get("rel_error_pct"),
                   uncertainty_score=d.get("uncertainty_score", 0.0),
                   ood_flag=bool(d.get("ood_flag", False)),
                   decision=d.get("decision", {"action": "pending"}),
                   error=d.get("error"))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> "CaseRecord":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _mean_or_none(values: list[float]) -> float | None:
    return float(np.mean(values)) if values else None


def batch_report(records: list[CaseRecord]) -> dict:
    """Group records by (modality, method) and average their metrics."""
    if not records:
        raise DataError("batch_report needs at least one record")
    groups: dict[tuple[str, str], list[CaseRecord]] = {}
    for rec in records:
        groups.setdefault((rec.meta.modality, rec.method), []).append(rec)
    rows = []
    for (modality, method) in sorted(groups):
        members = groups[(modality, method)]
        rows.append({
            "modality": modality,
            "method": method,
            "n": len(members),
            "n_flagged": sum(1 for r in members if r.error is not None),
            "mean_iou": _mean_or_none([r.iou for r in members if r.iou is not None]),
            "mean_abs_err_mm": _mean_or_none([r.abs_error_mm for r in members
                                              if r.abs_error_mm is not None]),
            "mean_rel_err_pct": _mean_or_none([r.rel_error_pct for r in members
                                               if r.rel_error_pct is not None]),
        })
    return {"groups": rows, "n_records": len(records)}


def report_csv(report: dict) -> str:
    """Render a batch report as CSV, one row per (modality, method) group."""
    out = io.StringIO()
    out.write("modality,method,n,mean_iou,mean_abs_err_mm,mean_rel_err_pct\n")
    for row in report["groups"]:
        cells = [row["modality"], row["method"], str(row["n"])]
        for key in ("mean_iou", "mean_abs_err_mm", "mean_rel_err_pct"):
            value = row[key]
            cells.append("" if value is None else f"{value:.6f}")
        out.write(",".join(cells) + "\n")
    return out.getvalue()
