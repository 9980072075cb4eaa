"""Batch pipeline: dataset in, per-case result directories out.

Each case runs augment/predict/aggregate, uncertainty decomposition,
binarization, measurement and metrics, then lands on disk as one directory
(image copy, sample stack, mean map, mask, uncertainty rasters, case.json).
Failures mark the case and never abort the batch.

Everything a run writes is a pure function of (dataset bytes, config,
seed): no timestamps, no absolute paths, sorted JSON keys.  Rerunning with
identical inputs reproduces the output tree byte for byte.
"""

from __future__ import annotations

import dataclasses
import json
import os
import shutil
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .analysis import CaseRecord, default_ood_threshold, iou, relative_error_pct
from .errors import DataError, EllipseFitError, NoForegroundError, PredictorError
from .geometry import measure
from .phantom import load_dataset_index
from .predictor import Predictor, make_predictor, mcd_sample_stack
from .raster import (BinaryMask, Calibration, CaseMeta, Raster, binarize,
                     load_image, load_mask, save_image, save_mask,
                     save_probmap, save_uncertainty_map)
from .seeding import derive_seed
from .tta import AugmentationPriors, SampleStack, baseline_stack, tta_sample_stack
from .uncertainty import UncertaintyMaps, decompose, image_uncertainty_score

METHODS = ("baseline", "tta", "mcd")

UNC_FILES = {"total": "unc_total.uqp", "data": "unc_data.uqp",
             "model": "unc_model.uqp", "ekl": "unc_ekl.uqp",
             "variance": "unc_variance.uqp"}


@dataclass(frozen=True)
class RunConfig:
    """Resolved settings for one batch run; serialized next to the results."""

    method: str = "baseline"
    samples: int = 8
    seed: int = 0
    threshold: float = 0.5
    predictor: dict = field(default_factory=lambda: {"kind": "sigmoid"})
    priors: AugmentationPriors = field(default_factory=AugmentationPriors)
    ood_threshold: float | None = None
    workers: int | None = None                # runtime knob, not provenance

    def __post_init__(self):
        if self.method not in METHODS:
            raise DataError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.samples < 1:
            raise DataError(f"samples must be >= 1, got {self.samples}")
        if not 0.0 < self.threshold < 1.0:
            raise DataError(f"threshold must lie in (0, 1), got {self.threshold}")
        if self.ood_threshold is not None and not self.ood_threshold > 0:
            raise DataError("ood_threshold must be > 0 when given")

    def to_dict(self) -> dict:
        return {"method": self.method, "samples": self.samples, "seed": self.seed,
                "threshold": self.threshold, "predictor": dict(self.predictor),
                "priors": self.priors.to_dict(), "ood_threshold": self.ood_threshold}

    @classmethod
    def from_dict(cls, d: dict, **overrides) -> "RunConfig":
        known = {"method", "samples", "seed", "threshold", "predictor",
                 "priors", "ood_threshold", "workers"}
        unknown = set(d) - known
        if unknown:
            raise DataError(f"unknown config keys: {sorted(unknown)}")
        merged = {**d, **overrides}
        if isinstance(merged.get("priors"), dict):
            merged["priors"] = AugmentationPriors.from_dict(merged["priors"])
        return cls(**merged)


@dataclass
class CaseResult:
    """One processed case held in memory until the batch writes it out."""

    record: CaseRecord
    image: Raster | None = None
    gt_mask: BinaryMask | None = None
    stack: SampleStack | None = None
    maps: UncertaintyMaps | None = None
    mask: BinaryMask | None = None

    @property
    def failed(self) -> bool:
        return self.stack is None


def process_case(image: Raster, meta: CaseMeta, config: RunConfig,
                 predictor: Predictor, gt_mask: BinaryMask | None = None) -> CaseResult:
    """Run one case end to end, in memory.

    The per-case seed comes from (run seed, case_id), so results do not
    depend on dataset ordering.  Predictor and geometry failures flag the
    record instead of raising.
    """
    case_seed = derive_seed(config.seed, meta.case_id)
    record = CaseRecord(meta=meta, method=config.method)
    try:
        if config.method == "baseline":
            stack = baseline_stack(predictor, image)
        elif config.method == "tta":
            stack = tta_sample_stack(predictor, image, config.samples,
                                     config.priors, case_seed)
        else:
            stack = mcd_sample_stack(predictor, image, config.samples, case_seed)
    except PredictorError as exc:
        record.error = str(exc)
        return CaseResult(record=record, image=image, gt_mask=gt_mask)

    maps = decompose(stack)
    mask = binarize(maps.mean_prob, config.threshold)
    record.mask_path = "mask.pgm"
    record.prob_path = "mean_prob.uqp"
    record.uncertainty_paths = dict(UNC_FILES)
    record.uncertainty_score = image_uncertainty_score(maps, "total")

    if meta.modality in ("head", "femur"):
        try:
            record.measurement = measure(mask, meta.modality, meta.calibration)
        except (NoForegroundError, EllipseFitError) as exc:
            record.error = str(exc)

    if gt_mask is not None:
        record.iou = iou(mask, gt_mask)
    if record.measurement is not None and meta.gt_measurement_mm is not None:
        record.abs_error_mm = abs(record.measurement.value_mm - meta.gt_measurement_mm)
        record.rel_error_pct = relative_error_pct(record.measurement.value_mm,
                                                  meta.gt_measurement_mm)
    return CaseResult(record=record, image=image, gt_mask=gt_mask,
                      stack=stack, maps=maps, mask=mask)


def _load_case(dataset_dir: Path, entry: dict) -> tuple[Raster, CaseMeta, BinaryMask | None]:
    case_id = entry.get("case_id")
    if not case_id or "image" not in entry:
        raise DataError(f"{dataset_dir}: malformed index entry {entry!r}")
    image, calibration = load_image(dataset_dir / entry["image"])
    if "pixel_size_mm" in entry:
        calibration = Calibration(float(entry["pixel_size_mm"]))
    gt_mask = load_mask(dataset_dir / entry["mask"]) if entry.get("mask") else None
    meta = CaseMeta(case_id=case_id, modality=entry.get("modality", "unknown"),
                    calibration=calibration,
                    gt_measurement_mm=entry.get("gt_measurement_mm"),
                    gt_mask_path="gt_mask.pgm" if gt_mask is not None else None)
    return image, meta, gt_mask


def _write_case_dir(out_dir: Path, result: CaseResult) -> None:
    case_id = result.record.meta.case_id
    tmp = out_dir / f".{case_id}.tmp"
    final = out_dir / case_id
    if tmp.exists():
        shutil.rmtree(tmp)
    tmp.mkdir(parents=True)

    if result.image is not None:
        save_image(result.image, tmp / "image.pgm", result.record.meta.calibration)
    if result.gt_mask is not None:
        save_mask(result.gt_mask, tmp / "gt_mask.pgm")
    if not result.failed:
        for n in range(result.stack.T):
            save_probmap(result.stack.map_at(n), tmp / f"sample_{n:02d}.uqp")
        save_probmap(result.maps.mean_prob, tmp / "mean_prob.uqp")
        save_mask(result.mask, tmp / "mask.pgm")
        for kind, name in UNC_FILES.items():
            save_uncertainty_map(result.maps.by_kind(kind), tmp / name)
    result.record.save(tmp / "case.json")

    if final.exists():
        shutil.rmtree(final)
    os.replace(tmp, final)


def run(dataset_dir, out_dir, config: RunConfig) -> dict:
    """Process a whole dataset and write the result tree.

    Cases are computed on a bounded worker pool, then the out-of-
    distribution threshold is fixed (configured value, or mean + 2 std of
    this run's scores) and everything is written in case_id order.
    Returns the summary that also lands in summary.json.
    """
    dataset = Path(dataset_dir)
    out = Path(out_dir)
    entries = load_dataset_index(dataset)
    predictor = make_predictor(config.predictor)

    def one(entry: dict) -> CaseResult:
        image, meta, gt_mask = _load_case(dataset, entry)
        return process_case(image, meta, config, predictor, gt_mask)

    workers = config.workers or os.cpu_count() or 1
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(one, entries))
    results.sort(key=lambda r: r.record.meta.case_id)

    scores = [r.record.uncertainty_score for r in results if not r.failed]
    ood_threshold = config.ood_threshold
    if ood_threshold is None and scores:
        ood_threshold = default_ood_threshold(scores)
    if ood_threshold is not None:
        for r in results:
            if not r.failed:
                r.record.ood_flag = r.record.uncertainty_score > ood_threshold

    out.mkdir(parents=True, exist_ok=True)
    for result in results:
        _write_case_dir(out, result)

    summary = {
        "method": config.method,
        "samples": config.samples,
        "seed": config.seed,
        "threshold": config.threshold,
        "ood_threshold": ood_threshold,
        "n_cases": len(results),
        "n_flagged": sum(1 for r in results if r.record.error is not None),
        "flagged_cases": sorted(r.record.meta.case_id for r in results
                                if r.record.error is not None),
        "predictor_failures": sorted(r.record.meta.case_id for r in results
                                     if r.failed),
        "cases": [{"case_id": r.record.meta.case_id,
                   "uncertainty_score": r.record.uncertainty_score,
                   "ood_flag": r.record.ood_flag,
                   "error": r.record.error} for r in results],
    }
    _write_json(out / "config.json", config.to_dict())
    _write_json(out / "summary.json", summary)
    return summary


def _write_json(path: Path, payload: dict) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    os.replace(tmp, path)


def load_records(results_dir) -> list[CaseRecord]:
    """Read every case.json under a results directory, case_id order."""
    root = Path(results_dir)
    if not root.is_dir():
        raise DataError(f"no results directory at {results_dir}")
    records = []
    for case_json in sorted(root.glob("*/case.json")):
        records.append(CaseRecord.load(case_json))
    if not records:
        raise DataError(f"{results_dir} contains no case records")
    return records
