"""Per-pixel probability predictors.

The contract is a single method, ``predict(image, seed=None)``: an intensity
raster in, a probability raster of the same shape out.  ``seed=None`` selects
the deterministic mode; an integer seed selects the stochastic mode, which
must be a pure function of (input, seed).  Stochasticity stands in for
Monte Carlo dropout: one parameter draw per forward pass, so each call is
one configuration of the model, spatially coherent across the image.

Two implementations ship: an analytic logistic-threshold predictor used as
the reference model throughout, and a subprocess adapter so any external
segmentation model speaking the file protocol can plug in.
"""

from __future__ import annotations

import json
import subprocess
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, runtime_checkable

import numpy as np

from .errors import DataError, FormatError, PredictorError
from .raster import Raster, load_probmap, save_image
from .seeding import derive_seed
from .tta import SampleStack


@runtime_checkable
class Predictor(Protocol):
    def predict(self, image: Raster, seed: int | None = None) -> Raster: ...


@dataclass(frozen=True)
class SigmoidPredictorParams:
    """Logistic threshold model: p = 1 / (1 + exp(-(I - threshold)/softness)).

    In stochastic mode the threshold gets additive Gaussian jitter and the
    softness gets multiplicative lognormal jitter, one draw of each per call.
    """

    threshold: float = 0.5
    softness: float = 0.05
    jitter_threshold: float = 0.03
    jitter_softness: float = 0.01

    def __post_init__(self):
        if not 0.0 < self.threshold < 1.0:
            raise DataError(f"threshold must lie in (0, 1), got {self.threshold}")
        if self.softness <= 0.0:
            raise DataError(f"softness must be > 0, got {self.softness}")
        if self.jitter_threshold < 0.0 or self.jitter_softness < 0.0:
            raise DataError("jitter magnitudes must be >= 0")
        # keeps softness * exp(noise) well away from zero for |noise| <= 3 sigma
        if self.softness - 3.0 * self.jitter_softness <= 0.0:
            raise DataError("softness - 3 * jitter_softness must stay positive")

    def to_dict(self) -> dict:
        return {"threshold": self.threshold, "softness": self.softness,
                "jitter_threshold": self.jitter_threshold,
                "jitter_softness": self.jitter_softness}

    @classmethod
    def from_dict(cls, d: dict) -> "SigmoidPredictorParams":
        return cls(**{k: float(v) for k, v in d.items()})


class SigmoidPredictor:
    """Reference predictor: a pointwise logistic function of intensity."""

    def __init__(self, params: SigmoidPredictorParams | None = None):
        self.params = params or SigmoidPredictorParams()

    def predict(self, image: Raster, seed: int | None = None) -> Raster:
        if image.kind != "intensity":
            raise DataError(f"predictor expects an intensity raster, got {image.kind}")
        p = self.params
        theta, tau = p.threshold, p.softness
        if seed is not None:
            rng = np.random.default_rng(seed)
            # fixed draw order: threshold noise first, then softness noise
            theta = theta + rng.normal(0.0, p.jitter_threshold)
            tau = tau * np.exp(rng.normal(0.0, p.jitter_softness))
        with np.errstate(over="ignore"):
            probs = 1.0 / (1.0 + np.exp(-(image.values - theta) / tau))
        return Raster(probs, "probability")


def mcd_sample_stack(predictor: Predictor, image: Raster, T: int, seed: int) -> SampleStack:
    """T stochastic forward passes with per-sample seeds derived from (seed, t)."""
    if T < 1:
        raise DataError(f"T must be >= 1, got {T}")
    maps = np.empty((T, image.height, image.width))
    for t in range(T):
        try:
            predicted = predictor.predict(image, seed=derive_seed(seed, t))
        except Exception as exc:
            raise PredictorError(f"MC sample {t} failed: {exc}") from exc
        if predicted.shape != image.shape:
            raise PredictorError(f"MC sample {t}: predictor returned {predicted.shape}, "
                                 f"expected {image.shape}")
        maps[t] = predicted.values
    return SampleStack(maps, "mcd", seed=seed)


class ExternalPredictor:
    """Adapter invoking an external model as a subprocess.

    Protocol: a fresh temporary directory receives ``input.pgm`` plus
    ``input.meta.json``; the command is run as
    ``<command...> input.pgm output.uqp`` with ``--seed <n>`` appended in
    stochastic mode; ``output.uqp`` must come back in UQP1 format with the
    input's dimensions.
    """

    def __init__(self, command: list[str], timeout: float = 60.0):
        if not command:
            raise DataError("external predictor command must be non-empty")
        self.command = [str(part) for part in command]
        self.timeout = float(timeout)

    def predict(self, image: Raster, seed: int | None = None) -> Raster:
        if image.kind != "intensity":
            raise DataError(f"predictor expects an intensity raster, got {image.kind}")
        with tempfile.TemporaryDirectory(prefix="uqseg-ext-") as tmp:
            workdir = Path(tmp)
            in_path = workdir / "input.pgm"
            out_path = workdir / "output.uqp"
            save_image(image, in_path)
            meta = {"width": image.width, "height": image.height,
                    "mode": "deterministic" if seed is None else "stochastic"}
            (workdir / "input.meta.json").write_text(json.dumps(meta, sort_keys=True))
            argv = self.command + [str(in_path), str(out_path)]
            if seed is not None:
                argv += ["--seed", str(seed)]
            try:
                proc = subprocess.run(argv, capture_output=True, text=True,
                                      timeout=self.timeout, cwd=workdir)
            except subprocess.TimeoutExpired:
                raise PredictorError(f"external predictor timed out after {self.timeout}s: "
                                     f"{argv[0]}")
            except OSError as exc:
                raise PredictorError(f"could not launch external predictor: {exc}")
            if proc.returncode != 0:
                stderr = proc.stderr.strip()
                raise PredictorError(f"external predictor exited {proc.returncode}"
                                     + (f": {stderr}" if stderr else ""))
            if not out_path.exists():
                raise PredictorError("external predictor produced no output.uqp")
            try:
                predicted = load_probmap(out_path)
            except FormatError as exc:
                raise PredictorError(f"external predictor output unreadable: {exc}")
            if predicted.shape != image.shape:
                raise PredictorError(f"external predictor returned {predicted.shape}, "
                                     f"expected {image.shape}")
            return predicted


def make_predictor(config: dict) -> Predictor:
    """Build a predictor from a config mapping.

    ``{"kind": "sigmoid", "params": {...}}`` or
    ``{"kind": "external", "command": [...], "timeout": 60}``.
    """
    kind = config.get("kind", "sigmoid")
    if kind == "sigmoid":
        params = config.get("params")
        return SigmoidPredictor(SigmoidPredictorParams.from_dict(params) if params
                                else SigmoidPredictorParams())
    if kind == "external":
        return ExternalPredictor(config.get("command", []),
                                 timeout=float(config.get("timeout", 60.0)))
    raise DataError(f"unknown predictor kind {kind!r}")
