"""Review service: read-only HTTP views over a results directory plus an
append-only decision log.

The service never rewrites pipeline artifacts.  Decisions land as one JSON
object per line, fsynced before the request is acknowledged, and the
effective state of a case is always the fold of its log entries (latest
wins), so a restart after any crash reconstructs exactly what was
acknowledged.
"""

from __future__ import annotations

import json
import os
import threading
from datetime import datetime, timezone
from pathlib import Path

from fastapi import FastAPI, HTTPException, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from .errors import DataError, FormatError
from .raster import load_image, load_mask, load_probmap, load_uncertainty_map

_ACTIONS = ("accept", "override", "reject")
_STATUS = {"accept": "accepted", "override": "overridden", "reject": "rejected"}
_STATUSES = ("pending", "accepted", "overridden", "rejected")
_SORT_KEYS = ("uncertainty", "case_id", "measurement")
_DECISION_KEYS = {"action", "value_mm", "note", "reviewer"}


def _validate_decision_body(body) -> dict:
    if not isinstance(body, dict):
        raise HTTPException(400, "decision body must be a JSON object")
    unknown = set(body) - _DECISION_KEYS
    if unknown:
        raise HTTPException(400, f"unknown decision fields: {sorted(unknown)}")
    action = body.get("action")
    if action not in _ACTIONS:
        raise HTTPException(400, f"action must be one of {list(_ACTIONS)}")
    out = {"action": action}
    if action == "override":
        value = body.get("value_mm")
        if (not isinstance(value, (int, float)) or isinstance(value, bool)
                or not value > 0):
            raise HTTPException(400, "override requires value_mm > 0")
        out["value_mm"] = float(value)
    elif "value_mm" in body:
        raise HTTPException(400, f"{action} does not take value_mm")
    for key in ("note", "reviewer"):
        value = body.get(key, "")
        if not isinstance(value, str):
            raise HTTPException(400, f"{key} must be a string")
        out[key] = value
    return out


class _ServiceState:
    """Case index plus decision log, guarded by a single writer lock."""

    def __init__(self, results_dir: Path, decisions_path: Path):
        self.results_dir = results_dir
        self.decisions_path = decisions_path
        self.lock = threading.Lock()
        self.cases: dict[str, dict] = {}
        for case_json in sorted(results_dir.glob("*/case.json")):
            record = json.loads(case_json.read_text())
            self.cases[record["case_id"]] = record
        self.log: list[dict] = []
        self.effective: dict[str, dict] = {}
        self._replay()

    def _replay(self) -> None:
        if not self.decisions_path.exists():
            return
        lines = self.decisions_path.read_text().split("\n")
        last = max((i for i, line in enumerate(lines) if line.strip()), default=-1)
        for i, line in enumerate(lines):
            if not line.strip():
                continue
            try:
                entry = json.loads(line)
            except json.JSONDecodeError:
                if i == last:
                    break     # torn final line from an interrupted append
                raise FormatError(f"corrupt decision log line {i + 1}",
                                  path=self.decisions_path)
            self.log.append(entry)
            self.effective[entry["case_id"]] = entry

    def status_of(self, case_id: str) -> str:
        entry = self.effective.get(case_id)
        return _STATUS[entry["action"]] if entry else "pending"

    def decision_state(self, case_id: str) -> dict:
        entry = self.effective.get(case_id)
        if entry is None:
            return {"action": "pending"}
        state = {"action": _STATUS[entry["action"]],
                 "note": entry.get("note", ""),
                 "reviewer": entry.get("reviewer", ""),
                 "timestamp": entry.get("timestamp", "")}
        if "value_mm" in entry:
            state["value_mm"] = entry["value_mm"]
        return state

    def record_decision(self, case_id: str, decision: dict) -> dict:
        with self.lock:
            current = self.effective.get(case_id)
            if current is not None and all(
                    current.get(k) == decision.get(k)
                    for k in ("action", "value_mm", "note", "reviewer")):
                return current            # identical resubmission, no new entry
            entry = dict(decision)
            entry["case_id"] = case_id
            entry["timestamp"] = datetime.now(timezone.utc).isoformat()
            line = json.dumps(entry, sort_keys=True)
            self.decisions_path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.decisions_path, "a", encoding="utf-8") as fh:
                fh.write(line + "\n")
                fh.flush()
                os.fsync(fh.fileno())
            self.log.append(entry)
            self.effective[case_id] = entry
            return entry


def create_app(results_dir, decisions_path, ui_dir=None) -> FastAPI:
    results = Path(results_dir)
    if not results.is_dir():
        raise DataError(f"no results directory at {results_dir}")
    state = _ServiceState(results, Path(decisions_path))

    app = FastAPI(title="uqseg review service")
    app.add_middleware(CORSMiddleware, allow_origins=["*"],
                       allow_methods=["*"], allow_headers=["*"])

    @app.get("/api/health")
    def health():
        return {"status": "ok"}

    @app.get("/api/cases")
    def list_cases(sort: str = "uncertainty", order: str = "desc",
                   status: str | None = None):
        if sort not in _SORT_KEYS:
            raise HTTPException(400, f"sort must be one of {list(_SORT_KEYS)}")
        if order not in ("asc", "desc"):
            raise HTTPException(400, "order must be asc or desc")
        if status is not None and status not in _STATUSES:
            raise HTTPException(400, f"status must be one of {list(_STATUSES)}")

        summaries = []
        for case_id, record in state.cases.items():
            measurement = record.get("measurement") or {}
            summaries.append({
                "case_id": case_id,
                "modality": record.get("modality", "unknown"),
                "method": record.get("method"),
                "measurement_mm": measurement.get("value_mm"),
                "uncertainty_score": record.get("uncertainty_score", 0.0),
                "ood_flag": bool(record.get("ood_flag", False)),
                "error": record.get("error"),
                "decision_status": state.status_of(case_id),
            })
        if status is not None:
            summaries = [s for s in summaries if s["decision_status"] == status]

        if sort == "case_id":
            summaries.sort(key=lambda s: s["case_id"], reverse=(order == "desc"))
        else:
            key = "uncertainty_score" if sort == "uncertainty" else "measurement_mm"
            missing = float("-inf")
            summaries.sort(key=lambda s: (s[key] if s[key] is not None else missing,
                                          s["case_id"]),
                           reverse=(order == "desc"))
        return summaries

    def _get_record(case_id: str) -> dict:
        record = state.cases.get(case_id)
        if record is None:
            raise HTTPException(404, f"unknown case {case_id!r}")
        return record

    @app.get("/api/cases/{case_id}")
    def get_case(case_id: str):
        record = dict(_get_record(case_id))
        record["decision"] = state.decision_state(case_id)
        record["decision_status"] = state.status_of(case_id)
        return record

    @app.get("/api/cases/{case_id}/layers/{name}")
    def get_layer(case_id: str, name: str):
        record = _get_record(case_id)
        case_dir = state.results_dir / case_id
        if name == "image":
            path, loader = "image.pgm", lambda p: load_image(p)[0]
        elif name == "mask":
            path, loader = record.get("mask_path"), load_mask
        elif name == "mean_prob":
            path, loader = record.get("prob_path"), load_probmap
        elif name in record.get("uncertainty_paths", {}):
            path, loader = record["uncertainty_paths"][name], load_uncertainty_map
        else:
            raise HTTPException(404, f"unknown layer {name!r}")
        if not path or not (case_dir / path).exists():
            raise HTTPException(404, f"case {case_id!r} has no {name!r} layer")
        values = loader(case_dir / path).values
        return {"width": values.shape[1], "height": values.shape[0],
                "values": [float(v) for v in values.ravel()]}

    @app.post("/api/cases/{case_id}/decision")
    async def post_decision(case_id: str, request: Request):
        _get_record(case_id)
        try:
            body = await request.json()
        except Exception:
            raise HTTPException(400, "request body must be JSON")
        decision = _validate_decision_body(body)
        state.record_decision(case_id, decision)
        return JSONResponse({"case_id": case_id,
                             "decision_status": state.status_of(case_id),
                             "decision": state.decision_state(case_id)})

    @app.get("/api/decisions")
    def decisions():
        return list(state.log)

    if ui_dir is not None:
        ui = Path(ui_dir)
        if not ui.is_dir():
            raise DataError(f"no UI directory at {ui_dir}")
        app.mount("/", StaticFiles(directory=ui, html=True), name="ui")
    return app
