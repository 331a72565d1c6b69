import json
import math
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List

import numpy as np
from fastapi import Body, Depends, FastAPI, HTTPException
from fastapi.responses import FileResponse
from sqlmodel import Session, select

from app import presets, storage
from app.config import ExperimentConfig, parse_config
from app.db import get_session
from app.errors import ConfigError, NashAdmmError, ParameterError
from app.experiments import check_params, run_experiment
from app.log import setup_logging
from app.models import Run

setup_logging()
app = FastAPI(title="nash-admm")

EXAMPLE_CONFIG = {
    "mode": "admm",
    "seed": 7,
    "game": {
        "kind": "cournot",
        "participation": [[1, 1]],
        "price_intercepts": [10],
        "price_slopes": [1],
        "cost_quad": [0.5, 0.5],
        "cost_lin": [1, 1],
        "upper": [10, 10],
    },
    "graph": {"preset": "complete2"},
    "solver": {"c": 1.0, "c0": "auto", "beta": "auto"},
    "stopping": {"tol": 1e-10, "max_iter": 20000},
}


@app.get("/healthz", include_in_schema=False)
def healthz():
    return {"ok": True}


# ----- helpers -----
def jsonable(v: Any) -> Any:
    """numpy -> python; nan/inf -> None (strict JSON)."""
    if isinstance(v, dict):
        return {k: jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [jsonable(x) for x in v]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        f = float(v)
        return f if math.isfinite(f) else None
    return v


def _status_for(e: NashAdmmError) -> int:
    return 400 if isinstance(e, (ConfigError, ParameterError)) else 422


def _parse(payload: Dict) -> ExperimentConfig:
    try:
        return parse_config(payload, where="body")
    except ConfigError as e:
        raise HTTPException(status_code=400, detail=str(e))


def _touch(run: Run, **fields) -> None:
    for k, v in fields.items():
        setattr(run, k, v)
    run.updated_at = datetime.now(timezone.utc)


def _record(run: Run) -> Dict:
    return {
        "id": run.id,
        "mode": run.mode,
        "status": run.status,
        "error": run.error,
        "created_at": run.created_at.isoformat(),
        "updated_at": run.updated_at.isoformat(),
        "summary": json.loads(run.summary_json) if run.summary_json else None,
        "has_trace": bool(run.csv_path) and Path(run.csv_path).is_file(),
    }


def _get(session: Session, run_id: str) -> Run:
    run = session.get(Run, run_id)
    if run is None:
        raise HTTPException(status_code=404, detail=f"unknown run {run_id}")
    return run


# ---------- presets ----------
@app.get("/api/presets")
def api_presets():
    return {
        "graphs": ["fig2-ring20", "ring15", "ring<n>", "path<n>", "complete<n>"],
        "games": [
            {"kind": "cournot", "preset": "example1", "variants": ["standard", "extreme"],
             "firms": presets.EXAMPLE1_FIRMS, "markets": presets.EXAMPLE1_MARKETS},
            {"kind": "rate_control", "preset": "example2-default",
             "links": presets.EXAMPLE2_LINKS, "users": presets.EXAMPLE2_USERS,
             "defaults": presets.EXAMPLE2_DEFAULTS},
        ],
    }


# ---------- parameter check ----------
@app.post("/api/check-params")
def api_check_params(payload: Dict = Body(..., example=EXAMPLE_CONFIG)):
    cfg = _parse(payload)
    try:
        return jsonable(check_params(cfg))
    except NashAdmmError as e:
        raise HTTPException(status_code=_status_for(e), detail=str(e))


# ---------- runs ----------
@app.post("/api/runs")
def api_create_run(payload: Dict = Body(..., example=EXAMPLE_CONFIG), session: Session = Depends(get_session)):
    cfg = _parse(payload)
    run = Run(mode=cfg.mode, config_json=json.dumps(payload))
    out = storage.run_dir(run.id)
    # artifacts always land in the run's own directory
    cfg = cfg.model_copy(update={"output": cfg.output.model_copy(update={
        "csv": str(out / "trace.csv"),
        "baseline_csv": str(out / "baseline.csv"),
    })})
    _touch(run, status="running")
    session.add(run)
    session.commit()

    try:
        report = run_experiment(cfg)
    except NashAdmmError as e:
        _touch(run, status="failed", error=str(e))
        session.add(run)
        session.commit()
        raise HTTPException(status_code=_status_for(e), detail=str(e))

    storage.write_summary(report.summary, out / "summary.txt")
    summary = jsonable(report.summary)
    _touch(
        run,
        status="done",
        summary_json=json.dumps(summary),
        csv_path=str(report.csv_paths[0]) if report.csv_paths else None,
    )
    session.add(run)
    session.commit()
    session.refresh(run)
    return {"id": run.id, "status": run.status, "summary": summary}


@app.get("/api/runs")
def api_list_runs(session: Session = Depends(get_session)) -> List[Dict]:
    runs = session.exec(select(Run).order_by(Run.created_at.desc())).all()
    return [{"id": r.id, "mode": r.mode, "status": r.status, "created_at": r.created_at.isoformat()} for r in runs]


@app.get("/api/runs/{run_id}")
def api_get_run(run_id: str, session: Session = Depends(get_session)):
    return _record(_get(session, run_id))


@app.get("/api/runs/{run_id}/trace")
def api_run_trace(run_id: str, session: Session = Depends(get_session)):
    run = _get(session, run_id)
    if not run.csv_path or not Path(run.csv_path).is_file():
        raise HTTPException(status_code=404, detail=f"run {run_id} has no trace")
    return FileResponse(run.csv_path, media_type="text/csv", filename=f"{run_id}.csv")


# ---------- artifacts ----------
@app.get("/api/artifacts")
def api_artifacts():
    """Per-run artifact folders under OUTPUT_DIR with file sizes and modification times."""
    return storage.list_runs()
