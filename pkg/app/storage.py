"""
Run artifacts on the local filesystem under settings.OUTPUT_DIR.
- trace CSVs: fixed header, %.17g values (exact float round-trip), LF endings
- summaries: "key = value" lines
- one directory per run id
"""
from __future__ import annotations
import csv
import math
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence

import numpy as np

from app.errors import ConfigError
from app.diagnostics import CSV_FIELDS, IterationTrace
from app.settings import settings


def _fmt(v: Any) -> str:
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return "%.17g" % float(v)


# ---------- traces

def write_trace_csv(trace: Sequence[IterationTrace], path: Path | str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=list(CSV_FIELDS), lineterminator="\n")
        writer.writeheader()
        for t in trace:
            writer.writerow({name: _fmt(value) for name, value in zip(CSV_FIELDS, t.row())})
    return path


def read_trace_csv(path: Path | str) -> List[IterationTrace]:
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        if tuple(reader.fieldnames or ()) != CSV_FIELDS:
            raise ConfigError(f"unexpected header {reader.fieldnames}", location=str(path))
        out = []
        for row in reader:
            values = {k: float(row[k]) for k in CSV_FIELDS[1:]}
            out.append(IterationTrace(k=int(row["k"]), **values))
    return out


def write_paths_csv(trace: Sequence[IterationTrace], players: Sequence[int], path: Path | str) -> Path:
    """Own-action trajectories of the given 0-based players; columns are 1-based names."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fields = ["k"] + [f"x_{i + 1}" for i in players]
    with path.open("w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=fields, lineterminator="\n")
        writer.writeheader()
        for t in trace:
            if t.actions is None:
                continue
            row = {"k": str(t.k)}
            row.update({f"x_{i + 1}": _fmt(t.actions[i]) for i in players})
            writer.writerow(row)
    return path


# ---------- summaries

def _summary_value(v: Any) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return "nan" if math.isnan(v) else "%.10g" % v
    if isinstance(v, (list, tuple, np.ndarray)):
        return " ".join(_summary_value(float(x)) if isinstance(x, (float, np.floating)) else str(x) for x in v)
    if v is None:
        return "-"
    return str(v)


def format_summary(summary: Mapping[str, Any]) -> str:
    return "".join(f"{k} = {_summary_value(v)}\n" for k, v in summary.items())


def write_summary(summary: Mapping[str, Any], path: Path | str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_summary(summary), encoding="utf-8")
    return path


# ---------- run directories

def run_dir(run_id: str, root: Optional[Path | str] = None) -> Path:
    d = Path(root or settings.OUTPUT_DIR) / run_id
    d.mkdir(parents=True, exist_ok=True)
    return d


def list_runs(root: Optional[Path | str] = None) -> List[Dict]:
    """
    Folder-style listing of the artifact root.
    Returns [{ 'run_id': ..., 'files': [{name,size,last_modified}] }] sorted by run id.
    """
    base = Path(root or settings.OUTPUT_DIR)
    if not base.is_dir():
        return []
    items: List[Dict] = []
    for d in sorted(p for p in base.iterdir() if p.is_dir()):
        files = []
        for f in sorted(d.iterdir()):
            if not f.is_file():
                continue
            st = f.stat()
            files.append({
                "name": f.name,
                "size": st.st_size,
                "last_modified": datetime.fromtimestamp(st.st_mtime, tz=timezone.utc).isoformat(),
            })
        items.append({"run_id": d.name, "files": files})
    return items
