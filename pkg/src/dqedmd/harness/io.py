"""CSV persistence for result tables and trajectory sets.

Results file::

    # dqedmd <version> config_sha256=<hex> <key>=<value> ...
    system,word_length,epsilon,trial_index,rel_K_error,mean_rel_pred_error,recovery_rel_K_error,saturation_count,gram_condition,runtime_seconds
    pendulum,8,0.0125...,0,...

Floats are written with ``repr`` so they parse back bit-exactly; a missing
optional value is an empty cell, a failed metric is ``nan``.

Trajectory file::

    # dqedmd <version> system=<name> dt=<float>
    trajectory_id,t,x1,x2
    0,0,0.31,-0.77

``t`` is the integer step index.
"""

from __future__ import annotations

import csv
import math
from dataclasses import astuple, dataclass, fields
from pathlib import Path
from typing import Optional

import numpy as np

from .. import __version__
from ..dynamics import TrajectorySet

__all__ = [
    "ResultRecord",
    "RESULT_COLUMNS",
    "write_results",
    "read_results",
    "read_metadata",
    "write_trajectories",
    "read_trajectories",
]


@dataclass(frozen=True)
class ResultRecord:
    system: str
    word_length: int
    epsilon: float
    trial_index: int
    rel_K_error: float
    mean_rel_pred_error: float
    recovery_rel_K_error: Optional[float]
    saturation_count: int
    gram_condition: float
    runtime_seconds: float


RESULT_COLUMNS = tuple(f.name for f in fields(ResultRecord))
_INT_COLUMNS = {"word_length", "trial_index", "saturation_count"}


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _meta_line(meta: dict) -> str:
    parts = [f"dqedmd {__version__}"]
    parts += [f"{k}={v}" for k, v in meta.items()]
    return "# " + " ".join(parts) + "\n"


def write_results(records, path, meta: Optional[dict] = None) -> None:
    """Write records as CSV under one metadata comment line and the header."""
    with open(path, "w", newline="") as fh:
        fh.write(_meta_line(dict(meta or {})))
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RESULT_COLUMNS)
        for rec in records:
            writer.writerow([_fmt(v) for v in astuple(rec)])


def _parse(name, cell):
    if name == "system":
        return cell
    if cell == "":
        return None
    if name in _INT_COLUMNS:
        return int(cell)
    return float(cell)


def read_metadata(path) -> dict:
    """Key/value pairs from the metadata comment line (plus ``tool``)."""
    with open(path) as fh:
        first = fh.readline()
    if not first.startswith("#"):
        return {}
    tokens = first[1:].split()
    meta = {"tool": " ".join(tokens[:2])}
    for tok in tokens[2:]:
        key, _, val = tok.partition("=")
        meta[key] = val
    return meta


def read_results(path) -> list[ResultRecord]:
    with open(path, newline="") as fh:
        rows = [line for line in fh if not line.startswith("#")]
    reader = csv.reader(rows)
    header = next(reader, None)
    if header is None or tuple(header) != RESULT_COLUMNS:
        raise ValueError(f"{path}: unexpected header {header}")
    return [ResultRecord(*(_parse(n, c) for n, c in zip(RESULT_COLUMNS, row)))
            for row in reader]


def write_trajectories(trajs: TrajectorySet, path) -> None:
    M, steps, n = trajs.states.shape
    with open(path, "w", newline="") as fh:
        fh.write(_meta_line({"system": trajs.system or "unknown",
                             "dt": repr(float(trajs.dt))}))
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["trajectory_id", "t"] + [f"x{j + 1}" for j in range(n)])
        for m in range(M):
            for t in range(steps):
                writer.writerow([m, t] + [repr(float(v)) for v in trajs.states[m, t]])


def read_trajectories(path) -> TrajectorySet:
    """Parse a trajectory CSV; every trajectory must have the same length."""
    meta = read_metadata(path)
    with open(path, newline="") as fh:
        rows = [line for line in fh if not line.startswith("#")]
    reader = csv.reader(rows)
    header = next(reader, None)
    if header is None or header[:2] != ["trajectory_id", "t"] or len(header) < 3:
        raise ValueError(f"{path}: expected header trajectory_id,t,x1,...")
    data: dict[int, list] = {}
    for row in reader:
        data.setdefault(int(row[0]), []).append(
            (int(row[1]), [float(v) for v in row[2:]]))
    if not data:
        raise ValueError(f"{path}: no trajectory rows")
    lengths = {len(v) for v in data.values()}
    if len(lengths) != 1:
        raise ValueError(f"{path}: trajectories differ in length {sorted(lengths)}")
    states = []
    for tid in sorted(data):
        steps = sorted(data[tid])
        if [t for t, _ in steps] != list(range(len(steps))):
            raise ValueError(f"{path}: trajectory {tid} has gaps in t")
        states.append([x for _, x in steps])
    dt = float(meta.get("dt", "nan"))
    if math.isnan(dt):
        dt = 0.01
    return TrajectorySet(np.array(states), dt, meta.get("system", ""))
