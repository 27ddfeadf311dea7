"""Run artifacts: trajectory CSV, metrics JSON and plot-data files.

Every writer is a pure function of the log, so a deterministic run gives
byte-identical files.  Floats are written with 9 significant digits.

Plot-data layout (one directory):

* ``robot_<id>_path.csv``: ``t,px,py,pz`` (one column per dimension)
* ``robot_<id>_speed.csv``: ``t,speed`` with ``speed = ||v||``
* ``limits.csv``: lines ``vel,<tau>``, ``acc,<tau>``, ``jerk,<tau>``
"""

from __future__ import annotations

import json
import math
import os

import numpy as np

from .swarm import SimLog

_KINDS = ("p", "v", "a", "j")


def _fmt(x: float) -> str:
    return "%.9g" % x


def axis_names(dim: int) -> list[str]:
    return list("xyz"[:dim]) if dim <= 3 else [str(i) for i in range(dim)]


def trajectory_header(dim: int) -> str:
    cols = ["t", "robot_id"] + [k + ax for k in _KINDS for ax in axis_names(dim)]
    return ",".join(cols)


def _open_for_write(path):
    try:
        return open(path, "w", encoding="utf-8", newline="")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def write_trajectory_csv(log: SimLog, path):
    """One row per (log time, robot), sorted by time then robot id."""
    lines = [trajectory_header(log.dim)]
    if log.samples is not None and len(log.times):
        order = np.argsort(log.robot_ids, kind="stable")
        for k, t in enumerate(log.times):
            tt = _fmt(t)
            for i in order:
                vals = log.samples[k, i].reshape(-1)
                lines.append(",".join([tt, str(log.robot_ids[i])] + [_fmt(v) for v in vals]))
    with _open_for_write(path) as fh:
        fh.write("\n".join(lines) + "\n")


def json_safe(value):
    if isinstance(value, dict):
        return {str(k): json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [json_safe(v) for v in value]
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def write_metrics(summary: dict, path):
    """JSON with sorted keys; infinities and NaN become ``null``."""
    text = json.dumps(json_safe(summary), indent=2, sort_keys=True, allow_nan=False)
    with _open_for_write(path) as fh:
        fh.write(text + "\n")


def emit_plot_data(log: SimLog, directory):
    """Per-robot path and speed files plus the fleet's limits (first robot's values)."""
    try:
        os.makedirs(directory, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create {directory}: {exc}") from exc
    axes = axis_names(log.dim)
    times = [_fmt(t) for t in log.times]
    for i, rid in enumerate(log.robot_ids):
        pos = log.samples[:, i, 0, :] if len(times) else np.zeros((0, log.dim))
        speed = np.linalg.norm(log.samples[:, i, 1, :], axis=-1) if len(times) else np.zeros(0)
        rows = ["t," + ",".join("p" + ax for ax in axes)]
        rows += [",".join([t] + [_fmt(v) for v in p]) for t, p in zip(times, pos)]
        with _open_for_write(os.path.join(directory, f"robot_{rid}_path.csv")) as fh:
            fh.write("\n".join(rows) + "\n")
        rows = ["t,speed"] + [f"{t},{_fmt(s)}" for t, s in zip(times, speed)]
        with _open_for_write(os.path.join(directory, f"robot_{rid}_speed.csv")) as fh:
            fh.write("\n".join(rows) + "\n")
    if log.limits:
        lim = log.limits[0]
        rows = [f"vel,{float(lim.vel)!r}", f"acc,{float(lim.acc)!r}", f"jerk,{float(lim.jerk)!r}"]
        with _open_for_write(os.path.join(directory, "limits.csv")) as fh:
            fh.write("\n".join(rows) + "\n")
