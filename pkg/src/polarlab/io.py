"""CSV/JSON writers. Floats are written with ``repr`` so reruns are byte-identical."""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np


class OutputError(OSError):
    pass


def fmt(v):
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(v)


def write_csv(path, header, rows):
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([v if isinstance(v, str) else fmt(v) for v in row])
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path


def write_json(path, obj):
    path = Path(path)
    try:
        path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"not JSON serialisable: {type(obj).__name__}")


def coord_header(t):
    return [f"x{i}" for i in range(t)]


def write_points_csv(path, points):
    points = np.atleast_2d(points)
    return write_csv(path, coord_header(points.shape[1]), points.tolist())


def write_measure_csv(path, nodes, weights):
    nodes = np.atleast_2d(nodes)
    rows = (list(p) + [w] for p, w in zip(nodes.tolist(), np.asarray(weights).tolist()))
    return write_csv(path, coord_header(nodes.shape[1]) + ["weight"], rows)


def write_greedy_csv(path, seq):
    t = seq.points.shape[1]
    rows = ([n] + list(p) + [v] for n, p, v in seq.to_rows())
    return write_csv(path, ["n"] + coord_header(t) + ["value"], rows)


def write_probe_csv(path, rows):
    return write_csv(path, ["N", "P_best", "W_K", "gap"], ([r.N, r.P_best, r.W_K, r.gap] for r in rows))


def write_energy_probe_csv(path, rows):
    return write_csv(
        path,
        ["N", "E_min", "E_over_N2", "I_eq", "gap"],
        ([r.N, r.E_min, r.E_over_N2, r.I_eq, r.gap] for r in rows),
    )
