"""Experiment drivers: each is a pure function of its config (seed included)."""
from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from . import io as _io
from .energy import discrete_energy, energy_asymptote_probe, greedy_points
from .geometry import Ball, Circle, CompactSet, Interval, set_from_dict
from .kernels import Riesz, ShiftedLog, kernel_from_dict
from .measures import bl_distance, counting_measure, equilibrium_measure, sample
from .polarization import (
    Configuration,
    l1_flatness,
    maximin_solve,
    polarization,
    polarization_limit_probe,
)

__all__ = [
    "EXPERIMENT_KINDS",
    "DEFAULT_THRESHOLDS",
    "ExperimentConfig",
    "ExperimentError",
    "ExperimentResult",
    "run",
    "run_theorem_abc",
    "run_counterexample_ball",
    "run_polarization_limit",
    "run_energy_asymptote",
    "run_greedy",
    "run_random_points",
    "run_equilibrium",
    "emit",
]

EXPERIMENT_KINDS = (
    "theorem-abc",
    "polarization-limit",
    "energy-asymptote",
    "greedy",
    "counterexample-ball",
    "random-points",
    "equilibrium",
)

# relative entries ("*_rel") are multiplied by W_K
DEFAULT_THRESHOLDS = {
    "theorem-abc": {"a": 0.05, "b_rel": 0.02, "c_rel": 0.02},
    "counterexample-ball": {"p_slack": 1e-6, "bl_min": 0.5, "interior_mass": 1e-6},
    "polarization-limit": {"upper_slack": 1e-3},
    "energy-asymptote": {"upper": 1e-3},
    "greedy": {"value_rel": 0.03},
    "random-points": {"gap_rel": 0.05},
    "equilibrium": {"a4": 1e-3},
}


class ExperimentError(ValueError):
    """Config is malformed or does not fit the experiment."""


@dataclass
class ExperimentConfig:
    set: dict
    kernel: dict
    experiment: str
    N_list: List[int]
    seed: int
    tolerances: Dict[str, float] = field(default_factory=dict)
    output: Optional[str] = None
    options: Dict[str, object] = field(default_factory=dict)

    def __post_init__(self):
        if self.experiment not in EXPERIMENT_KINDS:
            raise ExperimentError(f"unknown experiment {self.experiment!r}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int):
            raise ExperimentError("seed must be an integer (no wall-clock defaults)")
        N = [int(n) for n in self.N_list]
        if any(n < 1 for n in N) or any(b <= a for a, b in zip(N, N[1:])):
            raise ExperimentError(f"N_list must be strictly increasing positive integers, got {self.N_list}")
        if self.experiment != "equilibrium" and not N:
            raise ExperimentError("N_list is empty")
        self.N_list = N
        for key, val in self.tolerances.items():
            if not (isinstance(val, (int, float)) and val > 0):
                raise ExperimentError(f"tolerance {key!r} must be positive, got {val!r}")

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        missing = [k for k in ("set", "kernel", "experiment", "seed") if k not in d]
        if missing:
            raise ExperimentError(f"config is missing {', '.join(missing)}")
        return cls(
            set=d["set"],
            kernel=d["kernel"],
            experiment=d["experiment"],
            N_list=list(d.get("N_list", [])),
            seed=d["seed"],
            tolerances=dict(d.get("tolerances", {})),
            output=d.get("output"),
            options=dict(d.get("options", {})),
        )

    @classmethod
    def from_file(cls, path):
        path = Path(path)
        try:
            data = json.loads(path.read_text())
        except OSError as exc:
            raise ExperimentError(f"cannot read config {path}: {exc.strerror or exc}") from exc
        except json.JSONDecodeError as exc:
            raise ExperimentError(f"config {path} is not valid JSON: {exc}") from exc
        return cls.from_dict(data)

    def to_dict(self):
        return {
            "set": self.set,
            "kernel": self.kernel,
            "experiment": self.experiment,
            "N_list": list(self.N_list),
            "seed": self.seed,
            "tolerances": dict(self.tolerances),
            "output": self.output,
            "options": dict(self.options),
        }

    def thresholds(self):
        out = dict(DEFAULT_THRESHOLDS.get(self.experiment, {}))
        out.update(self.tolerances)
        return out

    def build(self):
        A = set_from_dict(self.set)
        k = kernel_from_dict(self.kernel)
        if isinstance(k, ShiftedLog):
            k = k.for_set(A)
        return A, k


@dataclass
class ExperimentResult:
    kind: str
    verdict: str  # PASS | FAIL | REFUSED | DONE
    thresholds: dict
    tables: Dict[str, tuple] = field(default_factory=dict)  # name -> (header, rows)
    reports: Dict[str, object] = field(default_factory=dict)
    summary: Dict[str, object] = field(default_factory=dict)

    @property
    def exit_code(self):
        return {"PASS": 0, "DONE": 0, "FAIL": 2, "REFUSED": 3}[self.verdict]


def _opt(cfg, name, default):
    return cfg.options.get(name, default)


def _equilibrium(cfg, A, k, check=True):
    return equilibrium_measure(
        A,
        k,
        n_nodes=_opt(cfg, "n_nodes", None),
        resolution=_opt(cfg, "mesh_resolution", None),
        tol=cfg.thresholds().get("a4", 1e-3),
        check=check,
    )


def _pol_kwargs(cfg):
    kw = {"tol": float(_opt(cfg, "polarization_tol", 1e-9))}
    if _opt(cfg, "mesh_resolution", None):
        kw["coarse_resolution"] = float(cfg.options["mesh_resolution"])
    return kw


def _refusal(cfg, em):
    return ExperimentResult(
        cfg.experiment,
        "REFUSED",
        cfg.thresholds(),
        reports={"assumptions": [item.to_dict() for item in em.assumption_report.items]},
        summary={"failed": [item.assumption for item in em.assumption_report.failures()]},
    )


def _halfspace_family(A, em, N, seed):
    """``N`` equilibrium draws restricted to one side of the set (adversarial)."""
    if isinstance(A, Circle):
        theta = np.pi * (np.arange(N) + 0.5) / N
        return Configuration(A.points_at(theta))
    rng_seed = seed
    pts = []
    centre = em.base.nodes.mean(axis=0)
    while len(pts) < N:
        draw = sample(em, 4 * N, rng_seed).points
        pts.extend(p for p in draw if p[0] >= centre[0])
        rng_seed += 1
    return Configuration(np.asarray(pts[:N]))


def run_theorem_abc(cfg):
    """Metrics (a) weak distance, (b) polarization gap, (c) L1 flatness per family and N."""
    A, k = cfg.build()
    em = _equilibrium(cfg, A, k)
    if not em.assumption_report.all_pass:
        return _refusal(cfg, em)
    thr = cfg.thresholds()
    W = em.W_K
    limits = {"a": thr["a"], "b": thr["b_rel"] * W, "c": thr["c_rel"] * W}
    families = list(_opt(cfg, "families", ["random", "greedy", "maximin"]))
    adversarial = set(_opt(cfg, "adversarial", ["halfspace"]))
    probes = int(_opt(cfg, "probes", 64))
    pk = _pol_kwargs(cfg)
    greedy = None
    if "greedy" in families:
        greedy = greedy_points(A, k, max(cfg.N_list), tol=pk["tol"], coarse_resolution=pk.get("coarse_resolution"))
    rows = []
    metrics = {}
    for fam in families:
        for N in cfg.N_list:
            if fam == "random":
                conf = sample(em, N, cfg.seed * 100_003 + N)
            elif fam == "greedy":
                conf = greedy.prefix(N)
            elif fam == "maximin":
                conf, _ = maximin_solve(
                    A, k, N, seed=cfg.seed, em=em, budget=int(_opt(cfg, "budget", 200)),
                    n_restarts=int(_opt(cfg, "n_restarts", 2)), pol_kwargs={"tol": 1e-7},
                )
            elif fam == "halfspace":
                conf = _halfspace_family(A, em, N, cfg.seed)
            else:
                raise ExperimentError(f"unknown configuration family {fam!r}")
            P = polarization(conf, k, A, check=False, **pk).value
            a = bl_distance(counting_measure(conf), em.base, probes=probes, seed=cfg.seed)
            b = abs(P - W)
            c = l1_flatness(conf, k, em, P)
            rows.append([fam, N, a, b, c, P, W])
            metrics.setdefault(fam, []).append({"a": a, "b": b, "c": c})
    status = {}
    ok = True
    for fam, series in metrics.items():
        first, final = series[0], series[-1]
        small = {m: final[m] < limits[m] for m in "abc"}
        decreasing = {m: final[m] < first[m] for m in "abc"}
        agree = len(set(small.values())) == 1
        status[fam] = {"small": small, "decreasing": decreasing, "agree": agree}
        if not agree:
            ok = False
        if fam not in adversarial and not all(small[m] and decreasing[m] for m in "abc"):
            ok = False
    header = ["family", "N", "a_bl", "b_gap", "c_l1", "P", "W_K"]
    return ExperimentResult(
        cfg.experiment,
        "PASS" if ok else "FAIL",
        thr,
        tables={"metrics": (header, rows)},
        reports={"assumptions": [item.to_dict() for item in em.assumption_report.items]},
        summary={"W_K": W, "limits": limits, "status": status},
    )


def run_counterexample_ball(cfg):
    """Points at the centre of a ball are polarization optimal yet far from equilibrium."""
    A, k = cfg.build()
    if not isinstance(A, Ball) or not isinstance(k, Riesz) or A.t < 3 or k.s > A.t - 2:
        raise ExperimentError("counterexample-ball needs a Ball with t >= 3 and Riesz s <= t - 2")
    thr = cfg.thresholds()
    em = _equilibrium(cfg, A, k)
    a3 = em.assumption_report["A3"]
    interior = a3.detail.get("interior_mass", math.nan)
    pk = _pol_kwargs(cfg)
    probes = int(_opt(cfg, "probes", 64))
    expected = A.radius ** (-k.s)
    rows = []
    origin_exact = True
    spreads_below = True
    separated = True
    centre = np.asarray(A.center)
    for N in cfg.N_list:
        origin = Configuration(np.tile(centre, (N, 1)))
        P0 = polarization(origin, k, A, **pk).value
        origin_exact &= P0 == expected
        bl = bl_distance(counting_measure(origin), em.base, probes=probes, seed=cfg.seed)
        separated &= bl > thr["bl_min"]
        rows.append(["origin", N, P0, bl])
        rng = np.random.default_rng(cfg.seed * 100_003 + N)
        boundary = Configuration(A.project(centre + rng.standard_normal((N, A.t))))
        solid = Configuration(A.sample_uniform(N, rng))
        eq = sample(em, N, cfg.seed * 100_003 + N)
        for name, conf in (("sphere-uniform", boundary), ("ball-uniform", solid), ("equilibrium", eq)):
            P = polarization(conf, k, A, check=False, **pk).value
            spreads_below &= P <= expected + thr["p_slack"]
            b = bl_distance(counting_measure(conf), em.base, probes=probes, seed=cfg.seed)
            rows.append([name, N, P, b])
    a3_fails = a3.status == "fail" and interior < thr["interior_mass"]
    ok = origin_exact and spreads_below and separated and a3_fails
    return ExperimentResult(
        cfg.experiment,
        "PASS" if ok else "FAIL",
        thr,
        tables={"counterexample": (["family", "N", "P", "bl_to_equilibrium"], rows)},
        reports={"assumptions": [item.to_dict() for item in em.assumption_report.items]},
        summary={
            "origin_exact": bool(origin_exact),
            "spreads_below_origin": bool(spreads_below),
            "origin_far_from_equilibrium": bool(separated),
            "A3_fails": bool(a3_fails),
            "interior_mass": interior,
        },
    )


def run_polarization_limit(cfg):
    A, k = cfg.build()
    em = _equilibrium(cfg, A, k)
    if not em.assumption_report.all_pass:
        return _refusal(cfg, em)
    thr = cfg.thresholds()
    rows = polarization_limit_probe(
        A, k, cfg.N_list, seed=cfg.seed, em=em, require_assumptions=False,
        budget=int(_opt(cfg, "budget", 200)), n_restarts=int(_opt(cfg, "n_restarts", 2)),
        pol_kwargs={"tol": 1e-7},
    )
    gaps = [r.gap for r in rows]
    ok = all(g >= -thr["upper_slack"] for g in gaps) and (len(gaps) == 1 or gaps[-1] < gaps[0])
    if "final_gap_rel" in thr:
        ok &= gaps[-1] < thr["final_gap_rel"] * em.W_K
    return ExperimentResult(
        cfg.experiment, "PASS" if ok else "FAIL", thr,
        tables={"probe": (["N", "P_best", "W_K", "gap"], [[r.N, r.P_best, r.W_K, r.gap] for r in rows])},
        reports={"assumptions": [item.to_dict() for item in em.assumption_report.items]},
        summary={"W_K": em.W_K},
    )


def run_energy_asymptote(cfg):
    A, k = cfg.build()
    try:
        em = _equilibrium(cfg, A, k, check=False)
    except ValueError:
        em = None  # infinite equilibrium energy; the probe reports I_eq = inf
    thr = cfg.thresholds()
    rows = energy_asymptote_probe(
        A, k, cfg.N_list, seed=cfg.seed, em=em, budget=int(_opt(cfg, "budget", 5000)),
        n_restarts=int(_opt(cfg, "n_restarts", 1)),
    )
    gaps = [r.gap for r in rows]
    ok = all(r.E_over_N2 <= r.I_eq + thr["upper"] for r in rows) and (len(gaps) == 1 or gaps[-1] < gaps[0])
    return ExperimentResult(
        cfg.experiment, "PASS" if ok else "FAIL", thr,
        tables={"energy_probe": (
            ["N", "E_min", "E_over_N2", "I_eq", "gap"],
            [[r.N, r.E_min, r.E_over_N2, r.I_eq, r.gap] for r in rows],
        )},
        summary={"I_eq": rows[0].I_eq},
    )


def run_greedy(cfg):
    A, k = cfg.build()
    em = _equilibrium(cfg, A, k, check=False)
    thr = cfg.thresholds()
    a1 = _opt(cfg, "a1", None)
    pk = _pol_kwargs(cfg)
    seq = greedy_points(A, k, max(cfg.N_list), a1=a1, tol=pk["tol"], coarse_resolution=pk.get("coarse_resolution"))
    probes = int(_opt(cfg, "probes", 64))
    W = em.W_K
    rows = []
    for N in cfg.N_list:
        value = seq.values[N - 1]
        bl = bl_distance(counting_measure(seq.prefix(N)), em.base, probes=probes, seed=cfg.seed)
        rel = abs(value - W) / W if N >= 2 else math.nan
        rows.append([N, value, W, rel, bl])
    t = A.ambient_dim
    greedy_rows = [[n] + list(p) + [v] for n, p, v in seq.to_rows()]
    bls = [r[4] for r in rows]
    ok = rows[-1][3] < thr["value_rel"] and (len(bls) == 1 or bls[-1] < bls[0])
    return ExperimentResult(
        cfg.experiment, "PASS" if ok else "FAIL", thr,
        tables={
            "greedy": (["n"] + _io.coord_header(t) + ["value"], greedy_rows),
            "greedy_checkpoints": (["N", "value", "W_K", "rel_gap", "bl"], rows),
        },
        summary={"W_K": W},
    )


def run_random_points(cfg):
    A, k = cfg.build()
    em = _equilibrium(cfg, A, k)
    if not em.assumption_report.all_pass:
        return _refusal(cfg, em)
    thr = cfg.thresholds()
    pk = _pol_kwargs(cfg)
    W = em.W_K
    rows = []
    for N in cfg.N_list:
        conf = sample(em, N, cfg.seed)
        P = polarization(conf, k, A, check=False, **pk).value
        rows.append([N, P, W, abs(P - W) / W])
    ok = rows[-1][3] < thr["gap_rel"]
    return ExperimentResult(
        cfg.experiment, "PASS" if ok else "FAIL", thr,
        tables={"random_points": (["N", "P", "W_K", "rel_gap"], rows)},
        reports={"assumptions": [item.to_dict() for item in em.assumption_report.items]},
        summary={"W_K": W},
    )


def run_equilibrium(cfg):
    A, k = cfg.build()
    em = _equilibrium(cfg, A, k)
    base = em.base
    rows = [list(p) + [w] for p, w in zip(base.nodes.tolist(), base.weights.tolist())]
    return ExperimentResult(
        cfg.experiment, "DONE", cfg.thresholds(),
        tables={"measure": (_io.coord_header(base.ambient_dim) + ["weight"], rows)},
        reports={"assumptions": [item.to_dict() for item in em.assumption_report.items]},
        summary={"W_K": em.W_K, "kind": em.kind, "nodes": base.n_nodes},
    )


_RUNNERS = {
    "theorem-abc": run_theorem_abc,
    "counterexample-ball": run_counterexample_ball,
    "polarization-limit": run_polarization_limit,
    "energy-asymptote": run_energy_asymptote,
    "greedy": run_greedy,
    "random-points": run_random_points,
    "equilibrium": run_equilibrium,
}


def run(cfg):
    return _RUNNERS[cfg.experiment](cfg)


def emit(result, path, cfg=None, wall_time=None):
    """Write every table as CSV, reports as JSON and a run manifest into ``path``."""
    out = Path(path)
    if not out.is_dir():
        raise _io.OutputError(f"output directory {out} does not exist")
    written = []
    for name, (header, rows) in result.tables.items():
        written.append(_io.write_csv(out / f"{name}.csv", header, rows))
    for name, obj in result.reports.items():
        written.append(_io.write_json(out / f"{name}.json", obj))
    manifest = {
        "config": cfg.to_dict() if cfg is not None else None,
        "git_describe": "unknown",
        "seed": cfg.seed if cfg is not None else None,
        "wall_time_s": wall_time,
        "experiment": result.kind,
        "verdict": result.verdict,
        "thresholds": result.thresholds,
        "summary": result.summary,
        "files": sorted(p.name for p in written),
    }
    written.append(_io.write_json(out / "manifest.json", manifest))
    return written
