"""Batch studies of the power-sum approximation and their plot data.

Each study draws ``N_s`` seeded instances, shifts them to a non-negative
landscape, builds ``h_(p)`` for every requested ``p`` and compares its
brute-force minimiser with the one of ``h_max``:

* ``epsilon`` -- fraction of instances where ``h_max`` at the ``h_(p)``
  minimiser differs from ``min h_max`` (by more than the tie tolerance);
* ``delta`` -- mean of ``(h_max(b_p) - min h_max) / min h_max``;
* ``nu`` -- fraction of ``h_(p)`` minimisers violating some constraint
  (constrained study only).
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .exceptions import MOQAError, ValidationError
from .expansion import (
    expand_sparse,
    max_terms_bound,
    normalize_for_expansion,
    resource_report,
    symmetry_reduced_expand,
    expand_dense,
)
from .generators import (
    constrained_to_multiobjective,
    random_constrained,
    random_multiobjective,
    random_partition_problem,
)
from .hamiltonian import mask_to_bits
from .oracle import TIE_TOL, GAP_TOL, landscape_p, objective_landscapes, spectrum, threshold_p
from .qubo import index_to_bits

log = logging.getLogger(__name__)

STUDIES = ("generic", "partition", "constrained")
ROUTES = ("auto", "direct", "sparse", "dense", "symmetry")
DEFAULT_EXPANSION_BUDGET = 200_000
FULL_SCALE = {"N_s": 10_000, "n_list": [4, 8, 12, 16, 20], "p_max": 20}


class GuaranteeViolation(MOQAError):
    """An instance above the alignment threshold had misaligned minima."""


@dataclass
class ExperimentConfig:
    """Settings of one study run.

    ``route`` picks how ``h_(p)`` is built: ``"sparse"``/``"dense"``/
    ``"symmetry"`` always expand into Pauli terms, ``"direct"`` evaluates
    ``sum_m h_m**p`` on the landscape, and ``"auto"`` expands whenever the
    allocation count is within ``expansion_budget`` and goes direct otherwise
    (the two agree to rounding; which one was used is recorded per sample).
    """

    study: str = "generic"
    n_list: list = field(default_factory=lambda: [4, 8, 12])
    M: int = 2
    constraints_list: list = field(default_factory=lambda: [1, 4])
    p_list: list = field(default_factory=lambda: [1, 2, 3, 4, 5, 6])
    N_s: int = 500
    gamma_list: list = field(default_factory=lambda: [10.0, 40.0])
    seed: int = 0
    shift_mode: str = "spectral"
    output_dir: str | None = None
    route: str = "auto"
    expansion_budget: int = DEFAULT_EXPANSION_BUDGET
    n_jobs: int | None = None
    strict: bool = True
    full_scale: bool = False

    def __post_init__(self):
        if self.full_scale:
            self.N_s = FULL_SCALE["N_s"]
            self.n_list = list(FULL_SCALE["n_list"])
            self.p_list = list(range(1, FULL_SCALE["p_max"] + 1))
            log.warning("full-scale run: N_s=%d, n up to %d; expect hours of runtime",
                        self.N_s, max(self.n_list))
        self.validate()

    def validate(self):
        if self.study not in STUDIES:
            raise ValidationError(f"unknown study {self.study!r}; expected one of {STUDIES}")
        if self.route not in ROUTES:
            raise ValidationError(f"unknown route {self.route!r}; expected one of {ROUTES}")
        if self.shift_mode not in ("spectral", "exact"):
            raise ValidationError(f"unknown shift mode {self.shift_mode!r}")
        if int(self.N_s) < 1:
            raise ValidationError("N_s must be >= 1")
        if not self.p_list or any(int(p) < 1 for p in self.p_list):
            raise ValidationError("all p must be >= 1")
        if not self.n_list or any(not 1 <= int(n) <= 24 for n in self.n_list):
            raise ValidationError("n must lie in 1..24 for brute-force metrics")
        if int(self.M) < 1:
            raise ValidationError("M must be >= 1")
        if self.study == "constrained" and any(float(g) <= 0 for g in self.gamma_list):
            raise ValidationError("gamma must be positive")

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def digest(self):
        payload = json.dumps({k: v for k, v in self.to_dict().items() if k != "output_dir"},
                             sort_keys=True, default=str)
        return hashlib.sha256(payload.encode()).hexdigest()


@dataclass
class MetricsReport:
    """Aggregated metrics of one (study, n, M, p, gamma) cell."""

    study: str
    n: int
    M: int
    p: int
    gamma: float | None
    N_s: int
    epsilon: float
    epsilon_stderr: float
    delta: float
    delta_stderr: float
    nu: float | None
    nu_stderr: float | None
    premise_count: int
    guarantee_violations: int
    routes: dict
    records: list = field(repr=False, default_factory=list)

    def row(self):
        return {
            "study": self.study, "n": self.n, "M": self.M, "p": self.p, "gamma": self.gamma,
            "N_s": self.N_s, "epsilon": self.epsilon, "epsilon_stderr": self.epsilon_stderr,
            "delta": self.delta, "delta_stderr": self.delta_stderr,
            "nu": self.nu, "nu_stderr": self.nu_stderr,
            "premise_count": self.premise_count, "guarantee_violations": self.guarantee_violations,
        }


# -- per-sample evaluation --------------------------------------------------

def _hp_landscape(problem, values, p, route, budget, expander):
    """``h_(p)`` at every bitstring and the route that produced it."""
    if route == "auto":
        support = normalize_for_expansion(problem).support().size
        route = "expand" if math.comb(p + support - 1, p) <= budget else "direct"
    if route == "direct":
        return np.sum(values ** p, axis=0), "direct"
    return landscape_p(expander(problem, p)), "expand"


def _sample_records(problem, p_list, route, budget, expander, constraints=None,
                    tie_tol=TIE_TOL):
    values = objective_landscapes(problem)
    hmax = values.max(axis=0)
    gaps = spectrum(hmax, tie_tol)
    ground = gaps.ground
    bits = index_to_bits(np.arange(hmax.size), problem.n) if constraints is not None else None
    out = []
    for p in p_list:
        hp, used = _hp_landscape(problem, values, p, route, budget, expander)
        b_p = int(np.argmin(hp))
        mismatch = abs(float(hmax[b_p]) - ground) > tie_tol
        if not mismatch:
            rel = 0.0
        elif ground > GAP_TOL:
            rel = (float(hmax[b_p]) - ground) / ground
        else:
            rel = math.inf
        thr = threshold_p(gaps.ratio, problem.M) if gaps.ratio is not None else None
        violated = None
        if constraints is not None:
            violated = bool(not constraints.is_feasible(bits[b_p]))
        out.append({
            "p": p,
            "ratio": gaps.ratio,
            "threshold": thr,
            "above_threshold": thr is not None and p >= thr,
            "mismatch": mismatch,
            "rel_error": rel,
            "violated": violated,
            "route": used,
            "argmin_p": b_p,
            "argmin_max": gaps.argmin_index,
        })
    return out


def evaluate_instance(problem, p_list, constraints=None, route="direct",
                      budget=DEFAULT_EXPANSION_BUDGET):
    """Per-``p`` sample records for one shifted problem.

    Each record holds ``ratio``, ``threshold``, ``above_threshold``,
    ``mismatch`` (the epsilon contribution), ``rel_error`` (the delta
    contribution), ``violated`` (``None`` without constraints), ``route`` and
    both minimiser indices.
    """
    if route not in ROUTES:
        raise ValidationError(f"unknown route {route!r}; expected one of {ROUTES}")
    return _sample_records(problem, list(p_list), route, budget, _expander_for(route), constraints)


def _expander_for(route):
    if route == "dense":
        return expand_dense
    if route == "symmetry":
        return symmetry_reduced_expand
    return expand_sparse


def _aggregate(study, n, M, p, gamma, records, strict):
    N = len(records)
    eps = np.array([r["mismatch"] for r in records], dtype=float)
    rel = np.array([r["rel_error"] for r in records], dtype=float)
    viol = [r["violated"] for r in records]
    premise = [r for r in records if r["above_threshold"]]
    bad = [r for r in premise if r["mismatch"]]
    if bad and strict:
        raise GuaranteeViolation(
            f"{len(bad)} instance(s) above the threshold had misaligned minima "
            f"({study}, n={n}, M={M}, p={p}, first instance {bad[0]['instance']})"
        )
    routes = {}
    for r in records:
        routes[r["route"]] = routes.get(r["route"], 0) + 1
    se = lambda x: float(x.std(ddof=1) / math.sqrt(N)) if N > 1 else 0.0  # noqa: E731
    nu = nu_se = None
    if viol[0] is not None:
        v = np.array(viol, dtype=float)
        nu, nu_se = float(v.mean()), se(v)
    return MetricsReport(
        study, n, M, p, gamma, N, float(eps.mean()), se(eps), float(rel.mean()), se(rel),
        nu, nu_se, len(premise), len(bad), routes, records,
    )


def _run(cfg, cells, make_sample, expander=None):
    """Evaluate every cell; ``make_sample(cell, i)`` returns (problem, constraints, info)."""
    from joblib import Parallel, delayed

    expander = expander or _expander_for(cfg.route)

    def job(cell, i):
        problem, constraints, info = make_sample(cell, i)
        recs = _sample_records(problem, cfg.p_list, cfg.route, cfg.expansion_budget, expander,
                               constraints)
        for rec in recs:
            rec.update(info, instance=i)
        return recs

    reports = []
    for cell in cells:
        if cfg.n_jobs in (None, 1):
            per_sample = [job(cell, i) for i in range(cfg.N_s)]
        else:
            per_sample = Parallel(n_jobs=cfg.n_jobs)(delayed(job)(cell, i) for i in range(cfg.N_s))
        for k, p in enumerate(cfg.p_list):
            records = [recs[k] for recs in per_sample]
            reports.append(_aggregate(cfg.study, cell["n"], cell["M"], p, cell.get("gamma"),
                                      records, cfg.strict))
    if cfg.output_dir:
        write_study(cfg, reports)
    return reports


def run_generic_study(cfg):
    """Random multi-objective instances; one report per (n, p)."""
    if cfg.route == "symmetry":
        raise ValidationError("the symmetry route only applies to partition problems")
    cells = [{"n": int(n), "M": int(cfg.M)} for n in cfg.n_list]

    def make(cell, i):
        prob = random_multiobjective(cell["n"], cell["M"], cfg.seed, i, shift=cfg.shift_mode)
        return prob, None, {}

    return _run(cfg, cells, make)


def run_partition_study(cfg):
    """Random weighted-graph partitioning instances (``M = 2``)."""
    cells = [{"n": int(n), "M": 2} for n in cfg.n_list]

    def make(cell, i):
        prob = random_partition_problem(cell["n"], cfg.seed, i, shift=cfg.shift_mode)
        return prob, None, {}

    # ± pairs use the symmetry-reduced expansion unless dense is requested
    expander = expand_dense if cfg.route == "dense" else symmetry_reduced_expand
    return _run(cfg, cells, make, expander)


def run_constrained_study(cfg):
    """Random objectives with random linear inequality constraints.

    The same instances (objective and constraints) are reused for every
    ``gamma`` so penalty strengths can be compared pairwise.
    """
    if cfg.route == "symmetry":
        raise ValidationError("the symmetry route only applies to partition problems")
    cells = [
        {"n": int(n), "M": int(k) + 1, "constraints": int(k), "gamma": float(g)}
        for n in cfg.n_list for k in cfg.constraints_list for g in cfg.gamma_list
    ]

    def make(cell, i):
        cp, info = random_constrained(cell["n"], cell["constraints"], cell["gamma"], cfg.seed, i)
        prob = constrained_to_multiobjective(cp, shift=cfg.shift_mode)
        return prob, cp, {"resamples": info["resamples"]}

    return _run(cfg, cells, make)


def run_study(cfg):
    return {
        "generic": run_generic_study,
        "partition": run_partition_study,
        "constrained": run_constrained_study,
    }[cfg.study](cfg)


# -- post-processing ----------------------------------------------------------

def run_gap_binning(reports, p, bins=10):
    """Mean ``epsilon`` per gap-ratio bin for one approximation level.

    Bin edges are spread linearly over the observed ratios with the threshold
    ``r* = M**(1/p) - 1`` inserted as an edge, so every bin lies wholly below
    or wholly above it. Samples with undefined ratio are dropped and counted.

    Returns
    -------
    dict
        ``rows`` (list of dicts with ``lo, hi, count, epsilon, above``),
        ``r_star``, ``excluded`` and ``guarantee_ok`` (all bins above ``r*``
        have ``epsilon == 0``).
    """
    records = [r for rep in reports if rep.p == p for r in rep.records]
    if not records:
        raise ValidationError(f"no records for p={p}")
    M = {rep.M for rep in reports if rep.p == p}
    if len(M) != 1:
        raise ValidationError("gap binning needs reports with a single M")
    M = M.pop()
    r_star = M ** (1.0 / p) - 1.0
    usable = [r for r in records if r["ratio"] is not None]
    excluded = len(records) - len(usable)
    ratios = np.array([r["ratio"] for r in usable])
    mism = np.array([r["mismatch"] for r in usable], dtype=float)
    hi = max(float(ratios.max()) if ratios.size else 1.0, r_star) * (1 + 1e-12)
    edges = np.unique(np.concatenate([np.linspace(0.0, hi, bins + 1), [r_star]]))
    idx = np.clip(np.searchsorted(edges, ratios, side="right") - 1, 0, edges.size - 2)
    rows = []
    for k in range(edges.size - 1):
        sel = idx == k
        rows.append({
            "lo": float(edges[k]), "hi": float(edges[k + 1]), "count": int(sel.sum()),
            "epsilon": float(mism[sel].mean()) if sel.any() else None,
            "above": bool(edges[k] >= r_star),
        })
    ok = all(row["epsilon"] in (None, 0.0) for row in rows if row["above"])
    return {"p": p, "M": M, "r_star": r_star, "rows": rows, "excluded": excluded, "guarantee_ok": ok}


def _write_csv(path, rows, header):
    with open(path, "w", newline="") as fp:
        w = csv.DictWriter(fp, fieldnames=header)
        w.writeheader()
        for row in rows:
            w.writerow(row)


def write_study(cfg, reports, out=None):
    """Long-format CSV per metric, a per-sample CSV and a JSON manifest."""
    out = Path(out or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    metrics = ["epsilon", "delta"] + (["nu"] if cfg.study == "constrained" else [])
    files = []
    for metric in metrics:
        rows = [
            {"n": r.n, "M": r.M, "p": r.p, "gamma": r.gamma, "value": getattr(r, metric),
             "stderr": getattr(r, f"{metric}_stderr")}
            for r in reports
        ]
        path = out / f"{cfg.study}_{metric}.csv"
        _write_csv(path, rows, ["n", "M", "p", "gamma", "value", "stderr"])
        files.append(path.name)
    sample_rows = []
    for r in reports:
        for rec in r.records:
            sample_rows.append({"n": r.n, "M": r.M, "gamma": r.gamma, **rec})
    header = ["n", "M", "gamma", "instance", "p", "ratio", "threshold", "above_threshold",
              "mismatch", "rel_error", "violated", "route", "argmin_p", "argmin_max", "resamples"]
    for row in sample_rows:
        row.setdefault("resamples", None)
    path = out / f"{cfg.study}_samples.csv"
    _write_csv(path, sample_rows, header)
    files.append(path.name)
    manifest = {
        "config": cfg.to_dict(),
        "config_sha256": cfg.digest(),
        "version": __version__,
        "files": files,
        "summary": [r.row() for r in reports],
    }
    (out / f"{cfg.study}_manifest.json").write_text(json.dumps(manifest, indent=2, default=str))
    return out


def write_gap_binning(binning, path):
    _write_csv(path, [{**row, "r_star": binning["r_star"], "p": binning["p"]}
                      for row in binning["rows"]],
               ["p", "lo", "hi", "count", "epsilon", "above", "r_star"])


def dump_landscapes(n=6, M=4, p_list=(1, 2, 4, 8), seed=0, shift="spectral", path=None,
                    route="sparse"):
    """Per-bitstring curves: each ``h_m``, ``h_max`` and ``h_(p)**(1/p)``.

    Returns a dict with the column arrays and the argmin index of every curve;
    writes a CSV when ``path`` is given.
    """
    problem = random_multiobjective(n, M, seed, shift=shift)
    values = objective_landscapes(problem)
    hmax = values.max(axis=0)
    cols = {f"h_{m + 1}": values[m] for m in range(M)}
    cols["h_max"] = hmax
    argmins = {"h_max": int(np.argmin(hmax))}
    for p in p_list:
        if route == "direct":
            hp = np.sum(values ** p, axis=0)
        else:
            hp = landscape_p(_expander_for(route)(problem, p))
        root = np.clip(hp, 0.0, None) ** (1.0 / p)
        cols[f"hp_root_{p}"] = root
        argmins[f"hp_root_{p}"] = int(np.argmin(hp))
    if path is not None:
        names = list(cols)
        marker_names = [f"argmin_{k}" for k in argmins]
        with open(path, "w", newline="") as fp:
            w = csv.writer(fp)
            w.writerow(["index", "bits"] + names + marker_names)
            for b in range(1 << n):
                w.writerow(
                    [b, mask_to_bits(b, n)]
                    + [repr(float(cols[k][b])) for k in names]
                    + [int(argmins[k] == b) for k in argmins]
                )
    return {"problem": problem, "columns": cols, "argmin": argmins}


def dump_resources(n_list=range(1, 41), p=4, M=10, path=None):
    """Table of brute-force steps, expansion steps and term counts per ``n``."""
    rows = []
    for n in n_list:
        rep = resource_report(n, p, M)
        rows.append({
            "n": n,
            "brute_force_steps": rep["brute_force_steps"],
            "moqa_classical_steps": rep["classical_steps"],
            "moqa_gates": max_terms_bound(n, p),
            "dense_slots": rep["dense_slots"],
        })
    if path is not None:
        _write_csv(path, rows, list(rows[0]))
    return rows


def write_landscape_csv(landscape, n, path):
    """Landscape dump: ``index, bits, value`` per bitstring."""
    with open(path, "w", newline="") as fp:
        w = csv.writer(fp)
        w.writerow(["index", "bits", "value"])
        for b, val in enumerate(np.asarray(landscape).tolist()):
            w.writerow([b, mask_to_bits(b, n), repr(float(val))])
