"""End-to-end acceptance checks, one test per criterion.

Each test records a PASS/FAIL line that pytest prints in a summary section
at the end of the run (and inline with ``-s``).
"""

from __future__ import annotations

import math
import time

import numpy as np
import pytest

from conftest import all_spins
from moqa import (
    AnnealSchedule,
    PartitionGraph,
    allocations,
    anneal,
    check_sandwich,
    constrained_to_multiobjective,
    expand_dense,
    expand_sparse,
    landscape_max,
    landscape_p,
    partition_problem,
    random_constrained,
    random_multiobjective,
    spp_problem,
)
from moqa.generators import feasible_mask, random_partition_graph, sufficient_gamma
from moqa.harness import ExperimentConfig, dump_resources, run_study
from moqa.oracle import objective_landscapes
from moqa.qubo import objective_landscape

pytestmark = pytest.mark.slow


def _draw(rng, lo, hi):
    return int(rng.integers(lo, hi + 1))


def _rel_inf(got, want):
    """Error relative to the largest magnitude of the reference landscape."""
    return float(np.max(np.abs(got - want)) / max(np.max(np.abs(want)), 1e-300))


def test_criterion_01_oracle_identity(record_criterion):
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    worst = 0.0
    for i in range(200):
        n, M, p = _draw(rng, 1, 10), _draw(rng, 1, 4), _draw(rng, 1, 4)
        prob = random_multiobjective(n, M, seed=1, instance=i, shift="spectral")
        want = np.sum(objective_landscapes(prob) ** p, axis=0)
        for h in (expand_dense(prob, p), expand_sparse(prob, p)):
            worst = max(worst, _rel_inf(landscape_p(h), want))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-9 and elapsed < 120
    record_criterion(1, "oracle identity on 200 instances", ok,
                     f"max rel err {worst:.2e}, {elapsed:.1f}s")
    assert ok


def test_criterion_02_dense_sparse_equivalence(record_criterion):
    rng = np.random.default_rng(202)
    worst, same_masks = 0.0, True
    cases = [(12, 4)] + [(_draw(rng, 4, 12), _draw(rng, 1, 4)) for _ in range(99)]
    for i, (n, p) in enumerate(cases):
        prob = random_multiobjective(n, _draw(rng, 1, 3), seed=2, instance=i, shift="spectral")
        d, s = expand_dense(prob, p), expand_sparse(prob, p)
        same_masks &= np.array_equal(d.masks, s.masks)
        if same_masks:
            worst = max(worst, float(np.max(np.abs(d.coefficients - s.coefficients)
                                            / np.abs(d.coefficients))))
    ok = same_masks and worst <= 1e-12
    record_criterion(2, "dense and sparse expansions agree on 100 instances", ok,
                     f"masks identical={same_masks}, max rel diff {worst:.1e}")
    assert ok


def test_criterion_03_hamming_bound(record_criterion):
    rng = np.random.default_rng(303)
    over_weight = over_count = 0
    cases = [(_draw(rng, 1, 12), _draw(rng, 1, 4)) for _ in range(150)]
    cases += [(16, 2), (20, 1), (20, 2), (14, 3)]
    for i, (n, p) in enumerate(cases):
        prob = random_multiobjective(n, _draw(rng, 1, 4), seed=3, instance=i, shift="spectral")
        h = expand_sparse(prob, p)
        bound = sum(math.comb(n, k) for k in range(0, 2 * p + 1))
        over_weight += int(np.sum(h.weights > 2 * p))
        over_count += int(len(h) > bound)
    ok = over_weight == 0 and over_count == 0
    record_criterion(3, "term weight <= 2p and term count bound", ok,
                     f"{len(cases)} expansions, {over_weight} heavy masks, "
                     f"{over_count} count overruns")
    assert ok


def test_criterion_04_allocation_count(record_criterion):
    bad = []
    for n in range(1, 7):
        for p in range(1, 5):
            count = sum(1 for _ in allocations(n, p))
            if count != math.comb(p + (n * n + n) // 2, p):
                bad.append((n, p, count))
    ok = not bad
    record_criterion(4, "allocation count equals binomial formula", ok,
                     f"24 (n, p) pairs, mismatches {bad}")
    assert ok


def test_criterion_05_sandwich(record_criterion):
    rng = np.random.default_rng(2024)
    worst_rel = worst_abs = 0.0
    for i in range(500):
        n, M, p = _draw(rng, 1, 8), _draw(rng, 1, 8), _draw(rng, 1, 5)
        prob = random_multiobjective(n, M, seed=5, instance=i, shift="spectral")
        h = expand_dense(prob, p)
        worst_abs = max(worst_abs, check_sandwich(prob, h))
        worst_rel = max(worst_rel, check_sandwich(prob, h, relative=True))
    ok = worst_rel <= 1e-9
    record_criterion(5, "sandwich inequality on 500 instances", ok,
                     f"max violation {worst_rel:.1e} of landscape scale "
                     f"({worst_abs:.1e} absolute)")
    assert ok


@pytest.mark.parametrize("shift", ["spectral", "exact"])
def test_criterion_06_threshold_guarantee(record_criterion, shift):
    cfg = ExperimentConfig(study="generic", n_list=[8], M=2, p_list=list(range(1, 11)),
                           N_s=1000, seed=6, shift_mode=shift, strict=False, n_jobs=-1)
    reports = run_study(cfg)
    premise = sum(r.premise_count for r in reports)
    violations = sum(r.guarantee_violations for r in reports)
    covered = len({rec["instance"] for r in reports for rec in r.records
                   if rec["above_threshold"]})
    ok = violations == 0 and premise > 0
    record_criterion(6, f"threshold guarantee, {shift} shift", ok,
                     f"1000 instances, {covered} reach the threshold by p=10, "
                     f"{premise} (instance, p) pairs above it, {violations} violations")
    assert ok


def test_criterion_07_error_trend(record_criterion):
    problems, last_delta = [], {}
    for M in (2, 8):
        cfg = ExperimentConfig(study="generic", n_list=[4, 8], M=M, p_list=list(range(1, 7)),
                               N_s=500, seed=7, n_jobs=-1)
        reports = run_study(cfg)
        for n in (4, 8):
            cell = sorted((r for r in reports if r.n == n), key=lambda r: r.p)
            for metric in ("epsilon", "delta"):
                vals = [getattr(r, metric) for r in cell]
                ses = [getattr(r, f"{metric}_stderr") for r in cell]
                for k in range(len(cell) - 1):
                    if vals[k + 1] > vals[k] + 2 * max(ses[k], ses[k + 1]):
                        problems.append((M, n, metric, k + 1))
            last_delta[(M, n)] = cell[-1].delta
    small_delta = all(last_delta[(2, n)] < 0.02 for n in (4, 8))
    ok = not problems and small_delta
    detail = ", ".join(f"delta(p=6; M={M}, n={n})={d:.4f}" for (M, n), d in last_delta.items())
    record_criterion(7, "errors shrink with p", ok, f"increases {problems}; {detail}")
    assert ok


def test_criterion_08_constraint_penalty(record_criterion):
    rng = np.random.default_rng(808)
    unsound = []
    for i in range(200):
        n, k = _draw(rng, 2, 10), _draw(rng, 1, 4)
        cp, _ = random_constrained(n, k, 1.0, seed=8, instance=i)
        cp = cp.with_gamma(1.01 * sufficient_gamma(cp) + 1e-9)
        hmax = landscape_max(constrained_to_multiobjective(cp))
        h = objective_landscape(cp.base)
        feas = feasible_mask(cp)
        b = int(np.argmin(hmax))
        if not feas[b] or h[b] > h[feas].min() + 1e-9:
            unsound.append(i)

    cfg = ExperimentConfig(study="constrained", n_list=[4, 8], constraints_list=[1, 2, 4],
                           gamma_list=[10.0, 40.0], p_list=list(range(1, 7)), N_s=200,
                           seed=8, n_jobs=-1)
    reports = run_study(cfg)
    nu = {(r.n, r.M, r.p, r.gamma): r.nu for r in reports}
    worse = [key[:3] for key in nu if key[3] == 40.0 and nu[key] > nu[key[:3] + (10.0,)]]
    ok = not unsound and not worse
    mean10 = np.mean([v for key, v in nu.items() if key[3] == 10.0])
    mean40 = np.mean([v for key, v in nu.items() if key[3] == 40.0])
    record_criterion(8, "penalised maximum is sound; larger gamma violates less", ok,
                     f"{len(unsound)}/200 unsound, {len(worse)} cells with "
                     f"nu(40) > nu(10); mean nu {mean10:.3f} -> {mean40:.3f}")
    assert ok


def test_criterion_09_partition_mapping(record_criterion):
    rng = np.random.default_rng(909)
    worst, spp_mismatch = 0.0, 0
    for i in range(100):
        n = _draw(rng, 1, 8)
        g = random_partition_graph(n, seed=9, instance=i)
        t_plus, t_minus = partition_problem(g).objectives
        S = all_spins(n)
        for s in S:
            inside = s > 0
            t_in = g.W[np.ix_(inside, inside)].sum() + g.v[inside].sum()
            t_out = g.W[np.ix_(~inside, ~inside)].sum() + g.v[~inside].sum()
            worst = max(worst, abs(t_plus.evaluate(s) - t_in), abs(t_minus.evaluate(s) - t_out))
        squared = (S @ g.v) ** 2
        for hmax in (landscape_max(spp_problem(g.v)),
                     landscape_max(partition_problem(PartitionGraph(np.zeros((n, n)), g.v)))):
            best = set(np.flatnonzero(hmax <= hmax.min() + 1e-9))
            if best != set(np.flatnonzero(squared <= squared.min() + 1e-9)):
                spp_mismatch += 1
    ok = worst <= 1e-10 and spp_mismatch == 0
    record_criterion(9, "partition objectives equal set sums; SPP argmin", ok,
                     f"max abs diff {worst:.1e}, {spp_mismatch} SPP argmin mismatches")
    assert ok


def test_criterion_10_resource_table(record_criterion):
    M, p = 10, 4
    rows = dump_resources(range(1, 41), p=p, M=M)
    worst, gates_ok = 0.0, True
    for row in rows:
        n = row["n"]
        brute = M * n * n * 2**n
        classical = (M + 3) * n * n * math.comb(p + (n * n + n) // 2, p)
        gates = sum(math.comb(n, k) for k in range(1, 2 * p + 1))
        worst = max(worst, abs(row["brute_force_steps"] - brute) / brute,
                    abs(row["moqa_classical_steps"] - classical) / classical)
        gates_ok &= row["moqa_gates"] == gates
    spot = rows[39]
    ok = worst <= 1e-12 and gates_ok
    record_criterion(10, "resource table matches exact integer formulas", ok,
                     f"max rel diff {worst:.1e}; n=40: brute {spot['brute_force_steps']:.3e}, "
                     f"classical {spot['moqa_classical_steps']:.3e}, gates {spot['moqa_gates']}")
    assert ok


def test_criterion_11_annealer(record_criterion):
    hits = 0
    for i in range(50):
        prob = random_multiobjective(8, 2, seed=11, instance=i, shift="spectral")
        h = expand_dense(prob, 2)
        best = float(landscape_p(h).min())
        res = anneal(h, AnnealSchedule(seed=i))
        hits += abs(res.energy - best) <= 1e-9 * max(1.0, abs(best))
    ok = hits >= 45
    record_criterion(11, "annealer finds the ground energy", ok, f"{hits}/50 runs")
    assert ok
