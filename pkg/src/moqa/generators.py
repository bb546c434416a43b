"""Problem families: random objectives, graph partitioning and constrained problems.

Randomness comes from numpy's Philox (a counter-based 64-bit generator).
Instance ``i`` of a batch with seed ``s`` draws from the stream keyed by
``SeedSequence([s, i])``, so every instance can be regenerated on its own and
batches can be split across workers without changing any value. Normal
variates use numpy's ziggurat sampler.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._validation import as_vector, check_positive_int, check_symmetric
from .exceptions import ResourceBudgetError, ValidationError
from .qubo import IsingObjective, MultiObjectiveProblem, index_to_bits, objective_landscape, shifted

BRUTE_FORCE_MAX_N = 24


def instance_rng(seed, instance=0):
    """Generator for one instance of a seeded batch."""
    if seed is None:
        raise ValidationError("a seed is required for reproducible generation")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(instance)])))


def _maybe_shift(problem, shift):
    return problem if shift is None else shifted(problem, shift)


def _symmetric_from_upper(n, upper):
    A = np.zeros((n, n))
    I, J = np.triu_indices(n, k=1)
    A[I, J] = upper
    A[J, I] = upper
    return A


def random_objective(n, rng):
    """Ising objective with i.i.d. standard normal couplings and fields, ``alpha = 0``."""
    upper = rng.standard_normal(n * (n - 1) // 2)
    a = rng.standard_normal(n)
    return IsingObjective(_symmetric_from_upper(n, upper), a, 0.0)


def random_multiobjective(n, M, seed, instance=0, shift=None):
    """``M`` independent random objectives on ``n`` variables.

    Parameters
    ----------
    shift : {None, "spectral", "exact"}
        Apply the positivity shift before returning; unshifted by default.
    """
    n = check_positive_int(n, "n")
    M = check_positive_int(M, "M")
    rng = instance_rng(seed, instance)
    objectives = tuple(random_objective(n, rng) for _ in range(M))
    problem = MultiObjectiveProblem(
        objectives, metadata={"generator": "random_multiobjective", "seed": seed, "instance": instance}
    )
    return _maybe_shift(problem, shift)


# -- partitioning -----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PartitionGraph:
    """Weighted graph with edge weights ``W`` and vertex weights ``v``."""

    W: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        W = check_symmetric(self.W, "adjacency matrix W")
        if np.any(np.diag(W) != 0.0):
            raise ValidationError("adjacency matrix W must have a zero diagonal")
        v = as_vector(self.v, W.shape[0], "vertex weights v")
        W.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "v", v)

    @property
    def n(self):
        return self.W.shape[0]


def partition_problem(graph, shift=None):
    """The pair ``T_+``, ``T_-`` whose maximum is minimised by the best cut.

    A sign ``s_k = +1`` puts vertex ``k`` into ``S``. ``T_+`` is the weight
    inside ``S`` (edges counted once per ordered pair, plus vertices), ``T_-``
    the weight inside the complement. Both share ``A = W/4`` and
    ``alpha = (1^T W 1 + 2 * 1^T v) / 4`` and carry ``±a`` with ``a = (W 1 + v) / 2``.
    """
    if not isinstance(graph, PartitionGraph):
        raise ValidationError("expected a PartitionGraph")
    W, v = graph.W, graph.v
    A = W / 4.0
    a = (W.sum(axis=1) + v) / 2.0
    alpha = (W.sum() + 2.0 * v.sum()) / 4.0
    problem = MultiObjectiveProblem(
        (IsingObjective(A, a, alpha), IsingObjective(A, -a, alpha)),
        metadata={"generator": "partition_problem", "pm_pair": True},
    )
    return _maybe_shift(problem, shift)


def random_partition_graph(n, seed, instance=0):
    """Edge and vertex weights drawn as ``|N(0, 1)|``, zero diagonal."""
    n = check_positive_int(n, "n")
    rng = instance_rng(seed, instance)
    upper = np.abs(rng.standard_normal(n * (n - 1) // 2))
    v = np.abs(rng.standard_normal(n))
    return PartitionGraph(_symmetric_from_upper(n, upper), v)


def random_partition_problem(n, seed, instance=0, shift=None):
    problem = partition_problem(random_partition_graph(n, seed, instance))
    problem = problem.with_metadata(seed=seed, instance=instance)
    return _maybe_shift(problem, shift)


def spp_problem(v, shift=None):
    """Set partitioning as ``max(v^T s, -v^T s)``.

    Equal to ``2 * max(T_+, T_-) - sum(v)`` for the edgeless graph, so both
    formulations share their minimisers.
    """
    v = as_vector(v, name="v")
    if np.any(v <= 0.0):
        raise ValidationError("set partitioning weights must be positive")
    zero = np.zeros((v.size, v.size))
    problem = MultiObjectiveProblem(
        (IsingObjective(zero, v, 0.0), IsingObjective(zero, -v, 0.0)),
        metadata={"generator": "spp_problem", "pm_pair": True},
    )
    return _maybe_shift(problem, shift)


# -- inequality constraints -------------------------------------------------

@dataclass(frozen=True, eq=False)
class LinearConstraint:
    """Constraint ``g^T b + g0 >= 0`` on bits ``b``."""

    g: np.ndarray
    g0: float = 0.0

    def __post_init__(self):
        g = as_vector(self.g, name="constraint g")
        g.setflags(write=False)
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "g0", float(self.g0))
        if not np.isfinite(self.g0):
            raise ValidationError("constraint offset g0 must be finite")

    @property
    def n(self):
        return self.g.size

    def evaluate(self, b):
        return np.asarray(b, dtype=np.float64) @ self.g + self.g0

    def to_ising(self):
        """Spin form: with ``b = (1 - s)/2``, ``g(b) = -(g/2)^T s + (sum(g)/2 + g0)``."""
        n = self.n
        return IsingObjective(np.zeros((n, n)), -self.g / 2.0, self.g.sum() / 2.0 + self.g0)


@dataclass(frozen=True, eq=False)
class ConstrainedProblem:
    """Minimise ``base`` subject to every constraint, penalised with strength ``gamma``."""

    base: IsingObjective
    constraints: tuple = ()
    gamma: float = 10.0

    def __post_init__(self):
        constraints = tuple(self.constraints)
        if not float(self.gamma) > 0.0:
            raise ValidationError(f"gamma must be positive, got {self.gamma}")
        for con in constraints:
            if con.n != self.base.n:
                raise ValidationError("constraint size does not match the objective")
        object.__setattr__(self, "constraints", constraints)
        object.__setattr__(self, "gamma", float(self.gamma))

    @property
    def n(self):
        return self.base.n

    def constraint_values(self, b):
        """Array ``(num_constraints, ...)`` of ``g_m(b)``."""
        if not self.constraints:
            return np.zeros((0,) + np.shape(b)[:-1])
        return np.stack([con.evaluate(b) for con in self.constraints])

    def is_feasible(self, b):
        return np.all(self.constraint_values(b) >= 0.0, axis=0)

    def with_gamma(self, gamma):
        return ConstrainedProblem(self.base, self.constraints, gamma)


def constrained_to_multiobjective(problem, shift=None):
    """Objectives ``h, h - gamma g_1, ..., h - gamma g_M`` whose maximum penalises violations."""
    h = problem.base
    objectives = [h] + [h - con.to_ising().scaled(problem.gamma) for con in problem.constraints]
    out = MultiObjectiveProblem(
        tuple(objectives),
        metadata={
            "generator": "constrained_to_multiobjective",
            "gamma": problem.gamma,
            "num_constraints": len(problem.constraints),
        },
    )
    return _maybe_shift(out, shift)


def _all_bits(n):
    if n > BRUTE_FORCE_MAX_N:
        raise ResourceBudgetError(f"n={n} exceeds the brute-force cap of {BRUTE_FORCE_MAX_N}")
    return index_to_bits(np.arange(1 << n), n)


def feasible_mask(problem):
    """Boolean feasibility of every bitstring, little-endian index order."""
    return problem.is_feasible(_all_bits(problem.n))


def random_constrained(n, num_constraints, gamma, seed, instance=0, max_resamples=1000):
    """Random objective with random linear constraints that admit a feasible point.

    Constraint entries and offsets are standard normal. Constraint sets with no
    feasible bitstring are redrawn; the number of redraws is reported in the
    returned info dict under ``"resamples"``.

    Returns
    -------
    (ConstrainedProblem, dict)
    """
    n = check_positive_int(n, "n")
    rng = instance_rng(seed, instance)
    base = random_objective(n, rng)
    bits = _all_bits(n)
    for attempt in range(max_resamples + 1):
        constraints = tuple(
            LinearConstraint(rng.standard_normal(n), rng.standard_normal())
            for _ in range(num_constraints)
        )
        problem = ConstrainedProblem(base, constraints, gamma)
        if problem.is_feasible(bits).any():
            return problem, {"seed": seed, "instance": instance, "resamples": attempt}
    raise ResourceBudgetError(
        f"no feasible constraint set after {max_resamples} resamples (instance {instance})"
    )


def sufficient_gamma(problem):
    """Penalty above which the penalised minimiser is feasible and optimal.

    ``(max_b h - min_b h) / v_min`` where ``v_min`` is the smallest positive
    worst-constraint violation. Returns 0 when nothing is infeasible.
    """
    bits = _all_bits(problem.n)
    h = objective_landscape(problem.base)
    values = problem.constraint_values(bits)
    if values.size == 0:
        return 0.0
    violation = np.max(np.clip(-values, 0.0, None), axis=0)
    positive = violation[violation > 0.0]
    if positive.size == 0:
        return 0.0
    return float((h.max() - h.min()) / positive.min())
