"""QUBO and Ising objective types, conversions and the positivity shift.

Conventions
-----------
Bitstrings are indexed little-endian: bit ``k`` of the integer index ``b`` is
variable ``b_k``. Spins and bits are related by ``s = 1 - 2 b``, so ``b_k = 0``
maps to ``s_k = +1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from types import MappingProxyType

import numpy as np

from ._validation import as_vector, check_bits, check_spins, check_symmetric
from .eigen import DEFAULT_TOL, smallest_eigenvalue
from .exceptions import ResourceBudgetError, ValidationError

SHIFT_TOL = 1e-9
EXACT_SHIFT_MAX_N = 24
_BLOCK = 1 << 16


def bits_to_spins(b):
    """Map bits in {0, 1} to spins in {+1, -1}."""
    b = np.asarray(b)
    if not np.all((b == 0) | (b == 1)):
        raise ValidationError("bits must be 0 or 1")
    return 1 - 2 * b.astype(np.int8)


def spins_to_bits(s):
    """Map spins in {+1, -1} to bits in {0, 1}."""
    s = np.asarray(s)
    if not np.all((s == 1) | (s == -1)):
        raise ValidationError("spins must be +1 or -1")
    return ((1 - s.astype(np.int8)) // 2).astype(np.int8)


def index_to_bits(index, n):
    """Little-endian bit vector(s) of integer index(es)."""
    idx = np.asarray(index, dtype=np.int64)
    return ((idx[..., None] >> np.arange(n, dtype=np.int64)) & 1).astype(np.int8)


def bits_to_index(b):
    b = np.asarray(b, dtype=np.int64)
    return (b << np.arange(b.shape[-1], dtype=np.int64)).sum(axis=-1)


def spin_block(start, stop, n):
    """Spin vectors for bitstring indices ``start .. stop-1`` as a float array."""
    return bits_to_spins(index_to_bits(np.arange(start, stop), n)).astype(np.float64)


def iter_spin_blocks(n, block=_BLOCK):
    total = 1 << n
    for start in range(0, total, block):
        stop = min(total, start + block)
        yield start, stop, spin_block(start, stop, n)


def _readonly(arr):
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class QuboMatrix:
    """Symmetric QUBO cost matrix: ``h(b) = b^T M b``."""

    M: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "M", _readonly(check_symmetric(self.M, "QUBO matrix")))

    @property
    def n(self):
        return self.M.shape[0]

    def evaluate(self, b):
        b = check_bits(b, self.n).astype(np.float64)
        if b.ndim == 1:
            return float(b @ self.M @ b)
        return np.einsum("ki,ij,kj->k", b, self.M, b)


@dataclass(frozen=True, eq=False)
class IsingObjective:
    """One objective in spin form, ``s^T A s + a^T s + alpha``.

    ``A`` is stored symmetric with a zero diagonal. Any diagonal passed in is
    folded into ``alpha`` at construction (``s_i**2 == 1``), so the value of the
    objective never changes.
    """

    A: np.ndarray
    a: np.ndarray
    alpha: float = 0.0

    def __post_init__(self):
        A = check_symmetric(self.A, "coupling matrix A")
        n = A.shape[0]
        a = as_vector(self.a, n, "field vector a")
        alpha = float(self.alpha)
        if not np.isfinite(alpha):
            raise ValidationError("alpha must be finite")
        diag = np.diag(A).copy()
        if np.any(diag != 0.0):
            alpha += float(diag.sum())
            A = A.copy()
            np.fill_diagonal(A, 0.0)
        object.__setattr__(self, "A", _readonly(A))
        object.__setattr__(self, "a", _readonly(a))
        object.__setattr__(self, "alpha", alpha)

    @property
    def n(self):
        return self.A.shape[0]

    def evaluate(self, s):
        """Objective value at a sign vector, or one value per row of a batch."""
        return evaluate_objective(self, s)

    def with_alpha(self, alpha):
        return IsingObjective(self.A, self.a, alpha)

    def scaled(self, factor):
        return IsingObjective(factor * self.A, factor * self.a, factor * self.alpha)

    def __neg__(self):
        return self.scaled(-1.0)

    def __add__(self, other):
        if not isinstance(other, IsingObjective):
            return NotImplemented
        if other.n != self.n:
            raise ValidationError("objectives have different sizes")
        return IsingObjective(self.A + other.A, self.a + other.a, self.alpha + other.alpha)

    def __sub__(self, other):
        if not isinstance(other, IsingObjective):
            return NotImplemented
        return self + (-other)

    def allclose(self, other, rtol=0.0, atol=0.0):
        return (
            self.n == other.n
            and np.allclose(self.A, other.A, rtol=rtol, atol=atol)
            and np.allclose(self.a, other.a, rtol=rtol, atol=atol)
            and np.isclose(self.alpha, other.alpha, rtol=rtol, atol=atol)
        )


@dataclass(frozen=True, eq=False)
class MultiObjectiveProblem:
    """``M`` Ising objectives over the same ``n`` variables.

    ``shift_c`` records the total constant already added to every objective's
    ``alpha`` by :func:`apply_shift`.
    """

    objectives: tuple
    shift_c: float = 0.0
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        objectives = tuple(self.objectives)
        if not objectives:
            raise ValidationError("a problem needs at least one objective")
        for obj in objectives:
            if not isinstance(obj, IsingObjective):
                raise ValidationError(f"expected IsingObjective, got {type(obj).__name__}")
        n = objectives[0].n
        if any(obj.n != n for obj in objectives):
            raise ValidationError("all objectives must share the same number of variables")
        object.__setattr__(self, "objectives", objectives)
        object.__setattr__(self, "shift_c", float(self.shift_c))
        object.__setattr__(self, "metadata", MappingProxyType(dict(self.metadata)))

    @property
    def n(self):
        return self.objectives[0].n

    @property
    def M(self):
        return len(self.objectives)

    def __len__(self):
        return len(self.objectives)

    def __iter__(self):
        return iter(self.objectives)

    def __getitem__(self, m):
        return self.objectives[m]

    def evaluate(self, s):
        """Array of shape ``(M,)`` (or ``(M, batch)``) with every objective's value."""
        return np.stack([obj.evaluate(s) for obj in self.objectives])

    def with_metadata(self, **extra):
        return MultiObjectiveProblem(self.objectives, self.shift_c, {**self.metadata, **extra})


def qubo_to_ising(q):
    """Convert ``b^T M b`` into spin form with ``b = (1 - s) / 2``.

    ``A = M/4``, ``a = -M 1 / 2``, ``alpha = 1^T M 1 / 4``; the diagonal of ``A``
    then folds into ``alpha``.
    """
    if not isinstance(q, QuboMatrix):
        q = QuboMatrix(q)
    M = q.M
    return IsingObjective(M / 4.0, -M.sum(axis=0) / 2.0, M.sum() / 4.0)


def evaluate_objective(obj, s):
    s = check_spins(s, obj.n)
    if s.ndim == 1:
        return float(s @ obj.A @ s + obj.a @ s + obj.alpha)
    return np.einsum("ki,ij,kj->k", s, obj.A, s) + s @ obj.a + obj.alpha


def objective_landscape(obj, max_n=EXACT_SHIFT_MAX_N):
    """Values of ``obj`` at all ``2**n`` bitstrings, in little-endian index order."""
    n = obj.n
    if n > max_n:
        raise ResourceBudgetError(f"n={n} exceeds the brute-force cap of {max_n}")
    out = np.empty(1 << n)
    for start, stop, S in iter_spin_blocks(n):
        out[start:stop] = np.einsum("ki,ij,kj->k", S, obj.A, S) + S @ obj.a + obj.alpha
    return out


def augmented_matrix(obj):
    """Bordered matrix ``[[A, a/2], [a^T/2, 0]]`` of size ``n + 1``.

    For every sign vector ``(s, 1)^T Ã (s, 1) + alpha`` equals the objective.
    """
    n = obj.n
    out = np.zeros((n + 1, n + 1))
    out[:n, :n] = obj.A
    out[:n, n] = obj.a / 2.0
    out[n, :n] = obj.a / 2.0
    return out


def compute_shift(problem, mode="spectral", tol=DEFAULT_TOL, max_n=EXACT_SHIFT_MAX_N):
    """Constant ``c`` such that every ``h_m + c`` is non-negative.

    Parameters
    ----------
    problem : MultiObjectiveProblem
    mode : {"spectral", "exact"}
        ``"spectral"`` uses ``max_m(-(n+1) lambda_min(Ã_m) - alpha_m)``, valid
        for any ``n``. ``"exact"`` enumerates all bitstrings and returns
        ``-min_{m,b} h_m(b)``, the smallest valid shift. Neither is clamped at
        zero.
    """
    n = problem.n
    if mode == "spectral":
        return max(
            -(n + 1) * smallest_eigenvalue(augmented_matrix(obj), tol=tol) - obj.alpha
            for obj in problem.objectives
        )
    if mode == "exact":
        return -min(float(objective_landscape(obj, max_n).min()) for obj in problem.objectives)
    raise ValidationError(f"unknown shift mode {mode!r}; expected 'spectral' or 'exact'")


def apply_shift(problem, c):
    """Add ``c`` to every objective's constant term."""
    c = float(c)
    if c == 0.0:
        return problem
    return MultiObjectiveProblem(
        tuple(obj.with_alpha(obj.alpha + c) for obj in problem.objectives),
        problem.shift_c + c,
        problem.metadata,
    )


def shifted(problem, mode="spectral"):
    """Shorthand for ``apply_shift(problem, compute_shift(problem, mode))``."""
    return apply_shift(problem, compute_shift(problem, mode))
