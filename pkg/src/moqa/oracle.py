"""Brute-force ground truth for small problems.

Landscapes are arrays of length ``2**n`` indexed by the little-endian integer
value of the bitstring ``b``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._validation import check_positive_int
from .exceptions import PreconditionError, ResourceBudgetError, ValidationError
from .hamiltonian import LANDSCAPE_MAX_N, SparsePauliHamiltonian
from .qubo import MultiObjectiveProblem, iter_spin_blocks

TIE_TOL = 1e-9
GAP_TOL = 1e-12
SANDWICH_TOL = 1e-9


def _check_cap(n, max_n):
    if n > max_n:
        raise ResourceBudgetError(f"n={n} exceeds the brute-force cap of {max_n}")


def objective_landscapes(problem, max_n=LANDSCAPE_MAX_N):
    """Array of shape ``(M, 2**n)`` with every objective at every bitstring."""
    n = problem.n
    _check_cap(n, max_n)
    out = np.empty((problem.M, 1 << n))
    for start, stop, S in iter_spin_blocks(n):
        for m, obj in enumerate(problem.objectives):
            out[m, start:stop] = np.einsum("ki,ij,kj->k", S, obj.A, S) + S @ obj.a + obj.alpha
    return out


def landscape_max(problem, max_n=LANDSCAPE_MAX_N):
    """``h_max(b) = max_m h_m(b)`` at every bitstring."""
    return objective_landscapes(problem, max_n).max(axis=0)


def power_sum_landscape(problem, level, max_n=LANDSCAPE_MAX_N):
    """``sum_m h_m(b)**level`` evaluated directly from the objectives."""
    return np.sum(objective_landscapes(problem, max_n) ** level, axis=0)


def landscape_p(hamiltonian, root=False, max_n=LANDSCAPE_MAX_N):
    """Energies of an expanded Hamiltonian at every bitstring.

    With ``root=True`` the ``p``-th root is returned instead, which lives on
    the same scale as ``h_max`` (negative values are clipped to zero first).
    """
    if not isinstance(hamiltonian, SparsePauliHamiltonian):
        raise ValidationError("expected a SparsePauliHamiltonian")
    values = hamiltonian.landscape(max_n)
    if root:
        return np.clip(values, 0.0, None) ** (1.0 / hamiltonian.p)
    return values


@dataclass(frozen=True)
class SpectrumReport:
    """Ground energy, first excited energy and gap ratio of a landscape.

    ``excited`` is ``None`` and ``degenerate`` is true when every value lies
    within the tie tolerance of the ground energy. ``ratio`` is ``None``
    whenever it is undefined (degenerate, or ground energy not positive).
    """

    ground: float
    excited: float | None
    ratio: float | None
    argmin: tuple
    degenerate: bool

    @property
    def argmin_index(self):
        """Smallest bitstring index attaining the ground energy."""
        return self.argmin[0]


def spectrum(landscape, tie_tol=TIE_TOL, gap_tol=GAP_TOL):
    values = np.asarray(landscape, dtype=np.float64).reshape(-1)
    if values.size == 0:
        raise ValidationError("empty landscape")
    ground = float(values.min())
    near = values <= ground + tie_tol
    argmin = tuple(int(i) for i in np.flatnonzero(near))
    above = values[~near]
    if above.size == 0:
        return SpectrumReport(ground, None, None, argmin, True)
    excited = float(above.min())
    ratio = (excited - ground) / ground if ground > gap_tol else None
    return SpectrumReport(ground, excited, ratio, argmin, False)


def threshold_p(r, M):
    """Smallest approximation level covered by the guarantee: ``log M / log(1 + r)``."""
    M = check_positive_int(M, "M")
    if r is None or not r > 0:
        raise ValidationError(f"threshold undefined for gap ratio r={r!r}")
    if M == 1:
        return 0.0
    return math.log(M) / math.log1p(r)


def check_sandwich(problem, hamiltonian, max_n=LANDSCAPE_MAX_N, tol=SANDWICH_TOL,
                   relative=False):
    """Largest violation of ``M^(-1/p) h_(p)^(1/p) <= h_max <= h_(p)^(1/p)``.

    Violations are measured in the units of ``h_max``, or as a fraction of
    ``max_b h_max(b)`` when ``relative`` is true. The relative form is the
    meaningful one at high ``p``: coefficients stored in float64 carry an
    absolute error near ``eps * sum|C|``, which near a small minimum of
    ``h_(p)`` is a large relative error before the root is taken. The
    tolerance only decides when a slightly negative objective value counts as
    a missing shift.

    Raises
    ------
    PreconditionError
        If any objective is negative somewhere (the shift was not applied).
    """
    values = objective_landscapes(problem, max_n)
    scale = max(1.0, float(np.abs(values).max()))
    if values.min() < -tol * scale:
        raise PreconditionError(
            f"objective landscape is negative (min {values.min():.3g}); apply the shift first"
        )
    hmax = values.max(axis=0)
    p = hamiltonian.p
    upper = np.clip(landscape_p(hamiltonian, max_n=max_n), 0.0, None) ** (1.0 / p)
    lower = problem.M ** (-1.0 / p) * upper
    worst = float(max(np.max(lower - hmax), np.max(hmax - upper), 0.0))
    if relative:
        worst /= max(float(hmax.max()), np.finfo(float).tiny)
    return worst


@dataclass(frozen=True)
class GuaranteeResult:
    """Outcome of checking the alignment guarantee on one instance."""

    applicable: bool
    premise: bool
    holds: bool
    ratio: float | None
    threshold: float | None


def argmin_value_match(hmax, hp, tie_tol=TIE_TOL):
    """Whether ``h_max`` at the (first) minimiser of ``hp`` equals ``min h_max``."""
    b_p = int(np.argmin(hp))
    return abs(float(hmax[b_p]) - float(hmax.min())) <= tie_tol


def guarantee_holds(problem, level, hamiltonian=None, max_n=LANDSCAPE_MAX_N, tie_tol=TIE_TOL):
    """Check that ``level`` above the threshold makes the minima align.

    ``problem`` must already be shifted. When ``hamiltonian`` is omitted the
    power-sum landscape is evaluated directly.
    """
    if not isinstance(problem, MultiObjectiveProblem):
        raise ValidationError("expected a MultiObjectiveProblem")
    level = check_positive_int(level, "level")
    hmax = landscape_max(problem, max_n)
    report = spectrum(hmax, tie_tol)
    if report.ratio is None:
        return GuaranteeResult(False, False, False, None, None)
    thr = threshold_p(report.ratio, problem.M)
    if hamiltonian is None:
        hp = power_sum_landscape(problem, level, max_n)
    else:
        hp = landscape_p(hamiltonian, max_n=max_n)
    holds = argmin_value_match(hmax, hp, tie_tol)
    return GuaranteeResult(True, level >= thr, holds, report.ratio, thr)
