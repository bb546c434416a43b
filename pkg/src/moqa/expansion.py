"""Expansion of ``sum_m H_m**p`` into Pauli-Z strings.

Every objective is first written as a sum of ``d = n(n+1)/2 + 1`` elementary
terms, in this fixed order::

    position 0                constant            alpha
    positions 1 .. n          Z_i                 a_i
    positions n+1 .. d-1      Z_i Z_j, i < j      2 * A[i, j]

with the pairs ``(i, j)`` in lexicographic order, so ``(0,1), (0,2), ...,
(0,n-1), (1,2), ...``. Raising the sum to the ``p``-th power by the
multinomial theorem gives one summand per *power allocation*: a vector ``v``
of ``d`` non-negative integers with ``sum(v) == p``. Its Pauli string is the
product of the elementary strings, i.e. the XOR of their masks, and its
weight is ``p! / prod(v_i!)`` times the product of the coefficients raised to
their powers.

An allocation has at most ``p`` non-zero entries, so internally it is handled
as the sorted ``p``-multiset of positions it selects. Enumerating multisets in
lexicographic order visits allocations in the order ``(p,0,...,0),
(p-1,1,0,...), ..., (0,...,0,p)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from types import MappingProxyType

import numpy as np

from ._validation import check_positive_int, check_spins
from .exceptions import NumericRangeError, ResourceBudgetError, ValidationError
from .hamiltonian import SparsePauliHamiltonian, popcount
from .qubo import MultiObjectiveProblem

DEFAULT_BUDGET = 10**9
DENSE_MAX_N = 24
SPARSE_DEFAULT_ABOVE_N = 16
_CHUNK_ROWS = 1 << 17
_EXACT_FACTORIAL_MAX_P = 20


# -- layout -----------------------------------------------------------------

def num_terms(n):
    """Number ``d`` of elementary terms of one quadratic objective."""
    return n * (n + 1) // 2 + 1


def pair_index(i, j, n):
    """Position of the pair ``(i, j)``, ``i < j``, among the ``n(n-1)/2`` pairs."""
    if not 0 <= i < j < n:
        raise ValidationError(f"need 0 <= i < j < n, got i={i}, j={j}, n={n}")
    return i * n - i * (i + 1) // 2 + (j - i - 1)


def pairs(n):
    """Row and column arrays of the upper-triangle pairs in layout order."""
    return np.triu_indices(n, k=1)


def term_masks(n):
    """Pauli mask of each elementary term, in layout order."""
    I, J = pairs(n)
    one = np.int64(1)
    return np.concatenate([
        np.zeros(1, dtype=np.int64),
        one << np.arange(n, dtype=np.int64),
        (one << I.astype(np.int64)) | (one << J.astype(np.int64)),
    ])


@dataclass(frozen=True, eq=False)
class ExpansionTerms:
    """Objectives rewritten as coefficients over the elementary terms.

    ``coefficients[m, t]`` is the weight of term ``t`` in objective ``m``. The
    quadratic entries hold ``2 * A[i, j]`` so that each pair appears once.
    """

    n: int
    coefficients: np.ndarray
    shift_c: float = 0.0
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        coefs = np.array(self.coefficients, dtype=np.float64)
        if coefs.ndim != 2 or coefs.shape[1] != num_terms(self.n):
            raise ValidationError(
                f"coefficients must have shape (M, {num_terms(self.n)}), got {coefs.shape}"
            )
        coefs.setflags(write=False)
        object.__setattr__(self, "coefficients", coefs)
        object.__setattr__(self, "metadata", MappingProxyType(dict(self.metadata)))

    @property
    def M(self):
        return self.coefficients.shape[0]

    @property
    def masks(self):
        return term_masks(self.n)

    @property
    def alpha(self):
        return self.coefficients[:, 0]

    @property
    def fields(self):
        return self.coefficients[:, 1:self.n + 1]

    @property
    def couplings(self):
        """Upper-triangle weights, one row per objective (already doubled)."""
        return self.coefficients[:, self.n + 1:]

    def support(self):
        """Positions whose coefficient is non-zero in at least one objective."""
        return np.flatnonzero(np.any(self.coefficients != 0.0, axis=0))

    def evaluate(self, s):
        """Per-objective values at a sign vector (shape ``(M,)``) or batch ``(M, B)``."""
        s = check_spins(s, self.n)
        single = s.ndim == 1
        S = np.atleast_2d(s)
        I, J = pairs(self.n)
        basis = np.concatenate([np.ones((S.shape[0], 1)), S, S[:, I] * S[:, J]], axis=1)
        out = self.coefficients @ basis.T
        return out[:, 0] if single else out


def normalize_for_expansion(problem):
    """Rewrite objectives over the elementary term layout.

    The upper-triangle couplings are doubled and any diagonal was already
    folded into ``alpha`` by :class:`~moqa.qubo.IsingObjective`. Passing an
    :class:`ExpansionTerms` returns it unchanged.
    """
    if isinstance(problem, ExpansionTerms):
        return problem
    if not isinstance(problem, MultiObjectiveProblem):
        raise ValidationError(f"expected MultiObjectiveProblem, got {type(problem).__name__}")
    n = problem.n
    I, J = pairs(n)
    rows = [
        np.concatenate([[obj.alpha + np.trace(obj.A)], obj.a, 2.0 * obj.A[I, J]])
        for obj in problem.objectives
    ]
    return ExpansionTerms(n, np.array(rows), problem.shift_c, problem.metadata)


# -- allocations ------------------------------------------------------------

def allocation_count(n, p):
    """Number of power allocations, ``binom(p + n(n+1)/2, p)``."""
    return math.comb(p + num_terms(n) - 1, p)


def _multisets(lo, d, k):
    """All non-decreasing ``k``-tuples over ``lo .. d-1``, lexicographic, as rows."""
    if k == 0:
        return np.zeros((1, 0), dtype=np.int32)
    arr = np.arange(lo, d, dtype=np.int32)[:, None]
    for _ in range(1, k):
        last = arr[:, -1]
        counts = d - last
        total = int(counts.sum())
        starts = np.repeat(np.cumsum(counts) - counts, counts)
        new = np.repeat(last, counts) + (np.arange(total) - starts).astype(np.int32)
        arr = np.concatenate([np.repeat(arr, counts, axis=0), new[:, None]], axis=1)
    return arr


def _multiset_chunks(d, k, max_rows=_CHUNK_ROWS):
    """Lexicographic ``k``-multisets over ``range(d)`` in blocks of bounded size."""
    if k == 0:
        yield np.zeros((1, 0), dtype=np.int32)
        return
    q = 0
    while q < k and math.comb(d + k - q - 1, k - q) > max_rows:
        q += 1
    if q == 0:
        yield _multisets(0, d, k)
        return
    for prefix in _multisets(0, d, q):
        suffix = _multisets(int(prefix[-1]), d, k - q)
        yield np.concatenate([np.broadcast_to(prefix, (suffix.shape[0], q)), suffix], axis=1)


def _check_budget(count, budget):
    if budget is not None and count > budget:
        raise ResourceBudgetError(
            f"{count} power allocations exceed the budget of {budget}"
        )


def allocations(n, p, budget=DEFAULT_BUDGET):
    """Iterate over all power allocations for ``n`` variables and level ``p``.

    Yields tuples of length ``num_terms(n)`` in lexicographic order starting
    with ``(p, 0, ..., 0)``.

    Raises
    ------
    ResourceBudgetError
        If the count exceeds ``budget``; raised before anything is yielded.
    """
    n = check_positive_int(n, "n")
    p = check_positive_int(p, "p")
    _check_budget(allocation_count(n, p), budget)
    return _allocation_iter(n, p)


def _allocation_iter(n, p):
    d = num_terms(n)
    for chunk in _multiset_chunks(d, p):
        for row in chunk:
            v = [0] * d
            for t in row:
                v[t] += 1
            yield tuple(v)


def multinomial(p, v):
    """Exact ``p! / prod(v_i!)`` for a composition ``v`` of ``p``."""
    if sum(v) != p or any(k < 0 for k in v):
        raise ValidationError(f"{v!r} is not a composition of {p}")
    out = math.factorial(p)
    for k in v:
        out //= math.factorial(k)
    return out


def mask_of(alloc, n):
    """Pauli mask selected by an allocation vector.

    Bit ``k`` is set iff the power on ``a_k`` plus the powers on every pair
    touching ``k`` is odd.
    """
    d = num_terms(n)
    if len(alloc) != d:
        raise ValidationError(f"allocation has length {len(alloc)}, expected {d}")
    x = 0
    for k in range(n):
        t = alloc[k + 1]
        for i in range(n):
            if i < k:
                t += alloc[n + 1 + pair_index(i, k, n)]
            elif i > k:
                t += alloc[n + 1 + pair_index(k, i, n)]
        x += (t % 2) << k
    return x


# -- expansion --------------------------------------------------------------

def _multinomial_weights(rows, p):
    """``p! / prod(multiplicity!)`` for each sorted multiset row."""
    R = rows.shape[0]
    run = np.ones(R, dtype=np.int64)
    if p <= _EXACT_FACTORIAL_MAX_P:
        denom = np.ones(R, dtype=np.int64)
        for j in range(1, rows.shape[1]):
            run = np.where(rows[:, j] == rows[:, j - 1], run + 1, 1)
            denom *= run
        return (math.factorial(p) // denom).astype(np.float64)
    log_denom = np.zeros(R)
    for j in range(1, rows.shape[1]):
        run = np.where(rows[:, j] == rows[:, j - 1], run + 1, 1)
        log_denom += np.log(run)
    return np.exp(math.lgamma(p + 1) - log_denom)


def _chunk_contributions(rows, coefs, masks, p, linear_lo, linear_hi, even_linear_only):
    """Masks and summed values of one block of allocations.

    ``rows`` index into ``coefs``/``masks`` (already restricted to the support).
    """
    if even_linear_only:
        linear = (rows >= linear_lo) & (rows < linear_hi)
        rows = rows[(linear.sum(axis=1) & 1) == 0]
    if rows.shape[0] == 0:
        return rows, np.zeros(0, dtype=np.int64), np.zeros(0)
    x = np.bitwise_xor.reduce(masks[rows], axis=1) if p > 1 else masks[rows[:, 0]]
    prod = coefs[:, rows[:, 0]].copy()
    for j in range(1, p):
        prod *= coefs[:, rows[:, j]]
    values = prod.sum(axis=0) * _multinomial_weights(rows, p)
    if even_linear_only:
        values *= 2.0
    return rows, x, values


def _reduce_chunk(x, values):
    uniq, inverse = np.unique(x, return_inverse=True)
    return uniq, np.bincount(inverse, weights=values, minlength=uniq.size)


def _row_to_alloc(row, support, d):
    v = [0] * d
    for t in row:
        v[int(support[t])] += 1
    return tuple(v)


def _expand(problem, level, mode, budget, n_jobs, max_n):
    terms = normalize_for_expansion(problem)
    level = check_positive_int(level, "level")
    n = terms.n
    if max_n is not None and n > max_n:
        raise ResourceBudgetError(f"n={n} exceeds the {mode} expansion cap of {max_n}")
    if n > 62:
        raise ResourceBudgetError("masks are stored in 64-bit integers; n must be <= 62")
    d = num_terms(n)

    coefs = terms.coefficients
    even_linear_only = False
    if mode == "symmetry":
        check_pm_pair(terms)
        coefs = coefs[:1]
        even_linear_only = True

    support = terms.support()
    s_coefs = np.ascontiguousarray(coefs[:, support])
    s_masks = term_masks(n)[support]
    # positions of the linear terms inside the support
    linear_lo = int(np.searchsorted(support, 1))
    linear_hi = int(np.searchsorted(support, n + 1))
    count = math.comb(level + support.size - 1, level) if support.size else 0
    _check_budget(count, budget)

    def work(rows):
        with np.errstate(over="ignore", invalid="ignore"):
            kept, x, values = _chunk_contributions(
                rows, s_coefs, s_masks, level, linear_lo, linear_hi, even_linear_only
            )
        bad = ~np.isfinite(values)
        if bad.any():
            alloc = _row_to_alloc(kept[np.argmax(bad)], support, d)
            raise NumericRangeError(f"non-finite coefficient contribution for allocation {alloc}")
        uniq, sums = _reduce_chunk(x, values)
        return uniq, sums, kept.shape[0]

    chunks = _multiset_chunks(support.size, level) if support.size else iter(())
    if n_jobs in (None, 1):
        parts = [work(rows) for rows in chunks]
    else:
        from joblib import Parallel, delayed

        parts = Parallel(n_jobs=n_jobs)(delayed(work)(rows) for rows in chunks)

    evaluated = sum(k for _, _, k in parts)
    if mode == "dense":
        C = np.zeros(1 << n)
        for uniq, sums, _ in parts:
            C[uniq] += sums
        masks = np.flatnonzero(C)
        values = C[masks]
    else:
        masks, values = _merge_sparse(parts)
    return SparsePauliHamiltonian(
        n, level, masks, values, provenance=mode, M=terms.M, shift_c=terms.shift_c,
        info={
            "allocations_full": allocation_count(n, level),
            "allocations": count,
            "allocations_evaluated": evaluated,
            "support": int(support.size),
        },
    )


def _merge_sparse(parts):
    """Fold per-chunk partial sums in chunk order (same order as the dense path)."""
    masks = np.zeros(0, dtype=np.int64)
    values = np.zeros(0)
    pending_m, pending_v = [masks], [values]
    pending = 0
    for uniq, sums, _ in parts:
        pending_m.append(uniq)
        pending_v.append(sums)
        pending += uniq.size
        if pending > 4 * _CHUNK_ROWS:
            masks, values = _reduce_chunk(np.concatenate(pending_m), np.concatenate(pending_v))
            pending_m, pending_v, pending = [masks], [values], 0
    masks, values = _reduce_chunk(np.concatenate(pending_m), np.concatenate(pending_v))
    keep = values != 0.0
    return masks[keep], values[keep]


def expand_dense(problem, level, budget=DEFAULT_BUDGET, n_jobs=None, max_n=DENSE_MAX_N):
    """Coefficients of ``sum_m H_m**level`` accumulated in a ``2**n`` array.

    Parameters
    ----------
    problem : MultiObjectiveProblem or ExpansionTerms
        Usually already shifted to a non-negative landscape.
    level : int
        Approximation level ``p``.
    budget : int, optional
        Refuse when more than this many allocations would be visited.
    n_jobs : int, optional
        Process allocation chunks in parallel with joblib. Results are merged
        in chunk order, so the output does not depend on ``n_jobs``.

    Returns
    -------
    SparsePauliHamiltonian
        Exact zeros removed; ``info["allocations_evaluated"]`` counts the
        allocations visited after dropping terms that vanish in every objective.
    """
    return _expand(problem, level, "dense", budget, n_jobs, max_n)


def expand_sparse(problem, level, budget=DEFAULT_BUDGET, n_jobs=None):
    """Same result as :func:`expand_dense` without any ``2**n`` storage.

    Memory grows with the number of distinct masks reached, which is at most
    ``sum_{k <= 2*level} binom(n, k)``.
    """
    return _expand(problem, level, "sparse", budget, n_jobs, None)


def expand(problem, level, budget=DEFAULT_BUDGET, n_jobs=None):
    """Pick the dense path for small ``n`` and the sparse one otherwise."""
    terms = normalize_for_expansion(problem)
    if terms.n > SPARSE_DEFAULT_ABOVE_N:
        return expand_sparse(terms, level, budget, n_jobs)
    return expand_dense(terms, level, budget, n_jobs)


def check_pm_pair(problem):
    """Raise unless the problem is two objectives differing only in the sign of ``a``."""
    terms = normalize_for_expansion(problem)
    if terms.M != 2:
        raise ValidationError(f"a ± pair needs exactly 2 objectives, got {terms.M}")
    c0, c1 = terms.coefficients
    n = terms.n
    same = np.concatenate([[0], np.arange(n + 1, c0.size)])
    lin = np.arange(1, n + 1)
    if not (np.array_equal(c0[same], c1[same]) and np.array_equal(c0[lin], -c1[lin])):
        raise ValidationError("objectives are not an exact ± pair (equal A and alpha, opposite a)")
    return terms


def symmetry_reduced_expand(problem, level, budget=DEFAULT_BUDGET, n_jobs=None):
    """Expansion of a ± pair of objectives evaluating only one of them.

    For ``T_± = Q ± L`` the two contributions of an allocation carry signs
    ``1`` and ``(-1)**(total linear power)``: they cancel when the total power
    on the linear terms is odd and double otherwise. Odd allocations are
    skipped, the rest are counted twice.
    """
    return _expand(problem, level, "symmetry", budget, n_jobs, None)


def threshold(hamiltonian, theta):
    """Drop terms with ``|C(x)| < theta``.

    The result's ``info`` carries ``removed`` (number of dropped terms) and
    ``truncation_bound = theta * removed``, an upper bound on the pointwise
    change in energy, plus the tighter ``removed_abs_sum``.
    """
    theta = float(theta)
    if not theta >= 0.0:
        raise ValidationError(f"threshold must be >= 0, got {theta}")
    if theta == 0.0:
        return hamiltonian
    keep = np.abs(hamiltonian.coefficients) >= theta
    removed = int((~keep).sum())
    return SparsePauliHamiltonian(
        hamiltonian.n, hamiltonian.p,
        hamiltonian.masks[keep], hamiltonian.coefficients[keep],
        provenance=f"thresholded({theta:g})",
        M=hamiltonian.M, shift_c=hamiltonian.shift_c,
        info={
            **hamiltonian.info,
            "theta": theta,
            "removed": removed,
            "truncation_bound": theta * removed,
            "removed_abs_sum": float(np.abs(hamiltonian.coefficients[~keep]).sum()),
        },
    )


def max_terms_bound(n, level, include_identity=False):
    """Count of masks with Hamming weight ``1 .. 2*level`` (``0 ..`` if asked)."""
    lo = 0 if include_identity else 1
    return sum(math.comb(n, k) for k in range(lo, 2 * level + 1))


def resource_report(n, level, M):
    """Closed-form resource bounds for one configuration.

    Returns
    -------
    dict
        ``classical_steps`` ``(M+3) n^2 binom(level + (n^2+n)/2, level)`` (float),
        ``max_terms`` ``sum_{k=1}^{2 level} binom(n, k)`` (int),
        ``dense_slots`` ``2**n`` (float) and ``brute_force_steps``
        ``M n^2 2^n`` (float).
    """
    n = check_positive_int(n, "n")
    level = check_positive_int(level, "level")
    M = check_positive_int(M, "M")
    return {
        "classical_steps": float((M + 3) * n * n * allocation_count(n, level)),
        "max_terms": max_terms_bound(n, level),
        "dense_slots": float(2**n),
        "brute_force_steps": float(M * n * n * 2**n),
    }


def mask_weights(hamiltonian):
    return popcount(hamiltonian.masks)
