"""scikit-learn style wrappers around the functional API.

``MOQAHamiltonian`` is fitted on a set of objectives and exposes the compiled
Hamiltonian; ``AnnealingSolver`` is fitted on a Hamiltonian and keeps the
best configuration it found. Both follow the usual ``get_params`` /
``set_params`` / trailing-underscore conventions so they can be cloned and
grid-searched.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from ._validation import check_bits
from .annealer import AnnealSchedule, anneal
from .exceptions import ValidationError
from .expansion import DEFAULT_BUDGET, expand, expand_dense, expand_sparse, symmetry_reduced_expand, threshold
from .hamiltonian import SparsePauliHamiltonian
from .oracle import landscape_p, spectrum
from .qubo import (
    IsingObjective,
    MultiObjectiveProblem,
    apply_shift,
    bits_to_spins,
    compute_shift,
    index_to_bits,
    qubo_to_ising,
)

_EXPANDERS = {
    "auto": expand,
    "dense": expand_dense,
    "sparse": expand_sparse,
    "symmetry": symmetry_reduced_expand,
}


def as_problem(X):
    """Coerce objectives into a :class:`MultiObjectiveProblem`.

    Accepts a problem, a sequence of :class:`IsingObjective`, or an array of
    QUBO matrices of shape ``(M, n, n)`` (a single ``(n, n)`` matrix is
    treated as ``M = 1``).
    """
    if isinstance(X, MultiObjectiveProblem):
        return X
    if isinstance(X, IsingObjective):
        return MultiObjectiveProblem((X,))
    if isinstance(X, (list, tuple)) and X and all(isinstance(o, IsingObjective) for o in X):
        return MultiObjectiveProblem(tuple(X))
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[None]
    if arr.ndim != 3 or arr.shape[1] != arr.shape[2]:
        raise ValidationError(f"expected QUBO matrices of shape (M, n, n), got {arr.shape}")
    return MultiObjectiveProblem(tuple(qubo_to_ising(Q) for Q in arr))


class MOQAHamiltonian(TransformerMixin, BaseEstimator):
    """Compile ``max_m h_m`` into the diagonal Hamiltonian ``sum_m h_m**level``.

    Parameters
    ----------
    level : int
        Approximation level ``p``.
    shift : {"spectral", "exact"} or float
        How to make the objectives non-negative; a number is used as is.
    method : {"auto", "dense", "sparse", "symmetry"}
        Expansion routine.
    theta : float
        Drop terms with ``|C(x)| < theta`` after expansion.
    budget : int
        Refuse expansions visiting more allocations than this.

    Attributes
    ----------
    problem_ : MultiObjectiveProblem
        The shifted objectives.
    shift_ : float
    hamiltonian_ : SparsePauliHamiltonian
    n_features_in_ : int
        Number of binary variables.
    """

    def __init__(self, level=2, shift="spectral", method="auto", theta=0.0, budget=DEFAULT_BUDGET):
        self.level = level
        self.shift = shift
        self.method = method
        self.theta = theta
        self.budget = budget

    def fit(self, X, y=None):
        if self.method not in _EXPANDERS:
            raise ValidationError(f"unknown method {self.method!r}")
        problem = as_problem(X)
        c = self.shift if isinstance(self.shift, (int, float)) else compute_shift(problem, self.shift)
        self.shift_ = float(c)
        self.problem_ = apply_shift(problem, self.shift_)
        ham = _EXPANDERS[self.method](self.problem_, self.level, budget=self.budget)
        self.hamiltonian_ = threshold(ham, self.theta)
        self.n_features_in_ = problem.n
        return self

    def _bits(self, B):
        check_is_fitted(self, "hamiltonian_")
        B = check_array(B, dtype=np.int8, ensure_2d=True)
        if B.shape[1] != self.n_features_in_:
            raise ValidationError(f"expected {self.n_features_in_} columns, got {B.shape[1]}")
        return check_bits(B, self.n_features_in_)

    def transform(self, B):
        """Shifted objective values, shape ``(n_samples, M)``."""
        S = bits_to_spins(self._bits(B))
        return self.problem_.evaluate(S).T

    def score_samples(self, B):
        """Energy of the compiled Hamiltonian at each row of ``B``."""
        return self.hamiltonian_.evaluate(bits_to_spins(self._bits(B)))

    def ground_state(self):
        """Brute-force minimiser of the compiled Hamiltonian as a bit vector."""
        check_is_fitted(self, "hamiltonian_")
        report = spectrum(landscape_p(self.hamiltonian_))
        return index_to_bits(report.argmin_index, self.n_features_in_)


class AnnealingSolver(BaseEstimator):
    """Simulated annealing on a :class:`SparsePauliHamiltonian`.

    Attributes
    ----------
    best_bits_ : ndarray of int8
    best_energy_ : float
    result_ : AnnealResult
    """

    def __init__(self, sweeps=5000, T_start=None, T_end=None, restarts=8, seed=0, n_jobs=None):
        self.sweeps = sweeps
        self.T_start = T_start
        self.T_end = T_end
        self.restarts = restarts
        self.seed = seed
        self.n_jobs = n_jobs

    def fit(self, X, y=None):
        if isinstance(X, MOQAHamiltonian):
            X = X.hamiltonian_
        if not isinstance(X, SparsePauliHamiltonian):
            raise ValidationError("AnnealingSolver.fit expects a SparsePauliHamiltonian")
        sched = AnnealSchedule(self.sweeps, self.T_start, self.T_end, self.restarts, self.seed)
        self.result_ = anneal(X, sched, n_jobs=self.n_jobs)
        self.best_bits_ = self.result_.bits
        self.best_energy_ = self.result_.energy
        self.n_features_in_ = X.n
        return self

    def predict(self, X=None):
        """Best bitstring found (re-fitting first when ``X`` is given)."""
        if X is not None:
            self.fit(X)
        check_is_fitted(self, "best_bits_")
        return self.best_bits_
