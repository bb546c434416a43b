"""Simulated annealing over diagonal Pauli-Z Hamiltonians.

Single-spin Metropolis updates in a fixed sweep order with geometric cooling.
The energy change of a flip only involves the terms that contain the flipped
qubit, so the sampler keeps the signed value ``C(x) * prod_{k in x} s_k`` of
every term and an incidence list from qubits to terms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from ._validation import check_positive_int, check_spins
from .exceptions import ValidationError
from .generators import instance_rng
from .hamiltonian import SparsePauliHamiltonian
from .qubo import bits_to_index, spins_to_bits

DRIFT_CHECK_EVERY = 100
DRIFT_TOL = 1e-8


@dataclass(frozen=True)
class AnnealSchedule:
    """Cooling schedule; ``None`` temperatures are filled in from the Hamiltonian."""

    sweeps: int = 5000
    T_start: float | None = None
    T_end: float | None = None
    restarts: int = 8
    seed: int = 0

    def __post_init__(self):
        check_positive_int(self.sweeps, "sweeps")
        check_positive_int(self.restarts, "restarts")
        if self.T_start is not None and self.T_end is not None:
            if not self.T_start >= self.T_end > 0:
                raise ValidationError(
                    f"need T_start >= T_end > 0, got T_start={self.T_start}, T_end={self.T_end}"
                )

    def resolved(self, hamiltonian):
        """Fill missing temperatures from the non-identity coefficient magnitudes."""
        mags = np.abs(hamiltonian.coefficients[hamiltonian.masks != 0])
        T_start, T_end = self.T_start, self.T_end
        if mags.size == 0:
            mags = np.ones(1)
        if T_start is None:
            T_start = float(mags.max())
        if T_end is None:
            T_end = 1e-3 * float(np.median(mags))
        T_end = min(T_end, T_start)
        return AnnealSchedule(self.sweeps, T_start, T_end, self.restarts, self.seed)


@dataclass(frozen=True)
class AnnealResult:
    spins: np.ndarray
    energy: float
    restart_energies: tuple
    max_drift: float

    @property
    def bits(self):
        return spins_to_bits(self.spins)

    @property
    def index(self):
        return int(bits_to_index(self.bits))


def incidence(hamiltonian):
    """CSR arrays ``(ptr, terms)``: the terms containing qubit ``i`` are
    ``terms[ptr[i]:ptr[i+1]]``."""
    n = hamiltonian.n
    masks = hamiltonian.masks
    bits = (masks[:, None] >> np.arange(n, dtype=np.int64)) & 1
    qubits, term_ids = np.nonzero(bits.T)  # sorted by qubit, then term
    ptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(ptr, qubits + 1, 1)
    return np.cumsum(ptr), term_ids.astype(np.int64)


def local_energy_delta(hamiltonian, s, i):
    """``E(s with spin i flipped) - E(s)``, using only terms that contain ``i``."""
    s = check_spins(s, hamiltonian.n)
    if s.ndim != 1:
        raise ValidationError("local_energy_delta takes a single sign vector")
    if not 0 <= i < hamiltonian.n:
        raise ValidationError(f"qubit index {i} out of range")
    masks = hamiltonian.masks
    sel = ((masks >> i) & 1).astype(bool)
    if not sel.any():
        return 0.0
    bits = ((masks[sel, None] >> np.arange(hamiltonian.n)) & 1).astype(bool)
    prods = np.where(bits, s[None, :], 1.0).prod(axis=1)
    return float(-2.0 * np.dot(hamiltonian.coefficients[sel], prods))


@numba.njit(cache=True, nogil=True)
def _full_energy(term_vals):
    return term_vals.sum()


@numba.njit(cache=True, nogil=True)
def _anneal_kernel(s, coefs, tptr, tq, qptr, qterms, temps, uniforms, check_every):
    n = s.shape[0]
    nterms = coefs.shape[0]
    vals = np.empty(nterms)
    for t in range(nterms):
        v = coefs[t]
        for k in range(tptr[t], tptr[t + 1]):
            v *= s[tq[k]]
        vals[t] = v
    energy = _full_energy(vals)
    best = energy
    best_s = s.copy()
    accepted = 0
    max_drift = 0.0
    for sweep in range(temps.shape[0]):
        T = temps[sweep]
        for i in range(n):
            delta = 0.0
            for k in range(qptr[i], qptr[i + 1]):
                delta += vals[qterms[k]]
            delta *= -2.0
            if delta <= 0.0 or uniforms[sweep, i] < np.exp(-delta / T):
                s[i] = -s[i]
                for k in range(qptr[i], qptr[i + 1]):
                    vals[qterms[k]] = -vals[qterms[k]]
                energy += delta
                accepted += 1
                if check_every > 0 and accepted % check_every == 0:
                    exact = _full_energy(vals)
                    drift = abs(exact - energy)
                    if drift > max_drift:
                        max_drift = drift
                    energy = exact
                if energy < best:
                    best = energy
                    best_s[:] = s
    return best_s, best, max_drift


def _term_lists(hamiltonian):
    n = hamiltonian.n
    masks = hamiltonian.masks
    bits = (masks[:, None] >> np.arange(n, dtype=np.int64)) & 1
    term_ids, qubits = np.nonzero(bits)
    tptr = np.zeros(len(masks) + 1, dtype=np.int64)
    np.add.at(tptr, term_ids + 1, 1)
    return np.cumsum(tptr), qubits.astype(np.int64)


def _run_restart(hamiltonian, sched, restart, arrays, check_every):
    coefs, tptr, tq, qptr, qterms, temps = arrays
    rng = instance_rng(sched.seed, restart)
    s0 = np.where(rng.random(hamiltonian.n) < 0.5, 1.0, -1.0)
    uniforms = rng.random((sched.sweeps, hamiltonian.n))
    best_s, _, drift = _anneal_kernel(
        s0, coefs, tptr, tq, qptr, qterms, temps, uniforms, check_every
    )
    return best_s, hamiltonian.evaluate(best_s), float(drift)


def anneal(hamiltonian, schedule=None, n_jobs=None, check_every=DRIFT_CHECK_EVERY):
    """Minimise a Hamiltonian by simulated annealing.

    Restart ``r`` draws its initial state and acceptance variates from the
    stream ``(seed, r)``, so results do not depend on ``n_jobs``. The best
    restart wins; ties go to the smallest bitstring index.

    Every ``check_every``-th accepted move the tracked energy is compared with
    a full re-evaluation; the largest discrepancy is reported as
    ``max_drift`` and an ``ArithmeticError`` is raised if it is not negligible.
    """
    if not isinstance(hamiltonian, SparsePauliHamiltonian):
        raise ValidationError("expected a SparsePauliHamiltonian")
    sched = (schedule or AnnealSchedule()).resolved(hamiltonian)
    ratio = sched.T_end / sched.T_start
    temps = sched.T_start * ratio ** (np.arange(sched.sweeps) / max(1, sched.sweeps - 1))
    tptr, tq = _term_lists(hamiltonian)
    qptr, qterms = incidence(hamiltonian)
    arrays = (np.ascontiguousarray(hamiltonian.coefficients), tptr, tq, qptr, qterms, temps)

    if n_jobs in (None, 1):
        runs = [_run_restart(hamiltonian, sched, r, arrays, check_every) for r in range(sched.restarts)]
    else:
        from joblib import Parallel, delayed

        runs = Parallel(n_jobs=n_jobs, prefer="threads")(
            delayed(_run_restart)(hamiltonian, sched, r, arrays, check_every)
            for r in range(sched.restarts)
        )
    energies = tuple(e for _, e, _ in runs)
    drift = max(d for _, _, d in runs)
    scale = max(1.0, float(np.abs(hamiltonian.coefficients).sum()))
    if drift > DRIFT_TOL * scale:
        raise ArithmeticError(f"incremental energy drifted by {drift:.3g} from full evaluation")
    best_e = min(energies)
    candidates = [
        (int(bits_to_index(spins_to_bits(s))), s) for s, e, _ in runs if e == best_e
    ]
    _, best_s = min(candidates, key=lambda item: item[0])
    return AnnealResult(best_s.astype(np.int8), best_e, energies, drift)
