from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

_ACCEPTANCE_LINES = []


def all_spins(n):
    """Every sign vector with index ``b`` mapped to ``s_k = 1 - 2 * bit_k(b)``."""
    rows = [[1 - 2 * ((b >> k) & 1) for k in range(n)] for b in range(1 << n)]
    return np.array(rows, dtype=np.float64).reshape(1 << n, n)


def all_bits(n):
    return ((1 - all_spins(n)) / 2).astype(np.int64)


def direct_objective(A, a, alpha, s):
    return float(s @ A @ s + a @ s + alpha)


def direct_hamiltonian(terms, s):
    """``sum_x C(x) prod_{k in x} s_k`` term by term."""
    total = 0.0
    for mask, coef in terms.items():
        prod = 1.0
        for k in range(len(s)):
            if (mask >> k) & 1:
                prod *= s[k]
        total += coef * prod
    return total


def character_coefficients(values, n):
    """Pauli-Z coefficients of a landscape by direct projection onto characters."""
    S = all_spins(n)
    out = {}
    for mask in range(1 << n):
        chi = np.ones(1 << n)
        for k in range(n):
            if (mask >> k) & 1:
                chi *= S[:, k]
        out[mask] = float(chi @ values) / (1 << n)
    return out


def random_symmetric(rng, n, zero_diag=False):
    X = rng.standard_normal((n, n))
    X = X + X.T
    if zero_diag:
        np.fill_diagonal(X, 0.0)
    return X


def compositions(p, d):
    """All length-``d`` compositions of ``p`` via stars and bars."""
    out = []
    for bars in itertools.combinations(range(p + d - 1), d - 1):
        prev, v = -1, []
        for b in bars:
            v.append(b - prev - 1)
            prev = b
        v.append(p + d - 2 - prev)
        out.append(tuple(v))
    return out


@pytest.fixture
def record_criterion():
    """Record a PASS/FAIL line for the acceptance summary."""

    def record(number, title, ok, detail=""):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {title}"
        if detail:
            line += f"  [{detail}]"
        _ACCEPTANCE_LINES.append((number, line))
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_ACCEPTANCE_LINES):
        terminalreporter.write_line(line)
