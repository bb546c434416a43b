from __future__ import annotations

import io
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import all_spins, character_coefficients, compositions, direct_hamiltonian
from moqa import (
    IsingObjective,
    MultiObjectiveProblem,
    NumericRangeError,
    ResourceBudgetError,
    SparsePauliHamiltonian,
    ValidationError,
    allocation_count,
    allocations,
    expand,
    expand_dense,
    expand_sparse,
    mask_of,
    multinomial,
    normalize_for_expansion,
    resource_report,
    symmetry_reduced_expand,
    threshold,
)
from moqa.expansion import ExpansionTerms, max_terms_bound, num_terms, pair_index, pairs
from moqa.generators import random_multiobjective, random_partition_problem, spp_problem
from moqa.hamiltonian import bits_to_mask, mask_to_bits, popcount, walsh_hadamard
from moqa.oracle import landscape_p, power_sum_landscape


def _single(A, a, alpha):
    return MultiObjectiveProblem((IsingObjective(np.asarray(A, float), a, alpha),))


def _random(n, M, seed, instance=0):
    return random_multiobjective(n, M, seed, instance, shift="spectral")


class TestLayout:
    @pytest.mark.parametrize("n", [1, 2, 5, 9])
    def test_pair_index_is_bijection(self, n):
        seen = [pair_index(i, j, n) for i in range(n) for j in range(i + 1, n)]
        assert seen == list(range(n * (n - 1) // 2))
        I, J = pairs(n)
        assert [pair_index(i, j, n) for i, j in zip(I, J)] == seen

    def test_pair_index_rejects_bad_pairs(self):
        with pytest.raises(ValidationError):
            pair_index(2, 1, 4)

    def test_num_terms(self):
        assert [num_terms(n) for n in (1, 2, 3, 10)] == [2, 4, 7, 56]


class TestNormalize:
    def test_diagonal_only(self):
        A = np.diag([1.0, -3.0, 0.5])
        t = normalize_for_expansion(_single(A, np.zeros(3), 2.0))
        assert not t.couplings.any()
        assert t.alpha[0] == pytest.approx(2.0 + np.trace(A))

    def test_coupling_doubles(self):
        t = normalize_for_expansion(_single([[0, 1], [1, 0]], [0, 0], 0.0))
        assert t.couplings.tolist() == [[2.0]]
        assert t.alpha.tolist() == [0.0]
        for s in all_spins(2):
            assert t.evaluate(s)[0] == s[0] * s[1] * 2

    def test_idempotent(self):
        t = normalize_for_expansion(_random(4, 2, 0))
        assert normalize_for_expansion(t) is t

    @given(st.integers(1, 8), st.integers(1, 3), st.integers(0, 2**32 - 1))
    def test_evaluation_unchanged(self, n, M, seed):
        p = random_multiobjective(n, M, seed)
        t = normalize_for_expansion(p)
        S = all_spins(n)
        np.testing.assert_allclose(t.evaluate(S), p.evaluate(S), rtol=1e-12, atol=1e-12)

    def test_wrong_shape_rejected(self):
        with pytest.raises(ValidationError):
            ExpansionTerms(3, np.zeros((1, 5)))


class TestAllocations:
    def test_single_variable_level_one(self):
        assert list(allocations(1, 1)) == [(1, 0), (0, 1)]

    def test_two_variables_level_two(self):
        assert len(list(allocations(2, 2))) == math.comb(5, 2) == 10

    @pytest.mark.parametrize("n", range(1, 5))
    @pytest.mark.parametrize("p", range(1, 4))
    def test_documented_order(self, n, p):
        d = n * (n + 1) // 2 + 1
        want = sorted(compositions(p, d), reverse=True)
        got = list(allocations(n, p))
        assert got == want
        assert got[0] == (p,) + (0,) * (d - 1)
        assert got[-1] == (0,) * (d - 1) + (p,)

    def test_budget_refused_before_iteration(self):
        with pytest.raises(ResourceBudgetError):
            allocations(30, 8, budget=1000)

    def test_count_formula(self):
        for n in range(1, 7):
            for p in range(1, 5):
                assert allocation_count(n, p) == math.comb(p + (n * n + n) // 2, p)

    def test_invalid_arguments(self):
        with pytest.raises(ValidationError):
            allocations(0, 1)
        with pytest.raises(ValidationError):
            allocations(2, 0)


class TestMultinomial:
    @given(st.integers(1, 20), st.integers(1, 8), st.integers(0, 2**32 - 1))
    def test_times_factorials_is_p_factorial(self, p, d, seed):
        cuts = np.sort(np.random.default_rng(seed).integers(0, p + 1, size=d - 1))
        v = np.diff(np.concatenate([[0], cuts, [p]])).tolist()
        prod = 1
        for k in v:
            prod *= math.factorial(k)
        assert multinomial(p, v) * prod == math.factorial(p)

    def test_rejects_non_composition(self):
        with pytest.raises(ValidationError):
            multinomial(3, [1, 1])


class TestMaskOf:
    def test_all_power_on_constant(self):
        assert mask_of((3, 0, 0, 0), 2) == 0

    def test_single_coupling(self):
        assert mask_of((0, 0, 0, 1), 2) == 0b11

    def test_squared_coupling(self):
        assert mask_of((0, 0, 0, 2), 2) == 0

    def test_parity_by_hand(self):
        # n=3: a_0 once, A_(0,1) once, A_(1,2) once -> Z0 * Z0Z1 * Z1Z2 = Z2
        v = [0] * num_terms(3)
        v[1] = 1
        v[4 + pair_index(0, 1, 3)] = 1
        v[4 + pair_index(1, 2, 3)] = 1
        assert mask_of(tuple(v), 3) == 0b100


class TestExpandDense:
    def test_hand_expansion(self):
        h = expand_dense(_single([[0.0]], [1.0], 2.0), 2)
        assert h.terms == {0: 5.0, 1: 4.0}
        assert h.evaluate(np.array([1.0])) == 9.0
        assert h.evaluate(np.array([-1.0])) == 1.0

    def test_level_one_is_sum(self):
        p = random_multiobjective(4, 3, 0)
        h = expand_dense(p, 1)
        t = normalize_for_expansion(p)
        summed = t.coefficients.sum(axis=0)
        assert h[0] == pytest.approx(summed[0])
        for k in range(4):
            assert h[1 << k] == pytest.approx(summed[1 + k])
        for (i, j), c in zip(zip(*pairs(4)), summed[5:]):
            assert h[(1 << i) | (1 << j)] == pytest.approx(c)

    def test_oracle_identity_small(self):
        p = _random(4, 2, seed=3)
        h = expand_dense(p, 3)
        want = power_sum_landscape(p, 3)
        for b, s in enumerate(all_spins(4)):
            assert direct_hamiltonian(h.terms, s) == pytest.approx(want[b], rel=1e-9)

    @given(st.integers(1, 6), st.integers(1, 3), st.integers(1, 4), st.integers(0, 2**32 - 1))
    def test_coefficients_match_character_projection(self, n, M, level, seed):
        p = _random(n, M, seed)
        h = expand_dense(p, level)
        want = character_coefficients(power_sum_landscape(p, level), n)
        scale = max(abs(c) for c in want.values())
        for mask, c in want.items():
            assert h[mask] == pytest.approx(c, abs=1e-10 * scale)

    def test_dense_cap(self):
        with pytest.raises(ResourceBudgetError):
            expand_dense(random_multiobjective(5, 1, 0), 1, max_n=4)

    def test_overflow_names_allocation(self):
        p = _single(np.zeros((2, 2)), [1e200, 0.0], 1e200)
        with pytest.raises(NumericRangeError, match="allocation"):
            expand_dense(p, 2)

    def test_budget(self):
        with pytest.raises(ResourceBudgetError):
            expand_dense(_random(6, 2, 0), 3, budget=100)

    def test_info_counters(self):
        p = spp_problem([1.0, 2.0, 3.0])
        h = expand_dense(p, 2)
        # alpha and every coupling vanish, so only the three fields are enumerated
        assert h.info["allocations_full"] == allocation_count(3, 2)
        assert h.info["support"] == 3
        assert h.info["allocations"] == h.info["allocations_evaluated"] == math.comb(2 + 2, 2)

    def test_parallel_chunks_are_bit_identical(self):
        p = _random(7, 3, 4)
        from moqa import expansion

        original = expansion._CHUNK_ROWS
        try:
            expansion._CHUNK_ROWS = 97
            a = expand_dense(p, 3, n_jobs=2)
            b = expand_dense(p, 3)
        finally:
            expansion._CHUNK_ROWS = original
        assert np.array_equal(a.masks, b.masks)
        assert np.array_equal(a.coefficients, b.coefficients)


class TestExpandSparse:
    def test_term_bound_at_n20(self):
        h = expand_sparse(random_multiobjective(20, 2, 0), 1)
        assert len(h) <= 1 + 20 + 190
        assert h.max_weight <= 2

    @pytest.mark.parametrize("inst", range(5))
    def test_agrees_with_dense(self, inst):
        p = _random(8, 3, 9, inst)
        d, s = expand_dense(p, 2), expand_sparse(p, 2)
        assert np.array_equal(d.masks, s.masks)
        np.testing.assert_allclose(s.coefficients, d.coefficients, rtol=1e-12)

    @given(st.integers(2, 9), st.integers(1, 3), st.integers(0, 2**32 - 1))
    def test_weight_bound(self, n, level, seed):
        h = expand_sparse(_random(n, 2, seed), level)
        assert h.max_weight <= 2 * level
        assert len(h) <= max_terms_bound(n, level, include_identity=True)

    def test_auto_uses_sparse_above_sixteen(self):
        assert expand(random_multiobjective(17, 1, 0), 1).provenance == "sparse"
        assert expand(random_multiobjective(6, 1, 0), 1).provenance == "dense"


class TestThreshold:
    def test_zero_is_identity(self):
        h = expand_dense(_random(4, 2, 0), 2)
        assert threshold(h, 0.0) is h

    def test_total_truncation(self):
        h = expand_dense(_random(4, 2, 0), 2)
        out = threshold(h, float(np.abs(h.coefficients).max()) * 2)
        assert len(out) == 0
        assert out.info["removed"] == len(h)

    @pytest.mark.parametrize("seed", range(4))
    def test_error_bound(self, seed):
        h = expand_dense(_random(8, 3, seed), 3)
        theta = float(np.median(np.abs(h.coefficients)))
        t = threshold(h, theta)
        err = np.abs(landscape_p(h) - landscape_p(t)).max()
        assert err <= t.info["removed_abs_sum"] * (1 + 1e-12) <= t.info["truncation_bound"]
        assert t.provenance.startswith("thresholded(")

    def test_negative_theta(self):
        h = expand_dense(_random(3, 1, 0), 1)
        with pytest.raises(ValidationError):
            threshold(h, -1.0)


class TestSymmetryReduced:
    @pytest.mark.parametrize("n", [2, 4, 6, 8])
    @pytest.mark.parametrize("level", [1, 2, 3])
    def test_matches_dense(self, n, level):
        p = random_partition_problem(n, seed=1, shift="spectral")
        d, r = expand_dense(p, level), symmetry_reduced_expand(p, level)
        assert np.array_equal(d.masks, r.masks)
        np.testing.assert_allclose(r.coefficients, d.coefficients, rtol=1e-12)
        assert r.info["allocations_evaluated"] <= d.info["allocations_evaluated"]

    def test_spp_has_only_even_weight_masks(self):
        h = symmetry_reduced_expand(spp_problem([1.0, 2.0, 3.0, 4.0, 5.0]), 3)
        assert np.all(popcount(h.masks) % 2 == 0)

    def test_refuses_non_pair(self):
        with pytest.raises(ValidationError):
            symmetry_reduced_expand(random_multiobjective(4, 2, 0), 2)
        with pytest.raises(ValidationError):
            symmetry_reduced_expand(random_multiobjective(4, 3, 0), 2)


class TestResourceReport:
    def test_smallest_case(self):
        r = resource_report(1, 1, 1)
        assert r["classical_steps"] == 8.0
        assert r["max_terms"] == 1
        assert r["dense_slots"] == 2.0

    def test_monotone_and_bounded(self):
        rows = [resource_report(n, 4, 10) for n in range(1, 41)]
        for key in ("classical_steps", "max_terms", "dense_slots", "brute_force_steps"):
            vals = [r[key] for r in rows]
            assert all(a <= b for a, b in zip(vals, vals[1:]))
        assert all(r["max_terms"] <= r["dense_slots"] for r in rows)
        assert rows[-1]["classical_steps"] < rows[-1]["brute_force_steps"]


class TestSparsePauliHamiltonian:
    def test_canonical_order_and_zero_removal(self):
        h = SparsePauliHamiltonian.from_terms(3, 1, {0b110: 1.0, 0b001: 2.0, 0: 3.0, 0b010: 0.0})
        assert h.masks.tolist() == [0, 1, 6]
        assert len(h) == 3

    def test_duplicates_rejected(self):
        with pytest.raises(ValidationError):
            SparsePauliHamiltonian(2, 1, np.array([1, 1]), np.array([1.0, 2.0]))

    def test_mask_range_checked(self):
        with pytest.raises(ValidationError):
            SparsePauliHamiltonian(2, 1, np.array([4]), np.array([1.0]))

    def test_empty_landscape(self):
        h = SparsePauliHamiltonian(3, 1, np.array([], dtype=np.int64), np.array([]))
        assert not landscape_p(h).any()

    @given(st.integers(1, 10), st.integers(0, 2**32 - 1))
    def test_walsh_hadamard_is_direct_evaluation(self, n, seed):
        rng = np.random.default_rng(seed)
        masks = rng.choice(1 << n, size=min(1 << n, 12), replace=False)
        h = SparsePauliHamiltonian(n, 1, masks, rng.standard_normal(masks.size))
        S = all_spins(n)
        want = [direct_hamiltonian(h.terms, s) for s in S[:64]]
        np.testing.assert_allclose(h.landscape()[:64], want, rtol=1e-12, atol=1e-12)
        np.testing.assert_allclose(h.evaluate(S[:64]), want, rtol=1e-12, atol=1e-12)

    def test_walsh_hadamard_involution(self):
        x = np.random.default_rng(0).standard_normal(32)
        np.testing.assert_allclose(walsh_hadamard(walsh_hadamard(x)) / 32, x, atol=1e-12)

    def test_mask_strings(self):
        assert mask_to_bits(0b011, 4) == "1100"
        assert bits_to_mask("1100") == 0b011

    def test_jsonl_round_trip(self):
        h = expand_dense(_random(5, 2, 0), 2)
        buf = io.StringIO()
        h.to_jsonl(buf)
        lines = buf.getvalue().splitlines()
        assert len(lines) == len(h) + 1
        buf.seek(0)
        g = SparsePauliHamiltonian.from_jsonl(buf)
        assert np.array_equal(g.masks, h.masks)
        assert np.array_equal(g.coefficients, h.coefficients)
        assert (g.n, g.p, g.M, g.shift_c) == (h.n, h.p, h.M, h.shift_c)
