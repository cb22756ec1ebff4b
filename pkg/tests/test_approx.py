from __future__ import annotations

import itertools
import random
from fractions import Fraction

import pytest

from qfmaps.approx import (
    ApproxParams,
    approximate,
    blow,
    blown_measure,
    error_bound,
    gamma_average,
    sample_structure,
    uniformize,
)
from qfmaps.density import density_exact
from qfmaps.errors import HypothesisError
from qfmaps.logic import CycleShiftGroup, Not, eval_definable, cycle_shift, xi_formula
from qfmaps.mapping import (
    ColoredMapping,
    WeightedMapping,
    cycles,
    random_mapping,
    random_weights,
)

F_ = Fraction


def random_weighted(rng: random.Random, n: int, colors: int = 0) -> WeightedMapping:
    return WeightedMapping(random_mapping(n, rng, num_colors=colors), random_weights(n, rng))


class TestSample:
    def test_rotation(self, i1):
        S = sample_structure(i1, q=2, points=[F_(1, 10), F_(7, 10)])
        assert S.labels == (F_(1, 10), F_(6, 10), F_(7, 10), F_(2, 10))
        assert S.f == (1, 0, 3, 2)
        assert S.weights == (F_(1, 2), 0, F_(1, 2), 0)

    def test_constant(self, i3):
        S = sample_structure(i3, q=1, points=[F_(1, 4), F_(3, 4)])
        assert set(S.labels) == {F_(1, 4), F_(3, 4), F_(1, 3)}
        third = S.labels.index(F_(1, 3))
        assert all(S.f[v] == third for v in range(3))
        assert S.weights[third] == 0 and sum(S.weights) == 1

    def test_no_closure(self, i2):
        S = sample_structure(i2, q=0, points=[F_(1, 2)])
        assert S.n == 1 and S.f == (0,) and S.weights == (1,)

    def test_chain_end_fixed(self, i2):
        S = sample_structure(i2, q=2, points=[F_(1, 2)])
        assert S.labels == (F_(1, 2), F_(1, 4), F_(1, 8))
        assert S.f == (1, 2, 2)

    def test_collisions_accumulate(self, i1):
        S = sample_structure(i1, q=1, points=[F_(1, 10), F_(1, 10), F_(6, 10)])
        assert S.n == 2 and S.weights == (F_(2, 3), F_(1, 3))

    def test_colors_inherited(self):
        from qfmaps.interval import IntervalMapping
        L = IntervalMapping.from_pieces([(0, 1, F_(1, 2), 0)], [[(0, F_(1, 3))]])
        S = sample_structure(L, q=1, points=[F_(1, 2)])
        assert S.colors == (frozenset({1}),)

    def test_seeded(self, i1):
        a = sample_structure(i1, 50, 2, seed=5)
        assert a.labels == sample_structure(i1, 50, 2, seed=5).labels
        assert a.labels != sample_structure(i1, 50, 2, seed=6).labels

    def test_needs_samples(self, i1):
        with pytest.raises(ValueError):
            sample_structure(i1, 0, 2)


class TestUniformize:
    def test_e1(self, e1_weighted):
        assert uniformize(e1_weighted, 2).weights == (F_(1, 2), F_(1, 4), F_(1, 4))

    def test_sampled_rotation(self, i1):
        S = sample_structure(i1, q=2, points=[F_(1, 10), F_(7, 10)])
        assert uniformize(S, 2).weights == (F_(1, 4),) * 4

    def test_long_cycles_untouched(self, e1_weighted):
        assert uniformize(e1_weighted, 1) == e1_weighted

    @pytest.mark.parametrize("seed", range(30))
    def test_properties(self, seed):
        rng = random.Random(seed)
        q = rng.randint(1, 4)
        W = random_weighted(rng, rng.randint(1, 12))
        U = uniformize(W, q)
        assert sum(U.weights) == 1
        assert uniformize(U, q) == U
        short = {v for c in cycles(W) if len(c) <= q for v in c}
        assert all(U.weights[v] == W.weights[v] for v in range(W.n) if v not in short)
        for k in range(1, q + 1):
            z = cycle_shift(k)
            assert all(U.weights[eval_definable(z, U, v)] == U.weights[v] for v in range(U.n))

    @pytest.mark.parametrize("seed", range(20))
    def test_equals_group_average(self, seed):
        rng = random.Random(seed)
        q = rng.randint(1, 4)
        W = random_weighted(rng, rng.randint(1, 6))
        assert uniformize(W, q).weights == gamma_average(W, q)

    def test_group_average_by_direct_action(self, e1_weighted):
        G = CycleShiftGroup(3)
        want = tuple(sum((e1_weighted.weights[G.act(e, e1_weighted, v)] for e in G.elements()), F_(0))
                     / G.order for v in range(3))
        assert gamma_average(e1_weighted, 3) == want


class TestBlow:
    def test_rotation_sample(self, i1):
        S = uniformize(sample_structure(i1, q=2, points=[F_(1, 10), F_(7, 10)]), 2)
        R = blow(S, 1, 2)
        assert R.structure.n == 8
        assert sorted(len(c) for c in cycles(R.structure)) == [2, 2, 2, 2]

    def test_single_point(self):
        R = blow(WeightedMapping(ColoredMapping((0,)), (F_(1),)), 5, 1)
        assert R.structure.n == 6 and R.structure.f == tuple(range(6))

    def test_rejects_non_invariant(self, e1_weighted):
        with pytest.raises(HypothesisError, match=r"cycle \[1, 2\]"):
            blow(e1_weighted, 3, 2)

    def test_non_short_elements_collapse(self, e1):
        W = WeightedMapping(e1, (F_(1, 3),) * 3)
        R = blow(W, 2, 2)
        for i, (v, j) in enumerate(R.provenance):
            tv, tj = R.provenance[R.structure.f[i]]
            assert tv == e1.f[v]
            assert tj == (j if v in (1, 2) else 0)

    def test_colors_lifted(self):
        W = WeightedMapping(ColoredMapping((1, 0), (frozenset({0}),)), (F_(1, 2), F_(1, 2)))
        R = blow(W, 3, 2)
        assert all(R.structure.has_color(1, i) == (v == 0) for i, (v, _) in enumerate(R.provenance))

    @pytest.mark.parametrize("seed", range(30))
    def test_size_and_atoms(self, seed):
        rng = random.Random(seed)
        q = rng.randint(1, 3)
        W = uniformize(random_weighted(rng, rng.randint(1, 10)), q)
        N = rng.randint(1, 8)
        R = blow(W, N, q)
        B = R.structure
        assert N * W.n <= B.n <= (N + 1) * W.n
        if B.n <= 200:
            for i, (v, _) in enumerate(R.provenance):
                for a in range(q + 1):
                    for b in range(1, q + 1 - a):
                        assert (B.iterate(i, a) == B.iterate(i, a + b)) == \
                               (W.iterate(v, a) == W.iterate(v, a + b))

    def test_size_bound_attained(self):
        R = blow(WeightedMapping(ColoredMapping((0, 1)), (F_(1, 2), F_(1, 2))), 3, 1)
        assert R.structure.n == (3 + 1) * 2

    @pytest.mark.parametrize("seed", range(10))
    def test_xi_bound(self, seed):
        rng = random.Random(seed)
        q = rng.randint(1, 3)
        W = uniformize(random_weighted(rng, rng.randint(1, 6)), q)
        B = blow(W, rng.randint(1, 4), q).structure
        for p in (2, 3):
            assert density_exact(Not(xi_formula(p, q)), B) <= F_(p * (p - 1) * (q + 1), B.n)

    @pytest.mark.parametrize("seed", range(20))
    def test_projected_measure(self, seed):
        rng = random.Random(seed)
        W = uniformize(random_weighted(rng, rng.randint(1, 8)), 2)
        R = blow(W, rng.randint(1, 6), 2)
        nu_t, size = blown_measure(R), R.structure.n
        assert sum(nu_t) == 1
        for v in range(W.n):
            assert nu_t[v] - W.weights[v] <= F_(1, size)
            assert W.weights[v] - nu_t[v] < W.weights[v] * W.n / size
        # total variation, which is what the error argument uses
        tv = sum(max(F_(0), W.weights[v] - nu_t[v]) for v in range(W.n))
        assert tv <= F_(W.n, size)

    def test_per_element_lower_gap_can_exceed_one_copy(self):
        # mass concentrated on one of three elements: copies (4, 1, 1), so
        # nu-tilde(0) = 4/6 and the gap 1/3 is two copies' worth
        W = WeightedMapping(ColoredMapping((0, 1, 2)), (F_(1), F_(0), F_(0)))
        R = blow(W, 1, 1)
        assert R.structure.n == 6
        assert blown_measure(R)[0] == F_(2, 3)
        assert W.weights[0] - F_(1, 6) > blown_measure(R)[0]


class TestErrorBound:
    def test_values(self):
        assert error_bound(2, 3, 10, 100, F_(1, 100)) == F_(19, 250)
        assert error_bound(1, 1, 1, 1, 0) == 4

    def test_monotone(self):
        vals = [error_bound(2, 3, 10, N, F_(1, N)) for N in (1, 2, 4, 8, 16, 1000)]
        assert all(a > b for a, b in zip(vals, vals[1:]))
        assert vals[-1] < F_(1, 100)

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            error_bound(0, 1, 1, 1, 0)


class TestApproximate:
    def test_params_validated(self):
        for bad in [(0, 1, F_(1, 2), 1), (1, 0, F_(1, 2), 1), (1, 1, 0, 1), (1, 1, F_(1, 2), 0)]:
            with pytest.raises(ValueError):
                ApproxParams(*bad)

    def test_rotation(self, i1):
        R = approximate(i1, ApproxParams(2, 3, F_(1, 20), 50, seed=1, nsamples=300))
        assert density_exact("f^2(x1)=x1", R.structure) == 1
        assert R.bound == error_bound(2, 3, R.source.n, 50, F_(1, 20))

    def test_constant(self, i3):
        R = approximate(i3, ApproxParams(2, 2, F_(1, 20), 50, seed=2, nsamples=300))
        assert density_exact("f(x1)=f(x2)", R.structure) >= 1 - R.bound

    def test_gate(self, expanding):
        with pytest.raises(HypothesisError, match="piece 0"):
            approximate(expanding, ApproxParams(2, 3, F_(1, 20), 50))

    def test_deterministic(self, i2):
        p = ApproxParams(1, 2, F_(1, 10), 3, seed=9, nsamples=40)
        assert approximate(i2, p).structure == approximate(i2, p).structure
