from __future__ import annotations

import itertools
import math
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings

from _strategies import formulas, mappings, random_formula
from qfmaps.density import (
    converge,
    density,
    density_enumerate,
    density_exact,
    density_mc,
    density_weighted,
    hoeffding_radius,
    twin_reduction,
)
from qfmaps.errors import ResourceLimitError
from qfmaps.logic import And, CycleShiftGroup, Not, Or, arity, parse_formula, substitute
from qfmaps.mapping import (
    ColoredMapping,
    WeightedMapping,
    cycle_mapping,
    cycles,
    disjoint_union,
    random_mapping,
    star_mapping,
    two_cycles,
)


def test_diagonal(e1):
    assert density_exact("x1=x2", e1) == Fraction(1, 3)
    assert density_exact("x1=x2", star_mapping(50)) == Fraction(1, 50)


def test_e1_collision():
    # f-values (1, 2, 1): matching ordered pairs are (0,0) (0,2) (2,0) (2,2) (1,1)
    assert density_exact("f(x1)=f(x2)", ColoredMapping((1, 2, 1))) == Fraction(5, 9)


def test_three_cycle():
    assert density_exact("f^3(x1)=x1", cycle_mapping(3)) == 1


def test_weighted_e1():
    W = WeightedMapping(ColoredMapping((1, 2, 1)), (Fraction(1, 2), Fraction(1, 4), Fraction(1, 4)))
    # nu(f^-1(1))^2 + nu(f^-1(2))^2 = (3/4)^2 + (1/4)^2
    assert density_weighted("f(x1)=f(x2)", W) == Fraction(5, 8)
    assert density_weighted("x1=x2", W) == sum(w * w for w in W.weights)


def test_weighted_uniform_matches_exact(rng):
    F = random_mapping(9, rng, num_colors=1)
    U = WeightedMapping(F, (Fraction(1, 9),) * 9)
    for _ in range(20):
        phi = random_formula(rng, max_var=2, max_iter=2)
        assert density_weighted(phi, U) == density_exact(phi, F)


def test_closed_formulas(e1):
    assert density_exact("true", e1) == 1
    assert density_exact("false | !true", e1) == 0


def test_unused_lower_variable(e1):
    assert density_exact("f(x3)=x3", e1) == density_exact("f(x1)=x1", e1)


@settings(max_examples=150, deadline=None)
@given(mappings(max_n=7, max_colors=1), formulas(max_var=3, max_iter=3, max_leaves=4))
def test_engine_matches_enumeration(F, phi):
    want = density_enumerate(phi, F)
    if isinstance(F, WeightedMapping):
        assert density_weighted(phi, F) == want
        assert density_exact(phi, F) == density_enumerate(phi, F.base)
    else:
        assert density_exact(phi, F) == want
        assert density_exact(phi, F, compress=False) == want


@pytest.mark.parametrize("seed", range(8))
def test_twin_reduction_on_redundant_structures(seed):
    rng = random.Random(seed)
    parts = [star_mapping(rng.randint(2, 6)) for _ in range(3)]
    parts += [cycle_mapping(rng.randint(1, 3)) for _ in range(4)]
    F = disjoint_union(*parts)
    colors = (frozenset(v for v in range(F.n) if rng.random() < 0.3),)
    F = ColoredMapping(F.f, colors)
    red = twin_reduction(F, 2)
    assert red is not None and red.mapping.n <= F.n
    for _ in range(6):
        phi = random_formula(rng, max_var=2, max_iter=3)
        assert density_exact(phi, F) == density_enumerate(phi, F)


def test_large_blown_structure_is_fast():
    F = two_cycles(50_000)
    assert density_exact("f^2(x1)=x1 & f(x1)!=x2", F) == 1 - Fraction(1, 100_000)
    assert density_exact("f(x1)=f(x2) & f(x2)=f(x3)", star_mapping(100_000)) == 1


def test_budget_guard():
    F = ColoredMapping(tuple((3 * i + 1) % 50 for i in range(50)))
    with pytest.raises(ResourceLimitError, match="Monte Carlo"):
        density_exact("f(x1)=x2", F, budget=100)


def test_threads_do_not_change_result(rng):
    F = random_mapping(60, rng, num_colors=1)
    phi = parse_formula("f(x1)=f^2(x2) | M1(x1)")
    assert density_exact(phi, F, threads=1) == density_exact(phi, F, threads=4)


class TestIdentities:
    @pytest.mark.parametrize("seed", range(40))
    def test_inclusion_exclusion_negation_dummy(self, seed):
        rng = random.Random(seed)
        F = random_mapping(rng.randint(1, 20), rng, num_colors=1)
        phi = random_formula(rng, max_var=3, max_iter=3)
        psi = random_formula(rng, max_var=3, max_iter=3)
        d = lambda g: density_exact(g, F)
        assert d(Or(phi, psi)) + d(And(phi, psi)) == d(phi) + d(psi)
        assert d(Not(phi)) == 1 - d(phi)
        dummy = parse_formula(f"x{arity(phi) + 1}=x{arity(phi) + 1}")
        assert d(And(phi, dummy)) == d(phi)

    @pytest.mark.parametrize("q", [1, 2, 3])
    def test_gamma_invariance_identity(self, q):
        rng = random.Random(100 + q)
        G = CycleShiftGroup(q)
        fns = [G.as_function(e) for e in G.elements()]
        for _ in range(4):
            n = rng.randint(2, 6)
            F = random_mapping(n, rng)
            raw = [rng.randint(1, 5) for _ in range(n)]
            for c in cycles(F):
                if len(c) <= q:
                    for v in c:
                        raw[v] = raw[c[0]]
            W = WeightedMapping(F, tuple(Fraction(r, sum(raw)) for r in raw))
            phi = random_formula(rng, max_var=2, max_iter=2, colors=0)
            p = max(arity(phi), 1)
            total = sum(density_weighted(substitute(phi, gs), W)
                        for gs in itertools.product(fns, repeat=p))
            assert total / len(fns) ** p == density_weighted(phi, W)


class TestMonteCarlo:
    def test_radius(self):
        assert hoeffding_radius(10_000, 0.01) == pytest.approx(math.sqrt(math.log(200) / 20_000))
        assert hoeffding_radius(10_000, 0.01) == pytest.approx(0.016277, abs=1e-6)

    def test_deterministic(self):
        S = star_mapping(100)
        a = density_mc("f(x1)=x1", S, 500, 0.01, seed=3)
        b = density_mc("f(x1)=x1", S, 500, 0.01, seed=3)
        assert a == b

    def test_calibration(self):
        S = star_mapping(100)
        exact = float(density_exact("f(x1)=x1", S))
        delta, runs = 0.05, 100
        inside = sum(abs(r.estimate - exact) <= r.radius
                     for r in (density_mc("f(x1)=x1", S, 400, delta, seed=s) for s in range(runs)))
        assert inside >= (1 - delta) * runs - 3

    def test_argument_checks(self):
        with pytest.raises(ValueError):
            density_mc("x1=x1", star_mapping(3), 0, 0.1)
        with pytest.raises(ValueError):
            density_mc("x1=x1", star_mapping(3), 10, 1.5)


class TestConverge:
    def test_stars(self):
        rep = converge(["f(x1)=x1"], [star_mapping(n) for n in (4, 8, 16)])
        assert rep.table == ((Fraction(1, 4), Fraction(1, 8), Fraction(1, 16)),)
        assert rep.differences == ((Fraction(1, 8), Fraction(1, 16)),)

    def test_constants(self):
        rep = converge(["x1=x1", "f^2(x1)=x1"], [two_cycles(m) for m in (2, 4, 8)])
        assert rep.table == ((1, 1, 1), (1, 1, 1))
        assert rep.tail_deviation == (0, 0) and rep.flagged == (False, False)

    def test_needs_two(self):
        with pytest.raises(ValueError):
            converge(["x1=x1"], [star_mapping(3)])

    def test_tsv_shape(self):
        rep = converge(["f(x1)=x1"], [star_mapping(n) for n in (4, 8)])
        lines = rep.tsv().splitlines()
        assert lines[0].split("\t")[0] == "formula"
        assert lines[1].split("\t")[1:3] == ["1/4", "1/8"]


def test_dispatch(i1, e1_weighted, e1):
    assert density("f^2(x1)=x1", i1) == 1
    assert density("x1=x2", e1_weighted) == sum(w * w for w in e1_weighted.weights)
    assert density("x1=x2", e1) == Fraction(1, 3)
