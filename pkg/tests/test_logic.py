from __future__ import annotations

import itertools
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _strategies import all_mappings, formulas, mappings
from qfmaps.errors import ParseError
from qfmaps.logic import (
    FALSE,
    TRUE,
    And,
    BaseF,
    Color,
    Compose,
    CycleShiftGroup,
    Eq,
    FTerm,
    Identity,
    Neq,
    Not,
    Or,
    Switch,
    arity,
    cycle_shift,
    definable_cases,
    eval_definable,
    evaluate,
    format_formula,
    free_vars,
    function_symbol_count,
    parse_battery,
    parse_formula,
    substitute,
    xi_formula,
)
from qfmaps.mapping import ColoredMapping, cycle_mapping, identity_mapping, random_mapping

x1, x2, x3 = FTerm(1, 0), FTerm(2, 0), FTerm(3, 0)


class TestParser:
    def test_simple_atom(self):
        assert parse_formula("f(x1)=x2") == Eq(FTerm(1, 1), x2)

    def test_conjunction_with_color(self):
        assert parse_formula("f^2(x1)!=x1 & M1(x2)") == And(Neq(FTerm(1, 2), x1), Color(1, x2))

    def test_nesting_normalized(self):
        assert parse_formula("f(f(x1))=x1") == Eq(FTerm(1, 2), x1)
        assert parse_formula("f(f^3(x2))=x1") == Eq(FTerm(2, 4), x1)

    def test_precedence(self):
        phi = parse_formula("x1=x2 | !x1=x3 & x2=x3")
        assert phi == Or(Eq(x1, x2), And(Not(Eq(x1, x3)), Eq(x2, x3)))

    def test_constants(self):
        assert parse_formula("true") == TRUE
        assert parse_formula("!(false)") == Not(FALSE)

    @pytest.mark.parametrize("text", ["exists x1 f(x1)=x1", "forall x1 x1=x1", "∀x1 x1=x1"])
    def test_quantifiers_rejected(self, text):
        with pytest.raises(ParseError, match="quantifier-free fragment only"):
            parse_formula(text)

    @pytest.mark.parametrize("text, pos", [("f(x1", 5), ("x1 = ", 6), ("x1 == x2", 5), ("y1=x1", 1)])
    def test_error_positions(self, text, pos):
        with pytest.raises(ParseError) as exc:
            parse_formula(text)
        assert exc.value.pos == pos

    def test_battery(self):
        got = parse_battery("# header\nf(x1)=x1\n\nx1=x2  # diagonal\n")
        assert [t for t, _ in got] == ["f(x1)=x1", "x1=x2"]

    @settings(max_examples=300, deadline=None)
    @given(formulas())
    def test_round_trip(self, phi):
        assert parse_formula(format_formula(phi)) == phi


class TestStructure:
    def test_vars_and_count(self):
        phi = parse_formula("f(x1)=f^2(x3)")
        assert free_vars(phi) == {1, 3} and function_symbol_count(phi) == 3
        assert arity(phi) == 3

    def test_reflexive(self):
        phi = parse_formula("x1=x1")
        assert free_vars(phi) == {1} and function_symbol_count(phi) == 0

    def test_xi_small(self):
        xi = xi_formula(2, 1)
        assert free_vars(xi) == {1, 2} and function_symbol_count(xi) == 2


class TestEvaluate:
    def test_examples(self, e1):
        assert evaluate(parse_formula("f(x1)=x2"), e1, {1: 0, 2: 1})
        assert evaluate(parse_formula("f^2(x1)=x1"), e1, [1])
        assert all(evaluate(parse_formula("x1=x1"), e1, [v]) for v in range(3))

    def test_unassigned_variable(self, e1):
        with pytest.raises(ValueError):
            evaluate(parse_formula("x1=x2"), e1, [0])


class TestDefinable:
    def test_switch_example(self, e1):
        g = Switch(parse_formula("f^2(x1)=x1"), BaseF(), Identity())
        assert eval_definable(g, e1, 1) == 2
        assert eval_definable(g, e1, 0) == 0
        assert all(eval_definable(Identity(), e1, v) == v for v in range(3))

    def test_switch_needs_one_variable(self):
        with pytest.raises(ValueError):
            Switch(parse_formula("x1=x2"), BaseF(), Identity())

    def test_cycle_shifts(self, e1):
        z2 = cycle_shift(2)
        assert eval_definable(z2, e1, 1) == 2 and eval_definable(z2, e1, 0) == 0
        ident = identity_mapping(4)
        assert all(eval_definable(cycle_shift(1), ident, v) == v for v in range(4))
        assert all(eval_definable(cycle_shift(3), e1, v) == v for v in range(3))

    @settings(max_examples=100, deadline=None)
    @given(mappings(max_n=10, max_colors=0, weighted=False), st.integers(1, 5))
    def test_shift_order_and_bijectivity(self, F, k):
        z = cycle_shift(k)
        images = [eval_definable(z, F, v) for v in range(F.n)]
        assert sorted(images) == list(range(F.n))
        for v in range(F.n):
            w = v
            for _ in range(k):
                w = eval_definable(z, F, w)
            assert w == v

    @settings(max_examples=100, deadline=None)
    @given(mappings(max_n=10, max_colors=0, weighted=False), st.integers(1, 4), st.integers(1, 4))
    def test_shifts_commute(self, F, k, l):
        a, b = Compose(cycle_shift(k), cycle_shift(l)), Compose(cycle_shift(l), cycle_shift(k))
        assert all(eval_definable(a, F, v) == eval_definable(b, F, v) for v in range(F.n))

    def test_cases_cover(self):
        g = Compose(cycle_shift(2), Switch(parse_formula("f(x1)=x1"), BaseF(), cycle_shift(1)))
        for F in all_mappings(3):
            for v in range(3):
                hits = [b for guard, b in definable_cases(g) if evaluate(guard, F, [v])]
                assert len(hits) == 1
                assert F.iterate(v, hits[0]) == eval_definable(g, F, v)


class TestGroup:
    @pytest.mark.parametrize("q, order", [(1, 1), (2, 2), (3, 6), (4, 24)])
    def test_order(self, q, order):
        G = CycleShiftGroup(q)
        assert G.order == order == len(list(G.elements()))

    def test_inverse_of_zeta2(self):
        G = CycleShiftGroup(3)
        e2 = G.generator(2)
        assert G.inverse(e2) == e2
        assert G.compose(e2, e2) == G.identity

    def test_inverse_is_power(self):
        G = CycleShiftGroup(4)
        for k in range(1, 5):
            e = G.generator(k)
            power = G.identity
            for _ in range(k - 1):
                power = G.compose(power, e)
            assert G.inverse(e) == power

    @pytest.mark.parametrize("q", [1, 2, 3])
    def test_act_matches_composition(self, q):
        G = CycleShiftGroup(q)
        rng = random.Random(q)
        F = random_mapping(9, rng)
        for e in G.elements():
            g = G.as_function(e)
            for v in range(F.n):
                assert G.act(e, F, v) == eval_definable(g, F, v)
            inv = G.as_function(G.inverse(e))
            assert all(eval_definable(inv, F, eval_definable(g, F, v)) == v for v in range(F.n))


class TestSubstitute:
    def test_zeta1_expansion(self):
        got = substitute(parse_formula("f(x1)=x2"), (cycle_shift(1), Identity()))
        assert got == parse_formula("(f(x1)=x1 & f^2(x1)=x2) | (f(x1)!=x1 & f(x1)=x2)")

    def test_identity_tuple(self):
        phi = parse_formula("f(x1)=x2 & !M1(x2)")
        assert substitute(phi, (Identity(), Identity())) == phi

    def test_tautology(self, e1):
        got = substitute(parse_formula("x1=x1"), (cycle_shift(2),))
        assert all(evaluate(got, e1, [v]) for v in range(3))

    def test_needs_enough_functions(self):
        with pytest.raises(ValueError):
            substitute(parse_formula("x1=x2"), (Identity(),))

    @settings(max_examples=200, deadline=None)
    @given(mappings(max_n=5, max_colors=1, weighted=False), formulas(max_var=2, max_iter=2),
           st.lists(st.sampled_from([Identity(), BaseF(), cycle_shift(1), cycle_shift(2),
                                     cycle_shift(3)]), min_size=2, max_size=2))
    def test_soundness(self, F, phi, gs):
        psi = substitute(phi, gs)
        for v in itertools.product(range(F.n), repeat=2):
            moved = [eval_definable(g, F, x) for g, x in zip(gs, v)]
            assert evaluate(psi, F, v) == evaluate(phi, F, moved)
