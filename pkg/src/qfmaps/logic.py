"""Quantifier-free formulas over the signature ``{f, M_1, M_2, ...}``.

Terms are always in iterate form ``f^a(x_i)``; nested applications are
flattened by the parser.  The module also covers QF-definable unary
functions (identity, ``f``, composition, ``switch``), the cycle shifts
``zeta_k`` and the finite abelian group they generate, and substitution of
definable functions into formulas.
"""

from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass
from typing import Iterator, Mapping, Sequence, Union

from .errors import ParseError

__all__ = [
    "FTerm", "Eq", "Neq", "Color", "Top", "Bottom", "Not", "And", "Or",
    "TRUE", "FALSE", "Formula",
    "conj", "disj", "neg",
    "parse_formula", "format_formula", "parse_battery",
    "free_vars", "arity", "function_symbol_count", "depth", "atoms",
    "evaluate",
    "Identity", "BaseF", "Compose", "Switch", "QFDefinableFn",
    "eval_definable", "definable_cases", "cycle_shift",
    "CycleShiftGroup", "group_elements",
    "substitute", "xi_formula",
]


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------

@dataclass(frozen=True, order=True)
class FTerm:
    """``f^iterate(x_var)``."""

    var: int
    iterate: int = 0

    def __post_init__(self) -> None:
        if self.var < 1:
            raise ValueError("variable indices start at 1")
        if self.iterate < 0:
            raise ValueError("iterate count must be non-negative")

    def shifted(self, b: int) -> FTerm:
        return FTerm(self.var, self.iterate + b)

    def __str__(self) -> str:
        if self.iterate == 0:
            return f"x{self.var}"
        if self.iterate == 1:
            return f"f(x{self.var})"
        return f"f^{self.iterate}(x{self.var})"


@dataclass(frozen=True)
class Eq:
    left: FTerm
    right: FTerm


@dataclass(frozen=True)
class Neq:
    left: FTerm
    right: FTerm


@dataclass(frozen=True)
class Color:
    m: int
    term: FTerm


@dataclass(frozen=True)
class Top:
    pass


@dataclass(frozen=True)
class Bottom:
    pass


@dataclass(frozen=True)
class Not:
    arg: "Formula"


@dataclass(frozen=True)
class And:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Or:
    left: "Formula"
    right: "Formula"


Formula = Union[Eq, Neq, Color, Top, Bottom, Not, And, Or]
TRUE = Top()
FALSE = Bottom()
_ATOMS = (Eq, Neq, Color, Top, Bottom)


def conj(*fs: Formula) -> Formula:
    """Left-nested conjunction, dropping ``true`` and absorbing ``false``."""
    out: Formula | None = None
    for g in fs:
        if isinstance(g, Bottom):
            return FALSE
        if isinstance(g, Top):
            continue
        out = g if out is None else And(out, g)
    return TRUE if out is None else out


def disj(*fs: Formula) -> Formula:
    out: Formula | None = None
    for g in fs:
        if isinstance(g, Top):
            return TRUE
        if isinstance(g, Bottom):
            continue
        out = g if out is None else Or(out, g)
    return FALSE if out is None else out


def neg(g: Formula) -> Formula:
    if isinstance(g, Eq):
        return Neq(g.left, g.right)
    if isinstance(g, Neq):
        return Eq(g.left, g.right)
    if isinstance(g, Top):
        return FALSE
    if isinstance(g, Bottom):
        return TRUE
    if isinstance(g, Not):
        return g.arg
    return Not(g)


# ---------------------------------------------------------------------------
# Structural attributes
# ---------------------------------------------------------------------------

def terms(phi: Formula) -> Iterator[FTerm]:
    """Every term occurrence, left to right."""
    if isinstance(phi, (Eq, Neq)):
        yield phi.left
        yield phi.right
    elif isinstance(phi, Color):
        yield phi.term
    elif isinstance(phi, Not):
        yield from terms(phi.arg)
    elif isinstance(phi, (And, Or)):
        yield from terms(phi.left)
        yield from terms(phi.right)


def atoms(phi: Formula) -> Iterator[Formula]:
    if isinstance(phi, _ATOMS):
        yield phi
    elif isinstance(phi, Not):
        yield from atoms(phi.arg)
    else:
        yield from atoms(phi.left)
        yield from atoms(phi.right)


def free_vars(phi: Formula) -> frozenset[int]:
    return frozenset(t.var for t in terms(phi))


def arity(phi: Formula) -> int:
    """Highest variable index occurring (0 for closed formulas)."""
    return max(free_vars(phi), default=0)


def function_symbol_count(phi: Formula) -> int:
    return sum(t.iterate for t in terms(phi))


def depth(phi: Formula) -> int:
    """Largest iterate count of any term."""
    return max((t.iterate for t in terms(phi)), default=0)


def map_terms(phi: Formula, fn) -> Formula:
    if isinstance(phi, Eq):
        return Eq(fn(phi.left), fn(phi.right))
    if isinstance(phi, Neq):
        return Neq(fn(phi.left), fn(phi.right))
    if isinstance(phi, Color):
        return Color(phi.m, fn(phi.term))
    if isinstance(phi, (Top, Bottom)):
        return phi
    if isinstance(phi, Not):
        return Not(map_terms(phi.arg, fn))
    return type(phi)(map_terms(phi.left, fn), map_terms(phi.right, fn))


# ---------------------------------------------------------------------------
# Parsing and printing
# ---------------------------------------------------------------------------

_QUANTIFIERS = {"exists", "forall", "all", "some", "ex", "fa"}
_TOKEN_RE = re.compile(
    r"\s*(?:(?P<iter>f\^\d+)|(?P<var>x\d+)|(?P<color>M\d+)|(?P<word>[A-Za-z_]\w*)"
    r"|(?P<op>!=|[=!&|()])|(?P<quant>[∀∃])|(?P<bad>\S))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    toks = []
    pos = 0
    while True:
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            break
        kind = m.lastgroup
        value = m.group(kind)
        start = m.start(kind) + 1
        pos = m.end()
        if kind == "quant" or (kind == "word" and value.lower() in _QUANTIFIERS):
            raise ParseError(f"quantifier {value!r} is not allowed: quantifier-free fragment only",
                             pos=start)
        if kind == "bad":
            raise ParseError(f"unexpected character {value!r}", pos=start)
        if kind == "word":
            if value in ("true", "false", "f"):
                kind = value
            else:
                raise ParseError(f"unknown identifier {value!r}", pos=start)
        toks.append((kind, value, start))
    toks.append(("end", "", len(text) + 1))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self) -> tuple[str, str, int]:
        return self.toks[self.i]

    def take(self, kind: str, value: str | None = None) -> tuple[str, str, int]:
        tok = self.peek()
        if tok[0] != kind or (value is not None and tok[1] != value):
            want = value or kind
            got = tok[1] or "end of input"
            raise ParseError(f"expected {want!r}, found {got!r}", pos=tok[2])
        self.i += 1
        return tok

    def accept(self, kind: str, value: str | None = None) -> bool:
        tok = self.peek()
        if tok[0] == kind and (value is None or tok[1] == value):
            self.i += 1
            return True
        return False

    def formula(self) -> Formula:
        out = self.conjunction()
        while self.accept("op", "|"):
            out = Or(out, self.conjunction())
        return out

    def conjunction(self) -> Formula:
        out = self.unary()
        while self.accept("op", "&"):
            out = And(out, self.unary())
        return out

    def unary(self) -> Formula:
        if self.accept("op", "!"):
            return Not(self.unary())
        if self.accept("op", "("):
            inner = self.formula()
            self.take("op", ")")
            return inner
        return self.atom()

    def atom(self) -> Formula:
        kind, value, pos = self.peek()
        if kind == "true":
            self.i += 1
            return TRUE
        if kind == "false":
            self.i += 1
            return FALSE
        if kind == "color":
            self.i += 1
            m = int(value[1:])
            if m < 1:
                raise ParseError("color indices start at 1", pos=pos)
            self.take("op", "(")
            t = self.term()
            self.take("op", ")")
            return Color(m, t)
        left = self.term()
        kind, value, pos = self.peek()
        if kind == "op" and value in ("=", "!="):
            self.i += 1
            right = self.term()
            return Eq(left, right) if value == "=" else Neq(left, right)
        raise ParseError(f"expected '=' or '!=', found {value or 'end of input'!r}", pos=pos)

    def term(self) -> FTerm:
        kind, value, pos = self.peek()
        if kind == "var":
            self.i += 1
            idx = int(value[1:])
            if idx < 1:
                raise ParseError("variable indices start at 1", pos=pos)
            return FTerm(idx, 0)
        if kind in ("f", "iter"):
            self.i += 1
            a = 1 if kind == "f" else int(value[2:])
            self.take("op", "(")
            inner = self.term()
            self.take("op", ")")
            return inner.shifted(a)
        raise ParseError(f"expected a term, found {value or 'end of input'!r}", pos=pos)


def parse_formula(text: str) -> Formula:
    p = _Parser(text)
    phi = p.formula()
    kind, value, pos = p.peek()
    if kind != "end":
        raise ParseError(f"unexpected {value!r}", pos=pos)
    return phi


def parse_battery(text: str) -> list[tuple[str, Formula]]:
    """One formula per line; ``#`` starts a comment."""
    out = []
    for no, raw in enumerate(text.splitlines(), start=1):
        s = raw.split("#", 1)[0].strip()
        if not s:
            continue
        try:
            out.append((s, parse_formula(s)))
        except ParseError as exc:
            raise ParseError(f"formula {s!r}: {exc}", line=no) from None
    return out


def format_formula(phi: Formula) -> str:
    if isinstance(phi, Eq):
        return f"{phi.left}={phi.right}"
    if isinstance(phi, Neq):
        return f"{phi.left}!={phi.right}"
    if isinstance(phi, Color):
        return f"M{phi.m}({phi.term})"
    if isinstance(phi, Top):
        return "true"
    if isinstance(phi, Bottom):
        return "false"
    if isinstance(phi, Not):
        inner = format_formula(phi.arg)
        return "!" + (f"({inner})" if isinstance(phi.arg, (And, Or)) else inner)
    left, right = format_formula(phi.left), format_formula(phi.right)
    if isinstance(phi, And):
        if isinstance(phi.left, Or):
            left = f"({left})"
        if isinstance(phi.right, (And, Or)):
            right = f"({right})"
        return f"{left} & {right}"
    if isinstance(phi.right, Or):
        right = f"({right})"
    return f"{left} | {right}"


# ---------------------------------------------------------------------------
# Pointwise semantics
# ---------------------------------------------------------------------------

def _lookup(assignment, i: int):
    try:
        if isinstance(assignment, Mapping):
            return assignment[i]
        if i < 1:
            raise IndexError
        return assignment[i - 1]
    except (KeyError, IndexError):
        raise ValueError(f"variable x{i} is not assigned") from None


def evaluate(phi: Formula, F, assignment: Mapping[int, object] | Sequence[object]) -> bool:
    """Satisfaction of ``phi`` in ``F`` under ``assignment``.

    ``F`` may be any structure exposing ``iterate(v, a)`` and
    ``has_color(m, v)``.  A sequence assignment binds ``x1`` to its first
    entry.
    """
    for i in free_vars(phi):
        _lookup(assignment, i)
    cache: dict[FTerm, object] = {}

    def value(t: FTerm):
        if t not in cache:
            cache[t] = F.iterate(_lookup(assignment, t.var), t.iterate)
        return cache[t]

    def ev(g: Formula) -> bool:
        if isinstance(g, Eq):
            return value(g.left) == value(g.right)
        if isinstance(g, Neq):
            return value(g.left) != value(g.right)
        if isinstance(g, Color):
            return F.has_color(g.m, value(g.term))
        if isinstance(g, Top):
            return True
        if isinstance(g, Bottom):
            return False
        if isinstance(g, Not):
            return not ev(g.arg)
        if isinstance(g, And):
            return ev(g.left) and ev(g.right)
        return ev(g.left) or ev(g.right)

    return ev(phi)


# ---------------------------------------------------------------------------
# QF-definable functions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Identity:
    pass


@dataclass(frozen=True)
class BaseF:
    pass


@dataclass(frozen=True)
class Compose:
    """``outer(inner(v))``."""

    outer: "QFDefinableFn"
    inner: "QFDefinableFn"


@dataclass(frozen=True)
class Switch:
    """``then(v)`` where ``cond(v)`` holds, ``other(v)`` elsewhere."""

    cond: Formula
    then: "QFDefinableFn"
    other: "QFDefinableFn"

    def __post_init__(self) -> None:
        if len(free_vars(self.cond)) != 1:
            raise ValueError("a switch condition must have exactly one free variable")

    @property
    def var(self) -> int:
        return next(iter(free_vars(self.cond)))


QFDefinableFn = Union[Identity, BaseF, Compose, Switch]


def eval_definable(g: QFDefinableFn, F, v):
    if isinstance(g, Identity):
        return v
    if isinstance(g, BaseF):
        return F.iterate(v, 1)
    if isinstance(g, Compose):
        return eval_definable(g.outer, F, eval_definable(g.inner, F, v))
    if evaluate(g.cond, F, {g.var: v}):
        return eval_definable(g.then, F, v)
    return eval_definable(g.other, F, v)


def _retarget(phi: Formula, var: int, shift: int) -> Formula:
    """Move every term of a one-variable formula onto ``x_var``, shifted."""
    return map_terms(phi, lambda t: FTerm(var, t.iterate + shift))


def definable_cases(g: QFDefinableFn) -> list[tuple[Formula, int]]:
    """Guarded iterate form of ``g``.

    Returns pairs ``(guard, b)`` with guards over ``x1`` that are mutually
    exclusive and exhaustive, such that ``g(v) = f^b(v)`` wherever the guard
    holds at ``v``.
    """
    if isinstance(g, Identity):
        return [(TRUE, 0)]
    if isinstance(g, BaseF):
        return [(TRUE, 1)]
    if isinstance(g, Compose):
        out = []
        for gi, bi in definable_cases(g.inner):
            for go, bo in definable_cases(g.outer):
                guard = conj(gi, _retarget(go, 1, bi))
                if not isinstance(guard, Bottom):
                    out.append((guard, bi + bo))
        return out
    cond = _retarget(g.cond, 1, 0)
    out = [(conj(cond, gt), b) for gt, b in definable_cases(g.then)]
    out += [(conj(neg(cond), gt), b) for gt, b in definable_cases(g.other)]
    return [(guard, b) for guard, b in out if not isinstance(guard, Bottom)]


def cycle_shift(k: int) -> Switch:
    """``zeta_k``: one step along ``f`` on ``k``-cyclic elements, identity elsewhere."""
    if k < 1:
        raise ValueError("cycle shifts are defined for k >= 1")
    x = FTerm(1, 0)
    cond = conj(Eq(FTerm(1, k), x), *(Neq(FTerm(1, i), x) for i in range(1, k)))
    return Switch(cond, BaseF(), Identity())


@dataclass(frozen=True)
class CycleShiftGroup:
    """The group generated by ``zeta_1..zeta_q``.

    Elements are exponent vectors ``(e_1, ..., e_q)`` with ``0 <= e_k < k``;
    the generators commute and act on disjoint sets, so the group is the
    direct product of cyclic groups of orders ``1..q``.
    """

    q: int

    def __post_init__(self) -> None:
        if self.q < 1:
            raise ValueError("q must be >= 1")

    @property
    def order(self) -> int:
        return math.factorial(self.q)

    @property
    def identity(self) -> tuple[int, ...]:
        return (0,) * self.q

    def elements(self) -> Iterator[tuple[int, ...]]:
        return itertools.product(*(range(k) for k in range(1, self.q + 1)))

    def generator(self, k: int) -> tuple[int, ...]:
        e = [0] * self.q
        e[k - 1] = 1 % k
        return tuple(e)

    def compose(self, e: Sequence[int], d: Sequence[int]) -> tuple[int, ...]:
        return tuple((a + b) % k for k, a, b in zip(range(1, self.q + 1), e, d))

    def inverse(self, e: Sequence[int]) -> tuple[int, ...]:
        return tuple(-a % k for k, a in zip(range(1, self.q + 1), e))

    def as_function(self, e: Sequence[int]) -> QFDefinableFn:
        """The element as a composition of cycle shifts."""
        out: QFDefinableFn = Identity()
        for k, a in zip(range(1, self.q + 1), e):
            for _ in range(a):
                out = cycle_shift(k) if isinstance(out, Identity) else Compose(cycle_shift(k), out)
        return out

    def act(self, e: Sequence[int], F, v: int) -> int:
        k = F.cycle_length.get(v)
        if k is None or k > self.q:
            return v
        return F.iterate(v, e[k - 1])


def group_elements(q: int) -> CycleShiftGroup:
    return CycleShiftGroup(q)


# ---------------------------------------------------------------------------
# Substitution
# ---------------------------------------------------------------------------

def substitute(phi: Formula, gs: Sequence[QFDefinableFn]) -> Formula:
    """A formula equivalent to ``phi(g_1(x_1), ..., g_p(x_p))``.

    Each ``g_i`` is expanded into guarded iterate cases; the result is the
    disjunction, over all case combinations of the variables occurring in
    ``phi``, of the guards conjoined with ``phi`` whose terms are shifted
    accordingly.
    """
    vs = sorted(free_vars(phi))
    if len(gs) < arity(phi):
        raise ValueError(f"need {arity(phi)} definable functions, got {len(gs)}")
    per_var = [[(_retarget(guard, i, 0), b) for guard, b in definable_cases(gs[i - 1])] for i in vs]
    disjuncts = []
    for combo in itertools.product(*per_var):
        shifts = {i: b for i, (_, b) in zip(vs, combo)}
        body = map_terms(phi, lambda t: t.shifted(shifts[t.var]))
        disjuncts.append(conj(*(guard for guard, _ in combo), body))
    return disj(*disjuncts)


def xi_formula(p: int, q: int) -> Formula:
    """``AND_{i != j, 0 <= a <= q} f^a(x_i) != x_j``: no variable hits another's orbit."""
    return conj(*(Neq(FTerm(i, a), FTerm(j, 0))
                  for i in range(1, p + 1) for j in range(1, p + 1) if i != j
                  for a in range(q + 1)))
