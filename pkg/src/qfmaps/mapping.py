"""Finite colored mappings and their structural analysis.

A mapping on ``n`` elements is a total function ``f`` on ``0..n-1`` together
with ``c`` unary color predicates ``M_1..M_c`` (1-based, as in formulas).
A :class:`WeightedMapping` additionally carries an exact probability weight
per element.  Everything here is immutable and works on exact ``Fraction``
values.
"""

from __future__ import annotations

import math
import random
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Union

from .errors import ParseError

__all__ = [
    "ColoredMapping",
    "WeightedMapping",
    "PreimageProfile",
    "FMTPReport",
    "parse_mapping",
    "serialize_mapping",
    "read_mapping",
    "uniform",
    "apply_iterate",
    "cycles",
    "cyclic_elements",
    "cyclic_set",
    "gaifman_distance",
    "gaifman_distance_bfs",
    "ball",
    "restrict",
    "preimage_partition",
    "check_fmtp",
    "check_image_monotone",
    "identity_mapping",
    "cycle_mapping",
    "star_mapping",
    "two_cycles",
    "disjoint_union",
    "random_mapping",
    "random_weights",
]


@dataclass(frozen=True)
class ColoredMapping:
    f: tuple[int, ...]
    colors: tuple[frozenset[int], ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "f", tuple(int(x) for x in self.f))
        object.__setattr__(self, "colors", tuple(frozenset(c) for c in self.colors))
        n = len(self.f)
        if n < 1:
            raise ValueError("a mapping needs at least one element")
        for v, w in enumerate(self.f):
            if not 0 <= w < n:
                raise ValueError(f"f({v})={w} out of range [0, {n})")
        for m, cs in enumerate(self.colors, start=1):
            bad = [v for v in cs if not 0 <= v < n]
            if bad:
                raise ValueError(f"color M{m} contains out-of-range element {bad[0]}")

    @property
    def n(self) -> int:
        return len(self.f)

    @property
    def base(self) -> ColoredMapping:
        return self

    @property
    def num_colors(self) -> int:
        return len(self.colors)

    def iterate(self, v: int, a: int) -> int:
        f = self.f
        for _ in range(a):
            v = f[v]
        return v

    def has_color(self, m: int, v: int) -> bool:
        """Membership of ``v`` in ``M_m``; colors beyond ``num_colors`` are empty."""
        if m < 1:
            raise ValueError("color indices start at 1")
        return m <= len(self.colors) and v in self.colors[m - 1]

    def color_mask(self, v: int) -> int:
        return sum(1 << i for i, cs in enumerate(self.colors) if v in cs)

    @cached_property
    def preimages(self) -> tuple[tuple[int, ...], ...]:
        pre: list[list[int]] = [[] for _ in range(self.n)]
        for v, w in enumerate(self.f):
            pre[w].append(v)
        return tuple(tuple(p) for p in pre)

    @cached_property
    def cycle_length(self) -> dict[int, int]:
        """Map from each cyclic element to the length of its cycle."""
        return {v: len(cyc) for cyc in cycles(self) for v in cyc}

    def draw(self, rng: random.Random) -> int:
        return rng.randrange(self.n)


@dataclass(frozen=True)
class WeightedMapping:
    base: ColoredMapping
    weights: tuple[Fraction, ...]
    labels: tuple | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        ws = tuple(Fraction(w) for w in self.weights)
        object.__setattr__(self, "weights", ws)
        if len(ws) != self.base.n:
            raise ValueError(f"{len(ws)} weights for {self.base.n} elements")
        if any(w < 0 for w in ws):
            raise ValueError("weights must be non-negative")
        total = sum(ws, Fraction(0))
        if total != 1:
            raise ValueError(f"weights sum to {total}, not 1")

    @property
    def n(self) -> int:
        return self.base.n

    @property
    def f(self) -> tuple[int, ...]:
        return self.base.f

    @property
    def colors(self) -> tuple[frozenset[int], ...]:
        return self.base.colors

    @property
    def num_colors(self) -> int:
        return self.base.num_colors

    @property
    def preimages(self) -> tuple[tuple[int, ...], ...]:
        return self.base.preimages

    @property
    def cycle_length(self) -> dict[int, int]:
        return self.base.cycle_length

    def iterate(self, v: int, a: int) -> int:
        return self.base.iterate(v, a)

    def has_color(self, m: int, v: int) -> bool:
        return self.base.has_color(m, v)

    def color_mask(self, v: int) -> int:
        return self.base.color_mask(v)

    def measure(self, xs: Iterable[int]) -> Fraction:
        return sum((self.weights[v] for v in set(xs)), Fraction(0))

    @cached_property
    def _cumulative(self) -> list[float]:
        acc, out = 0.0, []
        for w in self.weights:
            acc += float(w)
            out.append(acc)
        return out

    def draw(self, rng: random.Random) -> int:
        return rng.choices(range(self.n), cum_weights=self._cumulative)[0]


AnyMapping = Union[ColoredMapping, WeightedMapping]


def uniform(F: AnyMapping) -> WeightedMapping:
    if isinstance(F, WeightedMapping):
        F = F.base
    w = Fraction(1, F.n)
    return WeightedMapping(F, (w,) * F.n)


def _weights(F: AnyMapping) -> tuple[Fraction, ...]:
    return F.weights if isinstance(F, WeightedMapping) else uniform(F).weights


# ---------------------------------------------------------------------------
# I/O
# ---------------------------------------------------------------------------

def _strip(line: str) -> str:
    return line.split("#", 1)[0].strip()


def parse_mapping(text: str) -> AnyMapping:
    """Parse the line-oriented mapping format.

    Line 1 is ``n [c]``.  Each following line is ``f(i) [weight] [mask]``.
    With ``c == 0`` a second token is the weight; with ``c > 0`` two tokens
    mean ``f mask`` and three mean ``f weight mask``.  Bit ``m-1`` of the
    decimal mask is membership in ``M_m``.
    """
    rows = [(no, _strip(raw)) for no, raw in enumerate(text.splitlines(), start=1)]
    rows = [(no, s) for no, s in rows if s]
    if not rows:
        raise ParseError("empty mapping file", line=1)
    head_no, head = rows[0]
    parts = head.split()
    try:
        n = int(parts[0])
        c = int(parts[1]) if len(parts) > 1 else 0
    except ValueError:
        raise ParseError(f"bad header {head!r}; expected 'n [c]'", line=head_no) from None
    if len(parts) > 2 or n < 1 or c < 0:
        raise ParseError(f"bad header {head!r}; expected 'n [c]' with n >= 1", line=head_no)
    body = rows[1:]
    if len(body) != n:
        raise ParseError(f"expected {n} element lines, found {len(body)}",
                         line=body[-1][0] if body else head_no)

    f: list[int] = []
    weights: list[Fraction | None] = []
    colors: list[set[int]] = [set() for _ in range(c)]
    for v, (no, s) in enumerate(body):
        toks = s.split()
        w_tok = mask_tok = None
        if c == 0 and len(toks) in (1, 2):
            w_tok = toks[1] if len(toks) == 2 else None
        elif c > 0 and len(toks) in (1, 2, 3):
            if len(toks) == 2:
                mask_tok = toks[1]
            elif len(toks) == 3:
                w_tok, mask_tok = toks[1], toks[2]
        else:
            raise ParseError(f"unexpected token count in {s!r}", line=no)
        try:
            target = int(toks[0])
        except ValueError:
            raise ParseError(f"bad image {toks[0]!r}", line=no) from None
        if not 0 <= target < n:
            raise ParseError(f"f({v})={target} out of range [0, {n})", line=no)
        f.append(target)
        if w_tok is None:
            weights.append(None)
        else:
            try:
                weights.append(Fraction(w_tok))
            except (ValueError, ZeroDivisionError):
                raise ParseError(f"bad weight {w_tok!r}", line=no) from None
        if mask_tok is not None:
            try:
                mask = int(mask_tok)
            except ValueError:
                raise ParseError(f"bad color mask {mask_tok!r}", line=no) from None
            if not 0 <= mask < (1 << c):
                raise ParseError(f"color mask {mask} exceeds {c} colors", line=no)
            for i in range(c):
                if mask >> i & 1:
                    colors[i].add(v)

    base = ColoredMapping(tuple(f), tuple(frozenset(s) for s in colors))
    present = [w is not None for w in weights]
    if not any(present):
        return base
    if not all(present):
        missing = body[present.index(False)][0]
        raise ParseError("weight column must be present on every line or none", line=missing)
    if any(w < 0 for w in weights):  # type: ignore[operator]
        raise ParseError("negative weight", line=body[[w < 0 for w in weights].index(True)][0])  # type: ignore[operator]
    total = sum(weights, Fraction(0))  # type: ignore[arg-type]
    if total != 1:
        raise ParseError(f"weights sum to {total}, not 1", line=body[-1][0])
    return WeightedMapping(base, tuple(weights))  # type: ignore[arg-type]


def serialize_mapping(F: AnyMapping) -> str:
    c = F.num_colors
    lines = [f"{F.n} {c}" if c else f"{F.n}"]
    weighted = isinstance(F, WeightedMapping)
    for v in range(F.n):
        toks = [str(F.f[v])]
        if weighted:
            toks.append(str(F.weights[v]))
        if c:
            toks.append(str(F.color_mask(v)))
        lines.append(" ".join(toks))
    return "\n".join(lines) + "\n"


def read_mapping(path) -> AnyMapping:
    with open(path, encoding="utf-8") as fh:
        return parse_mapping(fh.read())


# ---------------------------------------------------------------------------
# Iterates and cycles
# ---------------------------------------------------------------------------

def apply_iterate(F: AnyMapping, v: int, a: int) -> int:
    if a < 0:
        raise ValueError("iterate count must be non-negative")
    return F.iterate(v, a)


def cycles(F: AnyMapping) -> list[tuple[int, ...]]:
    """All cycles of ``f``, each listed in ``f``-order from its least element."""
    f = F.f
    state = [0] * len(f)  # 0 unseen, 1 on current walk, 2 done
    out = []
    for start in range(len(f)):
        if state[start]:
            continue
        path = []
        v = start
        while state[v] == 0:
            state[v] = 1
            path.append(v)
            v = f[v]
        if state[v] == 1:
            cyc = path[path.index(v):]
            i = cyc.index(min(cyc))
            out.append(tuple(cyc[i:] + cyc[:i]))
        for u in path:
            state[u] = 2
    out.sort()
    return out


def cyclic_elements(F: AnyMapping, k: int) -> frozenset[int]:
    """The ``k``-cyclic elements: ``f^k(x) = x`` with no earlier return."""
    if k < 1:
        raise ValueError("cycle length must be >= 1")
    return frozenset(v for v, length in F.cycle_length.items() if length == k)


def cyclic_set(F: AnyMapping) -> frozenset[int]:
    return frozenset(F.cycle_length)


# ---------------------------------------------------------------------------
# Distance and balls
# ---------------------------------------------------------------------------

def _orbit_positions(F: AnyMapping, u: int) -> dict[int, int]:
    pos: dict[int, int] = {}
    a = 0
    while u not in pos:
        pos[u] = a
        u = F.f[u]
        a += 1
    return pos


def gaifman_distance(F: AnyMapping, u: int, v: int) -> float | int:
    """``min{a + b : f^a(u) = f^b(v)}``, or ``math.inf`` across components."""
    pu = _orbit_positions(F, u)
    pv = _orbit_positions(F, v)
    common = pu.keys() & pv.keys()
    if not common:
        return math.inf
    return min(pu[w] + pv[w] for w in common)


def _bfs(F: AnyMapping, v: int, radius: float) -> dict[int, int]:
    dist = {v: 0}
    queue = deque([v])
    pre = F.preimages
    while queue:
        u = queue.popleft()
        d = dist[u]
        if d >= radius:
            continue
        for w in (F.f[u], *pre[u]):
            if w not in dist:
                dist[w] = d + 1
                queue.append(w)
    return dist


def gaifman_distance_bfs(F: AnyMapping, u: int, v: int) -> float | int:
    """Graph distance in the undirected Gaifman graph, by breadth-first search."""
    return _bfs(F, u, math.inf).get(v, math.inf)


def ball(F: AnyMapping, v: int, r: int) -> frozenset[int]:
    return frozenset(_bfs(F, v, r))


# ---------------------------------------------------------------------------
# Restriction, preimage classes, mass transport
# ---------------------------------------------------------------------------

def restrict(F: AnyMapping, X: Iterable[int]) -> WeightedMapping:
    """Restrict to ``X``; elements whose image leaves ``X`` become fixed.

    The result is re-indexed by the sorted order of ``X``; its ``labels``
    give the original element of each new index.
    """
    xs = sorted(set(X))
    if not xs:
        raise ValueError("cannot restrict to the empty set")
    w = _weights(F)
    mass = sum((w[v] for v in xs), Fraction(0))
    if mass == 0:
        raise ValueError("cannot restrict to a set of weight zero")
    index = {v: i for i, v in enumerate(xs)}
    f = tuple(index.get(F.f[v], i) for i, v in enumerate(xs))
    colors = tuple(frozenset(index[v] for v in cs if v in index) for cs in F.colors)
    return WeightedMapping(ColoredMapping(f, colors), tuple(w[v] / mass for v in xs), labels=tuple(xs))


@dataclass(frozen=True)
class PreimageProfile:
    classes: dict[int, frozenset[int]]


def preimage_partition(F: AnyMapping) -> PreimageProfile:
    classes: dict[int, set[int]] = {}
    for v, pre in enumerate(F.preimages):
        classes.setdefault(len(pre), set()).add(v)
    return PreimageProfile({i: frozenset(classes[i]) for i in sorted(classes)})


@dataclass(frozen=True)
class FMTPReport:
    holds: bool
    lhs: Fraction
    rhs: Fraction

    def __bool__(self) -> bool:
        return self.holds


def check_fmtp(F: AnyMapping, A: Iterable[int], B: Iterable[int]) -> FMTPReport:
    """Compare ``nu(A ∩ f^-1(B))`` with ``sum_{y in B} |f^-1(y) ∩ A| nu(y)``."""
    w = _weights(F)
    A, B = set(A), set(B)
    lhs = sum((w[x] for x in A if F.f[x] in B), Fraction(0))
    rhs = Fraction(0)
    for y in B:
        rhs += sum(1 for x in F.preimages[y] if x in A) * w[y]
    return FMTPReport(lhs == rhs, lhs, rhs)


def check_image_monotone(F: AnyMapping, A: Iterable[int]) -> bool:
    w = _weights(F)
    A = set(A)
    image = {F.f[x] for x in A}
    return sum((w[x] for x in A), Fraction(0)) >= sum((w[y] for y in image), Fraction(0))


# ---------------------------------------------------------------------------
# Constructors
# ---------------------------------------------------------------------------

def identity_mapping(n: int) -> ColoredMapping:
    return ColoredMapping(tuple(range(n)))


def cycle_mapping(k: int) -> ColoredMapping:
    return ColoredMapping(tuple((i + 1) % k for i in range(k)))


def star_mapping(n: int) -> ColoredMapping:
    """Every element maps to 0."""
    return ColoredMapping((0,) * n)


def two_cycles(m: int) -> ColoredMapping:
    """Disjoint union of ``m`` two-cycles."""
    return ColoredMapping(tuple(i ^ 1 for i in range(2 * m)))


def disjoint_union(*maps: ColoredMapping) -> ColoredMapping:
    f: list[int] = []
    c = max(F.num_colors for F in maps)
    colors: list[set[int]] = [set() for _ in range(c)]
    for F in maps:
        off = len(f)
        f.extend(off + w for w in F.f)
        for i, cs in enumerate(F.colors):
            colors[i].update(off + v for v in cs)
    return ColoredMapping(tuple(f), tuple(frozenset(s) for s in colors))


def random_mapping(n: int, rng: random.Random, num_colors: int = 0,
                   color_p: float = 0.5) -> ColoredMapping:
    f = tuple(rng.randrange(n) for _ in range(n))
    colors = tuple(frozenset(v for v in range(n) if rng.random() < color_p)
                   for _ in range(num_colors))
    return ColoredMapping(f, colors)


def random_weights(n: int, rng: random.Random, scale: int = 10) -> tuple[Fraction, ...]:
    """Random exact weights summing to 1 (some may be zero)."""
    raw = [rng.randrange(scale + 1) for _ in range(n)]
    if not any(raw):
        raw[rng.randrange(n)] = 1
    total = sum(raw)
    return tuple(Fraction(x, total) for x in raw)
