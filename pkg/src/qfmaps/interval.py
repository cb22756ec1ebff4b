"""Piecewise-affine self-maps of ``[0, 1)`` with rational data.

These serve as concrete atomless Borel mappings under Lebesgue measure.
:func:`refine` splits ``[0, 1)`` into open cells on which every iterate up
to a given depth is affine and every iterate lands in a fixed color region;
cell endpoints are kept as separate point cells so that pointwise
evaluation through the decomposition stays exact.  Densities are computed
over products of open cells, counting an atom true only when it holds on a
set of positive measure.
"""

from __future__ import annotations

import bisect
import itertools
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .errors import ParseError, ResourceLimitError
from .logic import (And, Bottom, Color, Eq, Formula, Neq, Not, Or, Top, arity,
                    depth, parse_formula)

__all__ = [
    "Piece", "IntervalMapping", "Cell", "PointCell", "CellDecomposition",
    "CyclicPart", "CyclePreservationReport",
    "parse_interval", "serialize_interval", "read_interval",
    "eval_point", "refine", "density_exact_interval", "cyclic_part",
    "check_cycle_preservation", "sample", "DEFAULT_SAMPLE_BITS",
    "rotation_half", "halving_map", "constant_map", "doubling_halving",
]

DEFAULT_SAMPLE_BITS = 32
Affine = tuple[Fraction, Fraction]
_ID: Affine = (Fraction(1), Fraction(0))


@dataclass(frozen=True)
class Piece:
    lo: Fraction
    hi: Fraction
    slope: Fraction
    intercept: Fraction

    def __call__(self, x: Fraction) -> Fraction:
        return self.slope * x + self.intercept


def _merge_intervals(ivs: Iterable[tuple[Fraction, Fraction]]) -> tuple[tuple[Fraction, Fraction], ...]:
    out: list[list[Fraction]] = []
    for lo, hi in sorted(ivs):
        if lo >= hi:
            continue
        if out and lo <= out[-1][1]:
            out[-1][1] = max(out[-1][1], hi)
        else:
            out.append([lo, hi])
    return tuple((lo, hi) for lo, hi in out)


@dataclass(frozen=True)
class IntervalMapping:
    pieces: tuple[Piece, ...]
    colors: tuple[tuple[tuple[Fraction, Fraction], ...], ...] = ()

    def __post_init__(self) -> None:
        pieces = tuple(Piece(*(Fraction(v) for v in (p.lo, p.hi, p.slope, p.intercept)))
                       if isinstance(p, Piece) else Piece(*(Fraction(v) for v in p))
                       for p in self.pieces)
        pieces = tuple(sorted(pieces, key=lambda p: p.lo))
        object.__setattr__(self, "pieces", pieces)
        object.__setattr__(self, "colors", tuple(
            _merge_intervals((Fraction(lo), Fraction(hi)) for lo, hi in ivs) for ivs in self.colors))
        if not pieces:
            raise ValueError("need at least one piece")
        if pieces[0].lo != 0 or pieces[-1].hi != 1:
            raise ValueError("pieces must cover [0, 1)")
        for i, p in enumerate(pieces):
            if p.lo >= p.hi:
                raise ValueError(f"piece {i} is empty: [{p.lo}, {p.hi})")
            if i and pieces[i - 1].hi != p.lo:
                raise ValueError(f"pieces {i - 1} and {i} leave a gap or overlap at {p.lo}")
            start, end = p(p.lo), p(p.hi)
            if not 0 <= start < 1:
                raise ValueError(f"piece {i} maps {p.lo} to {start}, outside [0, 1)")
            if (p.slope > 0 and end > 1) or (p.slope < 0 and end < 0):
                raise ValueError(f"piece {i} maps [{p.lo}, {p.hi}) outside [0, 1)")
        for m, ivs in enumerate(self.colors, start=1):
            for lo, hi in ivs:
                if lo < 0 or hi > 1:
                    raise ValueError(f"color M{m} interval [{lo}, {hi}) leaves [0, 1)")

    @classmethod
    def from_pieces(cls, pieces: Iterable[Sequence], colors: Iterable[Iterable[Sequence]] = ()):
        return cls(tuple(Piece(*(Fraction(v) for v in p)) for p in pieces),
                   tuple(tuple((Fraction(lo), Fraction(hi)) for lo, hi in ivs) for ivs in colors))

    @property
    def num_colors(self) -> int:
        return len(self.colors)

    @property
    def atomless(self) -> bool:
        """Lebesgue measure has no atoms; true for every instance."""
        return True

    def piece_index(self, x: Fraction) -> int:
        if not 0 <= x < 1:
            raise ValueError(f"{x} is outside [0, 1)")
        return bisect.bisect_right([p.lo for p in self.pieces], x) - 1

    def apply(self, x: Fraction) -> Fraction:
        return self.pieces[self.piece_index(x)](x)

    def iterate(self, x: Fraction, a: int) -> Fraction:
        for _ in range(a):
            x = self.apply(x)
        return x

    def has_color(self, m: int, x: Fraction) -> bool:
        if m < 1:
            raise ValueError("color indices start at 1")
        if m > len(self.colors):
            return False
        return any(lo <= x < hi for lo, hi in self.colors[m - 1])

    def color_mask(self, x: Fraction) -> int:
        return sum(1 << i for i in range(len(self.colors)) if self.has_color(i + 1, x))

    def draw(self, rng: random.Random) -> Fraction:
        return sample(self, rng)

    def breakpoints(self) -> list[Fraction]:
        pts = {Fraction(0)} | {p.lo for p in self.pieces}
        for ivs in self.colors:
            for lo, hi in ivs:
                pts.update(t for t in (lo, hi) if 0 <= t < 1)
        return sorted(pts)


# ---------------------------------------------------------------------------
# I/O
# ---------------------------------------------------------------------------

def _frac(tok: str, line: int) -> Fraction:
    try:
        return Fraction(tok)
    except (ValueError, ZeroDivisionError):
        raise ParseError(f"bad rational {tok!r}", line=line) from None


def parse_interval(text: str) -> IntervalMapping:
    """Header ``pieces [colors]``; piece lines ``lo hi slope intercept``;
    color lines ``M<i>: lo hi, lo hi, ...``."""
    rows = [(no, raw.split("#", 1)[0].strip()) for no, raw in enumerate(text.splitlines(), start=1)]
    rows = [(no, s) for no, s in rows if s]
    if not rows:
        raise ParseError("empty interval mapping file", line=1)
    head_no, head = rows[0]
    parts = head.split()
    try:
        k = int(parts[0])
        c = int(parts[1]) if len(parts) > 1 else 0
    except ValueError:
        raise ParseError(f"bad header {head!r}", line=head_no) from None
    if len(parts) > 2 or k < 1 or c < 0:
        raise ParseError(f"bad header {head!r}", line=head_no)
    if len(rows) != 1 + k + c:
        raise ParseError(f"expected {k} piece lines and {c} color lines, found {len(rows) - 1} lines",
                         line=rows[-1][0])
    pieces = []
    for no, s in rows[1:1 + k]:
        toks = s.split()
        if len(toks) != 4:
            raise ParseError("a piece line needs 'lo hi slope intercept'", line=no)
        pieces.append(Piece(*(_frac(t, no) for t in toks)))
    colors: list[tuple | None] = [None] * c
    for no, s in rows[1 + k:]:
        name, sep, rest = s.partition(":")
        name = name.strip()
        if not sep or not name.startswith("M") or not name[1:].isdigit():
            raise ParseError("a color line looks like 'M1: lo hi, lo hi'", line=no)
        m = int(name[1:])
        if not 1 <= m <= c or colors[m - 1] is not None:
            raise ParseError(f"unexpected or repeated color {name}", line=no)
        ivs = []
        for chunk in rest.split(","):
            toks = chunk.split()
            if not toks:
                continue
            if len(toks) != 2:
                raise ParseError(f"bad color interval {chunk.strip()!r}", line=no)
            ivs.append((_frac(toks[0], no), _frac(toks[1], no)))
        colors[m - 1] = tuple(ivs)
    try:
        return IntervalMapping(tuple(pieces), tuple(cs or () for cs in colors))
    except ValueError as exc:
        raise ParseError(str(exc), line=head_no) from None


def serialize_interval(L: IntervalMapping) -> str:
    lines = [f"{len(L.pieces)} {len(L.colors)}" if L.colors else f"{len(L.pieces)}"]
    for p in L.pieces:
        lines.append(f"{p.lo} {p.hi} {p.slope} {p.intercept}")
    for m, ivs in enumerate(L.colors, start=1):
        lines.append(f"M{m}: " + ", ".join(f"{lo} {hi}" for lo, hi in ivs))
    return "\n".join(lines) + "\n"


def read_interval(path) -> IntervalMapping:
    with open(path, encoding="utf-8") as fh:
        return parse_interval(fh.read())


# ---------------------------------------------------------------------------
# Evaluation and refinement
# ---------------------------------------------------------------------------

def eval_point(L: IntervalMapping, x: Fraction, a: int) -> Fraction:
    x = Fraction(x)
    if not 0 <= x < 1:
        raise ValueError(f"{x} is outside [0, 1)")
    return L.iterate(x, a)


@dataclass(frozen=True)
class Cell:
    """Open interval ``(lo, hi)`` with ``f^a(x) = forms[a][0] * x + forms[a][1]``."""

    lo: Fraction
    hi: Fraction
    forms: tuple[Affine, ...]
    masks: tuple[int, ...]  # color mask of f^a(x), per a

    @property
    def length(self) -> Fraction:
        return self.hi - self.lo


@dataclass(frozen=True)
class PointCell:
    x: Fraction
    values: tuple[Fraction, ...]
    masks: tuple[int, ...]


@dataclass(frozen=True)
class CellDecomposition:
    depth: int
    cells: tuple[Cell, ...]
    points: tuple[PointCell, ...]

    @property
    def breakpoints(self) -> tuple[Fraction, ...]:
        return tuple(p.x for p in self.points)

    def locate(self, x: Fraction) -> Cell | PointCell:
        i = bisect.bisect_right(self.breakpoints, x) - 1
        pt = self.points[i]
        if pt.x == x:
            return pt
        return self.cells[i]

    def eval(self, x: Fraction, a: int) -> Fraction:
        where = self.locate(x)
        if isinstance(where, PointCell):
            return where.values[a]
        alpha, beta = where.forms[a]
        return alpha * x + beta


def _compose(p: Piece, g: Affine) -> Affine:
    return (p.slope * g[0], p.slope * g[1] + p.intercept)


def _apply(g: Affine, x: Fraction) -> Fraction:
    return g[0] * x + g[1]


def refine(L: IntervalMapping, q: int, *, max_cells: int = 100_000) -> CellDecomposition:
    """Cells on which ``f^0..f^q`` are affine and all iterate colors constant."""
    if q < 0:
        raise ValueError("depth must be non-negative")
    base = L.breakpoints()
    bounds = base + [Fraction(1)]
    cells: list[tuple[Fraction, Fraction, list[Affine]]] = [
        (lo, hi, [_ID]) for lo, hi in zip(bounds, bounds[1:])]

    for _ in range(q):
        nxt = []
        for lo, hi, forms in cells:
            g = forms[-1]
            y = g[1] if g[0] == 0 else _apply(g, (lo + hi) / 2)
            h = _compose(L.pieces[L.piece_index(y)], g)
            cuts = []
            if h[0] != 0:
                for t in base:
                    x = (t - h[1]) / h[0]
                    if lo < x < hi:
                        cuts.append(x)
            edges = [lo] + sorted(set(cuts)) + [hi]
            for a, b in zip(edges, edges[1:]):
                nxt.append((a, b, forms + [h]))
        if len(nxt) > max_cells:
            raise ResourceLimitError(f"refinement to depth {q} needs more than {max_cells} cells")
        cells = nxt

    def masks_of(lo, hi, forms) -> tuple[int, ...]:
        out = []
        for g in forms:
            y = g[1] if g[0] == 0 else _apply(g, (lo + hi) / 2)
            out.append(L.color_mask(y))
        return tuple(out)

    def point(x: Fraction) -> PointCell:
        vals = [x]
        for _ in range(q):
            vals.append(L.apply(vals[-1]))
        return PointCell(x, tuple(vals), tuple(L.color_mask(v) for v in vals))

    full = [Cell(lo, hi, tuple(forms), masks_of(lo, hi, forms)) for lo, hi, forms in cells]
    pts = [point(c.lo) for c in full]

    # merge neighbours that agree everywhere, including at the shared endpoint;
    # piece boundaries always stay cell boundaries
    starts = {pc.lo for pc in L.pieces}
    merged_cells, merged_pts = [full[0]], [pts[0]]
    for c, pt in zip(full[1:], pts[1:]):
        prev = merged_cells[-1]
        if (pt.x not in starts and prev.forms == c.forms and prev.masks == c.masks and pt.masks == c.masks
                and all(_apply(g, pt.x) == v for g, v in zip(c.forms, pt.values))):
            merged_cells[-1] = Cell(prev.lo, c.hi, c.forms, c.masks)
        else:
            merged_cells.append(c)
            merged_pts.append(pt)
    return CellDecomposition(q, tuple(merged_cells), tuple(merged_pts))


# ---------------------------------------------------------------------------
# Densities
# ---------------------------------------------------------------------------

def density_exact_interval(phi: Formula | str, L: IntervalMapping, *,
                           budget: int = 10**6, **_ignored) -> Fraction:
    """Lebesgue product measure of the satisfaction set of ``phi``.

    On a product of cells an atom ``f^a(x_i) = f^b(x_j)`` holds on positive
    measure only if it holds on the whole product: for ``i == j`` the affine
    forms coincide, for ``i != j`` both sides are the same constant.
    """
    phi = parse_formula(phi) if isinstance(phi, str) else phi
    p = arity(phi)
    D = refine(L, depth(phi))
    cells = D.cells
    if len(cells) ** p > budget:
        raise ResourceLimitError(f"{len(cells)}^{p} product cells exceed the budget of {budget}")

    def ev(g: Formula, cs: tuple[Cell, ...]) -> bool:
        if isinstance(g, (Eq, Neq)):
            l, r = g.left, g.right
            fl, fr = cs[l.var - 1].forms[l.iterate], cs[r.var - 1].forms[r.iterate]
            if l.var == r.var:
                same = fl == fr
            else:
                same = fl[0] == 0 and fr[0] == 0 and fl[1] == fr[1]
            return same if isinstance(g, Eq) else not same
        if isinstance(g, Color):
            return bool(cs[g.term.var - 1].masks[g.term.iterate] >> (g.m - 1) & 1)
        if isinstance(g, Top):
            return True
        if isinstance(g, Bottom):
            return False
        if isinstance(g, Not):
            return not ev(g.arg, cs)
        if isinstance(g, And):
            return ev(g.left, cs) and ev(g.right, cs)
        return ev(g.left, cs) or ev(g.right, cs)

    total = Fraction(0)
    for cs in itertools.product(cells, repeat=p):
        if ev(phi, cs):
            m = Fraction(1)
            for c in cs:
                m *= c.length
            total += m
    return total


# ---------------------------------------------------------------------------
# Cyclic part and the measure-preservation condition
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CyclicPart:
    kmax: int
    intervals: dict[int, tuple[tuple[Fraction, Fraction], ...]]
    exceptional: dict[int, tuple[Fraction, ...]]
    cells: dict[int, tuple[Cell, ...]]

    def measure(self, k: int | None = None) -> Fraction:
        ks = [k] if k is not None else list(self.intervals)
        return sum((hi - lo for j in ks for lo, hi in self.intervals.get(j, ())), Fraction(0))


def _period(L: IntervalMapping, x: Fraction, kmax: int) -> int | None:
    y = x
    for k in range(1, kmax + 1):
        y = L.apply(y)
        if y == x:
            return k
    return None


def cyclic_part(L: IntervalMapping, kmax: int) -> CyclicPart:
    """``Z_k`` for ``k <= kmax`` as interval unions plus measure-zero extras.

    A cell belongs to ``Z_k`` when ``f^k`` is the identity affine map on it
    and no earlier iterate is.  Isolated periodic points (inside cells or at
    cell endpoints) are reported under ``exceptional`` and never merged into
    the interval unions.
    """
    if kmax < 1:
        raise ValueError("kmax must be >= 1")
    D = refine(L, kmax)
    by_k: dict[int, list[Cell]] = {}
    candidates: set[Fraction] = {pt.x for pt in D.points}
    for c in D.cells:
        k = next((a for a in range(1, kmax + 1) if c.forms[a] == _ID), None)
        if k is not None:
            by_k.setdefault(k, []).append(c)
        for a in range(1, (k or kmax + 1)):
            alpha, beta = c.forms[a]
            if alpha != 1:
                x = beta / (1 - alpha)
                if c.lo < x < c.hi:
                    candidates.add(x)
    intervals = {k: _merge_intervals((c.lo, c.hi) for c in cs) for k, cs in sorted(by_k.items())}
    exceptional: dict[int, list[Fraction]] = {}
    for x in sorted(candidates):
        k = _period(L, x, kmax)
        if k is not None and not any(lo <= x < hi for lo, hi in intervals.get(k, ())):
            exceptional.setdefault(k, []).append(x)
    return CyclicPart(kmax, intervals, {k: tuple(v) for k, v in sorted(exceptional.items())},
                      {k: tuple(cs) for k, cs in sorted(by_k.items())})


@dataclass(frozen=True)
class CyclePreservationReport:
    holds: bool
    kmax: int
    cyclic_measure: Fraction
    offending: tuple[tuple[int, Fraction, Fraction, Fraction], ...]  # (piece, lo, hi, slope)

    def __bool__(self) -> bool:
        return self.holds

    def describe(self) -> str:
        if self.holds:
            return (f"cycle preservation holds up to length {self.kmax} "
                    f"(cyclic measure {self.cyclic_measure})")
        parts = [f"piece {i} has slope {s} on cyclic cell ({lo}, {hi})"
                 for i, lo, hi, s in self.offending]
        return f"cycle preservation fails up to length {self.kmax}: " + "; ".join(parts)


def check_cycle_preservation(L: IntervalMapping, kmax: int) -> CyclePreservationReport:
    """Whether ``f`` preserves length on the cyclic part (cycles up to ``kmax``).

    ``f`` is injective on each ``Z_k`` up to a null set, so it preserves the
    measure of every subset exactly when it has slope of absolute value 1 on
    every positive-measure cyclic cell.
    """
    cp = cyclic_part(L, kmax)
    offending = []
    for k, cs in cp.cells.items():
        for c in cs:
            slope = c.forms[1][0]
            if abs(slope) != 1:
                i = L.piece_index(c.lo + c.length / 2)
                offending.append((i, c.lo, c.hi, slope))
    return CyclePreservationReport(not offending, kmax, cp.measure(), tuple(offending))


# ---------------------------------------------------------------------------
# Sampling and stock examples
# ---------------------------------------------------------------------------

def sample(L: IntervalMapping, rng: random.Random, bits: int = DEFAULT_SAMPLE_BITS) -> Fraction:
    """A uniform dyadic point of ``[0, 1)`` with ``bits`` binary digits."""
    return Fraction(rng.getrandbits(bits), 1 << bits)


def rotation_half() -> IntervalMapping:
    """``x -> x + 1/2 mod 1``: every point is 2-cyclic."""
    h = Fraction(1, 2)
    return IntervalMapping.from_pieces([(0, h, 1, h), (h, 1, 1, -h)])


def halving_map() -> IntervalMapping:
    return IntervalMapping.from_pieces([(0, 1, Fraction(1, 2), 0)])


def constant_map(c: Fraction = Fraction(1, 3)) -> IntervalMapping:
    return IntervalMapping.from_pieces([(0, 1, 0, c)])


def doubling_halving() -> IntervalMapping:
    """``2x`` on ``[0, 1/2)`` and ``x/2`` on ``[1/2, 1)``; 2-cyclic but not length preserving."""
    h = Fraction(1, 2)
    return IntervalMapping.from_pieces([(0, h, 2, 0), (h, 1, h, 0)])
