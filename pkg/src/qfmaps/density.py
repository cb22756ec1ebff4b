"""Satisfaction densities of quantifier-free formulas.

``density_exact`` counts satisfying tuples of a finite mapping with numpy
broadcasting over precomputed iterate tables.  Interchangeable blocks
(sibling leaves with equal colors, isomorphic isolated cycles) are collapsed
to at most ``p`` representatives first; each reduced tuple then stands for
``prod_c m_c^(s_c) / r_c^(s_c)`` real tuples (falling factorials over
``s_c`` distinct blocks used from class ``c``), which keeps the count exact.

``density_enumerate`` is the plain pointwise reference used by the tests.
"""

from __future__ import annotations

import itertools
import math
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .errors import ResourceLimitError
from .logic import (And, Bottom, Color, Eq, FTerm, Formula, Neq, Not, Or, Top,
                    arity, atoms, depth, evaluate, format_formula,
                    function_symbol_count, parse_formula, terms)
from .mapping import ColoredMapping, WeightedMapping, cycles

__all__ = [
    "DEFAULT_BUDGET",
    "DensityReport",
    "ConvergenceReport",
    "density",
    "density_exact",
    "density_weighted",
    "density_enumerate",
    "density_mc",
    "hoeffding_radius",
    "converge",
    "twin_reduction",
]

DEFAULT_BUDGET = 10**8
_CHUNK = 1 << 20
_INT_CAP = 1 << 62


@dataclass(frozen=True)
class DensityReport:
    formula: str
    p: int
    q: int
    method: str
    value: Fraction | None = None
    estimate: float | None = None
    radius: float | None = None
    samples: int | None = None

    def tsv(self, decimal: bool = False) -> str:
        if self.value is not None:
            shown = f"{float(self.value):.12g}" if decimal else str(self.value)
            radius = "0"
        else:
            shown = f"{self.estimate:.12g}"
            radius = f"{self.radius:.12g}"
        return "\t".join([self.formula, str(self.p), str(self.q), shown, radius, self.method])


def _as_formula(phi: Formula | str) -> Formula:
    return parse_formula(phi) if isinstance(phi, str) else phi


# ---------------------------------------------------------------------------
# Twin reduction
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _Reduced:
    mapping: ColoredMapping
    cls: np.ndarray      # class id per reduced element
    blk: np.ndarray      # block id per reduced element, unique within its class
    mult: np.ndarray     # real number of blocks per class
    reps: np.ndarray     # represented number of blocks per class


def _min_rotation(seq: Sequence[int]) -> tuple[int, ...]:
    return min(tuple(seq[i:]) + tuple(seq[:i]) for i in range(len(seq)))


def twin_reduction(F: ColoredMapping, p: int) -> _Reduced:
    """Collapse interchangeable blocks to at most ``p`` representatives each."""
    n = F.n
    pre = F.preimages
    groups: dict[tuple, list[tuple[int, ...]]] = {}
    for v in range(n):
        if not pre[v]:
            groups.setdefault(("leaf", F.f[v], F.color_mask(v)), []).append((v,))
    for cyc in cycles(F):
        if all(len(pre[v]) == 1 for v in cyc):
            masks = [F.color_mask(v) for v in cyc]
            key = ("cycle", len(cyc), _min_rotation(masks))
            # align each cycle so its mask sequence starts at the minimal rotation
            best = min(range(len(cyc)), key=lambda i: tuple(masks[i:] + masks[:i]))
            groups.setdefault(key, []).append(cyc[best:] + cyc[:best])

    drop: set[int] = set()
    block_of: dict[int, tuple[int, int]] = {}
    mult: list[int] = []
    reps: list[int] = []
    for key in sorted(groups, key=repr):
        blocks = groups[key]
        if len(blocks) < 2:
            continue
        c = len(mult)
        keep = min(len(blocks), p)
        mult.append(len(blocks))
        reps.append(keep)
        for b, block in enumerate(blocks):
            for v in block:
                if b < keep:
                    block_of[v] = (c, b)
                else:
                    drop.add(v)

    kept = [v for v in range(n) if v not in drop]
    index = {v: i for i, v in enumerate(kept)}
    f = tuple(index[F.f[v]] for v in kept)
    colors = tuple(frozenset(index[v] for v in cs if v in index) for cs in F.colors)
    cls = np.empty(len(kept), dtype=np.int64)
    blk = np.zeros(len(kept), dtype=np.int64)
    next_c = len(mult)
    for i, v in enumerate(kept):
        if v in block_of:
            cls[i], blk[i] = block_of[v]
        else:
            cls[i] = next_c
            next_c += 1
    mult += [1] * (next_c - len(mult))
    reps += [1] * (next_c - len(reps))
    return _Reduced(ColoredMapping(f, colors), cls, blk,
                    np.array(mult, dtype=object), np.array(reps, dtype=np.int64))


# ---------------------------------------------------------------------------
# Vectorized evaluation
# ---------------------------------------------------------------------------

def _tables(F: ColoredMapping, d: int) -> np.ndarray:
    f = np.asarray(F.f, dtype=np.int64)
    out = np.empty((d + 1, F.n), dtype=np.int64)
    out[0] = np.arange(F.n)
    for a in range(1, d + 1):
        out[a] = f[out[a - 1]]
    return out


def _color_matrix(F: ColoredMapping, max_m: int) -> np.ndarray:
    out = np.zeros((max_m + 1, F.n), dtype=bool)
    for m, cs in enumerate(F.colors[:max_m], start=1):
        out[m, list(cs)] = True
    return out


def _np_eval(g: Formula, val, colmat: np.ndarray):
    if isinstance(g, Eq):
        return val(g.left) == val(g.right)
    if isinstance(g, Neq):
        return val(g.left) != val(g.right)
    if isinstance(g, Color):
        return colmat[g.m][val(g.term)]
    if isinstance(g, Top):
        return np.True_
    if isinstance(g, Bottom):
        return np.False_
    if isinstance(g, Not):
        return ~_np_eval(g.arg, val, colmat)
    if isinstance(g, And):
        return _np_eval(g.left, val, colmat) & _np_eval(g.right, val, colmat)
    return _np_eval(g.left, val, colmat) | _np_eval(g.right, val, colmat)


def _index_grids(n: int, p: int, lo: int, hi: int) -> list[np.ndarray]:
    grids = []
    for i in range(p):
        shape = [1] * p
        if i == 0:
            shape[0] = hi - lo
            grids.append(np.arange(lo, hi).reshape(shape))
        else:
            shape[i] = n
            grids.append(np.arange(n).reshape(shape))
    return grids


def _chunks(n: int, p: int) -> list[tuple[int, int]]:
    per_row = n ** (p - 1)
    rows = max(1, _CHUNK // max(per_row, 1))
    return [(lo, min(n, lo + rows)) for lo in range(0, n, rows)]


def _mask(phi: Formula, F: ColoredMapping, p: int, tables, colmat, lo: int, hi: int):
    grids = _index_grids(F.n, p, lo, hi)
    cache: dict[FTerm, np.ndarray] = {}

    def val(t: FTerm) -> np.ndarray:
        if t not in cache:
            cache[t] = tables[t.iterate][grids[t.var - 1]]
        return cache[t]

    shape = (hi - lo,) + (F.n,) * (p - 1)
    return np.broadcast_to(_np_eval(phi, val, colmat), shape), grids


def _max_color(phi: Formula) -> int:
    return max((a.m for a in atoms(phi) if isinstance(a, Color)), default=0)


def _guard(n: int, p: int, budget: int) -> None:
    if n ** p > budget:
        raise ResourceLimitError(
            f"exact enumeration needs {n}^{p} = {n ** p} tuple checks, over the budget of "
            f"{budget}; use Monte Carlo estimation instead")


def _run(fn, chunks, threads: int):
    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(fn, chunks))
    return [fn(c) for c in chunks]


def _closed_value(phi: Formula) -> Fraction:
    return Fraction(int(evaluate(phi, None, {})))


def density_exact(phi: Formula | str, F: ColoredMapping | WeightedMapping, *,
                  budget: int = DEFAULT_BUDGET, compress: bool = True,
                  threads: int = 1) -> Fraction:
    """``|phi(F)| / n^p`` under the uniform measure on ``F``.

    A weighted mapping is read through its base (uniform) structure; use
    :func:`density_weighted` for its own measure.
    """
    phi = _as_formula(phi)
    F = F.base
    p = arity(phi)
    if p == 0:
        return _closed_value(phi)
    red = twin_reduction(F, p) if compress else None
    if red is not None and red.mapping.n == F.n:
        red = None
    G = red.mapping if red is not None else F
    _guard(G.n, p, budget)
    tables = _tables(G, depth(phi))
    colmat = _color_matrix(G, _max_color(phi))

    if red is None:
        def count(chunk):
            mask, _ = _mask(phi, G, p, tables, colmat, *chunk)
            return int(np.count_nonzero(mask))
        total = sum(_run(count, _chunks(G.n, p), threads))
        return Fraction(total, F.n ** p)

    mult_max = int(max(red.mult))
    use_object = mult_max ** p >= _INT_CAP
    mult = red.mult if use_object else red.mult.astype(np.int64)

    def weighted_count(chunk):
        mask, grids = _mask(phi, G, p, tables, colmat, *chunk)
        cls = [red.cls[g] for g in grids]
        blk = [red.blk[g] for g in grids]
        num = np.ones((), dtype=object if use_object else np.int64)
        den = np.ones((), dtype=np.int64)
        for i in range(p):
            new = np.True_
            s_prev = np.zeros((), dtype=np.int64)
            for j in range(i):
                same_cls = cls[j] == cls[i]
                new = new & ~(same_cls & (blk[j] == blk[i]))
            for j in range(i):
                first_j = np.True_
                for k in range(j):
                    first_j = first_j & ~((cls[k] == cls[j]) & (blk[k] == blk[j]))
                s_prev = s_prev + ((cls[j] == cls[i]) & first_j)
            num = num * np.where(new, mult[cls[i]] - s_prev, 1)
            den = den * np.where(new, red.reps[cls[i]] - s_prev, 1)
        num = np.broadcast_to(num, mask.shape)[mask]
        den = np.broadcast_to(den, mask.shape)[mask]
        out: dict[int, int] = {}
        for d in np.unique(den):
            vals = num[den == d]
            out[int(d)] = out.get(int(d), 0) + _exact_sum(vals)
        return out

    acc: dict[int, int] = {}
    for part in _run(weighted_count, _chunks(G.n, p), threads):
        for d, s in part.items():
            acc[d] = acc.get(d, 0) + s
    total = sum((Fraction(s, d) for d, s in acc.items()), Fraction(0))
    return total / F.n ** p


def _exact_sum(vals: np.ndarray) -> int:
    if vals.size == 0:
        return 0
    if vals.dtype == object:
        return int(sum(vals.tolist()))
    top = int(vals.max())
    step = max(1, _INT_CAP // max(top, 1))
    return sum(int(vals[k:k + step].sum()) for k in range(0, vals.size, step))


def density_weighted(phi: Formula | str, F: WeightedMapping, *,
                     budget: int = DEFAULT_BUDGET, threads: int = 1) -> Fraction:
    """``nu^p(phi(F))`` under the mapping's own product measure."""
    phi = _as_formula(phi)
    if isinstance(F, ColoredMapping):
        return density_exact(phi, F, budget=budget, threads=threads)
    p = arity(phi)
    if p == 0:
        return _closed_value(phi)
    G = F.base
    _guard(G.n, p, budget)
    denom = math.lcm(*(w.denominator for w in F.weights))
    ints = [int(w * denom) for w in F.weights]
    use_object = denom ** p >= _INT_CAP
    c = np.array(ints, dtype=object if use_object else np.int64)
    tables = _tables(G, depth(phi))
    colmat = _color_matrix(G, _max_color(phi))

    def contract(chunk):
        lo, hi = chunk
        mask, _ = _mask(phi, G, p, tables, colmat, lo, hi)
        res = mask.astype(c.dtype)
        for _ in range(p - 1):
            res = res @ c
        return int(res @ c[lo:hi])

    total = sum(_run(contract, _chunks(G.n, p), threads))
    return Fraction(total, denom ** p)


def density_enumerate(phi: Formula | str, F: ColoredMapping | WeightedMapping) -> Fraction:
    """Reference value by pointwise evaluation of every tuple."""
    phi = _as_formula(phi)
    p = arity(phi)
    weights = F.weights if isinstance(F, WeightedMapping) else (Fraction(1, F.n),) * F.n
    total = Fraction(0)
    for tup in itertools.product(range(F.n), repeat=p):
        if evaluate(phi, F, tup):
            w = Fraction(1)
            for v in tup:
                w *= weights[v]
            total += w
    return total


def density(phi: Formula | str, S, **kw) -> Fraction:
    """Exact density on a finite, weighted, or interval mapping."""
    from .interval import IntervalMapping, density_exact_interval
    if isinstance(S, IntervalMapping):
        return density_exact_interval(phi, S, **kw)
    if isinstance(S, WeightedMapping):
        return density_weighted(phi, S, **kw)
    return density_exact(phi, S, **kw)


# ---------------------------------------------------------------------------
# Monte Carlo
# ---------------------------------------------------------------------------

def hoeffding_radius(N: int, delta: float) -> float:
    return math.sqrt(math.log(2 / delta) / (2 * N))


def _pointwise(phi: Formula):
    """Compile ``phi`` to ``check(source, points)`` using orbit prefixes."""
    d = depth(phi)
    needed = sorted({t.var for t in terms(phi)})

    def ev(g: Formula, vals, source) -> bool:
        if isinstance(g, Eq):
            return vals[g.left.var][g.left.iterate] == vals[g.right.var][g.right.iterate]
        if isinstance(g, Neq):
            return vals[g.left.var][g.left.iterate] != vals[g.right.var][g.right.iterate]
        if isinstance(g, Color):
            return source.has_color(g.m, vals[g.term.var][g.term.iterate])
        if isinstance(g, Top):
            return True
        if isinstance(g, Bottom):
            return False
        if isinstance(g, Not):
            return not ev(g.arg, vals, source)
        if isinstance(g, And):
            return ev(g.left, vals, source) and ev(g.right, vals, source)
        return ev(g.left, vals, source) or ev(g.right, vals, source)

    def check(source, points) -> bool:
        vals = {}
        for i in needed:
            orbit = [points[i - 1]]
            for _ in range(d):
                orbit.append(source.iterate(orbit[-1], 1))
            vals[i] = orbit
        return ev(phi, vals, source)

    return check


def density_mc(phi: Formula | str, source, N: int, delta: float, *,
               seed: int = 0) -> DensityReport:
    """Empirical frequency over ``N`` i.i.d. tuples drawn by ``source.draw``.

    ``source`` must offer ``draw(rng)``, ``iterate(x, a)`` and
    ``has_color(m, x)``; all randomness comes from ``random.Random(seed)``.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    text = phi if isinstance(phi, str) else format_formula(phi)
    phi = _as_formula(phi)
    p = arity(phi)
    rng = random.Random(seed)
    check = _pointwise(phi)
    hits = 0
    for _ in range(N):
        hits += check(source, [source.draw(rng) for _ in range(p)])
    return DensityReport(text, p, function_symbol_count(phi), "mc",
                         estimate=hits / N, radius=hoeffding_radius(N, delta), samples=N)


# ---------------------------------------------------------------------------
# Convergence tables
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConvergenceReport:
    formulas: tuple[str, ...]
    table: tuple[tuple[Fraction, ...], ...]
    differences: tuple[tuple[Fraction, ...], ...]
    tail_deviation: tuple[Fraction, ...]
    flagged: tuple[bool, ...]
    window: int
    threshold: Fraction = field(default=Fraction(1, 10))

    def tsv(self, decimal: bool = False) -> str:
        show = (lambda x: f"{float(x):.12g}") if decimal else str
        cols = len(self.table[0]) if self.table else 0
        head = (["formula"] + [f"d{t}" for t in range(cols)]
                + [f"diff{t}" for t in range(1, cols)] + ["tail_dev", "flag"])
        lines = ["\t".join(head)]
        for name, row, diffs, dev, flag in zip(self.formulas, self.table, self.differences,
                                               self.tail_deviation, self.flagged):
            lines.append("\t".join([name, *map(show, row), *map(show, diffs), show(dev),
                                    "unstable" if flag else "ok"]))
        return "\n".join(lines) + "\n"


def converge(formulas: Iterable[Formula | str], structures: Sequence, *,
             window: int = 3, threshold: Fraction | float = Fraction(1, 10),
             **kw) -> ConvergenceReport:
    """Density table for a battery of formulas over an ordered sequence.

    The tail deviation is the spread (max minus min) over the last
    ``window`` structures; formulas whose spread exceeds ``threshold`` are
    flagged.  Nothing is decided about actual convergence.
    """
    if len(structures) < 2:
        raise ValueError("need at least two structures")
    threshold = Fraction(threshold)
    names, table, diffs, devs, flags = [], [], [], [], []
    w = max(1, min(window, len(structures)))
    for phi in formulas:
        names.append(phi if isinstance(phi, str) else format_formula(phi))
        row = tuple(density(phi, S, **kw) for S in structures)
        table.append(row)
        diffs.append(tuple(abs(b - a) for a, b in zip(row, row[1:])))
        tail = row[-w:]
        devs.append(max(tail) - min(tail))
        flags.append(devs[-1] > threshold)
    return ConvergenceReport(tuple(names), tuple(table), tuple(diffs), tuple(devs),
                             tuple(flags), w, threshold)
