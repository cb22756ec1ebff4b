"""Finite approximation of an interval mapping in three stages.

1. :func:`sample_structure` draws i.i.d. points, closes each under ``f`` up
   to depth ``q`` and weights the draws (closure points get weight 0).
2. :func:`uniformize` averages the weights along every cycle of length at
   most ``q``, which makes the measure invariant under all cycle shifts.
3. :func:`blow` replaces each element ``v`` by ``floor(N nu(v) |F|) + 1``
   unweighted copies; copies keep their index along short cycles and fall
   to copy 0 everywhere else.

:func:`approximate` chains the stages behind the cycle-preservation gate
and attaches the bound from :func:`error_bound`.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .errors import HypothesisError
from .interval import IntervalMapping, check_cycle_preservation, sample
from .mapping import ColoredMapping, WeightedMapping, cycles

__all__ = [
    "ApproxParams",
    "BlowResult",
    "sample_structure",
    "uniformize",
    "gamma_average",
    "blow",
    "blown_measure",
    "error_bound",
    "default_sample_count",
    "approximate",
]


@dataclass(frozen=True)
class ApproxParams:
    p: int
    q: int
    eps: Fraction
    N: int
    seed: int = 0
    nsamples: int | None = None
    delta0: float = 0.01

    def __post_init__(self) -> None:
        object.__setattr__(self, "eps", Fraction(self.eps))
        if self.p < 1 or self.q < 1:
            raise ValueError("p and q must be >= 1")
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        if self.N < 1:
            raise ValueError("N must be >= 1")


@dataclass(frozen=True)
class BlowResult:
    structure: ColoredMapping
    provenance: tuple[tuple[int, int], ...]
    source: WeightedMapping
    N: int
    q: int
    bound: Fraction | None = None


def sample_structure(L: IntervalMapping, nsamples: int | None = None, q: int = 1,
                     seed: int = 0, *, points: Sequence[Fraction] | None = None) -> WeightedMapping:
    """Weighted finite structure on sampled points and their short orbits.

    ``points`` overrides random drawing.  The result's ``labels`` hold the
    point behind each index, in order of first appearance along the orbits.
    """
    if points is None:
        if nsamples is None or nsamples < 1:
            raise ValueError("need nsamples >= 1 or explicit points")
        rng = random.Random(seed)
        points = [sample(L, rng) for _ in range(nsamples)]
    else:
        points = [Fraction(x) for x in points]
        if not points:
            raise ValueError("need at least one sample point")
    index: dict[Fraction, int] = {}
    order: list[Fraction] = []
    weight: dict[Fraction, Fraction] = {}
    share = Fraction(1, len(points))
    for x in points:
        weight[x] = weight.get(x, Fraction(0)) + share
        y = x
        for a in range(q + 1):
            if y not in index:
                index[y] = len(order)
                order.append(y)
            if a < q:
                y = L.apply(y)
    f = []
    for y in order:
        z = L.apply(y)
        f.append(index.get(z, index[y]))
    colors = tuple(frozenset(i for i, y in enumerate(order) if L.has_color(m, y))
                   for m in range(1, L.num_colors + 1))
    return WeightedMapping(ColoredMapping(tuple(f), colors),
                           tuple(weight.get(y, Fraction(0)) for y in order),
                           labels=tuple(order))


def _short_cycles(F, q: int) -> list[tuple[int, ...]]:
    return [c for c in cycles(F) if len(c) <= q]


def uniformize(F: WeightedMapping, q: int) -> WeightedMapping:
    """Replace weights on every cycle of length ``<= q`` by the cycle average."""
    if q < 1:
        raise ValueError("q must be >= 1")
    w = list(F.weights)
    for cyc in _short_cycles(F, q):
        avg = sum((w[v] for v in cyc), Fraction(0)) / len(cyc)
        for v in cyc:
            w[v] = avg
    return WeightedMapping(F.base, tuple(w), labels=F.labels)


def gamma_average(F: WeightedMapping, q: int) -> tuple[Fraction, ...]:
    """``(1/|G|) sum_g nu(g(v))`` by explicit enumeration of the shift group.

    Independent of :func:`uniformize`: each group element is turned into a
    composed QF-definable function and evaluated pointwise.
    """
    from .logic import CycleShiftGroup, eval_definable
    group = CycleShiftGroup(q)
    fns = [group.as_function(e) for e in group.elements()]
    out = []
    for v in range(F.n):
        total = sum((F.weights[eval_definable(g, F, v)] for g in fns), Fraction(0))
        out.append(total / group.order)
    return tuple(out)


def _check_invariant(F: WeightedMapping, q: int) -> None:
    for cyc in _short_cycles(F, q):
        ws = {F.weights[v] for v in cyc}
        if len(ws) > 1:
            raise HypothesisError(
                f"weights are not constant on the cycle {list(cyc)} "
                f"(weights {[str(F.weights[v]) for v in cyc]}); uniformize first")


def blow(F: WeightedMapping, N: int, q: int, *, p: int | None = None,
         eps: Fraction | None = None) -> BlowResult:
    """Unweighted mapping whose uniform measure tracks ``nu`` on ``F``.

    With ``p`` and ``eps`` given, the result carries ``error_bound``.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    _check_invariant(F, q)
    n = F.n
    short = {v for cyc in _short_cycles(F, q) for v in cyc}
    copies = [math.floor(N * w * n) + 1 for w in F.weights]
    start = [0] * n
    for v in range(1, n):
        start[v] = start[v - 1] + copies[v - 1]
    provenance = tuple((v, j) for v in range(n) for j in range(copies[v]))
    f = tuple(start[F.f[v]] + (j if v in short else 0) for v, j in provenance)
    colors = tuple(frozenset(i for i, (v, _) in enumerate(provenance) if v in cs)
                   for cs in F.colors)
    bound = error_bound(p, q, n, N, eps) if p is not None and eps is not None else None
    return BlowResult(ColoredMapping(f, colors), provenance, F, N, q, bound)


def blown_measure(result: BlowResult) -> tuple[Fraction, ...]:
    """Distribution of the first coordinate of a uniform blown element."""
    total = result.structure.n
    counts = [0] * result.source.n
    for v, _ in result.provenance:
        counts[v] += 1
    return tuple(Fraction(c, total) for c in counts)


def error_bound(p: int, q: int, size: int, N: int, eps) -> Fraction:
    """``(1/N) (p^2 (q+1) / size + 2p) + 2 eps``."""
    eps = Fraction(eps)
    if min(p, q, size, N) <= 0 or eps < 0:
        raise ValueError("p, q, size, N must be positive and eps non-negative")
    return Fraction(1, N) * (Fraction(p * p * (q + 1), size) + 2 * p) + 2 * eps


def default_sample_count(eps, delta0: float = 0.01) -> int:
    eps = Fraction(eps)
    return math.ceil(math.log(2 / delta0) / (2 * float(eps) ** 2))


def approximate(L: IntervalMapping, params: ApproxParams) -> BlowResult:
    """Sample, uniformize and blow ``L``; refuses limits that fail the gate."""
    report = check_cycle_preservation(L, params.q)
    if not report:
        raise HypothesisError(report.describe())
    n = params.nsamples or default_sample_count(params.eps, params.delta0)
    F0 = sample_structure(L, n, params.q, params.seed)
    F = uniformize(F0, params.q)
    return blow(F, params.N, params.q, p=params.p, eps=params.eps)
