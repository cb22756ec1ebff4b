"""Local statistics: canonical ball types, their distribution, residuality, dispersion.

A ball keeps every edge ``u -> f(u)`` with both ends inside it.  Balls are
connected, so the induced partial map is either a tree draining into one
vertex without an outgoing edge, or has exactly one cycle with in-trees.
Trees are encoded by sorted child codes; a cycle by the lexicographically
least rotation of its anchored subtree codes, read in the direction of ``f``.
"""

from __future__ import annotations

from collections import defaultdict
from fractions import Fraction
from typing import Iterable

from .mapping import AnyMapping, _weights, ball

__all__ = [
    "BallType",
    "ball_canonical",
    "ball_histogram",
    "residuality",
    "dispersion",
    "induced_ball",
    "histogram_mixture",
]

BallType = bytes


def induced_ball(F: AnyMapping, v: int, r: int) -> tuple[frozenset[int], dict[int, int]]:
    """Vertex set of ``B_r(v)`` and the partial map it induces."""
    X = ball(F, v, r)
    edges = {u: F.f[u] for u in X if F.f[u] in X}
    return X, edges


def _rotation_min(seq: list[str]) -> tuple[str, ...]:
    return min(tuple(seq[i:] + seq[:i]) for i in range(len(seq)))


def ball_canonical(F: AnyMapping, v: int, r: int) -> BallType:
    """Full, collision-free byte code of the rooted ball ``B_r(F, v)``."""
    if not 0 <= v < F.n:
        raise ValueError(f"element {v} outside domain of size {F.n}")
    X, edges = induced_ball(F, v, r)
    children: dict[int, list[int]] = defaultdict(list)
    for u, w in edges.items():
        children[w].append(u)

    cycle: list[int] = []
    sinks = [u for u in X if u not in edges]
    if not sinks:
        # unicyclic: walk from any vertex until repetition
        seen: dict[int, int] = {}
        u = min(X)
        while u not in seen:
            seen[u] = len(seen)
            u = edges[u]
        cycle.append(u)
        w = edges[u]
        while w != u:
            cycle.append(w)
            w = edges[w]
    on_cycle = set(cycle)

    memo: dict[int, str] = {}

    def code(u: int) -> str:
        # iterative post-order to avoid recursion limits on long chains
        stack = [(u, False)]
        while stack:
            x, done = stack.pop()
            if x in memo:
                continue
            kids = [c for c in children[x] if c not in on_cycle]
            if not done:
                stack.append((x, True))
                stack.extend((c, False) for c in kids if c not in memo)
                continue
            mark = "*" if x == v else ""
            memo[x] = "(" + str(F.color_mask(x)) + mark + "".join(sorted(memo[c] for c in kids)) + ")"
        return memo[u]

    if cycle:
        body = "".join(_rotation_min([code(c) for c in cycle]))
        return b"C" + body.encode("ascii")
    (sink,) = sinks
    return b"T" + code(sink).encode("ascii")


def _measure(F: AnyMapping) -> tuple[Fraction, ...]:
    return _weights(F)


def ball_histogram(F: AnyMapping, r: int) -> dict[BallType, Fraction]:
    w = _measure(F)
    hist: dict[BallType, Fraction] = defaultdict(Fraction)
    for v in range(F.n):
        if w[v]:
            hist[ball_canonical(F, v, r)] += w[v]
    return dict(sorted(hist.items()))


def _ball_mass(F: AnyMapping, w: tuple[Fraction, ...], v: int, r: int) -> Fraction:
    return sum((w[u] for u in ball(F, v, r)), Fraction(0))


def residuality(F: AnyMapping, r: int) -> Fraction:
    """Heaviest ball of radius ``r``."""
    w = _measure(F)
    return max(_ball_mass(F, w, v, r) for v in range(F.n))


def dispersion(F: AnyMapping, root: int, d: int) -> Fraction:
    """Mass of the radius-``d`` ball around ``root``."""
    if not 0 <= root < F.n:
        raise ValueError(f"root {root} outside domain of size {F.n}")
    return _ball_mass(F, _measure(F), root, d)


def histogram_mixture(parts: Iterable[tuple[Fraction, dict[BallType, Fraction]]]) -> dict[BallType, Fraction]:
    out: dict[BallType, Fraction] = defaultdict(Fraction)
    for lam, h in parts:
        for k, p in h.items():
            out[k] += lam * p
    return dict(sorted(out.items()))
