from __future__ import annotations

import random
from fractions import Fraction

import pytest

from qfmaps.interval import constant_map, doubling_halving, halving_map, rotation_half
from qfmaps.mapping import ColoredMapping, WeightedMapping


@pytest.fixture
def e1() -> ColoredMapping:
    return ColoredMapping((1, 2, 1))


@pytest.fixture
def e1_weighted(e1) -> WeightedMapping:
    return WeightedMapping(e1, (Fraction(1, 2), Fraction(3, 10), Fraction(1, 5)))


@pytest.fixture
def i1():
    return rotation_half()


@pytest.fixture
def i2():
    return halving_map()


@pytest.fixture
def i3():
    return constant_map(Fraction(1, 3))


@pytest.fixture
def expanding():
    return doubling_halving()


@pytest.fixture
def rng() -> random.Random:
    return random.Random(12345)
