"""Shared fixtures: the two reference problems and a Hamming catalog."""

import math

import numpy as np
import pytest

from llrd.core import Channel, Pmf
from llrd.loglik import DistortionMatrix

LN2 = math.log(2.0)


def hb_bits(x: float) -> float:
    """Binary entropy in bits, evaluated directly from the definition."""
    if x in (0.0, 1.0):
        return 0.0
    return -(x * math.log2(x) + (1 - x) * math.log2(1 - x))


def hb_nats(x: float) -> float:
    return hb_bits(x) * LN2


@pytest.fixture
def fig2():
    """Ber(0.25) source observed through a BSC(0.1) conditioning channel."""
    p = Pmf(("0", "1"), np.array([0.75, 0.25]))
    ch = Channel(("u0", "u1"), ("0", "1"), np.array([[0.9, 0.1], [0.1, 0.9]]))
    return p, ch


@pytest.fixture
def fig3():
    """Ber(0.35) source with a three-symbol conditioning alphabet."""
    p = Pmf(("0", "1"), np.array([0.65, 0.35]))
    ch = Channel(
        ("u1", "u2", "u3"), ("0", "1"), np.array([[0.8, 0.4, 0.2], [0.2, 0.6, 0.8]])
    )
    return p, ch


def hamming(n: int = 2) -> DistortionMatrix:
    labels = tuple(str(i) for i in range(n))
    return DistortionMatrix(labels, labels, 1.0 - np.eye(n))


def random_pmf(rng, labels) -> Pmf:
    return Pmf(labels, rng.dirichlet(np.ones(len(labels))))


def random_channel(rng, in_labels, out_labels) -> Channel:
    mat = rng.dirichlet(np.ones(len(out_labels)), size=len(in_labels)).T
    return Channel(in_labels, out_labels, mat)
