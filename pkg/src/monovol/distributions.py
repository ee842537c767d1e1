"""Closed-form marginal densities of the maximal-metric prior on 3x3 states.

On the simplex of diagonal entries ``(a, b, c)``:

    p(a, b) = 15 (1 - a) sqrt(a) / (4 pi sqrt(b) sqrt(c))

with univariate marginals ``15 (1 - a) sqrt(a) / 4`` (a Beta(3/2, 2) law) and
``15 (1 - b)(1 + 3 b) / (32 sqrt(b))``; ``c`` has the same law as ``b``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import DomainError, SingularStateError
from .quadrature import BLOCK, block_rng

BOUNDARY_TOL = 1e-12
_SAMPLE_STREAM = 3


@dataclass(frozen=True)
class SimplexPoint3:
    a: float
    b: float

    @property
    def c(self) -> float:
        return 1.0 - self.a - self.b

    def __post_init__(self):
        if self.a < 0 or self.b < 0 or self.c < -1e-15:
            raise DomainError(f"({self.a}, {self.b}) is outside the 2-simplex")


def _interior(*xs):
    for x in xs:
        if np.any(np.asarray(x) <= BOUNDARY_TOL):
            raise SingularStateError("density is singular on the simplex boundary")


def pdf_bivariate(a, b):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    c = 1 - a - b
    if np.any(a < 0):
        raise DomainError("a must be non-negative")
    _interior(b, c)
    out = 15 * (1 - a) * np.sqrt(a) / (4 * math.pi * np.sqrt(b * c))
    return float(out) if out.ndim == 0 else out


def pdf_a(a):
    a = np.asarray(a, dtype=float)
    if np.any((a < 0) | (a > 1)):
        raise DomainError("a must lie in [0, 1]")
    out = 3.75 * (1 - a) * np.sqrt(a)
    return float(out) if out.ndim == 0 else out


def pdf_b(b):
    b = np.asarray(b, dtype=float)
    if np.any((b < 0) | (b > 1)):
        raise DomainError("b must lie in [0, 1]")
    _interior(b)
    out = 15 * (1 - b) * (1 + 3 * b) / (32 * np.sqrt(b))
    return float(out) if out.ndim == 0 else out


pdf_c = pdf_b


def cdf_a(a):
    a = np.asarray(a, dtype=float)
    return 2.5 * a**1.5 - 1.5 * a**2.5


def cdf_b(b):
    b = np.asarray(b, dtype=float)
    return (15 / 32) * (2 * np.sqrt(b) + (4 / 3) * b**1.5 - 1.2 * b**2.5)


def pdf_six(a, b, theta1, theta2):
    """Density over (a, b, nu, theta1, theta2, theta3); constant in nu and theta3."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    _interior(b, 1 - a - b)
    out = (15 * (1 - a) * np.sqrt(a) * np.sin(theta1) ** 4 * np.sin(theta2) ** 3
           / (8 * math.pi**4 * np.sqrt(b * (1 - a - b))))
    return float(out) if np.ndim(out) == 0 else out


def moments() -> dict[str, Fraction]:
    return {
        "a": Fraction(3, 7),
        "b": Fraction(2, 7),
        "c": Fraction(2, 7),
        "ab": Fraction(2, 21),
        "a2": Fraction(5, 21),
        "b2": Fraction(1, 7),
        "c2": Fraction(1, 7),
    }


def a_moment(m: int) -> float:
    """E[a^m] under the Beta(3/2, 2) marginal."""
    return 3.75 / ((m + 1.5) * (m + 2.5))


def sample_bivariate(n: int, seed: int) -> np.ndarray:
    """Exact draws from the bivariate density as an ``(n, 3)`` array of (a, b, c).

    ``a`` is Beta(3/2, 2); given ``a``, ``b`` is arcsine on ``[0, 1 - a]``.
    """
    n = int(n)
    if n < 1:
        raise DomainError("need at least one sample")
    out = np.empty((n, 3))
    for k, start in enumerate(range(0, n, BLOCK)):
        m = min(BLOCK, n - start)
        rng = block_rng(seed, _SAMPLE_STREAM, k)
        a = rng.beta(1.5, 2.0, size=m)
        u = rng.random(m)
        b = (1 - a) * (1 - np.cos(math.pi * u)) / 2
        out[start:start + m, 0] = a
        out[start:start + m, 1] = b
        out[start:start + m, 2] = (1 - a) - b
    return out
