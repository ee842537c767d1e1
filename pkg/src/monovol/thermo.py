"""Partition functions and expected-value curves using the priors as densities of states.

Energies of the observables in terms of the state parameters:

* ``lambda8`` (weak equilibrium): ``(1 - 3a)/sqrt(3)`` under the marginal of ``a``;
* ``lambda3`` (weak equilibrium): ``b - c`` under the bivariate density;
* ``lambda1_strong``: ``1 - 2g - h`` on the commuting 2-simplex with weight
  ``1 / (2 sqrt(g h (1 - g - h)))``;
* ``four_by_four_strong``: ``sum_k omega_k lambda_k`` on the commuting 3-simplex
  with weight ``prod_k lambda_k^(-1/2)``, ``omega_k = 2 cos(k pi / 5)``.

Expected values are ``-d log Q / d beta``, formed as a ratio of integrals.
The one-dimensional reductions used for ``lambda3``, ``lambda1_strong`` and
``four_by_four_strong`` integrate an arcsine-weighted exponential in closed
form, ``int_0^1 exp(x cos(pi t)) dt = I0(x)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import special

from .distributions import a_moment, pdf_a
from .errors import DomainError
from .quadrature import nested_quad

SQRT3 = math.sqrt(3.0)
PHI = (1 + math.sqrt(5.0)) / 2

OBSERVABLES = (
    "lambda8",
    "lambda3",
    "lambda1_strong",
    "four_by_four_strong",
    "spin_half_maximal",
    "spin_half_minimal",
)


# ---------------------------------------------------------------------------
# special functions


def erf(x):
    return special.erf(x)


def dawson(x):
    return special.dawsn(x)


def erfi(x):
    """Imaginary error function, ``-i erf(i x)``, through Dawson's function."""
    x = np.asarray(x, dtype=float)
    out = 2 / math.sqrt(math.pi) * np.exp(x * x) * special.dawsn(x)
    return float(out) if out.ndim == 0 else out


def bessel_i(order, x):
    return special.iv(order, x)


def bessel_ie(order, x):
    """Exponentially scaled ``I_order(x) exp(-|x|)``."""
    return special.ive(order, x)


# ---------------------------------------------------------------------------
# comparators


def langevin_neg(beta):
    """``1/beta - coth(beta)``, the negative Langevin function."""
    b = np.asarray(beta, dtype=float)
    small = np.abs(b) < 1e-3
    safe = np.where(small, 1.0, b)
    out = np.where(small, -b / 3 + b**3 / 45 - 2 * b**5 / 945, 1 / safe - 1 / np.tanh(safe))
    return float(out) if out.ndim == 0 else out


def brillouin(spin, beta):
    b = np.asarray(beta, dtype=float)
    if spin in (0.5, "1/2"):
        out = np.tanh(b)
    elif spin in (1, "1"):
        # 2 sinh b / (1 + 2 cosh b) written with decaying exponentials
        x = np.abs(b)
        e1, e2 = np.exp(-x), np.exp(-2 * x)
        out = np.sign(b) * (1 - e2) / (e1 + 1 + e2)
    else:
        raise DomainError(f"spin must be 1/2 or 1, got {spin!r}")
    return float(out) if out.ndim == 0 else out


def dvector_ratio(D: int, J):
    """Two-spin correlation of the one-dimensional D-vector model, I_{D/2}/I_{D/2-1}."""
    if int(D) != D or D < 1:
        raise DomainError("D must be a positive integer")
    J = np.asarray(J, dtype=float)
    if np.any(J < 0):
        raise DomainError("J must be non-negative")
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(J == 0, 0.0, special.ive(D / 2, J) / special.ive(D / 2 - 1, J))
    return float(out) if out.ndim == 0 else out


def spin_half_reference(beta: float, metric: str = "maximal") -> tuple[float, float]:
    """(Q, expected value) of sigma_3 for spin-1/2 with Q(0) = 1.

    maximal: Q = sinh(beta)/beta, ev = 1/beta - coth(beta);
    minimal: Q = 2 I1(beta)/beta, ev = -I2(beta)/I1(beta).
    """
    b = float(beta)
    if metric == "maximal":
        q = 1.0 if b == 0 else math.sinh(b) / b
        return q, langevin_neg(b)
    if metric == "minimal":
        if abs(b) < 1e-4:
            return 1.0 + b * b / 8, -b / 4 + b**3 / 96
        return 2 * bessel_i(1, b) / b, -special.ive(2, b) / special.ive(1, b)
    raise DomainError(f"metric must be 'maximal' or 'minimal', got {metric!r}")


# ---------------------------------------------------------------------------
# lambda8


def lambda8_matrix() -> np.ndarray:
    """The diagonal SU(3) generator with the first and third levels permuted."""
    return np.diag([-2.0, 1.0, 1.0]) / SQRT3


def _lambda8_series(beta, terms=30):
    # Q = sum_k (-beta)^k E[E^k] / k!, E = (1 - 3a)/sqrt3
    q = 0.0
    for k in range(terms):
        ek = sum(math.comb(k, j) * (-3) ** j * a_moment(j) for j in range(k + 1)) / SQRT3**k
        q += (-beta) ** k * ek / math.factorial(k)
    return q


def _q_lambda8_closed(beta: float) -> float:
    if abs(beta) < 0.5:
        # the closed form cancels catastrophically near zero
        return _lambda8_series(beta)
    y = abs(beta)
    x = 3**0.25 * math.sqrt(y)
    if beta > 0:
        # sqrt(pi) erfi(x) = 2 exp(x^2) D(x), x^2 = sqrt3 beta
        inner = 6 * math.sqrt(y) - 2 * 3**0.25 * (2 * y + SQRT3) * float(dawson(x))
        return 5 * math.exp(2 * y / SQRT3) * inner / (16 * y**2.5)
    inner = (6 * math.sqrt(y) * math.exp(-SQRT3 * y)
             - 3**0.25 * (SQRT3 - 2 * y) * math.sqrt(math.pi) * math.erf(x))
    return 5 * math.exp(y / SQRT3) * inner / (16 * y**2.5)


def _lambda8_integral(beta: float, power: int) -> float:
    def f(a):
        e = (1 - 3 * a) / SQRT3
        return pdf_a(a) * e**power * math.exp(-beta * e)

    return nested_quad(f, [(0.0, 1.0)], tol=1e-13, rtol=1e-12).value


def q_lambda8(beta: float, method: str = "closed_form") -> float:
    if method == "closed_form":
        return _q_lambda8_closed(float(beta))
    if method == "quadrature":
        return _lambda8_integral(float(beta), 0)
    raise DomainError(f"unknown method {method!r}")


def ev_lambda8(beta: float) -> float:
    return _lambda8_integral(beta, 1) / _lambda8_integral(beta, 0)


# ---------------------------------------------------------------------------
# lambda3


def lambda3_matrix() -> np.ndarray:
    return np.diag([0.0, 1.0, -1.0])


def _lambda3_parts(beta: float):
    """(log-scale, Q/exp(scale), dQ/dbeta / exp(scale)) via the I0 reduction."""
    y = abs(beta)

    def q(a):
        x = beta * (1 - a)
        return pdf_a(a) * special.ive(0, x) * math.exp(-y * a)

    def dq(a):
        x = beta * (1 - a)
        return pdf_a(a) * (1 - a) * special.ive(1, x) * math.exp(-y * a)

    return y, quad_smooth(q), quad_smooth(dq)


def quad_smooth(f: Callable[[float], float]) -> float:
    return nested_quad(f, [(0.0, 1.0)], tol=1e-13, rtol=1e-12).value


def q_lambda3(beta: float, method: str = "reduced") -> float:
    """Q = int p(a, b) exp(-beta (b - c)) over the simplex.

    ``reduced`` integrates b analytically (Q = int pdf_a(a) I0(beta(1-a)) da);
    ``quadrature`` is the two-dimensional integral.
    """
    if method == "reduced":
        scale, q, _ = _lambda3_parts(float(beta))
        return q * math.exp(scale)
    if method == "quadrature":
        return _lambda3_nested(beta, 0)
    raise DomainError(f"unknown method {method!r}")


def _lambda3_nested(beta, power):
    def f(a, b):
        c = 1 - a - b
        if b <= 0 or c <= 0:
            return 0.0
        e = b - c
        dens = 15 * (1 - a) * math.sqrt(a) / (4 * math.pi * math.sqrt(b * c))
        return dens * e**power * math.exp(-beta * e)

    return nested_quad(f, [(0.0, 1.0), (0.0, lambda a: 1 - a)], tol=1e-12, rtol=1e-10).value


def ev_lambda3(beta: float, method: str = "reduced") -> float:
    if method == "reduced":
        _, q, dq = _lambda3_parts(float(beta))
        return -dq / q
    if method == "quadrature":
        return _lambda3_nested(beta, 1) / _lambda3_nested(beta, 0)
    raise DomainError(f"unknown method {method!r}")


# ---------------------------------------------------------------------------
# lambda1, strong equilibrium


def lambda1_matrix() -> np.ndarray:
    """Off-diagonal generator with eigenvalues {-1, 0, 1}."""
    return np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])


def _lambda1_parts(beta: float):
    # g = u^2; inner h-integral gives pi exp(beta(3u^2-1)/2) I0(beta(1-u^2)/2)
    y = abs(beta)

    def expo(u):
        return beta * (3 * u * u - 1) / 2 + abs(beta) * (1 - u * u) / 2 - y

    def q(u):
        return math.pi * special.ive(0, beta * (1 - u * u) / 2) * math.exp(expo(u))

    def dq(u):
        x = beta * (1 - u * u) / 2
        return math.pi * math.exp(expo(u)) * (
            (3 * u * u - 1) / 2 * special.ive(0, x) + (1 - u * u) / 2 * special.ive(1, x))

    return y, quad_smooth(q), quad_smooth(dq)


def _lambda1_nested(beta, power):
    def f(g, h):
        if g <= 0 or h <= 0 or g + h >= 1:
            return 0.0
        e = 1 - 2 * g - h
        return e**power * math.exp(-beta * e) / (2 * math.sqrt(g * h * (1 - g - h)))

    return nested_quad(f, [(0.0, 1.0), (0.0, lambda g: 1 - g)], tol=1e-12, rtol=1e-10).value


def q_lambda1_strong(beta: float, method: str = "reduced") -> float:
    if method == "reduced":
        scale, q, _ = _lambda1_parts(float(beta))
        return q * math.exp(scale)
    if method == "quadrature":
        return _lambda1_nested(beta, 0)
    raise DomainError(f"unknown method {method!r}")


def ev_lambda1(beta: float, method: str = "reduced") -> float:
    if method == "reduced":
        _, q, dq = _lambda1_parts(float(beta))
        return -dq / q
    if method == "quadrature":
        return _lambda1_nested(beta, 1) / _lambda1_nested(beta, 0)
    raise DomainError(f"unknown method {method!r}")


def diff_vs_langevin(beta: float) -> float:
    return langevin_neg(beta) - ev_lambda1(beta)


# ---------------------------------------------------------------------------
# 4x4 path-graph observable, strong equilibrium


def observable4() -> np.ndarray:
    return np.diag(np.ones(3), 1) + np.diag(np.ones(3), -1)


def observable4_eigenvalues() -> np.ndarray:
    return np.linalg.eigvalsh(observable4())


def _strong4_parts(beta: float, omega=None):
    w = np.sort(observable4_eigenvalues() if omega is None else np.asarray(omega, dtype=float))
    # pair extreme levels and middle levels; each pair is an arcsine average
    s1, d1 = (w[0] + w[3]) / 2, (w[0] - w[3]) / 2
    s2, d2 = (w[1] + w[2]) / 2, (w[1] - w[2]) / 2

    def expo(t):
        return -beta * (t * s1 + (1 - t) * s2) + abs(beta * t * d1) + abs(beta * (1 - t) * d2)

    shift = max(expo(0.0), expo(1.0))

    def q(t):
        return special.ive(0, beta * t * d1) * special.ive(0, beta * (1 - t) * d2) * math.exp(
            expo(t) - shift)

    def dq(t):
        x1, x2 = beta * t * d1, beta * (1 - t) * d2
        i01, i02 = special.ive(0, x1), special.ive(0, x2)
        val = (-(t * s1 + (1 - t) * s2) * i01 * i02 + t * d1 * special.ive(1, x1) * i02
               + (1 - t) * d2 * i01 * special.ive(1, x2))
        return val * math.exp(expo(t) - shift)

    return shift, math.pi**2 * quad_smooth(q), math.pi**2 * quad_smooth(dq)


def q_strong4(beta: float) -> float:
    shift, q, _ = _strong4_parts(float(beta))
    return q * math.exp(shift)


def ev_strong4(beta: float) -> float:
    _, q, dq = _strong4_parts(float(beta))
    return -dq / q


# ---------------------------------------------------------------------------
# curves


@dataclass
class ThermoCurve:
    observable_id: str
    method: str
    beta_grid: list[float]
    q_values: list[float]
    expected_values: list[float]
    extra: dict[str, list[float]] = field(default_factory=dict)

    def rows(self) -> tuple[list[str], list[list[float]]]:
        header = ["beta", "Q", "expected_value", *self.extra]
        rows = [[b, q, e, *(self.extra[k][i] for k in self.extra)]
                for i, (b, q, e) in enumerate(zip(self.beta_grid, self.q_values,
                                                  self.expected_values))]
        return header, rows


_CURVES: dict[str, tuple[str, Callable, Callable]] = {
    "lambda8": ("closed_form", lambda b: q_lambda8(b), ev_lambda8),
    "lambda3": ("quadrature", q_lambda3, ev_lambda3),
    "lambda1_strong": ("quadrature", q_lambda1_strong, ev_lambda1),
    "four_by_four_strong": ("quadrature", q_strong4, ev_strong4),
    "spin_half_maximal": ("closed_form", lambda b: spin_half_reference(b, "maximal")[0],
                          lambda b: spin_half_reference(b, "maximal")[1]),
    "spin_half_minimal": ("closed_form", lambda b: spin_half_reference(b, "minimal")[0],
                          lambda b: spin_half_reference(b, "minimal")[1]),
}


def thermo_curve(observable_id: str, betas: Sequence[float]) -> ThermoCurve:
    if observable_id not in _CURVES:
        raise DomainError(f"unknown observable {observable_id!r}")
    method, qf, evf = _CURVES[observable_id]
    betas = [float(b) for b in betas]
    curve = ThermoCurve(observable_id, method, betas, [qf(b) for b in betas],
                        [evf(b) for b in betas])
    if observable_id in ("lambda3", "lambda1_strong"):
        curve.extra["neg_langevin"] = [langevin_neg(b) for b in betas]
    return curve
