"""Invariant suites run by ``monovol check`` and reused by the test-suite.

Every suite returns :class:`CheckResult` records carrying the observed
worst-case discrepancy and the threshold it is held to.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np

from . import distributions as dist
from . import states, thermo
from .metrics import Metric, closed_form_weight, eigenvalue_weight, minor_sums, route_constant
from .quadrature import nested_quad


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    observed: float
    threshold: float

    def as_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "observed": self.observed,
                "threshold": self.threshold}


def _result(name, observed, threshold) -> CheckResult:
    observed = float(observed)
    return CheckResult(name, bool(observed <= threshold), observed, threshold)


# ---------------------------------------------------------------------------
# random coordinate points


def random_points3(rng: np.random.Generator, n: int, dtype=np.float64, margin=0.0):
    """Coordinates ``(a, b, s, nu, r, t1, t2, t3)`` as arrays of ``dtype``."""
    lo, hi = margin, 1 - margin
    abc = rng.dirichlet((1, 1, 1), n) * (1 - 3 * margin) + margin
    x = [abc[:, 0], abc[:, 1], rng.uniform(lo, hi, n), rng.uniform(0, 2 * math.pi, n),
         rng.uniform(lo, hi, n), rng.uniform(lo * math.pi, hi * math.pi, n),
         rng.uniform(lo * math.pi, hi * math.pi, n), rng.uniform(0, 2 * math.pi, n)]
    return [np.asarray(v, dtype=dtype) for v in x]


def random_points4(rng: np.random.Generator, n: int, dtype=np.float64, margin=0.0):
    """Coordinates ``(a, b, c, s, nu, v, xi1..xi5)`` as arrays of ``dtype``."""
    lo, hi = margin, 1 - margin
    abcd = rng.dirichlet((1, 1, 1, 1), n) * (1 - 4 * margin) + margin
    x = [abcd[:, 0], abcd[:, 1], abcd[:, 2], rng.uniform(lo, hi, n),
         rng.uniform(0, 2 * math.pi, n), rng.uniform(lo, hi, n)]
    x += [rng.uniform(lo * math.pi, hi * math.pi, n) for _ in range(4)]
    x.append(rng.uniform(0, 2 * math.pi, n))
    return [np.asarray(v, dtype=dtype) for v in x]


def cofactor_det(m: np.ndarray) -> np.ndarray:
    """Determinant of a stack of small matrices by Laplace expansion (any dtype)."""
    n = m.shape[-1]
    if n == 1:
        return m[..., 0, 0]
    if n == 2:
        return m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]
    total = 0
    for j in range(n):
        cols = [k for k in range(n) if k != j]
        minor = m[..., 1:, :][..., :, cols]
        total = total + (-1) ** j * m[..., 0, j] * cofactor_det(minor)
    return total


# ---------------------------------------------------------------------------
# suites


def det_identity_error(n: int, count: int, seed: int) -> float:
    """Worst relative gap between the closed-form and direct determinants."""
    rng = np.random.default_rng(seed)
    ld = np.longdouble
    if n == 3:
        a, b, s, nu, r, t1, t2, t3 = random_points3(rng, count, ld)
        F, G, H = states.offdiag3(s, nu, r, t1, t2, t3)
        direct = cofactor_det(states.rho3_entries(a, b, F, G, H)).real
        closed = a * b * (1 - a - b) * (1 - r * r) * (1 - s * s)
    elif n == 4:
        a, b, c, s, nu, v, *xi = random_points4(rng, count, ld)
        F, O, P, Q = states.offdiag4(s, nu, v, xi)
        direct = cofactor_det(states.rho4_entries(a, b, c, F, O, P, Q)).real
        closed = a * b * c * (1 - a - b - c) * (1 - s * s) * (1 - v * v)
    else:
        raise ValueError("n must be 3 or 4")
    return float(np.max(np.abs(direct - closed) / np.abs(closed)))


def _fd_jacobian(fun: Callable, x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    cols = []
    for k in range(len(x)):
        e = np.zeros_like(x)
        e[k] = h
        cols.append((fun(x + e) - fun(x - e)) / (2 * h))
    return np.column_stack(cols)


def jacobian_error(n: int, count: int, seed: int) -> float:
    """Worst relative gap between closed-form and finite-difference Jacobians."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    if n == 3:
        pts = np.column_stack(random_points3(rng, count, margin=0.05))
        for x in pts:
            fd = abs(np.linalg.det(_fd_jacobian(states.real_coords3, x)))
            q = states.CoordinatePoint3(*x)
            worst = max(worst, abs(fd / states.jacobian3(q) - 1))
    elif n == 4:
        pts = np.column_stack(random_points4(rng, count, margin=0.05))
        for x in pts:
            fd = abs(np.linalg.det(_fd_jacobian(states.real_coords4, x)))
            q = states.CoordinatePoint4(*x)
            worst = max(worst, abs(fd / states.jacobian4(q) - 1))
    else:
        raise ValueError("n must be 3 or 4")
    return worst


def random_state(rng: np.random.Generator, n: int) -> tuple[np.ndarray, np.ndarray]:
    """(spectrum, matrix) with a Dirichlet(1) spectrum and a Haar-random basis."""
    p = rng.dirichlet(np.ones(n))
    z = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    u, rr = np.linalg.qr(z)
    u = u * (np.diag(rr) / np.abs(np.diag(rr)))
    return p, (u * p) @ u.conj().T


def metric_route_error(metric: str, n: int, count: int, seed: int) -> tuple[float, float]:
    """(worst deviation of closed/eigen ratio from its constant, worst pair-identity gap)."""
    rng = np.random.default_rng(seed)
    const = route_constant(metric, n)
    worst_ratio = worst_pairs = 0.0
    for _ in range(count):
        p, m = random_state(rng, n)
        ms = minor_sums(m)
        closed = closed_form_weight(metric, n, ms.w2, ms.w3, ms.det)
        ratio = closed / eigenvalue_weight(metric, p)
        worst_ratio = max(worst_ratio, abs(ratio / const - 1))
        pairs = math.prod(p[i] + p[j] for i, j in itertools.combinations(range(n), 2))
        if n == 3:
            ident = ms.w2 - ms.det
        elif n == 4:
            ident = ms.w2 * ms.w3 - ms.w3**2 - ms.det
        else:
            ident = 1.0
        worst_pairs = max(worst_pairs, abs(ident / pairs - 1))
    return worst_ratio, worst_pairs


def _simplex_quad(f, tol=1e-11):
    # the density has sqrt(b c) at both ends of the inner range; skip exact endpoints
    def g(a, b):
        c = 1 - a - b
        return 0.0 if b <= 0 or c <= 0 else f(a, b)

    return nested_quad(g, [(0.0, 1.0), (0.0, lambda a: 1 - a)], tol=tol).value


def normalization_errors() -> dict[str, float]:
    out = {
        "pdf_a": abs(nested_quad(dist.pdf_a, [(0.0, 1.0)], tol=1e-12).value - 1),
        "pdf_b": abs(nested_quad(lambda b: dist.pdf_b(b) if b > 0 else 0.0,
                                 [(0.0, 1.0)], tol=1e-12).value - 1),
        "pdf_bivariate": abs(_simplex_quad(dist.pdf_bivariate) - 1),
    }
    # nu and theta3 integrate to (2 pi)^2; theta1, theta2 numerically
    ang = nested_quad(lambda t1, t2: math.sin(t1) ** 4 * math.sin(t2) ** 3,
                      [(0.0, math.pi), (0.0, math.pi)], tol=1e-13, singular=False).value
    six = _simplex_quad(lambda a, b: dist.pdf_six(a, b, math.pi / 2, math.pi / 2))
    out["pdf_six"] = abs(six * ang * 4 * math.pi**2 - 1)
    return out


_MOMENT_FUNCS = {
    "a": lambda a, b: a,
    "b": lambda a, b: b,
    "c": lambda a, b: 1 - a - b,
    "ab": lambda a, b: a * b,
    "a2": lambda a, b: a * a,
    "b2": lambda a, b: b * b,
    "c2": lambda a, b: (1 - a - b) ** 2,
}


def moment_errors() -> dict[str, float]:
    table = dist.moments()
    return {k: abs(_simplex_quad(lambda a, b, f=f: f(a, b) * dist.pdf_bivariate(a, b))
                   - float(table[k])) for k, f in _MOMENT_FUNCS.items()}


def cubic_special_cases(r: float, s: float, t1: float, t2: float) -> dict[str, list[float]]:
    """Closed-form roots for the special parameter choices."""
    sin2 = math.sin(t1) ** 2 * math.sin(t2) ** 2
    p1 = math.sqrt(s * s + 4 * r * r * (1 + s))
    p2 = math.sqrt(s * s + 4 * r * r * (1 - s))
    return {
        "factor_one": [(r * r - 1) * (1 + s), 0.5 * (1 - s) * (-2 - s + p1),
                       -0.5 * (1 - s) * (2 + s + p1)],
        "factor_minus_three": [(r * r - 1) * (1 - s), 0.5 * (1 + s) * (-2 + s + p2),
                               -0.5 * (1 + s) * (2 - s + p2)],
        "s_zero": [-1 - r, -1 + r, -1 + r * r],
        "r_zero": [-1 - s, -1 + s, -1 + s * s],
        "s_one": [0.0, 0.0, -2 * (1 - r * r + r * r * sin2)],
        "r_one": [0.0, 0.0, -2 + s + s * s - 2 * s * sin2],
    }


def cubic_residual_max(count: int, seed: int) -> float:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(count):
        r, s = rng.uniform(0, 1, 2)
        t1, t2 = rng.uniform(0, math.pi, 2)
        args = {
            "factor_one": (r, s, 0.0, t2),
            "factor_minus_three": (r, s, math.pi / 2, math.pi / 2),
            "s_zero": (r, 0.0, t1, t2),
            "r_zero": (0.0, s, t1, t2),
            "s_one": (r, 1.0, t1, t2),
            "r_one": (1.0, s, t1, t2),
        }
        for case, (rr, ss, a1, a2) in args.items():
            for x in cubic_special_cases(rr, ss, a1, a2)[case]:
                worst = max(worst, abs(states.cubic_residual(x, rr, ss, a1, a2)))
    return worst


def special_function_error() -> float:
    x = np.linspace(-6, 6, 241)
    errs = [
        # erfi(x) = 2/sqrt(pi) exp(x^2) D(x), checked against the defining series via erf(ix)
        np.max(np.abs(thermo.erfi(x) - np.array([_erfi_series(v) for v in x]))
               / np.maximum(1, np.abs(thermo.erfi(x)))),
        np.max(np.abs(thermo.erf(-x) + thermo.erf(x))),
        np.max(np.abs(thermo.dawson(x) - math.sqrt(math.pi) / 2 * np.exp(-x * x)
                      * thermo.erfi(x))),
    ]
    xs = np.linspace(0.1, 30, 60)
    for nu in (0.5, 1, 1.5, 2, 3):
        lhs = thermo.bessel_i(nu - 1, xs) - thermo.bessel_i(nu + 1, xs)
        rhs = 2 * nu / xs * thermo.bessel_i(nu, xs)
        errs.append(np.max(np.abs(lhs - rhs) / np.abs(rhs)))
    return float(max(errs))


def _erfi_series(x: float) -> float:
    # 2/sqrt(pi) sum x^(2k+1) / (k! (2k+1)), summed to convergence
    term, total, k = x, x, 0
    while abs(term) > 1e-17 * abs(total) or k < 5:
        k += 1
        term *= x * x / k
        total += term / (2 * k + 1)
    return 2 / math.sqrt(math.pi) * total


def thermo_origin_errors() -> dict[str, float]:
    return {
        "q_lambda8(0)": abs(thermo.q_lambda8(0.0) - 1),
        "ev_lambda8(0)": abs(thermo.ev_lambda8(0.0) + 2 / (7 * math.sqrt(3))),
        "q_lambda3(0)": abs(thermo.q_lambda3(0.0) - 1),
        "ev_lambda3(0)": abs(thermo.ev_lambda3(0.0)),
        "q_lambda1(0)": abs(thermo.q_lambda1_strong(0.0) - math.pi),
        "ev_lambda1(0)": abs(thermo.ev_lambda1(0.0)),
        "q_strong4(0)": abs(thermo.q_strong4(0.0) - math.pi**2),
        "ev_strong4(0)": abs(thermo.ev_strong4(0.0)),
    }


def run_all(seed: int = 0) -> list[CheckResult]:
    """Fast versions of every invariant suite (a few seconds in total)."""
    res = []
    for n in (3, 4):
        res.append(_result(f"determinant_identity_n{n}", det_identity_error(n, 2000, seed), 1e-12))
        res.append(_result(f"jacobian_fd_n{n}", jacobian_error(n, 20, seed), 1e-6))
    for metric in Metric:
        for n in (2, 3, 4):
            ratio, pairs = metric_route_error(metric.value, n, 200, seed)
            res.append(_result(f"metric_routes_{metric.value}_n{n}", ratio, 1e-10))
            if n > 2:
                res.append(_result(f"pair_product_identity_{metric.value}_n{n}", pairs, 1e-10))
    for k, v in normalization_errors().items():
        res.append(_result(f"normalization_{k}", v, 1e-8))
    for k, v in moment_errors().items():
        res.append(_result(f"moment_{k}", v, 1e-8))
    res.append(_result("moments_sum_to_one",
                       abs(sum(dist.moments()[k] for k in "abc") - Fraction(1)), 0))
    res.append(_result("pdf_a_peak", abs(dist.pdf_a(1 / 3) - 5 / (2 * math.sqrt(3))), 1e-12))
    res.append(_result("cubic_special_cases", cubic_residual_max(50, seed), 1e-12))
    res.append(_result("special_functions", special_function_error(), 1e-11))
    for k, v in thermo_origin_errors().items():
        res.append(_result(f"thermo_{k}", v, 1e-8))
    eig = np.sort(thermo.observable4_eigenvalues())
    want = np.array([-thermo.PHI, 1 - thermo.PHI, thermo.PHI - 1, thermo.PHI])
    res.append(_result("observable4_spectrum", np.max(np.abs(eig - want)), 1e-12))
    return res
