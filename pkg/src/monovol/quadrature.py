"""Monte Carlo and nested adaptive quadrature, truncated integrals and limits.

Every Monte Carlo routine here draws from fixed-size blocks; block ``k`` of
stream ``t`` is seeded with ``SeedSequence(seed, spawn_key=(t, k))`` and fed to
a Philox generator.  Blocks are reduced in index order, so the result depends
on ``(seed, n)`` only and never on how many threads evaluated the blocks.
"""
from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate
from scipy.special import ndtr

from . import states
from .errors import AccuracyError, DomainError, IntegrandError
from .metrics import Metric, VolumeElementKind, batched_minor_sums, closed_form_weight

BLOCK = 1 << 16

# angular box volumes
_ANG3 = math.pi * math.pi * (2 * math.pi) ** 2  # theta1, theta2, nu, theta3
_ANG4 = math.pi**4 * (2 * math.pi) ** 2  # xi1..xi4, xi5, nu


@dataclass(frozen=True)
class IntegralEstimate:
    value: float
    std_error: float
    n_samples: int
    seed: int
    method: str = "mc"

    def as_dict(self) -> dict:
        return {
            "value": self.value,
            "std_error": self.std_error,
            "n_samples": self.n_samples,
            "seed": self.seed,
            "method": self.method,
        }


@dataclass(frozen=True)
class CutoffSchedule:
    epsilons: tuple[float, ...] = (0.2, 0.1, 0.05, 0.025)

    def __post_init__(self):
        eps = tuple(float(e) for e in self.epsilons)
        if not eps:
            raise DomainError("empty cutoff schedule")
        if any(not 0 < e < 1 for e in eps):
            raise DomainError(f"cutoffs must lie in (0, 1): {eps}")
        if any(e1 <= e2 for e1, e2 in zip(eps, eps[1:])):
            raise DomainError(f"cutoffs must be strictly decreasing: {eps}")
        object.__setattr__(self, "epsilons", eps)

    def __len__(self):
        return len(self.epsilons)

    def __iter__(self):
        return iter(self.epsilons)


def worker_count() -> int:
    env = os.environ.get("MT_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def block_rng(seed: int, stream: int, block: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream), int(block)))
    return np.random.Generator(np.random.Philox(ss))


def _block_stats(values: np.ndarray):
    m = values.size
    mean = float(np.mean(values))
    m2 = float(np.sum((values - mean) ** 2))
    return m, mean, m2


def run_blocks(sampler: Callable[[np.random.Generator, int], np.ndarray], n: int, seed: int,
               stream: int = 0, threads: int | None = None) -> IntegralEstimate:
    """Mean of ``sampler`` outputs over ``n`` draws, with its standard error.

    ``sampler(rng, m)`` must return ``m`` finite values.
    """
    n = int(n)
    if n < 2:
        raise DomainError("need at least two samples")
    if seed < 0:
        raise DomainError("seed must be non-negative")
    sizes = [BLOCK] * (n // BLOCK)
    if n % BLOCK:
        sizes.append(n % BLOCK)

    def one(k):
        return _block_stats(np.asarray(sampler(block_rng(seed, stream, k), sizes[k]), dtype=float))

    threads = threads or worker_count()
    if threads > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=min(threads, len(sizes))) as ex:
            stats = list(ex.map(one, range(len(sizes))))
    else:
        stats = [one(k) for k in range(len(sizes))]

    # Chan et al. pairwise update, in block order
    cnt, mean, m2 = stats[0]
    for nb, mb, m2b in stats[1:]:
        tot = cnt + nb
        delta = mb - mean
        mean += delta * nb / tot
        m2 += m2b + delta * delta * cnt * nb / tot
        cnt = tot
    var = m2 / (cnt - 1)
    return IntegralEstimate(mean, math.sqrt(var / cnt), cnt, int(seed), "mc")


@dataclass(frozen=True)
class JointEstimate:
    """Means of several integrands over the same draws, with their covariance."""

    means: np.ndarray
    cov: np.ndarray  # covariance of the means
    n_samples: int
    seed: int

    def estimate(self, k: int) -> IntegralEstimate:
        return IntegralEstimate(float(self.means[k]), float(math.sqrt(self.cov[k, k])),
                                self.n_samples, self.seed, "mc")

    def combine(self, w) -> tuple[float, float]:
        """Value and standard error of ``sum_k w_k mean_k``."""
        w = np.asarray(w, dtype=float)
        return float(w @ self.means), float(math.sqrt(max(w @ self.cov @ w, 0.0)))


def run_blocks_multi(sampler: Callable[[np.random.Generator, int], np.ndarray], n: int,
                     seed: int, stream: int = 0, threads: int | None = None) -> JointEstimate:
    """Like :func:`run_blocks` for a sampler returning an ``(m, K)`` array."""
    n = int(n)
    if n < 2:
        raise DomainError("need at least two samples")
    if seed < 0:
        raise DomainError("seed must be non-negative")
    sizes = [BLOCK] * (n // BLOCK)
    if n % BLOCK:
        sizes.append(n % BLOCK)

    def one(k):
        v = np.asarray(sampler(block_rng(seed, stream, k), sizes[k]), dtype=float)
        mean = v.mean(axis=0)
        d = v - mean
        return v.shape[0], mean, d.T @ d

    threads = threads or worker_count()
    if threads > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=min(threads, len(sizes))) as ex:
            stats = list(ex.map(one, range(len(sizes))))
    else:
        stats = [one(k) for k in range(len(sizes))]

    cnt, mean, m2 = stats[0]
    for nb, mb, m2b in stats[1:]:
        tot = cnt + nb
        delta = mb - mean
        mean = mean + delta * nb / tot
        m2 = m2 + m2b + np.outer(delta, delta) * cnt * nb / tot
        cnt = tot
    return JointEstimate(mean, m2 / (cnt - 1) / cnt, cnt, int(seed))


def common_draws(samplers):
    """Evaluate several samplers on identical random draws, as columns."""

    def sampler(rng, m):
        state = rng.bit_generator.state
        cols = []
        for f in samplers:
            rng.bit_generator.state = state
            cols.append(f(rng, m))
        return np.column_stack(cols)

    return sampler


def _scaled(est: IntegralEstimate, factor: float) -> IntegralEstimate:
    return IntegralEstimate(est.value * factor, est.std_error * abs(factor), est.n_samples,
                            est.seed, est.method)


def mc_integrate(f: Callable[[np.ndarray], np.ndarray], box: Sequence[tuple[float, float]],
                 n: int, seed: int, threads: int | None = None) -> IntegralEstimate:
    """Plain Monte Carlo over a rectangular box.

    ``f`` takes an ``(m, d)`` array of points and returns ``m`` values.
    """
    lo = np.array([b[0] for b in box], dtype=float)
    hi = np.array([b[1] for b in box], dtype=float)
    if np.any(hi < lo):
        raise DomainError("box upper bounds must not be below lower bounds")
    vol = float(np.prod(hi - lo))

    def sampler(rng, m):
        x = lo + (hi - lo) * rng.random((m, lo.size))
        y = np.asarray(f(x), dtype=float)
        bad = ~np.isfinite(y)
        if bad.any():
            pt = x[np.argmax(bad)]
            raise IntegrandError(f"non-finite integrand at {pt.tolist()}", point=pt)
        return y

    return _scaled(run_blocks(sampler, n, seed, threads=threads), vol)


# ---------------------------------------------------------------------------
# nested adaptive quadrature


def _cos_map(lo, hi, u):
    """x = lo + (hi-lo)(1 - cos(pi u))/2 and dx/du; removes x^(-1/2) end singularities."""
    half = 0.5 * (hi - lo)
    return lo + half * (1 - math.cos(math.pi * u)), half * math.pi * math.sin(math.pi * u)


def nested_quad(f: Callable[..., float], bounds: Sequence, tol: float = 1e-10,
                singular: bool = True, limit: int = 200, rtol: float = 0.0) -> IntegralEstimate:
    """Iterated adaptive quadrature over up to three dimensions.

    ``bounds[0]`` is the outermost variable; ``bounds[k]`` is a ``(lo, hi)``
    pair whose entries may be callables of the outer variables ``x[:k]``.
    With ``singular`` each variable is mapped by ``x = lo + (hi-lo)(1-cos pi u)/2``,
    which makes inverse-square-root endpoint singularities integrable smoothly.
    The result is accepted when the error estimate is below ``tol`` or below
    ``rtol`` times the magnitude of the value.
    """
    dims = len(bounds)
    if not 1 <= dims <= 3:
        raise DomainError("nested_quad supports one to three dimensions")
    neval = [0]
    inner_tol = tol / 10

    def limits(k, outer):
        lo, hi = bounds[k]
        lo = lo(*outer) if callable(lo) else lo
        hi = hi(*outer) if callable(hi) else hi
        return float(lo), float(hi)

    def level(k, outer):
        lo, hi = limits(k, outer)
        if hi <= lo:
            return 0.0, 0.0

        def g(t):
            if singular:
                x, w = _cos_map(lo, hi, t)
            else:
                x, w = t, 1.0
            if w == 0.0:
                return 0.0
            if k == dims - 1:
                neval[0] += 1
                return w * f(*outer, x)
            return w * level(k + 1, outer + (x,))[0]

        a, b = (0.0, 1.0) if singular else (lo, hi)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            val, err = integrate.quad(g, a, b, epsabs=inner_tol if k else tol / 4,
                                      epsrel=max(1e-13, rtol / 10), limit=limit)
        return val, err

    val, err = level(0, ())
    est = IntegralEstimate(float(val), 0.0, neval[0], 0, "quad")
    if not math.isfinite(val) or err > max(tol, rtol * abs(val)):
        raise AccuracyError(f"quadrature error estimate {err:.3e} exceeds tol {tol:.1e}", est)
    return est


def quad1(f: Callable[[float], float], lo: float, hi: float, tol: float = 1e-12,
          singular: bool = False) -> float:
    """One-dimensional convenience wrapper returning a float."""
    return nested_quad(f, [(lo, hi)], tol=tol, singular=singular).value


# ---------------------------------------------------------------------------
# proposals


def edge_power_sample(u, upper, k):
    """Draw x in [0, upper] from density proportional to x (1 - x^2)^(-k), k > 1.

    Returns ``(x, 1 - x^2, norm)`` where ``norm`` is the integral of
    ``x (1 - x^2)^(-k)`` over ``[0, upper]``.
    """
    top = (1 - upper * upper) ** (1 - k)
    norm = (top - 1) / (2 * (k - 1))
    one_minus = (1 + u * (top - 1)) ** (1 / (1 - k))
    return np.sqrt(1 - one_minus), one_minus, norm


def dirichlet_half(rng, m, dim=3):
    """Dirichlet(1/2, ..., 1/2) via squared coordinates of a Gaussian direction."""
    z = rng.standard_normal((m, dim)) ** 2
    return z / z.sum(axis=1, keepdims=True)


def _power_sample(u, lo, k):
    """x in [lo, 1] with density proportional to x^(-k), k > 1; returns (x, norm)."""
    top = lo ** (1 - k)
    norm = (top - 1) / (k - 1)
    return (top - u * (top - 1)) ** (1 / (1 - k)), norm


# ---------------------------------------------------------------------------
# n = 3 integrand


def _n3_values(a, b, s, nu, r, t1, t2, t3, metric, omr=None, oms=None):
    """Volume weight times Jacobian at a batch of points (n = 3).

    ``omr`` and ``oms`` are ``1 - r^2`` and ``1 - s^2`` as drawn; the
    determinant uses its factorized form so that it keeps full relative
    precision next to the boundary.
    """
    c = 1 - a - b
    F, G, H = states.offdiag3(s, nu, r, t1, t2, t3)
    aF, aG, aH = np.abs(F) ** 2, np.abs(G) ** 2, np.abs(H) ** 2
    abc = a * b * c
    omr = (1 - r) * (1 + r) if omr is None else omr
    oms = (1 - s) * (1 + s) if oms is None else oms
    det = abc * omr * oms
    w2 = a * b * (1 - aH) + a * c * (1 - aG) + b * c * (1 - aF)
    return closed_form_weight(metric, 3, w2, None, det) * states.jacobian3_array(a, b, s, r, t1, t2)


@dataclass(frozen=True)
class _N3Cut:
    eps_r: float
    eps_s: float
    importance: bool = True

    def radial_norm(self) -> float:
        """Normalizer of the importance proposal: the leading divergence in (R, S)."""
        R, S = 1 - self.eps_r, 1 - self.eps_s
        return ((1 - R * R) ** -1.5 - 1) / 3 * ((1 - S * S) ** -0.5 - 1)


def _n3_draw(rng, m, cut: _N3Cut, metric):
    """Draw (r, s, nu, theta1..3) and their joint density.

    With importance sampling (maximal metric only) r and s follow
    ``r (1 - r^2)^(-5/2)`` and ``s (1 - s^2)^(-3/2)`` on the truncated range,
    and the spheroidal angles follow the surface measure of the unit 3-sphere
    ``sin^2(theta1) sin(theta2) / (2 pi^2)``.  Otherwise everything is uniform.
    """
    x = rng.standard_normal((m, 4))
    u = rng.random((m, 3))
    R, S = 1 - cut.eps_r, 1 - cut.eps_s
    nu = 2 * math.pi * u[:, 2]
    if cut.importance and Metric(metric) is Metric.MAXIMAL:
        r, omr, nr = edge_power_sample(u[:, 0], R, 2.5)
        s, oms, ns = edge_power_sample(u[:, 1], S, 1.5)
        x /= np.linalg.norm(x, axis=1, keepdims=True)
        t1 = np.arccos(np.clip(x[:, 0], -1, 1))
        t2 = np.arctan2(np.hypot(x[:, 2], x[:, 3]), x[:, 1])
        t3 = np.mod(np.arctan2(x[:, 3], x[:, 2]), 2 * math.pi)
        q = (r * omr**-2.5 / nr) * (s * oms**-1.5 / ns)
        q = q * np.sin(t1) ** 2 * np.sin(t2) / (2 * math.pi**2) / (2 * math.pi)
        return r, s, nu, t1, t2, t3, q, omr, oms
    else:
        # uniform angles reuse the Gaussian draws through the normal CDF
        v = ndtr(x)
        r, s = R * u[:, 0], S * u[:, 1]
        t1, t2, t3 = math.pi * v[:, 0], math.pi * v[:, 1], 2 * math.pi * v[:, 2]
        q = np.full(m, 1 / (R * S * _ANG3))
    return r, s, nu, t1, t2, t3, q, (1 - r) * (1 + r), (1 - s) * (1 + s)


def _n3_full_sampler(cut: _N3Cut, metric, indicator=None):
    def sampler(rng, m):
        abc = dirichlet_half(rng, m)
        a, b, c = abc[:, 0], abc[:, 1], abc[:, 2]
        r, s, nu, t1, t2, t3, q, omr, oms = _n3_draw(rng, m, cut, metric)
        q = q * (a * b * c) ** -0.5 / (2 * math.pi)
        vals = _n3_values(a, b, s, nu, r, t1, t2, t3, metric, omr, oms) / q
        if indicator is not None:
            vals = vals * indicator(r, s)
        return vals

    return sampler


def _n3_partial_sampler(a, b, cut: _N3Cut, metric):
    """Integral over (s, nu, r, theta1..3) at fixed diagonal (a, b)."""

    def sampler(rng, m):
        r, s, nu, t1, t2, t3, q, omr, oms = _n3_draw(rng, m, cut, metric)
        return _n3_values(a, b, s, nu, r, t1, t2, t3, metric, omr, oms) / q

    return sampler


def _n3_six_sampler(a, b, nu, t1, t2, t3, cut: _N3Cut, metric):
    """Integral over (s, r) only, all other coordinates fixed."""

    def sampler(rng, m):
        u = rng.random((m, 2))
        R, S = 1 - cut.eps_r, 1 - cut.eps_s
        if cut.importance:
            r, omr, nr = edge_power_sample(u[:, 0], R, 2.5)
            s, oms, ns = edge_power_sample(u[:, 1], S, 1.5)
            q = (r * omr**-2.5 / nr) * (s * oms**-1.5 / ns)
        else:
            r, s = R * u[:, 0], S * u[:, 1]
            omr, oms = (1 - r) * (1 + r), (1 - s) * (1 + s)
            q = np.full(m, 1 / (R * S))
        return _n3_values(a, b, s, nu, r, t1, t2, t3, metric, omr, oms) / q

    return sampler


# ---------------------------------------------------------------------------
# n = 4 integrand (g = h = 0 family)


def _n4_values(a, b, c, s, nu, v, xi, metric):
    F, O, P, Q = states.offdiag4(s, nu, v, xi)
    m = states.rho4_entries(a, b, c, F, O, P, Q)
    w2, w3, det = batched_minor_sums(m)
    d = 1 - a - b - c
    jac = (a * b**2 * c**2 * d**3 * s * (1 - s * s) * v**5 * np.sin(xi[0]) ** 4
           * np.sin(xi[1]) ** 3 * np.sin(xi[2]) ** 2 * np.sin(xi[3]))
    with np.errstate(invalid="ignore", divide="ignore"):
        return closed_form_weight(metric, 4, w2, w3, det) * jac


def _n4_full_sampler(eps, delta, metric, importance=True):
    S = V = 1 - eps

    def sampler(rng, m):
        u = rng.random((m, 11))
        if importance:
            a, na = _power_sample(u[:, 0], delta, 2.5)
            b, nb = _power_sample(u[:, 1], delta, 1.5)
            c, nc = _power_sample(u[:, 2], delta, 1.5)
            q = a**-2.5 * b**-1.5 * c**-1.5 / (na * nb * nc)
            s, oms, ns = edge_power_sample(u[:, 3], S, 2.5)
            v, omv, nv = edge_power_sample(u[:, 4], V, 3.5)
            q = q * (s * oms**-2.5 / ns) * (v * omv**-3.5 / nv)
        else:
            w = 1 - delta
            a, b, c = delta + w * u[:, 0], delta + w * u[:, 1], delta + w * u[:, 2]
            s, v = S * u[:, 3], V * u[:, 4]
            q = np.full(m, 1 / (w**3 * S * V))
        nu = 2 * math.pi * u[:, 5]
        xi = [math.pi * u[:, 6], math.pi * u[:, 7], math.pi * u[:, 8], math.pi * u[:, 9],
              2 * math.pi * u[:, 10]]
        q = q / _ANG4
        inside = (1 - a - b - c) >= delta
        vals = np.zeros(m)
        idx = np.nonzero(inside)[0]
        if idx.size:
            vals[idx] = _n4_values(a[idx], b[idx], c[idx], s[idx], nu[idx], v[idx],
                                   [x[idx] for x in xi], metric) / q[idx]
        return vals

    return sampler


def simplex4_factor_integral(delta, samples, seed, threads=None) -> IntegralEstimate:
    """Integral of a^(-5/2) b^(-3/2) c^(-3/2) d^(-1/2) over the 3-simplex with
    every coordinate at least ``delta``."""

    def sampler(rng, m):
        u = rng.random((m, 3))
        a, na = _power_sample(u[:, 0], delta, 2.5)
        b, nb = _power_sample(u[:, 1], delta, 1.5)
        c, nc = _power_sample(u[:, 2], delta, 1.5)
        d = 1 - a - b - c
        out = np.zeros(m)
        ok = d >= delta
        out[ok] = d[ok] ** -0.5 * na * nb * nc
        return out

    return run_blocks(sampler, samples, seed, threads=threads)


# ---------------------------------------------------------------------------
# public integrals


def truncated_full_integral(kind: VolumeElementKind | str, n: int, eps: float, samples: int,
                            seed: int, *, eps_s: float | None = None, delta: float | None = None,
                            importance: bool = True, threads: int | None = None) -> IntegralEstimate:
    """Volume of the truncated coordinate box under a monotone-metric weight.

    For ``n = 3`` the radial cutoffs are ``r <= 1 - eps`` and ``s <= 1 - eps_s``
    (``eps_s`` defaults to ``eps``).  For ``n = 4`` (the ``g = h = 0`` family)
    ``s, v <= 1 - eps`` and every diagonal entry is kept above ``delta``
    (default ``eps``), since the simplex factor alone is not integrable.
    """
    if isinstance(kind, str):
        kind = VolumeElementKind(kind)
    if not 0 < eps < 1:
        raise DomainError("eps must lie in (0, 1)")
    if n == 3:
        cut = _N3Cut(eps, eps if eps_s is None else eps_s, importance)
        return run_blocks(_n3_full_sampler(cut, kind.metric), samples, seed, threads=threads)
    if n == 4:
        delta = eps if delta is None else delta
        if not 0 < delta < 0.25:
            raise DomainError("simplex floor must lie in (0, 1/4)")
        return run_blocks(_n4_full_sampler(eps, delta, kind.metric, importance), samples, seed,
                          threads=threads)
    raise DomainError(f"n must be 3 or 4, got {n}")


def _ratio(num: IntegralEstimate, den: IntegralEstimate, scale: float = 1.0):
    val = num.value / den.value * scale
    rel = math.hypot(num.std_error / num.value, den.std_error / den.value)
    return val, abs(val) * rel


def edge_variable(eps):
    """x = sqrt(1 - (1 - eps)^2), the natural expansion variable at a radial cutoff."""
    e = np.asarray(eps, dtype=float)
    return np.sqrt(e * (2 - e))


# name -> (uses all points, basis functions of eps)
_MODELS = {
    "linear": (False, lambda e: [np.ones_like(e), e]),
    "sqrt": (False, lambda e: [np.ones_like(e), np.sqrt(e), e]),
    "joint_x": (True, lambda e: [edge_variable(e) ** k for k in range(4)]),
    "s_edge_x": (True, lambda e: [np.ones_like(e), edge_variable(e)]),
    "r_edge_x": (True, lambda e: [np.ones_like(e), edge_variable(e) ** 2,
                                  edge_variable(e) ** 3]),
}


def extrapolation_weights(eps, model: str = "sqrt") -> tuple[np.ndarray, np.ndarray]:
    """(cutoffs used, weights mapping their values onto the eps = 0 intercept).

    ``'linear'`` fits ``c0 + c1 eps`` and ``'sqrt'`` solves
    ``c0 + c1 sqrt(eps) + c2 eps``, both on the last three cutoffs.  The
    ``*_x`` models use every cutoff and polynomials in
    :func:`edge_variable`: after the angular average the truncated integrals
    divided by the radial normalizer are polynomials in ``x_s`` in the s
    direction (exactly linear) and in ``x_r^2, x_r^3, ...`` in the r direction,
    so ``'s_edge_x'`` and ``'r_edge_x'`` suit the iterated limits and
    ``'joint_x'`` (a cubic in x) the joint one.
    """
    if model not in _MODELS:
        raise DomainError(f"unknown extrapolation model {model!r}")
    use_all, basis = _MODELS[model]
    e = np.asarray(eps if use_all else eps[-3:], dtype=float)
    A = np.column_stack(basis(e))
    if e.size < A.shape[1] or e.size < 3:
        raise DomainError(f"model {model!r} needs at least {max(3, A.shape[1])} cutoffs")
    return e, np.linalg.pinv(A)[0]


def extrapolate(eps, values, model: str = "sqrt"):
    """Extrapolate ``values(eps)`` to ``eps = 0``.

    Returns ``(c0, amplification)`` where ``amplification`` is the L2 norm of
    the weights mapping the inputs onto ``c0``.
    """
    e, w = extrapolation_weights(eps, model)
    y = np.asarray(values, dtype=float)[-e.size:]
    return float(w @ y), float(np.linalg.norm(w))


@dataclass
class MarginalEstimate:
    point: tuple[float, ...]
    value: float
    std_error: float
    ratios: list[float]
    ratio_errors: list[float]
    warnings: list[str] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "point": list(self.point),
            "value": self.value,
            "std_error": self.std_error,
            "ratios": self.ratios,
            "ratio_errors": self.ratio_errors,
            "warnings": self.warnings,
        }


def _monotone_warning(ratios, errs):
    diffs = np.diff(ratios)
    if diffs.size < 2:
        return None
    sign = np.sign(diffs[-1])
    tol = 2 * np.sqrt(np.asarray(errs[1:]) ** 2 + np.asarray(errs[:-1]) ** 2)
    if np.any(sign * diffs < -tol):
        return "ratio sequence is not monotone in the cutoff beyond Monte Carlo noise"
    return None


def _series_weights(eps, model):
    e, w = extrapolation_weights(eps, model)
    full = np.zeros(len(eps))
    full[len(eps) - e.size:] = w
    return full


def radial_basis(eps_r: float, eps_s: float) -> dict[str, float]:
    """Truncated radial integrals divided by the normalizer ``N(R, S)``.

    After averaging over the angles the n = 3 maximal integrand in ``(r, s)``
    is ``r^3 u^(-5/2) s v^(-3/2)`` times a polynomial of degree one in each of
    ``u = 1 - r^2`` and ``v = 1 - s^2``.  The truncated integral is therefore
    ``sum p_ij A_i(R) B_j(S)`` with ``A_i = int r^3 u^(i-5/2) dr`` and
    ``B_j = int s v^(j-3/2) ds``; returned are ``A_i B_j / N`` keyed ``'ij'``.
    At the limit these tend to 1 for ``'00'`` and 0 otherwise.
    """
    u0 = eps_r * (2 - eps_r)
    sig = math.sqrt(eps_s * (2 - eps_s))
    nr = (u0**-1.5 - 1) / 3
    a0 = 0.5 * ((2 / 3) * (u0**-1.5 - 1) - 2 * (u0**-0.5 - 1)) / nr
    a1 = 0.5 * (2 * (u0**-0.5 - 1) - 2 * (1 - u0**0.5)) / nr
    # B_0 is the s normalizer itself; B_1 / B_0 = sqrt(1 - S^2)
    return {"00": a0, "10": a1, "01": a0 * sig, "11": a1 * sig}


_EXACT_TERMS = {"joint": ("00", "10", "01", "11"), "r_first": ("00", "01"),
                "s_first": ("00", "10")}


def _exact_weights(cells, order):
    """Weights giving the limit p_00 from a least-squares fit of the radial basis."""
    terms = _EXACT_TERMS[order]
    if len(cells) < len(terms):
        raise DomainError(f"need at least {len(terms)} cutoffs for the exact radial model")
    A = np.array([[radial_basis(*c)[t] for t in terms] for c in cells])
    return np.linalg.pinv(A)[0]


def limiting_ratio_marginal(target: str, eval_points, schedule: CutoffSchedule | Sequence[float],
                            samples: int, seed: int, *, order: str = "joint",
                            model: str = "auto", inner_eps: float = 1e-9,
                            threads: int | None = None) -> list[MarginalEstimate]:
    """Marginal density of the maximal n = 3 volume element by limiting ratios.

    ``target='bivariate_ab'`` evaluates at ``(a, b)``: the six-fold integral over
    ``(s, nu, r, theta1..3)`` divided by the full eight-fold integral.
    ``target='six_dim'`` evaluates at ``(a, b, nu, theta1, theta2, theta3)``:
    the two-fold ``(r, s)`` integral divided by the full integral.

    Both integrals diverge like the radial proposal normalizer ``N(R, S)``;
    after dividing by it each is a short series in the edge variable
    ``x = sqrt(1 - (1 - eps)^2)``, so numerator and denominator are
    extrapolated to ``eps = 0`` separately and their quotient is the limit.
    ``model='auto'`` uses the exact radial basis of :func:`radial_basis` for
    ``bivariate_ab`` and the ``'sqrt'`` series for ``six_dim``, where the
    integrand is not angle-averaged; see :func:`extrapolation_weights` for the
    generic series models.  The per-cutoff ratios are kept in
    ``MarginalEstimate.ratios``.

    ``order`` selects the limit: ``'joint'`` takes ``R = S = 1 - eps``;
    ``'r_first'`` sends ``R`` to its limit first (evaluated at the cutoff
    ``inner_eps``, where the renormalized integrand is still bounded) and then
    extrapolates ``S -> 1`` over the schedule; ``'s_first'`` the reverse.
    """
    if not isinstance(schedule, CutoffSchedule):
        schedule = CutoffSchedule(tuple(schedule))
    if len(schedule) < 3:
        raise DomainError("limiting ratio needs at least three cutoffs")
    if target not in ("bivariate_ab", "six_dim"):
        raise DomainError(f"unknown target {target!r}")
    if order not in ("joint", "r_first", "s_first"):
        raise DomainError(f"unknown limit order {order!r}")
    if model == "auto":
        model = "exact" if target == "bivariate_ab" else "sqrt"
    if model == "exact" and target != "bivariate_ab":
        raise DomainError("the exact radial model needs the angular average (bivariate_ab)")
    eps = list(schedule)
    metric = Metric.MAXIMAL
    points = [tuple(float(x) for x in p) for p in eval_points]
    for p in points:
        want = 2 if target == "bivariate_ab" else 6
        if len(p) != want:
            raise DomainError(f"{target} points need {want} coordinates, got {p}")
        if min(p[0], p[1], 1 - p[0] - p[1]) <= 0:
            raise DomainError(f"evaluation point {p} is not interior to the simplex")

    if order == "joint":
        cells = [(e, e) for e in eps]
    elif order == "r_first":
        cells = [(inner_eps, e) for e in eps]
    else:
        cells = [(e, inner_eps) for e in eps]
    norms = np.array([_N3Cut(*c).radial_norm() for c in cells])
    if model == "exact":
        w = _exact_weights(cells, order) / norms
    else:
        w = _series_weights(eps, model) / norms

    # every cell sees the same draws, so the fit uses the full covariance
    full = run_blocks_multi(
        common_draws([_n3_full_sampler(_N3Cut(*c), metric) for c in cells]),
        samples, seed, stream=1, threads=threads)
    z0, z0_err = full.combine(w)
    out = []
    for p in points:
        if target == "bivariate_ab":
            parts = [_n3_partial_sampler(p[0], p[1], _N3Cut(*c), metric) for c in cells]
        else:
            parts = [_n3_six_sampler(*p, _N3Cut(*c), metric) for c in cells]
        num = run_blocks_multi(common_draws(parts), samples, seed, stream=2, threads=threads)
        p0, p0_err = num.combine(w)
        value = p0 / z0
        err = abs(value) * math.hypot(p0_err / p0, z0_err / z0)
        rs = [_ratio(num.estimate(k), full.estimate(k)) for k in range(len(cells))]
        ratios, rerrs = [x[0] for x in rs], [x[1] for x in rs]
        notes = []
        msg = _monotone_warning(ratios, rerrs)
        if msg:
            notes.append(msg)
        out.append(MarginalEstimate(p, value, err, ratios, rerrs, notes))
    return out


@dataclass
class GrowthReport:
    epsilons: list[float]
    estimates: list[IntegralEstimate]
    exponent: float
    exponent_error: float

    @property
    def diverges(self) -> bool:
        return self.exponent > 2 * self.exponent_error

    def as_dict(self) -> dict:
        return {
            "epsilons": self.epsilons,
            "estimates": [e.as_dict() for e in self.estimates],
            "exponent": self.exponent,
            "exponent_error": self.exponent_error,
            "diverges": self.diverges,
        }


def fit_growth(epsilons, estimates: Sequence[IntegralEstimate]):
    """Weighted log-log fit of estimate against 1/eps; returns (slope, slope_error)."""
    x = np.log(1 / np.asarray(epsilons, dtype=float))
    y = np.log([e.value for e in estimates])
    sig = np.array([max(e.std_error / e.value, 1e-15) for e in estimates])
    A = np.column_stack([np.ones_like(x), x]) / sig[:, None]
    coef, *_ = np.linalg.lstsq(A, y / sig, rcond=None)
    cov = np.linalg.inv(A.T @ A)
    resid = (y - coef[0] - coef[1] * x) / sig
    dof = max(len(x) - 2, 1)
    scale = max(1.0, math.sqrt(float(resid @ resid) / dof))
    return float(coef[1]), float(math.sqrt(cov[1, 1]) * scale)


def divergence_probe(kind: VolumeElementKind | str, n: int,
                     schedule: CutoffSchedule | Sequence[float], samples: int, seed: int, *,
                     integrand: str = "full", threads: int | None = None) -> GrowthReport:
    """Growth of a truncated integral as the cutoff shrinks.

    ``integrand``: ``'full'`` is the truncated volume of :func:`truncated_full_integral`;
    ``'control'`` multiplies the n = 3 integrand by the indicator r, s <= 1/2
    (a bounded, convergent reference); ``'simplex4'`` is the n = 4 simplex factor
    a^(-5/2) b^(-3/2) c^(-3/2) d^(-1/2) with every coordinate kept above eps.
    """
    if isinstance(kind, str):
        kind = VolumeElementKind(kind)
    if not isinstance(schedule, CutoffSchedule):
        schedule = CutoffSchedule(tuple(schedule))
    if len(schedule) < 4:
        raise DomainError("divergence probe needs at least four cutoffs")
    ests = []
    for e in schedule:
        if integrand == "full":
            ests.append(truncated_full_integral(kind, n, e, samples, seed, threads=threads))
        elif integrand == "control":
            if n != 3:
                raise DomainError("control integrand is defined for n = 3")
            ind = lambda r, s: ((r <= 0.5) & (s <= 0.5)).astype(float)  # noqa: E731
            cut = _N3Cut(e, e, importance=False)
            ests.append(run_blocks(_n3_full_sampler(cut, kind.metric, ind), samples, seed,
                                   threads=threads))
        elif integrand == "simplex4":
            ests.append(simplex4_factor_integral(e, samples, seed, threads=threads))
        else:
            raise DomainError(f"unknown probe integrand {integrand!r}")
    slope, err = fit_growth(list(schedule), ests)
    return GrowthReport(list(schedule), ests, slope, err)
