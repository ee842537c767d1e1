"""Volume elements of the minimal (Bures) and maximal monotone metrics.

Two independent routes are provided.  The closed forms use sums of principal
minors; the eigenvalue route builds the product over all ordered eigenvalue
pairs of the Morozova-Chentsov mean (``p_i + p_j`` for the minimal metric,
``2 p_i p_j / (p_i + p_j)`` for the maximal one) and takes its inverse square
root.  The two agree up to a constant that depends only on ``n`` and the
metric, see :func:`route_constant`.
"""
from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, SingularStateError
from .states import DensityMatrix

EIG_TOL = 1e-12


class Metric(str, enum.Enum):
    MINIMAL = "minimal"
    MAXIMAL = "maximal"


class Route(str, enum.Enum):
    CLOSED_FORM = "closed_form"
    EIGENVALUE = "eigenvalue"


@dataclass(frozen=True)
class VolumeElementKind:
    metric: Metric = Metric.MAXIMAL
    route: Route = Route.CLOSED_FORM

    def __post_init__(self):
        object.__setattr__(self, "metric", Metric(self.metric))
        object.__setattr__(self, "route", Route(self.route))


@dataclass(frozen=True)
class MinorSums:
    w1: float
    w2: float
    w3: float | None
    det: float


def _as_matrix(rho) -> np.ndarray:
    if isinstance(rho, DensityMatrix):
        return rho.entries
    return np.asarray(rho, dtype=complex)


def minor_sums(rho) -> MinorSums:
    """Sums of principal minors of each order (``w3`` only for n >= 3)."""
    m = _as_matrix(rho)
    n = m.shape[0]
    sums = []
    for k in (1, 2, 3):
        if k > n:
            sums.append(None)
            continue
        tot = 0.0
        for idx in itertools.combinations(range(n), k):
            tot += np.linalg.det(m[np.ix_(idx, idx)]).real
        sums.append(float(tot))
    return MinorSums(sums[0], sums[1], sums[2], float(np.linalg.det(m).real))


def pair_sum_product(w2, w3, det, n):
    """prod_{i<j} (p_i + p_j) for a unit-trace spectrum, from minor sums."""
    if n == 2:
        return 1.0
    if n == 3:
        return w2 - det
    if n == 4:
        return w2 * w3 - w3 * w3 - det
    raise DomainError(f"closed form not available for n={n}")


def closed_form_weight(metric, n, w2, w3, det):
    """Closed-form volume element from minor sums (array friendly, constant 1)."""
    metric = Metric(metric)
    pairs = pair_sum_product(w2, w3, det, n)
    if metric is Metric.MAXIMAL:
        return pairs * det ** (0.5 - n)
    return det**-0.5 / pairs


def eigenvalue_weight(metric, p):
    """(prod_{i,j} c(p_i, p_j))^(-1/2) for the spectrum ``p``."""
    metric = Metric(metric)
    p = np.asarray(p, dtype=float)
    pi, pj = np.meshgrid(p, p, indexing="ij")
    if metric is Metric.MINIMAL:
        c = pi + pj
    else:
        c = 2 * pi * pj / (pi + pj)
    # log-sum keeps the product finite for small eigenvalues
    return float(np.exp(-0.5 * np.sum(np.log(c))))


def route_constant(metric, n) -> float:
    """closed_form / eigenvalue ratio, fixed by expanding the pair product.

    maximal: eigenvalue route = prod_{i<j}(p_i+p_j) det^(1/2-n) / 2^(n(n-1)/2);
    minimal: eigenvalue route = det^(-1/2) / (2^(n/2) prod_{i<j}(p_i+p_j)).
    """
    metric = Metric(metric)
    if metric is Metric.MAXIMAL:
        return 2.0 ** (n * (n - 1) / 2)
    return 2.0 ** (n / 2)


def volume_weight(rho, kind: VolumeElementKind = VolumeElementKind()) -> float:
    m = _as_matrix(rho)
    n = m.shape[0]
    p = np.linalg.eigvalsh(m)
    if p[0] <= EIG_TOL:
        raise SingularStateError(f"smallest eigenvalue {p[0]:.3e} at or below {EIG_TOL}")
    if kind.route is Route.EIGENVALUE:
        return eigenvalue_weight(kind.metric, p)
    ms = minor_sums(m)
    return float(closed_form_weight(kind.metric, n, ms.w2, ms.w3, ms.det))


# ---------------------------------------------------------------------------
# batched helpers for the integration code


def batched_minor_sums(m: np.ndarray):
    """(w2, w3, det) for a stack of Hermitian matrices of shape (..., n, n)."""
    n = m.shape[-1]
    d = m[..., np.arange(n), np.arange(n)].real
    w2 = np.zeros(m.shape[:-2])
    for i, j in itertools.combinations(range(n), 2):
        w2 = w2 + d[..., i] * d[..., j] - np.abs(m[..., i, j]) ** 2
    w3 = None
    if n >= 3:
        w3 = np.zeros(m.shape[:-2])
        for idx in itertools.combinations(range(n), 3):
            w3 = w3 + np.linalg.det(m[..., idx, :][..., :, idx]).real
    return w2, w3, np.linalg.det(m).real
