"""Parametrizations of 3x3 and 4x4 density matrices.

The 3x3 matrix is written with diagonal ``(a, b, c)`` and off-diagonal entries
scaled by the geometric means of the diagonal,

    rho = [[a,     h*,    g  ],
           [h,     b,     f* ],
           [g*,    f,     c  ]],   f = sqrt(bc) F, g = sqrt(ac) G, h = sqrt(ab) H.

A point in the integration coordinates ``(a, b, s, nu, r, theta1..3)`` maps to
``(F, G, H)`` through polar coordinates for ``F``, a fixed sequence of plane
rotations that diagonalizes the quadratic form ``|G|^2 + |H|^2 - 2 Re(FGH)``,
and four-dimensional spheroidal coordinates.  The rotation sequence is:

1. rotate the ``(G_R, H_R)`` and ``(G_I, H_I)`` planes by pi/4, giving
   ``P1 = (G_R + H_R)/sqrt2``, ``P2 = (G_R - H_R)/sqrt2``,
   ``P3 = (G_I + H_I)/sqrt2``, ``P4 = (G_I - H_I)/sqrt2``;
2. rotate the mixed pairs ``(P1, P3)`` and ``(P2, P4)`` by ``-alpha`` with
   ``alpha = (1/2) arccot(tan nu)`` taken on the continuous branch
   ``alpha = pi/4 - nu/2``.

After step 2 the form is diagonal with eigenvalue ``1 - s`` on the axes
``J1`` (from ``(P1, P3)``) and ``J2`` (from ``(P2, P4)``), and ``1 + s`` on
``J3`` and ``J4``.  Attaching the ``sqrt(1 + s)`` semi-axes to the ``1 - s``
eigen-directions is what makes ``det rho = abc (1 - r^2)(1 - s^2)``; the
opposite assignment would not.

All functions accept numpy arrays and broadcast; they are dtype generic so
that the identities can be checked in extended precision.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NumericalError

_EPS = np.finfo(float).eps
_TOL = 1e-12


def _check_unit(name, x, lo=0.0, hi=1.0):
    if not (lo - _TOL <= x <= hi + _TOL):
        raise DomainError(f"{name}={x!r} outside [{lo}, {hi}]")


@dataclass(frozen=True)
class BlooreParams3:
    """Diagonal entries plus scaled off-diagonal variables of a 3x3 state."""

    a: float
    b: float
    F: complex = 0j
    G: complex = 0j
    H: complex = 0j

    @property
    def c(self) -> float:
        return 1.0 - self.a - self.b

    def validate(self) -> None:
        _check_unit("a", self.a)
        _check_unit("b", self.b)
        _check_unit("c", self.c)
        for name in "FGH":
            if abs(getattr(self, name)) > 1.0 + _TOL:
                raise DomainError(f"|{name}| > 1")


@dataclass(frozen=True)
class CoordinatePoint3:
    a: float
    b: float
    s: float
    nu: float
    r: float
    theta1: float
    theta2: float
    theta3: float

    @property
    def c(self) -> float:
        return 1.0 - self.a - self.b

    def validate(self) -> None:
        _check_unit("a", self.a)
        _check_unit("b", self.b)
        _check_unit("c", self.c)
        _check_unit("s", self.s)
        _check_unit("r", self.r)
        _check_unit("nu", self.nu, 0.0, 2 * math.pi)
        _check_unit("theta1", self.theta1, 0.0, math.pi)
        _check_unit("theta2", self.theta2, 0.0, math.pi)
        _check_unit("theta3", self.theta3, 0.0, 2 * math.pi)


@dataclass(frozen=True)
class CoordinatePoint4:
    """Point of the 11-dimensional ``g = h = 0`` family of 4x4 states."""

    a: float
    b: float
    c: float
    s: float
    nu: float
    v: float
    xi1: float
    xi2: float
    xi3: float
    xi4: float
    xi5: float

    @property
    def d(self) -> float:
        return 1.0 - self.a - self.b - self.c

    @property
    def xis(self) -> tuple[float, float, float, float, float]:
        return (self.xi1, self.xi2, self.xi3, self.xi4, self.xi5)

    def validate(self) -> None:
        for name in ("a", "b", "c", "d", "s", "v"):
            _check_unit(name, getattr(self, name))
        _check_unit("nu", self.nu, 0.0, 2 * math.pi)
        for i, x in enumerate(self.xis[:4], 1):
            _check_unit(f"xi{i}", x, 0.0, math.pi)
        _check_unit("xi5", self.xi5, 0.0, 2 * math.pi)


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    entries: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.entries, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] not in (2, 3, 4):
            raise DomainError(f"expected a 2x2, 3x3 or 4x4 matrix, got shape {m.shape}")
        if np.max(np.abs(m - m.conj().T)) > 1e-14:
            raise DomainError("matrix is not Hermitian")
        if abs(np.trace(m) - 1.0) > 1e-14:
            raise DomainError(f"trace {np.trace(m).real!r} != 1")
        if np.linalg.eigvalsh(m)[0] < -1e-12:
            raise DomainError("matrix has a negative eigenvalue")
        m.setflags(write=False)
        object.__setattr__(self, "entries", m)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.entries)


# ---------------------------------------------------------------------------
# 3x3


def rho3_entries(a, b, F, G, H):
    """Batched 3x3 matrices with shape ``broadcast(...) + (3, 3)``."""
    a, b, F, G, H = np.broadcast_arrays(*(np.asarray(x) for x in (a, b, F, G, H)))
    c = 1 - a - b
    f = np.sqrt(b * c) * F
    g = np.sqrt(a * c) * G
    h = np.sqrt(a * b) * H
    ctype = np.result_type(f, g, h, 1j)
    m = np.zeros(a.shape + (3, 3), dtype=ctype)
    m[..., 0, 0] = a
    m[..., 1, 1] = b
    m[..., 2, 2] = c
    m[..., 1, 0] = h
    m[..., 0, 1] = np.conj(h)
    m[..., 0, 2] = g
    m[..., 2, 0] = np.conj(g)
    m[..., 2, 1] = f
    m[..., 1, 2] = np.conj(f)
    return m


def build_rho3(p: BlooreParams3) -> DensityMatrix:
    p.validate()
    a, b = float(p.a), float(p.b)
    c = max(p.c, 0.0)
    b = 1.0 - a - c
    return DensityMatrix(rho3_entries(a, b, complex(p.F), complex(p.G), complex(p.H)))


def positivity3(F: complex, G: complex, H: complex) -> bool:
    """Positivity of the scaled 3x3 state (for strictly positive diagonal)."""
    aF, aG, aH = abs(F), abs(G), abs(H)
    if aF > 1 or aG > 1 or aH > 1:
        return False
    # 1 - |F|^2 - |G|^2 - |H|^2 + 2 Re(FGH) = (1-|F|^2)(1-|G|^2) - |conj(H) - FG|^2,
    # which keeps full precision when two moduli sit at 1
    uf, ug = (1 - aF) * (1 + aF), (1 - aG) * (1 + aG)
    aw = abs(complex(H).conjugate() - F * G)
    det = uf * ug - aw * aw
    # rounding bound from the sizes of the terms, not a flat tolerance
    tol = 64 * _EPS * (ug * (1 + aF) + uf * (1 + aG) + aw * (aH + aF * aG + aw))
    return det >= -tol


def polar_F(s, nu):
    """Scaled f-variable with real part ``s sin nu`` and imaginary part ``s cos nu``."""
    return s * np.sin(nu) + 1j * (s * np.cos(nu))


def spheroidal4(r, s, t1, t2, t3):
    """Four-dimensional spheroidal coordinates with semi-axes sqrt(1+s), sqrt(1-s)."""
    up = r * np.sqrt(1 + s)
    dn = r * np.sqrt(1 - s)
    sin1 = np.sin(t1)
    j1 = up * np.cos(t1)
    j2 = up * np.cos(t2) * sin1
    j3 = dn * np.cos(t3) * np.sin(t2) * sin1
    j4 = dn * np.sin(t3) * np.sin(t2) * sin1
    return j1, j2, j3, j4


def rotation_angle(nu):
    """``(1/2) arccot(tan nu)`` on the branch continuous through nu = pi/2."""
    return np.pi / 4 - nu / 2


def offdiag3(s, nu, r, t1, t2, t3):
    """Map integration coordinates to the scaled off-diagonal variables (F, G, H)."""
    F = polar_F(s, nu)
    j1, j2, j3, j4 = spheroidal4(r, s, t1, t2, t3)
    al = rotation_angle(nu)
    ca, sa = np.cos(al), np.sin(al)
    # (u, w) = (J1, J3) on the (P1, P3) pair; (u', w') = (J4, J2) on (P2, P4)
    p1 = ca * j1 + sa * j3
    p3 = -sa * j1 + ca * j3
    p2 = ca * j4 + sa * j2
    p4 = -sa * j4 + ca * j2
    k = 1 / np.sqrt(np.asarray(2, dtype=np.result_type(p1, float)))
    G = (p1 + p2) * k + 1j * ((p3 + p4) * k)
    H = (p1 - p2) * k + 1j * ((p3 - p4) * k)
    return F, G, H


def point3_to_bloore(q: CoordinatePoint3) -> BlooreParams3:
    q.validate()
    F, G, H = offdiag3(q.s, q.nu, q.r, q.theta1, q.theta2, q.theta3)
    return BlooreParams3(q.a, q.b, complex(F), complex(G), complex(H))


def det3_closed(q: CoordinatePoint3) -> float:
    return q.a * q.b * q.c * (1 - q.r**2) * (1 - q.s**2)


def jacobian3(q: CoordinatePoint3) -> float:
    return jacobian3_array(q.a, q.b, q.s, q.r, q.theta1, q.theta2)


def jacobian3_array(a, b, s, r, t1, t2):
    c = 1 - a - b
    return (a * b * c) ** 2 * r**3 * s * (1 - s * s) * np.sin(t1) ** 2 * np.sin(t2)


def real_coords3(x):
    """Real coordinates of a 3x3 state from the 8 integration coordinates.

    ``x = (a, b, s, nu, r, theta1, theta2, theta3)``; returns
    ``(a, b, Re f, Im f, Re g, Im g, Re h, Im h)``.
    """
    a, b, s, nu, r, t1, t2, t3 = x
    F, G, H = offdiag3(s, nu, r, t1, t2, t3)
    c = 1 - a - b
    f, g, h = np.sqrt(b * c) * F, np.sqrt(a * c) * G, np.sqrt(a * b) * H
    return np.array([a, b, f.real, f.imag, g.real, g.imag, h.real, h.imag])


# ---------------------------------------------------------------------------
# 4x4, g = h = 0 family

_R2 = 1 / math.sqrt(2)


def eigenbasis6(nu):
    """Orthonormal eigenvectors of the 6x6 form in the (O, P, Q) variables.

    Components are ordered ``(O_R, O_I, P_I, P_R, Q_I, Q_R)``.  Rows are returned
    in the order used for ``K1..K6``: the two vectors of the cubic root
    ``-1 + s`` (quadratic eigenvalue ``1 - s``), the two of ``-1 - s``
    (eigenvalue ``1 + s``), then the two of ``-1 + s^2``.
    """
    c, sn = math.cos(nu), math.sin(nu)
    return np.array(
        [
            [0, 0, -c * _R2, sn * _R2, 0, _R2],
            [0, 0, -sn * _R2, -c * _R2, _R2, 0],
            [0, 0, c * _R2, -sn * _R2, 0, _R2],
            [0, 0, sn * _R2, c * _R2, _R2, 0],
            [0, 1, 0, 0, 0, 0],
            [1, 0, 0, 0, 0, 0],
        ]
    )


def spheroidal6(v, s, xi):
    """Six-dimensional spheroidal coordinates; ``xi`` is a length-5 sequence."""
    x1, x2, x3, x4, x5 = xi
    up = v * np.sqrt(1 + s)
    dn = v * np.sqrt(1 - s)
    s1 = np.sin(x1)
    s12 = s1 * np.sin(x2)
    s123 = s12 * np.sin(x3)
    s1234 = s123 * np.sin(x4)
    return (
        up * np.cos(x1),
        up * np.cos(x2) * s1,
        dn * np.cos(x3) * s12,
        dn * np.cos(x4) * s123,
        v * np.cos(x5) * s1234,
        v * np.sin(x5) * s1234,
    )


def offdiag4(s, nu, v, xi):
    """Scaled (F, O, P, Q) for the ``g = h = 0`` family (array friendly)."""
    K = spheroidal6(v, s, xi)
    c, sn = np.cos(nu), np.sin(nu)
    r2 = 1 / np.sqrt(np.asarray(2, dtype=np.result_type(K[0], float)))
    # y = sum_k K_k e_k with e_k the rows of eigenbasis6(nu)
    o_r = K[5]
    o_i = K[4]
    p_i = (-c * K[0] - sn * K[1] + c * K[2] + sn * K[3]) * r2
    p_r = (sn * K[0] - c * K[1] - sn * K[2] + c * K[3]) * r2
    q_i = (K[1] + K[3]) * r2
    q_r = (K[0] + K[2]) * r2
    return polar_F(s, nu), o_r + 1j * o_i, p_r + 1j * p_i, q_r + 1j * q_i


def rho4_entries(a, b, c, F, O, P, Q):
    a, b, c, F, O, P, Q = np.broadcast_arrays(*(np.asarray(x) for x in (a, b, c, F, O, P, Q)))
    d = 1 - a - b - c
    f = np.sqrt(b * c) * F
    o = np.sqrt(a * d) * O
    p = np.sqrt(b * d) * P
    q = np.sqrt(c * d) * Q
    m = np.zeros(a.shape + (4, 4), dtype=np.result_type(f, o, p, q, 1j))
    m[..., 0, 0] = a
    m[..., 1, 1] = b
    m[..., 2, 2] = c
    m[..., 3, 3] = d
    m[..., 2, 1] = f
    m[..., 1, 2] = np.conj(f)
    m[..., 3, 0] = o
    m[..., 0, 3] = np.conj(o)
    m[..., 1, 3] = p
    m[..., 3, 1] = np.conj(p)
    m[..., 3, 2] = q
    m[..., 2, 3] = np.conj(q)
    return m


def point4_to_offdiag(q: CoordinatePoint4) -> tuple[complex, complex, complex, complex]:
    q.validate()
    return tuple(complex(z) for z in offdiag4(q.s, q.nu, q.v, q.xis))


def build_rho4(q: CoordinatePoint4) -> DensityMatrix:
    F, O, P, Q = point4_to_offdiag(q)
    return DensityMatrix(rho4_entries(q.a, q.b, q.c, F, O, P, Q))


def det4_closed(q: CoordinatePoint4) -> float:
    return q.a * q.b * q.c * q.d * (1 - q.s**2) * (1 - q.v**2)


def jacobian4(q: CoordinatePoint4) -> float:
    x1, x2, x3, x4, _ = q.xis
    return (
        q.a * q.b**2 * q.c**2 * q.d**3 * q.s * (1 - q.s**2) * q.v**5
        * math.sin(x1) ** 4 * math.sin(x2) ** 3 * math.sin(x3) ** 2 * math.sin(x4)
    )


def real_coords4(x):
    """``x = (a, b, c, s, nu, v, xi1..xi5)`` to the 11 real coordinates of rho."""
    a, b, c, s, nu, v = x[:6]
    F, O, P, Q = offdiag4(s, nu, v, x[6:])
    d = 1 - a - b - c
    f, o = np.sqrt(b * c) * F, np.sqrt(a * d) * O
    p, qq = np.sqrt(b * d) * P, np.sqrt(c * d) * Q
    return np.array([a, b, c, f.real, f.imag, o.real, o.imag, p.real, p.imag, qq.real, qq.imag])


# ---------------------------------------------------------------------------
# eigenvalues of the 6x6 form for general r


def cubic_coefficients(r, s, t1, t2):
    """Coefficients ``(c2, c1, c0)`` of ``x^3 + c2 x^2 + c1 x + c0``."""
    factor = 1 - 4 * math.sin(t1) ** 2 * math.sin(t2) ** 2
    r2, s2 = r * r, s * s
    c2 = 0.5 * (6 - 2 * r2 - r2 * s - 2 * s2 - r2 * s * factor)
    c1 = 3 * (1 - r2) * (1 - s2)
    c0 = (1 - r2) ** 2 * (1 - s2) ** 2
    return c2, c1, c0


def real_cubic_roots(c2, c1, c0, tol=1e-14):
    """Three real roots of a monic cubic by the trigonometric method, ascending."""
    p = c1 - c2 * c2 / 3
    q = 2 * c2**3 / 27 - c2 * c1 / 3 + c0
    shift = -c2 / 3
    scale = max(1.0, abs(c2), abs(c1), abs(c0))
    if abs(p) <= tol * scale:
        # triple root, or one real root plus a complex pair when q != 0
        if abs(q) > tol * scale:
            raise NumericalError(f"cubic has a complex root pair (p={p!r}, q={q!r})")
        return (shift, shift, shift)
    disc = -(4 * p**3 + 27 * q * q)
    if disc < -tol * scale**3:
        raise NumericalError(
            f"cubic has a complex root pair (discriminant {disc!r}, p={p!r}, q={q!r})"
        )
    if p > 0:
        raise NumericalError(f"cubic has a complex root pair (p={p!r} > 0)")
    m = 2 * math.sqrt(-p / 3)
    arg = 3 * q / (p * m)
    arg = min(1.0, max(-1.0, arg))
    phi = math.acos(arg) / 3
    roots = [m * math.cos(phi - 2 * math.pi * k / 3) + shift for k in range(3)]
    return tuple(sorted(_polish(x, c2, c1, c0) for x in roots))


def _polish(x, c2, c1, c0):
    for _ in range(2):
        f = ((x + c2) * x + c1) * x + c0
        df = (3 * x + 2 * c2) * x + c1
        if df == 0:
            break
        step = f / df
        if abs(step) > 1e-8 * max(1.0, abs(x)):
            break
        x -= step
    return x


def pair_eigenvalues_cubic(r: float, s: float, theta1: float, theta2: float):
    """Three (doubly degenerate) eigenvalues of the 6x6 off-diagonal form."""
    _check_unit("r", r)
    _check_unit("s", s)
    return real_cubic_roots(*cubic_coefficients(r, s, theta1, theta2))


def cubic_residual(x, r, s, theta1, theta2):
    c2, c1, c0 = cubic_coefficients(r, s, theta1, theta2)
    return ((x + c2) * x + c1) * x + c0
