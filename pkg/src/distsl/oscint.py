"""Oscillatory integrals of a piecewise-linear ``u`` at frequency ``2z``.

For ``z = sqrt(lambda)`` and ``x`` in ``[0, pi]`` this module evaluates

    b = int_0^x u sin(2zt),      a = int_0^x u cos(2zt),
    B = int_0^x u^2 sin(2zt),    A = int_0^x u^2 cos(2zt),    U = int_0^x u^2,
    w = int_0^x u(t) cos(2zt) int_0^t u(s) sin(2zs) ds dt,
    upsilon = b + U/(2z) + 2w - A/(2z).

``u^2`` is the analytic square (no conjugation) for complex ``u``.

Everything reduces to per-segment moments ``int_0^h s^k exp(kappa s) ds`` which
are evaluated through ``phi_k(w) = int_0^1 s^k exp(w s) ds``: a power series for
small ``|w|`` and the upward recurrence otherwise, so there is no cancellation
as ``z h -> 0`` and no aliasing for large ``|z|``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .potential import PI, PiecewisePoly, PotentialPrimitive

_SERIES_RADIUS = 2.0
_SERIES_TERMS = 44
_TAYLOR_TERMS = 26

def _series_terms(radius: float) -> int:
    term, m = 1.0, 0
    while term > 1e-18 and m < _SERIES_TERMS:
        m += 1
        term *= radius / m
    return m + 1


def phi(kmax: int, w) -> np.ndarray:
    """``phi_k(w) = int_0^1 s^k e^{w s} ds`` for ``k = 0..kmax``; shape ``(kmax+1,) + w.shape``.

    Small ``|w|``: power series for ``phi_kmax`` then the downward recurrence
    ``phi_k = (e^w - w phi_{k+1}) / (k+1)``.  Large ``|w|``: upward recurrence.
    """
    w = np.asarray(w, dtype=complex)
    out = np.empty((kmax + 1,) + w.shape, dtype=complex)
    small = np.abs(w) < _SERIES_RADIUS
    if np.any(small):
        ws = w[small]
        terms = _series_terms(float(np.abs(ws).max()))
        acc = np.zeros(ws.shape, dtype=complex)
        for j in range(terms - 1, -1, -1):
            # Horner form of sum_j w^j / (j! (kmax + j + 1))
            acc = acc * ws / (j + 1) + 1.0 / (kmax + j + 1)
        out[kmax][small] = acc
        ew = np.exp(ws)
        for k in range(kmax - 1, -1, -1):
            acc = (ew - ws * acc) / (k + 1)
            out[k][small] = acc
    big = ~small
    if np.any(big):
        if kmax > 4:
            raise ValueError("upward phi recurrence is only used for low orders")
        wb = w[big]
        ew = np.exp(wb)
        prev = np.expm1(wb) / wb
        out[0][big] = prev
        for k in range(1, kmax + 1):
            prev = (ew - k * prev) / wb
            out[k][big] = prev
    return out


def segment_moments(pp: PiecewisePoly, kappa: complex) -> np.ndarray:
    """Per-segment ``int P(t) exp(kappa t) dt`` for the piecewise polynomial ``pp``."""
    h = pp.widths
    ph = phi(pp.degree, kappa * h)
    hp = h.copy()
    acc = np.zeros(h.shape, dtype=complex)
    for k in range(pp.degree + 1):
        acc += pp.coefs[k] * hp * ph[k]
        hp = hp * h
    if kappa == 0:
        return acc
    return acc * np.exp(kappa * pp.left)


def trig_integral(pp: PiecewisePoly, freq: complex, kind: str) -> complex:
    """``int_0^pi P(t) sin(freq t) dt`` (``kind='sin'``) or with cosine."""
    ep = segment_moments(pp, 1j * freq).sum()
    em = segment_moments(pp, -1j * freq).sum()
    if kind == "sin":
        return complex((ep - em) / 2j)
    if kind == "cos":
        return complex((ep + em) / 2)
    raise ValueError(f"kind must be 'sin' or 'cos', not {kind!r}")


def _nested_pair(d0, d1, h, left, k1: complex, k2: complex) -> np.ndarray:
    """Per segment ``int_0^h p(t) e^{k1 (a+t)} int_0^t p(s) e^{k2 (a+s)} ds dt`` with ``p = d0 + d1 s``."""
    out = np.zeros(h.shape, dtype=complex)
    big = np.abs(k2 * h) >= 1.0
    if np.any(big):
        D0, D1, H = d0[big], d1[big], h[big]
        P1 = D1 / k2
        P0 = D0 / k2 - D1 / k2**2
        ks = k1 + k2
        fs = phi(2, ks * H)
        f1 = phi(1, k1 * H)
        m_sum = [H ** (k + 1) * fs[k] for k in range(3)]
        m_one = [H ** (k + 1) * f1[k] for k in range(2)]
        out[big] = (
            D0 * P0 * m_sum[0] + (D0 * P1 + D1 * P0) * m_sum[1] + D1 * P1 * m_sum[2]
            - P0 * (D0 * m_one[0] + D1 * m_one[1])
        )
    small = ~big
    if np.any(small):
        D0, D1, H = d0[small], d1[small], h[small]
        nterms = min(_series_terms(float(np.abs(k2 * H).max())), _TAYLOR_TERMS)
        f = phi(nterms + 3, k1 * H)
        acc = np.zeros(H.shape, dtype=complex)
        coef = np.ones(H.shape, dtype=complex)  # (k2 h)^j / j!
        for j in range(nterms):
            # moments M_k = h^{k+1} phi_k, factored as h^{j+2} * (...)
            term = (
                D0 * D0 * f[j + 1] / (j + 1)
                + D0 * D1 * H * (1.0 / (j + 2) + 1.0 / (j + 1)) * f[j + 2]
                + D1 * D1 * H * H * f[j + 3] / (j + 2)
            )
            acc += coef * term
            coef = coef * (k2 * H) / (j + 1)
        out[small] = acc * H * H
    return out * np.exp((k1 + k2) * left)


@dataclass(frozen=True)
class OscIntegrals:
    """Values of the oscillatory functionals at points ``x`` for one ``z``."""

    z: complex
    x: np.ndarray
    b: np.ndarray
    a: np.ndarray
    A: np.ndarray
    B: np.ndarray
    U: np.ndarray
    w: np.ndarray

    @property
    def upsilon(self) -> np.ndarray:
        return self.b + 0.5 * self.U / self.z + 2.0 * self.w - 0.5 * self.A / self.z


def _check_x(x) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(x < 0.0) or np.any(x > PI * (1 + 1e-15)) or not np.all(np.isfinite(x)):
        raise ValueError("x must lie in [0, pi]")
    return np.minimum(x, PI)


def evaluate(x, z: complex, p: PotentialPrimitive) -> OscIntegrals:
    """All functionals at the points ``x`` (any order) for frequency parameter ``z``."""
    x = _check_x(x)
    z = complex(z)
    u = p.as_poly().refine(x)
    u2 = u * u
    kp, km = 2j * z, -2j * z
    ep, em = segment_moments(u, kp), segment_moments(u, km)
    sin1, cos1 = (ep - em) / 2j, (ep + em) / 2
    ep2, em2 = segment_moments(u2, kp), segment_moments(u2, km)
    sin2, cos2 = (ep2 - em2) / 2j, (ep2 + em2) / 2
    sq = segment_moments(u2, 0.0)

    d0, d1, h, left = u.coefs[0], u.coefs[1], u.widths, u.left
    inner = np.zeros(h.shape, dtype=complex)
    for e1 in (1, -1):
        for e2 in (1, -1):
            inner += (e2 / 4j) * _nested_pair(d0, d1, h, left, e1 * kp, e2 * kp)

    def cumulative(v):
        return np.concatenate([[0.0], np.cumsum(v)])

    b_nodes = cumulative(sin1)
    w_nodes = cumulative(cos1 * b_nodes[:-1] + inner)
    idx = np.searchsorted(u.mesh, x)  # every x is a node of the refined mesh
    pick = lambda v: v[idx]  # noqa: E731
    return OscIntegrals(
        z=z,
        x=x,
        b=pick(b_nodes),
        a=pick(cumulative(cos1)),
        A=pick(cumulative(cos2)),
        B=pick(cumulative(sin2)),
        U=pick(cumulative(sq)),
        w=pick(w_nodes),
    )


def first_order(x, z, p):
    """``(b, a)`` at ``x``."""
    r = evaluate(x, z, p)
    return _squeeze(x, r.b), _squeeze(x, r.a)


def second_order(x, z, p):
    """``(A, B, U)`` at ``x``."""
    r = evaluate(x, z, p)
    return _squeeze(x, r.A), _squeeze(x, r.B), _squeeze(x, r.U)


def double_w(x, z, p):
    return _squeeze(x, evaluate(x, z, p).w)


def upsilon(x, z, p):
    if z == 0:
        raise ValueError("upsilon needs z != 0")
    return _squeeze(x, evaluate(x, z, p).upsilon)


def _squeeze(x, v):
    return complex(v[0]) if np.ndim(x) == 0 else v


def _sup_with_refinement(f, grid: np.ndarray) -> float:
    vals = f(grid)
    k = int(np.argmax(vals))
    lo = grid[max(k - 1, 0)]
    hi = grid[min(k + 1, grid.size - 1)]
    local = np.linspace(lo, hi, 65)
    return float(max(vals[k], f(local).max()))


def upsilon_sup(z: complex, p: PotentialPrimitive, grid_density: float = 8.0) -> tuple[float, float]:
    """Grid suprema ``(Upsilon, Upsilon1)``; an under-approximation refined once near the argmax."""
    z = complex(z)
    npts = max(int(math.ceil(grid_density * (1.0 + abs(z)))), 16) + 1
    grid = np.union1d(np.linspace(0.0, PI, npts), p.mesh)
    tail = p.l2_norm**2 / abs(z)

    def full(x):
        r = evaluate(x, z, p)
        return np.abs(r.b) + np.abs(r.a) + 2 * np.abs(r.w) + 0.5 * np.abs(r.A / z)

    def first(x):
        r = evaluate(x, z, p)
        return np.abs(r.b) + np.abs(r.a)

    big = _sup_with_refinement(full, grid) + tail
    small = _sup_with_refinement(first, grid) + tail
    return big, small


def comparability_constant(p: PotentialPrimitive, alpha: float) -> float:
    """``2 sqrt(pi) (1 + ||u||) cosh(2 pi alpha)``."""
    return 2.0 * math.sqrt(PI) * (1.0 + p.l2_norm) * math.cosh(2.0 * PI * alpha)


@dataclass(frozen=True)
class DiscreteCoefficients:
    n: int
    b2n: complex
    a2n: complex
    A2n: complex
    B2n: complex
    w2n: complex
    bn: complex
    an: complex
    An: complex
    Bn: complex
    U_pi: complex

    @property
    def mu_n(self) -> complex:
        n = self.n
        return -self.b2n / PI + self.A2n / (2 * PI * n) - 2 * self.w2n / PI - self.U_pi / (2 * PI * n)


def discrete(n: int, p: PotentialPrimitive) -> DiscreteCoefficients:
    if n < 1:
        raise ValueError("n must be >= 1")
    r = evaluate(PI, n, p)
    u = p.as_poly()
    u2 = u * u
    return DiscreteCoefficients(
        n=n,
        b2n=complex(r.b[0]),
        a2n=complex(r.a[0]),
        A2n=complex(r.A[0]),
        B2n=complex(r.B[0]),
        w2n=complex(r.w[0]),
        bn=trig_integral(u, n, "sin"),
        an=trig_integral(u, n, "cos"),
        An=trig_integral(u2, n, "cos"),
        Bn=trig_integral(u2, n, "sin"),
        U_pi=complex(r.U[0]),
    )


def mu(n: int, p: PotentialPrimitive) -> complex:
    return discrete(n, p).mu_n
