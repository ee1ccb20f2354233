"""Normalized eigenfunctions, the biorthogonal system and their two-term asymptotics.

Inner products are ``(f, g) = int_0^pi f conj(g)``.  For a simple eigenvalue the
biorthogonal partner of ``y_n`` is ``v_n = conj(y_n) / conj((y_n, conj y_n))``,
which gives ``(y_n, v_n) = 1`` exactly; ``(y_n, conj y_n) = int y_n^2``.

Approximants evaluate, with every integral in closed form,

    y_n ~ sqrt(2/pi) [ sin(nx) (1 + K_n - a_2n(x) - B_2n(x)/2n)
                       + x cos(nx) mu_n
                       + cos(nx) (b_2n(x) + U(x)/2n - A_2n(x)/2n + 2 w_2n(x)) ]

with ``K_n = (1/pi) int (pi-t) Re u cos 2nt + (1/2 pi n) int (pi-t) Re(u^2) sin 2nt``.
The partner ``v_n`` uses ``conj(u)`` in the ``x``-dependent groups and the
weights ``Re u - 2i Im u`` and ``Re(u^2) - 2i Im(u^2)`` in ``K_n``; the
``literal=True`` variant flips the sign of the imaginary weights, which
corresponds to dividing by ``(y_n, conj y_n)`` without conjugation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import odesolve, oscint
from .potential import PI, PotentialPrimitive
from .spectrum import Eigenpair

SQRT_2_PI = math.sqrt(2.0 / PI)
_GL_ORDER = 8
_GL_X, _GL_W = np.polynomial.legendre.leggauss(_GL_ORDER)


class DegenerateEigenvalueError(ValueError):
    """The index is (suspected) non-simple or ``(y_n, conj y_n)`` vanishes."""


def eval_grid(p: PotentialPrimitive, n: int) -> np.ndarray:
    """Potential mesh joined with a uniform grid of ``max(512, 16 n)`` intervals."""
    return np.union1d(np.linspace(0.0, PI, max(512, 16 * n) + 1), p.mesh)


@dataclass(frozen=True)
class Quadrature:
    nodes: np.ndarray
    weights: np.ndarray

    @classmethod
    def for_index(cls, p: PotentialPrimitive, n: int) -> Quadrature:
        breaks = eval_grid(p, n)
        a, b = breaks[:-1], breaks[1:]
        half = 0.5 * (b - a)
        nodes = (0.5 * (a + b))[:, None] + half[:, None] * _GL_X[None, :]
        weights = half[:, None] * _GL_W[None, :]
        return cls(nodes.ravel(), weights.ravel())

    def inner(self, f: np.ndarray, g: np.ndarray) -> complex:
        return complex(np.sum(self.weights * f * np.conj(g)))

    def integrate(self, f: np.ndarray) -> complex:
        return complex(np.sum(self.weights * f))


def _require_simple(e: Eigenpair):
    if not e.simple:
        raise DegenerateEigenvalueError(f"eigenvalue {e.n} is flagged as (near) multiple; no y/v emitted")


def omega(e: Eigenpair, p: PotentialPrimitive, x) -> np.ndarray:
    return odesolve.integrate_quasi(e.lam, p, grid=np.asarray(x, dtype=float)).omega


def omega_norm(e: Eigenpair, p: PotentialPrimitive, quad: Quadrature | None = None) -> float:
    quad = quad or Quadrature.for_index(p, e.n)
    w = omega(e, p, quad.nodes)
    return math.sqrt(quad.inner(w, w).real)


def normalized_y(e: Eigenpair, p: PotentialPrimitive, x=None, quad: Quadrature | None = None):
    """``(x, y_n(x))`` with ``y_n = w(., lam_n) / ||w(., lam_n)||`` (positive normalizer)."""
    _require_simple(e)
    x = eval_grid(p, e.n) if x is None else np.asarray(x, dtype=float)
    return x, omega(e, p, x) / omega_norm(e, p, quad)


def self_pairing(e: Eigenpair, p: PotentialPrimitive, quad: Quadrature | None = None) -> complex:
    """``(y_n, conj y_n) = int_0^pi y_n^2``."""
    quad = quad or Quadrature.for_index(p, e.n)
    w = omega(e, p, quad.nodes)
    return quad.integrate(w * w) / quad.inner(w, w).real


def biorthogonal_v(e: Eigenpair, p: PotentialPrimitive, x=None, quad: Quadrature | None = None, tol: float = 1e-8):
    """``(x, v_n(x))`` with ``(y_n, v_n) = 1``."""
    _require_simple(e)
    quad = quad or Quadrature.for_index(p, e.n)
    c = self_pairing(e, p, quad)
    if abs(c) <= tol:
        raise DegenerateEigenvalueError(f"near-Jordan degeneracy: |(y_n, conj y_n)| = {abs(c):.3g} at n={e.n}")
    x, y = normalized_y(e, p, x, quad)
    return x, np.conj(y) / np.conj(c)


def normalization_identity(e: Eigenpair, p: PotentialPrimitive, quad: Quadrature | None = None) -> tuple[complex, complex]:
    """Both sides of ``int w^2 = dw/dlam(pi) * w'(pi)`` at an eigenvalue.

    At a zero ``w'(pi) = w1(pi) + u(pi) w(pi) = w1(pi)``.
    """
    quad = quad or Quadrature.for_index(p, e.n)
    w = omega(e, p, quad.nodes)
    lhs = quad.integrate(w * w)
    _, w1, wl, _ = odesolve.propagate(np.array([e.lam]), p)
    return lhs, complex(wl[0] * w1[0])


# --------------------------------------------------------------------------- approximants


@dataclass(frozen=True)
class AsymptoticApproximant:
    """Three coefficient groups of the two-term expansion, cached on ``x``."""

    n: int
    x: np.ndarray
    sin_group: np.ndarray
    xcos_group: complex
    cos_group: np.ndarray
    variant: str

    def __call__(self) -> np.ndarray:
        n, x = self.n, self.x
        return SQRT_2_PI * (
            np.sin(n * x) * self.sin_group + x * np.cos(n * x) * self.xcos_group + np.cos(n * x) * self.cos_group
        )


def weighted_constants(n: int, p: PotentialPrimitive) -> dict:
    """The ``(pi - t)``-weighted integrals at frequency ``2n`` used by both approximants."""
    u = p.as_poly()
    uw = u.times_distance_to_pi()
    u2w = (u * u).times_distance_to_pi()
    return {
        "re_u_cos": oscint.trig_integral(uw.real(), 2 * n, "cos"),
        "im_u_cos": oscint.trig_integral(uw.imag(), 2 * n, "cos"),
        "re_u2_sin": oscint.trig_integral(u2w.real(), 2 * n, "sin"),
        "im_u2_sin": oscint.trig_integral(u2w.imag(), 2 * n, "sin"),
    }


def _groups(n, x, p, conj: bool):
    q = p.conj() if conj else p
    r = oscint.evaluate(x, n, q)
    mu = oscint.mu(n, q)
    sin_part = -r.a - r.B / (2 * n)
    cos_part = r.b + r.U / (2 * n) - r.A / (2 * n) + 2 * r.w
    return sin_part, mu, cos_part


def approx_y(n: int, p: PotentialPrimitive, x=None) -> AsymptoticApproximant:
    if n < 1:
        raise ValueError("n must be >= 1")
    x = eval_grid(p, n) if x is None else np.asarray(x, dtype=float)
    k = weighted_constants(n, p)
    const = 1 + k["re_u_cos"].real / PI + k["re_u2_sin"].real / (2 * PI * n)
    sin_part, mu, cos_part = _groups(n, x, p, conj=False)
    return AsymptoticApproximant(n, x, const + sin_part, mu, cos_part, "eigenfunction")


def approx_v(n: int, p: PotentialPrimitive, x=None, literal: bool = False) -> AsymptoticApproximant:
    if n < 1:
        raise ValueError("n must be >= 1")
    x = eval_grid(p, n) if x is None else np.asarray(x, dtype=float)
    k = weighted_constants(n, p)
    sign = 1.0 if literal else -1.0
    const = (
        1
        + (k["re_u_cos"].real + sign * 2j * k["im_u_cos"].real) / PI
        + (k["re_u2_sin"].real + sign * 2j * k["im_u2_sin"].real) / (2 * PI * n)
    )
    sin_part, mu, cos_part = _groups(n, x, p, conj=True)
    return AsymptoticApproximant(n, x, const + sin_part, mu, cos_part, "biorthogonal-literal" if literal else "biorthogonal")


def norm_expansion(n: int, p: PotentialPrimitive) -> float:
    """Two-term expansion of ``||lam_n^{1/2} w(., lam_n)||^2``."""
    k = weighted_constants(n, p)
    return PI / 2 - k["re_u_cos"].real - k["re_u2_sin"].real / (2 * n)


def pairing_expansion(n: int, p: PotentialPrimitive) -> complex:
    """Two-term expansion of ``(y_n, conj y_n)``: ``1 - (2i/pi) int (pi-x) Im u cos 2nx - (i/(pi n)) int (pi-x) Im(u^2) sin 2nx``."""
    k = weighted_constants(n, p)
    return 1 - 2j / PI * k["im_u_cos"].real - 1j / (PI * n) * k["im_u2_sin"].real


# --------------------------------------------------------------------------- remainders


def sup_abs(fun, grid: np.ndarray) -> float:
    """Grid sup of ``|fun|`` with one refinement pass around the argmax."""
    vals = np.abs(fun(grid))
    k = int(np.argmax(vals))
    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, grid.size - 1)]
    local = np.linspace(lo, hi, 33)
    return float(max(vals[k], np.abs(fun(local)).max()))


@dataclass
class RemainderRecord:
    n: int
    lam: complex
    mu: complex
    rho_ev: complex
    r_y: float
    r_v: float
    upsilon: float
    upsilon1: float
    ratio_ev: float
    ratio_y: float
    sum_y: float = 0.0
    sum_v: float = 0.0
    sum_ev: float = 0.0


def _ratio(num, den):
    return float("nan") if den == 0 else num / den**2


def remainder_record(e: Eigenpair, p: PotentialPrimitive, grid_density: float = 8.0) -> RemainderRecord:
    n = e.n
    mu = oscint.mu(n, p)
    rho = e.sqrt_lambda - n - mu
    quad = Quadrature.for_index(p, n)
    norm = omega_norm(e, p, quad)
    c = self_pairing(e, p, quad)
    grid = eval_grid(p, n)

    def y_minus(x):
        return omega(e, p, x) / norm - approx_y(n, p, x)()

    def v_minus(x):
        return np.conj(omega(e, p, x) / norm) / np.conj(c) - approx_v(n, p, x)()

    big, small = oscint.upsilon_sup(e.sqrt_lambda, p, grid_density)
    r_y = sup_abs(y_minus, grid)
    r_v = sup_abs(v_minus, grid)
    return RemainderRecord(
        n=n, lam=e.lam, mu=mu, rho_ev=rho, r_y=r_y, r_v=r_v, upsilon=big, upsilon1=small,
        ratio_ev=_ratio(abs(rho), big), ratio_y=_ratio(r_y, big),
    )


def remainders(eigenpairs, p: PotentialPrimitive, n_range=None, grid_density: float = 8.0) -> list[RemainderRecord]:
    """Per-index remainder records with running partial sums; non-simple indices are skipped."""
    pairs = [e for e in eigenpairs if n_range is None or n_range[0] <= e.n <= n_range[1]]
    out = []
    sy = sv = se = 0.0
    for e in pairs:
        if not e.simple:
            continue
        rec = remainder_record(e, p, grid_density)
        sy += rec.r_y
        sv += rec.r_v
        se += abs(rec.rho_ev)
        rec.sum_y, rec.sum_v, rec.sum_ev = sy, sv, se
        out.append(rec)
    return out


def gram_matrix(eigenpairs, p: PotentialPrimitive) -> np.ndarray:
    """``G[i, j] = (y_i, v_j)`` over the simple pairs given, on a common quadrature."""
    pairs = [e for e in eigenpairs if e.simple]
    quad = Quadrature.for_index(p, max(e.n for e in pairs))
    ys, vs = [], []
    for e in pairs:
        w = omega(e, p, quad.nodes)
        y = w / math.sqrt(quad.inner(w, w).real)
        c = quad.integrate(y * y)
        ys.append(y)
        vs.append(np.conj(y) / np.conj(c))
    Y = np.array(ys) * quad.weights
    return Y @ np.conj(np.array(vs)).T
