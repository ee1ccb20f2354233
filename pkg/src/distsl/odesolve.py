"""Initial-value problems for ``-w'' + u' w = lambda w`` in regularized form.

With the quasi-derivative ``w1 = w' - u w`` the equation becomes the system

    w'  = u w + w1,
    w1' = -(lambda + u^2) w - u w1,            w(0) = 0, w1(0) = 1,

whose coefficients are integrable for ``u`` in ``L2``.  On a mesh segment a
piecewise-linear ``u`` has constant derivative, so the classical equation
``w'' = (u' - lambda) w`` holds there with a constant coefficient, while ``w``
and ``w1`` are continuous across the jumps of ``u``.  The default ``exact``
method propagates ``(w, w')`` through closed-form segment transfer matrices;
the ``rk`` method integrates the system above with an adaptive embedded
Runge-Kutta pair (DOP853) that restarts at every mesh point.  The two routes are
independent and are cross-checked in the test suite.

The Pruefer variables satisfy ``w = r sin(theta) / sqrt(lambda)`` with
``theta(0) = 0`` and ``r(0) = 1``; the factor ``sqrt(lambda)`` reconciles
``r(0) = 1`` with ``w1(0) = 1``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.integrate import solve_ivp

from . import oscint
from .potential import PI, PotentialPrimitive


class SolverError(RuntimeError):
    """Integration failed; ``x`` is where it stopped."""

    def __init__(self, message: str, x: float | None = None):
        super().__init__(message if x is None else f"{message} (at x={x:.17g})")
        self.x = x


class PrueferExistenceError(SolverError):
    pass


_SERIES_CUT = 1e-2
_SERIES_N = 9
_FACT2 = np.array([math.factorial(2 * j) for j in range(_SERIES_N + 1)], dtype=float)
_FACT21 = np.array([math.factorial(2 * j + 1) for j in range(_SERIES_N + 1)], dtype=float)


def _trig_kernels(zeta, derivative: bool = True):
    """``C = cos(sqrt(zeta))``, ``S = sin(sqrt(zeta))/sqrt(zeta)`` and ``dS/dzeta``; all entire in ``zeta``."""
    zeta = np.asarray(zeta, dtype=complex)
    small = np.abs(zeta) < _SERIES_CUT
    if not small.any():
        k = np.sqrt(zeta)
        C = np.cos(k)
        S = np.sin(k) / k
        return C, S, ((C - S) / (2.0 * zeta) if derivative else None)
    C = np.empty_like(zeta)
    S = np.empty_like(zeta)
    dS = np.empty_like(zeta)
    zs = zeta[small]
    pw = (-zs)[None, :] ** np.arange(_SERIES_N + 1)[:, None]
    C[small] = (pw / _FACT2[:, None]).sum(axis=0)
    S[small] = (pw / _FACT21[:, None]).sum(axis=0)
    j = np.arange(1, _SERIES_N + 1)[:, None]
    dS[small] = (-(j * pw[:-1]) / _FACT21[1:, None]).sum(axis=0)
    big = ~small
    if big.any():
        zb = zeta[big]
        k = np.sqrt(zb)
        cb = np.cos(k)
        sb = np.sin(k) / k
        C[big] = cb
        S[big] = sb
        dS[big] = (cb - sb) / (2.0 * zb)
    return C, S, dS


def _segment_step(lam, d0, d1, s, w, w1, wl=None, wl1=None):
    """Advance by ``s`` from the left end of a segment with ``u = d0 + d1 (t - a)``."""
    k2 = lam - d1
    C, S, dS = _trig_kernels(k2 * s * s, wl is not None)
    wp = w1 + d0 * w
    w_new = C * w + s * S * wp
    wp_new = -k2 * s * S * w + C * wp
    u_end = d0 + d1 * s
    out = [w_new, wp_new - u_end * w_new]
    if wl is not None:
        wlp = wl1 + d0 * wl
        wl_new = C * wl + s * S * wlp + (-0.5 * s * s * S) * w + s**3 * dS * wp
        wlp_new = -k2 * s * S * wl + C * wlp - (s * S + k2 * s**3 * dS) * w - 0.5 * s * s * S * wp
        out += [wl_new, wlp_new - u_end * wl_new]
    return out


@njit(cache=True)
def _kernels_scalar(zeta):
    if abs(zeta) < _SERIES_CUT:
        c = 0j
        sn = 0j
        ds = 0j
        term = 1.0 + 0j  # (-zeta)^j
        for j in range(_SERIES_N + 1):
            c += term / _FACT2[j]
            sn += term / _FACT21[j]
            if j < _SERIES_N:
                ds -= (j + 1) * term / _FACT21[j + 1]
            term *= -zeta
        return c, sn, ds
    k = np.sqrt(zeta)
    c = np.cos(k)
    sn = np.sin(k) / k
    return c, sn, (c - sn) / (2.0 * zeta)


@njit(cache=True)
def _sweep_kernel(lam, d0s, d1s, hs, derivative, keep):
    """Propagate through all segments; ``keep`` stores the state at every segment start (one lambda)."""
    out = np.empty((4, lam.size), dtype=np.complex128)
    starts = np.empty((4, hs.size if keep else 0), dtype=np.complex128)
    for j in range(lam.size):
        lj = lam[j]
        w = 0j
        w1 = 1.0 + 0j
        wl = 0j
        wl1 = 0j
        for i in range(hs.size):
            if keep:
                starts[0, i] = w
                starts[1, i] = w1
                starts[2, i] = wl
                starts[3, i] = wl1
            d0 = d0s[i]
            d1 = d1s[i]
            s = hs[i]
            k2 = lj - d1
            C, S, dS = _kernels_scalar(k2 * s * s)
            wp = w1 + d0 * w
            w_new = C * w + s * S * wp
            wp_new = -k2 * s * S * w + C * wp
            u_end = d0 + d1 * s
            if derivative:
                wlp = wl1 + d0 * wl
                wl_new = C * wl + s * S * wlp - 0.5 * s * s * S * w + s * s * s * dS * wp
                wlp_new = -k2 * s * S * wl + C * wlp - (s * S + k2 * s * s * s * dS) * w - 0.5 * s * s * S * wp
                wl = wl_new
                wl1 = wlp_new - u_end * wl_new
            w = w_new
            w1 = wp_new - u_end * w_new
        out[0, j] = w
        out[1, j] = w1
        out[2, j] = wl
        out[3, j] = wl1
    return out, starts


def propagate(lam, p: PotentialPrimitive, derivative: bool = True):
    """End values ``(w, w1, dw/dlam, (dw/dlam)1)`` at ``x = pi`` for an array of ``lam``."""
    lam = np.asarray(lam, dtype=complex)
    flat = np.ascontiguousarray(lam.reshape(-1))
    out, _ = _sweep_kernel(flat, p.values_left, p.slopes, np.diff(p.mesh), derivative, False)
    w, w1, wl, wl1 = (row.reshape(lam.shape) for row in out)
    return (w, w1, wl, wl1) if derivative else (w, w1)


def default_grid(lam: complex, p: PotentialPrimitive, density: float = 16.0, minimum: int = 512) -> np.ndarray:
    z = abs(cmath.sqrt(lam))
    npts = max(minimum, int(math.ceil(density * (1.0 + z)))) + 1
    return np.union1d(np.linspace(0.0, PI, npts), p.mesh)


@dataclass(frozen=True)
class SolutionTrace:
    lam: complex
    grid: np.ndarray
    omega: np.ndarray
    omega_q1: np.ndarray
    omega_dl: np.ndarray | None = None
    omega_dl_q1: np.ndarray | None = None
    theta: np.ndarray | None = None
    r: np.ndarray | None = None

    @property
    def sqrt_lambda(self) -> complex:
        return cmath.sqrt(self.lam)


def _exact_trace(lam: complex, p: PotentialPrimitive, grid: np.ndarray, derivative: bool):
    mesh = p.mesh
    m = p.n_segments
    _, left = _sweep_kernel(np.array([lam], dtype=complex), p.values_left, p.slopes, np.diff(mesh), derivative, True)
    seg = np.clip(np.searchsorted(mesh, grid, side="right") - 1, 0, m - 1)
    s = grid - mesh[seg]
    return _segment_step(
        np.array(lam, dtype=complex), p.values_left[seg], p.slopes[seg], s,
        left[0, seg], left[1, seg], left[2, seg] if derivative else None, left[3, seg] if derivative else None,
    )


def _rk_trace(lam: complex, p: PotentialPrimitive, grid: np.ndarray, tol: float, derivative: bool):
    lam = complex(lam)
    ncomp = 4 if derivative else 2

    def rhs_factory(d0, d1, a):
        def rhs(t, y):
            u = d0 + d1 * (t - a)
            w, w1 = y[0], y[1]
            dy = [u * w + w1, -(lam + u * u) * w - u * w1]
            if derivative:
                wl, wl1 = y[2], y[3]
                dy += [u * wl + wl1, -(lam + u * u) * wl - u * wl1 - w]
            return np.array(dy)

        return rhs

    y = np.zeros(ncomp, dtype=complex)
    y[1] = 1.0
    out = np.zeros((ncomp, grid.size), dtype=complex)
    out[:, 0] = y
    mesh = p.mesh
    for i in range(p.n_segments):
        a, b = mesh[i], mesh[i + 1]
        sel = (grid > a) & (grid <= b)
        sol = solve_ivp(
            rhs_factory(p.values_left[i], p.slopes[i], a), (a, b), y,
            method="DOP853", rtol=tol, atol=tol, dense_output=True,
        )
        if sol.status != 0:
            raise SolverError(f"step size underflow: {sol.message}", float(sol.t[-1]))
        if np.any(sel):
            out[:, sel] = sol.sol(grid[sel])
        y = sol.y[:, -1]
    return list(out)


def _check(lam, tol):
    if not tol > 0:
        raise ValueError("tol must be positive")
    lam = complex(lam)
    if not cmath.isfinite(lam):
        raise ValueError("lambda must be finite")
    return lam


def integrate_quasi(lam, p: PotentialPrimitive, tol: float = 1e-10, grid=None, method: str = "exact") -> SolutionTrace:
    """``(w, w1)`` on ``grid`` (default: oscillation-resolving grid joined with the mesh)."""
    lam = _check(lam, tol)
    grid = default_grid(lam, p) if grid is None else np.asarray(grid, dtype=float)
    if method == "exact":
        w, w1 = _exact_trace(lam, p, grid, derivative=False)
    elif method == "rk":
        w, w1 = _rk_trace(lam, p, grid, tol, derivative=False)
    else:
        raise ValueError(f"unknown method {method!r}")
    return SolutionTrace(lam, grid, w, w1)


def integrate_variational(lam, p: PotentialPrimitive, tol: float = 1e-10, grid=None, method: str = "exact") -> SolutionTrace:
    """As :func:`integrate_quasi`, plus ``dw/dlam`` and its quasi-derivative.

    ``dw/dlam`` solves the same system forced by ``-w`` in the second row, with zero initial data.
    """
    lam = _check(lam, tol)
    grid = default_grid(lam, p) if grid is None else np.asarray(grid, dtype=float)
    if method == "exact":
        w, w1, wl, wl1 = _exact_trace(lam, p, grid, derivative=True)
    elif method == "rk":
        w, w1, wl, wl1 = _rk_trace(lam, p, grid, tol, derivative=True)
    else:
        raise ValueError(f"unknown method {method!r}")
    return SolutionTrace(lam, grid, w, w1, wl, wl1)


_THETA_BLOWUP = 40.0


def integrate_pruefer(lam, p: PotentialPrimitive, tol: float = 1e-10, grid=None, re_threshold: float | None = None) -> SolutionTrace:
    """Phase ``theta`` and amplitude ``r`` on ``grid``.

    ``log r`` is integrated instead of ``r`` so that ``r`` never vanishes.  A
    failed step or an exploding ``Im theta`` means ``lambda`` is below the region
    where the phase equation is solvable on all of ``[0, pi]``.
    """
    lam = _check(lam, tol)
    if re_threshold is not None and lam.real < re_threshold:
        raise PrueferExistenceError(
            f"theta-existence threshold violated: Re lambda={lam.real:.6g} < threshold {re_threshold:.6g}"
        )
    z = cmath.sqrt(lam)
    if z == 0:
        raise PrueferExistenceError("theta-existence threshold violated: lambda = 0")
    grid = default_grid(lam, p) if grid is None else np.asarray(grid, dtype=float)
    zi = 1.0 / z

    def rhs_factory(d0, d1, a):
        def rhs(t, y):
            u = d0 + d1 * (t - a)
            s2 = np.sin(2.0 * y[0])
            sn = np.sin(y[0])
            return np.array([
                z + zi * u * u * sn * sn + u * s2,
                -(u * np.cos(2.0 * y[0]) + 0.5 * zi * u * u * s2),
            ])

        return rhs

    y = np.zeros(2, dtype=complex)
    out = np.zeros((2, grid.size), dtype=complex)
    mesh = p.mesh
    for i in range(p.n_segments):
        a, b = mesh[i], mesh[i + 1]
        sel = (grid > a) & (grid <= b)
        try:
            # below the threshold theta may blow up; that is detected just after
            with np.errstate(all="ignore"):
                sol = solve_ivp(
                    rhs_factory(p.values_left[i], p.slopes[i], a), (a, b), y,
                    method="DOP853", rtol=tol, atol=tol, dense_output=True,
                )
        except (OverflowError, FloatingPointError) as exc:
            raise PrueferExistenceError("theta-existence threshold violated: overflow", a) from exc
        if sol.status != 0 or not np.all(np.isfinite(sol.y)):
            raise PrueferExistenceError("theta-existence threshold violated: step size underflow", float(sol.t[-1]))
        if np.max(np.abs(sol.y[0].imag)) > _THETA_BLOWUP:
            bad = float(sol.t[np.argmax(np.abs(sol.y[0].imag) > _THETA_BLOWUP)])
            raise PrueferExistenceError("theta-existence threshold violated: Im theta blow-up", bad)
        if np.any(sel):
            out[:, sel] = sol.sol(grid[sel])
        y = sol.y[:, -1]
    theta = out[0]
    r = np.exp(out[1])
    quasi = integrate_quasi(lam, p, tol, grid)
    return SolutionTrace(lam, grid, quasi.omega, quasi.omega_q1, theta=theta, r=r)


_THRESHOLD_CACHE: dict = {}


def estimate_re_threshold(p: PotentialPrimitive, alpha: float = 1.0, tol: float = 1e-6, start: float = 1.0, max_doublings: int = 30) -> float:
    """Smallest ``Re lambda`` on a doubling ladder from which the phase equation is solvable.

    Trial points sit on the real axis and near both edges of the half-strip
    ``|Im sqrt(lambda)| < alpha``; success is required at two consecutive rungs.
    """
    key = (p.mesh.tobytes(), p.values_left.tobytes(), p.slopes.tobytes(), float(alpha))
    if key in _THRESHOLD_CACHE:
        return _THRESHOLD_CACHE[key]
    coarse = np.linspace(0.0, PI, 9)

    def ok(re_lam):
        x = math.sqrt(re_lam)
        for im in (0.0, 0.95 * alpha, -0.95 * alpha):
            try:
                integrate_pruefer(complex(x, im) ** 2, p, tol, grid=coarse)
            except PrueferExistenceError:
                return False
        return True

    lam = start
    found = None
    for _ in range(max_doublings):
        if ok(lam) and ok(2 * lam):
            found = lam
            break
        lam *= 2
    if found is None:
        raise PrueferExistenceError(f"no solvable Re lambda found up to {lam:.3g}")
    _THRESHOLD_CACHE[key] = max(found, 1.0)
    return _THRESHOLD_CACHE[key]


@dataclass(frozen=True)
class PrueferRemainder:
    """Sup-norm remainders of the phase and amplitude against their two-term forms."""

    lam: complex
    theta_sup: float
    r_sup: float
    upsilon: float

    @property
    def theta_ratio(self) -> float:
        return self.theta_sup / self.upsilon**2

    @property
    def r_ratio(self) -> float:
        return self.r_sup / self.upsilon**2


def pruefer_remainder(lam, p: PotentialPrimitive, tol: float = 1e-10, grid=None, grid_density: float = 8.0) -> PrueferRemainder:
    """Compare ``theta`` with ``z x + upsilon(x)`` and ``r`` with ``1 - a(x) - B(x)/(2z)``."""
    lam = _check(lam, tol)
    trace = integrate_pruefer(lam, p, tol, grid)
    z = trace.sqrt_lambda
    osc = oscint.evaluate(trace.grid, z, p)
    theta_sup = float(np.max(np.abs(trace.theta - z * trace.grid - osc.upsilon)))
    r_sup = float(np.max(np.abs(trace.r - 1.0 + osc.a + 0.5 * osc.B / z)))
    big, _ = oscint.upsilon_sup(z, p, grid_density)
    return PrueferRemainder(lam, theta_sup, r_sup, big)
