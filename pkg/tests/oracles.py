"""Brute-force reference computations, deliberately independent of the package code paths."""

from __future__ import annotations

import math

import numpy as np
from scipy.integrate import simpson

PI = math.pi


def u_values(p, x, seg=None):
    """Evaluate u by direct lookup of the local coefficients (no package evaluator).

    ``seg`` pins the segment, which matters at a jump on a piece's right end.
    """
    x = np.asarray(x, dtype=float)
    if seg is None:
        seg = np.clip(np.searchsorted(p.mesh, x, side="right") - 1, 0, p.n_segments - 1)
    return p.values_left[seg] + p.slopes[seg] * (x - p.mesh[seg])


def _piece_segment(p, g):
    return int(np.clip(np.searchsorted(p.mesh, 0.5 * (g[0] + g[-1]), side="right") - 1, 0, p.n_segments - 1))


def simpson_complex(y, x):
    return simpson(np.real(y), x=x) + 1j * simpson(np.imag(y), x=x)


def piece_grids(p, upto, nodes=10_001):
    """Simpson grids on each mesh piece inside [0, upto]; keeps jumps off the stencils."""
    edges = [t for t in p.mesh if t < upto] + [upto]
    per = max(3, nodes // max(1, len(edges) - 1) | 1)
    return [np.linspace(a, b, per) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def l2_norm_simpson(p, nodes=10_001):
    total = 0.0
    for g in piece_grids(p, PI, nodes):
        total += simpson(np.abs(u_values(p, g, _piece_segment(p, g))) ** 2, x=g)
    return math.sqrt(total)


def oscillatory_simpson(p, x, z, nodes=10_001):
    """(b, a, A, B, U) by composite Simpson on each mesh piece."""
    out = np.zeros(5, dtype=complex)
    for g in piece_grids(p, x, nodes):
        u = u_values(p, g, _piece_segment(p, g))
        s, c = np.sin(2 * z * g), np.cos(2 * z * g)
        for k, f in enumerate((u * s, u * c, u * u * c, u * u * s, u * u)):
            out[k] += simpson_complex(f, g)
    return out


def w_tensor(p, x, z, n=2000):
    """Double integral w by Gauss-Legendre tensor quadrature over the triangle s < t.

    Both axes use about ``n`` nodes in 8-point panels split at the mesh points;
    the inner integral up to each outer node uses its own 8-point rule on the
    partial panel, so the triangle's diagonal is integrated without a kink.
    """
    gl_x, gl_w = np.polynomial.legendre.leggauss(8)
    edges = np.array([t for t in p.mesh if t < x] + [x])
    panels = []
    for a, b in zip(edges[:-1], edges[1:]):
        k = max(1, int(round(n * (b - a) / x / 8)))
        br = np.linspace(a, b, k + 1)
        panels += list(zip(br[:-1], br[1:]))

    def g(s):
        return u_values(p, s) * np.sin(2 * z * s)

    total = 0.0 + 0.0j
    acc = 0.0 + 0.0j
    for lo, hi in panels:
        t = 0.5 * (lo + hi) + 0.5 * (hi - lo) * gl_x
        wt = 0.5 * (hi - lo) * gl_w
        # s-nodes for [lo, t_j], one column per outer node
        s = lo + (t - lo)[None, :] * 0.5 * (gl_x[:, None] + 1)
        partial = ((t - lo) * 0.5) * np.sum(gl_w[:, None] * g(s), axis=0)
        inner = acc + partial
        total += np.sum(wt * u_values(p, t) * np.cos(2 * z * t) * inner)
        acc += np.sum(wt * g(t))
    return complex(total)


def delta_branch_roots(kappa, count):
    """Eigenvalues of q = kappa delta(x - pi/2): roots of z sin(pi z) + kappa sin^2(pi z / 2) = 0.

    The factor sin(pi z / 2) gives z = 2, 4, ...; the other factor
    2 z cos(pi z / 2) + kappa sin(pi z / 2) is bracketed and bisected.
    """
    g = lambda z: 2 * z * math.cos(PI * z / 2) + kappa * math.sin(PI * z / 2)  # noqa: E731
    roots = [float(z) ** 2 for z in range(2, 2 * count + 2, 2)]
    for k in range(count):
        lo, hi = 2 * k + 1e-12, 2 * k + 2 - 1e-12
        if g(lo) * g(hi) > 0:
            continue
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if g(lo) * g(mid) <= 0:
                hi = mid
            else:
                lo = mid
        roots.append((0.5 * (lo + hi)) ** 2)
    return sorted(roots)[:count]


def full_characteristic_bisection(kappa, lam_lo, lam_hi):
    """Bisection on F(z) = z sin(pi z) + kappa sin^2(pi z / 2) in z over [sqrt(lo), sqrt(hi)]."""
    F = lambda z: z * math.sin(PI * z) + kappa * math.sin(PI * z / 2) ** 2  # noqa: E731
    lo, hi = math.sqrt(lam_lo), math.sqrt(lam_hi)
    flo = F(lo)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fm = F(mid)
        if flo * fm <= 0:
            hi = mid
        else:
            lo, flo = mid, fm
    return (0.5 * (lo + hi)) ** 2
