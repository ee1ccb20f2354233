"""Dirichlet eigenvalues as zeros of the characteristic function ``w(pi, lambda)``.

Eigenvalues are located by Newton iteration from asymptotic seeds
``(n + mu_n)^2`` and by an argument-principle box search for the low part of
the spectrum.  The result is certified by a winding count of ``w(pi, .)``
around a rectangle that provably contains every eigenvalue of modulus below
the cut: for ``u`` in the gauge minimising ``sup|Re u|`` and ``sup|Im u|``,

    Re lambda >= -sup|Re u|^2,
    |Im lambda| <= 2 sup|Im u| (sup|Re u| + sqrt(sup|Re u|^2 + Re lambda)).
"""

from __future__ import annotations

import cmath
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import odesolve, oscint
from .potential import PotentialPrimitive

log = logging.getLogger(__name__)

DEGENERACY_THRESHOLD = 1e-6
_MAX_DTHETA = math.pi / 4


class CompletenessError(RuntimeError):
    def __init__(self, message: str, box=None):
        super().__init__(message if box is None else f"{message}; box={box}")
        self.box = box


class ContourError(RuntimeError):
    """The contour passes too close to a zero to resolve the argument."""


@dataclass
class Eigenpair:
    n: int
    lam: complex
    char_deriv: complex
    simple: bool
    multiplicity: int = 1
    residual: float = 0.0
    trace: odesolve.SolutionTrace | None = field(default=None, repr=False)

    @property
    def sqrt_lambda(self) -> complex:
        return cmath.sqrt(self.lam)


def characteristic(lam, p: PotentialPrimitive):
    """``(w(pi, lam), dw/dlam(pi, lam))``; scalars in, scalars out."""
    w, _, wl, _ = odesolve.propagate(np.atleast_1d(np.asarray(lam, dtype=complex)), p)
    if np.ndim(lam) == 0:
        return complex(w[0]), complex(wl[0])
    return w, wl


def _char_only(lam: np.ndarray, p: PotentialPrimitive) -> np.ndarray:
    return odesolve.propagate(lam, p, derivative=False)[0]


def derivative_scale(lam: complex) -> float:
    """Size of ``dw/dlam(pi)`` at a zero for the free operator, ``pi / (2 |lambda|)``."""
    return math.pi / (2.0 * max(1.0, abs(lam)))


def seed(n: int, p: PotentialPrimitive) -> complex:
    """Asymptotic starting point ``(n + mu_n)^2``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return (n + oscint.mu(n, p)) ** 2


def refine_many(lam0, p: PotentialPrimitive, tol: float = 1e-13, max_iter: int = 50):
    """Vectorised Newton iteration; returns ``(lam, dw/dlam, converged)`` arrays.

    Where ``|dw/dlam|`` is negligible a secant step through the previous iterate
    is taken instead.
    """
    lam = np.atleast_1d(np.asarray(lam0, dtype=complex)).copy()
    prev_lam = lam + 1e-3 * (1 + np.abs(lam))
    prev_w = _char_only(prev_lam, p)
    done = np.zeros(lam.shape, dtype=bool)
    extra = np.zeros(lam.shape, dtype=bool)
    deriv = np.zeros(lam.shape, dtype=complex)
    for _ in range(max_iter):
        active = ~extra
        if not active.any():
            break
        la = lam[active]
        w, _, wl, _ = odesolve.propagate(la, p)
        deriv[active] = wl
        tiny = np.abs(wl) < 1e-14 * np.array([derivative_scale(v) for v in la])
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.where(tiny, w * (la - prev_lam[active]) / (w - prev_w[active]), w / wl)
        step = np.where(np.isfinite(step), step, 0.0)
        prev_lam[active] = la
        prev_w[active] = w
        lam[active] = la - step
        small = np.abs(step) <= tol * (1 + np.abs(la))
        idx = np.flatnonzero(active)
        # one polishing step after the criterion is first met
        extra[idx[done[idx]]] = True
        done[idx[small]] = True
    w, _, wl, _ = odesolve.propagate(lam, p)
    return lam, wl, done


def refine(lam0: complex, p: PotentialPrimitive, tol: float = 1e-13):
    """Newton refinement of one zero; returns ``(lam, dw/dlam)``.

    Raises ``RuntimeError`` on non-convergence (the best iterate is attached as ``.best``).
    """
    lam, wl, ok = refine_many([lam0], p, tol)
    if not ok[0]:
        err = RuntimeError(f"Newton iteration from {lam0} did not converge")
        err.best = complex(lam[0])
        raise err
    return complex(lam[0]), complex(wl[0])


# --------------------------------------------------------------------------- winding counts


def _edge_samples(a: complex, b: complex, step: float) -> np.ndarray:
    """Edge parameters in ``[0, 1)`` spaced so the expected phase change per panel is ``step``.

    The local phase rate of ``w(pi, .)`` is modelled on ``sin(pi sqrt(lam))``,
    i.e. ``pi / (2 |lam|^{1/2})`` per unit length.
    """
    t = np.linspace(0.0, 1.0, 4097)
    pts = a + (b - a) * t
    rate = math.pi / (2.0 * np.sqrt(np.maximum(1.0, np.abs(pts)))) * abs(b - a)
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (rate[1:] + rate[:-1]) * np.diff(t))])
    npts = 16 + int(math.ceil(cum[-1] / step))
    uniform = np.linspace(0.0, 1.0, npts, endpoint=False)
    by_phase = np.interp(np.linspace(0.0, cum[-1], npts, endpoint=False), cum, t)
    return np.union1d(uniform, by_phase)


def winding_count(p: PotentialPrimitive, box, max_rounds: int = 40) -> int:
    """Number of zeros of ``w(pi, .)`` inside ``box = (re0, re1, im0, im1)``, with multiplicity.

    Panels are bisected until the argument change across every panel is below
    ``pi/4``; a contour too close to a zero raises :class:`ContourError`.
    """
    re0, re1, im0, im1 = box
    corners = [complex(re0, im0), complex(re1, im0), complex(re1, im1), complex(re0, im1)]
    params = []
    for i in range(4):
        a, b = corners[i], corners[(i + 1) % 4]
        params.append(i + _edge_samples(a, b, math.pi / 16))
    s = np.concatenate(params)

    def where(t):
        i = np.minimum(np.floor(t).astype(int), 3)
        frac = t - i
        ca = np.array(corners)[i]
        cb = np.array(corners)[(i + 1) % 4]
        return ca + frac * (cb - ca)

    vals = _char_only(where(s), p)
    for _ in range(max_rounds):
        if not np.all(np.isfinite(vals)) or np.any(vals == 0):
            raise ContourError(f"characteristic function vanishes or overflows on the contour of {box}")
        nxt = np.roll(vals, -1)
        dtheta = np.angle(nxt / vals)
        bad = np.abs(dtheta) > _MAX_DTHETA
        if not bad.any():
            total = dtheta.sum() / (2 * math.pi)
            count = int(round(total))
            if abs(total - count) > 1e-6:
                raise ContourError(f"non-integer winding {total} for {box}")
            return count
        s_next = np.roll(s, -1)
        s_next[-1] = 4.0
        gaps = s_next - s
        if np.min(gaps[bad]) < 1e-13:
            raise ContourError(f"cannot resolve argument near the contour of {box}")
        mids = s[bad] + 0.5 * gaps[bad]
        mv = _char_only(where(mids), p)
        s = np.concatenate([s, mids])
        vals = np.concatenate([vals, mv])
        order = np.argsort(s)
        s, vals = s[order], vals[order]
    raise ContourError(f"winding refinement did not settle for {box}")


# --------------------------------------------------------------------------- search


def eigenvalue_region(p: PotentialPrimitive):
    """Bounds ``(re_min, h(re))``: every eigenvalue has ``Re >= re_min`` and ``|Im| <= h(Re)``."""
    ur, ui = p.sup_norm_gauge_optimal()

    def height(re):
        return 2.0 * ui * (ur + math.sqrt(ur * ur + max(re, 0.0)))

    return -ur * ur, height


def _inside(lam, box, pad=0.0):
    re0, re1, im0, im1 = box
    return re0 - pad <= lam.real <= re1 + pad and im0 - pad <= lam.imag <= im1 + pad


def _split(box, ratio):
    re0, re1, im0, im1 = box
    if (re1 - re0) >= (im1 - im0):
        c = re0 + ratio * (re1 - re0)
        return (re0, c, im0, im1), (c, re1, im0, im1)
    c = im0 + ratio * (im1 - im0)
    return (re0, re1, im0, c), (re0, re1, c, im1)


def _count_split(p, box, depth):
    for ratio in (0.5, 0.4871, 0.5313, 0.4417, 0.5691):
        halves = _split(box, ratio)
        try:
            return halves, [winding_count(p, h) for h in halves]
        except ContourError:
            continue
    raise CompletenessError("no usable subdivision contour", box)


def find_in_box(p: PotentialPrimitive, box, count: int | None = None, depth: int = 0, tol: float = 1e-13) -> list[complex]:
    """All zeros inside ``box`` (repeated by multiplicity), by bisection plus Newton."""
    if count is None:
        count = winding_count(p, box)
    if count == 0:
        return []
    re0, re1, im0, im1 = box
    centre = complex(0.5 * (re0 + re1), 0.5 * (im0 + im1))
    diam = abs(complex(re1 - re0, im1 - im0))
    if count == 1:
        lam, _, ok = refine_many([centre], p, tol)
        if ok[0] and _inside(lam[0], box):
            return [complex(lam[0])]
    if count >= 2:
        cluster = _cluster(p, box, centre, count)
        if cluster is not None:
            return [cluster] * count
    if depth > 60 or diam < 1e-7 * (1 + abs(centre)):
        lam, _, _ = refine_many([centre], p, tol)
        return [complex(lam[0])] * count
    halves, counts = _count_split(p, box, depth)
    if sum(counts) != count:
        raise CompletenessError(f"sub-box counts {counts} do not add up to {count}", box)
    roots = []
    for h, c in zip(halves, counts):
        roots += find_in_box(p, h, c, depth + 1, tol)
    return roots


def _cluster(p, box, start: complex, m: int, max_iter: int = 60) -> complex | None:
    """A single zero of multiplicity ``m`` in ``box``, or ``None``.

    Newton's step scaled by ``m`` converges quadratically to an ``m``-fold zero;
    the candidate is accepted only if a small box around it winds ``m`` times.
    """
    lam = complex(start)
    best, best_w = lam, math.inf
    for _ in range(max_iter):
        w, wl = characteristic(lam, p)
        if abs(w) < best_w:
            best, best_w = lam, abs(w)
        if w == 0 or wl == 0 or not cmath.isfinite(w / wl):
            break
        step = m * w / wl
        lam -= step
        if abs(step) <= 1e-15 * (1 + abs(lam)):
            break
    if not _inside(best, box):
        return None
    r = 1e-6 * (1 + abs(best))
    for scale in (1.0, 3.0, 10.0):
        small = (best.real - r * scale, best.real + r * scale, best.imag - r * scale, best.imag + r * scale)
        try:
            if winding_count(p, small) == m:
                return best
            return None
        except ContourError:
            continue
    return None


def _multiplicity(p, lam, others) -> int:
    dist = min([abs(lam - o) for o in others if o != lam] + [1.0 + abs(lam)])
    r = min(dist / 3.0, 1e-3 * (1 + abs(lam)))
    for scale in (1.0, 0.5, 0.25):
        try:
            return winding_count(p, (lam.real - r * scale, lam.real + r * scale, lam.imag - r * scale, lam.imag + r * scale))
        except ContourError:
            continue
    return 1


def order_key_sort(values, rel=1e-12):
    """Sort by modulus, ties (to ``rel``) by increasing argument in ``(-pi, pi]``."""
    vals = sorted(values, key=abs)
    out, i = [], 0
    while i < len(vals):
        j = i + 1
        while j < len(vals) and abs(vals[j]) - abs(vals[i]) <= rel * max(1.0, abs(vals[i])):
            j += 1

        def arg(v):
            a = cmath.phase(v)
            return math.pi if a == -math.pi else a

        out += sorted(vals[i:j], key=arg)
        i = j
    return out


@dataclass
class SpectrumResult:
    eigenpairs: list[Eigenpair]
    certified_box: tuple
    winding: int
    found_in_box: int


def eigenvalues(N: int, p: PotentialPrimitive, tol: float = 1e-10, low_index: int = 8, traces: bool = True) -> list[Eigenpair]:
    return compute_spectrum(N, p, tol, low_index, traces).eigenpairs


def compute_spectrum(N: int, p: PotentialPrimitive, tol: float = 1e-10, low_index: int = 8, traces: bool = True) -> SpectrumResult:
    """First ``N`` eigenvalues (modulus, then argument) with a winding-count certificate."""
    if N < 1:
        raise ValueError("N must be >= 1")
    newton_tol = min(tol, 1e-13)
    re_min, height = eigenvalue_region(p)
    left = re_min - 1.0

    # low part: box search
    low_top = (min(N, low_index) + 0.5) ** 2
    low_box = (left, low_top, -height(low_top) - 1.0, height(low_top) + 1.0)
    low_box = _nudge(p, low_box)
    roots = find_in_box(p, low_box, tol=newton_tol)

    # higher part: seeds
    n_hi = N + 3
    seeds = np.array([seed(n, p) for n in range(1, n_hi + 1)])
    lam, _, ok = refine_many(seeds, p, newton_tol)
    roots += [complex(v) for v, good in zip(lam, ok) if good and not _inside(v, low_box)]
    roots = _merge(roots)

    mult: dict[complex, int] = {}
    for _attempt in range(6):
        _update_multiplicities(p, roots, mult)
        expanded = order_key_sort([r for r in roots for _ in range(mult[r])])
        if len(expanded) <= N:
            more = np.array([seed(n, p) for n in range(n_hi + 1, n_hi + 6)])
            n_hi += 5
            lam, _, ok = refine_many(more, p, newton_tol)
            roots = _merge(roots + [complex(v) for v, good in zip(lam, ok) if good])
            continue
        cut = 0.5 * (abs(expanded[N - 1]) + abs(expanded[N]))
        box = _nudge(p, (left, cut, -height(cut) - 1.0, height(cut) + 1.0))
        count = winding_count(p, box)
        inside = sum(mult[r] for r in roots if _inside(r, box))
        if count == inside:
            break
        log.info("winding count %d != %d roots found in %s; sweeping", count, inside, box)
        roots = _merge(roots + _sweep(p, box, roots, mult, newton_tol))
    else:
        raise CompletenessError(f"winding count {count} != {inside} roots found", box)

    if abs(expanded[N - 1]) > cut:
        raise CompletenessError("fewer than N eigenvalues below the certified modulus", box)
    pairs = _build_pairs(expanded[:N], p, mult, traces)
    return SpectrumResult(pairs, box, count, inside)


def _update_multiplicities(p, roots, mult):
    todo = [r for r in roots if r not in mult]
    if not todo:
        return
    _, wl = characteristic(np.array(todo), p)
    for r, d in zip(todo, wl):
        if abs(d) > DEGENERACY_THRESHOLD * derivative_scale(r):
            mult[r] = 1
        else:
            mult[r] = max(1, _multiplicity(p, r, roots))


def _merge(roots):
    """Deduplicate while keeping repeated entries produced for multiple zeros."""
    out = []
    for r in roots:
        if any(abs(r - q) <= 1e-8 * (1 + abs(r)) for q in out):
            continue
        out.append(r)
    return out


def _nudge(p, box):
    """Shift the right edge a little if a contour evaluation is ill-conditioned."""
    re0, re1, im0, im1 = box
    for shift in (0.0, 1e-3, -1e-3, 7e-3, -7e-3):
        trial = (re0, re1 + shift * (1 + abs(re1)), im0, im1)
        try:
            winding_count(p, trial)
            return trial
        except ContourError:
            continue
    raise CompletenessError("could not place a usable certification contour", box)


def _sweep(p, box, known, mult, tol, depth=0) -> list[complex]:
    count = winding_count(p, box)
    mine = sum(mult.get(r, 1) for r in known if _inside(r, box))
    if count == mine:
        return []
    if depth > 30 or mine == 0:
        return find_in_box(p, box, count, tol=tol)
    halves, _ = _count_split(p, box, depth)
    out = []
    for h in halves:
        out += _sweep(p, h, known, mult, tol, depth + 1)
    return out


def _build_pairs(values, p, mult, traces) -> list[Eigenpair]:
    lam = np.array(values, dtype=complex)
    w, _, wl, _ = odesolve.propagate(lam, p)
    pairs = []
    for i, (v, res, d) in enumerate(zip(values, w, wl)):
        m = mult.get(v, 1)
        pairs.append(
            Eigenpair(
                n=i + 1,
                lam=complex(v),
                char_deriv=complex(d),
                simple=m == 1 and abs(d) > DEGENERACY_THRESHOLD * derivative_scale(v),
                multiplicity=m,
                residual=float(abs(res)),
            )
        )
    if traces:
        for e in pairs:
            e.trace = odesolve.integrate_variational(e.lam, p)
    return pairs
