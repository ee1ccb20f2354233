"""Verification checks shared by the ``verify`` subcommand and the acceptance suite.

Each check returns a :class:`Check` with a machine-readable status.  Fitted
constants (``max`` of a normalized remainder) are reported, never compared
with a prescribed value.  A trend test fits ``ratio ~ c0 + c1 n`` by least
squares and flags an upward trend when ``c1 > 2 SE(c1)``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import eigenfunctions, odesolve, oscint, spectrum
from .potential import PotentialPrimitive, gauge_shift

PASS, FAIL, SKIPPED = "pass", "fail", "skipped"
# sqrt(lambda) is only resolved to about this times n after Newton refinement
SQRT_FLOOR = 1e-12


@dataclass
class Check:
    name: str
    status: str
    measured: float | None
    threshold: float | None
    note: str = ""
    details: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Trend:
    slope: float
    stderr: float

    @property
    def upward(self) -> bool:
        return self.slope > 2.0 * self.stderr

    @property
    def decreasing(self) -> bool:
        return self.slope < 0.0


def linear_trend(n, values) -> Trend:
    n = np.asarray(n, dtype=float)
    y = np.asarray(values, dtype=float)
    if n.size < 3:
        return Trend(0.0, math.inf)
    X = np.vstack([np.ones_like(n), n]).T
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    dof = n.size - 2
    ss = float(((n - n.mean()) ** 2).sum())
    se = math.sqrt(float(resid @ resid) / dof / ss) if ss > 0 else math.inf
    return Trend(float(coef[1]), se)


def log_trend(n, values) -> Trend:
    """Slope of ``log(values)`` against ``log(n)``."""
    return linear_trend(np.log(np.asarray(n, float)), np.log(np.maximum(np.asarray(values, float), 1e-300)))


def _bounded_ratio_check(name, n, num, upsilon, floor=None) -> Check:
    n = np.asarray(n)
    num = np.asarray(num, dtype=float)
    ups = np.asarray(upsilon, dtype=float)
    if n.size == 0:
        return Check(name, SKIPPED, None, None, "no indices in range")
    if np.all(ups == 0.0):
        return Check(name, SKIPPED, None, None, "degenerate-Upsilon (Upsilon = 0, ratio undefined)")
    keep = ups > 0
    if floor is not None:
        keep &= num > floor
    if not keep.any():
        return Check(name, PASS, 0.0, None, "remainder at solver floor for every index")
    ratio = num[keep] / ups[keep] ** 2
    trend = linear_trend(n[keep], ratio)
    status = FAIL if trend.upward else PASS
    return Check(
        name, status, float(ratio.max()), None, "fitted M = max ratio; fail on upward trend",
        {"slope": trend.slope, "slope_stderr": trend.stderr, "n_used": int(keep.sum())},
    )


# --------------------------------------------------------------------------- checks


def check_completeness(result: spectrum.SpectrumResult, N: int) -> Check:
    ok = result.winding == result.found_in_box and len(result.eigenpairs) == N
    return Check("completeness", PASS if ok else FAIL, float(result.winding), float(result.found_in_box),
                 "winding count vs roots found in the certified box", {"box": list(result.certified_box)})


def check_residuals(pairs, threshold: float = 1e-9) -> Check:
    worst = max(e.residual / max(1.0, abs(e.lam)) for e in pairs)
    return Check("characteristic_residual", PASS if worst <= threshold else FAIL, worst, threshold)


def check_normalization_identity(pairs, p: PotentialPrimitive, threshold: float = 1e-6) -> Check:
    worst = 0.0
    for e in pairs:
        lhs, rhs = eigenfunctions.normalization_identity(e, p)
        worst = max(worst, abs(lhs - rhs) / max(abs(lhs), 1e-300))
    return Check("normalization_identity", PASS if worst <= threshold else FAIL, worst, threshold)


def check_biorthogonality(pairs, p: PotentialPrimitive, n_max: int = 40, off: float = 1e-6, diag: float = 1e-8) -> Check:
    use = [e for e in pairs if e.n <= n_max and e.simple]
    if not use:
        return Check("biorthogonality", SKIPPED, None, off, "no simple eigenpairs")
    G = eigenfunctions.gram_matrix(use, p)
    d = np.abs(np.diag(G) - 1.0).max()
    o = np.abs(G - np.diag(np.diag(G))).max() if len(use) > 1 else 0.0
    worst = float(max(o, d))
    ok = o <= off and d <= diag
    return Check("biorthogonality", PASS if ok else FAIL, worst, off,
                 f"off-diagonal <= {off:g}, diagonal <= {diag:g}", {"offdiag": float(o), "diag": float(d), "size": len(use)})


def half_strip_samples(alpha: float, re_max: float = 60.0) -> list[complex]:
    xs = np.concatenate([np.linspace(1.0, 10.0, 10), np.linspace(12.0, re_max, 9)])
    ys = np.array([0.0, 0.5, 0.95, -0.5, -0.95]) * alpha
    return [complex(x, y) for x in xs for y in ys]


def check_upsilon_comparability(p: PotentialPrimitive, alpha: float, density: float = 8.0) -> Check:
    M = oscint.comparability_constant(p, alpha)
    worst_upper, worst_lower = 0.0, 0.0
    violations = 0
    for z in half_strip_samples(alpha):
        big, small = oscint.upsilon_sup(z, p, density)
        if not (small <= big <= M * small):
            violations += 1
        if small > 0:
            worst_upper = max(worst_upper, big / (M * small))
            worst_lower = max(worst_lower, small / big)
    return Check("upsilon_comparability", PASS if violations == 0 else FAIL, worst_upper, 1.0,
                 "max Upsilon/(M Upsilon1); also Upsilon1 <= Upsilon", {"M": M, "max_Upsilon1_over_Upsilon": worst_lower,
                                                                          "violations": violations})


def eigenvalue_remainders(pairs, p: PotentialPrimitive, n_range, density: float = 8.0):
    n, rho, ups = [], [], []
    for e in pairs:
        if not n_range[0] <= e.n <= n_range[1]:
            continue
        mu = oscint.mu(e.n, p)
        big, _ = oscint.upsilon_sup(e.sqrt_lambda, p, density)
        n.append(e.n)
        rho.append(abs(e.sqrt_lambda - e.n - mu))
        ups.append(big)
    return np.array(n), np.array(rho), np.array(ups)


def check_eigenvalue_asymptotics(pairs, p: PotentialPrimitive, n_range, density: float = 8.0) -> Check:
    n, rho, ups = eigenvalue_remainders(pairs, p, n_range, density)
    return _bounded_ratio_check("eigenvalue_asymptotics", n, rho, ups, floor=SQRT_FLOOR * n)


def pruefer_ladder(k_range=(10, 60)) -> list[complex]:
    return [complex((k + 0.25) ** 2) for k in range(k_range[0], k_range[1] + 1)]


def check_pruefer_representation(p: PotentialPrimitive, alpha: float, k_range=(10, 60), tol: float = 1e-10) -> list[Check]:
    threshold = odesolve.estimate_re_threshold(p, alpha)
    lams = [lam for lam in pruefer_ladder(k_range) if lam.real >= threshold]
    recs = [odesolve.pruefer_remainder(lam, p, tol) for lam in lams]
    k = np.array([cmath.sqrt(r.lam).real for r in recs])
    ups = np.array([r.upsilon for r in recs])
    out = []
    for label, vals in (("theta", [r.theta_sup for r in recs]), ("r", [r.r_sup for r in recs])):
        c = _bounded_ratio_check(f"{label}_representation", k, vals, ups)
        c.details["re_threshold"] = threshold
        out.append(c)
    return out


def check_cross_solver(p: PotentialPrimitive, alpha: float, threshold: float = 1e-7, tol: float = 1e-10) -> Check:
    re_thr = odesolve.estimate_re_threshold(p, alpha)
    worst = 0.0
    for scale in (1.0, 4.0, 25.0):
        for im in (0.0, 0.5 * alpha):
            z = complex(math.sqrt(scale * max(re_thr, 1.0)) + 1.0, im)
            tr = odesolve.integrate_pruefer(z * z, p, tol)
            worst = max(worst, float(np.abs(tr.r * np.sin(tr.theta) - tr.sqrt_lambda * tr.omega).max()))
    return Check("cross_solver", PASS if worst <= threshold else FAIL, worst, threshold,
                 "sup |r sin(theta) - sqrt(lambda) w|", {"re_threshold": re_thr})


def check_gauge_invariance(pairs, p: PotentialPrimitive, shifts=(1.0, 2 + 1j), threshold: float = 1e-8, tol: float = 1e-10) -> Check:
    N = len(pairs)
    base = np.array([e.lam for e in pairs])
    worst = 0.0
    for c in shifts:
        other = spectrum.compute_spectrum(N, gauge_shift(p, c), tol, traces=False).eigenpairs
        worst = max(worst, float(np.abs(np.array([e.lam for e in other]) - base).max()))
    return Check("gauge_invariance", PASS if worst <= threshold else FAIL, worst, threshold,
                 "max |lambda_n(u + c) - lambda_n(u)|", {"shifts": [str(c) for c in shifts]})


def partial_sum_growth(n, values, window) -> float:
    """``(S(hi) - S(lo)) / S(lo)`` with ``S(m) = sum_{k <= m}``."""
    n = np.asarray(n)
    v = np.asarray(values, dtype=float)
    lo, hi = window
    s_lo = v[n <= lo].sum()
    s_hi = v[n <= hi].sum()
    return float((s_hi - s_lo) / s_lo) if s_lo > 0 else math.inf


def check_eigenfunction_remainders(records, trend_range=(20, 150), sum_window=(100, 150), growth: float = 0.05) -> list[Check]:
    out = []
    n_all = np.array([r.n for r in records])
    for label in ("r_y", "r_v"):
        vals = np.array([getattr(r, label) for r in records])
        sel = (n_all >= trend_range[0]) & (n_all <= trend_range[1])
        if sel.sum() < 3 or n_all.max() < sum_window[1]:
            out.append(Check(f"{label}_trend", SKIPPED, None, growth, "index range not covered"))
            continue
        trend = log_trend(n_all[sel], vals[sel])
        g = partial_sum_growth(n_all, vals, sum_window)
        ok = trend.decreasing and g < growth
        out.append(Check(
            f"{label}_trend", PASS if ok else FAIL, g, growth,
            "log-log slope < 0 and partial-sum growth over the window below threshold",
            {"loglog_slope": trend.slope, "slope_stderr": trend.stderr, "window": list(sum_window)},
        ))
    return out
