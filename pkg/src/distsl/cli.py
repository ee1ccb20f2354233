"""Command line entry point: ``distsl {spectrum,eigenfunctions,verify} --config RUN.json``.

Config schema (JSON object)::

    {
      "potential": "step(2i, pi/2)"          # catalogue spec, or
                 | {"name": "...", "params": [...]}
                 | {"samples": "path/to/u.csv"},
      "N": 40,                               # required, >= 1
      "alpha": 1.0,                          # half-strip height, > 0
      "tol": 1e-10,                          # in (0, 1e-4]
      "grid_density": 8.0,                   # points per unit |z| in Upsilon sups
      "mean_zero": false,
      "out": "results",
      "eigenfunction_range": [1, N],
      "checks": ["completeness", ...]        # verify subset; default all but gauge_invariance
    }

Exit codes: 0 success, 2 config error, 3 solver failure, 4 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import diagnostics, eigenfunctions, odesolve, oscint, spectrum
from .potential import PotentialError, PotentialPrimitive, from_catalogue, mean_zero, parse_spec, read_samples_csv

log = logging.getLogger("distsl")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_VERIFY = 0, 2, 3, 4

ALL_CHECKS = (
    "completeness",
    "characteristic_residual",
    "normalization_identity",
    "biorthogonality",
    "upsilon_comparability",
    "eigenvalue_asymptotics",
    "pruefer_representation",
    "cross_solver",
    "eigenfunction_remainders",
)
# opt-in: recomputes the spectrum for two shifted gauges
OPTIONAL_CHECKS = ("gauge_invariance",)


class ConfigError(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"config field '{field_name}': {message}")
        self.field = field_name


@dataclass
class RunConfig:
    potential: object
    N: int
    alpha: float = 1.0
    tol: float = 1e-10
    grid_density: float = 8.0
    mean_zero: bool = False
    out: str = "results"
    eigenfunction_range: tuple[int, int] | None = None
    checks: tuple[str, ...] = ALL_CHECKS
    base_dir: Path = field(default_factory=Path.cwd)

    def __post_init__(self):
        if isinstance(self.N, bool) or not isinstance(self.N, int) or self.N < 1:
            raise ConfigError("N", f"must be an integer >= 1, got {self.N!r}")
        for name in ("alpha", "tol", "grid_density"):
            val = getattr(self, name)
            if isinstance(val, bool) or not isinstance(val, (int, float)) or not math.isfinite(val):
                raise ConfigError(name, f"must be a finite number, got {val!r}")
        if self.alpha <= 0:
            raise ConfigError("alpha", "must be positive")
        if not 0 < self.tol <= 1e-4:
            raise ConfigError("tol", "must lie in (0, 1e-4]")
        if self.grid_density <= 0:
            raise ConfigError("grid_density", "must be positive")
        if self.eigenfunction_range is not None:
            r = self.eigenfunction_range
            if not (isinstance(r, (list, tuple)) and len(r) == 2 and all(isinstance(v, int) for v in r) and 1 <= r[0] <= r[1] <= self.N):
                raise ConfigError("eigenfunction_range", f"must be [lo, hi] with 1 <= lo <= hi <= N, got {r!r}")
            self.eigenfunction_range = (r[0], r[1])
        unknown = set(self.checks) - set(ALL_CHECKS) - set(OPTIONAL_CHECKS)
        if unknown:
            raise ConfigError("checks", f"unknown check(s) {sorted(unknown)}; known: {', '.join(ALL_CHECKS + OPTIONAL_CHECKS)}")
        self.checks = tuple(self.checks)

    @classmethod
    def from_dict(cls, data: dict, base_dir: Path | None = None) -> RunConfig:
        if not isinstance(data, dict):
            raise ConfigError("<root>", "must be a JSON object")
        known = {"potential", "N", "alpha", "tol", "grid_density", "mean_zero", "out", "eigenfunction_range", "checks"}
        extra = set(data) - known
        if extra:
            raise ConfigError(sorted(extra)[0], "unknown field")
        for req in ("potential", "N"):
            if req not in data:
                raise ConfigError(req, "missing required field")
        kwargs = dict(data)
        if base_dir is not None:
            kwargs["base_dir"] = base_dir
        return cls(**kwargs)

    @classmethod
    def load(cls, path) -> RunConfig:
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError("--config", f"cannot read {path}: {exc.strerror}") from exc
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError("<json>", f"line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
        return cls.from_dict(data, base_dir=path.parent)

    def build_potential(self, seed: int | None = None) -> PotentialPrimitive:
        spec = self.potential
        try:
            if isinstance(spec, str):
                name, params = parse_spec(spec)
            elif isinstance(spec, dict) and "samples" in spec:
                p = read_samples_csv(self.base_dir / spec["samples"])
                return mean_zero(p) if self.mean_zero else p
            elif isinstance(spec, dict) and "name" in spec:
                name, params = spec["name"], list(spec.get("params", []))
                params = [complex(v[0], v[1]) if isinstance(v, list) else v for v in params]
            else:
                raise ConfigError("potential", "expected a spec string, {name, params} or {samples}")
            if seed is not None:
                if name != "rough_fourier":
                    raise ConfigError("potential", "--seed only applies to rough_fourier")
                params = list(params[:2]) + [seed]
            p = from_catalogue(name, params)
        except (PotentialError, OSError) as exc:
            raise ConfigError("potential", str(exc)) from exc
        return mean_zero(p) if self.mean_zero else p


# --------------------------------------------------------------------------- formatting


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def write_csv(path: Path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def _map(fn, items, threads: int):
    if threads <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))  # map preserves input order


# --------------------------------------------------------------------------- subcommands


SPECTRUM_HEADER = ["n", "re_lambda", "im_lambda", "re_sqrt_lambda", "im_sqrt_lambda", "re_mu", "im_mu",
                   "abs_rho", "upsilon", "rho_over_upsilon2", "simple"]


def run_spectrum(cfg: RunConfig, p: PotentialPrimitive, out: Path, threads: int = 1):
    result = spectrum.compute_spectrum(cfg.N, p, cfg.tol, traces=False)

    def row(e):
        z = e.sqrt_lambda
        mu = oscint.mu(e.n, p)
        rho = abs(z - e.n - mu)
        big, _ = oscint.upsilon_sup(z, p, cfg.grid_density)
        ratio = rho / big**2 if big > 0 else math.nan
        return [e.n, e.lam.real, e.lam.imag, z.real, z.imag, mu.real, mu.imag, rho, big, ratio, e.simple]

    rows = _map(row, result.eigenpairs, threads)
    write_csv(out / "spectrum.csv", SPECTRUM_HEADER, rows)
    return result


EF_HEADER = ["x", "re_y", "im_y", "re_v", "im_v", "re_approx_y", "im_approx_y", "re_approx_v", "im_approx_v"]
SUMMARY_HEADER = ["n", "re_lambda", "im_lambda", "abs_rho", "r_y", "r_v", "upsilon", "upsilon1",
                  "rho_over_upsilon2", "r_y_over_upsilon2", "sum_r_y", "sum_r_v", "sum_abs_rho"]


def run_eigenfunctions(cfg: RunConfig, p: PotentialPrimitive, out: Path, threads: int = 1):
    result = spectrum.compute_spectrum(cfg.N, p, cfg.tol, traces=False)
    lo, hi = cfg.eigenfunction_range or (1, cfg.N)
    pairs = [e for e in result.eigenpairs if lo <= e.n <= hi]
    skipped = [e.n for e in pairs if not e.simple]
    for n in skipped:
        log.warning("index %d flagged as (near) multiple; no eigenfunction output", n)
    simple = [e for e in pairs if e.simple]

    def one(e):
        quad = eigenfunctions.Quadrature.for_index(p, e.n)
        x, y = eigenfunctions.normalized_y(e, p, quad=quad)
        _, v = eigenfunctions.biorthogonal_v(e, p, x, quad=quad)
        ay = eigenfunctions.approx_y(e.n, p, x)()
        av = eigenfunctions.approx_v(e.n, p, x)()
        rows = zip(x, y.real, y.imag, v.real, v.imag, ay.real, ay.imag, av.real, av.imag)
        write_csv(out / f"eigenfunction_{e.n:05d}.csv", EF_HEADER, rows)
        return eigenfunctions.remainder_record(e, p, cfg.grid_density)

    records = _map(one, simple, threads)
    sy = sv = se = 0.0
    rows = []
    for r in records:
        sy, sv, se = sy + r.r_y, sv + r.r_v, se + abs(r.rho_ev)
        r.sum_y, r.sum_v, r.sum_ev = sy, sv, se
        rows.append([r.n, r.lam.real, r.lam.imag, abs(r.rho_ev), r.r_y, r.r_v, r.upsilon, r.upsilon1,
                     r.ratio_ev, r.ratio_y, r.sum_y, r.sum_v, r.sum_ev])
    write_csv(out / "remainders.csv", SUMMARY_HEADER, rows)
    if skipped:
        (out / "skipped.txt").write_text("".join(f"{n}\n" for n in skipped), encoding="utf-8")
    return records


def run_verify(cfg: RunConfig, p: PotentialPrimitive, out: Path, threads: int = 1) -> list[diagnostics.Check]:
    result = spectrum.compute_spectrum(cfg.N, p, cfg.tol, traces=False)
    pairs = result.eigenpairs
    checks: list[diagnostics.Check] = []
    want = set(cfg.checks)
    if "completeness" in want:
        checks.append(diagnostics.check_completeness(result, cfg.N))
    if "characteristic_residual" in want:
        checks.append(diagnostics.check_residuals(pairs))
    if "normalization_identity" in want:
        checks.append(diagnostics.check_normalization_identity([e for e in pairs if e.simple], p))
    if "biorthogonality" in want:
        checks.append(diagnostics.check_biorthogonality(pairs, p))
    if "upsilon_comparability" in want:
        checks.append(diagnostics.check_upsilon_comparability(p, cfg.alpha, cfg.grid_density))
    if "eigenvalue_asymptotics" in want:
        checks.append(diagnostics.check_eigenvalue_asymptotics(pairs, p, (min(10, cfg.N), cfg.N), cfg.grid_density))
    if "pruefer_representation" in want:
        checks += diagnostics.check_pruefer_representation(p, cfg.alpha, tol=cfg.tol)
    if "cross_solver" in want:
        checks.append(diagnostics.check_cross_solver(p, cfg.alpha, tol=cfg.tol))
    if "eigenfunction_remainders" in want:
        if all(u == 0 for u in np.abs(p.values_left)) and all(s == 0 for s in np.abs(p.slopes)):
            checks.append(diagnostics.Check("eigenfunction_remainders", diagnostics.SKIPPED, None, None,
                                            "degenerate-Upsilon (zero potential)"))
        else:
            recs = eigenfunctions.remainders(pairs, p, grid_density=cfg.grid_density)
            hi = cfg.N
            checks += diagnostics.check_eigenfunction_remainders(
                recs, trend_range=(min(20, hi), hi), sum_window=(max(1, (2 * hi) // 3), hi)
            )
    if "gauge_invariance" in want:
        checks.append(diagnostics.check_gauge_invariance(pairs, p, tol=cfg.tol))
    report = {"potential": p.name, "N": cfg.N, "checks": [c.as_dict() for c in checks]}
    text = json.dumps(report, indent=2, sort_keys=True, default=_json_default, allow_nan=True)
    (out / "verify.json").write_text(text + "\n", encoding="utf-8")
    return checks


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    raise TypeError(f"not serializable: {type(obj).__name__}")


# --------------------------------------------------------------------------- entry point


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="distsl", description="Dirichlet spectra for -y'' + u' y on [0, pi].")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, help_ in (("spectrum", "eigenvalue report"), ("eigenfunctions", "eigenfunction grids and remainders"),
                        ("verify", "verification checks")):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", required=True, help="JSON run configuration")
        sp.add_argument("--out", help="output directory (overrides config 'out')")
        sp.add_argument("--n", type=int, help="number of eigenpairs (overrides config 'N')")
        sp.add_argument("--seed", type=int, help="seed for rough_fourier")
        sp.add_argument("--mean-zero", action="store_true", help="shift u to zero mean before running")
        sp.add_argument("--threads", type=int, default=1, help="worker threads for per-index work")
        sp.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = RunConfig.load(args.config)
        if args.n is not None:
            cfg.N = args.n
        if args.mean_zero:
            cfg.mean_zero = True
        if args.threads < 1:
            raise ConfigError("--threads", "must be >= 1")
        cfg.__post_init__()
        p = cfg.build_potential(args.seed)
        out = Path(args.out) if args.out else cfg.base_dir / cfg.out
        out.mkdir(parents=True, exist_ok=True)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    runner = {"spectrum": run_spectrum, "eigenfunctions": run_eigenfunctions, "verify": run_verify}[args.command]
    try:
        res = runner(cfg, p, out, args.threads)
    except (odesolve.SolverError, spectrum.CompletenessError, spectrum.ContourError, RuntimeError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    if args.command == "verify":
        for c in res:
            print(f"{c.status:8s} {c.name}: measured={c.measured} threshold={c.threshold} {c.note}")
        if any(c.status == diagnostics.FAIL for c in res):
            return EXIT_VERIFY
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
