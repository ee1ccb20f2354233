"""Piecewise-linear antiderivatives ``u`` of distributional potentials ``q = u'``.

The operator ``-y'' + q y`` on ``[0, pi]`` only sees ``q``; ``u`` is fixed up to
an additive constant.  Every potential handled by the package is reduced to a
complex piecewise-linear ``u`` on a mesh of ``[0, pi]``.  Jumps of ``u`` are
allowed at mesh points and correspond to delta interactions in ``q``.

Segment coefficients are stored in *local* form, ``u(t) = d0 + d1 (t - x_i)``
on ``[x_i, x_{i+1}]``, which keeps the closed-form integrals well conditioned.
The absolute form ``c0 + c1 t`` is available through :attr:`PotentialPrimitive.segments`.
"""

from __future__ import annotations

import ast
import csv
import math
import operator
import re
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

PI = math.pi

CATALOGUE = ("zero", "constant", "linear", "step", "sawtooth", "rough_fourier")


class PotentialError(ValueError):
    """Raised for malformed potential data or unknown catalogue entries."""


@dataclass(frozen=True)
class PiecewisePoly:
    """Complex piecewise polynomial on a mesh, in local coordinates.

    ``coefs[k, i]`` multiplies ``(t - mesh[i])**k`` on segment ``i``.
    """

    mesh: np.ndarray
    coefs: np.ndarray

    @property
    def degree(self) -> int:
        return self.coefs.shape[0] - 1

    @property
    def left(self) -> np.ndarray:
        return self.mesh[:-1]

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.mesh)

    def __mul__(self, other: PiecewisePoly) -> PiecewisePoly:
        if not np.array_equal(self.mesh, other.mesh):
            raise PotentialError("piecewise products need a common mesh")
        deg = self.degree + other.degree
        out = np.zeros((deg + 1, self.coefs.shape[1]), dtype=complex)
        for i, ci in enumerate(self.coefs):
            for j, cj in enumerate(other.coefs):
                out[i + j] += ci * cj
        return PiecewisePoly(self.mesh, out)

    def scale(self, c: complex) -> PiecewisePoly:
        return PiecewisePoly(self.mesh, self.coefs * c)

    def __add__(self, other: PiecewisePoly) -> PiecewisePoly:
        deg = max(self.degree, other.degree)
        out = np.zeros((deg + 1, self.coefs.shape[1]), dtype=complex)
        out[: self.degree + 1] += self.coefs
        out[: other.degree + 1] += other.coefs
        return PiecewisePoly(self.mesh, out)

    def conj(self) -> PiecewisePoly:
        return PiecewisePoly(self.mesh, self.coefs.conj())

    def real(self) -> PiecewisePoly:
        return PiecewisePoly(self.mesh, self.coefs.real.astype(complex))

    def imag(self) -> PiecewisePoly:
        return PiecewisePoly(self.mesh, self.coefs.imag.astype(complex))

    def times_distance_to_pi(self) -> PiecewisePoly:
        """Multiply by the weight ``pi - t``."""
        weight = np.zeros((2, self.coefs.shape[1]), dtype=complex)
        weight[0] = PI - self.left
        weight[1] = -1.0
        return self * PiecewisePoly(self.mesh, weight)

    def refine(self, points) -> PiecewisePoly:
        """Re-express on the union of the mesh and ``points`` (same function)."""
        pts = np.asarray(points, dtype=float)
        pts = pts[(pts > 0.0) & (pts < PI)]
        new_mesh = np.union1d(self.mesh, pts)
        if new_mesh.size == self.mesh.size:
            return self
        owner = np.searchsorted(self.mesh, new_mesh[:-1], side="right") - 1
        shift = new_mesh[:-1] - self.mesh[owner]
        old = self.coefs[:, owner]
        deg = self.degree
        new = np.zeros_like(old)
        # Taylor re-expansion about the new left endpoints.
        for k in range(deg + 1):
            for j in range(k, deg + 1):
                new[k] += math.comb(j, k) * old[j] * shift ** (j - k)
        return PiecewisePoly(new_mesh, new)

    def __call__(self, x, side: str = "right") -> np.ndarray:
        """Evaluate; at a mesh point the right limit is used unless ``side='left'``."""
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(self.mesh, x, side=side) - 1
        idx = np.clip(idx, 0, self.coefs.shape[1] - 1)
        s = x - self.mesh[idx]
        val = np.zeros(x.shape, dtype=complex)
        for k in range(self.degree, -1, -1):
            val = val * s + self.coefs[k, idx]
        return val

    def integral(self) -> complex:
        h = self.widths
        return complex(sum((self.coefs[k] * h ** (k + 1) / (k + 1)).sum() for k in range(self.degree + 1)))


@dataclass(frozen=True)
class PotentialPrimitive:
    """Piecewise-linear complex antiderivative ``u`` on a mesh of ``[0, pi]``."""

    mesh: np.ndarray
    values_left: np.ndarray
    slopes: np.ndarray
    name: str = "custom"
    l2_norm: float = field(init=False)

    def __post_init__(self):
        mesh = np.asarray(self.mesh, dtype=float)
        d0 = np.asarray(self.values_left, dtype=complex)
        d1 = np.asarray(self.slopes, dtype=complex)
        if mesh.ndim != 1 or mesh.size < 2:
            raise PotentialError("mesh needs at least two points")
        if mesh[0] != 0.0 or not math.isclose(mesh[-1], PI, rel_tol=0, abs_tol=1e-14):
            raise PotentialError("mesh must start at 0 and end at pi")
        if np.any(np.diff(mesh) <= 0):
            raise PotentialError("mesh must be strictly increasing")
        if d0.shape != (mesh.size - 1,) or d1.shape != d0.shape:
            raise PotentialError("one (value, slope) pair per segment is required")
        if not (np.all(np.isfinite(d0)) and np.all(np.isfinite(d1))):
            raise PotentialError("potential coefficients must be finite")
        mesh = mesh.copy()
        mesh[-1] = PI
        for arr in (mesh, d0, d1):
            arr.setflags(write=False)
        object.__setattr__(self, "mesh", mesh)
        object.__setattr__(self, "values_left", d0)
        object.__setattr__(self, "slopes", d1)
        object.__setattr__(self, "l2_norm", _l2_norm(mesh, d0, d1))

    @property
    def n_segments(self) -> int:
        return self.mesh.size - 1

    @property
    def segments(self) -> np.ndarray:
        """Absolute coefficients ``(c0, c1)`` with ``u(t) = c0 + c1 t`` per segment."""
        c1 = self.slopes
        c0 = self.values_left - c1 * self.mesh[:-1]
        return np.stack([c0, c1], axis=1)

    @property
    def values_right(self) -> np.ndarray:
        return self.values_left + self.slopes * np.diff(self.mesh)

    @property
    def jumps(self) -> np.ndarray:
        """``u(x_i+) - u(x_i-)`` at the interior mesh points."""
        return self.values_left[1:] - self.values_right[:-1]

    @property
    def is_real(self) -> bool:
        return bool(np.all(self.values_left.imag == 0) and np.all(self.slopes.imag == 0))

    def as_poly(self) -> PiecewisePoly:
        return PiecewisePoly(self.mesh, np.stack([self.values_left, self.slopes]))

    def __call__(self, x, side: str = "right") -> np.ndarray:
        return self.as_poly()(x, side=side)

    def sup_norm_gauge_optimal(self) -> tuple[float, float]:
        """Smallest sup norms of ``Re u - c`` and ``Im u - c`` over real constants ``c``."""
        ends = np.concatenate([self.values_left, self.values_right])
        re_span = ends.real.max() - ends.real.min()
        im_span = ends.imag.max() - ends.imag.min()
        return 0.5 * float(re_span), 0.5 * float(im_span)

    def conj(self) -> PotentialPrimitive:
        return PotentialPrimitive(self.mesh, self.values_left.conj(), self.slopes.conj(), name=f"conj({self.name})")


def _l2_norm(mesh, d0, d1) -> float:
    h = np.diff(mesh)
    # |d0 + d1 s|^2 integrated over [0, h] in closed form
    total = (np.abs(d0) ** 2 * h + (d0 * d1.conj()).real * h**2 + np.abs(d1) ** 2 * h**3 / 3.0).sum()
    return math.sqrt(max(float(total), 0.0))


def gauge_shift(p: PotentialPrimitive, c: complex) -> PotentialPrimitive:
    """Return ``u + c``; the distribution ``q = u'`` is unchanged."""
    return PotentialPrimitive(p.mesh, p.values_left + complex(c), p.slopes, name=p.name)


def mean_zero(p: PotentialPrimitive) -> PotentialPrimitive:
    mean = p.as_poly().integral() / PI
    return gauge_shift(p, -mean)


def from_samples(grid, values, name: str = "samples") -> PotentialPrimitive:
    """Continuous piecewise-linear interpolant of samples on ``grid``."""
    x = np.asarray(grid, dtype=float)
    v = np.asarray(values, dtype=complex)
    if x.ndim != 1 or v.shape != x.shape:
        raise PotentialError("grid and values must be one-dimensional and of equal length")
    if x.size < 2:
        raise PotentialError("at least two samples are needed")
    if not np.all(np.isfinite(x)) or not np.all(np.isfinite(v)):
        raise PotentialError("samples must be finite")
    if x[0] != 0.0 or abs(x[-1] - PI) > 1e-12:
        raise PotentialError(f"grid must run from 0 to pi, got [{x[0]}, {x[-1]}]")
    if np.any(np.diff(x) <= 0):
        raise PotentialError("grid must be strictly increasing")
    x = x.copy()
    x[-1] = PI
    slopes = np.diff(v) / np.diff(x)
    return PotentialPrimitive(x, v[:-1], slopes, name=name)


def read_samples_csv(path) -> PotentialPrimitive:
    """Read ``x, Re u[, Im u]`` rows; a non-numeric first row is taken as a header."""
    rows = []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            cells = [c.strip() for c in row if c.strip() != ""]
            if not cells:
                continue
            try:
                nums = [float(c) for c in cells]
            except ValueError:
                if not rows and lineno == 1:
                    continue
                raise PotentialError(f"{path}:{lineno}: non-numeric field in {row!r}") from None
            if len(nums) not in (2, 3):
                raise PotentialError(f"{path}:{lineno}: expected 2 or 3 columns, got {len(nums)}")
            rows.append(nums)
    if not rows:
        raise PotentialError(f"{path}: no samples")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise PotentialError(f"{path}: inconsistent column count")
    arr = np.array(rows)
    values = arr[:, 1] + (1j * arr[:, 2] if arr.shape[1] == 3 else 0.0)
    return from_samples(arr[:, 0], values, name=Path(path).stem)


def _piecewise_constant(breaks, levels, name) -> PotentialPrimitive:
    mesh = np.concatenate([[0.0], breaks, [PI]])
    levels = np.asarray(levels, dtype=complex)
    return PotentialPrimitive(mesh, levels, np.zeros_like(levels), name=name)


def from_catalogue(name: str, params=(), mesh_factor: int = 16) -> PotentialPrimitive:
    """Build a test potential by name.

    ``zero``; ``constant(c)``; ``linear(c)`` (``u = c t``, ``q = c``);
    ``step(kappa, x0)`` (``q = kappa delta(x - x0)``); ``sawtooth(c, k)``
    (``k`` rising teeth of height ``c``); ``rough_fourier(s, K, seed)``.
    """
    params = list(params)

    def need(k):
        if len(params) != k:
            raise PotentialError(f"{name} takes {k} parameter(s), got {len(params)}")

    if name == "zero":
        need(0)
        return _piecewise_constant([], [0.0], "zero")
    if name == "constant":
        need(1)
        return _piecewise_constant([], [complex(params[0])], f"constant({params[0]})")
    if name == "linear":
        need(1)
        c = complex(params[0])
        return PotentialPrimitive(np.array([0.0, PI]), [0.0], [c], name=f"linear({params[0]})")
    if name == "step":
        need(2)
        kappa, x0 = complex(params[0]), float(params[1])
        if not 0.0 < x0 < PI:
            raise PotentialError(f"step position must lie in (0, pi), got {x0}")
        return _piecewise_constant([x0], [0.0, kappa], f"step({params[0]},{x0:.17g})")
    if name == "sawtooth":
        need(2)
        c, k = complex(params[0]), int(params[1])
        if k < 1 or k != params[1]:
            raise PotentialError(f"sawtooth tooth count must be a positive integer, got {params[1]}")
        mesh = np.linspace(0.0, PI, k + 1)
        slope = c * k / PI
        return PotentialPrimitive(mesh, np.zeros(k, complex), np.full(k, slope), name=f"sawtooth({params[0]},{k})")
    if name == "rough_fourier":
        need(3)
        s, K, seed = float(params[0]), int(params[1]), int(params[2])
        if K < 1:
            raise PotentialError("rough_fourier needs K >= 1")
        if s <= 0.5:
            warnings.warn(f"rough_fourier with s={s} <= 1/2: the series is not L2-convergent as K grows", stacklevel=2)
        return _rough_fourier(s, K, seed, mesh_factor)
    raise PotentialError(f"unknown catalogue potential {name!r}; known: {', '.join(CATALOGUE)}")


def _rough_fourier(s: float, K: int, seed: int, mesh_factor: int) -> PotentialPrimitive:
    rng = np.random.default_rng(seed)
    xi = rng.standard_normal(K)
    eta = rng.standard_normal(K)
    k = np.arange(1, K + 1)
    grid = np.linspace(0.0, PI, mesh_factor * K + 1)
    weights = k ** (-s)
    vals = (weights * xi) @ np.cos(np.outer(k, grid)) + (weights * eta) @ np.sin(np.outer(k, grid))
    return from_samples(grid, vals, name=f"rough_fourier({s:g},{K},{seed})")


_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv}


def _eval_number(node):
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float, complex)):
        return node.value
    if isinstance(node, ast.Name) and node.id == "pi":
        return PI
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        v = _eval_number(node.operand)
        return -v if isinstance(node.op, ast.USub) else v
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        return _BINOPS[type(node.op)](_eval_number(node.left), _eval_number(node.right))
    raise ValueError("unsupported expression")


def parse_number(token: str):
    """Arithmetic on numbers and ``pi``; ``2i`` is accepted for ``2j``."""
    tok = re.sub(r"(?<=[0-9.])i\b", "j", token.strip())
    val = _eval_number(ast.parse(tok, mode="eval").body)
    if isinstance(val, complex) and val.imag == 0:
        val = val.real
    return val


def parse_spec(text: str) -> tuple[str, list]:
    """Parse ``name(p1, p2, ...)`` into a catalogue name and parameter list."""
    text = text.strip()
    if "(" not in text:
        return text, []
    if not text.endswith(")"):
        raise PotentialError(f"malformed potential spec {text!r}")
    name, inner = text[:-1].split("(", 1)
    params = []
    for tok in filter(None, (t.strip() for t in inner.split(","))):
        try:
            params.append(parse_number(tok))
        except (ValueError, SyntaxError, ZeroDivisionError) as exc:
            raise PotentialError(f"bad parameter {tok!r} in {text!r}") from exc
    return name.strip(), params
