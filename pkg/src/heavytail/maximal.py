"""Hardy-Littlewood and family maximal operators on grids, weak-type curves,
and numerical checks of the translation-regularity hypothesis for the Levy family.

Grid functions are piecewise constant: node i carries the value on the cell
[x_i - h/2, x_i + h/2], and a constant ``fill`` value is assumed outside the
grid.  Under this reading the centered maximal function and the convolution
with a radial density are computed exactly (up to the accuracy of the
density's distribution function).
"""
from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import DomainError, HeavytailError
from .kernels import (RadialProfile, _large_rho_series, _small_rho_series, check_sigma,
                      gaussian_profile, levy_at_zero, levy_derivative, levy_phi3_scaled,
                      levy_profile, levy_profile_1d, mollify, poisson_profile, sphere_area)


class PaddingError(HeavytailError):
    """The grid does not contain the input's support to the requested tolerance."""

    def __init__(self, message, required_radius=None):
        super().__init__(message)
        self.required_radius = required_radius


# --------------------------------------------------------------------------
# Grid functions
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class GridFunction:
    """Values on a uniform lattice (one axis per dimension), constant ``fill`` outside."""

    axes: tuple
    values: np.ndarray
    fill: float = 0.0

    def __post_init__(self):
        axes = tuple(np.asarray(a, dtype=float) for a in self.axes)
        vals = np.asarray(self.values, dtype=float)
        if not axes or any(a.ndim != 1 or a.size == 0 for a in axes):
            raise DomainError("grid axes must be nonempty 1-d arrays")
        if vals.shape != tuple(a.size for a in axes):
            raise DomainError(f"values shape {vals.shape} does not match axes")
        if not np.all(np.isfinite(vals)):
            raise DomainError("grid values must be finite")
        for a in axes:
            if a.size > 1:
                d = np.diff(a)
                if not (np.all(d > 0) and np.allclose(d, d[0], rtol=1e-9, atol=0)):
                    raise DomainError("grid axes must be uniform and increasing")
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "values", vals)

    @classmethod
    def on_interval(cls, lo: float, hi: float, h: float, func=None, fill: float = 0.0):
        """Nodes lo, lo+h, ..., up to hi (inclusive within rounding)."""
        n = int(round((hi - lo) / h)) + 1
        x = lo + h * np.arange(n)
        v = np.zeros(n) if func is None else np.asarray(func(x), dtype=float) * np.ones(n)
        return cls((x,), v, fill)

    @property
    def ndim(self) -> int:
        return len(self.axes)

    @property
    def h(self) -> tuple:
        return tuple(float(a[1] - a[0]) if a.size > 1 else 1.0 for a in self.axes)

    @property
    def x(self) -> np.ndarray:
        if self.ndim != 1:
            raise DomainError("x is defined for 1-d grids")
        return self.axes[0]

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.h))

    def l1_norm(self) -> float:
        return float(np.abs(self.values).sum() * self.cell_volume)

    def with_values(self, values, fill=None):
        return GridFunction(self.axes, values, self.fill if fill is None else fill)

    def to_csv(self, path):
        mesh = np.meshgrid(*self.axes, indexing="ij")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"x{i}" for i in range(self.ndim)] + ["value"])
            for idx in np.ndindex(self.values.shape):
                w.writerow([repr(float(m[idx])) for m in mesh] + [repr(float(self.values[idx]))])

    @classmethod
    def from_csv(cls, path, fill: float = 0.0):
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        coords, vals = data[:, :-1], data[:, -1]
        axes = tuple(np.unique(coords[:, i]) for i in range(coords.shape[1]))
        shape = tuple(a.size for a in axes)
        if int(np.prod(shape)) != len(vals):
            raise DomainError("CSV does not describe a full lattice")
        order = np.lexsort(coords.T[::-1])
        return cls(axes, vals[order].reshape(shape), fill)


@dataclass(frozen=True)
class ParamGrid:
    """Finite set of (sigma, y) pairs."""

    pairs: tuple

    def __post_init__(self):
        pairs = tuple((float(s), float(y)) for s, y in self.pairs)
        if not pairs:
            raise DomainError("parameter grid is empty")
        for s, y in pairs:
            if not (0 < s <= 2) or not y > 0:
                raise DomainError(f"invalid parameter pair ({s}, {y})")
        object.__setattr__(self, "pairs", pairs)

    @classmethod
    def product(cls, sigmas, ys):
        return cls(tuple(itertools.product(sigmas, ys)))

    @classmethod
    def log_spaced(cls, sigma_range, y_range, num=16):
        s = np.linspace(sigma_range[0], sigma_range[1], num)
        y = np.geomspace(y_range[0], y_range[1], num)
        return cls.product(s, y)

    def refined(self):
        """Doubled grid: midpoints in sigma and geometric midpoints in y added."""
        s = np.unique([p[0] for p in self.pairs])
        y = np.unique([p[1] for p in self.pairs])
        s2 = np.sort(np.concatenate([s, (s[1:] + s[:-1]) / 2]))
        y2 = np.sort(np.concatenate([y, np.sqrt(y[1:] * y[:-1])]))
        return ParamGrid.product(s2, y2)

    def __len__(self):
        return len(self.pairs)

    def __iter__(self):
        return iter(self.pairs)


# --------------------------------------------------------------------------
# Hardy-Littlewood maximal function
# --------------------------------------------------------------------------

def hl_maximal(f: GridFunction) -> GridFunction:
    """Centered Hardy-Littlewood maximal function at the grid nodes.

    In 1-d the average over [x_i - r, x_i + r] of a piecewise-constant
    function is monotone between the radii (k + 1/2) h, so the supremum is
    the largest window mean over 2k+1 cells (cells beyond the grid carry
    |fill|), including the r -> infinity limit |fill|.  In higher dimension
    the sup runs over node-centred Euclidean balls at all realized node
    distances, with node counting.
    """
    if f.values.size == 0:
        raise DomainError("empty grid")
    a = np.abs(f.values)
    fill = abs(f.fill)
    if f.ndim == 1:
        N = a.size
        P = np.concatenate([[0.0], np.cumsum(a)])
        i = np.arange(N)
        best = np.maximum(a, fill)
        for k in range(1, N):
            lo = np.maximum(i - k, 0)
            hi = np.minimum(i + k, N - 1)
            s = P[hi + 1] - P[lo] + fill * ((2 * k + 1) - (hi - lo + 1))
            np.maximum(best, s / (2 * k + 1), out=best)
        return f.with_values(best, fill=fill)
    return f.with_values(_hl_lattice(a, f.h, fill), fill=fill)


def _hl_lattice(a, h, fill):
    shape = a.shape
    ranges = [np.arange(-(s - 1), s) for s in shape]
    offs = np.array(list(itertools.product(*ranges)))
    d2 = ((offs * np.asarray(h)) ** 2).sum(axis=1)
    order = np.argsort(d2, kind="stable")
    offs, d2 = offs[order], d2[order]
    idx = np.indices(shape).reshape(len(shape), -1).T
    total = np.zeros(len(idx))
    best = np.maximum(a.ravel(), fill)
    count = 0
    for j, off in enumerate(offs):
        tgt = idx + off
        inside = np.all((tgt >= 0) & (tgt < np.asarray(shape)), axis=1)
        vals = np.full(len(idx), fill)
        vals[inside] = a[tuple(tgt[inside].T)]
        total += vals
        count += 1
        if j + 1 == len(offs) or d2[j + 1] > d2[j]:
            np.maximum(best, total / count, out=best)
    return best.reshape(shape)


# --------------------------------------------------------------------------
# Convolution with radial densities
# --------------------------------------------------------------------------

def _cell_masses(profile: RadialProfile, h: float, N: int):
    """Masses of the density on the cells [(k - 1/2) h, (k + 1/2) h], k = -(N-1)..N-1,
    and the tail function at the half-integer edges."""
    edges = (np.arange(N + 1) + 0.5) * h
    T = np.asarray(profile.tail_mass(edges), dtype=float)
    m0 = 1.0 - T[0]
    mk = (T[:-2] - T[1:-1]) / 2.0
    full = np.concatenate([mk[::-1], [m0], mk])
    return full, T


def grid_convolve(profile: RadialProfile, f: GridFunction, *, tol: float = 1e-9) -> GridFunction:
    """(g * f)(x_i) for a one-dimensional radial density g and piecewise-constant f.

    Exact cell masses come from the profile's tail function; the region
    beyond the grid contributes fill times the analytic tail mass.  Raises
    PaddingError if f is visibly truncated (nonzero at the boundary nodes
    with zero fill) by more than ``tol``.
    """
    if f.ndim != 1 or profile.dim != 1:
        raise DomainError("grid convolution is implemented for one-dimensional grids")
    x = f.x
    N = x.size
    h = f.h[0]
    if f.fill == 0 and N > 1 and max(abs(f.values[0]), abs(f.values[-1])) > tol:
        fmax = float(np.abs(f.values).max())
        need = _radius_for_tail(profile, tol / max(fmax, 1e-300))
        raise PaddingError("input is nonzero at the grid boundary; extend the grid or declare a fill value",
                           required_radius=need)
    masses, _ = _cell_masses(profile, h, N)
    out = np.convolve(f.values, masses)[N - 1:2 * N - 1]
    if f.fill != 0:
        left = x - (x[0] - h / 2)
        right = (x[-1] + h / 2) - x
        out = out + f.fill * (np.asarray(profile.tail_mass(left)) + np.asarray(profile.tail_mass(right))) / 2
    return f.with_values(out)


def _radius_for_tail(profile, eps):
    r = profile.scale
    for _ in range(200):
        if float(profile.tail_mass(r)) < eps:
            return r
        r *= 2
    return math.inf


def poisson_family(n: int = 1) -> Callable[[float, float], RadialProfile]:
    return lambda s, y: poisson_profile(n, s, y)


def levy_family() -> Callable[[float, float], RadialProfile]:
    return lambda s, y: levy_profile(s, y, sigma_range=(0.01, 1.99))


def family_maximal(params: ParamGrid, f: GridFunction, kernel: Callable[[float, float], RadialProfile] | None = None,
                   *, return_argmax: bool = False):
    """Nodewise max over the parameter grid of |K_(sigma, y) * f|."""
    kernel = kernel or poisson_family(1)
    best = np.full(f.values.shape, -np.inf)
    arg = np.zeros(f.values.shape, dtype=int)
    for j, (s, y) in enumerate(params):
        try:
            conv = np.abs(grid_convolve(kernel(s, y), f).values)
        except Exception as exc:
            raise type(exc)(f"kernel evaluation failed at (sigma={s}, y={y}): {exc}") from exc
        upd = conv > best
        best = np.where(upd, conv, best)
        arg = np.where(upd, j, arg)
    out = f.with_values(best, fill=abs(f.fill))
    return (out, arg) if return_argmax else out


def domination_constant(n: int, gamma: float, sigma: float) -> float:
    """(omega_n^2 / gamma^n) ((1+gamma)/(1-gamma))^(2n+sigma)."""
    if not 0 < gamma < 1:
        raise DomainError("gamma must lie in (0, 1)")
    w = sphere_area(n)
    return w * w / gamma ** n * ((1 + gamma) / (1 - gamma)) ** (2 * n + sigma)


# --------------------------------------------------------------------------
# Weak type
# --------------------------------------------------------------------------

@dataclass
class WeakTypeCurve:
    lambdas: np.ndarray
    values: np.ndarray
    l1_norm: float
    sup: float

    @property
    def constant(self) -> float:
        """sup over lambda of lambda |{Tf > lambda}| divided by the L1 norm of f."""
        return self.sup / self.l1_norm if self.l1_norm > 0 else math.inf

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["lambda", "lambda_times_measure"])
            for l, v in zip(self.lambdas, self.values):
                w.writerow([repr(float(l)), repr(float(v))])


def weak_type_curve(Tf: GridFunction, f: GridFunction, lambdas=None) -> WeakTypeCurve:
    """lambda -> lambda * |{|Tf| > lambda}| by node counting times the cell volume.

    ``sup`` is the supremum over all lambda > 0, attained as lambda increases
    to one of the node values v: v * |{|Tf| >= v}|.
    """
    if Tf.values.shape != f.values.shape:
        raise DomainError("Tf and f must live on the same grid")
    vals = np.abs(Tf.values).ravel()
    cell = Tf.cell_volume
    srt = np.sort(vals)[::-1]
    if lambdas is None:
        lambdas = np.unique(srt[srt > 0])
    lambdas = np.asarray(lambdas, dtype=float)
    counts = np.searchsorted(-srt, -lambdas, side="left")  # number strictly greater
    curve = lambdas * counts * cell
    ge = np.arange(1, srt.size + 1)
    sup = float(np.max(srt * ge * cell)) if srt.size else 0.0
    return WeakTypeCurve(lambdas=lambdas, values=curve, l1_norm=f.l1_norm(), sup=sup)


# --------------------------------------------------------------------------
# Tabulated Levy profiles and the translation-regularity integral
# --------------------------------------------------------------------------

class LevyTable:
    """Log-log cubic spline of the unit-scale Levy density on [rho_lo, rho_hi].

    Below the table the Taylor series at 0 (or the value at 0) is used, above
    it the large-rho series.  Tables are built eagerly and immutable, so they
    can be shared between threads.
    """

    def __init__(self, sigma: float, rho_lo: float = 1e-4, rho_hi: float = 1e6, per_decade: int = 40):
        self.sigma = check_sigma(sigma, allow_gaussian=True, bounds=(0.01, 1.99))
        self.rho_lo, self.rho_hi = rho_lo, rho_hi
        nd = math.log10(rho_hi / rho_lo)
        r = np.geomspace(rho_lo, rho_hi, int(round(nd * per_decade)) + 1)
        v = levy_profile_1d(self.sigma, r, sigma_range=(0.01, 1.99))
        self._spline = CubicSpline(np.log(r), np.log(v))
        self._v0 = levy_at_zero(self.sigma)

    def __call__(self, rho):
        rho = np.abs(np.asarray(rho, dtype=float))
        out = np.empty_like(rho)
        mid = (rho >= self.rho_lo) & (rho <= self.rho_hi)
        out[mid] = np.exp(self._spline(np.log(rho[mid])))
        lo = rho < self.rho_lo
        if lo.any():
            val, err = _small_rho_series(self.sigma, np.maximum(rho[lo], 1e-300))
            ok = np.isfinite(val) & (err < 1e-6 * np.abs(val))
            out[lo] = np.where(ok, val, self._v0)
        hi = rho > self.rho_hi
        if hi.any():
            val, _ = _large_rho_series(self.sigma, rho[hi])
            out[hi] = val
        return out


@dataclass
class ZoResult:
    value: float
    grid_part: float
    tail_part: float
    tail_constant: float
    z: float
    x_extent: float
    meta: dict = field(default_factory=dict)


def _unit_profile_factory(sigma):
    if sigma == 2.0:
        g = gaussian_profile(1)
        return lambda r: g.func(np.abs(r))
    return LevyTable(sigma)


def zo_regularity_integral(params: ParamGrid, z: float, x_extent: float, *, per_decade: int = 400,
                           profile_factory: Callable | None = None, tables: dict | None = None) -> ZoResult:
    """int_{2|z| <= |x| <= x_extent} max_alpha |k_alpha(x - z) - k_alpha(x)| dx, plus C |z| / x_extent per side.

    k_(sigma, y)(w) = y^-1 v(|w|/y; sigma).  The integral is evaluated on a
    logarithmic x grid (Simpson in log x) on both half-lines; C is the
    largest value of F(x, z) x^2 / |z| over the final decade of the grid.
    """
    z = float(z)
    if z == 0:
        raise DomainError("offset z must be nonzero")
    az = abs(z)
    if x_extent < 4 * az:
        raise DomainError("x_extent must be at least 4|z|")
    factory = profile_factory or _unit_profile_factory
    tables = {} if tables is None else tables
    ndec = math.log10(x_extent / (2 * az))
    m = max(int(math.ceil(ndec * per_decade / 2)) * 2, 2) + 1
    x = np.geomspace(2 * az, x_extent, m)
    # positive side: |x - z| = x - |z| after reflecting z to the positive axis
    near = x - az
    far = x + az
    Fp = np.zeros_like(x)
    Fn = np.zeros_like(x)
    for s, y in params:
        if s not in tables:
            tables[s] = factory(s)
        v = tables[s]
        kx = v(x / y) / y
        Fp = np.maximum(Fp, np.abs(v(near / y) / y - kx))
        Fn = np.maximum(Fn, np.abs(v(far / y) / y - kx))
    u = np.log(x)
    du = u[1] - u[0]
    w = np.ones(m)
    w[1:-1:2] = 4
    w[2:-1:2] = 2
    grid = float(du / 3 * (w * (Fp + Fn) * x).sum())
    last = x >= x_extent / 10
    C = float(np.max(np.maximum(Fp, Fn)[last] * x[last] ** 2 / az))
    tail = 2 * C * az / x_extent
    return ZoResult(value=grid + tail, grid_part=grid, tail_part=tail, tail_constant=C, z=z,
                    x_extent=float(x_extent), meta={"points": int(m), "params": len(params)})


# --------------------------------------------------------------------------
# Phi3 scan
# --------------------------------------------------------------------------

@dataclass
class Phi3Scan:
    max_scaled: float
    argmax: tuple
    max_derivative_term: float
    sigmas: list
    rho: list
    values: list
    derivative_terms: list
    final_decade_slopes: dict
    no_growth: bool

    def to_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def phi3_bound_scan(sigma_grid: Sequence[float], rho_grid: Sequence[float], *, slope_tol: float = 0.0) -> Phi3Scan:
    """Scan |rho^3 Phi3| over a (sigma, rho) grid.

    Also reports max rho^2 |v'(rho)| with v' from its own cosine
    representation.  ``no_growth`` holds when, for every sigma, the log-log
    least-squares slope of |rho^3 Phi3| over the final decade of the rho grid
    is at most ``slope_tol``.
    """
    sig = [float(s) for s in sigma_grid]
    rho = np.sort(np.asarray(rho_grid, dtype=float))
    if not sig or rho.size == 0:
        raise DomainError("grids must be nonempty")
    vals, ders, slopes = [], [], {}
    last = rho >= rho[-1] / 10
    for s in sig:
        p = np.asarray(levy_phi3_scaled(s, rho, sigma_range=(0.01, 1.99)), dtype=float)
        d = rho ** 2 * np.abs(np.asarray(levy_derivative(s, rho, sigma_range=(0.01, 1.99)), dtype=float))
        vals.append(p)
        ders.append(d)
        if last.sum() >= 2:
            slopes[s] = float(np.polyfit(np.log(rho[last]), np.log(np.abs(p[last])), 1)[0])
    V = np.abs(np.array(vals))
    i, j = np.unravel_index(int(np.argmax(V)), V.shape)
    return Phi3Scan(max_scaled=float(V[i, j]), argmax=(sig[i], float(rho[j])),
                    max_derivative_term=float(np.max(ders)), sigmas=sig, rho=rho.tolist(),
                    values=[v.tolist() for v in vals], derivative_terms=[d.tolist() for d in ders],
                    final_decade_slopes=slopes,
                    no_growth=bool(all(v <= slope_tol for v in slopes.values())))
