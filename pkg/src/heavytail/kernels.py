"""Cauchy-Poisson and symmetric stable (Levy) radial profiles.

Conventions: ``sigma`` is the stability order, ``y`` the mollification
scale, ``n`` the Euclidean dimension.  Radial profiles are functions of the
radius rho = |x| and integrate to one against omega_n rho^(n-1) drho, where
omega_n is the area of the unit sphere in R^n.

The Levy profile is the one-dimensional symmetric stable density with
characteristic function exp(-|t|^sigma),

    v(rho; sigma) = (1/pi) int_0^inf exp(-t^sigma) cos(rho t) dt,

evaluated with the lobe-wise scheme of :mod:`heavytail._oscillatory` and,
for large rho, with its convergent (sigma < 1) or asymptotic (sigma > 1)
power series.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy import integrate, special

from ._oscillatory import fourier_integral
from .errors import DomainError, QuadratureError, StabilityOrderError

SIGMA_RANGE = (0.05, 1.95)
_NEG_TOL = 1e-12


def sphere_area(n: int) -> float:
    """Surface area omega_n of the unit sphere in R^n (omega_1 = 2)."""
    if n < 1:
        raise DomainError(f"dimension must be >= 1, got {n}")
    return 2.0 * math.pi ** (n / 2) / math.gamma(n / 2)


def check_sigma(sigma, *, allow_gaussian=False, bounds=(0.0, 2.0)):
    """Validate a stability order; returns it as float."""
    s = float(sigma)
    if allow_gaussian and s == 2.0:
        return s
    lo, hi = bounds
    if not (lo <= s <= hi) or not (0.0 < s < 2.0):
        raise DomainError(f"stability order {s} outside admissible range [{lo}, {hi}] within (0, 2)")
    return s


def _check_scale(y):
    y = float(y)
    if not y > 0 or not math.isfinite(y):
        raise DomainError(f"scale must be positive and finite, got {y}")
    return y


# --------------------------------------------------------------------------
# Cauchy-Poisson family
# --------------------------------------------------------------------------

def _radial_tail_integral(n, sigma, r, tol):
    """int_r^inf (1+rho^2)^(-(n+sigma)/2) rho^(n-1) drho for r >= 1.

    With u = 1/rho the integrand becomes u^(sigma-1) (1+u^2)^(-(n+sigma)/2)
    on [0, 1/r]; the algebraic endpoint factor is handled by QUADPACK's
    QAWS rule.
    """
    e = (n + sigma) / 2

    def f(u):
        return (1.0 + u * u) ** (-e)

    val, err = integrate.quad(f, 0.0, 1.0 / r, weight="alg", wvar=(sigma - 1.0, 0.0),
                              epsabs=0.0, epsrel=tol, limit=200)
    return val, err


def poisson_normalizer(n: int, sigma: float, *, tol: float = 1e-13) -> float:
    """I(sigma) = omega_n int_0^inf (1+rho^2)^(-(n+sigma)/2) rho^(n-1) drho.

    Adaptive quadrature on [0, 1] plus the substituted tail on [1, inf).
    Raises QuadratureError carrying the achieved error estimate when the
    estimate exceeds ``tol`` relative.
    """
    sigma = check_sigma(sigma)
    w = sphere_area(n)
    e = (n + sigma) / 2
    head, herr = integrate.quad(lambda r: (1 + r * r) ** (-e) * r ** (n - 1), 0.0, 1.0,
                                epsabs=0.0, epsrel=tol, limit=200)
    tail, terr = _radial_tail_integral(n, sigma, 1.0, tol)
    total = head + tail
    err = herr + terr
    if not err <= 10 * tol * total:
        raise QuadratureError(f"normalizer quadrature for n={n}, sigma={sigma} missed tolerance",
                              estimate=w * total, error=w * err)
    return w * total


def normalizer_lower_bound(n: int, sigma: float) -> float:
    """omega_n sigma^-1 2^(-(n+sigma)/2), a lower bound for I(sigma)."""
    return sphere_area(n) / sigma * 2.0 ** (-(n + sigma) / 2)


def _radius(x, n):
    x = np.asarray(x, dtype=float)
    if n == 1:
        if x.ndim >= 1 and x.shape[-1:] == (1,):
            x = x[..., 0]
        return np.abs(x)
    if x.shape[-1:] != (n,):
        raise DomainError(f"points must have trailing axis of length {n}")
    return np.linalg.norm(x, axis=-1)


def poisson_eval(n: int, sigma: float, y: float, x):
    """I(sigma)^-1 y^sigma (y^2 + |x|^2)^(-(n+sigma)/2).

    For n = 1, ``x`` may be any array of coordinates; for n > 1 the last axis
    holds the n coordinates.
    """
    y = _check_scale(y)
    norm = poisson_normalizer(n, sigma)
    r = _radius(x, n)
    return y ** sigma * (y * y + r * r) ** (-(n + sigma) / 2) / norm


def poisson_tail_mass(n: int, sigma: float, a):
    """Mass of the unit-scale Poisson profile outside radius ``a``.

    The radial tail integral is a regularized incomplete beta function
    I_u(sigma/2, n/2) with u = 1/(1 + a^2).
    """
    a = np.asarray(a, dtype=float)
    return special.betainc(sigma / 2, n / 2, 1.0 / (1.0 + a * a))


# --------------------------------------------------------------------------
# Radial profiles
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class RadialProfile:
    """Radial density rho -> g(rho) on R^dim.

    ``tail_mass_fn(lam)`` returns the mass outside radius lam and
    ``tail_integral_fn(R)`` returns int_R^inf g rho^(n-1) drho; both are
    optional analytic companions used by quadrature and convolution code.
    ``scale`` is a characteristic radius used to place quadrature panels.
    """

    dim: int
    func: Callable[[np.ndarray], np.ndarray]
    decreasing: bool = True
    total_mass_hint: float | None = None
    label: str = ""
    sigma: float | None = None
    scale: float = 1.0
    tail_mass_fn: Callable | None = None
    tail_integral_fn: Callable | None = None
    meta: dict = field(default_factory=dict, compare=False)

    def __call__(self, rho):
        rho = np.asarray(rho, dtype=float)
        if np.any(rho < 0):
            raise DomainError("radius must be nonnegative")
        return self.func(rho)

    def tail_mass(self, lam):
        """Mass of the profile outside radius ``lam``."""
        if self.tail_mass_fn is not None:
            return self.tail_mass_fn(np.asarray(lam, dtype=float))
        lam = np.atleast_1d(np.asarray(lam, dtype=float))
        w = sphere_area(self.dim)
        out = [w * _panel_integral(self, float(l), math.inf) for l in lam]
        return np.asarray(out) if len(out) > 1 else out[0]

    def mass(self, *, decades: int = 7, panels_per_decade: int = 8) -> float:
        """Total mass by composite Gauss-Legendre on geometric panels.

        Panels cover [scale 10^-decades, scale 10^decades]; the inner disc is
        integrated directly and the outer tail by ``tail_integral_fn`` when
        available, adaptive quadrature otherwise.
        """
        w = sphere_area(self.dim)
        return w * _panel_integral(self, 0.0, math.inf, decades=decades,
                                   panels_per_decade=panels_per_decade)

    def sample(self, rho):
        return np.asarray(self(rho), dtype=float)

    def to_csv(self, path, rho):
        rho = np.asarray(rho, dtype=float)
        vals = self.sample(rho)
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["rho", "value"])
            for r, v in zip(rho, vals):
                wr.writerow([repr(float(r)), repr(float(v))])


_GX, _GW = np.polynomial.legendre.leggauss(20)


def _panel_integral(g: RadialProfile, a: float, b: float, *, decades=7, panels_per_decade=8):
    """int_a^b g(rho) rho^(n-1) drho with geometric panels around g.scale."""
    n = g.dim
    # small orders concentrate mass like rho^sigma near the origin
    inner = decades if not g.sigma or g.sigma >= 0.5 else max(decades, math.ceil(3.0 / g.sigma))
    lo = g.scale * 10.0 ** -inner
    hi = g.scale * 10.0 ** decades
    a = max(a, 0.0)
    upper = min(b, hi)
    total = 0.0
    if a < upper:
        grid = np.geomspace(lo, hi, (inner + decades) * panels_per_decade + 1)
        edges = np.concatenate([[a], grid[(grid > a) & (grid < upper)], [upper]])
        left, right = edges[:-1], edges[1:]
        half = (right - left) / 2
        nodes = (left + half)[:, None] + half[:, None] * _GX[None, :]
        vals = g.func(nodes) * nodes ** (n - 1)
        total = float((vals * _GW[None, :] * half[:, None]).sum())
    if b > hi:
        r0 = max(hi, a)
        if g.tail_integral_fn is not None:
            total += float(g.tail_integral_fn(r0))
        else:
            t, _ = integrate.quad(lambda r: float(g.func(np.array(r))) * r ** (n - 1), r0, math.inf,
                                  epsabs=0.0, epsrel=1e-10, limit=400)
            total += t
    return total


def mollify(profile: RadialProfile, y: float) -> RadialProfile:
    """Rescaled profile rho -> y^-n g(rho/y); mass and monotonicity are preserved."""
    y = _check_scale(y)
    if y == 1.0:
        return profile
    n = profile.dim
    g = profile.func
    tm = profile.tail_mass_fn
    ti = profile.tail_integral_fn
    return replace(
        profile,
        func=lambda rho: y ** -n * g(np.asarray(rho, dtype=float) / y),
        scale=profile.scale * y,
        label=f"{profile.label}[y={y:g}]",
        tail_mass_fn=None if tm is None else (lambda lam: tm(np.asarray(lam, dtype=float) / y)),
        tail_integral_fn=None if ti is None else (lambda r: ti(r / y)),
        meta={**profile.meta, "y": profile.meta.get("y", 1.0) * y},
    )


def poisson_profile(n: int, sigma: float, y: float = 1.0) -> RadialProfile:
    """Profile of P^sigma_y on R^n."""
    sigma = check_sigma(sigma)
    norm = poisson_normalizer(n, sigma)
    e = (n + sigma) / 2
    w = sphere_area(n)

    def func(rho):
        rho = np.asarray(rho, dtype=float)
        return (1.0 + rho * rho) ** (-e) / norm

    def tail_mass(lam):
        return poisson_tail_mass(n, sigma, lam)

    def tail_integral(r):
        return float(poisson_tail_mass(n, sigma, r)) / w

    base = RadialProfile(dim=n, func=func, decreasing=True, total_mass_hint=1.0,
                         label=f"poisson(n={n},sigma={sigma:g})", sigma=sigma,
                         tail_mass_fn=tail_mass, tail_integral_fn=tail_integral,
                         meta={"family": "poisson", "n": n, "sigma": sigma, "y": 1.0})
    return mollify(base, y)


# --------------------------------------------------------------------------
# Levy stable profiles (n = 1)
# --------------------------------------------------------------------------

def _large_rho_series(sigma, rho, *, power_shift=1.0, integrate_terms=False, kmax=200):
    """Series in rho^-sigma for the stable density tail.

    Density: (1/pi) sum_k (-1)^(k+1) Gamma(k sigma + 1)/k! sin(k pi sigma/2) rho^(-k sigma - 1).
    With ``integrate_terms`` each term is integrated from rho to infinity and
    doubled, giving the two-sided tail mass.  Returns (value, error) where the
    error is the magnitude bound of the first omitted term; terms are summed
    until they fall below 1e-17 relative or start to grow.
    """
    rho = np.atleast_1d(np.asarray(rho, dtype=float))
    lr = np.log(rho)
    total = np.zeros_like(rho)
    err = np.full_like(rho, np.inf)
    done = np.zeros(rho.shape, dtype=bool)
    prev_mag = np.full_like(rho, np.inf)
    for k in range(1, kmax + 1):
        lmag = special.gammaln(k * sigma + 1) - special.gammaln(k + 1) - k * sigma * lr
        if integrate_terms:
            lmag = lmag - math.log(k * sigma) + math.log(2.0)
        else:
            lmag = lmag - lr
        mag = np.exp(lmag) / math.pi
        s = math.sin(k * math.pi * sigma / 2)
        growing = mag > prev_mag
        stop_now = ~done & growing
        err = np.where(stop_now, prev_mag, err)
        done |= stop_now
        live = ~done
        total = np.where(live, total + (-1) ** (k + 1) * s * mag, total)
        small = live & (mag <= 1e-17 * np.abs(total))
        err = np.where(small, mag, err)
        done |= small
        prev_mag = np.where(live, mag, prev_mag)
        if done.all():
            break
    err = np.where(done, err, prev_mag)
    return total, err


def _small_rho_series(sigma, rho, kmax=60):
    """Taylor series at 0: (1/pi) sum_k (-1)^k Gamma((2k+1)/sigma)/(sigma (2k)!) rho^2k.

    Convergent for sigma > 1, asymptotic otherwise; returns (value, error)."""
    rho = np.atleast_1d(np.asarray(rho, dtype=float))
    with np.errstate(divide="ignore"):
        lr = np.log(rho)
    total = np.zeros_like(rho)
    err = np.full_like(rho, np.inf)
    done = np.zeros(rho.shape, dtype=bool)
    prev = np.full_like(rho, np.inf)
    for k in range(kmax):
        lmag = special.gammaln((2 * k + 1) / sigma) - math.log(sigma) - special.gammaln(2 * k + 1)
        mag = np.exp(lmag + 2 * k * lr) / math.pi if k else np.full_like(rho, math.exp(lmag) / math.pi)
        grow = (mag > prev) & ~done
        err = np.where(grow, prev, err)
        done |= grow
        live = ~done
        total = np.where(live, total + (-1) ** k * mag, total)
        small = live & (mag <= 1e-17 * np.abs(total))
        err = np.where(small, mag, err)
        done |= small
        prev = np.where(live, mag, prev)
        if done.all():
            break
    return total, np.where(done, err, prev)


def _head_levels(scales):
    """Graded head depth reaching well below the smallest envelope scale."""
    smallest = float(np.min(scales))
    return 64 + max(0, math.ceil(-math.log2(smallest))) if smallest < 1 else 64


def levy_at_zero(sigma: float) -> float:
    """v(0; sigma) = Gamma(1 + 1/sigma)/pi."""
    return math.gamma(1 + 1 / sigma) / math.pi


def levy_profile_1d(sigma, rho, *, sigma_range=SIGMA_RANGE, rtol=1e-13, atol=1e-16,
                    use_series=True):
    """Unit-scale symmetric sigma-stable density v(rho; sigma) on R.

    ``sigma = 2`` is admitted and gives the Gaussian with variance 2.
    Values are computed by lobe-wise quadrature of (1/(pi rho)) int
    exp(-(s/rho)^sigma) cos s ds, switching to the large-rho power series
    where its truncation error is below 1e-14 relative (set ``use_series``
    False to force quadrature).  Raises QuadratureError if acceleration
    fails or a value is negative beyond 1e-12.
    """
    sigma = check_sigma(sigma, allow_gaussian=True, bounds=sigma_range)
    rho_arr = np.asarray(rho, dtype=float)
    scalar = rho_arr.ndim == 0
    r = np.atleast_1d(rho_arr).astype(float).ravel()
    if np.any(r < 0) or not np.all(np.isfinite(r)):
        raise DomainError("radius must be finite and nonnegative")
    out = np.empty_like(r)
    zero = r == 0
    out[zero] = levy_at_zero(sigma)
    todo = ~zero
    if use_series and sigma < 2 and todo.any():
        idx = np.flatnonzero(todo)
        big = idx[r[idx] > 5.0]
        if big.size:
            val, err = _large_rho_series(sigma, r[big])
            good = err <= 1e-14 * np.abs(val)
            out[big[good]] = val[good]
            todo[big[good]] = False
    if todo.any():
        rr = r[todo]

        def env(s, p):
            return np.exp(-((s / p) ** sigma))

        def tail(s0, p):
            return 2.0 * np.exp(-((s0 / p) ** sigma))

        res = fourier_integral(env, rr, "cos", tail_bound=tail, rtol=rtol, atol=atol,
                               head_levels=_head_levels(rr))
        out[todo] = res.value / (math.pi * rr)
    if np.any(out < -_NEG_TOL):
        bad = r[out < -_NEG_TOL]
        raise QuadratureError(f"negative density for sigma={sigma} at rho={bad[:5].tolist()}",
                              estimate=out, diagnostics={"rho": bad.tolist()})
    out = np.maximum(out, 0.0)
    return float(out[0]) if scalar else out.reshape(rho_arr.shape)


def levy_tail_mass(sigma, a, *, sigma_range=SIGMA_RANGE, rtol=1e-13, atol=1e-16):
    """Two-sided tail mass P(|X| >= a) of the unit-scale stable law.

    Computed as (2/pi) int_0^inf (1 - exp(-(s/a)^sigma)) sin(s)/s ds with
    -expm1 for the small-argument regime, or by the integrated large-a
    series where it is accurate.
    """
    sigma = check_sigma(sigma, allow_gaussian=True, bounds=sigma_range)
    a_arr = np.asarray(a, dtype=float)
    scalar = a_arr.ndim == 0
    aa = np.atleast_1d(a_arr).astype(float).ravel()
    out = np.empty_like(aa)
    zero = aa <= 0
    out[zero] = 1.0
    inf = np.isinf(aa)
    out[inf] = 0.0
    todo = ~zero & ~inf
    if sigma < 2 and todo.any():
        idx = np.flatnonzero(todo)
        big = idx[aa[idx] > 5.0]
        if big.size:
            val, err = _large_rho_series(sigma, aa[big], integrate_terms=True)
            good = err <= 1e-14 * np.abs(val)
            out[big[good]] = val[good]
            todo[big[good]] = False
    if todo.any():
        def env(s, p):
            return -np.expm1(-((s / p) ** sigma)) / s

        res = fourier_integral(env, aa[todo], "sin", rtol=rtol, atol=atol,
                               head_levels=_head_levels(aa[todo]))
        out[todo] = 2.0 / math.pi * res.value
    out = np.clip(out, 0.0, 1.0)
    return float(out[0]) if scalar else out.reshape(a_arr.shape)


def levy_phi3_scaled(sigma, rho, *, sigma_range=SIGMA_RANGE, rtol=1e-12, atol=1e-16):
    """rho^3 Phi3(rho) for the three-dimensional radial stable density.

    Uses rho^3 Phi3 = (1/(2 pi^2)) int_0^inf s exp(-(s/rho)^sigma) sin s ds.
    """
    sigma = check_sigma(sigma, allow_gaussian=True, bounds=sigma_range)
    r_arr = np.asarray(rho, dtype=float)
    scalar = r_arr.ndim == 0
    r = np.atleast_1d(r_arr).astype(float).ravel()
    if np.any(r <= 0):
        raise DomainError("radius must be positive")

    def env(s, p):
        return s * np.exp(-((s / p) ** sigma))

    def tail(s0, p):
        pk = p * sigma ** (-1.0 / sigma)
        return np.where(s0 > pk, 2.0 * s0 * np.exp(-((s0 / p) ** sigma)), np.inf)

    res = fourier_integral(env, r, "sin", tail_bound=tail, rtol=rtol, atol=atol)
    out = res.value / (2 * math.pi ** 2)
    return float(out[0]) if scalar else out.reshape(r_arr.shape)


def levy_derivative(sigma, rho, *, sigma_range=SIGMA_RANGE, rtol=1e-12, atol=1e-16):
    """dv/drho of the unit-scale stable density.

    Integration by parts turns the derivative into a cosine integral with a
    bounded envelope:  v'(rho) = -(1/(pi rho^2)) int exp(-u)(1 - sigma u) cos s ds,
    u = (s/rho)^sigma.
    """
    sigma = check_sigma(sigma, allow_gaussian=True, bounds=sigma_range)
    r_arr = np.asarray(rho, dtype=float)
    scalar = r_arr.ndim == 0
    r = np.atleast_1d(r_arr).astype(float).ravel()
    if np.any(r <= 0):
        raise DomainError("radius must be positive")

    def env(s, p):
        u = (s / p) ** sigma
        return np.exp(-u) * (1.0 - sigma * u)

    def tail(s0, p):
        u = (s0 / p) ** sigma
        return np.where(u > 1.0 / sigma + 1.0, 2.0 * np.exp(-u) * (1.0 + sigma * u), np.inf)

    res = fourier_integral(env, r, "cos", tail_bound=tail, rtol=rtol, atol=atol)
    out = -res.value / (math.pi * r * r)
    return float(out[0]) if scalar else out.reshape(r_arr.shape)


def levy_profile(sigma: float, y: float = 1.0, *, sigma_range=SIGMA_RANGE) -> RadialProfile:
    """Profile of the Levy kernel L^sigma_y on R (n = 1)."""
    sigma = check_sigma(sigma, allow_gaussian=True, bounds=sigma_range)

    def func(rho):
        return levy_profile_1d(sigma, rho, sigma_range=sigma_range)

    def tail_mass(lam):
        return levy_tail_mass(sigma, lam, sigma_range=sigma_range)

    def tail_integral(r):
        return float(levy_tail_mass(sigma, r, sigma_range=sigma_range)) / 2.0

    base = RadialProfile(dim=1, func=func, decreasing=True, total_mass_hint=1.0,
                         label=f"levy(sigma={sigma:g})", sigma=sigma,
                         tail_mass_fn=tail_mass, tail_integral_fn=tail_integral,
                         meta={"family": "levy", "n": 1, "sigma": sigma, "y": 1.0})
    return mollify(base, y)


def gaussian_profile(n: int = 1, y: float = 1.0) -> RadialProfile:
    """Closed-form Gaussian exp(-rho^2/4)/(4 pi)^(n/2), the sigma = 2 endpoint."""
    c = (4 * math.pi) ** (-n / 2)

    def tail_mass(lam):
        lam = np.asarray(lam, dtype=float)
        return special.gammaincc(n / 2, lam * lam / 4)

    base = RadialProfile(dim=n, func=lambda rho: c * np.exp(-np.asarray(rho, float) ** 2 / 4),
                         decreasing=True, total_mass_hint=1.0, label=f"gaussian(n={n})",
                         sigma=2.0, tail_mass_fn=tail_mass,
                         tail_integral_fn=lambda r: float(tail_mass(r)) / sphere_area(n),
                         meta={"family": "gaussian", "n": n, "sigma": 2.0, "y": 1.0})
    return mollify(base, y)


# --------------------------------------------------------------------------
# Tail coefficients
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class TailCoefficient:
    sigma: float
    value: float
    probe_radius: float
    residual: float

    def to_json(self) -> str:
        return json.dumps({"sigma": self.sigma, "value": self.value,
                           "probe_radius": self.probe_radius, "residual": self.residual})


def default_probes(end: float = 1e3, count: int = 4, ratio: float = 2.0):
    return end * ratio ** -np.arange(count - 1, -1, -1, dtype=float)


def tail_coefficient(profile: RadialProfile, sigma: float, probe=None, *,
                     slope_tol: float = 0.1) -> TailCoefficient:
    """Estimate lim rho^(n+sigma) g(rho) along an increasing probe schedule.

    The last two probes are combined by Richardson extrapolation assuming an
    O(rho^-2) correction.  A sequence with a nonpositive value or a local
    log-log slope above ``slope_tol`` in magnitude is rejected with
    StabilityOrderError: the profile is not sigma-stable at this order.
    """
    sigma = float(sigma)
    if probe is None:
        probe = default_probes(1e3 * profile.scale)
    r = np.asarray(probe, dtype=float)
    if r.ndim != 1 or r.size < 2 or np.any(np.diff(r) <= 0) or r[0] <= 0:
        raise DomainError("probe schedule must be positive and strictly increasing with >= 2 radii")
    n = profile.dim
    f = r ** (n + sigma) * np.asarray(profile(r), dtype=float)
    if np.any(~np.isfinite(f)) or np.any(f <= 0):
        raise StabilityOrderError(f"not sigma-stable at this order (sigma={sigma}): nonpositive probe values")
    slopes = np.diff(np.log(f)) / np.diff(np.log(r))
    if abs(slopes[-1]) > slope_tol:
        raise StabilityOrderError(
            f"not sigma-stable at this order (sigma={sigma}): probe sequence has log-slope "
            f"{slopes[-1]:.3g} at radius {r[-1]:g}")
    q = (r[-1] / r[-2]) ** 2
    value = (q * f[-1] - f[-2]) / (q - 1)
    return TailCoefficient(sigma=sigma, value=float(value), probe_radius=float(r[-1]),
                           residual=float(abs(f[-1] - f[-2])))


def bg_coefficient(sigma: float) -> float:
    """sigma 2^(sigma-1) pi^(-3/2) sin(sigma pi/2) Gamma((1+sigma)/2) Gamma(sigma/2)."""
    sigma = check_sigma(sigma)
    return (sigma * 2.0 ** (sigma - 1) * math.pi ** -1.5 * math.sin(sigma * math.pi / 2)
            * special.gamma((1 + sigma) / 2) * special.gamma(sigma / 2))


# --------------------------------------------------------------------------
# Point kernels
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class EuclideanDomain:
    """R^n with Lebesgue measure; points are arrays with trailing axis n (bare scalars allowed for n=1)."""

    n: int = 1


@dataclass(frozen=True)
class PointKernel:
    """Symmetric Markov kernel K(x, z).

    On a Euclidean domain ``func`` receives broadcastable point arrays; on a
    finite space it receives integer index arrays.  ``profile`` is set for
    convolution kernels K(x, z) = g(|x - z|).
    """

    domain: object
    func: Callable
    markov_tol: float = 1e-6
    profile: RadialProfile | None = None
    label: str = ""

    def __call__(self, x, z):
        return self.func(x, z)

    @property
    def translation_invariant(self) -> bool:
        return self.profile is not None

    @property
    def is_finite(self) -> bool:
        return getattr(self.domain, "dist", None) is not None


def convolution_kernel(profile: RadialProfile, markov_tol: float = 1e-6) -> PointKernel:
    """K(x, z) = g(|x - z|) on R^n."""
    n = profile.dim

    def func(x, z):
        x = np.asarray(x, dtype=float)
        z = np.asarray(z, dtype=float)
        return profile(_radius(x - z, n) if n > 1 else np.abs(x - z))

    return PointKernel(domain=EuclideanDomain(n), func=func, markov_tol=markov_tol,
                       profile=profile, label=profile.label)


def matrix_kernel(space, matrix, label: str = "", markov_tol: float = 1e-6) -> PointKernel:
    """Kernel on a finite space given as a dense matrix of density values."""
    m = np.asarray(matrix, dtype=float)
    if m.shape != (len(space), len(space)):
        raise DomainError("kernel matrix shape does not match the space")

    def func(i, j):
        return m[np.asarray(i), np.asarray(j)]

    k = PointKernel(domain=space, func=func, markov_tol=markov_tol, label=label)
    object.__setattr__(k, "_matrix", m)
    return k


def kernel_matrix(K: PointKernel) -> np.ndarray:
    """Dense matrix of a kernel on a finite space."""
    m = getattr(K, "_matrix", None)
    if m is not None:
        return m
    n = len(K.domain)
    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    return np.asarray(K(i, j), dtype=float)
