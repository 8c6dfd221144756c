"""Tail masses, selection-function admissibility and explicit concentration bounds."""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from .errors import DomainError, SelectionError
from .kernels import PointKernel, kernel_matrix, sphere_area

log = logging.getLogger(__name__)


# --------------------------------------------------------------------------
# Selection functions
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SelectionFunction:
    """y -> Sigma(y) in (0, 2)."""

    func: Callable[[float], float]
    label: str = ""

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        s = np.asarray(self.func(y), dtype=float)
        if np.any(~(s > 0) | ~(s < 2)):
            bad = y[~((s > 0) & (s < 2))] if y.ndim else y
            raise SelectionError(f"selection {self.label!r} leaves (0, 2) at y={np.ravel(bad)[:3].tolist()}")
        return float(s) if s.ndim == 0 else s


def log_power_selection(alpha: float) -> SelectionFunction:
    """Sigma(y) = (log(1/y))^-alpha, defined for y < 1."""
    return SelectionFunction(lambda y: np.log(1.0 / np.asarray(y, float)) ** (-alpha),
                             label=f"log^-{alpha:g}(1/y)")


def power_selection(eps: float) -> SelectionFunction:
    """Sigma(y) = y^eps."""
    return SelectionFunction(lambda y: np.asarray(y, float) ** eps, label=f"y^{eps:g}")


def constant_selection(sigma: float) -> SelectionFunction:
    return SelectionFunction(lambda y: np.full(np.shape(y), float(sigma)) if np.ndim(y) else float(sigma),
                             label=f"const {sigma:g}")


@dataclass
class AdmissibilityDiagnostic:
    criterion: str
    admissible: bool
    y: list
    functional: list
    terminal: float
    decreasing_final_decade: bool
    threshold: float
    note: str = ""

    def to_dict(self):
        return asdict(self)


def _criterion_values(Sigma, criterion, y):
    s = Sigma(y)
    if criterion == "poisson":
        return np.exp(s * np.log(y))
    if criterion == "levy":
        return np.exp((s + 0.5) * np.log(y)) / s
    raise DomainError(f"unknown criterion {criterion!r}")


def selection_admissible(Sigma: SelectionFunction, criterion: str, y_grid: Sequence[float], *,
                         threshold: float = 0.1) -> AdmissibilityDiagnostic:
    """Trend verdict for the admissibility functional along a decreasing y grid.

    poisson: y^Sigma(y) (equivalently Sigma(y) log y -> -inf);
    levy: y^(Sigma(y) + 1/2) / Sigma(y).
    Admissible means the last value is below ``threshold`` and the functional
    strictly decreases (beyond rounding) at every grid step inside the final
    decade of y.
    """
    y = np.asarray(y_grid, dtype=float)
    if y.ndim != 1 or y.size < 2 or np.any(np.diff(y) >= 0) or np.any(y <= 0):
        raise DomainError("y_grid must be positive and strictly decreasing")
    vals = _criterion_values(Sigma, criterion, y)
    final = y <= y[-1] * 10.0
    idx = np.flatnonzero(final)
    if idx[0] > 0:
        idx = np.concatenate([[idx[0] - 1], idx])
    seg = vals[idx]
    decreasing = bool(np.all(seg[1:] < seg[:-1] * (1 - 1e-9)))
    terminal = float(vals[-1])
    ok = decreasing and terminal < threshold
    note = "trend verdict on the supplied grid only"
    return AdmissibilityDiagnostic(criterion=criterion, admissible=bool(ok), y=y.tolist(),
                                   functional=vals.tolist(), terminal=terminal,
                                   decreasing_final_decade=decreasing, threshold=threshold, note=note)


# --------------------------------------------------------------------------
# Tail mass
# --------------------------------------------------------------------------

def tail_mass(K: PointKernel, x, lam: float, *, tol: float = 1e-10) -> float:
    """Mass of K(x, .) on {z : d(x, z) >= lam}.

    Convolution kernels use their profile's tail function; finite spaces sum
    K(x, z) mu(z); other one-dimensional Euclidean kernels are integrated by
    adaptive quadrature on both half-lines.
    """
    lam = float(lam)
    if lam < 0:
        raise DomainError("lambda must be nonnegative")
    if K.is_finite:
        space = K.domain
        i = int(x)
        row = kernel_matrix(K)[i]
        sel = np.asarray(space.dist, dtype=float)[i] >= lam
        return float(np.clip((row[sel] * np.asarray(space.mass)[sel]).sum(), 0.0, None))
    if K.profile is not None:
        if lam == 0:
            return 1.0
        return float(np.clip(K.profile.tail_mass(lam), 0.0, 1.0))
    if K.domain.n != 1:
        raise DomainError("tail_mass for non-convolution kernels is implemented for n = 1 only")
    x = float(np.ravel(x)[0])
    f = lambda z: float(K(x, z))
    right, _ = integrate.quad(f, x + lam, math.inf, epsabs=0, epsrel=tol, limit=400)
    left, _ = integrate.quad(f, -math.inf, x - lam, epsabs=0, epsrel=tol, limit=400)
    return right + left


# --------------------------------------------------------------------------
# Explicit bounds
# --------------------------------------------------------------------------

def theorem21_tail_bound(n: int, lam: float, y: float, sigma_y: float) -> float:
    """2^((n+sigma)/2) (lam/y)^-sigma, dominating the Poisson tail beyond lam."""
    _check_bound_args(lam, y, sigma_y)
    return 2.0 ** ((n + sigma_y) / 2) * (lam / y) ** (-sigma_y)


def theorem23_tail_bound(lam: float, y: float, sigma_y: float) -> float:
    """(4 pi^2 / lam^2) sqrt(y) y^sigma / sigma for the Levy tail; lam > 1 is clamped to 1."""
    _check_bound_args(lam, y, sigma_y)
    if lam > 1:
        log.info("theorem23_tail_bound: lambda=%g clamped to 1", lam)
        lam = 1.0
    return 4 * math.pi ** 2 / lam ** 2 * math.sqrt(y) * y ** sigma_y / sigma_y


def theorem34_tail_bound(n: int, sigma: float, gamma: float, alpha: float, lam: float) -> float:
    """2 omega_n alpha / sigma + 2 omega_n alpha ((1+g)/(1-g))^n (1+g)^s / ((1+g)^s - (1-g)^s) lam^-s."""
    if not 0 < gamma < 1:
        raise DomainError("gamma must lie in (0, 1)")
    if not alpha > 0 or not lam > 0:
        raise DomainError("alpha and lambda must be positive")
    w = sphere_area(n)
    g1, g0 = 1 + gamma, 1 - gamma
    return (2 * w * alpha / sigma
            + 2 * w * alpha * (g1 / g0) ** n * g1 ** sigma / (g1 ** sigma - g0 ** sigma) * lam ** (-sigma))


def _check_bound_args(lam, y, s):
    if not lam > 0 or not y > 0:
        raise DomainError("lambda and y must be positive")
    if not 0 < s < 2:
        raise SelectionError(f"stability order {s} outside (0, 2)")


# --------------------------------------------------------------------------
# Curves
# --------------------------------------------------------------------------

@dataclass
class ConcentrationCurve:
    params: list
    tail: list
    lam: float
    x_probe: list
    meta: dict = field(default_factory=dict)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["param", "lambda", "max_tail_mass"])
            for p, t in zip(self.params, self.tail):
                w.writerow([repr(float(p)), repr(self.lam), repr(float(t))])

    def to_json(self) -> str:
        return json.dumps({"params": self.params, "tail": self.tail, "lambda": self.lam,
                           "x_probe": self.x_probe, "meta": self.meta})

    def strictly_decreasing(self) -> bool:
        t = np.asarray(self.tail)
        return bool(np.all(np.diff(t) < 0))

    def depth_below(self, eps: float):
        """First parameter at which the curve drops below eps, or None."""
        for p, t in zip(self.params, self.tail):
            if t < eps:
                return p
        return None


def concentration_curve(family: Callable[[float], PointKernel], lam: float, schedule: Sequence[float],
                        x_probe=None, *, translation_invariant: bool | None = None,
                        meta: dict | None = None) -> ConcentrationCurve:
    """Max over probe points of tail_mass(family(p), x, lam) for each schedule parameter.

    Convolution kernels need a single probe (translation invariance).
    """
    sched = np.asarray(schedule, dtype=float)
    if sched.ndim != 1 or np.any(np.diff(sched) >= 0):
        if not (sched.size > 1 and np.all(np.diff(sched) == 0)):
            raise DomainError("schedule must be strictly decreasing (or constant)")
    probes = [0.0] if x_probe is None else list(np.atleast_1d(x_probe))
    tails = []
    for p in sched:
        K = family(float(p))
        ti = K.translation_invariant if translation_invariant is None else translation_invariant
        pts = probes[:1] if ti else probes
        tails.append(max(tail_mass(K, x, lam) for x in pts))
    return ConcentrationCurve(params=sched.tolist(), tail=[float(t) for t in tails], lam=float(lam),
                              x_probe=[float(np.ravel(p)[0]) if np.ndim(p) else float(p) for p in probes],
                              meta=meta or {})
