"""Approximate-identity runs, convolution helpers and the experiment orchestrator."""
from __future__ import annotations

import copy
import csv
import hashlib
import json
import logging
import math
import os
import time
from dataclasses import asdict, dataclass, field
from importlib import resources
from typing import Callable, Sequence

import jsonschema
import numpy as np
from scipy import special

from . import __version__
from .concentration import (SelectionFunction, concentration_curve, constant_selection, log_power_selection,
                            power_selection, selection_admissible, theorem21_tail_bound)
from .errors import DomainError, HeavytailError, PreconditionError, SelectionError
from .harnack import (certify_ball_harnack, poisson_harnack_ratio, radial_sampling, regularize,
                      sandwich_ratios)
from .kernels import (PointKernel, RadialProfile, convolution_kernel, gaussian_profile, levy_profile,
                      levy_profile_1d, mollify, normalizer_lower_bound, poisson_normalizer, poisson_profile,
                      sphere_area)
from .maximal import (GridFunction, ParamGrid, domination_constant, family_maximal, grid_convolve,
                      hl_maximal, phi3_bound_scan, poisson_family, weak_type_curve, zo_regularity_integral)
from . import hom_space as hs

log = logging.getLogger(__name__)

EXPERIMENTS = ("normalizers", "levy-accuracy", "harnack-sweep", "concentration", "maximal-domination",
               "zo-check", "homspace-suite", "approx-identity")

LEVY_SIGMA_RANGE = (1e-3, 1.99)


class ConfigError(HeavytailError):
    """Configuration is malformed or names an unknown experiment."""


# --------------------------------------------------------------------------
# Test functions
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class TestFunction:
    """Bounded test function on R.

    hat: 1 - |x - center|/width on its support; indicator: 1 on [a, b];
    gaussian_bump: exp(-(x - center)^2 / (2 width^2)), declared decay;
    step: piecewise-constant ``levels`` on equal pieces of [a, b];
    custom_csv: grid values read from ``path``.
    """

    __test__ = False

    kind: str
    a: float = -1.0
    b: float = 1.0
    levels: tuple = (1.0, 0.5)
    path: str | None = None

    def __post_init__(self):
        if self.kind not in ("hat", "indicator", "gaussian_bump", "step", "custom_csv"):
            raise DomainError(f"unknown test function kind {self.kind!r}")
        if self.kind == "custom_csv" and not self.path:
            raise DomainError("custom_csv needs a path")
        if self.kind != "custom_csv" and not self.b > self.a:
            raise DomainError("support must satisfy a < b")

    @property
    def continuous(self) -> bool:
        return self.kind in ("hat", "gaussian_bump")

    @property
    def center(self) -> float:
        return (self.a + self.b) / 2

    @property
    def width(self) -> float:
        return (self.b - self.a) / 2

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "hat":
            return np.maximum(0.0, 1.0 - np.abs(x - self.center) / self.width)
        if self.kind == "indicator":
            return ((x >= self.a) & (x <= self.b)).astype(float)
        if self.kind == "gaussian_bump":
            return np.exp(-((x - self.center) / self.width) ** 2 / 2)
        if self.kind == "step":
            k = len(self.levels)
            edges = np.linspace(self.a, self.b, k + 1)
            out = np.zeros_like(x)
            for i, v in enumerate(self.levels):
                hi = (x <= edges[i + 1]) if i == k - 1 else (x < edges[i + 1])
                out = np.where((x >= edges[i]) & hi, v, out)
            return out
        raise DomainError("custom_csv functions are realized from their file")

    def realize(self, lo: float | None = None, hi: float | None = None, h: float = 2e-3) -> GridFunction:
        if self.kind == "custom_csv":
            return GridFunction.from_csv(self.path)
        pad = 6 * self.width if self.kind == "gaussian_bump" else 2.0
        lo = self.a - pad if lo is None else lo
        hi = self.b + pad if hi is None else hi
        return GridFunction.on_interval(lo, hi, h, self)

    @classmethod
    def from_dict(cls, d: dict) -> "TestFunction":
        d = dict(d)
        if "levels" in d:
            d["levels"] = tuple(d["levels"])
        return cls(**d)


# --------------------------------------------------------------------------
# Convolution and approximate identity
# --------------------------------------------------------------------------

def convolve(K, f: GridFunction, *, tol: float = 1e-9) -> GridFunction:
    """K * f on the grid of f; K is a convolution PointKernel, a RadialProfile or a (profile, y) pair."""
    if isinstance(K, PointKernel):
        if K.profile is None:
            raise DomainError("convolve needs a convolution kernel (one with a radial profile)")
        profile = K.profile
    elif isinstance(K, RadialProfile):
        profile = K
    elif isinstance(K, tuple) and len(K) == 2:
        profile = mollify(K[0], K[1])
    else:
        raise DomainError("unsupported kernel specification")
    return grid_convolve(profile, f, tol=tol)


def family_factory(family, n: int = 1) -> Callable[[float, float], RadialProfile]:
    """(sigma, y) -> profile for the named family, or the callable itself."""
    if callable(family):
        return family
    if family == "poisson":
        return lambda s, y: poisson_profile(n, s, y)
    if family == "levy":
        if n != 1:
            raise DomainError("the Levy family is implemented for n = 1")
        return lambda s, y: levy_profile(s, y, sigma_range=LEVY_SIGMA_RANGE)
    raise DomainError(f"unknown family {family!r}")


@dataclass
class ErrorCurve:
    params: list
    sigma: list
    sup_error: list
    l1_error: list
    mode: str
    tol: float
    decreasing: bool
    passed: bool
    meta: dict = field(default_factory=dict)

    @property
    def errors(self) -> list:
        return self.sup_error if self.mode == "sup" else self.l1_error

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["param", "sigma", "sup_error", "l1_error"])
            for row in zip(self.params, self.sigma, self.sup_error, self.l1_error):
                w.writerow([repr(float(v)) for v in row])

    def to_json(self) -> str:
        return json.dumps(asdict(self))


def _final_decade_decreasing(params, errs):
    p = np.asarray(params, dtype=float)
    e = np.asarray(errs, dtype=float)
    idx = np.flatnonzero(p <= p[-1] * 10)
    if idx[0] > 0:
        idx = np.concatenate([[idx[0] - 1], idx])
    seg = e[idx]
    return bool(seg.size >= 2 and np.all(seg[1:] < seg[:-1]))


def _errors(profile, g: GridFunction):
    out = grid_convolve(profile, g)
    d = np.abs(out.values - g.values)
    return float(d.max()), float(d.sum() * g.cell_volume)


def approx_identity_run(family, Sigma: SelectionFunction, f: TestFunction, y_schedule: Sequence[float], *,
                        n: int = 1, criterion: str | None = None, tol: float = 1e-2, grid=None,
                        threshold: float = 0.1) -> ErrorCurve:
    """Errors of K^(Sigma(y))_y * f - f along a decreasing y schedule.

    Continuous f is judged by the sup over grid nodes, discontinuous f by the
    grid L1 error (pointwise a.e. convergence is not machine-checkable).  The
    verdict needs the chosen error to decrease strictly over the final
    decade of the schedule and to end below ``tol``.  Inadmissible
    selections are refused with PreconditionError.
    """
    if criterion is None:
        if not isinstance(family, str):
            raise DomainError("a criterion is required for custom families")
        criterion = family
    y = np.asarray(y_schedule, dtype=float)
    diag = selection_admissible(Sigma, criterion, y, threshold=threshold)
    if not diag.admissible:
        raise PreconditionError(f"selection {Sigma.label!r} is not admissible under the {criterion} criterion "
                                f"(terminal functional {diag.terminal:.4g}, decreasing={diag.decreasing_final_decade})")
    make = family_factory(family, n)
    g = f.realize(*(grid or ()))
    sig = [float(Sigma(v)) for v in y]
    sups, l1s = [], []
    for v, s in zip(y, sig):
        a, b = _errors(make(s, float(v)), g)
        sups.append(a)
        l1s.append(b)
    mode = "sup" if f.continuous else "l1"
    errs = sups if mode == "sup" else l1s
    dec = _final_decade_decreasing(y, errs)
    meta = {"family": family if isinstance(family, str) else "custom", "selection": Sigma.label,
            "test_function": f.kind, "criterion": criterion, "grid_h": g.h[0],
            "note": "sup-node error for continuous f, L1-grid error otherwise; thresholds are "
                    "implementation values"}
    return ErrorCurve(params=y.tolist(), sigma=sig, sup_error=sups, l1_error=l1s, mode=mode, tol=tol,
                      decreasing=dec, passed=bool(dec and errs[-1] < tol), meta=meta)


def dissipation_run(family, y: float, sigma_schedule: Sequence[float], f: TestFunction, *, n: int = 1,
                    grid=None) -> ErrorCurve:
    """Fixed scale y with the stability order sent toward 0; ``decreasing`` is expected to be False."""
    make = family_factory(family, n)
    g = f.realize(*(grid or ()))
    sig = [float(s) for s in sigma_schedule]
    sups, l1s = [], []
    for s in sig:
        a, b = _errors(make(s, float(y)), g)
        sups.append(a)
        l1s.append(b)
    mode = "sup" if f.continuous else "l1"
    errs = sups if mode == "sup" else l1s
    dec = bool(np.all(np.diff(errs) < 0))
    return ErrorCurve(params=sig, sigma=sig, sup_error=sups, l1_error=l1s, mode=mode, tol=math.nan,
                      decreasing=dec, passed=not dec,
                      meta={"y": y, "family": family if isinstance(family, str) else "custom",
                            "sup_f": float(np.abs(g.values).max())})


# --------------------------------------------------------------------------
# Configuration
# --------------------------------------------------------------------------

def load_schema() -> dict:
    with resources.files("heavytail").joinpath("data/config.schema.json").open() as fh:
        return json.load(fh)


DEFAULTS = {
    "normalizers": {"dims": [1, 2, 3], "sigmas": [round(0.1 + 0.2 * k, 10) for k in range(10)]},
    "levy-accuracy": {"rho_max": 50.0, "points": 200, "mass_sigmas": [0.3, 0.7, 1.0, 1.5, 1.9],
                      "mass_scales": [1.0, 0.01]},
    "harnack-sweep": {"dims": [1, 2], "sigmas": [0.5, 1.0, 1.5], "gammas": [1 / 3], "t_max": 1e3,
                      "radii": 80, "random_centers": 8, "gaussian_H": [1e2, 1e6], "gaussian_extent": 50.0},
    "concentration": {"family": "poisson", "n": 1, "selection": {"kind": "log_power", "alpha": 0.5},
                      "lam": 1.0, "y_schedule": {"start": 1e-1, "stop": 1e-12, "num": 12},
                      "threshold": 0.1, "target": 0.01},
    "maximal-domination": {"sigma_range": [0.1, 1.9], "y_range": [0.1, 10.0], "num": 16, "gamma": 1 / 3,
                           "grid": [-8.0, 8.0, 0.02], "refine_tol": 0.02,
                           "functions": [{"kind": "hat"}, {"kind": "indicator", "a": -0.5, "b": 0.5},
                                         {"kind": "step", "a": -1.0, "b": 2.0, "levels": [1.0, -0.5, 2.0]}]},
    "zo-check": {"sigma_range": [0.3, 1.9], "n_sigma": 12, "y_range": [1e-4, 1e6], "y_per_decade": 5,
                 "z": {"start": 1e-2, "stop": 1e2, "num": 9}, "extent_factor": 1e4, "band": 0.05,
                 "phi3_sigmas": [0.3, 0.7, 1.0, 1.5, 1.9], "phi3_rho": {"start": 1e-2, "stop": 1e3, "num": 51}},
    "homspace-suite": {"grid": [-10.0, 10.0, 0.05], "halfline": [100.0, 0.25], "gapped": [4, 0.01],
                       "dyadic": [8, 0.25], "nu_schedule": [2.5, 2.9, 3.0, 3.05, 3.1, 3.5],
                       "dyadic_nu": 1.5, "gamma_ball": 0.25, "H_ball": 10.0, "s": 1.0, "lam": 1.0, "R": 2.0,
                       "H_annulus": 1e5, "alpha_schedule": [1.0, 0.3, 0.1, 0.03, 0.01, 0.003],
                       "safety": 1.1, "decay": 0.01},
    "approx-identity": {"family": "poisson", "selection": {"kind": "log_power", "alpha": 0.5},
                        "function": {"kind": "hat"}, "y_schedule": {"start": 1e-1, "stop": 1e-12, "num": 12},
                        "grid": [-3.0, 3.0, 2e-3], "tol": 0.01,
                        "dissipation": {"y": 1.0, "sigmas": [1.0, 0.5, 0.2, 0.1, 0.05]}},
}


def _merge(base, over):
    out = copy.deepcopy(base)
    for k, v in (over or {}).items():
        out[k] = _merge(out[k], v) if isinstance(v, dict) and isinstance(out.get(k), dict) else v
    return out


def resolve_config(config: dict) -> dict:
    """Validate against the shipped schema and fill experiment defaults."""
    try:
        jsonschema.validate(config, load_schema())
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"invalid config: {exc.message} at {list(exc.absolute_path)}") from exc
    name = config["experiment"]
    out = dict(config)
    out["params"] = _merge(DEFAULTS[name], config.get("params", {}))
    out.setdefault("seed", 0)
    return out


def _schedule(spec):
    if isinstance(spec, dict):
        return np.geomspace(spec["start"], spec["stop"], spec["num"])
    return np.asarray(spec, dtype=float)


def make_selection(spec: dict) -> SelectionFunction:
    kind = spec["kind"]
    if kind == "log_power":
        return log_power_selection(spec["alpha"])
    if kind == "power":
        return power_selection(spec["eps"])
    if kind == "constant":
        return constant_selection(spec["sigma"])
    raise ConfigError(f"unknown selection kind {kind!r}")


# --------------------------------------------------------------------------
# Experiments
# --------------------------------------------------------------------------

class _Run:
    """Collects checks and artifacts for one experiment."""

    def __init__(self, name, out_dir, params, seed, tol, threads):
        self.name = name
        self.out = out_dir
        self.p = params
        self.seed = seed
        self.tol = tol
        self.threads = threads
        self.checks = []
        self.artifacts = []

    def check(self, label, passed, **detail):
        self.checks.append({"check": label, "passed": bool(passed), **_jsonable(detail)})

    def path(self, fname):
        p = os.path.join(self.out, fname)
        self.artifacts.append(p)
        return p

    def write_json(self, fname, obj):
        with open(self.path(fname), "w") as fh:
            json.dump(_jsonable(obj), fh, indent=2)

    def write_rows(self, fname, header, rows):
        with open(self.path(fname), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for r in rows:
                w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _exp_normalizers(r: _Run):
    rows = []
    tol = r.tol or 1e-9
    for n in r.p["dims"]:
        for s in r.p["sigmas"]:
            I = poisson_normalizer(n, s)
            lb = normalizer_lower_bound(n, s)
            beta = sphere_area(n) * special.beta(n / 2, s / 2) / 2
            rows.append((n, s, I, lb, beta, abs(I - beta) / beta))
    r.write_rows("normalizers.csv", ["n", "sigma", "I", "lower_bound", "beta_oracle", "rel_diff"], rows)
    r.check("lower bound respected", all(row[2] >= row[3] for row in rows))
    r.check("agrees with the beta-function oracle", max(row[5] for row in rows) <= tol,
            worst=max(row[5] for row in rows))
    r.check("I(1,1) = pi", abs(poisson_normalizer(1, 1) - math.pi) <= tol)
    r.check("I(3,1) = pi^2", abs(poisson_normalizer(3, 1) - math.pi ** 2) <= tol)


def _exp_levy_accuracy(r: _Run):
    tol = r.tol or 1e-8
    rho = np.concatenate([[0.0], np.geomspace(1e-3, r.p["rho_max"], r.p["points"] - 1)])
    cauchy = 1 / (math.pi * (1 + rho ** 2))
    gauss = np.exp(-rho ** 2 / 4) / (2 * math.sqrt(math.pi))
    t0 = time.perf_counter()
    v1 = levy_profile_1d(1.0, rho)
    v2 = levy_profile_1d(2.0, rho)
    elapsed = time.perf_counter() - t0
    log.info("levy closed-form sweep took %.2f s", elapsed)
    r.write_rows("levy_closed_forms.csv", ["rho", "levy_1", "cauchy", "levy_2", "gaussian"],
                 zip(rho, v1, cauchy, v2, gauss))
    e1, e2 = float(np.max(np.abs(v1 - cauchy))), float(np.max(np.abs(v2 - gauss)))
    r.check("sigma=1 matches Cauchy", e1 <= tol, max_abs_error=e1)
    r.check("sigma=2 matches Gaussian", e2 <= tol, max_abs_error=e2)
    r.check("closed-form sweep under 10 s", elapsed < 10)
    rows = []
    for s in r.p["mass_sigmas"]:
        for y in r.p["mass_scales"]:
            rows.append((s, y, levy_profile(s, y, sigma_range=LEVY_SIGMA_RANGE).mass()))
    r.write_rows("levy_masses.csv", ["sigma", "y", "mass"], rows)
    worst = max(abs(m - 1) for _, _, m in rows)
    r.check("unit mass", worst <= 1e-6, worst=worst)


def _exp_harnack(r: _Run):
    rng = np.random.default_rng(r.seed)
    certs = []
    for n in r.p["dims"]:
        for s in r.p["sigmas"]:
            for g in r.p["gammas"]:
                K = convolution_kernel(poisson_profile(n, s, 1.0))
                radii = np.geomspace(1e-2, r.p["t_max"], r.p["radii"])
                extra = rng.uniform(0, r.p["t_max"], r.p["random_centers"])
                samp = radial_sampling(n, np.concatenate([radii, extra]), directions=2 if n > 1 else 1)
                limit = poisson_harnack_ratio(n, s, g, math.inf)
                cert = certify_ball_harnack(K, g, limit * (1 + 1e-9), samp, workers=r.threads)
                reach = cert.worst_ratio / limit
                certs.append({"family": "poisson", "n": n, "sigma": s, **cert.to_dict(), "limit": limit,
                              "reach": reach})
                r.check(f"poisson n={n} sigma={s} gamma={g:.4g} certified", cert.passed, worst=cert.worst_ratio)
                r.check(f"poisson n={n} sigma={s} gamma={g:.4g} reaches the limit", reach >= 0.99, reach=reach)
    for n in r.p["dims"]:
        K = convolution_kernel(gaussian_profile(n))
        ext = r.p["gaussian_extent"]
        samp = radial_sampling(n, np.linspace(ext / 50, ext, 50), directions=2 if n > 1 else 1)
        for H in r.p["gaussian_H"]:
            cert = certify_ball_harnack(K, r.p["gammas"][0], H, samp, workers=r.threads)
            certs.append({"family": "gaussian", "n": n, **cert.to_dict()})
            r.check(f"gaussian n={n} refuted at H={H:g}", not cert.passed, worst=cert.worst_ratio)
    r.write_json("certificates.json", certs)


def _exp_concentration(r: _Run):
    p = r.p
    Sigma = make_selection(p["selection"])
    y = _schedule(p["y_schedule"])
    crit = p.get("criterion", p["family"])
    diag = selection_admissible(Sigma, crit, y, threshold=p["threshold"])
    r.write_json("admissibility.json", diag.to_dict())
    if not diag.admissible:
        raise PreconditionError(f"selection {Sigma.label} is not admissible under the {crit} criterion "
                                f"(terminal {diag.terminal:.4g})")
    make = family_factory(p["family"], p["n"])
    curve = concentration_curve(lambda v: convolution_kernel(make(Sigma(v), v)), p["lam"], y,
                                meta={"family": p["family"], "selection": Sigma.label})
    curve.to_csv(r.path("concentration.csv"))
    if p["family"] == "poisson":
        bounds = [theorem21_tail_bound(p["n"], p["lam"], v, Sigma(v)) for v in y]
        viol = [float(v) for v, t, b in zip(y, curve.tail, bounds) if t > b]
        r.check("tail bound dominates", not viol, violations=viol)
    r.check("curve decreasing", curve.strictly_decreasing())
    r.check("below target at schedule end", curve.tail[-1] < p["target"], end=curve.tail[-1])


def _exp_maximal(r: _Run):
    p = r.p
    params = ParamGrid.log_spaced(p["sigma_range"], p["y_range"], p["num"])
    fine = params.refined()
    C = domination_constant(1, p["gamma"], 2.0)
    lo, hi, h = p["grid"]
    rows = []
    for i, spec in enumerate(p["functions"]):
        tf = TestFunction.from_dict(spec)
        f = tf.realize(lo, hi, h)
        Kf = family_maximal(params, f, poisson_family(1))
        Kf2 = family_maximal(fine, f, poisson_family(1))
        Mf = hl_maximal(f)
        ratio = float(np.max(Kf.values / np.where(Mf.values > 0, Mf.values, np.inf)))
        change = float(np.max(np.abs(Kf2.values - Kf.values)) / np.max(np.abs(Kf.values)))
        wt = weak_type_curve(Kf, f)
        rows.append((tf.kind, ratio, C, change, wt.constant))
        r.check(f"{tf.kind}[{i}] dominated", bool(np.all(Kf.values <= C * Mf.values + 1e-12)), worst_ratio=ratio)
        r.check(f"{tf.kind}[{i}] stable under grid doubling", change <= p["refine_tol"], change=change)
    r.write_rows("maximal_domination.csv", ["function", "max_K_over_M", "constant", "refine_change",
                                            "weak_type_constant"], rows)


def _exp_zo(r: _Run):
    p = r.p
    ndec = math.log10(p["y_range"][1] / p["y_range"][0])
    ys = np.geomspace(*p["y_range"], int(round(ndec * p["y_per_decade"])) + 1)
    params = ParamGrid.product(np.linspace(*p["sigma_range"], p["n_sigma"]), ys)
    tables = {}
    res = [zo_regularity_integral(params, z, p["extent_factor"] * z, tables=tables) for z in _schedule(p["z"])]
    vals = np.array([q.value for q in res])
    med = float(np.median(vals))
    spread = float(np.max(np.abs(vals / med - 1)))
    r.write_rows("zo_integral.csv", ["z", "value", "grid_part", "tail_part", "tail_constant"],
                 [(q.z, q.value, q.grid_part, q.tail_part, q.tail_constant) for q in res])
    r.check("uniform in z", spread <= p["band"], spread=spread, median=med)
    scan = phi3_bound_scan(p["phi3_sigmas"], _schedule(p["phi3_rho"]))
    r.write_json("phi3_scan.json", scan.to_dict())
    r.check("rho^3 Phi3 finite", math.isfinite(scan.max_scaled), max=scan.max_scaled)
    r.check("no growth on the final decade", scan.no_growth, slopes=scan.final_decade_slopes)


def homspace_suite(p: dict, threads: int = 1) -> tuple[list, dict]:
    """All homogeneous-space checks; returns (checks, report)."""
    checks, rep = [], {}

    def check(label, ok, **d):
        checks.append({"check": label, "passed": bool(ok), **_jsonable(d)})

    pc = hs.predicted_normal_constants(1, 2)
    check("predicted constants (1, 2)", (pc.tau_tilde, pc.c1, pc.c2) == (6.0, 0.5, 10.0), value=asdict(pc))
    safety = p["safety"]
    grid = hs.interval_grid(*p["grid"])
    half = hs.sqrt_weighted_halfline(*p["halfline"])
    for label, sp in (("grid", grid), ("halfline", half)):
        geo = hs.geometry_constants(sp).inflated(safety)
        nc = hs.predicted_normal_constants(geo.tau, geo.A)
        norm = hs.normalize(sp, workers=threads)
        nr = hs.normality_check(norm, nc.c1, nc.c2)
        rep[f"normality_{label}"] = nr.to_dict() | {"tau": geo.tau, "A": geo.A}
        check(f"normality {label}", nr.passed and nr.lemma_passed, measured=(nr.measured_c1, nr.measured_c2),
              predicted=(nc.c1, nc.c2))
    gap = hs.gapped_union(*p["gapped"])
    ar = hs.annulus_index(gap, p["nu_schedule"])
    rep["annulus_gapped"] = ar.to_dict()
    failing = [nu for nu, c in zip(ar.nu, ar.empty_counts) if c > 0]
    check("gapped union index brackets 3", ar.index is not None and ar.index > 3 and failing and max(failing) >= 3,
          index=ar.index, critical=ar.critical_ratio)
    dy = hs.dyadic_union(*p["dyadic"])
    nu = p["dyadic_nu"]
    empt = {}
    for n in range(1, p["dyadic"][0] + 1):
        xi = int(np.argmin(np.abs(dy.points - 2.0 ** n)))
        empt[n] = hs.annulus_is_empty(dy, xi, 2.0, 2.0 * nu)
    rep["annulus_dyadic"] = empt
    big = [empt[n] for n in empt if 2.0 ** (n - 1) - 1 > 2 * nu]
    check("dyadic union annuli empty for large n", bool(big) and all(big), empty=empt)
    # Poisson-derived Markov kernels on the R-grid
    fam = hs.poisson_family_on(grid, p["s"], metric="euclid")
    kernels = [fam(a) for a in (0.05, 0.2, 1.0)]
    gam, H = p["gamma_ball"], p["H_ball"]
    certs = [certify_ball_harnack(K, gam, H) for K in kernels]
    check("ball Harnack certified", all(c.passed for c in certs), worst=[c.worst_ratio for c in certs])
    ii, jj = np.meshgrid(np.arange(len(grid)), np.arange(len(grid)), indexing="ij")
    sw = [sandwich_ratios(K, regularize(K, gam), ii, jj) for K in kernels]
    check("sandwich K <= H K~ <= H^2 K", all(max(a, b) <= H for a, b in sw), ratios=sw)
    f = ((grid.points > -1) & (grid.points < 1)).astype(float)
    mr = hs.space_maximal_check(grid, kernels, f, gamma=gam, H=H, certificates=certs)
    rep["space_maximal"] = {k: v for k, v in mr.to_dict().items() if k not in ("kernel_max", "hl_max")}
    check("space maximal domination", mr.passed, worst_ratio=mr.worst_ratio, constant=mr.constant)
    check("atom bound", mr.atom_passed, atom_max=mr.atom_max)
    # concentration on normal spaces
    for label, sp in (("grid", grid), ("halfline", half)):
        norm = hs.normalize(sp, workers=threads)
        nr = hs.normality_check(norm, 1.0, 1.0)
        c1, c2 = nr.measured_c1 / safety, nr.measured_c2 * safety
        g = (c1 / (2 * c2)) ** 2
        metric = "euclid" if label == "grid" else "dist"
        famn = hs.poisson_family_on(norm, p["s"], metric=metric)
        curve = hs.general_concentration_run(norm, famn, g, p["lam"], p["alpha_schedule"], s=p["s"], R=p["R"],
                                             H=p["H_annulus"], c1=c1, c2=c2,
                                             radii=np.geomspace(2 * norm.dist[norm.dist > 0].min(),
                                                                norm.dist.max(), 16))
        rep[f"concentration_{label}"] = json.loads(curve.to_json())
        ok = curve.strictly_decreasing() and curve.tail[-1] < p["decay"] * curve.tail[0]
        check(f"concentration {label}", ok, tail=curve.tail)
        check(f"chain bound {label}", all(curve.meta["bound_dominates"]))
    return checks, rep


def _exp_homspace(r: _Run):
    checks, rep = homspace_suite(r.p, r.threads)
    r.checks.extend(checks)
    r.write_json("homspace.json", rep)


def _exp_approx(r: _Run):
    p = r.p
    Sigma = make_selection(p["selection"])
    tf = TestFunction.from_dict(p["function"])
    curve = approx_identity_run(p["family"], Sigma, tf, _schedule(p["y_schedule"]), tol=p["tol"],
                                grid=tuple(p["grid"]), criterion=p.get("criterion"))
    curve.to_csv(r.path("approx_identity.csv"))
    r.check("error decreases below tolerance", curve.passed, end=curve.errors[-1], decreasing=curve.decreasing)
    d = p.get("dissipation")
    if d:
        dc = dissipation_run(p["family"], d["y"], d["sigmas"], tf, grid=tuple(p["grid"]))
        dc.to_csv(r.path("dissipation.csv"))
        r.check("dissipation: error not decreasing as sigma -> 0", not dc.decreasing, errors=dc.errors)


_DISPATCH = {"normalizers": _exp_normalizers, "levy-accuracy": _exp_levy_accuracy, "harnack-sweep": _exp_harnack,
             "concentration": _exp_concentration, "maximal-domination": _exp_maximal, "zo-check": _exp_zo,
             "homspace-suite": _exp_homspace, "approx-identity": _exp_approx}


@dataclass
class ExperimentResult:
    experiment: str
    exit_code: int
    status: str
    checks: list
    artifacts: list
    message: str = ""

    def to_dict(self):
        return asdict(self)


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def run_experiment(config: dict, out_dir: str | None = None, *, seed: int | None = None,
                   tol: float | None = None, threads: int | None = None) -> ExperimentResult:
    """Validate, run, and write artifacts plus report.json and manifest.json to ``out_dir``.

    Exit codes: 0 every check passed, 1 a check failed, 2 configuration
    error, 3 precondition refusal.
    """
    try:
        cfg = resolve_config(config)
    except ConfigError as exc:
        return ExperimentResult(config.get("experiment", "?") if isinstance(config, dict) else "?", 2,
                                "config-error", [], [], str(exc))
    name = cfg["experiment"]
    out_dir = out_dir or cfg.get("out") or os.path.join("runs", name)
    os.makedirs(out_dir, exist_ok=True)
    seed = cfg["seed"] if seed is None else seed
    tol = cfg.get("tol") if tol is None else tol
    threads = cfg.get("threads", 1) if threads is None else threads
    run = _Run(name, out_dir, cfg["params"], seed, tol, max(1, int(threads)))
    t0 = time.perf_counter()
    code, status, msg = 0, "pass", ""
    try:
        _DISPATCH[name](run)
        if not all(c["passed"] for c in run.checks):
            code, status = 1, "fail"
    except (PreconditionError, SelectionError) as exc:
        code, status, msg = 3, "refused", str(exc)
    except (DomainError, KeyError, TypeError) as exc:
        code, status, msg = 2, "config-error", f"{type(exc).__name__}: {exc}"
    log.info("%s finished in %.2f s", name, time.perf_counter() - t0)
    report = {"experiment": name, "status": status, "exit_code": code, "message": msg, "checks": run.checks,
              "seed": seed, "tol": tol, "threads": run.threads, "version": __version__,
              "config": cfg}
    with open(os.path.join(out_dir, "report.json"), "w") as fh:
        json.dump(_jsonable(report), fh, indent=2)
    files = run.artifacts + [os.path.join(out_dir, "report.json")]
    manifest = {"experiment": name, "version": __version__,
                "artifacts": [{"path": os.path.relpath(f, out_dir), "sha256": _sha256(f)} for f in files]}
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2)
    return ExperimentResult(name, code, status, run.checks, files, msg)
