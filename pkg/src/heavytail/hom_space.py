"""Finite spaces of homogeneous type: geometry constants, the measure quasi-metric, annulus classes,
maximal domination and concentration checks."""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .concentration import ConcentrationCurve
from .errors import DomainError, PreconditionError
from .harnack import AnnulusSpec, HarnackCertificate, certify_annulus_harnack
from .kernels import PointKernel, kernel_matrix, matrix_kernel, poisson_normalizer

SAFETY = 1.1


# --------------------------------------------------------------------------
# Spaces
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class FiniteHomSpace:
    """Finite metric measure space; ``mass`` holds atom weights (cell masses for sampled continua).

    ``flags`` carries caller intent: ``non_atomic`` (weights stand for cells),
    ``unbounded`` (the sample represents an unbounded space) and
    ``normalized`` (dist is the measure quasi-metric).
    """

    points: np.ndarray
    dist: np.ndarray
    mass: np.ndarray
    cell_volume: float | None = None
    flags: dict = field(default_factory=dict)
    label: str = ""

    def __post_init__(self):
        D = np.asarray(self.dist, dtype=float)
        m = np.asarray(self.mass, dtype=float)
        if D.ndim != 2 or D.shape[0] != D.shape[1] or D.shape[0] != m.size:
            raise DomainError("dist must be square and match the number of weights")
        if not np.all(np.isfinite(D)) or np.any(D < 0):
            raise DomainError("distances must be finite and nonnegative")
        if not np.allclose(D, D.T, rtol=1e-12, atol=0):
            raise DomainError("dist must be symmetric")
        off = ~np.eye(len(D), dtype=bool)
        if np.any(np.diag(D) != 0) or np.any(D[off] <= 0):
            raise DomainError("dist must vanish exactly on the diagonal")
        if np.any(~(m > 0)):
            raise DomainError("masses must be positive")
        object.__setattr__(self, "dist", D)
        object.__setattr__(self, "mass", m)
        object.__setattr__(self, "points", np.asarray(self.points))

    def __len__(self):
        return len(self.mass)

    @property
    def total_mass(self) -> float:
        return float(self.mass.sum())

    def ball_mass(self, x: int, r: float, *, closed: bool = False) -> float:
        row = self.dist[x]
        sel = row <= r if closed else row < r
        return float(self.mass[sel].sum())

    def with_dist(self, dist, **flags) -> "FiniteHomSpace":
        return replace(self, dist=np.asarray(dist, dtype=float), flags={**self.flags, **flags})


def _euclid(points):
    p = np.asarray(points, dtype=float)
    if p.ndim == 1:
        return np.abs(p[:, None] - p[None, :])
    return np.linalg.norm(p[:, None, :] - p[None, :, :], axis=-1)


def from_points(points, weights, *, cell_volume=None, label="", **flags) -> FiniteHomSpace:
    """Euclidean-distance space on the given coordinates."""
    pts = np.asarray(points, dtype=float)
    return FiniteHomSpace(pts, _euclid(pts), np.asarray(weights, dtype=float), cell_volume,
                          dict(flags), label)


def interval_grid(a: float, b: float, h: float, **flags) -> FiniteHomSpace:
    """Cell midpoints of [a, b] with spacing h and Lebesgue cell masses."""
    n = int(round((b - a) / h))
    pts = a + h * (np.arange(n) + 0.5)
    flags = {"non_atomic": True, "unbounded": True, **flags}
    return from_points(pts, np.full(n, h), cell_volume=h, label=f"grid[{a:g},{b:g}]", **flags)


def _sqrt_inv_cells(x, h):
    lo = np.maximum(x - h / 2, 0.0)
    return 2.0 * (np.sqrt(x + h / 2) - np.sqrt(lo))


def sqrt_weighted_halfline(length: float, h: float, **flags) -> FiniteHomSpace:
    """[0, length] with measure x^(-1/2) dx; cell masses are exact, 2(sqrt b - sqrt a)."""
    n = int(round(length / h))
    pts = h * (np.arange(n) + 0.5)
    flags = {"non_atomic": True, "unbounded": True, **flags}
    return from_points(pts, _sqrt_inv_cells(pts, h), cell_volume=h,
                       label=f"halfline x^-1/2 [0,{length:g}]", **flags)


def gapped_union(k_max: int, h: float, **flags) -> FiniteHomSpace:
    """Union of (2k - 1/2, 2k + 1/2) for |k| <= k_max, sampled at cell midpoints."""
    m = int(round(1.0 / h))
    base = -0.5 + h * (np.arange(m) + 0.5)
    pts = np.concatenate([2 * k + base for k in range(-k_max, k_max + 1)])
    flags = {"non_atomic": True, "unbounded": True, **flags}
    return from_points(pts, np.full(pts.size, h), cell_volume=h, label=f"gapped union k<={k_max}", **flags)


def dyadic_union(n_max: int, h: float, **flags) -> FiniteHomSpace:
    """Union of [2^n - 1, 2^n + 1] for 0 <= n <= n_max, sampled on a common cell grid."""
    top = 2.0 ** n_max + 1
    pts = h * (np.arange(int(round(top / h))) + 0.5)
    keep = np.zeros(pts.size, dtype=bool)
    for n in range(n_max + 1):
        c = 2.0 ** n
        keep |= (pts >= c - 1) & (pts <= c + 1)
    pts = pts[keep]
    flags = {"non_atomic": True, "unbounded": True, **flags}
    return from_points(pts, np.full(pts.size, h), cell_volume=h, label=f"dyadic union n<={n_max}", **flags)


def snowflake(space: FiniteHomSpace, power: float) -> FiniteHomSpace:
    """Same points and masses with distance d^power."""
    if not 0 < power <= 1:
        raise DomainError("snowflake power must lie in (0, 1]")
    return replace(space, dist=space.dist ** power, label=f"{space.label} ^{power:g}")


def load_space(spec) -> FiniteHomSpace:
    """Build a space from a JSON file path or an already parsed dict.

    Keys: points, dist ("euclidean" or "matrix" with a "matrix" entry),
    weights ("uniform", "sqrt_inv" or a list), optional cell_volume and flags.
    """
    if not isinstance(spec, dict):
        with open(spec) as fh:
            spec = json.load(fh)
    pts = np.asarray(spec["points"], dtype=float)
    n = len(pts)
    h = spec.get("cell_volume")
    kind = spec.get("dist", "euclidean")
    if kind == "euclidean":
        D = _euclid(pts)
    elif kind == "matrix":
        D = np.asarray(spec["matrix"], dtype=float)
    else:
        raise DomainError(f"unknown dist kind {kind!r}")
    w = spec.get("weights", "uniform")
    if isinstance(w, str):
        if w == "uniform":
            mass = np.full(n, h if h else 1.0)
        elif w == "sqrt_inv":
            if not h or pts.ndim != 1:
                raise DomainError("sqrt_inv weights need one-dimensional points and cell_volume")
            mass = _sqrt_inv_cells(pts, h)
        else:
            raise DomainError(f"unknown weights {w!r}")
    else:
        mass = np.asarray(w, dtype=float)
    return FiniteHomSpace(pts, D, mass, h, dict(spec.get("flags", {})), spec.get("label", ""))


# --------------------------------------------------------------------------
# Geometry constants
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class GeometryConstants:
    tau: float
    A: float

    def __post_init__(self):
        if not (self.tau >= 1 and self.A >= 1):
            raise DomainError("geometric constants must be >= 1")

    def inflated(self, factor: float = SAFETY) -> "GeometryConstants":
        return GeometryConstants(self.tau * factor, self.A * factor)


@dataclass(frozen=True)
class NormalConstants:
    tau_tilde: float
    c1: float
    c2: float


def _blocks(n, workers):
    size = max(1, math.ceil(n / max(1, workers)))
    return [range(i, min(i + size, n)) for i in range(0, n, size)]


def _map_blocks(fn, n, workers):
    blocks = _blocks(n, workers)
    if workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(fn, blocks))
    return [fn(b) for b in blocks]


def triangle_constant(space: FiniteHomSpace, *, workers: int = 1) -> float:
    """Max over distinct triples of d(x, z) / (d(x, y) + d(y, z)), reported unfloored."""
    N = len(space)
    if N < 3:
        raise DomainError("triangle_constant needs at least 3 points")
    D = space.dist
    off = ~np.eye(N, dtype=bool)

    def run(block):
        best = 0.0
        for y in block:
            denom = D[:, y][:, None] + D[y][None, :]
            mask = off.copy()
            mask[y, :] = False
            mask[:, y] = False
            if mask.any():
                best = max(best, float((D[mask] / denom[mask]).max()))
        return best

    return max(_map_blocks(run, N, workers))


def doubling_probes(space: FiniteHomSpace, *, count: int = 12, r_min: float | None = None,
                    r_max: float | None = None, centers=None):
    """(x, r) probes on a geometric radius schedule.

    r_min defaults to 8 times the smallest spacing (below that the open balls
    are dominated by lattice effects); r_max to a quarter of the diameter.
    """
    D = space.dist
    pos = D[D > 0]
    lo = 8 * pos.min() if r_min is None else r_min
    hi = D.max() / 4 if r_max is None else r_max
    radii = np.geomspace(lo, hi, count) if hi > lo else np.array([lo])
    cs = np.arange(len(space)) if centers is None else np.asarray(centers, dtype=int)
    return [(int(c), float(r)) for c in cs for r in radii]


def doubling_constant(space: FiniteHomSpace, radius_schedule=None) -> float:
    """Max over probes of mu(B(x, 2r)) / mu(B(x, r)) with open balls."""
    probes = doubling_probes(space) if radius_schedule is None else radius_schedule
    best = 1.0
    for x, r in probes:
        small = space.ball_mass(x, r)
        if not small > 0:
            raise DomainError(f"empty ball at probe ({x}, {r})")
        best = max(best, space.ball_mass(x, 2 * r) / small)
    return float(best)


def geometry_constants(space: FiniteHomSpace, radius_schedule=None) -> GeometryConstants:
    """(max(1, triangle constant), doubling constant) as measured on the probes."""
    return GeometryConstants(max(1.0, triangle_constant(space)), doubling_constant(space, radius_schedule))


def normalize(space: FiniteHomSpace, *, workers: int = 1) -> FiniteHomSpace:
    """Replace d by delta(x, y) = min over centers c of the measure of the smallest ball around c holding x and y.

    For a fixed center the smallest such ball is the closed ball of radius
    max(d(c, x), d(c, y)), i.e. the limit of open balls with radius just above
    it, so its mass is read from the cumulative mass along the sorted row.
    """
    D = space.dist
    mu = space.mass
    N = len(space)

    def run(block):
        best = np.full((N, N), np.inf)
        for c in block:
            row = D[c]
            order = np.argsort(row, kind="stable")
            srt = row[order]
            cum = np.cumsum(mu[order])
            # closed-ball mass at each point's own distance, ties included
            pos = np.searchsorted(srt, row, side="right") - 1
            own = cum[pos]
            m = np.where(row[:, None] >= row[None, :], own[:, None], own[None, :])
            np.minimum(best, m, out=best)
        return best

    parts = _map_blocks(run, N, workers)
    delta = parts[0]
    for p in parts[1:]:
        np.minimum(delta, p, out=delta)
    np.fill_diagonal(delta, 0.0)
    delta = np.minimum(delta, delta.T)
    return replace(space, dist=delta, flags={**space.flags, "normalized": True},
                   label=f"normalized({space.label})")


def predicted_normal_constants(tau: float, A: float) -> NormalConstants:
    """tau~ = (6 tau^2)^log2 A, c1 = 1/A, c2 = (10 tau^2)^log2 A."""
    if not (tau >= 1 and A >= 1):
        raise DomainError("tau and A must be >= 1")
    p = math.log2(A)
    return NormalConstants(tau_tilde=(6 * tau ** 2) ** p, c1=1.0 / A, c2=(10 * tau ** 2) ** p)


# --------------------------------------------------------------------------
# Normality
# --------------------------------------------------------------------------

def normality_probes(space: FiniteHomSpace, *, count: int = 12, r_min: float | None = None, reach: float = 2.0):
    """Geometric (x, r) probes on which the ball of radius reach*r is far from exhausting the space.

    On a finite sample of an unbounded space large balls saturate at the
    total mass; probes with mu(B(x, reach r)) > total/2 are dropped.  The
    default floor is twice the larger of the smallest distance and the
    heaviest atom: a ball lighter than one atom cannot resolve linear growth.
    """
    D = space.dist
    pos = D[D > 0]
    lo = 2 * max(pos.min(), space.mass.max()) if r_min is None else r_min
    radii = np.geomspace(lo, D.max(), count)
    half = space.total_mass / 2
    out = []
    for x in range(len(space)):
        for r in radii:
            if space.ball_mass(x, reach * r) <= half:
                out.append((x, float(r)))
    return out


@dataclass
class NormalityReport:
    passed: bool
    c1: float
    c2: float
    measured_c1: float
    measured_c2: float
    lower_slack: float
    upper_slack: float
    lemma_passed: bool
    lemma_worst: float
    lemma_checked: int
    probes: int
    witness: dict

    def to_dict(self):
        return asdict(self)


def normality_check(space: FiniteHomSpace, c1: float, c2: float, probes=None, *,
                    eps: float = 0.5) -> NormalityReport:
    """Check c1 r <= mu(B(x, r)) <= c2 r on probes, plus the annulus lemma.

    lower_slack = min mu/(c1 r) and upper_slack = max mu/(c2 r); the bound
    holds when lower_slack >= 1 >= upper_slack.  The annulus lemma
    mu(B(x, (1+eps) c2 r / c1) minus B(x, r)) >= eps c2 r is checked on the
    probes whose outer radius is itself a probe-admissible radius (outer ball
    at most half the total mass).
    """
    if not (c1 > 0 and c2 >= c1):
        raise DomainError("need 0 < c1 <= c2")
    probes = normality_probes(space) if probes is None else probes
    if not probes:
        raise DomainError("no normality probes")
    q = np.array([space.ball_mass(x, r) / r for x, r in probes])
    lo_s, hi_s = float(q.min() / c1), float(q.max() / c2)
    k = int(np.argmin(q)) if lo_s < 1 else int(np.argmax(q))
    grow = (1 + eps) * c2 / c1
    half = space.total_mass / 2
    lemma_worst, checked = math.inf, 0
    for x, r in probes:
        outer = space.ball_mass(x, grow * r)
        if outer > half:
            continue
        checked += 1
        lemma_worst = min(lemma_worst, (outer - space.ball_mass(x, r)) / (eps * c2 * r))
    lemma_ok = bool(checked == 0 or lemma_worst >= 1)
    return NormalityReport(
        passed=bool(lo_s >= 1 and hi_s <= 1), c1=float(c1), c2=float(c2),
        measured_c1=float(q.min()), measured_c2=float(q.max()), lower_slack=lo_s, upper_slack=hi_s,
        lemma_passed=lemma_ok, lemma_worst=float(lemma_worst if checked else math.nan),
        lemma_checked=checked, probes=len(probes),
        witness={"x": int(probes[k][0]), "r": float(probes[k][1]), "ratio": float(q[k])})


# --------------------------------------------------------------------------
# Annulus classes
# --------------------------------------------------------------------------

def annulus_is_empty(space: FiniteHomSpace, x: int, r: float, R: float) -> bool:
    """True when A(x, r, R) = {r <= d(x, z) < R} holds no point."""
    row = space.dist[x]
    return not bool(np.any((row >= r) & (row < R)))


def critical_ratios(space: FiniteHomSpace, *, r_min: float, centers=None):
    """Largest consecutive-distance ratio d_{k+1}/d_k per center, over d_k >= r_min.

    A(x, r, nu r) is empty for some r just above d_k exactly when
    nu < d_{k+1}/d_k, so the supremum of these ratios is the discrete annulus
    index.  Distances past the last realized one are ignored: a finite sample
    of an unbounded space has no points there by construction.
    """
    cs = range(len(space)) if centers is None else centers
    out = {}
    for x in cs:
        d = np.unique(space.dist[x])
        d = d[d >= r_min]
        if d.size < 2:
            continue
        rat = d[1:] / d[:-1]
        k = int(np.argmax(rat))
        out[int(x)] = (float(rat[k]), float(d[k]))
    return out


@dataclass
class AnnulusReport:
    nu: list
    empty_counts: list
    index: float | None
    critical_ratio: float | None
    witnesses: list

    def to_dict(self):
        return asdict(self)


def annulus_index(space: FiniteHomSpace, nu_schedule: Sequence[float], probes=None, *,
                  r_min: float | None = None, centers=None) -> AnnulusReport:
    """Smallest schedule nu for which every probed annulus A(x, r, nu r) is nonempty.

    With explicit (x, r) probes each annulus is tested directly.  Without
    probes the scan uses the critical radii r -> d_k+ for every realized
    distance d_k >= r_min (default 2 spacings) whose annulus stays inside the
    realized distances from x.
    """
    nus = sorted(float(v) for v in nu_schedule)
    if any(v <= 1 for v in nus):
        raise DomainError("annulus ratios must exceed 1")
    counts, wits = [], []
    crit = None
    if probes is None:
        pos = space.dist[space.dist > 0]
        floor = 2 * pos.min() if r_min is None else r_min
        ratios = critical_ratios(space, r_min=floor, centers=centers)
        crit = max((v[0] for v in ratios.values()), default=None)
        for nu in nus:
            bad = [(x, d) for x, (rt, d) in ratios.items() if rt > nu]
            counts.append(len(bad))
            wits.append({"x": bad[0][0], "r": bad[0][1]} if bad else None)
    else:
        for nu in nus:
            bad = [(int(x), float(r)) for x, r in probes if annulus_is_empty(space, int(x), r, nu * r)]
            counts.append(len(bad))
            wits.append({"x": bad[0][0], "r": bad[0][1]} if bad else None)
    index = next((nu for nu, c in zip(nus, counts) if c == 0), None)
    return AnnulusReport(nu=nus, empty_counts=counts, index=index, critical_ratio=crit, witnesses=wits)


# --------------------------------------------------------------------------
# Maximal domination
# --------------------------------------------------------------------------

def general_maximal_constant(tau: float, A: float, gamma: float) -> float:
    """1 + (4 tau^3 (1 + gamma) / (gamma (1 - gamma tau)))^log2 A."""
    if not (tau >= 1 and A >= 1):
        raise DomainError("tau and A must be >= 1")
    if not 0 < gamma < 1.0 / tau:
        raise DomainError(f"gamma={gamma} must lie in (0, 1/tau) = (0, {1 / tau:g})")
    base = 4 * tau ** 3 * (1 + gamma) / (gamma * (1 - gamma * tau))
    return 1.0 + base ** math.log2(A)


def space_hl_maximal(space: FiniteHomSpace, f) -> np.ndarray:
    """Sup of mu-averages of |f| over all balls containing each point.

    Every ball is a closed ball B[c, d_k] around a sample point at a realized
    distance; it contains x exactly when d(c, x) <= d_k, so per center the
    answer is a suffix maximum of the running averages.
    """
    a = np.abs(np.asarray(f, dtype=float))
    D, mu = space.dist, space.mass
    N = len(space)
    out = np.zeros(N)
    for c in range(N):
        row = D[c]
        order = np.argsort(row, kind="stable")
        srt = row[order]
        avg = np.cumsum((a * mu)[order]) / np.cumsum(mu[order])
        last = np.searchsorted(srt, srt, side="right") - 1
        avg = avg[last]
        suffix = np.maximum.accumulate(avg[::-1])[::-1]
        pos = np.searchsorted(srt, row, side="left")
        np.maximum(out, suffix[pos], out=out)
    return out


@dataclass
class SpaceMaximalReport:
    passed: bool
    constant: float
    worst_ratio: float
    witness: int
    atom_max: float
    atom_passed: bool
    kernel_max: list
    hl_max: list
    geometry: dict

    def to_dict(self):
        return asdict(self)


def _require_certificates(certificates, gamma, H):
    if not certificates:
        raise PreconditionError("no Harnack certificate supplied; run certify_ball_harnack or "
                                "certify_annulus_harnack on every kernel first")
    for i, c in enumerate(certificates):
        if not isinstance(c, HarnackCertificate) or not c.passed:
            raise PreconditionError(f"Harnack certificate {i} did not pass; rerun certification")
        if not (c.gamma >= gamma - 1e-15 and c.H <= H + 1e-12):
            raise PreconditionError(f"certificate {i} has (gamma={c.gamma}, H={c.H}), "
                                    f"weaker than the declared ({gamma}, {H})")


def space_maximal_check(space: FiniteHomSpace, kernels: Sequence[PointKernel], f, *, gamma: float, H: float,
                        certificates: Sequence[HarnackCertificate], geometry: GeometryConstants | None = None,
                        safety: float = SAFETY) -> SpaceMaximalReport:
    """Nodewise sup_K (K|f|)(x) <= C H^2 Mf(x) with C from general_maximal_constant.

    Refuses without one passed certificate per kernel.  The geometric
    constants are measured (unless given) and inflated by ``safety``.  Also
    reports the atom bound max K(x, x) mu(x) <= 1.
    """
    if len(certificates) != len(kernels):
        raise PreconditionError("one Harnack certificate per kernel is required")
    _require_certificates(certificates, gamma, H)
    geom = geometry_constants(space) if geometry is None else geometry
    g = geom.inflated(safety)
    if not gamma < 1.0 / g.tau:
        raise PreconditionError(f"gamma={gamma} is not below 1/tau={1 / g.tau:g}")
    C = general_maximal_constant(g.tau, g.A, gamma) * H ** 2
    a = np.abs(np.asarray(f, dtype=float))
    mu = space.mass
    kstar = np.zeros(len(space))
    atom = 0.0
    for K in kernels:
        M = kernel_matrix(K)
        np.maximum(kstar, M @ (a * mu), out=kstar)
        atom = max(atom, float(np.max(np.diag(M) * mu)))
    hl = space_hl_maximal(space, a)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(hl > 0, kstar / hl, np.where(kstar > 0, np.inf, 0.0))
    k = int(np.argmax(ratio))
    tol = max(K.markov_tol for K in kernels)
    return SpaceMaximalReport(
        passed=bool(np.all(kstar <= C * hl * (1 + 1e-12))), constant=float(C), worst_ratio=float(ratio[k]),
        witness=k, atom_max=atom, atom_passed=bool(atom <= 1 + tol),
        kernel_max=kstar.tolist(), hl_max=hl.tolist(),
        geometry={"tau": geom.tau, "A": geom.A, "safety": safety})


# --------------------------------------------------------------------------
# Kernels on finite spaces
# --------------------------------------------------------------------------

def symmetric_markov(space: FiniteHomSpace, raw, *, tol: float = 1e-13, max_iter: int = 20000) -> np.ndarray:
    """Symmetric scaling d_i A_ij d_j with unit mu-mass in every row.

    Fixed point of d <- sqrt(d / (A (d mu))), which converges for positive
    symmetric A.
    """
    A = np.asarray(raw, dtype=float)
    if A.shape != (len(space), len(space)) or np.any(A < 0) or not np.allclose(A, A.T):
        raise DomainError("raw kernel must be a nonnegative symmetric matrix on the space")
    mu = space.mass
    d = 1.0 / np.sqrt(np.maximum(A @ mu, 1e-300))
    for _ in range(max_iter):
        s = A @ (d * mu)
        d_new = np.sqrt(d / s)
        if np.max(np.abs(d_new / d - 1)) < tol:
            d = d_new
            break
        d = d_new
    M = d[:, None] * A * d[None, :]
    return (M + M.T) / 2


def poisson_family_on(space: FiniteHomSpace, s: float, *, kappa: float = 4.0, metric: str = "dist"):
    """alpha -> Markov kernel built from the one-dimensional Poisson profile of order s in the space distance.

    The scale a is chosen so that a^s / I(1, s) = alpha / kappa, hence the raw
    profile is <= (alpha / kappa) t^-(1+s); kappa absorbs the symmetric Markov
    rescaling.  ``metric='euclid'`` uses |x - y| of the coordinates instead.
    """
    I = poisson_normalizer(1, s)
    D = _euclid(space.points) if metric == "euclid" else space.dist

    def family(alpha: float) -> PointKernel:
        a = (alpha * I / kappa) ** (1.0 / s)
        raw = a ** s / (I * (a * a + D * D) ** ((1 + s) / 2))
        return matrix_kernel(space, symmetric_markov(space, raw), label=f"poisson s={s:g} alpha={alpha:g}")

    return family


@dataclass
class StabilityReport:
    passed: bool
    worst_ratio: float
    witness: dict
    pairs: int

    def to_dict(self):
        return asdict(self)


def stability_check_general(K: PointKernel, s: float, alpha: float, R: float) -> StabilityReport:
    """K(x, y) <= alpha / delta(x, y)^(1+s) for every pair with delta > R; worst_ratio = max K delta^(1+s) / alpha."""
    if not (s > 0 and R > 0 and alpha > 0):
        raise DomainError("s, alpha and R must be positive")
    space = K.domain
    if not space.flags.get("normalized"):
        raise PreconditionError("stability_check_general expects a normalized space")
    D = space.dist
    M = kernel_matrix(K)
    sel = D > R
    if not sel.any():
        return StabilityReport(True, 0.0, {}, 0)
    r = np.where(sel, M * D ** (1 + s) / alpha, 0.0)
    i, j = np.unravel_index(int(np.argmax(r)), r.shape)
    worst = float(r[i, j])
    return StabilityReport(bool(worst <= 1.0), worst, {"x": int(i), "y": int(j), "delta": float(D[i, j])},
                           int(sel.sum()))


# --------------------------------------------------------------------------
# Concentration on normal spaces
# --------------------------------------------------------------------------

def chain_constant(H: float, nu: float, R: float, lam: float) -> tuple[float, int]:
    """C(R, lam) = sum_{j=-1}^{J} H^(j+1), J = ceil(log_nu(R / lam)); the rounding of J is a choice."""
    J = max(0, math.ceil(math.log(R / lam) / math.log(nu))) if R > lam else 0
    return float(sum(H ** (j + 1) for j in range(-1, J + 1))), J


def general_concentration_run(space: FiniteHomSpace, family: Callable[[float], PointKernel], gamma: float,
                              lam: float, alpha_schedule: Sequence[float], *, s: float, R: float, H: float,
                              c1: float, c2: float, radii=None, probes=None) -> ConcentrationCurve:
    """Tail masses sum_{delta(x,y) >= lam} K_alpha(x, y) mu(y), maxed over probes, along the schedule.

    Preconditions, each refused with PreconditionError: gamma <=
    (c1/(2 c2))^2, the stability bound with parameter alpha beyond R, and an
    annulus Harnack certificate (gamma, H) for every kernel.  The reported
    chain bound is (alpha/R^(1+s)) C(R, lam) mu(A(x, lam, R)) plus the far
    tail alpha sum_{delta >= R} mu / delta^(1+s), with nu = 2 c2 / c1.
    """
    if not space.flags.get("normalized"):
        raise PreconditionError("general_concentration_run expects a normalized space")
    limit = (c1 / (2 * c2)) ** 2
    if not gamma <= limit:
        raise PreconditionError(f"gamma={gamma} exceeds (c1/(2 c2))^2 = {limit:g}")
    sched = np.asarray(alpha_schedule, dtype=float)
    D, mu = space.dist, space.mass
    pts = np.arange(len(space)) if probes is None else np.asarray(probes, dtype=int)
    if radii is None:
        pos = D[D > 0]
        radii = np.geomspace(2 * pos.min(), D.max(), 24)
    spec = AnnulusSpec(gamma=gamma, radii=tuple(float(r) for r in radii))
    nu = 2 * c2 / c1
    C, J = chain_constant(H, nu, R, lam)
    tails, bounds, certs = [], [], []
    for alpha in sched:
        K = family(float(alpha))
        st = stability_check_general(K, s, float(alpha), R)
        if not st.passed:
            raise PreconditionError(f"stability bound fails at alpha={alpha:g}: worst ratio {st.worst_ratio:.4g} "
                                    f"at {st.witness}")
        cert = certify_annulus_harnack(K, spec, H)
        if not cert.passed:
            raise PreconditionError(f"annulus Harnack ({gamma}, {H}) fails at alpha={alpha:g}: "
                                    f"worst ratio {cert.worst_ratio:.4g}")
        M = kernel_matrix(K)
        far = D[pts] >= lam
        t = ((M[pts] * mu) * far).sum(axis=1)
        ann = ((D[pts] >= lam) & (D[pts] < R)) @ mu
        with np.errstate(divide="ignore"):
            beyond = np.where(D[pts] >= R, mu / np.where(D[pts] > 0, D[pts], np.inf) ** (1 + s), 0.0).sum(axis=1)
        b = alpha / R ** (1 + s) * C * ann + alpha * beyond
        tails.append(float(t.max()))
        bounds.append(float(b[int(np.argmax(t))]))
        certs.append(cert.worst_ratio)
    dominated = [bool(b >= t) for b, t in zip(bounds, tails)]
    meta = {"gamma": gamma, "gamma_limit": limit, "s": s, "R": R, "H": H, "nu": nu, "J": J,
            "chain_constant": C, "chain_bound": bounds, "bound_dominates": dominated,
            "harnack_worst": certs, "decreasing": bool(np.all(np.diff(tails) < 0)),
            "end_over_start": tails[-1] / tails[0] if tails and tails[0] > 0 else math.nan,
            "note": "J = ceil(log_nu(R/lambda)) is an implementation choice"}
    return ConcentrationCurve(params=sched.tolist(), tail=tails, lam=float(lam),
                              x_probe=[int(p) for p in pts[:16]], meta=meta)
