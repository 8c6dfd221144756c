"""Semi-infinite Fourier-type integrals  int_0^inf env(s, p) trig(s) ds.

The integrals are evaluated in a variable where the oscillation has unit
frequency, so the half-period lobes are the same for every parameter value
and whole parameter arrays can be integrated in one vectorized sweep.

* head: [0, pi/2] for cosine, [0, pi] for sine, split into geometrically
  graded pieces toward 0 so that algebraic endpoint behaviour such as
  s**sigma is resolved;
* lobes: [a_k, a_k + pi] between consecutive zeros of the trig factor, each
  with 20-point Gauss-Legendre;
* the lobe partial sums are accelerated by Wynn's epsilon algorithm, and
  two successive estimates must agree before a row is accepted.  When the
  caller supplies a bound on the remaining tail, rows whose tail is
  negligible are accepted from the plain partial sum.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import QuadratureError

_X20, _W20 = np.polynomial.legendre.leggauss(20)
_X40, _W40 = np.polynomial.legendre.leggauss(40)


def wynn_epsilon(partial_sums, *, return_error=False):
    """Row-wise Wynn epsilon extrapolation.

    ``partial_sums`` has shape (rows, m).  Each even column of the epsilon
    table yields a candidate (its last entry); the candidate whose distance
    to the previous even column is smallest is returned, and that distance
    serves as the error estimate.  The raw last partial sum competes with
    the distance between the last two partial sums.
    """
    s = np.asarray(partial_sums, dtype=float)
    if s.ndim == 1:
        out = wynn_epsilon(s[None, :], return_error=return_error)
        return (out[0][0], out[1][0]) if return_error else out[0]
    prev = np.zeros_like(s)
    cur = s.copy()
    best = s[:, -1].copy()
    best_err = np.abs(s[:, -1] - s[:, -2]) if s.shape[1] > 1 else np.full(len(s), np.inf)
    last_even = s[:, -1].copy()
    col = 0
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        while cur.shape[1] > 1:
            diff = cur[:, 1:] - cur[:, :-1]
            nxt = prev[:, 1:cur.shape[1]] + 1.0 / diff
            prev, cur = cur, nxt
            col += 1
            if col % 2 == 0:
                cand = cur[:, -1]
                err = np.abs(cand - last_even)
                take = np.isfinite(cand) & np.isfinite(err) & (err < best_err)
                best = np.where(take, cand, best)
                best_err = np.where(take, err, best_err)
                last_even = np.where(np.isfinite(cand), cand, last_even)
    return (best, best_err) if return_error else best


def _head_nodes(b: float, levels: int):
    hi = b * 2.0 ** -np.arange(levels)
    lo = hi / 2
    half = (hi - lo) / 2
    s = (lo + half)[:, None] + half[:, None] * _X20[None, :]
    w = half[:, None] * _W20[None, :]
    return s.ravel(), w.ravel()


@dataclass(frozen=True)
class OscResult:
    value: np.ndarray
    error: np.ndarray
    lobes: np.ndarray


def fourier_integral(
    env: Callable[[np.ndarray, np.ndarray], np.ndarray],
    params,
    kind: str = "cos",
    *,
    tail_bound: Callable[[float, np.ndarray], np.ndarray] | None = None,
    rtol: float = 1e-13,
    atol: float = 1e-16,
    batch: int = 48,
    window: int = 40,
    max_lobes: int = 40000,
    head_levels: int = 64,
) -> OscResult:
    """Evaluate int_0^inf env(s, p) * trig(s) ds for every p in ``params``.

    ``env(s, p)`` must broadcast: it is called with ``s`` of shape (..., m)
    and ``p`` shaped (rows, 1) or (rows, 1, 1).  ``tail_bound(s0, p)``, if
    given, bounds |int_{s0}^inf env trig ds| per row.
    """
    if kind not in ("cos", "sin"):
        raise ValueError("kind must be 'cos' or 'sin'")
    trig = np.cos if kind == "cos" else np.sin
    p = np.atleast_1d(np.asarray(params, dtype=float))
    b = np.pi / 2 if kind == "cos" else np.pi

    hs, hw = _head_nodes(b, head_levels)
    head = (env(hs[None, :], p[:, None]) * (trig(hs) * hw)[None, :]).sum(axis=1)

    value = np.full(p.size, np.nan)
    error = np.full(p.size, np.nan)
    lobes = np.zeros(p.size, dtype=int)
    active = np.arange(p.size)
    sums = head[:, None]
    k0 = 0
    lobe_err = np.zeros(p.size)
    half = np.pi / 2
    while active.size:
        if k0 >= max_lobes:
            raise QuadratureError(
                f"lobe series did not converge within {max_lobes} lobes",
                estimate=wynn_epsilon(sums[:, -window:]),
                error=np.abs(sums[:, -1] - sums[:, -2]),
                diagnostics={"params": p[active].tolist(), "last_partial_sums": sums[:, -4:].tolist()},
            )
        k = np.arange(k0, k0 + batch)
        mid = b + k * np.pi + half
        s20 = mid[:, None] + half * _X20[None, :]
        pa = p[active][:, None, None]
        l20 = (env(s20[None], pa) * (trig(s20) * _W20 * half)[None]).sum(axis=2)
        if k0 == 0:
            # first batch doubles as a resolution check on the lobe rule
            s40 = mid[:, None] + half * _X40[None, :]
            l40 = (env(s40[None], pa) * (trig(s40) * _W40 * half)[None]).sum(axis=2)
            lobe_err[active] = np.abs(l40 - l20).sum(axis=1)
            l20 = l40
        sums = np.concatenate([sums, sums[:, -1:] + np.cumsum(l20, axis=1)], axis=1)
        k0 += batch
        lobes[active] = k0

        est, table_err = wynn_epsilon(sums[:, -window:], return_error=True)
        est_prev = wynn_epsilon(sums[:, -window - 2:-2])
        acc_err = np.maximum(np.abs(est - est_prev), table_err)
        ok = acc_err <= atol + rtol * np.abs(est)
        res = est
        if tail_bound is not None:
            rest = np.asarray(tail_bound(b + k0 * np.pi, p[active]), dtype=float)
            direct = rest <= atol
            res = np.where(direct, sums[:, -1], est)
            acc_err = np.where(direct, rest, acc_err)
            ok = ok | direct
        done = np.flatnonzero(ok)
        value[active[done]] = res[done]
        error[active[done]] = acc_err[done] + lobe_err[active[done]]
        keep = ~ok
        active = active[keep]
        sums = sums[keep]
    return OscResult(value=value, error=error, lobes=lobes)
