"""Numeric Gronwall and Bihari-LaSalle bounds.

For ``u' <= alpha beta g(u)`` with ``g`` positive and nondecreasing,
``u(t) <= Ginv(G(u0) + int alpha beta)`` where ``G(r) = int_0^r ds / g(s)``,
as long as the argument stays below ``G(inf)``.
"""
from __future__ import annotations

import dataclasses
import math
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, optimize

NONLINEARITIES: dict[str, Callable[[float], float]] = {
    "1": lambda s: 1.0,
    "1+u^2": lambda s: 1.0 + s * s,
    "1+u+u^2": lambda s: 1.0 + s + s * s,
    "1+u^2+u^4": lambda s: 1.0 + s * s + s**4,
}


def G_arctan(r):
    """Closed form of int_0^r ds / (1 + s + s^2)."""
    r = np.asarray(r, dtype=float)
    s3 = math.sqrt(3.0)
    return 2.0 / s3 * np.arctan((1.0 + 2.0 * r) / s3) - math.pi / (3.0 * s3)


def table_nonlinearity(s: Sequence[float], g: Sequence[float]) -> Callable[[float], float]:
    """Piecewise-linear g through tabulated points, extended linearly past the last one."""
    s = np.asarray(s, dtype=float)
    g = np.asarray(g, dtype=float)
    if s.size < 2 or np.any(np.diff(s) <= 0):
        raise ValueError("table abscissae must be increasing with at least two points")
    if np.any(g <= 0) or np.any(np.diff(g) < 0):
        raise ValueError("g must be positive and nondecreasing")
    slope = (g[-1] - g[-2]) / (s[-1] - s[-2])

    def func(x: float) -> float:
        if x <= s[-1]:
            return float(np.interp(x, s, g))
        return float(g[-1] + slope * (x - s[-1]))

    return func


@dataclasses.dataclass
class BihariLaSalle:
    g: Callable[[float], float]
    tol: float = 1e-13

    @classmethod
    def named(cls, name: str) -> "BihariLaSalle":
        if name not in NONLINEARITIES:
            raise ValueError(f"unknown nonlinearity {name!r}; choose from {sorted(NONLINEARITIES)}")
        return cls(NONLINEARITIES[name])

    def _inv_g(self, s: float) -> float:
        return 1.0 / self.g(s)

    def G(self, r: float) -> float:
        if r < 0:
            raise ValueError("G is defined for r >= 0")
        if r == 0:
            return 0.0
        val, _ = integrate.quad(self._inv_g, 0.0, r, epsabs=self.tol, epsrel=self.tol, limit=200)
        return float(val)

    @property
    def G_inf(self) -> float:
        """Range limit of G. Infinite when g grows at most linearly in the far tail."""
        if not hasattr(self, "_G_inf"):
            growth = math.log(self.g(1e8) / self.g(1e6)) / math.log(100.0)
            if growth <= 1.0 + 1e-3:
                self._G_inf = float("inf")
            else:
                # tail via s = 1/t keeps the integration range finite
                head, _ = integrate.quad(self._inv_g, 0.0, 1.0, epsabs=self.tol, epsrel=self.tol,
                                         limit=200)
                tail, _ = integrate.quad(lambda t: 1.0 / (t * t * self.g(1.0 / t)) if t > 0 else 0.0,
                                         0.0, 1.0, epsabs=self.tol, epsrel=self.tol, limit=200)
                self._G_inf = float(head + tail)
        return self._G_inf

    def G_inv(self, y: float) -> float:
        """Root of G(r) = y; inf when y reaches the range limit G(inf)."""
        if y < 0:
            raise ValueError("G_inv needs y >= 0")
        if y == 0:
            return 0.0
        if np.isfinite(self.G_inf) and y >= self.G_inf:
            return float("inf")
        hi = max(1.0, y)
        while self.G(hi) < y:
            hi *= 2.0
            if hi > 1e300:
                return float("inf")
        return float(optimize.brentq(lambda r: self.G(r) - y, 0.0, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps,
                                     maxiter=500))


@dataclasses.dataclass
class BoundResult:
    t: np.ndarray
    bound: np.ndarray  # nan once the bound has blown up
    blowup_time: float | None


def bihari_lasalle_bound(f0: float, integral, t: Sequence[float], g="1+u+u^2") -> BoundResult:
    """Evaluate the bound on the times ``t``.

    ``integral`` is either a callable ``t -> int_0^t alpha beta`` or its
    values at ``t``; it must be nondecreasing. ``g`` is a name from
    :data:`NONLINEARITIES`, a callable, or an ``(s, g)`` table.
    """
    if f0 < 0:
        raise ValueError("f0 must be >= 0")
    t = np.asarray(t, dtype=float)
    vals = np.array([integral(x) for x in t]) if callable(integral) else np.asarray(integral, dtype=float)
    if np.any(np.diff(vals) < -1e-14 * max(1.0, np.max(np.abs(vals)))):
        raise ValueError("integral must be nondecreasing")
    if isinstance(g, str):
        bl = BihariLaSalle.named(g)
    elif isinstance(g, tuple):
        bl = BihariLaSalle(table_nonlinearity(*g))
    else:
        bl = BihariLaSalle(g)
    G0 = bl.G(f0)
    bound = np.full(t.shape, np.nan)
    blowup = None
    for i, (ti, vi) in enumerate(zip(t, vals)):
        u = bl.G_inv(G0 + vi)
        if not np.isfinite(u):
            blowup = _blowup_time(t, vals, i, bl.G_inf - G0, integral)
            break
        bound[i] = u
    return BoundResult(t, bound, blowup)


def _blowup_time(t, vals, i, target, integral) -> float:
    """First time the integral reaches ``target`` (interpolated or root-found)."""
    if i == 0:
        return float(t[0])
    if callable(integral):
        return float(optimize.brentq(lambda x: integral(x) - target, t[i - 1], t[i]))
    frac = (target - vals[i - 1]) / (vals[i] - vals[i - 1])
    return float(t[i - 1] + frac * (t[i] - t[i - 1]))


def gronwall_bound(f0: float, t: Sequence[float], rate: Sequence[float]) -> np.ndarray:
    """``f0 * exp(int_0^t rate)`` with the cumulative trapezoid rule."""
    t = np.asarray(t, dtype=float)
    rate = np.asarray(rate, dtype=float)
    if not np.all(np.isfinite(rate)):
        raise ValueError("rate series must be finite")
    acc = np.concatenate([[0.0], integrate.cumulative_trapezoid(rate, t)])
    return f0 * np.exp(acc)
