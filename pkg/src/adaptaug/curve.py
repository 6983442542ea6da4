"""Monotone piecewise-cubic Hermite interpolation (PCHIP) with inversion
and the bracket-based uncertainty estimate used by the adaptive solver.

Slopes follow the Fritsch-Carlson scheme: weighted harmonic means at
interior knots (zero at local extrema) and clamped one-sided estimates at
the endpoints, which preserves monotonicity of monotone knot data.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np


class CurveError(ValueError):
    """Bad knot data or an out-of-range query."""


@dataclass(frozen=True)
class Knot:
    x: float
    y: float


@dataclass(frozen=True, eq=False)
class CurveEstimate:
    """Immutable fitted curve: knot arrays plus per-knot slopes."""

    xs: np.ndarray
    ys: np.ndarray
    slopes: np.ndarray

    @property
    def knots(self) -> list:
        return [Knot(float(x), float(y)) for x, y in zip(self.xs, self.ys)]

    @property
    def x_span(self) -> tuple:
        return float(self.xs[0]), float(self.xs[-1])

    @property
    def y_span(self) -> tuple:
        return float(self.ys[0]), float(self.ys[-1])


def _as_xy(knots) -> tuple:
    pts = [(float(k.x), float(k.y)) if isinstance(k, Knot) else (float(k[0]), float(k[1])) for k in knots]
    xs = np.array([p[0] for p in pts])
    ys = np.array([p[1] for p in pts])
    return xs, ys


def pchip_fit(knots) -> CurveEstimate:
    """Fit a monotonicity-preserving cubic Hermite interpolant.

    Accepts Knot instances or (x, y) pairs; x values must be strictly
    increasing and everything finite.
    """
    xs, ys = _as_xy(knots)
    if xs.size < 2:
        raise CurveError("need at least 2 knots")
    if not (np.isfinite(xs).all() and np.isfinite(ys).all()):
        raise CurveError("knots must be finite")
    if np.any(np.diff(xs) <= 0):
        order = np.argsort(xs, kind="stable")
        xs, ys = xs[order], ys[order]
        if np.any(np.diff(xs) <= 0):
            raise CurveError("knot x values must be strictly increasing (duplicate x)")
    return CurveEstimate(xs, ys, _fritsch_carlson_slopes(xs, ys))


def _fritsch_carlson_slopes(xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    h = np.diff(xs)
    delta = np.diff(ys) / h
    n = xs.size
    m = np.zeros(n)
    if n == 2:
        m[:] = delta[0]
        return m

    # interior: weighted harmonic mean of neighbouring secants, zero where
    # the secants change sign or either is zero
    w1 = 2.0 * h[1:] + h[:-1]
    w2 = h[1:] + 2.0 * h[:-1]
    d0, d1 = delta[:-1], delta[1:]
    same_sign = (np.sign(d0) * np.sign(d1)) > 0
    # subnormal secants can overflow the reciprocal sum; the harmonic mean
    # correctly collapses to 0 there
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        harmonic = (w1 + w2) / (w1 / np.where(d0 != 0, d0, 1.0) + w2 / np.where(d1 != 0, d1, 1.0))
    m[1:-1] = np.where(same_sign, harmonic, 0.0)

    m[0] = _edge_slope(h[0], h[1], delta[0], delta[1])
    m[-1] = _edge_slope(h[-1], h[-2], delta[-1], delta[-2])
    return m


def _edge_slope(h0: float, h1: float, d0: float, d1: float) -> float:
    # one-sided three-point estimate, clamped so the end segment stays monotone
    d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1)
    if np.sign(d) != np.sign(d0):
        return 0.0
    if np.sign(d0) != np.sign(d1) and abs(d) > 3.0 * abs(d0):
        return 3.0 * d0
    return float(d)


def pchip_eval(curve: CurveEstimate, x):
    """Evaluate the interpolant; extrapolation is an error."""
    xq = np.asarray(x, dtype=np.float64)
    scalar = xq.ndim == 0
    xq = np.atleast_1d(xq)
    lo, hi = curve.x_span
    if np.any(xq < lo) or np.any(xq > hi):
        raise CurveError(f"query outside knot span [{lo}, {hi}]")
    seg = np.clip(np.searchsorted(curve.xs, xq, side="right") - 1, 0, curve.xs.size - 2)
    h = curve.xs[seg + 1] - curve.xs[seg]
    t = (xq - curve.xs[seg]) / h
    t2, t3 = t * t, t * t * t
    h00 = 2.0 * t3 - 3.0 * t2 + 1.0
    h10 = t3 - 2.0 * t2 + t
    h01 = -2.0 * t3 + 3.0 * t2
    h11 = t3 - t2
    out = (
        h00 * curve.ys[seg]
        + h10 * h * curve.slopes[seg]
        + h01 * curve.ys[seg + 1]
        + h11 * h * curve.slopes[seg + 1]
    )
    return float(out[0]) if scalar else out


def invert(curve: CurveEstimate, y_target: float, tol: float = 1e-6) -> float:
    """Leftmost x with curve(x) = y_target, by bisection to bracket width tol.

    Requires non-decreasing knot data. A y_target exactly equal to a knot's
    y returns that knot's x (the leftmost one on flat runs).
    """
    if tol <= 0:
        raise CurveError("tol must be positive")
    ys = curve.ys
    if np.any(np.diff(ys) < 0):
        raise CurveError("cannot invert a non-monotone curve")
    y_target = float(y_target)
    if y_target < ys[0] or y_target > ys[-1]:
        raise CurveError(f"target {y_target} outside y range [{ys[0]}, {ys[-1]}]")

    # snap to a knot whose y matches up to float noise: keeps knot queries
    # exact and makes flat-run inversion return the leftmost knot
    exact = np.nonzero(np.abs(ys - y_target) <= 1e-9)[0]
    if exact.size:
        return float(curve.xs[exact[0]])

    j = int(np.searchsorted(ys, y_target, side="left"))
    lo, hi = float(curve.xs[j - 1]), float(curve.xs[j])
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if pchip_eval(curve, mid) >= y_target:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class Bracket:
    """Inverse-image uncertainty interval for one candidate level."""

    x_lower: float
    x_upper: float

    @property
    def half_width(self) -> float:
        return max(0.5 * (self.x_upper - self.x_lower), 0.0)


def bracket_uncertainty(points, candidate_x: float, y_target: float, tol: float = 1e-6) -> Bracket:
    """Bound the preimage of y_target given the evaluated knots.

    The knot y-values immediately left and right of candidate_x bound the
    true (monotone) curve there. Refitting with the candidate pinned to
    each bound and inverting at y_target gives the widest and narrowest
    consistent preimages; their half-distance is the uncertainty.
    """
    xs, ys = _as_xy(points)
    order = np.argsort(xs, kind="stable")
    xs, ys = xs[order], ys[order]
    candidate_x = float(candidate_x)
    if candidate_x <= xs[0] or candidate_x >= xs[-1] or np.any(xs == candidate_x):
        raise CurveError(f"candidate {candidate_x} must lie strictly between evaluated knots")

    left = int(np.searchsorted(xs, candidate_x, side="right")) - 1
    y_low, y_high = float(ys[left]), float(ys[left + 1])

    def refit_with(y_at_candidate: float) -> CurveEstimate:
        nx = np.insert(xs, left + 1, candidate_x)
        ny = np.insert(ys, left + 1, y_at_candidate)
        return pchip_fit(list(zip(nx, ny)))

    # pinning low pushes the crossing right; pinning high pulls it left
    x_upper = invert(refit_with(y_low), y_target, tol)
    x_lower = invert(refit_with(y_high), y_target, tol)
    return Bracket(x_lower=min(x_lower, x_upper), x_upper=max(x_lower, x_upper))


def curve_to_json(curve: CurveEstimate) -> str:
    """Canonical serialization: knots only; slopes are recomputed on load."""
    return json.dumps({"knots": [[float(x), float(y)] for x, y in zip(curve.xs, curve.ys)]})


def curve_from_json(text: str) -> CurveEstimate:
    try:
        payload = json.loads(text)
        knots = payload["knots"]
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise CurveError(f"malformed curve JSON: {exc}")
    return pchip_fit([(float(x), float(y)) for x, y in knots])
