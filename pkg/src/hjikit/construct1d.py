"""Constructive upgrade of a locally Lipschitz 1-D witness to a C1-away-from-zero one.

For a scalar input-affine system with stabilizing drift (g0 < 0 on x > 0), the
admissible slopes at x form the sublevel set of the quadratic

    Delta(p) = a p^2 + b p + c,   a = sum_i g_i(x)^2,  b = 4 gamma g0(x),  c = 4 gamma x^2,

and ``p in F(x) <=> Delta(p) <= 0``.  The selector takes the envelope-clamped
larger root, and W(x) = integral_0^x p(s) ds inherits the witness property with
W >= V.  The mirrored half-line uses the sign-flipped quadratic (see
``construct_w``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import cumulative_simpson

from .errors import HjikitError
from .storage import StorageCandidate, from_callables
from .systems import AffineSystem


class DriftSignError(HjikitError):
    """The drift does not have the required sign (g0(x) < 0 for x > 0, > 0 for x < 0)."""


class InfeasibleAtError(HjikitError):
    """Delta has no real root at x: no admissible slope exists, so no gain-gamma witness."""

    def __init__(self, x: float, disc: float):
        super().__init__(f"no admissible slope at x={x:g} (discriminant {disc:.3e} < 0)")
        self.x = x
        self.disc = disc


class WitnessHypothesisError(HjikitError):
    """The supplied V fails the witness check on the construction grid."""


_DISC_CLAMP = 1e-10
_H_FLOOR = 1e-9


@dataclass(frozen=True)
class QuadCoeffs:
    a: float
    b: float
    c: float

    @staticmethod
    def at(sys: AffineSystem, gamma: float, x: float) -> "QuadCoeffs":
        xv = np.array([x])
        fields = sys.input_fields(xv)
        a = float(np.sum(fields[:, 0] ** 2)) if sys.m else 0.0
        b = 4.0 * gamma * float(sys.drift(xv)[0])
        return QuadCoeffs(a, b, 4.0 * gamma * x * x)


def delta(q: QuadCoeffs, p: float) -> float:
    """The admissibility quadratic a p^2 + b p + c."""
    return q.a * p * p + q.b * p + q.c


@dataclass(frozen=True)
class Envelope:
    """A continuous positive slope bound h on the working half-line."""

    fn: Callable[[float], float]

    def __call__(self, x: float) -> float:
        v = float(self.fn(x))
        if v <= 0:
            raise ValueError(f"envelope must be positive, got h({x:g}) = {v:g}")
        return v


def as_envelope(h) -> Envelope:
    return h if isinstance(h, Envelope) else Envelope(h)


def f_membership(sys: AffineSystem, gamma: float, x: float, p: float,
                 mode: str = "quadratic", u_points: int = 1001,
                 slack: float = 1e-6) -> bool:
    """Whether slope p is admissible at x > 0.

    'quadratic' checks Delta(p) <= 0 exactly; 'direct' checks
    p*(g0 + sum u_i g_i) <= gamma|u|^2 - x^2 on a dense u grid (so it can accept
    marginal cases within the grid slack).  The two must agree away from the
    boundary Delta(p) = 0.
    """
    if x <= 0:
        raise ValueError("membership is defined for x > 0")
    if p < 0:
        raise ValueError("slopes are nonnegative on the positive half-line")
    q = QuadCoeffs.at(sys, gamma, x)
    if mode == "quadratic":
        return delta(q, p) <= 1e-12
    if mode != "direct":
        raise ValueError("mode must be 'direct' or 'quadratic'")
    xv = np.array([x])
    g0 = float(sys.drift(xv)[0])
    gvals = sys.input_fields(xv)[:, 0] if sys.m else np.zeros(0)
    half = float(2.0 * np.max(np.abs(p * gvals)) / (2 * gamma) + 1.0) if sys.m else 1.0
    axes = [np.linspace(-half, half, u_points)] * sys.m
    mesh = np.meshgrid(*axes, indexing="ij") if sys.m else []
    U = (np.stack([g.ravel() for g in mesh], axis=-1)
         if sys.m else np.zeros((1, 0)))
    lhs = p * (g0 + U @ gvals)
    rhs = gamma * np.sum(U * U, axis=1) - x * x
    return bool(np.max(lhs - rhs) <= slack)


def p_of_x(sys: AffineSystem, gamma: float, h, x: float,
           tol_disc: float = _DISC_CLAMP) -> float:
    """The slope selector: h(x) when a = 0, else min(h(x), larger root of Delta).

    Raises :class:`DriftSignError` if g0(x) >= 0 and :class:`InfeasibleAtError`
    if the discriminant is below -tol_disc (the quadratic has no real root, so
    the gain-gamma hypothesis fails at x).  Discriminants in [-tol_disc, 0) are
    clamped to zero to absorb the double-root case against rounding.
    """
    if x <= 0:
        raise ValueError("the selector is defined for x > 0")
    h = as_envelope(h)
    q = QuadCoeffs.at(sys, gamma, x)
    if q.b >= 0:
        raise DriftSignError(f"g0({x:g}) = {q.b / (4 * gamma):g} must be negative for x > 0")
    if q.a == 0.0:
        return h(x)
    disc = q.b * q.b - 4.0 * q.a * q.c
    if disc < -tol_disc:
        raise InfeasibleAtError(x, disc)
    root = (-q.b + math.sqrt(max(disc, 0.0))) / (2.0 * q.a)
    return min(h(x), root)


def h_from_v(V: StorageCandidate, grid: Sequence[float], window: Optional[float] = None,
             margin: float = 0.1, samples: int = 17) -> Envelope:
    """Envelope from windowed difference quotients of V.

    h(x) = 2 (1 + margin) * max adjacent difference quotient of V over
    [x - window, x + window], linearly interpolated between grid points and
    floored at a tiny positive constant so the envelope stays positive where V
    is locally constant.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2 or np.any(grid <= 0) or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be increasing positive abscissae")
    if window is None:
        window = 0.5 * float(np.min(np.diff(grid)))
    if window <= 0:
        raise ValueError("degenerate window")
    hv = np.empty(grid.size)
    for i, x in enumerate(grid):
        s = np.linspace(x - window, x + window, samples)
        vals = V.value_batch(s[:, None])
        quot = np.abs(np.diff(vals)) / np.diff(s)
        hv[i] = 2.0 * (1.0 + margin) * float(np.max(quot))
    hv = np.maximum(hv, _H_FLOOR)

    def fn(x: float) -> float:
        return float(np.interp(x, grid, hv))

    return Envelope(fn)


@dataclass(frozen=True, eq=False)
class ConstructedW:
    """The selector values and their cumulative quadrature on a mirrored grid.

    ``grid`` holds the positive abscissae; the negative half-line mirrors them.
    ``p_values``/``w_values`` belong to the positive side and
    ``q_values``/``w_neg_values`` to the mirrored one (W > 0 there as well).
    """

    grid: np.ndarray
    p_values: np.ndarray
    w_values: np.ndarray
    q_values: np.ndarray
    w_neg_values: np.ndarray
    gamma: float

    def w_at(self, x) -> np.ndarray:
        """W by interpolation (W(0) = 0, linear beyond the grid ends)."""
        x = np.asarray(x, dtype=float)
        xs = np.concatenate([[0.0], self.grid])
        wp = np.concatenate([[0.0], self.w_values])
        wn = np.concatenate([[0.0], self.w_neg_values])
        pos = np.interp(np.abs(x), xs, wp)
        neg = np.interp(np.abs(x), xs, wn)
        return np.where(x >= 0, pos, neg)

    def slope_at(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        pos = np.interp(np.abs(x), self.grid, self.p_values)
        neg = -np.interp(np.abs(x), self.grid, -self.q_values)
        return np.where(x >= 0, pos, neg)

    def to_storage(self) -> StorageCandidate:
        """The constructed function as a candidate with slope oracle = the selector.

        Exact at the construction abscissae; in between, value and slope are
        interpolated, so region checks should reuse this grid.
        """
        def value(X):
            X = np.asarray(X, dtype=float)
            return self.w_at(X[..., 0])

        def grad(x):
            return np.array([float(self.slope_at(float(np.atleast_1d(x)[0])))])

        return from_callables("constructed_w", value, gradient_fn=grad,
                              regularity="c1_away_from_origin", dim=1)


def construct_w(sys: AffineSystem, gamma: float, V: StorageCandidate,
                grid: Sequence[float], h=None, margin: float = 0.1,
                tol: float = 1e-9, check_hypothesis: bool = True) -> ConstructedW:
    """Run the construction on a positive grid (mirrored to the negative side).

    Preconditions checked: the witness hypothesis for (sys, V, gamma) on the
    grid, and the drift sign pattern.  The returned object satisfies the
    contracts  W >= V > 0 on the grid,  Delta(p(x)) <= tol, and the witness
    residual of W with slope oracle p is within tolerance at every grid point.
    """
    if sys.n != 1:
        raise ValueError("the construction applies to 1-D systems")
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 3 or np.any(grid <= 0) or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be increasing positive abscissae (>= 3 points)")

    if check_hypothesis:
        _check_witness_on_grid(sys, V, gamma, grid)

    env = as_envelope(h) if h is not None else h_from_v(V, grid, margin=margin)

    p_vals = np.array([p_of_x(sys, gamma, env, float(x)) for x in grid])
    q_vals = np.array([_q_of_x(sys, gamma, env, float(x)) for x in grid])

    w_vals = _cumulative_from_zero(grid, p_vals)
    w_neg = _cumulative_from_zero(grid, -q_vals)  # integral of q from 0 to -x, mirrored

    built = ConstructedW(grid, p_vals, w_vals, q_vals, w_neg, gamma)

    # contract: admissibility of the selector everywhere on the grid
    for x, p in zip(grid, p_vals):
        q = QuadCoeffs.at(sys, gamma, float(x))
        if delta(q, float(p)) > tol:
            raise HjikitError(f"selector violates Delta(p) <= 0 at x={x:g}")
    for x, qv in zip(-grid, q_vals):
        qq = _mirror_coeffs(sys, gamma, float(x))
        if delta(qq, float(-qv)) > tol:
            raise HjikitError(f"selector violates the mirrored quadratic at x={x:g}")
    return built


def _q_of_x(sys: AffineSystem, gamma: float, env: Envelope, x_pos: float) -> float:
    """Selector on the negative half-line, evaluated at -x_pos (x_pos > 0).

    For x < 0 one seeks q <= 0 with q*(g0 + sum u_i g_i) <= gamma|u|^2 - x^2;
    in |q| this is the same quadratic with b' = -4 gamma g0(x) (g0 > 0 there).
    """
    x = -x_pos
    xv = np.array([x])
    g0 = float(sys.drift(xv)[0])
    if g0 <= 0:
        raise DriftSignError(f"g0({x:g}) = {g0:g} must be positive for x < 0")
    fields = sys.input_fields(xv)
    a = float(np.sum(fields[:, 0] ** 2)) if sys.m else 0.0
    b = -4.0 * gamma * g0
    c = 4.0 * gamma * x * x
    hval = env(x_pos)  # envelope sampled by magnitude; h is even in the built flows
    if a == 0.0:
        return -hval
    disc = b * b - 4.0 * a * c
    if disc < -_DISC_CLAMP:
        raise InfeasibleAtError(x, disc)
    root = (-b + math.sqrt(max(disc, 0.0))) / (2.0 * a)
    return -min(hval, root)


def _mirror_coeffs(sys: AffineSystem, gamma: float, x: float) -> QuadCoeffs:
    xv = np.array([x])
    fields = sys.input_fields(xv)
    a = float(np.sum(fields[:, 0] ** 2)) if sys.m else 0.0
    b = -4.0 * gamma * float(sys.drift(xv)[0])
    return QuadCoeffs(a, b, 4.0 * gamma * x * x)


def _cumulative_from_zero(grid: np.ndarray, vals: np.ndarray) -> np.ndarray:
    """Cumulative integral of vals over the grid, plus the head piece on [0, grid[0]].

    Composite Simpson over the grid; the head uses a trapezoid against the
    linear extrapolation of the first two selector values clamped at 0.
    """
    p0 = vals[0] - (vals[1] - vals[0]) / (grid[1] - grid[0]) * grid[0]
    p0 = max(0.0, min(float(p0), float(vals[0])))
    head = 0.5 * grid[0] * (p0 + vals[0])
    inner = cumulative_simpson(vals, x=grid, initial=0.0)
    return head + inner


def _check_witness_on_grid(sys: AffineSystem, V: StorageCandidate, gamma: float,
                           grid: np.ndarray):
    pts = np.concatenate([-grid[::-1], grid])
    for x in pts:
        S = V.subdiff(np.array([x]))
        for zeta in S.finite_vertices():
            q = QuadCoeffs.at(sys, gamma, float(x))
            # 1-D residual: Delta(zeta)/(4 gamma) with the sign-appropriate quadratic
            qq = q if x > 0 else _flip(q)
            if _residual_1d(sys, gamma, float(x), float(zeta[0])) > 1e-9:
                raise WitnessHypothesisError(
                    f"V={V.name!r} fails the gain-{gamma:g} witness check at x={x:g}")


def _flip(q: QuadCoeffs) -> QuadCoeffs:
    return QuadCoeffs(q.a, -q.b, q.c)


def _residual_1d(sys: AffineSystem, gamma: float, x: float, zeta: float) -> float:
    xv = np.array([x])
    g0 = float(sys.drift(xv)[0])
    quad = float(np.sum((zeta * sys.input_fields(xv)[:, 0]) ** 2)) if sys.m else 0.0
    return zeta * g0 + quad / (4.0 * gamma) + x * x
