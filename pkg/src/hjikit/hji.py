"""Pointwise and region-level verification of the gain-witness condition.

For input-affine systems the inner maximization over u has the exact closed form

    residual(x, zeta) = zeta.g0(x) + (1/(4 gamma)) sum_i (zeta.g_i(x))^2 + |x|^2,

and the witness condition at (x, zeta) is ``residual <= 0``.  For general (and
power-affine) systems the sup over u is lower-bounded by sampling a u-grid.
Box subdifferentials are handled by vertex enumeration (the residual is convex
in zeta); unbounded box coordinates are admissible only where their dynamic
coefficient vanishes identically in u.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import HjikitError
from .storage import MissingOracleError, StorageCandidate
from .systems import AffineSystem, PowerAffineSystem, System


class EmptyRegionError(HjikitError):
    pass


DEFAULT_TOL_EXACT = 1e-9    # exact-oracle affine checks
DEFAULT_TOL_SAMPLED = 1e-6  # sampled-sup general checks
_COEFF_ZERO_TOL = 1e-12     # "vanishes identically" threshold for unbounded axes


@dataclass(frozen=True)
class Region:
    """A sampling box; grid points with |x| below ``exclude_radius`` are omitted."""

    box: tuple                 # n pairs (lo, hi)
    points_per_dim: int = 41
    exclude_radius: float = 1e-9

    def __post_init__(self):
        if self.exclude_radius <= 0:
            raise ValueError("exclude_radius must be positive (the origin is never checked)")
        if self.points_per_dim < 2:
            raise ValueError("points_per_dim must be at least 2")

    @property
    def dim(self) -> int:
        return len(self.box)

    def grid(self) -> np.ndarray:
        axes = [np.linspace(lo, hi, self.points_per_dim) for lo, hi in self.box]
        mesh = np.meshgrid(*axes, indexing="ij")
        X = np.stack([m.ravel() for m in mesh], axis=-1)
        keep = np.linalg.norm(X, axis=1) >= self.exclude_radius
        return X[keep]


@dataclass
class WitnessReport:
    verdict: str                      # 'pass' | 'fail'
    max_residual: float
    worst_x: Optional[np.ndarray]
    worst_zeta: Optional[np.ndarray]
    worst_u: Optional[np.ndarray]
    points_checked: int
    gamma: float = 0.0
    tolerance: float = 0.0
    mode: str = "exact"               # 'exact' | 'sampled'

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def to_dict(self) -> dict:
        def arr(a):
            return None if a is None else [float(v) for v in np.atleast_1d(a)]
        return {
            "verdict": self.verdict,
            "max_residual": float(self.max_residual),
            "worst_x": arr(self.worst_x),
            "worst_zeta": arr(self.worst_zeta),
            "worst_u": arr(self.worst_u),
            "points_checked": self.points_checked,
            "gamma": float(self.gamma),
            "tolerance": float(self.tolerance),
            "mode": self.mode,
        }


def supply(x, u, gamma: float) -> float:
    """The supply rate gamma|u|^2 - |x|^2."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    return float(gamma * np.dot(u, u) - np.dot(x, x))


def affine_residual(sys: AffineSystem, x, zeta, gamma: float) -> float:
    """Exact value of sup_u [zeta.F(x,u) - supply(x,u,gamma)] for an affine system."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    zeta = np.atleast_1d(np.asarray(zeta, dtype=float))
    g0 = sys.drift(x)
    fields = sys.input_fields(x)
    quad = sum(float(np.dot(zeta, fields[i])) ** 2 for i in range(sys.m))
    return float(np.dot(zeta, g0)) + quad / (4.0 * gamma) + float(np.dot(x, x))


def affine_worst_u(sys: AffineSystem, x, zeta, gamma: float) -> np.ndarray:
    """The maximizing input of the affine sup: u_i = zeta.g_i(x) / (2 gamma)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    zeta = np.atleast_1d(np.asarray(zeta, dtype=float))
    fields = sys.input_fields(x)
    return np.array([float(np.dot(zeta, fields[i])) / (2.0 * gamma) for i in range(sys.m)])


def power_residual(sys: PowerAffineSystem, x, zeta, gamma: float) -> float:
    """Exact sup over u for a power-affine system with p <= 2.

    Channels separate:  sup_r c phi(r) - gamma r^2 has the closed form
    value((2-p)/p-weighted r*) for p < 2; for p = 2 it is 0 when the effective
    coefficient is at most gamma and +inf otherwise.
    """
    if sys.p > 2:
        raise ValueError("closed-form power residual requires p <= 2")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    zeta = np.atleast_1d(np.asarray(zeta, dtype=float))
    g0 = sys.drift(x)
    fields = sys.input_fields(x)
    total = float(np.dot(zeta, g0)) + float(np.dot(x, x))
    p = sys.p
    for i in range(sys.m):
        c = float(np.dot(zeta, fields[i]))
        ceff = abs(c) if sys.phi == "signed_pow" else max(c, 0.0)
        if ceff == 0.0:
            continue
        if p == 2:
            if ceff > gamma:
                return math.inf
            continue
        if p == 1:
            total += ceff * ceff / (4.0 * gamma)
            continue
        r = (p * ceff / (2.0 * gamma)) ** (1.0 / (2.0 - p))
        total += ceff * r ** p - gamma * r * r
    return total


def general_residual(sys: System, x, zeta, gamma: float,
                     u_box: Optional[Sequence] = None, u_points: int = 41,
                     warn_on_boundary: bool = True):
    """Sampled lower bound on sup_u [zeta.F(x,u) - supply]; also returns the argmax u."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    zeta = np.atleast_1d(np.asarray(zeta, dtype=float))
    if u_box is None:
        half = 4.0 * float(np.max(np.abs(x)))
        u_box = [(-half, half)] * sys.m
    U = _u_grid_from_box(u_box, u_points)
    F = sys.dynamics(np.broadcast_to(x, (U.shape[0], x.size)), U)
    vals = F @ zeta - gamma * np.sum(U * U, axis=1) + float(np.dot(x, x))
    k = int(np.argmax(vals))
    if warn_on_boundary and _on_boundary(U[k], U):
        warnings.warn(
            "sup over the u-grid attained on the box boundary; enlarge u_box",
            stacklevel=2)
    return float(vals[k]), U[k].copy()


def _u_grid_from_box(u_box, u_points: int) -> np.ndarray:
    axes = [np.linspace(lo, hi, u_points) for lo, hi in u_box]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in mesh], axis=-1)


def _on_boundary(u: np.ndarray, U: np.ndarray) -> bool:
    lo = U.min(axis=0)
    hi = U.max(axis=0)
    span = hi - lo
    return bool(np.any(((u <= lo) | (u >= hi)) & (span > 0)))


# ---------------------------------------------------------------------------
# Region sweep
# ---------------------------------------------------------------------------

def check_witness(sys: System, V: StorageCandidate, gamma: float, region: Region,
                  tol: Optional[float] = None,
                  u_box: Optional[Sequence] = None, u_points: int = 41,
                  jobs: int = 1) -> WitnessReport:
    """Sweep the region grid and verify the witness condition at every point.

    At each grid point the candidate's subdifferential is maximized over: a box
    maximum is attained at a vertex (the residual is convex in zeta).  An
    unbounded box coordinate k is admissible only if the coefficient that
    multiplies zeta_k vanishes identically in u (for affine-structured systems:
    the k-th component of g0 and of every g_i is zero at x); otherwise the
    point is recorded with +inf residual.

    Grid points are independent; ``jobs > 1`` splits the sweep into that many
    contiguous chunks evaluated on a thread pool, with order-stable aggregation
    so reports stay byte-identical.
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    exact = isinstance(sys, AffineSystem)
    if tol is None:
        tol = DEFAULT_TOL_EXACT if exact else DEFAULT_TOL_SAMPLED
    X = region.grid()
    if X.shape[0] == 0:
        raise EmptyRegionError("region grid is empty")
    if X.shape[1] != sys.n:
        raise ValueError(f"region dimension {X.shape[1]} does not match system n={sys.n}")
    if not V.has_oracle:
        raise MissingOracleError(
            f"candidate {V.name!r} has no exact subdifferential or gradient oracle")

    structured = isinstance(sys, (AffineSystem, PowerAffineSystem))
    G0 = sys.drift(X) if structured else None
    GI = sys.input_fields(X) if structured else None
    if not exact:
        if u_box is None:
            half = 4.0 * float(np.max(np.abs(X)))
            u_box = [(-half, half)] * sys.m
        U_common = _u_grid_from_box(u_box, u_points)
    else:
        U_common = None

    if jobs <= 1 or X.shape[0] < 2 * jobs:
        blocks = [_sweep_block(sys, V, gamma, X, range(X.shape[0]),
                               exact, structured, G0, GI, U_common)]
    else:
        from concurrent.futures import ThreadPoolExecutor
        chunks = np.array_split(np.arange(X.shape[0]), jobs)
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            blocks = list(pool.map(
                lambda ids: _sweep_block(sys, V, gamma, X, ids, exact,
                                         structured, G0, GI, U_common), chunks))

    best = -math.inf
    worst_x = worst_zeta = worst_u = None
    boundary_hit = False
    for blk in blocks:
        if blk[0] > best:
            best, worst_x, worst_zeta, worst_u, boundary_hit = blk

    verdict = "pass" if best <= tol else "fail"
    if boundary_hit and verdict == "pass":
        # a fail is conclusive even if truncated; a pass with the max on the
        # u-box boundary may be hiding a larger sup outside the box
        warnings.warn("worst sampled u lies on the u-box boundary; the sup may be larger",
                      stacklevel=2)
    return WitnessReport(verdict, best, worst_x, worst_zeta, worst_u,
                         X.shape[0], gamma, tol, "exact" if exact else "sampled")


def _sweep_block(sys, V, gamma, X, indices, exact, structured, G0, GI, U_common):
    """Max-residual reduction over one contiguous block of grid indices."""
    Usq = np.sum(U_common * U_common, axis=1) if U_common is not None else None
    best = -math.inf
    worst_x = worst_zeta = worst_u = None
    boundary_hit = False
    for idx in indices:
        x = X[idx]
        S = V.subdiff(x)
        if S.is_empty:
            continue
        unbounded = S.unbounded_axes
        if unbounded:
            ok = _unbounded_coefficients_vanish(
                sys, x, unbounded,
                G0[idx] if structured else None,
                GI[:, idx, :] if structured else None,
                None if structured else U_common)
            if not ok:
                return math.inf, x.copy(), None, None, False
        verts = S.finite_vertices()
        if exact:
            g0 = G0[idx]
            gi = GI[:, idx, :]                      # (m, n)
            dots = verts @ gi.T                     # (K, m)
            res = verts @ g0 + np.sum(dots * dots, axis=1) / (4 * gamma) + float(x @ x)
            k = int(np.argmax(res))
            if res[k] > best:
                best = float(res[k])
                worst_x = x.copy()
                worst_zeta = verts[k].copy()
                worst_u = dots[k] / (2 * gamma)
        else:
            F = sys.dynamics(np.broadcast_to(x, (U_common.shape[0], x.size)), U_common)
            base = -gamma * Usq + float(x @ x)
            for zeta in verts:
                vals = F @ zeta + base
                j = int(np.argmax(vals))
                if vals[j] > best:
                    best = float(vals[j])
                    worst_x = x.copy()
                    worst_zeta = zeta.copy()
                    worst_u = U_common[j].copy()
                    boundary_hit = _on_boundary(U_common[j], U_common)
    return best, worst_x, worst_zeta, worst_u, boundary_hit


def _unbounded_coefficients_vanish(sys, x, axes, g0_row, gi_rows, U_common) -> bool:
    if g0_row is not None:
        for k in axes:
            if abs(g0_row[k]) > _COEFF_ZERO_TOL:
                return False
            if gi_rows.shape[0] and np.any(np.abs(gi_rows[:, k]) > _COEFF_ZERO_TOL):
                return False
        return True
    # general system: the k-th dynamics component must vanish on the whole u sample
    F = sys.dynamics(np.broadcast_to(x, (U_common.shape[0], x.size)), U_common)
    return all(np.max(np.abs(F[:, k])) <= _COEFF_ZERO_TOL for k in axes)


def point_residual(sys: System, V: StorageCandidate, gamma: float, x,
                   u_box: Optional[Sequence] = None, u_points: int = 41):
    """Worst residual over the subdifferential at one point: (residual, zeta, u).

    Returns +inf with zeta = None when an unbounded subdifferential coordinate
    multiplies a non-vanishing dynamic coefficient.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    S = V.subdiff(x)
    if S.is_empty:
        return -math.inf, None, None
    structured = isinstance(sys, (AffineSystem, PowerAffineSystem))
    if S.unbounded_axes:
        if structured:
            g0 = sys.drift(x)
            gi = sys.input_fields(x)
            ok = all(abs(g0[k]) <= _COEFF_ZERO_TOL
                     and (sys.m == 0 or np.all(np.abs(gi[:, k]) <= _COEFF_ZERO_TOL))
                     for k in S.unbounded_axes)
        else:
            if u_box is None:
                half = 4.0 * float(np.max(np.abs(x)))
                u_box = [(-half, half)] * sys.m
            U = _u_grid_from_box(u_box, u_points)
            ok = _unbounded_coefficients_vanish(sys, x, S.unbounded_axes, None, None, U)
        if not ok:
            return math.inf, None, None
    best, best_z, best_u = -math.inf, None, None
    for zeta in S.finite_vertices():
        if isinstance(sys, AffineSystem):
            res = affine_residual(sys, x, zeta, gamma)
            u = affine_worst_u(sys, x, zeta, gamma)
        else:
            res, u = general_residual(sys, x, zeta, gamma, u_box=u_box,
                                      u_points=u_points, warn_on_boundary=False)
        if res > best:
            best, best_z, best_u = res, zeta, u
    return best, best_z, best_u


def min_gain_scan(sys: System, V: StorageCandidate, region: Region,
                  gamma_grid: Sequence[float], tol: Optional[float] = None,
                  **kwargs) -> Optional[float]:
    """Smallest grid gamma whose witness check passes; None if every gamma fails.

    The residual is nonincreasing in gamma, so the scan is monotone: once a
    grid gamma passes, every larger one does.
    """
    gammas = list(gamma_grid)
    if not gammas or any(g <= 0 for g in gammas) or gammas != sorted(gammas):
        raise ValueError("gamma_grid must be positive and increasing")
    for gamma in gammas:
        report = check_witness(sys, V, gamma, region, tol=tol, **kwargs)
        if report.passed:
            return gamma
    return None


def gamma_range(start: float, stop: float, step: float) -> list:
    """An inclusive gamma grid built with integer stepping to avoid float drift."""
    k = int(round((stop - start) / step))
    return [round(start + i * step, 12) for i in range(k + 1)]
