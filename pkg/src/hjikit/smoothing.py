"""Gain-relaxed smoothing of continuous witnesses, with a-posteriori certification.

The pipeline compactifies inputs onto the open unit ball, transports the
dynamics to the transformed field f(x, d), and replaces the non-constructive
smooth-approximation step by kernel mollification of the sampled candidate,
followed by certification of the two output bounds on a declared grid:

    (19)  |V(x) - W(x)| <= V(x)/2
    (20)  grad W(x) . (g0(x) + sum_i phi(u_i) g_i(x)) <= -|x|^2 + [(1+eps)gamma + eps]|u|^2

The certified object is the kernel-convolution function itself (smooth by
construction for any positive radius field); exported grid dumps are
evaluations of it, not the function.  Certificates are statements about the
declared grids only.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import HjikitError
from .hji import Region, check_witness
from .storage import StorageCandidate, from_callables
from .systems import AffineSystem, PowerAffineSystem, System


class BoundaryRadiusError(HjikitError):
    """The mollification radius reaches outside the sampled hull at some query."""


# ---------------------------------------------------------------------------
# Input compactification and the transformed field
# ---------------------------------------------------------------------------

def compactify(u) -> np.ndarray:
    """d_i = u_i / sqrt(1 + |u|^2); maps R^m onto the open unit ball."""
    u = np.asarray(u, dtype=float)
    return u / np.sqrt(1.0 + np.sum(u * u, axis=-1, keepdims=True))


def decompactify(d) -> np.ndarray:
    """Inverse map u = d / sqrt(1 - |d|^2); requires |d| < 1."""
    d = np.asarray(d, dtype=float)
    rad = np.sum(d * d, axis=-1, keepdims=True)
    if np.any(rad >= 1.0):
        raise ValueError("decompactify requires |d| < 1")
    return d / np.sqrt(1.0 - rad)


def transformed_field(sys: PowerAffineSystem, x, d) -> np.ndarray:
    """f(x, d) = (1-|d|^2) g0(x) + sum_i phi(d_i) (1-|d|^2)^(1-p/2) g_i(x).

    For p = 2 the coefficient of g_i is plainly phi(d_i); for p < 2 the field
    vanishes on the unit sphere |d| = 1.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    d = np.atleast_1d(np.asarray(d, dtype=float))
    one_minus = max(0.0, 1.0 - float(np.dot(d, d)))
    out = one_minus * sys.drift(x)
    coeff = 1.0 if sys.p == 2 else one_minus ** (1.0 - sys.p / 2.0)
    fields = sys.input_fields(x)
    phid = sys.phi_apply(d)
    for i in range(sys.m):
        out = out + phid[i] * coeff * fields[i]
    return out


def theta(x, d, alpha: Callable, beta: Callable) -> float:
    """Theta(x, d) = -(1 - |d|^2) alpha(x) + |d|^2 beta(x)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    d = np.atleast_1d(np.asarray(d, dtype=float))
    dsq = float(np.dot(d, d))
    return -(1.0 - dsq) * float(alpha(x)) + dsq * float(beta(x))


def default_alpha(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return np.sum(x * x, axis=-1)


def check_case1_p2(sys: PowerAffineSystem, x, zeta, beta_val: float, d,
                   eps_seq: Sequence[float] = (1.0, 0.5, 0.25, 0.125, 0.0625),
                   alpha: Optional[Callable] = None, tol: float = 1e-9) -> bool:
    """The unit-sphere boundary inequality for p = 2 at subgradient zeta.

    Verifies sum_i phi(d_i) zeta.g_i(x) <= beta + tol by evaluating the
    eps^2-scaled witness inequality along the decreasing eps sequence (inputs
    of the form d/eps) and confirming the limit value.
    """
    if sys.p != 2:
        raise ValueError("this check applies to p = 2 systems")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    d = np.atleast_1d(np.asarray(d, dtype=float))
    zeta = np.atleast_1d(np.asarray(zeta, dtype=float))
    if abs(float(np.dot(d, d)) - 1.0) > 1e-9:
        raise ValueError("d must be a unit vector")
    if alpha is None:
        alpha = default_alpha
    fields = sys.input_fields(x)
    g0 = sys.drift(x)
    phid = sys.phi_apply(d)
    limit_lhs = sum(float(phid[i]) * float(np.dot(zeta, fields[i])) for i in range(sys.m))
    a = float(alpha(x))
    zg0 = float(np.dot(zeta, g0))
    # scaled members: [eps^2 zeta.g0 + limit] - [-eps^2 alpha + beta]; linear in eps^2,
    # so the sequence converges monotonically onto the boundary inequality.
    gaps = [eps * eps * (zg0 + a) + (limit_lhs - beta_val)
            for eps in sorted(eps_seq, reverse=True)]
    steps = np.diff(gaps)
    if steps.size and not (np.all(steps <= 1e-12) or np.all(steps >= -1e-12)):
        raise RuntimeError("scaled sequence failed to converge monotonically")
    return limit_lhs <= beta_val + tol


def choose_delta(eps: float) -> float:
    """delta = m/(1+m) with m = min(eps, 1/4); satisfies both bookkeeping bounds.

    1/(1-delta) = 1 + m <= 1 + eps  and  delta/(1-delta) = m <= min(eps, 1/4).
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    m = min(eps, 0.25)
    return m / (1.0 + m)


def upsilons(V: StorageCandidate, alpha: Callable, delta: float, x):
    """(Upsilon_1, Upsilon_2) = ((1-delta)/4 V(x), delta min(1, alpha(x)))."""
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    u1 = (1.0 - delta) / 4.0 * V.value(x)
    u2 = delta * min(1.0, float(alpha(x)))
    return u1, u2


# ---------------------------------------------------------------------------
# Bump kernel and per-axis radius profiles
# ---------------------------------------------------------------------------

def kernel_cdf(s: np.ndarray) -> np.ndarray:
    """The closed-form C-infinity CDF 1/(1 + exp(-2s/(1-s^2))) saturating at |s| = 1.

    Its derivative is the mollification kernel: symmetric, unit mass, compactly
    supported on [-1, 1], with all derivatives vanishing at the support ends.
    """
    s = np.asarray(s, dtype=float)
    out = np.where(s >= 1.0, 1.0, 0.0)
    inside = np.abs(s) < 1.0
    si = s[inside]
    with np.errstate(over="ignore"):
        out[inside] = 1.0 / (1.0 + np.exp(-2.0 * si / (1.0 - si * si)))
    return out


def kernel(s: np.ndarray) -> np.ndarray:
    """k = d/ds kernel_cdf: sigma (1-sigma) 2(1+s^2)/(1-s^2)^2 inside |s| < 1."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = np.abs(s) < 1.0
    si = s[inside]
    with np.errstate(over="ignore"):
        sg = 1.0 / (1.0 + np.exp(-2.0 * si / (1.0 - si * si)))
    out[inside] = sg * (1.0 - sg) * 2.0 * (1.0 + si * si) / (1.0 - si * si) ** 2
    return out


# First-moment antiderivative I1(s) = int_{-1}^s t k(t) dt, tabulated once and
# read back with cubic Hermite interpolation (the exact derivative s k(s) is
# available), giving ~1e-14 accuracy.
_I1_GRID = np.linspace(-1.0, 1.0, 8193)


def _build_i1_table() -> np.ndarray:
    from scipy.integrate import cumulative_simpson
    integrand = _I1_GRID * kernel(_I1_GRID)
    return cumulative_simpson(integrand, x=_I1_GRID, initial=0.0)


_I1_TABLE = _build_i1_table()
_I1_STEP = _I1_GRID[1] - _I1_GRID[0]


def kernel_moment(s: np.ndarray) -> np.ndarray:
    """I1(s) above; clamps to the (zero) saturated values outside [-1, 1]."""
    s = np.asarray(s, dtype=float)
    sc = np.clip(s, -1.0, 1.0)
    pos = (sc + 1.0) / _I1_STEP
    idx = np.clip(pos.astype(int), 0, _I1_GRID.size - 2)
    t = pos - idx
    y0 = _I1_TABLE[idx]
    y1 = _I1_TABLE[idx + 1]
    d0 = _I1_GRID[idx] * kernel(_I1_GRID[idx]) * _I1_STEP
    d1 = _I1_GRID[idx + 1] * kernel(_I1_GRID[idx + 1]) * _I1_STEP
    h00 = (1 + 2 * t) * (1 - t) ** 2
    h10 = t * (1 - t) ** 2
    h01 = t * t * (3 - 2 * t)
    h11 = t * t * (t - 1)
    return h00 * y0 + h10 * d0 + h01 * y1 + h11 * d1


@dataclass(frozen=True)
class ConstantRadius:
    r0: float

    def value(self, t: np.ndarray) -> np.ndarray:
        return np.full_like(np.asarray(t, dtype=float), self.r0)

    def deriv(self, t: np.ndarray) -> np.ndarray:
        return np.zeros_like(np.asarray(t, dtype=float))


@dataclass(frozen=True)
class GeometricRadius:
    """Smooth radius profile matched to a mirrored geometric node layout.

    r(t) = scale * (delta + slope * sqrt(t^2 + delta^2)) tracks a local node
    spacing of about ``delta`` near 0 and ``slope * |t|`` away from it, and is
    real-analytic, so the mollified function stays smooth.
    """

    delta: float
    slope: float
    scale: float

    def value(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return self.scale * (self.delta + self.slope * np.sqrt(t * t + self.delta ** 2))

    def deriv(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return self.scale * self.slope * t / np.sqrt(t * t + self.delta ** 2)


def _as_radius(r):
    if isinstance(r, (int, float)):
        return ConstantRadius(float(r))
    return r


# ---------------------------------------------------------------------------
# Mollified function (normalized moving-weight kernel sum over a tensor grid)
# ---------------------------------------------------------------------------

class MollifiedFunction:
    """Exact convolution of the multilinear interpolant of grid samples with the kernel.

    W(x) = integral of hat-interpolant(y) * prod_i (1/r_i) k((x_i - y_i)/r_i(x_i)) dy.
    For a tensor grid the hat basis separates per axis, and each 1-D factor has
    the closed form (cell by cell) in the kernel CDF and its first moment, so
    both weights and their derivatives (chain rule through the radius profile
    included) are analytic.  Exact on constants and on linear data, gradients
    included; smooth for any positive smooth radius field.
    """

    def __init__(self, axes: Sequence[np.ndarray], values: np.ndarray, radii):
        self.axes = tuple(np.asarray(a, dtype=float) for a in axes)
        self.ndim = len(self.axes)
        if self.ndim not in (1, 2):
            raise NotImplementedError("mollification is implemented for 1-D and 2-D grids")
        self.values = np.asarray(values, dtype=float)
        if self.values.shape != tuple(a.size for a in self.axes):
            raise ValueError("values shape does not match the axes")
        if isinstance(radii, (int, float)) or not isinstance(radii, (list, tuple)):
            radii = [radii] * self.ndim
        self.radii = tuple(_as_radius(r) for r in radii)

    # -- per-axis weight construction -------------------------------------
    def _axis_weights(self, i: int, q: np.ndarray):
        """Node indices, hat-convolution weights, and their x-derivatives.

        For every grid cell [y_c, y_{c+1}] met by the kernel support, with
        A_c = int_cell k_r(x - y) dy and B_c = int_cell s k_r(x - y) dy, the
        interpolant contributes ((y_{c+1}-x) A + r B)/h to the left node and
        ((x-y_c) A - r B)/h to the right one.
        """
        nodes = self.axes[i]
        prof = self.radii[i]
        r = prof.value(q)
        dr = prof.deriv(q)
        if np.any(q - r < nodes[0]) or np.any(q + r > nodes[-1]):
            raise BoundaryRadiusError(
                f"kernel support leaves the sampled hull on axis {i}; "
                "extend the sample grid or shrink the radius")
        if np.any(r <= 0):
            raise BoundaryRadiusError(f"nonpositive radius on axis {i}")
        lo = np.searchsorted(nodes, q - r, side="right") - 1   # left node of first cell
        hi = np.searchsorted(nodes, q + r, side="left") + 1    # one past the last node
        lo = np.maximum(lo, 0)
        hi = np.minimum(hi, nodes.size)
        M = int(np.max(hi - lo))                               # nodes per window
        idx = lo[:, None] + np.arange(M)[None, :]
        node_mask = idx < hi[:, None]
        idx = np.minimum(idx, nodes.size - 1)
        y = nodes[idx]                                         # (Q, M)
        rq = r[:, None]
        drq = dr[:, None]
        s = (q[:, None] - y) / rq
        ds = (1.0 - s * drq) / rq                              # dS/dx per node edge
        I0 = kernel_cdf(s)
        I1 = kernel_moment(s)
        k = kernel(s)
        dI0 = k * ds
        dI1 = s * k * ds
        # cell c spans window nodes c..c+1 (c = 0..M-2); masked-out cells drop
        cell_mask = node_mask[:, 1:]
        h = np.where(cell_mask, y[:, 1:] - y[:, :-1], 1.0)
        A = (I0[:, :-1] - I0[:, 1:]) * cell_mask
        B = (I1[:, :-1] - I1[:, 1:]) * cell_mask
        dA = (dI0[:, :-1] - dI0[:, 1:]) * cell_mask
        dB = (dI1[:, :-1] - dI1[:, 1:]) * cell_mask
        xl = q[:, None] - y[:, :-1]                            # x - y_c
        xr = y[:, 1:] - q[:, None]                             # y_{c+1} - x
        CL = (xr * A + rq * B) / h
        CR = (xl * A - rq * B) / h
        dCL = (-A + xr * dA + drq * B + rq * dB) / h
        dCR = (A + xl * dA - drq * B - rq * dB) / h
        w = np.zeros_like(y)
        dw = np.zeros_like(y)
        w[:, :-1] += CL
        w[:, 1:] += CR
        dw[:, :-1] += dCL
        dw[:, 1:] += dCR
        return idx, w, dw

    def evaluate(self, X: np.ndarray, chunk: int = 4096):
        """Values and gradients at query points X of shape (Q, ndim)."""
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        Q = X.shape[0]
        vals = np.empty(Q)
        grads = np.empty((Q, self.ndim))
        for start in range(0, Q, chunk):
            sl = slice(start, min(start + chunk, Q))
            v, g = self._evaluate_chunk(X[sl])
            vals[sl] = v
            grads[sl] = g
        return vals, grads

    def _evaluate_chunk(self, X: np.ndarray):
        if self.ndim == 1:
            idx, w, dw = self._axis_weights(0, X[:, 0])
            blk = self.values[idx]
            D = np.sum(w, axis=1)
            N = np.sum(w * blk, axis=1)
            dD = np.sum(dw, axis=1)
            dN = np.sum(dw * blk, axis=1)
            if np.any(D <= 0):
                raise BoundaryRadiusError("empty kernel support at a query point")
            W = N / D
            return W, ((dN * D - N * dD) / (D * D))[:, None]

        idx1, w1, dw1 = self._axis_weights(0, X[:, 0])
        idx2, w2, dw2 = self._axis_weights(1, X[:, 1])
        blk = self.values[idx1[:, :, None], idx2[:, None, :]]   # (Q, M1, M2)
        T = np.einsum("qab,qb->qa", blk, w2)                     # contract axis 2 with w
        T2 = np.einsum("qab,qb->qa", blk, dw2)                   # ... and with dw
        N = np.einsum("qa,qa->q", T, w1)
        d1N = np.einsum("qa,qa->q", T, dw1)
        d2N = np.einsum("qa,qa->q", T2, w1)
        D1 = np.sum(w1, axis=1)
        D2 = np.sum(w2, axis=1)
        dD1 = np.sum(dw1, axis=1)
        dD2 = np.sum(dw2, axis=1)
        D = D1 * D2
        if np.any(D <= 0):
            raise BoundaryRadiusError("empty kernel support at a query point")
        W = N / D
        g1 = (d1N * D - N * dD1 * D2) / (D * D)
        g2 = (d2N * D - N * dD2 * D1) / (D * D)
        return W, np.stack([g1, g2], axis=1)


def mollify(values: np.ndarray, axes: Sequence[np.ndarray], radius) -> MollifiedFunction:
    """Kernel-smooth grid samples; ``radius`` is a float or per-axis profile list."""
    return MollifiedFunction(axes, values, radius)


def mollify_candidate(V: StorageCandidate, axes: Sequence[np.ndarray],
                      radius) -> MollifiedFunction:
    """Sample a candidate on the tensor grid spanned by ``axes`` and mollify it."""
    mesh = np.meshgrid(*axes, indexing="ij")
    P = np.stack([m.ravel() for m in mesh], axis=-1)
    vals = V.value_batch(P).reshape([a.size for a in axes])
    return MollifiedFunction(axes, vals, radius)


# ---------------------------------------------------------------------------
# Grid synthesis
# ---------------------------------------------------------------------------

def mirrored_geometric_axis(delta_min: float, ratio: float, extent: float) -> np.ndarray:
    """0 plus +/- delta_min * ratio^k, extended until the last node reaches extent."""
    vals = [delta_min]
    while vals[-1] < extent:
        vals.append(vals[-1] * ratio)
    pos = np.array(vals)
    return np.concatenate([-pos[::-1], [0.0], pos])


# ---------------------------------------------------------------------------
# Certification
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SmoothingProblem:
    """The data of one smoothing run (annulus stands in for the punctured space)."""

    sys: PowerAffineSystem
    V: StorageCandidate
    alpha: Callable
    beta: Callable
    epsilon: float
    r_min: float
    r_max: float

    def __post_init__(self):
        if self.sys.p > 2:
            raise ValueError("smoothing requires a power-affine system with p <= 2")
        if self.epsilon <= 0 or self.r_min <= 0 or self.r_max <= self.r_min:
            raise ValueError("need epsilon > 0 and 0 < r_min < r_max")


@dataclass(eq=False)
class CertifiedSmooth:
    W: StorageCandidate
    verdict: str                    # 'pass' | 'fail'
    epsilon: float
    delta: float
    gamma_eff: float                # (1+eps) gamma + eps, the certified u-coefficient
    max_rel_approx_error: float
    max_eq20_residual: float
    radius_schedule: list
    grids: dict
    worst_point: Optional[list] = None
    failure_reason: Optional[str] = None

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def to_dict(self) -> dict:
        def num(v):
            return None if (isinstance(v, float) and math.isnan(v)) else v
        return {
            "verdict": self.verdict,
            "epsilon": self.epsilon,
            "delta": self.delta,
            "gamma_eff": self.gamma_eff,
            "max_relative_approx_error": num(self.max_rel_approx_error),
            "max_eq20_residual": num(self.max_eq20_residual),
            "radius_schedule": self.radius_schedule,
            "grids": self.grids,
            "worst_point": self.worst_point,
            "failure_reason": self.failure_reason,
        }


def _as_power_affine(sys: System) -> PowerAffineSystem:
    if isinstance(sys, PowerAffineSystem):
        return sys
    if isinstance(sys, AffineSystem):
        return PowerAffineSystem(sys.n, sys.m, sys.g0, sys.g, p=1.0,
                                 phi="signed_pow", name=sys.name)
    raise ValueError("smoothing applies to (power-)affine systems")


def _power_residual_batch(sys: PowerAffineSystem, P: np.ndarray, Z: np.ndarray,
                          gamma: float) -> np.ndarray:
    """Vectorized sup_u [zeta.(g0 + sum phi(u_i) g_i) + |x|^2 - gamma|u|^2]."""
    G0 = sys.drift(P)
    out = np.sum(Z * G0, axis=1) + np.sum(P * P, axis=1)
    fields = sys.input_fields(P)          # (m, Q, n)
    p = sys.p
    for i in range(sys.m):
        c = np.sum(Z * fields[i], axis=1)
        ceff = np.abs(c) if sys.phi == "signed_pow" else np.maximum(c, 0.0)
        if p == 2:
            out = np.where(ceff > gamma, np.inf, out)
        elif p == 1:
            out = out + ceff * ceff / (4.0 * gamma)
        else:
            with np.errstate(divide="ignore", invalid="ignore"):
                r = (p * ceff / (2.0 * gamma)) ** (1.0 / (2.0 - p))
            r = np.where(ceff > 0, r, 0.0)
            out = out + ceff * r ** p - gamma * r * r
    return out


def smooth_witness(sys: System, V: StorageCandidate, gamma: float, gamma_prime: float,
                   r_min: float = 0.05, r_max: float = 2.0,
                   grid_ratio: float = 1.1, initial_delta_min: Optional[float] = None,
                   max_refinements: int = 6, check_hypothesis: bool = True,
                   hypothesis_ppd: int = 41) -> CertifiedSmooth:
    """Mollify a witness and certify the relaxed-gain bounds on the annulus.

    The radius schedule starts at four local grid spacings and halves once;
    reaching one grid spacing counts as failure at that grid, upon which the
    sample grid is refined (geometric floor divided by 8) and the schedule
    rerun, up to ``max_refinements``.  The returned report carries the worst
    point on failure instead of raising.
    """
    if gamma_prime <= gamma:
        raise ValueError("gamma_prime must exceed gamma")
    psys = _as_power_affine(sys)
    eps = ((gamma + gamma_prime) / 2.0 - gamma) / (gamma + 1.0)
    # construction validates p <= 2 and the annulus bounds
    SmoothingProblem(psys, V, default_alpha, lambda x: gamma, eps, r_min, r_max)
    dlt = choose_delta(eps)
    gamma_eff = (1.0 + eps) * gamma + eps

    if check_hypothesis:
        region = Region(box=((-r_max, r_max),) * psys.n, points_per_dim=hypothesis_ppd,
                        exclude_radius=r_min)
        base = check_witness(sys, V, gamma, region)
        if not base.passed:
            raise ValueError(
                f"hypothesis fails: {V.name!r} does not witness gain {gamma:g} "
                f"on the region (max residual {base.max_residual:.3e})")

    delta_min = initial_delta_min if initial_delta_min is not None else r_min / 40.0
    slope = grid_ratio - 1.0
    schedule_trace = []
    last_fail = ("not attempted", None, math.nan, math.nan)

    for refinement in range(max_refinements + 1):
        # sample axes with enough padding for the largest scheduled radius
        pad_radius = 4.0 * (delta_min + slope * math.sqrt(r_max ** 2 + delta_min ** 2)
                            + delta_min)
        axis = mirrored_geometric_axis(delta_min, grid_ratio, (r_max + pad_radius) * 1.05)
        axes = [axis] * psys.n
        mesh = np.meshgrid(*axes, indexing="ij")
        P_nodes = np.stack([m.ravel() for m in mesh], axis=-1)
        values = V.value_batch(P_nodes).reshape([a.size for a in axes])

        cert_axes = _with_midpoints(axis)
        Pc = _annulus_points(cert_axes, psys.n, r_min, r_max)
        Vc = V.value_batch(Pc)

        for scale in (4.0, 2.0):
            radii = [GeometricRadius(delta_min, slope, scale)] * psys.n
            moll = MollifiedFunction(axes, values, radii)
            ok, detail = _certify(psys, moll, Pc, Vc, dlt, gamma_eff)
            schedule_trace.append({
                "refinement": refinement, "delta_min": delta_min, "scale": scale,
                "outcome": "pass" if ok else f"fail ({detail[0]})",
            })
            if ok:
                W_cand = _wrap_candidate(moll, dlt, V.name)
                return CertifiedSmooth(
                    W=W_cand, verdict="pass", epsilon=eps, delta=dlt,
                    gamma_eff=gamma_eff,
                    max_rel_approx_error=detail[2], max_eq20_residual=detail[3],
                    radius_schedule=schedule_trace,
                    grids={"sample_axis_nodes": int(axis.size),
                           "certification_points": int(Pc.shape[0])})
            last_fail = detail
        delta_min /= 8.0

    reason, worst, rel_err, eq20 = last_fail
    return CertifiedSmooth(
        W=_wrap_candidate(moll, dlt, V.name), verdict="fail", epsilon=eps, delta=dlt,
        gamma_eff=gamma_eff, max_rel_approx_error=rel_err, max_eq20_residual=eq20,
        radius_schedule=schedule_trace,
        grids={"sample_axis_nodes": int(axis.size),
               "certification_points": int(Pc.shape[0])},
        worst_point=None if worst is None else [float(v) for v in worst],
        failure_reason=reason)


def _with_midpoints(axis: np.ndarray) -> np.ndarray:
    mids = 0.5 * (axis[:-1] + axis[1:])
    return np.sort(np.concatenate([axis, mids]))


def _annulus_points(axes: np.ndarray, n: int, r_min: float, r_max: float) -> np.ndarray:
    mesh = np.meshgrid(*([axes] * n), indexing="ij")
    P = np.stack([m.ravel() for m in mesh], axis=-1)
    norms = np.linalg.norm(P, axis=1)
    return P[(norms >= r_min) & (norms <= r_max)]


def _certify(psys: PowerAffineSystem, moll: MollifiedFunction, Pc: np.ndarray,
             Vc: np.ndarray, dlt: float, gamma_eff: float):
    """Check the Upsilon_1 bound, the relative bound (19), and the residual (20)."""
    Wh, Gh = moll.evaluate(Pc)
    ups1 = (1.0 - dlt) / 4.0 * Vc
    approx_gap = np.abs(Vc - Wh) - ups1
    k = int(np.argmax(approx_gap))
    if approx_gap[k] > 0:
        return False, ("approximation bound", Pc[k], math.nan, math.nan)

    Wv = Wh / (1.0 - dlt)
    rel = np.abs(Vc - Wv) / Vc
    rk = int(np.argmax(rel))
    if rel[rk] > 0.5:
        return False, ("relative bound", Pc[rk], float(rel[rk]), math.nan)

    Z = Gh / (1.0 - dlt)
    res = _power_residual_batch(psys, Pc, Z, gamma_eff)
    ek = int(np.argmax(res))
    if res[ek] > 0.0:
        return False, ("gain residual", Pc[ek], float(rel[rk]), float(res[ek]))
    return True, ("", None, float(np.max(rel)), float(res[ek]))


def _wrap_candidate(moll: MollifiedFunction, dlt: float, base_name: str) -> StorageCandidate:
    scale = 1.0 / (1.0 - dlt)

    def value(X):
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        Xb = X[None, :] if single else X.reshape(-1, X.shape[-1])
        out = np.empty(Xb.shape[0])
        zero = np.all(Xb == 0.0, axis=1)
        if np.any(~zero):
            v, _ = moll.evaluate(Xb[~zero])
            out[~zero] = scale * v
        out[zero] = 0.0  # extension by fiat at the origin
        if single:
            return out[0]
        return out.reshape(X.shape[:-1])

    def grad(x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        _, g = moll.evaluate(x[None, :])
        return scale * g[0]

    return from_callables(f"smoothed({base_name})", value, gradient_fn=grad,
                          regularity="smooth", dim=moll.ndim)
