"""Storage-function candidates, their subdifferentials, and the numeric subgradient test.

A candidate is a nonnegative scalar function of the state.  Built-ins carry
exact subdifferential oracles; user expression candidates have none, and claims
about them must go through :func:`verify_subgradient`, which samples the
defining liminf quotient

    [V(x + h) - V(x) - zeta . h] / |h|  >=  0   as h -> 0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from . import expr as ex
from .errors import HjikitError


class MissingOracleError(HjikitError):
    """The operation needs an exact subdifferential/gradient oracle and the candidate has none."""


class GradientUndefinedError(HjikitError):
    """The candidate's gradient does not exist at the queried point (kink locus)."""


_KINK_SNAP = 1e-12  # queries this close to a known kink locus snap onto it

_INF = math.inf


@dataclass(frozen=True)
class SubdiffSet:
    """A subdifferential in coordinate-box form.

    Every subdifferential the workbench manipulates is a product of closed
    intervals (possibly degenerate, possibly unbounded); a singleton is the
    all-degenerate case.  ``intervals`` is a tuple of (lo, hi) pairs with
    ``-inf``/``inf`` allowed; ``is_empty`` marks the empty set.
    """

    intervals: tuple = ()
    empty: bool = False

    @staticmethod
    def empty_set() -> "SubdiffSet":
        return SubdiffSet((), True)

    @staticmethod
    def singleton(vec) -> "SubdiffSet":
        vec = np.atleast_1d(np.asarray(vec, dtype=float))
        return SubdiffSet(tuple((float(v), float(v)) for v in vec))

    @staticmethod
    def box(intervals) -> "SubdiffSet":
        ivs = tuple((float(lo), float(hi)) for lo, hi in intervals)
        for lo, hi in ivs:
            if lo > hi:
                raise ValueError(f"malformed interval [{lo}, {hi}]")
        return SubdiffSet(ivs)

    @property
    def is_empty(self) -> bool:
        return self.empty

    @property
    def dim(self) -> int:
        return len(self.intervals)

    @property
    def is_singleton(self) -> bool:
        return not self.empty and all(lo == hi for lo, hi in self.intervals)

    @property
    def vector(self) -> np.ndarray:
        if not self.is_singleton:
            raise ValueError("not a singleton subdifferential")
        return np.array([lo for lo, _ in self.intervals])

    @property
    def unbounded_axes(self) -> tuple:
        return tuple(k for k, (lo, hi) in enumerate(self.intervals)
                     if math.isinf(lo) or math.isinf(hi))

    def contains(self, zeta, tol: float = 0.0) -> bool:
        """Exact interval containment (optionally slackened by ``tol``)."""
        if self.empty:
            return False
        zeta = np.atleast_1d(np.asarray(zeta, dtype=float))
        return all(lo - tol <= z <= hi + tol
                   for z, (lo, hi) in zip(zeta, self.intervals))

    def finite_vertices(self) -> np.ndarray:
        """All vertices over the finite interval coordinates, shape (K, n).

        Unbounded coordinates are pinned at 0; callers must separately enforce
        that their residual coefficients vanish (see the witness checker).
        """
        if self.empty:
            return np.zeros((0, self.dim))
        choices = []
        for lo, hi in self.intervals:
            vals = sorted({v for v in (lo, hi) if not math.isinf(v)})
            choices.append(vals if vals else [0.0])
        verts = np.array(np.meshgrid(*choices, indexing="ij")).reshape(self.dim, -1).T \
            if self.dim else np.zeros((1, 0))
        return verts


@dataclass(frozen=True, eq=False)
class StorageCandidate:
    """A nonnegative scalar function with optional exact subdifferential machinery.

    ``value`` maps a state (n,) to a float and must accept batched (..., n)
    arrays.  ``subdiff``/``gradient`` are exact oracles when present; the
    gradient oracle raises :class:`GradientUndefinedError` on its kink loci.
    ``regularity`` is one of 'continuous', 'lipschitz', 'c1_away_from_origin',
    'smooth'.
    """

    name: str
    value_fn: Callable[[np.ndarray], np.ndarray]
    regularity: str = "continuous"
    subdiff_fn: Optional[Callable[[np.ndarray], SubdiffSet]] = None
    gradient_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None
    dim: Optional[int] = None  # None = any dimension

    def value(self, x) -> float:
        return float(self.value_fn(np.asarray(x, dtype=float)))

    def value_batch(self, X) -> np.ndarray:
        return np.asarray(self.value_fn(np.asarray(X, dtype=float)), dtype=float)

    def subdiff(self, x) -> SubdiffSet:
        if self.subdiff_fn is None:
            if self.gradient_fn is not None:
                return SubdiffSet.singleton(self.gradient_fn(np.asarray(x, dtype=float)))
            raise MissingOracleError(
                f"candidate {self.name!r} has no exact subdifferential oracle; "
                "use verify_subgradient for numeric evidence")
        return self.subdiff_fn(np.asarray(x, dtype=float))

    def gradient(self, x) -> np.ndarray:
        if self.gradient_fn is None:
            raise MissingOracleError(f"candidate {self.name!r} has no gradient oracle")
        return np.asarray(self.gradient_fn(np.asarray(x, dtype=float)), dtype=float)

    @property
    def has_oracle(self) -> bool:
        return self.subdiff_fn is not None or self.gradient_fn is not None


def subdiff(V: StorageCandidate, x) -> SubdiffSet:
    """The exact viscosity subdifferential of a built-in candidate at x."""
    return V.subdiff(x)


# ---------------------------------------------------------------------------
# Built-in candidates
# ---------------------------------------------------------------------------

def _snap(v: float) -> float:
    return 0.0 if abs(v) <= _KINK_SNAP else v


def _sign(v: float) -> float:
    return 0.0 if v == 0 else math.copysign(1.0, v)


def _weighted_l1(scale: float):
    """scale * (|x1| + |x2|) with its exact box subdifferential."""

    def value(X):
        X = np.asarray(X, dtype=float)
        return scale * (np.abs(X[..., 0]) + np.abs(X[..., 1]))

    def sd(x):
        x1, x2 = _snap(x[0]), _snap(x[1])
        iv1 = (-scale, scale) if x1 == 0 else (scale * _sign(x1),) * 2
        iv2 = (-scale, scale) if x2 == 0 else (scale * _sign(x2),) * 2
        return SubdiffSet.box((iv1, iv2))

    def grad(x):
        x1, x2 = _snap(x[0]), _snap(x[1])
        if x1 == 0 or x2 == 0:
            raise GradientUndefinedError("gradient undefined on the coordinate axes")
        return np.array([scale * _sign(x1), scale * _sign(x2)])

    return value, sd, grad


def _make_v1_scaled() -> StorageCandidate:
    value, sd, grad = _weighted_l1(2.0)
    return StorageCandidate("v1_scaled", value, "lipschitz", sd, grad, dim=2)


def _make_v1() -> StorageCandidate:
    value, sd, grad = _weighted_l1(1.0)
    return StorageCandidate("v1", value, "lipschitz", sd, grad, dim=2)


def _make_v2() -> StorageCandidate:
    def value(X):
        X = np.asarray(X, dtype=float)
        return X[..., 0] ** 2 + np.cbrt(X[..., 1]) ** 2

    def sd(x):
        x1, x2 = float(x[0]), _snap(x[1])
        if x2 == 0:
            # liminf of |h|^(2/3)/|h| diverges, so every second coordinate qualifies
            return SubdiffSet.box(((2 * x1, 2 * x1), (-_INF, _INF)))
        return SubdiffSet.singleton((2 * x1, (2.0 / 3.0) / np.cbrt(x2)))

    def grad(x):
        x1, x2 = float(x[0]), _snap(x[1])
        if x2 == 0:
            raise GradientUndefinedError("gradient undefined on the x2 = 0 axis")
        return np.array([2 * x1, (2.0 / 3.0) / np.cbrt(x2)])

    return StorageCandidate("v2", value, "continuous", sd, grad, dim=2)


def _make_v3_scalar() -> StorageCandidate:
    def value(X):
        X = np.asarray(X, dtype=float)
        v = X[..., 0]
        return np.maximum(np.abs(v), 2 * v - 1)

    def sd(x):
        v = float(np.atleast_1d(x)[0])
        if abs(v) <= _KINK_SNAP:
            return SubdiffSet.box(((-1.0, 1.0),))
        if abs(v - 1.0) <= _KINK_SNAP:
            return SubdiffSet.box(((1.0, 2.0),))
        slope = -1.0 if v < 0 else (1.0 if v < 1 else 2.0)
        return SubdiffSet.singleton((slope,))

    def grad(x):
        v = float(np.atleast_1d(x)[0])
        if abs(v) <= _KINK_SNAP or abs(v - 1.0) <= _KINK_SNAP:
            raise GradientUndefinedError("gradient undefined at the kinks x = 0 and x = 1")
        return np.array([-1.0 if v < 0 else (1.0 if v < 1 else 2.0)])

    return StorageCandidate("v3_scalar", value, "lipschitz", sd, grad, dim=1)


def _make_sq_norm() -> StorageCandidate:
    def value(X):
        X = np.asarray(X, dtype=float)
        return np.sum(X * X, axis=-1)

    def sd(x):
        return SubdiffSet.singleton(2 * np.asarray(x, dtype=float))

    def grad(x):
        return 2 * np.asarray(x, dtype=float)

    return StorageCandidate("sq_norm", value, "smooth", sd, grad, dim=None)


def builtins() -> dict:
    """Fresh instances of the built-in candidates, keyed by name."""
    return {
        "v1_scaled": _make_v1_scaled(),
        "v1": _make_v1(),
        "v2": _make_v2(),
        "v3_scalar": _make_v3_scalar(),
        "sq_norm": _make_sq_norm(),
    }


def builtin(name: str) -> StorageCandidate:
    table = builtins()
    if name not in table:
        raise KeyError(f"no builtin candidate named {name!r}; have {sorted(table)}")
    return table[name]


def from_callables(name, value_fn, gradient_fn=None, subdiff_fn=None,
                   regularity="smooth", dim=None) -> StorageCandidate:
    """Wrap plain callables as a candidate (used for smoothed/constructed functions)."""
    return StorageCandidate(name, value_fn, regularity, subdiff_fn, gradient_fn, dim)


def from_expression(src: str, n: int, regularity: str = "continuous") -> StorageCandidate:
    """An expression-backed candidate in x1..xn; it has no exact oracle."""
    ast = ex.parse(src, n, 0)
    fn = ex.compile_evaluator(ast)

    def value(X):
        return fn(np.asarray(X, dtype=float), None)

    return StorageCandidate(f"expr:{src}", value, regularity, None, None, dim=n)


def from_config(cfg: dict) -> StorageCandidate:
    kind = cfg.get("kind")
    if kind == "builtin":
        return builtin(cfg["name"])
    if kind == "expr":
        return from_expression(cfg["expr"], int(cfg["n"]), cfg.get("regularity", "continuous"))
    raise ValueError(f"unknown storage kind {kind!r}")


def to_config(V: StorageCandidate) -> dict:
    if V.name.startswith("expr:"):
        return {"kind": "expr", "expr": V.name[5:], "n": V.dim, "regularity": V.regularity}
    return {"kind": "builtin", "name": V.name}


# ---------------------------------------------------------------------------
# Numeric subgradient verification
# ---------------------------------------------------------------------------

def _directions(n: int, seed: int = 0) -> np.ndarray:
    if n == 1:
        return np.array([[1.0], [-1.0]])
    if n == 2:
        ang = np.linspace(0.0, 2 * np.pi, 64, endpoint=False)
        return np.stack([np.cos(ang), np.sin(ang)], axis=1)
    rng = np.random.default_rng(seed)
    d = rng.standard_normal((4 * n * n, n))
    return d / np.linalg.norm(d, axis=1, keepdims=True)


def verify_subgradient(V: StorageCandidate, x, zeta,
                       radii: Sequence[float] = (1e-2, 1e-3, 1e-4, 1e-5, 1e-6),
                       tol: float = 1e-7, seed: int = 0) -> bool:
    """One-sided numeric test of the subgradient quotient at x.

    For each radius r the quotient ``[V(x+h) - V(x) - zeta.h]/|h|`` is
    minimized over sampled h with |h| in [r/2, r] (dense directional sampling).
    The defining condition is a liminf as h -> 0: the running minima must stay
    above ``-tol`` as r shrinks, judged by extrapolating the two smallest-radius
    minima linearly in r to r = 0 (coarse radii may legitimately dip negative
    while the limit is clean, e.g. under one-sided curvature or where the
    quotient diverges only as h -> 0).  Rejection is conclusive up to sampling;
    acceptance is evidence, not proof.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    zeta = np.atleast_1d(np.asarray(zeta, dtype=float))
    radii = list(radii)
    if radii != sorted(radii, reverse=True) or min(radii) <= 0:
        raise ValueError("radii must be strictly decreasing and positive")
    dirs = _directions(x.size, seed)
    mags = np.array([0.5, 0.75, 1.0])
    vx = V.value(x)
    minima = []
    for r in radii:
        H = (dirs[:, None, :] * (r * mags)[None, :, None]).reshape(-1, x.size)
        vals = V.value_batch(x[None, :] + H)
        quot = (vals - vx - H @ zeta) / np.linalg.norm(H, axis=1)
        minima.append(float(np.min(quot)))
    if len(minima) == 1:
        return minima[0] >= -tol
    r1, r2 = radii[-2], radii[-1]
    m1, m2 = minima[-2], minima[-1]
    intercept = (r1 * m2 - r2 * m1) / (r1 - r2)
    return intercept >= -tol
