"""Euclidean prox geometry: distances, projections, and composite prox steps.

The solver only ever needs two minimizations over the feasible set Q:

    step subproblem:    argmin_y  xi(v, y)  + a * (<g, y> + psi(y))
    model subproblem:   argmin_x  xi(x0, x) + <g_acc, x> + A * psi(x)

With the Euclidean prox function d(x) = ||x||^2 / 2 both reduce to a prox
of the simple term ``psi`` at a shifted point, resolved in closed form per
(penalty, constraint) pair.  Pairs with no exact closed form are rejected
at construction time instead of being silently approximated.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError


class Geometry(enum.Enum):
    """Prox-function family.

    Only the Euclidean case d(x) = ||x||^2 / 2 is implemented; the enum
    keeps the extension point explicit.
    """

    EUCLIDEAN = "euclidean"


class Penalty(enum.Enum):
    ZERO = "zero"
    L1 = "l1"
    SQUARED_L2 = "squared_l2"


class Constraint(enum.Enum):
    FREE = "free"
    NONNEGATIVE = "nonnegative"
    BOX = "box"
    BALL = "ball"


def soft_threshold(z, t: float) -> np.ndarray:
    """Componentwise soft threshold: argmin_y ||y - z||^2 / 2 + t ||y||_1."""
    if t < 0:
        raise ValueError("threshold must be nonnegative")
    z = np.asarray(z, dtype=float)
    # the trailing + 0.0 normalizes -0.0 away
    return np.sign(z) * np.maximum(np.abs(z) - t, 0.0) + 0.0


def project_nonneg(z) -> np.ndarray:
    return np.maximum(np.asarray(z, dtype=float), 0.0)


def project_box(z, lo, hi) -> np.ndarray:
    if not np.all(np.asarray(lo) <= np.asarray(hi)):
        raise ValueError("box bounds must satisfy lo <= hi componentwise")
    return np.clip(np.asarray(z, dtype=float), lo, hi)


def project_ball(z, r: float) -> np.ndarray:
    """Project onto the Euclidean ball of radius r centered at the origin.

    The returned point always satisfies ||out|| <= r so a second projection
    is a bitwise no-op.
    """
    if r <= 0:
        raise ValueError("ball radius must be positive")
    z = np.asarray(z, dtype=float)
    nrm = float(np.linalg.norm(z))
    if nrm <= r:
        return z.copy()
    out = z * (r / nrm)
    # guard the rare 1-ulp overshoot from the rescaling
    for _ in range(4):
        if float(np.linalg.norm(out)) <= r:
            break
        out = np.nextafter(out, 0.0)
    return out


@dataclass(frozen=True, eq=False)
class SimpleTerm:
    """The simple additive term psi plus the constraint set Q.

    ``penalty`` is one of: zero, weight * ||.||_1, or (weight / 2) * ||.||^2.
    ``constraint`` restricts the domain; box bounds may be scalars or arrays.
    """

    penalty: Penalty = Penalty.ZERO
    weight: float = 0.0
    constraint: Constraint = Constraint.FREE
    lo: float | np.ndarray | None = None
    hi: float | np.ndarray | None = None
    radius: float | None = None

    def __post_init__(self):
        if self.weight < 0:
            raise ConfigError("penalty weight must be nonnegative")
        if self.constraint is Constraint.BOX:
            if self.lo is None or self.hi is None:
                raise ConfigError("box constraint requires lo and hi")
            if not np.all(np.asarray(self.lo) <= np.asarray(self.hi)):
                raise ConfigError("box constraint requires lo <= hi componentwise")
        if self.constraint is Constraint.BALL:
            if self.radius is None or self.radius <= 0:
                raise ConfigError("ball constraint requires a positive radius")
        if (
            self.penalty is Penalty.L1
            and self.weight > 0
            and self.constraint is Constraint.BALL
        ):
            raise ConfigError("l1 penalty on a ball has no exact closed-form prox")

    @classmethod
    def zero(cls, **kw) -> "SimpleTerm":
        return cls(Penalty.ZERO, 0.0, **kw)

    @classmethod
    def l1(cls, weight: float, **kw) -> "SimpleTerm":
        return cls(Penalty.L1, weight, **kw)

    @classmethod
    def squared_l2(cls, weight: float, **kw) -> "SimpleTerm":
        return cls(Penalty.SQUARED_L2, weight, **kw)

    def value(self, x) -> float:
        """Penalty value psi(x).  The constraint indicator is not included;
        callers keep iterates feasible by construction."""
        x = np.asarray(x, dtype=float)
        if self.penalty is Penalty.ZERO or self.weight == 0.0:
            return 0.0
        if self.penalty is Penalty.L1:
            return self.weight * float(np.abs(x).sum())
        return 0.5 * self.weight * float(x @ x)

    def project(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        if self.constraint is Constraint.FREE:
            return z.copy()
        if self.constraint is Constraint.NONNEGATIVE:
            return project_nonneg(z)
        if self.constraint is Constraint.BOX:
            return project_box(z, self.lo, self.hi)
        return project_ball(z, self.radius)

    def prox(self, z, t: float) -> np.ndarray:
        """Exact minimizer of ||y - z||^2 / 2 + t * psi(y) over Q."""
        if t < 0:
            raise ValueError("prox scale must be nonnegative")
        z = np.asarray(z, dtype=float)
        tw = t * self.weight
        if self.penalty is Penalty.ZERO or tw == 0.0:
            return self.project(z)
        if self.penalty is Penalty.L1:
            if self.constraint is Constraint.FREE:
                return soft_threshold(z, tw)
            if self.constraint is Constraint.NONNEGATIVE:
                return np.maximum(z - tw, 0.0)
            if self.constraint is Constraint.BOX:
                return project_box(soft_threshold(z, tw), self.lo, self.hi)
            raise ConfigError("l1 penalty on a ball has no exact closed-form prox")
        # squared l2: shrink toward the origin, then the 1-d convex pieces
        # (or the radial symmetry, for the ball) make projection exact
        shrunk = z / (1.0 + tw)
        if self.constraint is Constraint.FREE:
            return shrunk
        if self.constraint is Constraint.NONNEGATIVE:
            return np.maximum(z, 0.0) / (1.0 + tw)
        if self.constraint is Constraint.BOX:
            return project_box(shrunk, self.lo, self.hi)
        return project_ball(shrunk, self.radius)


def _check_geometry(geometry: Geometry):
    if geometry is not Geometry.EUCLIDEAN:
        raise ConfigError(f"unsupported geometry: {geometry}")


def xi(geometry: Geometry, x, y) -> float:
    """Bregman distance of the prox function; ||y - x||^2 / 2 for Euclidean."""
    _check_geometry(geometry)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {y.shape}")
    d = y - x
    return 0.5 * float(d @ d)


def composite_step(geometry: Geometry, simple: SimpleTerm, v, g, a: float) -> np.ndarray:
    """Exact minimizer over Q of xi(v, y) + a * (<g, y> + psi(y))."""
    _check_geometry(geometry)
    if a <= 0:
        raise ValueError("step weight a must be positive")
    v = np.asarray(v, dtype=float)
    g = np.asarray(g, dtype=float)
    if v.shape != g.shape:
        raise ValueError(f"dimension mismatch: {v.shape} vs {g.shape}")
    return simple.prox(v - a * g, a)


def model_argmin(
    geometry: Geometry, simple: SimpleTerm, x0, g_acc, A: float
) -> tuple[np.ndarray, float]:
    """Minimize xi(x0, x) + <g_acc, x> + A * psi(x) over Q.

    Returns the minimizer and the value of this reduced objective at it.
    Adding the affine constant maintained by the solver turns the value into
    the minimum of the full accumulated model.
    """
    _check_geometry(geometry)
    if A < 0:
        raise ValueError("model weight A must be nonnegative")
    x0 = np.asarray(x0, dtype=float)
    g_acc = np.asarray(g_acc, dtype=float)
    if x0.shape != g_acc.shape:
        raise ValueError(f"dimension mismatch: {x0.shape} vs {g_acc.shape}")
    v = simple.prox(x0 - g_acc, A)
    value = xi(geometry, x0, v) + float(g_acc @ v) + A * simple.value(v)
    return v, value
