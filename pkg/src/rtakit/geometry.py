"""Geometry of unsafe regions: point, ball, hyperrectangle, and polytope.

All sets are closed (the boundary counts as unsafe) and live in an
n-dimensional workspace. Each set type answers membership and Euclidean
distance queries, can be translated, and serializes to a compact payload:

    point           -> [c0, c1, ...]
    ball            -> [[c0, c1, ...], radius]
    hyperrectangle  -> [[lo0, ...], [hi0, ...]]
    polytope        -> [[[a00, ...], [a10, ...], ...], [b0, b1, ...]]

The payload layout is a wire contract shared with the trace format and must
stay stable. Every operation here is a pure function of its inputs.
"""
from __future__ import annotations

import itertools
import math

import numpy as np
from scipy.optimize import linprog

SET_KINDS = ("point", "ball", "hyperrectangle", "polytope")

# Polytope projection solver limits.
PROJECTION_TOL = 1e-10
PROJECTION_MAX_ITER = 10_000


class GeometryError(ValueError):
    """Invalid set definition or malformed query."""


class DimensionMismatch(GeometryError):
    """Query point dimension does not match the set dimension."""

    def __init__(self, set_dim: int, point_dim: int):
        super().__init__(
            f"dimension mismatch: set has dimension {set_dim}, "
            f"point has dimension {point_dim}"
        )
        self.set_dim = set_dim
        self.point_dim = point_dim


class ProjectionError(RuntimeError):
    """Iterative polytope projection failed to converge."""

    def __init__(self, iterations: int, residual: float):
        super().__init__(
            f"projection did not converge after {iterations} iterations "
            f"(residual {residual:.3e})"
        )
        self.iterations = iterations
        self.residual = residual


def _vector(x, what: str = "vector") -> np.ndarray:
    v = np.asarray(x, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise GeometryError(f"{what} must be a nonempty 1-D vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise GeometryError(f"{what} must be finite")
    return v


class SetDef:
    """Base class for unsafe-set definitions."""

    kind: str = "abstract"
    dim: int = 0

    def contains(self, point) -> bool:
        """True iff the point lies in the closed set."""
        raise NotImplementedError

    def distance(self, point) -> float:
        """Euclidean distance from the point to the set (0 if inside)."""
        raise NotImplementedError

    def moved_to(self, reference) -> "SetDef":
        """Translate the set so its reference point sits at `reference`."""
        raise NotImplementedError

    def payload(self):
        """Serializable definition payload (see module docstring)."""
        raise NotImplementedError

    def _check_point(self, point) -> np.ndarray:
        p = _vector(point, "point")
        if p.shape[0] != self.dim:
            raise DimensionMismatch(self.dim, p.shape[0])
        return p


class PointSet(SetDef):
    """A single unsafe point. Its reference point is itself."""

    kind = "point"

    def __init__(self, coords):
        self.coords = _vector(coords, "point coordinates")
        self.dim = self.coords.shape[0]

    def contains(self, point) -> bool:
        p = self._check_point(point)
        return bool(np.all(p == self.coords))

    def distance(self, point) -> float:
        p = self._check_point(point)
        return float(np.linalg.norm(p - self.coords))

    def moved_to(self, reference) -> "PointSet":
        ref = _vector(reference, "reference")
        if ref.shape[0] != self.dim:
            raise DimensionMismatch(self.dim, ref.shape[0])
        return PointSet(ref)

    def payload(self):
        return [float(c) for c in self.coords]

    def __repr__(self):
        return f"PointSet({self.coords.tolist()})"


class Ball(SetDef):
    """Closed Euclidean ball. Its reference point is the center."""

    kind = "ball"

    def __init__(self, center, radius):
        self.center = _vector(center, "ball center")
        self.radius = float(radius)
        if self.radius < 0:
            raise GeometryError(f"ball radius must be >= 0, got {self.radius}")
        self.dim = self.center.shape[0]

    def contains(self, point) -> bool:
        p = self._check_point(point)
        return bool(np.linalg.norm(p - self.center) <= self.radius)

    def distance(self, point) -> float:
        p = self._check_point(point)
        return max(0.0, float(np.linalg.norm(p - self.center)) - self.radius)

    def moved_to(self, reference) -> "Ball":
        ref = _vector(reference, "reference")
        if ref.shape[0] != self.dim:
            raise DimensionMismatch(self.dim, ref.shape[0])
        return Ball(ref, self.radius)

    def payload(self):
        return [[float(c) for c in self.center], self.radius]

    def __repr__(self):
        return f"Ball(center={self.center.tolist()}, radius={self.radius})"


class Hyperrectangle(SetDef):
    """Axis-aligned box given by its lower and upper corners.

    Its reference point is the midpoint, so translation preserves the
    per-axis widths.
    """

    kind = "hyperrectangle"

    def __init__(self, lower, upper):
        self.lower = _vector(lower, "lower corner")
        self.upper = _vector(upper, "upper corner")
        if self.lower.shape != self.upper.shape:
            raise DimensionMismatch(self.lower.shape[0], self.upper.shape[0])
        if np.any(self.lower > self.upper):
            raise GeometryError(
                f"lower corner must not exceed upper corner: "
                f"{self.lower.tolist()} vs {self.upper.tolist()}"
            )
        self.dim = self.lower.shape[0]

    def contains(self, point) -> bool:
        p = self._check_point(point)
        return bool(np.all(p >= self.lower) and np.all(p <= self.upper))

    def distance(self, point) -> float:
        p = self._check_point(point)
        return float(np.linalg.norm(p - np.clip(p, self.lower, self.upper)))

    def moved_to(self, reference) -> "Hyperrectangle":
        ref = _vector(reference, "reference")
        if ref.shape[0] != self.dim:
            raise DimensionMismatch(self.dim, ref.shape[0])
        half = (self.upper - self.lower) / 2.0
        return Hyperrectangle(ref - half, ref + half)

    def payload(self):
        return [[float(c) for c in self.lower], [float(c) for c in self.upper]]

    def __repr__(self):
        return f"Hyperrectangle({self.lower.tolist()}, {self.upper.tolist()})"


class Polytope(SetDef):
    """Convex polytope {x : Ax <= b} in half-space form.

    The base definition is interpreted in the anchor frame: translating by t
    maps b to b + A t. Nonemptiness is checked at construction with a linear
    feasibility program.

    Projection is exact for small instances (active-set enumeration over
    constraint subsets, verified through the KKT conditions); larger ones
    fall back to Dykstra's alternating projections.
    """

    kind = "polytope"

    def __init__(self, A, b, check_feasible: bool = True):
        self.A = np.asarray(A, dtype=float)
        if self.A.ndim != 2 or self.A.shape[0] < 1 or self.A.shape[1] < 1:
            raise GeometryError(
                f"constraint matrix must be 2-D with >= 1 row, got shape {self.A.shape}"
            )
        self.b = _vector(b, "offset vector")
        if self.b.shape[0] != self.A.shape[0]:
            raise GeometryError(
                f"constraint matrix has {self.A.shape[0]} rows "
                f"but offset vector has length {self.b.shape[0]}"
            )
        if not np.all(np.isfinite(self.A)):
            raise GeometryError("constraint matrix must be finite")
        self.dim = self.A.shape[1]
        self._row_sq = np.einsum("ij,ij->i", self.A, self.A)
        if check_feasible and not self._feasible():
            raise GeometryError("polytope is empty: Ax <= b has no solution")

    def _feasible(self) -> bool:
        res = linprog(
            c=np.zeros(self.dim),
            A_ub=self.A,
            b_ub=self.b,
            bounds=[(None, None)] * self.dim,
            method="highs",
        )
        return res.status == 0

    def contains(self, point) -> bool:
        p = self._check_point(point)
        return bool(np.all(self.A @ p <= self.b))

    def project(self, point) -> np.ndarray:
        """Nearest point of the polytope to `point`."""
        p = self._check_point(point)
        if self.contains(p):
            return p.copy()
        if self._enumerable():
            x = self._project_active_set(p)
            if x is not None:
                return x
        return self._project_dykstra(p)

    def _enumerable(self) -> bool:
        m, n = self.A.shape
        total = 0
        for size in range(1, min(m, n) + 1):
            total += math.comb(m, size)
            if total > 5000:
                return False
        return True

    def _project_active_set(self, p: np.ndarray) -> np.ndarray | None:
        """Exact projection: the optimum activates <= dim independent
        constraints, so try every subset and keep the KKT-consistent one."""
        A, b = self.A, self.b
        m, n = A.shape
        feas_tol = 1e-9 * (1.0 + float(np.max(np.abs(b))))
        for size in range(1, min(m, n) + 1):
            for subset in itertools.combinations(range(m), size):
                rows = A[list(subset)]
                gram = rows @ rows.T
                rhs = rows @ p - b[list(subset)]
                try:
                    lam = np.linalg.solve(gram, rhs)
                except np.linalg.LinAlgError:
                    continue
                if np.any(lam < -1e-12):
                    continue
                x = p - rows.T @ lam
                if np.all(A @ x <= b + feas_tol):
                    return x
        return None

    def _project_dykstra(self, p: np.ndarray) -> np.ndarray:
        m = self.A.shape[0]
        x = p.copy()
        corrections = np.zeros((m, self.dim))
        residual = np.inf
        for _ in range(PROJECTION_MAX_ITER):
            x_prev = x.copy()
            for i in range(m):
                if self._row_sq[i] == 0.0:
                    continue
                z = x + corrections[i]
                viol = float(self.A[i] @ z - self.b[i])
                if viol > 0.0:
                    x = z - (viol / self._row_sq[i]) * self.A[i]
                else:
                    x = z
                corrections[i] = z - x
            move = float(np.linalg.norm(x - x_prev))
            feas = float(max(0.0, np.max(self.A @ x - self.b)))
            residual = max(move, feas)
            if residual <= PROJECTION_TOL:
                return x
        raise ProjectionError(PROJECTION_MAX_ITER, residual)

    def distance(self, point) -> float:
        p = self._check_point(point)
        if self.contains(p):
            return 0.0
        return float(np.linalg.norm(p - self.project(p)))

    def moved_to(self, reference) -> "Polytope":
        ref = _vector(reference, "reference")
        if ref.shape[0] != self.dim:
            raise DimensionMismatch(self.dim, ref.shape[0])
        # Translation of a nonempty polytope stays nonempty; skip the LP.
        return Polytope(self.A, self.b + self.A @ ref, check_feasible=False)

    def payload(self):
        return [
            [[float(c) for c in row] for row in self.A],
            [float(c) for c in self.b],
        ]

    def __repr__(self):
        return f"Polytope(A={self.A.tolist()}, b={self.b.tolist()})"


class RelativeSetSpec:
    """An unsafe set anchored to a moving agent.

    The base set is re-resolved every step so its reference point sits at
    `anchor position + offset`.
    """

    def __init__(self, set_id: str, base: SetDef, offset, anchor_id: str):
        if not set_id:
            raise GeometryError("set id must be nonempty")
        if not anchor_id:
            raise GeometryError("anchor agent id must be nonempty")
        if not isinstance(base, SetDef):
            raise GeometryError(f"base must be a SetDef, got {type(base).__name__}")
        self.set_id = set_id
        self.base = base
        self.offset = _vector(offset, "offset")
        if self.offset.shape[0] != base.dim:
            raise DimensionMismatch(base.dim, self.offset.shape[0])
        self.anchor_id = anchor_id

    def __repr__(self):
        return (
            f"RelativeSetSpec({self.set_id!r}, {self.base!r}, "
            f"offset={self.offset.tolist()}, anchor={self.anchor_id!r})"
        )


def contains(set_def: SetDef, point) -> bool:
    return set_def.contains(point)


def distance(set_def: SetDef, point) -> float:
    return set_def.distance(point)


def update_relative(spec: RelativeSetSpec, anchor_position) -> SetDef:
    """Resolve a relative set against the anchor's current position."""
    pos = _vector(anchor_position, "anchor position")
    if pos.shape[0] != spec.offset.shape[0]:
        raise DimensionMismatch(spec.offset.shape[0], pos.shape[0])
    return spec.base.moved_to(pos + spec.offset)


def set_from_payload(kind: str, payload) -> SetDef:
    """Rebuild a SetDef from its wire payload."""
    try:
        if kind == "point":
            return PointSet(payload)
        if kind == "ball":
            center, radius = payload
            return Ball(center, radius)
        if kind == "hyperrectangle":
            lower, upper = payload
            return Hyperrectangle(lower, upper)
        if kind == "polytope":
            A, b = payload
            # Payloads come from already-validated sets; skip the LP.
            return Polytope(A, b, check_feasible=False)
    except GeometryError:
        raise
    except (TypeError, ValueError) as exc:
        raise GeometryError(f"malformed {kind} payload: {exc}") from exc
    raise GeometryError(
        f"unknown set type {kind!r}; expected one of {', '.join(SET_KINDS)}"
    )


def box_distance(set_def: SetDef, lower, upper) -> float:
    """Euclidean distance between a set and an axis-aligned box.

    Zero means the two intersect. Closed forms exist for point, ball, and
    hyperrectangle; for polytopes the minimum-distance pair is found by
    alternating clamped projections between the two convex bodies.
    """
    lo = _vector(lower, "box lower corner")
    hi = _vector(upper, "box upper corner")
    if lo.shape[0] != set_def.dim or hi.shape[0] != set_def.dim:
        raise DimensionMismatch(set_def.dim, lo.shape[0])
    if np.any(lo > hi):
        raise GeometryError("box lower corner must not exceed upper corner")

    if isinstance(set_def, PointSet):
        c = set_def.coords
        return float(np.linalg.norm(c - np.clip(c, lo, hi)))
    if isinstance(set_def, Ball):
        gap = float(np.linalg.norm(set_def.center - np.clip(set_def.center, lo, hi)))
        return max(0.0, gap - set_def.radius)
    if isinstance(set_def, Hyperrectangle):
        gaps = np.maximum(0.0, np.maximum(set_def.lower - hi, lo - set_def.upper))
        return float(np.linalg.norm(gaps))
    if isinstance(set_def, Polytope):
        x = np.clip((lo + hi) / 2.0, lo, hi)
        dist = np.inf
        for _ in range(PROJECTION_MAX_ITER):
            y = set_def.project(x)
            x_next = np.clip(y, lo, hi)
            dist = float(np.linalg.norm(y - x_next))
            if np.linalg.norm(x_next - x) <= 1e-12 * (1.0 + np.linalg.norm(x_next)):
                return dist
            x = x_next
        raise ProjectionError(PROJECTION_MAX_ITER, dist)
    raise GeometryError(f"unsupported set type {type(set_def).__name__}")


def box_intersects(set_def: SetDef, lower, upper) -> bool:
    """Whether a set touches an axis-aligned box.

    Exact for the closed-form set types; for polytopes the iterative
    residual threshold 1e-9 decides.
    """
    d = box_distance(set_def, lower, upper)
    if isinstance(set_def, Polytope):
        return d <= 1e-9
    return d == 0.0
