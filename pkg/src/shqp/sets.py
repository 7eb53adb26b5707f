"""Projection oracles for closed sets, plus samplers for set regularity.

Every set is represented by a :class:`SetOracle` that can project an ambient
point and report a membership residual.  Convexity and manifold structure are
carried as flags: manifold oracles admit both signs of a normal, and convex
oracles admit tight supporting halfspaces.

Set-valued projections are resolved deterministically: when several nearest
points exist, the lexicographically smallest one is returned.
"""

from __future__ import annotations

import dataclasses
from typing import Callable, Sequence

import numpy as np

from . import polyhedra

__all__ = [
    "SetOracle",
    "HalfspaceSet",
    "HyperplaneSet",
    "AffineSubspace",
    "Ball",
    "Box",
    "Sphere",
    "LevelSet",
    "ManifoldCurve",
    "FixedRankSet",
    "PointSet",
    "UnionOfConvex",
    "PolyhedralSet",
    "IntersectionSet",
    "NormalSample",
    "project",
    "normal_at",
    "check_super_regular",
    "check_sosh",
    "DimensionMismatchError",
    "ProjectionNotConvergedError",
    "DegenerateNormalError",
    "InsufficientSamplesError",
]

# Membership tolerances: sets with closed-form projections are held to the
# tighter one, sets projected by an inner iteration to the looser one.
MEMBERSHIP_TOL_ANALYTIC = 1e-10
MEMBERSHIP_TOL_ITERATIVE = 1e-8


class DimensionMismatchError(ValueError):
    """Point dimension does not match the oracle's ambient dimension."""


class ProjectionNotConvergedError(RuntimeError):
    """An iterative projection failed to reach its residual tolerance.

    Carries the last iterate so callers can inspect how far it got.
    """

    def __init__(self, message: str, last_iterate: np.ndarray):
        super().__init__(message)
        self.last_iterate = last_iterate


class DegenerateNormalError(ValueError):
    """normal_at was asked for a normal from coincident base and hint."""


class InsufficientSamplesError(RuntimeError):
    """A sampler could not collect enough admissible samples."""


def _as_point(x, dimension: int | None = None) -> np.ndarray:
    p = np.asarray(x, dtype=float)
    if p.ndim != 1:
        raise ValueError(f"expected a 1-d point, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise ValueError("point has non-finite entries")
    if dimension is not None and p.shape[0] != dimension:
        raise DimensionMismatchError(
            f"point has dimension {p.shape[0]}, oracle expects {dimension}"
        )
    return p


def _lex_smallest(candidates: Sequence[np.ndarray]) -> np.ndarray:
    best = candidates[0]
    for c in candidates[1:]:
        for a, b in zip(c, best):
            if a < b:
                best = c
                break
            if a > b:
                break
    return best


class SetOracle:
    """Base class: a closed set with a projection and a membership residual."""

    kind = "abstract"
    is_convex = False
    is_manifold = False
    iterative = False

    def __init__(self, dimension: int):
        self.dimension = int(dimension)

    @property
    def membership_tol(self) -> float:
        return MEMBERSHIP_TOL_ITERATIVE if self.iterative else MEMBERSHIP_TOL_ANALYTIC

    def _project(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def membership_residual(self, x) -> float:
        """How far x is from satisfying the set's defining conditions."""
        p = _as_point(x, self.dimension)
        return float(np.linalg.norm(p - self._project(p)))

    def analytic_normal(self, x: np.ndarray) -> np.ndarray | None:
        """Unit normal at a boundary point, when a closed form exists."""
        return None

    def contains(self, x) -> bool:
        return self.membership_residual(x) <= self.membership_tol

    def __repr__(self):  # pragma: no cover - debugging aid
        return f"<{type(self).__name__} kind={self.kind} n={self.dimension}>"


class HalfspaceSet(SetOracle):
    """{x : <a, x> <= b}."""

    kind = "halfspace"
    is_convex = True

    def __init__(self, normal, offset: float):
        a = _as_point(normal)
        if np.linalg.norm(a) <= 1e-14:
            raise ValueError("halfspace normal must be nonzero")
        super().__init__(a.shape[0])
        self.normal = a
        self.offset = float(offset)

    def _project(self, x):
        s = (self.normal @ x - self.offset) / (self.normal @ self.normal)
        if s <= 0.0:
            return x.copy()
        return x - s * self.normal

    def membership_residual(self, x):
        p = _as_point(x, self.dimension)
        return max(0.0, (self.normal @ p - self.offset)) / np.linalg.norm(self.normal)

    def analytic_normal(self, x):
        return self.normal / np.linalg.norm(self.normal)


class HyperplaneSet(SetOracle):
    """{x : <a, x> = b}; a manifold, and convex."""

    kind = "hyperplane"
    is_convex = True
    is_manifold = True

    def __init__(self, normal, offset: float):
        a = _as_point(normal)
        if np.linalg.norm(a) <= 1e-14:
            raise ValueError("hyperplane normal must be nonzero")
        super().__init__(a.shape[0])
        self.normal = a
        self.offset = float(offset)

    def _project(self, x):
        s = (self.normal @ x - self.offset) / (self.normal @ self.normal)
        return x - s * self.normal

    def membership_residual(self, x):
        p = _as_point(x, self.dimension)
        return abs(self.normal @ p - self.offset) / np.linalg.norm(self.normal)

    def analytic_normal(self, x):
        return self.normal / np.linalg.norm(self.normal)


class AffineSubspace(SetOracle):
    """point + span(basis rows); a convex manifold of any dimension."""

    kind = "affine-subspace"
    is_convex = True
    is_manifold = True

    def __init__(self, point, basis):
        q = _as_point(point)
        B = np.atleast_2d(np.asarray(basis, dtype=float))
        if B.shape[1] != q.shape[0]:
            raise DimensionMismatchError("basis rows must match point dimension")
        # Orthonormalize once; zero rows are rejected rather than dropped.
        Q, R = np.linalg.qr(B.T)
        rank = int(np.sum(np.abs(np.diag(R)) > 1e-12))
        if rank < B.shape[0]:
            raise ValueError("affine-subspace basis rows are linearly dependent")
        super().__init__(q.shape[0])
        self.point = q
        self.basis = Q[:, :rank].T  # orthonormal rows

    def _project(self, x):
        d = x - self.point
        return self.point + self.basis.T @ (self.basis @ d)

    def analytic_normal(self, x):
        # Only a hyperplane-like subspace has a well-defined normal line.
        if self.dimension - self.basis.shape[0] != 1:
            return None
        u = np.eye(self.dimension) - self.basis.T @ self.basis
        # Any nonzero column of the complement projector spans the normal.
        col = u[:, int(np.argmax(np.linalg.norm(u, axis=0)))]
        return col / np.linalg.norm(col)


class Ball(SetOracle):
    """Closed Euclidean ball {x : ||x - c|| <= r}."""

    kind = "ball"
    is_convex = True

    def __init__(self, center, radius: float):
        c = _as_point(center)
        if radius <= 0:
            raise ValueError("ball radius must be positive")
        super().__init__(c.shape[0])
        self.center = c
        self.radius = float(radius)

    def _project(self, x):
        v = x - self.center
        nv = np.linalg.norm(v)
        if nv <= self.radius:
            return x.copy()
        return self.center + (self.radius / nv) * v

    def membership_residual(self, x):
        p = _as_point(x, self.dimension)
        return max(0.0, np.linalg.norm(p - self.center) - self.radius)


class Box(SetOracle):
    """Axis-aligned box {x : lower <= x <= upper}."""

    kind = "box"
    is_convex = True

    def __init__(self, lower, upper):
        lo = _as_point(lower)
        hi = _as_point(upper, lo.shape[0])
        if np.any(lo > hi):
            raise ValueError("box lower bound exceeds upper bound")
        super().__init__(lo.shape[0])
        self.lower = lo
        self.upper = hi

    def _project(self, x):
        return np.clip(x, self.lower, self.upper)


class Sphere(SetOracle):
    """{x : ||x - c|| = r}; nonconvex manifold.

    Projecting the center is set-valued; the lexicographically smallest
    sphere point, c - r*e1, is returned.
    """

    kind = "sphere"
    is_manifold = True

    def __init__(self, center, radius: float):
        c = _as_point(center)
        if radius <= 0:
            raise ValueError("sphere radius must be positive")
        super().__init__(c.shape[0])
        self.center = c
        self.radius = float(radius)

    def _project(self, x):
        v = x - self.center
        nv = np.linalg.norm(v)
        if nv <= 1e-14:
            out = self.center.copy()
            out[0] -= self.radius
            return out
        return self.center + (self.radius / nv) * v

    def membership_residual(self, x):
        p = _as_point(x, self.dimension)
        return abs(np.linalg.norm(p - self.center) - self.radius)

    def analytic_normal(self, x):
        v = x - self.center
        nv = np.linalg.norm(v)
        if nv <= 1e-14:
            return None
        return v / nv


def _newton_stationarity(f, grad, hess, x, y0, lam0, max_iterations, tol):
    """Newton on y - x + lam * grad f(y) = 0, f(y) = 0 from (y0, lam0).

    Returns the solution or None when the iteration fails to reach ``tol``.
    """
    n = x.shape[0]
    y = np.asarray(y0, dtype=float).copy()
    lam = float(lam0)
    for _ in range(max_iterations):
        g = grad(y)
        residual = np.concatenate([y - x + lam * g, [f(y)]])
        if np.max(np.abs(residual)) <= tol:
            return y
        J = np.zeros((n + 1, n + 1))
        J[:n, :n] = np.eye(n) + lam * hess(y)
        J[:n, n] = g
        J[n, :n] = g
        try:
            step = np.linalg.solve(J, -residual)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(J, -residual, rcond=None)[0]
        # Cap wild steps; keeps the iteration from overshooting on the first
        # few corrections without changing the local quadratic phase.
        cap = 10.0 * (1.0 + np.linalg.norm(x))
        ns = np.linalg.norm(step)
        if ns > cap:
            step *= cap / ns
        y = y + step[:n]
        lam = lam + step[n]
    return None


def _ray_scan_seeds(f, x, max_rays: int = 8):
    """Boundary seeds for the nearest-point Newton: bisected zeros of f
    along a deterministic fan of rays from x."""
    n = x.shape[0]
    rng = np.random.default_rng(0)
    dirs = []
    while len(dirs) < max_rays:
        u = rng.standard_normal(n)
        nu = np.linalg.norm(u)
        if nu > 1e-12:
            dirs.append(u / nu)
    f0 = f(x)
    scale = 1.0 + float(np.linalg.norm(x))
    seeds = []
    for u in dirs:
        t_prev, f_prev = 0.0, f0
        for t in scale * 2.0 ** np.arange(-4.0, 6.0):
            ft = f(x + t * u)
            if (ft > 0.0) != (f_prev > 0.0):
                lo, hi, flo = t_prev, t, f_prev
                for _ in range(60):
                    mid = 0.5 * (lo + hi)
                    fm = f(x + mid * u)
                    if (fm > 0.0) == (flo > 0.0):
                        lo, flo = mid, fm
                    else:
                        hi = mid
                seeds.append(x + 0.5 * (lo + hi) * u)
                break
            t_prev, f_prev = t, ft
    return seeds


def _newton_boundary_projection(
    f: Callable[[np.ndarray], float],
    grad: Callable[[np.ndarray], np.ndarray],
    hess: Callable[[np.ndarray], np.ndarray],
    x: np.ndarray,
    max_iterations: int = 100,
    tol: float = 1e-12,
) -> np.ndarray:
    """Nearest point on {f = 0} by Newton on the stationarity system.

    From y = x, lam = 0 the iteration converges to the closest stationary
    point of the distance whenever x is near the set; far away it may pick
    a non-minimal critical point, so whenever the single-start answer is a
    substantial fraction of ||x|| away the search restarts from boundary
    points found along a fan of rays and keeps the closest polished result.
    Raises ProjectionNotConvergedError when no start converges.
    """
    best = _newton_stationarity(f, grad, hess, x, x, 0.0, max_iterations, tol)
    near_gate = 0.15 * (1.0 + np.linalg.norm(x))
    if best is not None and np.linalg.norm(best - x) <= near_gate:
        return best
    for seed in _ray_scan_seeds(f, x):
        g = grad(seed)
        lam0 = float(g @ (x - seed) / max(g @ g, 1e-30))
        y = _newton_stationarity(f, grad, hess, x, seed, lam0, max_iterations, tol)
        if y is None:
            continue
        if best is None or np.linalg.norm(y - x) < np.linalg.norm(best - x) * (
            1.0 - 1e-12
        ):
            best = y
    if best is None:
        raise ProjectionNotConvergedError(
            f"level-set projection did not reach residual {tol:g} "
            f"in {max_iterations} iterations",
            last_iterate=x,
        )
    return best


class LevelSet(SetOracle):
    """Sublevel set {x : f(x) <= 0} of a smooth function.

    Projection of an outside point solves the nearest-point conditions on
    the boundary {f = 0} by Newton iteration.
    """

    kind = "smooth-level-set"

    def __init__(self, dimension, f, grad, hess, name: str = "", convex: bool = False):
        super().__init__(dimension)
        self.f = f
        self.grad = grad
        self.hess = hess
        self.name = name
        self.is_convex = bool(convex)

    def _project(self, x):
        if self.f(x) <= 0.0:
            return x.copy()
        return _newton_boundary_projection(self.f, self.grad, self.hess, x)

    def membership_residual(self, x):
        p = _as_point(x, self.dimension)
        val = max(0.0, self.f(p))
        gn = np.linalg.norm(self.grad(p))
        return val / max(gn, 1.0)

    def analytic_normal(self, x):
        g = self.grad(x)
        ng = np.linalg.norm(g)
        if ng <= 1e-14:
            return None
        return g / ng


class ManifoldCurve(SetOracle):
    """Zero set {x : f(x) = 0} of a smooth scalar function; a manifold."""

    kind = "smooth-manifold"
    is_manifold = True

    def __init__(self, dimension, f, grad, hess, name: str = ""):
        super().__init__(dimension)
        self.f = f
        self.grad = grad
        self.hess = hess
        self.name = name

    def _project(self, x):
        return _newton_boundary_projection(self.f, self.grad, self.hess, x)

    def membership_residual(self, x):
        p = _as_point(x, self.dimension)
        gn = np.linalg.norm(self.grad(p))
        return abs(self.f(p)) / max(gn, 1.0)

    def analytic_normal(self, x):
        g = self.grad(x)
        ng = np.linalg.norm(g)
        if ng <= 1e-14:
            return None
        return g / ng


class FixedRankSet(SetOracle):
    """Matrices (flattened row-major) with rank at most ``rank``.

    Projection is the truncated singular value decomposition.  Near a point
    of exact rank r this set is a smooth manifold, which is how the solvers
    treat it.
    """

    kind = "fixed-rank-matrix-set"
    is_manifold = True

    def __init__(self, rows: int, cols: int, rank: int):
        if rank < 1 or rank > min(rows, cols):
            raise ValueError("rank must be between 1 and min(rows, cols)")
        super().__init__(rows * cols)
        self.rows = int(rows)
        self.cols = int(cols)
        self.rank = int(rank)

    def _project(self, x):
        M = x.reshape(self.rows, self.cols)
        U, s, Vt = np.linalg.svd(M, full_matrices=False)
        r = self.rank
        return ((U[:, :r] * s[:r]) @ Vt[:r]).reshape(-1)

    def membership_residual(self, x):
        p = _as_point(x, self.dimension)
        s = np.linalg.svd(p.reshape(self.rows, self.cols), compute_uv=False)
        return float(np.linalg.norm(s[self.rank:]))


class PointSet(SetOracle):
    """A finite set of points; ties go to the lexicographically smallest."""

    kind = "point-set"

    def __init__(self, points):
        P = np.atleast_2d(np.asarray(points, dtype=float))
        if P.shape[0] < 1:
            raise ValueError("point-set needs at least one point")
        super().__init__(P.shape[1])
        self.points = P
        self.is_convex = P.shape[0] == 1

    def _project(self, x):
        d = np.linalg.norm(self.points - x, axis=1)
        dmin = d.min()
        ties = [self.points[i] for i in range(len(d)) if d[i] <= dmin + 1e-12]
        return _lex_smallest(ties).copy()

    def membership_residual(self, x):
        p = _as_point(x, self.dimension)
        return float(np.linalg.norm(self.points - p, axis=1).min())


class UnionOfConvex(SetOracle):
    """Finite union of convex oracles; projection picks the nearest member."""

    kind = "finite-union-of-convex"

    def __init__(self, members: Sequence[SetOracle]):
        members = list(members)
        if not members:
            raise ValueError("union needs at least one member")
        dim = members[0].dimension
        for mem in members:
            if not mem.is_convex:
                raise ValueError("union members must be convex oracles")
            if mem.dimension != dim:
                raise DimensionMismatchError("union members disagree on dimension")
        super().__init__(dim)
        self.members = members
        self.is_convex = len(members) == 1

    def _project(self, x):
        candidates = []
        dists = []
        for mem in self.members:
            y, _ = project(mem, x)
            candidates.append(y)
            dists.append(np.linalg.norm(x - y))
        dmin = min(dists)
        ties = [c for c, d in zip(candidates, dists) if d <= dmin + 1e-12]
        return _lex_smallest(ties).copy()

    def membership_residual(self, x):
        p = _as_point(x, self.dimension)
        return min(mem.membership_residual(p) for mem in self.members)


class PolyhedralSet(SetOracle):
    """Intersection of finitely many halfspaces, projected by the QP engine."""

    kind = "polyhedron"
    is_convex = True

    def __init__(self, halfspaces: Sequence[polyhedra.Halfspace]):
        hs = list(halfspaces)
        if not hs:
            raise ValueError("polyhedron set needs at least one halfspace")
        dim = hs[0].normal.shape[0]
        super().__init__(dim)
        self.halfspaces = hs
        self._poly = polyhedra.Polyhedron(hs)

    def _project(self, x):
        res = polyhedra.project_onto_polyhedron(self._poly, x)
        if res.status != "optimal":
            raise ProjectionNotConvergedError(
                "polyhedral set projection failed: " + res.status, x
            )
        return res.point

    def membership_residual(self, x):
        p = _as_point(x, self.dimension)
        worst = 0.0
        for h in self.halfspaces:
            nn = np.linalg.norm(h.normal)
            if h.kind == "equality":
                worst = max(worst, abs(h.normal @ p - h.offset) / nn)
            else:
                worst = max(worst, max(0.0, h.normal @ p - h.offset) / nn)
        return worst


class IntersectionSet(SetOracle):
    """Intersection of member oracles, projected by cyclic refinement.

    The refinement is a local projection oracle, not an exact nearest-point
    map: starting from x it alternates member projections until every
    membership residual is below 1e-12 or the movement stalls.  Good enough
    for distance estimates d(x, K) and for sampling normals of K near a
    reference point.
    """

    kind = "intersection"
    iterative = True

    def __init__(self, members: Sequence[SetOracle], max_sweeps: int = 20000):
        members = list(members)
        if not members:
            raise ValueError("intersection needs at least one member")
        dim = members[0].dimension
        for mem in members:
            if mem.dimension != dim:
                raise DimensionMismatchError("members disagree on dimension")
        super().__init__(dim)
        self.members = members
        self.max_sweeps = int(max_sweeps)

    def _project(self, x):
        y = x.copy()
        for _ in range(self.max_sweeps):
            moved = 0.0
            for mem in self.members:
                y2, _ = project(mem, y)
                moved = max(moved, float(np.linalg.norm(y2 - y)))
                y = y2
            if max(mem.membership_residual(y) for mem in self.members) <= 1e-12:
                return y
            if moved <= 1e-15:
                break
        if max(mem.membership_residual(y) for mem in self.members) <= self.membership_tol:
            return y
        raise ProjectionNotConvergedError(
            "intersection refinement stalled before reaching membership", y
        )

    def membership_residual(self, x):
        p = _as_point(x, self.dimension)
        return max(mem.membership_residual(p) for mem in self.members)


def project(oracle: SetOracle, x) -> tuple[np.ndarray, float]:
    """Project ``x`` onto the set.

    Returns ``(nearest, distance)``.  The nearest point satisfies the
    oracle's membership residual at its tolerance class, and ties are broken
    lexicographically by the individual oracles.
    """
    p = _as_point(x, oracle.dimension)
    nearest = oracle._project(p)
    return nearest, float(np.linalg.norm(p - nearest))


@dataclasses.dataclass(frozen=True)
class NormalSample:
    """A unit normal ``direction`` to a set at ``base``."""

    base: np.ndarray
    direction: np.ndarray
    provenance: str  # "projection-residual" | "analytic-gradient"


def normal_at(oracle: SetOracle, base, hint) -> NormalSample:
    """Unit normal to the set at ``base``, oriented toward ``hint``.

    Uses the analytic gradient when the oracle has one (sign chosen toward
    ``hint`` for manifolds), otherwise the projection residual of ``hint``,
    which requires ``base`` to be the projection of ``hint``.
    """
    b = _as_point(base, oracle.dimension)
    h = _as_point(hint, oracle.dimension)
    gap = h - b
    ngap = np.linalg.norm(gap)
    if ngap <= 1e-14:
        raise DegenerateNormalError("hint coincides with base")
    if oracle.membership_residual(b) > oracle.membership_tol:
        raise ValueError("base point is not a member of the set")

    g = oracle.analytic_normal(b)
    if g is not None:
        direction = g / np.linalg.norm(g)
        if oracle.is_manifold and direction @ gap < 0:
            direction = -direction
        return NormalSample(base=b, direction=direction, provenance="analytic-gradient")

    nearest, dist = project(oracle, h)
    if np.linalg.norm(nearest - b) > 10 * oracle.membership_tol * (1 + np.linalg.norm(b)):
        raise ValueError(
            "no analytic normal and base is not the projection of hint; "
            "cannot certify a normal direction"
        )
    if dist <= 1e-14:
        raise DegenerateNormalError("hint lies on the set; residual normal undefined")
    direction = (h - nearest) / dist
    return NormalSample(base=b, direction=direction, provenance="projection-residual")


def _uniform_ball(rng: np.random.Generator, n: int) -> np.ndarray:
    g = rng.standard_normal(n)
    g /= np.linalg.norm(g)
    return g * rng.uniform() ** (1.0 / n)


def check_super_regular(
    oracle: SetOracle,
    center,
    delta: float,
    radius: float,
    sample_count: int = 400,
    rng_seed: int = 0,
) -> tuple[bool, float]:
    """Sample-test the inequality <z - y, v> <= delta ||z - y|| ||v||.

    Pairs (z, y) are set members inside the ball B(center, radius), and v is
    a unit proximal normal at y obtained from the projection residual of the
    ambient sample that produced y (both signs for manifolds).  Returns
    ``(holds, worst_ratio)`` where worst_ratio is the largest sampled value
    of <z - y, v> / ||z - y||.
    """
    c = _as_point(center, oracle.dimension)
    if oracle.membership_residual(c) > oracle.membership_tol:
        raise ValueError("center must be a member of the set")
    rng = np.random.default_rng(rng_seed)
    n = oracle.dimension

    members = [c]
    normals: list[tuple[np.ndarray, np.ndarray]] = []
    for _ in range(sample_count):
        w = c + radius * _uniform_ball(rng, n)
        try:
            y, gap = project(oracle, w)
        except ProjectionNotConvergedError:
            continue
        if np.linalg.norm(y - c) > radius:
            continue
        members.append(y)
        if gap > 1e-12:
            v = (w - y) / gap
            normals.append((y, v))
            if oracle.is_manifold:
                normals.append((y, -v))

    distinct = {tuple(np.round(m, 12)) for m in members}
    if len(distinct) < 2 or not normals:
        raise InsufficientSamplesError(
            "could not sample two distinct members plus a normal in the ball"
        )

    M = np.array(members)
    worst = -np.inf
    for y, v in normals:
        diff = M - y
        nd = np.linalg.norm(diff, axis=1)
        # Pairs much closer than the probe scale measure projection roundoff,
        # not geometry: the quotient's numerator carries the projectors'
        # absolute error, so tiny denominators amplify it arbitrarily.
        keep = nd > 1e-9
        if not np.any(keep):
            continue
        ratios = (diff[keep] @ v) / nd[keep]
        worst = max(worst, float(ratios.max()))
    if not np.isfinite(worst):
        raise InsufficientSamplesError("no usable member/normal pairs")
    return (worst <= delta + 1e-9, worst)


def check_sosh(
    oracle: SetOracle,
    xbar,
    bound: float,
    radius: float,
    sample_count: int = 400,
    rng_seed: int = 0,
) -> tuple[bool, float]:
    """Sample-test the second-order inequality <v, x - xbar> <= M ||x - xbar||^2.

    x runs over sampled set members in B(xbar, radius) \\ {xbar} and v over
    unit projection-residual normals at x (both signs for manifolds).
    Returns ``(holds, worst_m)`` with worst_m the largest sampled quotient
    <v, x - xbar> / ||x - xbar||^2.
    """
    xb = _as_point(xbar, oracle.dimension)
    if oracle.membership_residual(xb) > oracle.membership_tol:
        raise ValueError("xbar must be a member of the set")
    rng = np.random.default_rng(rng_seed)
    n = oracle.dimension

    worst = -np.inf
    used = 0
    for _ in range(sample_count):
        w = xb + radius * _uniform_ball(rng, n)
        try:
            y, gap = project(oracle, w)
        except ProjectionNotConvergedError:
            continue
        r = np.linalg.norm(y - xb)
        if gap <= 1e-12 or r > radius or r <= 1e-9:
            continue
        v = (w - y) / gap
        quotients = [(v @ (y - xb)) / r**2]
        if oracle.is_manifold:
            quotients.append((-v @ (y - xb)) / r**2)
        worst = max(worst, max(quotients))
        used += 1
    if used == 0:
        raise InsufficientSamplesError("no boundary samples with normals in the ball")
    return (worst <= bound + 1e-9, float(worst))
