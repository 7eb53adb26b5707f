"""Halfspaces, polyhedral projection by an active-set QP, and normal-bundle
conditioning.

The projection solver minimizes ||x - x0||^2 over an intersection of
inequality and equality constraints.  Equalities are eliminated first by an
orthogonal reduction, the remaining inequality problem is solved by a dual
active-set iteration on the QR of the active normals, and infeasible systems
are certified with a Farkas vector (a phase-1 LP supplies the certificate
when no cheap pairwise conflict explains the emptiness).
"""

from __future__ import annotations

import dataclasses
import itertools
import math

import numpy as np
import scipy.optimize

__all__ = [
    "Halfspace",
    "Polyhedron",
    "QPResult",
    "project_onto_polyhedron",
    "halfspace_from_projection",
    "relaxed_point",
    "derived_halfspace",
    "eta",
    "ZeroGapError",
    "NoSeparationError",
    "InfeasiblePolyhedronError",
]


class ZeroGapError(ValueError):
    """halfspace_from_projection called with coincident point and projection."""


class NoSeparationError(ValueError):
    """derived_halfspace called with a point already inside the polyhedron."""


class InfeasiblePolyhedronError(RuntimeError):
    """An operation required a nonempty polyhedron but got an empty one."""

    def __init__(self, message, certificate=None):
        super().__init__(message)
        self.certificate = certificate


@dataclasses.dataclass(frozen=True, eq=False)
class Halfspace:
    """One linear constraint <normal, x> <= offset (or = offset).

    The optional tags record which projection created the constraint:
    ``source_set`` is the index of the set that was projected onto,
    ``outer_iteration`` / ``inner_step`` locate the step in the solver run.
    """

    normal: np.ndarray
    offset: float
    kind: str = "inequality"
    source_set: int | None = None
    outer_iteration: int | None = None
    inner_step: int | None = None

    def __post_init__(self):
        a = np.asarray(self.normal, dtype=float)
        if a.ndim != 1 or np.linalg.norm(a) <= 1e-14:
            raise ValueError("halfspace normal must be a nonzero vector")
        object.__setattr__(self, "normal", a)
        object.__setattr__(self, "offset", float(self.offset))
        if self.kind not in ("inequality", "equality"):
            raise ValueError(f"unknown constraint kind {self.kind!r}")

    def violation(self, x) -> float:
        """Signed violation at x, normalized by ||normal||."""
        s = (self.normal @ np.asarray(x, dtype=float) - self.offset) / np.linalg.norm(
            self.normal
        )
        return abs(s) if self.kind == "equality" else max(0.0, s)


class Polyhedron:
    """Ordered intersection of halfspaces.

    Construction rejects two constraints carrying the same
    (source_set, outer_iteration) tag pair: within one outer iteration each
    set may contribute at most one constraint to a QP.  Constraints from
    different outer iterations may share a source set.
    """

    def __init__(self, constraints):
        cons = list(constraints)
        if not cons:
            raise ValueError("polyhedron needs at least one constraint")
        dim = cons[0].normal.shape[0]
        seen: set[tuple[int, int]] = set()
        for c in cons:
            if c.normal.shape[0] != dim:
                raise ValueError("constraints disagree on dimension")
            if c.source_set is not None and c.outer_iteration is not None:
                key = (c.source_set, c.outer_iteration)
                if key in seen:
                    raise ValueError(
                        "two constraints from source set "
                        f"{c.source_set} in outer iteration {c.outer_iteration}"
                    )
                seen.add(key)
        self.constraints = cons
        self.dimension = dim

    def __len__(self):
        return len(self.constraints)

    def __iter__(self):
        return iter(self.constraints)

    def drop_first(self) -> "Polyhedron":
        if len(self.constraints) < 2:
            raise ValueError("cannot drop the only constraint")
        return Polyhedron(self.constraints[1:])


@dataclasses.dataclass
class QPResult:
    """Outcome of a polyhedral projection.

    ``multipliers`` is aligned with the polyhedron's constraint list
    (nonnegative on inequalities, free sign on equalities, zero on inactive
    rows).  On ``status == "infeasible"`` the point is the query point and
    ``certificate`` holds a Farkas vector lam with
    sum(lam_k * a_k) = 0, sum(lam_k * b_k) < 0, lam >= 0 on inequalities.
    """

    point: np.ndarray
    status: str
    active_set: tuple[int, ...]
    multipliers: np.ndarray
    kkt_residual: float
    certificate: np.ndarray | None = None


def _pairwise_reduction(A, b, is_eq, scale):
    """Drop parallel nested constraints; detect parallel conflicts.

    Returns (keep_indices, certificate_or_None).  Directions are compared
    after normalization, so "parallel" means unit normals within 1e-10.
    """
    k = A.shape[0]
    norms = np.linalg.norm(A, axis=1)
    Ah = A / norms[:, None]
    bh = b / norms
    dropped = [False] * k
    for i in range(k):
        if dropped[i]:
            continue
        for j in range(i):
            if dropped[j]:
                continue
            same = np.linalg.norm(Ah[i] - Ah[j]) <= 1e-10
            opp = np.linalg.norm(Ah[i] + Ah[j]) <= 1e-10
            if not (same or opp):
                continue
            # Express constraint i in j's direction.
            bi = bh[i] if same else -bh[i]
            sgn = 1.0 if same else -1.0
            if is_eq[i] and is_eq[j]:
                if abs(bi - bh[j]) <= 1e-9 * scale:
                    dropped[i] = True
                else:
                    cert = np.zeros(k)
                    s = -np.sign(bh[j] - bi)
                    cert[j] = s / norms[j]
                    cert[i] = -s * sgn / norms[i]
                    return None, cert
            elif is_eq[i] or is_eq[j]:
                # Orient everything along j's unit normal: sigma_x = +1 when
                # constraint x points that way.  The equality forces the
                # value t; the inequality reads sigma_q * <dir, x> <= bh[q].
                e, q = (i, j) if is_eq[i] else (j, i)
                sigma = {j: 1.0, i: 1.0 if same else -1.0}
                t = sigma[e] * bh[e]
                if sigma[q] * t <= bh[q] + 1e-9 * scale:
                    dropped[q] = True
                else:
                    cert = np.zeros(k)
                    cert[q] = 1.0 / norms[q]
                    cert[e] = -sigma[q] * sigma[e] / norms[e]
                    return None, cert
            else:
                if same:
                    if bi <= bh[j]:
                        dropped[j] = True
                    else:
                        dropped[i] = True
                else:
                    # A slab: feasible iff -b_i <= b_j in j's direction.
                    if bh[i] + bh[j] < -1e-9 * scale:
                        cert = np.zeros(k)
                        cert[i] = 1.0 / norms[i]
                        cert[j] = 1.0 / norms[j]
                        return None, cert
            if dropped[i]:
                break
    keep = [i for i in range(k) if not dropped[i]]
    return keep, None


def _verify_certificate(A, b, is_eq, cert, scale) -> bool:
    if cert is None:
        return False
    lam = np.asarray(cert, dtype=float)
    # Normalize so the certificate's size cannot mask roundoff either way.
    weight = float(np.sum(np.abs(lam) * np.linalg.norm(A, axis=1)))
    if weight <= 0.0 or not np.isfinite(weight):
        return False
    lam = lam / weight
    if np.any(lam[~is_eq] < -1e-12):
        return False
    comb = A.T @ lam
    value = b @ lam
    return np.linalg.norm(comb) <= 1e-9 * max(1.0, scale) and value < -1e-12 * scale


def _phase_one_certificate(A, b, is_eq, scale):
    """Minimize the worst violation; return (feasible, certificate).

    Equality rows enter as a pair of soft inequalities so that the LP is
    always solvable; the Farkas certificate comes from the row marginals
    and is verified numerically before use.
    """
    k, n = A.shape
    ineq_idx = np.flatnonzero(~is_eq)
    eq_idx = np.flatnonzero(is_eq)
    ki, ke = ineq_idx.size, eq_idx.size
    # variables (x, t); every row becomes <a, x> - t <= b (both signs for =)
    c = np.zeros(n + 1)
    c[-1] = 1.0
    A_ub = np.vstack(
        [
            np.hstack([A[ineq_idx], -np.ones((ki, 1))]),
            np.hstack([A[eq_idx], -np.ones((ke, 1))]),
            np.hstack([-A[eq_idx], -np.ones((ke, 1))]),
        ]
    )
    b_ub = np.concatenate([b[ineq_idx], b[eq_idx], -b[eq_idx]])
    # t measures the worst violation and only its zero level matters, so it
    # is clamped below at 0: a free t is driven to -inf whenever the
    # polyhedron is strictly feasible and the LP comes back "unbounded".
    bounds = [(None, None)] * n + [(0.0, None)]
    res = scipy.optimize.linprog(c, A_ub=A_ub, b_ub=b_ub, bounds=bounds, method="highs")
    if not res.success:
        raise RuntimeError("phase-1 feasibility LP failed: " + res.message)
    if res.fun <= 1e-9 * scale:
        return True, None
    marg = -np.asarray(res.ineqlin.marginals)
    cert = np.zeros(k)
    cert[ineq_idx] = marg[:ki]
    cert[eq_idx] = marg[ki : ki + ke] - marg[ki + ke :]
    if _verify_certificate(A, b, is_eq, cert, scale):
        return False, cert
    # Rare marginal trouble: solve the homogeneous dual explicitly with
    # equality multipliers split into nonnegative halves.
    # min b^T lam  s.t. A^T lam = 0, sum |lam| = 1 (via the split), lam >= 0
    cols = np.hstack([A[ineq_idx].T, A[eq_idx].T, -A[eq_idx].T]) if k else np.zeros((n, 0))
    A_eq2 = np.vstack([cols, np.ones((1, ki + 2 * ke))])
    b_eq2 = np.concatenate([np.zeros(n), [1.0]])
    costs = np.concatenate([b[ineq_idx], b[eq_idx], -b[eq_idx]])
    res2 = scipy.optimize.linprog(
        costs, A_eq=A_eq2, b_eq=b_eq2, bounds=[(0.0, None)] * (ki + 2 * ke), method="highs"
    )
    if res2.success:
        cert2 = np.zeros(k)
        cert2[ineq_idx] = res2.x[:ki]
        cert2[eq_idx] = res2.x[ki : ki + ke] - res2.x[ki + ke :]
        if _verify_certificate(A, b, is_eq, cert2, scale):
            return False, cert2
    raise RuntimeError("infeasible polyhedron but no verifiable Farkas certificate")


def _least_norm_with_multipliers(G, h, active):
    """min ||u||^2 s.t. G[active] u = h[active]; returns (u, multipliers)."""
    if not active:
        return np.zeros(G.shape[1]), np.zeros(0)
    Ga = G[active]
    M = Ga @ Ga.T
    w, *_ = np.linalg.lstsq(M, h[active], rcond=None)
    u = Ga.T @ w
    return u, -w


def _active_set_nearest(G, h, warm, feas_tol):
    """Dual active-set iteration for min ||u||^2 s.t. G u <= h.

    Returns (u, active, lam_active, status) with status in
    {"optimal", "stalled"}.
    """
    m, d = G.shape
    active: list[int] = []
    for i in warm:
        if 0 <= i < m and i not in active:
            active.append(i)
    cap = max(50 * m, 100)
    for _ in range(cap):
        u, lam = _least_norm_with_multipliers(G, h, active)
        if lam.size and lam.min() < -1e-11:
            worst = int(np.argmin(lam))
            active.pop(worst)
            continue
        viol = G @ u - h
        p = int(np.argmax(viol)) if m else 0
        if m == 0 or viol[p] <= feas_tol:
            return u, active, lam, "optimal"
        if p in active:
            return u, active, lam, "stalled"
        active.append(p)
    return u, active, lam, "stalled"


def _enumerate_nearest(G, h, feas_tol):
    """Exact nearest point by active-subset enumeration.

    Cost grows with the number of candidate active subsets, not the raw
    constraint count, so long pools in low dimension stay cheap.
    """
    m, d = G.shape
    subsets = sum(math.comb(m, s) for s in range(min(m, d) + 1))
    if subsets > 200_000:
        raise RuntimeError(
            f"enumeration fallback would visit {subsets} active subsets"
        )
    best = None
    for size in range(0, min(m, d) + 1):
        for subset in itertools.combinations(range(m), size):
            rows = list(subset)
            u, lam = _least_norm_with_multipliers(G, h, rows)
            if rows:
                # One refinement pass: near-parallel subsets put the
                # candidate far from the origin, where the first solve's
                # roundoff exceeds any fixed tolerance.
                du, dlam = _least_norm_with_multipliers(G, h - G @ u, rows)
                u = u + du
                lam = lam + dlam
            # Feasibility is judged relative to the candidate's magnitude;
            # a vertex at distance D cannot be located more precisely than
            # roundoff times D.
            tol = feas_tol * (1.0 + float(np.linalg.norm(u)))
            if rows and np.max(np.abs(G[rows] @ u - h[rows])) > tol * 10:
                continue
            if np.max(G @ u - h, initial=-np.inf) > tol:
                continue
            if best is None or u @ u < best[0] - 1e-15:
                best = (u @ u, u, rows, lam)
    if best is None:
        return None
    _, u, active, lam = best
    keep = [(i, la) for i, la in zip(active, lam) if la > 1e-11]
    return u, [i for i, _ in keep], np.array([la for _, la in keep])


def project_onto_polyhedron(poly: Polyhedron, x0, warm_start=()) -> QPResult:
    """Nearest point of the polyhedron to ``x0``.

    Equality constraints are eliminated by an orthogonal reduction, the
    inequality subproblem runs a dual active-set iteration (with an exact
    enumeration fallback), and empty polyhedra come back with
    ``status="infeasible"`` plus a Farkas certificate.
    """
    x0 = np.asarray(x0, dtype=float)
    if x0.ndim != 1 or x0.shape[0] != poly.dimension:
        raise ValueError("query point dimension mismatch")
    cons = poly.constraints
    k = len(cons)
    A = np.array([c.normal for c in cons], dtype=float)
    b = np.array([c.offset for c in cons], dtype=float)
    is_eq = np.array([c.kind == "equality" for c in cons])
    row_norms = np.linalg.norm(A, axis=1)
    scale = float(max(1.0, np.linalg.norm(x0), np.max(np.abs(b / row_norms))))
    feas_tol = 1e-11 * scale
    # Row-normalize up front: constraints born from projections carry normals
    # as short as the gap itself, and mixed row scales wreck the conditioning
    # of the equality elimination.  Multipliers and certificates are mapped
    # back to the original rows on exit.
    A = A / row_norms[:, None]
    b = b / row_norms
    norms = np.ones(k)

    def infeasible(cert):
        if not _verify_certificate(A, b, is_eq, cert, scale):
            _, cert = _phase_one_certificate(A, b, is_eq, scale)
        return QPResult(
            point=x0.copy(),
            status="infeasible",
            active_set=(),
            multipliers=np.zeros(k),
            kkt_residual=np.inf,
            certificate=cert / row_norms,
        )

    keep, cert = _pairwise_reduction(A, b, is_eq, scale)
    if keep is None:
        return infeasible(cert)

    eq_idx = [i for i in keep if is_eq[i]]
    in_idx = [i for i in keep if not is_eq[i]]

    n = poly.dimension
    if eq_idx:
        Ae = A[eq_idx]
        be = b[eq_idx]
        x_ls, *_ = np.linalg.lstsq(Ae, be, rcond=None)
        r = be - Ae @ x_ls
        if np.max(np.abs(r)) > 1e-9 * scale:
            cert = np.zeros(k)
            cert[eq_idx] = -r
            return infeasible(cert)
        U, s, Vt = np.linalg.svd(Ae)
        rank = int(np.sum(s > 1e-12 * max(1.0, s[0] if s.size else 1.0)))
        Z = Vt[rank:].T  # columns span the null space
        x_p = x_ls + Z @ (Z.T @ (x0 - x_ls))
    else:
        Z = np.eye(n)
        x_p = x0.copy()

    d = Z.shape[1]
    G_rows = []
    h_vals = []
    row_to_orig = []
    for i in in_idx:
        g = Z.T @ A[i] if d else np.zeros(0)
        hv = b[i] - A[i] @ x_p
        if d == 0 or np.linalg.norm(g) <= 1e-12 * norms[i]:
            if hv < -1e-9 * scale:
                # a_i is spanned by the equality normals but contradicts them
                cert = np.zeros(k)
                cert[i] = 1.0
                if eq_idx:
                    mu, *_ = np.linalg.lstsq(A[eq_idx].T, -A[i], rcond=None)
                    cert[eq_idx] = mu
                return infeasible(cert)
            continue  # trivially satisfied on the affine span
        G_rows.append(g)
        h_vals.append(hv)
        row_to_orig.append(i)

    if d == 0 or not G_rows:
        u = np.zeros(d)
        active_rows: list[int] = []
        lam_rows = np.zeros(0)
    else:
        G = np.array(G_rows)
        h = np.array(h_vals)
        u, active_rows, lam_rows, status = _active_set_nearest(G, h, [
            row_to_orig.index(w) for w in warm_start if w in row_to_orig
        ], feas_tol)
        if status != "optimal":
            enum = _enumerate_nearest(G, h, feas_tol)
            if enum is None:
                feasible, cert = _phase_one_certificate(A, b, is_eq, scale)
                if not feasible:
                    return infeasible(cert)
                raise RuntimeError("active-set stall on a feasible polyhedron")
            u, active_rows, lam_rows = enum

    x = x_p + (Z @ u if d else 0.0)

    mult = np.zeros(k)
    for row, lam in zip(active_rows, np.atleast_1d(lam_rows)):
        mult[row_to_orig[row]] = max(0.0, float(lam))
    if eq_idx:
        rhs = -(x - x0 + A.T @ mult)
        mu, *_ = np.linalg.lstsq(A[eq_idx].T, rhs, rcond=None)
        mult[eq_idx] = mu

    stationarity = np.linalg.norm(x - x0 + A.T @ mult)
    primal = max((c.violation(x) for c in cons), default=0.0)
    comp = 0.0
    for i in in_idx:
        comp = max(comp, abs(mult[i] * (A[i] @ x - b[i]) / norms[i]))
    kkt = max(stationarity, primal, comp)

    active = sorted(
        set(eq_idx) | {row_to_orig[rw] for rw in active_rows}
    )
    return QPResult(
        point=x,
        status="optimal",
        active_set=tuple(active),
        multipliers=mult / row_norms,
        kkt_residual=float(kkt),
    )


def relaxed_point(nearest, x_prev, tau: float) -> np.ndarray:
    """The point (1 - tau) * nearest + tau * x_prev, computed one way only."""
    nearest = np.asarray(nearest, dtype=float)
    x_prev = np.asarray(x_prev, dtype=float)
    return nearest + tau * (x_prev - nearest)


def halfspace_from_projection(
    x_prev,
    nearest,
    is_manifold: bool = False,
    tau: float = 0.0,
    source_set: int | None = None,
    outer_iteration: int | None = None,
    inner_step: int | None = None,
) -> Halfspace:
    """Supporting constraint generated by projecting ``x_prev`` to ``nearest``.

    The normal is x_prev - nearest.  Manifold projections give an equality
    through ``nearest`` (tau is ignored: equality constraints are never
    relaxed); otherwise the boundary passes through the tau-relaxed point
    (1 - tau) * nearest + tau * x_prev.
    """
    x_prev = np.asarray(x_prev, dtype=float)
    nearest = np.asarray(nearest, dtype=float)
    gap = x_prev - nearest
    if np.linalg.norm(gap) <= 1e-14:
        raise ZeroGapError("projection gap is zero; no separating constraint")
    if not 0.0 <= tau < 1.0:
        raise ValueError("tau must lie in [0, 1)")
    if is_manifold:
        return Halfspace(
            gap, float(gap @ nearest), "equality", source_set, outer_iteration, inner_step
        )
    r = relaxed_point(nearest, x_prev, tau)
    return Halfspace(
        gap, float(gap @ r), "inequality", source_set, outer_iteration, inner_step
    )


def derived_halfspace(poly: Polyhedron, x_prev) -> Halfspace:
    """Halfspace generated by projecting ``x_prev`` onto the polyhedron."""
    res = project_onto_polyhedron(poly, x_prev)
    if res.status != "optimal":
        raise InfeasiblePolyhedronError(
            "cannot derive a halfspace from an empty polyhedron", res.certificate
        )
    gap = np.asarray(x_prev, dtype=float) - res.point
    if np.linalg.norm(gap) <= 1e-12:
        raise NoSeparationError("point already lies in the polyhedron")
    return Halfspace(gap, float(gap @ res.point), "inequality")


def _project_simplex(v: np.ndarray) -> np.ndarray:
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, len(v) + 1)
    rho = np.nonzero(u - css / idx > 0)[0][-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def _eta_enumeration(V: np.ndarray) -> float:
    k = V.shape[1]
    Q = V.T @ V
    best = np.inf
    for mask in range(1, 2**k):
        idx = [i for i in range(k) if mask >> i & 1]
        s = len(idx)
        Qs = Q[np.ix_(idx, idx)]
        KKT = np.zeros((s + 1, s + 1))
        KKT[:s, :s] = Qs
        KKT[:s, s] = 1.0
        KKT[s, :s] = 1.0
        rhs = np.zeros(s + 1)
        rhs[s] = 1.0
        sol, *_ = np.linalg.lstsq(KKT, rhs, rcond=None)
        lam = sol[:s]
        if abs(lam.sum() - 1.0) > 1e-9 or lam.min() < -1e-12:
            continue
        val = float(np.sqrt(max(0.0, lam @ Qs @ lam)))
        best = min(best, val)
    return best


def _eta_projected_gradient(V: np.ndarray, max_iterations: int = 10_000) -> float:
    k = V.shape[1]
    lam = np.full(k, 1.0 / k)

    def f(l):
        return float(np.linalg.norm(V @ l))

    val = f(lam)
    for _ in range(max_iterations):
        if val <= 1e-14:
            return 0.0
        grad = V.T @ (V @ lam) / val
        t = 1.0
        improved = False
        gnorm2 = grad @ grad
        while t >= 1e-16:
            cand = _project_simplex(lam - t * grad)
            fc = f(cand)
            if fc <= val - 1e-4 * t * gnorm2:
                lam, val = cand, fc
                improved = True
                break
            t *= 0.5
        if not improved:
            break
    # Polish on the identified support for near-exact face solutions.
    support = [i for i in range(k) if lam[i] > 1e-9]
    if support:
        Vs = V[:, support]
        Qs = Vs.T @ Vs
        s = len(support)
        KKT = np.zeros((s + 1, s + 1))
        KKT[:s, :s] = Qs
        KKT[:s, s] = 1.0
        KKT[s, :s] = 1.0
        rhs = np.zeros(s + 1)
        rhs[s] = 1.0
        sol, *_ = np.linalg.lstsq(KKT, rhs, rcond=None)
        cand = sol[:s]
        if abs(cand.sum() - 1.0) <= 1e-9 and cand.min() >= -1e-12:
            val = min(val, float(np.sqrt(max(0.0, cand @ Qs @ cand))))
    return val


def eta(normals) -> float:
    """Distance from the origin to the convex hull of the unit normals.

    Quantifies how linearly regular a bundle of supporting directions is:
    eta = min over the unit simplex of ||sum_i lam_i v_i||.  Exact subset
    enumeration for up to six vectors, projected gradient with an Armijo
    line search beyond that.
    """
    V = np.column_stack([np.asarray(v, dtype=float) for v in normals])
    if V.ndim != 2 or V.shape[1] < 1:
        raise ValueError("eta needs at least one normal")
    lens = np.linalg.norm(V, axis=0)
    if np.any(np.abs(lens - 1.0) > 1e-10):
        raise ValueError("normals must be unit vectors")
    if V.shape[1] <= 6:
        return _eta_enumeration(V)
    return _eta_projected_gradient(V)
