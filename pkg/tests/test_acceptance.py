"""Acceptance gate: ten end-to-end criteria with pinned tolerances.

Each test is one criterion and prints a single "criterion N: PASS" line on
success (visible under pytest -s; pytest -v shows the per-test verdict
either way).  Tolerances are part of the contract: if a criterion fails,
the product is wrong — fix the code, never the threshold.
"""

import math
import time

import numpy as np
import pytest

import refs
from shqp import diagnostics, gallery, polyhedra, sets, solvers


def _proxies(problem, points):
    return [max(sets.project(s, p)[1] for s in problem.sets) for p in points]


def test_criterion_01_worked_example_trajectories():
    t0 = time.perf_counter()
    prob = gallery.get_entry("backtrack-example").problem

    trace = solvers.run_mass_projection(prob)
    assert trace.status == "converged"
    assert [r.step_kind for r in trace.records] == ["start", "qp-step", "qp-step"]
    assert trace.records[-1].outer_iteration <= 1  # two outer iterations
    np.testing.assert_allclose(trace.records[1].point, [-6.0, 0.0, 0.0], atol=1e-9)
    np.testing.assert_allclose(trace.records[2].point, [-6.0, 0.0, -6.0], atol=1e-9)
    d = trace.records[0].distances
    assert abs(d[0] - 1.0) <= 1e-12
    assert abs(d[1] - 3.0 / math.sqrt(10.0)) <= 1e-12

    memory = solvers.run_memory_shqp(prob, config=solvers.SolverConfig(tau=0.0, pbar=3))
    assert memory.status == "converged"
    outs = memory.outer_points()
    expect = [[0.0, 1.0, 0.0], [0.0, 0.0, 0.0], [-6.0, 0.0, 0.0], [-6.0, 0.0, -6.0]]
    assert len(outs) == 4
    for got, want in zip(outs, expect):
        np.testing.assert_allclose(got, want, atol=1e-9)

    elapsed = time.perf_counter() - t0
    assert elapsed < 1.0
    print(f"criterion 1: PASS - pinned example trajectories ({elapsed:.2f}s)")


def test_criterion_02_qp_against_bruteforce_corpus():
    t0 = time.perf_counter()
    rng = np.random.default_rng(0)
    n_optimal = n_infeasible = 0
    worst = 0.0
    for _ in range(10_000):
        triples, x0 = refs.random_constraint_problem(rng)
        ref = refs.nearest_in_polyhedron(triples, x0)
        poly = polyhedra.Polyhedron(
            [polyhedra.Halfspace(a, off, kind) for a, off, kind in triples]
        )
        res = polyhedra.project_onto_polyhedron(poly, x0)
        if res.status == "optimal":
            n_optimal += 1
            assert ref is not None
            rel = np.linalg.norm(res.point - ref) / (1.0 + np.linalg.norm(ref))
            worst = max(worst, rel)
            assert rel <= 1e-8
        else:
            n_infeasible += 1
            assert ref is None
    assert n_optimal + n_infeasible == 10_000
    assert n_optimal > 5_000 and n_infeasible > 500
    elapsed = time.perf_counter() - t0
    assert elapsed < 30.0
    print(
        f"criterion 2: PASS - {n_optimal} optimal / {n_infeasible} infeasible, "
        f"worst relative gap {worst:.2e} ({elapsed:.1f}s)"
    )


def test_criterion_03_aggregated_cut_depth_bound():
    rng = np.random.default_rng(7)
    worst_slack = -np.inf
    count = 0
    while count < 1000:
        n = int(rng.integers(2, 5))
        k = int(rng.integers(1, min(n + 1, 4) + 1))
        vecs = rng.standard_normal((k, n))
        vecs /= np.linalg.norm(vecs, axis=1, keepdims=True)
        et = polyhedra.eta(list(vecs))
        if et < 0.1:
            continue
        count += 1
        xbar = rng.standard_normal(n) * rng.choice([0.1, 1.0, 10.0])
        alpha = float(rng.uniform(0.1, 2.0))
        g = rng.uniform(0.0, alpha, size=k)
        g[int(rng.integers(k))] = alpha  # the worst violation is exactly alpha
        poly = polyhedra.Polyhedron(
            [
                polyhedra.Halfspace(vecs[i], float(vecs[i] @ xbar - g[i]))
                for i in range(k)
            ]
        )
        depth = polyhedra.derived_halfspace(poly, xbar).violation(xbar)
        assert depth <= alpha / et + 1e-9
        worst_slack = max(worst_slack, depth - alpha / et)
    print(
        f"criterion 3: PASS - 1000 bundles, worst depth minus alpha/eta "
        f"= {worst_slack:.2e}"
    )


def test_criterion_04_eta_against_certified_grid():
    rng = np.random.default_rng(11)
    worst_err = worst_gap = 0.0
    for _ in range(200):
        n = int(rng.integers(2, 5))
        k = int(rng.integers(1, min(n + 1, 4) + 1))
        vecs = rng.standard_normal((k, n))
        vecs /= np.linalg.norm(vecs, axis=1, keepdims=True)
        ref, gap = refs.least_hull_norm_grid(list(vecs))
        assert gap <= 5e-4  # the reference must certify its own accuracy
        err = abs(polyhedra.eta(list(vecs)) - ref)
        assert err <= 1e-3
        worst_err = max(worst_err, err)
        worst_gap = max(worst_gap, gap)
    print(
        f"criterion 4: PASS - 200 bundles, worst |eta - grid| = {worst_err:.2e}, "
        f"worst certificate gap = {worst_gap:.2e}"
    )


def test_criterion_05_local_linear_rates():
    results = []
    for name in ("circle-line", "rank1-affine"):
        prob = gallery.get_entry(name).problem
        xstar = prob.known_solution
        est = diagnostics.estimate_regularity(prob, xstar, rng_seed=3)
        rho = diagnostics.predicted_bounds(len(prob.sets), est.beta_hat, 0.0).rho_basic
        for alg, runner in (("basic", solvers.run_basic_shqp), ("map", solvers.run_map)):
            worst_rate = -np.inf
            for seed in range(20):
                rng = np.random.default_rng(seed)
                d = rng.standard_normal(prob.dimension)
                d /= np.linalg.norm(d)
                x0 = xstar + 0.05 * (0.2 + 0.8 * rng.random()) * d
                trace = runner(prob, x0=x0)
                assert trace.status == "converged"
                pts = trace.outer_points()
                prox = _proxies(prob, pts)
                # no divergence, and the final point is essentially feasible
                assert prox[-1] <= 1e-8
                assert max(prox) <= 10.0 * max(prox[0], 1e-12)
                usable = [p for p in prox if p > 1e-13]
                if len(usable) >= 3:
                    slope = np.polyfit(np.arange(len(usable)), np.log(usable), 1)[0]
                    assert math.exp(slope) < 1.0  # geometric decrease
                ref = pts[-1]
                floor = 100.0 * np.finfo(float).eps * np.linalg.norm(ref)
                errs = []
                for p in pts[:-1]:
                    e = float(np.linalg.norm(p - ref))
                    if e <= floor:
                        break
                    errs.append(e)
                assert len(errs) >= 3
                q = [errs[i + 1] / errs[i] for i in range(len(errs) - 1)]
                tail = q[-max(2, math.ceil(0.25 * len(q))):]
                worst = max(tail)
                assert worst < 1.0
                assert worst <= rho + 0.02
                worst_rate = max(worst_rate, worst)
            results.append(f"{name}/{alg} {worst_rate:.3f}<={rho + 0.02:.3f}")
    print("criterion 5: PASS - worst tail rates vs bounds: " + "; ".join(results))


def test_criterion_06_order_matches_newton():
    t0 = time.perf_counter()
    cl = gallery.get_entry("circle-line").problem
    rep_cl = diagnostics.analyze_trace(
        solvers.run_mass_projection(cl), xbar=cl.known_solution
    )
    assert rep_cl.estimated_order >= 1.5

    tp = gallery.get_entry("two-parabolas").problem
    rep_tp = diagnostics.analyze_trace(
        solvers.run_mass_projection(tp), xbar=tp.known_solution
    )
    assert rep_tp.estimated_order == pytest.approx(2.0, abs=0.3)

    # Newton on the square system F(x) = (x2 - x1^2, x2 - 2 x1 + x1^2)
    # from the same start, order fitted with the same estimator.
    x = np.array([1.4, 0.6])
    xstar = np.array([1.0, 1.0])
    errs = [float(np.linalg.norm(x - xstar))]
    for _ in range(60):
        F = np.array([x[1] - x[0] ** 2, x[1] - 2.0 * x[0] + x[0] ** 2])
        J = np.array([[-2.0 * x[0], 1.0], [-2.0 + 2.0 * x[0], 1.0]])
        x = x - np.linalg.solve(J, F)
        e = float(np.linalg.norm(x - xstar))
        if e <= 100.0 * np.finfo(float).eps * np.linalg.norm(xstar):
            break
        errs.append(e)
    newton_order = refs.fit_order(errs)
    assert abs(rep_tp.estimated_order - newton_order) <= 0.3

    elapsed = time.perf_counter() - t0
    assert elapsed < 5.0
    print(
        f"criterion 6: PASS - orders {rep_cl.estimated_order:.3f} (>=1.5) and "
        f"{rep_tp.estimated_order:.3f} vs Newton {newton_order:.3f} ({elapsed:.2f}s)"
    )


def test_criterion_07_memory_relaxation_sweep():
    prob = gallery.get_entry("two-parabolas").problem
    xstar = prob.known_solution
    est = diagnostics.estimate_regularity(prob, xstar, rng_seed=3)

    # Window depth chosen by a small sweep; ties keep the first (smallest).
    best = None
    for pbar in (1, 4, 16):
        cfg = solvers.SolverConfig(tau=0.1, pbar=pbar)
        trace = solvers.run_memory_shqp(prob, config=cfg)
        rep = diagnostics.analyze_trace(trace, xbar=xstar, pbar=pbar)
        if best is None or rep.tail_qlinear_rate < best[1]:
            best = (pbar, rep.tail_qlinear_rate)
    pbar_star = best[0]

    ratios = []
    for tau in (0.2, 0.1, 0.05):
        cfg = solvers.SolverConfig(tau=tau, pbar=pbar_star)
        trace = solvers.run_memory_shqp(prob, config=cfg)
        assert trace.status == "converged"
        rep = diagnostics.analyze_trace(trace, xbar=xstar, pbar=pbar_star)
        pr = np.asarray(rep.pbar_ratios)
        tail_k = min(len(pr), max(4, math.ceil(0.25 * len(pr))))
        gm = float(np.exp(np.mean(np.log(np.maximum(pr[-tail_k:], 1e-300)))))
        ratios.append(gm)
        # Fejer monotonicity toward the known solution.
        pts = trace.outer_points()
        e = np.array([np.linalg.norm(p - xstar) for p in pts])
        assert np.max(e[1:] - e[:-1]) <= 1e-10
        contraction = diagnostics.predicted_bounds(2, est.beta_hat, tau).contraction
        if contraction < 1.0:
            assert gm <= contraction + 0.05
    assert all(ratios[i + 1] <= ratios[i] + 1e-12 for i in range(len(ratios) - 1))

    # A geometry where the contraction bound is far from vacuous: duplicated
    # halfspaces have beta_hat = 1, so 8 * L * tau < 1 at tau = 0.01.
    dup = solvers.ProblemInstance(
        "dup",
        [sets.HalfspaceSet((1.0, 0.0), 0.0), sets.HalfspaceSet((1.0, 0.0), 0.0)],
        start=(1.0, 0.3),
        known_solution=(0.0, 0.3),
        intersection_oracle=sets.HalfspaceSet((1.0, 0.0), 0.0),
    )
    est_dup = diagnostics.estimate_regularity(dup, (0.0, 0.3), rng_seed=0)
    assert est_dup.beta_hat <= 1.0 + 1e-9
    contraction = diagnostics.predicted_bounds(2, est_dup.beta_hat, 0.01).contraction
    assert contraction < 1.0
    cfg = solvers.SolverConfig(tau=0.01, pbar=1, tau_zero_for_convex=False)
    trace = solvers.run_memory_shqp(dup, config=cfg)
    rep = diagnostics.analyze_trace(trace, xbar=(0.0, 0.3), pbar=1)
    pr = np.asarray(rep.pbar_ratios)
    tail_k = min(len(pr), max(4, math.ceil(0.25 * len(pr))))
    gm = float(np.exp(np.mean(np.log(np.maximum(pr[-tail_k:], 1e-300)))))
    assert gm <= contraction + 0.05

    print(
        f"criterion 7: PASS - pbar*={pbar_star}, tail ratios {ratios[0]:.3f} >= "
        f"{ratios[1]:.3f} >= {ratios[2]:.3f}; non-vacuous case "
        f"{gm:.3f} <= {contraction:.3f}"
    )


def test_criterion_08_two_set_turn_angle_dichotomy():
    # Acute turn: the wedge. Verify the sign analytically before running.
    wedge = gallery.get_entry("two-shqp-wedge")
    prob = wedge.problem
    a = 3.0 * np.pi / 8.0
    s, c = np.sin(a), np.cos(a)
    x0 = np.array([0.0, 1.0])
    p1 = np.array([s * c, s * s])
    p2 = p1 - (2.0 * s * s * c) * np.array([s, c])
    u, w = x0 - p1, p2 - p1
    assert u @ w > 1e-3  # provably acute at this geometry

    trace = solvers.run_two_shqp(prob)
    assert trace.status == "converged"
    kinds = [r.step_kind for r in trace.records]
    assert kinds[:4] == ["start", "set-projection-1", "set-projection-2", "qp-step"]
    np.testing.assert_allclose(trace.records[1].point, p1, atol=1e-12)
    np.testing.assert_allclose(trace.records[2].point, p2, atol=1e-12)
    oracle = prob.intersection_oracle
    d2 = sets.project(oracle, trace.records[2].point)[1]
    d3 = sets.project(oracle, trace.records[3].point)[1]
    assert d3 < d2  # the QP step strictly improves on the second projection

    # Obtuse turn: halfspace + ball. Verify the sign, then that the method
    # copies instead of solving a QP.
    hb = gallery.get_entry("halfspace-ball").problem
    q0 = np.asarray(hb.start, dtype=float)
    q1 = sets.project(hb.sets[0], q0)[0]
    q2 = sets.project(hb.sets[1], q1)[0]
    assert (q0 - q1) @ (q2 - q1) <= 0.0  # turn angle >= pi/2
    trace = solvers.run_two_shqp(hb)
    assert trace.status == "converged"
    assert trace.copy_steps == 1
    assert all(r.step_kind != "qp-step" for r in trace.records)

    print(
        f"criterion 8: PASS - acute turn steps to distance {d3:.1e} < {d2:.3f}; "
        "obtuse turn copies"
    )


def test_criterion_09_averaged_merit_never_increases():
    worst_inc = -np.inf
    where = None
    for name in gallery.gallery_names():
        prob = gallery.get_entry(name).problem
        for seed in range(20):
            rng = np.random.default_rng(100 + seed)
            x0 = prob.start + 0.1 * rng.standard_normal(prob.dimension)
            cfg = solvers.SolverConfig(max_outer_iterations=200)
            trace = solvers.run_averaged_projections(prob, x0=x0, config=cfg)
            pts = trace.outer_points()
            mv = [solvers.merit_value(prob, "sum-of-squares", p) for p in pts]
            for i in range(len(mv) - 1):
                inc = mv[i + 1] - mv[i]
                if inc > worst_inc:
                    worst_inc, where = inc, (name, seed)
                assert inc <= 1e-12, (name, seed, i, inc)
    print(
        f"criterion 9: PASS - 240 averaged runs, worst merit increase "
        f"{worst_inc:.1e} at {where}"
    )


def test_criterion_10_regularity_checkers_split_the_gallery():
    # Every convex entry passes the super-regularity check with no slack.
    worst_convex = -np.inf
    for entry in gallery.gallery_entries():
        if not entry.convex:
            continue
        for s in entry.problem.sets:
            ok, worst = sets.check_super_regular(
                s, entry.problem.known_solution, 0.0, 0.25
            )
            assert ok, (entry.name, s.kind, worst)
            worst_convex = max(worst_convex, worst)

    # The union of two axes fails even with generous slack at its crossing.
    ua = gallery.get_entry("union-axes").problem
    ok, worst_union = sets.check_super_regular(ua.sets[0], (0.0, 0.0), 0.5, 0.5)
    assert not ok
    assert worst_union > 0.5

    # Both parabolas admit a finite second-order supporting constant ...
    for s in gallery.get_entry("two-parabolas").problem.sets:
        ok, worst = sets.check_sosh(s, (1.0, 1.0), 10.0, 0.25)
        assert ok, (s.kind, worst)

    # ... while the cusp's constant blows up as the scale shrinks.
    cusp = gallery.get_entry("cusp-three-halves").problem.sets[0]
    worsts = []
    for r in (0.1, 0.01, 0.001):
        _, worst = sets.check_sosh(cusp, (0.0, 0.0), np.inf, r)
        worsts.append(worst)
    assert all(w > 100.0 for w in worsts)
    assert worsts[0] < worsts[1] < worsts[2]

    print(
        f"criterion 10: PASS - convex worst ratio {worst_convex:.1e}, union-axes "
        f"ratio {worst_union:.3f}, cusp constants {worsts[0]:.0f} -> "
        f"{worsts[1]:.0f} -> {worsts[2]:.0f}"
    )
