"""Config validation, JSON set descriptions, experiment runs, sweeps, CLI."""

import csv
import json

import numpy as np
import pytest

from shqp import cli, gallery, harness, sets, solvers

DISJOINT_PROBLEM = {
    "name": "disjoint-points",
    "sets": [
        {"kind": "point-set", "points": [[0.0, 0.0]]},
        {"kind": "point-set", "points": [[1.0, 0.0]]},
    ],
    "start": [0.3, 0.7],
}


def _cfg(**overrides):
    data = {"problem": "circle-line", "algorithm": "map"}
    data.update(overrides)
    return data


# ---------------------------------------------------------------- schema


def test_validate_config_accepts_minimal():
    harness.validate_config(_cfg())
    harness.validate_config(_cfg(tau=0.3, pbar=4, format="json"))


def test_validate_config_reports_json_path():
    with pytest.raises(harness.UsageError) as err:
        harness.validate_config(_cfg(tau=1.5))
    assert str(err.value) == (
        "config invalid at $.tau: 1.5 is greater than or equal to the maximum of 1"
    )
    with pytest.raises(harness.UsageError, match=r"\$: 'algorithm' is a required"):
        harness.validate_config({"problem": "circle-line"})
    with pytest.raises(harness.UsageError, match="Additional properties"):
        harness.validate_config(_cfg(bogus=1))
    with pytest.raises(harness.UsageError, match=r"\$\.algorithm"):
        harness.validate_config(_cfg(algorithm="gradient-descent"))
    with pytest.raises(harness.UsageError, match="must be a JSON object"):
        harness.validate_config([1, 2, 3])


# ---------------------------------------------------- set descriptions


def test_set_from_json_builds_every_kind():
    descriptions = [
        ({"kind": "halfspace", "normal": [1.0, 0.0], "offset": 0.0}, "halfspace"),
        ({"kind": "hyperplane", "normal": [0.0, 1.0], "offset": 1.0}, "hyperplane"),
        (
            {"kind": "affine-subspace", "point": [1.0, 0.0], "basis": [[0.5, 0.8660254037844386]]},
            "affine-subspace",
        ),
        ({"kind": "ball", "center": [0.0, -1.0], "radius": 1.0}, "ball"),
        ({"kind": "sphere", "center": [0.0, 0.0], "radius": 1.0}, "sphere"),
        ({"kind": "box", "lower": [-1.0, -1.0], "upper": [1.0, 1.0]}, "box"),
        ({"kind": "point-set", "points": [[0.0, 0.0], [1.0, 0.0]]}, "point-set"),
        (
            {
                "kind": "polyhedron",
                "halfspaces": [
                    {"normal": [1.0, 0.0], "offset": 0.0},
                    {"normal": [0.0, 1.0], "offset": 0.0, "kind": "equality"},
                ],
            },
            "polyhedron",
        ),
        (
            {
                "kind": "finite-union-of-convex",
                "members": [
                    {"kind": "ball", "center": [0.0, 0.0], "radius": 0.5},
                    {"kind": "ball", "center": [2.0, 0.0], "radius": 0.5},
                ],
            },
            "finite-union-of-convex",
        ),
        (
            {
                "kind": "intersection",
                "members": [
                    {"kind": "halfspace", "normal": [1.0, 0.0], "offset": 1.0},
                    {"kind": "halfspace", "normal": [-1.0, 0.0], "offset": 0.0},
                ],
            },
            "intersection",
        ),
        ({"kind": "fixed-rank-matrix-set", "rows": 2, "cols": 2, "rank": 1}, "fixed-rank-matrix-set"),
        (
            {
                "kind": "smooth-level-set",
                "function": "polynomial-curve",
                "coefficients": [0.0, 0.0, 1.0],
                "side": "above",
                "convex": True,
            },
            "smooth-level-set",
        ),
        (
            {"kind": "smooth-level-set", "function": "power-cusp", "exponent": 1.5},
            "smooth-level-set",
        ),
        (
            {
                "kind": "smooth-manifold",
                "function": "polynomial-curve",
                "coefficients": [0.0, 0.0, 1.0],
            },
            "smooth-manifold",
        ),
    ]
    rng = np.random.default_rng(0)
    for obj, kind in descriptions:
        oracle = harness.set_from_json(obj)
        assert oracle.kind == kind
        x = rng.standard_normal(oracle.dimension)
        y, d = sets.project(oracle, x)
        assert d >= 0.0 and y.shape == x.shape
        assert oracle.membership_residual(y) <= 1e-6


def test_set_from_json_error_paths():
    with pytest.raises(harness.UsageError, match="unknown set kind 'frisbee'"):
        harness.set_from_json({"kind": "frisbee"})
    with pytest.raises(harness.UsageError, match="missing required field 'offset'"):
        harness.set_from_json({"kind": "halfspace", "normal": [1.0, 0.0]})
    with pytest.raises(harness.UsageError, match="unknown field"):
        harness.set_from_json(
            {"kind": "ball", "center": [0.0, 0.0], "radius": 1.0, "color": "red"}
        )
    with pytest.raises(harness.UsageError, match="normal must be nonzero"):
        harness.set_from_json({"kind": "halfspace", "normal": [0.0, 0.0], "offset": 0.0})
    with pytest.raises(harness.UsageError, match="unknown smooth-level-set function"):
        harness.set_from_json({"kind": "smooth-level-set", "function": "spline"})
    with pytest.raises(harness.UsageError, match="set description must be an object"):
        harness.set_from_json("ball")


def test_problem_from_config_gallery_and_inline():
    prob = harness.problem_from_config("circle-line")
    assert prob.name == "circle-line"

    with pytest.raises(harness.UsageError) as err:
        harness.problem_from_config("nope")
    assert str(err.value).startswith(
        "unknown gallery problem 'nope'; available: backtrack-example"
    )

    inline = dict(DISJOINT_PROBLEM)
    prob = harness.problem_from_config(inline)
    assert prob.name == "disjoint-points" and len(prob.sets) == 2

    bad = dict(DISJOINT_PROBLEM, known_solution=[5.0, 5.0])
    with pytest.raises(harness.UsageError, match=r"\$\.problem: known solution"):
        harness.problem_from_config(bad)


# ------------------------------------------------------------ start point


def test_resolve_x0_precedence():
    prob = harness.problem_from_config("circle-line")
    cfg = harness.ExperimentConfig(**_cfg(x0=[2.0, 2.0], x0_seed=3))
    np.testing.assert_allclose(harness.resolve_x0(prob, cfg), [2.0, 2.0])

    cfg = harness.ExperimentConfig(**_cfg(x0_seed=3, x0_radius=0.5))
    got = harness.resolve_x0(prob, cfg)
    rng = np.random.default_rng(3)
    d = rng.standard_normal(2)
    d /= np.linalg.norm(d)
    want = prob.known_solution + 0.5 * rng.random() ** 0.5 * d
    np.testing.assert_allclose(got, want, rtol=1e-15)
    assert np.linalg.norm(got - prob.known_solution) <= 0.5

    cfg = harness.ExperimentConfig(**_cfg())
    np.testing.assert_allclose(harness.resolve_x0(prob, cfg), prob.start)

    bare = harness.problem_from_config(dict(DISJOINT_PROBLEM))
    cfg = harness.ExperimentConfig(problem=DISJOINT_PROBLEM, algorithm="map", x0_seed=1)
    with pytest.raises(harness.UsageError, match="x0_seed requires a problem"):
        harness.resolve_x0(bare, cfg)


def test_validate_experiment_compatibility_rules():
    one_set = {
        "name": "single",
        "sets": [{"kind": "ball", "center": [0.0, 0.0], "radius": 1.0}],
        "start": [2.0, 0.0],
    }
    with pytest.raises(harness.UsageError, match="two-shqp requires exactly 2 sets"):
        harness.validate_experiment({"problem": one_set, "algorithm": "two-shqp"})
    with pytest.raises(harness.UsageError, match="memory-shqp requires pbar >= 1"):
        harness.validate_experiment(_cfg(algorithm="memory-shqp", pbar=0))
    with pytest.raises(harness.UsageError, match="schedule applies only to basic-shqp"):
        harness.validate_experiment(_cfg(schedule={"kind": "farthest"}))
    with pytest.raises(harness.UsageError, match="unknown algorithm 'bogus'"):
        harness.validate_experiment(
            harness.ExperimentConfig(problem="circle-line", algorithm="bogus")
        )
    # A valid schedule passes through to the solver.
    cfg, prob = harness.validate_experiment(
        _cfg(algorithm="basic-shqp", schedule={"kind": "blocks", "blocks": [[0], [1]], "pairing": "fixed"})
    )
    assert cfg.algorithm == "basic-shqp" and len(prob.sets) == 2
    with pytest.raises(harness.UsageError, match=r"\$\.schedule: schedule blocks must cover"):
        harness.validate_experiment(
            _cfg(algorithm="basic-shqp", schedule={"kind": "blocks", "blocks": [[0]]})
        )


# ------------------------------------------------------------------ runs


def test_run_experiment_writes_trace_and_report(tmp_path):
    code, out = harness.run_experiment(_cfg(), out_dir=str(tmp_path))
    assert code == harness.EXIT_CONVERGED
    report = json.loads((tmp_path / "report.json").read_text())
    assert set(report) == {
        "config_echo",
        "predicted_bounds",
        "rate_report",
        "regularity_estimate",
        "terminal_status",
        "wallclock_ms",
    }
    assert report["terminal_status"] == "converged"
    assert report["wallclock_ms"] >= 0.0
    np.testing.assert_allclose(report["config_echo"]["x0_resolved"], [1.45, 0.3])
    assert sorted(report["rate_report"]) == [
        "errors",
        "estimated_order",
        "fejer_ok",
        "pbar",
        "pbar_ratios",
        "q_ratios",
        "tail_qlinear_rate",
    ]
    assert report["rate_report"]["tail_qlinear_rate"] < 1.0
    assert report["predicted_bounds"]["rho_basic"] > 0.0

    with open(tmp_path / "trace.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == [
        "outer_i", "inner_j", "step_kind", "x",
        "dist_to_set_1", "dist_to_set_2",
        "qp_active_size", "qp_kkt_residual",
    ]
    trace = out["trace_data"]
    assert len(rows) == len(trace.records) + 1
    # %.17g round-trips doubles exactly.
    for row, rec in zip(rows[1:], trace.records):
        got = np.array([float(v) for v in row[3].split(";")])
        assert np.array_equal(got, rec.point)
        assert row[2] == rec.step_kind


def test_run_experiment_short_run_reports_insufficient_data(tmp_path):
    code, out = harness.run_experiment(
        _cfg(problem="halfspace-pair"), out_dir=str(tmp_path)
    )
    assert code == harness.EXIT_CONVERGED
    rate = out["report_data"]["rate_report"]
    assert set(rate) == {"error"}
    assert rate["error"].startswith("insufficient-data:")


def test_run_experiment_exit_codes(tmp_path):
    code, _ = harness.run_experiment(
        {"problem": DISJOINT_PROBLEM, "algorithm": "map", "max_iters": 20},
        out_dir=str(tmp_path / "a"),
    )
    assert code == harness.EXIT_MAX_ITERATIONS
    code, out = harness.run_experiment(
        {"problem": DISJOINT_PROBLEM, "algorithm": "averaged"},
        out_dir=str(tmp_path / "b"),
    )
    assert code == harness.EXIT_NO_PROGRESS
    assert out["report_data"]["terminal_status"] == "stalled"


def test_trace_json_format(tmp_path):
    _, out = harness.run_experiment(
        _cfg(problem="two-shqp-wedge", algorithm="two-shqp", format="json"),
        out_dir=str(tmp_path),
    )
    body = json.loads((tmp_path / "trace.json").read_text())
    assert set(body) == {"copy_steps", "records", "status"}
    assert body["status"] == "converged"
    rec = body["records"][0]
    assert sorted(rec) == [
        "distances", "inner_j", "outer_i",
        "qp_active_size", "qp_kkt_residual", "step_kind", "x",
    ]
    assert body["records"][0]["step_kind"] == "start"
    assert len(body["records"][0]["x"]) == 2


def test_rerun_is_deterministic(tmp_path):
    cfg = _cfg(problem="two-parabolas", algorithm="basic-shqp", x0_seed=4)
    _, a = harness.run_experiment(cfg, out_dir=str(tmp_path / "a"))
    _, b = harness.run_experiment(cfg, out_dir=str(tmp_path / "b"))
    assert (tmp_path / "a" / "trace.csv").read_bytes() == (
        tmp_path / "b" / "trace.csv"
    ).read_bytes()
    ra = json.loads((tmp_path / "a" / "report.json").read_text())
    rb = json.loads((tmp_path / "b" / "report.json").read_text())
    ra.pop("wallclock_ms")
    rb.pop("wallclock_ms")
    assert ra == rb


# ----------------------------------------------------------------- sweep


def test_run_sweep_grid(tmp_path):
    cfg = _cfg(
        algorithm="memory-shqp",
        sweep={"tau": [0.05, 0.1], "pbar": [2, 4], "x0_seeds": [0, 1]},
    )
    code, out = harness.run_sweep(cfg, out_dir=str(tmp_path))
    assert code == 0
    assert len(out["rows"]) == 8
    with open(tmp_path / "sweep.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == [
        "tau", "pbar", "x0_seed", "status",
        "tail_qlinear_rate", "pbar_step_ratio", "predicted_contraction", "error",
    ]
    assert len(rows) == 9
    # Grid order: tau major, then pbar, then seed.
    assert [r[:3] for r in rows[1:]] == [
        [t, p, s]
        for t in ("0.050000000000000003", "0.10000000000000001")
        for p in ("2", "4")
        for s in ("0", "1")
    ]
    for r in rows[1:]:
        assert r[3] == "converged"
        assert r[7] == ""

    code2, _ = harness.run_sweep(cfg, out_dir=str(tmp_path / "again"))
    assert (tmp_path / "sweep.csv").read_bytes() == (
        tmp_path / "again" / "sweep.csv"
    ).read_bytes()


def test_run_sweep_records_cell_errors_and_validates(tmp_path):
    with pytest.raises(harness.UsageError, match="sweep grid axis 'tau' is empty"):
        harness.run_sweep(_cfg(sweep={"tau": []}), out_dir=str(tmp_path))
    with pytest.raises(harness.UsageError, match=r"outside \[0, 1\)"):
        harness.run_sweep(_cfg(sweep={"tau": [1.5]}), out_dir=str(tmp_path))
    # A failing cell is recorded in its row; the sweep still completes.
    cfg = {
        "problem": DISJOINT_PROBLEM,
        "algorithm": "map",
        "max_iters": 20,
        "sweep": {"x0_seeds": [0]},
    }
    code, out = harness.run_sweep(cfg, out_dir=str(tmp_path))
    assert code == 0
    row = out["rows"][0]
    assert row["status"] == ""
    assert "x0_seed requires a problem" in row["error"]


# ------------------------------------------------------------------- CLI


def test_cli_run_prints_summary(tmp_path, capsys):
    rc = cli.main(
        ["run", "--problem", "circle-line", "--algorithm", "map",
         "--out-dir", str(tmp_path)]
    )
    assert rc == 0
    line = capsys.readouterr().out.strip()
    assert line == (
        f"map: converged (exit 0); trace={tmp_path}/trace.csv "
        f"report={tmp_path}/report.json"
    )


def test_cli_list_gallery(capsys):
    assert cli.main(["list"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 13
    assert lines[0].split() == ["name", "m", "dim", "convex", "sosh", "beta", "eta"]
    assert [l.split()[0] for l in lines[1:]] == gallery.gallery_names()


def test_cli_validate_config(tmp_path, capsys):
    path = tmp_path / "good.json"
    path.write_text(json.dumps(_cfg()))
    assert cli.main(["validate-config", "--config", str(path)]) == 0
    assert capsys.readouterr().out.strip() == "ok"

    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(_cfg(tau=1.5)))
    assert cli.main(["validate-config", "--config", str(bad)]) == 64
    err = capsys.readouterr().err
    assert err.startswith("error: config invalid at $.tau")

    assert cli.main(["validate-config", "--config", str(tmp_path / "missing.json")]) == 64
    assert "cannot read config file" in capsys.readouterr().err

    notdict = tmp_path / "list.json"
    notdict.write_text("[1, 2]")
    assert cli.main(["validate-config", "--config", str(notdict)]) == 64
    assert "must contain a JSON object" in capsys.readouterr().err


def test_cli_usage_errors(tmp_path, capsys):
    assert cli.main(["run", "--algorithm", "map"]) == 64
    assert "a problem is required" in capsys.readouterr().err

    assert cli.main(["run", "--problem", "nope", "--algorithm", "map"]) == 64
    assert "unknown gallery problem 'nope'" in capsys.readouterr().err

    assert (
        cli.main(["sweep", "--problem", "circle-line", "--algorithm", "map"]) == 64
    )
    err = capsys.readouterr().err.strip()
    assert err == (
        "error: sweep requires at least one grid axis "
        "(--tau-grid, --pbar-grid, --x0-seeds)"
    )

    # argparse-level mistakes also exit 64, with the prog-prefixed message.
    assert cli.main(["run", "--bogus-flag"]) == 64
    assert "shqp: error: unrecognized arguments" in capsys.readouterr().err
    assert cli.main(["--help"]) == 0


def test_cli_sweep_and_overrides(tmp_path, capsys):
    rc = cli.main(
        ["sweep", "--problem", "circle-line", "--algorithm", "memory-shqp",
         "--tau-grid", "0.05,0.1", "--out-dir", str(tmp_path)]
    )
    assert rc == 0
    assert capsys.readouterr().out.strip() == f"2 cells written to {tmp_path}/sweep.csv"

    rc = cli.main(
        ["run", "--problem", "circle-line", "--algorithm", "map",
         "--x0", "1.2,0.4", "--tol", "1e-6", "--out-dir", str(tmp_path / "r")]
    )
    assert rc == 0
    capsys.readouterr()
    report = json.loads((tmp_path / "r" / "report.json").read_text())
    np.testing.assert_allclose(report["config_echo"]["x0_resolved"], [1.2, 0.4])
    assert report["config_echo"]["tol"] == 1e-6


def test_cli_config_file_with_flag_overrides(tmp_path, capsys):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(_cfg(tau=0.2)))
    rc = cli.main(
        ["run", "--config", str(path), "--algorithm", "mass",
         "--out-dir", str(tmp_path / "out")]
    )
    assert rc == 0
    line = capsys.readouterr().out
    assert line.startswith("mass: converged (exit 0)")
    report = json.loads((tmp_path / "out" / "report.json").read_text())
    assert report["config_echo"]["algorithm"] == "mass"
    assert report["config_echo"]["tau"] == 0.2
