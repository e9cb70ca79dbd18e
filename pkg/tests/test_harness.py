"""Run driver: configuration, config files, CLI, snapshots, studies."""

import math

import numpy as np
import pytest

from mppfv import harness
from mppfv.harness import (RunConfig, build_problem, convergence_study,
                           load_config_file, main, read_snapshot, run,
                           snapshot)
from mppfv.mesh import PERIODIC, StructuredGrid
from mppfv.metrics import RunDiagnostics
from mppfv.problems import initial_cell_averages, make_grid
from mppfv.solvers import NonConvergenceError


class TestRunConfigValidation:
    def test_defaults_are_valid(self):
        cfg = RunConfig()
        assert cfg.problem == "linear1d" and cfg.scheme == "sdirk5"
        assert cfg.limiter == "none" and cfg.solver == "fresh-jacobian"

    @pytest.mark.parametrize("kwargs", [
        dict(problem="heat3d"),
        dict(scheme="rk4"),
        dict(limiter="minmod"),
        dict(solver="matrix-free"),
        dict(nx=4),
        dict(problem="linear2d", ny=4),
        dict(fct_iters=0),
        dict(gamma=-0.5),
        dict(dt_factor=0.0),
        dict(t_final=0.0),
        dict(scheme="be", limiter="fct"),
        dict(scheme="iex4", limiter="gmc", limit_stages=True),
        dict(scheme="sdirk5", limiter="none", limit_stages=True),
        dict(problem="burgers1d", epsilon=0.01),
        dict(study=(100,)),
        dict(study=(100, 150)),
        dict(snapshot_times=(-0.1,)),
    ])
    def test_rejected_configurations(self, kwargs):
        with pytest.raises(ValueError):
            RunConfig(**kwargs)

    def test_accepted_near_miss_configurations(self):
        RunConfig(scheme="sdirk5", limiter="gmc", limit_stages=True)
        RunConfig(problem="linear1d", epsilon=0.001)
        RunConfig(study=(50, 100, 200))
        RunConfig(study=(50, 98))  # within 5% of doubling

    def test_study_normalized_to_ints(self):
        cfg = RunConfig(study=("25", "50"))
        assert cfg.study == (25, 50)
        assert all(isinstance(n, int) for n in cfg.study)


class TestBuildProblem:
    def test_epsilon_defaults_to_zero(self):
        spec = build_problem(RunConfig(problem="linear1d"))
        assert spec.diffusion(0.5, 1.0, None) == 0.0

    def test_epsilon_passes_through(self):
        spec = build_problem(RunConfig(problem="linear1d", epsilon=0.001))
        assert spec.diffusion(0.5, 1.0, None) == 0.001

    def test_vortex_period_tracks_final_time(self):
        spec = build_problem(RunConfig(problem="vortex2d", t_final=3.0))
        assert spec.final_time == 3.0
        default = build_problem(RunConfig(problem="vortex2d"))
        assert default.final_time == 1.5


class TestConfigFile:
    def test_parse_with_comments_and_hyphens(self, tmp_path):
        text = """
        # run description
        problem = linear1d
        nx = 64            # inline comment
        dt-factor = 0.25
        snapshot-times = 0.1, 0.2
        study = 32,64
        limit-stages = no
        stage_delta = true
        """
        p = tmp_path / "run.cfg"
        p.write_text(text)
        kwargs = load_config_file(p)
        assert kwargs == dict(problem="linear1d", nx=64, dt_factor=0.25,
                              snapshot_times=(0.1, 0.2), study=(32, 64),
                              limit_stages=False, stage_delta=True)
        RunConfig(**kwargs)

    def test_unknown_key_rejected(self, tmp_path):
        p = tmp_path / "bad.cfg"
        p.write_text("cfl = 0.5\n")
        with pytest.raises(ValueError, match="unknown config key"):
            load_config_file(p)

    def test_malformed_line_rejected(self, tmp_path):
        p = tmp_path / "bad.cfg"
        p.write_text("just some words\n")
        with pytest.raises(ValueError, match="key=value"):
            load_config_file(p)

    def test_bad_boolean_rejected(self, tmp_path):
        p = tmp_path / "bad.cfg"
        p.write_text("limit_stages = maybe\n")
        with pytest.raises(ValueError, match="invalid boolean"):
            load_config_file(p)


class TestSnapshots:
    def test_roundtrip_1d_bitwise(self, tmp_path, rng):
        grid = StructuredGrid(1, (17,), (0.0,), (1.0,), (PERIODIC,))
        u = rng.standard_normal(17) * 1e3
        path = snapshot(u, grid, tmp_path / "deep" / "nested" / "snap.csv")
        header, data = read_snapshot(path)
        assert header == ["x", "u"]
        assert np.array_equal(data[:, 0], grid.axis_centers(0))
        assert np.array_equal(data[:, 1], u)

    def test_2d_row_major_order(self, tmp_path):
        grid = StructuredGrid(2, (3, 2), (0.0, 0.0), (3.0, 2.0),
                              (PERIODIC, PERIODIC))
        u = np.array([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])  # u[iy, ix]
        header, data = read_snapshot(snapshot(u, grid, tmp_path / "s.csv"))
        assert header == ["x", "y", "u"]
        assert data.shape == (6, 3)
        assert np.array_equal(data[:, 2], [1, 2, 3, 4, 5, 6])
        assert np.array_equal(data[:, 0], [0.5, 1.5, 2.5, 0.5, 1.5, 2.5])
        assert np.array_equal(data[:, 1], [0.5, 0.5, 0.5, 1.5, 1.5, 1.5])

    def test_seventeen_digits_roundtrip_exactly(self, tmp_path):
        grid = StructuredGrid(1, (5,), (0.0,), (1.0,), (PERIODIC,))
        u = np.array([1 / 3, math.pi, 1e-300, -2 / 7, 0.1])
        _, data = read_snapshot(snapshot(u, grid, tmp_path / "s.csv"))
        assert np.array_equal(data[:, 1], u)


def _quick(**kw):
    base = dict(problem="linear1d", nx=16, scheme="be", dt_factor=0.5,
                t_final=0.5)
    base.update(kw)
    return RunConfig(**base)


class TestRunLoop:
    def test_final_time_key_and_error_recorded(self):
        diag, u = run(_quick())
        assert set(diag.e1) == {0.5}
        assert diag.e1[0.5] > 0.0
        assert u.values.shape == (16,)
        assert np.isfinite(diag.delta)

    def test_snapshot_files_and_initial_state(self, tmp_path):
        cfg = _quick(snapshot_times=(0.0, 0.25, 0.5), out=str(tmp_path))
        diag, _ = run(cfg)
        names = sorted(p.name for p in tmp_path.iterdir())
        assert names == ["linear1d_be_t0.000000.csv",
                         "linear1d_be_t0.250000.csv",
                         "linear1d_be_t0.500000.csv"]
        _, data = read_snapshot(tmp_path / "linear1d_be_t0.000000.csv")
        spec = build_problem(cfg)
        grid = make_grid(spec, cfg.nx)
        assert np.array_equal(data[:, 1],
                              initial_cell_averages(spec, grid).values)
        # intermediate snapshot times also get an error entry
        assert set(diag.e1) == {0.25, 0.5}

    def test_snapshot_beyond_final_time_rejected(self):
        with pytest.raises(ValueError, match="must not exceed"):
            run(_quick(snapshot_times=(0.6,)))

    def test_intermediate_stop_does_not_change_final_time(self):
        plain = run(_quick())[1]
        diag, stopped = run(_quick(snapshot_times=(0.313,)))
        # The clipped step sequence perturbs a first-order solution at
        # O(dt); both stop times are still hit exactly.
        assert set(diag.e1) == {0.313, 0.5}
        assert stopped.values == pytest.approx(plain.values, rel=0.02)

    def test_deterministic_bitwise(self):
        cfg = RunConfig(problem="burgers1d", nx=40, scheme="sdirk5",
                        limiter="fct", t_final=0.05)
        d1, u1 = run(cfg)
        d2, u2 = run(cfg)
        assert np.array_equal(u1.values, u2.values)
        assert d1.delta == d2.delta and d1.mass_drift == d2.mass_drift

    def test_mass_audit_with_dirichlet_outflow(self):
        diag, _ = run(RunConfig(problem="bl1d", nx=25, scheme="be",
                                t_final=0.05))
        assert abs(diag.mass_drift) <= 1e-10

    def test_stage_delta_tracking(self):
        on = run(_quick(scheme="sdirk5", stage_delta=True))[0]
        off = run(_quick(scheme="sdirk5"))[0]
        assert np.isfinite(on.stage_delta)
        assert off.stage_delta == np.inf


class TestConvergenceStudy:
    def test_rows_and_rates_on_exact_problem(self, tmp_path):
        cfg = RunConfig(problem="linear1d", nx=16, scheme="be",
                        t_final=0.25, study=(16, 32), out=str(tmp_path))
        rows = convergence_study(cfg)
        assert [r["nx"] for r in rows] == [16, 32]
        extent = 2.0 * math.pi
        assert rows[0]["dx"] == pytest.approx(extent / 16, rel=1e-15)
        assert rows[0]["eoc"] is None and isinstance(rows[1]["eoc"], float)
        assert rows[1]["eoc"] == pytest.approx(
            math.log2(rows[0]["e1"] / rows[1]["e1"]), rel=1e-12)
        csv = (tmp_path / "study_linear1d_be.csv").read_text().splitlines()
        assert csv[0] == "dx,E1,EOC,delta"
        assert len(csv) == 3
        first = csv[1].split(",")
        assert float(first[0]) == rows[0]["dx"]
        assert float(first[1]) == rows[0]["e1"]
        assert first[2] == ""
        assert float(first[3]) == rows[0]["delta"]
        second = csv[2].split(",")
        assert float(second[2]) == rows[1]["eoc"]

    def test_requires_study_grids_and_exact_solution(self):
        with pytest.raises(ValueError, match="grid sequence"):
            convergence_study(RunConfig(problem="linear1d"))
        with pytest.raises(ValueError, match="no exact solution"):
            convergence_study(RunConfig(problem="burgers1d", study=(16, 32)))

    def test_anisotropic_grids_scale_ny(self, monkeypatch):
        seen = []

        def fake_run(sub):
            seen.append(sub)
            return RunDiagnostics(delta=0.1, e1={1.0: 2.0 ** -len(seen)}), None

        monkeypatch.setattr(harness, "run", fake_run)
        cfg = RunConfig(problem="linear2d", nx=10, ny=20, study=(10, 20),
                        scheme="be")
        rows = convergence_study(cfg)
        assert [(s.nx, s.ny) for s in seen] == [(10, 20), (20, 40)]
        assert all(s.study == () and s.snapshot_times == () and s.out is None
                   for s in seen)
        assert rows[1]["eoc"] == pytest.approx(1.0, abs=1e-12)


class TestCommandLine:
    def test_successful_run_reports_summary(self, capsys):
        code = main(["--problem", "linear1d", "--nx", "16", "--scheme", "be",
                     "--t-final", "0.1"])
        out = capsys.readouterr().out
        assert code == 0
        assert "problem=linear1d" in out and "scheme=be" in out
        assert "delta=" in out and "mass_drift=" in out and "E1=" in out

    def test_study_prints_table(self, capsys):
        code = main(["--problem", "linear1d", "--nx", "16", "--scheme", "be",
                     "--t-final", "0.1", "--study", "16,32"])
        out = capsys.readouterr().out.splitlines()
        assert code == 0
        assert out[0] == "dx,E1,EOC,delta"
        assert len(out) == 3
        assert out[1].split(",")[2] == ""     # no rate on the first grid
        assert out[2].split(",")[2] != ""

    def test_invalid_configuration_exits_2(self, capsys):
        code = main(["--nx", "3"])
        err = capsys.readouterr().err
        assert code == 2
        assert err.startswith("error: invalid-config:")

    def test_missing_config_file_exits_2(self, capsys):
        code = main(["--config", "/nonexistent/run.cfg"])
        assert code == 2
        assert "error: invalid-config:" in capsys.readouterr().err

    def test_solver_failure_exits_3(self, capsys, monkeypatch):
        def exploding_run(config):
            raise NonConvergenceError("stage solve stalled")

        monkeypatch.setattr(harness, "run", exploding_run)
        code = main(["--problem", "linear1d", "--nx", "16"])
        err = capsys.readouterr().err
        assert code == 3
        assert err.startswith("error: solver-failure:")

    def test_flags_override_config_file(self, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("problem = linear1d\nnx = 16\nscheme = be\n"
                       "t-final = 0.1\nsnapshot-times = 0.0\n"
                       f"out = {tmp_path}\n")
        code = main(["--config", str(cfg), "--nx", "24"])
        assert code == 0
        _, data = read_snapshot(tmp_path / "linear1d_be_t0.000000.csv")
        assert data.shape[0] == 24  # flag value, not the file's 16
