import numpy as np
import pytest

from conservekit import harness
from conservekit.scheme import make_scheme
from conservekit.solver import SolverConfig, Trajectory, integrate
from conservekit.systems import get_system


class TestConservationError:
    def test_constant_trajectory_is_zero(self, lv2):
        t = np.linspace(0.0, 1.0, 11)
        x = np.tile([1.0, 1.0], (11, 1))  # the equilibrium
        traj = Trajectory(t=t, x=x, iters=np.zeros(11, dtype=int))
        assert harness.conservation_error(traj, lv2.invariants[0]) == 0.0

    def test_prefix_monotonicity(self, lv3):
        scheme = make_scheme(lv3, "midpoint")
        traj = integrate(scheme, (1.0, 2.0, 3.0), tau=0.01, steps=200)
        full = harness.conservation_error(traj, lv3.invariants[1])
        for cut in (50, 100, 150):
            prefix = Trajectory(t=traj.t[: cut + 1], x=traj.x[: cut + 1], iters=traj.iters[: cut + 1])
            assert harness.conservation_error(prefix, lv3.invariants[1]) <= full

    def test_uses_time_dependence(self, oscillator):
        # a frozen state drifts in psi because of the explicit time factor
        t = np.array([0.0, 1.0])
        x = np.tile([1.0, 0.5], (2, 1))
        traj = Trajectory(t=t, x=x, iters=np.zeros(2, dtype=int))
        assert harness.conservation_error(traj, oscillator.invariants[0]) > 0.1


class TestCsv:
    def test_roundtrip_bit_exact(self, lv3, tmp_path):
        scheme = make_scheme(lv3, "multiplier", variant="F1")
        traj = integrate(scheme, (1.0, 2.0, 3.0), tau=0.01, steps=50)
        text = harness.format_csv(traj, lv3)
        header, rows, iters = harness.parse_csv(text)
        assert header[:5] == ["k", "t", "x1", "x2", "x3"]
        np.testing.assert_array_equal(rows[:, 0], traj.t)
        np.testing.assert_array_equal(rows[:, 1:4], traj.x)
        np.testing.assert_array_equal(iters, traj.iters)

    def test_run_experiment_writes_file(self, tmp_path):
        out = tmp_path / "traj.csv"
        cfg = harness.ExperimentConfig(
            system_id="lv3", method="multiplier", tau=0.01, steps=20, out_path=str(out)
        )
        report = harness.run_experiment(cfg)
        assert out.exists()
        header, rows, _ = harness.parse_csv(out.read_text())
        assert len(rows) == 21
        assert report.errors[0] <= 1e-13

    def test_lf_line_endings(self, lv3):
        scheme = make_scheme(lv3, "multiplier", variant="F1")
        traj = integrate(scheme, (1.0, 2.0, 3.0), tau=0.01, steps=5)
        assert "\r" not in harness.format_csv(traj, lv3)


class TestRunExperiment:
    def test_report_fields(self):
        cfg = harness.ExperimentConfig(system_id="rigid-body", method="multiplier", tau=0.01, steps=100)
        report = harness.run_experiment(cfg)
        assert report.invariant_names == ("E", "L")
        assert all(e >= 0 for e in report.errors)
        assert report.max_iterations >= 1
        assert report.nonconverged_steps == 0

    def test_invalid_config(self):
        with pytest.raises(ValueError):
            harness.ExperimentConfig(system_id="lv2", method="multiplier", tau=0.0, steps=10)
        with pytest.raises(ValueError):
            harness.ExperimentConfig(system_id="lv2", method="multiplier", tau=0.1, steps=0)


class TestTables:
    def test_reproduce_table_deterministic(self):
        a = harness.reproduce_table(1)
        b = harness.reproduce_table(1)
        for (_, cells_a, _), (_, cells_b, _) in zip(a.rows, b.rows):
            for ca, cb in zip(cells_a, cells_b):
                assert ca.value == cb.value

    def test_row_subset(self):
        res = harness.reproduce_table(2, rows=("Multiplier",))
        assert len(res.rows) == 1
        assert res.rows[0][0].label == "Multiplier"

    def test_unknown_table(self):
        with pytest.raises(ValueError):
            harness.reproduce_table(9)

    def test_format_table_mentions_status(self):
        res = harness.reproduce_table(6)
        text = harness.format_table(res)
        assert "pass" in text or "FAIL" in text
        assert "Error[psi]" in text


class TestConvergence:
    def test_oscillator_study_uses_exact_reference(self):
        system = get_system("dho")
        res = harness.convergence_study(system, "multiplier", final_time=1.0, x0=(1.0, 0.0))
        assert res.slope >= 0.9
        assert len(res.errors) == len(res.taus) == 4

    def test_tau_must_divide_final_time(self):
        system = get_system("dho")
        with pytest.raises(ValueError):
            harness.convergence_study(system, "multiplier", tau_list=(0.3, 0.15), final_time=1.0)

    def test_backward_euler_first_order(self):
        system = get_system("lv2")
        res = harness.convergence_study(
            system, "backward-euler", tau_list=(1e-2, 5e-3, 2.5e-3), final_time=0.5, x0=(1.0, 2.0)
        )
        assert 0.9 <= res.slope <= 1.1
