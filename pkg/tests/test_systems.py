import math

import numpy as np
import pytest

from conservekit import expr as ex
from conservekit import systems
from conservekit.scheme import make_scheme
from conservekit.solver import SolverConfig, integrate


class TestRigidBody:
    def test_rhs_at_unit_state(self, rigid):
        f = rigid.rhs_fn(0.0, (1.0, 1.0, 1.0))
        np.testing.assert_allclose(f, (-1 / 6, 2 / 3, -1 / 2), rtol=1e-15)

    def test_invariant_values(self, rigid):
        e, l = rigid.invariant_values(0.0, (1.0, 1.0, 1.0))
        assert e == pytest.approx(11 / 6, rel=1e-15)
        assert l == 3.0

    def test_rhs_fn_matches_expressions(self, rigid, rng):
        for _ in range(30):
            p = rigid.sample_point(rng)
            np.testing.assert_allclose(
                rigid.rhs_fn(p.t, p.x), rigid.rhs_from_exprs(p.t, p.x), rtol=1e-15
            )

    def test_degenerate_inertia_rejected(self):
        with pytest.raises(systems.SystemError):
            systems.rigid_body(2.0, 2.0, 2.0)
        with pytest.raises(systems.SystemError):
            systems.rigid_body(1.0, -2.0, 3.0)


class TestLotkaVolterra2:
    def test_equilibrium(self, lv2):
        assert lv2.rhs_fn(0.0, (1.0, 1.0)) == (0.0, 0.0)

    def test_invariant_at_unit_point(self, lv2):
        assert lv2.invariant_values(0.0, (1.0, 1.0))[0] == pytest.approx(-2.0)

    def test_rhs_values(self, lv2):
        assert lv2.rhs_fn(0.0, (2.0, 1.0)) == (0.0, 1.0)

    def test_parameters_must_be_positive(self):
        with pytest.raises(systems.SystemError):
            systems.lotka_volterra_2(alpha=-1.0)


class TestLotkaVolterra3:
    def test_invariants(self, lv3):
        assert lv3.invariant_values(0.0, (1.0, 2.0, 3.0)) == (6.0, 6.0)

    def test_rhs(self, lv3):
        assert lv3.rhs_fn(0.0, (1.0, 2.0, 3.0)) == (-1.0, 4.0, -3.0)

    def test_rhs_sums_to_zero(self, lv3, rng):
        # the total-population multiplier row annihilates f everywhere
        for _ in range(30):
            p = lv3.sample_point(rng)
            assert sum(lv3.rhs_fn(p.t, p.x)) == pytest.approx(0.0, abs=1e-13)

    def test_six_distinct_closed_forms(self, lv3):
        a = (0.7, 1.9, 2.6)
        b = (1.4, 0.8, 2.1)
        values = {}
        for name, cf in lv3.closed_forms.items():
            values[name] = cf.ftau(0.0, a, b, 0.01)
        names = sorted(values)
        for i, u in enumerate(names):
            for v in names[i + 1 :]:
                assert values[u] != values[v], f"{u} and {v} coincide"

    def test_all_six_conserve_both(self, lv3):
        base = lv3.invariant_values(0.0, (1.0, 2.0, 3.0))
        for name in sorted(lv3.closed_forms):
            scheme = make_scheme(lv3, "multiplier", variant=name)
            traj = integrate(scheme, (1.0, 2.0, 3.0), tau=0.01, steps=300)
            for k in (100, 300):
                vals = lv3.invariant_values(traj.t[k], traj.x[k])
                assert abs(vals[0] - base[0]) <= 1e-12
                assert abs(vals[1] - base[1]) <= 1e-12


class TestThreeBody:
    def test_jacobi_finite_at_benchmark_state(self, three_body):
        j = three_body.invariant_values(0.0, systems.ARENSTORF_X0)[0]
        assert math.isfinite(j)

    def test_velocity_rows(self, three_body, rng):
        for _ in range(20):
            p = three_body.sample_point(rng)
            f = three_body.rhs_fn(p.t, p.x)
            assert f[0] == p.x[2]
            assert f[1] == p.x[3]

    def test_far_field_acceleration(self, three_body):
        # at rest far on the x1 axis the rotating-frame term dominates
        f = three_body.rhs_fn(0.0, (50.0, 0.0, 0.0, 0.0))
        assert f[2] == pytest.approx(50.0, rel=1e-3)

    def test_rhs_fn_matches_expressions(self, three_body, rng):
        for _ in range(30):
            p = three_body.sample_point(rng)
            np.testing.assert_allclose(
                three_body.rhs_fn(p.t, p.x), three_body.rhs_from_exprs(p.t, p.x), rtol=1e-12
            )

    def test_mass_ratio_bounds(self):
        with pytest.raises(systems.SystemError):
            systems.pr3bp(alpha=0.0)
        with pytest.raises(systems.SystemError):
            systems.pr3bp(alpha=1.5)

    def test_variant_conservation_flags(self, three_body):
        assert three_body.closed_forms["k+1,k"].conservative
        assert three_body.closed_forms["k,k+1"].conservative
        assert not three_body.closed_forms["k,k"].conservative
        assert not three_body.closed_forms["k+1,k+1"].conservative


class TestOscillator:
    def test_invariant_value(self, oscillator):
        assert oscillator.invariant_values(0.0, (1.0, 0.0))[0] == pytest.approx(2.5)

    def test_undamped_invariant_time_independent(self):
        osc = systems.damped_harmonic_oscillator(damping=0.0)
        assert not ex.depends_on(osc.invariants[0], 0)
        v0 = osc.invariant_values(0.0, (1.0, 0.5))[0]
        v1 = osc.invariant_values(7.0, (1.0, 0.5))[0]
        assert v0 == v1

    def test_invariant_constant_along_exact_solution(self, oscillator):
        exact = systems.dho_exact_solution(4.0, 0.5, 5.0, 1.0, 0.0)
        base = oscillator.invariant_values(0.0, (1.0, 0.0))[0]
        worst = max(
            abs(oscillator.invariant_values(t, exact(t))[0] - base)
            for t in np.linspace(0.0, 10.0, 400)
        )
        assert worst <= 1e-8

    def test_exact_solution_satisfies_ode(self, oscillator):
        exact = systems.dho_exact_solution(4.0, 0.5, 5.0, 1.0, 0.0)
        h = 1e-6
        for t in (0.0, 0.7, 2.3):
            x_m, _ = exact(t - h)
            x_p, _ = exact(t + h)
            _, y = exact(t)
            assert (x_p - x_m) / (2 * h) == pytest.approx(y, rel=1e-7, abs=1e-8)


class TestRegistrationGate:
    def test_wrong_transcription_rejected(self):
        # rhs inconsistent with the claimed invariant fails certification
        with pytest.raises(systems.SystemError):
            systems.system_from_expressions(
                "broken", 2, ["x2", "x1"], ["x1^2 + x2^2"], box=[(0.3, 2.0)] * 2
            )

    def test_consistent_custom_system_accepted(self):
        spec = systems.system_from_expressions(
            "oscillator", 2, ["x2", "-x1"], ["x1^2 + x2^2"], box=[(-2.0, 2.0)] * 2
        )
        assert spec.m == 1

    def test_custom_system_generic_scheme_conserves(self):
        spec = systems.system_from_expressions(
            "oscillator", 2, ["x2", "-x1"], ["x1^2 + x2^2"], box=[(-2.0, 2.0)] * 2
        )
        scheme = make_scheme(spec, "multiplier")
        traj = integrate(scheme, (1.0, 0.0), tau=0.01, steps=400, cfg=SolverConfig())
        base = spec.invariant_values(0.0, (1.0, 0.0))[0]
        for k in (200, 400):
            assert abs(spec.invariant_values(traj.t[k], traj.x[k])[0] - base) <= 1e-13

    def test_registry_contents(self):
        reg = systems.registry()
        assert sorted(reg) == ["dho", "lv2", "lv3", "pr3bp", "rigid-body"]

    def test_unknown_system(self):
        with pytest.raises(systems.SystemError):
            systems.get_system("n-body")


class TestSystemFile:
    def test_load_and_run(self, tmp_path):
        path = tmp_path / "decay.system"
        path.write_text(
            "# exponential decay with a time-dependent invariant\n"
            "name=exp-decay\n"
            "n=1\n"
            "f1=-x1\n"
            "psi1=x1*exp(t)\n"
            "domain=x1>0\n"
        )
        spec = systems.load_system_file(path)
        assert spec.id == "exp-decay"
        scheme = make_scheme(spec, "multiplier")
        traj = integrate(scheme, (1.0,), tau=0.05, steps=100)
        base = spec.invariant_values(0.0, (1.0,))[0]
        drift = max(
            abs(spec.invariant_values(t, x)[0] - base) for t, x in zip(traj.t[1:], traj.x[1:])
        )
        assert drift <= 1e-13

    def test_missing_component_rejected(self, tmp_path):
        path = tmp_path / "bad.system"
        path.write_text("n=2\nf1=x2\npsi1=x1\n")
        with pytest.raises(systems.SystemError):
            systems.load_system_file(path)

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "bad.system"
        path.write_text("n=1\nf1=-x1\npsi1=x1*exp(t)\nq1=3\n")
        with pytest.raises(systems.SystemError):
            systems.load_system_file(path)
