"""Acceptance gate: every criterion of the build contract, one test each,
printing a pass/fail line with the measured values.

Criteria 1-5 reproduce the recorded drift tables (conservative rows at
round-off level, baseline rows in a factor-2 band), 6-7 run the identity
suites at their stated tolerances, and 8 checks the observed convergence
orders.
"""

import time

import numpy as np
import pytest

from conservekit import harness, verify
from conservekit.scheme import baseline_residual, make_scheme
from conservekit.systems import get_system


def _report(criterion, passed, detail):
    tag = "PASS" if passed else "FAIL"
    print(f"[{tag}] acceptance criterion {criterion}: {detail}")
    assert passed, detail


def _table_cells(result):
    return {
        row.label: {name: cell for name, cell in zip(result.invariant_names, cells)}
        for row, cells, _ in result.rows
    }


class TestCriterion1RigidBody:
    def test_table_1(self, rng):
        start = time.perf_counter()
        result = harness.reproduce_table(1)
        elapsed = time.perf_counter() - start
        cells = _table_cells(result)
        mult_e = cells["Multiplier (= midpoint)"]["E"].value
        mult_l = cells["Multiplier (= midpoint)"]["L"].value
        be_e = cells["Backward Euler"]["E"].value

        rigid = get_system("rigid-body")
        mult_scheme = make_scheme(rigid, "multiplier")
        midpoint = baseline_residual("midpoint", rigid)
        bitwise = all(
            mult_scheme.residual(0.0, xk, xk1, tau) == midpoint.residual(0.0, xk, xk1, tau)
            for xk, xk1, tau in (
                ((1.0, 1.0, 1.0), (1.01, 0.99, 1.0), 0.01),
                (tuple(rng.uniform(0.3, 2, 3)), tuple(rng.uniform(0.3, 2, 3)), 0.02),
                (tuple(rng.uniform(0.3, 2, 3)), tuple(rng.uniform(0.3, 2, 3)), 1e-4),
            )
        )
        ok = (
            mult_e <= 1e-12
            and mult_l <= 1e-12
            and 2.71e-2 / 2 <= be_e <= 2.71e-2 * 2
            and bitwise
            and elapsed < 5.0
        )
        _report(
            1,
            ok,
            f"Error[E]={mult_e:.3e}, Error[L]={mult_l:.3e} (<=1e-12); backward Euler "
            f"Error[E]={be_e:.3e} (2x band of 2.71e-2); multiplier==midpoint bitwise: "
            f"{bitwise}; runtime {elapsed:.1f}s (<5s)",
        )


class TestCriterion2LotkaVolterra2:
    def test_table_2(self):
        start = time.perf_counter()
        result = harness.reproduce_table(2)
        elapsed = time.perf_counter() - start
        cells = _table_cells(result)
        mult_v = cells["Multiplier"]["V"].value
        mid_v = cells["Midpoint"]["V"].value
        ok = mult_v <= 1e-12 and 7.32e-6 / 2 <= mid_v <= 7.32e-6 * 2 and elapsed < 5.0
        _report(
            2,
            ok,
            f"Error[V]={mult_v:.3e} (<=1e-12, solver tol 1e-13); midpoint "
            f"Error[V]={mid_v:.3e} (2x band of 7.32e-6); runtime {elapsed:.1f}s (<5s)",
        )


class TestCriterion3LotkaVolterra3:
    def test_tables_3_and_4(self):
        start = time.perf_counter()
        t3 = harness.reproduce_table(3)
        t4 = harness.reproduce_table(4)
        elapsed = time.perf_counter() - start
        worst_sum = worst_prod = 0.0
        for row, cells, _ in t4.rows:
            worst_sum = max(worst_sum, cells[0].value)
            worst_prod = max(worst_prod, cells[1].value)
        be_prod = _table_cells(t3)["Backward Euler"]["xyz"].value
        ok = (
            worst_sum <= 1e-12
            and worst_prod <= 1e-12
            and 1.299 / 2 <= be_prod <= 1.299 * 2
            and elapsed < 10.0
        )
        _report(
            3,
            ok,
            f"all six orderings: Error[x+y+z]<={worst_sum:.3e}, Error[xyz]<="
            f"{worst_prod:.3e} (<=1e-12); backward Euler Error[xyz]={be_prod:.3e} "
            f"(2x band of 1.299); runtime {elapsed:.1f}s (<10s)",
        )


class TestCriterion4ThreeBody:
    def test_table_5(self):
        start = time.perf_counter()
        result = harness.reproduce_table(5, rows=("Multiplier", "Midpoint"))
        elapsed = time.perf_counter() - start
        cells = _table_cells(result)
        mult_j = cells["Multiplier"]["J"].value
        mid_j = cells["Midpoint"]["J"].value
        ok = mult_j <= 5e-12 and 2.48e-4 / 2 <= mid_j <= 2.48e-4 * 2 and elapsed < 300.0
        _report(
            4,
            ok,
            f"Arenstorf run (N=200000): Error[J]={mult_j:.3e} (<=5e-12); midpoint "
            f"Error[J]={mid_j:.3e} (2x band of 2.48e-4); runtime {elapsed:.1f}s (<300s)",
        )


class TestCriterion5Oscillator:
    def test_table_6(self):
        start = time.perf_counter()
        result = harness.reproduce_table(6)
        elapsed = time.perf_counter() - start
        cells = _table_cells(result)
        mult_p = cells["Multiplier"]["psi"].value
        trap_p = cells["Trapezoidal"]["psi"].value
        ok = mult_p <= 1e-12 and 9.72e-5 / 2 <= trap_p <= 9.72e-5 * 2 and elapsed < 5.0
        _report(
            5,
            ok,
            f"Error[psi]={mult_p:.3e} (<=1e-12); trapezoidal Error[psi]={trap_p:.3e} "
            f"(2x band of 9.72e-5); runtime {elapsed:.1f}s (<5s)",
        )


class TestCriterion6IdentitySuites:
    def test_multiplier_conditions_and_euler_operator(self):
        results = verify.multiplier_suite(points=100, stencils=1000)
        failed = [r for r in results if not r.passed]
        detail = (
            f"{len(results) - len(failed)}/{len(results)} identity properties passed "
            "(discrete conditions at 1000 stencils/system/ordering, continuous at 100 "
            "points/system, Euler-operator residuals with negative controls)"
        )
        for r in failed:
            print("  " + r.line())
        _report(6, not failed, detail)


class TestCriterion7DividedDifferenceSuite:
    def test_divdiff_properties(self):
        results = verify.divdiff_suite(corpus_size=60)
        failed = [r for r in results if not r.passed]
        detail = (
            f"{len(results) - len(failed)}/{len(results)} divided-difference properties "
            "passed over a 60-expression corpus (telescoping, symbolic-numeric "
            "agreement, coincidence limits, symmetrized equivalence)"
        )
        for r in failed:
            print("  " + r.line())
        _report(7, not failed, detail)


class TestCriterion8Convergence:
    @pytest.mark.parametrize(
        "system_id,floor",
        [("lv2", 0.9), ("lv3", 0.9), ("dho", 0.9), ("pr3bp", 0.9), ("rigid-body", 1.9)],
    )
    def test_observed_order(self, system_id, floor):
        res = harness.slope_for(system_id)
        ok = res.slope >= floor
        _report(
            8,
            ok,
            f"{system_id}: observed order {res.slope:.3f} (need >= {floor}) over "
            f"tau in {list(res.taus)}",
        )
