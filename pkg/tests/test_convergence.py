"""Tests for convergence studies."""

import io
import json
import math

import numpy as np
import pytest

from mri_gark.convergence import ConvergenceStudy, LevelResult, fit_order
from mri_gark.integrator import AdditiveSystem, InnerMode, InnerSolveConfig
from mri_gark.problems import Problem, linear_scalar, make_problem
from mri_gark.tableaux import builtin

TIGHT = InnerSolveConfig(rel_tol=1e-12, abs_tol=1e-12)


def failing_problem() -> Problem:
    def f_slow(t, y):
        if t > 0.3:
            raise ArithmeticError("slow rate undefined")
        return -y

    sys = AdditiveSystem(1, f_slow=f_slow, f_fast=lambda t, y: -y)
    return Problem("broken", sys, np.array([1.0]), 0.0, 1.0, None,
                   exact=lambda t: np.array([math.exp(-2 * t)]))


def exploding_problem() -> Problem:
    # explicit slow stages at H * lambda_s = -100 amplify by about 5e3 per step
    return Problem("exploding", linear_scalar(-1.0, -1000.0), np.array([1.0]), 0.0, 10.0, None,
                   exact=lambda t: np.array([math.exp(-1001.0 * t)]))


class TestFitOrder:
    def test_exact_power_law(self):
        H = [0.1, 0.05, 0.025]
        assert fit_order(H, [3 * h**2 for h in H]) == pytest.approx(2.0)

    def test_single_point(self):
        assert fit_order([0.1], [1e-3]) is None


class TestConvergenceStudy:
    def test_rows_and_report_fields(self):
        study = ConvergenceStudy(builtin("mri-erk22a"), make_problem("linear-scalar"), TIGHT,
                                 output=io.StringIO())
        report = study.run(H0=0.1, levels=4)
        assert [r.H for r in report.rows] == pytest.approx([0.1, 0.05, 0.025, 0.0125])
        assert [r.steps for r in report.rows] == [10, 20, 40, 80]
        assert not report.failed
        assert report.end_time is not None

        data = report.to_dict()
        assert data["method"] == "mri-erk22a"
        assert data["problem"] == "linear-scalar"
        assert data["inner"]["mode"] == "adaptive"
        assert len(data["rows"]) == 4
        json.dumps(data)

    def test_csv(self):
        study = ConvergenceStudy(builtin("mri-erk22a"), make_problem("linear-scalar"),
                                 output=io.StringIO())
        out = io.StringIO()
        study.run(H0=0.25, levels=3).write_csv(out)
        lines = out.getvalue().splitlines()
        assert lines[0] == "H,steps,error,error_estimate,floor_limited"
        assert lines[1].startswith("0.25,4,")

    def test_default_coarsest_step(self):
        study = ConvergenceStudy(builtin("mri-erk22a"), make_problem("linear-scalar"),
                                 output=io.StringIO())
        report = study.run(levels=3)
        assert report.rows[0].H == pytest.approx(1 / 16)

    @pytest.mark.parametrize("levels,H0", [(2, 0.1), (4, 0.0), (4, -1.0)])
    def test_invalid_arguments(self, levels, H0):
        study = ConvergenceStudy(builtin("mri-erk22a"), make_problem("linear-scalar"),
                                 output=io.StringIO())
        with pytest.raises(ValueError):
            study.run(H0=H0, levels=levels)

    def test_failed_level_stops_study(self):
        output = io.StringIO()
        study = ConvergenceStudy(builtin("mri-erk22a"), failing_problem(), output=output)
        report = study.run(H0=0.1, levels=4)
        assert report.failed
        assert len(report.rows) == 1
        assert not report.rows[0].success
        assert "slow rate undefined" in report.rows[0].error_message
        assert "FAILED" in output.getvalue()

    def test_non_finite_state_fails_level(self):
        output = io.StringIO()
        inner = InnerSolveConfig(mode=InnerMode.FIXED, substeps=1, order=4)
        study = ConvergenceStudy(builtin("mri-erk22a"), exploding_problem(), inner, output=output)
        report = study.run(H0=0.1, levels=4)
        assert report.failed
        assert len(report.rows) == 1
        assert not report.rows[0].success
        assert "non-finite" in report.rows[0].error_message
        assert report.observed_order is None
        assert report.to_dict()["failed"] is True

    def test_non_finite_reference_fails_level(self):
        problem = make_problem("linear-scalar")
        problem.exact = lambda t: np.array([math.nan])
        result = ConvergenceStudy(builtin("mri-erk22a"), problem, output=io.StringIO()).run_level(0.25)
        assert not result.success
        assert result.steps == 4
        assert "non-finite error" in result.error_message

    def test_coarsest_step_capped_by_problem(self):
        problem = make_problem("linear-scalar")
        problem.max_H0 = 0.01
        report = ConvergenceStudy(builtin("mri-erk22a"), problem, output=io.StringIO()).run(levels=3)
        assert [r.H for r in report.rows] == pytest.approx([0.01, 0.005, 0.0025])

    def test_floor_limited_rows_excluded_from_fit(self):
        study = ConvergenceStudy(builtin("mri-erk22a"), make_problem("linear-scalar"),
                                 output=io.StringIO())
        rows = [LevelResult(H=0.1 / 2**k, error=1e-3 / 4**k) for k in range(5)]
        rows[-1].floor_limited = True
        report = study.run(H0=0.1, levels=3)
        report.rows = rows
        assert [r.H for r in report.fit_rows] == pytest.approx([0.05, 0.025, 0.0125])
        assert report.observed_order == pytest.approx(2.0)

    def test_floor_tracks_inner_tolerance(self):
        problem = make_problem("linear-scalar")
        assert ConvergenceStudy(builtin("mri-erk22a"), problem, TIGHT).floor == pytest.approx(1e-10)
        fixed = InnerSolveConfig(mode=InnerMode.FIXED)
        assert ConvergenceStudy(builtin("mri-erk22a"), problem, fixed).floor == 0.0

    def test_progress_callback(self):
        messages = []
        study = ConvergenceStudy(builtin("mri-erk22a"), make_problem("linear-scalar"),
                                 output=io.StringIO())
        study.set_progress_callback(messages.append)
        study.run(H0=0.25, levels=3)
        assert messages[0].startswith("Convergence study: mri-erk22a")
        assert any(m.startswith("Observed order") for m in messages)

    def test_threads_match_serial(self):
        method, problem = builtin("mri-erk33a"), make_problem("linear-2d")
        serial = ConvergenceStudy(method, problem, TIGHT, output=io.StringIO()).run(0.1, 4)
        pooled = ConvergenceStudy(method, problem, TIGHT, threads=3, output=io.StringIO()).run(0.1, 4)
        assert [r.error for r in serial.rows] == [r.error for r in pooled.rows]

    def test_finest_trajectory_kept(self):
        study = ConvergenceStudy(builtin("mri-erk22a"), make_problem("linear-scalar"),
                                 output=io.StringIO())
        study.run(H0=0.25, levels=3)
        assert len(study.finest_trajectory.times) == 17


@pytest.mark.slow
class TestObservedOrders:
    @pytest.mark.parametrize("name", [
        "mri-erk22a", "mri-erk22b", "mri-erk33a", "mri-erk45a",
        "mri-irk21a", "mri-esdirk34a", "mri-sdirk33a", "mri-esdirk46a",
    ])
    def test_linear_2d(self, name):
        method = builtin(name)
        study = ConvergenceStudy(method, make_problem("linear-2d"), TIGHT, output=io.StringIO())
        report = study.run(H0=0.1, levels=5)
        assert report.observed_order == pytest.approx(method.order, abs=0.4)

    @pytest.mark.parametrize("name", [
        "mri-erk22a", "mri-erk33a", "mri-erk45a",
        "mri-irk21a", "mri-esdirk34a", "mri-sdirk33a", "mri-esdirk46a",
    ])
    def test_kpr(self, name):
        method = builtin(name)
        problem = make_problem("kpr")
        study = ConvergenceStudy(method, problem, TIGHT, output=io.StringIO())
        report = study.run(H0=problem.tf / 16, levels=5)
        assert not report.failed
        assert report.observed_order == pytest.approx(method.order, abs=0.4)

    @pytest.mark.parametrize("name", ["mri-erk33a", "mri-erk45a"])
    def test_gray_scott(self, name):
        method = builtin(name)
        problem = make_problem("gray-scott")
        inner = InnerSolveConfig(mode=InnerMode.FIXED, substeps=1, order=4)
        study = ConvergenceStudy(method, problem, inner, reference_tol=1e-13, output=io.StringIO())
        report = study.run(levels=4)
        assert report.rows[0].H == pytest.approx(2 / 512)
        assert not report.failed
        assert report.observed_order == pytest.approx(method.order, abs=0.5)
