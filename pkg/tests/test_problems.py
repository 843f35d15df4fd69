"""Tests for the benchmark problems."""

import math

import numpy as np
import pytest
import scipy.linalg

from mri_gark.integrator import AdditiveSystem, ComponentSystem, InnerMode, InnerSolveConfig, integrate
from mri_gark.problems import (
    GrayScottParams,
    KprParams,
    ProblemDomainError,
    gray_scott,
    gray_scott_initial_state,
    gray_scott_stable_H0,
    kpr,
    linear_2d,
    linear_2d_exact_flow,
    linear_scalar,
    make_problem,
    parse_params,
    periodic_laplacian,
)
from mri_gark.stability import CoupledTestProblem
from mri_gark.tableaux import builtin


class TestPeriodicLaplacian:
    def test_constants_in_kernel(self):
        lap = periodic_laplacian(8)
        np.testing.assert_allclose(lap @ np.ones(64), 0.0, atol=1e-12)

    def test_symmetric(self):
        lap = periodic_laplacian(6)
        assert abs(lap - lap.T).max() == 0

    def test_fourier_mode_eigenvalue(self):
        n = 16
        j = np.arange(n)
        mode = np.tile(np.cos(2 * np.pi * j / n), n)
        expected = n * n * (2 * np.cos(2 * np.pi / n) - 2)
        np.testing.assert_allclose(periodic_laplacian(n) @ mode, expected * mode, atol=1e-9)


class TestGrayScott:
    def test_initial_state(self):
        p = GrayScottParams(n=32)
        y0 = gray_scott_initial_state(p)
        u, v = y0[:1024].reshape(32, 32), y0[1024:].reshape(32, 32)
        assert (u == 0.5).sum() == 256
        assert (v == 0.25).sum() == 256
        assert u[0, 0] == 1.0 and v[0, 0] == 0.0
        assert u[16, 16] == 0.5

    def test_uniform_state_has_no_diffusion(self):
        p = GrayScottParams(n=8)
        sys = gray_scott(p)
        y = np.concatenate([np.full(64, 0.7), np.full(64, 0.2)])
        np.testing.assert_allclose(sys.f_slow(0.0, y), 0.0, atol=1e-12)

    def test_reaction_terms(self):
        p = GrayScottParams(n=4)
        sys = gray_scott(p)
        y = np.concatenate([np.full(16, 0.5), np.full(16, 0.25)])
        out = sys.f_fast(0.0, y)
        uv2 = 0.5 * 0.25**2
        np.testing.assert_allclose(out[:16], -uv2 + p.feed * 0.5)
        np.testing.assert_allclose(out[16:], uv2 - (p.feed + p.kill) * 0.25)

    def test_slow_jacobian_is_sparse_diffusion(self):
        sys = gray_scott(GrayScottParams(n=4))
        J = sys.jac_slow(0.0, np.zeros(32))
        assert J.shape == (32, 32)
        y = np.random.default_rng(3).random(32)
        np.testing.assert_allclose(J @ y, sys.f_slow(0.0, y))

    @pytest.mark.parametrize("n,expected", [(8, 2 / 32), (32, 2 / 512), (64, 2 / 2048)])
    def test_stable_H0(self, n, expected):
        assert gray_scott_stable_H0(GrayScottParams(n=n)) == expected

    def test_stable_H0_bounds_diffusion_spectrum(self):
        p = GrayScottParams(n=8)
        eig = np.linalg.eigvals(gray_scott(p).jac_slow(0.0, None).toarray())
        assert np.abs(eig).max() * gray_scott_stable_H0(p) <= 2.0 + 1e-9

    def test_problem_default_step(self):
        assert make_problem("gray-scott").default_H0 == 2 / 512
        assert make_problem("gray-scott", {"tf": "0.01"}).default_H0 == pytest.approx(0.01 / 16)

    @pytest.mark.slow
    def test_explicit_fourth_order_run_stays_finite(self):
        problem = make_problem("gray-scott")
        inner = InnerSolveConfig(mode=InnerMode.FIXED, substeps=1, order=4)
        traj = integrate(builtin("mri-erk45a"), problem.system, problem.t0, problem.tf,
                         problem.default_H0, problem.y0, inner)
        assert traj.times[-1] == 2.0
        assert traj.final.shape == (2048,)
        assert np.all(np.isfinite(traj.as_array()))
        assert traj.final[:1024].min() > 0

    @pytest.mark.parametrize("kwargs", [{"eps_u": 0.0}, {"n": 2}, {"tf": -1.0}])
    def test_invalid_params(self, kwargs):
        with pytest.raises(ValueError):
            GrayScottParams(**kwargs)


class TestKpr:
    @pytest.mark.parametrize("t", [0.0, 0.3, 1.7, 5.0])
    def test_exact_solution_satisfies_ode(self, t):
        p = KprParams()
        system, exact = kpr(p)
        yf, ys = exact(t)
        dyf = -p.omega * math.sin(p.omega * t) / (2 * yf[0])
        dys = -math.sin(t) / (2 * ys[0])
        assert system.f_fast(t, yf, ys)[0] == pytest.approx(dyf, abs=1e-12)
        assert system.f_slow(t, yf, ys)[0] == pytest.approx(dys, abs=1e-12)

    def test_slow_jacobian_matches_difference_quotient(self):
        system, exact = kpr()
        t = 0.8
        yf, ys = exact(t)
        ys = ys * 1.1
        e = 1e-7
        fd = (system.f_slow(t, yf, ys + e) - system.f_slow(t, yf, ys - e)) / (2 * e)
        assert system.jac_slow_ys(t, yf, ys)[0, 0] == pytest.approx(fd[0], rel=1e-6)

    def test_nonpositive_state_rejected(self):
        system, _ = kpr()
        with pytest.raises(ProblemDomainError, match="positive"):
            system.f_fast(0.0, np.array([-1.0]), np.array([1.0]))

    @pytest.mark.parametrize("kwargs", [{"xi": 0.0}, {"xi": 1.0}, {"lambda_f": 1.0}, {"omega": 0.0}])
    def test_invalid_params(self, kwargs):
        with pytest.raises(ValueError):
            KprParams(**kwargs)


class TestLinearProblems:
    def test_scalar_split(self):
        sys = linear_scalar(-10.0, -1.0)
        assert isinstance(sys, AdditiveSystem)
        y = np.array([2.0])
        assert sys.f_fast(0.0, y)[0] == -20.0
        assert sys.f_slow(0.0, y)[0] == -2.0

    def test_2d_matches_omega(self):
        problem = CoupledTestProblem(-10.0, -1.0, 0.3, 2.0)
        sys = linear_2d(problem)
        assert isinstance(sys, ComponentSystem)
        yf, ys = np.array([0.7]), np.array([-0.4])
        out = np.concatenate([sys.f_fast(0.0, yf, ys), sys.f_slow(0.0, yf, ys)])
        np.testing.assert_allclose(out, problem.omega.real @ np.array([0.7, -0.4]))

    def test_2d_rejects_complex(self):
        with pytest.raises(ValueError, match="real"):
            linear_2d(CoupledTestProblem(-10.0 + 1j, -1.0, 0.1))

    @pytest.mark.parametrize("lf,ls,xi,alpha", [
        (-10.0, -1.0, 0.1, 1.0),
        (-50.0, -0.5, 0.8, 3.0),
        (-4.0 + 3j, -1.0, 0.2, 1.0),
        (-3.0, -1.0, 0.5, 1.0),
    ])
    @pytest.mark.parametrize("t", [0.05, 0.7])
    def test_exact_flow_against_expm(self, lf, ls, xi, alpha, t):
        problem = CoupledTestProblem(lf, ls, xi, alpha)
        expected = scipy.linalg.expm(t * problem.omega)
        np.testing.assert_allclose(linear_2d_exact_flow(problem, t), expected, rtol=1e-10, atol=1e-12)


class TestRegistry:
    def test_parse_params(self):
        assert parse_params(["n=16", " tf = 0.5"]) == {"n": "16", "tf": "0.5"}

    def test_parse_params_rejects_missing_equals(self):
        with pytest.raises(ValueError, match="key=value"):
            parse_params(["n16"])

    def test_overrides_converted_by_field_type(self):
        problem = make_problem("gray-scott", {"n": "8", "tf": "0.25"})
        assert problem.params.n == 8
        assert problem.tf == 0.25
        assert problem.y0.size == 128

    def test_unknown_problem(self):
        with pytest.raises(ValueError, match="Available"):
            make_problem("brusselator")

    def test_unknown_parameter(self):
        with pytest.raises(ValueError, match="Unknown parameter 'omega'"):
            make_problem("linear-2d", {"omega": "3"})

    def test_invalid_value(self):
        with pytest.raises(ValueError, match="Invalid value"):
            make_problem("kpr", {"xi": "half"})

    def test_kpr_reference_is_exact(self):
        problem = make_problem("kpr")
        ref = problem.reference()
        np.testing.assert_allclose(
            ref, [math.sqrt(3 + math.cos(20 * problem.tf)), math.sqrt(2 + math.cos(problem.tf))]
        )
        np.testing.assert_allclose(problem.y0, [2.0, math.sqrt(3.0)])

    def test_default_step_is_sixteenth_of_interval(self):
        assert make_problem("kpr").default_H0 == pytest.approx(5 * math.pi / 32)
        assert make_problem("linear-2d").default_H0 == pytest.approx(1 / 16)

    def test_linear_scalar_reference(self):
        problem = make_problem("linear-scalar", {"tf": "0.5"})
        assert problem.reference()[0] == pytest.approx(math.exp(-5.5))

    @pytest.mark.slow
    def test_gray_scott_reference_by_monolithic_solve(self):
        problem = make_problem("gray-scott", {"n": "8", "tf": "0.1"})
        ref = problem.reference(tol=1e-8)
        assert ref.shape == (128,)
        assert np.all(np.isfinite(ref))
