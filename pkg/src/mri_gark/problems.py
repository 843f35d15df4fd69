"""Benchmark and test problems in partitioned form."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, fields, replace
from typing import Any, Callable

import numpy as np
import scipy.sparse
from scipy.integrate import solve_ivp

from mri_gark.integrator import AdditiveSystem, ComponentSystem
from mri_gark.stability import CoupledTestProblem


class ProblemDomainError(ValueError):
    """Raised when a state leaves the domain of a right-hand side."""


# --- Gray-Scott -------------------------------------------------------------------


@dataclass(frozen=True)
class GrayScottParams:
    """Gray-Scott reaction-diffusion on the periodic unit square."""

    eps_u: float = 0.0625
    eps_v: float = 0.0312
    feed: float = 0.0180
    kill: float = 0.0520
    n: int = 32
    tf: float = 2.0

    def __post_init__(self) -> None:
        for name in ("eps_u", "eps_v", "feed", "kill", "tf"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.n < 4:
            raise ValueError(f"grid size n must be at least 4, got {self.n}")


def periodic_laplacian(n: int) -> scipy.sparse.csr_matrix:
    """Five-point Laplacian on an ``n x n`` periodic grid with spacing ``1/n``."""
    main = -2.0 * np.ones(n)
    off = np.ones(n - 1)
    D = scipy.sparse.diags([off, main, off], [-1, 0, 1], format="lil")
    D[0, n - 1] = 1.0
    D[n - 1, 0] = 1.0
    D = D.tocsr() * (n * n)
    eye = scipy.sparse.identity(n, format="csr")
    return (scipy.sparse.kron(eye, D) + scipy.sparse.kron(D, eye)).tocsr()


def gray_scott(params: GrayScottParams | None = None) -> AdditiveSystem:
    """Slow linear diffusion plus fast reaction; state ``[u.ravel(), v.ravel()]``."""
    p = params or GrayScottParams()
    N = p.n * p.n
    lap = periodic_laplacian(p.n)
    diffusion = scipy.sparse.block_diag([p.eps_u * lap, p.eps_v * lap], format="csr")

    def f_slow(t: float, y: np.ndarray) -> np.ndarray:
        return diffusion @ y

    def f_fast(t: float, y: np.ndarray) -> np.ndarray:
        u, v = y[:N], y[N:]
        uv2 = u * v * v
        return np.concatenate([-uv2 + p.feed * (1 - u), uv2 - (p.feed + p.kill) * v])

    def jac_slow(t: float, y: np.ndarray) -> scipy.sparse.csr_matrix:
        return diffusion

    return AdditiveSystem(dimension=2 * N, f_slow=f_slow, f_fast=f_fast, jac_slow=jac_slow)


def gray_scott_initial_state(params: GrayScottParams | None = None) -> np.ndarray:
    """``u = 1, v = 0`` with ``u = 1/2, v = 1/4`` on the centred square of area 1/4."""
    p = params or GrayScottParams()
    u = np.ones((p.n, p.n))
    v = np.zeros((p.n, p.n))
    lo, hi = p.n // 4, p.n - p.n // 4
    u[lo:hi, lo:hi] = 0.5
    v[lo:hi, lo:hi] = 0.25
    return np.concatenate([u.ravel(), v.ravel()])


def monolithic_reference(
    sys: AdditiveSystem, t0: float, tf: float, y0: np.ndarray, tol: float = 1e-12
) -> np.ndarray:
    """Solve ``y' = f_slow + f_fast`` in one piece with the adaptive 5(4) pair."""
    sol = solve_ivp(
        lambda t, y: sys.f_slow(t, y) + sys.f_fast(t, y),
        (t0, tf),
        np.asarray(y0, dtype=float),
        method="RK45",
        rtol=tol,
        atol=tol,
    )
    if not sol.success:
        raise RuntimeError(f"reference solve failed: {sol.message}")
    return sol.y[:, -1]


# --- KPR ------------------------------------------------------------------------


@dataclass(frozen=True)
class KprParams:
    """Nonlinear two-component Prothero-Robinson type problem."""

    lambda_f: float = -10.0
    lambda_s: float = -1.0
    xi: float = 0.1
    alpha: float = 1.0
    omega: float = 20.0
    tf: float = 5 * math.pi / 2

    def __post_init__(self) -> None:
        if not (self.lambda_f < 0 and self.lambda_s < 0):
            raise ValueError("lambda_f and lambda_s must be negative")
        if not 0 < self.xi < 1:
            raise ValueError(f"xi must lie in (0, 1), got {self.xi}")
        if self.omega <= 0:
            raise ValueError(f"omega must be positive, got {self.omega}")
        if self.alpha == 0:
            raise ValueError("alpha must be nonzero")

    @property
    def coupling(self) -> CoupledTestProblem:
        return CoupledTestProblem(self.lambda_f, self.lambda_s, self.xi, self.alpha)


def kpr_exact(params: KprParams, t: float) -> tuple[np.ndarray, np.ndarray]:
    return (
        np.array([math.sqrt(3 + math.cos(params.omega * t))]),
        np.array([math.sqrt(2 + math.cos(t))]),
    )


def kpr(params: KprParams | None = None) -> tuple[ComponentSystem, Callable[[float], tuple[np.ndarray, np.ndarray]]]:
    """Return the KPR system and its exact solution ``t -> (y_f, y_s)``."""
    p = params or KprParams()
    Om = p.coupling.omega.real

    def _terms(t: float, yf: np.ndarray, ys: np.ndarray) -> tuple[float, float]:
        a, b = float(yf[0]), float(ys[0])
        if a <= 0 or b <= 0:
            raise ProblemDomainError(f"KPR state must stay positive, got y_f={a}, y_s={b} at t={t}")
        return (-3 + a * a - math.cos(p.omega * t)) / (2 * a), (-2 + b * b - math.cos(t)) / (2 * b)

    def f_fast(t: float, yf: np.ndarray, ys: np.ndarray) -> np.ndarray:
        g, h = _terms(t, yf, ys)
        return np.array([Om[0, 0] * g + Om[0, 1] * h - p.omega * math.sin(p.omega * t) / (2 * yf[0])])

    def f_slow(t: float, yf: np.ndarray, ys: np.ndarray) -> np.ndarray:
        g, h = _terms(t, yf, ys)
        return np.array([Om[1, 0] * g + Om[1, 1] * h - math.sin(t) / (2 * ys[0])])

    def jac_slow_ys(t: float, yf: np.ndarray, ys: np.ndarray) -> np.ndarray:
        b = float(ys[0])
        dh = 0.5 + (2 + math.cos(t)) / (2 * b * b)
        return np.array([[Om[1, 1] * dh + math.sin(t) / (2 * b * b)]])

    system = ComponentSystem(n_fast=1, n_slow=1, f_fast=f_fast, f_slow=f_slow,
                             jac_slow_ys=jac_slow_ys)
    return system, lambda t: kpr_exact(p, t)


# --- linear test problems ----------------------------------------------------------


def linear_scalar(lambda_f: float, lambda_s: float) -> AdditiveSystem:
    """``y' = lambda_f y + lambda_s y`` split into fast and slow parts."""
    lf, ls = float(lambda_f), float(lambda_s)
    return AdditiveSystem(
        dimension=1,
        f_slow=lambda t, y: ls * y,
        f_fast=lambda t, y: lf * y,
        jac_slow=lambda t, y: np.array([[ls]]),
    )


def _real(value: complex, name: str) -> float:
    if complex(value).imag != 0:
        raise ValueError(f"{name} must be real for time integration, got {value}")
    return float(complex(value).real)


def linear_2d(problem: CoupledTestProblem) -> ComponentSystem:
    """The coupled linear test problem ``y' = Omega y`` in component form."""
    lf = _real(problem.lambda_f, "lambda_f")
    ls = _real(problem.lambda_s, "lambda_s")
    es = _real(problem.eta_s, "eta_s")
    ef = _real(problem.eta_f, "eta_f")
    return ComponentSystem(
        n_fast=1,
        n_slow=1,
        f_fast=lambda t, yf, ys: lf * yf + es * ys,
        f_slow=lambda t, yf, ys: ef * yf + ls * ys,
        jac_slow_ys=lambda t, yf, ys: np.array([[ls]]),
    )


def linear_2d_exact_flow(problem: CoupledTestProblem, t: float) -> np.ndarray:
    """``exp(t Omega)`` from the closed form for 2x2 matrices."""
    Om = problem.omega
    m = (Om[0, 0] + Om[1, 1]) / 2
    shifted = Om - m * np.eye(2)
    q = cmath.sqrt(m * m - (Om[0, 0] * Om[1, 1] - Om[0, 1] * Om[1, 0]))
    if abs(q * t) < 1e-8:
        sinhc = t * (1 + (q * t) ** 2 / 6)
    else:
        sinhc = cmath.sinh(q * t) / q
    flow = cmath.exp(m * t) * (cmath.cosh(q * t) * np.eye(2) + sinhc * shifted)
    if np.all(np.isreal(Om)):
        return flow.real
    return flow


# --- registry ------------------------------------------------------------------


@dataclass(frozen=True)
class LinearScalarParams:
    lambda_f: float = -10.0
    lambda_s: float = -1.0
    y0: float = 1.0
    tf: float = 1.0


@dataclass(frozen=True)
class Linear2dParams:
    lambda_f: float = -10.0
    lambda_s: float = -1.0
    xi: float = 0.1
    alpha: float = 1.0
    tf: float = 1.0


@dataclass
class Problem:
    """A ready-to-run benchmark: system, initial value, interval, error reference."""

    name: str
    system: AdditiveSystem | ComponentSystem
    y0: np.ndarray
    t0: float
    tf: float
    params: Any
    exact: Callable[[float], np.ndarray] | None = None
    # Largest step a convergence study should start from; None means interval / 16
    max_H0: float | None = None

    @property
    def default_H0(self) -> float:
        H0 = (self.tf - self.t0) / 16
        return H0 if self.max_H0 is None else min(H0, self.max_H0)

    def reference(self, tol: float = 1e-12) -> np.ndarray:
        """Exact final state when known, else a tight monolithic solve."""
        if self.exact is not None:
            return self.exact(self.tf)
        if not isinstance(self.system, AdditiveSystem):
            raise ValueError(f"{self.name}: no reference available")
        return monolithic_reference(self.system, self.t0, self.tf, self.y0, tol)


def gray_scott_stable_H0(p: GrayScottParams) -> float:
    """Largest interval / 2**k with ``H * |lambda_max|`` at most 2 for the diffusion."""
    lambda_max = 8.0 * p.n * p.n * max(p.eps_u, p.eps_v)
    return p.tf / 2 ** max(0, math.ceil(math.log2(p.tf * lambda_max / 2.0)))


def _gray_scott_problem(p: GrayScottParams) -> Problem:
    return Problem("gray-scott", gray_scott(p), gray_scott_initial_state(p), 0.0, p.tf, p,
                   max_H0=gray_scott_stable_H0(p))


def _kpr_problem(p: KprParams) -> Problem:
    system, exact = kpr(p)

    def exact_state(t: float) -> np.ndarray:
        return np.concatenate(exact(t))

    return Problem("kpr", system, exact_state(0.0), 0.0, p.tf, p, exact_state)


def _linear_scalar_problem(p: LinearScalarParams) -> Problem:
    def exact(t: float) -> np.ndarray:
        return np.array([p.y0 * math.exp((p.lambda_f + p.lambda_s) * t)])

    return Problem("linear-scalar", linear_scalar(p.lambda_f, p.lambda_s),
                   np.array([p.y0]), 0.0, p.tf, p, exact)


def _linear_2d_problem(p: Linear2dParams) -> Problem:
    coupled = CoupledTestProblem(p.lambda_f, p.lambda_s, p.xi, p.alpha)
    y0 = np.array([1.0, 1.0])

    def exact(t: float) -> np.ndarray:
        return linear_2d_exact_flow(coupled, t) @ y0

    return Problem("linear-2d", linear_2d(coupled), y0, 0.0, p.tf, p, exact)


PROBLEMS: dict[str, tuple[type, Callable[[Any], Problem]]] = {
    "gray-scott": (GrayScottParams, _gray_scott_problem),
    "kpr": (KprParams, _kpr_problem),
    "linear-scalar": (LinearScalarParams, _linear_scalar_problem),
    "linear-2d": (Linear2dParams, _linear_2d_problem),
}


def parse_params(items: list[str] | tuple[str, ...]) -> dict[str, str]:
    """Parse ``key=value`` strings.

    Raises:
        ValueError: If an item has no '='
    """
    out = {}
    for item in items:
        if "=" not in item:
            raise ValueError(f"Invalid parameter '{item}'. Expected key=value")
        key, value = item.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def make_problem(name: str, overrides: dict[str, Any] | None = None) -> Problem:
    """Build a named problem with parameter overrides.

    Raises:
        ValueError: If the name or a parameter is unknown, or a value is invalid
    """
    try:
        params_cls, factory = PROBLEMS[name]
    except KeyError:
        raise ValueError(
            f"Unknown problem '{name}'. Available: {', '.join(sorted(PROBLEMS))}"
        ) from None
    params = params_cls()
    if overrides:
        kinds = {f.name: f.type for f in fields(params_cls)}
        changes = {}
        for key, raw in overrides.items():
            if key not in kinds:
                raise ValueError(
                    f"Unknown parameter '{key}' for {name}. Valid: {', '.join(kinds)}"
                )
            convert = int if kinds[key] in ("int", int) else float
            try:
                changes[key] = convert(raw)
            except (TypeError, ValueError):
                raise ValueError(f"Invalid value for {key}: {raw!r}") from None
        params = replace(params, **changes)
    return factory(params)
