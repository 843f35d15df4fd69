"""One-step MRI-GARK integration of fast/slow partitioned systems.

Each step walks the slow stages ``Y_0 = y_n, Y_1, ..., Y_s = y_{n+1}``. Between
stages with distinct abscissae a modified fast ODE is solved over a window of
length ``H``; its forcing is a polynomial in time built from cached slow
rates. Consecutive stages sharing an abscissa are plain Runge-Kutta stages,
implicit in the slow variables when the coupling table has a superdiagonal
entry there.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Any, Callable, TextIO

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg
from scipy.integrate import solve_ivp

from mri_gark.gark_expansion import FAST_BY_ORDER, FastRK, fast_method
from mri_gark.tableaux import MriGarkMethod, NumericCoefficients

logger = logging.getLogger(__name__)

FD_EPS = math.sqrt(np.finfo(float).eps)
SLOW_CONVERGENCE_RATE = 0.5


class NewtonConvergenceError(RuntimeError):
    """Raised when an implicit slow stage does not converge."""

    def __init__(self, stage: int, residual: float, iterations: int) -> None:
        self.stage = stage
        self.residual = residual
        self.iterations = iterations
        super().__init__(
            f"Newton iteration for stage {stage} did not converge in {iterations} "
            f"iterations (last update norm {residual:.3e})"
        )


class InnerSolveError(RuntimeError):
    """Raised when the fast solver fails."""


class StepError(RuntimeError):
    """Raised by integrate() when a step fails."""

    def __init__(self, step: int, t: float, cause: BaseException) -> None:
        self.step = step
        self.t = t
        super().__init__(f"step {step} at t = {t:.17g} failed: {cause}")


class InnerMode(Enum):
    ADAPTIVE = "adaptive"
    FIXED = "fixed"


class StepMode(Enum):
    FIXED_STEP = "fixed_step"


@dataclass
class InnerSolveConfig:
    """How the modified fast ODEs are solved.

    Adaptive mode uses the embedded 5(4) pair of ``solve_ivp``; fixed mode takes
    ``substeps`` equal steps of an explicit Runge-Kutta method of order ``order``.
    """

    mode: InnerMode = InnerMode.ADAPTIVE
    rel_tol: float = 1e-10
    abs_tol: float = 1e-10
    substeps: int = 1
    order: int = 4

    def __post_init__(self) -> None:
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ValueError("inner tolerances must be positive")
        if self.substeps < 1:
            raise ValueError(f"substeps must be >= 1, got {self.substeps}")
        if self.order not in FAST_BY_ORDER:
            raise ValueError(f"fixed inner order must be one of {sorted(FAST_BY_ORDER)}")

    @property
    def fast_tableau(self) -> FastRK:
        return fast_method(FAST_BY_ORDER[self.order])

    def order_warning(self, p: int) -> str | None:
        """Message when a fixed inner order q is below the q >= p - 1 rule."""
        if self.mode is InnerMode.FIXED and self.order < p - 1:
            return (
                f"fixed inner order {self.order} is below {p - 1}; "
                f"the step may not reach order {p}"
            )
        return None


@dataclass
class NewtonConfig:
    max_iter: int = 50
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12


@dataclass(frozen=True)
class AdditiveSystem:
    """``y' = f_slow(t, y) + f_fast(t, y)``."""

    dimension: int
    f_slow: Callable[[float, np.ndarray], np.ndarray]
    f_fast: Callable[[float, np.ndarray], np.ndarray]
    jac_slow: Callable[[float, np.ndarray], Any] | None = None


@dataclass(frozen=True)
class ComponentSystem:
    """``y_f' = f_fast(t, y_f, y_s)``, ``y_s' = f_slow(t, y_f, y_s)``."""

    n_fast: int
    n_slow: int
    f_fast: Callable[[float, np.ndarray, np.ndarray], np.ndarray]
    f_slow: Callable[[float, np.ndarray, np.ndarray], np.ndarray]
    jac_slow_ys: Callable[[float, np.ndarray, np.ndarray], Any] | None = None

    @property
    def dimension(self) -> int:
        return self.n_fast + self.n_slow

    def split(self, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return y[: self.n_fast], y[self.n_fast:]


@dataclass
class StepStats:
    steps: int = 0
    slow_rhs: int = 0
    fast_rhs: int = 0
    newton_iters: int = 0
    rejected_inner_steps: int = 0

    def add(self, other: StepStats) -> None:
        self.steps += other.steps
        self.slow_rhs += other.slow_rhs
        self.fast_rhs += other.fast_rhs
        self.newton_iters += other.newton_iters
        self.rejected_inner_steps += other.rejected_inner_steps

    def to_dict(self) -> dict[str, int]:
        return asdict(self)


@dataclass
class StepResult:
    y_next: np.ndarray
    y_embedded: np.ndarray | None
    error_estimate: float
    stats: StepStats
    n_fast: int | None = None

    @property
    def y_fast(self) -> np.ndarray:
        return self.y_next[: self.n_fast]

    @property
    def y_slow(self) -> np.ndarray:
        return self.y_next[self.n_fast:]


def rms_norm(v: np.ndarray, scale: np.ndarray | float | None = None) -> float:
    """``||v / scale||_2 / sqrt(n)`` (``scale`` defaults to 1)."""
    v = np.asarray(v, dtype=float)
    if v.size == 0:
        return 0.0
    if scale is not None:
        v = v / scale
    return float(np.linalg.norm(v) / math.sqrt(v.size))


# --- inner solves ------------------------------------------------------------


def _inner_solve(
    rhs: Callable[[float, np.ndarray], np.ndarray],
    v0: np.ndarray,
    H: float,
    inner: InnerSolveConfig,
    stats: StepStats,
) -> np.ndarray:
    if inner.mode is InnerMode.FIXED:
        return _fixed_rk(rhs, v0, H, inner.substeps, inner.fast_tableau)
    sol = solve_ivp(rhs, (0.0, H), v0, method="RK45", rtol=inner.rel_tol, atol=inner.abs_tol)
    if not sol.success:
        raise InnerSolveError(f"fast solve failed: {sol.message}")
    # RK45: two start-up evaluations, then six per attempted step
    attempts = max(0, (sol.nfev - 2) // 6)
    stats.rejected_inner_steps += max(0, attempts - (len(sol.t) - 1))
    return sol.y[:, -1]


def _fixed_rk(
    rhs: Callable[[float, np.ndarray], np.ndarray],
    v0: np.ndarray,
    H: float,
    substeps: int,
    tab: FastRK,
) -> np.ndarray:
    A = np.array(tab.A, dtype=float)
    b = np.array(tab.b, dtype=float)
    c = np.array(tab.c, dtype=float)
    h = H / substeps
    v = np.array(v0, dtype=float)
    for m in range(substeps):
        theta = m * h
        k = []
        for ell in range(len(b)):
            arg = v + h * sum(A[ell, j] * k[j] for j in range(ell) if A[ell, j] != 0)
            k.append(np.asarray(rhs(theta + c[ell] * h, arg), dtype=float))
        v = v + h * sum(b[ell] * k[ell] for ell in range(len(b)) if b[ell] != 0)
    return v


def stage_forcing(gamma_rows: np.ndarray, rates: dict[int, np.ndarray], n: int) -> np.ndarray:
    """Polynomial coefficients ``g_k = sum_j gamma_rows[k, j] f_j``, shape (K+1, n)."""
    out = np.zeros((gamma_rows.shape[0], n))
    for k in range(gamma_rows.shape[0]):
        for j, weight in enumerate(gamma_rows[k]):
            if weight != 0:
                out[k] += weight * rates[j]
    return out


def _polynomial(forcing: np.ndarray, tau: float) -> np.ndarray:
    out = forcing[-1].copy()
    for k in range(forcing.shape[0] - 2, -1, -1):
        out = out * tau + forcing[k]
    return out


def _integrated_polynomial(forcing: np.ndarray, tau: float) -> np.ndarray:
    """``sum_k g_k tau^(k+1) / (k+1)``."""
    out = np.zeros(forcing.shape[1])
    for k in range(forcing.shape[0]):
        out += forcing[k] * tau ** (k + 1) / (k + 1)
    return out


def solve_modified_fast_ode(
    method: MriGarkMethod,
    i: int,
    forcing: np.ndarray,
    v0: np.ndarray,
    t: float,
    H: float,
    f_fast: Callable[[float, np.ndarray], np.ndarray],
    inner: InnerSolveConfig | None = None,
    stats: StepStats | None = None,
) -> np.ndarray:
    """Solve ``v' = dc_i f_fast(T_i + dc_i theta, v) + sum_k (theta/H)^k g_k`` on [0, H].

    Args:
        method: The MRI-GARK method
        i: Stage index (the solve carries ``Y_i`` to ``Y_{i+1}``)
        forcing: Coefficients ``g_k`` from stage_forcing(), shape (K+1, n)
        v0: Initial value ``Y_i``
        t: Step start time
        H: Slow step size
        f_fast: Fast right-hand side
        inner: Inner solver configuration
        stats: Counters updated in place

    Returns:
        ``v(H)``
    """
    inner = inner or InnerSolveConfig()
    stats = stats if stats is not None else StepStats()
    co = method.coefficients
    dci = co.dc[i]
    Ti = t + co.c[i] * H

    def rhs(theta: float, v: np.ndarray) -> np.ndarray:
        stats.fast_rhs += 1
        return dci * np.asarray(f_fast(Ti + dci * theta, v)) + _polynomial(forcing, theta / H)

    return _inner_solve(rhs, np.asarray(v0, dtype=float), H, inner, stats)


# --- Newton ---------------------------------------------------------------------


def _fd_jacobian(f: Callable[[np.ndarray], np.ndarray], y: np.ndarray, f0: np.ndarray) -> np.ndarray:
    n = y.size
    J = np.empty((f0.size, n))
    for j in range(n):
        e = FD_EPS * max(1.0, abs(y[j]))
        yp = y.copy()
        yp[j] += e
        J[:, j] = (np.asarray(f(yp)) - f0) / e
    return J


class _IterationMatrix:
    """Factorisation of ``I - h J``, dense or sparse."""

    def __init__(self, J: Any, h: float) -> None:
        if scipy.sparse.issparse(J):
            n = J.shape[0]
            self._splu = scipy.sparse.linalg.splu(
                (scipy.sparse.identity(n, format="csc") - h * J).tocsc()
            )
            self._lu = None
        else:
            J = np.atleast_2d(np.asarray(J, dtype=float))
            self._lu = scipy.linalg.lu_factor(np.eye(J.shape[0]) - h * J)
            self._splu = None

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        if self._lu is not None:
            return scipy.linalg.lu_solve(self._lu, rhs)
        return self._splu.solve(rhs)


def _newton_solve(
    f: Callable[[np.ndarray], np.ndarray],
    jac: Callable[[np.ndarray], Any] | None,
    rhs_const: np.ndarray,
    h: float,
    y0: np.ndarray,
    config: NewtonConfig,
    stats: StepStats,
    stage: int,
) -> np.ndarray:
    """Simplified Newton for ``Y - h f(Y) = rhs_const``."""
    y = np.array(y0, dtype=float)

    def jacobian(y: np.ndarray, fy: np.ndarray) -> Any:
        if jac is not None:
            return jac(y)
        return _fd_jacobian(f, y, fy)

    fy = np.asarray(f(y))
    matrix = _IterationMatrix(jacobian(y, fy), h)
    previous = None
    update_norm = math.inf
    for iteration in range(1, config.max_iter + 1):
        stats.newton_iters += 1
        residual = y - h * fy - rhs_const
        delta = -matrix.solve(residual)
        y = y + delta
        update_norm = rms_norm(delta)
        if update_norm <= max(config.abs_tol, config.rel_tol * rms_norm(y)):
            logger.debug("stage %d: Newton converged in %d iterations", stage, iteration)
            return y
        fy = np.asarray(f(y))
        if previous is not None and previous > 0 and update_norm / previous > SLOW_CONVERGENCE_RATE:
            logger.warning(
                "stage %d: slow Newton convergence (rate %.2f), refreshing Jacobian",
                stage, update_norm / previous,
            )
            matrix = _IterationMatrix(jacobian(y, fy), h)
        previous = update_norm
    raise NewtonConvergenceError(stage, update_norm, config.max_iter)


def solve_implicit_slow_stage(
    method: MriGarkMethod,
    i: int,
    sys: AdditiveSystem,
    rates: dict[int, np.ndarray],
    Y_i: np.ndarray,
    t: float,
    H: float,
    newton: NewtonConfig | None = None,
    stats: StepStats | None = None,
) -> np.ndarray:
    """Solve ``Y = Y_i + H sum_{j<=i} gbar_ij f_j + H gbar_{i,i+1} f_slow(T_{i+1}, Y)``.

    Raises:
        NewtonConvergenceError: If the iteration cap is reached
    """
    newton = newton or NewtonConfig()
    stats = stats if stats is not None else StepStats()
    co = method.coefficients
    T = t + co.c[i + 1] * H

    def f(y: np.ndarray) -> np.ndarray:
        stats.slow_rhs += 1
        return np.asarray(sys.f_slow(T, y), dtype=float)

    jac = None if sys.jac_slow is None else (lambda y: sys.jac_slow(T, y))
    rhs_const = Y_i + H * _explicit_sum(co.gamma_bar[i], rates, i, Y_i.size)
    return _newton_solve(f, jac, rhs_const, H * co.gamma_bar[i, i + 1], Y_i, newton, stats, i + 1)


def _explicit_sum(weights: np.ndarray, rates: dict[int, np.ndarray], upto: int, n: int) -> np.ndarray:
    out = np.zeros(n)
    for j in range(upto + 1):
        if weights[j] != 0:
            out += weights[j] * rates[j]
    return out


def _used_columns(co: NumericCoefficients) -> set[int]:
    used = np.any(co.gamma != 0, axis=(0, 1))
    if co.gamma_hat is not None:
        used |= np.any(co.gamma_hat != 0, axis=0)
    return {int(j) for j in np.flatnonzero(used)}


def _implicit(co: NumericCoefficients, i: int) -> bool:
    return i + 1 < co.stages and co.gamma_bar[i, i + 1] != 0


# --- steps ------------------------------------------------------------------------


def step_additive(
    method: MriGarkMethod,
    sys: AdditiveSystem,
    t: float,
    y: np.ndarray,
    H: float,
    inner: InnerSolveConfig | None = None,
    newton: NewtonConfig | None = None,
) -> StepResult:
    """Advance ``y' = f_slow + f_fast`` from ``t`` to ``t + H``."""
    if H <= 0:
        raise ValueError(f"step size must be positive, got {H}")
    inner = inner or InnerSolveConfig()
    newton = newton or NewtonConfig()
    co = method.coefficients
    s = co.stages
    n = sys.dimension
    stats = StepStats(steps=1)
    used = _used_columns(co)
    rates: dict[int, np.ndarray] = {}

    def record(j: int, Y: np.ndarray) -> None:
        if j in used:
            stats.slow_rhs += 1
            rates[j] = np.asarray(sys.f_slow(t + co.c[j] * H, Y), dtype=float)

    def advance(i: int, Y_i: np.ndarray, gamma_rows: np.ndarray, gbar_row: np.ndarray) -> np.ndarray:
        if co.dc[i] == 0:
            return Y_i + H * _explicit_sum(gbar_row, rates, i, n)
        forcing = stage_forcing(gamma_rows, rates, n)
        return solve_modified_fast_ode(method, i, forcing, Y_i, t, H, sys.f_fast, inner, stats)

    Y = [np.array(y, dtype=float)]
    record(0, Y[0])
    for i in range(s):
        if _implicit(co, i):
            Y.append(solve_implicit_slow_stage(method, i, sys, rates, Y[i], t, H, newton, stats))
        else:
            Y.append(advance(i, Y[i], co.gamma[:, i, :], co.gamma_bar[i]))
        if i + 1 < s:
            record(i + 1, Y[i + 1])

    y_emb = None
    if co.gamma_hat is not None:
        y_emb = advance(s - 1, Y[s - 1], co.gamma_hat, co.gamma_hat_bar)
    return _finish(Y[s], y_emb, stats, None)


def _finish(
    y_next: np.ndarray, y_emb: np.ndarray | None, stats: StepStats, n_fast: int | None
) -> StepResult:
    est = 0.0 if y_emb is None else rms_norm(y_next - y_emb)
    logger.debug(
        "step done: error estimate %.3e, slow rhs %d, fast rhs %d, newton %d",
        est, stats.slow_rhs, stats.fast_rhs, stats.newton_iters,
    )
    return StepResult(y_next=y_next, y_embedded=y_emb, error_estimate=est, stats=stats,
                      n_fast=n_fast)


def step_component(
    method: MriGarkMethod,
    sys: ComponentSystem,
    t: float,
    y_f: np.ndarray,
    y_s: np.ndarray,
    H: float,
    inner: InnerSolveConfig | None = None,
    newton: NewtonConfig | None = None,
) -> StepResult:
    """Advance a component-partitioned system from ``t`` to ``t + H``.

    The fast solve between stages sees the slow variables as
    ``Y^s_i + H sum_j gtilde_ij(theta/H) f^s_j``; implicit stages are solved in
    the slow variables only, with the fast variables frozen.
    """
    if H <= 0:
        raise ValueError(f"step size must be positive, got {H}")
    inner = inner or InnerSolveConfig()
    newton = newton or NewtonConfig()
    co = method.coefficients
    s = co.stages
    nf, ns = sys.n_fast, sys.n_slow
    stats = StepStats(steps=1)
    used = _used_columns(co)
    rates: dict[int, np.ndarray] = {}

    def record(j: int, Yf: np.ndarray, Ys: np.ndarray) -> None:
        if j in used:
            stats.slow_rhs += 1
            rates[j] = np.asarray(sys.f_slow(t + co.c[j] * H, Yf, Ys), dtype=float)

    def advance(i: int, Yf: np.ndarray, Ys: np.ndarray, gamma_rows: np.ndarray,
                gbar_row: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        Ys_next = Ys + H * _explicit_sum(gbar_row, rates, i, ns)
        dci = co.dc[i]
        if dci == 0:
            return Yf, Ys_next
        forcing = stage_forcing(gamma_rows, rates, ns)
        Ti = t + co.c[i] * H

        def rhs(theta: float, v: np.ndarray) -> np.ndarray:
            stats.fast_rhs += 1
            slow = Ys + H * _integrated_polynomial(forcing, theta / H)
            return dci * np.asarray(sys.f_fast(Ti + dci * theta, v, slow), dtype=float)

        return _inner_solve(rhs, Yf, H, inner, stats), Ys_next

    Yf = [np.array(y_f, dtype=float)]
    Ys = [np.array(y_s, dtype=float)]
    record(0, Yf[0], Ys[0])
    for i in range(s):
        if _implicit(co, i):
            T = t + co.c[i + 1] * H
            frozen = Yf[i]

            def f(ys: np.ndarray, T: float = T, frozen: np.ndarray = frozen) -> np.ndarray:
                stats.slow_rhs += 1
                return np.asarray(sys.f_slow(T, frozen, ys), dtype=float)

            jac = None
            if sys.jac_slow_ys is not None:
                jac = (lambda ys, T=T, frozen=frozen: sys.jac_slow_ys(T, frozen, ys))
            rhs_const = Ys[i] + H * _explicit_sum(co.gamma_bar[i], rates, i, ns)
            Yf.append(frozen)
            Ys.append(_newton_solve(f, jac, rhs_const, H * co.gamma_bar[i, i + 1], Ys[i],
                                    newton, stats, i + 1))
        else:
            yf_next, ys_next = advance(i, Yf[i], Ys[i], co.gamma[:, i, :], co.gamma_bar[i])
            Yf.append(yf_next)
            Ys.append(ys_next)
        if i + 1 < s:
            record(i + 1, Yf[i + 1], Ys[i + 1])

    y_emb = None
    if co.gamma_hat is not None:
        ef, es = advance(s - 1, Yf[s - 1], Ys[s - 1], co.gamma_hat, co.gamma_hat_bar)
        y_emb = np.concatenate([ef, es])
    return _finish(np.concatenate([Yf[s], Ys[s]]), y_emb, stats, nf)


# --- trajectories ---------------------------------------------------------------


@dataclass
class Trajectory:
    """Fixed-step solution history."""

    times: list[float] = field(default_factory=list)
    states: list[np.ndarray] = field(default_factory=list)
    error_estimates: list[float] = field(default_factory=list)
    stats: StepStats = field(default_factory=StepStats)

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def as_array(self) -> np.ndarray:
        return np.vstack(self.states)

    def write_csv(self, out: TextIO) -> None:
        """Write ``t,y_0,...,y_{n-1}`` rows with 17 significant digits."""
        n = self.states[0].size
        out.write(",".join(["t"] + [f"y_{j}" for j in range(n)]) + "\n")
        for t, y in zip(self.times, self.states):
            out.write(",".join(f"{v:.17g}" for v in [t, *y]) + "\n")

    def write_stats(self, out: TextIO) -> None:
        json.dump(self.stats.to_dict(), out, indent=2)
        out.write("\n")


def step(
    method: MriGarkMethod,
    sys: AdditiveSystem | ComponentSystem,
    t: float,
    y: np.ndarray,
    H: float,
    inner: InnerSolveConfig | None = None,
    newton: NewtonConfig | None = None,
) -> StepResult:
    """Dispatch to step_additive() or step_component() (state concatenated)."""
    if isinstance(sys, ComponentSystem):
        y_f, y_s = sys.split(np.asarray(y, dtype=float))
        return step_component(method, sys, t, y_f, y_s, H, inner, newton)
    return step_additive(method, sys, t, y, H, inner, newton)


def integrate(
    method: MriGarkMethod,
    sys: AdditiveSystem | ComponentSystem,
    t0: float,
    tf: float,
    H: float,
    y0: np.ndarray,
    inner: InnerSolveConfig | None = None,
    newton: NewtonConfig | None = None,
    mode: StepMode = StepMode.FIXED_STEP,
) -> Trajectory:
    """Take fixed steps of size ``H`` from ``t0`` to ``tf``; the last step may be shorter.

    Raises:
        ValueError: If tf <= t0 or H <= 0
        StepError: If any step fails or leaves a non-finite state (the cause is chained)
    """
    if tf <= t0:
        raise ValueError(f"tf must exceed t0, got [{t0}, {tf}]")
    if H <= 0:
        raise ValueError(f"step size must be positive, got {H}")
    inner = inner or InnerSolveConfig()
    warning = inner.order_warning(method.order)
    if warning:
        logger.warning("%s: %s", method.name, warning)

    n_steps = max(1, math.ceil((tf - t0) / H - 1e-12))
    traj = Trajectory(times=[t0], states=[np.array(y0, dtype=float)])
    t, y = t0, traj.states[0]
    for k in range(n_steps):
        h = min(H, tf - t) if k == n_steps - 1 else H
        try:
            result = step(method, sys, t, y, h, inner, newton)
        except Exception as e:
            raise StepError(k, t, e) from e
        if not np.all(np.isfinite(result.y_next)):
            err = FloatingPointError("non-finite state")
            raise StepError(k, t, err) from err
        t = tf if k == n_steps - 1 else t0 + (k + 1) * H
        y = result.y_next
        traj.times.append(t)
        traj.states.append(y)
        traj.error_estimates.append(result.error_estimate)
        traj.stats.add(result.stats)
    logger.debug("%s: %d steps, stats %s", method.name, n_steps, traj.stats.to_dict())
    return traj
