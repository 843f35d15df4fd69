"""Convergence studies: fixed-step runs at halving step sizes and order fits."""

from __future__ import annotations

import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime
from typing import Any, Callable, TextIO

import numpy as np
from scipy.stats import linregress

from mri_gark.integrator import (
    InnerMode,
    InnerSolveConfig,
    NewtonConfig,
    StepStats,
    integrate,
    rms_norm,
)
from mri_gark.problems import Problem
from mri_gark.tableaux import MriGarkMethod

# Rows with error at or below FLOOR_FACTOR * inner tolerance are floor-limited
FLOOR_FACTOR = 100.0
MIN_LEVELS = 3
MIN_FIT_ROWS = 3


@dataclass
class LevelResult:
    """Outcome of one fixed-step run."""

    H: float
    steps: int = 0
    error: float = math.nan
    error_estimate: float = math.nan
    floor_limited: bool = False
    success: bool = True
    error_message: str | None = None
    stats: StepStats = field(default_factory=StepStats)
    duration_seconds: float = 0.0


def fit_order(H: list[float], values: list[float]) -> float | None:
    """Least-squares slope of ``log(values)`` against ``log(H)``."""
    if len(H) < 2:
        return None
    fit = linregress(np.log(H), np.log(values))
    return float(fit.slope)


@dataclass
class ConvergenceReport:
    """Errors at each step size and the fitted observed order."""

    method: str
    problem: str
    inner: dict[str, Any]
    rows: list[LevelResult] = field(default_factory=list)
    start_time: datetime = field(default_factory=datetime.now)
    end_time: datetime | None = None

    @property
    def failed(self) -> bool:
        return any(not r.success for r in self.rows)

    @property
    def fit_rows(self) -> list[LevelResult]:
        """Rows used for the fit: successful, above the floor, coarsest excluded."""
        return [r for r in self.rows[1:] if r.success and not r.floor_limited and r.error > 0]

    @property
    def observed_order(self) -> float | None:
        rows = self.fit_rows
        if len(rows) < MIN_FIT_ROWS:
            return None
        return fit_order([r.H for r in rows], [r.error for r in rows])

    @property
    def embedded_estimate_order(self) -> float | None:
        """Slope of the largest per-step embedded estimate against H."""
        rows = [r for r in self.fit_rows if r.error_estimate > 0]
        if len(rows) < MIN_FIT_ROWS:
            return None
        return fit_order([r.H for r in rows], [r.error_estimate for r in rows])

    @property
    def duration_seconds(self) -> float:
        if self.end_time is None:
            return 0.0
        return (self.end_time - self.start_time).total_seconds()

    def to_dict(self) -> dict[str, Any]:
        return {
            "method": self.method,
            "problem": self.problem,
            "inner": self.inner,
            "rows": [
                {
                    "H": r.H,
                    "steps": r.steps,
                    "error": r.error,
                    "error_estimate": r.error_estimate,
                    "floor_limited": r.floor_limited,
                    "success": r.success,
                    "error_message": r.error_message,
                    "stats": r.stats.to_dict(),
                }
                for r in self.rows
            ],
            "observed_order": self.observed_order,
            "embedded_estimate_order": self.embedded_estimate_order,
            "failed": self.failed,
        }

    def write_csv(self, out: TextIO) -> None:
        out.write("H,steps,error,error_estimate,floor_limited\n")
        for r in self.rows:
            out.write(
                f"{r.H:.17g},{r.steps},{r.error:.17g},{r.error_estimate:.17g},"
                f"{int(r.floor_limited)}\n"
            )


class ConvergenceStudy:
    """Runs one method on one problem at step sizes H0, H0/2, ..."""

    def __init__(
        self,
        method: MriGarkMethod,
        problem: Problem,
        inner: InnerSolveConfig | None = None,
        newton: NewtonConfig | None = None,
        threads: int = 1,
        reference_tol: float = 1e-12,
        output: TextIO | None = None,
    ):
        self.method = method
        self.problem = problem
        self.inner = inner or InnerSolveConfig()
        self.newton = newton or NewtonConfig()
        self.threads = max(1, threads)
        self.reference_tol = reference_tol
        self.output = output or sys.stdout
        self._progress_callback: Callable[[str], None] | None = None
        self._reference: np.ndarray | None = None
        self.finest_trajectory = None

    def set_progress_callback(self, callback: Callable[[str], None]) -> None:
        """Set a callback for progress updates."""
        self._progress_callback = callback

    def _log(self, message: str) -> None:
        """Log a message to output."""
        print(message, file=self.output)
        if self._progress_callback:
            self._progress_callback(message)

    @property
    def floor(self) -> float:
        """Error level below which the inner solver, not the method, dominates."""
        if self.inner.mode is InnerMode.FIXED:
            return 0.0
        return FLOOR_FACTOR * max(self.inner.rel_tol, self.inner.abs_tol)

    def reference(self) -> np.ndarray:
        if self._reference is None:
            if self.problem.exact is None:
                self._log(f"Computing reference solution at tol {self.reference_tol:g}")
            self._reference = self.problem.reference(self.reference_tol)
        return self._reference

    def run_level(self, H: float) -> LevelResult:
        """Integrate once with step H and measure the final error."""
        start = time.monotonic()
        p = self.problem
        try:
            traj = integrate(self.method, p.system, p.t0, p.tf, H, p.y0, self.inner, self.newton)
        except Exception as e:
            self._log(f"  H = {H:.6g}: FAILED: {e}")
            return LevelResult(H=H, success=False, error_message=str(e),
                               duration_seconds=time.monotonic() - start)
        error = rms_norm(traj.final - self.reference())
        if not math.isfinite(error):
            message = f"non-finite error {error} against the reference"
            self._log(f"  H = {H:.6g}: FAILED: {message}")
            return LevelResult(H=H, steps=len(traj.times) - 1, success=False, error_message=message,
                               stats=traj.stats, duration_seconds=time.monotonic() - start)
        estimate = max(traj.error_estimates, default=0.0)
        result = LevelResult(
            H=H,
            steps=len(traj.times) - 1,
            error=error,
            error_estimate=estimate,
            floor_limited=error <= self.floor,
            stats=traj.stats,
            duration_seconds=time.monotonic() - start,
        )
        flag = " (floor)" if result.floor_limited else ""
        self._log(f"  H = {H:.6g}: error {error:.3e}, {result.steps} steps{flag}")
        if self.finest_trajectory is None or len(traj.times) > len(self.finest_trajectory.times):
            self.finest_trajectory = traj
        return result

    def run(self, H0: float | None = None, levels: int = 6) -> ConvergenceReport:
        """Run ``levels`` halvings starting at ``H0`` (default: ``problem.default_H0``).

        Raises:
            ValueError: If fewer than MIN_LEVELS levels are requested
        """
        if levels < MIN_LEVELS:
            raise ValueError(f"At least {MIN_LEVELS} levels are required, got {levels}")
        H0 = self.problem.default_H0 if H0 is None else H0
        if H0 <= 0:
            raise ValueError(f"H0 must be positive, got {H0}")
        steps = [H0 / 2**k for k in range(levels)]
        inner = {
            "mode": self.inner.mode.value,
            "rel_tol": self.inner.rel_tol,
            "abs_tol": self.inner.abs_tol,
            "substeps": self.inner.substeps,
            "order": self.inner.order,
        }
        report = ConvergenceReport(method=self.method.name, problem=self.problem.name, inner=inner)
        self._log(f"Convergence study: {self.method.name} on {self.problem.name}, {levels} levels")
        warning = self.inner.order_warning(self.method.order)
        if warning:
            self._log(f"Warning: {warning}")

        self.reference()
        if self.threads > 1:
            with ThreadPoolExecutor(max_workers=self.threads) as pool:
                report.rows = list(pool.map(self.run_level, steps))
        else:
            for H in steps:
                report.rows.append(self.run_level(H))
                if not report.rows[-1].success:
                    break
        report.end_time = datetime.now()

        self._log("")
        order = report.observed_order
        order_text = "n/a" if order is None else f"{order:.2f}"
        self._log(
            f"Observed order {order_text} (declared {self.method.order}); "
            f"duration {report.duration_seconds:.1f}s"
        )
        return report
