"""Order condition checks for MRI-GARK methods.

All conditions are evaluated on the exact rational coefficients of a method,
so residuals of rational methods are literally zero. Methods built on the
irrational diagonal coefficient are checked against a small tolerance instead.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass
from fractions import Fraction
from typing import Any

import numpy as np

from mri_gark.tableaux import MriGarkMethod

logger = logging.getLogger(__name__)

# Tolerance for methods whose coefficients depend on the diagonal root
INEXACT_TOL = 1e-20


def zeta(k: int) -> Fraction:
    """``int_0^1 int_0^theta t^k dt dtheta``."""
    return Fraction(1, (k + 1) * (k + 2))


def omega(k: int) -> Fraction:
    """``int_0^1 theta int_0^theta t^k dt dtheta``."""
    return Fraction(1, (k + 1) * (k + 3))


def xi(k: int) -> Fraction:
    """``int_0^1 int_0^theta int_0^sigma t^k dt dsigma dtheta``."""
    return Fraction(1, (k + 1) * (k + 2) * (k + 3))


@dataclass(frozen=True)
class BSeriesTables:
    """Exact-solution B-series coefficients used by the coupling conditions."""

    zeta: tuple[Fraction, ...]
    omega: tuple[Fraction, ...]
    xi: tuple[Fraction, ...]

    @classmethod
    def up_to(cls, degree: int) -> BSeriesTables:
        ks = range(degree + 1)
        return cls(
            zeta=tuple(zeta(k) for k in ks),
            omega=tuple(omega(k) for k in ks),
            xi=tuple(xi(k) for k in ks),
        )


@dataclass
class ConditionReport:
    """Outcome of one order condition."""

    condition_id: str
    lhs: float
    rhs: float
    residual: float
    passed: bool

    def to_dict(self) -> dict[str, Any]:
        data = asdict(self)
        return {
            "id": data["condition_id"],
            "lhs": data["lhs"],
            "rhs": data["rhs"],
            "residual": data["residual"],
            "pass": data["passed"],
        }


def default_tolerance(method: MriGarkMethod) -> float:
    """Zero for rational methods, INEXACT_TOL otherwise."""
    return 0.0 if method.exact else INEXACT_TOL


def make_report(condition_id: str, lhs: Any, rhs: Any, tol: float) -> ConditionReport:
    """Compare ``lhs`` with ``rhs`` before rounding either to float."""
    diff = lhs - rhs
    passed = bool(abs(diff) <= tol)
    if not passed:
        logger.debug("condition %s failed: residual %.3e", condition_id, float(diff))
    return ConditionReport(
        condition_id=condition_id,
        lhs=float(lhs),
        rhs=float(rhs),
        residual=float(abs(diff)),
        passed=passed,
    )


def all_passed(reports: list[ConditionReport]) -> bool:
    return all(r.passed for r in reports)


def check_internal_consistency(
    method: MriGarkMethod, tol: float | None = None
) -> list[ConditionReport]:
    """Check ``Gamma^0 1 = dc`` and ``Gamma^k 1 = 0`` for ``k >= 1``, row by row."""
    tol = default_tolerance(method) if tol is None else tol
    dc = method.base.dc
    gamma = method.gammas.gamma
    reports = []
    for k in range(gamma.shape[0]):
        for i in range(method.stages):
            target = dc[i] if k == 0 else Fraction(0)
            reports.append(make_report(f"internal.G{k}.row{i}", sum(gamma[k, i]), target, tol))
    return reports


# (tag, order, rhs) of the classical conditions through order four
_BASE_CONDITIONS = [
    ("1", 1, Fraction(1)),
    ("2", 2, Fraction(1, 2)),
    ("3a", 3, Fraction(1, 3)),
    ("3b", 3, Fraction(1, 6)),
    ("4a", 4, Fraction(1, 4)),
    ("4b", 4, Fraction(1, 8)),
    ("4c", 4, Fraction(1, 12)),
    ("4d", 4, Fraction(1, 24)),
]


def _base_lhs(tag: str, weights: np.ndarray, A: np.ndarray, c: np.ndarray) -> Any:
    Ac = A.dot(c)
    if tag == "1":
        return sum(weights)
    if tag == "2":
        return weights.dot(c)
    if tag == "3a":
        return weights.dot(c * c)
    if tag == "3b":
        return weights.dot(Ac)
    if tag == "4a":
        return weights.dot(c * c * c)
    if tag == "4b":
        return weights.dot(c * Ac)
    if tag == "4c":
        return weights.dot(A.dot(c * c))
    return weights.dot(A.dot(Ac))


def check_base_order(
    method: MriGarkMethod, p: int, tol: float | None = None
) -> list[ConditionReport]:
    """Classical Runge-Kutta conditions of the slow base tableau.

    ``b`` is checked through order ``p`` and ``b_hat`` (when present) through
    the method's embedded order.

    Raises:
        ValueError: If p is not in 1..4
    """
    if not 1 <= p <= 4:
        raise ValueError(f"Base order must lie in 1..4, got {p}")
    tol = default_tolerance(method) if tol is None else tol
    base = method.base
    checks = [("b", base.b, p)]
    if base.b_hat is not None and method.embedded_order > 0:
        checks.append(("b_hat", base.b_hat, min(method.embedded_order, 4)))
    reports = []
    for label, weights, order in checks:
        for tag, q, rhs in _BASE_CONDITIONS:
            if q <= order:
                lhs = _base_lhs(tag, weights, base.A, base.c)
                reports.append(make_report(f"base.{label}.{tag}", lhs, rhs, tol))
    return reports


def frak_A(method: MriGarkMethod) -> np.ndarray:
    """``A + sum_k zeta_k Gamma^k``."""
    gamma = method.gammas.gamma
    out = method.base.A.copy()
    for k in range(gamma.shape[0]):
        out = out + gamma[k] * zeta(k)
    return out


def z_vector(c: np.ndarray) -> np.ndarray:
    """``z[i] = c[i+1]^2 - c[i]^2`` with ``c[s] = 1``."""
    ext = list(c) + [Fraction(1)]
    return np.array([ext[i + 1] ** 2 - ext[i] ** 2 for i in range(len(c))], dtype=object)


def d_vector(dc: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``d[i] = dc[i] (1 - sum_{l<=i} b[l])``."""
    partial = np.cumsum(b)
    return np.array([dc[i] * (1 - partial[i]) for i in range(len(dc))], dtype=object)


def t_vector(dc: np.ndarray) -> np.ndarray:
    """``t[i] = sum_{j>i} dc[j]^2``."""
    sq = dc * dc
    return np.array([sum(sq[i + 1:]) for i in range(len(dc))], dtype=object)


def check_coupling_order3(method: MriGarkMethod, tol: float | None = None) -> ConditionReport:
    """Third order coupling condition ``dc^T frak_A c = 1/6``."""
    tol = default_tolerance(method) if tol is None else tol
    dc, c = method.base.dc, method.base.c
    lhs = dc.dot(frak_A(method).dot(c))
    return make_report("coupling.3", lhs, Fraction(1, 6), tol)


def check_coupling_order4(
    method: MriGarkMethod, tol: float | None = None
) -> list[ConditionReport]:
    """The five fourth order coupling conditions."""
    tol = default_tolerance(method) if tol is None else tol
    base = method.base
    A, b, c, dc = base.A, base.b, base.c, base.dc
    gamma = method.gammas.gamma
    degree = gamma.shape[0] - 1
    fA = frak_A(method)
    z, d, t = z_vector(c), d_vector(dc, b), t_vector(dc)

    lhs_a = A.dot(c).dot(z) / 2
    for k in range(degree + 1):
        lhs_a += (dc * (c * zeta(k) + dc * omega(k))).dot(gamma[k].dot(c))
    lhs_c = dc.dot(fA.dot(c * c))
    lhs_f = d.dot(fA.dot(c))
    inner = A / 2
    for k in range(degree + 1):
        inner = inner + gamma[k] * xi(k)
    lhs_h = (dc * dc).dot(inner.dot(c)) + t.dot(fA.dot(c))
    lhs_i = dc.dot(fA.dot(A.dot(c)))

    return [
        make_report("coupling.4A", lhs_a, Fraction(1, 8), tol),
        make_report("coupling.4C", lhs_c, Fraction(1, 12), tol),
        make_report("coupling.4F", lhs_f, Fraction(1, 24), tol),
        make_report("coupling.4H", lhs_h, Fraction(1, 24), tol),
        make_report("coupling.4I", lhs_i, Fraction(1, 24), tol),
    ]


def verify_method(
    method: MriGarkMethod, order: int | None = None, tol: float | None = None
) -> list[ConditionReport]:
    """Run every check needed to certify ``order`` (default: the declared order)."""
    order = method.order if order is None else order
    if not 1 <= order <= 4:
        raise ValueError(f"Order must lie in 1..4, got {order}")
    reports = check_internal_consistency(method, tol)
    reports += check_base_order(method, order, tol)
    if order >= 3:
        reports.append(check_coupling_order3(method, tol))
    if order >= 4:
        reports += check_coupling_order4(method, tol)
    failed = sum(not r.passed for r in reports)
    logger.debug("%s order %d: %d checks, %d failed", method.name, order, len(reports), failed)
    return reports
