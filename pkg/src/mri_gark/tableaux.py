"""MRI-GARK method coefficients and the built-in method registry.

A method is a slow base Runge-Kutta tableau ``(c, A, b, b_hat)`` plus a stack of
coupling matrices ``Gamma^k``. Row ``i`` of ``Gamma(tau) = sum_k Gamma^k tau^k``
holds the weights of the slow stage rates that force the fast ODE carrying
stage ``Y_i`` to ``Y_{i+1}``; the last row advances to the next step. The
embedded solution replaces that last row with ``gamma_hat``.

Coefficients are stored as exact ``Fraction`` entries in numpy object arrays.
Methods that depend on the diagonal coefficient lambda use a 50 digit rational
approximation of the root, so their identities hold to about 1e-45.
"""

from __future__ import annotations

import functools
import json
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Sequence

import mpmath
import numpy as np


class MethodKind(Enum):
    """Structure of the slow stages."""

    EXPLICIT = "explicit"
    DECOUPLED_IMPLICIT = "decoupled_implicit"


class UnknownMethodError(ValueError):
    """Raised when a method name is not in the registry."""


class InvalidMethodError(ValueError):
    """Raised when method coefficients violate a structural invariant."""


# Printed seed for the diagonal coefficient of the (E)SDIRK methods
LAMBDA_SEED = "0.435866521508458999416019"
LAMBDA_DIGITS = 50

# Default tolerance for invariant checks on non-exact coefficient sets
VALIDATION_TOL = 1e-14


def as_fraction(value: Any) -> Fraction:
    """Convert a coefficient given as int, Fraction, float or "p/q" string."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise ValueError(f"Invalid coefficient: {value!r}")
    if isinstance(value, (int, np.integer)):
        return Fraction(int(value))
    if isinstance(value, (float, np.floating)):
        return Fraction(float(value))
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except ValueError:
            raise ValueError(f"Invalid coefficient: {value!r}") from None
    raise ValueError(f"Invalid coefficient: {value!r}")


def rational_vector(values: Sequence[Any], length: int | None = None) -> np.ndarray:
    """Build an object array of Fractions, zero padded to ``length``."""
    n = len(values) if length is None else length
    out = np.full(n, Fraction(0), dtype=object)
    for j, v in enumerate(values):
        out[j] = as_fraction(v)
    return out


def rational_matrix(
    rows: Sequence[Sequence[Any]],
    s: int,
    columns: Sequence[int] | None = None,
) -> np.ndarray:
    """Build an ``s x s`` object matrix from ragged rows.

    ``columns`` maps the entries of each row to matrix columns. It is used for
    decoupled implicit methods, whose tables list only the columns of the
    stages that carry slow rates.
    """
    out = np.full((s, s), Fraction(0), dtype=object)
    for i, row in enumerate(rows):
        for j, v in enumerate(row):
            col = j if columns is None else columns[j]
            out[i, col] = as_fraction(v)
    return out


def increments(c: np.ndarray) -> np.ndarray:
    """Return ``dc`` with ``dc[i] = c[i+1] - c[i]`` and ``dc[-1] = 1 - c[-1]``."""
    s = len(c)
    return np.array([c[i + 1] - c[i] for i in range(s - 1)] + [1 - c[s - 1]], dtype=object)


@dataclass(frozen=True, eq=False)
class BaseTableau:
    """Slow base Runge-Kutta tableau."""

    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    b_hat: np.ndarray | None = None

    @property
    def stages(self) -> int:
        return len(self.c)

    @property
    def dc(self) -> np.ndarray:
        return increments(self.c)

    def violations(self, tol: float = VALIDATION_TOL) -> list[str]:
        """Return a description of every violated tableau invariant."""
        s = self.stages
        problems = []
        if self.A.shape != (s, s) or self.b.shape != (s,):
            return [f"inconsistent shapes: c {self.c.shape}, A {self.A.shape}, b {self.b.shape}"]
        if self.b_hat is not None and self.b_hat.shape != (s,):
            problems.append(f"b_hat has shape {self.b_hat.shape}, expected ({s},)")
        for i in range(s):
            if not 0 <= self.c[i] <= 1:
                problems.append(f"c[{i}] = {self.c[i]} outside [0, 1]")
        for i, d in enumerate(self.dc):
            if d < 0:
                problems.append(f"abscissae decrease at stage {i}")
        for i in range(s):
            if abs(sum(self.A[i]) - self.c[i]) > tol:
                problems.append(f"row sum of A[{i}] differs from c[{i}]")
        if abs(sum(self.b) - 1) > tol:
            problems.append("weights b do not sum to 1")
        if self.b_hat is not None and abs(sum(self.b_hat) - 1) > tol:
            problems.append("embedded weights b_hat do not sum to 1")
        return problems


@dataclass(frozen=True, eq=False)
class GammaStack:
    """Polynomial coupling coefficients.

    ``gamma`` has shape ``(K+1, s, s)`` and ``gamma_hat`` shape ``(K+1, s)``.
    """

    gamma: np.ndarray
    gamma_hat: np.ndarray | None = None

    @property
    def degree(self) -> int:
        return self.gamma.shape[0] - 1

    @property
    def stages(self) -> int:
        return self.gamma.shape[1]

    def violations(self, dc: np.ndarray) -> list[str]:
        """Return structural-zero violations for the given increments."""
        K1, s, s2 = self.gamma.shape
        if s != s2 or len(dc) != s:
            return [f"gamma stack has shape {self.gamma.shape} for {len(dc)} stages"]
        if self.gamma_hat is not None and self.gamma_hat.shape != (K1, s):
            return [f"gamma_hat has shape {self.gamma_hat.shape}, expected {(K1, s)}"]
        problems = []
        for k in range(K1):
            for i in range(s):
                for j in range(i + 2, s):
                    if self.gamma[k, i, j] != 0:
                        problems.append(f"Gamma^{k}[{i}][{j}] must be zero")
                if i + 1 < s and self.gamma[k, i, i + 1] != 0 and dc[i] != 0:
                    problems.append(
                        f"Gamma^{k}[{i}][{i + 1}] couples implicitly on a stage with dc != 0"
                    )
        return problems


def gamma_bar(gammas: GammaStack) -> np.ndarray:
    """Return the integrated coefficients ``sum_k Gamma^k / (k+1)``."""
    return sum(gammas.gamma[k] / (k + 1) for k in range(gammas.degree + 1))


def gamma_hat_bar(gammas: GammaStack) -> np.ndarray | None:
    """Return the integrated embedded row, or None without an embedded row."""
    if gammas.gamma_hat is None:
        return None
    return sum(gammas.gamma_hat[k] / (k + 1) for k in range(gammas.degree + 1))


def gamma_at(gammas: GammaStack, tau: Any) -> np.ndarray:
    """Evaluate ``Gamma(tau) = sum_k Gamma^k tau^k``.

    Raises:
        ValueError: If tau is outside [0, 1]
    """
    if not 0 <= tau <= 1:
        raise ValueError(f"tau must lie in [0, 1], got {tau}")
    out = gammas.gamma[0].copy()
    power = tau
    for k in range(1, gammas.degree + 1):
        out = out + gammas.gamma[k] * power
        power = power * tau
    return out


def reconstruct_base(gammas: GammaStack, s: int | None = None) -> BaseTableau:
    """Rebuild the base tableau from the integrated coefficients.

    ``A[i] = sum_{p<i} gamma_bar[p]``, ``b = sum_p gamma_bar[p]`` and ``c`` is
    the row sum of ``A``. With an embedded row, ``b_hat = A[s-1] + gamma_hat_bar``.
    """
    gb = gamma_bar(gammas)
    s = gammas.stages if s is None else s
    if gb.shape != (s, s):
        raise ValueError(f"gamma stack has {gb.shape[0]} stages, expected {s}")
    A = np.full((s, s), Fraction(0), dtype=object)
    for i in range(1, s):
        A[i] = A[i - 1] + gb[i - 1]
    b = A[s - 1] + gb[s - 1]
    c = np.array([sum(A[i]) for i in range(s)], dtype=object)
    ghb = gamma_hat_bar(gammas)
    b_hat = None if ghb is None else A[s - 1] + ghb
    return BaseTableau(c=c, A=A, b=b, b_hat=b_hat)


@dataclass(frozen=True)
class NumericCoefficients:
    """Floating point view of a method used by the solvers."""

    c: np.ndarray
    dc: np.ndarray
    A: np.ndarray
    b: np.ndarray
    gamma: np.ndarray
    gamma_bar: np.ndarray
    gamma_hat: np.ndarray | None
    gamma_hat_bar: np.ndarray | None

    @property
    def stages(self) -> int:
        return len(self.c)

    @property
    def degree(self) -> int:
        return self.gamma.shape[0] - 1


@dataclass(frozen=True, eq=False)
class MriGarkMethod:
    """A complete MRI-GARK scheme."""

    name: str
    order: int
    embedded_order: int
    base: BaseTableau
    gammas: GammaStack
    kind: MethodKind
    exact: bool = True
    description: str = ""

    @property
    def stages(self) -> int:
        return self.base.stages

    @property
    def has_embedded(self) -> bool:
        return self.gammas.gamma_hat is not None

    @functools.cached_property
    def coefficients(self) -> NumericCoefficients:
        """Float64 view of the coefficients, built on first use."""
        ghb = gamma_hat_bar(self.gammas)
        return NumericCoefficients(
            c=np.array(self.base.c, dtype=float),
            dc=np.array(self.base.dc, dtype=float),
            A=np.array(self.base.A, dtype=float),
            b=np.array(self.base.b, dtype=float),
            gamma=np.array(self.gammas.gamma, dtype=float),
            gamma_bar=np.array(gamma_bar(self.gammas), dtype=float),
            gamma_hat=None if self.gammas.gamma_hat is None
            else np.array(self.gammas.gamma_hat, dtype=float),
            gamma_hat_bar=None if ghb is None else np.array(ghb, dtype=float),
        )

    def violations(self, tol: float = VALIDATION_TOL) -> list[str]:
        """Return every violated method invariant."""
        problems = self.base.violations(tol)
        if problems:
            return problems
        problems = self.gammas.violations(self.base.dc)
        if problems:
            return problems
        s = self.stages
        if self.kind is MethodKind.EXPLICIT:
            for k in range(self.gammas.degree + 1):
                for i in range(s - 1):
                    if self.gammas.gamma[k, i, i + 1] != 0:
                        problems.append(f"explicit method has implicit entry Gamma^{k}[{i}][{i + 1}]")
        rebuilt = reconstruct_base(self.gammas, s)
        if _max_abs(rebuilt.A - self.base.A) > tol or _max_abs(rebuilt.b - self.base.b) > tol:
            problems.append("base tableau differs from the one implied by the gamma stack")
        return problems


def _max_abs(values: np.ndarray) -> Any:
    return max((abs(v) for v in np.ravel(values)), default=0)


def validate_method(method: MriGarkMethod, tol: float = VALIDATION_TOL) -> MriGarkMethod:
    """Return the method unchanged or raise InvalidMethodError."""
    problems = method.violations(tol)
    if problems:
        raise InvalidMethodError(f"{method.name}: " + "; ".join(problems))
    return method


def embedded_base_weights(method: MriGarkMethod) -> np.ndarray | None:
    """Weights the embedded row induces on the base scheme: ``A[s-1] + gamma_hat_bar``."""
    ghb = gamma_hat_bar(method.gammas)
    if ghb is None:
        return None
    return method.base.A[method.stages - 1] + ghb


# --- diagonal coefficient ---------------------------------------------------


def diagonal_lambda(digits: int = LAMBDA_DIGITS) -> mpmath.mpf:
    """Root of ``6 x^3 - 18 x^2 + 9 x - 1`` near the printed seed."""
    with mpmath.workdps(digits + 10):
        return mpmath.findroot(
            lambda x: 6 * x**3 - 18 * x**2 + 9 * x - 1,
            mpmath.mpf(LAMBDA_SEED),
        )


@functools.cache
def _lambda_fraction() -> Fraction:
    with mpmath.workdps(LAMBDA_DIGITS + 10):
        return Fraction(mpmath.nstr(diagonal_lambda(), LAMBDA_DIGITS))


# --- method families and built-ins -------------------------------------------


def _stack(mats: Sequence[np.ndarray], hats: Sequence[np.ndarray] | None) -> GammaStack:
    gamma = np.array(list(mats), dtype=object)
    gamma_hat = None if hats is None else np.array(list(hats), dtype=object)
    return GammaStack(gamma=gamma, gamma_hat=gamma_hat)


def erk22(c2: Any, name: str | None = None) -> MriGarkMethod:
    """Second order explicit family with free abscissa ``c2`` in (0, 1]."""
    c2 = as_fraction(c2)
    if not 0 < c2 <= 1:
        raise ValueError(f"c2 must lie in (0, 1], got {c2}")
    F = Fraction
    base = BaseTableau(
        c=rational_vector([0, c2]),
        A=rational_matrix([[], [c2]], 2),
        b=rational_vector([(2 * c2 - 1) / (2 * c2), 1 / (2 * c2)]),
        b_hat=rational_vector([1, 0]),
    )
    g0 = rational_matrix([[c2], [-(2 * c2**2 - 2 * c2 + 1) / (2 * c2), 1 / (2 * c2)]], 2)
    gh0 = rational_vector([1 - c2, F(0)])
    return MriGarkMethod(
        name=name or f"mri-erk22(c2={c2})",
        order=2,
        embedded_order=1,
        base=base,
        gammas=_stack([g0], [gh0]),
        kind=MethodKind.EXPLICIT,
        description=f"explicit, order 2, c2 = {c2}",
    )


def erk33(delta: Any, name: str | None = None) -> MriGarkMethod:
    """Third order explicit family with equidistant abscissae and free ``delta``."""
    d = as_fraction(delta)
    F = Fraction
    base = BaseTableau(
        c=rational_vector([0, F(1, 3), F(2, 3)]),
        A=rational_matrix([[], [F(1, 3)], [0, F(2, 3)]], 3),
        b=rational_vector([F(1, 4), 0, F(3, 4)]),
        b_hat=rational_vector([F(1, 12), F(1, 3), F(7, 12)]),
    )
    g0 = rational_matrix([
        [F(1, 3)],
        [(-6 * d - 7) / 12, (6 * d + 11) / 12],
        [0, (6 * d - 5) / 12, (3 - 2 * d) / 4],
    ], 3)
    g1 = rational_matrix([
        [],
        [(2 * d + 1) / 2, -(2 * d + 1) / 2],
        [F(1, 2), -(2 * d + 1) / 2, d],
    ], 3)
    gh0 = rational_vector([F(1, 12), F(-1, 3), F(7, 12)])
    gh1 = rational_vector([0, 0, 0])
    return MriGarkMethod(
        name=name or f"mri-erk33(delta={d})",
        order=3,
        embedded_order=2,
        base=base,
        gammas=_stack([g0, g1], [gh0, gh1]),
        kind=MethodKind.EXPLICIT,
        description=f"explicit, order 3, equidistant abscissae, delta = {d}",
    )


def _erk45a() -> MriGarkMethod:
    F = Fraction
    s = 5
    base = BaseTableau(
        c=rational_vector([0, F(1, 5), F(2, 5), F(3, 5), F(4, 5)]),
        A=rational_matrix([
            [],
            [F(1, 5)],
            [F(1, 32), F(59, 160)],
            [F(-1, 2), F(171, 64), F(-503, 320)],
            [F(125773, 379760), F(-183399, 379760), F(175277, 189880), F(136, 4747)],
        ], s),
        b=rational_vector([F(1, 32), F(1, 3), F(11, 48), F(-1, 12), F(47, 96)]),
        b_hat=rational_vector(
            [F(1, 8), F(6403, 71670), F(28571, 71670), F(-4681, 71670), F(129673, 286680)]
        ),
    )
    g0 = rational_matrix([
        [F(1, 5)],
        [F(-53, 16), F(281, 80)],
        [F(-36562993, 71394880), F(34903117, 17848720), F(-88770499, 71394880)],
        [F(-7631593, 71394880), F(-166232021, 35697440), F(6068517, 1519040),
         F(8644289, 8924360)],
        [F(277061, 303808), F(-209323, 1139280), F(-1360217, 1139280), F(-148789, 56964),
         F(147889, 45120)],
    ], s)
    g1 = rational_matrix([
        [],
        [F(503, 80), F(-503, 80)],
        [F(-1365537, 35697440), F(4963773, 7139488), F(-1465833, 2231090)],
        [F(66974357, 35697440), F(21445367, 7139488), -3, F(-8388609, 4462180)],
        [F(-18227, 7520), 2, 1, 5, F(-41933, 7520)],
    ], s)
    gh0 = rational_vector(
        [F(-1482837, 759520), F(175781, 71205), F(-790577, 1139280), F(-6379, 56964), F(47, 96)]
    )
    gh1 = rational_vector([F(6213, 1880), F(-6213, 1880), 0, 0, 0])
    return MriGarkMethod(
        name="mri-erk45a",
        order=4,
        embedded_order=3,
        base=base,
        gammas=_stack([g0, g1], [gh0, gh1]),
        kind=MethodKind.EXPLICIT,
        description="explicit, order 4, five equidistant stages",
    )


def _irk21a() -> MriGarkMethod:
    F = Fraction
    s = 3
    base = BaseTableau(
        c=rational_vector([0, 1, 1]),
        A=rational_matrix([[], [1], [F(1, 2), 0, F(1, 2)]], s),
        b=rational_vector([F(1, 2), 0, F(1, 2)]),
        b_hat=rational_vector([0, 0, 1]),
    )
    g0 = rational_matrix([[1], [F(-1, 2), 0, F(1, 2)], []], s)
    gh0 = rational_vector([F(-1, 2), 0, F(1, 2)])
    return MriGarkMethod(
        name="mri-irk21a",
        order=2,
        embedded_order=1,
        base=base,
        gammas=_stack([g0], [gh0]),
        kind=MethodKind.DECOUPLED_IMPLICIT,
        description="decoupled implicit trapezoidal rule, order 2",
    )


def _esdirk34a() -> MriGarkMethod:
    lam = _lambda_fraction()
    s = 7
    cols = [0, 2, 4, 6]
    F = Fraction
    l2, l3 = lam**2, lam**3
    A = rational_matrix([
        [],
        [F(1, 3)],
        [(1 - 3 * lam) / 3, lam],
        [(-24 * l2 + 4 * lam + 1) / (24 * lam - 6), (24 * l2 + 12 * lam - 5) / (24 * lam - 6)],
        [lam / (3 - 12 * lam), 2 * (6 * l2 - 6 * lam + 1) / (3 - 12 * lam), lam],
        [F(1, 4), 3 * lam, (3 - 12 * lam) / 4],
        [(1 - 4 * lam) / 4, 3 * lam, (3 - 12 * lam) / 4, lam],
    ], s, cols)
    g0 = rational_matrix([
        [F(1, 3)],
        [-lam, lam],
        [(3 - 10 * lam) / (24 * lam - 6), (5 - 18 * lam) / (6 - 24 * lam)],
        [(-24 * l2 + 6 * lam + 1) / (6 - 24 * lam), (-48 * l2 + 12 * lam + 1) / (24 * lam - 6),
         lam],
        [(3 - 16 * lam) / (12 - 48 * lam), (48 * l2 - 21 * lam + 2) / (12 * lam - 3),
         (3 - 16 * lam) / 4],
        [-lam, 0, 0, lam],
        [],
    ], s, cols)
    den = 4 * (6 * l2 - 6 * lam + 1) ** 2
    hat = [
        (576 * lam**6 + 1152 * lam**5 - 2406 * lam**4 + 1500 * l3 - 429 * l2 + 58 * lam - 3)
        / den,
        -6 * (216 * lam**6 + 432 * lam**5 - 906 * lam**4 + 552 * l3 - 153 * l2 + 20 * lam - 1)
        / den,
        3 * (4 * lam - 1)
        * (72 * lam**5 + 162 * lam**4 - 264 * l3 + 111 * l2 - 18 * lam + 1) / den,
        -4 * lam * (6 * l3 + 18 * l2 - 9 * lam + 1) * (6 * l2 - 6 * lam + 1) / den,
    ]
    gh0 = np.full(s, Fraction(0), dtype=object)
    for j, v in zip(cols, hat):
        gh0[j] = v
    base = BaseTableau(
        c=rational_vector([0, F(1, 3), F(1, 3), F(2, 3), F(2, 3), 1, 1]),
        A=A,
        b=A[s - 1].copy(),
        # the printed embedded weights disagree with the printed gamma_hat in
        # the third entry; the weights implied by gamma_hat sum to one
        b_hat=A[s - 1] + gh0,
    )
    return MriGarkMethod(
        name="mri-esdirk34a",
        order=3,
        embedded_order=2,
        base=base,
        gammas=_stack([g0], [gh0]),
        kind=MethodKind.DECOUPLED_IMPLICIT,
        exact=False,
        description="decoupled ESDIRK, order 3, stiffly accurate, equidistant abscissae",
    )


def _sdirk33a() -> MriGarkMethod:
    lam = _lambda_fraction()
    s = 7
    cols = [0, 2, 4, 6]
    l2, l3 = lam**2, lam**3
    c4 = (6 * l2 - 9 * lam + 2) / (6 * l2 - 12 * lam + 3)
    b2 = (1 - 4 * lam) / (-12 * l3 + 36 * l2 - 24 * lam + 4)
    b3 = -3 * (2 * l2 - 4 * lam + 1) ** 2 / (4 * (3 * l3 - 9 * l2 + 6 * lam - 1))
    A = rational_matrix([
        [],
        [lam],
        [0, lam],
        [0, c4],
        [0, c4 - lam, lam],
        [0, 3 * lam, 1 - 3 * lam],
        [0, b2, b3, lam],
    ], s, cols)
    c = rational_vector([0, lam, lam, c4, c4, 1, 1])
    b_hat = rational_vector([0, 0, 1 / (2 - 2 * lam), 0, 0, 0, (1 - 2 * lam) / (2 - 2 * lam)])
    base = BaseTableau(c=c, A=A, b=A[s - 1].copy(), b_hat=b_hat)

    # Time-constant coupling follows from the base increments. A linear
    # correction on the last fast stage (stage 4 -> 5) restores the
    # third order coupling condition dc^T (A + G0/2 + G1/6) c = 1/6.
    gb = np.full((s, s), Fraction(0), dtype=object)
    for i in range(s - 1):
        gb[i] = A[i + 1] - A[i]
    gb[s - 1] = base.b - A[s - 1]
    dc = base.dc
    frak = A + gb / 2
    excess = sum(dc[i] * sum(frak[i, j] * c[j] for j in range(s)) for i in range(s)) - Fraction(1, 6)
    x = 12 * excess / (dc[4] * (c[2] - c[4]))
    g1 = np.full((s, s), Fraction(0), dtype=object)
    g1[4, 2] = x
    g1[4, 4] = -x
    g0 = gb - g1 / 2
    gh0 = b_hat - A[s - 1]
    gh1 = np.full(s, Fraction(0), dtype=object)
    return MriGarkMethod(
        name="mri-sdirk33a",
        order=3,
        embedded_order=2,
        base=base,
        gammas=_stack([g0, g1], [gh0, gh1]),
        kind=MethodKind.DECOUPLED_IMPLICIT,
        exact=False,
        description="decoupled SDIRK, order 3, stiffly accurate",
    )


def _esdirk46a() -> MriGarkMethod:
    F = Fraction
    s = 11
    cols = [0, 2, 4, 6, 8, 10]
    A = rational_matrix([
        [],
        [F(1, 5)],
        [F(-1, 20), F(1, 4)],
        [0, F(2, 5)],
        [F(-103, 380), F(8, 19), F(1, 4)],
        [0, 0, F(3, 5)],
        [F(202381, 316160), F(2199, 31616), F(-1197, 3328), F(1, 4)],
        [0, 0, 0, F(4, 5)],
        [F(1978577, 3575040), F(20417, 119168), F(-3579, 12544), F(65, 588), F(1, 4)],
        [0, 0, 0, 0, 1],
        [F(1, 4), F(-7, 24), F(13, 24), F(13, 24), F(-7, 24), F(1, 4)],
    ], s, cols)
    g0 = rational_matrix([
        [F(1, 5)],
        [F(-1, 4), F(1, 4)],
        [F(1771023115159, 1929363690800), F(-1385150376999, 1929363690800)],
        [F(914009, 345800), F(-1000459, 345800), F(1, 4)],
        [F(18386293581909, 36657910125200), F(5506531089, 80566835440),
         F(-178423463189, 482340922700)],
        [F(36036097, 8299200), F(4621, 118560), F(-38434367, 8299200), F(1, 4)],
        [F(-247809665162987, 146631640500800), F(10604946373579, 14663164050080),
         F(10838126175385, 5865265620032), F(-24966656214317, 36657910125200)],
        [F(38519701, 11618880), F(10517363, 9682400), F(-23284701, 19364800),
         F(-10018609, 2904720), F(1, 4)],
        [F(-52907807977903, 33838070884800), F(74846944529257, 73315820250400),
         F(365022522318171, 146631640500800), F(-20513210406809, 109973730375600),
         F(-2918009798, 1870301537)],
        [F(19, 100), F(-73, 300), F(127, 300), F(127, 300), F(-313, 300), F(1, 4)],
        [],
    ], s, cols)
    g1 = rational_matrix([
        [],
        [],
        [F(-1674554930619, 964681845400), F(1674554930619, 964681845400)],
        [F(-1007739, 172900), F(1007739, 172900)],
        [F(-8450070574289, 18328955062600), F(-39429409169, 40283417720),
         F(173621393067, 120585230675)],
        [F(-122894383, 16598400), F(14501, 237120), F(121879313, 16598400)],
        [F(32410002731287, 15434909526400), F(-46499276605921, 29326328100160),
         F(-34914135774643, 11730531240064), F(45128506783177, 18328955062600)],
        [F(-128357303, 23237760), F(-35433927, 19364800), F(71038479, 38729600),
         F(8015933, 1452360)],
        [F(136721604296777, 67676141769600), F(-349632444539303, 146631640500800),
         F(-1292744859249609, 293263281001600), F(8356250416309, 54986865187800),
         F(17282943803, 3740603074)],
        [F(3, 25), F(-29, 300), F(71, 300), F(71, 300), F(-149, 300), 0],
        [],
    ], s, cols)
    gh0 = np.full(s, Fraction(0), dtype=object)
    for j, v in zip(cols, [F(-1, 4), F(5595, 8804), F(-2445, 8804), F(-4225, 8804),
                           F(2205, 4402), F(-567, 4402)]):
        gh0[j] = v
    gh1 = np.full(s, Fraction(0), dtype=object)
    b_hat = np.full(s, Fraction(0), dtype=object)
    for j, v in zip(cols, [0, F(18163, 52824), F(13943, 52824), F(3263, 52824),
                           F(11053, 52824), F(1067, 8804)]):
        b_hat[j] = v
    base = BaseTableau(
        c=rational_vector([0, F(1, 5), F(1, 5), F(2, 5), F(2, 5), F(3, 5), F(3, 5),
                           F(4, 5), F(4, 5), 1, 1]),
        A=A,
        b=A[s - 1].copy(),
        b_hat=b_hat,
    )
    return MriGarkMethod(
        name="mri-esdirk46a",
        order=4,
        embedded_order=3,
        base=base,
        gammas=_stack([g0, g1], [gh0, gh1]),
        kind=MethodKind.DECOUPLED_IMPLICIT,
        description="decoupled ESDIRK, order 4, stiffly accurate, equidistant abscissae",
    )


_REGISTRY: dict[str, Callable[[], MriGarkMethod]] = {
    "mri-erk22a": lambda: erk22(Fraction(1, 2), name="mri-erk22a"),
    "mri-erk22b": lambda: erk22(1, name="mri-erk22b"),
    "mri-erk33a": lambda: erk33(Fraction(-1, 2), name="mri-erk33a"),
    "mri-erk45a": _erk45a,
    "mri-irk21a": _irk21a,
    "mri-esdirk34a": _esdirk34a,
    "mri-sdirk33a": _sdirk33a,
    "mri-esdirk46a": _esdirk46a,
}


def available_methods() -> list[str]:
    """Return the registry names in sorted order."""
    return sorted(_REGISTRY)


@functools.cache
def builtin(name: str) -> MriGarkMethod:
    """Return a built-in method by name.

    Raises:
        UnknownMethodError: If the name is not registered
    """
    try:
        factory = _REGISTRY[name]
    except KeyError:
        raise UnknownMethodError(
            f"Unknown method '{name}'. Available: {', '.join(available_methods())}"
        ) from None
    return validate_method(factory())


# --- JSON schema ---------------------------------------------------------------


def _render(values: Any) -> Any:
    if isinstance(values, np.ndarray):
        return [_render(v) for v in values]
    return str(as_fraction(values))


def method_to_dict(method: MriGarkMethod) -> dict[str, Any]:
    """Render a method in the registry JSON schema (rationals as "p/q")."""
    return {
        "name": method.name,
        "order": method.order,
        "embedded_order": method.embedded_order,
        "kind": method.kind.value,
        "exact": method.exact,
        "c": _render(method.base.c),
        "A": _render(method.base.A),
        "b": _render(method.base.b),
        "b_hat": None if method.base.b_hat is None else _render(method.base.b_hat),
        "gamma": _render(method.gammas.gamma),
        "gamma_hat": None if method.gammas.gamma_hat is None else _render(method.gammas.gamma_hat),
    }


def method_from_dict(data: dict[str, Any]) -> MriGarkMethod:
    """Build and validate a method from the registry JSON schema.

    Raises:
        ValueError: If a field is missing or malformed
        InvalidMethodError: If the coefficients violate an invariant
    """
    try:
        c = rational_vector(data["c"])
        s = len(c)
        A = rational_matrix(data["A"], s)
        b = rational_vector(data["b"])
        b_hat = None if data.get("b_hat") is None else rational_vector(data["b_hat"])
        gamma = np.array([rational_matrix(g, s) for g in data["gamma"]], dtype=object)
        gamma_hat = None
        if data.get("gamma_hat") is not None:
            gamma_hat = np.array([rational_vector(g, s) for g in data["gamma_hat"]], dtype=object)
        kind = MethodKind(data.get("kind", "explicit"))
        method = MriGarkMethod(
            name=str(data.get("name", "custom")),
            order=int(data["order"]),
            embedded_order=int(data.get("embedded_order", 0)),
            base=BaseTableau(c=c, A=A, b=b, b_hat=b_hat),
            gammas=GammaStack(gamma=gamma, gamma_hat=gamma_hat),
            kind=kind,
            exact=bool(data.get("exact", True)),
        )
    except KeyError as e:
        raise ValueError(f"Method description is missing field {e}") from None
    except (TypeError, IndexError) as e:
        raise ValueError(f"Malformed method description: {e}") from None
    return validate_method(method)


def load_method_file(path: str | Path) -> MriGarkMethod:
    """Load a method from a JSON file in the registry schema."""
    with open(path) as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as e:
            raise ValueError(f"{path}: invalid JSON ({e})") from None
    return method_from_dict(data)
