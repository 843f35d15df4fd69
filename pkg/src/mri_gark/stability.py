"""Linear stability of MRI-GARK methods.

Two test problems are covered. The scalar problem ``y' = lambda_f y + lambda_s y``
gives a stability function ``R(z_f, z_s)``; the coupled 2x2 problem gives a
propagator matrix ``M`` whose spectral radius decides stability. Region scans
take the worst case over a wedge of fast arguments
``{z_f : |z_f| <= rho, |arg z_f - pi| <= alpha}`` for every point of a grid of
slow arguments.

All evaluation routines broadcast over numpy arrays of arguments.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Any, TextIO

import numpy as np

from mri_gark.phi import phi_row
from mri_gark.tableaux import MriGarkMethod, NumericCoefficients

logger = logging.getLogger(__name__)

SINGULAR_TOL = 1e-14
MEMBER_TOL = 1e-10
RADIUS_CAP = 1e6
MIN_RADIUS = 1e-3
DEFAULT_ANGLE_STEP = 2.5
DEFAULT_RADII = 40
MIN_RADII = 8
CHUNK = 64


class SingularStageError(ArithmeticError):
    """Raised when an implicit stage factor vanishes."""


class ScanMode(Enum):
    SCALAR = "scalar"
    MATRIX = "matrix"


@dataclass(frozen=True)
class CoupledTestProblem:
    """Coefficients of the coupled 2x2 linear test problem."""

    lambda_f: complex
    lambda_s: complex
    xi: float
    alpha_scale: complex = 1.0

    def __post_init__(self) -> None:
        if not 0 <= self.xi <= 1:
            raise ValueError(f"xi must lie in [0, 1], got {self.xi}")
        if self.alpha_scale == 0:
            raise ValueError("alpha_scale must be nonzero")

    @property
    def eta_s(self) -> complex:
        return (1 - self.xi) * (self.lambda_f - self.lambda_s) / self.alpha_scale

    @property
    def eta_f(self) -> complex:
        return -self.alpha_scale * self.xi * (self.lambda_f - self.lambda_s)

    @property
    def omega(self) -> np.ndarray:
        return np.array([
            [self.lambda_f, self.eta_s],
            [self.eta_f, self.lambda_s],
        ], dtype=complex)

    @property
    def delta(self) -> complex:
        """Discriminant of the characteristic polynomial of omega."""
        tr = self.lambda_f + self.lambda_s
        det = self.lambda_f * self.lambda_s - self.eta_s * self.eta_f
        return tr * tr - 4 * det

    @property
    def eigenvalues(self) -> tuple[complex, complex]:
        return (
            self.xi * self.lambda_f + (1 - self.xi) * self.lambda_s,
            (1 - self.xi) * self.lambda_f + self.xi * self.lambda_s,
        )


def _divide(num: Any, den: Any, strict: bool) -> Any:
    small = np.abs(den) < SINGULAR_TOL
    if np.any(small):
        if strict:
            raise SingularStageError(
                f"implicit stage factor {float(np.min(np.abs(den))):.3e} is below {SINGULAR_TOL}"
            )
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(small, np.inf, num / np.where(small, 1.0, den))
    return num / den


def _stage_phis(co: NumericCoefficients, i: int, zf: Any, kmax: int, limit: bool) -> np.ndarray:
    """``phi_0..phi_kmax`` at ``dc_i z_f``; ``limit`` sends ``z_f`` to ``-inf``."""
    arg = co.dc[i] * np.asarray(zf, dtype=complex)
    if limit and co.dc[i] > 0:
        return np.zeros((kmax + 1,) + arg.shape, dtype=complex)
    return phi_row(kmax, arg)


def _implicit_coupling(co: NumericCoefficients, i: int) -> bool:
    return i + 1 < co.stages and bool(np.any(co.gamma[:, i, i + 1] != 0))


def _scalar_recurrence(
    co: NumericCoefficients, zf: Any, zs: Any, strict: bool, limit: bool = False
) -> np.ndarray:
    zf, zs = np.broadcast_arrays(np.asarray(zf, dtype=complex), np.asarray(zs, dtype=complex))
    K = co.degree
    Y = [np.ones(zf.shape, dtype=complex)]
    for i in range(co.stages):
        ph = _stage_phis(co, i, zf, K + 1, limit)
        mu = [sum(co.gamma[k, i, j] * ph[k + 1] for k in range(K + 1)) for j in range(i + 2)
              if j < co.stages]
        acc = ph[0] * Y[i]
        for j in range(i + 1):
            acc = acc + zs * mu[j] * Y[j]
        if _implicit_coupling(co, i):
            acc = _divide(acc, 1 - zs * mu[i + 1], strict)
        Y.append(acc)
    return Y[-1]


def scalar_stability(method: MriGarkMethod, z_f: Any, z_s: Any) -> Any:
    """Stability function ``R(z_f, z_s)`` on ``y' = lambda_f y + lambda_s y``.

    Raises:
        SingularStageError: If an implicit stage factor is below SINGULAR_TOL
    """
    out = _scalar_recurrence(method.coefficients, z_f, z_s, strict=True)
    return complex(out) if out.ndim == 0 else out


def base_stability_function(method: MriGarkMethod, z: Any) -> Any:
    """Classical ``R(z) = 1 + z b^T (I - z A)^{-1} 1`` of the slow base method."""
    co = method.coefficients
    z_arr = np.asarray(z, dtype=complex)
    flat = z_arr.ravel()
    s = co.stages
    mats = np.eye(s)[None, :, :] - flat[:, None, None] * co.A[None, :, :]
    stages = np.linalg.solve(mats, np.ones((flat.size, s, 1), dtype=complex))[..., 0]
    out = (1 + flat * stages.dot(co.b)).reshape(z_arr.shape)
    return complex(out) if out.ndim == 0 else out


def _matrix_recurrence(
    co: NumericCoefficients, zf: Any, zs: Any, ws: Any, wf: Any, strict: bool
) -> np.ndarray:
    zf, zs, ws, wf = np.broadcast_arrays(*(np.asarray(v, dtype=complex) for v in (zf, zs, ws, wf)))
    K = co.degree
    gb = co.gamma_bar
    out = np.empty(zf.shape + (2, 2), dtype=complex)
    for col in range(2):
        Yf = [np.full(zf.shape, 1.0 if col == 0 else 0.0, dtype=complex)]
        Ys = [np.full(zf.shape, 0.0 if col == 0 else 1.0, dtype=complex)]
        for i in range(co.stages):
            ph = _stage_phis(co, i, zf, K + 2, limit=False)
            dci = co.dc[i]
            fast = ph[0] * Yf[i] + dci * ws * ph[1] * Ys[i]
            if dci != 0:
                for j in range(i + 1):
                    nu = sum(co.gamma[k, i, j] / (k + 1) * ph[k + 2] for k in range(K + 1))
                    fast = fast + dci * ws * nu * (wf * Yf[j] + zs * Ys[j])
            Yf.append(fast)
            slow = Ys[i]
            for j in range(min(i + 2, co.stages)):
                slow = slow + wf * gb[i, j] * Yf[j]
            for j in range(i + 1):
                slow = slow + zs * gb[i, j] * Ys[j]
            if _implicit_coupling(co, i):
                slow = _divide(slow, 1 - gb[i, i + 1] * zs, strict)
            Ys.append(slow)
        out[..., 0, col] = Yf[-1]
        out[..., 1, col] = Ys[-1]
    return out


def matrix_stability(method: MriGarkMethod, problem: CoupledTestProblem, H: float) -> np.ndarray:
    """One-step propagator ``M`` on the coupled test problem.

    Raises:
        SingularStageError: If an implicit stage factor is below SINGULAR_TOL
    """
    return _matrix_recurrence(
        method.coefficients,
        H * problem.lambda_f,
        H * problem.lambda_s,
        H * problem.eta_s,
        H * problem.eta_f,
        strict=True,
    )


def spectral_radius(M: np.ndarray) -> Any:
    """Spectral radius of 2x2 matrices (stacked on the trailing axes)."""
    M = np.asarray(M, dtype=complex)
    half_tr = (M[..., 0, 0] + M[..., 1, 1]) / 2
    det = M[..., 0, 0] * M[..., 1, 1] - M[..., 0, 1] * M[..., 1, 0]
    root = np.sqrt(half_tr * half_tr - det)
    return np.maximum(np.abs(half_tr + root), np.abs(half_tr - root))


# --- region scans ---------------------------------------------------------------


@dataclass(frozen=True)
class ScanGrid:
    """Rectangular grid of slow arguments ``z_s``."""

    re_min: float = -6.0
    re_max: float = 1.0
    im_min: float = -4.0
    im_max: float = 4.0
    n_re: int = 141
    n_im: int = 161

    def __post_init__(self) -> None:
        if self.n_re < 2 or self.n_im < 2:
            raise ValueError(f"Grid resolution must be at least 2x2, got {self.n_re}x{self.n_im}")
        if not (self.re_min < self.re_max and self.im_min < self.im_max):
            raise ValueError("Grid ranges must be increasing")

    def points(self) -> np.ndarray:
        """Complex grid of shape ``(n_im, n_re)``."""
        re = np.linspace(self.re_min, self.re_max, self.n_re)
        im = np.linspace(self.im_min, self.im_max, self.n_im)
        R, I = np.meshgrid(re, im)
        return R + 1j * I


def wedge_angles(alpha_deg: float, step_deg: float = DEFAULT_ANGLE_STEP) -> np.ndarray:
    """Angles (radians) ``pi +- k*step`` within the wedge, plus its boundary rays."""
    if not 0 <= alpha_deg <= 90:
        raise ValueError(f"alpha must lie in [0, 90] degrees, got {alpha_deg}")
    if alpha_deg == 0:
        return np.array([math.pi])
    offsets = step_deg * np.arange(int(math.floor(alpha_deg / step_deg)) + 1)
    degrees = np.concatenate([180 - offsets, 180 + offsets, [180 - alpha_deg, 180 + alpha_deg]])
    return np.deg2rad(np.unique(degrees))


def wedge_radii(rho: float, n_radii: int = DEFAULT_RADII) -> np.ndarray:
    """``0`` plus ``n_radii`` log-spaced radii up to ``min(rho, RADIUS_CAP)``."""
    if rho < 0:
        raise ValueError(f"rho must be nonnegative, got {rho}")
    top = min(rho, RADIUS_CAP)
    if top == 0:
        return np.zeros(1)
    return np.concatenate([[0.0], np.geomspace(min(MIN_RADIUS, top), top, n_radii)])


def wedge_samples(
    rho: float,
    alpha_deg: float,
    n_radii: int = DEFAULT_RADII,
    step_deg: float = DEFAULT_ANGLE_STEP,
) -> np.ndarray:
    """Deterministic fast-argument samples of the wedge (finite points only)."""
    radii = wedge_radii(rho, n_radii)
    angles = wedge_angles(alpha_deg, step_deg)
    pts = (radii[1:, None] * np.exp(1j * angles[None, :])).ravel()
    return np.concatenate([[0j], pts])


@dataclass
class RegionScan:
    """Parameters and (once scanned) result of a stability region scan."""

    mode: ScanMode = ScanMode.SCALAR
    rho: float = math.inf
    alpha_deg: float = 10.0
    xi: float = 0.0
    grid: ScanGrid = field(default_factory=ScanGrid)
    n_radii: int = DEFAULT_RADII
    angle_step_deg: float = DEFAULT_ANGLE_STEP
    values: np.ndarray | None = None
    membership: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.n_radii < MIN_RADII:
            raise ValueError(f"At least {MIN_RADII} wedge radii are required, got {self.n_radii}")
        if not 0 <= self.xi <= 1:
            raise ValueError(f"xi must lie in [0, 1], got {self.xi}")

    @property
    def includes_limit(self) -> bool:
        """Scalar scans with infinite rho also evaluate the ``z_f -> -inf`` limit."""
        return self.mode is ScanMode.SCALAR and math.isinf(self.rho)

    def samples(self) -> np.ndarray:
        return wedge_samples(self.rho, self.alpha_deg, self.n_radii, self.angle_step_deg)

    def metadata(self, method_name: str) -> dict[str, Any]:
        return {
            "method": method_name,
            "mode": self.mode.value,
            "rho": "inf" if math.isinf(self.rho) else self.rho,
            "alpha_deg": self.alpha_deg,
            "xi": self.xi,
            "grid": asdict(self.grid),
            "radius_cap": RADIUS_CAP,
            "n_radii": self.n_radii,
            "angle_step_deg": self.angle_step_deg,
            "member_tol": MEMBER_TOL,
        }


def _scan_values(co: NumericCoefficients, scan: RegionScan, zs: np.ndarray, zf: np.ndarray) -> np.ndarray:
    zf = zf[:, None, None]
    with np.errstate(all="ignore"):
        if scan.mode is ScanMode.SCALAR:
            vals = np.abs(_scalar_recurrence(co, zf, zs[None], strict=False))
        else:
            # spectrum is independent of alpha_scale, so take alpha_scale = 1
            diff = zf - zs[None]
            M = _matrix_recurrence(co, zf, zs[None], (1 - scan.xi) * diff, -scan.xi * diff,
                                   strict=False)
            vals = spectral_radius(M)
    vals = np.where(np.isfinite(vals), vals, np.inf)
    return vals.max(axis=0)


def scan_region(method: MriGarkMethod, scan: RegionScan) -> RegionScan:
    """Fill ``values`` (worst case over the wedge) and ``membership`` on the grid."""
    co = method.coefficients
    zs = scan.grid.points()
    samples = scan.samples()
    values = np.zeros(zs.shape)
    for start in range(0, samples.size, CHUNK):
        values = np.maximum(values, _scan_values(co, scan, zs, samples[start:start + CHUNK]))
    if scan.includes_limit:
        with np.errstate(all="ignore"):
            lim = np.abs(_scalar_recurrence(co, np.full(zs.shape, -1.0 + 0j), zs,
                                            strict=False, limit=True))
        values = np.maximum(values, np.where(np.isfinite(lim), lim, np.inf))
    membership = values <= 1 + MEMBER_TOL
    logger.debug(
        "%s %s scan: %d wedge samples, %d of %d grid points stable",
        method.name, scan.mode.value, samples.size, int(membership.sum()), membership.size,
    )
    return replace(scan, values=values, membership=membership)


def write_scan_csv(scan: RegionScan, out: TextIO) -> None:
    """Write ``re_zs,im_zs,max_modulus,member`` rows in grid order."""
    if scan.values is None or scan.membership is None:
        raise ValueError("scan has not been evaluated")
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["re_zs", "im_zs", "max_modulus", "member"])
    zs = scan.grid.points()
    for z, v, m in zip(zs.ravel(), scan.values.ravel(), scan.membership.ravel()):
        writer.writerow([f"{z.real:.17g}", f"{z.imag:.17g}", f"{v:.17g}", int(m)])


def write_scan_files(scan: RegionScan, method_name: str, path: str | Path) -> tuple[Path, Path]:
    """Write the CSV to ``path`` and the JSON metadata next to it."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        write_scan_csv(scan, f)
    sidecar = path.with_suffix(".json")
    sidecar.write_text(json.dumps(scan.metadata(method_name), indent=2) + "\n")
    return path, sidecar
