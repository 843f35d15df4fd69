"""Tests for the phi-functions."""

import mpmath
import numpy as np
import pytest

from mri_gark.phi import MAX_K, phi, phi_recurrence, phi_row, phi_taylor


# Fine subdivision keeps oscillatory integrands with |Im z| up to 50 resolved
QUAD_POINTS = sorted({*(j / 20 for j in range(21)), 0.99, 0.999})


def reference_phi(k: int, z: complex) -> complex:
    """Quadrature of the defining integral."""
    if k == 0:
        return complex(mpmath.exp(z))
    with mpmath.workdps(30):
        zz = mpmath.mpc(z)
        val = mpmath.quad(
            lambda t: mpmath.exp(zz * (1 - t)) * t ** (k - 1), QUAD_POINTS
        )
    return complex(val)


class TestPhiValues:
    @pytest.mark.parametrize("k", range(MAX_K + 1))
    def test_at_zero(self, k):
        expected = 1.0 if k == 0 else 1.0 / k
        assert phi(k, 0) == pytest.approx(expected, rel=1e-15)

    def test_phi1_closed_form(self):
        z = -2.5 + 1.5j
        assert phi(1, z) == pytest.approx((np.exp(z) - 1) / z, rel=1e-14)

    def test_phi2_closed_form(self):
        z = -3.0
        expected = (np.exp(z) - 1 - z) / z**2
        assert phi(2, z) == pytest.approx(expected, rel=1e-14)

    @pytest.mark.parametrize("k", [1, 2, 3, 5, 8, 12])
    @pytest.mark.parametrize("z", [
        -1e-3, 0.3 + 0.2j, -0.99, -1.01, -4.5 + 3j, -11.9, -12.1, -40 + 5j, 2j, -200.0,
    ])
    def test_against_quadrature(self, k, z):
        assert phi(k, z) == pytest.approx(reference_phi(k, z), rel=1e-11, abs=1e-14)

    def test_against_quadrature_random_samples(self):
        rng = np.random.default_rng(8)
        z = 50 * np.sqrt(rng.uniform(0, 1, 50)) * np.exp(2j * np.pi * rng.uniform(0, 1, 50))
        ks = rng.integers(0, 7, 50)
        for k, zz in zip(ks, z):
            k, zz = int(k), complex(zz)
            assert phi(k, zz) == pytest.approx(reference_phi(k, zz), rel=1e-12)

    def test_returns_python_complex_for_scalars(self):
        assert isinstance(phi(2, -1.0), complex)

    def test_array_shape_preserved(self):
        z = np.linspace(-20, 0, 12).reshape(3, 4) + 0.5j
        out = phi(3, z)
        assert out.shape == (3, 4)
        for idx in np.ndindex(z.shape):
            assert out[idx] == pytest.approx(phi(3, complex(z[idx])), rel=1e-14)

    def test_index_out_of_range(self):
        with pytest.raises(ValueError, match="phi index"):
            phi(MAX_K + 1, 0.5)
        with pytest.raises(ValueError):
            phi(-1, 0.5)


class TestBranches:
    @pytest.mark.parametrize("k", [1, 2, 4])
    def test_branches_agree_near_switch(self, k):
        z = np.array([-(k + 0.5), -(k + 0.5) * 1j, (k + 0.5) * np.exp(2.5j)])
        np.testing.assert_allclose(phi_taylor(k, z), phi_recurrence(k, z), rtol=1e-11)

    def test_recurrence_satisfies_relation(self):
        z = -7.0 + 2.0j
        for k in range(1, 6):
            lhs = phi(k + 1, z)
            rhs = (k * phi(k, z) - 1) / z
            assert lhs == pytest.approx(rhs, rel=1e-12)


class TestPhiRow:
    def test_stacks_indices(self):
        z = np.array([-0.5, -5.0 + 1j])
        row = phi_row(4, z)
        assert row.shape == (5, 2)
        for k in range(5):
            np.testing.assert_allclose(row[k], phi(k, z), rtol=1e-15)

    def test_decays_along_negative_axis(self):
        row = phi_row(3, -1e4)
        assert abs(row[0]) == 0.0
        for k in range(1, 4):
            assert abs(row[k]) < 1e-3
