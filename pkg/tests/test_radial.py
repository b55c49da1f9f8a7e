"""Radial shooting, normalization, volume profiles, and the profile identity."""

import math

import numpy as np
import pytest

import oracles
from sobolev_lab import AdmissibilityError, cp_ball, cp_unit_ball
from sobolev_lab.core import SolverError, alpha, unit_ball_volume
from sobolev_lab.radial import (DEFAULT_GRID, VolumeProfile, shoot,
                                unit_ball_profile, verify_integro_differential,
                                volume_profile)


class TestShoot:
    def test_zero_polished_to_tolerance(self):
        shot = shoot(2, 2.0)
        assert abs(shot.dense(shot.R0)) <= 1e-10

    def test_p2_zero_is_bessel_zero(self):
        # at p = 2, n = 2 the radial equation is Bessel's; the first zero
        # of the shot must match the independent root-finder oracle
        shot = shoot(2, 2.0)
        assert shot.R0 == pytest.approx(oracles.J0_FIRST_ZERO, abs=1e-10)
        assert shot.R0 == pytest.approx(oracles.first_bessel_zero(), abs=1e-10)

    def test_supercritical_gate(self):
        with pytest.raises(AdmissibilityError, match="experimental"):
            shoot(2, 3.0)
        shot = shoot(2, 3.0, allow_supercritical=True)
        assert shot.R0 > 0

    def test_inadmissible_rejected(self):
        with pytest.raises(AdmissibilityError):
            shoot(3, 6.0, allow_supercritical=True)

    def test_supercritical_subcritical_window(self):
        # 2 < p < 2n/(n-2) is admissible once the gate is lifted
        shot = shoot(3, 4.0, allow_supercritical=True)
        assert shot.R0 > 0


class TestUnitBallProfile:
    @pytest.mark.parametrize("n,p,expected", [
        (2, 1.0, 2.5464790894703255),     # 8/pi
        (2, 2.0, 5.783185962946785),      # j0^2
        (3, 2.0, 9.869604401089358),      # pi^2
        (3, 1.0, 3.5809862195676456),     # n(n+2)/omega_n
    ])
    def test_cp_oracles(self, n, p, expected):
        assert cp_unit_ball(n, p) == pytest.approx(expected, rel=1e-8)

    def test_strictly_decreasing(self):
        prof = unit_ball_profile(2, 1.5)
        assert np.all(np.diff(prof.phi_samples) < 0)

    def test_unit_lp_norm_by_independent_quadrature(self):
        for n, p in [(2, 1.0), (2, 2.0), (3, 1.5)]:
            prof = unit_ball_profile(n, p)
            r = np.linspace(0.0, 1.0, 200001)
            integrand = prof.phi(r) ** p * r ** (n - 1)
            norm_p = n * unit_ball_volume(n) * np.trapezoid(integrand, r)
            assert norm_p == pytest.approx(1.0, rel=1e-8)

    def test_rk_tolerance_refinement(self):
        for tol in (1e-8, 1e-10):
            coarse = cp_unit_ball(2, 2.0, tol=tol)
            fine = cp_unit_ball(2, 2.0, tol=tol / 2)
            assert abs(coarse - fine) < 10 * tol

    def test_memoized(self):
        assert unit_ball_profile(2, 2.0) is unit_ball_profile(2, 2.0)


class TestScalingLaw:
    @pytest.mark.parametrize("r", [0.5, 2.0, 3.0])
    def test_radial_dilation(self, r):
        for n, p in [(2, 1.0), (2, 2.0), (3, 1.5)]:
            expected = r ** alpha(n, p) * cp_unit_ball(n, p)
            assert cp_ball(n, p, radius=r) == pytest.approx(expected, rel=1e-8)

    def test_rejects_nonpositive_radius(self):
        with pytest.raises(ValueError):
            cp_ball(2, 2.0, radius=0.0)


class TestVolumeProfile:
    def test_endpoints(self):
        prof = unit_ball_profile(2, 2.0)
        vp = volume_profile(prof)
        assert vp.s[0] == 0.0
        assert vp.values[0] == pytest.approx(float(prof.phi_samples[0]), rel=1e-12)
        assert vp.values[-1] == 0.0
        assert vp.total_volume == pytest.approx(math.pi, rel=1e-12)

    def test_disk_p1_closed_form(self):
        vp = volume_profile(unit_ball_profile(2, 1.0))
        expected = oracles.disk_p1_volume_profile(vp.s)
        assert np.max(np.abs(vp.values - expected)) < 1e-9

    def test_scaled_ball(self):
        prof = unit_ball_profile(2, 1.0)
        vp = volume_profile(prof, radius=2.0)
        assert vp.total_volume == pytest.approx(4 * math.pi, rel=1e-12)
        # phi_rho(0) = rho^(-n/p) phi(0)
        assert vp.values[0] == pytest.approx(0.25 * float(prof.phi_samples[0]), rel=1e-12)

    def test_validation(self):
        with pytest.raises(ValueError):
            VolumeProfile(s=np.array([0.1, 1.0]), values=np.array([1.0]), step=True)
        with pytest.raises(ValueError):  # increasing values
            VolumeProfile(s=np.array([0.0, 1.0, 2.0]),
                          values=np.array([0.5, 1.0]), step=True)
        with pytest.raises(ValueError):  # non-increasing breakpoints
            VolumeProfile(s=np.array([0.0, 1.0, 1.0]),
                          values=np.array([1.0, 0.5]), step=True)

    def test_step_integrals_exact(self):
        vp = VolumeProfile(s=np.array([0.0, 1.0, 3.0]),
                           values=np.array([2.0, 0.5]), step=True)
        assert vp.power_integral(1.0) == pytest.approx(3.0, rel=1e-14)
        assert vp.power_integral(2.0) == pytest.approx(4.5, rel=1e-14)
        assert vp.evaluate([0.5, 2.0]) == pytest.approx([2.0, 0.5])
        assert vp.cumulative_at([1.0, 2.0], power=1.0) == pytest.approx([2.0, 2.5])

    def test_sampled_semantics(self):
        vp = VolumeProfile(s=np.array([0.0, 1.0, 2.0]),
                           values=np.array([1.0, 0.5, 0.0]), step=False)
        assert vp.evaluate(0.5) == pytest.approx(0.75)
        assert vp.power_integral(1.0) == pytest.approx(1.0)


class TestIntegroDifferentialCheck:
    @pytest.mark.parametrize("n,p", [(2, 1.0), (2, 2.0), (3, 2.0)])
    def test_residual_small_at_default_grid(self, n, p):
        prof = unit_ball_profile(n, p)
        vp = volume_profile(prof)
        assert verify_integro_differential(vp, prof.cp_ball, n, p) < 1e-3

    def test_first_order_convergence(self):
        prof = unit_ball_profile(2, 2.0)
        res = {num: verify_integro_differential(volume_profile(prof, num=num),
                                                prof.cp_ball, 2, 2.0)
               for num in (1025, 2049, 4097)}
        assert res[1025] > res[2049] > res[4097]
        assert res[1025] / res[2049] == pytest.approx(2.0, abs=0.4)
        assert res[2049] / res[4097] == pytest.approx(2.0, abs=0.4)

    def test_zero_profile(self):
        vp = VolumeProfile(s=np.linspace(0, 1, 33), values=np.zeros(33), step=False)
        assert verify_integro_differential(vp, 1.0, 2, 2.0) == 0.0

    def test_wrong_constant_detected(self):
        prof = unit_ball_profile(2, 2.0)
        vp = volume_profile(prof)
        good = verify_integro_differential(vp, prof.cp_ball, 2, 2.0)
        bad = verify_integro_differential(vp, 1.1 * prof.cp_ball, 2, 2.0)
        assert bad > 10 * good

    def test_s_min_excluding_all_samples_rejected(self):
        prof = unit_ball_profile(2, 2.0)
        vp = volume_profile(prof)
        with pytest.raises(ValueError):
            verify_integro_differential(vp, prof.cp_ball, 2, 2.0, s_min=10.0)
