import math

import numpy as np
import pytest
from scipy.integrate import quad

from spsim.errors import NumericsError
from spsim.optics import (CollectionGeometry, EfficiencyBudget,
                          budget_compatible,
                          calibrate_efficiency_from_saturation, dipole_pattern,
                          emitted_fraction_from_collected, invert_pi_fraction,
                          overall_efficiency, pattern_correction_factor,
                          polarization_contrast)

GAMMA = 1.0 / 26e-9


# Closed-form aperture integrals for perpendicular viewing, obtained by
# integrating the projected far fields analytically over the cap
# u = cos(theta_c) in [c, 1] with c = cos(asin(NA)):
#   collected sigma power   ~ (3/16) [3(1-c) - (1-c^3)/3]
#   collected pi power      ~ (3/8)  [(1-c) + (1-c^3)/3]
#   sigma contrast          = [8-(1+c)^3]/24 / [(3/4)(1-c) - (1-c^3)/12]
#   pi contrast             = -[8-(1+c)^3]/12 / [(1/2)((1-c) + (1-c^3)/3)]
def closed_forms(na):
    c = math.sqrt(1.0 - na * na)
    cap = 0.5 * (1.0 - c)
    corr_sigma = (3.0 / 16.0) * (3 * (1 - c) - (1 - c**3) / 3) / cap
    corr_pi = (3.0 / 8.0) * ((1 - c) + (1 - c**3) / 3) / cap
    contrast_sigma = ((8 - (1 + c) ** 3) / 24) / (0.75 * (1 - c) - (1 - c**3) / 12)
    contrast_pi = (-(8 - (1 + c) ** 3) / 12) / (0.5 * ((1 - c) + (1 - c**3) / 3))
    return corr_sigma, corr_pi, contrast_sigma, contrast_pi


GEO = CollectionGeometry()  # NA 0.7, perpendicular viewing


class TestDipolePattern:
    @pytest.mark.parametrize("kind", ["sigma_plus", "sigma_minus", "pi"])
    def test_normalization(self, kind):
        total, err = quad(
            lambda th: dipole_pattern(kind, th) * 2 * math.pi * math.sin(th),
            0.0, math.pi, epsabs=1e-12)
        assert total == pytest.approx(1.0, abs=1e-9)

    def test_pi_vanishes_on_axis(self):
        assert dipole_pattern("pi", 0.0) == 0.0

    def test_sigma_equator_value(self):
        # (3/16pi)(1 + cos^2) at theta = pi/2
        assert dipole_pattern("sigma_plus", math.pi / 2) == \
            pytest.approx(3.0 / (16.0 * math.pi), rel=1e-12)

    def test_sigma_pole_is_twice_equator(self):
        assert dipole_pattern("sigma_plus", 0.0) == pytest.approx(
            2 * dipole_pattern("sigma_plus", math.pi / 2), rel=1e-12)

    def test_invalid_inputs(self):
        with pytest.raises(ValueError):
            dipole_pattern("circular", 0.1)
        with pytest.raises(ValueError):
            dipole_pattern("pi", 3.5)


class TestPatternCorrection:
    def test_sigma_paper_value(self):
        corr = pattern_correction_factor(GEO, "sigma_plus")
        assert corr == pytest.approx(0.85, abs=0.02)       # quoted correction
        assert corr == pytest.approx(closed_forms(0.7)[0], abs=1e-4)

    def test_pi_closed_form(self):
        assert pattern_correction_factor(GEO, "pi") == \
            pytest.approx(closed_forms(0.7)[1], abs=1e-4)

    def test_isotropic_is_exactly_one(self):
        assert pattern_correction_factor(GEO, "isotropic") == pytest.approx(1.0, abs=1e-12)

    def test_small_aperture_limit(self):
        # NA -> 0 perpendicular: 4 pi f_sigma(pi/2) = 3/4
        geo = CollectionGeometry(numerical_aperture=0.01,
                                 solid_angle_fraction=2.5e-5)
        assert pattern_correction_factor(geo, "sigma_plus") == \
            pytest.approx(0.75, abs=1e-3)

    def test_refinement_stability(self):
        a = pattern_correction_factor(GEO, "sigma_plus", n_radial=32)
        b = pattern_correction_factor(GEO, "sigma_plus", n_radial=64)
        assert abs(a - b) < 1e-4


class TestPolarizationContrast:
    def test_pure_sigma_paper_value(self):
        c = polarization_contrast(GEO, 0.0)
        assert c == pytest.approx(0.77, abs=0.01)          # quoted maximum
        assert c == pytest.approx(closed_forms(0.7)[2], abs=1e-3)

    def test_pure_pi_closed_form(self):
        assert polarization_contrast(GEO, 1.0) == \
            pytest.approx(closed_forms(0.7)[3], abs=1e-3)

    def test_small_aperture_sigma_is_fully_polarized(self):
        geo = CollectionGeometry(numerical_aperture=0.01,
                                 solid_angle_fraction=2.5e-5)
        assert polarization_contrast(geo, 0.0) == pytest.approx(1.0, abs=1e-3)

    def test_strictly_decreasing_in_pi_fraction(self):
        xs = np.linspace(0.0, 1.0, 11)
        vals = [polarization_contrast(GEO, float(x)) for x in xs]
        assert all(a > b for a, b in zip(vals, vals[1:]))

    def test_refinement_stability(self):
        a = polarization_contrast(GEO, 0.1, n_radial=32)
        b = polarization_contrast(GEO, 0.1, n_radial=64)
        assert abs(a - b) < 1e-4

    def test_axial_viewing_rejected(self):
        geo = CollectionGeometry(
            collection_axis_angle_to_quantization_axis=0.0)
        with pytest.raises(ValueError):
            polarization_contrast(geo, 0.0)

    def test_invalid_fraction(self):
        with pytest.raises(ValueError):
            polarization_contrast(GEO, 1.5)


class TestInvertPiFraction:
    def test_paper_value(self):
        x = invert_pi_fraction(GEO, 0.72)
        assert x == pytest.approx(0.03, abs=0.01)          # quoted 3%
        assert x == pytest.approx(0.02559, abs=1e-3)

    def test_pure_sigma_contrast_gives_zero(self):
        c_sigma = polarization_contrast(GEO, 0.0)
        assert invert_pi_fraction(GEO, c_sigma) == pytest.approx(0.0, abs=1e-9)

    def test_round_trip(self):
        rng = np.random.default_rng(5)
        for x in rng.uniform(0.0, 0.9, 8):
            c = polarization_contrast(GEO, float(x))
            assert invert_pi_fraction(GEO, c) == pytest.approx(x, abs=1e-6)

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            invert_pi_fraction(GEO, 0.9)
        with pytest.raises(ValueError):
            invert_pi_fraction(GEO, -0.9999)

    def test_emitted_fraction_conversion(self):
        # collected pi photons are over-represented by the pattern ratio
        x_c = 0.0256
        x_e = emitted_fraction_from_collected(GEO, x_c)
        assert x_e < x_c
        ratio = (pattern_correction_factor(GEO, "sigma_plus")
                 / pattern_correction_factor(GEO, "pi"))
        odds = x_c / (1 - x_c) * ratio
        assert x_e == pytest.approx(odds / (1 + odds), rel=1e-6)


class TestBudget:
    def test_overall_paper_value(self):
        b = EfficiencyBudget()
        assert overall_efficiency(b) == pytest.approx(0.0064336, abs=1e-6)
        assert budget_compatible(b, 0.0060, 0.0004)

    def test_all_ones(self):
        b = EfficiencyBudget(factors=(("a", 1.0), ("b", 1.0)))
        assert overall_efficiency(b) == 1.0

    def test_single_factor(self):
        assert overall_efficiency(EfficiencyBudget(factors=(("x", 0.5),))) == 0.5

    def test_permutation_invariant(self):
        b = EfficiencyBudget()
        rev = EfficiencyBudget(factors=tuple(reversed(b.factors)))
        assert overall_efficiency(b) == pytest.approx(
            overall_efficiency(rev), rel=1e-15)

    def test_validation(self):
        with pytest.raises(ValueError):
            EfficiencyBudget(factors=())
        with pytest.raises(ValueError):
            EfficiencyBudget(factors=(("bad", 1.5),))
        with pytest.raises(ValueError):
            EfficiencyBudget(factors=(("bad", 0.0),))


class TestSaturationCalibration:
    def test_synthetic_round_trip_exact(self):
        eta = 0.006
        s = np.array([0.2, 0.5, 1.0, 3.0, 10.0])
        rates = eta * 0.5 * GAMMA * s / (1 + s)
        assert calibrate_efficiency_from_saturation(zip(s, rates), GAMMA) == \
            pytest.approx(eta, rel=1e-12)

    def test_noisy_round_trip_within_two_percent(self):
        rng = np.random.default_rng(21)
        eta = 0.006
        s = np.array([0.3, 0.7, 1.5, 4.0, 12.0, np.inf])
        with np.errstate(invalid="ignore"):
            sat = np.where(np.isinf(s), 1.0, s / (1 + s))
        rates = eta * 0.5 * GAMMA * sat * (1 + 0.01 * rng.standard_normal(s.size))
        fit = calibrate_efficiency_from_saturation(zip(s, rates), GAMMA)
        assert fit == pytest.approx(eta, rel=0.02)

    def test_single_saturated_point(self):
        eta = 0.0044
        fit = calibrate_efficiency_from_saturation([(np.inf, eta * 0.5 * GAMMA)],
                                                   GAMMA)
        assert fit == pytest.approx(eta, rel=1e-12)

    def test_errors(self):
        with pytest.raises(ValueError):
            calibrate_efficiency_from_saturation([], GAMMA)
        with pytest.raises(NumericsError):
            calibrate_efficiency_from_saturation([(0.0, 0.0)], GAMMA)
        with pytest.raises(NumericsError):
            calibrate_efficiency_from_saturation([(1.0, -100.0)], GAMMA)


class TestGeometry:
    def test_validation(self):
        with pytest.raises(ValueError):
            CollectionGeometry(numerical_aperture=1.2)
        with pytest.raises(ValueError):
            CollectionGeometry(solid_angle_fraction=0.0)

    def test_solid_angle_consistency_warning(self):
        with pytest.warns(UserWarning):
            CollectionGeometry(numerical_aperture=0.7, solid_angle_fraction=0.40)

    def test_default_fraction_is_consistent(self):
        geo = CollectionGeometry()
        assert geo.geometric_solid_angle_fraction == pytest.approx(0.1429, abs=5e-4)
