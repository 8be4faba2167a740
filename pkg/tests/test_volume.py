import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ionkin.errors import ConfigError, DomainError, InputDataError
from ionkin.volume import (VolumeModel, intensity_weight_density, radial_oracle_2d,
                           spatial_oracle_3d, volume_average, volume_averaged_curve)
from ionkin.yieldcurve import YieldCurve

KINDS = ["gaussian_transverse_2d", "gaussian_beam_3d"]


def one_photon(sat):
    def fn(i):
        x = i / sat
        return np.array([math.exp(-x), -math.expm1(-x)])
    return fn


def test_model_validation():
    with pytest.raises(ConfigError):
        VolumeModel("cylinder")
    with pytest.raises(ConfigError):
        VolumeModel(fmin=1.0)
    with pytest.raises(ConfigError):
        VolumeModel(w0_cm=0.0)
    with pytest.raises(DomainError):
        intensity_weight_density(VolumeModel(), 0.0)


@pytest.mark.parametrize("kind", KINDS + ["none"])
def test_constant_curve_is_reproduced(kind):
    curve = YieldCurve.from_function(lambda i: np.array([1.0, 0.25]), 1e9, 1e16)
    for i0 in [1e14, 3.3e15, 1e16]:
        avg = volume_average(curve, VolumeModel(kind), i0)
        assert avg.yields == pytest.approx([1.0, 0.25], rel=1e-12)


def test_area_fractions_2d():
    w = intensity_weight_density(VolumeModel("gaussian_transverse_2d"), 1.0)
    assert w.fraction_above(0.5) / w.fraction_above(0.25) == pytest.approx(0.5, rel=1e-14)


@pytest.mark.parametrize("kind", KINDS)
def test_density_normalized_and_total_finite(kind):
    from scipy.integrate import quad
    m = VolumeModel(kind)
    w = intensity_weight_density(m, 1.0)
    assert math.isfinite(w.total) and w.total > 0
    edges = np.logspace(-4, 0, 9)
    total = sum(quad(w, a, b, limit=200)[0] for a, b in zip(edges[:-1], edges[1:]))
    assert total == pytest.approx(1.0, rel=1e-8)
    assert w.fraction_above(m.fmin) == pytest.approx(1.0)
    assert w.fraction_above(1.0) == pytest.approx(0.0, abs=1e-15)


def test_3d_volume_matches_brute_force():
    m = VolumeModel("gaussian_beam_3d", w0_cm=2e-4, zR_cm=0.1, fmin=1e-2)
    # volume above I0/2: z up to zR, r^2 < w(z)^2/2 ln(I0 / (2 I(z)))
    from scipy.integrate import quad

    def area(z):
        s = 1 + (z / m.zR_cm) ** 2
        arg = math.log(1 / (0.5 * s))
        return math.pi * m.w0_cm**2 * s / 2 * arg if arg > 0 else 0.0
    v = 2 * quad(area, 0, m.zR_cm)[0]
    w = intensity_weight_density(m, 1.0)
    assert w.fraction_above(0.5) * w.total == pytest.approx(v, rel=1e-9)


def test_point_mass():
    w = intensity_weight_density(VolumeModel("none"), 5.0)
    assert w.is_point_mass and w.fraction_above(4.0) == 1.0 and w.fraction_above(6.0) == 0.0
    fn = one_photon(1e15)
    curve = YieldCurve.from_function(fn, 1e13, 1e17)
    assert volume_average(curve, VolumeModel("none"), 1e15).yields == pytest.approx(fn(1e15), rel=1e-12)


@pytest.mark.parametrize("i0", [1e13, 1e15, 1e17])
def test_2d_against_radial_quadrature(i0):
    fn = one_photon(3e15)
    m = VolumeModel("gaussian_transverse_2d")
    avg = volume_average(fn, m, i0)
    ref = radial_oracle_2d(fn, m, i0)
    assert avg.yields == pytest.approx(ref, rel=1e-4)
    assert avg.rel_error < 1e-4


@pytest.mark.parametrize("i0", [1e14, 1e17])
def test_3d_against_spatial_quadrature(i0):
    fn = one_photon(3e15)
    m = VolumeModel("gaussian_beam_3d")
    avg = volume_average(fn, m, i0)
    assert avg.yields == pytest.approx(spatial_oracle_3d(fn, m, i0), rel=1e-4)
    assert avg.rel_error < 1e-4


def test_power_law_is_exact():
    fn = lambda i: np.array([(i / 1e16) ** 5])
    m = VolumeModel("gaussian_transverse_2d")
    avg = volume_average(YieldCurve.from_function(fn, 1e10, 1e14, per_decade=5), m, 1e14)
    u = m.log_span
    exact = (1e-2) ** 5 * (-math.expm1(-5 * u)) / (5 * u)
    assert avg.yields[0] == pytest.approx(exact, rel=1e-10)


def test_coverage_required():
    curve = YieldCurve.from_function(one_photon(1e15), 1e12, 1e16)
    with pytest.raises(InputDataError):
        volume_average(curve, VolumeModel(), 1e15)
    with pytest.raises(InputDataError):
        volume_average(curve, VolumeModel("none"), 1e17)


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(KINDS), st.floats(12.0, 16.0), st.integers(1, 6))
def test_saturating_curves_stay_monotone(kind, log_sat, n):
    sat = 10**log_sat

    def fn(i):
        y = -math.expm1(-((i / sat) ** n))
        return np.array([1 - y, y])
    peaks = np.logspace(12, 18, 31)
    curve = YieldCurve.from_function(fn, 1e8, 1e18)
    avg, _ = volume_averaged_curve(curve, VolumeModel(kind), peaks)
    assert np.all(np.diff(avg.yields[:, 1]) >= -1e-12)


def test_stderr_propagation_scales_with_grid():
    inten = np.logspace(9, 15, 61)
    y = np.ones((61, 1)) * 0.5
    curve = YieldCurve(inten, y, np.full((61, 1), 0.01))
    avg = volume_average(curve, VolumeModel(), 1e15)
    # 41 grid points share the weight: the error shrinks like 1/sqrt(points)
    assert 0.01 / math.sqrt(60) < avg.stderr[0] < 0.01 / math.sqrt(20)
