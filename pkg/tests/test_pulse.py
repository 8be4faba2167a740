import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ionkin.errors import ConfigError, DomainError, InputDataError
from ionkin.pulse import (GAUSS_FWHM_AREA, ChaoticPulseSpec, DeterministicPulseSpec, PulseRecord,
                          chaotic_field, coherence_width, correlation_diagnostic,
                          flux_to_intensity, gaussian_envelope, gaussian_spectrum_amplitude,
                          intensity_to_flux, read_pulse_csv, rng_for, sample_chaotic_pulse,
                          write_pulse_csv)
from ionkin.kinetics import power_integral

FS = 1e-15


def test_record_validation():
    with pytest.raises(ConfigError):
        PulseRecord(0.0, 1e-16, np.ones(10))
    with pytest.raises(ConfigError):
        PulseRecord(0.0, 1e-16, -np.ones(64))
    with pytest.raises(ConfigError):
        PulseRecord(0.0, 0.0, np.ones(64))
    rec = PulseRecord(0.0, 1e-16, np.ones(64))
    with pytest.raises(ValueError):
        rec.flux[0] = 2.0


def test_envelope_fluence_matches_closed_form():
    spec = DeterministicPulseSpec(30 * FS, 1e30)
    rec = gaussian_envelope(spec)
    assert rec.flux.max() == spec.peak_flux
    assert rec.times[np.argmax(rec.flux)] == pytest.approx(0.0, abs=1e-30)
    assert power_integral(rec, 1) == pytest.approx(spec.fluence, rel=1e-9)
    # F**2 of a Gaussian is a Gaussian narrowed by sqrt(2)
    assert power_integral(rec, 2) == pytest.approx(1e60 * 30 * FS * GAUSS_FWHM_AREA / math.sqrt(2), rel=1e-9)


def test_envelope_window_rules():
    with pytest.raises(ConfigError):
        DeterministicPulseSpec(30 * FS, 1.0, window=60 * FS)
    assert DeterministicPulseSpec(30 * FS, 1.0).window == pytest.approx(240 * FS)
    with pytest.raises(ConfigError):
        DeterministicPulseSpec(30 * FS, 1.0, shape="sech2")


@given(st.floats(1e8, 1e20), st.floats(10.0, 1000.0))
def test_flux_intensity_round_trip(intensity, ev):
    assert flux_to_intensity(intensity_to_flux(intensity, ev), ev) == pytest.approx(intensity, rel=1e-14)


def test_flux_at_93ev():
    assert intensity_to_flux(1e15, 93.0) == pytest.approx(6.711e31, rel=1e-3)
    with pytest.raises(DomainError):
        intensity_to_flux(1e15, 0.0)


def test_spectrum_normalization():
    amp = gaussian_spectrum_amplitude(2048, 0.2 * FS, 6 * FS)
    assert np.sum(amp**2) == pytest.approx(1.0, rel=1e-12)


def test_chaotic_field_unit_mean_square():
    rng = rng_for(11)
    vals = [np.mean(np.abs(chaotic_field(4096, 0.2 * FS, 6 * FS, rng)) ** 2) for _ in range(200)]
    assert np.mean(vals) == pytest.approx(1.0, abs=0.03)


def test_realizations_are_pure_functions_of_their_key():
    spec = ChaoticPulseSpec(DeterministicPulseSpec(30 * FS, 1e30), 6 * FS, seed=42)
    a = sample_chaotic_pulse(spec.realization(3, 7))
    b = sample_chaotic_pulse(spec.realization(3, 7))
    c = sample_chaotic_pulse(spec.realization(3, 8))
    d = sample_chaotic_pulse(spec.realization(4, 7))
    assert np.array_equal(a.flux, b.flux)
    assert not np.array_equal(a.flux, c.flux)
    assert not np.array_equal(a.flux, d.flux)


def test_chaotic_spec_limits():
    env = DeterministicPulseSpec(30 * FS, 1.0)
    with pytest.raises(ConfigError):
        ChaoticPulseSpec(env, 40 * FS)
    ChaoticPulseSpec(env, 40 * FS, allow_long_coherence=True)
    with pytest.raises(ConfigError):
        ChaoticPulseSpec(env, 6 * FS, oversample=8)
    with pytest.raises(ConfigError):
        ChaoticPulseSpec(env, 6 * FS, seed=-1)


def test_grid_resolves_coherence_and_window():
    spec = ChaoticPulseSpec(DeterministicPulseSpec(30 * FS, 1.0), 6 * FS)
    t0, dt, n = spec.grid()
    assert dt <= 6 * FS / 32 * (1 + 1e-12)
    assert n * dt >= spec.envelope.window
    assert n & (n - 1) == 0


@pytest.fixture(scope="module")
def chaotic_records():
    spec = ChaoticPulseSpec(DeterministicPulseSpec(30 * FS, 1.0), 6 * FS, seed=5)
    return [sample_chaotic_pulse(spec.realization(i)) for i in range(2000)]


def test_moments_follow_factorials(chaotic_records):
    g2, e2 = correlation_diagnostic(chaotic_records, 2)
    g3, e3 = correlation_diagnostic(chaotic_records, 3)
    assert abs(g2 - 2) < 4 * e2 + 0.02
    assert abs(g3 - 6) < 4 * e3 + 0.1


def test_deterministic_records_have_unit_moments():
    rec = gaussian_envelope(DeterministicPulseSpec(30 * FS, 1.0))
    g, err = correlation_diagnostic([rec] * 100, 3)
    assert g == pytest.approx(1.0, abs=1e-12) and err == pytest.approx(0.0, abs=1e-12)


def test_coherence_time_recovered(chaotic_records):
    assert coherence_width(chaotic_records) == pytest.approx(6 * FS, rel=0.06)


def test_diagnostic_input_checks(chaotic_records):
    with pytest.raises(InputDataError):
        correlation_diagnostic(chaotic_records[:10], 2)
    with pytest.raises(DomainError):
        correlation_diagnostic(chaotic_records, 7)
    other = gaussian_envelope(DeterministicPulseSpec(20 * FS, 1.0))
    with pytest.raises(InputDataError):
        correlation_diagnostic(chaotic_records[:150] + [other], 2)


def test_mean_fluence_matches_envelope(chaotic_records):
    env = DeterministicPulseSpec(30 * FS, 1.0)
    fluence = np.mean([r.flux.sum() * r.dt for r in chaotic_records])
    assert fluence == pytest.approx(env.fluence, rel=0.03)


def test_pulse_csv_round_trip(tmp_path, chaotic_records):
    rec = chaotic_records[0]
    write_pulse_csv(rec, tmp_path / "p.csv")
    back = read_pulse_csv(tmp_path / "p.csv")
    assert np.array_equal(back.flux, rec.flux)
    assert back.dt == pytest.approx(rec.dt, rel=1e-12)
    (tmp_path / "bad.csv").write_text("t,f\n0,1\n1,1\n3,1\n")
    with pytest.raises(InputDataError):
        read_pulse_csv(tmp_path / "bad.csv")
