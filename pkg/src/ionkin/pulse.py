"""Photon-flux records: smooth Gaussian envelopes and chaotic (SASE-like) realizations.

A chaotic realization is the envelope multiplied by ``|a(t)|**2`` where ``a`` is a
stationary circular complex Gaussian process with unit mean square and a
Gaussian first-order coherence ``|g1(tau)| = exp(-tau**2 / (2 tau_c**2))``.  It is
synthesized by filtering white complex noise with the matching Gaussian
spectrum on a periodic power-of-two grid.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np

from .constants import EV
from .errors import ConfigError, DomainError, InputDataError

GAUSS_FWHM_AREA = math.sqrt(math.pi / (4.0 * math.log(2.0)))   # 1.0645...
MIN_SAMPLES = 32


@dataclass(frozen=True, eq=False)
class PulseRecord:
    """Uniformly sampled photon flux in photons cm^-2 s^-1."""

    t0: float
    dt: float
    flux: np.ndarray

    def __post_init__(self):
        flux = np.ascontiguousarray(self.flux, dtype=float)
        if flux.ndim != 1 or flux.size < MIN_SAMPLES:
            raise ConfigError(f"a pulse record needs at least {MIN_SAMPLES} samples")
        if not self.dt > 0:
            raise ConfigError("dt must be positive")
        if not np.all(np.isfinite(flux)) or np.any(flux < 0):
            raise ConfigError("flux samples must be finite and nonnegative")
        flux.setflags(write=False)
        object.__setattr__(self, "flux", flux)

    @property
    def times(self):
        return self.t0 + self.dt * np.arange(self.flux.size)

    @property
    def t_end(self):
        return self.t0 + self.dt * (self.flux.size - 1)

    def __len__(self):
        return self.flux.size

    def scaled(self, factor):
        return PulseRecord(self.t0, self.dt, self.flux * factor)

    def same_grid(self, other):
        return self.t0 == other.t0 and self.dt == other.dt and len(self) == len(other)


@dataclass(frozen=True)
class DeterministicPulseSpec:
    """Gaussian envelope. ``window`` defaults to 8 fwhm, ``samples_per_fwhm`` sets dt."""

    fwhm: float
    peak_flux: float
    window: float | None = None
    shape: str = "gaussian"
    samples_per_fwhm: int = 256

    def __post_init__(self):
        if self.shape != "gaussian":
            raise ConfigError(f"unsupported pulse shape {self.shape!r}")
        if not self.fwhm > 0:
            raise ConfigError("fwhm must be positive")
        if not self.peak_flux >= 0:
            raise ConfigError("peak flux must be nonnegative")
        if self.window is None:
            object.__setattr__(self, "window", 8.0 * self.fwhm)
        if self.window < 4.0 * self.fwhm * (1 - 1e-12):
            raise ConfigError("window must span at least 4 fwhm")
        if self.samples_per_fwhm < 4:
            raise ConfigError("samples_per_fwhm must be at least 4")

    def with_peak(self, peak_flux):
        return DeterministicPulseSpec(self.fwhm, peak_flux, self.window, self.shape,
                                      self.samples_per_fwhm)

    @property
    def fluence(self):
        return self.peak_flux * self.fwhm * GAUSS_FWHM_AREA


def _gaussian(t, fwhm):
    return np.exp(-4.0 * math.log(2.0) * (t / fwhm) ** 2)


def gaussian_envelope(spec):
    """Sample a Gaussian envelope centered in its window; the center is a grid point."""
    dt = spec.fwhm / spec.samples_per_fwhm
    half = int(math.ceil(0.5 * spec.window / dt - 1e-9))
    n = 2 * half + 1
    if n < MIN_SAMPLES:
        raise ConfigError("window too short for the requested sampling")
    t = dt * np.arange(-half, half + 1)
    return PulseRecord(-half * dt, dt, spec.peak_flux * _gaussian(t, spec.fwhm))


def intensity_to_flux(intensity, photon_energy):
    """Photon flux (cm^-2 s^-1) carried by ``intensity`` (W/cm^2) at ``photon_energy`` (eV)."""
    if not photon_energy > 0:
        raise DomainError("photon energy must be positive")
    return intensity / (photon_energy * EV)


def flux_to_intensity(flux, photon_energy):
    return flux * photon_energy * EV


@dataclass(frozen=True)
class ChaoticPulseSpec:
    """One chaotic realization: envelope, coherence time and its RNG stream.

    ``stream`` extends the seed (e.g. ``(intensity_index, realization_index)``)
    so that every realization owns an independent, schedule-free RNG stream.
    Coherence times above the envelope fwhm are refused unless
    ``allow_long_coherence`` is set (used for the single-mode limit).
    """

    envelope: DeterministicPulseSpec
    coherence_time: float
    seed: int = 0
    oversample: int = 32
    stream: tuple = ()
    allow_long_coherence: bool = False

    def __post_init__(self):
        if not self.coherence_time > 0:
            raise ConfigError("coherence time must be positive")
        if self.coherence_time > self.envelope.fwhm and not self.allow_long_coherence:
            raise ConfigError("coherence time must not exceed the envelope fwhm")
        if int(self.oversample) < 16:
            raise ConfigError("oversample must be at least 16 samples per coherence time")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")

    def realization(self, *stream):
        return ChaoticPulseSpec(self.envelope, self.coherence_time, self.seed, self.oversample,
                                tuple(stream), self.allow_long_coherence)

    def grid(self):
        """(t0, dt, n) of the periodic synthesis grid, centered on t = 0."""
        dt = min(self.coherence_time / self.oversample, self.envelope.fwhm / 32.0)
        n = 1 << int(math.ceil(math.log2(self.envelope.window / dt + 1)))
        n = max(n, MIN_SAMPLES)
        return -(n // 2) * dt, dt, n


def rng_for(seed, stream=()):
    """Independent generator keyed by a master seed and a stream tuple."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(s) for s in stream))
    return np.random.Generator(np.random.PCG64(ss))


@functools.lru_cache(maxsize=16)
def gaussian_spectrum_amplitude(n, dt, coherence_time):
    """Normalized filter sqrt(S_k) with sum(S_k) = 1 for the Gaussian coherence model."""
    omega = 2.0 * math.pi * np.fft.fftfreq(n, dt)
    spec = np.exp(-0.5 * (omega * coherence_time) ** 2)
    amp = np.sqrt(spec / spec.sum())
    amp.setflags(write=False)
    return amp


def chaotic_field(n, dt, coherence_time, rng):
    """Stationary circular complex Gaussian samples with unit mean |a|^2."""
    noise = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) * math.sqrt(0.5)
    return np.fft.ifft(gaussian_spectrum_amplitude(n, dt, coherence_time) * noise) * n


def sample_chaotic_pulse(spec):
    t0, dt, n = spec.grid()
    t = t0 + dt * np.arange(n)
    env = spec.envelope.peak_flux * _gaussian(t, spec.envelope.fwhm)
    a = chaotic_field(n, float(dt), float(spec.coherence_time), rng_for(spec.seed, spec.stream))
    return PulseRecord(t0, dt, env * (a.real**2 + a.imag**2))


def _stack(records):
    records = list(records)
    if not records:
        raise InputDataError("no records given")
    ref = records[0]
    for rec in records[1:]:
        if not ref.same_grid(rec):
            raise InputDataError("records are not on identical grids")
    return ref, np.vstack([r.flux for r in records])


def _core_indices(mean_flux, core):
    if core is None:
        return np.array([int(np.argmax(mean_flux))])
    return np.flatnonzero(mean_flux >= core * mean_flux.max())


def correlation_diagnostic(records, order, core=0.5, min_records=100):
    """Equal-time normalized intensity moment <F^n>/<F>^n and its jackknife error.

    The moment is evaluated across the ensemble at each time sample where the
    ensemble-mean flux exceeds ``core`` times its maximum, then averaged over
    those samples (``core=None`` uses the single peak sample).  For chaotic
    light the result tends to n!, for deterministic records it is 1.

    Returns
    -------
    (float, float)
        Estimate and jackknife standard error over realizations.
    """
    if not 1 <= order <= 6:
        raise DomainError("order must be in 1..6")
    _, flux = _stack(records)
    r = flux.shape[0]
    if r < min_records:
        raise InputDataError(f"need at least {min_records} records, got {r}")
    idx = _core_indices(flux.mean(axis=0), core)
    f = flux[:, idx]
    scale = f.mean(axis=0)
    scale[scale == 0] = 1.0
    f = f / scale
    fn = f**order
    s1, sn = f.sum(axis=0), fn.sum(axis=0)

    def stat(m1, mn):
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.mean(mn / m1**order, axis=-1)

    est = float(stat(s1 / r, sn / r))
    loo = stat((s1 - f) / (r - 1), (sn - fn) / (r - 1))
    err = math.sqrt((r - 1) / r * np.sum((loo - loo.mean()) ** 2))
    return est, err


def coherence_width(records, core=0.5, max_lag=None):
    """Coherence time recovered from intensity records through the Siegert relation.

    ``|g1(tau)|**2 = g2(tau) - 1`` is estimated from lagged intensity products
    over the ensemble core, and ``ln|g1|`` is fitted by ``-tau**2 / (2 tau_c**2)``
    over lags where 0.2 < |g1| < 0.95.  For the Gaussian coherence model this
    returns ``tau_c`` itself.
    """
    ref, flux = _stack(records)
    mean = flux.mean(axis=0)
    idx = _core_indices(mean, core)
    n = flux.shape[1]
    if max_lag is None:
        max_lag = min(n - 1 - idx.max(), idx.min(), n // 4)
    g1 = np.empty(max_lag + 1)
    for lag in range(max_lag + 1):
        a, b = flux[:, idx], flux[:, idx + lag]
        g2 = np.mean(np.mean(a * b, axis=0) / (mean[idx] * mean[idx + lag]))
        g1[lag] = math.sqrt(max(g2 - 1.0, 0.0))
    g1 /= g1[0]
    below = np.flatnonzero(g1 < 0.2)
    if below.size == 0:
        raise InputDataError("coherence width exceeds the available lag range")
    lags = np.arange(below[0])
    use = lags[(g1[lags] < 0.95) & (g1[lags] > 0.2)]
    if use.size < 2:
        raise InputDataError("coherence time is not resolved by the sampling")
    tau2 = (use * ref.dt) ** 2
    slope = np.dot(tau2, np.log(g1[use])) / np.dot(tau2, tau2)
    return math.sqrt(-0.5 / slope)


def write_pulse_csv(record, path):
    data = np.column_stack([record.times, record.flux])
    np.savetxt(path, data, delimiter=",", header="t_s,flux_cm-2s-1", comments="", fmt="%.17g")


def read_pulse_csv(path):
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except (OSError, ValueError) as exc:
        raise InputDataError(f"cannot read pulse file {path}: {exc}") from None
    t = data[:, 0]
    dt = float(np.mean(np.diff(t)))
    if not np.allclose(np.diff(t), dt, rtol=1e-9, atol=0):
        raise InputDataError("pulse file time column is not uniformly spaced")
    return PulseRecord(float(t[0]), dt, data[:, 1])
