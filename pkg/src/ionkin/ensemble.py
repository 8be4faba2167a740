"""Monte Carlo averaging over chaotic pulse realizations, plus the n! shortcut.

Realization ``i`` draws its pulse from the RNG stream ``(master_seed, *prefix, i)``
so every result is a pure function of its index.  Final populations are
collected into an index-ordered array and reduced with exactly rounded sums,
which makes the statistics independent of the worker count and of the order
in which work completes.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .constants import N_SPECIES
from .errors import ConfigError, EnsembleError, IntegrationError, IntegrityError
from .kinetics import KineticsOptions, integrate
from .model import apply_factorial_enhancement
from .pulse import ChaoticPulseSpec, DeterministicPulseSpec, gaussian_envelope, sample_chaotic_pulse

log = logging.getLogger(__name__)

FAILURE_BUDGET = 1e-3
CHUNK = 64


def worker_count(requested=None):
    """Worker threads: explicit request, else ``IONKIN_THREADS``, else all CPUs."""
    if requested is not None:
        return max(1, int(requested))
    env = os.environ.get("IONKIN_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"IONKIN_THREADS must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


@dataclass(frozen=True)
class EnsembleSpec:
    """What to average.

    ``pulse`` is normally a :class:`ChaoticPulseSpec` whose seed is replaced by
    ``master_seed``; a :class:`DeterministicPulseSpec` runs the same envelope
    every time.  ``stream_prefix`` is prepended to the realization index in the
    RNG key (the scan passes the intensity index).
    """

    pulse: ChaoticPulseSpec | DeterministicPulseSpec
    table: object
    opts: KineticsOptions = field(default_factory=KineticsOptions)
    n_realizations: int = 10_000
    master_seed: int = 0
    stream_prefix: tuple = ()

    def __post_init__(self):
        if self.n_realizations < 1:
            raise ConfigError("n_realizations must be at least 1")
        if not 0 <= int(self.master_seed) < 2**64:
            raise ConfigError("master_seed must be a 64-bit unsigned integer")

    def record(self, index):
        if isinstance(self.pulse, DeterministicPulseSpec):
            return gaussian_envelope(self.pulse)
        spec = replace(self.pulse, seed=int(self.master_seed))
        return sample_chaotic_pulse(spec.realization(*self.stream_prefix, index))


@dataclass
class EnsembleStats:
    mean: np.ndarray
    stderr: np.ndarray
    n_effective: int
    failed: tuple = ()
    max_drift: float = 0.0
    min_population: float = 0.0

    @property
    def n_failed(self):
        return len(self.failed)


def _run_chunk(spec, indices, out, ok, drift, minpop):
    deterministic = isinstance(spec.pulse, DeterministicPulseSpec)
    shared = gaussian_envelope(spec.pulse) if deterministic else None
    for i in indices:
        rec = shared if deterministic else spec.record(i)
        try:
            res = integrate(rec, spec.table, spec.opts)
        except (IntegrationError, IntegrityError) as exc:
            log.warning("realization %d failed: %s", i, exc)
            ok[i] = False
            continue
        out[i] = res.populations
        ok[i] = True
        drift[i] = res.max_drift
        minpop[i] = res.min_population


def column_mean_stderr(samples):
    """Exactly rounded mean and standard error of the mean for each column."""
    n = samples.shape[0]
    mean = np.array([math.fsum(col) / n for col in samples.T])
    if n < 2:
        return mean, np.zeros_like(mean)
    var = np.array([math.fsum((col - m) ** 2) / (n - 1) for col, m in zip(samples.T, mean)])
    return mean, np.sqrt(var / n)


def collect_final_populations(spec, workers=None):
    """Final populations of every realization, in index order.

    Returns ``(populations, ok, drift, min_population)``; rows of failed
    realizations are NaN.
    """
    n = spec.n_realizations
    out = np.full((n, N_SPECIES), np.nan)
    ok = np.zeros(n, dtype=bool)
    drift = np.zeros(n)
    minpop = np.zeros(n)
    chunks = [range(s, min(s + CHUNK, n)) for s in range(0, n, CHUNK)]
    nworkers = min(worker_count(workers), len(chunks))
    if nworkers == 1:
        for c in chunks:
            _run_chunk(spec, c, out, ok, drift, minpop)
    else:
        with ThreadPoolExecutor(nworkers) as pool:
            for fut in [pool.submit(_run_chunk, spec, c, out, ok, drift, minpop) for c in chunks]:
                fut.result()
    return out, ok, drift, minpop


def run_ensemble(spec, workers=None):
    """Average final populations over ``spec.n_realizations`` pulse realizations.

    Raises
    ------
    EnsembleError
        More than 0.1 % of the realizations failed to integrate.
    """
    pops, ok, drift, minpop = collect_final_populations(spec, workers)
    failed = tuple(int(i) for i in np.flatnonzero(~ok))
    if len(failed) > FAILURE_BUDGET * spec.n_realizations:
        raise EnsembleError(f"{len(failed)} of {spec.n_realizations} realizations failed "
                            f"(first: {list(failed[:10])})", failed)
    good = pops[ok]
    mean, stderr = column_mean_stderr(good)
    return EnsembleStats(mean, stderr, int(good.shape[0]), failed,
                         float(drift[ok].max()), float(minpop[ok].min()))


def run_decorrelated(envelope, table, opts=None):
    """Integrate the smooth envelope once with every sigma multiplied by n!."""
    return integrate(gaussian_envelope(envelope), apply_factorial_enhancement(table), opts)
