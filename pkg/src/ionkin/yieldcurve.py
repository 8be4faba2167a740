"""Charge-state yields tabulated against peak intensity, with CSV round-tripping."""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator

from .constants import N_SPECIES
from .errors import DomainError, InputDataError

LOG_FLOOR = 1e-300
SUM_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class YieldCurve:
    """Final populations ``yields[i, j]`` of species ``j`` at peak intensity ``intensities[i]``.

    ``stderr`` has the same shape and is present for stochastic runs.
    """

    intensities: np.ndarray
    yields: np.ndarray
    stderr: np.ndarray | None = None

    def __post_init__(self):
        inten = np.array(self.intensities, dtype=float)
        y = np.array(self.yields, dtype=float)
        if inten.ndim != 1 or inten.size < 2:
            raise DomainError("a yield curve needs at least 2 intensities")
        if not np.all(inten > 0) or not np.all(np.diff(inten) > 0):
            raise DomainError("intensities must be positive and strictly increasing")
        if y.ndim != 2 or y.shape[0] != inten.size:
            raise DomainError("yields must have one row per intensity")
        if not np.all(np.isfinite(y)):
            raise DomainError("yields must be finite")
        object.__setattr__(self, "intensities", inten)
        object.__setattr__(self, "yields", y)
        if self.stderr is not None:
            err = np.array(self.stderr, dtype=float)
            if err.shape != y.shape:
                raise DomainError("stderr must match the shape of yields")
            object.__setattr__(self, "stderr", err)

    @classmethod
    def from_function(cls, fn, i_min, i_max, per_decade=25):
        """Tabulate ``fn(I) -> yields`` on a log grid that covers [i_min, i_max]."""
        inten = log_grid(i_min, i_max, per_decade)
        return cls(inten, np.array([np.atleast_1d(fn(i)) for i in inten], dtype=float))

    @property
    def n_species(self):
        return self.yields.shape[1]

    def __len__(self):
        return self.intensities.size

    def max_sum_error(self):
        return float(np.max(np.abs(self.yields.sum(axis=1) - 1.0)))

    @functools.cached_property
    def is_distribution(self):
        """True when every row is a set of populations summing to 1."""
        return bool(np.all(self.yields >= -SUM_TOL)) and self.max_sum_error() < SUM_TOL

    def covers(self, lo, hi, rtol=1e-9):
        return self.intensities[0] <= lo * (1 + rtol) and self.intensities[-1] >= hi * (1 - rtol)

    @functools.cached_property
    def _log_interpolant(self):
        logy = np.log(np.clip(self.yields, LOG_FLOOR, None))
        return PchipInterpolator(np.log(self.intensities), logy, axis=0, extrapolate=False)

    def __call__(self, intensity):
        """Monotone interpolation of log yield against log intensity.

        Power laws are reproduced exactly; entries at or below 1e-300 read back
        as negligible.  When the table holds populations, interpolated rows are
        rescaled to sum to 1, since the species are interpolated separately.
        Requests outside the tabulated range raise.
        """
        x = np.log(np.asarray(intensity, dtype=float))
        lo, hi = np.log(self.intensities[0]), np.log(self.intensities[-1])
        if np.any(x < lo - 1e-12) or np.any(x > hi + 1e-12):
            raise InputDataError("intensity outside the tabulated yield curve")
        y = np.exp(self._log_interpolant(np.clip(x, lo, hi)))
        if self.is_distribution:
            y = y / y.sum(axis=-1, keepdims=True)
        return y

    def linear(self, intensity):
        """Piecewise-linear interpolation in ln I, used for standard errors."""
        x = np.log(np.atleast_1d(np.asarray(intensity, dtype=float)))
        knots = np.log(self.intensities)
        if np.any(x < knots[0] - 1e-12) or np.any(x > knots[-1] + 1e-12):
            raise InputDataError("intensity outside the tabulated yield curve")
        out = np.array([np.interp(x, knots, col) for col in self.yields.T]).T
        return out[0] if np.ndim(intensity) == 0 else out


def log_grid(i_min, i_max, per_decade):
    """Log-spaced grid from ``i_min`` to ``i_max`` with at least ``per_decade`` points per decade."""
    if not 0 < i_min < i_max:
        raise DomainError("need 0 < i_min < i_max")
    if per_decade < 1:
        raise DomainError("points per decade must be at least 1")
    decades = np.log10(i_max / i_min)
    n = int(np.ceil(decades * per_decade - 1e-9)) + 1
    grid = np.logspace(np.log10(i_min), np.log10(i_max), n)
    grid[0], grid[-1] = i_min, i_max
    return grid


def yields_header(n_species=N_SPECIES, with_err=False):
    cols = ["intensity_W_cm2"] + [f"N{j}_mean" for j in range(n_species)]
    if with_err:
        cols += [f"N{j}_err" for j in range(n_species)]
    return ",".join(cols)


def write_yields_csv(curve, path):
    """Write ``intensity_W_cm2,N0_mean,...[,N0_err,...]`` with 17 significant digits."""
    cols = [curve.intensities[:, None], curve.yields]
    if curve.stderr is not None:
        cols.append(curve.stderr)
    np.savetxt(path, np.hstack(cols), delimiter=",", comments="", fmt="%.17g",
               header=yields_header(curve.n_species, curve.stderr is not None))


def read_yields_csv(path):
    try:
        with open(path) as fh:
            header = fh.readline().strip().split(",")
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except (OSError, ValueError) as exc:
        raise InputDataError(f"cannot read yields file {path}: {exc}") from None
    if not header or header[0] != "intensity_W_cm2":
        raise InputDataError(f"{path}: unexpected header")
    n_mean = sum(1 for h in header if h.endswith("_mean"))
    n_err = sum(1 for h in header if h.endswith("_err"))
    if data.shape[1] != 1 + n_mean + n_err or n_err not in (0, n_mean):
        raise InputDataError(f"{path}: column count does not match the header")
    stderr = data[:, 1 + n_mean:] if n_err else None
    try:
        return YieldCurve(data[:, 0], data[:, 1:1 + n_mean], stderr)
    except DomainError as exc:
        raise InputDataError(f"{path}: {exc}") from None
