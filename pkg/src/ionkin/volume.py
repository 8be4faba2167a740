"""Averaging single-intensity yields over the intensity distribution of a focus.

Two geometries are provided.  ``gaussian_transverse_2d`` is a thin target
across a Gaussian spot, ``I(r) = I0 exp(-2 r**2 / w0**2)``, whose area per unit
intensity is proportional to ``1/I``.  ``gaussian_beam_3d`` is the full focal
volume of a Gaussian beam, whose iso-intensity shells give

    V(>I) = pi w0**2 zR [4/3 b + 2/9 b**3 - 4/3 arctan b],   b = sqrt(I0/I - 1).

Both are cut off below ``fmin * I0`` and normalized over the remaining domain,
so the averages do not depend on ``w0`` or ``zR``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad_vec

from .errors import ConfigError, DomainError, InputDataError
from .yieldcurve import YieldCurve

VOLUME_KINDS = ("none", "gaussian_transverse_2d", "gaussian_beam_3d")
GL_NODES = 8


@dataclass(frozen=True)
class VolumeModel:
    """Focal geometry.

    The defaults describe a 5 um waist; ``zR_cm`` is the matching
    diffraction-limited Rayleigh range at 13.3 nm.  Only the 3-d model reads it.
    """

    kind: str = "gaussian_transverse_2d"
    w0_cm: float = 5e-4
    zR_cm: float = 0.59
    fmin: float = 1e-4

    def __post_init__(self):
        if self.kind not in VOLUME_KINDS:
            raise ConfigError(f"unknown volume kind {self.kind!r}; expected one of {VOLUME_KINDS}")
        if not 0 < self.fmin < 1:
            raise ConfigError("volume.fmin must lie in (0, 1)")
        if not (self.w0_cm > 0 and self.zR_cm > 0):
            raise ConfigError("beam waist and Rayleigh range must be positive")

    @property
    def log_span(self):
        """ln(1/fmin), the width of the averaging domain in ln I."""
        return -math.log(self.fmin)


def _beta(a):
    return np.sqrt(np.maximum(a - 1.0, 0.0))


def _volume_above(a, w0, zr):
    b = _beta(a)
    return math.pi * w0**2 * zr * (4.0 / 3.0 * b + 2.0 / 9.0 * b**3 - 4.0 / 3.0 * np.arctan(b))


@dataclass(frozen=True)
class WeightDensity:
    """Normalized distribution of intensity over the focal domain.

    Calling it gives the density per unit intensity on ``[lower, upper]``
    (zero outside).  For ``kind == "none"`` it is a point mass at ``I0`` and
    only :meth:`fraction_above` is meaningful.
    """

    model: VolumeModel
    I0: float

    @property
    def lower(self):
        return self.I0 if self.model.kind == "none" else self.model.fmin * self.I0

    @property
    def upper(self):
        return self.I0

    @property
    def is_point_mass(self):
        return self.model.kind == "none"

    @property
    def total(self):
        """Unnormalized area (cm^2) or volume (cm^3) above the cutoff; 0 for a point mass."""
        m = self.model
        if m.kind == "gaussian_transverse_2d":
            return 0.5 * math.pi * m.w0_cm**2 * m.log_span
        if m.kind == "gaussian_beam_3d":
            return float(_volume_above(1.0 / m.fmin, m.w0_cm, m.zR_cm))
        return 0.0

    def __call__(self, intensity):
        i = np.asarray(intensity, dtype=float)
        inside = (i >= self.lower) & (i <= self.upper)
        m = self.model
        if m.kind == "none":
            return np.zeros_like(i)
        with np.errstate(divide="ignore", invalid="ignore"):
            if m.kind == "gaussian_transverse_2d":
                dens = 0.5 * math.pi * m.w0_cm**2 / i
            else:
                a = self.I0 / i
                dens = math.pi * m.w0_cm**2 * m.zR_cm * _beta(a) * (a + 2.0) / (3.0 * a) * self.I0 / i**2
        return np.where(inside, dens / self.total, 0.0)

    def fraction_above(self, intensity):
        """Share of the domain where the intensity exceeds ``intensity``."""
        i = np.asarray(intensity, dtype=float)
        m = self.model
        if m.kind == "none":
            return np.where(i < self.I0, 1.0, 0.0)
        a = self.I0 / np.clip(i, self.lower, self.upper)
        if m.kind == "gaussian_transverse_2d":
            return np.log(a) / m.log_span
        return _volume_above(a, m.w0_cm, m.zR_cm) / self.total


def intensity_weight_density(model, I0):
    if not I0 > 0:
        raise DomainError("peak intensity must be positive")
    if not isinstance(model, VolumeModel):
        raise ConfigError("expected a VolumeModel")
    return WeightDensity(model, float(I0))


def _log_weight(u, kind):
    """Weight per unit u = ln(I0/I); for 3-d this is b (a + 2) / 3 up to the volume scale."""
    if kind == "gaussian_transverse_2d":
        return np.ones_like(u)
    a = np.exp(u)
    return _beta(a) * (a + 2.0) / 3.0


def quadrature_rule(breaks, kind, nodes=GL_NODES):
    """Nodes in u = ln(I0/I) and weights for the normalized average.

    Gauss-Legendre panels between consecutive ``breaks``.  The 3-d weight
    behaves like sqrt(u) at the peak, so panels are laid out in s = sqrt(u)
    where the integrand is smooth.
    """
    x, w = np.polynomial.legendre.leggauss(nodes)
    if kind == "gaussian_beam_3d":
        s = np.sqrt(breaks)
        a, b = s[:-1, None], s[1:, None]
        sn = 0.5 * (b - a) * x + 0.5 * (a + b)
        wn = 0.5 * (b - a) * w
        u = sn**2
        wt = wn * 2.0 * sn * _log_weight(u, kind)
    else:
        a, b = breaks[:-1, None], breaks[1:, None]
        u = 0.5 * (b - a) * x + 0.5 * (a + b)
        wt = 0.5 * (b - a) * w * _log_weight(u, kind)
    u, wt = u.ravel(), wt.ravel()
    return u, wt / math.fsum(wt)


@dataclass
class VolumeAverage:
    """Averaged yields, quadrature error estimate and, for stochastic input, standard error."""

    yields: np.ndarray
    abs_error: np.ndarray
    stderr: np.ndarray | None = None

    @property
    def rel_error(self):
        """Largest relative error estimate among species with yields above 1e-6."""
        visible = self.yields >= 1e-6
        if not np.any(visible):
            return 0.0
        return float(np.max(self.abs_error[visible] / self.yields[visible]))


def _rule_for(curve, model, I0, nodes):
    u_max = model.log_span
    inner = np.log(I0 / curve.intensities)
    inner = inner[(inner > 1e-12) & (inner < u_max - 1e-12)]
    breaks = np.unique(np.concatenate([[0.0, u_max], inner]))
    return quadrature_rule(breaks, model.kind, nodes)


def _average_on(curve, model, I0, nodes):
    u, wt = _rule_for(curve, model, I0, nodes)
    return wt @ curve(I0 * np.exp(-u))


def _propagated_stderr(curve, model, I0, nodes):
    """Standard error of the average for independent errors at the grid points.

    Each grid point is credited with the quadrature weight it would receive
    under linear interpolation in ln I.
    """
    u, wt = _rule_for(curve, model, I0, nodes)
    x = np.log(I0) - u
    knots = np.log(curve.intensities)
    k = np.clip(np.searchsorted(knots, x) - 1, 0, knots.size - 2)
    frac = (x - knots[k]) / (knots[k + 1] - knots[k])
    cell = np.zeros(knots.size)
    np.add.at(cell, k, wt * (1.0 - frac))
    np.add.at(cell, k + 1, wt * frac)
    return np.sqrt((cell**2) @ (curve.stderr**2))


def _coarsened(curve):
    keep = np.arange(0, len(curve), 2)
    if keep[-1] != len(curve) - 1:
        keep = np.append(keep, len(curve) - 1)
    err = None if curve.stderr is None else curve.stderr[keep]
    return YieldCurve(curve.intensities[keep], curve.yields[keep], err)


def volume_average(curve, model, I0, nodes=GL_NODES):
    """Volume-averaged yields at peak intensity ``I0``.

    Parameters
    ----------
    curve : YieldCurve or callable
        Single-intensity yields.  A callable is tabulated at 25 points per decade.
    model : VolumeModel
    I0 : float
        Peak intensity in W/cm^2.

    Returns
    -------
    VolumeAverage
        Averages and an error estimate: the change when every other grid
        point is dropped, or when the quadrature order is doubled, whichever
        is larger.

    Raises
    ------
    InputDataError
        The curve does not cover [fmin * I0, I0].
    """
    if not I0 > 0:
        raise DomainError("peak intensity must be positive")
    lo = I0 if model.kind == "none" else model.fmin * I0
    if callable(curve) and not isinstance(curve, YieldCurve):
        curve = YieldCurve.from_function(curve, lo * (1 - 1e-12) if lo < I0 else lo / 1.01, I0 * 1.01)
    if not curve.covers(lo, I0):
        raise InputDataError(f"yield curve spans [{curve.intensities[0]:.4g}, "
                             f"{curve.intensities[-1]:.4g}] W/cm^2, need [{lo:.4g}, {I0:.4g}]")
    if model.kind == "none":
        y = curve(I0)
        se = None
        if curve.stderr is not None:
            se = YieldCurve(curve.intensities, curve.stderr).linear(I0)
        return VolumeAverage(y, np.zeros_like(y), se)
    fine = _average_on(curve, model, I0, nodes)
    err = np.abs(_average_on(curve, model, I0, 2 * nodes) - fine)
    if len(curve) >= 5:
        err = np.maximum(err, np.abs(_average_on(_coarsened(curve), model, I0, nodes) - fine))
    se = None if curve.stderr is None else _propagated_stderr(curve, model, I0, nodes)
    return VolumeAverage(fine, err, se)


def volume_averaged_curve(curve, model, peaks):
    """Apply :func:`volume_average` at every peak intensity.

    Returns the averaged :class:`YieldCurve` (carrying propagated standard
    errors when the input has them) and the quadrature error estimates.
    """
    rows = [volume_average(curve, model, p) for p in peaks]
    se = None if curve.stderr is None else np.array([r.stderr for r in rows])
    return (YieldCurve(np.asarray(peaks, dtype=float), np.array([r.yields for r in rows]), se),
            np.array([r.abs_error for r in rows]))


def radial_oracle_2d(fn, model, I0, epsabs=0.0, epsrel=1e-10):
    """Brute-force average of ``fn(I)`` over the spot, integrating 2 pi r dr directly."""
    r_max = model.w0_cm * math.sqrt(0.5 * model.log_span)

    def integrand(r):
        return np.atleast_1d(fn(I0 * math.exp(-2.0 * r * r / model.w0_cm**2))) * 2.0 * math.pi * r

    num, _ = quad_vec(integrand, 0.0, r_max, epsabs=epsabs, epsrel=epsrel)
    return num / (math.pi * r_max**2)


def spatial_oracle_3d(fn, model, I0, epsabs=0.0, epsrel=1e-9):
    """Brute-force average of ``fn(I)`` over the focal volume above the cutoff.

    Integrates over axial and radial position with z = zR tan(theta) and the
    radial coordinate in units of the local spot area, so that
    ``I = I0 cos(theta)**2 exp(-v)``.  The normalizing volume is computed the
    same way with ``fn = 1``.
    """
    fmin = model.fmin
    theta_max = math.acos(math.sqrt(fmin))

    def shell(theta, f):
        c2 = math.cos(theta) ** 2
        v_max = math.log(c2 / fmin)
        if v_max <= 0:
            return np.zeros_like(np.atleast_1d(f(I0)))
        inner, _ = quad_vec(lambda v: np.atleast_1d(f(I0 * c2 * math.exp(-v))), 0.0, v_max,
                            epsabs=epsabs, epsrel=epsrel)
        return inner / c2**2

    num, _ = quad_vec(lambda th: shell(th, fn), 0.0, theta_max, epsabs=epsabs, epsrel=epsrel)
    den, _ = quad_vec(lambda th: shell(th, lambda i: 1.0), 0.0, theta_max, epsabs=epsabs, epsrel=epsrel)
    return num / den
