"""Population rate equations for the neon charge-state ladder.

For every active channel ``j -> k`` of photon order ``n`` the population flows
at the rate ``sigma * F(t)**n * N_j``.  The neutral feeds every species through
the direct channels; each ion feeds the next one through the sequential
ladder, and Ne8+ is terminal.  Columns of the rate matrix sum to zero, so the
total population is conserved by any Runge-Kutta step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _integrators as _k
from .constants import N_SPECIES
from .errors import ConfigError, DomainError, IntegrationError, IntegrityError

CHANNEL_MODES = ("sequential_only", "sequential_plus_direct")
INTEGRITY_LIMIT = 1e-6
TRAJECTORY_ROWS = 4096


@dataclass(frozen=True)
class KineticsOptions:
    """Integrator settings.

    ``max_step`` defaults to 16 sample spacings of the record being integrated.
    ``method`` is ``"auto"`` (explicit, falling back to Radau on stiffness),
    ``"dopri5"`` or ``"radau"``.
    """

    rel_tol: float = 1e-8
    abs_tol: float = 1e-30
    max_step: float | None = None
    channel_mode: str = "sequential_plus_direct"
    method: str = "auto"
    max_steps: int = 200_000

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ConfigError("tolerances must be positive")
        if self.channel_mode not in CHANNEL_MODES:
            raise ConfigError(f"channel_mode must be one of {CHANNEL_MODES}")
        if self.method not in ("auto", "dopri5", "radau"):
            raise ConfigError(f"unknown integration method {self.method!r}")
        if self.max_step is not None and not self.max_step > 0:
            raise ConfigError("max_step must be positive")


@dataclass
class IntegrationResult:
    populations: np.ndarray
    method: str
    n_accepted: int
    n_rejected: int
    max_drift: float
    min_population: float
    times: np.ndarray | None = field(default=None, repr=False)
    trajectory: np.ndarray | None = field(default=None, repr=False)

    @property
    def yields(self):
        """Populations with round-off dips below zero clipped, for reporting."""
        return np.clip(self.populations, 0.0, None)


def channel_arrays(table, mode):
    chans = table.active(mode)
    src = np.array([c.source for c in chans], dtype=np.int64)
    dst = np.array([c.target for c in chans], dtype=np.int64)
    order = np.array([c.order for c in chans], dtype=float)
    ln_sigma = np.array([c.ln_sigma for c in chans], dtype=float)
    return src, dst, order, ln_sigma


def scaled_cross_sections(ln_sigma, order, flux_ref):
    """sigma * flux_ref**n, formed in the log domain.

    The kernels see the flux in units of ``flux_ref`` (normally the record
    peak), which keeps its powers near unity; the cross sections absorb the
    scale.  Entries that underflow describe rates below 1e-308 s^-1.
    """
    if not flux_ref > 0:
        return np.zeros_like(ln_sigma)
    ln_scaled = ln_sigma + order * math.log(flux_ref)
    if np.any(ln_scaled > 700.0):
        raise DomainError("a channel rate exceeds 1e304 s^-1 at the reference flux")
    return np.exp(ln_scaled)


def rate_rhs(pop, flux, table, mode="sequential_plus_direct"):
    """Time derivative of the populations at a given instantaneous flux."""
    if flux < 0:
        raise DomainError("flux must be nonnegative")
    src, dst, order, ln_sigma = channel_arrays(table, mode)
    sigma = scaled_cross_sections(ln_sigma, order, float(flux))
    rates = np.empty(sigma.size)
    out = np.empty(N_SPECIES)
    _k.channel_rates(1.0, sigma, order, rates)
    _k.apply_rates(np.asarray(pop, dtype=float), rates, src, dst, out)
    return out


def flux_interpolant(pulse):
    """Coefficients of the monotone cubic interpolant through the record samples."""
    return _k.pchip_coefficients(pulse.flux, pulse.dt)


def evaluate_flux(pulse, t, coef=None):
    coef = flux_interpolant(pulse) if coef is None else coef
    return np.array([_k.flux_at(float(x), pulse.t0, pulse.dt, coef) for x in np.atleast_1d(t)])


def _initial(initial):
    if initial is None:
        y0 = np.zeros(N_SPECIES)
        y0[0] = 1.0
        return y0
    y0 = np.array(initial, dtype=float)
    if y0.shape != (N_SPECIES,):
        raise DomainError(f"initial populations need {N_SPECIES} entries")
    if np.any(y0 < -1e-12) or np.any(y0 > 1 + 1e-12) or abs(y0.sum() - 1.0) > 1e-9:
        raise DomainError("initial populations must lie in [0, 1] and sum to 1")
    return y0


def integrate(pulse, table, opts=None, initial=None, trajectory=False, coef=None):
    """Evolve the populations across a pulse record.

    Parameters
    ----------
    pulse : PulseRecord
    table : ChannelTable
    opts : KineticsOptions, optional
    initial : array_like, optional
        Starting populations; all atoms neutral by default.
    trajectory : bool
        Keep the accepted steps (decimated to at most 4096 rows).
    coef : numpy.ndarray, optional
        Precomputed flux interpolant, see :func:`flux_interpolant`.

    Returns
    -------
    IntegrationResult

    Raises
    ------
    IntegrationError
        Both steppers failed; ``.time`` holds the time reached.
    IntegrityError
        Population drift beyond 1e-6.
    """
    opts = opts or KineticsOptions()
    y0 = _initial(initial)
    src, dst, order, ln_sigma = channel_arrays(table, opts.channel_mode)
    if coef is None:
        coef = flux_interpolant(pulse)
    flux_ref = float(pulse.flux.max())
    sigma = scaled_cross_sections(ln_sigma, order, flux_ref)
    if flux_ref > 0:
        coef = coef / flux_ref
    h_max = opts.max_step if opts.max_step is not None else 16.0 * pulse.dt
    if trajectory:
        traj_t = np.empty(opts.max_steps + 1)
        traj_y = np.empty((opts.max_steps + 1, N_SPECIES))
    else:
        traj_t = np.empty(1)
        traj_y = np.empty((1, N_SPECIES))
    args = (y0, pulse.t0, pulse.t_end, pulse.t0, pulse.dt, coef, sigma, order, src, dst,
            opts.rel_tol, opts.abs_tol, h_max, opts.max_steps, trajectory, traj_t, traj_y)

    method = "dopri5" if opts.method in ("auto", "dopri5") else "radau"
    if method == "dopri5":
        out = _k.dopri5(*args)
        if out[0] != _k.STATUS_OK and opts.method == "auto":
            method = "radau"
    if method == "radau":
        out = _k.radau(*args, _k.RA)
    status, y, t_reached, n_acc, n_rej, drift, min_pop, n_traj = out
    if status != _k.STATUS_OK:
        reason = {_k.STATUS_STIFF: "stiffness", _k.STATUS_UNDERFLOW: "step-size underflow",
                  _k.STATUS_MAXSTEPS: "step budget exhausted"}[status]
        raise IntegrationError(f"{method} stopped by {reason} at t = {t_reached:.6g} s",
                               time=t_reached)
    if drift > INTEGRITY_LIMIT or min_pop < -INTEGRITY_LIMIT:
        raise IntegrityError(f"population invariants breached: drift {drift:.3g}, "
                             f"minimum {min_pop:.3g}")
    result = IntegrationResult(y, method, n_acc, n_rej, drift, min_pop)
    if trajectory:
        step = max(1, math.ceil(n_traj / TRAJECTORY_ROWS))
        keep = np.arange(0, n_traj, step)
        if keep[-1] != n_traj - 1:
            keep = np.append(keep[: TRAJECTORY_ROWS - 1], n_traj - 1)
        result.times = traj_t[keep].copy()
        result.trajectory = traj_y[keep].copy()
    return result


def power_integral(pulse, order, coef=None):
    """Integral of F(t)**order over the record, exact for the cubic interpolant.

    Each interval is a cubic in s, so F**order has degree 3*order and a
    Gauss-Legendre rule with ceil((3*order + 1)/2) nodes integrates it exactly.
    """
    coef = flux_interpolant(pulse) if coef is None else coef
    nodes, weights = np.polynomial.legendre.leggauss((3 * order + 2) // 2)
    s = 0.5 * (nodes + 1.0)
    p = coef[:, 0:1] + s * (coef[:, 1:2] + s * (coef[:, 2:3] + s * coef[:, 3:4]))
    p = np.clip(p, 0.0, None)
    per_interval = 0.5 * (p**order) @ weights
    return float(math.fsum(per_interval) * pulse.dt)


def analytic_single_channel(sigma, pulse, order):
    """Survival probability of the neutral when a single 0 -> 1 channel is open."""
    if sigma == 0:
        return 1.0
    return math.exp(-sigma * power_integral(pulse, order))


def analytic_single_channel_log(ln_sigma, pulse, order):
    """As :func:`analytic_single_channel` for cross sections given by their log."""
    integral = power_integral(pulse, order)
    if integral == 0 or ln_sigma == -math.inf:
        return 1.0
    return math.exp(-math.exp(ln_sigma + math.log(integral)))


def write_trajectory_csv(result, path):
    if result.trajectory is None:
        raise DomainError("result carries no trajectory")
    header = "t_s," + ",".join(f"N{j}" for j in range(N_SPECIES))
    np.savetxt(path, np.column_stack([result.times, result.trajectory]), delimiter=",",
               header=header, comments="", fmt="%.17g")
