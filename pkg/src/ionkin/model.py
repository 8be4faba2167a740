"""Species ladder, ionization channels and generalized cross sections.

The neutral (charge 0) through the bare-ish ion Ne8+ form a ladder of nine
species.  Two families of channels connect them: sequential single-electron
steps ``j -> j+1`` and direct multi-electron ejection from the neutral
``0 -> j``.  Photon orders follow from the ionization potentials and the
photon energy; cross sections come from a small configuration that supplies
the one- and two-photon values and a scaling constant for everything above.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from decimal import Decimal, InvalidOperation
from importlib import resources
from pathlib import Path

import numpy as np

from .constants import C, E_CHARGE, EPS0, EV, H, HBAR, M_E, N_SPECIES, W_CM2_TO_W_M2
from .errors import ConfigError, DomainError, StateError

MAX_CHARGE = N_SPECIES - 1

DEFAULT_SIGMA1 = 1e-18   # cm^2
DEFAULT_SIGMA2 = 1e-51   # cm^4 s
DEFAULT_KAPPA = 1e-33    # cm^2 s


def load_ionization_potentials(path=None):
    """Read an ionization-potential table.

    Parameters
    ----------
    path : str or Path, optional
        Plain-text file with ``j  ip_eV`` per line and ``#`` comments.  The
        bundled neon table is used when omitted.

    Returns
    -------
    numpy.ndarray
        ``ip[j]`` in eV for the transition ``j -> j+1``.
    """
    if path is None:
        text = resources.files("ionkin.data").joinpath("ne_ip.txt").read_text()
    else:
        text = Path(path).read_text()
    rows = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ConfigError(f"IP table line {lineno}: expected 'j ip_eV', got {raw!r}")
        try:
            j, ip = int(parts[0]), float(parts[1])
        except ValueError as exc:
            raise ConfigError(f"IP table line {lineno}: {exc}") from None
        if j in rows:
            raise ConfigError(f"IP table line {lineno}: duplicate charge state {j}")
        rows[j] = ip
    if sorted(rows) != list(range(len(rows))):
        raise ConfigError("IP table charge states must be 0..n-1 without gaps")
    ips = np.array([rows[j] for j in range(len(rows))])
    validate_ionization_potentials(ips)
    return ips


def validate_ionization_potentials(ips):
    ips = np.asarray(ips, dtype=float)
    if ips.shape != (MAX_CHARGE,):
        raise ConfigError(f"need {MAX_CHARGE} ionization potentials, got {ips.size}")
    if np.any(ips <= 0):
        raise ConfigError("ionization potentials must be positive")
    if np.any(np.diff(ips) <= 0):
        raise ConfigError("ionization potentials must increase strictly with charge")
    return ips


def min_photon_order(energy_required, photon_energy):
    """Smallest photon number whose total energy reaches ``energy_required``."""
    if not energy_required > 0 or not photon_energy > 0:
        raise DomainError("energies must be positive")
    n = math.ceil(energy_required / photon_energy)
    # guard against ratios like 2.0000000000000004 from rounding
    if (n - 1) * photon_energy >= energy_required:
        n -= 1
    return max(int(n), 1)


def log_value(x):
    """Natural log of a nonnegative number given as float, int, Decimal or string.

    Strings and Decimals keep magnitudes such as ``"1e-348"`` that a double
    cannot hold.  Zero maps to ``-inf`` (a closed channel).
    """
    if isinstance(x, (str, Decimal)):
        try:
            d = Decimal(str(x).strip())
        except InvalidOperation:
            raise ConfigError(f"not a number: {x!r}") from None
        if d < 0:
            raise ConfigError(f"negative cross section {x!r}")
        return -math.inf if d == 0 else float(d.ln())
    x = float(x)
    if x < 0 or math.isnan(x):
        raise ConfigError(f"negative cross section {x!r}")
    return -math.inf if x == 0 else math.log(x)


def scale_cross_section(sigma_ref, ref_order, target_order, kappa):
    """Raise a generalized cross section of order ``ref_order`` to ``target_order``.

    Each extra photon contributes one factor of ``kappa`` (cm^2 s).  Very high
    orders underflow a double; :func:`scale_log_cross_section` does not.
    """
    _check_scaling(sigma_ref, ref_order, target_order, kappa)
    return sigma_ref * kappa ** (target_order - ref_order)


def scale_log_cross_section(ln_sigma_ref, ref_order, target_order, kappa):
    """Same as :func:`scale_cross_section` on the natural-log scale."""
    _check_scaling(1.0, ref_order, target_order, kappa)
    return ln_sigma_ref + (target_order - ref_order) * math.log(kappa)


def _check_scaling(sigma_ref, ref_order, target_order, kappa):
    if target_order < ref_order or ref_order < 1:
        raise DomainError(f"cannot scale order {ref_order} down to {target_order}")
    if not sigma_ref > 0 or not kappa > 0:
        raise DomainError("sigma_ref and kappa must be positive")


@dataclass(frozen=True)
class CrossSectionConfig:
    """Where channel cross sections come from.

    ``overrides`` maps ``(source, target)`` to the natural log of a cross
    section in the channel's own generalized units; it wins over the scaled
    default.  :meth:`from_mapping` accepts plain values (strings allowed).
    """

    sigma1_cm2: float = DEFAULT_SIGMA1
    sigma2_cm4s: float = DEFAULT_SIGMA2
    kappa_cm2s: float = DEFAULT_KAPPA
    overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("sigma1_cm2", "sigma2_cm4s", "kappa_cm2s"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        for key, value in self.overrides.items():
            if math.isnan(value) or value == math.inf:
                raise ConfigError(f"override {key} is not a valid log cross section")

    @classmethod
    def from_mapping(cls, data):
        """Build from the JSON-compatible form (``"from-to"`` override keys)."""
        data = dict(data or {})
        known = {"sigma1_cm2", "sigma2_cm4s", "kappa_cm2s", "overrides"}
        extra = set(data) - known
        overrides = dict(data.pop("overrides", {}) or {})
        # per-channel keys may also sit at top level, e.g. {"0-4": 1e-110}
        for key in list(extra):
            overrides[key] = data.pop(key)
        parsed = {}
        for key, value in overrides.items():
            try:
                a, b = (int(s) for s in str(key).split("-"))
            except ValueError:
                raise ConfigError(f"bad channel override key {key!r}; use 'from-to'") from None
            parsed[(a, b)] = log_value(value)
        try:
            kwargs = {k: float(v) for k, v in data.items()}
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"cross-section config: {exc}") from None
        return cls(overrides=parsed, **kwargs)

    def ln_sigma_for_order(self, order):
        """Log of the n-photon one-electron cross section shared by every channel of that order."""
        if order == 1:
            return math.log(self.sigma1_cm2)
        return scale_log_cross_section(math.log(self.sigma2_cm4s), 2, order, self.kappa_cm2s)


@dataclass(frozen=True)
class Channel:
    """One ionization channel; the cross section is kept as its natural log."""

    source: int
    target: int
    order: int
    ln_sigma: float
    sequential: bool = False
    direct: bool = False

    @property
    def sigma(self):
        """Cross section in cm^(2n) s^(n-1); underflows to 0 for the highest orders."""
        return math.exp(self.ln_sigma)

    @property
    def electrons(self):
        return self.target - self.source

    @property
    def key(self):
        return (self.source, self.target)


@dataclass(frozen=True)
class ChannelTable:
    photon_energy: float
    channels: tuple
    ionization_potentials: tuple
    enhancement_applied: bool = False

    def __post_init__(self):
        seen = set()
        for ch in self.channels:
            if ch.key in seen:
                raise ConfigError(f"duplicate channel {ch.key}")
            seen.add(ch.key)
            if not 0 <= ch.source < ch.target <= MAX_CHARGE:
                raise ConfigError(f"channel {ch.key} outside the species ladder")
            if ch.order < ch.electrons:
                raise ConfigError(f"channel {ch.key}: {ch.order} photons cannot eject {ch.electrons} electrons")
            need = sum(self.ionization_potentials[ch.source:ch.target])
            if ch.order * self.photon_energy < need * (1 - 1e-12):
                raise ConfigError(f"channel {ch.key} is energetically closed at order {ch.order}")
            if math.isnan(ch.ln_sigma) or ch.ln_sigma == math.inf:
                raise ConfigError(f"channel {ch.key} has an invalid cross section")
            if ch.sequential and ch.target != ch.source + 1:
                raise ConfigError(f"channel {ch.key} flagged sequential")
            if ch.direct and ch.source != 0:
                raise ConfigError(f"channel {ch.key} flagged direct")
        n_seq = sum(ch.sequential for ch in self.channels)
        if n_seq != MAX_CHARGE:
            raise ConfigError(f"expected {MAX_CHARGE} sequential channels, got {n_seq}")

    def __iter__(self):
        return iter(self.channels)

    def __len__(self):
        return len(self.channels)

    def get(self, source, target):
        for ch in self.channels:
            if ch.key == (source, target):
                return ch
        raise KeyError((source, target))

    @property
    def sequential(self):
        return tuple(ch for ch in self.channels if ch.sequential)

    @property
    def direct(self):
        return tuple(ch for ch in self.channels if ch.direct)

    def active(self, mode):
        """Channels taking part in a given channel mode."""
        if mode == "sequential_only":
            return tuple(ch for ch in self.channels if ch.sequential)
        if mode == "sequential_plus_direct":
            return self.channels
        raise ConfigError(f"unknown channel mode {mode!r}")

    def with_sigmas(self, sigmas):
        """Copy with cross sections replaced for the ``(source, target)`` keys given.

        Values are plain cross sections (float, Decimal or numeric string).
        """
        unknown = set(sigmas) - {ch.key for ch in self.channels}
        if unknown:
            raise KeyError(sorted(unknown))
        chans = tuple(replace(ch, ln_sigma=log_value(sigmas[ch.key])) if ch.key in sigmas else ch
                      for ch in self.channels)
        return replace(self, channels=chans)

    def isolated(self, source, target):
        """Copy in which only one channel keeps a nonzero cross section."""
        return self.with_sigmas({ch.key: 0.0 for ch in self.channels if ch.key != (source, target)})


def build_channel_table(photon_energy, ips=None, sigma_source=None):
    """Enumerate sequential and neutral-origin direct channels.

    Sequential orders are the energetic minimum for each step.  Direct orders
    are the energetic minimum for the summed potentials, but never fewer
    photons than electrons.  The ``0 -> 1`` channel is shared by both
    families and appears once.
    """
    if not photon_energy > 0:
        raise DomainError("photon energy must be positive")
    ips = load_ionization_potentials() if ips is None else validate_ionization_potentials(ips)
    sigma_source = sigma_source or CrossSectionConfig()

    def sigma(key, order):
        if key in sigma_source.overrides:
            return sigma_source.overrides[key]
        return sigma_source.ln_sigma_for_order(order)

    channels = []
    for j in range(MAX_CHARGE):
        n = min_photon_order(ips[j], photon_energy)
        channels.append(Channel(j, j + 1, n, sigma((j, j + 1), n), sequential=True, direct=(j == 0)))
    for j in range(2, MAX_CHARGE + 1):
        n = max(min_photon_order(float(np.sum(ips[:j])), photon_energy), j)
        channels.append(Channel(0, j, n, sigma((0, j), n), direct=True))
    unknown = set(sigma_source.overrides) - {ch.key for ch in channels}
    if unknown:
        raise ConfigError(f"overrides for nonexistent channels: {sorted(unknown)}")
    return ChannelTable(float(photon_energy), tuple(channels), tuple(float(x) for x in ips))


def apply_factorial_enhancement(table):
    """Fold the chaotic-light factor n! into every channel's cross section."""
    if table.enhancement_applied:
        raise StateError("factorial enhancement already applied to this table")
    chans = tuple(replace(ch, ln_sigma=ch.ln_sigma + math.lgamma(ch.order + 1))
                  for ch in table.channels)
    return replace(table, channels=chans, enhancement_applied=True)


@dataclass(frozen=True)
class ValidityReport:
    ponderomotive_ev: float
    field_cycles: float
    up_ratio: float
    up_ok: bool
    cycles_ok: bool

    @property
    def ok(self):
        return self.up_ok and self.cycles_ok

    def __str__(self):
        return (f"U_p = {self.ponderomotive_ev:.4g} eV (U_p/hw = {self.up_ratio:.3g}, "
                f"{'ok' if self.up_ok else 'FAIL'}); {self.field_cycles:.4g} field cycles "
                f"({'ok' if self.cycles_ok else 'FAIL'})")


def ponderomotive_energy(photon_energy, intensity):
    """Cycle-averaged quiver energy in eV for a linearly polarized field.

    ``photon_energy`` in eV, ``intensity`` in W/cm^2.
    """
    omega = photon_energy * EV / HBAR
    e_field_sq = 2.0 * intensity * W_CM2_TO_W_M2 / (C * EPS0)
    return E_CHARGE**2 * e_field_sq / (4.0 * M_E * omega**2) / EV


def check_lopt_validity(photon_energy, peak_intensity, pulse_duration):
    up = ponderomotive_energy(photon_energy, peak_intensity)
    period = H / (photon_energy * EV)
    cycles = pulse_duration / period
    ratio = up / photon_energy
    return ValidityReport(up, cycles, ratio, ratio < 0.5, cycles >= 10)
