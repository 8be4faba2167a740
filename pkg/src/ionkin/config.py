"""Run configuration: a JSON document with fixed sections, validated up front.

Every combination of pulse kind, channel mode, stochastic method and volume
model either maps onto a runnable scenario or is refused here with a message
naming the offending keys.  Command-line overrides use dotted keys
(``ensemble.n_realizations=200``) and are applied before validation.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field

from .constants import FS
from .errors import ConfigError
from .kinetics import CHANNEL_MODES, KineticsOptions
from .model import CrossSectionConfig
from .pulse import ChaoticPulseSpec, DeterministicPulseSpec
from .volume import VOLUME_KINDS, VolumeModel

SECTIONS = ("atom", "pulse", "channels", "ensemble", "volume", "scan", "output")

DEFAULTS = {
    "atom": {"element": "Ne", "photon_energy_eV": 93.0, "ionization_potentials_file": None},
    "pulse": {"kind": "deterministic", "fwhm_fs": 30.0, "coherence_time_fs": None,
              "window_fs": None, "samples_per_fwhm": 256, "oversample": 32,
              "allow_long_coherence": False},
    "channels": {"mode": "sequential_plus_direct", "sigma1_cm2": 1e-18, "sigma2_cm4s": 1e-51,
                 "kappa_cm2s": 1e-33, "overrides": {}},
    "ensemble": {"method": None, "n_realizations": 10_000, "master_seed": 0, "threads": None,
                 "rel_tol": 1e-6},
    "volume": {"kind": "gaussian_transverse_2d", "w0_cm": 5e-4, "zR_cm": 0.59, "fmin": 1e-4,
               "points_per_decade": 25},
    "scan": {"i_min": 1e13, "i_max": 1e18, "points_per_decade": 10, "intensities": None,
             "rel_tol": 1e-8, "abs_tol": 1e-30, "max_steps": 200_000, "method": "auto"},
    "output": {"dir": "ionkin_out", "histogram_intensities": [3e15],
               "histogram_normalization": "max_peak"},
}

PULSE_KINDS = ("deterministic", "chaotic")
STOCHASTIC_METHODS = ("ensemble", "decorrelated")
RUN_MODES = CHANNEL_MODES + ("both",)


def _merge(base, update, path=""):
    for key, value in update.items():
        where = f"{path}{key}"
        if key not in base:
            raise ConfigError(f"unknown configuration key {where!r}")
        if isinstance(base[key], dict) and key != "overrides":
            if not isinstance(value, dict):
                raise ConfigError(f"{where!r} must be a section")
            _merge(base[key], value, where + ".")
        else:
            base[key] = value


def parse_override(text):
    """``"section.key=value"`` with the value read as JSON when possible."""
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not of the form section.key=value")
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    update = value
    for part in reversed(key.strip().split(".")):
        update = {part: update}
    return update


@dataclass(frozen=True)
class RunConfig:
    """Validated configuration; ``raw`` keeps the merged document for the report."""

    raw: dict = field(repr=False)

    def section(self, name):
        return self.raw[name]

    @property
    def photon_energy(self):
        return float(self.raw["atom"]["photon_energy_eV"])

    @property
    def pulse_kind(self):
        return self.raw["pulse"]["kind"]

    @property
    def channel_modes(self):
        mode = self.raw["channels"]["mode"]
        return CHANNEL_MODES if mode == "both" else (mode,)

    @property
    def stochastic_method(self):
        return self.raw["ensemble"]["method"] if self.pulse_kind == "chaotic" else None

    def cross_sections(self):
        c = self.raw["channels"]
        return CrossSectionConfig.from_mapping({k: c[k] for k in
                                                ("sigma1_cm2", "sigma2_cm4s", "kappa_cm2s", "overrides")})

    def envelope(self, peak_flux):
        p = self.raw["pulse"]
        window = None if p["window_fs"] is None else float(p["window_fs"]) * FS
        return DeterministicPulseSpec(float(p["fwhm_fs"]) * FS, peak_flux, window,
                                      samples_per_fwhm=int(p["samples_per_fwhm"]))

    def chaotic(self, peak_flux):
        p = self.raw["pulse"]
        return ChaoticPulseSpec(self.envelope(peak_flux), float(p["coherence_time_fs"]) * FS,
                                seed=int(self.raw["ensemble"]["master_seed"]),
                                oversample=int(p["oversample"]),
                                allow_long_coherence=bool(p["allow_long_coherence"]))

    def kinetics(self, mode, stochastic=False):
        s = self.raw["scan"]
        rel = self.raw["ensemble"]["rel_tol"] if stochastic else s["rel_tol"]
        return KineticsOptions(rel_tol=float(rel), abs_tol=float(s["abs_tol"]), channel_mode=mode,
                               method=s["method"], max_steps=int(s["max_steps"]))

    def volume(self):
        v = self.raw["volume"]
        return VolumeModel(v["kind"], float(v["w0_cm"]), float(v["zR_cm"]), float(v["fmin"]))

    @property
    def n_realizations(self):
        return int(self.raw["ensemble"]["n_realizations"])

    @property
    def master_seed(self):
        return int(self.raw["ensemble"]["master_seed"])

    @property
    def threads(self):
        t = self.raw["ensemble"]["threads"]
        return None if t is None else int(t)

    def dumps(self):
        return json.dumps(self.raw, indent=2, sort_keys=True)


def _require(cond, message):
    if not cond:
        raise ConfigError(message)


def _positive(section, key, value):
    try:
        ok = float(value) > 0
    except (TypeError, ValueError):
        ok = False
    _require(ok, f"{section}.{key} must be a positive number, got {value!r}")


def validate(raw):
    """Check the merged document and return a :class:`RunConfig`."""
    atom, pulse, chan, ens = raw["atom"], raw["pulse"], raw["channels"], raw["ensemble"]
    vol, scan, out = raw["volume"], raw["scan"], raw["output"]

    _require(atom["element"] == "Ne", f"atom.element {atom['element']!r} is not supported; only Ne")
    _positive("atom", "photon_energy_eV", atom["photon_energy_eV"])

    _require(pulse["kind"] in PULSE_KINDS,
             f"pulse.kind must be one of {PULSE_KINDS}, got {pulse['kind']!r}")
    _positive("pulse", "fwhm_fs", pulse["fwhm_fs"])
    if pulse["kind"] == "chaotic":
        _require(pulse["coherence_time_fs"] is not None,
                 "pulse.kind 'chaotic' needs pulse.coherence_time_fs")
        _positive("pulse", "coherence_time_fs", pulse["coherence_time_fs"])
        if ens["method"] is None:
            ens["method"] = "ensemble"
        _require(ens["method"] in STOCHASTIC_METHODS,
                 f"ensemble.method must be one of {STOCHASTIC_METHODS}, got {ens['method']!r}")
    else:
        _require(ens["method"] is None,
                 f"ensemble.method {ens['method']!r} applies only to pulse.kind 'chaotic'")
        _require(pulse["coherence_time_fs"] is None,
                 "pulse.coherence_time_fs applies only to pulse.kind 'chaotic'")

    _require(chan["mode"] in RUN_MODES, f"channels.mode must be one of {RUN_MODES}, got {chan['mode']!r}")
    _require(isinstance(chan["overrides"], dict), "channels.overrides must be a mapping")

    _require(isinstance(ens["n_realizations"], int) and ens["n_realizations"] >= 1,
             "ensemble.n_realizations must be a positive integer")
    _require(isinstance(ens["master_seed"], int) and 0 <= ens["master_seed"] < 2**64,
             "ensemble.master_seed must be an integer in [0, 2**64)")
    _require(ens["threads"] is None or (isinstance(ens["threads"], int) and ens["threads"] >= 1),
             "ensemble.threads must be a positive integer or null")
    _positive("ensemble", "rel_tol", ens["rel_tol"])

    _require(vol["kind"] in VOLUME_KINDS, f"volume.kind must be one of {VOLUME_KINDS}, got {vol['kind']!r}")
    _require(isinstance(vol["points_per_decade"], int) and vol["points_per_decade"] >= 2,
             "volume.points_per_decade must be an integer >= 2")

    if scan["intensities"] is not None:
        inten = scan["intensities"]
        _require(isinstance(inten, list) and len(inten) >= 2,
                 "scan.intensities must be a list of at least 2 values")
        _require(all(float(x) > 0 for x in inten) and all(float(b) > float(a) for a, b in zip(inten, inten[1:])),
                 "scan.intensities must be positive and strictly increasing")
    else:
        _positive("scan", "i_min", scan["i_min"])
        _require(float(scan["i_max"]) > float(scan["i_min"]), "scan.i_max must exceed scan.i_min")
        _require(isinstance(scan["points_per_decade"], int) and scan["points_per_decade"] >= 1,
                 "scan.points_per_decade must be a positive integer")
    _require(scan["method"] in ("auto", "dopri5", "radau"), "scan.method must be auto, dopri5 or radau")

    _require(isinstance(out["histogram_intensities"], list), "output.histogram_intensities must be a list")
    if scan["intensities"] is not None:
        lo, hi = float(scan["intensities"][0]), float(scan["intensities"][-1])
    else:
        lo, hi = float(scan["i_min"]), float(scan["i_max"])
    # histograms are emitted only when both channel modes run
    for x in out["histogram_intensities"] if chan["mode"] == "both" else ():
        _require(isinstance(x, (int, float)) and lo <= x <= hi,
                 f"output.histogram_intensities entry {x!r} lies outside the scan range [{lo:g}, {hi:g}]")
    norm = out["histogram_normalization"]
    _require(norm == "max_peak" or _species_index(norm) is not None,
             f"output.histogram_normalization must be 'max_peak' or a species such as 'Ne2+', got {norm!r}")

    cfg = RunConfig(raw)
    # constructing the domain objects surfaces their own range checks here, not mid-run
    cfg.cross_sections()
    cfg.volume()
    cfg.kinetics(cfg.channel_modes[0])
    if cfg.pulse_kind == "chaotic":
        cfg.chaotic(1.0)
    else:
        cfg.envelope(1.0)
    return cfg


def _species_index(label):
    from .scenario import species_index
    try:
        return species_index(label)
    except ConfigError:
        return None


def load_config(path=None, overrides=()):
    """Read a JSON configuration, apply dotted overrides and validate.

    Parameters
    ----------
    path : str or Path, optional
        Configuration file; defaults are used when omitted.
    overrides : iterable of str or dict
        ``"section.key=value"`` strings or nested dicts, applied in order.
    """
    raw = copy.deepcopy(DEFAULTS)
    if path is not None:
        try:
            with open(path) as fh:
                doc = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read configuration {path}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path} is not valid JSON: {exc}") from None
        if not isinstance(doc, dict):
            raise ConfigError(f"{path}: top level must be an object with sections {SECTIONS}")
        _merge(raw, doc)
    for item in overrides:
        _merge(raw, parse_override(item) if isinstance(item, str) else item)
    return validate(raw)
