"""Intensity scans, charge-state histograms and comparison with measured yields."""

from __future__ import annotations

import csv
import math
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .constants import N_SPECIES
from .ensemble import EnsembleSpec, run_decorrelated, run_ensemble, worker_count
from .errors import ConfigError, DomainError, InputDataError, IntegrityError, IonkinError
from .kinetics import integrate
from .model import build_channel_table, load_ionization_potentials
from .pulse import gaussian_envelope, intensity_to_flux
from .volume import VolumeModel, volume_averaged_curve
from .yieldcurve import YieldCurve, log_grid

POINT_SUM_TOL = 1e-6
VOLUME_SUM_TOL = 1e-4
MODE_COLUMNS = {"sequential_only": "seq_only", "sequential_plus_direct": "seq_plus_direct"}


def species_label(j):
    if j == 0:
        return "Ne"
    return "Ne+" if j == 1 else f"Ne{j}+"


_LABELS = [re.compile(p) for p in (r"^(\d+)$", r"^Ne(\d+)\+$", r"^Ne\+(\d+)$",
                                     r"^Ne\^\{?\+?(\d+)\+?\}?$", r"^Ne(\+?)$")]


def species_index(label):
    """Charge state from labels such as ``Ne``, ``Ne+``, ``Ne3+``, ``Ne+3``, ``Ne^{+3}`` or ``3``."""
    text = str(label).strip().replace(" ", "")
    for pat in _LABELS:
        m = pat.match(text)
        if m:
            g = m.group(1)
            j = int(g) if g.isdigit() else (1 if g == "+" else 0)
            if not 0 <= j < N_SPECIES:
                raise ConfigError(f"species {label!r} outside Ne..Ne8+")
            return j
    raise ConfigError(f"unrecognized species label {label!r}")


@dataclass(frozen=True)
class ScanSpec:
    """One scan: where to evaluate and in which mode."""

    intensities: np.ndarray
    pulse_kind: str
    channel_mode: str
    stochastic_method: str | None
    volume: VolumeModel

    def __post_init__(self):
        inten = np.asarray(self.intensities, dtype=float)
        if inten.size < 2 or not np.all(np.diff(inten) > 0) or not np.all(inten > 0):
            raise ConfigError("scan intensities must be positive, strictly increasing, at least 2")
        object.__setattr__(self, "intensities", inten)

    def evaluation_grid(self, per_decade):
        """Intensities at which single-point yields are computed.

        Without volume averaging this is the scan itself; otherwise a log grid
        reaching down to ``fmin`` times the lowest peak intensity.
        """
        if self.volume.kind == "none":
            return self.intensities
        return log_grid(self.volume.fmin * self.intensities[0], self.intensities[-1], per_decade)


@dataclass
class ScanResult:
    spec: ScanSpec
    curve: YieldCurve
    point_curve: YieldCurve
    quadrature_error: np.ndarray | None = None
    max_drift: float = 0.0
    min_population: float = 0.0
    n_failed: int = 0
    methods: dict = field(default_factory=dict)


def scan_specs(cfg):
    """One :class:`ScanSpec` per channel mode requested by the configuration."""
    s = cfg.section("scan")
    if s["intensities"] is not None:
        inten = np.array([float(x) for x in s["intensities"]])
    else:
        inten = log_grid(float(s["i_min"]), float(s["i_max"]), int(s["points_per_decade"]))
    return [ScanSpec(inten, cfg.pulse_kind, mode, cfg.stochastic_method, cfg.volume())
            for mode in cfg.channel_modes]


def channel_table(cfg):
    path = cfg.section("atom")["ionization_potentials_file"]
    ips = None if path is None else load_ionization_potentials(path)
    return build_channel_table(cfg.photon_energy, ips, cfg.cross_sections())


def _with_context(exc, index, intensity):
    exc.args = (f"intensity #{index} ({intensity:.4g} W/cm^2): {exc.args[0] if exc.args else exc}",) \
        + tuple(exc.args[1:])
    return exc


def point_yields(cfg, table, mode, intensity, index):
    """Final populations at one peak intensity.

    Returns ``(mean, stderr or None, drift, min_population, n_failed, method)``.
    """
    flux = intensity_to_flux(intensity, cfg.photon_energy)
    if cfg.pulse_kind == "deterministic":
        res = integrate(gaussian_envelope(cfg.envelope(flux)), table, cfg.kinetics(mode))
        return res.populations, None, res.max_drift, res.min_population, 0, res.method
    if cfg.stochastic_method == "decorrelated":
        res = run_decorrelated(cfg.envelope(flux), table, cfg.kinetics(mode))
        return res.populations, None, res.max_drift, res.min_population, 0, res.method
    spec = EnsembleSpec(cfg.chaotic(flux), table, cfg.kinetics(mode, stochastic=True),
                        n_realizations=cfg.n_realizations, master_seed=cfg.master_seed,
                        stream_prefix=(index,))
    st = run_ensemble(spec, workers=cfg.threads)
    return st.mean, st.stderr, st.max_drift, st.min_population, st.n_failed, "ensemble"


def run_scan(spec, cfg, table=None):
    """Evaluate a scan; volume averaging is applied when ``spec.volume`` asks for it.

    Ensemble seeds are keyed by the master seed and the index of the
    intensity on the evaluation grid, so results do not depend on the number
    of worker threads.

    Raises
    ------
    IonkinError
        Any module error, its message prefixed with the intensity index.
    """
    table = channel_table(cfg) if table is None else table
    grid = spec.evaluation_grid(int(cfg.section("volume")["points_per_decade"]))

    def one(k):
        try:
            return point_yields(cfg, table, spec.channel_mode, float(grid[k]), k)
        except IonkinError as exc:
            raise _with_context(exc, k, float(grid[k])) from None

    if cfg.pulse_kind == "chaotic" and cfg.stochastic_method == "ensemble":
        # realizations are already spread over the pool
        rows = [one(k) for k in range(grid.size)]
    else:
        with ThreadPoolExecutor(min(worker_count(cfg.threads), grid.size)) as pool:
            rows = list(pool.map(one, range(grid.size)))

    mean = np.array([r[0] for r in rows])
    stderr = None if rows[0][1] is None else np.array([r[1] for r in rows])
    point = YieldCurve(grid, mean, stderr)
    if point.max_sum_error() > POINT_SUM_TOL:
        raise IntegrityError(f"single-point yields sum to 1 only within {point.max_sum_error():.3g}")
    methods = {}
    for r in rows:
        methods[r[5]] = methods.get(r[5], 0) + 1
    result = ScanResult(spec, point, point, None, max(r[2] for r in rows), min(r[3] for r in rows),
                        sum(r[4] for r in rows), methods)
    if spec.volume.kind != "none":
        curve, qerr = volume_averaged_curve(point, spec.volume, spec.intensities)
        if curve.max_sum_error() > VOLUME_SUM_TOL:
            raise IntegrityError(f"volume-averaged yields sum to 1 only within {curve.max_sum_error():.3g}")
        result.curve, result.quadrature_error = curve, qerr
    return result


@dataclass
class Histogram:
    """Relative heights per species, one column per channel mode."""

    intensity: float
    species: tuple
    columns: dict
    normalization: str

    def rows(self):
        for i, j in enumerate(self.species):
            yield species_label(j), {name: col[i] for name, col in self.columns.items()}


def emit_histogram(curves, at_intensity, normalization="max_peak", species=range(1, N_SPECIES)):
    """Charge-state histogram interpolated from scan curves.

    Parameters
    ----------
    curves : dict
        Channel mode -> :class:`YieldCurve`.
    at_intensity : float
        Must lie inside every curve's intensity range.
    normalization : str
        ``"max_peak"`` scales every column by one common factor so that the
        largest entry of the table is 1; a species label (``"Ne2+"``) scales
        each column so that this species reads 1.

    Raises
    ------
    DomainError
        The intensity lies outside a curve (no extrapolation).
    """
    species = tuple(species)
    raw = {}
    for mode, curve in curves.items():
        lo, hi = curve.intensities[0], curve.intensities[-1]
        if not lo * (1 - 1e-12) <= at_intensity <= hi * (1 + 1e-12):
            raise DomainError(f"histogram intensity {at_intensity:.4g} W/cm^2 outside the scan "
                              f"range [{lo:.4g}, {hi:.4g}]")
        raw[MODE_COLUMNS.get(mode, mode)] = np.asarray(curve(min(max(at_intensity, lo), hi)))[list(species)]
    if normalization == "max_peak":
        scale = max(float(col.max()) for col in raw.values())
        if not scale > 0:
            raise DomainError("all histogram entries vanish")
        cols = {k: v / scale for k, v in raw.items()}
    else:
        ref = species_index(normalization)
        if ref not in species:
            raise ConfigError(f"normalization species {normalization!r} not in the histogram")
        i = species.index(ref)
        if any(not v[i] > 0 for v in raw.values()):
            raise DomainError(f"normalization species {normalization!r} has zero yield")
        cols = {k: v / v[i] for k, v in raw.items()}
    return Histogram(float(at_intensity), species, cols, str(normalization))


def write_histogram_csv(hist, path):
    names = list(hist.columns)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["species"] + names)
        for label, vals in hist.rows():
            w.writerow([label] + [f"{vals[n]:.17g}" for n in names])


def read_histogram_csv(path):
    """Species -> {column: height} from a histogram file."""
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise InputDataError(f"cannot read histogram {path}: {exc}") from None
    if not rows or "species" not in rows[0]:
        raise InputDataError(f"{path}: expected a 'species' column")
    try:
        return {species_index(r["species"]): {k: float(v) for k, v in r.items() if k != "species"}
                for r in rows}
    except (ConfigError, ValueError) as exc:
        raise InputDataError(f"{path}: {exc}") from None


@dataclass(frozen=True)
class ExperimentHistogram:
    """Measured relative heights; renormalized on construction so the reference reads 1."""

    heights: dict
    normalization: str = "max_peak"

    def __post_init__(self):
        h = {int(k): float(v) for k, v in self.heights.items()}
        if not h:
            raise InputDataError("experiment histogram is empty")
        if any(not (v >= 0 and math.isfinite(v)) for v in h.values()):
            raise InputDataError("experiment heights must be finite and nonnegative")
        ref = max(h.values()) if self.normalization == "max_peak" else h.get(species_index(self.normalization))
        if ref is None or not ref > 0:
            raise InputDataError(f"cannot normalize experiment data to {self.normalization!r}")
        object.__setattr__(self, "heights", {k: v / ref for k, v in sorted(h.items())})


def read_experiment_csv(path, normalization="max_peak"):
    """``species,relative_height`` file (user-digitized measurement)."""
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise InputDataError(f"cannot read experiment file {path}: {exc}") from None
    if not rows or not {"species", "relative_height"} <= set(rows[0]):
        raise InputDataError(f"{path}: expected columns species,relative_height")
    try:
        heights = {species_index(r["species"]): float(r["relative_height"]) for r in rows}
    except (ConfigError, ValueError) as exc:
        raise InputDataError(f"{path}: {exc}") from None
    return ExperimentHistogram(heights, normalization)


@dataclass
class Comparison:
    species: tuple
    model: np.ndarray
    experiment: np.ndarray
    ratios: np.ndarray
    metric: float

    def report(self):
        lines = [f"{'species':>8} {'model':>12} {'experiment':>12} {'ratio':>10}"]
        for j, m, e, r in zip(self.species, self.model, self.experiment, self.ratios):
            lines.append(f"{species_label(j):>8} {m:12.5g} {e:12.5g} {r:10.4g}")
        lines.append(f"rms log ratio: {self.metric:.6g}")
        return "\n".join(lines)


def compare_experiment(model_heights, experiment):
    """Per-species model/experiment ratios and the rms of their natural logs.

    Both sides are renormalized over the overlapping species by the
    experiment's rule.  Species where either height vanishes get an infinite
    or zero ratio and are left out of the metric.
    """
    overlap = tuple(sorted(set(model_heights) & set(experiment.heights)))
    if not overlap:
        raise InputDataError("model and experiment share no species")
    m = np.array([float(model_heights[j]) for j in overlap])
    e = np.array([experiment.heights[j] for j in overlap])
    if experiment.normalization == "max_peak":
        m_ref, e_ref = m.max(), e.max()
    else:
        ref = species_index(experiment.normalization)
        if ref not in overlap:
            raise InputDataError("normalization species missing from the model histogram")
        m_ref, e_ref = m[overlap.index(ref)], e[overlap.index(ref)]
    if not (m_ref > 0 and e_ref > 0):
        raise InputDataError("normalization reference vanishes")
    m, e = m / m_ref, e / e_ref
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = m / e
    ok = (m > 0) & (e > 0)
    metric = math.sqrt(float(np.mean(np.log(ratios[ok]) ** 2))) if np.any(ok) else math.nan
    return Comparison(overlap, m, e, ratios, metric)
