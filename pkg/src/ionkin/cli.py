"""Command-line entry point: ``ionkin {scan,single,pulse-diag,volume-check,compare}``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure, 4 input-data error.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import load_config
from .constants import FS, N_SPECIES
from .ensemble import EnsembleSpec
from .errors import ConfigError, DomainError, InputDataError, IonkinError
from .kinetics import integrate, write_trajectory_csv
from .model import apply_factorial_enhancement, check_lopt_validity
from .pulse import (GAUSS_FWHM_AREA, coherence_width, correlation_diagnostic, gaussian_envelope,
                    intensity_to_flux, write_pulse_csv)
from .scenario import (channel_table, compare_experiment, emit_histogram,
                       read_experiment_csv, read_histogram_csv, run_scan, scan_specs, species_label,
                       write_histogram_csv)
from .volume import VolumeModel, radial_oracle_2d, spatial_oracle_3d, volume_average
from .yieldcurve import YieldCurve, write_yields_csv

log = logging.getLogger("ionkin")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_INPUT = 0, 2, 3, 4
VOLUME_CHECK_TOL = 1e-4


def _common(p):
    p.add_argument("-c", "--config", help="JSON configuration file")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override a configuration key, e.g. ensemble.n_realizations=500")
    p.add_argument("--seed", type=int, help="master seed (overrides ensemble.master_seed)")
    p.add_argument("--threads", type=int, help="worker threads (overrides ensemble.threads)")
    p.add_argument("--realizations", type=int, help="overrides ensemble.n_realizations")
    p.add_argument("--mode", help="overrides channels.mode (sequential_only, sequential_plus_direct, both)")
    p.add_argument("-o", "--out", help="output directory (overrides output.dir)")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser():
    parser = argparse.ArgumentParser(prog="ionkin", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("scan", help="yields against peak intensity")
    _common(p)

    p = sub.add_parser("single", help="one intensity with the full population trajectory")
    _common(p)
    p.add_argument("--intensity", type=float, required=True, help="peak intensity in W/cm^2")
    p.add_argument("--realization", type=int, default=0, help="chaotic realization index")

    p = sub.add_parser("pulse-diag", help="chaotic pulse statistics")
    _common(p)
    p.add_argument("--records", type=int, help="number of realizations (default: ensemble size)")
    p.add_argument("--max-order", type=int, default=3)
    p.add_argument("--intensity", type=float, default=1e15)

    p = sub.add_parser("volume-check", help="volume quadrature against brute-force spatial integration")
    _common(p)

    p = sub.add_parser("compare", help="model histogram against measured relative heights")
    _common(p)
    p.add_argument("--histogram", required=True, help="histogram.csv from a scan")
    p.add_argument("--experiment", required=True, help="CSV with columns species,relative_height")
    p.add_argument("--column", default="seq_plus_direct")
    p.add_argument("--normalization", default="max_peak", help="max_peak or a species label")
    return parser


def config_from_args(args):
    overrides = list(args.overrides)
    if args.seed is not None:
        overrides.append({"ensemble": {"master_seed": args.seed}})
    if args.threads is not None:
        overrides.append({"ensemble": {"threads": args.threads}})
    if args.realizations is not None:
        overrides.append({"ensemble": {"n_realizations": args.realizations}})
    if args.mode is not None:
        overrides.append({"channels": {"mode": args.mode}})
    if args.out is not None:
        overrides.append({"output": {"dir": args.out}})
    return load_config(args.config, overrides)


def _outdir(cfg):
    out = Path(cfg.section("output")["dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _header(cfg, title):
    return [f"ionkin {__version__}: {title}", "", "configuration:", cfg.dumps(), ""]


def _table_lines(table):
    lines = ["channels (source -> target, photons, sigma):"]
    for ch in table.channels:
        kind = "+".join(k for k, f in (("seq", ch.sequential), ("dir", ch.direct)) if f)
        lines.append(f"  {species_label(ch.source):>5} -> {species_label(ch.target):<5} n = {ch.order:2d}  "
                     f"ln sigma = {ch.ln_sigma:12.6f}  [{kind}]")
    return lines


def cmd_scan(cfg):
    out = _outdir(cfg)
    table = channel_table(cfg)
    specs = scan_specs(cfg)
    lines = _header(cfg, "intensity scan") + _table_lines(table) + [""]
    fwhm = float(cfg.section("pulse")["fwhm_fs"]) * FS
    lines.append("validity at the highest intensity: "
                 + str(check_lopt_validity(cfg.photon_energy, specs[0].intensities[-1], fwhm)))
    results = {}
    for spec in specs:
        log.info("scanning %s over %d intensities", spec.channel_mode, spec.intensities.size)
        res = run_scan(spec, cfg, table)
        results[spec.channel_mode] = res
        where = out / spec.channel_mode if len(specs) > 1 else out
        where.mkdir(exist_ok=True)
        write_yields_csv(res.curve, where / "yields.csv")
        if spec.volume.kind != "none":
            write_yields_csv(res.point_curve, where / "yields_point.csv")
        lines += ["", f"[{spec.channel_mode}]",
                  f"  pulse: {spec.pulse_kind}" + (f" ({spec.stochastic_method})" if spec.stochastic_method else ""),
                  f"  volume: {spec.volume.kind}",
                  f"  evaluation points: {len(res.point_curve)}; integrators used: "
                  + ", ".join(f"{k} x{v}" for k, v in sorted(res.methods.items())),
                  f"  max population drift {res.max_drift:.3e}, min population {res.min_population:.3e}",
                  f"  failed realizations: {res.n_failed}",
                  f"  max |sum - 1| of reported yields: {res.curve.max_sum_error():.3e}"]
        if res.quadrature_error is not None:
            lines.append(f"  largest volume quadrature error estimate: {res.quadrature_error.max():.3e}")
    if len(specs) > 1:
        hists = cfg.section("output")["histogram_intensities"]
        norm = cfg.section("output")["histogram_normalization"]
        curves = {m: r.curve for m, r in results.items()}
        for k, at in enumerate(hists):
            hist = emit_histogram(curves, float(at), norm)
            name = "histogram.csv" if len(hists) == 1 else f"histogram_{k + 1}.csv"
            write_histogram_csv(hist, out / name)
            lines += ["", f"histogram at {at:.4g} W/cm^2 ({norm}) -> {name}",
                      f"  {'species':>8} {'seq_only':>12} {'seq_plus_direct':>16}"]
            for label, vals in hist.rows():
                lines.append(f"  {label:>8} {vals['seq_only']:12.5g} {vals['seq_plus_direct']:16.5g}")
    else:
        lines += ["", "histograms need channels.mode = both; none written"]
    (out / "report.txt").write_text("\n".join(lines) + "\n")
    return EXIT_OK


def cmd_single(cfg, intensity, realization):
    out = _outdir(cfg)
    table = channel_table(cfg)
    flux = intensity_to_flux(intensity, cfg.photon_energy)
    lines = _header(cfg, f"single run at {intensity:.6g} W/cm^2")
    method = cfg.stochastic_method
    if cfg.pulse_kind == "chaotic" and method == "ensemble":
        spec = EnsembleSpec(cfg.chaotic(flux), table, n_realizations=max(realization + 1, 1),
                            master_seed=cfg.master_seed)
        record, use_table = spec.record(realization), table
        lines.append(f"chaotic realization {realization}")
    else:
        record = gaussian_envelope(cfg.envelope(flux))
        use_table = apply_factorial_enhancement(table) if method == "decorrelated" else table
    write_pulse_csv(record, out / "pulse.csv")
    for mode in cfg.channel_modes:
        res = integrate(record, use_table, cfg.kinetics(mode, stochastic=False), trajectory=True)
        name = "trajectory.csv" if len(cfg.channel_modes) == 1 else f"trajectory_{mode}.csv"
        write_trajectory_csv(res, out / name)
        lines += ["", f"[{mode}] {res.method}: {res.n_accepted} accepted, {res.n_rejected} rejected steps; "
                      f"drift {res.max_drift:.3e}; min population {res.min_population:.3e}"]
        lines += [f"  {species_label(j):>5} {res.populations[j]:.10e}" for j in range(N_SPECIES)]
    (out / "report.txt").write_text("\n".join(lines) + "\n")
    return EXIT_OK


def cmd_pulse_diag(cfg, records, max_order, intensity):
    if cfg.pulse_kind != "chaotic":
        raise ConfigError("pulse-diag needs pulse.kind 'chaotic'")
    out = _outdir(cfg)
    n = records or cfg.n_realizations
    base = cfg.chaotic(intensity_to_flux(intensity, cfg.photon_energy))
    spec = EnsembleSpec(base, None, n_realizations=n, master_seed=cfg.master_seed)
    recs = [spec.record(i) for i in range(n)]
    write_pulse_csv(recs[0], out / "pulse_0.csv")
    rows = []
    for order in range(2, max_order + 1):
        est, err = correlation_diagnostic(recs, order)
        rows.append((f"g{order}", est, err, float(math.factorial(order))))
    tau = coherence_width(recs) / FS
    rows.append(("coherence_time_fs", tau, math.nan, float(cfg.section("pulse")["coherence_time_fs"])))
    env = cfg.envelope(intensity_to_flux(intensity, cfg.photon_energy))
    fluence = np.mean([r.flux.sum() * r.dt for r in recs])
    rows.append(("fluence_ratio", fluence / env.fluence, math.nan, 1.0))
    with open(out / "pulse_diag.csv", "w") as fh:
        fh.write("quantity,estimate,stderr,expected\n")
        for q, e, s, x in rows:
            fh.write(f"{q},{e:.17g},{s:.17g},{x:.17g}\n")
    lines = _header(cfg, f"pulse diagnostics over {n} realizations")
    lines += [f"  {q:>18} {e:12.6g} +- {s:<10.3g} expected {x:g}" for q, e, s, x in rows]
    (out / "report.txt").write_text("\n".join(lines) + "\n")
    return EXIT_OK


def _one_photon_yield(sigma, fwhm, photon_energy):
    def fn(intensity):
        x = sigma * intensity_to_flux(intensity, photon_energy) * fwhm * GAUSS_FWHM_AREA
        return np.array([math.exp(-x), -math.expm1(-x)])
    return fn


def cmd_volume_check(cfg):
    """Compare the log-grid volume average with brute-force spatial quadrature.

    The test yield is the closed-form one-photon depletion of the neutral by
    the configured Gaussian envelope.
    """
    out = _outdir(cfg)
    vol = cfg.volume()
    kinds = [vol.kind] if vol.kind != "none" else ["gaussian_transverse_2d", "gaussian_beam_3d"]
    fwhm = float(cfg.section("pulse")["fwhm_fs"]) * FS
    fn = _one_photon_yield(float(cfg.section("channels")["sigma1_cm2"]), fwhm, cfg.photon_energy)
    peaks = scan_specs(cfg)[0].intensities
    per_decade = int(cfg.section("volume")["points_per_decade"])
    rows, worst = [], 0.0
    for kind in kinds:
        model = VolumeModel(kind, vol.w0_cm, vol.zR_cm, vol.fmin)
        curve = YieldCurve.from_function(fn, vol.fmin * peaks[0], peaks[-1], per_decade)
        oracle = radial_oracle_2d if kind == "gaussian_transverse_2d" else spatial_oracle_3d
        for p in peaks:
            avg = volume_average(curve, model, p)
            ref = oracle(fn, model, p)
            rel = abs(avg.yields[1] / ref[1] - 1.0)
            worst = max(worst, rel)
            rows.append((p, kind, avg.yields[1], ref[1], rel, avg.abs_error[1] / avg.yields[1]))
    with open(out / "volume_check.csv", "w") as fh:
        fh.write("intensity_W_cm2,kind,average_N1,oracle_N1,rel_diff,rel_error_estimate\n")
        for r in rows:
            fh.write(f"{r[0]:.17g},{r[1]},{r[2]:.17g},{r[3]:.17g},{r[4]:.3e},{r[5]:.3e}\n")
    verdict = "PASS" if worst < VOLUME_CHECK_TOL else "FAIL"
    lines = _header(cfg, "volume quadrature check") + [
        f"largest relative difference {worst:.3e} (tolerance {VOLUME_CHECK_TOL:g}): {verdict}"]
    (out / "report.txt").write_text("\n".join(lines) + "\n")
    print(lines[-1])
    return EXIT_OK if verdict == "PASS" else EXIT_NUMERIC


def cmd_compare(cfg, histogram, experiment, column, normalization):
    out = _outdir(cfg)
    hist = read_histogram_csv(histogram)
    if any(column not in v for v in hist.values()):
        raise InputDataError(f"{histogram} has no column {column!r} "
                             f"(available: {sorted(next(iter(hist.values())))})")
    model = {j: v[column] for j, v in hist.items()}
    comp = compare_experiment(model, read_experiment_csv(experiment, normalization))
    text = comp.report()
    (out / "comparison.txt").write_text(f"model column: {column}; normalization: {normalization}\n"
                                        + text + "\n")
    print(text)
    return EXIT_OK


def run(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    cfg = config_from_args(args)
    if args.command == "scan":
        return cmd_scan(cfg)
    if args.command == "single":
        if not args.intensity > 0:
            raise ConfigError("--intensity must be positive")
        if args.realization < 0:
            raise ConfigError("--realization must be nonnegative")
        return cmd_single(cfg, args.intensity, args.realization)
    if args.command == "pulse-diag":
        return cmd_pulse_diag(cfg, args.records, args.max_order, args.intensity)
    if args.command == "volume-check":
        return cmd_volume_check(cfg)
    return cmd_compare(cfg, args.histogram, args.experiment, args.column, args.normalization)


def main(argv=None):
    try:
        return run(argv)
    except (ConfigError, DomainError) as exc:
        print(f"ionkin: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InputDataError as exc:
        print(f"ionkin: input data error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except IonkinError as exc:
        print(f"ionkin: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
