import json
import subprocess
import sys

import numpy as np

from ionkin.cli import main
from ionkin.yieldcurve import read_yields_csv

FAST = ["--set", "scan.intensities=[1e14, 1e15, 1e16]", "--set", "volume.kind=\"none\""]
CHAOTIC = ["--set", "pulse.kind=\"chaotic\"", "--set", "pulse.coherence_time_fs=6",
           "--realizations", "24"]


def run_cli(*args):
    return subprocess.run([sys.executable, "-m", "ionkin", *args], capture_output=True, text=True)


def test_scan_writes_outputs(tmp_path):
    assert main(["scan", *FAST, "-o", str(tmp_path)]) == 0
    curve = read_yields_csv(tmp_path / "yields.csv")
    assert curve.yields.shape == (3, 9) and curve.stderr is None
    report = (tmp_path / "report.txt").read_text()
    assert "sequential_plus_direct" in report and "histograms need" in report


def test_both_modes_write_histogram(tmp_path):
    assert main(["scan", *FAST, "--mode", "both", "--set", "output.histogram_intensities=[3e15]",
                 "-o", str(tmp_path)]) == 0
    for mode in ("sequential_only", "sequential_plus_direct"):
        assert (tmp_path / mode / "yields.csv").exists()
    lines = (tmp_path / "histogram.csv").read_text().splitlines()
    assert lines[0] == "species,seq_only,seq_plus_direct" and len(lines) == 9


def test_chaotic_scan_is_thread_independent(tmp_path):
    outs = []
    for threads in (1, 3):
        d = tmp_path / str(threads)
        assert main(["scan", *FAST, *CHAOTIC, "--threads", str(threads), "-o", str(d)]) == 0
        outs.append((d / "yields.csv").read_bytes())
    assert outs[0] == outs[1]
    assert read_yields_csv(tmp_path / "1" / "yields.csv").stderr is not None


def test_seed_changes_chaotic_output(tmp_path):
    for seed in (1, 2):
        main(["scan", *FAST, *CHAOTIC, "--seed", str(seed), "-o", str(tmp_path / str(seed))])
    assert (tmp_path / "1" / "yields.csv").read_bytes() != (tmp_path / "2" / "yields.csv").read_bytes()


def test_single_writes_trajectory(tmp_path):
    assert main(["single", "--intensity", "1e16", "-o", str(tmp_path)]) == 0
    data = np.loadtxt(tmp_path / "trajectory.csv", delimiter=",", skiprows=1)
    assert data.shape[1] == 10
    assert np.allclose(data[:, 1:].sum(axis=1), 1.0, atol=1e-9)
    assert (tmp_path / "pulse.csv").exists()


def test_single_chaotic_realization(tmp_path):
    assert main(["single", "--intensity", "1e15", *CHAOTIC, "--realization", "3",
                 "-o", str(tmp_path)]) == 0
    assert "realization 3" in (tmp_path / "report.txt").read_text()


def test_pulse_diag(tmp_path):
    assert main(["pulse-diag", *CHAOTIC, "--records", "400", "-o", str(tmp_path)]) == 0
    rows = (tmp_path / "pulse_diag.csv").read_text().splitlines()
    assert rows[0] == "quantity,estimate,stderr,expected"
    g2 = rows[1].split(",")
    assert g2[0] == "g2" and abs(float(g2[1]) - 2.0) < 0.3


def test_pulse_diag_needs_chaotic(tmp_path):
    assert main(["pulse-diag", "-o", str(tmp_path)]) == 2


def test_volume_check_passes(tmp_path):
    code = main(["volume-check", "--set", "scan.intensities=[1e14, 1e16]",
                 "--set", "volume.kind=\"gaussian_beam_3d\"", "-o", str(tmp_path)])
    assert code == 0
    assert "PASS" in (tmp_path / "report.txt").read_text()


def test_compare_self(tmp_path):
    hist = tmp_path / "h.csv"
    hist.write_text("species,seq_only,seq_plus_direct\n"
                    + "".join(f"Ne{j}+,{0.1 * j},{0.2 * j}\n" for j in range(1, 8)))
    exp = tmp_path / "e.csv"
    exp.write_text("species,relative_height\n" + "".join(f"Ne{j}+,{0.2 * j}\n" for j in range(1, 8)))
    assert main(["compare", "--histogram", str(hist), "--experiment", str(exp), "-o", str(tmp_path)]) == 0
    text = (tmp_path / "comparison.txt").read_text()
    assert "rms log ratio: 0" in text and text.count("Ne") == 7
    assert main(["compare", "--histogram", str(hist), "--experiment", str(exp), "--column", "x",
                 "-o", str(tmp_path)]) == 4


def test_exit_codes_via_subprocess(tmp_path):
    ok = run_cli("scan", *FAST, "-o", str(tmp_path / "a"))
    assert ok.returncode == 0, ok.stderr
    bad = run_cli("scan", "--set", "pulse.kind=\"chaotic\"", "-o", str(tmp_path / "b"))
    assert bad.returncode == 2 and "coherence_time_fs" in bad.stderr
    rng = run_cli("scan", "--mode", "both", "--set", "output.histogram_intensities=[1e20]",
                  "-o", str(tmp_path / "c"))
    assert rng.returncode == 2 and "outside the scan range" in rng.stderr
    missing = run_cli("compare", "--histogram", str(tmp_path / "none.csv"),
                      "--experiment", str(tmp_path / "none.csv"), "-o", str(tmp_path / "d"))
    assert missing.returncode == 4


def test_config_file(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"scan": {"intensities": [1e14, 1e15]}, "volume": {"kind": "none"},
                                "output": {"dir": str(tmp_path / "out")}}))
    assert main(["scan", "-c", str(path)]) == 0
    assert (tmp_path / "out" / "yields.csv").exists()
