import itertools
import json

import pytest

from ionkin.config import DEFAULTS, load_config, parse_override
from ionkin.errors import ConfigError


def test_defaults_validate():
    cfg = load_config()
    assert cfg.pulse_kind == "deterministic"
    assert cfg.stochastic_method is None
    assert cfg.channel_modes == ("sequential_plus_direct",)
    assert cfg.volume().kind == "gaussian_transverse_2d"
    assert json.loads(cfg.dumps())["atom"]["photon_energy_eV"] == 93.0
    assert DEFAULTS["ensemble"]["method"] is None


def test_parse_override():
    assert parse_override("ensemble.n_realizations=200") == {"ensemble": {"n_realizations": 200}}
    assert parse_override("pulse.kind=chaotic") == {"pulse": {"kind": "chaotic"}}
    assert parse_override("output.histogram_intensities=[1e15, 3e15]") == {
        "output": {"histogram_intensities": [1e15, 3e15]}}
    with pytest.raises(ConfigError):
        parse_override("no_equals_sign")


def test_file_and_override_order(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"pulse": {"fwhm_fs": 5.0}, "ensemble": {"master_seed": 7}}))
    cfg = load_config(path, ["ensemble.master_seed=9"])
    assert cfg.section("pulse")["fwhm_fs"] == 5.0 and cfg.master_seed == 9


@pytest.mark.parametrize("doc, needle", [
    ({"pulse": {"colour": 1}}, "pulse.colour"),
    ({"pulse": 3}, "section"),
    ({"atom": {"element": "Ar"}}, "Ne"),
])
def test_bad_documents(tmp_path, doc, needle):
    path = tmp_path / "c.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(ConfigError, match=needle):
        load_config(path)


def test_unreadable_files(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")
    (tmp_path / "bad.json").write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "bad.json")
    (tmp_path / "list.json").write_text("[]")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "list.json")


KINDS = ["deterministic", "chaotic"]
METHODS = [None, "ensemble", "decorrelated", "exact"]
TAUS = [None, 6.0]
MODES = ["sequential_only", "sequential_plus_direct", "both", "direct_only"]
VOLUMES = ["none", "gaussian_transverse_2d", "gaussian_beam_3d", "sphere"]


def expected_ok(kind, method, tau, mode, vol):
    if mode == "direct_only" or vol == "sphere":
        return False
    if kind == "deterministic":
        return method is None and tau is None
    return tau is not None and method in (None, "ensemble", "decorrelated")


@pytest.mark.parametrize("kind, method, tau, mode, vol",
                         list(itertools.product(KINDS, METHODS, TAUS, MODES, VOLUMES)))
def test_mode_matrix(kind, method, tau, mode, vol):
    update = {"pulse": {"kind": kind, "coherence_time_fs": tau}, "ensemble": {"method": method},
              "channels": {"mode": mode}, "volume": {"kind": vol}}
    if expected_ok(kind, method, tau, mode, vol):
        cfg = load_config(overrides=[update])
        assert cfg.stochastic_method == (None if kind == "deterministic" else method or "ensemble")
        assert len(cfg.channel_modes) == (2 if mode == "both" else 1)
    else:
        with pytest.raises(ConfigError):
            load_config(overrides=[update])


@pytest.mark.parametrize("key, value", [
    ("pulse.fwhm_fs", 0), ("pulse.coherence_time_fs", -1), ("ensemble.n_realizations", 0),
    ("ensemble.n_realizations", 2.5), ("ensemble.master_seed", -3), ("ensemble.threads", 0),
    ("volume.fmin", 1.5), ("volume.points_per_decade", 1), ("scan.i_max", 1e12),
    ("scan.intensities", [1e15]), ("scan.intensities", [2e15, 1e15]), ("scan.method", "euler"),
    ("channels.sigma1_cm2", -1.0), ("output.histogram_normalization", "Xe+"),
    ("atom.photon_energy_eV", 0),
])
def test_rejected_values(key, value):
    extra = ["pulse.kind=chaotic"] if key == "pulse.coherence_time_fs" else []
    with pytest.raises(ConfigError):
        load_config(overrides=extra + [f"{key}={json.dumps(value)}"])


def test_histogram_range_checked_only_for_both_modes():
    load_config(overrides=["output.histogram_intensities=[1e19]"])
    with pytest.raises(ConfigError, match="outside the scan range"):
        load_config(overrides=["channels.mode=both", "output.histogram_intensities=[1e19]"])
    load_config(overrides=["channels.mode=both", "output.histogram_intensities=[1e13, 1e18]"])


def test_long_coherence_needs_opt_in():
    base = ["pulse.kind=chaotic", "pulse.coherence_time_fs=40"]
    with pytest.raises(ConfigError):
        load_config(overrides=base)
    load_config(overrides=base + ["pulse.allow_long_coherence=true"])
