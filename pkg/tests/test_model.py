import math
from decimal import Decimal

import pytest
from hypothesis import given, strategies as st

from ionkin.errors import ConfigError, DomainError, StateError
from ionkin.model import (CrossSectionConfig, apply_factorial_enhancement, build_channel_table,
                          check_lopt_validity, load_ionization_potentials, log_value,
                          min_photon_order, ponderomotive_energy, scale_cross_section,
                          scale_log_cross_section)

NE_IP = [21.5646, 40.9633, 63.45, 97.12, 126.21, 157.93, 207.2759, 239.0989]


def test_bundled_ionization_potentials():
    ips = load_ionization_potentials()
    assert ips == pytest.approx(NE_IP)
    assert ips.sum() == pytest.approx(953.61, abs=0.01)


@pytest.mark.parametrize("text, err", [
    ("0 21.5\n1 40.9\n", "need 8"),
    ("0 21.5\n0 40.9\n", "duplicate"),
    ("0 21.5\n2 40.9\n", "without gaps"),
    ("0 abc\n", "line 1"),
])
def test_bad_ip_tables(tmp_path, text, err):
    p = tmp_path / "ip.txt"
    p.write_text(text)
    with pytest.raises(ConfigError, match=err):
        load_ionization_potentials(p)


def test_ip_table_must_increase(tmp_path):
    p = tmp_path / "ip.txt"
    p.write_text("\n".join(f"{j} {v}" for j, v in enumerate(NE_IP[::-1])))
    with pytest.raises(ConfigError, match="increase"):
        load_ionization_potentials(p)


def test_photon_orders_at_93ev(table):
    seq = [ch.order for ch in table.sequential]
    direct = sorted((ch.target, ch.order) for ch in table.direct)
    assert seq == [1, 1, 1, 2, 2, 2, 3, 3]
    assert [n for _, n in direct] == [1, 2, 3, 4, 5, 6, 8, 11]
    # the shared 0 -> 1 channel is stored once
    assert len(table) == 15
    ch = table.get(0, 1)
    assert ch.sequential and ch.direct


def test_channel_modes(table):
    assert len(table.active("sequential_only")) == 8
    assert len(table.active("sequential_plus_direct")) == 15
    with pytest.raises(ConfigError):
        table.active("direct_only")


def test_min_photon_order_exact_multiples():
    assert min_photon_order(186.0, 93.0) == 2
    assert min_photon_order(0.1 + 0.2, 0.1) == 3
    assert min_photon_order(93.0 * 3 + 1e-9, 93.0) == 4
    with pytest.raises(DomainError):
        min_photon_order(-1.0, 93.0)


def test_default_cross_sections(table):
    assert table.get(0, 1).sigma == pytest.approx(1e-18)
    assert table.get(0, 2).sigma == pytest.approx(1e-51)
    assert table.get(0, 3).sigma == pytest.approx(1e-84)
    # sigma(11) = 1e-348 is below the double range; the log is exact
    assert table.get(0, 8).ln_sigma == pytest.approx(math.log(1e-51) + 9 * math.log(1e-33))
    assert table.get(0, 8).sigma == 0.0


@given(st.floats(1e-60, 1e-40), st.integers(1, 5), st.integers(0, 8), st.floats(1e-40, 1e-25))
def test_scaling_log_and_linear_agree(sigma, n_ref, extra, kappa):
    n = n_ref + extra
    lin = scale_cross_section(sigma, n_ref, n, kappa)
    ln = scale_log_cross_section(math.log(sigma), n_ref, n, kappa)
    if lin > 1e-300:
        assert math.log(lin) == pytest.approx(ln, rel=1e-12)
    assert ln == pytest.approx(math.log(sigma) + extra * math.log(kappa), rel=1e-12)


def test_scaling_refuses_lower_order():
    with pytest.raises(DomainError):
        scale_cross_section(1e-51, 3, 2, 1e-33)
    with pytest.raises(DomainError):
        scale_cross_section(1e-51, 2, 3, 0.0)


def test_log_value_handles_tiny_strings():
    assert log_value("1e-348") == pytest.approx(-348 * math.log(10))
    assert log_value(Decimal("2e-400")) == pytest.approx(math.log(2) - 400 * math.log(10))
    assert log_value(0) == -math.inf
    with pytest.raises(ConfigError):
        log_value(-1.0)
    with pytest.raises(ConfigError):
        log_value("abc")


def test_overrides_from_mapping():
    cfg = CrossSectionConfig.from_mapping({"sigma1_cm2": 2e-18, "overrides": {"0-8": "1e-340"},
                                           "3-4": 1e-50})
    tab = build_channel_table(93.0, sigma_source=cfg)
    assert tab.get(0, 1).sigma == pytest.approx(2e-18)
    assert tab.get(0, 8).ln_sigma == pytest.approx(-340 * math.log(10))
    assert tab.get(3, 4).sigma == pytest.approx(1e-50)
    with pytest.raises(ConfigError, match="from-to"):
        CrossSectionConfig.from_mapping({"overrides": {"zero-one": 1.0}})
    with pytest.raises(ConfigError, match="nonexistent"):
        build_channel_table(93.0, sigma_source=CrossSectionConfig.from_mapping({"1-3": 1e-50}))


def test_channel_closed_below_threshold():
    # above every ionization potential each sequential step takes one photon
    tab = build_channel_table(300.0)
    assert [ch.order for ch in tab.sequential] == [1] * 8
    assert all(ch.order >= ch.electrons for ch in tab.direct)


def test_factorial_enhancement(table):
    enh = apply_factorial_enhancement(table)
    for a, b in zip(table, enh):
        assert b.ln_sigma - a.ln_sigma == pytest.approx(math.lgamma(a.order + 1))
    assert enh.enhancement_applied and not table.enhancement_applied
    with pytest.raises(StateError):
        apply_factorial_enhancement(enh)


def test_isolated_and_with_sigmas(table):
    iso = table.isolated(0, 2)
    assert [ch.key for ch in iso if ch.sigma > 0] == [(0, 2)]
    with pytest.raises(KeyError):
        table.with_sigmas({(1, 5): 1.0})


def test_ponderomotive_energy_and_validity():
    assert ponderomotive_energy(93.0, 1e18) == pytest.approx(16.6, rel=0.01)
    # U_p scales linearly with intensity
    assert ponderomotive_energy(93.0, 1e16) == pytest.approx(0.166, rel=0.01)
    rep = check_lopt_validity(93.0, 1e18, 30e-15)
    assert rep.ok and rep.up_ratio < 0.5 and rep.field_cycles > 10
    assert check_lopt_validity(93.0, 1e18, 1e-16).cycles_ok is False
    assert "U_p" in str(rep)


def test_pulse_cycle_count():
    rep = check_lopt_validity(93.0, 1e15, 1e-15)
    assert rep.field_cycles == pytest.approx(22.5, rel=0.01)
