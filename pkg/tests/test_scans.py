"""Tests for state specs, reports and parameter scans."""
import json
import math

import numpy as np
import pytest

from common.errors import SpecParseError, ValidationError
from common.utils import format_float, format_json_response
from operations.bell import mermin_bound
from operations.scans import (
    REGION_COLUMNS,
    SCAN_COLUMNS,
    ScanConfig,
    build_report,
    build_state,
    build_state_from_spec,
    format_report_text,
    load_state,
    region_map_rows,
    run_scan,
    scan_row,
    threshold_rows,
)
from operations.symmetric import state_random_mixed, state_to_dict


@pytest.mark.parametrize("spec", ["foo:4", "ghz:x", "oat:10", "ghz", "ghz:4:0.5", "css:4:1:2:3", "mix:4:abc"])
def test_bad_specs(spec):
    with pytest.raises(SpecParseError):
        build_state_from_spec(spec)


def test_bad_spec_names_the_token():
    with pytest.raises(SpecParseError) as excinfo:
        build_state_from_spec("ghz:eight")
    assert excinfo.value.token == "eight"
    assert "eight" in excinfo.value.message


def test_spec_families():
    assert build_state_from_spec("css:10:pi/2").n_parties == 10
    assert build_state_from_spec("dicke:6:3").is_pure
    assert not build_state_from_spec("maxmixed:4").is_pure
    assert build_state("css", 4, (1.0, 0.5)).n_parties == 4


def test_ghz_report():
    """ghz:8 has F = 64 and violates the Mermin bound."""
    report = build_report(build_state_from_spec("ghz:8"), "ghz:8")
    assert report["qfi"]["qfi"] == pytest.approx(64.0)
    assert report["mermin"]["violated"]
    assert report["mermin"]["value"] == pytest.approx(8.0)
    assert report["squeezing"]["xi2"] is None
    assert report["necessary_condition"] is None


def test_unmixed_report():
    """mix:6:0 has vanishing QFI."""
    report = build_report(build_state_from_spec("mix:6:0"), "mix:6:0")
    assert report["qfi"]["qfi"] == pytest.approx(0.0, abs=1e-12)
    assert not report["mermin"]["violated"]


def test_untwisted_report():
    """oat:50:0 is the coherent state: xi^2 = 1 and nothing is violated."""
    report = build_report(build_state_from_spec("oat:50:0"), "oat:50:0")
    assert report["squeezing"]["xi2"] == pytest.approx(1.0)
    for key in ("witness_1m", "witness_2m", "eq17", "eq3m", "mermin"):
        assert not report[key]["violated"]
    assert report["necessary_condition"]["qfi_lb"] == pytest.approx(50.0)


def test_report_text_and_json():
    report = build_report(build_state_from_spec("ghz:4"), "ghz:4", settings=3, resolution=16)
    text = format_report_text(report, format_float)
    assert "state: ghz:4" in text
    assert "qfi.qfi: 16" in text
    assert "squeezing.xi2: undefined" in text
    assert "eq3m.m: 3" in text
    assert json.loads(format_json_response(report))["n"] == 4


def test_report_needs_two_parties():
    with pytest.raises(ValidationError):
        build_report(build_state_from_spec("css:1:0.3"))


def test_load_state_from_json(tmp_path, rng):
    rho = state_random_mixed(3, rng)
    path = tmp_path / "state.json"
    path.write_text(json.dumps(state_to_dict(rho)))
    np.testing.assert_allclose(load_state(str(path)).density, rho.density)


def test_load_state_errors(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(SpecParseError):
        load_state(str(bad))
    with pytest.raises(OSError):
        load_state(str(tmp_path / "missing.json"))


@pytest.mark.parametrize("changes", [
    {"family": "dicke"},
    {"n_values": ()},
    {"n_values": (1, 4)},
    {"param_range": None},
    {"param_range": (0.0, 1.0, 0)},
    {"settings": 1},
    {"resolution": 1},
    {"output_format": "xml"},
])
def test_scan_config_validation(changes):
    fields = {"family": "mix", "n_values": (4,), "param_range": (0.0, 1.0, 5)}
    fields.update(changes)
    with pytest.raises(ValidationError) as excinfo:
        ScanConfig(**fields).validate()
    assert excinfo.value.details


def test_ghz_scan_needs_no_parameter():
    config = ScanConfig(family="ghz", n_values=(2, 3, 4))
    config.validate()
    assert config.parameter_values() == [None]
    rows = run_scan(config)
    assert [row["n"] for row in rows] == [2, 3, 4]
    assert [row["mermin_violated"] for row in rows] == [False, True, True]


def test_parameter_values_are_sorted():
    config = ScanConfig(family="oat", n_values=(4,), param_range=(0.3, 0.0, 4))
    assert config.parameter_values() == pytest.approx([0.0, 0.1, 0.2, 0.3])


def test_scan_row_columns():
    row = scan_row("css", 4, math.pi / 2, extra_params=(0.0,))
    assert set(row) == set(SCAN_COLUMNS)
    assert row["qfi_over_N"] == pytest.approx(1.0)
    assert row["N_over_xi2"] == pytest.approx(4.0)


@pytest.mark.parametrize("n", [2, 3, 5, 7, 10, 13, 20, 33, 50])
def test_untwisted_rows_raise_no_flags(n):
    """At mu = 0 the state is a product state: no flag may be set."""
    row = scan_row("oat", n, 0.0, resolution=16)
    flags = [column for column in SCAN_COLUMNS if column.endswith("_violated") or "_beats_" in column]
    assert flags
    for column in flags:
        assert row[column] is False, column


def test_oat_scan_necessity_chain():
    """Every eq17 violation has N/xi^2 > 2N and F > 2N; every 2m witness violation has F > N."""
    n = 50
    rows = run_scan(ScanConfig(family="oat", n_values=(n,), param_range=(0.0, 0.3, 200)))
    assert len(rows) == 200
    assert [row["param"] for row in rows] == sorted(row["param"] for row in rows)
    assert any(row["eq17_violated"] for row in rows)
    for row in rows:
        if row["eq17_violated"]:
            assert row["N_over_xi2"] > 2 * n
            assert row["qfi"] > 2 * n
            assert row["qfi_beats_2N"]
        if row["w2m_violated"]:
            assert row["qfi"] > n


def test_mixture_scan_thresholds():
    """For N = 8 the Mermin bound falls at p = 1/8 and F > N at p = 1/sqrt(8)."""
    n = 8
    rows = run_scan(ScanConfig(family="mix", n_values=(n,), param_range=(0.0, 1.0, 101), resolution=16))
    for row in rows:
        p = row["param"]
        assert row["mermin_violated"] == (p > 0.125)
        assert row["qfi_beats_N"] == (p > 1 / math.sqrt(n))
        assert row["qfi"] == pytest.approx(p * p * n * n, abs=1e-9)
        assert row["mermin_bound"] == pytest.approx(mermin_bound(n))


def test_two_party_mixture_scan_has_no_violations():
    rows = run_scan(ScanConfig(family="mix", n_values=(2,), param_range=(0.0, 1.0, 11), resolution=16))
    for row in rows:
        for column in ("eq17_violated", "eq3m_violated", "w1m_violated", "w2m_violated", "mermin_violated"):
            assert not row[column]
        assert row["xi2"] is None
        assert row["N_over_xi2"] is None


def test_scan_is_independent_of_thread_count(monkeypatch):
    config = ScanConfig(family="tat", n_values=(6, 4), param_range=(0.0, 0.2, 5), resolution=8)
    monkeypatch.setenv("QFI_BELL_THREADS", "1")
    serial = run_scan(config)
    monkeypatch.setenv("QFI_BELL_THREADS", "4")
    parallel = run_scan(config)
    assert serial == parallel
    assert [row["n"] for row in serial] == [6] * 5 + [4] * 5


def test_bad_thread_count(monkeypatch):
    monkeypatch.setenv("QFI_BELL_THREADS", "zero")
    with pytest.raises(ValidationError):
        run_scan(ScanConfig(family="ghz", n_values=(3,)))


def test_region_map_rows():
    rows = region_map_rows(10)
    assert len(rows) == 100
    assert set(rows[0]) == set(REGION_COLUMNS)
    assert rows[0]["xi2"] == pytest.approx(0.1)
    assert rows[0]["C"] == pytest.approx(0.05)
    assert rows[-1]["xi2"] == pytest.approx(1.0)
    assert [row["xi2"] for row in rows] == sorted(row["xi2"] for row in rows)


def test_threshold_rows():
    rows = threshold_rows([2, 3, 4, 9])
    assert [row["mermin_bound"] for row in rows[:3]] == pytest.approx([2.0, 1.5, 2.0])
    assert rows[2]["mermin_p_threshold"] == pytest.approx(0.5)
    assert rows[2]["qfi_p_threshold"] == pytest.approx(0.5)
    for row in rows[:3]:
        assert row["lhv_max"] == pytest.approx(row["mermin_bound"])
    assert rows[3]["lhv_max"] is None
    with pytest.raises(ValidationError):
        threshold_rows([1])
