import json
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from darkmem.energy_model import (
    DEFAULT_PROFILE,
    PJ,
    TechProfile,
    broadcast_energy,
    dram_access_energy,
    effective_ops_per_joule,
    leakage_power,
    memory_access_energy,
    op_energy,
    register_file_energy,
    sram_area,
    voltage_scaled,
)
from darkmem.errors import MissingCalibrationError, NonOperationalVoltageError

P = DEFAULT_PROFILE

TABLE = {
    ("add", "int16"): 0.18, ("multiply", "int16"): 0.62,
    ("add", "fp64"): 5.0, ("multiply", "fp64"): 20.0,
}
MEMORY_ANCHORS = [
    (16, 16, 0.12), (64, 16, 0.23), (4096, 16, 8.0), (32768, 16, 11.0),
    (16, 64, 0.34), (64, 64, 0.42), (4096, 64, 26.0), (32768, 64, 47.0),
]


@pytest.mark.parametrize("key,pj", sorted(TABLE.items()))
def test_op_energy_anchors(key, pj):
    assert op_energy(P, *key) == pytest.approx(pj * PJ, rel=1e-12)


def test_fmadd_is_add_plus_multiply():
    assert op_energy(P, "fmadd", "fp64") == pytest.approx(25 * PJ, rel=1e-12)
    assert op_energy(P, "fmadd", "int16") == pytest.approx(0.80 * PJ, rel=1e-12)


def test_missing_calibration():
    with pytest.raises(MissingCalibrationError):
        op_energy(P, "multiply", "fp32")
    with pytest.raises(MissingCalibrationError):
        dram_access_energy(P, "fp32")


@pytest.mark.parametrize("cap,bits,pj", MEMORY_ANCHORS)
def test_memory_anchors_round_trip(cap, bits, pj):
    assert memory_access_energy(P, cap, bits) == pytest.approx(pj * PJ, rel=1e-12)


def test_dram_anchors():
    assert dram_access_energy(P, "int16") == pytest.approx(640 * PJ, rel=1e-12)
    assert dram_access_energy(P, "fp64") == pytest.approx(2560 * PJ, rel=1e-12)


def test_sqrt_extrapolation_beyond_largest_anchor():
    assert memory_access_energy(P, 131072, 16) == pytest.approx(22 * PJ, rel=1e-12)
    # below the smallest anchor as well
    assert memory_access_energy(P, 4, 16) == pytest.approx(0.06 * PJ, rel=1e-12)


def test_log_log_interpolation_between_anchors():
    expected = 8 * (11 / 8) ** (math.log(4) / math.log(8))
    assert memory_access_energy(P, 16384, 16) == pytest.approx(expected * PJ, rel=1e-12)
    assert expected == pytest.approx(9.892, abs=1e-3)


@settings(max_examples=200, deadline=None)
@given(st.floats(1, 1e8), st.sampled_from([16, 64]))
def test_access_energy_monotone_in_capacity(cap, bits):
    assert memory_access_energy(P, cap * 1.01, bits) >= memory_access_energy(P, cap, bits)


@settings(max_examples=200, deadline=None)
@given(st.floats(1e5, 1e9))
def test_sqrt_law_doubles_for_4x_capacity(cap):
    e1 = memory_access_energy(P, cap, 64)
    e4 = memory_access_energy(P, 4 * cap, 64)
    assert e4 / e1 == pytest.approx(2.0, rel=1e-9)


@settings(max_examples=200, deadline=None)
@given(st.floats(1, 1e7), st.sampled_from([64, 128, 256]))
def test_width_law_outside_anchored_widths(cap, bits):
    e1 = memory_access_energy(P, cap, bits)
    e4 = memory_access_energy(P, cap, 4 * bits)
    assert e4 / e1 == pytest.approx(1.5, rel=1e-9)


def test_width_law_on_single_width_profile():
    prof = TechProfile(
        "narrow", P.op_energies,
        rf_anchors=[(16, 16, 0.12 * PJ), (64, 16, 0.23 * PJ)],
        sram_anchors=[(4096, 16, 8 * PJ), (32768, 16, 11 * PJ)],
        dram_energy=P.dram_energy)
    for cap in (16, 100, 4096, 20000, 1e6):
        ratio = memory_access_energy(prof, cap, 64) / memory_access_energy(prof, cap, 16)
        assert ratio == pytest.approx(1.5, rel=1e-12)


def test_intermediate_width_between_anchored_columns():
    e16 = memory_access_energy(P, 4096, 16)
    e32 = memory_access_energy(P, 4096, 32)
    e64 = memory_access_energy(P, 4096, 64)
    assert e16 < e32 < e64
    assert e32 == pytest.approx(math.sqrt(e16 * e64), rel=1e-12)


def test_register_file_energy_uses_smallest_rf():
    assert register_file_energy(P, "int16") == pytest.approx(0.12 * PJ)
    assert register_file_energy(P, "fp64") == pytest.approx(0.34 * PJ)


def test_effective_ops_examples():
    rf16 = effective_ops_per_joule(P, "multiply", "int16", "rf")
    sram16 = effective_ops_per_joule(P, "multiply", "int16", 4096)
    rf64 = effective_ops_per_joule(P, "multiply", "fp64", "rf")
    assert rf16 == pytest.approx(1 / ((0.62 + 0.36) * PJ), rel=1e-12)
    assert rf16 / 1e9 == pytest.approx(1020.4, rel=1e-4)
    assert sram16 / 1e9 == pytest.approx(112.87, rel=1e-4)
    assert rf16 / sram16 == pytest.approx(9.0408, rel=1e-4)
    assert rf64 / 1e9 == pytest.approx(47.6, rel=1e-3)
    dram = effective_ops_per_joule(P, "multiply", "fp64", "dram")
    assert dram == pytest.approx(1 / ((20 + 2560 + 0.68) * PJ), rel=1e-12)


def test_effective_ops_unknown_source():
    with pytest.raises(ValueError):
        effective_ops_per_joule(P, "add", "fp64", "l3")


def test_voltage_identity_and_example():
    assert voltage_scaled(P, P.v_nom) == pytest.approx((1.0, 1.0))
    e, d = voltage_scaled(P, 0.6)
    assert e == pytest.approx((0.6 / 0.9) ** 2, rel=1e-12)
    direct = (0.6 / (0.6 - 0.3) ** 1.3) / (0.9 / (0.9 - 0.3) ** 1.3)
    assert d == pytest.approx(direct, rel=1e-12)
    assert d == pytest.approx(1.6415, rel=1e-4)


@pytest.mark.parametrize("v", [0.3, 0.1, 1.09])
def test_non_operational_voltage(v):
    with pytest.raises(NonOperationalVoltageError):
        voltage_scaled(P, v)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.31, 1.08))
def test_lower_voltage_is_slower_and_cheaper(v):
    e, d = voltage_scaled(P, v)
    e2, d2 = voltage_scaled(P, min(v + 0.01, 1.08))
    assert e2 >= e and d2 <= d


def test_leakage_examples():
    assert leakage_power(P, 0) == 0
    assert leakage_power(P, 2 ** 20) == pytest.approx(5.24e-6, rel=1e-3)
    assert leakage_power(P, 8 * 2 ** 20) == pytest.approx(41.9e-6, rel=2e-3)
    with pytest.raises(ValueError):
        leakage_power(P, -1)


def test_broadcast_examples():
    assert broadcast_energy(P, 64, 0) == 0
    assert broadcast_energy(P, 64, 100) == pytest.approx(96 * PJ, rel=1e-12)
    assert broadcast_energy(P, 64, 25) == pytest.approx(48 * PJ, rel=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.floats(1e-3, 1e4), st.floats(1.01, 100))
def test_broadcast_sqrt_scaling(area, k):
    ratio = broadcast_energy(P, 64, k * area) / broadcast_energy(P, 64, area)
    assert ratio == pytest.approx(math.sqrt(k), rel=1e-12)


def test_sram_area_linear():
    assert sram_area(P, 4096, 64) == pytest.approx(4096 * 64 * 0.5e-6)


def test_profile_json_round_trip():
    text = P.to_json()
    again = TechProfile.from_json(text)
    assert again == P
    assert again.to_json() == text
    doc = json.loads(text)
    assert doc["op_energies"]["multiply"]["fp64"] == pytest.approx(20.0)
    assert doc["dram_energy"]["int16"] == pytest.approx(640.0)


def test_profile_partial_override_and_unknown_key():
    prof = TechProfile.from_dict({"dram_energy": {"fp64": 1000.0}, "name": "cheap-dram"})
    assert dram_access_energy(prof, "fp64") == pytest.approx(1000 * PJ)
    assert dram_access_energy(prof, "int16") == pytest.approx(640 * PJ)
    with pytest.raises(ValueError):
        TechProfile.from_dict({"dram_energie": {}})


def test_profile_validation():
    with pytest.raises(ValueError):
        P.with_overrides(v_t=1.0)
    with pytest.raises(ValueError):
        TechProfile.from_dict({"rf_anchors": [[64, 16, 0.2], [16, 16, 0.1]]})
    with pytest.raises(ValueError):
        TechProfile.from_dict({"dram_energy": {"fp64": -1}})
