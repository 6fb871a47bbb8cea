"""
Energy, area, delay and leakage model for a process node.

Every number used elsewhere in the package comes from a :class:`TechProfile`.
The built-in ``45nm-default`` profile carries the per-operation energies of
a 45 nm, 0.9 V process (16-bit integer and 64-bit floating point columns)
plus a handful of non-measured defaults (SRAM cell area, leakage, wire
energy, alpha-power-law voltage parameters) that are order-of-magnitude
typical for that node and can be overridden.

Units: internally everything is SI (joules, watts, volts, seconds) except
area, which is mm².  The JSON form of a profile stores energies in pJ.

Memory access energy follows three rules:

* between two anchors of the same word width: power-law (log-log)
  interpolation;
* outside the anchored capacity range: ``E(c) = E(anchor) * sqrt(c / c_anchor)``;
* for word widths that are not anchored: ``(width / anchor_width) ** gamma``
  with ``gamma = ln(1.5) / ln(4)``, i.e. 4x wider fetch costs 1.5x.
  Between two anchored widths the two width columns are interpolated
  log-log as well.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence, Union

from .errors import MissingCalibrationError, NonOperationalVoltageError

PJ = 1e-12

OP_KINDS = ("add", "multiply", "fmadd")

#: word width used for each precision label
PRECISION_BITS = {"int16": 16, "fp64": 64}

#: fetch-width exponent giving a 1.5x energy ratio for a 4x wider word
DEFAULT_WIDTH_EXPONENT = math.log(1.5) / math.log(4.0)

OperandSource = Union[str, int, float]


def precision_bits(precision: str) -> int:
    try:
        return PRECISION_BITS[precision]
    except KeyError:
        raise MissingCalibrationError(f"unknown precision {precision!r}") from None


@dataclass(frozen=True)
class TechProfile:
    """Calibrated energy/area/leakage parameters of one process node.

    ``op_energies`` maps ``(kind, precision)`` to joules/op.  The anchor lists
    hold ``(capacity_words, word_bits, joules_per_access)`` triples.
    ``dram_energy`` maps precision to joules per word access.
    """

    name: str
    op_energies: Mapping[tuple, float]
    rf_anchors: tuple
    sram_anchors: tuple
    dram_energy: Mapping[str, float]
    fetch_width_exponent: float = DEFAULT_WIDTH_EXPONENT
    sram_area_per_bit: float = 0.5e-6  # mm²/bit
    leakage_per_bit: float = 5e-12  # W/bit
    wire_energy_per_bit_mm: float = 0.15e-12  # J/(bit·mm)
    v_nom: float = 0.9
    v_t: float = 0.3
    alpha_delay: float = 1.3
    _columns: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        rf = tuple(tuple(a) for a in self.rf_anchors)
        sram = tuple(tuple(a) for a in self.sram_anchors)
        object.__setattr__(self, "rf_anchors", rf)
        object.__setattr__(self, "sram_anchors", sram)
        object.__setattr__(self, "op_energies", dict(self.op_energies))
        object.__setattr__(self, "dram_energy", dict(self.dram_energy))
        self._validate()
        object.__setattr__(self, "_columns", _build_columns(rf, sram))

    def _validate(self):
        values = list(self.op_energies.values()) + list(self.dram_energy.values())
        values += [a[2] for a in self.rf_anchors + self.sram_anchors]
        values += [self.sram_area_per_bit, self.leakage_per_bit, self.wire_energy_per_bit_mm]
        if not all(v > 0 and math.isfinite(v) for v in values):
            raise ValueError("energies, areas and leakages must be strictly positive")
        for key in self.op_energies:
            if key[0] not in OP_KINDS:
                raise ValueError(f"unknown op kind {key[0]!r}")
        if not self.rf_anchors or not self.sram_anchors:
            raise ValueError("at least one RF and one SRAM anchor are required")
        for anchors in (self.rf_anchors, self.sram_anchors):
            for a in anchors:
                if a[0] < 1 or a[1] < 1:
                    raise ValueError(f"bad anchor {a}")
            by_width = {}
            for cap, bits, energy in anchors:
                by_width.setdefault(bits, []).append((cap, energy))
            for pts in by_width.values():
                caps = [c for c, _ in pts]
                if caps != sorted(caps) or len(set(caps)) != len(caps):
                    raise ValueError("anchors must be sorted by strictly increasing capacity")
                if any(e1 > e2 for (_, e1), (_, e2) in zip(pts, pts[1:])):
                    raise ValueError("anchor energies must be non-decreasing with capacity")
        if not 0 < self.v_t < self.v_nom:
            raise ValueError("need v_nom > v_t > 0")
        if not 0 < self.fetch_width_exponent < 1:
            raise ValueError("fetch_width_exponent must lie in (0, 1)")
        if self.alpha_delay <= 0:
            raise ValueError("alpha_delay must be positive")

    def with_overrides(self, **changes) -> "TechProfile":
        return replace(self, **changes)

    # -- serialization -------------------------------------------------
    def to_dict(self) -> dict:
        ops = {}
        for (kind, prec), energy in sorted(self.op_energies.items()):
            ops.setdefault(kind, {})[prec] = energy / PJ
        return {
            "name": self.name,
            "op_energies": ops,
            "rf_anchors": [[c, b, e / PJ] for c, b, e in self.rf_anchors],
            "sram_anchors": [[c, b, e / PJ] for c, b, e in self.sram_anchors],
            "dram_energy": {p: e / PJ for p, e in sorted(self.dram_energy.items())},
            "fetch_width_exponent": self.fetch_width_exponent,
            "sram_area_per_bit": self.sram_area_per_bit,
            "leakage_per_bit": self.leakage_per_bit,
            "wire_energy_per_bit_mm": self.wire_energy_per_bit_mm / PJ,
            "v_nom": self.v_nom,
            "v_t": self.v_t,
            "alpha_delay": self.alpha_delay,
        }

    @classmethod
    def from_dict(cls, doc: Mapping, base: "TechProfile | None" = None) -> "TechProfile":
        """Build a profile from its JSON form.

        Missing keys fall back to ``base`` (the built-in default when None),
        so a partial document acts as an override.
        """
        base = DEFAULT_PROFILE if base is None else base
        known = set(base.to_dict())
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown profile keys: {sorted(unknown)}")
        kw = {}
        if "name" in doc:
            kw["name"] = str(doc["name"])
        if "op_energies" in doc:
            ops = dict(base.op_energies)
            for kind, per_prec in doc["op_energies"].items():
                for prec, pj in per_prec.items():
                    ops[(kind, prec)] = float(pj) * PJ
            kw["op_energies"] = ops
        for key in ("rf_anchors", "sram_anchors"):
            if key in doc:
                kw[key] = tuple((int(c), int(b), float(e) * PJ) for c, b, e in doc[key])
        if "dram_energy" in doc:
            dram = dict(base.dram_energy)
            dram.update({p: float(e) * PJ for p, e in doc["dram_energy"].items()})
            kw["dram_energy"] = dram
        for key in ("fetch_width_exponent", "sram_area_per_bit", "leakage_per_bit",
                    "v_nom", "v_t", "alpha_delay"):
            if key in doc:
                kw[key] = float(doc[key])
        if "wire_energy_per_bit_mm" in doc:
            kw["wire_energy_per_bit_mm"] = float(doc["wire_energy_per_bit_mm"]) * PJ
        return replace(base, **kw)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str, base: "TechProfile | None" = None) -> "TechProfile":
        return cls.from_dict(json.loads(text), base=base)


def load_profile(path: Union[str, Path]) -> TechProfile:
    return TechProfile.from_json(Path(path).read_text())


def _build_columns(rf: Sequence, sram: Sequence) -> dict:
    # one sorted (capacity, energy) column per anchored word width
    cols = {}
    for cap, bits, energy in list(rf) + list(sram):
        cols.setdefault(bits, {})[cap] = energy
    out = {}
    for bits, pts in cols.items():
        caps = sorted(pts)
        out[bits] = (tuple(float(c) for c in caps), tuple(pts[c] for c in caps))
    return out


def _interp_column(caps, energies, capacity):
    if capacity <= caps[0]:
        if capacity == caps[0]:
            return energies[0]
        return energies[0] * math.sqrt(capacity / caps[0])
    if capacity >= caps[-1]:
        if capacity == caps[-1]:
            return energies[-1]
        return energies[-1] * math.sqrt(capacity / caps[-1])
    for (c0, e0), (c1, e1) in zip(zip(caps, energies), zip(caps[1:], energies[1:])):
        if capacity == c1:
            return e1
        if c0 < capacity < c1:
            slope = math.log(e1 / e0) / math.log(c1 / c0)
            return e0 * (capacity / c0) ** slope
    raise AssertionError("unreachable")


# -- built-in profile ---------------------------------------------------

def _table_profile() -> TechProfile:
    ops = {
        ("add", "int16"): 0.18 * PJ,
        ("multiply", "int16"): 0.62 * PJ,
        ("add", "fp64"): 5.0 * PJ,
        ("multiply", "fp64"): 20.0 * PJ,
    }
    rf = (
        (16, 16, 0.12 * PJ),
        (64, 16, 0.23 * PJ),
        (16, 64, 0.34 * PJ),
        (64, 64, 0.42 * PJ),
    )
    sram = (
        (4096, 16, 8.0 * PJ),
        (32768, 16, 11.0 * PJ),
        (4096, 64, 26.0 * PJ),
        (32768, 64, 47.0 * PJ),
    )
    dram = {"int16": 640.0 * PJ, "fp64": 2560.0 * PJ}
    return TechProfile("45nm-default", ops, rf, sram, dram)


DEFAULT_PROFILE = _table_profile()


# -- operations ----------------------------------------------------------

def op_energy(profile: TechProfile, kind: str, precision: str) -> float:
    """Energy of one arithmetic operation in joules.

    ``fmadd`` falls back to add + multiply when the profile has no explicit
    entry for it.
    """
    key = (kind, precision)
    if key in profile.op_energies:
        return profile.op_energies[key]
    if kind == "fmadd":
        try:
            return (profile.op_energies[("add", precision)]
                    + profile.op_energies[("multiply", precision)])
        except KeyError:
            pass
    raise MissingCalibrationError(f"no calibrated energy for ({kind}, {precision})")


def memory_access_energy(profile: TechProfile, capacity: float, word_bits: int) -> float:
    """Energy of one word access to a memory of ``capacity`` words."""
    if capacity < 1:
        raise ValueError("capacity must be >= 1 word")
    if word_bits < 1:
        raise ValueError("word_bits must be >= 1")
    columns = profile._columns
    widths = sorted(columns)

    def at(bits):
        caps, energies = columns[bits]
        return _interp_column(caps, energies, float(capacity))

    gamma = profile.fetch_width_exponent
    if word_bits in columns:
        return at(word_bits)
    if word_bits < widths[0]:
        return at(widths[0]) * (word_bits / widths[0]) ** gamma
    if word_bits > widths[-1]:
        return at(widths[-1]) * (word_bits / widths[-1]) ** gamma
    lo = max(w for w in widths if w < word_bits)
    hi = min(w for w in widths if w > word_bits)
    e_lo, e_hi = at(lo), at(hi)
    slope = math.log(e_hi / e_lo) / math.log(hi / lo)
    return e_lo * (word_bits / lo) ** slope


def register_file_energy(profile: TechProfile, precision: str) -> float:
    """Access energy of the smallest register file anchored at this precision's width."""
    bits = precision_bits(precision)
    candidates = [a for a in profile.rf_anchors if a[1] == bits]
    if candidates:
        return min(candidates)[2]
    return memory_access_energy(profile, min(a[0] for a in profile.rf_anchors), bits)


def dram_access_energy(profile: TechProfile, precision: str) -> float:
    try:
        return profile.dram_energy[precision]
    except KeyError:
        raise MissingCalibrationError(f"no DRAM energy for precision {precision!r}") from None


def source_energy(profile: TechProfile, precision: str, source: OperandSource) -> float:
    """Access energy of an operand source: ``"rf"``, ``"dram"`` or a capacity in words."""
    if isinstance(source, str):
        s = source.lower()
        if s == "rf":
            return register_file_energy(profile, precision)
        if s == "dram":
            return dram_access_energy(profile, precision)
        raise ValueError(f"unknown operand source {source!r}")
    return memory_access_energy(profile, source, precision_bits(precision))


def effective_ops_per_joule(profile: TechProfile, kind: str, precision: str,
                            operand_source: OperandSource) -> float:
    """Operations per joule when one operand comes from ``operand_source``.

    The other operand and the result use the smallest register file; with
    ``operand_source="rf"`` all three accesses hit the register file.
    """
    e_op = op_energy(profile, kind, precision)
    e_rf = register_file_energy(profile, precision)
    if isinstance(operand_source, str) and operand_source.lower() == "rf":
        return 1.0 / (e_op + 3.0 * e_rf)
    return 1.0 / (e_op + source_energy(profile, precision, operand_source) + 2.0 * e_rf)


def voltage_scaled(profile: TechProfile, v: float) -> tuple[float, float]:
    """(energy multiplier, delay multiplier) relative to nominal supply.

    Energy scales as V²; delay follows the alpha-power law V / (V - Vt)^alpha.
    """
    if v <= profile.v_t:
        raise NonOperationalVoltageError(
            f"supply {v} V is not above threshold {profile.v_t} V")
    if v > 1.2 * profile.v_nom:
        raise NonOperationalVoltageError(
            f"supply {v} V exceeds 1.2x nominal ({profile.v_nom} V)")
    a = profile.alpha_delay

    def delay(x):
        return x / (x - profile.v_t) ** a

    return (v / profile.v_nom) ** 2, delay(v) / delay(profile.v_nom)


def leakage_power(profile: TechProfile, total_bits: float) -> float:
    if total_bits < 0:
        raise ValueError("total_bits must be non-negative")
    return total_bits * profile.leakage_per_bit


def broadcast_energy(profile: TechProfile, word_bits: int, fanout_area: float) -> float:
    """Energy to broadcast one word across ``fanout_area`` mm² (wire length = sqrt(area))."""
    if fanout_area < 0:
        raise ValueError("fanout_area must be non-negative")
    return word_bits * profile.wire_energy_per_bit_mm * math.sqrt(fanout_area)


def sram_area(profile: TechProfile, capacity: float, word_bits: int) -> float:
    """Array area in mm²."""
    return capacity * word_bits * profile.sram_area_per_bit
