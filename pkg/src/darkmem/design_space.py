"""
Compute-unit design spaces in the (energy/op, mm²/(op/s)) metric space.

A data-parallel engine can be replicated to scale throughput, so a design
is characterised by two throughput-invariant numbers: energy per op
(J/op = W per op/s) and area per unit throughput (mm² per op/s).  This
module generates such points from a small analytic FMADD-style model
(pipeline depth x supply voltage x gate sizing), filters them to a Pareto
curve and extracts the lower-left convex frontier used for marginal-cost
reasoning.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Any, Iterable, NamedTuple, Sequence

import numpy as np

from .energy_model import DEFAULT_PROFILE, TechProfile, op_energy, voltage_scaled

DESIGN_CSV_HEADER = ("energy_pj_per_op", "mm2_per_gops", "depth", "vdd", "sizing", "label")


class DesignMeta(NamedTuple):
    depth: int = 0
    voltage: float = 0.0
    sizing: float = 0.0
    label: str = ""


@dataclass(frozen=True, order=False)
class DesignPoint:
    """One design: energy per op (J) and area per throughput (mm² per op/s)."""

    energy_per_op: float
    area_per_throughput: float
    meta: DesignMeta = DesignMeta()

    def __post_init__(self):
        e, a = self.energy_per_op, self.area_per_throughput
        if not (e > 0 and a > 0 and math.isfinite(e) and math.isfinite(a)):
            raise ValueError(f"design metrics must be positive and finite, got ({e}, {a})")
        if not isinstance(self.meta, DesignMeta):
            object.__setattr__(self, "meta", DesignMeta(*self.meta))

    @property
    def power_density(self) -> float:
        """W/mm² when run at any throughput."""
        return self.energy_per_op / self.area_per_throughput


@dataclass(frozen=True)
class RawDesign3D:
    area: float  # mm²
    power: float  # W
    performance: float  # op/s
    meta: Any = None

    def __post_init__(self):
        if not (self.area > 0 and self.power > 0 and self.performance > 0):
            raise ValueError("area, power and performance must be positive")

    def scaled(self, k: float) -> "RawDesign3D":
        return RawDesign3D(self.area * k, self.power * k, self.performance * k, self.meta)


@dataclass(frozen=True)
class ComputeUnitSpec:
    """Knobs and base costs of a replicable compute unit.

    ``base_energy`` (J/op), ``base_delay`` (s, unpipelined critical path) and
    ``base_area`` (mm²) are at nominal voltage.  Each extra pipeline stage
    adds ``pipe_register_energy_fraction`` of the base energy,
    ``pipe_area_fraction`` of the base area and a fixed register delay.
    """

    base_energy: float
    base_delay: float
    base_area: float
    pipe_register_energy_fraction: float = 0.05
    pipe_area_fraction: float = 0.10
    pipe_register_delay_overhead: float | None = None
    sizing_grid: tuple = (0.5, 0.7, 1.0, 1.4, 2.0)
    voltage_grid: tuple = tuple(round(0.5 + 0.05 * i, 2) for i in range(9))
    depth_grid: tuple = (1, 2, 4, 8, 12, 16, 20)
    label: str = "fmadd"

    def __post_init__(self):
        if self.pipe_register_delay_overhead is None:
            object.__setattr__(self, "pipe_register_delay_overhead", self.base_delay / 40.0)
        for name in ("sizing_grid", "voltage_grid", "depth_grid"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if not (self.base_energy > 0 and self.base_delay > 0 and self.base_area > 0):
            raise ValueError("base quantities must be positive")
        if not (0 <= self.pipe_register_energy_fraction <= 1 and 0 <= self.pipe_area_fraction <= 1):
            raise ValueError("pipeline overhead fractions must lie in [0, 1]")
        if self.pipe_register_delay_overhead < 0:
            raise ValueError("register delay overhead must be non-negative")
        if not (self.sizing_grid and self.voltage_grid and self.depth_grid):
            raise ValueError("grids must be non-empty")
        if any(int(d) != d or d < 1 for d in self.depth_grid):
            raise ValueError("pipeline depths must be integers >= 1")
        if any(s <= 0 for s in self.sizing_grid):
            raise ValueError("sizing factors must be positive")


#: defaults for an unpipelined 45 nm fp64 FMADD; not measured values
FMADD_BASE_DELAY = 2.0e-9
FMADD_BASE_AREA = 0.2


def default_fmadd_spec(profile: TechProfile = DEFAULT_PROFILE, precision: str = "fp64",
                       **overrides) -> ComputeUnitSpec:
    kw = dict(base_energy=op_energy(profile, "fmadd", precision),
              base_delay=FMADD_BASE_DELAY, base_area=FMADD_BASE_AREA,
              label=f"fmadd-{precision}")
    kw.update(overrides)
    return ComputeUnitSpec(**kw)


def sizing_speedup(s: float) -> float:
    """Critical-path speedup from upsizing gates by factor ``s`` (saturates at s=2)."""
    return 0.6 + 0.4 * min(s, 2.0)


def evaluate_design(spec: ComputeUnitSpec, profile: TechProfile, depth: int,
                    voltage: float, sizing: float) -> DesignPoint:
    e_mult, d_mult = voltage_scaled(profile, voltage)
    cycle = (spec.base_delay * d_mult / (sizing_speedup(sizing) * depth)
             + spec.pipe_register_delay_overhead)
    throughput = 1.0 / cycle
    energy = spec.base_energy * (1 + spec.pipe_register_energy_fraction * (depth - 1)) * e_mult
    area = spec.base_area * sizing * (1 + spec.pipe_area_fraction * (depth - 1))
    label = f"{spec.label}/d{depth}/v{voltage:.2f}/s{sizing:g}"
    return DesignPoint(energy, area / throughput, DesignMeta(int(depth), float(voltage),
                                                             float(sizing), label))


def generate_design_space(spec: ComputeUnitSpec,
                          profile: TechProfile = DEFAULT_PROFILE) -> list[DesignPoint]:
    """One design per (depth, voltage, sizing), in lexicographic knob order."""
    return [evaluate_design(spec, profile, d, v, s)
            for d in sorted(spec.depth_grid)
            for v in sorted(spec.voltage_grid)
            for s in sorted(spec.sizing_grid)]


# -- Pareto machinery -------------------------------------------------------

def _meta_key(meta):
    # tuples of mixed types still need a total order for tie-breaking
    if isinstance(meta, tuple):
        return tuple((type(m).__name__, m) if m is not None else ("", "") for m in meta)
    return (type(meta).__name__, meta if meta is not None else "")


@dataclass(frozen=True)
class ParetoCurve:
    """Non-dominated points sorted by ``x`` ascending, energy strictly descending.

    ``x_attr`` names the abscissa attribute of the points
    (``area_per_throughput`` for scalable engines, ``area`` for memories).
    """

    points: tuple
    x_attr: str = "area_per_throughput"

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(self.points))
        if not self.points:
            raise ValueError("a Pareto curve needs at least one point")

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def __getitem__(self, i):
        return self.points[i]

    @property
    def xs(self) -> np.ndarray:
        return np.array([getattr(p, self.x_attr) for p in self.points], dtype=float)

    @property
    def energies(self) -> np.ndarray:
        return np.array([p.energy_per_op for p in self.points], dtype=float)


def pareto_indices(energies: Sequence[float], xs: Sequence[float],
                   tie_keys: Sequence | None = None) -> list[int]:
    """Indices of the non-dominated (energy, x) pairs, sorted by x ascending.

    Both coordinates are minimised.  Exact duplicates collapse onto the one
    with the smallest ``tie_keys`` entry (input order if not given).
    """
    n = len(energies)
    if tie_keys is None:
        tie_keys = range(n)
    order = sorted(range(n), key=lambda i: (xs[i], energies[i], tie_keys[i]))
    keep = []
    best = math.inf
    for i in order:
        if energies[i] < best:
            keep.append(i)
            best = energies[i]
    return keep


def pareto_filter(points: Iterable, x_attr: str = "area_per_throughput") -> ParetoCurve:
    """Keep the designs no other design beats in both energy/op and ``x_attr``."""
    pts = list(points)
    if not pts:
        raise ValueError("pareto_filter needs a non-empty point list")
    idx = pareto_indices([p.energy_per_op for p in pts],
                         [getattr(p, x_attr) for p in pts],
                         [_meta_key(getattr(p, "meta", None)) for p in pts])
    return ParetoCurve(tuple(pts[i] for i in idx), x_attr)


def pareto_filter_3d(designs: Sequence[RawDesign3D]) -> list[RawDesign3D]:
    """Drop designs dominated in (area down, power down, performance up); order kept."""
    designs = list(designs)
    if not designs:
        return []
    a = np.array([d.area for d in designs])
    p = np.array([d.power for d in designs])
    t = np.array([d.performance for d in designs])
    keep = []
    for i in range(len(designs)):
        weak = (a <= a[i]) & (p <= p[i]) & (t >= t[i])
        strict = (a < a[i]) | (p < p[i]) | (t > t[i])
        if not np.any(weak & strict):
            keep.append(designs[i])
    return keep


def reduce_to_metric_space(design: RawDesign3D) -> DesignPoint:
    """Collapse a scalable design to (power/perf, area/perf)."""
    meta = design.meta
    if not isinstance(meta, DesignMeta):
        meta = DesignMeta(label="" if meta is None else str(meta))
    return DesignPoint(design.power / design.performance,
                       design.area / design.performance, meta)


def scale_to_throughput(point: DesignPoint, throughput: float) -> tuple[float, float]:
    """(area mm², power W) of enough replicas to deliver ``throughput`` op/s."""
    if throughput < 0:
        raise ValueError("throughput must be non-negative")
    return throughput * point.area_per_throughput, throughput * point.energy_per_op


@dataclass(frozen=True)
class ConvexFrontier:
    """Lower-left convex hull of a Pareto curve.

    Slopes are dE/dx between consecutive vertices: negative and strictly
    increasing toward zero.
    """

    vertices: tuple
    x_attr: str = "area_per_throughput"
    slopes: tuple = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "vertices", tuple(self.vertices))
        if not self.vertices:
            raise ValueError("empty frontier")
        xs, es = self.xs, self.energies
        object.__setattr__(self, "slopes", tuple(np.diff(es) / np.diff(xs)))

    def __len__(self):
        return len(self.vertices)

    @property
    def xs(self) -> np.ndarray:
        return np.array([getattr(p, self.x_attr) for p in self.vertices], dtype=float)

    @property
    def energies(self) -> np.ndarray:
        return np.array([p.energy_per_op for p in self.vertices], dtype=float)

    def energy_at(self, x: float) -> float:
        """Energy/op of the best mix of adjacent vertices at abscissa ``x``.

        Beyond the largest-x vertex the minimum energy is returned; below the
        smallest-x vertex the point is unreachable and ``inf`` is returned.
        """
        xs, es = self.xs, self.energies
        if x < xs[0] * (1 - 1e-12):
            return math.inf
        return float(np.interp(x, xs, es))


def convex_frontier(curve: ParetoCurve) -> ConvexFrontier:
    """Lower convex hull of ``curve``; collinear interior points are dropped."""
    pts = list(curve.points)
    x_attr = curve.x_attr
    hull = []
    for p in pts:
        while len(hull) >= 2:
            o, a = hull[-2], hull[-1]
            ox, oy = getattr(o, x_attr), o.energy_per_op
            cross = ((getattr(a, x_attr) - ox) * (p.energy_per_op - oy)
                     - (a.energy_per_op - oy) * (getattr(p, x_attr) - ox))
            if cross <= 0:
                hull.pop()
            else:
                break
        hull.append(p)
    return ConvexFrontier(tuple(hull), x_attr)


# -- serialization ----------------------------------------------------------

def designs_to_csv(points: Iterable[DesignPoint]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(DESIGN_CSV_HEADER)
    for p in points:
        m = p.meta
        w.writerow([f"{p.energy_per_op * 1e12:.6g}", f"{p.area_per_throughput * 1e9:.6g}",
                    m.depth, f"{m.voltage:.6g}", f"{m.sizing:.6g}", m.label])
    return buf.getvalue()


def designs_from_csv(text: str) -> list[DesignPoint]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != DESIGN_CSV_HEADER:
        raise ValueError("unexpected design CSV header")
    return [DesignPoint(float(e) * 1e-12, float(a) * 1e-9,
                        DesignMeta(int(d), float(v), float(s), label))
            for e, a, d, v, s, label in rows[1:]]


def design_to_dict(p: DesignPoint) -> dict:
    m = p.meta
    return {"energy_pj_per_op": p.energy_per_op * 1e12,
            "mm2_per_gops": p.area_per_throughput * 1e9,
            "depth": m.depth, "vdd": m.voltage, "sizing": m.sizing, "label": m.label}


def design_from_dict(d: dict) -> DesignPoint:
    return DesignPoint(d["energy_pj_per_op"] * 1e-12, d["mm2_per_gops"] * 1e-9,
                       DesignMeta(int(d.get("depth", 0)), float(d.get("vdd", 0.0)),
                                  float(d.get("sizing", 0.0)), d.get("label", "")))


def designs_to_json(points: Iterable[DesignPoint]) -> str:
    return json.dumps([design_to_dict(p) for p in points], indent=2) + "\n"
