"""
On-chip memory hierarchies: costing, enumeration and the memory Pareto curve.

Unlike a compute unit, shared on-chip memory does not scale with
throughput, so the memory Pareto curve is drawn in (average memory energy
per op, absolute area).  Leakage is amortised over the target throughput,
i.e. the energy per op assumes the accelerator is busy.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence, Union

import numpy as np
from scipy import stats

from .design_space import ParetoCurve, pareto_filter
from .energy_model import (
    DEFAULT_PROFILE,
    TechProfile,
    dram_access_energy,
    leakage_power,
    memory_access_energy,
    precision_bits,
    sram_area,
)
from .errors import StructuralError
from .workloads import (
    BlockingPlan,
    GemmProblem,
    MissCurveWorkload,
    TrafficProfile,
    gemm_block_size,
    gemm_traffic,
    traffic_from_miss_curve,
)

MAX_LEVELS = 5
FRONTIER_CSV_HEADER = ("area_mm2", "energy_pj_per_op", "levels") + tuple(
    f"cap_words_l{i}" for i in range(1, MAX_LEVELS + 1))

DEFAULT_CAPACITY_GRID = tuple(2 ** k for k in range(4, 23))  # 16 .. 4M words


@dataclass(frozen=True)
class HierarchyConfig:
    """On-chip levels, register file first, capacities in words."""

    capacities: tuple
    precision: str = "fp64"

    def __post_init__(self):
        caps = tuple(int(c) for c in self.capacities)
        object.__setattr__(self, "capacities", caps)
        if not 1 <= len(caps) <= MAX_LEVELS:
            raise ValueError(f"1-{MAX_LEVELS} on-chip levels are supported, got {len(caps)}")
        if caps[0] < 1 or any(c2 <= c1 for c1, c2 in zip(caps, caps[1:])):
            raise ValueError("capacities must be positive and strictly increasing outward")
        precision_bits(self.precision)

    @property
    def n_levels(self) -> int:
        return len(self.capacities)

    @property
    def word_bits(self) -> int:
        return precision_bits(self.precision)

    def access_energies(self, profile: TechProfile) -> tuple:
        return tuple(memory_access_energy(profile, c, self.word_bits) for c in self.capacities)

    def level_areas(self, profile: TechProfile) -> tuple:
        return tuple(sram_area(profile, c, self.word_bits) for c in self.capacities)

    def total_bits(self) -> int:
        return sum(self.capacities) * self.word_bits


@dataclass(frozen=True)
class HierarchyCost:
    """Average memory energy per op and its parts (joules), area (mm²), leakage (W)."""

    energy_per_op: float
    area: float
    leakage: float
    operand_energy: float
    level_energy: tuple
    dram_energy: float
    leakage_energy: float


@dataclass(frozen=True)
class MemoryParetoPoint:
    energy_per_op: float
    area: float
    config: HierarchyConfig
    cost: HierarchyCost = field(compare=False, repr=False, default=None)

    def __post_init__(self):
        if not (self.energy_per_op > 0 and self.area > 0):
            raise ValueError("memory point metrics must be positive")

    @property
    def meta(self):
        return self.config.capacities


def hierarchy_cost(config: HierarchyConfig, traffic: TrafficProfile, throughput: float,
                   profile: TechProfile = DEFAULT_PROFILE) -> HierarchyCost:
    """Energy/op, area and leakage of ``config`` running ``traffic`` at ``throughput`` op/s.

    Level 0 (register file) is charged three accesses per op for operands
    and result; levels 1.. are charged the words they serve inward.
    """
    if traffic.n_levels != config.n_levels:
        raise StructuralError(
            f"traffic has {traffic.n_levels} levels, hierarchy has {config.n_levels}")
    if tuple(traffic.level_capacities) != config.capacities:
        raise StructuralError("traffic level capacities do not match the hierarchy")
    if throughput <= 0:
        raise ValueError("throughput must be positive")
    energies = config.access_energies(profile)
    ops = traffic.total_ops
    operand = 3.0 * energies[0]
    level_energy = (0.0,) + tuple(acc * e / ops for acc, e in
                                  zip(traffic.level_accesses[1:], energies[1:]))
    dram = traffic.dram_accesses * dram_access_energy(profile, config.precision) / ops
    leak = leakage_power(profile, config.total_bits())
    leak_e = leak / throughput
    total = operand + sum(level_energy) + dram + leak_e
    area = sum(config.level_areas(profile))
    return HierarchyCost(total, area, leak, operand, level_energy, dram, leak_e)


def enumerate_hierarchies(level_counts: Iterable[int], capacity_grid: Sequence[int],
                          precision: str = "fp64", register_file: int | None = None,
                          skip: Callable[[HierarchyConfig], bool] | None = None,
                          max_configs: int | None = None,
                          seed: int = 0) -> list[HierarchyConfig]:
    """All strictly increasing capacity tuples from ``capacity_grid``.

    Without ``register_file`` each level count L yields C(g, L) tuples.
    With it, level 0 is fixed to that capacity and the remaining L-1
    levels are drawn from grid entries larger than it.  ``skip`` drops
    configs (e.g. ones whose inner level already holds the whole problem).
    When the total exceeds ``max_configs`` a seeded random subset of that
    size is returned instead, still in canonical order.
    """
    grid = sorted(set(int(c) for c in capacity_grid))
    counts = sorted(set(int(L) for L in level_counts))
    if any(L < 1 or L > MAX_LEVELS for L in counts):
        raise ValueError(f"level counts must lie in 1..{MAX_LEVELS}")
    if register_file is not None:
        outer = [c for c in grid if c > register_file]
        families = [(L, outer, L - 1) for L in counts]
    else:
        families = [(L, grid, L) for L in counts]
    total = sum(math.comb(len(pool), k) for _, pool, k in families)

    def build(caps):
        caps = ((register_file,) if register_file is not None else ()) + tuple(caps)
        return HierarchyConfig(caps, precision)

    if max_configs is not None and total > max_configs:
        rng = np.random.default_rng(seed)
        weights = np.array([math.comb(len(pool), k) for _, pool, k in families], float)
        chosen = set()
        while len(chosen) < max_configs:
            f = rng.choice(len(families), p=weights / weights.sum())
            _, pool, k = families[f]
            pick = tuple(sorted(rng.choice(pool, size=k, replace=False).tolist())) if k else ()
            chosen.add((f, pick))
        configs = [build(pick) for _, pick in sorted(chosen)]
    else:
        configs = [build(caps) for _, pool, k in families
                   for caps in itertools.combinations(pool, k)]
    if skip is not None:
        configs = [c for c in configs if not skip(c)]
    return configs


@dataclass(frozen=True)
class HierarchyGrids:
    capacity_grid: tuple = DEFAULT_CAPACITY_GRID
    level_counts: tuple = (1, 2, 3, 4, 5)
    register_file_words: int = 64
    max_configs: int = 2_000_000
    compulsory_per_level: bool = True
    seed: int = 0


Workload = Union[GemmProblem, MissCurveWorkload]


def workload_traffic(workload: Workload, config: HierarchyConfig,
                     compulsory_per_level: bool = True,
                     total_ops: float = 1.0) -> TrafficProfile:
    if isinstance(workload, GemmProblem):
        plan = BlockingPlan.from_capacities(config.capacities)
        return gemm_traffic(workload, plan, compulsory_per_level)
    return traffic_from_miss_curve(workload, config.capacities, total_ops)


def _gemm_fits(problem: GemmProblem):
    def skip(config):
        return any(gemm_block_size(c) >= problem.n for c in config.capacities[:-1])
    return skip


def memory_pareto(workload: Workload, throughput: float,
                  profile: TechProfile = DEFAULT_PROFILE,
                  grids: HierarchyGrids = HierarchyGrids(),
                  precision: str | None = None,
                  return_all: bool = False):
    """Cost every enumerated hierarchy and keep the (energy/op, area) Pareto set.

    ``return_all=True`` also returns the full list of costed points.
    """
    if precision is None:
        precision = workload.precision
    skip = _gemm_fits(workload) if isinstance(workload, GemmProblem) else None
    configs = enumerate_hierarchies(grids.level_counts, grids.capacity_grid, precision,
                                    register_file=grids.register_file_words, skip=skip,
                                    max_configs=grids.max_configs, seed=grids.seed)
    if not configs:
        raise ValueError("hierarchy enumeration is empty")
    points = []
    for config in configs:
        traffic = workload_traffic(workload, config, grids.compulsory_per_level)
        cost = hierarchy_cost(config, traffic, throughput, profile)
        points.append(MemoryParetoPoint(cost.energy_per_op, cost.area, config, cost))
    curve = pareto_filter(points, x_attr="area")
    return (curve, points) if return_all else curve


@dataclass(frozen=True)
class LevelTrend:
    areas: tuple
    levels: tuple
    spearman: float

    @property
    def non_decreasing(self) -> bool:
        return all(b >= a for a, b in zip(self.levels, self.levels[1:]))

    def ranges(self) -> list[tuple[float, float, int]]:
        """Contiguous (area_lo, area_hi, level_count) runs along the frontier."""
        out = []
        for area, lv in zip(self.areas, self.levels):
            if out and out[-1][2] == lv:
                out[-1] = (out[-1][0], area, lv)
            else:
                out.append((area, area, lv))
        return out


def optimal_level_count(frontier: ParetoCurve) -> LevelTrend:
    """Level count of each frontier config and its rank correlation with area.

    The correlation is 1.0 when the level count never changes.
    """
    areas = tuple(float(p.area) for p in frontier)
    levels = tuple(p.config.n_levels for p in frontier)
    if len(set(levels)) < 2:
        rho = 1.0
    else:
        rho = float(stats.spearmanr(areas, levels).statistic)
    return LevelTrend(areas, levels, rho)


def dram_dominance_crossover(profile: TechProfile = DEFAULT_PROFILE, precision: str = "int16",
                             register_file: int = 64, sram_capacity: int = 4096,
                             tol: float = 1e-12) -> float:
    """Miss ratio at which DRAM energy overtakes SRAM energy in an RF + SRAM + DRAM system.

    One operand per op comes from the SRAM; a fraction ``m`` of those
    accesses go on to DRAM.  Found by bisection on the costed breakdown.
    """
    config = HierarchyConfig((register_file, sram_capacity), precision)

    def excess(m):
        traffic = TrafficProfile(config.capacities, (0.0, 1.0), m, 1.0)
        cost = hierarchy_cost(config, traffic, 1.0, profile)
        return cost.dram_energy - cost.level_energy[1]

    lo, hi = 0.0, 1.0
    if excess(hi) <= 0:
        return math.inf
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if excess(mid) > 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


# -- serialization ----------------------------------------------------------

def frontier_rows(points: Iterable[MemoryParetoPoint]) -> list[list[str]]:
    rows = []
    for p in points:
        caps = list(p.config.capacities) + [""] * (MAX_LEVELS - p.config.n_levels)
        rows.append([f"{p.area:.6g}", f"{p.energy_per_op * 1e12:.6g}",
                     str(p.config.n_levels)] + [str(c) for c in caps])
    return rows


def memory_frontier_to_csv(points: Iterable[MemoryParetoPoint]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(FRONTIER_CSV_HEADER)
    w.writerows(frontier_rows(points))
    return buf.getvalue()


def memory_point_to_dict(p: MemoryParetoPoint) -> dict:
    d = {"area_mm2": p.area, "energy_pj_per_op": p.energy_per_op * 1e12,
         "levels": p.config.n_levels, "capacities_words": list(p.config.capacities),
         "precision": p.config.precision}
    if p.cost is not None:
        d["breakdown_pj_per_op"] = {
            "operand": p.cost.operand_energy * 1e12,
            "levels": [e * 1e12 for e in p.cost.level_energy],
            "dram": p.cost.dram_energy * 1e12,
            "leakage": p.cost.leakage_energy * 1e12,
        }
    return d


def memory_frontier_to_json(points: Iterable[MemoryParetoPoint]) -> str:
    return json.dumps([memory_point_to_dict(p) for p in points], indent=2) + "\n"
