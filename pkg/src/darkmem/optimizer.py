"""
Constrained optimisation over Pareto and convex frontiers.

* :func:`max_throughput` - best throughput under area/power/density budgets.
* :func:`balance_marginal_costs` - split an area budget between two
  scalable engines so their marginal power-per-area match.
* :func:`quantized_allocation` - integer unit counts when engines come in
  coarse, indivisible units.
* :func:`codesign` - combine a memory frontier with a compute frontier
  scaled to a target throughput.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .design_space import (
    ConvexFrontier,
    DesignMeta,
    DesignPoint,
    ParetoCurve,
    convex_frontier,
    pareto_filter,
)
from .errors import InfeasibleError

REL_SLACK = 1e-9
SYSTEM_CSV_HEADER = ("total_area_mm2", "total_energy_pj_per_op", "mem_area_mm2",
                     "compute_share", "memory_share")


@dataclass(frozen=True)
class Constraints:
    """Budgets: area in mm², power in W, power density in W/cm² (optional)."""

    area_max: float
    power_max: float
    density_max: float | None = None

    def __post_init__(self):
        if not (self.area_max > 0 and self.power_max > 0):
            raise ValueError("area and power budgets must be positive")
        if self.density_max is not None and self.density_max <= 0:
            raise ValueError("density budget must be positive")

    @property
    def density_max_w_per_mm2(self) -> float:
        return math.inf if self.density_max is None else self.density_max / 100.0


@dataclass(frozen=True)
class OptimizationResult:
    point: DesignPoint
    throughput: float  # op/s
    area: float  # mm²
    power: float  # W
    binding: str  # "area", "power" or "both"
    mode: str = "discrete"
    mix: tuple = ()  # ((DesignPoint, work fraction), ...) in mixed mode
    energy_breakdown: dict = field(default_factory=dict)

    @property
    def density(self) -> float:
        """W/cm²."""
        return 100.0 * self.power / self.area

    def to_dict(self) -> dict:
        from .design_space import design_to_dict
        return {
            "mode": self.mode,
            "binding": self.binding,
            "throughput_gops": self.throughput / 1e9,
            "area_mm2": self.area,
            "power_w": self.power,
            "density_w_per_cm2": self.density,
            "point": design_to_dict(self.point),
            "mix": [{"point": design_to_dict(p), "fraction": w} for p, w in self.mix],
            "energy_breakdown_pj_per_op": {k: v * 1e12 for k, v in self.energy_breakdown.items()},
        }


def _throughput_at(e, a, c: Constraints):
    return min(c.area_max / a, c.power_max / e)


def _binding(e, a, c: Constraints):
    ta, tp = c.area_max / a, c.power_max / e
    if abs(ta - tp) <= REL_SLACK * max(ta, tp):
        return "both"
    return "area" if ta < tp else "power"


def _result(point, c, mode="discrete", mix=()):
    e, a = point.energy_per_op, point.area_per_throughput
    t = _throughput_at(e, a, c)
    return OptimizationResult(point, t, t * a, t * e, _binding(e, a, c), mode,
                              tuple(mix), {"compute": e})


def _density_ok(e, a, c):
    return e / a <= c.density_max_w_per_mm2 * (1 + REL_SLACK)


def max_throughput(curve: ParetoCurve | Sequence[DesignPoint], c: Constraints,
                   mode: str = "discrete") -> OptimizationResult:
    """Highest throughput any (possibly mixed) design reaches within the budgets.

    A scalable design replicated to throughput T uses area T*a and power
    T*e, so T = min(A_max/a, P_max/e).  Points denser than ``density_max``
    are excluded.  Ties go to the lower energy/op.  In ``"mixed"`` mode
    work may be split between two adjacent convex-hull vertices.
    """
    if mode not in ("discrete", "mixed"):
        raise ValueError("mode must be 'discrete' or 'mixed'")
    points = list(curve.points if isinstance(curve, ParetoCurve) else curve)
    if not points:
        raise ValueError("empty curve")
    feasible = [p for p in points if _density_ok(p.energy_per_op, p.area_per_throughput, c)]
    if not feasible:
        raise InfeasibleError("every design exceeds the power-density budget", "density")

    def key(p):
        return (-_throughput_at(p.energy_per_op, p.area_per_throughput, c),
                p.energy_per_op, p.area_per_throughput, p.meta)

    best = min(feasible, key=key)
    if mode == "discrete":
        return _result(best, c)

    hull = convex_frontier(pareto_filter(points))
    candidates = [(p, ((p, 1.0),)) for p in hull.vertices
                  if _density_ok(p.energy_per_op, p.area_per_throughput, c)]
    ratios = [c.power_max / c.area_max]
    if c.density_max is not None:
        ratios.append(c.density_max_w_per_mm2)
    for p, q in zip(hull.vertices, hull.vertices[1:]):
        e1, a1 = p.energy_per_op, p.area_per_throughput
        e2, a2 = q.energy_per_op, q.area_per_throughput
        for r in ratios:
            denom = (e2 - e1) - r * (a2 - a1)
            if denom == 0:
                continue
            t = (r * a1 - e1) / denom
            if not 0 < t < 1:
                continue
            e, a = e1 + t * (e2 - e1), a1 + t * (a2 - a1)
            if not _density_ok(e, a, c):
                continue
            label = f"mix({p.meta.label}:{1 - t:.6g},{q.meta.label}:{t:.6g})"
            mixed = DesignPoint(e, a, DesignMeta(label=label))
            candidates.append((mixed, ((p, 1 - t), (q, t))))
    if not candidates:
        return _result(best, c)
    point, mix = min(candidates, key=lambda pm: key(pm[0]))
    if _throughput_at(point.energy_per_op, point.area_per_throughput, c) < \
            _throughput_at(best.energy_per_op, best.area_per_throughput, c):
        return _result(best, c)
    return _result(point, c, "mixed", mix)


def throughput_contour(curve: ParetoCurve | Sequence[DesignPoint], areas: Sequence[float],
                       powers: Sequence[float]) -> np.ndarray:
    """Achievable throughput (op/s) on an area x power grid; rows follow ``areas``."""
    points = list(curve.points if isinstance(curve, ParetoCurve) else curve)
    e = np.array([p.energy_per_op for p in points])
    a = np.array([p.area_per_throughput for p in points])
    A = np.asarray(areas, float)[:, None, None]
    P = np.asarray(powers, float)[None, :, None]
    return np.minimum(A / a, P / e).max(axis=2)


def compare_at_equal_density(base: ConvexFrontier, accel: ConvexFrontier,
                             area_per_throughput: float) -> dict:
    """Energy/op of two engines at the same compute density (J/op; inf if unreachable)."""
    eb = base.energy_at(area_per_throughput)
    ea = accel.energy_at(area_per_throughput)
    return {"area_per_throughput": area_per_throughput, "base_energy": eb,
            "accelerator_energy": ea, "accelerator_better": ea < eb}


# -- marginal-cost balancing -------------------------------------------------

@dataclass(frozen=True)
class EngineShare:
    area: float  # mm²
    throughput: float  # op/s
    energy_per_op: float
    area_per_throughput: float
    power: float  # W


@dataclass(frozen=True)
class Allocation:
    engines: tuple  # (EngineShare, EngineShare)
    shadow_price: float  # W saved per extra mm²
    total_power: float
    total_area: float
    slack: float  # unused area, mm²

    @property
    def areas(self) -> tuple:
        return tuple(e.area for e in self.engines)

    def to_dict(self) -> dict:
        return {"shadow_price_w_per_mm2": self.shadow_price, "total_power_w": self.total_power,
                "total_area_mm2": self.total_area, "slack_mm2": self.slack,
                "engines": [{"area_mm2": e.area, "throughput_gops": e.throughput / 1e9,
                             "energy_pj_per_op": e.energy_per_op * 1e12,
                             "mm2_per_gops": e.area_per_throughput * 1e9,
                             "power_w": e.power} for e in self.engines]}


def _segments(frontier: ConvexFrontier):
    xs, es = frontier.xs, frontier.energies
    dx = np.diff(xs)
    de = es[:-1] - es[1:]
    return xs, es, dx, de / dx  # benefit ratio = power saved per unit area


def engine_power(frontier: ConvexFrontier, demand: float, area: float) -> float:
    """Power (W) of an engine serving ``demand`` op/s inside ``area`` mm²."""
    return demand * frontier.energy_at(area / demand)


def balance_marginal_costs(frontier_a: ConvexFrontier, frontier_b: ConvexFrontier,
                           demand_a: float, demand_b: float, area_budget: float,
                           tol: float = 1e-9, max_iter: int = 200) -> Allocation:
    """Minimise total power of two engines sharing ``area_budget`` mm².

    Bisects on the shadow price: at price lam each engine grows along every
    hull segment whose power saving per mm² exceeds lam.  Segments whose
    saving equals the final price are filled fractionally, so at an interior
    optimum both engines sit at the same marginal slope.
    """
    if demand_a <= 0 or demand_b <= 0:
        raise ValueError("demands must be positive")
    engines = [(frontier_a, demand_a), (frontier_b, demand_b)]
    segs = [_segments(f) for f, _ in engines]
    base = sum(d * xs[0] for (f, d), (xs, *_rest) in zip(engines, segs))
    if base > area_budget * (1 + tol):
        raise InfeasibleError(
            f"area budget {area_budget:.6g} mm² below minimum {base:.6g} mm²", "area")

    def used(lam):
        total = base
        for (f, d), (xs, es, dx, ratio) in zip(engines, segs):
            total += d * float(dx[ratio > lam].sum())
        return total

    taken = [np.zeros(len(s[2])) for s in segs]  # fraction of each segment consumed
    if used(0.0) <= area_budget:
        for t, s in zip(taken, segs):
            t[s[3] > 0] = 1.0
        lam = 0.0
    else:
        lo = 0.0
        hi = max(float(s[3].max()) for s in segs if len(s[3]))
        for _ in range(max_iter):
            if hi - lo <= 1e-15 * max(hi, 1e-300):
                break
            mid = 0.5 * (lo + hi)
            if used(mid) > area_budget:
                lo = mid
            else:
                hi = mid
        remaining = area_budget - used(hi)
        for t, s in zip(taken, segs):
            t[s[3] > hi] = 1.0
        # marginal segments: saving ratio in (lo, hi]
        marginal = sorted(((float(s[3][j]), k, j) for k, s in enumerate(segs)
                           for j in range(len(s[3])) if lo < s[3][j] <= hi),
                          key=lambda r: (-r[0], r[1], r[2]))
        lam = hi
        # segments with equal saving ratio share the leftover area proportionally
        groups = []
        for ratio, k, j in marginal:
            if groups and math.isclose(groups[-1][0], ratio, rel_tol=1e-12):
                groups[-1][1].append((k, j))
            else:
                groups.append((ratio, [(k, j)]))
        for ratio, members in groups:
            if remaining <= 0:
                break
            group_area = sum(engines[k][1] * segs[k][2][j] for k, j in members)
            frac = min(1.0, remaining / group_area)
            for k, j in members:
                taken[k][j] = frac
            remaining -= frac * group_area
            lam = ratio
    shares = []
    for (f, d), (xs, es, dx, ratio), t in zip(engines, segs, taken):
        a = xs[0] + float((dx * t).sum())
        e = f.energy_at(a)
        shares.append(EngineShare(d * a, d, e, a, d * e))
    total_area = sum(s.area for s in shares)
    return Allocation(tuple(shares), lam, sum(s.power for s in shares), total_area,
                      max(area_budget - total_area, 0.0))


# -- quantized allocation ----------------------------------------------------

@dataclass(frozen=True)
class UnitDesign:
    area: float  # mm² per unit
    power: float  # W per unit
    throughput: float  # op/s per unit
    label: str = ""

    def __post_init__(self):
        if not (self.area > 0 and self.power > 0 and self.throughput > 0):
            raise ValueError("unit area, power and throughput must be positive")


@dataclass(frozen=True)
class QuantizedResult:
    counts: tuple
    designs: tuple
    power: float
    area: float
    throughput: float
    mode: str  # "exact" or "heuristic"

    def to_dict(self) -> dict:
        return {"mode": self.mode, "power_w": self.power, "area_mm2": self.area,
                "throughput_gops": self.throughput / 1e9,
                "units": [{"label": d.label, "count": k, "area_mm2": d.area,
                           "power_w": d.power, "throughput_gops": d.throughput / 1e9}
                          for d, k in zip(self.designs, self.counts) if k]}


def _as_units(unit_designs):
    out = []
    for i, u in enumerate(unit_designs):
        if isinstance(u, UnitDesign):
            out.append(u)
        else:
            area, power, thr = u[:3]
            out.append(UnitDesign(float(area), float(power), float(thr),
                                  str(u[3]) if len(u) > 3 else f"u{i}"))
    return out


def quantized_allocation(unit_designs: Sequence, demand: float, c: Constraints,
                         max_enumeration: int = 1_000_000) -> QuantizedResult:
    """Integer unit counts meeting ``demand`` op/s at minimum power.

    Every unit runs at its design point.  Small instances are enumerated
    exhaustively.  Larger ones start from the best one- and two-design
    mixes and run a local search that trades units of one design for
    units of another while power keeps dropping.
    """
    units = _as_units(unit_designs)
    if not units:
        raise ValueError("no unit designs")
    if demand <= 0:
        raise ValueError("demand must be positive")
    area = np.array([u.area for u in units])
    power = np.array([u.power for u in units])
    thr = np.array([u.throughput for u in units])
    kmax = np.ceil(demand / thr * (1 - 1e-12)).astype(int)
    combos = math.prod(int(k) + 1 for k in kmax)
    if combos <= max_enumeration:
        counts, mode = _enumerate_counts(kmax, area, power, thr, demand, c), "exact"
    else:
        counts, mode = _greedy_counts(kmax, area, power, thr, demand, c), "heuristic"
    if counts is None:
        raise InfeasibleError("no unit combination meets demand within budgets", "demand")
    counts = tuple(int(k) for k in counts)
    k = np.array(counts)
    return QuantizedResult(counts, tuple(units), float(k @ power), float(k @ area),
                           float(k @ thr), mode)


def _feasible(k, area, power, thr, demand, c):
    a, p, t = k @ area, k @ power, k @ thr
    ok = (t >= demand * (1 - 1e-12)) & (a <= c.area_max * (1 + REL_SLACK)) \
        & (p <= c.power_max * (1 + REL_SLACK))
    if c.density_max is not None:
        ok &= p <= c.density_max_w_per_mm2 * a * (1 + REL_SLACK)
    return ok


def _enumerate_counts(kmax, area, power, thr, demand, c):
    shape = tuple(int(k) + 1 for k in kmax)
    grid = np.indices(shape).reshape(len(shape), -1).T
    ok = _feasible(grid, area, power, thr, demand, c)
    if not ok.any():
        return None
    cand = grid[ok]
    p = cand @ power
    a = cand @ area
    order = np.lexsort((a, p))
    return cand[order[0]]


def _pair_starts(kmax, area, power, thr, demand, c, keep=8):
    """Best feasible mixes of at most two designs.

    For each design pair (i, j) every count of i is tried and j tops up the
    remaining demand with the fewest units.
    """
    m = len(kmax)
    found = []
    for i in range(m):
        ki = np.arange(int(kmax[i]) + 1)
        for j in range(m):
            deficit = np.maximum(demand - ki * thr[i], 0.0)
            kj = np.ceil(deficit / thr[j] * (1 - 1e-12)).astype(int)
            k = np.zeros((len(ki), m), dtype=int)
            k[:, i] += ki
            k[:, j] += kj
            ok = _feasible(k, area, power, thr, demand, c)
            found.extend(k[ok])
    if not found:
        return []
    found = np.unique(np.array(found), axis=0)
    order = np.lexsort((found @ area, found @ power))
    return [found[o].copy() for o in order[:keep]]


def _greedy_counts(kmax, area, power, thr, demand, c):
    m = len(kmax)

    def ok(k):
        return bool(_feasible(k, area, power, thr, demand, c))

    def refill(k, j):
        deficit = demand - k @ thr
        if deficit > 0:
            k[j] += int(math.ceil(deficit / thr[j] * (1 - 1e-12)))
        return k

    def neighbours(k):
        for i in range(m):
            if k[i] == 0:
                continue
            dropped = k.copy()
            dropped[i] -= 1
            yield dropped
            for j in range(m):
                if j == i:
                    continue
                yield refill(dropped.copy(), j)
                whole = k.copy()
                whole[i] = 0
                yield refill(whole, j)
        for j in range(m):
            # add one unit of j, then shed units of others while demand holds
            grown = k.copy()
            grown[j] += 1
            for i in np.argsort(-power / thr):
                while i != j and grown[i] > 0 and (grown @ thr - thr[i]) >= demand * (1 - 1e-12):
                    grown[i] -= 1
            yield grown

    best = None
    for k in _pair_starts(kmax, area, power, thr, demand, c):
        while True:
            cur = k @ power
            improved = None
            for nb in neighbours(k):
                if ok(nb) and nb @ power < cur - 1e-15 * cur:
                    if improved is None or nb @ power < improved @ power:
                        improved = nb
            if improved is None:
                break
            k = improved
        if best is None or k @ power < best @ power:
            best = k
    return best


# -- memory + compute co-design ----------------------------------------------

@dataclass(frozen=True)
class SystemPoint:
    energy_per_op: float  # memory + compute, J/op
    total_area: float  # mm²
    memory: Any
    compute: DesignPoint
    compute_area: float

    @property
    def memory_energy(self) -> float:
        return self.memory.energy_per_op

    @property
    def compute_energy(self) -> float:
        return self.compute.energy_per_op

    @property
    def compute_share(self) -> float:
        return self.compute_energy / self.energy_per_op

    @property
    def memory_share(self) -> float:
        return self.memory_energy / self.energy_per_op

    @property
    def meta(self):
        return (tuple(getattr(self.memory, "meta", ())), self.compute.meta.label)


@dataclass(frozen=True)
class CodesignResult:
    curve: ParetoCurve  # system Pareto curve, x = total_area
    matched: tuple  # (memory point, marginal-cost-matched compute point) per memory point
    cloud: tuple = ()  # every (memory, compute) pairing, when requested

    def to_csv(self) -> str:
        return system_curve_to_csv(self.curve)


def _compose(mem, comp, throughput):
    comp_area = throughput * comp.area_per_throughput
    return SystemPoint(mem.energy_per_op + comp.energy_per_op, mem.area + comp_area,
                       mem, comp, comp_area)


def _local_price(mem_hull: ConvexFrontier, area: float) -> float:
    """Power-free marginal cost -dE/dA of the memory hull at ``area`` (J/op per mm²)."""
    xs, es = mem_hull.xs, mem_hull.energies
    if len(xs) < 2:
        return 0.0
    slopes = np.diff(es) / np.diff(xs)
    j = int(np.searchsorted(xs, area, side="right")) - 1
    if j <= 0:
        return float(-slopes[0])
    if j >= len(slopes):
        return float(-slopes[-1]) if area <= xs[-1] else 0.0
    if area == xs[j]:
        return float(-0.5 * (slopes[j - 1] + slopes[j]))
    return float(-slopes[j])


def codesign(memory_frontier: ParetoCurve, compute_frontier: ConvexFrontier | ParetoCurve,
             throughput: float, include_cloud: bool = False) -> CodesignResult:
    """System frontier of a memory hierarchy plus a compute engine at ``throughput`` op/s.

    Each memory point is paired with compute designs scaled to the target
    throughput; the system Pareto curve is taken over all pairings.  The
    compute design whose marginal cost matches the memory frontier's local
    marginal cost is reported per memory point in ``matched``.
    """
    mem_pts = list(memory_frontier)
    comp_pts = list(compute_frontier.vertices if isinstance(compute_frontier, ConvexFrontier)
                    else compute_frontier.points)
    if not mem_pts or not comp_pts:
        raise InfeasibleError("co-design needs non-empty memory and compute frontiers")
    if throughput <= 0:
        raise ValueError("throughput must be positive")
    cloud = [_compose(m, cp, throughput) for m in mem_pts for cp in comp_pts]
    curve = pareto_filter(cloud, x_attr="total_area")

    mem_hull = convex_frontier(pareto_filter(mem_pts, x_attr="area"))
    ce = np.array([cp.energy_per_op for cp in comp_pts])
    ca = np.array([cp.area_per_throughput for cp in comp_pts]) * throughput
    matched = []
    for m in mem_pts:
        lam = _local_price(mem_hull, m.area)
        j = int(np.argmin(ce + lam * ca))
        matched.append((m, comp_pts[j]))
    return CodesignResult(curve, tuple(matched), tuple(cloud) if include_cloud else ())


def system_curve_to_csv(curve: ParetoCurve) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SYSTEM_CSV_HEADER)
    for p in curve:
        w.writerow([f"{p.total_area:.6g}", f"{p.energy_per_op * 1e12:.6g}",
                    f"{p.memory.area:.6g}", f"{p.compute_share:.6g}", f"{p.memory_share:.6g}"])
    return buf.getvalue()
