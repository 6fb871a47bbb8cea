"""From the compute frontier to a chip under area, power and density budgets.

Run: python3 demos/budget_walkthrough.py
"""
from darkmem.design_space import convex_frontier, default_fmadd_spec, generate_design_space, pareto_filter
from darkmem.energy_model import PJ
from darkmem.memory_hierarchy import memory_pareto, optimal_level_count
from darkmem.optimizer import Constraints, codesign, max_throughput
from darkmem.workloads import GemmProblem


def main():
    designs = generate_design_space(default_fmadd_spec())
    curve = pareto_filter(designs)
    hull = convex_frontier(curve)
    print(f"{len(designs)} fmadd designs, {len(curve)} on the frontier, {len(hull.vertices)} on the hull")

    c = Constraints(200, 60, 50)
    for mode in ("discrete", "mixed"):
        r = max_throughput(curve, c, mode)
        print(f"{mode:>8}: {r.throughput / 1e9:7.1f} Gop/s, binding {r.binding}, "
              f"{r.point.energy_per_op / PJ:.2f} pJ/op")

    thr = 256e9
    mem = memory_pareto(GemmProblem(4096), thr)
    trend = optimal_level_count(mem)
    print(f"memory frontier: {len(mem)} points, level count vs area rho = {trend.spearman:.3f}")
    ranges = trend.ranges()
    for lo, hi, levels in ranges[:2] + ranges[-2:]:
        print(f"  {lo:9.3f} .. {hi:9.3f} mm2 -> {levels} level(s)")

    sys_curve = codesign(mem, hull, thr).curve
    print(f"system frontier at {thr / 1e9:.0f} Gop/s: {len(sys_curve)} points")
    for p in list(sys_curve)[:: max(1, len(sys_curve) // 6)]:
        print(f"  {p.total_area:9.2f} mm2  {p.energy_per_op / PJ:8.2f} pJ/op  "
              f"compute share {p.compute_share:.2f}")


if __name__ == "__main__":
    main()
