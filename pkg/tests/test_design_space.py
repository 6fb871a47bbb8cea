import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from darkmem.design_space import (
    DesignMeta,
    DesignPoint,
    RawDesign3D,
    convex_frontier,
    default_fmadd_spec,
    designs_from_csv,
    designs_to_csv,
    evaluate_design,
    generate_design_space,
    pareto_filter,
    pareto_filter_3d,
    reduce_to_metric_space,
    scale_to_throughput,
)
from darkmem.energy_model import DEFAULT_PROFILE, PJ

from oracles import lower_hull_brute, pareto3d_brute, pareto_brute

SPEC = default_fmadd_spec()


def pt(e, x, label=""):
    return DesignPoint(float(e), float(x), DesignMeta(label=label))


def test_identity_knobs():
    p = evaluate_design(SPEC, DEFAULT_PROFILE, 1, DEFAULT_PROFILE.v_nom, 1.0)
    assert p.energy_per_op == pytest.approx(25 * PJ)
    expected = SPEC.base_area * (SPEC.base_delay + SPEC.pipe_register_delay_overhead)
    assert p.area_per_throughput == pytest.approx(expected, rel=1e-12)


def test_pipeline_energy_ratio():
    p1 = evaluate_design(SPEC, DEFAULT_PROFILE, 1, 0.8, 1.0)
    p2 = evaluate_design(SPEC, DEFAULT_PROFILE, 2, 0.8, 1.0)
    assert p2.energy_per_op / p1.energy_per_op == pytest.approx(1 + SPEC.pipe_register_energy_fraction)


def test_default_design_space_spans():
    designs = generate_design_space(SPEC)
    assert len(designs) == 7 * 9 * 5
    curve = pareto_filter(designs)
    e, x = curve.energies, curve.xs
    assert e.max() / e.min() >= 5
    density = e / x
    assert density.max() / density.min() >= 5


def test_generation_is_deterministic():
    a = designs_to_csv(generate_design_space(SPEC))
    b = designs_to_csv(generate_design_space(SPEC))
    assert a == b


def test_pareto_trivial_examples():
    both = pareto_filter([pt(2, 1, "a"), pt(1, 2, "b")])
    assert len(both) == 2
    one = pareto_filter([pt(1, 2, "a"), pt(2, 2, "b")])
    assert [p.meta.label for p in one] == ["a"]


def test_pareto_duplicate_collapses_to_smallest_meta():
    curve = pareto_filter([pt(1, 1, "z"), pt(1, 1, "a")])
    assert [p.meta.label for p in curve] == ["a"]


def _random_points(rng, n, integer=False):
    if integer:
        return [pt(rng.randint(1, 60), rng.randint(1, 60), f"p{i}") for i in range(n)]
    return [pt(rng.uniform(0.1, 10), rng.uniform(0.1, 10), f"p{i}") for i in range(n)]


def test_pareto_matches_brute_force_1000_points():
    rng = random.Random(7)
    pts = _random_points(rng, 1000)
    curve = pareto_filter(pts)
    got = {(p.energy_per_op, p.area_per_throughput) for p in curve}
    assert got == pareto_brute((p.energy_per_op, p.area_per_throughput) for p in pts)


@settings(max_examples=300, deadline=None)
@given(st.lists(st.tuples(st.integers(1, 20), st.integers(1, 20)), min_size=1, max_size=40),
       st.randoms(use_true_random=False))
def test_pareto_properties(coords, rnd):
    pts = [pt(e, x, f"p{i}") for i, (e, x) in enumerate(coords)]
    curve = pareto_filter(pts)
    pairs = [(p.energy_per_op, p.area_per_throughput) for p in curve]
    # brute-force equivalence, no duplicates
    assert set(pairs) == pareto_brute((p.energy_per_op, p.area_per_throughput) for p in pts)
    assert len(pairs) == len(set(pairs))
    # sorted by x ascending, energy strictly descending
    assert all(x1 < x2 and e1 > e2 for (e1, x1), (e2, x2) in zip(pairs, pairs[1:]))
    # idempotence
    assert pareto_filter(curve.points).points == curve.points
    # permutation invariance, including which duplicate survives
    shuffled = list(pts)
    rnd.shuffle(shuffled)
    assert pareto_filter(shuffled).points == curve.points


def test_pareto_3d_examples():
    d = RawDesign3D(1, 1, 1, "only")
    assert pareto_filter_3d([d]) == [d]
    slow = RawDesign3D(2, 3, 1, "slow")
    fast = RawDesign3D(2, 3, 2, "fast")
    assert pareto_filter_3d([slow, fast]) == [fast]


def test_pareto_3d_matches_brute_force_500():
    rng = random.Random(3)
    designs = [RawDesign3D(rng.randint(1, 30), rng.randint(1, 30), rng.randint(1, 30), i)
               for i in range(500)]
    assert pareto_filter_3d(designs) == pareto3d_brute(designs)


def test_reduce_to_metric_space_example():
    p = reduce_to_metric_space(RawDesign3D(2.0, 4.0, 2e9, "x"))
    assert p.energy_per_op == pytest.approx(2e-9)
    assert p.area_per_throughput * 1e9 == pytest.approx(1.0)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.01, 100), st.floats(0.01, 100), st.floats(1e6, 1e12), st.floats(1e-3, 1e3))
def test_reduce_invariant_under_scaling(area, power, perf, k):
    d = RawDesign3D(area, power, perf, "d")
    a, b = reduce_to_metric_space(d), reduce_to_metric_space(d.scaled(k))
    assert b.energy_per_op == pytest.approx(a.energy_per_op, rel=1e-12)
    assert b.area_per_throughput == pytest.approx(a.area_per_throughput, rel=1e-12)


def test_budget_tangent_point_density():
    # a point using 200 mm² and 60 W at once sits on e/a = 0.3 W/mm²
    p = pt(60 / 1e12, 200 / 1e12)
    area, power = scale_to_throughput(p, 1e12)
    assert area == pytest.approx(200) and power == pytest.approx(60)
    assert p.power_density == pytest.approx(0.3)


def test_scale_to_throughput():
    p = pt(100 * PJ, 1e-9)
    assert scale_to_throughput(p, 0) == (0, 0)
    assert scale_to_throughput(p, 256e9)[1] == pytest.approx(25.6)
    a1, p1 = scale_to_throughput(p, 3e9)
    a2, p2 = scale_to_throughput(p, 6e9)
    assert (a2, p2) == pytest.approx((2 * a1, 2 * p1))


def test_hull_small_cases():
    two = pareto_filter([pt(2, 1), pt(1, 2)])
    assert len(convex_frontier(two)) == 2
    collinear = pareto_filter([pt(3, 1, "a"), pt(2, 2, "b"), pt(1, 3, "c")])
    assert [p.meta.label for p in convex_frontier(collinear).vertices] == ["a", "c"]


@settings(max_examples=300, deadline=None)
@given(st.lists(st.tuples(st.integers(1, 500), st.integers(1, 500)), min_size=1, max_size=30))
def test_hull_matches_oracle(coords):
    curve = pareto_filter([pt(e, x) for e, x in coords])
    hull = convex_frontier(curve)
    got = [(p.area_per_throughput, p.energy_per_op) for p in hull.vertices]
    assert got == lower_hull_brute([(p.area_per_throughput, p.energy_per_op) for p in curve])
    slopes = np.array(hull.slopes)
    assert np.all(slopes < 0)
    assert np.all(np.diff(slopes) > 0)
    # every Pareto point lies on or above the hull
    for p in curve:
        assert p.energy_per_op >= hull.energy_at(p.area_per_throughput) - 1e-9


def test_hull_energy_at():
    hull = convex_frontier(pareto_filter([pt(4, 1), pt(1, 4)]))
    assert hull.energy_at(0.5) == float("inf")
    assert hull.energy_at(2.5) == pytest.approx(2.5)
    assert hull.energy_at(100) == pytest.approx(1.0)


def test_csv_round_trip():
    designs = generate_design_space(SPEC)[:20]
    again = designs_from_csv(designs_to_csv(designs))
    assert [p.meta.label for p in again] == [p.meta.label for p in designs]
    for a, b in zip(again, designs):
        assert a.energy_per_op == pytest.approx(b.energy_per_op, rel=1e-5)


def test_spec_validation():
    with pytest.raises(ValueError):
        default_fmadd_spec(depth_grid=(0, 1))
    with pytest.raises(ValueError):
        default_fmadd_spec(base_area=-1)
