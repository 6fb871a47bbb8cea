import math

import pytest

from darkmem.workloads import (
    BlockingPlan,
    GemmProblem,
    MissCurveWorkload,
    arithmetic_intensity,
    blocked_crossing_traffic,
    gemm_block_size,
    gemm_miss_curve,
    gemm_naive_traffic,
    gemm_traffic,
    traffic_from_miss_curve,
)

from oracles import simulate_blocked_gemm, simulate_naive_gemm


@pytest.mark.parametrize("cap,b", [(3, 1), (0, 1), (64, 4), (12288, 64), (12287, 63)])
def test_block_size(cap, b):
    assert gemm_block_size(cap) == b


def single(n, b):
    return gemm_traffic(GemmProblem(n), BlockingPlan((b,), (3 * b * b,)))


def test_single_level_example():
    assert single(64, 8).dram_accesses == 73_728


def test_whole_problem_fits():
    assert single(64, 64).dram_accesses == 16_384 == 4 * 64 ** 2


def test_two_level_example():
    t = gemm_traffic(GemmProblem(256), BlockingPlan((4, 64), (48, 12288)))
    assert t.level_accesses[1] == 8_519_680
    assert t.dram_accesses == 655_360


def test_blocks_larger_than_n_are_clamped():
    assert single(16, 32).dram_accesses == 4 * 16 ** 2


@pytest.mark.parametrize("n,b", [(n, b) for n in (4, 8, 12, 16, 24, 32)
                                 for b in (1, 2, 3, 4, 5, 8) if b <= n])
def test_loop_nest_oracle(n, b):
    assert single(n, b).dram_accesses == simulate_blocked_gemm(n, b)


@pytest.mark.parametrize("n,inner", [(16, 2), (24, 4), (32, 8)])
def test_each_crossing_matches_single_level_oracle(n, inner):
    # L1 in a two-level plan is charged like a single-level GEMM with the RF block
    t = gemm_traffic(GemmProblem(n), BlockingPlan((inner, n), (3 * inner ** 2, 3 * n * n)))
    assert t.level_accesses[1] == simulate_blocked_gemm(n, inner)
    assert t.dram_accesses == simulate_blocked_gemm(n, n)


def test_compulsory_switch():
    plan = BlockingPlan((2, 8), (12, 192))
    on = gemm_traffic(GemmProblem(32), plan, True)
    off = gemm_traffic(GemmProblem(32), plan, False)
    assert on.dram_accesses == off.dram_accesses
    assert on.level_accesses[1] - off.level_accesses[1] == 2 * 32 ** 2


def test_naive_examples():
    assert gemm_naive_traffic(GemmProblem(1)).dram_accesses == 3
    assert gemm_naive_traffic(GemmProblem(64)).dram_accesses == 270_336
    for n in (1, 3, 8, 17):
        assert gemm_naive_traffic(GemmProblem(n)).dram_accesses == simulate_naive_gemm(n)


@pytest.mark.parametrize("b", [4, 16, 64])
def test_intensity_ratio_approaches_half_block(b):
    n = 2048
    ratio = arithmetic_intensity(single(n, b)) / arithmetic_intensity(gemm_naive_traffic(GemmProblem(n)))
    assert ratio == pytest.approx(b / 2, rel=0.05)


def test_intensity_values():
    naive = arithmetic_intensity(gemm_naive_traffic(GemmProblem(4096)))
    assert naive == pytest.approx(1.0, rel=1e-3)
    assert arithmetic_intensity(single(4096, 32)) == pytest.approx(16, rel=0.02)


def test_zero_dram_is_infinite_intensity():
    w = MissCurveWorkload(((0, 1.0), (100, 0.0)))
    t = traffic_from_miss_curve(w, [100])
    assert arithmetic_intensity(t) == math.inf


def test_miss_curve_lookup():
    w = MissCurveWorkload(((0, 1.0), (64, 0.5), (1024, 0.1)))
    assert w.at(64) == 0.5 and w.at(1024) == 0.1
    assert w.at(500) == 0.5
    empty = traffic_from_miss_curve(w, [], total_ops=10)
    assert empty.dram_accesses == 10.0
    t = traffic_from_miss_curve(w, [64, 1024], total_ops=2)
    assert t.level_accesses == (2.0, 1.0)
    assert t.dram_accesses == pytest.approx(0.2)


def test_miss_curve_validation():
    with pytest.raises(ValueError):
        MissCurveWorkload(((0, 0.1), (10, 0.2)))
    with pytest.raises(ValueError):
        MissCurveWorkload(((10, 0.1), (10, 0.05)))


def test_gemm_miss_curve_consistent_with_traffic():
    prob = GemmProblem(512)
    caps = (64, 4096, 262144)
    curve = gemm_miss_curve(prob, caps)
    plan = BlockingPlan.from_capacities(caps)
    direct = gemm_traffic(prob, plan)
    via_curve = traffic_from_miss_curve(curve, caps, total_ops=prob.total_ops)
    assert via_curve.dram_accesses == pytest.approx(direct.dram_accesses, rel=1e-12)
    for a, b in zip(via_curve.level_accesses, direct.level_accesses):
        assert a == pytest.approx(b, rel=1e-12)


def test_blocking_plan_validation():
    with pytest.raises(ValueError):
        BlockingPlan((8,), (100,))  # 3·64 > 100
    with pytest.raises(ValueError):
        BlockingPlan((8, 4), (192, 192))


def test_traffic_csv_header():
    text = single(64, 8).to_csv()
    assert text.splitlines()[0] == "level,capacity_words,accesses,accesses_per_op"
    assert text.splitlines()[-1].startswith("DRAM,,73728")


def test_crossing_traffic_partial_block_bound():
    for n in range(5, 60, 7):
        for b in (2, 3, 4, 6):
            exact = 2 * n ** 3 / b + 2 * n ** 2
            got = blocked_crossing_traffic(n, b)
            assert exact <= got < exact + 2 * n ** 2
