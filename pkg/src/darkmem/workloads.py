"""
Workload models that turn an application into per-level memory traffic.

Two models are provided:

* GEMM with recursive blocking.  A level holding a b x b block of each of
  A, B and C cuts the traffic it requests from the level below to
  ``2 * ceil(n / b) * n**2 + 2 * n**2`` words, which is ``2n³/b + 2n²``
  when b divides n.
* A generic miss-ratio curve: accesses per op that escape a memory of a
  given capacity, looked up with conservative step interpolation.

Traffic is reported per on-chip level as the words that level serves to
the level inside it.  Level 0 is the register file; its entry is the
traffic it would see with no on-chip reuse (block size 1).  The three
register operand accesses per op are charged separately by the memory
hierarchy cost model.
"""

from __future__ import annotations

import bisect
import csv
import io
import math
from dataclasses import dataclass
from typing import Sequence

from .energy_model import PRECISION_BITS

TRAFFIC_CSV_HEADER = ("level", "capacity_words", "accesses", "accesses_per_op")


@dataclass(frozen=True)
class GemmProblem:
    """Square n x n GEMM; one op is one fused multiply-add (n³ in total)."""

    n: int
    precision: str = "fp64"

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError("GEMM dimension must be an integer >= 1")
        if self.precision not in PRECISION_BITS:
            raise ValueError(f"unknown precision {self.precision!r}")

    @property
    def total_ops(self) -> int:
        return self.n ** 3

    @property
    def total_flops(self) -> int:
        return 2 * self.n ** 3


@dataclass(frozen=True)
class BlockingPlan:
    """Block size held at each on-chip level, innermost (register file) first."""

    blocks: tuple
    capacities: tuple

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(int(b) for b in self.blocks))
        object.__setattr__(self, "capacities", tuple(self.capacities))
        if not self.blocks:
            raise ValueError("a blocking plan needs at least one level")
        if len(self.blocks) != len(self.capacities):
            raise ValueError("one capacity per block is required")
        for b, cap in zip(self.blocks, self.capacities):
            if b < 1 or 3 * b * b > cap:
                raise ValueError(f"block {b} does not fit three times in {cap} words")
        if any(b2 < b1 for b1, b2 in zip(self.blocks, self.blocks[1:])):
            raise ValueError("block sizes must not shrink outward")

    @classmethod
    def from_capacities(cls, capacities: Sequence[int]) -> "BlockingPlan":
        return cls(tuple(gemm_block_size(c) for c in capacities), tuple(capacities))


@dataclass(frozen=True)
class TrafficProfile:
    """Words moved at each on-chip level plus DRAM for ``total_ops`` ops."""

    level_capacities: tuple
    level_accesses: tuple
    dram_accesses: float
    total_ops: float

    def __post_init__(self):
        object.__setattr__(self, "level_capacities", tuple(self.level_capacities))
        object.__setattr__(self, "level_accesses", tuple(self.level_accesses))
        if len(self.level_capacities) != len(self.level_accesses):
            raise ValueError("one access count per level is required")
        if any(x < 0 for x in self.level_accesses) or self.dram_accesses < 0:
            raise ValueError("access counts must be non-negative")
        if self.total_ops <= 0:
            raise ValueError("total_ops must be positive")

    @property
    def n_levels(self) -> int:
        return len(self.level_capacities)

    def per_op(self) -> tuple:
        """(on-chip accesses per op, DRAM accesses per op)."""
        return (tuple(x / self.total_ops for x in self.level_accesses),
                self.dram_accesses / self.total_ops)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRAFFIC_CSV_HEADER)
        for i, (cap, acc) in enumerate(zip(self.level_capacities, self.level_accesses)):
            w.writerow([f"L{i}", cap, f"{acc:.6g}", f"{acc / self.total_ops:.6g}"])
        w.writerow(["DRAM", "", f"{self.dram_accesses:.6g}",
                    f"{self.dram_accesses / self.total_ops:.6g}"])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {"levels": [{"capacity_words": c, "accesses": a}
                           for c, a in zip(self.level_capacities, self.level_accesses)],
                "dram_accesses": self.dram_accesses,
                "total_ops": self.total_ops}


@dataclass(frozen=True)
class MissCurveWorkload:
    """Accesses per op escaping a memory of each tabulated capacity.

    ``points`` is a sequence of ``(capacity_words, accesses_per_op)`` with
    capacities strictly increasing and values non-increasing.
    """

    points: tuple
    ops_label: str = "op"
    precision: str = "fp64"

    def __post_init__(self):
        pts = tuple((float(c), float(v)) for c, v in self.points)
        object.__setattr__(self, "points", pts)
        if not pts:
            raise ValueError("miss curve needs at least one point")
        if self.precision not in PRECISION_BITS:
            raise ValueError(f"unknown precision {self.precision!r}")
        caps = [c for c, _ in pts]
        vals = [v for _, v in pts]
        if any(c2 <= c1 for c1, c2 in zip(caps, caps[1:])):
            raise ValueError("miss-curve capacities must be strictly increasing")
        if any(v < 0 for v in vals):
            raise ValueError("miss-curve values must be non-negative")
        if any(v2 > v1 for v1, v2 in zip(vals, vals[1:])):
            raise ValueError("miss-curve values must be non-increasing in capacity")

    def at(self, capacity: float) -> float:
        """Value at the largest tabulated capacity <= ``capacity``.

        Capacities below the first tabulated point get the first value.
        """
        caps = [c for c, _ in self.points]
        i = bisect.bisect_right(caps, capacity) - 1
        return self.points[max(i, 0)][1]


def gemm_block_size(capacity: float) -> int:
    """Largest b with three b x b blocks fitting in ``capacity`` words (at least 1)."""
    if capacity < 0:
        raise ValueError("capacity must be non-negative")
    b = math.isqrt(int(capacity // 3))
    return max(b, 1)


def blocked_crossing_traffic(n: int, block: int, compulsory: bool = True) -> int:
    """Words requested from the next level by a level holding ``block`` x ``block`` tiles.

    A and B tiles are refetched ceil(n/b) times each; C is read and written
    once (the compulsory 2n² term).
    """
    b = min(max(int(block), 1), n)
    traffic = 2 * (-(-n // b)) * n * n
    if compulsory:
        traffic += 2 * n * n
    return traffic


def gemm_traffic(problem: GemmProblem, plan: BlockingPlan,
                 compulsory_per_level: bool = True) -> TrafficProfile:
    """Per-level traffic of a recursively blocked GEMM.

    Each level crossing is charged like a single-level blocked GEMM whose
    block is the one held by the inner level.  With
    ``compulsory_per_level=False`` the 2n² term is only applied at DRAM.
    """
    n = problem.n
    blocks = [min(b, n) for b in plan.blocks]
    inner = [1] + blocks[:-1]
    level_acc = tuple(blocked_crossing_traffic(n, b, compulsory_per_level) for b in inner)
    dram = blocked_crossing_traffic(n, blocks[-1], True)
    return TrafficProfile(plan.capacities, level_acc, dram, problem.total_ops)


def gemm_naive_traffic(problem: GemmProblem) -> TrafficProfile:
    """Unblocked GEMM: B reread n times, A read once, C written once."""
    n = problem.n
    return TrafficProfile((), (), n ** 3 + 2 * n * n, problem.total_ops)


def gemm_miss_curve(problem: GemmProblem, capacities: Sequence[int],
                    compulsory_per_level: bool = True) -> MissCurveWorkload:
    """Miss curve equivalent to :func:`gemm_traffic` at the given capacities."""
    n, ops = problem.n, problem.total_ops
    pts = [(0, blocked_crossing_traffic(n, 1, compulsory_per_level) / ops)]
    for cap in sorted(set(capacities)):
        b = gemm_block_size(cap)
        pts.append((cap, blocked_crossing_traffic(n, b, compulsory_per_level) / ops))
    # collapse non-increasing violations from equal block sizes
    cleaned = [pts[0]]
    for c, v in pts[1:]:
        cleaned.append((c, min(v, cleaned[-1][1])))
    return MissCurveWorkload(tuple(cleaned), ops_label="fmadd", precision=problem.precision)


def traffic_from_miss_curve(workload: MissCurveWorkload, capacities: Sequence[float],
                            total_ops: float = 1.0) -> TrafficProfile:
    """Traffic of a hierarchy with the given on-chip capacities (innermost first).

    Level i serves what escapes level i-1; level 0 serves the no-reuse
    traffic (the curve at capacity 0); DRAM serves what escapes the
    outermost level.
    """
    caps = list(capacities)
    if any(c2 <= c1 for c1, c2 in zip(caps, caps[1:])):
        raise ValueError("capacities must be strictly increasing")
    below = [0.0] + caps[:-1] if caps else []
    level_acc = tuple(workload.at(c) * total_ops for c in below)
    dram = workload.at(caps[-1] if caps else 0.0) * total_ops
    return TrafficProfile(tuple(caps), level_acc, dram, total_ops)


def arithmetic_intensity(traffic: TrafficProfile) -> float:
    """Ops per DRAM access (``inf`` when nothing reaches DRAM)."""
    if traffic.dram_accesses == 0:
        return math.inf
    return traffic.total_ops / traffic.dram_accesses
