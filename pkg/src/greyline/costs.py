"""Branch-distance and storage-write cost metrics, plus path hashing.

Each branch site exposes two metrics: the cost of making the condition
false and the cost of making it true. Exactly one of the two is zero
for any operand pair, and the nonzero one is the minimal change to the
left operand that flips the condition. Storage writes expose a single
metric: the absolute distance between the written address and a probe
address, in unbounded arithmetic.

A cost vector maps (site, direction) to the minimum cost observed over
one execution; a site that was never reached is simply absent.
"""

from __future__ import annotations

# Metric directions.
TO_FALSE = 0
TO_TRUE = 1
WRITE = 2

# (site, direction); hashable key of one cost metric.
CostSiteId = tuple[int, int]

# CostSiteId -> minimum observed non-negative cost.
CostVector = dict[CostSiteId, int]


def branch_costs(op: str, l: int, r: int) -> tuple[int, int]:
    """Return (cost_to_false, cost_to_true) for the comparison `l op r`.

    One of the two is always zero (the side matching the current truth
    value). Operands are plain Python ints, so the distances never
    overflow.
    """
    if op == "==":
        return (1, 0) if l == r else (0, abs(l - r))
    if op == "!=":
        return (0, 1) if l == r else (abs(l - r), 0)
    if op == "<":
        return (r - l, 0) if l < r else (0, l - r + 1)
    if op == "<=":
        return (r - l + 1, 0) if l <= r else (0, l - r)
    if op == ">":
        return (0, r - l + 1) if l <= r else (l - r, 0)
    if op == ">=":
        return (0, r - l) if l < r else (l - r + 1, 0)
    raise ValueError(f"unknown comparison operator {op!r}")


def storage_cost(lhs_addr: int, probe_addr: int) -> int:
    """Distance between a written storage address and the probe address."""
    return abs(lhs_addr - probe_addr)


def record_cost(vec: CostVector, key: CostSiteId, cost: int) -> None:
    """Fold a cost into a vector, keeping the per-site minimum."""
    prev = vec.get(key)
    if prev is None or cost < prev:
        vec[key] = cost


FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
_MASK = (1 << 64) - 1

# Trace event tags.
EV_BRANCH = 1
EV_OUTCOME = 2


def path_id(trace: list[tuple[int, ...]]) -> int:
    """FNV-1a hash of a branch trace.

    The trace is a flat stream of (EV_BRANCH, site, taken) and
    (EV_OUTCOME, kind, site) tuples covering the whole call sequence.
    The empty trace hashes to the FNV offset basis. 64-bit collisions
    are possible but vanishingly rare for corpus-sized path sets.
    """
    h = FNV_OFFSET
    for event in trace:
        for x in event:
            h = ((h ^ (x & _MASK)) * FNV_PRIME) & _MASK
    return h
