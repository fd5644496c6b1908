"""Two-point input learning.

Given two executions whose inputs differ in exactly one integer slot,
pick a cost metric that is positive and unequal in both cost vectors,
fit the straight line through the two (parameter, cost) samples, and
propose the parameter value where the line crosses zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from random import Random

from greyline.costs import CostSiteId, CostVector
from greyline.interp import InputVector

# (call_index, arg_index) naming one integer slot of an InputVector.
ParamKey = tuple[int, int]


@dataclass(frozen=True)
class LearnedInput:
    input: InputVector
    key: ParamKey
    metric: CostSiteId
    value: int


def diff_single_param(a: InputVector, b: InputVector) -> ParamKey | None:
    """The one slot where a and b differ, or None.

    Returns None when the shapes differ (different call count, function
    indices, or arg counts) or when zero or more than one slot differs;
    structural mutants are excluded from learning this way.
    """
    if a.shape() != b.shape():
        return None
    found = None
    for key in a.slots():
        if a.get(key) != b.get(key):
            if found is not None:
                return None
            found = key
    return found


def select_metric(
    cost0: CostVector,
    cost1: CostVector,
    rng: Random,
    strategy: str = "random",
    observed_directions: set[tuple[int, int]] | None = None,
) -> CostSiteId | None:
    """Pick a metric usable for learning, or None.

    A metric qualifies when it appears in both vectors with two
    positive, unequal costs. The default strategy picks uniformly;
    "rarest-site" prefers metrics whose zero side (the branch direction
    the learner is trying to reach) has never been observed.
    """
    candidates = sorted(
        key for key, c0 in cost0.items()
        if c0 > 0 and (c1 := cost1.get(key)) is not None and c1 > 0 and c0 != c1
    )
    if not candidates:
        return None
    if strategy == "rarest-site" and observed_directions:
        # metric (site, TO_TRUE) zeroes when the branch goes true, i.e.
        # when (site, taken=1) shows up in a trace; prefer unseen ones
        fresh = [k for k in candidates
                 if k[1] in (0, 1) and (k[0], k[1]) not in observed_directions]
        if fresh:
            candidates = fresh
    return candidates[rng.randrange(len(candidates))]


def fit_and_solve(i0: int, c0: int, i1: int, c1: int, width: int = 64) -> int | None:
    """Zero-crossing of the line through (i0, c0) and (i1, c1).

    Solved exactly in integer arithmetic, rounded half away from zero,
    and clamped to the signed range of `width`. Returns None for a flat
    line (c0 == c1).
    """
    if i0 == i1 or c0 == c1:
        return None
    # i* = i0 - c0 / m  with  m = (c1 - c0) / (i1 - i0)
    num = i0 * (c1 - c0) - c0 * (i1 - i0)
    den = c1 - c0
    if den < 0:
        num, den = -num, -den
    if num >= 0:
        value = (2 * num + den) // (2 * den)
    else:
        value = -((2 * -num + den) // (2 * den))
    hi = (1 << (width - 1)) - 1
    lo = -(1 << (width - 1))
    return max(lo, min(hi, value))


def learn(
    input0: InputVector,
    cost0: CostVector,
    input1: InputVector,
    cost1: CostVector,
    rng: Random,
    width: int = 64,
    strategy: str = "random",
    observed_directions: set[tuple[int, int]] | None = None,
    tried: set[tuple[ParamKey, CostSiteId, int]] | None = None,
) -> LearnedInput | None:
    """Compose diff/select/fit into a learned input, or None.

    `tried` suppresses values already proposed for the same
    (slot, metric) during the current energy loop, so a failed
    minimization is not re-proposed until a fresh input is picked.
    """
    key = diff_single_param(input0, input1)
    if key is None:
        return None
    metric = select_metric(cost0, cost1, rng, strategy, observed_directions)
    if metric is None:
        return None
    value = fit_and_solve(input0.get(key), cost0[metric],
                          input1.get(key), cost1[metric], width)
    if value is None:
        return None
    if value == input0.get(key) or value == input1.get(key):
        return None
    if tried is not None:
        mark = (key, metric, value)
        if mark in tried:
            return None
        tried.add(mark)
    return LearnedInput(input0.replace(key, value), key, metric, value)
