"""Three-element range sets and the combination rules for failure rates.

Rates are expressed in failures per million copies (fpmc). Every rate is
carried as a {low, best, high} set; the certainty weights attached to the
three elements are the fixed global constants 0.1/0.8/0.1 and are never
per-instance data.

Random failure rates add: the combined best estimate is the sum of the
best estimates, and only the single largest deviation toward each extreme
widens the combined set (not interval arithmetic). Wearout rates are
dominated by their maximum, element-wise, because the part is replaced at
the first wearout. A mixed population combines the wearout group into one
extra element of the random sum.

``combine_random`` sums with ``math.fsum`` so that the result depends only
on the multiset of inputs, not their order. This matters downstream: the
all-random scenario and every exactly-one-wearout scenario of an uncertain
mode group combine the same multiset of estimates, and the coincidence of
their results must survive float arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .errors import EmptyInput, NonPositiveFactor

# Certainty weights for the (low, best, high) elements. Global constants.
WEIGHT_LOW = 0.1
WEIGHT_BEST = 0.8
WEIGHT_HIGH = 0.1


@dataclass(frozen=True)
class RangeEstimate:
    """A {low, best, high} failure-rate set in fpmc, 0 <= low <= best <= high."""

    low: float
    best: float
    high: float

    def __post_init__(self):
        if not (0.0 <= self.low <= self.best <= self.high):
            raise ValueError(
                f"range set out of order: low={self.low} best={self.best} high={self.high}"
            )

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.low, self.best, self.high)


ZERO_RATE = RangeEstimate(0.0, 0.0, 0.0)


class ModeType(str, Enum):
    RANDOM = "random"
    WEAROUT = "wearout"
    UNCERTAIN = "uncertain"


class Severity(str, Enum):
    SHUTDOWN = "shutdown"
    DEGRADE = "degrade"


@dataclass(frozen=True)
class FailureMode:
    """A single failure mode with its mode-type probability split and rate.

    ``p_wearout`` is the probability that the mode is a wearout failure;
    the random probability is always the complement and is never stored
    independently. A certain mode has p_wearout exactly 0 or 1.
    """

    id: str
    label: str
    mode_type: ModeType
    p_wearout: float
    rate: RangeEstimate
    severity: Severity = Severity.DEGRADE
    evidence: tuple[str, ...] = ()

    def __post_init__(self):
        p = self.p_wearout
        if not 0.0 <= p <= 1.0 or math.isnan(p):
            raise ValueError(f"mode {self.id}: p_wearout {p} outside [0,1]")
        expected = {
            ModeType.RANDOM: p == 0.0,
            ModeType.WEAROUT: p == 1.0,
            ModeType.UNCERTAIN: 0.0 < p < 1.0,
        }[self.mode_type]
        if not expected:
            raise ValueError(
                f"mode {self.id}: p_wearout {p} inconsistent with type {self.mode_type.value}"
            )

    @property
    def p_random(self) -> float:
        return 1.0 - self.p_wearout

    @property
    def certain(self) -> bool:
        return self.p_wearout in (0.0, 1.0)


def combine_random(estimates: list[RangeEstimate]) -> RangeEstimate:
    """Combine independent random-mode rates: bests add, the single largest
    deviation toward each extreme widens the set."""
    if not estimates:
        raise EmptyInput("combine_random requires at least one estimate")
    best = math.fsum(e.best for e in estimates)
    up = max(e.high - e.best for e in estimates)
    down = max(e.best - e.low for e in estimates)
    return RangeEstimate(max(0.0, best - down), best, best + up)


def combine_wearout(estimates: list[RangeEstimate]) -> RangeEstimate:
    """Combine wearout-mode rates: element-wise maxima (first wearout wins)."""
    if not estimates:
        raise EmptyInput("combine_wearout requires at least one estimate")
    return RangeEstimate(
        max(e.low for e in estimates),
        max(e.best for e in estimates),
        max(e.high for e in estimates),
    )


def combine_mixed(
    randoms: list[RangeEstimate], wearouts: list[RangeEstimate]
) -> RangeEstimate:
    """Total rate of a mixed population: the wearout group collapses to its
    element-wise maximum and joins the random sum as one extra element."""
    if not randoms and not wearouts:
        raise EmptyInput("combine_mixed requires at least one estimate")
    if not wearouts:
        return combine_random(randoms)
    if not randoms:
        return combine_wearout(wearouts)
    return combine_random(randoms + [combine_wearout(wearouts)])


def scale(estimate: RangeEstimate, factor: float) -> RangeEstimate:
    """Scale all three elements by a positive factor."""
    if not factor > 0.0:
        raise NonPositiveFactor(f"scale factor must be positive, got {factor}")
    return RangeEstimate(estimate.low * factor, estimate.best * factor, estimate.high * factor)
