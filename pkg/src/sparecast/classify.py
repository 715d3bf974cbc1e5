"""Candidacy classification and evidence-based rate estimation.

The candidacy pass is the shallow breadth-first sweep: it ceilings nodes
whose roll-ups bust a global constraint, walks known spare classes up the
tree, and clears everything below the inseparable frontier. Deep reasoning
handles the parts the shallow pass cannot classify: indicator evidence
shifts a mode's wearout probability by naive-Bayes odds and scales its
rate by per-indicator factors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .decisions import NodeTimes
from .errors import DegeneratePrior, UnknownIndicator
from .parts import PartTree, Status
from .rates import ModeType, RangeEstimate, scale

POSTERIOR_FLOOR = 0.001
POSTERIOR_CEIL = 0.999


@dataclass(frozen=True)
class SpareClassEntry:
    """Pre-compiled statistics for a familiar class of spares."""

    default_rate: RangeEstimate
    default_mode_type: ModeType
    default_p_wearout: float
    times: NodeTimes | None = None


@dataclass(frozen=True)
class SpareClassTable:
    entries: dict[str, SpareClassEntry] = field(default_factory=dict)

    def resolve(self, class_tag: str | None) -> SpareClassEntry | None:
        if class_tag is None:
            return None
        return self.entries.get(class_tag)

    def knows(self, class_tag: str | None) -> bool:
        return class_tag is not None and class_tag in self.entries


@dataclass(frozen=True)
class IndicatorEntry:
    likelihood_ratio_wearout: float
    rate_factor: float

    def __post_init__(self):
        if self.likelihood_ratio_wearout <= 0 or self.rate_factor <= 0:
            raise ValueError("indicator likelihood ratio and rate factor must be positive")


@dataclass(frozen=True)
class IndicatorTable:
    entries: dict[str, IndicatorEntry] = field(default_factory=dict)

    def lookup(self, tag: str) -> IndicatorEntry:
        try:
            return self.entries[tag]
        except KeyError:
            raise UnknownIndicator(f"no such evidence indicator: {tag}") from None


@dataclass(frozen=True)
class CandidacyResult:
    """Statuses plus the facts that produced them, for justification records."""

    statuses: dict[str, Status]
    ceilings: set[str]  # roll-up busts a global constraint
    frontier: set[str]  # inseparable frontier
    reasons: dict[str, str]

    def annotated(self, tree: PartTree) -> PartTree:
        return tree.with_statuses(self.statuses)


def candidacy_pass(
    tree: PartTree, class_table: SpareClassTable, constraints, rollups=None
) -> CandidacyResult:
    """Breadth-first shallow classification of every node.

    Three marking rules, in precedence order: (1) nodes whose subtree
    roll-up exceeds any global constraint are non-spare ceilings; (2)
    strict descendants of the inseparable frontier are non-spare; (3) a
    known-class part and its ancestor chain up to the nearest ceiling are
    candidates (the walk from a sealed-in known part is what promotes the
    frontier node itself). Everything else stays undecided. The pass is a
    pure function of the tree, so it is idempotent.
    """
    if rollups is None:
        rollups = tree.rollup_all()
    ceilings = {
        nid
        for nid, r in rollups.items()
        if r.cost > constraints.max_spare_cost
        or r.weight > constraints.max_spare_weight
        or r.part_count > constraints.max_complexity
    }
    frontier = tree.inseparable_frontier()
    below_frontier: set[str] = set()
    for fid in frontier:
        below_frontier.update(nid for nid in tree.subtree_ids(fid) if nid != fid)

    marked: set[str] = set()
    for nid, node in tree.nodes.items():
        if not class_table.knows(node.class_tag):
            continue
        walk = nid
        while walk is not None:
            if walk in ceilings:
                break
            marked.add(walk)
            walk = tree.nodes[walk].parent

    statuses: dict[str, Status] = {}
    reasons: dict[str, str] = {}
    for nid, node in tree.nodes.items():
        if nid in ceilings:
            statuses[nid] = Status.NON_SPARE
            reasons[nid] = "constraint_ceiling"
        elif nid in below_frontier:
            statuses[nid] = Status.NON_SPARE
            reasons[nid] = "below_inseparable_frontier"
        elif nid in marked:
            statuses[nid] = Status.CANDIDATE
            reasons[nid] = (
                "known_class"
                if class_table.knows(node.class_tag)
                else "ancestor_of_known_class"
            )
        else:
            statuses[nid] = Status.UNDECIDED
            reasons[nid] = "no_rule_applies"
    return CandidacyResult(statuses=statuses, ceilings=ceilings, frontier=frontier, reasons=reasons)


def bayes_mode_posterior(prior_p_wearout: float, evidence: list[str] | tuple[str, ...], table: IndicatorTable) -> float:
    """Posterior wearout probability after combining indicator evidence by
    naive-Bayes odds. Clamped to [0.001, 0.999]: evidence alone never makes
    a mode certain; only an explicit user declaration does that."""
    if not 0.0 < prior_p_wearout < 1.0:
        raise DegeneratePrior(
            f"prior {prior_p_wearout} is certain already and cannot be revised"
        )
    odds = prior_p_wearout / (1.0 - prior_p_wearout)
    for tag in evidence:
        odds *= table.lookup(tag).likelihood_ratio_wearout
    posterior = odds / (1.0 + odds)
    return min(max(posterior, POSTERIOR_FLOOR), POSTERIOR_CEIL)


def evidence_rate_adjust(
    base: RangeEstimate, evidence: list[str] | tuple[str, ...], table: IndicatorTable
) -> RangeEstimate:
    """Shift a rate estimate up or down by the product of indicator factors."""
    factor = math.prod(table.lookup(tag).rate_factor for tag in evidence)
    if factor == 1.0:
        return base
    return scale(base, factor)
