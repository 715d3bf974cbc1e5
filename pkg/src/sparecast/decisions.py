"""Sparing and stocking decisions: pruning directives, threshold risk
analysis, level-of-repair economics, kit grouping, and stocking levels.

Money is integer cents, weights integer grams, times fractional hours.
Expected repair costs are expressed in cents per million fleet copies so
they compare directly against rates in fpmc.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import MissingChildPlan, MissingRateSummary, NotSpared
from .rates import RangeEstimate, Severity, WEIGHT_BEST, WEIGHT_HIGH, WEIGHT_LOW
from .scenarios import ScenarioDistribution, element_masses_above, exceedance


class Echelon(str, Enum):
    """Stocking locations, most to least forward-deployed."""

    CAR = "car"
    BRANCH = "branch"
    REGIONAL_DC = "regional_dc"
    FACTORY = "factory"


ECHELON_ORDER = (Echelon.CAR, Echelon.BRANCH, Echelon.REGIONAL_DC, Echelon.FACTORY)

SEVERITY_MULTIPLIER = {Severity.SHUTDOWN: 1.5, Severity.DEGRADE: 1.0}


@dataclass(frozen=True)
class EchelonParams:
    coverage_months: float
    handling_multiplier: float


@dataclass(frozen=True)
class NodeTimes:
    swap_hours: float
    disassembly_hours: float
    repair_hours: float


@dataclass(frozen=True)
class StockOption:
    echelon: Echelon
    total_quantity: int


@dataclass(frozen=True)
class ThresholdRule:
    """Backward risk-analysis rule: above ``threshold`` the expensive
    forward option pays off; the break-even exceedance probability is the
    inverse of the option cost ratio, with a +/- margin band inside which
    the decision is escalated instead of guessed."""

    threshold: float
    option_high: StockOption
    option_low: StockOption
    cost_ratio: float
    margin: float = 0.05

    @property
    def break_even(self) -> float:
        return 1.0 / self.cost_ratio

    def __post_init__(self):
        p = self.break_even
        if not 0.0 < p < 1.0:
            raise ValueError(f"cost ratio {self.cost_ratio} puts break-even {p} outside (0,1)")
        if not 0.0 <= self.margin < min(p, 1.0 - p):
            raise ValueError(f"margin {self.margin} outside [0, min(p*, 1-p*))")


DEFAULT_ECHELONS = {
    Echelon.CAR: EchelonParams(coverage_months=0.25, handling_multiplier=1.5),
    Echelon.BRANCH: EchelonParams(coverage_months=1.0, handling_multiplier=1.2),
    Echelon.REGIONAL_DC: EchelonParams(coverage_months=3.0, handling_multiplier=1.0),
    Echelon.FACTORY: EchelonParams(coverage_months=6.0, handling_multiplier=0.8),
}

DEFAULT_RULE = ThresholdRule(
    threshold=1.0,
    option_high=StockOption(Echelon.BRANCH, 5000),
    option_low=StockOption(Echelon.REGIONAL_DC, 1000),
    cost_ratio=5.0,
    margin=0.05,
)


@dataclass(frozen=True)
class CostModel:
    labor_rate: int = 4500  # cents per hour
    downtime_rate: int = 12000
    echelons: dict[Echelon, EchelonParams] = field(
        default_factory=lambda: dict(DEFAULT_ECHELONS)
    )
    bulk_max_cost: int = 100  # cents; at or under both bulk limits: life-of-fleet order
    bulk_max_weight: int = 10  # grams
    central_min_cost: int = 50000  # at or over either central limit: central stock only
    central_min_weight: int = 5000
    material_premium: float = 2.0  # no-spare special-order material multiplier
    expedite_hours: float = 72.0  # no-spare downtime while the order ships
    swap_hours: float = 0.3
    disassembly_hours: float = 1.0
    repair_hours: float = 1.5
    node_times: dict[str, NodeTimes] = field(default_factory=dict)
    rule: ThresholdRule = DEFAULT_RULE

    def __post_init__(self):
        if self.labor_rate <= 0 or self.downtime_rate <= 0:
            raise ValueError("labor and downtime rates must be positive")
        if not (self.bulk_max_cost < self.central_min_cost):
            raise ValueError("bulk max cost must stay below central-only min cost")
        if not (self.bulk_max_weight < self.central_min_weight):
            raise ValueError("bulk max weight must stay below central-only min weight")
        missing = [e for e in ECHELON_ORDER if e not in self.echelons]
        if missing:
            raise ValueError(f"echelon params missing for {[e.value for e in missing]}")

    def times_for(self, node_id: str, class_times: NodeTimes | None = None) -> NodeTimes:
        if node_id in self.node_times:
            return self.node_times[node_id]
        if class_times is not None:
            return class_times
        return NodeTimes(self.swap_hours, self.disassembly_hours, self.repair_hours)


def parse_cost_model(data: dict) -> CostModel:
    """Build a CostModel from the document's ``cost_model`` section.

    Every key is optional (defaults apply); unknown keys are rejected by
    the document loader before this runs.
    """
    kwargs: dict = {}
    if "labor_rate_cents_per_hour" in data:
        kwargs["labor_rate"] = int(data["labor_rate_cents_per_hour"])
    if "downtime_rate_cents_per_hour" in data:
        kwargs["downtime_rate"] = int(data["downtime_rate_cents_per_hour"])
    if "echelons" in data:
        echelons = dict(DEFAULT_ECHELONS)
        for name, params in data["echelons"].items():
            echelons[Echelon(name)] = EchelonParams(
                coverage_months=float(params["coverage_months"]),
                handling_multiplier=float(params["handling_multiplier"]),
            )
        kwargs["echelons"] = echelons
    if "bulk_order" in data:
        kwargs["bulk_max_cost"] = int(data["bulk_order"]["max_cost_cents"])
        kwargs["bulk_max_weight"] = int(data["bulk_order"]["max_weight_g"])
    if "central_only" in data:
        kwargs["central_min_cost"] = int(data["central_only"]["min_cost_cents"])
        kwargs["central_min_weight"] = int(data["central_only"]["min_weight_g"])
    if "no_spare" in data:
        kwargs["material_premium"] = float(data["no_spare"]["material_premium"])
        kwargs["expedite_hours"] = float(data["no_spare"]["expedite_hours"])
    if "times" in data:
        kwargs["swap_hours"] = float(data["times"]["swap_hours"])
        kwargs["disassembly_hours"] = float(data["times"]["disassembly_hours"])
        kwargs["repair_hours"] = float(data["times"]["repair_hours"])
    if "node_times" in data:
        kwargs["node_times"] = {
            node_id: NodeTimes(
                swap_hours=float(t["swap_hours"]),
                disassembly_hours=float(t["disassembly_hours"]),
                repair_hours=float(t["repair_hours"]),
            )
            for node_id, t in data["node_times"].items()
        }
    if "threshold_rule" in data:
        r = data["threshold_rule"]
        kwargs["rule"] = ThresholdRule(
            threshold=float(r["threshold_fpmc"]),
            option_high=StockOption(
                Echelon(r["option_high"]["echelon"]), int(r["option_high"]["total_quantity"])
            ),
            option_low=StockOption(
                Echelon(r["option_low"]["echelon"]), int(r["option_low"]["total_quantity"])
            ),
            cost_ratio=float(r["cost_ratio"]),
            margin=float(r.get("margin", 0.05)),
        )
    return CostModel(**kwargs)


COST_MODEL_KEYS = frozenset(
    {
        "labor_rate_cents_per_hour",
        "downtime_rate_cents_per_hour",
        "echelons",
        "bulk_order",
        "central_only",
        "no_spare",
        "times",
        "node_times",
        "threshold_rule",
    }
)


def cost_model_to_json(cm: CostModel) -> dict:
    """Canonical JSON form of a cost model (all keys, fixed order)."""
    return {
        "labor_rate_cents_per_hour": cm.labor_rate,
        "downtime_rate_cents_per_hour": cm.downtime_rate,
        "echelons": {
            e.value: {
                "coverage_months": cm.echelons[e].coverage_months,
                "handling_multiplier": cm.echelons[e].handling_multiplier,
            }
            for e in ECHELON_ORDER
        },
        "bulk_order": {"max_cost_cents": cm.bulk_max_cost, "max_weight_g": cm.bulk_max_weight},
        "central_only": {
            "min_cost_cents": cm.central_min_cost,
            "min_weight_g": cm.central_min_weight,
        },
        "no_spare": {
            "material_premium": cm.material_premium,
            "expedite_hours": cm.expedite_hours,
        },
        "times": {
            "swap_hours": cm.swap_hours,
            "disassembly_hours": cm.disassembly_hours,
            "repair_hours": cm.repair_hours,
        },
        "node_times": {
            node_id: {
                "swap_hours": t.swap_hours,
                "disassembly_hours": t.disassembly_hours,
                "repair_hours": t.repair_hours,
            }
            for node_id, t in sorted(cm.node_times.items())
        },
        "threshold_rule": {
            "threshold_fpmc": cm.rule.threshold,
            "cost_ratio": cm.rule.cost_ratio,
            "margin": cm.rule.margin,
            "option_high": {
                "echelon": cm.rule.option_high.echelon.value,
                "total_quantity": cm.rule.option_high.total_quantity,
            },
            "option_low": {
                "echelon": cm.rule.option_low.echelon.value,
                "total_quantity": cm.rule.option_low.total_quantity,
            },
        },
    }


class Directive(str, Enum):
    NO_STOCK = "no_stock"
    BULK_ORDER = "bulk_order"
    CENTRAL_ONLY = "central_only"


class Decision(str, Enum):
    HIGH = "high"
    LOW = "low"
    UNRESOLVED = "unresolved"


@dataclass(frozen=True)
class RollupTotals:
    weight: int
    cost: int
    part_count: int


@dataclass(frozen=True)
class RateBounds:
    """Scenario envelope of a node: all-random maximum and all-wearout minimum."""

    max_scenario: RangeEstimate
    min_scenario: RangeEstimate


def preclusion_check(bounds, rollup: RollupTotals, fleet, cost_model: CostModel):
    """Shortcut rules that settle a node without detailed analysis.

    Checked in order: a part whose worst-case rate cannot produce one
    failure within a machine life is never stocked; a part cheap and small
    enough is bulk-ordered for the life of the fleet; a part expensive or
    heavy enough is held centrally in small numbers. Returns the first
    matching Directive, else None (detailed analysis required).
    """
    if bounds is None:
        raise MissingRateSummary("preclusion needs at least max/min scenario bounds")
    lifetime_failures = bounds.max_scenario.high * fleet.machine_life / 1e6
    if lifetime_failures < 1.0:
        return Directive.NO_STOCK
    if rollup.cost <= cost_model.bulk_max_cost and rollup.weight <= cost_model.bulk_max_weight:
        return Directive.BULK_ORDER
    if rollup.cost >= cost_model.central_min_cost or rollup.weight >= cost_model.central_min_weight:
        return Directive.CENTRAL_ONLY
    return None


def decide_from_probability(p: float, rule: ThresholdRule) -> Decision:
    if p > rule.break_even + rule.margin:
        return Decision.HIGH
    if p < rule.break_even - rule.margin:
        return Decision.LOW
    return Decision.UNRESOLVED


def threshold_decide(distribution: ScenarioDistribution, rule: ThresholdRule) -> Decision:
    """Risk-analysis shortcut: compare the threshold-exceedance probability
    against the break-even band instead of running all scenario economics."""
    return decide_from_probability(exceedance(distribution, rule.threshold), rule)


def element_weight_above(combined: RangeEstimate, threshold: float) -> float:
    """0.1/0.8/0.1 element mass of one combined set strictly above a threshold."""
    return (
        WEIGHT_LOW * (combined.low > threshold)
        + WEIGHT_BEST * (combined.best > threshold)
        + WEIGHT_HIGH * (combined.high > threshold)
    )


def option_cost_cents(option: StockOption, unit_cost: int, cost_model: CostModel) -> float:
    handling = cost_model.echelons[option.echelon].handling_multiplier
    return option.total_quantity * unit_cost * handling


def over_commit_cost(rule: ThresholdRule, unit_cost: int, cost_model: CostModel) -> float:
    """Extra cost of the forward (high) option over the low option."""
    diff = option_cost_cents(rule.option_high, unit_cost, cost_model) - option_cost_cents(
        rule.option_low, unit_cost, cost_model
    )
    return max(diff, 1.0)


def run_scenario_economics(
    distribution: ScenarioDistribution,
    rule: ThresholdRule,
    unit_cost: int,
    cost_model: CostModel,
) -> tuple[Decision, float, float]:
    """Full per-scenario expected-cost comparison of the two options.

    Choosing HIGH commits the over-cost regardless of scenario; choosing
    LOW risks the cost-ratio-scaled loss in every scenario whose mass lies
    above the threshold. Returns (decision, expected_high, expected_low)
    in cents. Ties break LOW (less inventory exposure).
    """
    over = over_commit_cost(rule, unit_cost, cost_model)
    per_scenario_low = rule.cost_ratio * over * element_masses_above(distribution, rule.threshold)
    expected_high = over
    expected_low = float(np.dot(distribution.probabilities, per_scenario_low))
    decision = Decision.HIGH if expected_high < expected_low else Decision.LOW
    return decision, expected_high, expected_low


@dataclass(frozen=True)
class KitCandidate:
    node_id: str
    anchor: str  # nearest candidate ancestor: kit grouping scope
    wearout_best: float
    mode_sensitive: bool  # wearout reading rests on an uncertain mode


@dataclass(frozen=True)
class KitGroup:
    id: str
    anchor: str
    node_ids: tuple[str, ...]
    mode_sensitive: bool


def _relative_difference(a: float, b: float) -> float:
    if a == b:
        return 0.0
    return abs(a - b) / ((a + b) / 2.0)


def group_kits(candidates: list[KitCandidate], eps: float) -> list[KitGroup]:
    """Partition spared wearout parts into preventative-maintenance kits.

    Nodes sharing a candidate ancestor group together when their wearout
    best estimates differ pairwise by a relative difference of at most
    ``eps``. Grouping is greedy in descending best-estimate order (the
    eps relation is not transitive), which makes the partition
    deterministic. A kit containing any uncertain-mode member is flagged
    mode-sensitive.
    """
    if not 0.0 < eps < 1.0:
        raise ValueError(f"eps must lie in (0,1), got {eps}")
    by_anchor: dict[str, list[KitCandidate]] = {}
    for cand in candidates:
        by_anchor.setdefault(cand.anchor, []).append(cand)

    groups: list[KitGroup] = []
    for anchor in sorted(by_anchor):
        members = sorted(by_anchor[anchor], key=lambda c: (-c.wearout_best, c.node_id))
        open_groups: list[list[KitCandidate]] = []
        for cand in members:
            for group in open_groups:
                if all(
                    _relative_difference(cand.wearout_best, m.wearout_best) <= eps
                    for m in group
                ):
                    group.append(cand)
                    break
            else:
                open_groups.append([cand])
        for group in open_groups:
            groups.append(
                KitGroup(
                    id=f"K{len(groups) + 1}",
                    anchor=anchor,
                    node_ids=tuple(sorted(m.node_id for m in group)),
                    mode_sensitive=any(m.mode_sensitive for m in group),
                )
            )
    return groups


@dataclass(frozen=True)
class ChildUnit:
    """A nearest candidate descendant considered on the piece-part path."""

    node_id: str
    rate_best: float
    material_cost: int
    times: NodeTimes


@dataclass(frozen=True)
class RepairEconomics:
    module_cost: float  # cents per million fleet copies
    parts_cost: float | None
    baseline_cost: float
    spare_module: bool
    keep_child_spares: bool  # False demotes spared descendants under this node


def level_of_repair(
    node_id: str,
    module_material: int,
    rate_best: float,
    children: list[ChildUnit] | None,
    cost_model: CostModel,
    class_times: NodeTimes | None = None,
) -> RepairEconomics:
    """Economic comparison of whole-module replacement against piece-part
    replacement at the nearest candidate descendants.

    Both paths compare against the no-spare baseline (special order at a
    material premium plus expedite downtime). The cheaper side wins; an
    exact tie goes to the lower-material side (less inventory risk); both
    sides are kept when each independently beats the baseline.
    """
    if children is not None and any(c is None for c in children):
        raise MissingChildPlan(f"node {node_id}: child decisions incomplete")
    times = cost_model.times_for(node_id, class_times)
    per_swap = module_material + (cost_model.labor_rate + cost_model.downtime_rate) * times.swap_hours
    module_cost = rate_best * per_swap
    baseline_cost = rate_best * (
        module_material * cost_model.material_premium
        + cost_model.downtime_rate * cost_model.expedite_hours
    )
    parts_cost = None
    if children:
        parts_cost = sum(
            c.rate_best
            * (
                c.material_cost
                + cost_model.labor_rate * c.times.disassembly_hours
                + cost_model.downtime_rate * c.times.repair_hours
            )
            for c in children
        )

    module_ok = module_cost < baseline_cost
    parts_ok = parts_cost is not None and parts_cost < baseline_cost
    if module_ok and parts_ok and module_cost == parts_cost:
        parts_material = sum(c.material_cost for c in children)
        spare_module = module_material <= parts_material
        keep_children = not spare_module
    elif module_ok:
        spare_module = True
        keep_children = parts_ok
    else:
        spare_module = False
        keep_children = True  # no alternative offered here; leave child plans alone
    return RepairEconomics(
        module_cost=module_cost,
        parts_cost=parts_cost,
        baseline_cost=baseline_cost,
        spare_module=spare_module,
        keep_child_spares=keep_children,
    )


@dataclass(frozen=True)
class SparePlan:
    """Final per-node plan. ``stocking`` pairs echelons with quantities;
    ``rationale`` points at the active justification record."""

    node_id: str
    spared: bool
    kit_id: str | None = None
    stocking: tuple[tuple[Echelon, int], ...] = ()
    residual_rate: RangeEstimate | None = None
    rationale: str = ""
    pinned: bool = False
    decision: str = ""
    rate_best: float = 0.0
    random_best: float = 0.0
    wearout_best: float = 0.0
    severity: Severity = Severity.DEGRADE

    def __post_init__(self):
        if self.spared and not self.stocking:
            raise ValueError(f"plan for {self.node_id}: spared but no stocking locations")


def age_adjustment(wearout_best: float, fleet) -> float:
    """Ramp wearout demand in as the fleet age approaches the wearout life."""
    if wearout_best <= 0.0:
        return 0.0
    wearout_life_copies = 1e6 / wearout_best
    fleet_age_copies = fleet.fleet_age * fleet.monthly_copy_volume
    return min(max(fleet_age_copies / wearout_life_copies, 0.0), 1.0)


def stocking_levels(plan: SparePlan, fleet, cost_model: CostModel, severity: Severity):
    """Quantities for each echelon already named on the plan.

    Monthly demand scales the best rate by fleet copies per month; each
    echelon stocks its coverage window, scaled 1.5x for shutdown severity,
    with the wearout share of demand ramped in by fleet age.
    """
    if not plan.spared:
        raise NotSpared(f"node {plan.node_id} is not spared")
    monthly_fleet_copies = fleet.population * fleet.monthly_copy_volume / 1e6
    effective_rate = plan.random_best + plan.wearout_best * age_adjustment(
        plan.wearout_best, fleet
    )
    demand_per_month = effective_rate * monthly_fleet_copies
    multiplier = SEVERITY_MULTIPLIER[severity]
    return tuple(
        (echelon, math.ceil(demand_per_month * cost_model.echelons[echelon].coverage_months * multiplier))
        for echelon, _ in plan.stocking
    )


def life_of_fleet_quantity(rate_best: float, fleet) -> int:
    """Bulk-order size: expected failures over every machine's whole life."""
    return math.ceil(rate_best * fleet.population * fleet.machine_life / 1e6)
