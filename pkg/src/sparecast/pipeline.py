"""Full analysis pipeline over a loaded document.

Stage order (the dependency chain revision relies on):

  A candidacy   -- shallow breadth-first statuses (ceilings, frontier, classes)
  B mode prep   -- evidence-adjusted modes, class-default synthesis
  C rates       -- per-node subtree rate distributions (cached by content)
  D decisions   -- preclusion, level-of-repair economics, threshold analysis
  E stocking    -- kits, residual rates, quantities, justifications

Level-of-repair and threshold decisions read each node's full-subtree
rate (the literal combination at that point of the tree); residual rates
(contributions repaired at spared descendants removed) feed reporting and
stocking quantities, so demand is not double-counted across levels.

Scenario distributions are cached by a content signature of the mode
cluster (sorted parameter tuples). An edit therefore re-enumerates exactly
the nodes whose subtree parameters changed -- the edit's ancestor cone --
while the cheap O(n) passes rerun wholesale with content-stable outputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .classify import (
    CandidacyResult,
    IndicatorTable,
    SpareClassTable,
    bayes_mode_posterior,
    candidacy_pass,
    evidence_rate_adjust,
)
from .config import EngineConfig
from .decisions import (
    ChildUnit,
    CostModel,
    Decision,
    Directive,
    Echelon,
    KitCandidate,
    KitGroup,
    RateBounds,
    SparePlan,
    decide_from_probability,
    element_weight_above,
    group_kits,
    level_of_repair,
    life_of_fleet_quantity,
    preclusion_check,
    stocking_levels,
)
from .errors import TooManyModes
from .justify import JustificationLog, make_justification
from .parts import Document, PartTree, Status
from .rates import RangeEstimate, Severity, ZERO_RATE, FailureMode, ModeType
from .scenarios import (
    ScenarioDistribution,
    ambiguity_flag,
    enumerate_scenarios,
    exceedance,
    recollapse,
)

Signature = tuple


@dataclass
class PipelineCache:
    """Session-owned memo of scenario distributions keyed by cluster content.

    Distributions depend only on mode parameters (p_wearout and the rate
    triple), never on ids, so equal-parameter subtrees share entries.
    Certain clusters need no distribution; their signatures are remembered
    so the recomputation cone stays observable.
    """

    distributions: dict[Signature, ScenarioDistribution] = field(default_factory=dict)
    certain: set = field(default_factory=set)

    def copy(self) -> "PipelineCache":
        return PipelineCache(distributions=dict(self.distributions), certain=set(self.certain))


@dataclass(frozen=True)
class PinnedPlan:
    """User override: downstream passes may not overturn it."""

    spared: bool
    stocking: tuple[tuple[Echelon, int], ...]
    note: str = ""


@dataclass
class NodeRates:
    """Per-node rate view. The point estimate is eager (every later stage
    needs it); the scenario envelope and the recollapsed summary are lazy
    queries so certain nodes and non-candidates never pay for them."""

    node_id: str
    cluster: tuple[FailureMode, ...]
    signature: Signature
    uncertain_count: int
    too_many: bool
    distribution: ScenarioDistribution | None
    point: RangeEstimate  # most-probable scenario estimate
    random_best: float
    wearout_best: float
    severity: Severity
    driving_modes: tuple[str, ...]
    _ambiguous: bool | None = field(default=None, repr=False)
    _bounds: RateBounds | None = field(default=None, repr=False)
    _recollapsed: RangeEstimate | None = field(default=None, repr=False)

    @property
    def bounds(self) -> RateBounds:
        if self._bounds is None:
            if self.uncertain_count == 0:
                self._bounds = RateBounds(self.point, self.point)
            else:
                all_r = tuple(m.p_wearout == 1.0 for m in self.cluster)
                all_w = tuple(m.p_wearout != 0.0 for m in self.cluster)
                maximum, _, _ = _combine_flags(self.cluster, all_r)
                minimum, _, _ = _combine_flags(self.cluster, all_w)
                self._bounds = RateBounds(RangeEstimate(*maximum), RangeEstimate(*minimum))
        return self._bounds

    @property
    def ambiguous(self) -> bool:
        if self._ambiguous is None:
            self._ambiguous = (
                ambiguity_flag(self.distribution) if self.distribution is not None else False
            )
        return self._ambiguous

    def recollapsed(self) -> RangeEstimate:
        """Three-element summary of the whole distribution."""
        if self._recollapsed is None:
            if self.distribution is None:
                self._recollapsed = self.point
            else:
                self._recollapsed = recollapse(self.distribution)
        return self._recollapsed


@dataclass(frozen=True)
class ResidualRate:
    estimate: RangeEstimate
    random_best: float
    wearout_best: float


@dataclass(frozen=True)
class PendingIssue:
    node_id: str
    kind: str  # unresolved_threshold | too_many_modes | ambiguous_recollapse
    driving_modes: tuple[str, ...]
    p: float | None
    facts: dict


@dataclass
class PipelineResult:
    doc: Document
    config: EngineConfig
    candidacy: CandidacyResult
    rollups: dict
    modes_by_node: dict[str, tuple[FailureMode, ...]]
    node_rates: dict[str, NodeRates]
    plans: dict[str, SparePlan]
    kits: list[KitGroup]
    residuals: dict[str, ResidualRate]
    pending: list[PendingIssue]
    log: JustificationLog
    stats: dict

    @property
    def tree(self) -> PartTree:
        return self.doc.tree


def _effective_modes(node, class_table: SpareClassTable, indicators: IndicatorTable):
    """Stage B for one node: evidence shifts, then class-default synthesis."""
    out = []
    for mode in node.modes:
        rate = mode.rate
        p = mode.p_wearout
        if mode.evidence:
            rate = evidence_rate_adjust(rate, mode.evidence, indicators)
            if mode.mode_type is ModeType.UNCERTAIN:
                p = bayes_mode_posterior(mode.p_wearout, mode.evidence, indicators)
        if rate != mode.rate or p != mode.p_wearout:
            mode = replace(mode, rate=rate, p_wearout=p)
        out.append(mode)
    if not node.modes:
        entry = class_table.resolve(node.class_tag)
        if entry is not None:
            out.append(
                FailureMode(
                    id=f"{node.id}::class_default",
                    label=f"{node.class_tag} default mode",
                    mode_type=entry.default_mode_type,
                    p_wearout=entry.default_p_wearout,
                    rate=entry.default_rate,
                )
            )
    return tuple(out)


def _cluster_signature(cluster, cap: int) -> Signature:
    return (cap,) + tuple(
        (m.p_wearout, m.rate.low, m.rate.best, m.rate.high) for m in cluster
    )


def _sorted_cluster(modes) -> tuple[FailureMode, ...]:
    return tuple(
        sorted(modes, key=lambda m: (m.p_wearout, m.rate.low, m.rate.best, m.rate.high, m.id))
    )


def _combine_flags(cluster, wearout_flags) -> tuple[tuple[float, float, float], float, float]:
    """One assignment combined without object churn: fsum of random bests
    plus the wearout maximum, single worst deviation each way. Returns the
    (low, best, high) triple and the random/wearout best split."""
    neg_inf = -math.inf
    bests: list[float] = []
    rup = rdn = neg_inf
    wlo = wbe = whi = neg_inf
    for m, w in zip(cluster, wearout_flags):
        r = m.rate
        if w:
            if r.low > wlo:
                wlo = r.low
            if r.best > wbe:
                wbe = r.best
            if r.high > whi:
                whi = r.high
        else:
            bests.append(r.best)
            d = r.high - r.best
            if d > rup:
                rup = d
            d = r.best - r.low
            if d > rdn:
                rdn = d
    random_best = math.fsum(bests)
    wearout_best = wbe if wbe > neg_inf else 0.0
    if wbe > neg_inf:
        if not bests:
            return (wlo, wbe, whi), random_best, wearout_best
        bests.append(wbe)
        d = whi - wbe
        if d > rup:
            rup = d
        d = wbe - wlo
        if d > rdn:
            rdn = d
    best = math.fsum(bests)
    return (max(0.0, best - rdn), best, best + rup), random_best, wearout_best


def evaluate_cluster(cluster) -> tuple[RateBounds, RangeEstimate, float, float]:
    """Scalar envelope of a cluster: bounds, most-probable point, rate split."""
    if not cluster:
        zero = RateBounds(ZERO_RATE, ZERO_RATE)
        return zero, ZERO_RATE, 0.0, 0.0
    all_r = tuple(m.p_wearout == 1.0 for m in cluster)
    all_w = tuple(m.p_wearout != 0.0 for m in cluster)
    likely = tuple(m.p_wearout > 0.5 for m in cluster)
    maximum, _, _ = _combine_flags(cluster, all_r)
    minimum, _, _ = _combine_flags(cluster, all_w)
    point, random_best, wearout_best = _combine_flags(cluster, likely)
    return (
        RateBounds(RangeEstimate(*maximum), RangeEstimate(*minimum)),
        RangeEstimate(*point),
        random_best,
        wearout_best,
    )


def point_estimate(cluster) -> tuple[RangeEstimate, float, float]:
    """Most-probable-assignment estimate and split only (residual queries)."""
    if not cluster:
        return ZERO_RATE, 0.0, 0.0
    likely = tuple(m.p_wearout > 0.5 for m in cluster)
    point, random_best, wearout_best = _combine_flags(cluster, likely)
    return RangeEstimate(*point), random_best, wearout_best


def _node_rates(
    node_id: str,
    cluster: tuple[FailureMode, ...],
    cap: int,
    cache: PipelineCache,
    stats: dict,
) -> NodeRates:
    point, random_best, wearout_best = point_estimate(cluster)
    severity = Severity.DEGRADE
    if any(m.severity is Severity.SHUTDOWN for m in cluster):
        severity = Severity.SHUTDOWN
    driving = tuple(m.id for m in cluster if 0.0 < m.p_wearout < 1.0)
    sig = _cluster_signature(cluster, cap)
    distribution = None
    too_many = False
    if cluster and not driving:
        # certain cluster: the single scenario IS the point estimate
        if sig in cache.certain:
            stats["cache_hits"] += 1
        else:
            cache.certain.add(sig)
            stats["fresh_nodes"].append(node_id)
    elif cluster:
        if sig in cache.distributions:
            distribution = cache.distributions[sig]
            stats["cache_hits"] += 1
        else:
            try:
                distribution = enumerate_scenarios(cluster, cap=cap)
            except TooManyModes:
                too_many = True
            else:
                cache.distributions[sig] = distribution
                stats["enumerations"] += 1
            stats["fresh_nodes"].append(node_id)
    return NodeRates(
        node_id=node_id,
        cluster=cluster,
        signature=sig,
        uncertain_count=len(driving),
        too_many=too_many,
        distribution=distribution,
        point=point,
        random_best=random_best,
        wearout_best=wearout_best,
        severity=severity,
        driving_modes=driving,
    )


@dataclass
class _NodeDecision:
    node_id: str
    spared: bool
    path: str
    skeleton: tuple[tuple[Echelon, int | None], ...] = ()
    quantity_rule: str = ""  # fixed | life_of_fleet | coverage
    pending: str | None = None
    facts: dict = field(default_factory=dict)
    pinned: bool = False
    p: float | None = None


def residual_rates(
    tree: PartTree,
    modes_by_node: dict[str, tuple[FailureMode, ...]],
    spared: set[str],
) -> dict[str, ResidualRate]:
    """Remaining rate per node after removing every contribution repaired at
    a spared strict descendant. Wearout modes covered by kit members are
    removed with their nodes (kit members are spared by construction).
    Monotone: adding a sparing point never raises an ancestor's residual."""
    contrib: dict[str, list[FailureMode]] = {}
    out: dict[str, ResidualRate] = {}
    for nid in tree.postorder():
        modes = list(modes_by_node.get(nid, ()))
        for child in tree.children(nid):
            if child not in spared:
                modes.extend(contrib[child])
        contrib[nid] = modes
        point, random_best, wearout_best = point_estimate(modes)
        out[nid] = ResidualRate(point, random_best, wearout_best)
    return out


def run_pipeline(
    doc: Document,
    config: EngineConfig,
    cache: PipelineCache | None = None,
    pins: dict[str, PinnedPlan] | None = None,
    run_all_decisions: dict[tuple[str, Signature], Decision] | None = None,
    log: JustificationLog | None = None,
    version: int = 0,
) -> PipelineResult:
    cache = cache if cache is not None else PipelineCache()
    pins = pins or {}
    run_all_decisions = run_all_decisions or {}
    log = log if log is not None else JustificationLog()
    stats = {"enumerations": 0, "cache_hits": 0, "fresh_nodes": []}
    tree = doc.tree
    fleet = doc.fleet
    cm: CostModel = doc.cost_model
    rule = cm.rule

    # A: candidacy
    rollups = tree.rollup_all()
    candidacy = candidacy_pass(tree, config.class_table, doc.constraints, rollups)
    frontier_cover: dict[str, str] = {}
    for fid in candidacy.frontier:
        for nid in tree.subtree_ids(fid):
            if nid != fid:
                frontier_cover.setdefault(nid, fid)
    for nid in tree.nodes:
        reason = candidacy.reasons[nid]
        facts: dict = {"status": candidacy.statuses[nid].value}
        if reason == "constraint_ceiling":
            r = rollups[nid]
            facts.update(
                weight_g=r.weight,
                cost_cents=r.cost,
                part_count=r.part_count,
                max_spare_weight=doc.constraints.max_spare_weight,
                max_spare_cost=doc.constraints.max_spare_cost,
                max_complexity=doc.constraints.max_complexity,
            )
        elif reason == "below_inseparable_frontier":
            facts["frontier"] = frontier_cover[nid]
        elif reason in ("known_class", "ancestor_of_known_class"):
            facts["class"] = tree.nodes[nid].class_tag
        log.record(
            make_justification(
                nid, "candidacy", reason, candidacy.statuses[nid].value, facts, version=version
            )
        )

    statuses = candidacy.statuses

    # B: effective modes
    modes_by_node = {
        nid: _effective_modes(node, config.class_table, config.indicator_table)
        for nid, node in tree.nodes.items()
    }

    # C: subtree rate distributions, bottom-up
    subtree_modes: dict[str, tuple[FailureMode, ...]] = {}
    node_rates: dict[str, NodeRates] = {}
    for nid in tree.postorder():
        modes = list(modes_by_node[nid])
        for child in tree.children(nid):
            modes.extend(subtree_modes[child])
        subtree_modes[nid] = tuple(modes)
        cluster = _sorted_cluster(modes)
        node_rates[nid] = _node_rates(nid, cluster, config.enumeration_cap, cache, stats)

    # D: decisions over candidates, post-order
    decisions: dict[str, _NodeDecision] = {}
    nearest_candidates: dict[str, tuple[str, ...]] = {}
    for nid in tree.postorder():
        if statuses[nid] is Status.CANDIDATE:
            nearest_candidates[nid] = (nid,)
        else:
            units: tuple[str, ...] = ()
            for child in tree.children(nid):
                units += nearest_candidates[child]
            nearest_candidates[nid] = units

    def class_times(node_id: str):
        entry = config.class_table.resolve(tree.nodes[node_id].class_tag)
        return entry.times if entry else None

    for nid in tree.postorder():
        if statuses[nid] is not Status.CANDIDATE:
            continue
        if nid in pins:
            pin = pins[nid]
            decisions[nid] = _NodeDecision(
                node_id=nid,
                spared=pin.spared,
                path="override",
                skeleton=tuple((e, q) for e, q in pin.stocking),
                quantity_rule="fixed",
                facts={"note": pin.note, "stocking": [[e.value, q] for e, q in pin.stocking]},
                pinned=True,
            )
            continue
        rates = node_rates[nid]
        rollup = rollups[nid]
        directive = preclusion_check(rates.bounds, rollup, fleet, cm)
        if directive is Directive.NO_STOCK:
            decisions[nid] = _NodeDecision(
                nid,
                spared=False,
                path="no_stock",
                facts={
                    "worst_lifetime_failures": rates.bounds.max_scenario.high
                    * fleet.machine_life
                    / 1e6,
                    "machine_life": fleet.machine_life,
                },
            )
            continue
        if directive is Directive.BULK_ORDER:
            decisions[nid] = _NodeDecision(
                nid,
                spared=True,
                path="bulk_order",
                skeleton=((Echelon.BRANCH, None),),
                quantity_rule="life_of_fleet",
                facts={
                    "cost_cents": rollup.cost,
                    "weight_g": rollup.weight,
                    "bulk_max_cost": cm.bulk_max_cost,
                    "bulk_max_weight": cm.bulk_max_weight,
                },
            )
            continue
        if directive is Directive.CENTRAL_ONLY:
            decisions[nid] = _NodeDecision(
                nid,
                spared=True,
                path="central_only",
                skeleton=((Echelon.REGIONAL_DC, None),),
                quantity_rule="coverage",
                facts={
                    "cost_cents": rollup.cost,
                    "weight_g": rollup.weight,
                    "central_min_cost": cm.central_min_cost,
                    "central_min_weight": cm.central_min_weight,
                },
            )
            continue

        units = ()
        for child in tree.children(nid):
            units += nearest_candidates[child]
        children = None
        if units:
            children = [
                ChildUnit(
                    node_id=u,
                    rate_best=node_rates[u].point.best,
                    material_cost=rollups[u].cost,
                    times=cm.times_for(u, class_times(u)),
                )
                for u in units
            ]
        econ = level_of_repair(
            nid, rollup.cost, rates.point.best, children, cm, class_times(nid)
        )
        econ_facts = {
            "module_cost": econ.module_cost,
            "parts_cost": econ.parts_cost,
            "baseline_cost": econ.baseline_cost,
            "rate_best": rates.point.best,
        }
        if not econ.spare_module:
            decisions[nid] = _NodeDecision(
                nid, spared=False, path="economics_no_spare", facts=econ_facts
            )
            continue

        resolved = run_all_decisions.get((nid, rates.signature))
        if resolved is not None:
            decision, e_high, e_low = resolved
            option = rule.option_high if decision is Decision.HIGH else rule.option_low
            decisions[nid] = _NodeDecision(
                nid,
                spared=True,
                path=f"run_all_{decision.value}",
                skeleton=((option.echelon, option.total_quantity),),
                quantity_rule="fixed",
                facts={
                    **econ_facts,
                    "decision": decision.value,
                    "expected_high": e_high,
                    "expected_low": e_low,
                    "scenarios": 1 << rates.uncertain_count,
                },
            )
        elif rates.too_many:
            decisions[nid] = _NodeDecision(
                nid,
                spared=False,
                path="too_many_modes",
                pending="too_many_modes",
                facts={
                    **econ_facts,
                    "uncertain_modes": rates.uncertain_count,
                    "cap": config.enumeration_cap,
                },
            )
        else:
            if rates.uncertain_count == 0:
                # certain cluster: the single scenario's element weights
                p = element_weight_above(rates.point, rule.threshold)
            else:
                p = exceedance(rates.distribution, rule.threshold)
            decision = decide_from_probability(p, rule)
            if decision is Decision.UNRESOLVED:
                decisions[nid] = _NodeDecision(
                    nid,
                    spared=False,
                    path="unresolved_threshold",
                    pending="unresolved_threshold",
                    facts={
                        **econ_facts,
                        "p": p,
                        "threshold": rule.threshold,
                        "break_even": rule.break_even,
                        "margin": rule.margin,
                    },
                    p=p,
                )
            else:
                option = rule.option_high if decision is Decision.HIGH else rule.option_low
                decisions[nid] = _NodeDecision(
                    nid,
                    spared=True,
                    path=f"threshold_{decision.value}",
                    skeleton=((option.echelon, option.total_quantity),),
                    quantity_rule="fixed",
                    facts={
                        **econ_facts,
                        "p": p,
                        "threshold": rule.threshold,
                        "break_even": rule.break_even,
                        "margin": rule.margin,
                        "option": option.echelon.value,
                        "quantity": option.total_quantity,
                    },
                    p=p,
                )
        if decisions[nid].spared and not econ.keep_child_spares:
            for below in tree.subtree_ids(nid):
                if below == nid:
                    continue
                d = decisions.get(below)
                if d is not None and d.spared and not d.pinned:
                    decisions[below] = _NodeDecision(
                        below,
                        spared=False,
                        path="covered_by_module",
                        facts={"module": nid, "was": d.path},
                    )

    # ambiguity flags on candidates escalate too
    pending: list[PendingIssue] = []
    for nid, d in decisions.items():
        if d.pending:
            pending.append(
                PendingIssue(
                    node_id=nid,
                    kind=d.pending,
                    driving_modes=node_rates[nid].driving_modes,
                    p=d.p,
                    facts=d.facts,
                )
            )
        elif d.path.startswith("threshold_") and node_rates[nid].uncertain_count:
            # the scenario distribution drove this decision; flag it when a
            # runner-up value cluster is nearly as credible as the winner
            rates = node_rates[nid]
            if rates.ambiguous:
                pending.append(
                    PendingIssue(
                        node_id=nid,
                        kind="ambiguous_recollapse",
                        driving_modes=rates.driving_modes,
                        p=d.p,
                        facts={"recollapsed": rates.recollapsed().as_tuple()},
                    )
                )

    # E: kits, residual rates, quantities, final plans
    spared_ids = {nid for nid, d in decisions.items() if d.spared}
    kit_candidates = []
    for nid in spared_ids:
        rates = node_rates[nid]
        if rates.wearout_best <= 0.0:
            continue
        anchor = tree.root_id
        for anc in tree.ancestors(nid):
            if statuses[anc] is Status.CANDIDATE:
                anchor = anc
                break
        sensitive = any(
            0.0 < m.p_wearout < 1.0 and m.p_wearout > 0.5 for m in rates.cluster
        )
        kit_candidates.append(
            KitCandidate(
                node_id=nid,
                anchor=anchor,
                wearout_best=rates.wearout_best,
                mode_sensitive=sensitive,
            )
        )
    kits = group_kits(kit_candidates, config.kit_epsilon)
    kit_by_node = {nid: kit.id for kit in kits for nid in kit.node_ids}

    residuals = residual_rates(tree, modes_by_node, spared_ids)

    plans: dict[str, SparePlan] = {}
    for nid, d in decisions.items():
        res = residuals[nid]
        rates = node_rates[nid]
        stocking: tuple[tuple[Echelon, int], ...] = ()
        if d.spared:
            if d.quantity_rule == "life_of_fleet":
                stocking = (
                    (Echelon.BRANCH, life_of_fleet_quantity(res.estimate.best, fleet)),
                )
            elif d.quantity_rule == "coverage":
                draft = SparePlan(
                    node_id=nid,
                    spared=True,
                    stocking=tuple((e, 0) for e, _ in d.skeleton),
                    random_best=res.random_best,
                    wearout_best=res.wearout_best,
                )
                stocking = stocking_levels(draft, fleet, cm, rates.severity)
            else:  # fixed quantities from a rule option or a pin
                stocking = tuple((e, int(q)) for e, q in d.skeleton)
        if d.pinned:
            origin = "user"
        elif d.path.startswith("run_all_"):
            origin = "resolution"
        else:
            origin = "engine"
        decision_j = log.record(
            make_justification(
                nid,
                "decision",
                d.path,
                "spared" if d.spared else "not_spared",
                d.facts,
                origin=origin,
                version=version,
            )
        )
        plan = SparePlan(
            node_id=nid,
            spared=d.spared,
            kit_id=kit_by_node.get(nid),
            stocking=stocking,
            residual_rate=res.estimate,
            rationale=decision_j.id,
            pinned=d.pinned,
            decision=d.path,
            rate_best=res.estimate.best,
            random_best=res.random_best,
            wearout_best=res.wearout_best,
            severity=rates.severity,
        )
        plans[nid] = plan
        if d.spared:
            log.record(
                make_justification(
                    nid,
                    "stocking",
                    d.quantity_rule or "fixed",
                    ";".join(f"{e.value}={q}" for e, q in stocking),
                    {
                        "residual_best": res.estimate.best,
                        "random_best": res.random_best,
                        "wearout_best": res.wearout_best,
                        "severity": rates.severity.value,
                    },
                    version=version,
                )
            )
        else:
            log.drop(nid, "stocking")
        if nid in kit_by_node:
            kit = next(k for k in kits if k.id == kit_by_node[nid])
            log.record(
                make_justification(
                    nid,
                    "kit",
                    "wearout_grouping",
                    kit_by_node[nid],
                    {
                        "members": list(kit.node_ids),
                        "anchor": kit.anchor,
                        "mode_sensitive": kit.mode_sensitive,
                        "wearout_best": rates.wearout_best,
                    },
                    version=version,
                )
            )
        else:
            log.drop(nid, "kit")

    # nodes that stopped being candidates keep no stale plan-stage records
    for nid in tree.nodes:
        if nid not in decisions:
            for stage in ("decision", "stocking", "kit"):
                log.drop(nid, stage)

    pending.sort(key=lambda p: p.node_id)
    return PipelineResult(
        doc=doc,
        config=config,
        candidacy=candidacy,
        rollups=rollups,
        modes_by_node=modes_by_node,
        node_rates=node_rates,
        plans=plans,
        kits=kits,
        residuals=residuals,
        pending=pending,
        log=log,
        stats={**stats, "fresh_nodes": tuple(stats["fresh_nodes"])},
    )
