import math

import numpy as np
import pytest

from sparecast.decisions import (
    ChildUnit,
    CostModel,
    Decision,
    Directive,
    Echelon,
    EchelonParams,
    KitCandidate,
    NodeTimes,
    RateBounds,
    RollupTotals,
    SparePlan,
    StockOption,
    ThresholdRule,
    cost_model_to_json,
    decide_from_probability,
    group_kits,
    level_of_repair,
    life_of_fleet_quantity,
    over_commit_cost,
    parse_cost_model,
    preclusion_check,
    run_scenario_economics,
    stocking_levels,
    threshold_decide,
)
from sparecast.errors import MissingChildPlan, MissingRateSummary, NotSpared
from sparecast.parts import FleetParams
from sparecast.rates import RangeEstimate, Severity
from sparecast.scenarios import enumerate_scenarios, exceedance

from helpers import umode

R = RangeEstimate

FLEET = FleetParams(population=50000, monthly_copy_volume=10000.0, machine_life=3000000.0, fleet_age=24.0)
CM = CostModel()


def bounds(high_rate: float) -> RateBounds:
    est = R(high_rate / 4, high_rate / 2, high_rate)
    return RateBounds(max_scenario=est, min_scenario=est)


class TestPreclusion:
    def test_no_stock_when_rate_below_one_per_machine_life(self):
        fleet = FleetParams(
            population=50000, monthly_copy_volume=10000.0, machine_life=1e6, fleet_age=24.0
        )
        rollup = RollupTotals(weight=500, cost=2000, part_count=3)
        assert preclusion_check(bounds(0.0005), rollup, fleet, CM) is Directive.NO_STOCK

    def test_bulk_order_for_cheap_small_parts(self):
        rollup = RollupTotals(weight=3, cost=40, part_count=1)
        assert preclusion_check(bounds(50.0), rollup, FLEET, CM) is Directive.BULK_ORDER

    def test_central_only_for_heavy_expensive(self):
        rollup = RollupTotals(weight=20000, cost=90000, part_count=40)
        assert preclusion_check(bounds(50.0), rollup, FLEET, CM) is Directive.CENTRAL_ONLY

    def test_none_means_detailed_analysis(self):
        rollup = RollupTotals(weight=500, cost=2000, part_count=3)
        assert preclusion_check(bounds(50.0), rollup, FLEET, CM) is None

    def test_missing_summary(self):
        with pytest.raises(MissingRateSummary):
            preclusion_check(None, RollupTotals(1, 1, 1), FLEET, CM)

    def test_order_no_stock_wins_over_bulk(self):
        fleet = FleetParams(
            population=50000, monthly_copy_volume=10000.0, machine_life=1e6, fleet_age=24.0
        )
        rollup = RollupTotals(weight=3, cost=40, part_count=1)
        assert preclusion_check(bounds(0.0005), rollup, fleet, CM) is Directive.NO_STOCK


class TestThresholdRule:
    def test_break_even(self):
        assert CM.rule.break_even == pytest.approx(0.2)

    def test_rejects_bad_ratio(self):
        with pytest.raises(ValueError):
            ThresholdRule(
                threshold=1.0,
                option_high=StockOption(Echelon.BRANCH, 5000),
                option_low=StockOption(Echelon.REGIONAL_DC, 1000),
                cost_ratio=0.5,
            )

    def test_rejects_margin_outside_band(self):
        with pytest.raises(ValueError):
            ThresholdRule(
                threshold=1.0,
                option_high=StockOption(Echelon.BRANCH, 5000),
                option_low=StockOption(Echelon.REGIONAL_DC, 1000),
                cost_ratio=5.0,
                margin=0.3,
            )


class TestThresholdDecide:
    def test_worked_example_high(self, two_mode_pair):
        # exceedance at t=6 is 0.792, far above the 0.25 band edge
        d = enumerate_scenarios(two_mode_pair)
        rule = ThresholdRule(
            threshold=6.0,
            option_high=StockOption(Echelon.BRANCH, 5000),
            option_low=StockOption(Echelon.REGIONAL_DC, 1000),
            cost_ratio=5.0,
            margin=0.05,
        )
        assert threshold_decide(d, rule) is Decision.HIGH

    def test_exact_break_even_is_unresolved(self):
        assert decide_from_probability(0.2, CM.rule) is Decision.UNRESOLVED

    def test_band_edges(self):
        assert decide_from_probability(0.25, CM.rule) is Decision.UNRESOLVED
        assert decide_from_probability(0.151, CM.rule) is Decision.UNRESOLVED
        assert decide_from_probability(0.2500001, CM.rule) is Decision.HIGH
        assert decide_from_probability(0.1499999, CM.rule) is Decision.LOW

    def test_low(self):
        assert decide_from_probability(0.01, CM.rule) is Decision.LOW


class TestGroupKits:
    def test_similar_rates_form_one_kit(self):
        cands = [
            KitCandidate("a", "root", 100.0, False),
            KitCandidate("b", "root", 110.0, False),
            KitCandidate("c", "root", 105.0, False),
        ]
        kits = group_kits(cands, 0.2)
        assert len(kits) == 1
        assert kits[0].node_ids == ("a", "b", "c")
        assert kits[0].mode_sensitive is False

    def test_distant_rates_split(self):
        cands = [KitCandidate("a", "root", 100.0, False), KitCandidate("b", "root", 200.0, False)]
        kits = group_kits(cands, 0.2)
        assert len(kits) == 2
        assert all(len(k.node_ids) == 1 for k in kits)

    def test_uncertain_member_flags_kit(self):
        cands = [
            KitCandidate("a", "root", 100.0, False),
            KitCandidate("b", "root", 102.0, True),
        ]
        kits = group_kits(cands, 0.2)
        assert len(kits) == 1
        assert kits[0].mode_sensitive is True

    def test_different_anchors_never_mix(self):
        cands = [KitCandidate("a", "x", 100.0, False), KitCandidate("b", "y", 100.0, False)]
        kits = group_kits(cands, 0.2)
        assert len(kits) == 2

    def test_partition_and_pairwise_epsilon(self):
        rng = np.random.default_rng(4)
        cands = [
            KitCandidate(f"n{i}", "root", float(rng.uniform(10, 400)), False) for i in range(40)
        ]
        eps = 0.15
        kits = group_kits(cands, eps)
        seen = [nid for k in kits for nid in k.node_ids]
        assert sorted(seen) == sorted(c.node_id for c in cands)
        by_id = {c.node_id: c.wearout_best for c in cands}
        for kit in kits:
            for a in kit.node_ids:
                for b in kit.node_ids:
                    va, vb = by_id[a], by_id[b]
                    if va != vb:
                        assert abs(va - vb) / ((va + vb) / 2) <= eps

    def test_rejects_eps_outside_unit_interval(self):
        with pytest.raises(ValueError):
            group_kits([], 1.5)


def tight_cost_model(**overrides):
    """Cost model where the no-spare baseline is beatable but not trivial."""
    kwargs = dict(
        labor_rate=3000,
        downtime_rate=6000,
        material_premium=1.2,
        expedite_hours=0.5,
    )
    kwargs.update(overrides)
    return CostModel(**kwargs)


class TestLevelOfRepair:
    def test_module_cheaper_parts_demoted(self):
        # module swap clearly beats both the piece path and the baseline;
        # the piece path is worse than special-ordering, so child spares
        # under this node would be demoted
        cm = tight_cost_model(
            swap_hours=0.1,
            node_times={"child": NodeTimes(swap_hours=0.1, disassembly_hours=2.0, repair_hours=3.0)},
        )
        child = ChildUnit("child", rate_best=10.0, material_cost=100, times=cm.times_for("child"))
        econ = level_of_repair("mod", module_material=500, rate_best=10.0, children=[child], cost_model=cm)
        assert econ.module_cost < econ.baseline_cost
        assert econ.parts_cost > econ.baseline_cost
        assert econ.spare_module is True
        assert econ.keep_child_spares is False

    def test_both_beat_baseline_both_kept(self):
        cm = tight_cost_model(swap_hours=0.1, disassembly_hours=0.05, repair_hours=0.05)
        child = ChildUnit("c", rate_best=10.0, material_cost=50, times=cm.times_for("c"))
        econ = level_of_repair("mod", module_material=400, rate_best=10.0, children=[child], cost_model=cm)
        assert econ.module_cost < econ.baseline_cost
        assert econ.parts_cost < econ.baseline_cost
        assert econ.spare_module is True
        assert econ.keep_child_spares is True

    def test_exact_tie_goes_to_lower_material(self):
        # engineer the two paths to the same expected cost with the module
        # carrying less material: module wins, parts dropped
        cm = CostModel(
            labor_rate=1000,
            downtime_rate=1000,
            swap_hours=2.0,
            disassembly_hours=0.5,
            repair_hours=0.5,
            material_premium=10.0,
            expedite_hours=100.0,
        )
        # module: 100 + 2000*2 = 4100 per failure; parts: 3100 + 500 + 500 = 4100
        child = ChildUnit("c", rate_best=1.0, material_cost=3100, times=cm.times_for("c"))
        econ = level_of_repair("mod", module_material=100, rate_best=1.0, children=[child], cost_model=cm)
        assert econ.module_cost == econ.parts_cost
        assert econ.spare_module is True
        assert econ.keep_child_spares is False

    def test_neither_beats_baseline(self):
        cm = CostModel(
            labor_rate=3000,
            downtime_rate=6000,
            swap_hours=50.0,
            disassembly_hours=50.0,
            repair_hours=50.0,
            material_premium=1.01,
            expedite_hours=0.01,
        )
        child = ChildUnit("c", rate_best=5.0, material_cost=100, times=cm.times_for("c"))
        econ = level_of_repair("mod", module_material=100, rate_best=5.0, children=[child], cost_model=cm)
        assert econ.spare_module is False
        assert econ.keep_child_spares is True  # nothing offered instead

    def test_leaf_without_children(self):
        econ = level_of_repair("leaf", module_material=100, rate_best=5.0, children=None, cost_model=CM)
        assert econ.parts_cost is None
        assert econ.spare_module is True  # default model: swap beats special order

    def test_missing_child_plan(self):
        with pytest.raises(MissingChildPlan):
            level_of_repair("mod", 100, 5.0, [None], CM)


class TestStocking:
    def plan(self, echelon=Echelon.BRANCH, random_best=10.0, wearout_best=0.0):
        return SparePlan(
            node_id="n",
            spared=True,
            stocking=((echelon, 0),),
            random_best=random_best,
            wearout_best=wearout_best,
        )

    def test_worked_example(self):
        # 10 fpmc * (50000 * 10000 / 1e6) = 5000 demand/month, branch covers 1 month
        out = stocking_levels(self.plan(), FLEET, CM, Severity.DEGRADE)
        assert out == ((Echelon.BRANCH, 5000),)

    def test_zero_rate_zero_quantity(self):
        out = stocking_levels(self.plan(random_best=0.0), FLEET, CM, Severity.DEGRADE)
        assert out == ((Echelon.BRANCH, 0),)

    def test_shutdown_severity_scales_up(self):
        degrade = stocking_levels(self.plan(), FLEET, CM, Severity.DEGRADE)
        shutdown = stocking_levels(self.plan(), FLEET, CM, Severity.SHUTDOWN)
        assert shutdown[0][1] == math.ceil(1.5 * degrade[0][1])

    def test_not_spared(self):
        plan = SparePlan(node_id="n", spared=False)
        with pytest.raises(NotSpared):
            stocking_levels(plan, FLEET, CM, Severity.DEGRADE)

    def test_wearout_demand_ramps_with_age(self):
        # young fleet: wearout life far away, only a fraction of wearout
        # demand is stocked
        young = FleetParams(
            population=50000, monthly_copy_volume=10000.0, machine_life=3e6, fleet_age=1.0
        )
        old = FleetParams(
            population=50000, monthly_copy_volume=10000.0, machine_life=3e6, fleet_age=240.0
        )
        plan = self.plan(random_best=0.0, wearout_best=10.0)
        q_young = stocking_levels(plan, young, CM, Severity.DEGRADE)[0][1]
        q_old = stocking_levels(plan, old, CM, Severity.DEGRADE)[0][1]
        assert q_young < q_old
        # old fleet is fully ramped: matches the plain demand formula
        assert q_old == 5000

    def test_life_of_fleet_quantity(self):
        # 0.5 fpmc * 50000 machines * 3e6 copies / 1e6
        assert life_of_fleet_quantity(0.5, FLEET) == 75000


class TestScenarioEconomics:
    def test_break_even_structure(self, two_mode_pair):
        d = enumerate_scenarios(two_mode_pair)
        rule = CM.rule
        decision, e_high, e_low = run_scenario_economics(d, rule, unit_cost=1000, cost_model=CM)
        p = exceedance(d, rule.threshold)
        over = over_commit_cost(rule, 1000, CM)
        assert e_high == pytest.approx(over)
        assert e_low == pytest.approx(rule.cost_ratio * over * p)
        expected = Decision.HIGH if p > rule.break_even else Decision.LOW
        assert decision is expected


class TestCostModelConfig:
    def test_round_trip(self):
        cm = CostModel(
            labor_rate=5000,
            node_times={"x": NodeTimes(0.5, 1.0, 2.0)},
            echelons={
                **CM.echelons,
                Echelon.CAR: EchelonParams(coverage_months=0.5, handling_multiplier=2.0),
            },
        )
        data = cost_model_to_json(cm)
        assert parse_cost_model(data) == cm

    def test_validation(self):
        with pytest.raises(ValueError):
            CostModel(labor_rate=0)
        with pytest.raises(ValueError):
            CostModel(bulk_max_cost=1000, central_min_cost=500)
        with pytest.raises(ValueError):
            CostModel(bulk_max_weight=100, central_min_weight=50)
