"""Deterministic reports over an analyzed session.

A report is a pure function of session state: no wall-clock values, node
order follows the document, and every float is computed, so regenerating
the report for the same version is byte-identical.
"""

from __future__ import annotations

import json

from .decisions import cost_model_to_json
from .parts import Status
from .scenarios import exceedance


def _rate_json(estimate) -> dict:
    return {"low": estimate.low, "best": estimate.best, "high": estimate.high}


def _entry_json(dist, i) -> dict:
    entry = dist.entry_at(i)
    return {
        "probability": entry.probability,
        "combined": _rate_json(entry.combined),
        "wearout": list(entry.assignment),
    }


def build_report(session, hotspots) -> dict:
    result = session.result
    tree = result.tree
    rule = session.doc.cost_model.rule

    nodes = []
    for nid, node in tree.nodes.items():
        rates = result.node_rates[nid]
        plan = result.plans.get(nid)
        residual = result.residuals[nid]
        active, _ = result.log.for_node(nid)
        dist = rates.distribution
        dist_json = None
        if dist is not None and rates.uncertain_count:
            recollapsed = rates.recollapsed()
            dist_json = {
                "uncertain_modes": rates.uncertain_count,
                "entries": len(dist),
                "ambiguous": rates.ambiguous,
                "exceedance_at_rule": exceedance(dist, rule.threshold),
                "recollapsed": _rate_json(recollapsed),
                "maximum": _rate_json(rates.bounds.max_scenario),
                "minimum": _rate_json(rates.bounds.min_scenario),
                "top": [_entry_json(dist, i) for i in range(min(3, len(dist)))],
            }
        plan_json = None
        if plan is not None:
            plan_json = {
                "spared": plan.spared,
                "decision": plan.decision,
                "kit": plan.kit_id,
                "stocking": [[e.value, q] for e, q in plan.stocking],
                "pinned": plan.pinned,
                "severity": plan.severity.value,
            }
        nodes.append(
            {
                "id": nid,
                "name": node.name,
                "parent": node.parent,
                "depth": node.depth,
                "status": result.candidacy.statuses[nid].value,
                "inseparable": node.inseparable,
                "frontier": nid in result.candidacy.frontier,
                "ceiling": nid in result.candidacy.ceilings,
                "rate": _rate_json(rates.point),
                "uncertain": rates.uncertain_count > 0,
                "too_many_modes": rates.too_many,
                "residual_rate": _rate_json(residual.estimate),
                "plan": plan_json,
                "justifications": [j.id for j in active],
            }
        )

    root_rates = result.node_rates[tree.root_id]
    fleet = session.doc.fleet
    inventory_cost = 0
    spared = 0
    for nid, plan in result.plans.items():
        if plan.spared:
            spared += 1
            unit = result.rollups[nid].cost
            inventory_cost += sum(q * unit for _, q in plan.stocking)

    return {
        "session": session.id,
        "version": session.version,
        "totals": {
            "node_count": len(tree),
            "candidate_count": sum(
                1 for s in result.candidacy.statuses.values() if s is Status.CANDIDATE
            ),
            "spared_count": spared,
            "fleet_rate_fpmc": root_rates.point.best,
            "expected_monthly_failures": root_rates.point.best
            * fleet.population
            * fleet.monthly_copy_volume
            / 1e6,
            "inventory_cost_cents": inventory_cost,
            "hotspot_count": len(hotspots),
        },
        "hotspots": [
            {
                "id": h.id,
                "kind": h.kind,
                "node": h.node_id,
                "driving_modes": list(h.driving_modes),
                "affected": list(h.affected),
                "frontier": h.frontier,
                "swing_cents": h.swing_cents,
                "p": h.p,
            }
            for h in hotspots
        ],
        "nodes": nodes,
        "kits": [
            {
                "id": k.id,
                "anchor": k.anchor,
                "members": list(k.node_ids),
                "mode_sensitive": k.mode_sensitive,
            }
            for k in result.kits
        ],
        "config": {
            "fleet": {
                "population": fleet.population,
                "monthly_copy_volume": fleet.monthly_copy_volume,
                "machine_life": fleet.machine_life,
                "fleet_age": fleet.fleet_age,
            },
            "constraints": {
                "max_spare_cost": session.doc.constraints.max_spare_cost,
                "max_spare_weight": session.doc.constraints.max_spare_weight,
                "max_complexity": session.doc.constraints.max_complexity,
            },
            "cost_model": cost_model_to_json(session.doc.cost_model),
            "enumeration_cap": session.config.enumeration_cap,
            "kit_epsilon": session.config.kit_epsilon,
        },
    }


def render_json(report: dict) -> str:
    return json.dumps(report, indent=2, ensure_ascii=False) + "\n"


def render_text(report: dict) -> str:
    lines = [
        f"session {report['session']} v{report['version']}",
        "totals: "
        + ", ".join(f"{k}={v}" for k, v in report["totals"].items()),
        "",
    ]
    status_mark = {"candidate": "*", "non_spare": "-", "undecided": " "}
    for n in report["nodes"]:
        indent = "  " * n["depth"]
        mark = status_mark[n["status"]]
        rate = n["rate"]
        flags = []
        if n["frontier"]:
            flags.append("frontier")
        if n["ceiling"]:
            flags.append("ceiling")
        if n["uncertain"]:
            flags.append("uncertain")
        if n["too_many_modes"]:
            flags.append("too-many-modes")
        plan = n["plan"]
        plan_str = ""
        if plan:
            where = ",".join(f"{e}={q}" for e, q in plan["stocking"]) or "none"
            plan_str = (
                f" | {'SPARE' if plan['spared'] else 'no-spare'} [{plan['decision']}] {where}"
            )
            if plan["kit"]:
                plan_str += f" kit={plan['kit']}"
            if plan["pinned"]:
                plan_str += " (pinned)"
        lines.append(
            f"{mark} {indent}{n['id']} ({n['name']}) "
            f"rate={rate['low']:g}/{rate['best']:g}/{rate['high']:g}"
            + (f" [{' '.join(flags)}]" if flags else "")
            + plan_str
        )
    if report["kits"]:
        lines.append("")
        lines.append("kits:")
        for k in report["kits"]:
            sens = " mode-sensitive" if k["mode_sensitive"] else ""
            lines.append(f"  {k['id']} under {k['anchor']}: {', '.join(k['members'])}{sens}")
    if report["hotspots"]:
        lines.append("")
        lines.append("hotspots (needs human):")
        for h in report["hotspots"]:
            lines.append(
                f"  {h['id']} {h['kind']} at {h['node']} "
                f"modes={','.join(h['driving_modes'])} frontier={h['frontier']} "
                f"swing={h['swing_cents']:.0f}c"
            )
    return "\n".join(lines) + "\n"
