"""Justification records: every decision carries its reasons.

Ids are content hashes of (node, stage, rule, decision, facts), so an
unchanged decision keeps its id across recomputation and an incremental
run produces the same active ids as a from-scratch run. Timestamps are
logical (the session version at creation); wall-clock time would break
byte-identical journal replay.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field


@dataclass(frozen=True)
class Justification:
    id: str
    node_id: str
    stage: str  # candidacy | rates | decision | stocking | kit
    rule: str
    decision: str
    facts: dict
    origin: str = "engine"  # engine | user | resolution
    version: int = 0  # logical timestamp: session version at creation
    superseded_by: str | None = None


def justification_id(node_id: str, stage: str, rule: str, decision: str, facts: dict, origin: str = "engine") -> str:
    # repr of plain scalars/lists is deterministic; facts never carry
    # exotic types, so this canonicalisation is stable across runs
    payload = repr((node_id, stage, rule, decision, sorted(facts.items()), origin))
    return "J" + hashlib.sha256(payload.encode()).hexdigest()[:12]


def make_justification(
    node_id: str,
    stage: str,
    rule: str,
    decision: str,
    facts: dict,
    origin: str = "engine",
    version: int = 0,
) -> Justification:
    return Justification(
        id=justification_id(node_id, stage, rule, decision, facts, origin),
        node_id=node_id,
        stage=stage,
        rule=rule,
        decision=decision,
        facts=facts,
        origin=origin,
        version=version,
    )


@dataclass
class JustificationLog:
    """Per-session record store: active record per (node, stage) plus the
    superseded history chain."""

    active: dict[tuple[str, str], Justification] = field(default_factory=dict)
    history: list[Justification] = field(default_factory=list)

    def record(self, new: Justification) -> Justification:
        """Install a record; an unchanged decision keeps the existing record."""
        key = (new.node_id, new.stage)
        old = self.active.get(key)
        if old is not None:
            if old.id == new.id:
                return old
            self.history.append(
                Justification(**{**old.__dict__, "superseded_by": new.id})
            )
        self.active[key] = new
        return new

    def drop(self, node_id: str, stage: str, superseded_by: str | None = None):
        key = (node_id, stage)
        old = self.active.pop(key, None)
        if old is not None:
            self.history.append(Justification(**{**old.__dict__, "superseded_by": superseded_by}))

    def for_node(self, node_id: str) -> tuple[list[Justification], list[Justification]]:
        stage_order = {"candidacy": 0, "rates": 1, "decision": 2, "stocking": 3, "kit": 4}
        active = sorted(
            (j for (nid, _), j in self.active.items() if nid == node_id),
            key=lambda j: stage_order.get(j.stage, 9),
        )
        past = [j for j in self.history if j.node_id == node_id]
        return active, past

    def copy(self) -> "JustificationLog":
        return JustificationLog(active=dict(self.active), history=list(self.history))
