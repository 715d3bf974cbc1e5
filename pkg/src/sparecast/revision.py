"""Non-monotonic belief revision: sessions, edits, hotspots, resolution.

A session owns one document version, its analysis result, a distribution
cache, user pins, and an append-only journal. Edits validate against the
current state, rebuild the document, and rerun the pipeline; the cache
limits fresh enumeration to the edited field's ancestor cone, and
content-derived justification ids keep unchanged decisions stable, so an
incremental session is indistinguishable from a from-scratch run on the
edited document.

The journal is newline-delimited JSON, one record per mutation, starting
with the full document; replaying it reproduces the session bit for bit
(all clocks are logical). Forks copy state copy-on-write style and keep
the shared journal prefix.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .config import DEFAULT_CONFIG, EngineConfig
from .decisions import Decision, Echelon, run_scenario_economics, over_commit_cost
from .errors import (
    CapExceeded,
    InvalidAction,
    StaleEdit,
    UnknownHotspot,
    UnknownNode,
    UnknownSession,
    UnknownTarget,
)
from .justify import Justification, JustificationLog
from .parts import Document, document_to_json, load_document
from .pipeline import PinnedPlan, PipelineCache, PipelineResult, run_pipeline
from .scenarios import enumerate_scenarios

HARD_CAP_EXPONENT = 24  # RUN_ALL safety cap: at most 2^24 scenarios

ACTION_DECLARE_CERTAIN = "declare_certain"
ACTION_MANUAL_OVERRIDE = "manual_override"
ACTION_RUN_ALL = "run_all"

_NODE_FIELDS = {"name", "class", "weight_g", "cost_cents", "fastener"}
_MODE_SCALAR_FIELDS = {"p_wearout", "severity", "label", "evidence"}
_KIND_ORDER = {"unresolved_threshold": 0, "too_many_modes": 1, "ambiguous_recollapse": 2}


@dataclass(frozen=True)
class Edit:
    node: str
    field: str  # document-schema path, e.g. "weight_g" or "modes.m1.rate.best"
    old: object
    new: object
    origin: str = "user"  # user | resolution | import

    def to_record(self) -> dict:
        return {
            "op": "edit",
            "node": self.node,
            "field": self.field,
            "old": self.old,
            "new": self.new,
            "origin": self.origin,
        }


@dataclass(frozen=True)
class Hotspot:
    id: str
    kind: str
    node_id: str  # anchor: deepest affected decision point
    driving_modes: tuple[str, ...]
    affected: tuple[str, ...]
    frontier: str  # impact limit: lowest constraint ceiling above, else root
    swing_cents: float
    p: float | None


@dataclass(frozen=True)
class ExplainReport:
    node_id: str
    active: tuple[Justification, ...]
    history: tuple[Justification, ...]

    @property
    def empty_history(self) -> bool:
        return not self.active and not self.history


@dataclass
class Session:
    id: str
    config: EngineConfig
    doc: Document
    version: int = 0
    parent_id: str | None = None
    cache: PipelineCache = field(default_factory=PipelineCache)
    pins: dict[str, PinnedPlan] = field(default_factory=dict)
    run_all_decisions: dict = field(default_factory=dict)
    log: JustificationLog = field(default_factory=JustificationLog)
    result: PipelineResult | None = None
    journal_lines: list[str] = field(default_factory=list)

    @property
    def analyzed(self) -> bool:
        return self.result is not None

    def analyze(self):
        self.result = run_pipeline(
            self.doc,
            self.config,
            cache=self.cache,
            pins=self.pins,
            run_all_decisions=self.run_all_decisions,
            log=self.log,
            version=self.version,
        )
        return self.result


_MODE_SUFFIXES = (
    ".rate.low",
    ".rate.best",
    ".rate.high",
    ".rate",
    ".p_wearout",
    ".severity",
    ".label",
    ".evidence",
)


def _mutate_document_json(data: dict, edit: Edit):
    """Apply one field edit to a document JSON dict; returns the old value.

    Setting ``p_wearout`` re-derives the mode type (0 -> random, 1 ->
    wearout, otherwise uncertain); the type field itself is not directly
    editable. Raises UnknownTarget for unknown nodes, modes or fields.
    Mode ids may contain dots, so mode paths are parsed suffix-first.
    """
    part = next((p for p in data["parts"] if p["id"] == edit.node), None)
    if part is None:
        raise UnknownTarget(f"no such node: {edit.node}")
    field_path = edit.field
    if field_path in _NODE_FIELDS:
        old = part[field_path]
        part[field_path] = edit.new
        return old
    if field_path.startswith("modes."):
        rest = field_path[len("modes.") :]
        for suffix in _MODE_SUFFIXES:
            if not rest.endswith(suffix):
                continue
            mode_id = rest[: -len(suffix)]
            mode = next((m for m in part["modes"] if m["id"] == mode_id), None)
            if mode is None:
                continue  # the dot may belong to the mode id; try a shorter suffix
            sub = suffix[1:]
            if sub == "rate":
                old = mode["rate"]
                mode["rate"] = edit.new
                return old
            if sub.startswith("rate."):
                element = sub[len("rate.") :]
                old = mode["rate"][element]
                mode["rate"][element] = edit.new
                return old
            old = mode[sub]
            mode[sub] = edit.new
            if sub == "p_wearout":
                p = float(edit.new)
                mode["type"] = "random" if p == 0.0 else "wearout" if p == 1.0 else "uncertain"
            return old
        raise UnknownTarget(f"node {edit.node}: no mode matches path {edit.field!r}")
    raise UnknownTarget(f"node {edit.node}: unsupported field path {edit.field!r}")


class SessionStore:
    """All live sessions; one writer per session is the caller's contract."""

    def __init__(self, config: EngineConfig | None = None):
        self.config = config or DEFAULT_CONFIG
        self.sessions: dict[str, Session] = {}
        self._counter = 0

    def _next_id(self) -> str:
        self._counter += 1
        return f"s{self._counter}"

    def get(self, session_id: str) -> Session:
        try:
            return self.sessions[session_id]
        except KeyError:
            raise UnknownSession(f"no such session: {session_id}") from None

    def create(self, document_text: str, analyze: bool = True, session_id: str | None = None) -> Session:
        doc = load_document(document_text)
        sid = session_id or self._next_id()
        session = Session(id=sid, config=self.config, doc=doc)
        init = {"seq": 1, "op": "init", "document": document_to_json(doc)}
        session.journal_lines.append(json.dumps(init, separators=(",", ":")))
        if analyze:
            session.analyze()
        self.sessions[sid] = session
        return session

    def _journal(self, session: Session, record: dict):
        record = {"seq": len(session.journal_lines) + 1, **record}
        session.journal_lines.append(json.dumps(record, separators=(",", ":")))

    def apply_edit(self, session_id: str, edit: Edit, journal: bool = True) -> Session:
        """Validate and apply one edit, then rerun the pipeline incrementally.

        A no-op edit (new equals current value) changes nothing: no
        recomputation, no journal growth, same version.
        """
        session = self.get(session_id)
        data = document_to_json(session.doc)
        old = _mutate_document_json(data, edit)
        if old != edit.old:
            raise StaleEdit(
                f"{edit.node}.{edit.field}: expected old value {edit.old!r}, found {old!r}"
            )
        if old == edit.new:
            return session
        new_doc = load_document(json.dumps(data))
        session.doc = new_doc
        session.version += 1
        session.analyze()
        if journal:
            self._journal(session, edit.to_record())
        return session

    def detect_hotspots(self, session_id: str) -> list[Hotspot]:
        """Unresolved items grouped by their driving uncertain-mode set.

        The anchor is the deepest affected decision point; the impact
        frontier is the lowest ancestor where a global constraint ceiling
        binds regardless of scenario (the root when none does). Ordering is
        by descending expected cost swing, ties by node id.
        """
        session = self.get(session_id)
        result = session.result
        if result is None:
            return []
        tree = result.tree
        cm = session.doc.cost_model
        groups: dict[frozenset, list] = {}
        for issue in result.pending:
            groups.setdefault(frozenset(issue.driving_modes), []).append(issue)

        raw = []
        for key, issues in groups.items():
            anchor_issue = max(
                issues, key=lambda i: (tree.nodes[i.node_id].depth, i.node_id)
            )
            anchor = anchor_issue.node_id
            kind = min(issues, key=lambda i: _KIND_ORDER.get(i.kind, 9)).kind
            p = anchor_issue.p
            frontier = tree.root_id
            for nid in (anchor, *tree.ancestors(anchor)):
                if nid in result.candidacy.ceilings:
                    frontier = nid
                    break
            over = over_commit_cost(cm.rule, result.rollups[anchor].cost, cm)
            p_eff = 0.5 if p is None else p
            swing = over * min(p_eff, 1.0 - p_eff)
            raw.append(
                Hotspot(
                    id="",
                    kind=kind,
                    node_id=anchor,
                    driving_modes=tuple(sorted(key)),
                    affected=tuple(sorted(i.node_id for i in issues)),
                    frontier=frontier,
                    swing_cents=swing,
                    p=p,
                )
            )
        raw.sort(key=lambda h: (-h.swing_cents, h.node_id))
        return [
            Hotspot(**{**h.__dict__, "id": f"H{i + 1}"}) for i, h in enumerate(raw)
        ]

    def _find_hotspot(self, session_id: str, hotspot_id: str) -> Hotspot:
        for hotspot in self.detect_hotspots(session_id):
            if hotspot.id == hotspot_id:
                return hotspot
        raise UnknownHotspot(f"no active hotspot {hotspot_id}")

    def resolve(
        self,
        session_id: str,
        hotspot_id: str,
        action: str,
        params: dict | None = None,
        journal: bool = True,
        hard_cap_exponent: int = HARD_CAP_EXPONENT,
    ) -> Session:
        """Apply one of the three resolution choices to an active hotspot."""
        session = self.get(session_id)
        params = params or {}
        hotspot = self._find_hotspot(session_id, hotspot_id)

        if action == ACTION_DECLARE_CERTAIN:
            mode_id = params.get("mode")
            mode_type = params.get("mode_type")
            if mode_id not in hotspot.driving_modes:
                raise InvalidAction(
                    f"mode {mode_id!r} does not drive hotspot {hotspot_id}"
                )
            if mode_type not in ("random", "wearout"):
                raise InvalidAction(f"declare-certain needs mode_type random|wearout, got {mode_type!r}")
            owner = None
            for nid, modes in session.result.modes_by_node.items():
                if any(m.id == mode_id for m in modes):
                    owner = nid
                    break
            if owner is None:
                raise InvalidAction(f"mode {mode_id} not found in the document")
            new_p = 1.0 if mode_type == "wearout" else 0.0
            data = document_to_json(session.doc)
            edit = Edit(
                node=owner,
                field=f"modes.{mode_id}.p_wearout",
                old=None,
                new=new_p,
                origin="resolution",
            )
            old = _mutate_document_json(data, edit)
            if old == new_p:
                raise InvalidAction(f"mode {mode_id} is already certain {mode_type}")
            session.doc = load_document(json.dumps(data))
            session.version += 1
            session.analyze()
        elif action == ACTION_MANUAL_OVERRIDE:
            spared = params.get("spared")
            stocking_raw = params.get("stocking", [])
            if not isinstance(spared, bool):
                raise InvalidAction("manual override needs a boolean 'spared'")
            if spared and not stocking_raw:
                raise InvalidAction("a spared override needs stocking locations")
            try:
                stocking = tuple((Echelon(e), int(q)) for e, q in stocking_raw)
            except (ValueError, TypeError):
                raise InvalidAction(f"bad stocking spec {stocking_raw!r}") from None
            session.pins[hotspot.node_id] = PinnedPlan(
                spared=spared, stocking=stocking, note=str(params.get("note", ""))
            )
            session.version += 1
            session.analyze()
        elif action == ACTION_RUN_ALL:
            anchor_rates = session.result.node_rates[hotspot.node_id]
            k = anchor_rates.uncertain_count
            if k > hard_cap_exponent:
                raise CapExceeded(
                    f"{k} uncertain modes means 2^{k} scenarios, above the 2^{hard_cap_exponent} safety cap"
                )
            distribution = anchor_rates.distribution
            if distribution is None:
                distribution = enumerate_scenarios(anchor_rates.cluster, cap=hard_cap_exponent)
            decision, e_high, e_low = run_scenario_economics(
                distribution,
                session.doc.cost_model.rule,
                session.result.rollups[hotspot.node_id].cost,
                session.doc.cost_model,
            )
            session.run_all_decisions[(hotspot.node_id, anchor_rates.signature)] = (
                decision,
                e_high,
                e_low,
            )
            session.version += 1
            session.analyze()
        else:
            raise InvalidAction(f"unknown action {action!r}")

        if journal:
            self._journal(
                session,
                {"op": "resolve", "hotspot": hotspot_id, "action": action, "params": params},
            )
        return session

    def explain(self, session_id: str, node_id: str) -> ExplainReport:
        session = self.get(session_id)
        if node_id not in session.doc.tree.nodes:
            raise UnknownNode(f"no such node: {node_id}")
        active, history = session.log.for_node(node_id)
        return ExplainReport(node_id=node_id, active=tuple(active), history=tuple(history))

    def fork(self, session_id: str) -> Session:
        """Copy-on-write fork; subsequent edits to either side stay isolated."""
        parent = self.get(session_id)
        child = Session(
            id=self._next_id(),
            config=parent.config,
            doc=parent.doc,
            version=parent.version,
            parent_id=parent.id,
            cache=parent.cache.copy(),
            pins=dict(parent.pins),
            run_all_decisions=dict(parent.run_all_decisions),
            log=parent.log.copy(),
            journal_lines=list(parent.journal_lines),
        )
        if parent.analyzed:
            child.analyze()
        self.sessions[child.id] = child
        return child

    def replay(self, journal_text: str, session_id: str | None = None) -> Session:
        """Rebuild a session from its journal; the result is bit-identical to
        the session that wrote it."""
        lines = [line for line in journal_text.splitlines() if line.strip()]
        if not lines:
            raise UnknownSession("empty journal")
        init = json.loads(lines[0])
        if init.get("op") != "init":
            raise UnknownSession("journal does not start with an init record")
        document_text = json.dumps(init["document"])
        session = self.create(document_text, analyze=True, session_id=session_id)
        for line in lines[1:]:
            record = json.loads(line)
            if record["op"] == "edit":
                self.apply_edit(
                    session.id,
                    Edit(
                        node=record["node"],
                        field=record["field"],
                        old=record["old"],
                        new=record["new"],
                        origin=record.get("origin", "user"),
                    ),
                    journal=False,
                )
            elif record["op"] == "resolve":
                self.resolve(
                    session.id,
                    record["hotspot"],
                    record["action"],
                    record.get("params", {}),
                    journal=False,
                )
            else:
                raise UnknownSession(f"unknown journal op {record['op']!r}")
        # the replayed journal is the original, byte for byte
        session.journal_lines = list(lines)
        return session


def session_diff(a: Session, b: Session) -> list[dict]:
    """Node-level differences between two analyzed sessions (status, plan)."""
    diffs: list[dict] = []
    ids = list(a.doc.tree.nodes)
    for nid in b.doc.tree.nodes:
        if nid not in a.doc.tree.nodes:
            ids.append(nid)
    for nid in ids:
        sa = a.result.candidacy.statuses.get(nid) if a.result else None
        sb = b.result.candidacy.statuses.get(nid) if b.result else None
        if sa != sb:
            diffs.append(
                {"node_id": nid, "field": "status", "a": sa.value if sa else None, "b": sb.value if sb else None}
            )
        pa = a.result.plans.get(nid) if a.result else None
        pb = b.result.plans.get(nid) if b.result else None
        for field_name in ("spared", "stocking", "kit_id", "decision"):
            va = getattr(pa, field_name, None)
            vb = getattr(pb, field_name, None)
            if field_name == "stocking":
                va = [[e.value, q] for e, q in va] if va else None
                vb = [[e.value, q] for e, q in vb] if vb else None
            if va != vb:
                diffs.append({"node_id": nid, "field": field_name, "a": va, "b": vb})
        ra = a.result.residuals.get(nid) if a.result else None
        rb = b.result.residuals.get(nid) if b.result else None
        va = ra.estimate.as_tuple() if ra else None
        vb = rb.estimate.as_tuple() if rb else None
        if va != vb:
            diffs.append({"node_id": nid, "field": "residual_rate", "a": va, "b": vb})
    return diffs
