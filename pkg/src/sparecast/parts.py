"""Part and assembly tree: ingestion, validation, roll-ups, inseparability.

The input document is a single JSON object with top-level keys ``fleet``,
``constraints``, ``cost_model`` and ``parts``. Parts form one rooted tree
(exactly one part with parent null). Unknown keys are rejected anywhere.
Canonical serialization writes keys in schema order, UTF-8, newline
terminated; ``load`` of a serialized document round-trips exactly.

A permanent fastener (rivet, weld, spring pin) on a node marks that node's
whole subtree inseparable: nothing strictly below it can be individually
replaced, so nothing below it may be spared.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from enum import Enum

from .decisions import (
    COST_MODEL_KEYS,
    CostModel,
    RollupTotals,
    cost_model_to_json,
    parse_cost_model,
)
from .errors import (
    CycleDetected,
    DanglingParent,
    MalformedDocument,
    NegativeValue,
    UnknownNode,
)
from .rates import FailureMode, ModeType, RangeEstimate, Severity


class Fastener(str, Enum):
    NONE = "none"
    SCREW = "screw"
    RIVET = "rivet"
    WELD = "weld"
    SPRING_PIN = "spring_pin"


PERMANENT_FASTENERS = frozenset({Fastener.RIVET, Fastener.WELD, Fastener.SPRING_PIN})


class Status(str, Enum):
    CANDIDATE = "candidate"
    NON_SPARE = "non_spare"
    UNDECIDED = "undecided"


@dataclass(frozen=True)
class PartNode:
    id: str
    name: str
    parent: str | None
    class_tag: str | None
    weight: int  # grams
    cost: int  # cents
    fastener: Fastener
    modes: tuple[FailureMode, ...]
    status: Status = Status.UNDECIDED
    inseparable: bool = False  # derived: permanent fastener on self or an ancestor
    depth: int = 0  # derived


@dataclass(frozen=True)
class GlobalConstraints:
    max_spare_cost: int  # cents
    max_spare_weight: int  # grams
    max_complexity: int  # subtree part count

    def __post_init__(self):
        if min(self.max_spare_cost, self.max_spare_weight, self.max_complexity) <= 0:
            raise ValueError("all global constraints must be strictly positive")


@dataclass(frozen=True)
class FleetParams:
    population: int  # machines in the field
    monthly_copy_volume: float  # copies per machine per month
    machine_life: float  # total copies per machine
    fleet_age: float  # months since launch

    def __post_init__(self):
        if self.population <= 0:
            raise ValueError("fleet population must be positive")
        if self.monthly_copy_volume <= 0 or self.machine_life <= 0:
            raise ValueError("fleet volumes must be positive")
        if self.fleet_age < 0:
            raise ValueError("fleet age cannot be negative")


class PartTree:
    """Immutable rooted tree of parts; nodes keep document order."""

    def __init__(self, nodes: dict[str, PartNode], root_id: str):
        self.nodes = nodes
        self.root_id = root_id
        self._children: dict[str, tuple[str, ...]] = {nid: () for nid in nodes}
        for node in nodes.values():
            if node.parent is not None:
                self._children[node.parent] = self._children[node.parent] + (node.id,)

    def __len__(self) -> int:
        return len(self.nodes)

    def node(self, node_id: str) -> PartNode:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise UnknownNode(f"no such node: {node_id}") from None

    def children(self, node_id: str) -> tuple[str, ...]:
        self.node(node_id)
        return self._children[node_id]

    def ancestors(self, node_id: str):
        """Yield ancestor ids from parent up to the root."""
        parent = self.node(node_id).parent
        while parent is not None:
            yield parent
            parent = self.nodes[parent].parent

    def subtree_ids(self, node_id: str):
        """Preorder walk of the subtree rooted at node_id (inclusive)."""
        stack = [node_id]
        self.node(node_id)
        while stack:
            nid = stack.pop()
            yield nid
            stack.extend(reversed(self._children[nid]))

    def postorder(self):
        """Children-before-parent walk of the whole tree."""
        out: list[str] = []
        stack: list[tuple[str, bool]] = [(self.root_id, False)]
        while stack:
            nid, seen = stack.pop()
            if seen:
                out.append(nid)
            else:
                stack.append((nid, True))
                for child in reversed(self._children[nid]):
                    stack.append((child, False))
        return out

    def rollup(self, node_id: str) -> RollupTotals:
        """Exact subtree sums of weight, cost and part count (self included)."""
        weight = cost = count = 0
        for nid in self.subtree_ids(node_id):
            node = self.nodes[nid]
            weight += node.weight
            cost += node.cost
            count += 1
        return RollupTotals(weight, cost, count)

    def rollup_all(self) -> dict[str, RollupTotals]:
        """Roll-ups for every node in one postorder pass."""
        totals: dict[str, RollupTotals] = {}
        for nid in self.postorder():
            node = self.nodes[nid]
            weight, cost, count = node.weight, node.cost, 1
            for child in self._children[nid]:
                t = totals[child]
                weight += t.weight
                cost += t.cost
                count += t.part_count
            totals[nid] = RollupTotals(weight, cost, count)
        return totals

    def inseparable_frontier(self) -> set[str]:
        """Minimal set of nodes below which individual sparing is impossible:
        permanent-fastener nodes with no permanent-fastener proper ancestor."""
        frontier: set[str] = set()
        stack: list[tuple[str, bool]] = [(self.root_id, False)]
        while stack:
            nid, covered = stack.pop()
            node = self.nodes[nid]
            sealed = node.fastener in PERMANENT_FASTENERS
            if sealed and not covered:
                frontier.add(nid)
            for child in self._children[nid]:
                stack.append((child, covered or sealed))
        return frontier

    def with_statuses(self, statuses: dict[str, Status]) -> "PartTree":
        """New tree with node statuses replaced."""
        nodes = {
            nid: (replace(node, status=statuses[nid]) if nid in statuses else node)
            for nid, node in self.nodes.items()
        }
        return PartTree(nodes, self.root_id)


@dataclass(frozen=True)
class Document:
    fleet: FleetParams
    constraints: GlobalConstraints
    cost_model: CostModel
    tree: PartTree


_TOP_KEYS = ("fleet", "constraints", "cost_model", "parts")
_FLEET_KEYS = ("population", "monthly_copy_volume", "machine_life", "fleet_age")
_CONSTRAINT_KEYS = ("max_spare_cost", "max_spare_weight", "max_complexity")
_PART_KEYS = ("id", "name", "parent", "class", "weight_g", "cost_cents", "fastener", "modes")
_MODE_KEYS = ("id", "label", "type", "p_wearout", "rate", "severity", "evidence")
_RATE_KEYS = ("low", "best", "high")


def _require_keys(obj: dict, expected: tuple[str, ...], where: str, node_id: str | None = None):
    missing = [k for k in expected if k not in obj]
    unknown = [k for k in obj if k not in expected]
    if missing:
        raise MalformedDocument(f"{where}: missing keys {missing}", node_id=node_id)
    if unknown:
        raise MalformedDocument(f"{where}: unknown keys {unknown}", node_id=node_id)


def _parse_mode(raw: dict, node_id: str) -> FailureMode:
    if not isinstance(raw, dict):
        raise MalformedDocument(f"part {node_id}: mode must be an object", node_id=node_id)
    _require_keys(raw, _MODE_KEYS, f"part {node_id} mode", node_id)
    rate_raw = raw["rate"]
    if not isinstance(rate_raw, dict):
        raise MalformedDocument(f"part {node_id}: rate must be an object", node_id=node_id)
    _require_keys(rate_raw, _RATE_KEYS, f"part {node_id} rate", node_id)
    low, best, high = (float(rate_raw[k]) for k in _RATE_KEYS)
    if min(low, best, high) < 0:
        raise NegativeValue(f"part {node_id}: negative rate element", node_id=node_id)
    try:
        rate = RangeEstimate(low, best, high)
        mode = FailureMode(
            id=str(raw["id"]),
            label=str(raw["label"]),
            mode_type=ModeType(raw["type"]),
            p_wearout=float(raw["p_wearout"]),
            rate=rate,
            severity=Severity(raw["severity"]),
            evidence=tuple(str(tag) for tag in raw["evidence"]),
        )
    except ValueError as exc:
        raise MalformedDocument(f"part {node_id}: {exc}", node_id=node_id) from None
    return mode


def load_document(text: str) -> Document:
    """Parse and validate a complete input document."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedDocument(f"not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise MalformedDocument("document must be a JSON object")
    _require_keys(data, _TOP_KEYS, "document")
    _require_keys(data["fleet"], _FLEET_KEYS, "fleet")
    _require_keys(data["constraints"], _CONSTRAINT_KEYS, "constraints")
    if not isinstance(data["cost_model"], dict):
        raise MalformedDocument("cost_model must be an object")
    unknown_cm = [k for k in data["cost_model"] if k not in COST_MODEL_KEYS]
    if unknown_cm:
        raise MalformedDocument(f"cost_model: unknown keys {unknown_cm}")

    try:
        fleet = FleetParams(
            population=int(data["fleet"]["population"]),
            monthly_copy_volume=float(data["fleet"]["monthly_copy_volume"]),
            machine_life=float(data["fleet"]["machine_life"]),
            fleet_age=float(data["fleet"]["fleet_age"]),
        )
        constraints = GlobalConstraints(
            max_spare_cost=int(data["constraints"]["max_spare_cost"]),
            max_spare_weight=int(data["constraints"]["max_spare_weight"]),
            max_complexity=int(data["constraints"]["max_complexity"]),
        )
        cost_model = parse_cost_model(data["cost_model"])
    except (ValueError, KeyError) as exc:
        raise MalformedDocument(f"invalid header section: {exc}") from None

    parts_raw = data["parts"]
    if not isinstance(parts_raw, list) or not parts_raw:
        raise MalformedDocument("parts must be a non-empty list")

    nodes: dict[str, PartNode] = {}
    root_id: str | None = None
    for raw in parts_raw:
        if not isinstance(raw, dict):
            raise MalformedDocument("part entries must be objects")
        _require_keys(raw, _PART_KEYS, f"part {raw.get('id', '?')}", str(raw.get("id", "?")))
        node_id = str(raw["id"])
        if node_id in nodes:
            raise MalformedDocument(f"duplicate part id {node_id}", node_id=node_id)
        weight, cost = int(raw["weight_g"]), int(raw["cost_cents"])
        if weight < 0:
            raise NegativeValue(f"part {node_id}: negative weight", node_id=node_id)
        if cost < 0:
            raise NegativeValue(f"part {node_id}: negative cost", node_id=node_id)
        try:
            fastener = Fastener(raw["fastener"])
        except ValueError:
            raise MalformedDocument(
                f"part {node_id}: unknown fastener {raw['fastener']!r}", node_id=node_id
            ) from None
        modes = tuple(_parse_mode(m, node_id) for m in raw["modes"])
        mode_ids = [m.id for m in modes]
        if len(set(mode_ids)) != len(mode_ids):
            raise MalformedDocument(f"part {node_id}: duplicate mode ids", node_id=node_id)
        parent = raw["parent"]
        nodes[node_id] = PartNode(
            id=node_id,
            name=str(raw["name"]),
            parent=None if parent is None else str(parent),
            class_tag=None if raw["class"] is None else str(raw["class"]),
            weight=weight,
            cost=cost,
            fastener=fastener,
            modes=modes,
        )
        if parent is None:
            if root_id is not None:
                raise MalformedDocument(
                    f"multiple roots: {root_id} and {node_id}", node_id=node_id
                )
            root_id = node_id

    if root_id is None:
        raise MalformedDocument("no root part (exactly one part must have parent null)")
    for node in nodes.values():
        if node.parent is not None and node.parent not in nodes:
            raise DanglingParent(
                f"part {node.id}: parent {node.parent} does not exist", node_id=node.id
            )

    # cycle check and depth assignment in one walk up the parent chain
    depth: dict[str, int] = {root_id: 0}
    for node_id in nodes:
        trail = []
        nid = node_id
        while nid not in depth:
            if nid in trail:
                raise CycleDetected(f"parent cycle through {nid}", node_id=nid)
            trail.append(nid)
            parent = nodes[nid].parent
            if parent is None:
                break
            nid = parent
        base = depth.get(nid, 0)
        for offset, tid in enumerate(reversed(trail), start=1):
            depth[tid] = base + offset

    # derived flags: depth and subtree inseparability
    sealed_above: dict[str, bool] = {}
    ordered = sorted(nodes, key=lambda nid: depth[nid])
    for nid in ordered:
        node = nodes[nid]
        above = sealed_above.get(node.parent, False) if node.parent else False
        inseparable = above or node.fastener in PERMANENT_FASTENERS
        sealed_above[nid] = inseparable
        nodes[nid] = replace(node, depth=depth[nid], inseparable=inseparable)

    return Document(fleet=fleet, constraints=constraints, cost_model=cost_model, tree=PartTree(nodes, root_id))


def load_tree(text: str) -> PartTree:
    """Validated part tree of a document (header sections parsed and checked too)."""
    return load_document(text).tree


def _mode_to_json(mode: FailureMode) -> dict:
    return {
        "id": mode.id,
        "label": mode.label,
        "type": mode.mode_type.value,
        "p_wearout": mode.p_wearout,
        "rate": {"low": mode.rate.low, "best": mode.rate.best, "high": mode.rate.high},
        "severity": mode.severity.value,
        "evidence": list(mode.evidence),
    }


def _part_to_json(node: PartNode) -> dict:
    return {
        "id": node.id,
        "name": node.name,
        "parent": node.parent,
        "class": node.class_tag,
        "weight_g": node.weight,
        "cost_cents": node.cost,
        "fastener": node.fastener.value,
        "modes": [_mode_to_json(m) for m in node.modes],
    }


def document_to_json(doc: Document) -> dict:
    return {
        "fleet": {
            "population": doc.fleet.population,
            "monthly_copy_volume": doc.fleet.monthly_copy_volume,
            "machine_life": doc.fleet.machine_life,
            "fleet_age": doc.fleet.fleet_age,
        },
        "constraints": {
            "max_spare_cost": doc.constraints.max_spare_cost,
            "max_spare_weight": doc.constraints.max_spare_weight,
            "max_complexity": doc.constraints.max_complexity,
        },
        "cost_model": cost_model_to_json(doc.cost_model),
        "parts": [_part_to_json(doc.tree.nodes[nid]) for nid in doc.tree.nodes],
    }


def serialize_document(doc: Document) -> str:
    """Canonical text form: schema key order, two-space indent, newline end."""
    return json.dumps(document_to_json(doc), indent=2, ensure_ascii=False) + "\n"
