"""Random document generation for tests and benchmarks."""

from __future__ import annotations

import json

import numpy as np

from .parts import load_document, serialize_document

_CLASSES = ["BELT", "BEARING", "SPRING_CLIP", "GEAR", "SHAFT", "ROLLER", "FILTER", "LAMP"]
_FASTENERS = ["none", "screw"]


def _rate(rng, scale: float = 20.0) -> dict:
    best = float(np.round(rng.uniform(0.05, scale), 4))
    low = float(np.round(best * rng.uniform(0.3, 0.95), 4))
    high = float(np.round(best * rng.uniform(1.05, 3.0), 4))
    return {"low": low, "best": best, "high": high}


def _mode(rng, node_id: str, idx: int, p_wearout: float) -> dict:
    if p_wearout == 0.0:
        kind = "random"
    elif p_wearout == 1.0:
        kind = "wearout"
    else:
        kind = "uncertain"
    return {
        "id": f"{node_id}.m{idx}",
        "label": f"mode {idx} of {node_id}",
        "type": kind,
        "p_wearout": p_wearout,
        "rate": _rate(rng),
        "severity": "shutdown" if rng.random() < 0.1 else "degrade",
        "evidence": [],
    }


def generate_document(
    n_nodes: int = 200,
    seed: int = 1,
    uncertain_nodes: int = 8,
    uncertain_modes: tuple[int, int] = (2, 4),
    big_cluster: int | None = None,
    max_children: int = 6,
    sealed_fraction: float = 0.02,
) -> str:
    """A random valid document in canonical serialization.

    ``uncertain_nodes`` leaf-ish nodes carry small uncertain-mode clusters;
    when ``big_cluster`` is set, one node carries that many uncertain modes
    and a two-mode uncertain sibling sits under each of its ancestors, so
    every ancestor's accumulated cluster exceeds the enumeration cap and
    escalates instead of grinding.
    """
    rng = np.random.default_rng(seed)
    ids = [f"n{i:05d}" for i in range(n_nodes)]
    parents: dict[str, str | None] = {ids[0]: None}
    depth = {ids[0]: 0}
    for nid in ids[1:]:
        while True:
            parent = ids[int(rng.integers(0, ids.index(nid)))]
            if depth[parent] < 7:
                break
        parents[nid] = parent
        depth[nid] = depth[parent] + 1

    children: dict[str, list[str]] = {nid: [] for nid in ids}
    for nid, parent in parents.items():
        if parent is not None:
            children[parent].append(nid)

    parts = []
    interior = {nid for nid in ids if children[nid]}
    uncertain_pool = [nid for nid in ids[1:] if nid not in interior]
    rng.shuffle(uncertain_pool)
    uncertain_set = set(uncertain_pool[:uncertain_nodes])
    big_node = None
    if big_cluster is not None:
        for nid in uncertain_pool:
            if nid not in uncertain_set and depth[nid] >= 2:
                big_node = nid
                break
        if big_node is None:
            big_node = uncertain_pool[uncertain_nodes]

    for nid in ids:
        is_leaf = nid not in interior
        n_modes = 0
        modes = []
        if nid == big_node:
            modes = [
                _mode(rng, nid, i, float(np.round(rng.uniform(0.1, 0.9), 3)))
                for i in range(big_cluster)
            ]
        elif nid in uncertain_set:
            lo, hi = uncertain_modes
            n_modes = int(rng.integers(lo, hi + 1))
            modes = [
                _mode(rng, nid, i, float(np.round(rng.uniform(0.1, 0.9), 3)))
                for i in range(n_modes)
            ]
        elif is_leaf and rng.random() < 0.6:
            n_modes = int(rng.integers(1, 3))
            modes = [
                _mode(rng, nid, i, 1.0 if rng.random() < 0.4 else 0.0)
                for i in range(n_modes)
            ]
        elif not is_leaf and rng.random() < 0.15:
            # assembly-level mode (e.g. misalignment)
            modes = [_mode(rng, nid, 0, 0.0)]
        fastener = "none"
        if nid != ids[0] and depth[nid] >= 3 and rng.random() < sealed_fraction:
            fastener = str(rng.choice(["rivet", "weld", "spring_pin"]))
        parts.append(
            {
                "id": nid,
                "name": f"part {nid}",
                "parent": parents[nid],
                "class": str(rng.choice(_CLASSES)) if (is_leaf and rng.random() < 0.3) else None,
                "weight_g": int(rng.integers(1, 40)) if is_leaf else int(rng.integers(5, 120)),
                "cost_cents": int(rng.integers(20, 3000)) if is_leaf else int(rng.integers(200, 9000)),
                "fastener": fastener,
                "modes": modes,
            }
        )

    if big_node is not None:
        # two-mode uncertain sibling under every ancestor of the big cluster
        by_id = {p["id"]: p for p in parts}
        anc = parents[big_node]
        extra = 0
        while anc is not None:
            sib_id = f"x{extra:05d}"
            parts.append(
                {
                    "id": sib_id,
                    "name": f"escalation sibling {extra}",
                    "parent": anc,
                    "class": None,
                    "weight_g": 3,
                    "cost_cents": 50,
                    "fastener": "none",
                    "modes": [
                        _mode(rng, sib_id, i, float(np.round(rng.uniform(0.2, 0.8), 3)))
                        for i in range(2)
                    ],
                }
            )
            anc = by_id[anc]["parent"] if by_id[anc]["parent"] else None
            extra += 1

    raw = {
        "fleet": {
            "population": 50000,
            "monthly_copy_volume": 10000.0,
            "machine_life": 3000000.0,
            "fleet_age": 24.0,
        },
        "constraints": {
            "max_spare_cost": 2000000,
            "max_spare_weight": 500000,
            "max_complexity": max(50, n_nodes // 2),
        },
        "cost_model": {},
        "parts": parts,
    }
    return serialize_document(load_document(json.dumps(raw)))
