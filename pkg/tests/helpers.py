"""Shared builders for test documents and modes."""

import json

from sparecast.rates import FailureMode, ModeType, RangeEstimate, Severity


def make_mode(mid, kind, p_wearout, low, best, high, severity="degrade", evidence=()):
    return {
        "id": mid,
        "label": mid,
        "type": kind,
        "p_wearout": p_wearout,
        "rate": {"low": low, "best": best, "high": high},
        "severity": severity,
        "evidence": list(evidence),
    }


def make_part(pid, name, parent, cls=None, weight=10, cost=100, fastener="none", modes=()):
    return {
        "id": pid,
        "name": name,
        "parent": parent,
        "class": cls,
        "weight_g": weight,
        "cost_cents": cost,
        "fastener": fastener,
        "modes": list(modes),
    }


def make_document(parts, fleet=None, constraints=None, cost_model=None):
    return json.dumps(
        {
            "fleet": fleet
            or {
                "population": 50000,
                "monthly_copy_volume": 10000.0,
                "machine_life": 3000000.0,
                "fleet_age": 24.0,
            },
            "constraints": constraints
            or {"max_spare_cost": 1000000, "max_spare_weight": 100000, "max_complexity": 500},
            "cost_model": cost_model or {},
            "parts": parts,
        }
    )


def umode(i, p_wearout, rate: RangeEstimate, severity="degrade") -> FailureMode:
    if p_wearout == 0.0:
        kind = ModeType.RANDOM
    elif p_wearout == 1.0:
        kind = ModeType.WEAROUT
    else:
        kind = ModeType.UNCERTAIN
    return FailureMode(
        id=f"m{i}",
        label=f"m{i}",
        mode_type=kind,
        p_wearout=p_wearout,
        rate=rate,
        severity=Severity(severity),
    )
