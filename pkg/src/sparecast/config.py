"""Shipped default tables and configuration loading.

All numbers here are engineering placeholders, not expert-calibrated data:
the indicator vocabulary and class list are meant to be replaced by a
site-specific config document. ``SPARECAST_CONFIG`` may point at a JSON
file with any of the keys ``class_table``, ``indicator_table``,
``enumeration_cap`` and ``kit_epsilon``; missing keys fall back to these
defaults. The document's own ``cost_model`` section always wins for cost
parameters.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

from .classify import IndicatorEntry, IndicatorTable, SpareClassEntry, SpareClassTable
from .decisions import NodeTimes
from .errors import MalformedDocument
from .rates import ModeType, RangeEstimate
from .scenarios import DEFAULT_MODE_CAP

ENV_VAR = "SPARECAST_CONFIG"

DEFAULT_KIT_EPSILON = 0.2

# Placeholder likelihood ratios (odds multiplier toward wearout) and rate
# factors per evidence indicator; configuration, not expertise.
DEFAULT_INDICATOR_TABLE = IndicatorTable(
    entries={
        "new_process": IndicatorEntry(likelihood_ratio_wearout=1.5, rate_factor=1.5),
        "flagged_material": IndicatorEntry(likelihood_ratio_wearout=2.0, rate_factor=1.3),
        "sharp_corners": IndicatorEntry(likelihood_ratio_wearout=1.8, rate_factor=1.2),
        "high_load": IndicatorEntry(likelihood_ratio_wearout=2.5, rate_factor=1.4),
        "main_drive_train": IndicatorEntry(likelihood_ratio_wearout=1.2, rate_factor=1.6),
        "lab_wear_data": IndicatorEntry(likelihood_ratio_wearout=4.0, rate_factor=1.0),
        "derated_duty": IndicatorEntry(likelihood_ratio_wearout=0.5, rate_factor=0.7),
    }
)

DEFAULT_CLASS_TABLE = SpareClassTable(
    entries={
        "BELT": SpareClassEntry(
            default_rate=RangeEstimate(5.0, 12.0, 30.0),
            default_mode_type=ModeType.WEAROUT,
            default_p_wearout=1.0,
            times=NodeTimes(swap_hours=0.4, disassembly_hours=0.8, repair_hours=1.0),
        ),
        "BEARING": SpareClassEntry(
            default_rate=RangeEstimate(2.0, 6.0, 15.0),
            default_mode_type=ModeType.WEAROUT,
            default_p_wearout=1.0,
        ),
        "SPRING_CLIP": SpareClassEntry(
            default_rate=RangeEstimate(1.0, 4.0, 9.0),
            default_mode_type=ModeType.RANDOM,
            default_p_wearout=0.0,
            times=NodeTimes(swap_hours=0.2, disassembly_hours=0.5, repair_hours=0.6),
        ),
        "GEAR": SpareClassEntry(
            default_rate=RangeEstimate(1.0, 3.0, 8.0),
            default_mode_type=ModeType.UNCERTAIN,
            default_p_wearout=0.6,
        ),
        "SHAFT": SpareClassEntry(
            default_rate=RangeEstimate(0.5, 2.0, 5.0),
            default_mode_type=ModeType.UNCERTAIN,
            default_p_wearout=0.4,
        ),
        "ROLLER": SpareClassEntry(
            default_rate=RangeEstimate(3.0, 8.0, 20.0),
            default_mode_type=ModeType.WEAROUT,
            default_p_wearout=1.0,
        ),
        "FILTER": SpareClassEntry(
            default_rate=RangeEstimate(10.0, 25.0, 60.0),
            default_mode_type=ModeType.WEAROUT,
            default_p_wearout=1.0,
        ),
        "LAMP": SpareClassEntry(
            default_rate=RangeEstimate(4.0, 10.0, 22.0),
            default_mode_type=ModeType.RANDOM,
            default_p_wearout=0.0,
        ),
    }
)


@dataclass(frozen=True)
class EngineConfig:
    class_table: SpareClassTable = field(default_factory=lambda: DEFAULT_CLASS_TABLE)
    indicator_table: IndicatorTable = field(default_factory=lambda: DEFAULT_INDICATOR_TABLE)
    enumeration_cap: int = DEFAULT_MODE_CAP
    kit_epsilon: float = DEFAULT_KIT_EPSILON


DEFAULT_CONFIG = EngineConfig()


def _parse_class_table(raw: dict) -> SpareClassTable:
    entries = {}
    for tag, e in raw.items():
        rate = e["default_rate"]
        times = e.get("times")
        entries[tag] = SpareClassEntry(
            default_rate=RangeEstimate(float(rate["low"]), float(rate["best"]), float(rate["high"])),
            default_mode_type=ModeType(e["default_mode_type"]),
            default_p_wearout=float(e["default_p_wearout"]),
            times=None
            if times is None
            else NodeTimes(
                swap_hours=float(times["swap_hours"]),
                disassembly_hours=float(times["disassembly_hours"]),
                repair_hours=float(times["repair_hours"]),
            ),
        )
    return SpareClassTable(entries=entries)


def _parse_indicator_table(raw: dict) -> IndicatorTable:
    return IndicatorTable(
        entries={
            tag: IndicatorEntry(
                likelihood_ratio_wearout=float(e["likelihood_ratio_wearout"]),
                rate_factor=float(e["rate_factor"]),
            )
            for tag, e in raw.items()
        }
    )


def load_config(path: str | None = None) -> EngineConfig:
    """Engine configuration from an explicit path, the SPARECAST_CONFIG env
    var, or shipped defaults when neither is set."""
    if path is None:
        path = os.environ.get(ENV_VAR)
    if path is None:
        return DEFAULT_CONFIG
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise MalformedDocument(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise MalformedDocument(f"config {path} is not valid JSON: {exc}") from None
    known = {"class_table", "indicator_table", "enumeration_cap", "kit_epsilon"}
    unknown = [k for k in raw if k not in known]
    if unknown:
        raise MalformedDocument(f"config {path}: unknown keys {unknown}")
    return EngineConfig(
        class_table=_parse_class_table(raw["class_table"])
        if "class_table" in raw
        else DEFAULT_CLASS_TABLE,
        indicator_table=_parse_indicator_table(raw["indicator_table"])
        if "indicator_table" in raw
        else DEFAULT_INDICATOR_TABLE,
        enumeration_cap=int(raw.get("enumeration_cap", DEFAULT_MODE_CAP)),
        kit_epsilon=float(raw.get("kit_epsilon", DEFAULT_KIT_EPSILON)),
    )
