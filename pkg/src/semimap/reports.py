"""Deterministic JSON report serialization.

Reports are rendered with sorted keys and round-trip float formatting so
that identical configs and seeds produce byte-identical files.
"""

from __future__ import annotations

import dataclasses
import json

import numpy as np

TOOL_VERSION = "0.1.0"


def to_jsonable(obj):
    if obj is None or isinstance(obj, (bool, int, str)):
        return obj
    if isinstance(obj, float):
        return float(f"{obj:.17g}")
    if isinstance(obj, (np.floating,)):
        return to_jsonable(float(obj))
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {k: to_jsonable(v) for k, v in dataclasses.asdict(obj).items()}
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    return repr(obj)


def render_report(config_echo: dict, verdicts: dict, evidence: dict,
                  budgets: dict, seed: int) -> str:
    doc = {
        "tool_version": TOOL_VERSION,
        "config_echo": to_jsonable(config_echo),
        "verdicts": to_jsonable(verdicts),
        "evidence": to_jsonable(evidence),
        "budgets": to_jsonable(budgets),
        "seed": int(seed),
    }
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def write_report(path, config_echo, verdicts, evidence, budgets, seed):
    text = render_report(config_echo, verdicts, evidence, budgets, seed)
    with open(path, "w") as fh:
        fh.write(text)
    return text
