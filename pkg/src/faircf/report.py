"""Run reports: fixed-precision JSON serialization and the human-readable
success-rate table.

All floats are serialized at 6 significant digits, and derived fields (PD,
AD, ASR) are computed from the already-rounded primaries, so every report is
diffable and self-consistent as written.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

from .fairness import FairnessSnapshot


def round_sig(value: float, digits: int = 6) -> float:
    if value == 0 or not math.isfinite(value):
        return float(value)
    return round(value, digits - 1 - math.floor(math.log10(abs(value))))


def round_tree(obj):
    """Recursively round every float in a JSON-ish structure."""
    if isinstance(obj, bool):
        return obj
    if isinstance(obj, float):
        return round_sig(obj)
    if isinstance(obj, dict):
        return {k: round_tree(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [round_tree(v) for v in obj]
    return obj


def dump_json(obj, path: str | Path) -> None:
    text = json.dumps(round_tree(obj), sort_keys=True, indent=2)
    Path(path).write_text(text + "\n")


def snapshot_block(snap: FairnessSnapshot) -> dict:
    """Report block for one population; derived fields recompute exactly from
    the rounded primaries stored in the same block."""
    sr0, sr1 = round_sig(snap.sr0), round_sig(snap.sr1)
    a0, a1 = int(snap.a0_count), int(snap.a1_count)
    return {
        "success_rate": [sr0, sr1],
        "asr": round_sig((sr0 + sr1) / 2.0),
        "pd": round_sig(abs(sr0 - sr1)),
        "micro_effectiveness": [round_sig(snap.micro_eff0), round_sig(snap.micro_eff1)],
        "macro_effectiveness": [round_sig(snap.macro_eff0), round_sig(snap.macro_eff1)],
        "action_counts": [a0, a1],
        "action_count_difference": abs(a0 - a1),
        "active_actions": int(snap.active_count),
        "mean_gower_selected": round_sig(snap.mean_gower),
        "n_actions": snap.n_actions,
    }


def success_cell(block: dict) -> str:
    """Percent-formatted '[SR0, SR1] (PD)' cell for the text table."""
    sr0, sr1 = block["success_rate"]
    return f"[{100 * sr0:.1f}, {100 * sr1:.1f}] ({100 * block['pd']:.1f})"


def render_table(report: dict) -> str:
    lines = [
        f"scenario: {report['config']['scenario_spec']['scenario']}"
        f"   seed: {report['config']['seed']}",
    ]
    audit = report.get("model", {}).get("audit")
    if audit:
        lines.append(
            f"model audit: dp={audit['dp_difference']:.3f} eo={audit['eo_difference']:.3f} "
            f"acc={audit['accuracy']:.3f}"
        )
    lines.append("")
    header = f"{'population':<12} {'[SR0, SR1] (PD)':<24} {'[A0, A1] (AD)':<16} {'gower':<8} stopped"
    lines.append(header)
    lines.append("-" * len(header))
    for pop in report["populations"]:
        if pop.get("skipped"):
            lines.append(f"{pop['name']:<12} skipped: {pop['skipped']}")
            continue
        a0, a1 = pop["action_counts"]
        counts = f"[{a0}, {a1}] ({pop['action_count_difference']})"
        lines.append(
            f"{pop['name']:<12} {success_cell(pop):<24} {counts:<16} "
            f"{pop['mean_gower_selected']:<8.3f} {'yes' if pop['stopping_met'] else 'no'}"
        )
    return "\n".join(lines) + "\n"
