"""JSON report documents for analysis results.

Reports are dictionaries with a fixed key layout (see docs/report.schema.json)
and deterministic content: no timestamps, no filesystem paths, and timing
fields zeroed unless explicitly requested, so the same input always renders to
the same bytes.
"""

from __future__ import annotations

import json
from typing import Optional

from . import __version__
from .cfg import CacheConfig, Cfg, accesses_of
from .classify import ClassifyResult, Mode, OracleReport
from .concrete import InitMode

SCHEMA_VERSION = 1

_VERDICT_KEYS = ["always-hit", "always-miss", "definitely-unknown", "unknown"]
_PROVENANCE_KEYS = [
    "must",
    "may",
    "eh-em",
    "mc-check-ah",
    "mc-check-am",
    "mc-refuted-both",
    "unresolved",
]


def build_report(
    g: Cfg,
    config: CacheConfig,
    init: InitMode,
    mode: Mode,
    result: ClassifyResult,
    *,
    simplify: bool = True,
    timings: bool = False,
    oracle: Optional[OracleReport] = None,
) -> dict:
    """Assemble the report document for one analysis run."""
    st = result.stats
    accesses = []
    for fv in result.verdicts:
        a = fv.access
        accesses.append(
            {
                "id": a.label,
                "from": a.src,
                "to": a.dst,
                "block": a.block.index,
                "set": fv.set_index,
                "ordinal": a.ordinal,
                "verdict": fv.verdict.value if fv.verdict else "unknown",
                "provenance": fv.provenance.value,
                "exists_hit": fv.exists_hit,
                "exists_miss": fv.exists_miss,
            }
        )
    doc = {
        "schema_version": SCHEMA_VERSION,
        "tool": {"name": "lrucheck", "version": __version__},
        "input": {
            "name": g.name,
            "vertices": len(g.vertices),
            "edges": len(g.edges),
            "accesses": len(accesses_of(g)),
        },
        "config": {
            "associativity": config.associativity,
            "num_sets": config.num_sets,
            "block_size": config.block_size,
            "init": init.value,
            "mode": mode.value,
            "simplify": simplify,
        },
        "accesses": accesses,
        "stats": {
            "accesses": st.n_accesses,
            "verdicts": {key: st.verdict_counts.get(key, 0) for key in _VERDICT_KEYS},
            "provenance": {key: st.provenance_counts.get(key, 0) for key in _PROVENANCE_KEYS},
            "focused_runs": st.focused_runs,
            "mc_access_checks": st.mc_access_checks,
            "states_explored": st.states_explored,
            "timings_ms": {
                "ai": st.t_ai_ms if timings else 0.0,
                "mc": st.t_mc_ms if timings else 0.0,
            },
        },
        "oracle": _oracle_section(oracle),
    }
    return doc


def _oracle_section(oracle: Optional[OracleReport]) -> Optional[dict]:
    if oracle is None:
        return None
    return {
        "checked": oracle.n_checked,
        "disagreements": [
            {
                "id": e.access.label,
                "set": e.set_index,
                "pipeline": e.pipeline.value if e.pipeline else "unknown",
                "oracle": e.oracle.value,
                "provenance": e.provenance.value,
            }
            for e in oracle.entries
            if not e.agree
        ],
        "n_disagreements": oracle.n_disagreements,
        "mc_resolved": [e.access.label for e in oracle.entries if e.mc_resolved],
    }


def render_report(doc: dict) -> str:
    return json.dumps(doc, indent=2) + "\n"
