"""Shared builders and reference oracles for the test suite.

The gamma_* functions are independent re-statements of what each abstract
domain's states mean in terms of concrete states.  Tests check the production
transfer functions and joins against these by enumeration, so the two
formulations never share code.
"""

from __future__ import annotations

import itertools
import json

from lrucheck.cfg import CacheConfig, Cfg, MemoryBlock, parse_cfg
from lrucheck.concrete import StateSpace


def cfg_text(entry, vertices, edges, name=None):
    """Edges are (src, dst, address-or-None) triples."""
    doc = {
        "entry": entry,
        "vertices": list(vertices),
        "edges": [{"from": s, "to": d, "access": a} for s, d, a in edges],
    }
    if name:
        doc["name"] = name
    return json.dumps(doc)


def build_cfg(entry, vertices, edges, config, name=None) -> Cfg:
    return parse_cfg(cfg_text(entry, vertices, edges, name), config)


def small_config(k=2, sets=1, block=8) -> CacheConfig:
    return CacheConfig(associativity=k, num_sets=sets, block_size=block)


def loop_cfg(config) -> Cfg:
    """A loop whose body accesses two distinct blocks: v (addr 0), w (addr 8)."""
    return build_cfg(
        "a",
        ["a", "b", "c", "d", "exit"],
        [
            ("a", "b", None),
            ("b", "c", 0),
            ("c", "d", 8),
            ("d", "b", None),
            ("d", "exit", None),
        ],
        config,
        name="loop",
    )


def straightline_cfg(config) -> Cfg:
    """Five accesses x, y, a, v, w to five distinct blocks (block size 8)."""
    return build_cfg(
        "v0",
        ["v0", "v1", "v2", "v3", "v4", "v5"],
        [
            ("v0", "v1", 24),
            ("v1", "v2", 32),
            ("v2", "v3", 0),
            ("v3", "v4", 8),
            ("v4", "v5", 16),
        ],
        config,
        name="straightline",
    )


def blocks_for(n, sets=1) -> tuple[MemoryBlock, ...]:
    return tuple(MemoryBlock(i, i % sets) for i in range(n))


def space_for(n_blocks, k) -> StateSpace:
    return StateSpace(k=k, blocks=blocks_for(n_blocks))


# --- concrete-semantics oracles ----------------------------------------------


def gamma_must(space, bounds):
    """Valid states where every block's age is at most its bound."""
    return [
        q for q in space.all_states() if all(a <= b for a, b in zip(q, bounds))
    ]


def gamma_may(space, bounds):
    """Valid states where every block's age is at least its bound."""
    return [
        q for q in space.all_states() if all(a >= b for a, b in zip(q, bounds))
    ]


def eh_holds(states, bounds):
    """Exists-hit meaning: per block, some state keeps its age within the bound."""
    return all(
        min(q[i] for q in states) <= bounds[i] for i in range(len(bounds))
    )


def em_holds(states, bounds):
    """Exists-miss meaning: per block, some state pushes its age to the bound."""
    return all(
        max(q[i] for q in states) >= bounds[i] for i in range(len(bounds))
    )


def nonempty_subsets(states):
    for r in range(1, len(states) + 1):
        for combo in itertools.combinations(states, r):
            yield combo


def all_bounds(n_blocks, k):
    return itertools.product(range(k + 1), repeat=n_blocks)


# --- deterministic test corpus -------------------------------------------------


def corpus_specs(count, base_seed=0):
    """Deterministic varied generator specs, small enough for the oracle."""
    from lrucheck.bench import GenSpec

    specs = []
    for i in range(count):
        seed = base_seed + i
        loops = (1, 0, 2, 1)[i % 4]
        specs.append(
            GenSpec(
                vertices=4 + (i * 3) % 7 if loops == 0 else max(4 + (i * 3) % 7, 1 + 3 * loops),
                loops=loops,
                depth=1 + i % 2,
                branch_p=(0.2, 0.5, 0.35)[i % 3],
                blocks=1 + i % 5,
                access_p=(0.5, 0.8, 0.65, 0.9)[i % 4],
                seed=seed,
            )
        )
    return specs


def corpus_programs(count, base_seed=0, sets=1, block=8):
    """(name, config, cfg) triples cycling k over {1, 2, 4} and sets over {1, 2}."""
    from lrucheck.bench import generate

    out = []
    for i, spec in enumerate(corpus_specs(count, base_seed)):
        k = (1, 2, 4)[i % 3]
        n_sets = (1, 2)[i % 2] if sets is None else sets
        config = CacheConfig(associativity=k, num_sets=n_sets, block_size=block)
        g = generate(spec, config, name=f"gen{spec.seed}")
        out.append((g.name, config, g))
    return out
