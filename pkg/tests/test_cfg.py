"""Parsing, projection and access identity."""

from __future__ import annotations

import pytest
from hypothesis import given, strategies as st

from helpers import build_cfg, cfg_text, loop_cfg, small_config
from lrucheck.cfg import (
    AccessId,
    CacheConfig,
    CfgParseError,
    MemoryBlock,
    accesses_of,
    block_universe,
    parse_cfg,
    project,
    reverse_post_order,
)


def test_cache_config_validation():
    CacheConfig(associativity=1, num_sets=1, block_size=1)
    with pytest.raises(ValueError):
        CacheConfig(associativity=0)
    with pytest.raises(ValueError):
        CacheConfig(associativity=2, num_sets=3)
    with pytest.raises(ValueError):
        CacheConfig(associativity=2, num_sets=2, block_size=24)


def test_address_to_block_and_set():
    config = CacheConfig(associativity=2, num_sets=4, block_size=16)
    assert config.block_index_of(0x40) == 4
    assert config.block_for_address(0x40) == MemoryBlock(4, 0)
    assert config.block_for_address(0x47) == MemoryBlock(4, 0)  # same 16-byte window
    assert config.block_for_address(0x50).set_index == 1


def test_parse_loop_shape(k2_config, loop2):
    assert loop2.entry == "a"
    assert len(loop2.vertices) == 5
    assert len(loop2.edges) == 5
    assert [e.block.index for e in loop2.edges if e.block is not None] == [0, 1]
    assert loop2.name == "loop"


def test_parse_rejects_bom(k2_config):
    with pytest.raises(CfgParseError, match="BOM|byte order"):
        parse_cfg("﻿{}", k2_config)


def test_parse_syntax_error_carries_position(k2_config):
    with pytest.raises(CfgParseError, match=r"line \d+ column \d+"):
        parse_cfg('{"entry": "a",,}', k2_config)


def test_parse_rejects_unknown_fields(k2_config):
    text = cfg_text("a", ["a"], [])
    bad = text[:-1] + ', "extra": 1}'
    with pytest.raises(CfgParseError, match="unknown top-level"):
        parse_cfg(bad, k2_config)
    with pytest.raises(CfgParseError, match="unknown fields"):
        parse_cfg(
            '{"entry": "a", "vertices": ["a", "b"],'
            ' "edges": [{"from": "a", "to": "b", "access": null, "weight": 3}]}',
            k2_config,
        )


def test_parse_rejects_dangling_vertex(k2_config):
    with pytest.raises(CfgParseError, match="undeclared vertex"):
        build_cfg("a", ["a"], [("a", "ghost", None)], k2_config)


def test_parse_rejects_missing_entry(k2_config):
    with pytest.raises(CfgParseError, match="missing required field 'entry'"):
        parse_cfg('{"vertices": ["a"], "edges": []}', k2_config)
    with pytest.raises(CfgParseError, match="not a declared vertex"):
        parse_cfg('{"entry": "z", "vertices": ["a"], "edges": []}', k2_config)


def test_parse_rejects_bad_access_values(k2_config):
    for access in ('-8', 'true', '"0"', '1.5'):
        with pytest.raises(CfgParseError):
            parse_cfg(
                '{"entry": "a", "vertices": ["a", "b"],'
                f' "edges": [{{"from": "a", "to": "b", "access": {access}}}]}}',
                k2_config,
            )


def test_parse_rejects_duplicate_vertices(k2_config):
    with pytest.raises(CfgParseError, match="duplicate vertex"):
        parse_cfg('{"entry": "a", "vertices": ["a", "a"], "edges": []}', k2_config)


def test_parse_deterministic(k2_config):
    text = cfg_text("a", ["a", "b"], [("a", "b", 0)], name="t")
    assert parse_cfg(text, k2_config) == parse_cfg(text, k2_config)


def test_accesses_of_loop(loop2):
    ids = accesses_of(loop2)
    assert [a.label for a in ids] == ["b->c:b0#0", "c->d:b1#0"]


def test_parallel_edges_get_distinct_ordinals(k2_config):
    g = build_cfg("a", ["a", "b"], [("a", "b", 0), ("a", "b", 0)], k2_config)
    ids = accesses_of(g)
    assert len(ids) == 2 and len(set(ids)) == 2
    assert [a.ordinal for a in ids] == [0, 1]


def test_projection_partitions_accesses():
    config = CacheConfig(associativity=2, num_sets=2, block_size=8)
    g = build_cfg(
        "a",
        ["a", "b", "c", "d"],
        [("a", "b", 0), ("b", "c", 8), ("c", "d", 16), ("d", "a", None)],
        config,
    )
    all_ids = accesses_of(g)
    projected = []
    for s in range(config.num_sets):
        pg = project(g, s, config)
        ids = accesses_of(pg)
        assert all(a.block.set_index == s for a in ids)
        projected.extend(ids)
    # Same multiset: every access appears in exactly one set's projection,
    # with its identity unchanged.
    assert sorted(projected) == sorted(all_ids)


def test_projection_relabels_and_drops_self_loops():
    config = CacheConfig(associativity=2, num_sets=2, block_size=8)
    g = build_cfg(
        "a",
        ["a", "b"],
        [("a", "b", 0), ("b", "b", 8), ("a", "a", None), ("b", "a", None)],
        config,
    )
    p0 = project(g, 0, config)
    # set 0: the b->b access (block 1, set 1) relabels to no-access and then
    # drops as a self-loop; the plain a->a self-loop drops too.
    assert len(p0.edges) == 2
    assert [e.block.index if e.block else None for e in p0.edges] == [0, None]
    p1 = project(g, 1, config)
    assert [(e.src, e.dst) for e in p1.edges if e.block is not None] == [("b", "b")]
    assert p0.vertices == g.vertices and p1.vertices == g.vertices


def test_projection_rejects_bad_set_index(k2_config, loop2):
    with pytest.raises(ValueError):
        project(loop2, 1, k2_config)


@given(st.integers(0, 400))
def test_generated_projection_partition_property(seed):
    from helpers import corpus_programs

    name, config, g = corpus_programs(1, base_seed=seed, sets=2)[0]
    merged = []
    for s in range(config.num_sets):
        merged.extend(accesses_of(project(g, s, config)))
    assert sorted(merged) == sorted(accesses_of(g))


def test_reverse_post_order_covers_all_vertices(loop2):
    order = reverse_post_order(loop2)
    assert sorted(order) == sorted(loop2.vertices)
    assert order[0] == "a"
    # b precedes its loop body in reverse post-order
    assert order.index("b") < order.index("c") < order.index("d")


def test_reverse_post_order_appends_unreachable(k2_config):
    g = build_cfg("a", ["a", "b", "zzz"], [("a", "b", None)], k2_config)
    order = reverse_post_order(g)
    assert order[-1] == "zzz"


def test_block_universe_sorted(straight2):
    assert [b.index for b in block_universe(straight2)] == [0, 1, 2, 3, 4]


def test_access_id_labels_stable():
    a = AccessId("x", "y", MemoryBlock(3, 1), 2)
    assert a.label == "x->y:b3#2"
