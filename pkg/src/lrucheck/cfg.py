"""Control-flow graphs over memory accesses, and their per-cache-set projections.

A program is a directed multigraph: vertices are program points, edges carry
either one memory access (a block) or no access at all.  A set-associative
cache splits into independent cache sets, so the analyses never look at the
whole graph: they look at one projection per set, where every access to a
block of a different set is blanked out.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Optional, Union


class CfgError(Exception):
    """Base class for CFG construction and parsing problems."""


class CfgParseError(CfgError):
    """Raised when CFG input text is not syntactically or semantically valid."""


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class CacheConfig:
    """Cache geometry: `associativity` ways, `num_sets` sets, lines of `block_size` bytes.

    `num_sets` and `block_size` must be powers of two; `associativity` must be
    at least one.  Addresses map to memory blocks by dropping the offset bits,
    and blocks map to sets by block index modulo `num_sets`.
    """

    associativity: int
    num_sets: int = 1
    block_size: int = 16

    def __post_init__(self) -> None:
        if self.associativity < 1:
            raise ValueError(f"associativity must be >= 1, got {self.associativity}")
        if not _is_power_of_two(self.num_sets):
            raise ValueError(f"num_sets must be a power of two, got {self.num_sets}")
        if not _is_power_of_two(self.block_size):
            raise ValueError(f"block_size must be a power of two, got {self.block_size}")

    def block_index_of(self, address: int) -> int:
        return address // self.block_size

    def set_of_block(self, block_index: int) -> int:
        return block_index % self.num_sets

    def block_for_address(self, address: int) -> "MemoryBlock":
        idx = self.block_index_of(address)
        return MemoryBlock(idx, self.set_of_block(idx))


@dataclass(frozen=True, order=True)
class MemoryBlock:
    """One cache-line-sized block of memory, identified by its block index."""

    index: int
    set_index: int

    def __repr__(self) -> str:
        return f"b{self.index}"


@dataclass(frozen=True)
class Edge:
    """A CFG edge.  `block` is the accessed memory block, or None for no access."""

    src: str
    block: Optional[MemoryBlock]
    dst: str


@dataclass(frozen=True)
class Cfg:
    """A parsed control-flow graph.  Edge order is the declaration order."""

    entry: str
    vertices: tuple[str, ...]
    edges: tuple[Edge, ...]
    name: str = "cfg"


@dataclass(frozen=True)
class ProjectedCfg:
    """The view of a Cfg seen by one cache set.

    Same vertices as the source graph; edges accessing blocks of other sets
    are relabeled to no-access edges, and no-access self-loops are dropped.
    """

    entry: str
    vertices: tuple[str, ...]
    edges: tuple[Edge, ...]
    set_index: int
    name: str = "cfg"


AnyCfg = Union[Cfg, ProjectedCfg]


@dataclass(frozen=True, order=True)
class AccessId:
    """Stable identity of one access edge.

    `ordinal` disambiguates parallel edges that access the same block between
    the same pair of vertices.  Identities are computed from declaration order
    and survive projection unchanged.
    """

    src: str
    dst: str
    block: MemoryBlock
    ordinal: int

    @property
    def label(self) -> str:
        return f"{self.src}->{self.dst}:b{self.block.index}#{self.ordinal}"


_TOP_LEVEL_KEYS = {"entry", "vertices", "edges", "name"}
_EDGE_KEYS = {"from", "to", "access"}


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise CfgParseError(message)


def parse_cfg(text: str, config: CacheConfig, name: str = "cfg") -> Cfg:
    """Parse CFG JSON into a Cfg, resolving access addresses to memory blocks.

    The document is an object with keys `entry` (vertex name), `vertices`
    (array of distinct names), `edges` (array of `{from, to, access}` where
    `access` is a byte address or null) and optional `name`.  Unknown keys are
    rejected.  Syntax errors carry the offending position.
    """
    if text.startswith("﻿"):
        raise CfgParseError("byte order mark not allowed; input must be plain UTF-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CfgParseError(
            f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from exc

    _require(isinstance(doc, dict), "top-level value must be an object")
    unknown = set(doc) - _TOP_LEVEL_KEYS
    _require(not unknown, f"unknown top-level fields: {sorted(unknown)}")
    for key in ("entry", "vertices", "edges"):
        _require(key in doc, f"missing required field {key!r}")

    if "name" in doc:
        _require(isinstance(doc["name"], str) and doc["name"], "name must be a non-empty string")
        name = doc["name"]

    raw_vertices = doc["vertices"]
    _require(isinstance(raw_vertices, list) and raw_vertices, "vertices must be a non-empty array")
    seen: set[str] = set()
    for v in raw_vertices:
        _require(isinstance(v, str) and v, f"vertex names must be non-empty strings, got {v!r}")
        _require(v not in seen, f"duplicate vertex {v!r}")
        seen.add(v)
    vertices = tuple(raw_vertices)

    entry = doc["entry"]
    _require(isinstance(entry, str), "entry must be a string")
    _require(entry in seen, f"entry {entry!r} is not a declared vertex")

    raw_edges = doc["edges"]
    _require(isinstance(raw_edges, list), "edges must be an array")
    edges: list[Edge] = []
    for i, raw in enumerate(raw_edges):
        _require(isinstance(raw, dict), f"edge {i}: must be an object")
        unknown = set(raw) - _EDGE_KEYS
        _require(not unknown, f"edge {i}: unknown fields: {sorted(unknown)}")
        for key in ("from", "to", "access"):
            _require(key in raw, f"edge {i}: missing field {key!r}")
        src, dst, access = raw["from"], raw["to"], raw["access"]
        _require(isinstance(src, str), f"edge {i}: 'from' must be a string")
        _require(isinstance(dst, str), f"edge {i}: 'to' must be a string")
        _require(src in seen, f"edge {i}: 'from' names undeclared vertex {src!r}")
        _require(dst in seen, f"edge {i}: 'to' names undeclared vertex {dst!r}")
        block: Optional[MemoryBlock] = None
        if access is not None:
            _require(
                isinstance(access, int) and not isinstance(access, bool) and access >= 0,
                f"edge {i}: 'access' must be null or a non-negative integer address",
            )
            block = config.block_for_address(access)
        edges.append(Edge(src, block, dst))

    return Cfg(entry=entry, vertices=vertices, edges=tuple(edges), name=name)


def load_cfg(path: str, config: CacheConfig) -> Cfg:
    """Read a CFG JSON file.  The file stem becomes the default graph name."""
    import os

    with open(path, "rb") as fh:
        data = fh.read()
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise CfgParseError(f"{path}: not valid UTF-8: {exc}") from exc
    stem = os.path.splitext(os.path.basename(path))[0]
    return parse_cfg(text, config, name=stem)


def project(g: Cfg, set_index: int, config: CacheConfig) -> ProjectedCfg:
    """Project a Cfg onto one cache set.

    Access edges whose block belongs to a different set become no-access
    edges; no-access self-loops are removed (they cannot change any cache
    state).  Vertices and all remaining edge identities are preserved.
    """
    if not 0 <= set_index < config.num_sets:
        raise ValueError(f"set_index {set_index} out of range for {config.num_sets} sets")
    kept: list[Edge] = []
    for e in g.edges:
        block = e.block
        if block is not None and block.set_index != set_index:
            block = None
        if block is None and e.src == e.dst:
            continue
        kept.append(Edge(e.src, block, e.dst))
    return ProjectedCfg(
        entry=g.entry,
        vertices=g.vertices,
        edges=tuple(kept),
        set_index=set_index,
        name=g.name,
    )


def accesses_of(g: AnyCfg) -> list[AccessId]:
    """Enumerate the access edges of a graph as stable AccessIds, in edge order."""
    counts: dict[tuple[str, str, MemoryBlock], int] = {}
    out: list[AccessId] = []
    for e in g.edges:
        if e.block is None:
            continue
        key = (e.src, e.dst, e.block)
        ordinal = counts.get(key, 0)
        counts[key] = ordinal + 1
        out.append(AccessId(e.src, e.dst, e.block, ordinal))
    return out


def block_universe(g: AnyCfg) -> tuple[MemoryBlock, ...]:
    """Distinct blocks accessed anywhere in the graph, sorted by block index."""
    return tuple(sorted({e.block for e in g.edges if e.block is not None}))


def out_edges(g: AnyCfg) -> dict[str, list[Edge]]:
    """Adjacency map vertex -> outgoing edges, in edge order."""
    adj: dict[str, list[Edge]] = {v: [] for v in g.vertices}
    for e in g.edges:
        adj[e.src].append(e)
    return adj


def reverse_post_order(g: AnyCfg) -> list[str]:
    """Vertices reachable from the entry in reverse post-order.

    Unreachable vertices are appended afterwards in declaration order so the
    result is always a total ordering of `g.vertices`.
    """
    adj = out_edges(g)
    visited: set[str] = set()
    post: list[str] = []
    # Iterative DFS; successor edges are explored in declaration order.
    stack: list[tuple[str, Iterable[Edge]]] = [(g.entry, iter(adj[g.entry]))]
    visited.add(g.entry)
    while stack:
        vertex, it = stack[-1]
        advanced = False
        for e in it:
            if e.dst not in visited:
                visited.add(e.dst)
                stack.append((e.dst, iter(adj[e.dst])))
                advanced = True
                break
        if not advanced:
            post.append(vertex)
            stack.pop()
    order = list(reversed(post))
    order.extend(v for v in g.vertices if v not in visited)
    return order
