"""Abstract interpretation of LRU cache states: four age-bound domains.

All four domains attach one bound per memory block to every program point.

* must: upper bounds on ages that hold for every reachable state.  A bound
  below k proves the block is cached everywhere, so an access always hits.
* may: lower bounds on ages that hold for every reachable state.  A bound of
  k proves the block is cached nowhere, so an access always misses.
* exists-hit: upper bounds on the *minimum* age over the reachable states,
  paired with a must component.  A bound below k proves some execution hits.
* exists-miss: lower bounds on the *maximum* age over the reachable states,
  paired with a may component.  A bound of k proves some execution misses.

must/may speak about every state and answer "always?"; exists-hit/exists-miss
speak about the set of states as a whole and answer "can it happen?".  When an
access is neither always-hit nor always-miss but both a hit and a miss are
shown possible, it is definitely-unknown and exact model checking would be
wasted effort on it.
"""

from __future__ import annotations

from collections import deque, namedtuple
from dataclasses import dataclass
from typing import Optional, Union

from .cfg import AccessId, AnyCfg, MemoryBlock, out_edges, reverse_post_order
from .concrete import InitMode, StateSpace
from .verdict import Verdict


class _Bottom:
    """Unreachable marker usable by every domain: join identity, fixed by transfer."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "BOTTOM"


BOTTOM = _Bottom()


@dataclass(frozen=True)
class MustState:
    """Per-block upper bounds on age, valid in every reachable state."""

    bounds: tuple[int, ...]


@dataclass(frozen=True)
class MayState:
    """Per-block lower bounds on age, valid in every reachable state."""

    bounds: tuple[int, ...]


@dataclass(frozen=True)
class EhState:
    """Upper bounds on the minimum age across reachable states, plus must info."""

    bounds: tuple[int, ...]
    must: MustState


@dataclass(frozen=True)
class EmState:
    """Lower bounds on the maximum age across reachable states, plus may info."""

    bounds: tuple[int, ...]
    may: MayState


def update_must(space: StateSpace, s: MustState, block: MemoryBlock) -> MustState:
    """Access transfer for must bounds.

    The accessed block gets bound 0.  Another block's bound grows by one only
    when it is strictly below the accessed block's bound; larger or equal
    bounds already cover the aged state.
    """
    i = space.index_of(block)
    ab = s.bounds[i]
    bounds = tuple(
        0 if j == i else (v + 1 if v < ab else v) for j, v in enumerate(s.bounds)
    )
    return MustState(bounds)


def update_may(space: StateSpace, s: MayState, block: MemoryBlock) -> MayState:
    """Access transfer for may bounds.

    The accessed block gets bound 0.  Another block's bound grows by one when
    it does not exceed the accessed block's bound (equal cached bounds cannot
    be realized by one state twice, so aging is still guaranteed) and is not
    already k.
    """
    i = space.index_of(block)
    ab = s.bounds[i]
    k = space.k
    bounds = tuple(
        0 if j == i else (v + 1 if v <= ab and v < k else v)
        for j, v in enumerate(s.bounds)
    )
    return MayState(bounds)


def update_eh(space: StateSpace, s: EhState, block: MemoryBlock) -> EhState:
    """Access transfer for exists-hit bounds.

    Whether the best state ages block b' depends on where the accessed block
    can be: if its must bound is at most b's bound, some witness state keeps
    b' unaged, otherwise every witness ages it (saturating at k).
    """
    i = space.index_of(block)
    must_b = s.must.bounds[i]
    k = space.k
    bounds = []
    for j, v in enumerate(s.bounds):
        if j == i:
            bounds.append(0)
        elif must_b <= v:
            bounds.append(v)
        elif v < k:
            bounds.append(v + 1)
        else:
            bounds.append(k)
    return EhState(tuple(bounds), update_must(space, s.must, block))


def update_em(space: StateSpace, s: EmState, block: MemoryBlock) -> EmState:
    """Access transfer for exists-miss bounds.

    Mirror of the exists-hit transfer: if the accessed block's may bound is
    strictly below b's bound, the worst state for b' need not age it;
    otherwise it is guaranteed to age (saturating at k).
    """
    i = space.index_of(block)
    may_b = s.may.bounds[i]
    k = space.k
    bounds = []
    for j, v in enumerate(s.bounds):
        if j == i:
            bounds.append(0)
        elif may_b < v:
            bounds.append(v)
        elif v < k:
            bounds.append(v + 1)
        else:
            bounds.append(k)
    return EmState(tuple(bounds), update_may(space, s.may, block))


def join_must(s: MustState, t: MustState) -> MustState:
    return MustState(tuple(map(max, s.bounds, t.bounds)))


def join_may(s: MayState, t: MayState) -> MayState:
    return MayState(tuple(map(min, s.bounds, t.bounds)))


def join_eh(s: EhState, t: EhState) -> EhState:
    return EhState(tuple(map(min, s.bounds, t.bounds)), join_must(s.must, t.must))


def join_em(s: EmState, t: EmState) -> EmState:
    return EmState(tuple(map(max, s.bounds, t.bounds)), join_may(s.may, t.may))


def _seed_must(space: StateSpace, init: InitMode) -> MustState:
    # Both an empty and an unknown cache promise nothing cached.
    return MustState((space.k,) * len(space.blocks))


def _seed_may(space: StateSpace, init: InitMode) -> MayState:
    if init is InitMode.EMPTY:
        return MayState((space.k,) * len(space.blocks))
    return MayState((0,) * len(space.blocks))


def _seed_eh(space: StateSpace, init: InitMode) -> EhState:
    # No hit promised at entry, even for the unknown cache: weakest sound seed.
    return EhState((space.k,) * len(space.blocks), _seed_must(space, init))


def _seed_em(space: StateSpace, init: InitMode) -> EmState:
    if init is InitMode.EMPTY:
        return EmState((space.k,) * len(space.blocks), _seed_may(space, init))
    return EmState((0,) * len(space.blocks), _seed_may(space, init))


#: An abstract domain bundled for the generic fixpoint engine.
Domain = namedtuple("Domain", ["name", "seed", "update", "join"])

MUST = Domain("must", _seed_must, update_must, join_must)
MAY = Domain("may", _seed_may, update_may, join_may)
EXISTS_HIT = Domain("exists-hit", _seed_eh, update_eh, join_eh)
EXISTS_MISS = Domain("exists-miss", _seed_em, update_em, join_em)

AbstractState = Union[MustState, MayState, EhState, EmState, _Bottom]


def fixpoint(
    domain: Domain,
    g: AnyCfg,
    space: StateSpace,
    init: InitMode = InitMode.EMPTY,
) -> dict[str, AbstractState]:
    """Least fixpoint of a domain over a graph.

    Entry starts at the domain's seed, every other vertex at BOTTOM.  Access
    edges apply the domain transfer, no-access edges propagate unchanged, and
    joins accumulate at edge targets.  Vertices are visited in reverse
    post-order with FIFO re-queuing, so an acyclic graph converges in one
    sweep.  Unreachable vertices stay BOTTOM.
    """
    adj = out_edges(g)
    state: dict[str, AbstractState] = {v: BOTTOM for v in g.vertices}
    state[g.entry] = domain.seed(space, init)

    order = reverse_post_order(g)
    work = deque(order)
    queued = set(order)
    while work:
        v = work.popleft()
        queued.discard(v)
        src = state[v]
        if src is BOTTOM:
            continue
        for e in adj[v]:
            moved = src if e.block is None else domain.update(space, src, e.block)
            old = state[e.dst]
            new = moved if old is BOTTOM else domain.join(old, moved)
            if new != old:
                state[e.dst] = new
                if e.dst not in queued:
                    queued.add(e.dst)
                    work.append(e.dst)
    return state


@dataclass(frozen=True)
class AiClassification:
    """Outcome of the abstract phase for one access.

    `verdict` is None when the bounds cannot settle the access; the flags then
    say which half is already known possible, steering the model checker.
    """

    access: AccessId
    verdict: Optional[Verdict]
    exists_hit: bool
    exists_miss: bool


def ai_classify(
    space: StateSpace,
    access: AccessId,
    must: dict[str, AbstractState],
    may: dict[str, AbstractState],
    eh: Optional[dict[str, AbstractState]] = None,
    em: Optional[dict[str, AbstractState]] = None,
) -> AiClassification:
    """Combine the domains' answers at one access, cheapest proof first.

    must proves always-hit, may (bound k) proves always-miss.  Failing both,
    the exists-hit and exists-miss bounds decide definitely-unknown; when only
    one or neither of them is available or conclusive, the access stays
    unresolved with the flags recording which existential half is settled.
    An access whose source is unreachable hits vacuously: always-hit.
    """
    v = access.src
    i = space.index_of(access.block)
    k = space.k
    must_s = must[v]
    if must_s is BOTTOM:
        return AiClassification(access, Verdict.ALWAYS_HIT, False, False)
    if must_s.bounds[i] < k:
        return AiClassification(access, Verdict.ALWAYS_HIT, True, False)
    if may[v].bounds[i] == k:
        return AiClassification(access, Verdict.ALWAYS_MISS, False, True)
    exists_hit = eh is not None and eh[v] is not BOTTOM and eh[v].bounds[i] < k
    exists_miss = em is not None and em[v] is not BOTTOM and em[v].bounds[i] == k
    if exists_hit and exists_miss:
        return AiClassification(access, Verdict.DEFINITELY_UNKNOWN, True, True)
    return AiClassification(access, None, exists_hit, exists_miss)
