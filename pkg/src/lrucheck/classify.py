"""The full classification pipeline and its differential check against the oracle.

Per cache set: run the cheap abstract analyses first, keep only the accesses
they cannot settle, then decide those exactly with one focused reachability
search per remaining block.  The abstract exists-hit/exists-miss information
both filters out accesses that are provably undecidable (no point model
checking them) and halves the work for the rest.
"""

from __future__ import annotations

import enum
import logging
import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

from .ai import (
    EXISTS_HIT,
    EXISTS_MISS,
    MAY,
    MUST,
    AiClassification,
    ai_classify,
    fixpoint,
)
from .cfg import AccessId, CacheConfig, Cfg, ProjectedCfg, accesses_of, block_universe, project
from .concrete import (
    DEFAULT_ORACLE_BUDGET,
    InitMode,
    StateSpace,
    collecting_semantics,
    exact_classify,
)
from .focused import (
    DEFAULT_MC_BUDGET,
    check_access,
    focused_reach,
    initial_focused,
    refutation_exit,
    simplify_for,
    unsimplified_model,
)
from .verdict import Verdict

log = logging.getLogger(__name__)


class Mode(enum.Enum):
    """How much of the pipeline runs.

    ai-only: abstract analyses only; unsettled accesses stay unresolved.
    ai+mc: abstract analyses, then focused model checking of the residue.
    mc-only: focused model checking for everything, no abstract phase.
    ai+mc-no-du: like ai+mc but without the exists-hit/exists-miss domains,
    so provably undecidable accesses still reach the model checker.
    """

    AI_ONLY = "ai-only"
    AI_MC = "ai+mc"
    MC_ONLY = "mc-only"
    AI_MC_NO_DU = "ai+mc-no-du"

    def __str__(self) -> str:
        return self.value


class Provenance(enum.Enum):
    """Which stage of the pipeline produced a verdict."""

    MUST = "must"
    MAY = "may"
    EH_EM = "eh-em"
    MC_CHECK_AH = "mc-check-ah"
    MC_CHECK_AM = "mc-check-am"
    MC_REFUTED_BOTH = "mc-refuted-both"
    UNRESOLVED = "unresolved"

    def __str__(self) -> str:
        return self.value


MC_PROVENANCES = frozenset(
    {Provenance.MC_CHECK_AH, Provenance.MC_CHECK_AM, Provenance.MC_REFUTED_BOTH}
)


@dataclass(frozen=True)
class FinalVerdict:
    """Pipeline outcome for one access.

    `verdict` is None only in ai-only mode, for accesses the abstract phase
    could not settle; the flags then carry what is known about them.
    """

    access: AccessId
    set_index: int
    verdict: Optional[Verdict]
    provenance: Provenance
    exists_hit: bool
    exists_miss: bool


@dataclass
class PhaseStats:
    """Work and outcome counters for one classification run."""

    n_accesses: int = 0
    verdict_counts: Counter = field(default_factory=Counter)
    provenance_counts: Counter = field(default_factory=Counter)
    focused_runs: int = 0
    mc_access_checks: int = 0
    states_explored: int = 0
    t_ai_ms: float = 0.0
    t_mc_ms: float = 0.0

    def count(self, fv: FinalVerdict) -> None:
        self.n_accesses += 1
        self.verdict_counts[fv.verdict.value if fv.verdict else "unknown"] += 1
        self.provenance_counts[fv.provenance.value] += 1

    def absorb(self, other: "PhaseStats") -> None:
        self.n_accesses += other.n_accesses
        self.verdict_counts.update(other.verdict_counts)
        self.provenance_counts.update(other.provenance_counts)
        self.focused_runs += other.focused_runs
        self.mc_access_checks += other.mc_access_checks
        self.states_explored += other.states_explored
        self.t_ai_ms += other.t_ai_ms
        self.t_mc_ms += other.t_mc_ms

    def conserved(self) -> bool:
        """Every access has exactly one verdict and one provenance."""
        return (
            sum(self.verdict_counts.values()) == self.n_accesses
            and sum(self.provenance_counts.values()) == self.n_accesses
        )


@dataclass
class ClassifyResult:
    verdicts: list[FinalVerdict]
    stats: PhaseStats


def _final_flags(verdict: Verdict, reachable: bool) -> tuple[bool, bool]:
    # A settled verdict implies its flags, except at unreachable sources where
    # no execution exists at all.
    if not reachable:
        return (False, False)
    if verdict is Verdict.ALWAYS_HIT:
        return (True, False)
    if verdict is Verdict.ALWAYS_MISS:
        return (False, True)
    return (True, True)


def _classify_set(
    pg: ProjectedCfg,
    k: int,
    init: InitMode,
    mode: Mode,
    simplify: bool,
    mc_budget: int,
) -> tuple[dict[AccessId, FinalVerdict], PhaseStats]:
    stats = PhaseStats()
    accesses = accesses_of(pg)
    if not accesses:
        return {}, stats
    space = StateSpace(k=k, blocks=block_universe(pg))
    results: dict[AccessId, FinalVerdict] = {}
    residual: list[AiClassification] = []

    t0 = time.perf_counter()
    may_fix = None
    if mode is Mode.MC_ONLY:
        residual = [AiClassification(a, None, False, False) for a in accesses]
    else:
        must_fix = fixpoint(MUST, pg, space, init)
        may_fix = fixpoint(MAY, pg, space, init)
        with_du = mode in (Mode.AI_ONLY, Mode.AI_MC)
        eh_fix = fixpoint(EXISTS_HIT, pg, space, init) if with_du else None
        em_fix = fixpoint(EXISTS_MISS, pg, space, init) if with_du else None
        ai_provenance = {
            Verdict.ALWAYS_HIT: Provenance.MUST,
            Verdict.ALWAYS_MISS: Provenance.MAY,
            Verdict.DEFINITELY_UNKNOWN: Provenance.EH_EM,
        }
        for a in accesses:
            c = ai_classify(space, a, must_fix, may_fix, eh_fix, em_fix)
            if c.verdict is not None:
                results[a] = FinalVerdict(
                    a, pg.set_index, c.verdict, ai_provenance[c.verdict], c.exists_hit, c.exists_miss
                )
            else:
                residual.append(c)
    stats.t_ai_ms = (time.perf_counter() - t0) * 1000.0

    t1 = time.perf_counter()
    if mode is Mode.AI_ONLY:
        for c in residual:
            results[c.access] = FinalVerdict(
                c.access, pg.set_index, None, Provenance.UNRESOLVED, c.exists_hit, c.exists_miss
            )
    elif residual:
        by_block: dict = {}
        for c in residual:
            by_block.setdefault(c.access.block, []).append(c)
        for block in sorted(by_block):
            group = by_block[block]
            if simplify and may_fix is not None:
                model = simplify_for(pg, block, may_fix, space)
            else:
                model = unsimplified_model(pg, block, k)
            init_states = initial_focused(model.universe, block, k, init)
            goals = [(c.access.src, c.exists_hit, c.exists_miss) for c in group]
            reach = focused_reach(
                model, init_states, early_exit=refutation_exit(goals), budget=mc_budget
            )
            stats.focused_runs += 1
            stats.states_explored += reach.explored
            log.debug(
                "focused run: %s set %d block b%d: %d states%s",
                pg.name, pg.set_index, block.index, reach.explored,
                " (early exit)" if reach.partial else "",
            )
            for c in group:
                mv = check_access(reach, c.access, c.exists_hit, c.exists_miss)
                stats.mc_access_checks += 1
                if c.exists_hit:
                    prov = Provenance.MC_CHECK_AH
                elif c.exists_miss:
                    prov = Provenance.MC_CHECK_AM
                elif mv.result is Verdict.ALWAYS_HIT:
                    prov = Provenance.MC_CHECK_AH
                elif mv.result is Verdict.ALWAYS_MISS:
                    prov = Provenance.MC_CHECK_AM
                else:
                    prov = Provenance.MC_REFUTED_BOTH
                reachable = bool(reach.states[c.access.src])
                eh_flag, em_flag = _final_flags(mv.result, reachable)
                results[c.access] = FinalVerdict(
                    c.access, pg.set_index, mv.result, prov, eh_flag, em_flag
                )
    stats.t_mc_ms = (time.perf_counter() - t1) * 1000.0

    for fv in results.values():
        stats.count(fv)
    return results, stats


def classify_all(
    g: Cfg,
    config: CacheConfig,
    init: InitMode = InitMode.EMPTY,
    mode: Mode = Mode.AI_MC,
    *,
    simplify: bool = True,
    jobs: int = 1,
    mc_budget: int = DEFAULT_MC_BUDGET,
) -> ClassifyResult:
    """Classify every access of a program, one cache set at a time.

    Sets are independent, so with `jobs` above one they run in a thread pool;
    results are merged in set order and reported in the program's access
    order, so the output never depends on scheduling.
    """
    per_set_inputs = [project(g, s, config) for s in range(config.num_sets)]

    def run(pg: ProjectedCfg):
        return _classify_set(pg, config.associativity, init, mode, simplify, mc_budget)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            per_set = list(pool.map(run, per_set_inputs))
    else:
        per_set = [run(pg) for pg in per_set_inputs]

    merged: dict[AccessId, FinalVerdict] = {}
    stats = PhaseStats()
    for results, set_stats in per_set:
        merged.update(results)
        stats.absorb(set_stats)
    ordered = [merged[a] for a in accesses_of(g)]
    return ClassifyResult(verdicts=ordered, stats=stats)


@dataclass(frozen=True)
class OracleEntry:
    """One access compared between the pipeline and the exact oracle."""

    access: AccessId
    set_index: int
    pipeline: Optional[Verdict]
    oracle: Verdict
    provenance: Provenance
    agree: bool
    mc_resolved: bool


@dataclass
class OracleReport:
    entries: list[OracleEntry]
    n_checked: int
    n_disagreements: int
    n_mc_resolved: int


def verify_against_oracle(
    g: Cfg,
    config: CacheConfig,
    init: InitMode = InitMode.EMPTY,
    mode: Mode = Mode.AI_MC,
    *,
    simplify: bool = True,
    jobs: int = 1,
    mc_budget: int = DEFAULT_MC_BUDGET,
    oracle_budget: int = DEFAULT_ORACLE_BUDGET,
) -> OracleReport:
    """Compare pipeline verdicts against exhaustive concrete enumeration.

    A settled verdict that differs from the oracle is a disagreement.  An
    unresolved access (ai-only mode) is a disagreement only when one of its
    flags contradicts the oracle: a known-possible hit against always-miss, or
    a known-possible miss against always-hit.
    """
    result = classify_all(
        g, config, init, mode, simplify=simplify, jobs=jobs, mc_budget=mc_budget
    )
    by_access = {fv.access: fv for fv in result.verdicts}

    entries: list[OracleEntry] = []
    for s in range(config.num_sets):
        pg = project(g, s, config)
        accesses = accesses_of(pg)
        if not accesses:
            continue
        space = StateSpace(k=config.associativity, blocks=block_universe(pg))
        reach = collecting_semantics(pg, space, init, budget=oracle_budget)
        for a in accesses:
            truth = exact_classify(space, reach, a)
            fv = by_access[a]
            if fv.verdict is not None:
                agree = fv.verdict == truth
            else:
                agree = not (
                    (fv.exists_hit and truth is Verdict.ALWAYS_MISS)
                    or (fv.exists_miss and truth is Verdict.ALWAYS_HIT)
                )
            entries.append(
                OracleEntry(
                    access=a,
                    set_index=s,
                    pipeline=fv.verdict,
                    oracle=truth,
                    provenance=fv.provenance,
                    agree=agree,
                    mc_resolved=fv.provenance in MC_PROVENANCES,
                )
            )
    order = {a: i for i, a in enumerate(accesses_of(g))}
    entries.sort(key=lambda e: order[e.access])
    return OracleReport(
        entries=entries,
        n_checked=len(entries),
        n_disagreements=sum(1 for e in entries if not e.agree),
        n_mc_resolved=sum(1 for e in entries if e.mc_resolved),
    )
