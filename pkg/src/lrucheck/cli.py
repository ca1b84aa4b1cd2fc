"""Command line interface.

Subcommands: analyze (classify and emit a JSON report), verify (differential
check against the exact oracle), export-smv (emit focused cache models for an
external model checker), gen (write synthetic programs), bench (run the
experiment harness over a corpus).

Reports and exports go to stdout or to files; stderr carries only diagnostics.
Exit codes: 0 success, 1 oracle disagreement, 2 input or usage error,
3 analysis budget exceeded, 4 input/output error.
"""

from __future__ import annotations

import argparse
import logging
import os
import re
import sys
from typing import Optional, Sequence

from .bench import (
    DEFAULT_CONFIG,
    GenError,
    GenSpec,
    generate_json,
    run_experiment,
    summarize,
    write_csv,
)
from .cfg import CacheConfig, CfgParseError, accesses_of, block_universe, load_cfg, project
from .classify import Mode, classify_all, verify_against_oracle
from .concrete import DEFAULT_ORACLE_BUDGET, InitMode, StateSpace
from .focused import (
    DEFAULT_MC_BUDGET,
    export_smv,
    simplify_for,
    smv_filename,
    unsimplified_model,
)
from .report import build_report, render_report

EXIT_OK = 0
EXIT_DISAGREE = 1
EXIT_USAGE = 2
EXIT_BUDGET = 3
EXIT_IO = 4

log = logging.getLogger(__name__)


def _add_cache_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--assoc", type=int, default=DEFAULT_CONFIG.associativity,
                   help="cache associativity (ways per set)")
    p.add_argument("--sets", type=int, default=DEFAULT_CONFIG.num_sets,
                   help="number of cache sets (power of two)")
    p.add_argument("--block-size", type=int, default=DEFAULT_CONFIG.block_size,
                   help="cache line size in bytes (power of two)")
    p.add_argument("--init", choices=[m.value for m in InitMode], default="empty",
                   help="initial cache contents")
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                   help="worker threads over cache sets")
    p.add_argument("--budget-oracle", type=int, default=DEFAULT_ORACLE_BUDGET,
                   help="state budget for the exact oracle")
    p.add_argument("--budget-mc", type=int, default=DEFAULT_MC_BUDGET,
                   help="state budget per focused search")
    p.add_argument("--config", metavar="FILE", default=None,
                   help="key=value defaults file; command line flags win")


def _add_mode_flag(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mode", choices=[m.value for m in Mode], default="ai+mc",
                   help="pipeline mode")
    p.add_argument("--no-simplify", action="store_true",
                   help="model check on raw per-set graphs, skipping may-based pruning")


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = argparse.ArgumentParser(
        prog="lrucheck",
        description="Static always-hit/always-miss classification for LRU instruction caches.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    commands: dict[str, argparse.ArgumentParser] = {}

    p = sub.add_parser("analyze", help="classify every access and emit a JSON report")
    p.add_argument("input", help="CFG JSON file")
    _add_cache_flags(p)
    _add_mode_flag(p)
    p.add_argument("--out", default=None, help="report file (default: stdout)")
    p.add_argument("--with-oracle", action="store_true",
                   help="also run the exact oracle and embed the comparison")
    p.add_argument("--timings", action="store_true",
                   help="include wall-clock timings (makes output non-reproducible)")
    commands["analyze"] = p

    p = sub.add_parser("verify", help="check pipeline verdicts against the exact oracle")
    p.add_argument("input", help="CFG JSON file")
    _add_cache_flags(p)
    _add_mode_flag(p)
    p.add_argument("--out", default=None, help="write the differential report as JSON")
    commands["verify"] = p

    p = sub.add_parser("export-smv", help="emit focused cache models in SMV syntax")
    p.add_argument("input", help="CFG JSON file")
    _add_cache_flags(p)
    _add_mode_flag(p)
    p.add_argument("--outdir", default=".", help="directory for .smv files")
    p.add_argument("--block", type=int, default=None,
                   help="export this block index only, targeting all its accesses")
    commands["export-smv"] = p

    p = sub.add_parser("gen", help="generate synthetic CFG JSON programs")
    p.add_argument("--seed", type=int, default=0, help="seed of the first program")
    p.add_argument("--count", type=int, default=1, help="how many programs (consecutive seeds)")
    p.add_argument("--outdir", default=".", help="directory for generated files")
    p.add_argument("--gen-vertices", type=int, default=10)
    p.add_argument("--gen-loops", type=int, default=1)
    p.add_argument("--gen-depth", type=int, default=1)
    p.add_argument("--gen-branch-p", type=float, default=0.3)
    p.add_argument("--gen-blocks", type=int, default=4)
    p.add_argument("--gen-access-p", type=float, default=0.7)
    p.add_argument("--block-size", type=int, default=DEFAULT_CONFIG.block_size)
    p.add_argument("--sets", type=int, default=DEFAULT_CONFIG.num_sets)
    p.add_argument("--config", metavar="FILE", default=None)
    commands["gen"] = p

    p = sub.add_parser("bench", help="run the pipeline over a corpus and write a CSV")
    p.add_argument("--corpus", required=True, help="directory of CFG JSON files")
    p.add_argument("--modes", default="ai+mc,mc-only",
                   help="comma-separated pipeline modes to run")
    _add_cache_flags(p)
    p.add_argument("--no-simplify", action="store_true")
    p.add_argument("--out", default="bench.csv", help="CSV output path")
    p.add_argument("--timings", action="store_true",
                   help="record wall-clock timings (makes output non-reproducible)")
    commands["bench"] = p

    return parser, commands


def _load_config_file(path: str, sub: argparse.ArgumentParser) -> dict:
    """Read `key = value` defaults; keys are long option names without dashes."""
    valid = {a.dest for a in sub._actions}
    overrides: dict = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise CfgParseError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            dest = key.replace("-", "_")
            if dest not in valid:
                raise CfgParseError(f"{path}:{lineno}: unknown option {key!r}")
            overrides[dest] = value
    return overrides


def _coerce_config_values(sub: argparse.ArgumentParser, overrides: dict) -> dict:
    coerced = {}
    for action in sub._actions:
        if action.dest in overrides:
            raw = overrides[action.dest]
            if action.type is not None:
                try:
                    coerced[action.dest] = action.type(raw)
                except ValueError as exc:
                    raise CfgParseError(
                        f"config option {action.dest}: bad value {raw!r}"
                    ) from exc
            elif isinstance(action.const, bool) or isinstance(action.default, bool):
                coerced[action.dest] = raw.lower() in ("1", "true", "yes", "on")
            else:
                coerced[action.dest] = raw
            if action.choices and coerced[action.dest] not in action.choices:
                raise CfgParseError(
                    f"config option {action.dest}: {raw!r} not one of {sorted(action.choices)}"
                )
    return coerced


def _cache_config(args: argparse.Namespace) -> CacheConfig:
    try:
        return CacheConfig(
            associativity=args.assoc,
            num_sets=args.sets,
            block_size=args.block_size,
        )
    except ValueError as exc:
        raise CfgParseError(str(exc)) from exc


def _write_text(path: Optional[str], text: str) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def cmd_analyze(args: argparse.Namespace) -> int:
    config = _cache_config(args)
    g = load_cfg(args.input, config)
    init = InitMode(args.init)
    mode = Mode(args.mode)
    result = classify_all(
        g, config, init, mode,
        simplify=not args.no_simplify, jobs=args.jobs, mc_budget=args.budget_mc,
    )
    oracle = None
    if args.with_oracle:
        oracle = verify_against_oracle(
            g, config, init, mode,
            simplify=not args.no_simplify, jobs=args.jobs,
            mc_budget=args.budget_mc, oracle_budget=args.budget_oracle,
        )
    doc = build_report(
        g, config, init, mode, result,
        simplify=not args.no_simplify, timings=args.timings, oracle=oracle,
    )
    _write_text(args.out, render_report(doc))
    if oracle is not None and oracle.n_disagreements:
        log.error("oracle disagreements: %d", oracle.n_disagreements)
        return EXIT_DISAGREE
    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    config = _cache_config(args)
    g = load_cfg(args.input, config)
    init = InitMode(args.init)
    mode = Mode(args.mode)
    result = classify_all(
        g, config, init, mode,
        simplify=not args.no_simplify, jobs=args.jobs, mc_budget=args.budget_mc,
    )
    oracle = verify_against_oracle(
        g, config, init, mode,
        simplify=not args.no_simplify, jobs=args.jobs,
        mc_budget=args.budget_mc, oracle_budget=args.budget_oracle,
    )
    if args.out:
        doc = build_report(
            g, config, init, mode, result, simplify=not args.no_simplify, oracle=oracle,
        )
        _write_text(args.out, render_report(doc))
    status = "ok" if oracle.n_disagreements == 0 else "DISAGREE"
    sys.stdout.write(
        f"{status}: {oracle.n_checked} accesses checked, "
        f"{oracle.n_disagreements} disagreements, "
        f"{oracle.n_mc_resolved} resolved by model checking\n"
    )
    return EXIT_OK if oracle.n_disagreements == 0 else EXIT_DISAGREE


def cmd_export_smv(args: argparse.Namespace) -> int:
    from .ai import MAY, fixpoint

    config = _cache_config(args)
    g = load_cfg(args.input, config)
    init = InitMode(args.init)
    mode = Mode(args.mode)
    simplify = not args.no_simplify
    os.makedirs(args.outdir, exist_ok=True)

    written: list[str] = []
    known_blocks: set[int] = set()
    for s in range(config.num_sets):
        pg = project(g, s, config)
        accesses = accesses_of(pg)
        if not accesses:
            continue
        universe = block_universe(pg)
        known_blocks.update(b.index for b in universe)
        space = StateSpace(k=config.associativity, blocks=universe)
        may_fix = fixpoint(MAY, pg, space, init) if mode is not Mode.MC_ONLY else None

        if args.block is not None:
            targets_by_block = {
                b: [a for a in accesses if a.block == b]
                for b in universe
                if b.index == args.block
            }
            targets_by_block = {b: t for b, t in targets_by_block.items() if t}
        else:
            residual = _residual_accesses(pg, space, init, mode)
            targets_by_block = {}
            for a in residual:
                targets_by_block.setdefault(a.block, []).append(a)

        for block in sorted(targets_by_block):
            targets = targets_by_block[block]
            if simplify and may_fix is not None:
                model = simplify_for(pg, block, may_fix, space)
            else:
                model = unsimplified_model(pg, block, config.associativity)
            text = export_smv(model, init, targets)
            path = os.path.join(args.outdir, smv_filename(g.name, s, block))
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text)
            written.append(path)

    if args.block is not None and args.block not in known_blocks:
        valid = ", ".join(str(i) for i in sorted(known_blocks)) or "none"
        raise CfgParseError(
            f"block {args.block} is never accessed; accessed block indexes: {valid}"
        )
    for path in written:
        sys.stdout.write(path + "\n")
    return EXIT_OK


def _residual_accesses(pg, space, init, mode):
    from .ai import EXISTS_HIT, EXISTS_MISS, MAY, MUST, ai_classify, fixpoint

    accesses = accesses_of(pg)
    if mode is Mode.MC_ONLY:
        return accesses
    must_fix = fixpoint(MUST, pg, space, init)
    may_fix = fixpoint(MAY, pg, space, init)
    with_du = mode in (Mode.AI_ONLY, Mode.AI_MC)
    eh_fix = fixpoint(EXISTS_HIT, pg, space, init) if with_du else None
    em_fix = fixpoint(EXISTS_MISS, pg, space, init) if with_du else None
    return [
        a for a in accesses
        if ai_classify(space, a, must_fix, may_fix, eh_fix, em_fix).verdict is None
    ]


def cmd_gen(args: argparse.Namespace) -> int:
    os.makedirs(args.outdir, exist_ok=True)
    config = CacheConfig(
        associativity=DEFAULT_CONFIG.associativity,
        num_sets=args.sets,
        block_size=args.block_size,
    )
    for seed in range(args.seed, args.seed + args.count):
        spec = GenSpec(
            vertices=args.gen_vertices,
            loops=args.gen_loops,
            depth=args.gen_depth,
            branch_p=args.gen_branch_p,
            blocks=args.gen_blocks,
            access_p=args.gen_access_p,
            seed=seed,
        )
        text = generate_json(spec, config)
        path = os.path.join(args.outdir, f"gen{seed}.json")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
        sys.stdout.write(path + "\n")
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    config = _cache_config(args)
    init = InitMode(args.init)
    try:
        modes = [Mode(m.strip()) for m in args.modes.split(",") if m.strip()]
    except ValueError as exc:
        raise CfgParseError(f"unknown mode in --modes: {exc}") from exc
    if not modes:
        raise CfgParseError("--modes must name at least one mode")

    names = sorted(n for n in os.listdir(args.corpus) if n.endswith(".json"))
    if not names:
        raise CfgParseError(f"no .json programs found in {args.corpus!r}")
    programs = []
    for n in names:
        g = load_cfg(os.path.join(args.corpus, n), config)
        m = re.search(r"(\d+)$", os.path.splitext(n)[0])
        programs.append((g.name, int(m.group(1)) if m else -1, g))

    rows, errors = run_experiment(
        programs, config, modes, init,
        simplify=not args.no_simplify, jobs=args.jobs,
        mc_budget=args.budget_mc, timings=args.timings,
    )
    write_csv(rows, args.out)
    for err in errors:
        log.warning("%s", err)
    summary = summarize(rows)
    sys.stdout.write(f"wrote {len(rows)} rows to {args.out}\n")
    for mode_name, totals in sorted(summary["totals"].items()):
        sys.stdout.write(
            f"  {mode_name}: {totals['programs']} programs, {totals['n_access']} accesses, "
            f"AH {totals['n_ah']} / AM {totals['n_am']} / DU {totals['n_du']}, "
            f"{totals['focused_runs']} focused runs\n"
        )
    for mode_name, ratio in sorted(summary["focused_run_ratio_vs_ai_mc"].items()):
        sys.stdout.write(f"  focused-run ratio {mode_name} vs ai+mc: {ratio:.2f}x (geomean)\n")
    return EXIT_OK


_COMMANDS = {
    "analyze": cmd_analyze,
    "verify": cmd_verify,
    "export-smv": cmd_export_smv,
    "gen": cmd_gen,
    "bench": cmd_bench,
}


def _setup_logging() -> None:
    level_name = os.environ.get("CACHE_ORACLE_LOG", "").strip().lower()
    levels = {"": logging.WARNING, "0": logging.WARNING, "1": logging.INFO, "2": logging.DEBUG,
              "info": logging.INFO, "debug": logging.DEBUG, "warning": logging.WARNING}
    logging.basicConfig(
        stream=sys.stderr,
        level=levels.get(level_name, logging.INFO),
        format="%(levelname)s %(name)s: %(message)s",
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    _setup_logging()
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, commands = build_parser()

    # Config files supply defaults, so they must be applied before parsing.
    if argv and argv[0] in commands:
        sub = commands[argv[0]]
        config_path = None
        for i, a in enumerate(argv):
            if a == "--config" and i + 1 < len(argv):
                config_path = argv[i + 1]
            elif a.startswith("--config="):
                config_path = a.split("=", 1)[1]
        if config_path is not None:
            try:
                overrides = _load_config_file(config_path, sub)
                sub.set_defaults(**_coerce_config_values(sub, overrides))
            except OSError as exc:
                sys.stderr.write(f"error: cannot read config file: {exc}\n")
                return EXIT_IO
            except CfgParseError as exc:
                sys.stderr.write(f"error: {exc}\n")
                return EXIT_USAGE

    args = parser.parse_args(argv)
    from .concrete import OracleCapacityError
    from .focused import FocusedCapacityError

    try:
        return _COMMANDS[args.command](args)
    except CfgParseError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
    except GenError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
    except OracleCapacityError as exc:
        sys.stderr.write(f"error: {exc} (raise --budget-oracle to allow more states)\n")
        return EXIT_BUDGET
    except FocusedCapacityError as exc:
        sys.stderr.write(f"error: {exc} (raise --budget-mc to allow more states)\n")
        return EXIT_BUDGET
    except OSError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
