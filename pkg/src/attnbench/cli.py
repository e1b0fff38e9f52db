"""Command-line entry point: ``attnbench {verify,bench,efflen,ci,support}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from ._backend import backend_name
from .core import MECHANISM_NAMES, SUPPORT, AttentionPattern, canonical_name, support_table_csv, support_table_text
from .errors import AttnBenchError, UnknownMechanismError, UnsupportedPatternError

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _output_path(text: str) -> Path:
    path = Path(text)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _mechanism_list(text: str | None, pattern: AttentionPattern) -> list[str]:
    if not text or text == "all":
        return [m for m in MECHANISM_NAMES if pattern in SUPPORT[m]]
    return [canonical_name(part) for part in text.split(",") if part.strip()]


def _lengths(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"lengths must be comma-separated integers, got {text!r}") from None


def _pattern(text: str) -> AttentionPattern:
    try:
        return AttentionPattern.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def cmd_verify(args) -> int:
    from .verify import format_report, run_all

    names = list(MECHANISM_NAMES) if args.mechanism == "all" else [canonical_name(args.mechanism)]
    results = run_all(names, seed=args.seed)
    sys.stdout.write(format_report(results))
    failed = [r for r in results if not r.passed]
    for r in failed:
        print(f"FAILED: {r.mechanism} {r.check} {r.note}".rstrip(), file=sys.stderr)
    return EXIT_FAIL if failed else EXIT_OK


def cmd_bench(args) -> int:
    from .bench import BenchConfig, format_records, relative_to_vanilla, run_bench, write_records_csv
    from .charts import write_bench_svg
    from .mechanisms import MechanismConfig

    overrides = {"seed": args.seed, "mechanism": MechanismConfig(seed=args.seed)}
    if args.lengths:
        overrides["lengths"] = args.lengths
    if args.repeats is not None:
        overrides["repeats"] = args.repeats
    try:
        config = BenchConfig.small(**overrides) if args.small else BenchConfig(**overrides)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    names = _mechanism_list(args.mechanisms, args.pattern)
    print(f"backend: {backend_name()}  emb_dim={config.emb_dim} heads={config.heads} batch={config.batch} "
          f"repeats={config.repeats} warmup={config.warmup}")
    records = run_bench(config, names, args.pattern)
    if "vanilla" in names:
        records = relative_to_vanilla(records)
    print(format_records(records))
    print("(timings are volatile; peak bytes are deterministic)")
    if args.out:
        out = _output_path(args.out)
        write_records_csv(records, out)
        svg = out.with_suffix(".svg")
        write_bench_svg(records, svg)
        print(f"wrote {out} and {svg}")
    return EXIT_OK


def cmd_efflen(args) -> int:
    from .bench import read_records_csv
    from .efflen import efficiency_report

    records = read_records_csv(args.input)
    try:
        report = efficiency_report(records, baseline=canonical_name(args.baseline))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    text = json.dumps(report, indent=2) + "\n"
    if args.out:
        _output_path(args.out).write_text(text)
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_ci(args) -> int:
    from . import ci

    records = ci.read_metrics_csv(args.metrics)
    if args.stats:
        stats = ci.read_stats_csv(args.stats)
    else:
        excluded = {x.strip() for x in (args.exclude or "").split(",") if x.strip()}
        stats = ci.compute_stats([r for r in records if r.model not in excluded], ddof=0 if args.population else 1)
    per_task, overall = ci.score(records, stats)
    width = max(len(m) for m, _ in overall)
    for model, value in overall:
        tasks = "  ".join(f"{t}={v:+.3f}" for m, t, v in per_task if m == model)
        print(f"{model:<{width}}  CI={value:+.3f}  {tasks}")
    if args.out:
        prefix = _output_path(args.out)
        task_path = prefix.with_name(prefix.stem + "_task.csv")
        overall_path = prefix.with_name(prefix.stem + "_overall.csv")
        ci.write_task_csv(per_task, task_path)
        ci.write_overall_csv(overall, overall_path)
        print(f"wrote {task_path} and {overall_path}")
    return EXIT_OK


def cmd_support(args) -> int:
    sys.stdout.write(support_table_text())
    if args.out:
        _output_path(args.out).write_text(support_table_csv())
        print(f"wrote {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="attnbench", description="Efficient attention kernels and benchmark tooling.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="run oracle, causality and invariant checks")
    p.add_argument("--mechanism", default="all", help="mechanism name or 'all'")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("bench", help="time and memory over increasing lengths")
    p.add_argument("--mechanisms", help="comma list (default: every mechanism supporting the pattern)")
    p.add_argument("--pattern", type=_pattern, default=AttentionPattern.NS, help="ns, cs, nc or cc")
    p.add_argument("--lengths", type=_lengths, help="comma list of sequence lengths")
    p.add_argument("--repeats", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--small", action="store_true", help="emb_dim 64, 2 heads, batch 1")
    p.add_argument("--out", help="CSV path; an SVG chart is written next to it")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("efflen", help="fit cost curves and compute efficiency lengths")
    p.add_argument("--input", required=True, help="bench CSV")
    p.add_argument("--baseline", default="vanilla")
    p.add_argument("--out", help="JSON path (default stdout)")
    p.add_argument("--seed", type=int, default=0, help="unused; accepted for uniformity")
    p.set_defaults(func=cmd_efflen)

    p = sub.add_parser("ci", help="compositional index from raw metrics")
    p.add_argument("--metrics", required=True, help="CSV: model,task,metric,value,direction")
    p.add_argument("--stats", help="CSV: task,metric,mu,sigma (default: computed from --metrics)")
    p.add_argument("--exclude", help="models left out when computing stats (comma list)")
    p.add_argument("--population", action="store_true", help="population instead of sample deviation")
    p.add_argument("--out", help="output prefix; writes <prefix>_task.csv and <prefix>_overall.csv")
    p.add_argument("--seed", type=int, default=0, help="unused; accepted for uniformity")
    p.set_defaults(func=cmd_ci)

    p = sub.add_parser("support", help="print the mechanism x pattern support matrix")
    p.add_argument("--out", help="also write it as CSV")
    p.add_argument("--seed", type=int, default=0, help="unused; accepted for uniformity")
    p.set_defaults(func=cmd_support)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    print(f"seed: {args.seed}")
    try:
        return args.func(args)
    except (UnknownMechanismError, UnsupportedPatternError, UsageError) as exc:
        print(f"attnbench {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, AttnBenchError, ValueError, KeyError) as exc:
        print(f"attnbench {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
