"""Command-line entry point: ``secrow run | verify | bench``.

Exit codes: 0 success, 1 an assertion failed, 2 usage or parse error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .bench import run_bench
from .crypto import BACKENDS
from .defenses import Defenses
from .errors import ParseError, UnknownSUT
from .harness.checker import verify
from .harness.sut import SUT_LABELS, SystemUnderTest
from .scenario import bundled_names, load, run_scenario, write_outputs
from .systems import SYSTEM_LABELS

# exactly the conditions the insecure baseline is known to violate
BASELINE_VIOLATIONS = frozenset({"C1", "C3", "C4", "C5", "C6", "C7"})

EXIT_OK, EXIT_FAILED, EXIT_USAGE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 bits")
    return value


def positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="secrow", description="SECrow protocol simulator and security harness")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run a scenario file (or a bundled scenario by name)")
    run.add_argument("file")
    run.add_argument("--seed", type=u64, default=0)
    run.add_argument("--out", type=Path, default=Path("out"))
    run.add_argument("--system", choices=SYSTEM_LABELS, help="override the scenario's system")

    ver = sub.add_parser("verify", help="run the condition batteries against a system")
    ver.add_argument("sut")
    ver.add_argument("--format", choices=("text", "json"), default="text")
    ver.add_argument("--seed", type=u64, default=0)
    ver.add_argument("--disable", action="append", default=[], choices=Defenses.knobs(), metavar="KNOB",
                     help="turn off one defense (repeatable)")
    ver.add_argument("--witness-dir", type=Path, default=Path("witnesses"))

    bench = sub.add_parser("bench", help="time primitives and flows")
    bench.add_argument("--reps", type=positive, default=10)
    bench.add_argument("--format", choices=("text", "json"), default="text")
    bench.add_argument("--backend", choices=BACKENDS, default="ec")

    sub.add_parser("scenarios", help="list bundled scenarios")
    return parser


def cmd_run(args) -> int:
    try:
        scenario = load(args.file)
    except ParseError as exc:
        print(f"{args.file}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError:
        print(f"no such scenario: {args.file}", file=sys.stderr)
        return EXIT_USAGE
    result = run_scenario(scenario, args.seed, args.system)
    paths = write_outputs(result, args.out)
    sys.stdout.write(result.render_report())
    print(f"transcript: {paths['transcript']}\nreport: {paths['report']}")
    return EXIT_OK if result.ok else EXIT_FAILED


def verify_exit(label: str, report) -> int:
    violated = {c.value for c in report.violated}
    if label == "baseline_trackr" and not report.disabled:
        return EXIT_OK if violated == BASELINE_VIOLATIONS else EXIT_FAILED
    return EXIT_OK if not violated else EXIT_FAILED


def cmd_verify(args) -> int:
    if args.sut not in SUT_LABELS:
        print(f"UnknownSUT: {args.sut!r} (choose from {', '.join(SUT_LABELS)})", file=sys.stderr)
        return EXIT_USAGE
    try:
        sut = SystemUnderTest(args.sut).with_disabled(*args.disable)
    except UnknownSUT as exc:
        print(f"UnknownSUT: {exc}", file=sys.stderr)
        return EXIT_USAGE
    report = verify(sut, seeds=(args.seed,), witness_dir=args.witness_dir)
    if args.format == "json":
        print(json.dumps(report.to_json(), indent=2))
    else:
        sys.stdout.write(report.render_text())
    return verify_exit(args.sut, report)


def cmd_bench(args) -> int:
    report = run_bench(args.reps, args.backend)
    if args.format == "json":
        print(json.dumps(report.to_json(), indent=2))
    else:
        sys.stdout.write(report.render_text())
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "scenarios":
        print("\n".join(bundled_names()))
        return EXIT_OK
    return {"run": cmd_run, "verify": cmd_verify, "bench": cmd_bench}[args.command](args)


if __name__ == "__main__":
    raise SystemExit(main())
