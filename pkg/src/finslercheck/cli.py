"""Command-line interface: run scenario files and list the registry.

    finslercheck run rho0-regression --outdir reports
    finslercheck run path/to/custom.yaml --seed 3 --format machine
    finslercheck list
    finslercheck list --scenarios

Bare scenario names resolve against FINSLERCHECK_SCENARIOS and then the
scenarios bundled with the package.  Exit status is 0 only if every
selected check passed.
"""

from __future__ import annotations

import argparse
import datetime
import os
import sys
from pathlib import Path

from .registry import list_registry
from .report import human_table, machine_json, write_outputs
from .scenario import ScenarioError, load_scenario, run_scenario

BUNDLED = Path(__file__).parent / "scenarios"
ENV_DIR = "FINSLERCHECK_SCENARIOS"


def resolve_scenario_path(token: str) -> Path:
    cand = Path(token)
    if cand.exists():
        return cand
    names = [token, f"{token}.yaml", f"{token}.yml"]
    roots = []
    env = os.environ.get(ENV_DIR)
    if env:
        roots.append(Path(env))
    roots.append(BUNDLED)
    for root in roots:
        for name in names:
            p = root / name
            if p.exists():
                return p
    raise FileNotFoundError(
        f"scenario {token!r} not found (searched {', '.join(str(r) for r in roots)})"
    )


def bundled_scenarios() -> list[Path]:
    return sorted(BUNDLED.glob("*.yaml"))


def cmd_run(args: argparse.Namespace) -> int:
    try:
        path = resolve_scenario_path(args.scenario)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        scn = load_scenario(path)
    except ScenarioError as exc:
        print(f"error: invalid scenario {path}: {exc}", file=sys.stderr)
        return 2
    if args.only:
        from .registry import UnknownEquationError, resolve_selection

        try:
            chosen = resolve_selection([t.strip() for t in args.only.split(",") if t.strip()])
        except UnknownEquationError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        keep = tuple(i for i in scn.ids if i in set(chosen))
        if not keep:
            print("error: --only leaves no checks selected for this scenario", file=sys.stderr)
            return 2
        scn.ids = keep
    if args.tol is not None:
        for eid in scn.ids:
            scn.tolerances.setdefault(eid, {})["rel"] = args.tol
    try:
        result = run_scenario(scn, seed=args.seed)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    stamp = datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")
    if args.outdir:
        paths = write_outputs(result, args.outdir, timestamp=stamp, figures=not args.no_figures)
        locs = "  ".join(f"{k}: {v}" for k, v in paths.items())
    else:
        locs = ""
    if args.format == "machine":
        sys.stdout.write(machine_json(result, timestamp=stamp))
    else:
        sys.stdout.write(human_table(result))
        if locs:
            print(f"wrote {locs}")
    return 0 if result.all_passed else 1


def cmd_list(args: argparse.Namespace) -> int:
    if args.scenarios:
        print("bundled scenarios:")
        for p in bundled_scenarios():
            print(f"  {p.stem}")
        env = os.environ.get(ENV_DIR)
        if env:
            print(f"scenario search dir ({ENV_DIR}): {env}")
        return 0
    rows = [("id", "tags", "context", "tol", "description")]
    for e in list_registry():
        rows.append((e.id, ",".join(e.tags), e.context, f"{e.tol_rel:.0e}", e.description))
    widths = [max(len(r[i]) for r in rows) for i in range(4)]
    for k, r in enumerate(rows):
        print("  ".join(str(c).ljust(w) for c, w in zip(r[:4], widths)) + "  " + r[4])
        if k == 0:
            print("  ".join("-" * w for w in widths) + "  " + "-" * 24)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="finslercheck", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a scenario file")
    run.add_argument("scenario", help="scenario path or bundled name")
    run.add_argument("--seed", type=int, default=None, help="override the sample seed")
    run.add_argument("--tol", type=float, default=None, help="override the relative tolerance for all selected checks")
    run.add_argument("--only", default=None, help="comma list of equation ids or tags to keep")
    run.add_argument("--format", choices=("human", "machine"), default="human")
    run.add_argument("--outdir", default=None, help="write json/csv/figure outputs here")
    run.add_argument("--no-figures", action="store_true", help="skip the residual chart")
    run.set_defaults(func=cmd_run)
    ls = sub.add_parser("list", help="list the check registry or bundled scenarios")
    ls.add_argument("--scenarios", action="store_true", help="list bundled scenario names instead")
    ls.set_defaults(func=cmd_list)
    return ap


def main(argv: list[str] | None = None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    # `--list` anywhere is a shorthand for the list subcommand
    if "--list" in argv:
        rest = [a for a in argv if a != "--list"]
        argv = ["list"] + [a for a in rest if a != "list"]
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
