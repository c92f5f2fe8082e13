"""Command-line driver.

    adme solve GOAL [--max-solutions N] [--cap K] [--out DIR]
    adme validate GOAL DDD
    adme run GOAL SCENARIO [--initial DDD] [--seed S] [--until T] [--log FILE] [--ddd FILE]
    adme serve GOAL [--port P] [--initial DDD]

Exit codes: solve 0 SAT / 1 UNSAT or LIMIT / 2 error; validate 0 clean /
1 violations / 2 error; run 0 OK / 3 DEGRADED / 2 error.
"""
from __future__ import annotations

import argparse
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .deladas import DeladasError, Goal, parse_goal
from .fabric import FabricError, FabricParams, ScenarioError, create_fabric, parse_scenario
from .madme import ConstraintError, EnactError, Manager
from .model import Configuration, DddParseError, SchemaError, Violation, from_ddd, to_ddd, validate
from .solver import SAT, SolveOptions, solve_goal

EXIT_OK, EXIT_FAIL, EXIT_ERROR, EXIT_DEGRADED = 0, 1, 2, 3


@dataclass
class RunReport:
    event_log: list[str]
    final_ddd: bytes
    final_violations: list[Violation]
    solver_calls: int
    exit_status: str  # OK | DEGRADED
    constraint_errors: list[str] = field(default_factory=list)

    @property
    def exit_code(self) -> int:
        return EXIT_OK if self.exit_status == "OK" else EXIT_DEGRADED


def _err(msg: str):
    print(f"adme: {msg}", file=sys.stderr)


def load_goal(path: str) -> Goal:
    return parse_goal(Path(path).read_text(encoding="utf-8"))


def run_scenario(goal: Goal, directives, *, initial: Configuration | None = None, seed: int = 0,
                 until: int | None = None, params: FabricParams | None = None, cap: int = 1,
                 heartbeats: bool = False) -> RunReport:
    """Deploy *goal* on a fresh fabric, replay *directives* and report."""
    params = params or FabricParams()
    fabric = create_fabric(goal.hosts, params, seed)
    manager = Manager(goal, fabric, cap=cap)
    try:
        manager.deploy(initial)
    except (ConstraintError, EnactError):
        pass
    for d in directives:
        fabric.inject(d)
    if until is None:
        last = directives[-1].time if directives else 0
        until = last + 10 * params.heartbeat_ms
    fabric.run_until(until)
    violations = manager.violations()
    ok = manager.ok
    log = [line for line in fabric.log if heartbeats or " AMP_HEARTBEAT " not in line]
    final = to_ddd(manager.deployed) if manager.deployed is not None else to_ddd(Configuration(goal.name))
    return RunReport(log, final, violations, manager.solver_calls, "OK" if ok else "DEGRADED",
                     [e.reason for e in manager.constraint_errors])


# -- commands

def cmd_solve(args) -> int:
    try:
        goal = load_goal(args.goal)
        count = math.inf if args.max_solutions == 0 else args.max_solutions
        outcome = solve_goal(goal, args.cap, SolveOptions(max_solutions=count, node_limit=args.node_limit,
                                                          time_budget=args.time_budget))
    except (OSError, DeladasError, ValueError) as exc:
        _err(str(exc))
        return EXIT_ERROR
    print(outcome.status)
    if outcome.status != SAT:
        return EXIT_FAIL
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for n, config in enumerate(outcome.solutions, 1):
        (out / f"solution-{n}.xml").write_bytes(to_ddd(config))
    print(f"{len(outcome.solutions)} solution(s) written to {out}")
    return EXIT_OK


def cmd_validate(args) -> int:
    try:
        goal = load_goal(args.goal)
        config = from_ddd(Path(args.ddd).read_bytes())
        violations = validate(config, goal)
    except (OSError, DeladasError, DddParseError, SchemaError) as exc:
        _err(str(exc))
        return EXIT_ERROR
    for v in violations:
        print(v)
    if violations:
        return EXIT_FAIL
    print("valid")
    return EXIT_OK


def cmd_run(args) -> int:
    try:
        goal = load_goal(args.goal)
        directives = parse_scenario(Path(args.scenario).read_text(encoding="utf-8"))
        initial = from_ddd(Path(args.initial).read_bytes()) if args.initial else None
        params = FabricParams(args.heartbeat, args.poll, args.threshold)
        report = run_scenario(goal, directives, initial=initial, seed=args.seed, until=args.until,
                              params=params, cap=args.cap, heartbeats=args.heartbeats)
    except (OSError, DeladasError, DddParseError, ScenarioError, FabricError, ValueError) as exc:
        _err(str(exc))
        return EXIT_ERROR
    text = "".join(line + "\n" for line in report.event_log)
    if args.log:
        Path(args.log).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    if args.ddd:
        Path(args.ddd).write_bytes(report.final_ddd)
    for v in report.final_violations:
        print(f"violation: {v}", file=sys.stderr)
    print(f"{report.exit_status} solverCalls={report.solver_calls}", file=sys.stderr)
    return report.exit_code


def cmd_serve(args) -> int:
    from .server import make_server

    try:
        goal = load_goal(args.goal)
        initial = from_ddd(Path(args.initial).read_bytes()) if args.initial else None
        manager = Manager(goal, create_fabric(goal.hosts, seed=args.seed), cap=args.cap)
        if initial is not None:
            manager.enact(initial)
        server = make_server(manager, args.host, args.port)
    except (OSError, DeladasError, DddParseError, EnactError) as exc:
        _err(str(exc))
        return EXIT_ERROR
    print(f"serving on http://{server.server_address[0]}:{server.server_address[1]}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="adme", description="Constraint-based autonomic deployment.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="solve a goal and write DDD files")
    s.add_argument("goal")
    s.add_argument("--max-solutions", type=int, default=1, help="0 for all")
    s.add_argument("--cap", type=int, default=1, help="instances per host")
    s.add_argument("--out", default=".")
    s.add_argument("--node-limit", type=int)
    s.add_argument("--time-budget", type=float, help="seconds")
    s.set_defaults(func=cmd_solve)

    v = sub.add_parser("validate", help="check a DDD against a goal")
    v.add_argument("goal")
    v.add_argument("ddd")
    v.set_defaults(func=cmd_validate)

    r = sub.add_parser("run", help="deploy and replay a failure scenario")
    r.add_argument("goal")
    r.add_argument("scenario")
    r.add_argument("--initial", help="DDD to deploy first (solved with it as preference)")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--until", type=int, help="ms; default last directive + 10 heartbeats")
    r.add_argument("--log", help="event log file (default stdout)")
    r.add_argument("--ddd", help="write the final DDD here")
    r.add_argument("--cap", type=int, default=1)
    r.add_argument("--heartbeat", type=int, default=1000)
    r.add_argument("--poll", type=int, default=500)
    r.add_argument("--threshold", type=int, default=3)
    r.add_argument("--heartbeats", action="store_true", help="keep AMP heartbeat lines in the log")
    r.set_defaults(func=cmd_run)

    d = sub.add_parser("serve", help="serve the HTTP interface")
    d.add_argument("goal")
    d.add_argument("--port", type=int, default=8080)
    d.add_argument("--host", default="127.0.0.1")
    d.add_argument("--initial", help="DDD to enact before serving")
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--cap", type=int, default=1)
    d.set_defaults(func=cmd_serve)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
