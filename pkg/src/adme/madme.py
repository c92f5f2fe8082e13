"""The autonomic manager.

It holds the goal, satisfies it, enacts configurations on a fabric and
reacts to fabric events:

* a failed process is restarted in place and re-wired, without solving;
* a failed host is dropped from the resources and the goal is re-solved
  with the surviving instances pinned.  Pins are released one at a time,
  lowest wire-degree first (ties by host, then instance id), until the
  solver finds a configuration;
* a new host joins the resources and only triggers a solve if the current
  deployment no longer satisfies the goal.

If every pin is gone and the goal is still unsatisfiable the manager logs a
``CONSTRAINT_ERROR`` line and stays DEGRADED until a later change (a new
host, say) lets it recover.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Union

from .deladas import DeladasError, Goal, HostDecl, parse_constraints, parse_resources, print_constraints, print_resources
from .fabric import Fabric, FabricError, HostAdded, HostFailed, ProcessFailed
from .model import (
    Configuration, EnactmentPlan, InstallStartAction, SchemaError, WireAction,
    apply_plan, diff, from_ddd, satisfies, structure_problems, to_ddd, validate,
)
from .solver import SAT, UNSAT, SolveOptions, solve_goal

__all__ = [
    "Binding", "ConstraintError", "EnactError", "NoDeployment", "GoalError",
    "EnactmentReport", "SatisfyResult", "Manager",
    "IDLE", "SOLVING", "ENACTING", "DEGRADED",
]

IDLE, SOLVING, ENACTING, DEGRADED = "IDLE", "SOLVING", "ENACTING", "DEGRADED"


@dataclass(frozen=True, order=True)
class Binding:
    type_name: str
    host: str
    instance_id: str

    def __str__(self):
        return f"{self.type_name}@{self.host}"


class ConstraintError(Exception):
    def __init__(self, reason: str, removed: Iterable[Binding] = (), last_status: str = UNSAT):
        super().__init__(reason)
        self.reason = reason
        self.removed_bindings = list(removed)
        self.last_status = last_status


class EnactError(Exception):
    def __init__(self, message: str, cause: Exception | None = None, report=None):
        super().__init__(message)
        self.cause = cause
        self.report = report


class NoDeployment(LookupError):
    pass


class GoalError(ValueError):
    pass


@dataclass
class EnactmentReport:
    outcomes: list[tuple[object, str]] = field(default_factory=list)
    status: str = "OK"

    @property
    def actions(self):
        return [a for a, _ in self.outcomes]

    def to_json(self):
        return [{"kind": a.kind, "host": a.host, "target": a.describe(), "outcome": o} for a, o in self.outcomes]


@dataclass(frozen=True)
class SatisfyResult:
    status: str
    configurations: tuple[Configuration, ...]
    removed: tuple[Binding, ...] = ()

    @property
    def ddds(self) -> list[bytes]:
        return [to_ddd(c) for c in self.configurations]


def _bindings(config: Configuration) -> list[Binding]:
    return [Binding(i.type_name, i.host, i.id) for i in config.sorted_instances()]


def relaxation_order(config: Configuration) -> list[Binding]:
    """Pins in the order they are given up: wire-degree, then host, then id."""
    return sorted(_bindings(config), key=lambda b: (config.degree(b.instance_id), b.host, b.instance_id))


class Manager:
    def __init__(self, goal: Goal, fabric: Fabric, cap: int = 1, node_limit: int | None = None,
                 time_budget: float | None = None):
        self.goal = goal
        self.fabric = fabric
        self.cap = cap
        self.node_limit = node_limit
        self.time_budget = time_budget
        self.deployed: Configuration | None = None
        self.solver_calls = 0
        self.phase = IDLE
        self.constraint_errors: list[ConstraintError] = []
        fabric.subscribe(self.on_event)

    # -- helpers

    def note(self, text: str):
        self.fabric.note(text)

    @property
    def code_uris(self) -> dict[str, str]:
        return {c.name: c.code for c in self.goal.component_types}

    def _options(self, pins=None, prefer=None, max_solutions=1):
        return SolveOptions(max_solutions=max_solutions, node_limit=self.node_limit,
                            time_budget=self.time_budget, pins=pins or {}, prefer=prefer)

    def _solve(self, goal: Goal, pins=None, prefer=None):
        """Counted solver call used by the autonomic loop."""
        self.solver_calls += 1
        outcome = solve_goal(goal, self.cap, self._options(pins, prefer))
        self.note(f"SOLVE status={outcome.status} pins={len(pins or {})} nodes={outcome.stats.nodes}")
        return outcome

    def _ladder(self, goal: Goal, keep: Configuration, solve, prefer=None):
        """Pin-and-relax: returns (status, outcome or None, removed bindings)."""
        hosts = set(goal.host_names)
        types = {c.name for c in goal.component_types}
        order = [b for b in relaxation_order(keep) if b.host in hosts and b.type_name in types]
        pins = {b.instance_id: True for b in order}
        removed: list[Binding] = []
        status = UNSAT
        while True:
            outcome = solve(goal, pins, prefer)
            status = outcome.status
            if status == SAT:
                return status, outcome, removed
            if not pins:
                return status, None, removed
            drop = order[len(removed)]
            removed.append(drop)
            del pins[drop.instance_id]

    # -- the five external methods

    def get_resources(self) -> str:
        return print_resources(self.goal)

    def get_constraints(self) -> str:
        return print_constraints(self.goal)

    def get_deployment(self) -> bytes:
        if self.deployed is None:
            raise NoDeployment("nothing has been enacted yet")
        return to_ddd(self.deployed)

    def satisfy(self, constraints: str | None = None, resources: str | None = None,
                config: Union[Configuration, bytes, str, None] = None,
                max_solutions: float = 1) -> SatisfyResult:
        """Solve without touching manager state (no counted solver call)."""
        goal = self._goal_from(constraints, resources)
        if isinstance(config, (bytes, str)):
            try:
                config = from_ddd(config)
            except ValueError as exc:
                raise GoalError(f"bad config document: {exc}") from exc

        def run(g, pins, prefer):
            return solve_goal(g, self.cap, self._options(pins, prefer, max_solutions))

        if config is None:
            outcome = run(goal, None, None)
            return SatisfyResult(outcome.status, outcome.solutions)
        status, outcome, removed = self._ladder(goal, config, run, prefer=config)
        return SatisfyResult(status, outcome.solutions if outcome else (), tuple(removed))

    def _goal_from(self, constraints, resources) -> Goal:
        try:
            if resources is not None:
                types, hosts = parse_resources(resources)
            else:
                types, hosts = self.goal.component_types, self.goal.hosts
            if constraints is not None:
                name, clauses = parse_constraints(constraints, types)
            elif resources is not None:
                # re-resolve the current clauses against the new resources
                name, clauses = parse_constraints(print_constraints(self.goal), types)
            else:
                name, clauses = self.goal.name, self.goal.clauses
        except DeladasError as exc:
            raise GoalError(str(exc)) from exc
        return Goal(name, tuple(types), tuple(hosts), tuple(clauses))

    def enact(self, ddd: Union[Configuration, bytes, str]) -> EnactmentReport:
        target = ddd if isinstance(ddd, Configuration) else from_ddd(ddd)
        problems = structure_problems(target)
        try:
            problems += [str(v) for v in validate(target, self.goal)]
        except SchemaError as exc:
            problems.append(str(exc))
        if problems:
            raise EnactError(f"configuration does not satisfy the goal: {problems[0]}")
        current = self.deployed or Configuration(target.goal_name)
        plan = diff(current, target, self.code_uris)
        return self._run_plan(current, plan, target)

    def _run_plan(self, current: Configuration, plan: EnactmentPlan, target: Configuration) -> EnactmentReport:
        report = EnactmentReport()
        self.phase = ENACTING
        done = []
        for action in plan:
            try:
                self.fabric.fire(action.host, action)
            except FabricError as exc:
                report.outcomes.append((action, f"error: {type(exc).__name__}: {exc}"))
                report.status = DEGRADED
                self.deployed = apply_plan(current, done, target.goal_name)
                self.phase = DEGRADED
                self.note(f"ENACT_ERROR {action.kind} {action.describe()} {type(exc).__name__}")
                raise EnactError(f"{action.kind} on {action.host} failed: {exc}", exc, report) from exc
            report.outcomes.append((action, "ok"))
            done.append(action)
        self.deployed = target
        self.phase = IDLE
        self.note(f"DEPLOYED instances={len(target.instances)} wires={len(target.wires)} actions={len(plan)}")
        return report

    # -- autonomic loop

    def deploy(self, initial: Configuration | None = None) -> Configuration:
        """Initial satisfy + enact.  *initial* biases the search toward a
        known configuration, pinning its instances."""
        self.phase = SOLVING
        if initial is None:
            outcome = self._solve(self.goal)
        else:
            pins = {i.id: True for i in initial.instances}
            outcome = self._solve(self.goal, pins, initial)
        if outcome.status != SAT:
            self._constraint_error(f"initial goal unsatisfiable ({outcome.status})", [], outcome.status)
        self.enact(outcome.solutions[0])
        return self.deployed

    def on_event(self, event):
        try:
            if isinstance(event, ProcessFailed):
                self.restart(event.host, event.instance_id)
            elif isinstance(event, HostFailed):
                self.evolve({event.host})
            elif isinstance(event, HostAdded):
                self.host_added(event.host, event.attributes)
        except (EnactError, ConstraintError):
            # already DEGRADED and logged
            pass

    def restart(self, host: str, instance_id: str):
        if self.deployed is None or instance_id not in self.deployed.by_id:
            self.note(f"IGNORED process {instance_id} is not deployed")
            return
        inst = self.deployed.by_id[instance_id]
        self.note(f"RESTART {instance_id} on {host}")
        actions = [InstallStartAction(inst.host, inst.id, inst.type_name, self.code_uris.get(inst.type_name, ""))]
        by_id = self.deployed.by_id
        for w in self.deployed.sorted_wires():
            if w.touches(instance_id):
                other = w.dst.instance if w.src.instance == instance_id else w.src.instance
                if self.fabric.running(other):
                    actions.append(WireAction(by_id[w.src.instance].host, w))
        deployed = self.deployed
        self._run_plan(deployed, EnactmentPlan(tuple(actions)), deployed)

    def evolve(self, failed_hosts: Iterable[str]) -> Configuration:
        failed = set(failed_hosts)
        if self.deployed is None:
            raise NoDeployment("evolve needs a deployment")
        hosts = tuple(h for h in self.goal.hosts if h.name not in failed)
        self.goal = self.goal.with_hosts(hosts)
        pruned = self.deployed.without_hosts(failed)
        # the fabric already lost everything on the failed hosts
        self.deployed = pruned
        if failed:
            self.note(f"EVOLVE failed={','.join(sorted(failed))} survivors={len(pruned.instances)}")
        if satisfies(pruned, self.goal):
            self.phase = IDLE
            self.note("STILL_VALID")
            return pruned
        self.phase = SOLVING
        status, outcome, removed = self._ladder(self.goal, pruned, self._solve, prefer=pruned)
        if status != SAT:
            self._constraint_error(
                f"no configuration over {len(hosts)} host(s) after releasing all pins ({status})", removed, status)
        if removed:
            self.note("RELEASED " + " ".join(b.instance_id for b in removed))
        new = outcome.solutions[0]
        self._run_plan(pruned, diff(pruned, new, self.code_uris), new)
        return new

    def host_added(self, name: str, attributes=()):
        if name not in self.goal.host_names:
            attrs = tuple(attributes)
            self.goal = self.goal.with_hosts(self.goal.hosts + (HostDecl(name, attrs),))
        if self.deployed is not None and not satisfies(self.deployed, self.goal):
            self.evolve(set())

    def _constraint_error(self, reason: str, removed, status):
        err = ConstraintError(reason, removed, status)
        self.constraint_errors.append(err)
        self.phase = DEGRADED
        self.note(f"CONSTRAINT_ERROR {reason}")
        raise err

    # -- reporting

    def violations(self):
        if self.deployed is None:
            return []
        return validate(self.deployed, self.goal)

    @property
    def ok(self) -> bool:
        return self.phase != DEGRADED and self.deployed is not None and not self.violations()

