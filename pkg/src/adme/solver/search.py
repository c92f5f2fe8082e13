"""Depth-first search with propagation over a compiled :class:`CspProblem`.

Variable order is fixed: existence flags in candidate order, then wire flags
in lexicographic wire order.  Existence flags of the first-declared component
type try *true* first; every other flag tries *false* first.  A preferred
configuration, when given, overrides the value order so that search starts
at (and, if it is a solution, first returns) that configuration.

Reachability is never unfolded into booleans.  At every node the graph of
wires that are true or still open is an over-approximation of the final
wiring; if some required path is missing from it the branch is dead.
"""
from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from typing import Mapping

from ..compiler import CspProblem, decode
from ..deladas import Goal
from ..model import Configuration, to_ddd, validate

SAT = "SAT"
UNSAT = "UNSAT"
LIMIT = "LIMIT"


@dataclass(frozen=True)
class SolveOptions:
    max_solutions: float = 1  # math.inf for all
    node_limit: int | None = None
    time_budget: float | None = None  # seconds
    pins: Mapping[str, bool] = field(default_factory=dict)
    prefer: Configuration | None = None

    def __post_init__(self):
        if not (self.max_solutions >= 1):
            raise ValueError("max_solutions must be positive")
        if self.node_limit is not None and self.node_limit < 1:
            raise ValueError("node_limit must be positive")
        object.__setattr__(self, "pins", dict(self.pins))


@dataclass(frozen=True)
class SolveStats:
    nodes: int
    propagations: int
    wall_time: float


@dataclass(frozen=True)
class SolveOutcome:
    status: str
    solutions: tuple[Configuration, ...]
    stats: SolveStats
    exhausted: bool

    def serialize(self) -> str:
        """Deterministic text form (timing excluded)."""
        return json.dumps({
            "status": self.status,
            "exhausted": self.exhausted,
            "nodes": self.stats.nodes,
            "propagations": self.stats.propagations,
            "solutions": [to_ddd(c).decode("utf-8") for c in self.solutions],
        }, sort_keys=True)


def _flat(problem: CspProblem):
    lits, starts, lo, hi, reif = [], [0], [], [], []
    for c in problem.constraints:
        lits.extend(c.lits)
        starts.append(len(lits))
        lo.append(c.lo)
        hi.append(c.hi)
        reif.append(c.reif)
    return lits, starts, lo, hi, reif


class _Search:
    def __init__(self, problem: CspProblem, options: SolveOptions, engine_cls):
        self.p = problem
        self.opt = options
        self.engine = engine_cls(problem.num_vars, *_flat(problem))
        self.order = list(problem.decision_vars)
        wires = problem.wire_vars
        self.engine.set_graph(len(problem.candidates), problem.exist_vars, [w.var for w in wires],
                              [w.src for w in wires], [w.dst for w in wires])
        self.globals = [(list(g.sources), list(g.sinks)) for g in problem.globals]
        self.first_value = self._value_order(options.prefer)
        self.nodes = 0
        self.solutions: list[Configuration] = []
        self.seen: set[Configuration] = set()
        self.limited = False
        self.deadline = None
        if options.time_budget is not None:
            self.deadline = time.perf_counter() + options.time_budget

    def _value_order(self, prefer):
        p = self.p
        first = {}
        # every host lists its candidates in declaration order
        lead = p.candidates[0].type_name if p.candidates else None
        if prefer is not None:
            present = {i.id for i in prefer.instances}
            links = {(w.src.instance, w.src.port, w.dst.instance, w.dst.port) for w in prefer.wires}
            for c, v in zip(p.candidates, p.exist_vars):
                first[v] = v if c.id in present else -v
            cands = p.candidates
            for w in p.wire_vars:
                key = (cands[w.src].id, w.src_port, cands[w.dst].id, w.dst_port)
                first[w.var] = w.var if key in links else -w.var
            return first
        for c, v in zip(p.candidates, p.exist_vars):
            first[v] = v if c.type_name == lead else -v
        for w in p.wire_vars:
            first[w.var] = -w.var
        return first

    # -- reachability

    def reach_ok(self) -> bool:
        p = self.p
        eng = self.engine
        for sources, sinks in self.globals:
            if not eng.all_reach(sources, sinks):
                return False
        for rl in p.reach_literals:
            v = eng.value(rl.var)
            if v > 0 and not eng.reaches(rl.source, rl.target, True):
                return False
            if v < 0 and eng.reaches(rl.source, rl.target, False):
                return False
        return True

    def settle_reach_literals(self) -> bool:
        """At a leaf, fix every reachability literal to its actual value."""
        eng = self.engine
        for rl in self.p.reach_literals:
            actual = eng.reaches(rl.source, rl.target, False)
            if not eng.assign(rl.var if actual else -rl.var):
                return False
        return True

    # -- search

    def out_of_budget(self) -> bool:
        if self.opt.node_limit is not None and self.nodes >= self.opt.node_limit:
            return True
        if self.deadline is not None and (self.nodes & 63) == 0 and time.perf_counter() > self.deadline:
            return True
        return False

    def next_open(self, pos):
        eng = self.engine
        order = self.order
        while pos < len(order) and eng.value(order[pos]) != 0:
            pos += 1
        return pos

    def leaf(self):
        eng = self.engine
        mark = eng.trail_size()
        if self.settle_reach_literals():
            vals = eng.values_of(range(self.p.num_vars + 1))
            if 0 in vals[1:]:
                raise AssertionError("leaf left variables unassigned")
            config = decode(self.p, [v > 0 for v in vals], check=False)
            if config not in self.seen:
                self.seen.add(config)
                self.solutions.append(config)
        eng.undo(mark)

    def apply_pins(self) -> bool:
        index = {c.id: n for n, c in enumerate(self.p.candidates)}
        for iid in sorted(self.opt.pins):
            if iid not in index:
                raise ValueError(f"pin references unknown candidate {iid}")
            v = self.p.exist_vars[index[iid]]
            if not self.engine.assign(v if self.opt.pins[iid] else -v):
                return False
        return True

    def run(self) -> bool:
        """Search; True when the tree was fully explored."""
        eng = self.engine
        if not (eng.propagate_all() and self.apply_pins() and self.reach_ok()):
            return True
        want = self.opt.max_solutions
        stack = []
        pos = self.next_open(0)
        descend = True
        while True:
            if descend:
                if pos >= len(self.order):
                    self.leaf()
                    if len(self.solutions) >= want:
                        return False
                else:
                    if self.out_of_budget():
                        self.limited = True
                        return False
                    var = self.order[pos]
                    first = self.first_value[var]
                    mark = eng.trail_size()
                    stack.append((pos, mark, -first))
                    self.nodes += 1
                    if eng.assign(first) and self.reach_ok():
                        pos = self.next_open(pos + 1)
                        continue
            # backtrack
            descend = False
            while stack:
                p, mark, second = stack.pop()
                eng.undo(mark)
                if second is None:
                    continue
                if self.out_of_budget():
                    self.limited = True
                    return False
                stack.append((p, mark, None))
                self.nodes += 1
                if eng.assign(second) and self.reach_ok():
                    pos = self.next_open(p + 1)
                    descend = True
                    break
            if not descend:
                return True


def solve(problem: CspProblem, goal: Goal | None = None, options: SolveOptions | None = None,
          engine=None) -> SolveOutcome:
    """Search *problem* for up to ``options.max_solutions`` configurations.

    When *goal* is given every solution is re-checked with the direct
    evaluator, which guards the compiler against encoding bugs.
    """
    from . import Engine as default_engine

    options = options or SolveOptions()
    started = time.perf_counter()
    s = _Search(problem, options, engine or default_engine)
    exhausted = s.run()
    if goal is not None:
        for config in s.solutions:
            problems = validate(config, goal)
            if problems:
                raise AssertionError(f"solver produced an invalid configuration: {problems[0]}")
    if s.solutions:
        status = SAT
    elif exhausted:
        status = UNSAT
    else:
        status = LIMIT
    stats = SolveStats(s.nodes, s.engine.propagations, time.perf_counter() - started)
    return SolveOutcome(status, tuple(s.solutions), stats, exhausted)


def solutions_equal(a, b) -> bool:
    return set(a) == set(b)


ALL = math.inf
