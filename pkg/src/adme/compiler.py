"""Translate a goal into a boolean finite-domain CSP and decode assignments.

Decision variables are one existence flag per candidate instance and one
flag per directed wire between two candidate ports that some ``connectsto``
names together.  Every constraint is a (possibly reified) cardinality::

    reif <-> lo <= sum(literals) <= hi

with ``reif == 0`` meaning "always enforced".  Literals are signed 1-based
variable indices.  Reachability is kept out of the linear part: reified
:class:`ReachLiteral` s for isolated ``reachable`` atoms, and a global
:class:`ReachabilityConstraint` for the common "all instances of T reach each
other" pattern.

Slots are not part of the variables.  A port is wired at most once to any
given peer, so slot numbers carry no information beyond peer order and are
assigned canonically when decoding.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import Mapping, Sequence

from .deladas import (
    And, CardCmp, ConnectsTo, Exists, Forall, Goal, InstancesOf, Or, Reachable,
)
from .model import (
    Configuration, Endpoint, Instance, Wire, canonicalize, instance_id, port_pairs,
)

__all__ = [
    "CandidateInstance", "WireVar", "Linear", "ReachLiteral",
    "ReachabilityConstraint", "CspProblem", "CompileError", "DecodeError",
    "expand_candidates", "compile_goal", "decode",
]


class CompileError(ValueError):
    pass


class DecodeError(ValueError):
    pass


@dataclass(frozen=True)
class CandidateInstance:
    id: str
    type_name: str
    host: str
    ordinal: int
    slot_table: tuple[tuple[str, int], ...]


@dataclass(frozen=True)
class WireVar:
    var: int
    src: int
    src_port: str
    dst: int
    dst_port: str


@dataclass(frozen=True)
class Linear:
    lits: tuple[int, ...]
    lo: int
    hi: int
    reif: int = 0


@dataclass(frozen=True)
class ReachLiteral:
    var: int
    source: int
    target: int


@dataclass(frozen=True)
class ReachabilityConstraint:
    """Every existing source candidate reaches every existing sink candidate."""
    sources: tuple[int, ...]
    sinks: tuple[int, ...]


@dataclass(frozen=True)
class CspProblem:
    goal_name: str
    cap: int
    candidates: tuple[CandidateInstance, ...]
    num_vars: int
    exist_vars: tuple[int, ...]
    wire_vars: tuple[WireVar, ...]
    constraints: tuple[Linear, ...]
    structural: int  # constraints[:structural] are structural
    reach_literals: tuple[ReachLiteral, ...]
    globals: tuple[ReachabilityConstraint, ...]
    var_names: tuple[str, ...]  # index 0 unused

    @property
    def decision_vars(self) -> tuple[int, ...]:
        return self.exist_vars + tuple(w.var for w in self.wire_vars)

    def candidate_index(self, iid: str) -> int:
        for n, c in enumerate(self.candidates):
            if c.id == iid:
                return n
        raise KeyError(iid)

    def wire_lookup(self) -> dict[tuple[str, str, str, str], int]:
        cands = self.candidates
        return {(cands[w.src].id, w.src_port, cands[w.dst].id, w.dst_port): w.var for w in self.wire_vars}


def expand_candidates(goal: Goal, cap: int = 1) -> list[CandidateInstance]:
    if cap < 1:
        raise ValueError("perHostCap must be at least 1")
    total = len(goal.hosts) * len(goal.component_types) * cap
    out = []
    for host in goal.hosts:
        for ctype in goal.component_types:
            slots = tuple((p.name, total if p.variadic else 1) for p in ctype.ports)
            for ordinal in range(1, cap + 1):
                out.append(CandidateInstance(
                    instance_id(ctype.name, ordinal, host.name), ctype.name, host.name, ordinal, slots))
    return out


_TRUE = True
_FALSE = False


class _Builder:
    def __init__(self, goal: Goal, cap: int):
        self.goal = goal
        self.cap = cap
        self.cands = expand_candidates(goal, cap)
        self.names = [""]
        self.constraints: list[Linear] = []
        self.reach: list[ReachLiteral] = []
        self.globals: list[ReachabilityConstraint] = []
        self.by_type = defaultdict(list)
        for n, c in enumerate(self.cands):
            self.by_type[c.type_name].append(n)
        self.exist = [self.new_var(f"exist[{c.id}]") for c in self.cands]
        self.wires: list[WireVar] = []
        self.wires_between = defaultdict(list)  # (a, port, b, port) unordered-by-direction -> vars
        self.adjacent = defaultdict(list)  # frozenset{a, b} -> vars
        self._adj_cache = {}
        self._reach_cache = {}
        self._make_wires()

    def new_var(self, name: str) -> int:
        self.names.append(name)
        return len(self.names) - 1

    def _make_wires(self):
        pairs = port_pairs(self.goal)
        found = []
        for st, sp, dt, dq in pairs:
            for a in self.by_type[st]:
                for b in self.by_type[dt]:
                    if a != b:
                        found.append((self.cands[a].id, sp, self.cands[b].id, dq, a, b))
        for sid, sp, did, dq, a, b in sorted(found):
            var = self.new_var(f"wire[{sid}.{sp}->{did}.{dq}]")
            self.wires.append(WireVar(var, a, sp, b, dq))
            self.wires_between[(a, sp, b, dq)].append(var)
            self.wires_between[(b, dq, a, sp)].append(var)
            self.adjacent[frozenset((a, b))].append(var)

    # -- emitting

    def add(self, lits, lo, hi, reif=0):
        self.constraints.append(Linear(tuple(lits), lo, hi, reif))

    def structural(self):
        # wire needs both endpoint instances
        for w in self.wires:
            self.add([-w.var, self.exist[w.src]], 1, 2)
            self.add([-w.var, self.exist[w.dst]], 1, 2)
        # at most cap instances per host
        per_host = defaultdict(list)
        for n, c in enumerate(self.cands):
            per_host[c.host].append(self.exist[n])
        for host in self.goal.host_names:
            if len(per_host[host]) > self.cap:
                self.add(per_host[host], 0, self.cap)
        # slot capacity per port, and one wire per (port, peer)
        per_port = defaultdict(list)
        per_peer = defaultdict(list)
        for w in self.wires:
            per_port[(w.src, w.src_port)].append(w.var)
            per_port[(w.dst, w.dst_port)].append(w.var)
            per_peer[(w.src, w.src_port, w.dst)].append(w.var)
            per_peer[(w.dst, w.dst_port, w.src)].append(w.var)
        for (n, port), lits in sorted(per_port.items()):
            slots = dict(self.cands[n].slot_table)[port]
            if len(lits) > slots:
                self.add(lits, 0, slots)
        for key, lits in sorted(per_peer.items()):
            if len(lits) > 1:
                self.add(lits, 0, 1)

    # -- formulas -> literals

    def aux(self, lits, lo, hi, name):
        """Literal for (lo <= sum(lits) <= hi) after constant folding."""
        lits = list(lits)
        const = 0
        live = []
        for l in lits:
            if l is _TRUE:
                const += 1
            elif l is _FALSE:
                continue
            else:
                live.append(l)
        lo, hi = lo - const, hi - const
        lo = max(lo, 0)
        hi = min(hi, len(live))
        if lo > hi:
            return _FALSE
        if lo == 0 and hi == len(live):
            return _TRUE
        if len(live) == 1:
            # single literal: sum in [0,0] or [1,1]
            return live[0] if lo == 1 else -live[0]
        v = self.new_var(name)
        self.add(live, lo, hi, v)
        return v

    def neg(self, lit):
        if lit is _TRUE:
            return _FALSE
        if lit is _FALSE:
            return _TRUE
        return -lit

    def conj(self, lits, name="and"):
        lits = list(lits)
        return self.aux(lits, len(lits), len(lits), name)

    def disj(self, lits, name="or"):
        lits = list(lits)
        return self.aux(lits, 1, len(lits), name)

    def domain(self, type_name):
        if type_name == "host":
            return [(h, None) for h in self.goal.host_names]
        return [(n, self.exist[n]) for n in self.by_type[type_name]]

    def envs(self, binders, env):
        out = [(env, [])]
        for b in binders:
            out = [({**e, b.var: val}, guards + ([g] if g is not None else []))
                   for e, guards in out for val, g in self.domain(b.type_name)]
        return out

    def lit(self, expr, env):
        if isinstance(expr, Forall):
            items = []
            for e, guards in self.envs(expr.binders, env):
                body = self.lit(expr.body, e)
                items.append(self.disj([self.neg(g) for g in guards] + [body], "forall-item"))
            return self.conj(items, "forall")
        if isinstance(expr, Exists):
            items = []
            for e, guards in self.envs(expr.binders, env):
                body = self.lit(expr.body, e)
                items.append(self.conj(list(guards) + [body], "exists-item"))
            return self.disj(items, "exists")
        if isinstance(expr, And):
            return self.conj([self.lit(i, env) for i in expr.items])
        if isinstance(expr, Or):
            return self.disj([self.lit(i, env) for i in expr.items])
        if isinstance(expr, CardCmp):
            return self.card(expr, env)
        if isinstance(expr, ConnectsTo):
            a, b = env[expr.left.var], env[expr.right.var]
            if a == b:
                return _FALSE
            return self.disj(self.wires_between[(a, expr.left.port, b, expr.right.port)], "connects")
        if isinstance(expr, Reachable):
            return self.reach_lit(env[expr.source], env[expr.target])
        raise CompileError(f"unsupported expression {expr!r}")

    def adjacency(self, a, b):
        key = frozenset((a, b))
        if key not in self._adj_cache:
            self._adj_cache[key] = self.disj(
                self.adjacent[key], f"adj[{self.cands[a].id},{self.cands[b].id}]") if a != b else _FALSE
        return self._adj_cache[key]

    def reach_lit(self, a, b):
        if a == b:
            return _TRUE
        if (a, b) not in self._reach_cache:
            v = self.new_var(f"reach[{self.cands[a].id},{self.cands[b].id}]")
            self.reach.append(ReachLiteral(v, a, b))
            self._reach_cache[(a, b)] = v
        return self._reach_cache[(a, b)]

    def card(self, expr: CardCmp, env):
        s = expr.set
        if isinstance(s, InstancesOf):
            host = env[s.host_var]
            lits = [self.exist[n] for n in self.by_type[s.type_name] if self.cands[n].host == host]
        else:
            target = env[s.target]
            lits = [self.adjacency(n, target) for n in self.by_type[s.type_name]]
        k = expr.value
        big = len(lits) + 1
        name = f"card{expr.op}{k}"
        if expr.op == "=":
            return self.aux(lits, k, k, name)
        if expr.op == "!=":
            return self.neg(self.aux(lits, k, k, name))
        if expr.op == "<=":
            return self.aux(lits, -big, k, name)
        if expr.op == "<":
            return self.aux(lits, -big, k - 1, name)
        if expr.op == ">=":
            return self.aux(lits, k, big, name)
        if expr.op == ">":
            return self.aux(lits, k + 1, big, name)
        raise CompileError(f"unknown comparison {expr.op!r}")

    # -- top level

    def assert_expr(self, expr, env):
        if isinstance(expr, And):
            for item in expr.items:
                self.assert_expr(item, env)
            return
        if isinstance(expr, Forall):
            pattern = _all_reach_pattern(expr)
            if pattern is not None:
                src_type, dst_type = pattern
                self.globals.append(ReachabilityConstraint(
                    tuple(self.by_type[src_type]), tuple(self.by_type[dst_type])))
                return
            for e, guards in self.envs(expr.binders, env):
                if guards:
                    self.assert_lits([self.neg(g) for g in guards] + [self.lit(expr.body, e)])
                else:
                    self.assert_expr(expr.body, e)
            return
        if isinstance(expr, Or):
            self.assert_lits([self.lit(i, env) for i in expr.items])
            return
        self.assert_lits([self.lit(expr, env)])

    def assert_lits(self, lits):
        """Enforce the disjunction of *lits*."""
        if any(l is _TRUE for l in lits):
            return
        live = [l for l in lits if l is not _FALSE]
        self.add(live, 1, max(len(live), 1))


def _all_reach_pattern(expr: Forall):
    """Return (source type, sink type) if *expr* is "forall x, y: reachable(x, y)"."""
    binders = list(expr.binders)
    body = expr.body
    while isinstance(body, Forall):
        binders.extend(body.binders)
        body = body.body
    if not isinstance(body, Reachable) or len(binders) != 2:
        return None
    by_var = {b.var: b.type_name for b in binders}
    if len(by_var) != 2 or "host" in by_var.values():
        return None
    return by_var[body.source], by_var[body.target]


def compile_goal(goal: Goal, cap: int = 1) -> CspProblem:
    """Compile *goal* with at most *cap* instances per host."""
    b = _Builder(goal, cap)
    b.structural()
    structural = len(b.constraints)
    for clause in goal.clauses:
        b.assert_expr(clause, {})
    return CspProblem(
        goal_name=goal.name,
        cap=cap,
        candidates=tuple(b.cands),
        num_vars=len(b.names) - 1,
        exist_vars=tuple(b.exist),
        wire_vars=tuple(b.wires),
        constraints=tuple(b.constraints),
        structural=structural,
        reach_literals=tuple(b.reach),
        globals=tuple(b.globals),
        var_names=tuple(b.names),
    )


def _lit_true(assignment, lit) -> bool:
    v = bool(assignment[abs(lit)])
    return v if lit > 0 else not v


def decode(problem: CspProblem, assignment: Mapping[int, bool] | Sequence[bool],
           check: bool = True) -> Configuration:
    """Build the canonical configuration selected by a total assignment.

    With *check* the structural constraints are re-evaluated first; callers
    holding a propagated assignment may skip that.
    """
    for c in problem.constraints[:problem.structural] if check else ():
        total = sum(_lit_true(assignment, l) for l in c.lits)
        if not c.lo <= total <= c.hi:
            names = ", ".join(problem.var_names[abs(l)] for l in c.lits[:4])
            raise DecodeError(f"assignment violates structural constraint over {names}")
    cands = problem.candidates
    instances = [Instance(cands[n].id, cands[n].type_name, cands[n].host)
                 for n, v in enumerate(problem.exist_vars) if assignment[v]]
    wires = [Wire(Endpoint(cands[w.src].id, w.src_port), Endpoint(cands[w.dst].id, w.dst_port))
             for w in problem.wire_vars if assignment[w.var]]
    return canonicalize(Configuration(problem.goal_name, instances, wires))
