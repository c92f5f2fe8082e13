"""Configurations: direct constraint evaluation, DDD serialization and diffing.

A :class:`Configuration` is the concrete outcome of satisfying a goal: a set
of placed component instances and directed wires between port slots.  The
:func:`validate` evaluator here is the semantic ground truth that the
compiler and solver are tested against.
"""
from __future__ import annotations

import re
import xml.etree.ElementTree as ET
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Union
from xml.sax.saxutils import quoteattr

from .deladas import (
    And, CardCmp, ConnectsTo, Exists, Forall, Goal, InstancesOf,
    Or, Reachable, print_expr,
)

__all__ = [
    "Endpoint", "Wire", "Instance", "Configuration", "Violation",
    "SchemaError", "DddParseError",
    "UnwireAction", "TerminateAction", "InstallStartAction", "WireAction",
    "EnactmentPlan",
    "instance_id", "canonicalize", "structure_problems", "port_pairs",
    "validate", "satisfies", "to_ddd", "from_ddd", "diff", "apply_plan",
]


class SchemaError(ValueError):
    """Configuration references something the goal does not declare."""


class DddParseError(ValueError):
    def __init__(self, message: str, path: str = "/"):
        self.path = path
        super().__init__(f"{path}: {message}")


_ENDPOINT_RE = re.compile(r"^(?P<inst>[A-Za-z][A-Za-z0-9_]*\d+@[A-Za-z][A-Za-z0-9_]*)"
                          r"\.(?P<port>[A-Za-z][A-Za-z0-9_]*)\[(?P<slot>\d+)\]$")


class Endpoint(NamedTuple):
    instance: str
    port: str
    slot: int = 0

    def __str__(self):
        return f"{self.instance}.{self.port}[{self.slot}]"

    @classmethod
    def parse(cls, text: str) -> "Endpoint":
        m = _ENDPOINT_RE.match(text)
        if m is None:
            raise ValueError(f"malformed endpoint {text!r}")
        return cls(m["inst"], m["port"], int(m["slot"]))


class Wire(NamedTuple):
    src: Endpoint
    dst: Endpoint

    def touches(self, instance: str) -> bool:
        return self.src.instance == instance or self.dst.instance == instance

    def __str__(self):
        return f"{self.src}->{self.dst}"


def instance_id(type_name: str, ordinal: int, host: str) -> str:
    return f"{type_name}{ordinal}@{host}"


@dataclass(frozen=True, order=True)
class Instance:
    id: str
    type_name: str
    host: str

    @property
    def ordinal(self) -> int:
        return int(self.id[len(self.type_name):self.id.index("@")])


@dataclass(frozen=True)
class Configuration:
    goal_name: str
    instances: frozenset = frozenset()
    wires: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "instances", frozenset(self.instances))
        object.__setattr__(self, "wires", frozenset(self.wires))

    def instance(self, iid: str) -> Instance:
        for inst in self.instances:
            if inst.id == iid:
                return inst
        raise KeyError(iid)

    @property
    def by_id(self) -> dict[str, Instance]:
        return {i.id: i for i in self.instances}

    def sorted_instances(self) -> list[Instance]:
        return sorted(self.instances, key=lambda i: i.id)

    def sorted_wires(self) -> list[Wire]:
        return sorted(self.wires)

    def degree(self, iid: str) -> int:
        return sum(1 for w in self.wires if w.touches(iid))

    def without_hosts(self, hosts: Iterable[str]) -> "Configuration":
        """Drop instances on *hosts* and every wire touching them."""
        hosts = set(hosts)
        dead = {i.id for i in self.instances if i.host in hosts}
        return Configuration(
            self.goal_name,
            [i for i in self.instances if i.id not in dead],
            [w for w in self.wires if w.src.instance not in dead and w.dst.instance not in dead],
        )


def structure_problems(config: Configuration) -> list[str]:
    """Well-formedness problems independent of any goal."""
    problems = []
    ids = {i.id for i in config.instances}
    for inst in config.sorted_instances():
        if not inst.id.startswith(inst.type_name) or not inst.id.endswith("@" + inst.host):
            problems.append(f"instance id {inst.id} does not match type {inst.type_name} on {inst.host}")
            continue
        try:
            inst.ordinal
        except ValueError:
            problems.append(f"instance id {inst.id} has no ordinal")
    seen_endpoints = {}
    peers = defaultdict(set)
    for w in config.sorted_wires():
        if w.src.instance == w.dst.instance:
            problems.append(f"wire {w} connects an instance to itself")
        for ep, other in ((w.src, w.dst), (w.dst, w.src)):
            if ep.instance not in ids:
                problems.append(f"wire {w} references unknown instance {ep.instance}")
            if ep in seen_endpoints:
                problems.append(f"endpoint {ep} carries more than one wire")
            seen_endpoints[ep] = w
            key = (ep.instance, ep.port)
            if other.instance in peers[key]:
                problems.append(f"port {ep.instance}.{ep.port} is wired to {other.instance} twice")
            peers[key].add(other.instance)
    slots = defaultdict(set)
    for ep in seen_endpoints:
        slots[(ep.instance, ep.port)].add(ep.slot)
    for (iid, port), used in sorted(slots.items()):
        if used != set(range(len(used))):
            problems.append(f"slots of {iid}.{port} are not dense: {sorted(used)}")
    return problems


def canonicalize(config: Configuration) -> Configuration:
    """Renumber slots so each port's peers occupy slots 0..n-1 in peer-id order."""
    links = sorted({(w.src.instance, w.src.port, w.dst.instance, w.dst.port) for w in config.wires})
    if len(links) != len(config.wires):
        raise ValueError("configuration wires the same port pair twice")
    peers = defaultdict(list)
    for si, sp, di, dp in links:
        peers[(si, sp)].append(di)
        peers[(di, dp)].append(si)
    for key, lst in peers.items():
        lst.sort()
        if len(lst) != len(set(lst)):
            raise ValueError(f"port {key[0]}.{key[1]} is wired to the same peer twice")
    rank = {(key, peer): n for key, lst in peers.items() for n, peer in enumerate(lst)}
    wires = [
        Wire(Endpoint(si, sp, rank[((si, sp), di)]), Endpoint(di, dp, rank[((di, dp), si)]))
        for si, sp, di, dp in links
    ]
    return Configuration(config.goal_name, config.instances, wires)


def port_pairs(goal: Goal) -> frozenset[tuple[str, str, str, str]]:
    """Ordered (type, port, type, port) pairs a wire may join.

    A wire is only ever placed between ports that some ``connectsto`` names
    together; either direction is allowed.
    """
    pairs = set()

    def visit(expr, scope):
        if isinstance(expr, (Forall, Exists)):
            scope = dict(scope)
            for b in expr.binders:
                scope[b.var] = b.type_name
            visit(expr.body, scope)
        elif isinstance(expr, (And, Or)):
            for item in expr.items:
                visit(item, scope)
        elif isinstance(expr, ConnectsTo):
            a = (scope[expr.left.var], expr.left.port)
            b = (scope[expr.right.var], expr.right.port)
            pairs.add(a + b)
            pairs.add(b + a)

    for clause in goal.clauses:
        visit(clause, {})
    return frozenset(pairs)


# --------------------------------------------------------------------------
# Validation

@dataclass(frozen=True)
class Violation:
    clause_index: int
    bindings: tuple[tuple[str, str], ...] = ()
    message: str = ""

    @property
    def binding_context(self) -> dict[str, str]:
        return dict(self.bindings)

    def __str__(self):
        ctx = " ".join(f"{k}={v}" for k, v in self.bindings)
        return f"clause {self.clause_index}" + (f" [{ctx}]" if ctx else "") + f": {self.message}"


_CMP = {
    "=": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
}


class _Evaluator:
    def __init__(self, config: Configuration, goal: Goal):
        self.goal = goal
        ports = {c.name: {p.name: p.variadic for p in c.ports} for c in goal.component_types}
        hosts = set(goal.host_names)
        self.by_type = defaultdict(list)
        self.on_host = defaultdict(list)
        by_id = {}
        for inst in config.sorted_instances():
            if inst.type_name not in ports:
                raise SchemaError(f"instance {inst.id} has unknown type {inst.type_name}")
            if inst.host not in hosts:
                raise SchemaError(f"instance {inst.id} is placed on unknown host {inst.host}")
            by_id[inst.id] = inst.type_name
            self.by_type[inst.type_name].append(inst.id)
            self.on_host[(inst.type_name, inst.host)].append(inst.id)
        links = self.links = set()  # (inst, port, peer, peer_port), both orientations
        adjacent = self.adjacent = set()
        succ = self.succ = defaultdict(set)
        for w in config.wires:
            s, d = w.src, w.dst
            for ep in (s, d):
                type_name = by_id.get(ep.instance)
                if type_name is None:
                    raise SchemaError(f"wire {w} references unknown instance {ep.instance}")
                variadic = ports[type_name].get(ep.port)
                if variadic is None:
                    raise SchemaError(f"wire {w} uses port {ep.port} absent from {type_name}")
                if not variadic and ep.slot != 0:
                    raise SchemaError(f"wire {w} uses slot {ep.slot} of a non-variadic port")
            links.add((s.instance, s.port, d.instance, d.port))
            links.add((d.instance, d.port, s.instance, s.port))
            adjacent.add((s.instance, d.instance))
            adjacent.add((d.instance, s.instance))
            succ[s.instance].add(d.instance)
        self._reach = {}

    def reaches(self, a: str, b: str) -> bool:
        if a == b:
            return True
        if a not in self._reach:
            seen = {a}
            stack = [a]
            while stack:
                for n in self.succ[stack.pop()]:
                    if n not in seen:
                        seen.add(n)
                        stack.append(n)
            self._reach[a] = seen
        return b in self._reach[a]

    def domain(self, type_name: str) -> list[str]:
        if type_name == "host":
            return list(self.goal.host_names)
        return self.by_type[type_name]

    def bindings(self, binders, env):
        envs = [env]
        for b in binders:
            envs = [{**e, b.var: v} for e in envs for v in self.domain(b.type_name)]
        return envs

    def holds(self, expr, env) -> bool:
        return _HOLDS[type(expr)](self, expr, env)

    def _forall(self, expr, env):
        return all(self.holds(expr.body, e) for e in self.bindings(expr.binders, env))

    def _exists(self, expr, env):
        return any(self.holds(expr.body, e) for e in self.bindings(expr.binders, env))

    def _and(self, expr, env):
        return all(self.holds(i, env) for i in expr.items)

    def _or(self, expr, env):
        return any(self.holds(i, env) for i in expr.items)

    def _card(self, expr, env):
        return _CMP[expr.op](self.count(expr.set, env), expr.value)

    def _connects(self, expr, env):
        return (env[expr.left.var], expr.left.port, env[expr.right.var], expr.right.port) in self.links

    def _reachable(self, expr, env):
        return self.reaches(env[expr.source], env[expr.target])

    def count(self, set_expr, env) -> int:
        if isinstance(set_expr, InstancesOf):
            return len(self.on_host[(set_expr.type_name, env[set_expr.host_var])])
        target = env[set_expr.target]
        return sum(1 for i in self.by_type[set_expr.type_name] if (i, target) in self.adjacent)

    def violations(self, index, expr, env) -> list[Violation]:
        if isinstance(expr, Forall):
            out = []
            for e in self.bindings(expr.binders, env):
                out.extend(self.violations(index, expr.body, e))
            return out
        if self.holds(expr, env):
            return []
        return [Violation(index, tuple(env.items()), _describe(expr))]


_HOLDS = {
    Forall: _Evaluator._forall,
    Exists: _Evaluator._exists,
    And: _Evaluator._and,
    Or: _Evaluator._or,
    CardCmp: _Evaluator._card,
    ConnectsTo: _Evaluator._connects,
    Reachable: _Evaluator._reachable,
}


def _describe(expr) -> str:
    return "not satisfied: " + print_expr(expr)


def validate(config: Configuration, goal: Goal) -> list[Violation]:
    """Evaluate every top-level clause of *goal* directly against *config*.

    Top-level universal quantifiers are unrolled so that each failing binding
    is reported separately.
    """
    ev = _Evaluator(config, goal)
    out = []
    for index, clause in enumerate(goal.clauses):
        out.extend(ev.violations(index, clause, {}))
    return out


def satisfies(config: Configuration, goal: Goal) -> bool:
    """True iff *config* violates no clause; stops at the first failure."""
    ev = _Evaluator(config, goal)
    return all(ev.holds(clause, {}) for clause in goal.clauses)


# --------------------------------------------------------------------------
# DDD serialization

def to_ddd(config: Configuration) -> bytes:
    lines = [f"<deployment goal={quoteattr(config.goal_name)}>"]
    insts = config.sorted_instances()
    if insts:
        lines.append("  <instances>")
        for i in insts:
            lines.append(f"    <instance id={quoteattr(i.id)} type={quoteattr(i.type_name)} host={quoteattr(i.host)}/>")
        lines.append("  </instances>")
    else:
        lines.append("  <instances/>")
    wires = config.sorted_wires()
    if wires:
        lines.append("  <wires>")
        for w in wires:
            lines.append(f"    <wire src={quoteattr(str(w.src))} dst={quoteattr(str(w.dst))}/>")
        lines.append("  </wires>")
    else:
        lines.append("  <wires/>")
    lines.append("</deployment>")
    return ("\n".join(lines) + "\n").encode("utf-8")


def _attr(elem, name, path):
    value = elem.get(name)
    if value is None:
        raise DddParseError(f"missing attribute {name!r}", path)
    return value


def from_ddd(doc: Union[bytes, str]) -> Configuration:
    if isinstance(doc, str):
        doc = doc.encode("utf-8")
    try:
        root = ET.fromstring(doc)
    except ET.ParseError as exc:
        raise DddParseError(f"malformed XML: {exc}") from None
    if root.tag != "deployment":
        raise DddParseError(f"root element must be <deployment>, not <{root.tag}>", "/" + root.tag)
    goal_name = _attr(root, "goal", "/deployment")
    sections = {}
    for child in root:
        path = f"/deployment/{child.tag}"
        if child.tag not in ("instances", "wires"):
            raise DddParseError("unexpected element", path)
        if child.tag in sections:
            raise DddParseError("duplicate section", path)
        sections[child.tag] = child
    instances = {}
    for n, elem in enumerate(sections.get("instances", ())):
        path = f"/deployment/instances/{elem.tag}[{n}]"
        if elem.tag != "instance":
            raise DddParseError("unexpected element", path)
        inst = Instance(_attr(elem, "id", path), _attr(elem, "type", path), _attr(elem, "host", path))
        if inst.id in instances:
            raise DddParseError(f"duplicate instance id {inst.id}", path)
        if not re.fullmatch(re.escape(inst.type_name) + r"\d+@" + re.escape(inst.host), inst.id):
            raise DddParseError(f"instance id {inst.id} must be <type><ordinal>@<host>", path)
        instances[inst.id] = inst
    wires = []
    used = set()
    for n, elem in enumerate(sections.get("wires", ())):
        path = f"/deployment/wires/{elem.tag}[{n}]"
        if elem.tag != "wire":
            raise DddParseError("unexpected element", path)
        try:
            src = Endpoint.parse(_attr(elem, "src", path))
            dst = Endpoint.parse(_attr(elem, "dst", path))
        except ValueError as exc:
            raise DddParseError(str(exc), path) from None
        for ep in (src, dst):
            if ep.instance not in instances:
                raise DddParseError(f"endpoint {ep} references undeclared instance", path)
            if ep in used:
                raise DddParseError(f"endpoint {ep} is used by more than one wire", path)
            used.add(ep)
        if src.instance == dst.instance:
            raise DddParseError("wire connects an instance to itself", path)
        wires.append(Wire(src, dst))
    return Configuration(goal_name, instances.values(), wires)


# --------------------------------------------------------------------------
# Enactment plans

@dataclass(frozen=True)
class UnwireAction:
    host: str
    wire: Wire
    kind = "UNWIRE"

    def describe(self):
        return f"{self.wire.src} {self.wire.dst}"


@dataclass(frozen=True)
class TerminateAction:
    host: str
    instance_id: str
    kind = "TERMINATE"

    def describe(self):
        return self.instance_id


@dataclass(frozen=True)
class InstallStartAction:
    host: str
    instance_id: str
    type_name: str
    code_uri: str = ""
    kind = "INSTALL_START"

    def describe(self):
        return f"{self.instance_id} type={self.type_name} code={self.code_uri}"


@dataclass(frozen=True)
class WireAction:
    host: str
    wire: Wire
    kind = "WIRE"

    def describe(self):
        return f"{self.wire.src} {self.wire.dst}"


Action = Union[UnwireAction, TerminateAction, InstallStartAction, WireAction]


@dataclass(frozen=True)
class EnactmentPlan:
    actions: tuple = field(default_factory=tuple)

    def __iter__(self):
        return iter(self.actions)

    def __len__(self):
        return len(self.actions)

    def of_kind(self, cls) -> list:
        return [a for a in self.actions if isinstance(a, cls)]


def diff(old: Configuration, new: Configuration, code_uris: dict[str, str] | None = None) -> EnactmentPlan:
    """Minimal ordered action list turning *old* into *new*.

    Instances are matched by id, which encodes (type, ordinal, host).
    Order: unwire, terminate, install/start, wire.
    """
    code_uris = code_uris or {}
    old_ids, new_ids = old.by_id, new.by_id
    host_of = {**old_ids, **new_ids}
    actions: list = []
    for w in sorted(old.wires - new.wires):
        actions.append(UnwireAction(host_of[w.src.instance].host, w))
    for iid in sorted(old_ids.keys() - new_ids.keys()):
        actions.append(TerminateAction(old_ids[iid].host, iid))
    for iid in sorted(new_ids.keys() - old_ids.keys()):
        inst = new_ids[iid]
        actions.append(InstallStartAction(inst.host, iid, inst.type_name, code_uris.get(inst.type_name, "")))
    for iid in sorted(new_ids.keys() & old_ids.keys()):
        if new_ids[iid] != old_ids[iid]:
            raise ValueError(f"instance {iid} changes type or host between configurations")
    for w in sorted(new.wires - old.wires):
        actions.append(WireAction(host_of[w.src.instance].host, w))
    return EnactmentPlan(tuple(actions))


def apply_plan(config: Configuration, plan: Iterable[Action], goal_name: str | None = None) -> Configuration:
    insts = config.by_id
    wires = set(config.wires)
    for a in plan:
        if isinstance(a, UnwireAction):
            if a.wire not in wires:
                raise ValueError(f"cannot unwire absent wire {a.wire}")
            wires.remove(a.wire)
        elif isinstance(a, TerminateAction):
            if a.instance_id not in insts:
                raise ValueError(f"cannot terminate absent instance {a.instance_id}")
            if any(w.touches(a.instance_id) for w in wires):
                raise ValueError(f"terminating {a.instance_id} while it is still wired")
            del insts[a.instance_id]
        elif isinstance(a, InstallStartAction):
            if a.instance_id in insts:
                raise ValueError(f"instance {a.instance_id} already exists")
            insts[a.instance_id] = Instance(a.instance_id, a.type_name, a.host)
        elif isinstance(a, WireAction):
            if a.wire.src.instance not in insts or a.wire.dst.instance not in insts:
                raise ValueError(f"wiring {a.wire} before both instances exist")
            wires.add(a.wire)
        else:
            raise TypeError(a)
    return Configuration(goal_name or config.goal_name, insts.values(), wires)
