"""Exhaustive enumerator used as a correctness oracle for the solver.

Nothing here touches the CSP encoding.  Every placement (at most *cap*
instances per host) and every wire set over the connectable port pairs is
generated, then filtered with the direct evaluator in :mod:`adme.model`.
"""
from __future__ import annotations

from itertools import combinations, product
from typing import Mapping

from ..deladas import Goal
from ..model import Configuration, Endpoint, Instance, Wire, canonicalize, instance_id, port_pairs, satisfies

MAX_CANDIDATES = 6
MAX_LINKS = 24


class OracleTooLarge(ValueError):
    pass


def _placements(goal: Goal, cap: int, pins: Mapping[str, bool]):
    per_host = []
    for host in goal.hosts:
        cands = [Instance(instance_id(t.name, k, host.name), t.name, host.name)
                 for t in goal.component_types for k in range(1, cap + 1)]
        must = [c for c in cands if pins.get(c.id) is True]
        free = [c for c in cands if c.id not in pins]
        options = []
        for size in range(0, cap - len(must) + 1):
            for extra in combinations(free, size):
                options.append(tuple(must) + extra)
        if len(must) > cap:
            options = []
        per_host.append(options)
    return per_host


def _links(instances, pairs, types):
    """Unordered (endpoint, endpoint) port links between distinct instances."""
    out = []
    insts = sorted(instances, key=lambda i: i.id)
    for a, b in combinations(insts, 2):
        for pa in types[a.type_name].ports:
            for pb in types[b.type_name].ports:
                if (a.type_name, pa.name, b.type_name, pb.name) in pairs:
                    out.append(((a.id, pa.name), (b.id, pb.name)))
    return out


def _wire_sets(links, variadic):
    """Every direction assignment of a subset of *links* that fits the ports."""
    chosen = []
    used = {}
    peer = set()

    def rec(k):
        if k == len(links):
            yield list(chosen)
            return
        yield from rec(k + 1)
        x, y = links[k]
        ok = True
        for ep, other in ((x, y), (y, x)):
            if not variadic[ep] and used.get(ep, 0) >= 1:
                ok = False
            if (ep, other[0]) in peer:
                ok = False
        if not ok:
            return
        for ep, other in ((x, y), (y, x)):
            used[ep] = used.get(ep, 0) + 1
            peer.add((ep, other[0]))
        for src, dst in ((x, y), (y, x)):
            chosen.append((src, dst))
            yield from rec(k + 1)
            chosen.pop()
        for ep, other in ((x, y), (y, x)):
            used[ep] -= 1
            peer.discard((ep, other[0]))

    yield from rec(0)


def brute_force(goal: Goal, cap: int = 1, pins: Mapping[str, bool] | None = None) -> list[Configuration]:
    """All valid canonical configurations of *goal*, sorted by DDD order."""
    if cap < 1:
        raise ValueError("perHostCap must be at least 1")
    pins = dict(pins or {})
    known = {instance_id(t.name, k, h.name) for h in goal.hosts for t in goal.component_types
             for k in range(1, cap + 1)}
    for iid in pins:
        if iid not in known:
            raise ValueError(f"pin references unknown candidate {iid}")
    per_host = _placements(goal, cap, pins)
    possible = {i for options in per_host for opt in options for i in opt}
    types = {t.name: t for t in goal.component_types}
    pairs = port_pairs(goal)
    all_links = _links(possible, pairs, types)
    if len(possible) > MAX_CANDIDATES or len(all_links) > MAX_LINKS:
        raise OracleTooLarge(
            f"{len(possible)} candidates and {len(all_links)} port links exceed "
            f"{MAX_CANDIDATES}/{MAX_LINKS}")
    variadic = {(i.id, p.name): p.variadic for i in possible for p in types[i.type_name].ports}

    found = set()
    for combo in product(*per_host):
        instances = [i for group in combo for i in group]
        links = _links(instances, pairs, types)
        for wires in _wire_sets(links, variadic):
            config = Configuration(goal.name, instances, [
                Wire(Endpoint(s[0], s[1]), Endpoint(d[0], d[1])) for s, d in wires])
            if satisfies(config, goal):
                found.add(canonicalize(config))
    return sorted(found, key=_order_key)


def _order_key(config: Configuration):
    return ([i.id for i in config.sorted_instances()], [str(w) for w in config.sorted_wires()])
