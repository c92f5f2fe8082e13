import pytest

import goals
from adme.compiler import (
    DecodeError, ReachabilityConstraint, compile_goal, decode, expand_candidates,
)
from adme.deladas import parse_goal
from adme.model import satisfies, structure_problems


def test_candidates_follow_host_then_type_order(randc):
    ids = [c.id for c in expand_candidates(randc, 2)]
    assert ids[:4] == ["Client1@h1", "Client2@h1", "Router1@h1", "Router2@h1"]
    assert len(ids) == 24
    with pytest.raises(ValueError):
        expand_candidates(randc, 0)


def test_randc_variable_counts(randc):
    p = compile_goal(randc)
    n = len(randc.hosts)
    assert len(p.exist_vars) == 2 * n
    # four directed client-router port pairs per (client, router), two per ordered router pair
    assert len(p.wire_vars) == 4 * n * n + 2 * n * (n - 1)
    assert p.num_vars >= len(p.decision_vars)
    assert p.var_names[1] == "exist[Client1@h1]"
    assert all(w.src != w.dst for w in p.wire_vars)


def test_all_pairs_reachability_becomes_global(randc):
    p = compile_goal(randc)
    routers = tuple(i for i, c in enumerate(p.candidates) if c.type_name == "Router")
    assert p.globals == (ReachabilityConstraint(routers, routers),)
    assert p.reach_literals == ()


def test_lone_reachable_atoms_become_literals():
    p = compile_goal(parse_goal(goals.REACH))
    assert p.reach_literals
    assert p.globals == ()
    assert {r.var for r in p.reach_literals} <= set(range(1, p.num_vars + 1))


def test_structural_prefix(randc):
    p = compile_goal(randc)
    assert 0 < p.structural < len(p.constraints)
    assert all(c.reif == 0 for c in p.constraints[:p.structural])


def _assignment(p, true_vars):
    a = [False] * (p.num_vars + 1)
    for v in true_vars:
        a[v] = True
    return a


def test_decode_baseline(randc, baseline):
    p = compile_goal(randc)
    lookup = p.wire_lookup()
    on = [p.exist_vars[p.candidate_index(i.id)] for i in baseline.instances]
    on += [lookup[(w.src.instance, w.src.port, w.dst.instance, w.dst.port)] for w in baseline.wires]
    config = decode(p, _assignment(p, on))
    assert config == baseline
    assert satisfies(config, randc)


def test_decode_rejects_wire_without_instances(randc):
    p = compile_goal(randc)
    w = p.wire_vars[0]
    with pytest.raises(DecodeError):
        decode(p, _assignment(p, [w.var]))


def test_decode_unchecked_skips_structure(randc):
    p = compile_goal(randc)
    w = p.wire_vars[0]
    config = decode(p, _assignment(p, [w.var]), check=False)
    assert structure_problems(config)


def test_cap_scales_candidates(randc):
    p = compile_goal(randc, 2)
    assert len(p.exist_vars) == 24
    assert {c.ordinal for c in p.candidates} == {1, 2}


def test_no_hosts_no_candidates(randc):
    empty = randc.with_hosts(())
    assert expand_candidates(empty) == []
    p = compile_goal(empty)
    assert p.exist_vars == () and p.wire_vars == ()
