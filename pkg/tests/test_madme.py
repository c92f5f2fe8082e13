import pytest

from conftest import FIXTURES
from adme.deladas import Goal, parse_goal, print_constraints, print_resources
from adme.fabric import Directive, create_fabric, parse_scenario
from adme.madme import (
    DEGRADED, IDLE, Binding, ConstraintError, EnactError, Manager, NoDeployment, relaxation_order,
)
from adme.model import from_ddd, satisfies, to_ddd, validate
from adme.solver import SAT, UNSAT


def deployed(goal, baseline):
    f = create_fabric(goal.hosts)
    m = Manager(goal, f)
    m.deploy(baseline)
    return m, f


def replay(m, f, name):
    ds = parse_scenario((FIXTURES / name).read_text())
    for d in ds:
        f.inject(d)
    f.run_until(ds[-1].time + 10_000)


def test_deploy_baseline(randc, baseline):
    m, f = deployed(randc, baseline)
    assert m.deployed == baseline
    assert m.solver_calls == 1
    assert m.phase == IDLE and m.ok
    assert f.log[0] == "t=0 SOLVE status=SAT pins=6 nodes=14"
    assert f.log[-1] == "t=0 DEPLOYED instances=6 wires=10 actions=16"
    assert len(f.channels) == 20


def test_deploy_without_preference(randc):
    f = create_fabric(randc.hosts)
    m = Manager(randc, f)
    config = m.deploy()
    assert validate(config, randc) == [] and m.solver_calls == 1


def test_restart_reinstalls_and_rewires(randc, baseline):
    m, f = deployed(randc, baseline)
    start = len(f.log)
    replay(m, f, "kill_process_h3.scn")
    tail = f.log[start:]
    assert "t=5500 RESTART Router1@h3 on h3" in tail
    assert sum("INSTALL_START Router1@h3" in line for line in tail) == 1
    assert sum(" WIRE " in line for line in tail) == 6
    assert to_ddd(m.deployed) == to_ddd(baseline)
    assert m.solver_calls == 1
    assert len(f.channels) == 20


def test_restart_of_unknown_process_is_ignored(randc, baseline):
    m, f = deployed(randc, baseline)
    m.restart("h3", "Router9@h3")
    assert f.log[-1] == "t=0 IGNORED process Router9@h3 is not deployed"


def test_relaxation_order(baseline):
    order = relaxation_order(baseline.without_hosts(["h3"]))
    assert [str(b) for b in order] == ["Client@h1", "Client@h5", "Client@h2", "Client@h6", "Router@h4"]
    assert order[0] == Binding("Client", "h1", "Client1@h1")


def test_evolve_after_host_failure(randc, baseline):
    m, f = deployed(randc, baseline)
    start = len(f.log)
    replay(m, f, "kill_host_h3.scn")
    tail = [line for line in f.log[start:] if "HEARTBEAT" not in line]
    assert "t=9000 EVOLVE failed=h3 survivors=5" in tail
    assert "t=9000 SOLVE status=UNSAT pins=5 nodes=0" in tail
    assert "t=9000 RELEASED Client1@h1" in tail
    new = m.deployed
    assert {i.id for i in new.instances} == {"Client1@h2", "Client1@h5", "Client1@h6", "Router1@h1", "Router1@h4"}
    assert validate(new, m.goal) == [] and m.goal.host_names == ("h1", "h2", "h4", "h5", "h6")
    assert m.solver_calls == 3
    assert not any("TERMINATE Router1@h4" in line for line in tail)
    fired = [line.split(" ", 3)[3] for line in tail if "BUNDLE_FIRED" in line]
    assert fired[:2] == ["TERMINATE Client1@h1", "INSTALL_START Router1@h1 type=Router code=http://deladas.org/RBundle.xml"]


def test_still_valid_skips_the_solver(randc, baseline):
    m, f = deployed(randc, baseline)
    f.inject(Directive(1000, "kill-host", ("h1",)))
    f.run_until(10_000)
    assert "t=5000 STILL_VALID" in f.log
    assert m.solver_calls == 1
    assert "Client1@h1" not in m.deployed.by_id


def test_shrinking_to_one_host_degrades(randc, baseline):
    m, f = deployed(randc, baseline)
    replay(m, f, "shrink_to_one.scn")
    assert m.phase == DEGRADED and not m.ok
    assert any(" CONSTRAINT_ERROR " in line for line in f.log)
    err = m.constraint_errors[-1]
    assert isinstance(err, ConstraintError) and err.last_status == UNSAT
    assert m.goal.host_names == ("h6",)


def test_new_host_recovers_from_degraded(randc, baseline):
    m, f = deployed(randc, baseline)
    replay(m, f, "shrink_then_add.scn")
    assert m.phase == IDLE and m.ok
    assert set(m.goal.host_names) == {"h6", "h7"}
    assert validate(m.deployed, m.goal) == []


def test_host_added_that_breaks_the_goal_triggers_one_solve(randc, baseline):
    m, f = deployed(randc, baseline)
    f.inject(Directive(100, "add-host", ("h7",), (("ipaddress", "192.168.0.7"),)))
    f.run_until(200)
    # every host must carry a component, so h7 forces one pinned re-solve
    assert m.solver_calls == 2
    assert baseline.instances <= m.deployed.instances
    assert "h7" in {i.host for i in m.deployed.instances}
    assert m.ok


def test_host_added_while_valid_costs_no_solve(randc, baseline):
    # drop the every-host-is-used clause so a spare host leaves the deployment valid
    goal = Goal(randc.name, randc.component_types, randc.hosts, randc.clauses[1:])
    m, f = deployed(goal, baseline)
    calls = m.solver_calls
    f.inject(Directive(100, "add-host", ("h7",), (("ipaddress", "192.168.0.7"),)))
    f.run_until(200)
    assert "h7" in m.goal.host_names
    assert m.solver_calls == calls
    assert m.deployed == baseline


def test_satisfy_is_pure(randc, baseline):
    m, f = deployed(randc, baseline)
    before = (m.solver_calls, len(f.log), m.deployed, m.phase)
    r = m.satisfy(max_solutions=3)
    assert r.status == SAT and len(r.configurations) == 3
    assert all(satisfies(c, randc) for c in r.configurations)
    assert (m.solver_calls, len(f.log), m.deployed, m.phase) == before


def test_satisfy_with_config_runs_the_ladder(randc, baseline):
    m, _ = deployed(randc, baseline)
    r = m.satisfy(config=to_ddd(baseline))
    assert r.status == SAT and r.configurations[0] == baseline and r.removed == ()
    smaller = print_resources(randc.with_hosts([h for h in randc.hosts if h.name != "h3"]))
    r = m.satisfy(resources=smaller, config=baseline.without_hosts(["h3"]))
    assert [b.instance_id for b in r.removed] == ["Client1@h1"]


def test_satisfy_with_new_constraints(randc, baseline):
    m, _ = deployed(randc, baseline)
    text = print_constraints(randc).replace("<= 2", "<= 1")
    r = m.satisfy(constraints=text)
    assert r.status == SAT
    for c in r.configurations:
        assert all(sum(1 for w in c.wires if w.dst.instance == i.id and w.dst.port == "cin") <= 1
                   for i in c.instances if i.type_name == "Router")


def test_enact_current_is_a_no_op(randc, baseline):
    m, f = deployed(randc, baseline)
    fired = f.fire_count
    report = m.enact(to_ddd(baseline))
    assert report.actions == [] and report.status == "OK"
    assert f.fire_count == fired


def test_enact_rejects_invalid_configuration(randc, baseline):
    m, f = deployed(randc, baseline)
    bad = from_ddd((FIXTURES / "three_clients_one_router.xml").read_bytes())
    with pytest.raises(EnactError, match="does not satisfy"):
        m.enact(bad)
    assert m.deployed == baseline and m.phase == IDLE


def test_enact_onto_a_down_host_degrades(randc, baseline):
    f = create_fabric(randc.hosts)
    m = Manager(randc, f)
    f.inject(Directive(100, "kill-host", ("h3",)))
    f.run_until(100)
    with pytest.raises(EnactError) as e:
        m.enact(baseline)
    assert m.phase == DEGRADED
    assert e.value.report.outcomes[-1][1].startswith("error: HostUnreachable")
    assert any("ENACT_ERROR" in line for line in f.log)


def test_selectors(randc, baseline):
    f = create_fabric(randc.hosts)
    m = Manager(randc, f)
    with pytest.raises(NoDeployment):
        m.get_deployment()
    with pytest.raises(NoDeployment):
        m.evolve({"h1"})
    assert parse_goal(m.get_resources() + m.get_constraints()) == randc
    m.enact(baseline)
    assert m.get_deployment() == to_ddd(baseline)


def test_unsatisfiable_initial_goal(randc):
    goal = randc.with_hosts(randc.hosts[:1])
    f = create_fabric(goal.hosts)
    m = Manager(goal, f)
    with pytest.raises(ConstraintError):
        m.deploy()
    assert m.phase == DEGRADED and m.deployed is None
    assert m.satisfy().configurations == ()
