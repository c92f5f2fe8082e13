import math

import pytest

import goals
from conftest import restrict
from adme.compiler import compile_goal
from adme.deladas import parse_goal
from adme.model import validate
from adme.solver import (
    ALL, CEngine, LIMIT, SAT, UNSAT, OracleTooLarge, PyEngine, SolveOptions, brute_force, solve,
    solve_goal, solutions_equal,
)

ENGINES = [PyEngine] + ([CEngine] if CEngine is not None else [])
SMALL = {name: getattr(goals, name) for name in ("EMPTY", "CARD", "CONNECT", "REACH", "ALL_REACH")}


@pytest.mark.parametrize("name", sorted(SMALL))
def test_matches_oracle_on_small_goals(name):
    goal = parse_goal(SMALL[name])
    expected = brute_force(goal)
    got = solve_goal(goal, options=SolveOptions(max_solutions=ALL))
    assert got.status == (SAT if expected else UNSAT)
    assert got.exhausted
    assert len(got.solutions) == len(set(got.solutions))
    assert solutions_equal(got.solutions, expected)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_matches_oracle_on_restricted_randc(randc, n):
    goal = restrict(randc, n)
    expected = brute_force(goal)
    got = solve_goal(goal, options=SolveOptions(max_solutions=ALL))
    assert solutions_equal(got.solutions, expected)
    assert got.status == (SAT if expected else UNSAT)


def test_oracle_with_cap_two():
    goal = parse_goal(goals.EMPTY)
    expected = brute_force(goal, cap=2)
    got = solve_goal(goal, 2, SolveOptions(max_solutions=ALL))
    assert solutions_equal(got.solutions, expected)
    assert len(expected) == 4  # {}, {X1}, {X2}, {X1, X2}


def test_pins_match_pinned_oracle(randc):
    goal = restrict(randc, 3)
    pins = {"Router1@h1": True, "Client1@h2": False}
    expected = brute_force(goal, pins=pins)
    got = solve_goal(goal, options=SolveOptions(max_solutions=ALL, pins=pins))
    assert solutions_equal(got.solutions, expected)
    for c in got.solutions:
        assert "Router1@h1" in c.by_id and "Client1@h2" not in c.by_id


def test_unknown_pin_rejected(randc):
    with pytest.raises(ValueError, match="unknown candidate"):
        solve_goal(randc, options=SolveOptions(pins={"Router1@h9": True}))
    with pytest.raises(ValueError, match="unknown candidate"):
        brute_force(restrict(randc, 2), pins={"Router1@h9": True})


def test_oracle_refuses_large_problems(randc):
    with pytest.raises(OracleTooLarge):
        brute_force(randc)


@pytest.mark.parametrize("cls", ENGINES)
def test_first_solution_on_full_randc_is_valid(randc, cls):
    out = solve_goal(randc, engine=cls)
    assert out.status == SAT and len(out.solutions) == 1
    assert validate(out.solutions[0], randc) == []


def test_engines_explore_identically(randc):
    if CEngine is None:
        pytest.skip("compiled kernel not built")
    goal = restrict(randc, 3)
    opts = SolveOptions(max_solutions=ALL)
    a = solve_goal(goal, options=opts, engine=PyEngine)
    b = solve_goal(goal, options=opts, engine=CEngine)
    assert a.serialize() == b.serialize()


def test_deterministic(randc):
    opts = SolveOptions(max_solutions=5)
    runs = {solve_goal(randc, options=opts).serialize() for _ in range(3)}
    assert len(runs) == 1


def test_prefer_steers_first_solution(randc, baseline):
    out = solve_goal(randc, options=SolveOptions(prefer=baseline))
    assert out.solutions[0] == baseline


def test_node_limit_gives_limit_not_unsat(randc):
    # some solutions are found before the budget runs out, but not all of them
    out = solve_goal(randc, options=SolveOptions(max_solutions=ALL, node_limit=50))
    assert out.status == SAT and out.solutions
    assert not out.exhausted
    unsat = parse_goal(goals.TWO_TYPES + goals.hosts(2) + """
constraintset none = constraintset {
  forall host h in deployment (card(instancesof A in h) = 1)
  forall host h in deployment (card(instancesof A in h) = 0)
}""")
    assert solve_goal(unsat).status == UNSAT


def test_limit_when_budget_runs_out_before_any_solution(randc):
    pins = {f"Router1@h{i}": True for i in range(1, 7)}
    out = solve_goal(randc, options=SolveOptions(pins=pins, node_limit=1))
    assert out.status == LIMIT
    assert out.solutions == () and not out.exhausted
    assert solve_goal(randc, options=SolveOptions(pins=pins)).status == SAT


def test_max_solutions_bound(randc):
    out = solve_goal(randc, options=SolveOptions(max_solutions=3))
    assert len(out.solutions) == 3
    assert len(set(out.solutions)) == 3
    with pytest.raises(ValueError):
        SolveOptions(max_solutions=0)
    assert ALL == math.inf


def test_solve_without_goal_skips_revalidation(randc):
    p = compile_goal(restrict(randc, 2))
    out = solve(p)
    assert out.status == SAT


@pytest.mark.parametrize("name", ["CARD", "CONNECT"])
def test_raising_the_cap_keeps_every_solution(name):
    goal = parse_goal(getattr(goals, name))
    one = solve_goal(goal, 1, SolveOptions(max_solutions=ALL))
    two = solve_goal(goal, 2, SolveOptions(max_solutions=ALL))
    assert two.exhausted
    assert set(one.solutions) < set(two.solutions)


def test_raising_the_cap_on_two_routers(randc):
    goal = restrict(randc, 2)
    one = solve_goal(goal, 1, SolveOptions(max_solutions=ALL))
    two = solve_goal(goal, 2, SolveOptions(max_solutions=ALL))
    assert set(one.solutions) <= set(two.solutions)
