import pytest
from hypothesis import given, settings, strategies as st

from adme.deladas import (
    And, Binder, CardCmp, ConnectedTo, ConnectsTo, Exists, Forall, Goal, InstancesOf,
    LexError, Or, ParseError, PortRef, Reachable, ResolveError,
    parse_constraints, parse_goal, parse_resources, print_constraints, print_expr,
    print_goal, print_resources, tokenize, walk,
)


def test_randc_shape(randc):
    assert randc.name == "randc"
    assert [c.name for c in randc.component_types] == ["Client", "Router"]
    client, router = randc.component_types
    assert [(p.name, p.variadic) for p in client.ports] == [("in", False), ("out", False)]
    assert [(p.name, p.variadic) for p in router.ports] == [
        ("cin", True), ("cout", True), ("rin", True), ("rout", True)]
    assert client.code == "file:///D:ClientBundle.xml"
    assert router.code == "http://deladas.org/RBundle.xml"
    assert randc.host_names == ("h1", "h2", "h3", "h4", "h5", "h6")
    assert randc.hosts[4].ipaddress == "192.168.0.5"
    assert len(randc.clauses) == 5


def test_randc_clause_structure(randc):
    c0, c1, c2, c3, c4 = randc.clauses
    assert isinstance(c0, Forall) and c0.binders == (Binder("host", "h"),)
    assert isinstance(c0.body, Or) and len(c0.body.items) == 2
    assert isinstance(c1.body, Exists) and isinstance(c1.body.body, And)
    assert c1.body.body.items[0] == ConnectsTo(PortRef("c", "out"), PortRef("r", "cin"))
    assert c2.body == CardCmp(ConnectedTo("Client", "c", "r"), "<=", 2)
    assert [b.var for b in c4.binders] == ["r1", "r2"]
    assert c4.body == Reachable("r1", "r2")


def test_round_trip_is_fixed_point(randc):
    text = print_goal(randc)
    again = parse_goal(text)
    assert again == randc
    assert print_goal(again) == text


def test_comments_and_keyword_port_names():
    toks = tokenize("// note\nc.ports.in // trailing\n")
    assert [t.text for t in toks] == ["c", ".", "ports", ".", "in", ""]
    assert toks[0].line == 2 and toks[0].column == 1


def test_lex_error_position():
    with pytest.raises(LexError) as e:
        tokenize("host h1 = host(\n  ipaddress = @)")
    assert (e.value.line, e.value.column) == (2, 15)


@pytest.mark.parametrize("src, fragment", [
    ('component A(code = "x")', "no 'ports'"),
    ('component A(ports = {p})', "no 'code'"),
    ('component A(code = "x", ports = {p, p})', "duplicate port"),
    ('host h = host(ipaddress = "1.2.3")', "dotted quad"),
    ('host h = host(name = "x")', "no ipaddress"),
    ('constraintset s = constraintset { forall host h in deployment (', "expected a constraint"),
    ('constraintset s = constraintset { card(instancesof A in h) == 1 }', "expected 'int', found '='"),
])
def test_parse_errors(src, fragment):
    with pytest.raises((ParseError, LexError)) as e:
        parse_goal(src)
    assert fragment in str(e.value)


def test_need_exactly_one_constraintset():
    with pytest.raises(ParseError, match="no constraintset"):
        parse_goal('component A(code = "x", ports = {p})')
    two = "constraintset a = constraintset { }\nconstraintset b = constraintset { }"
    with pytest.raises(ParseError, match="only one"):
        parse_goal(two)


RES = 'component A(code = "a", ports = {p, q[]})\nhost h1 = host(ipaddress = "10.0.0.1")\n'


@pytest.mark.parametrize("body, fragment", [
    ("forall A a in deployment (b.ports.p connectsto a.ports.q)", "unbound variable 'b'"),
    ("forall Z z in deployment (reachable(z, z))", "unknown component type 'Z'"),
    ("forall A a in deployment (forall A a in deployment (reachable(a, a)))", "already bound"),
    ("forall A a, b in deployment (a.ports.r connectsto b.ports.p)", "no port 'r'"),
    ("forall host h in deployment (reachable(h, h))", "is a host"),
    ("forall A a in deployment (card(instancesof A in a) = 1)", "needs a host variable"),
])
def test_resolve_errors(body, fragment):
    with pytest.raises(ResolveError) as e:
        parse_goal(RES + "constraintset s = constraintset {\n  " + body + "\n}")
    assert fragment in str(e.value)
    assert e.value.line == 4


def test_juxtaposition_is_conjunction():
    g = parse_goal(RES + """constraintset s = constraintset {
      forall A a, b in deployment (
        a.ports.p connectsto b.ports.q
        a.ports.q connectsto b.ports.p
      )
    }""")
    (clause,) = g.clauses
    assert isinstance(clause.body, And) and len(clause.body.items) == 2
    assert " and " in print_expr(clause)


def test_precedence_and_binds_tighter():
    g = parse_goal(RES + """constraintset s = constraintset {
      forall host h in deployment (
        card(instancesof A in h) = 0 or card(instancesof A in h) = 1 and card(instancesof A in h) < 5
      )
    }""")
    body = g.clauses[0].body
    assert isinstance(body, Or) and isinstance(body.items[1], And)


def test_split_resources_and_constraints(randc):
    types, hosts = parse_resources(print_resources(randc))
    name, clauses = parse_constraints(print_constraints(randc), types)
    assert Goal(name, types, hosts, clauses) == randc
    with pytest.raises(ParseError):
        parse_resources(print_goal(randc))
    with pytest.raises(ParseError):
        parse_constraints(print_goal(randc), types)


def test_walk_visits_every_node(randc):
    kinds = {type(e).__name__ for c in randc.clauses for e in walk(c)}
    assert {"Forall", "Exists", "Or", "And", "CardCmp", "ConnectsTo", "Reachable"} <= kinds


def test_empty_constraintset():
    g = parse_goal(RES + "constraintset nothing = constraintset {\n}")
    assert g.clauses == ()
    assert parse_goal(print_goal(g)) == g


# -- generated round trips

TYPES = {"A": ("p", "q"), "B": ("x", "y")}
HEADER = ('component A(code = "a", ports = {p, q[]})\n'
          'component B(code = "b", ports = {x[], y})\n'
          'host h1 = host(ipaddress = "10.0.0.1")\n')
OPS = ["=", "!=", "<", "<=", ">", ">="]


@st.composite
def exprs(draw, scope=(), depth=0, top=False):
    comps = [(v, t) for v, t in scope if t != "host"]
    hosts = [v for v, t in scope if t == "host"]
    names = {v for v, _ in scope}
    fresh = next(f"v{i}" for i in range(100) if f"v{i}" not in names)
    choices = ["quant"]
    if comps:
        choices += ["connects", "reach", "connected"]
    if hosts:
        choices.append("instances")
    if depth < 3 and not top:
        choices += ["and", "or"]
    if depth >= 3:
        choices = [c for c in choices if c != "quant"] or ["quant"]
    kind = draw(st.sampled_from(choices))
    if kind == "quant":
        t = draw(st.sampled_from(["A", "B", "host"]))
        cls = draw(st.sampled_from([Forall, Exists]))
        n = draw(st.integers(1, 2))
        vars_ = [fresh] + ([fresh + "b"] if n == 2 else [])
        new_scope = tuple(scope) + tuple((v, t) for v in vars_)
        body = draw(exprs(new_scope, depth + 1))
        return cls(tuple(Binder(t, v) for v in vars_), body)
    if kind == "connects":
        (a, ta), (b, tb) = draw(st.sampled_from(comps)), draw(st.sampled_from(comps))
        return ConnectsTo(PortRef(a, draw(st.sampled_from(TYPES[ta]))), PortRef(b, draw(st.sampled_from(TYPES[tb]))))
    if kind == "reach":
        return Reachable(draw(st.sampled_from(comps))[0], draw(st.sampled_from(comps))[0])
    if kind == "connected":
        target = draw(st.sampled_from(comps))[0]
        return CardCmp(ConnectedTo(draw(st.sampled_from(["A", "B"])), fresh, target),
                       draw(st.sampled_from(OPS)), draw(st.integers(0, 3)))
    if kind == "instances":
        return CardCmp(InstancesOf(draw(st.sampled_from(["A", "B"])), draw(st.sampled_from(hosts))),
                       draw(st.sampled_from(OPS)), draw(st.integers(0, 3)))
    cls = And if kind == "and" else Or
    items = draw(st.lists(exprs(scope, depth + 1), min_size=2, max_size=3))
    # the parser flattens a chain of the same connective
    flat = []
    for i in items:
        flat.extend(i.items if isinstance(i, cls) else [i])
    return cls(tuple(flat))


@settings(max_examples=150, deadline=None)
@given(st.lists(exprs(top=True), max_size=4))
def test_generated_goals_round_trip(clauses):
    text = HEADER + "constraintset gen = constraintset {\n" + "".join(
        f"  {print_expr(c)}\n" for c in clauses) + "}\n"
    g = parse_goal(text)
    assert g.clauses == tuple(clauses)
    assert print_goal(parse_goal(print_goal(g))) == print_goal(g)
