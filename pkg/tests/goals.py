"""Small goals for oracle-equivalence checks, one per clause form."""

TWO_TYPES = """
component A(code = "file:///a.xml", ports = {p, q})
component B(code = "file:///b.xml", ports = {x[], y[]})
"""


def hosts(n):
    return "".join(f'host h{i} = host(ipaddress = "10.0.0.{i}")\n' for i in range(1, n + 1))


EMPTY = """
component X(code = "file:///x.xml", ports = {p})
host h1 = host(ipaddress = "10.0.0.1")
constraintset empty = constraintset {
}
"""

# card over instancesof with every comparison, plus or
CARD = TWO_TYPES + hosts(3) + """
constraintset cards = constraintset {
  forall host h in deployment (
    card(instancesof A in h) = 1 or card(instancesof B in h) >= 1
  )
  forall host h in deployment (
    card(instancesof B in h) < 1 or card(instancesof A in h) != 1
  )
  forall host h in deployment (card(instancesof A in h) <= 1)
  exists host h in deployment (card(instancesof B in h) > 0)
}
"""

# existential with conjunction of connectsto, connectedto card
CONNECT = TWO_TYPES + hosts(3) + """
constraintset wiring = constraintset {
  forall host h in deployment (card(instancesof A in h) = 1 or card(instancesof B in h) = 1)
  forall A a in deployment (
    exists B b in deployment (
      a.ports.p connectsto b.ports.x
      a.ports.q connectsto b.ports.y
    )
  )
  forall B b in deployment (card(A a connectedto b) <= 1)
}
"""

# a lone reachable atom under a disjunction (not the all-pairs pattern)
REACH = TWO_TYPES + hosts(3) + """
constraintset reach = constraintset {
  exists A a in deployment (exists B b in deployment (reachable(a, b)))
  forall A a in deployment (
    exists B b in deployment (a.ports.p connectsto b.ports.x or reachable(b, a))
  )
  forall host h in deployment (card(instancesof A in h) = 1 or card(instancesof B in h) = 1)
}
"""

# all-pairs reachability (the global constraint) with an explicit and
ALL_REACH = TWO_TYPES + hosts(3) + """
constraintset ring = constraintset {
  forall host h in deployment (card(instancesof B in h) = 1 and card(instancesof A in h) = 0)
  forall B b1, b2 in deployment (reachable(b1, b2))
  forall B b1 in deployment (
    exists B b2 in deployment (b1.ports.x connectsto b2.ports.y)
  )
}
"""
