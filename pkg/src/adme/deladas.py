"""Lexer, parser, AST and canonical printer for the Deladas goal language.

A goal file declares component types and hosts (the resources) and exactly
one constraintset::

    component Client(code = "file:///D:ClientBundle.xml", ports = {in, out})
    host h1 = host(ipaddress = "192.168.0.1")
    constraintset randc = constraintset {
        forall host h in deployment (card(instancesof Client in h) = 1)
    }

Inside a quantifier body (and at the top level of a constraintset) adjacent
expressions are implicitly conjoined.  Top-level clauses stay separate so
violations can be reported per clause.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterator, Union

__all__ = [
    "KEYWORDS",
    "Token",
    "LexError",
    "ParseError",
    "ResolveError",
    "PortDecl",
    "ComponentTypeDecl",
    "HostDecl",
    "Binder",
    "Forall",
    "Exists",
    "And",
    "Or",
    "InstancesOf",
    "ConnectedTo",
    "CardCmp",
    "PortRef",
    "ConnectsTo",
    "Reachable",
    "Goal",
    "tokenize",
    "parse_goal",
    "parse_resources",
    "parse_constraints",
    "print_goal",
    "print_resources",
    "print_constraints",
    "print_expr",
    "walk",
]

KEYWORDS = frozenset({
    "component", "host", "constraintset", "forall", "exists", "in",
    "deployment", "card", "instancesof", "connectsto", "connectedto",
    "reachable", "and", "or", "ports", "code",
})

COMPARISONS = ("<=", ">=", "!=", "=", "<", ">")

_IPV4 = re.compile(r"^(25[0-5]|2[0-4]\d|1\d\d|[1-9]?\d)(\.(25[0-5]|2[0-4]\d|1\d\d|[1-9]?\d)){3}$")


class DeladasError(Exception):
    """Base class for errors carrying a source position."""

    def __init__(self, message: str, line: int = 0, column: int = 0):
        self.message = message
        self.line = line
        self.column = column
        super().__init__(f"{line}:{column}: {message}" if line else message)


class LexError(DeladasError):
    pass


class ParseError(DeladasError):
    pass


class ResolveError(DeladasError):
    pass


@dataclass(frozen=True)
class Token:
    kind: str  # KW, IDENT, STRING, INT, OP, EOF
    text: str
    line: int
    column: int

    def __repr__(self):
        return f"{self.kind}({self.text})"


_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>//[^\n]*)
  | (?P<string>"(?:[^"\\\n]|\\["\\])*")
  | (?P<ident>[A-Za-z][A-Za-z0-9_]*)
  | (?P<int>\d+)
  | (?P<op><=|>=|!=|[=<>(){}\[\],.])
""", re.VERBOSE)


def tokenize(source: str) -> list[Token]:
    tokens = []
    pos = 0
    line, line_start = 1, 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        column = pos - line_start + 1
        if m is None:
            raise LexError(f"unexpected character {source[pos]!r}", line, column)
        kind = m.lastgroup
        text = m.group()
        if kind == "ident":
            tokens.append(Token("KW" if text in KEYWORDS else "IDENT", text, line, column))
        elif kind == "string":
            body = text[1:-1].replace('\\"', '"').replace("\\\\", "\\")
            tokens.append(Token("STRING", body, line, column))
        elif kind == "int":
            tokens.append(Token("INT", text, line, column))
        elif kind == "op":
            tokens.append(Token("OP", text, line, column))
        newlines = text.count("\n")
        if newlines:
            line += newlines
            line_start = pos + text.rindex("\n") + 1
        pos = m.end()
    tokens.append(Token("EOF", "", line, pos - line_start + 1))
    return tokens


# --------------------------------------------------------------------------
# AST

Pos = tuple  # (line, column); excluded from equality


@dataclass(frozen=True)
class PortDecl:
    name: str
    variadic: bool = False


@dataclass(frozen=True)
class ComponentTypeDecl:
    name: str
    code: str
    ports: tuple[PortDecl, ...]

    def port(self, name: str) -> PortDecl | None:
        for p in self.ports:
            if p.name == name:
                return p
        return None


@dataclass(frozen=True)
class HostDecl:
    name: str
    attributes: tuple[tuple[str, str], ...] = ()

    @property
    def ipaddress(self) -> str:
        return dict(self.attributes)["ipaddress"]


@dataclass(frozen=True)
class Binder:
    type_name: str  # component type name or "host"
    var: str
    pos: Pos = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class Forall:
    binders: tuple[Binder, ...]
    body: "Expr"


@dataclass(frozen=True)
class Exists:
    binders: tuple[Binder, ...]
    body: "Expr"


@dataclass(frozen=True)
class And:
    items: tuple["Expr", ...]


@dataclass(frozen=True)
class Or:
    items: tuple["Expr", ...]


@dataclass(frozen=True)
class InstancesOf:
    type_name: str
    host_var: str
    pos: Pos = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class ConnectedTo:
    type_name: str
    var: str
    target: str
    pos: Pos = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class CardCmp:
    set: Union[InstancesOf, ConnectedTo]
    op: str
    value: int


@dataclass(frozen=True)
class PortRef:
    var: str
    port: str
    pos: Pos = field(default=(0, 0), compare=False, repr=False)


@dataclass(frozen=True)
class ConnectsTo:
    left: PortRef
    right: PortRef


@dataclass(frozen=True)
class Reachable:
    source: str
    target: str
    pos: Pos = field(default=(0, 0), compare=False, repr=False)


Expr = Union[Forall, Exists, And, Or, CardCmp, ConnectsTo, Reachable]


@dataclass(frozen=True)
class Goal:
    name: str
    component_types: tuple[ComponentTypeDecl, ...] = ()
    hosts: tuple[HostDecl, ...] = ()
    clauses: tuple[Expr, ...] = ()

    def component(self, name: str) -> ComponentTypeDecl:
        for c in self.component_types:
            if c.name == name:
                return c
        raise KeyError(name)

    @property
    def host_names(self) -> tuple[str, ...]:
        return tuple(h.name for h in self.hosts)

    def with_hosts(self, hosts) -> "Goal":
        return Goal(self.name, self.component_types, tuple(hosts), self.clauses)


def walk(expr: Expr) -> Iterator[Expr]:
    """Yield *expr* and every sub-expression, pre-order."""
    yield expr
    if isinstance(expr, (Forall, Exists)):
        yield from walk(expr.body)
    elif isinstance(expr, (And, Or)):
        for item in expr.items:
            yield from walk(item)


# --------------------------------------------------------------------------
# Parser

@dataclass
class _Document:
    components: list
    hosts: list
    constraintsets: list  # (name, clauses, token)


class _Parser:
    def __init__(self, source: str):
        self.tokens = tokenize(source)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def error(self, message: str, tok: Token | None = None) -> ParseError:
        tok = tok or self.tok
        return ParseError(message, tok.line, tok.column)

    def at(self, kind: str, text: str | None = None) -> bool:
        tok = self.tok
        return tok.kind == kind and (text is None or tok.text == text)

    def at_op(self, text: str) -> bool:
        return self.at("OP", text)

    def at_kw(self, text: str) -> bool:
        return self.at("KW", text)

    def advance(self) -> Token:
        tok = self.tok
        self.i += 1
        return tok

    def expect(self, kind: str, text: str | None = None) -> Token:
        if not self.at(kind, text):
            want = text if text is not None else kind.lower()
            got = self.tok.text or "end of input"
            raise self.error(f"expected {want!r}, found {got!r}")
        return self.advance()

    def ident(self) -> Token:
        return self.expect("IDENT")

    def name(self) -> Token:
        # port names may collide with keywords (Client's `in` port)
        if self.tok.kind in ("IDENT", "KW"):
            return self.advance()
        raise self.error(f"expected a name, found {self.tok.text or 'end of input'!r}")

    # -- declarations

    def document(self) -> _Document:
        doc = _Document([], [], [])
        while not self.at("EOF"):
            if self.at_kw("component"):
                doc.components.append(self.component())
            elif self.at_kw("host"):
                doc.hosts.append(self.host())
            elif self.at_kw("constraintset"):
                doc.constraintsets.append(self.constraintset())
            else:
                raise self.error(
                    f"expected a component, host or constraintset declaration, found {self.tok.text!r}")
        return doc

    def component(self):
        start = self.expect("KW", "component")
        name = self.ident()
        self.expect("OP", "(")
        code = ports = None
        while True:
            if self.at_kw("code"):
                attr = self.advance()
                self.expect("OP", "=")
                if code is not None:
                    raise self.error("duplicate 'code' attribute", attr)
                code = self.expect("STRING").text
            elif self.at_kw("ports"):
                attr = self.advance()
                self.expect("OP", "=")
                if ports is not None:
                    raise self.error("duplicate 'ports' attribute", attr)
                ports = self.port_list()
            else:
                raise self.error(f"expected 'code' or 'ports', found {self.tok.text!r}")
            if self.at_op(","):
                self.advance()
                continue
            break
        self.expect("OP", ")")
        if code is None:
            raise ParseError(f"component {name.text} has no 'code' attribute", start.line, start.column)
        if ports is None:
            raise ParseError(f"component {name.text} has no 'ports' attribute", start.line, start.column)
        return ComponentTypeDecl(name.text, code, tuple(ports)), name

    def port_list(self):
        self.expect("OP", "{")
        ports = []
        seen = set()
        while True:
            tok = self.name()
            variadic = False
            if self.at_op("["):
                self.advance()
                self.expect("OP", "]")
                variadic = True
            if tok.text in seen:
                raise self.error(f"duplicate port {tok.text!r}", tok)
            seen.add(tok.text)
            ports.append(PortDecl(tok.text, variadic))
            if self.at_op(","):
                self.advance()
                continue
            break
        self.expect("OP", "}")
        return ports

    def host(self):
        self.expect("KW", "host")
        name = self.ident()
        self.expect("OP", "=")
        self.expect("KW", "host")
        self.expect("OP", "(")
        attrs = []
        seen = set()
        while True:
            key = self.name()
            self.expect("OP", "=")
            value = self.expect("STRING")
            if key.text in seen:
                raise self.error(f"duplicate host attribute {key.text!r}", key)
            seen.add(key.text)
            attrs.append((key.text, value.text))
            if key.text == "ipaddress" and not _IPV4.match(value.text):
                raise self.error(f"ipaddress {value.text!r} is not a dotted quad", value)
            if self.at_op(","):
                self.advance()
                continue
            break
        close = self.expect("OP", ")")
        if "ipaddress" not in seen:
            raise self.error(f"host {name.text} has no ipaddress", close)
        return HostDecl(name.text, tuple(attrs)), name

    def constraintset(self):
        start = self.expect("KW", "constraintset")
        name = self.ident()
        self.expect("OP", "=")
        self.expect("KW", "constraintset")
        self.expect("OP", "{")
        clauses = []
        while not self.at_op("}"):
            if self.at("EOF"):
                raise self.error("unterminated constraintset, expected '}'")
            clauses.append(self.or_expr())
        self.expect("OP", "}")
        return name.text, tuple(clauses), start

    # -- expressions

    def or_expr(self):
        items = [self.and_expr()]
        while self.at_kw("or"):
            self.advance()
            items.append(self.and_expr())
        return items[0] if len(items) == 1 else Or(tuple(items))

    def and_expr(self):
        items = [self.atom()]
        while self.at_kw("and"):
            self.advance()
            items.append(self.atom())
        return items[0] if len(items) == 1 else And(tuple(items))

    def sequence(self):
        """Parenthesized body: one or more juxtaposed expressions."""
        self.expect("OP", "(")
        items = [self.or_expr()]
        while not self.at_op(")"):
            if self.at("EOF"):
                raise self.error("expected ')'")
            items.append(self.or_expr())
        self.expect("OP", ")")
        return items[0] if len(items) == 1 else And(tuple(items))

    def atom(self):
        tok = self.tok
        if self.at_kw("forall") or self.at_kw("exists"):
            return self.quantifier()
        if self.at_kw("card"):
            return self.card()
        if self.at_kw("reachable"):
            self.advance()
            self.expect("OP", "(")
            a = self.ident()
            self.expect("OP", ",")
            b = self.ident()
            self.expect("OP", ")")
            return Reachable(a.text, b.text, (tok.line, tok.column))
        if self.at_op("("):
            return self.sequence()
        if self.at("IDENT"):
            left = self.port_ref()
            self.expect("KW", "connectsto")
            right = self.port_ref()
            return ConnectsTo(left, right)
        raise self.error(f"expected a constraint, found {tok.text or 'end of input'!r}")

    def quantifier(self):
        kind = self.advance().text
        if self.at_kw("host"):
            type_tok = self.advance()
        else:
            type_tok = self.ident()
        binders = []
        while True:
            var = self.ident()
            binders.append(Binder(type_tok.text, var.text, (var.line, var.column)))
            if self.at_op(","):
                self.advance()
                continue
            break
        self.expect("KW", "in")
        self.expect("KW", "deployment")
        body = self.sequence()
        cls = Forall if kind == "forall" else Exists
        return cls(tuple(binders), body)

    def card(self):
        self.expect("KW", "card")
        self.expect("OP", "(")
        tok = self.tok
        if self.at_kw("instancesof"):
            self.advance()
            type_tok = self.ident()
            self.expect("KW", "in")
            host_var = self.ident()
            set_expr = InstancesOf(type_tok.text, host_var.text, (type_tok.line, type_tok.column))
        else:
            type_tok = self.ident()
            var = self.ident()
            self.expect("KW", "connectedto")
            target = self.ident()
            set_expr = ConnectedTo(type_tok.text, var.text, target.text, (tok.line, tok.column))
        self.expect("OP", ")")
        if not (self.tok.kind == "OP" and self.tok.text in COMPARISONS):
            raise self.error(f"expected a comparison operator, found {self.tok.text!r}")
        op = self.advance().text
        value = int(self.expect("INT").text)
        return CardCmp(set_expr, op, value)

    def port_ref(self):
        var = self.ident()
        self.expect("OP", ".")
        self.expect("KW", "ports")
        self.expect("OP", ".")
        port = self.name()
        return PortRef(var.text, port.text, (port.line, port.column))


# --------------------------------------------------------------------------
# Resolution

class _Resolver:
    def __init__(self, types: dict[str, ComponentTypeDecl]):
        self.types = types

    def fail(self, message, pos):
        line, column = pos if pos else (0, 0)
        raise ResolveError(message, line, column)

    def component_var(self, var, scope, pos, what):
        if var not in scope:
            self.fail(f"unbound variable {var!r}", pos)
        if scope[var] == "host":
            self.fail(f"{what} needs a component variable, {var!r} is a host", pos)
        return self.types[scope[var]]

    def bind(self, binder: Binder, scope):
        if binder.type_name != "host" and binder.type_name not in self.types:
            self.fail(f"unknown component type {binder.type_name!r}", binder.pos)
        if binder.var in scope:
            self.fail(f"variable {binder.var!r} is already bound", binder.pos)
        scope = dict(scope)
        scope[binder.var] = binder.type_name
        return scope

    def check(self, expr, scope):
        if isinstance(expr, (Forall, Exists)):
            for b in expr.binders:
                scope = self.bind(b, scope)
            self.check(expr.body, scope)
        elif isinstance(expr, (And, Or)):
            for item in expr.items:
                self.check(item, scope)
        elif isinstance(expr, CardCmp):
            s = expr.set
            if s.type_name not in self.types:
                self.fail(f"unknown component type {s.type_name!r}", s.pos)
            if isinstance(s, InstancesOf):
                if s.host_var not in scope:
                    self.fail(f"unbound variable {s.host_var!r}", s.pos)
                if scope[s.host_var] != "host":
                    self.fail(f"instancesof needs a host variable, {s.host_var!r} is not one", s.pos)
            else:
                if s.var in scope:
                    self.fail(f"variable {s.var!r} is already bound", s.pos)
                self.component_var(s.target, scope, s.pos, "connectedto")
        elif isinstance(expr, ConnectsTo):
            for ref in (expr.left, expr.right):
                decl = self.component_var(ref.var, scope, ref.pos, "a port reference")
                if decl.port(ref.port) is None:
                    self.fail(f"component type {decl.name} has no port {ref.port!r}", ref.pos)
        elif isinstance(expr, Reachable):
            self.component_var(expr.source, scope, expr.pos, "reachable")
            self.component_var(expr.target, scope, expr.pos, "reachable")
        else:  # pragma: no cover - exhaustive over Expr
            raise TypeError(expr)


def _resolve_resources(doc: _Document):
    types: dict[str, ComponentTypeDecl] = {}
    for decl, tok in doc.components:
        if decl.name in types:
            raise ResolveError(f"duplicate component type {decl.name!r}", tok.line, tok.column)
        types[decl.name] = decl
    hosts: dict[str, HostDecl] = {}
    for decl, tok in doc.hosts:
        if decl.name in hosts:
            raise ResolveError(f"duplicate host {decl.name!r}", tok.line, tok.column)
        hosts[decl.name] = decl
    return types, hosts


def parse_goal(source: str) -> Goal:
    """Parse a complete goal: resources plus exactly one constraintset."""
    doc = _Parser(source).document()
    if len(doc.constraintsets) != 1:
        if not doc.constraintsets:
            raise ParseError("goal has no constraintset")
        _, _, tok = doc.constraintsets[1]
        raise ParseError("a goal may declare only one constraintset", tok.line, tok.column)
    types, hosts = _resolve_resources(doc)
    name, clauses, _ = doc.constraintsets[0]
    resolver = _Resolver(types)
    for clause in clauses:
        resolver.check(clause, {})
    return Goal(name, tuple(types.values()), tuple(hosts.values()), clauses)


def parse_resources(source: str) -> tuple[tuple[ComponentTypeDecl, ...], tuple[HostDecl, ...]]:
    doc = _Parser(source).document()
    if doc.constraintsets:
        _, _, tok = doc.constraintsets[0]
        raise ParseError("resource text may not contain a constraintset", tok.line, tok.column)
    types, hosts = _resolve_resources(doc)
    return tuple(types.values()), tuple(hosts.values())


def parse_constraints(source: str, component_types=()) -> tuple[str, tuple]:
    """Parse a lone constraintset, resolving against *component_types*."""
    doc = _Parser(source).document()
    if doc.components or doc.hosts:
        raise ParseError("constraint text may only contain a constraintset")
    if len(doc.constraintsets) != 1:
        raise ParseError("expected exactly one constraintset")
    name, clauses, _ = doc.constraintsets[0]
    resolver = _Resolver({c.name: c for c in component_types})
    for clause in clauses:
        resolver.check(clause, {})
    return name, clauses


# --------------------------------------------------------------------------
# Printer

def _quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def print_expr(expr: Expr) -> str:
    if isinstance(expr, (Forall, Exists)):
        kw = "forall" if isinstance(expr, Forall) else "exists"
        type_name = expr.binders[0].type_name
        names = ", ".join(b.var for b in expr.binders)
        return f"{kw} {type_name} {names} in deployment ({print_expr(expr.body)})"
    if isinstance(expr, And):
        return " and ".join(
            f"({print_expr(i)})" if isinstance(i, (And, Or)) else print_expr(i) for i in expr.items)
    if isinstance(expr, Or):
        return " or ".join(
            f"({print_expr(i)})" if isinstance(i, Or) else print_expr(i) for i in expr.items)
    if isinstance(expr, CardCmp):
        s = expr.set
        if isinstance(s, InstancesOf):
            inner = f"instancesof {s.type_name} in {s.host_var}"
        else:
            inner = f"{s.type_name} {s.var} connectedto {s.target}"
        return f"card({inner}) {expr.op} {expr.value}"
    if isinstance(expr, ConnectsTo):
        l, r = expr.left, expr.right
        return f"{l.var}.ports.{l.port} connectsto {r.var}.ports.{r.port}"
    if isinstance(expr, Reachable):
        return f"reachable({expr.source}, {expr.target})"
    raise TypeError(f"not a constraint expression: {expr!r}")


def print_resources(goal: Goal) -> str:
    out = []
    for c in goal.component_types:
        ports = ", ".join(p.name + ("[]" if p.variadic else "") for p in c.ports)
        out.append(f"component {c.name}(\n  code = {_quote(c.code)},\n  ports = {{{ports}}}\n)\n")
    for h in goal.hosts:
        attrs = ", ".join(f"{k} = {_quote(v)}" for k, v in h.attributes)
        out.append(f"host {h.name} = host({attrs})\n")
    return "".join(out)


def print_constraints(goal: Goal) -> str:
    lines = [f"constraintset {goal.name} = constraintset {{\n"]
    lines.extend(f"  {print_expr(c)}\n" for c in goal.clauses)
    lines.append("}\n")
    return "".join(lines)


def print_goal(goal: Goal) -> str:
    resources = print_resources(goal)
    return resources + ("\n" if resources else "") + print_constraints(goal)
