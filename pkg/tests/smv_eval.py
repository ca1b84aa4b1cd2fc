"""Minimal evaluator for the exported SMV modules.

Parses the small SMV subset the exporter emits (one enumerated variable,
booleans, INIT/TRANS/INVARSPEC), enumerates every assignment, computes the
reachable states by brute force, and decides the INVARSPEC properties.  It is
written against the SMV language, not against the exporter's code, so the
export tests can use it as an independent reading of the emitted models.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass

_WORD = re.compile(r"[A-Za-z_][A-Za-z0-9_]*|\d+")
_PUNCT = "(){};:,=!&|+"


def tokenize(text: str) -> list[str]:
    toks: list[str] = []
    for raw in text.splitlines():
        line = raw.split("--", 1)[0]
        i, n = 0, len(line)
        while i < n:
            c = line[i]
            if c.isspace():
                i += 1
                continue
            m = _WORD.match(line, i)
            if m:
                toks.append(m.group())
                i = m.end()
                continue
            if line.startswith("->", i) or line.startswith("<=", i):
                toks.append(line[i : i + 2])
                i += 2
                continue
            if c in _PUNCT:
                toks.append(c)
                i += 1
                continue
            raise ValueError(f"cannot tokenize {line[i:]!r}")
    return toks


@dataclass
class SmvModule:
    locations: list[str]
    booleans: list[str]
    init: tuple
    trans: tuple
    specs: list[tuple]


class _Parser:
    def __init__(self, toks: list[str]):
        self.toks = toks
        self.pos = 0

    def peek(self):
        return self.toks[self.pos] if self.pos < len(self.toks) else None

    def take(self):
        tok = self.peek()
        self.pos += 1
        return tok

    def expect(self, tok: str):
        got = self.take()
        if got != tok:
            raise ValueError(f"expected {tok!r}, got {got!r} at {self.pos}")

    # expression grammar, loosest binding first:
    #   implies := or ('->' implies)?
    #   or      := and ('|' and)*
    #   and     := cmp ('&' cmp)*
    #   cmp     := sum (('=' | '<=') sum)?
    #   sum     := unary ('+' unary)*
    #   unary   := '!' unary | atom
    #   atom    := int | ident | toint '(' e ')' | next '(' e ')' | '(' e ')'

    def expr(self):
        left = self.or_expr()
        if self.peek() == "->":
            self.take()
            return ("implies", left, self.expr())
        return left

    def or_expr(self):
        left = self.and_expr()
        while self.peek() == "|":
            self.take()
            left = ("or", left, self.and_expr())
        return left

    def and_expr(self):
        left = self.cmp_expr()
        while self.peek() == "&":
            self.take()
            left = ("and", left, self.cmp_expr())
        return left

    def cmp_expr(self):
        left = self.sum_expr()
        if self.peek() in ("=", "<="):
            op = self.take()
            right = self.sum_expr()
            return ("eq" if op == "=" else "le", left, right)
        return left

    def sum_expr(self):
        left = self.unary()
        while self.peek() == "+":
            self.take()
            left = ("plus", left, self.unary())
        return left

    def unary(self):
        if self.peek() == "!":
            self.take()
            return ("not", self.unary())
        return self.atom()

    def atom(self):
        tok = self.take()
        if tok is None:
            raise ValueError("unexpected end of input")
        if tok.isdigit():
            return ("int", int(tok))
        if tok == "(":
            inner = self.expr()
            self.expect(")")
            return inner
        if tok in ("toint", "next") and self.peek() == "(":
            self.take()
            inner = self.expr()
            self.expect(")")
            return (tok, inner)
        return ("var", tok)

    def module(self) -> SmvModule:
        self.expect("MODULE")
        self.expect("main")
        self.expect("VAR")
        locations: list[str] = []
        booleans: list[str] = []
        while self.peek() != "INIT":
            name = self.take()
            self.expect(":")
            if self.peek() == "{":
                self.take()
                while self.peek() != "}":
                    sym = self.take()
                    if sym != ",":
                        locations.append(sym)
                self.expect("}")
                if name != "loc":
                    raise ValueError(f"unexpected enum variable {name!r}")
            else:
                self.expect("boolean")
                booleans.append(name)
            self.expect(";")
        self.expect("INIT")
        init = self.expr()
        self.expect("TRANS")
        trans = self.expr()
        specs: list[tuple] = []
        while self.peek() is not None:
            self.expect("INVARSPEC")
            specs.append(self.expr())
            self.expect(";")
        return SmvModule(locations, booleans, init, trans, specs)


def parse_module(text: str) -> SmvModule:
    return _Parser(tokenize(text)).module()


def eval_expr(node: tuple, cur: dict, nxt: dict | None):
    op = node[0]
    if op == "var":
        name = node[1]
        if name in cur:
            return cur[name]
        return name  # an enumeration literal evaluates to itself
    if op == "int":
        return node[1]
    if op == "not":
        return not eval_expr(node[1], cur, nxt)
    if op == "and":
        return eval_expr(node[1], cur, nxt) and eval_expr(node[2], cur, nxt)
    if op == "or":
        return eval_expr(node[1], cur, nxt) or eval_expr(node[2], cur, nxt)
    if op == "implies":
        return (not eval_expr(node[1], cur, nxt)) or eval_expr(node[2], cur, nxt)
    if op == "eq":
        return eval_expr(node[1], cur, nxt) == eval_expr(node[2], cur, nxt)
    if op == "le":
        return eval_expr(node[1], cur, nxt) <= eval_expr(node[2], cur, nxt)
    if op == "plus":
        return eval_expr(node[1], cur, nxt) + eval_expr(node[2], cur, nxt)
    if op == "toint":
        return 1 if eval_expr(node[1], cur, nxt) else 0
    if op == "next":
        if nxt is None:
            raise ValueError("next() outside a transition context")
        return eval_expr(node[1], nxt, None)
    raise ValueError(f"unknown node {op!r}")


def all_assignments(module: SmvModule) -> list[dict]:
    out = []
    for loc in module.locations:
        for bits in itertools.product((False, True), repeat=len(module.booleans)):
            env = {"loc": loc}
            env.update(zip(module.booleans, bits))
            out.append(env)
    return out


def reachable_states(module: SmvModule) -> list[dict]:
    states = all_assignments(module)
    reached = [i for i, s in enumerate(states) if eval_expr(module.init, s, None)]
    seen = set(reached)
    frontier = list(reached)
    while frontier:
        i = frontier.pop()
        cur = states[i]
        for j, cand in enumerate(states):
            if j not in seen and eval_expr(module.trans, cur, cand):
                seen.add(j)
                frontier.append(j)
    return [states[i] for i in sorted(seen)]


def spec_holds(module: SmvModule, spec: tuple, reached: list[dict]) -> bool:
    return all(eval_expr(spec, s, None) for s in reached)


def analyze(text: str) -> tuple[SmvModule, list[dict], list[bool]]:
    """Parse, compute reachable states, and decide every INVARSPEC."""
    module = parse_module(text)
    reached = reachable_states(module)
    truths = [spec_holds(module, spec, reached) for spec in module.specs]
    return module, reached, truths
