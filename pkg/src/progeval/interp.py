"""Parser and evaluator for the generated program subset.

Used as the reference oracle for generated targets, so it shares no code
with the generator.  Grammar (statements separated by ``;`` and/or newlines,
program terminated by ``.``)::

    program   := stmt (SEP stmt)* '.'
    stmt      := 'print' '(' expr ')'
               | 'for' NAME 'in' 'range' '(' expr ')' ':' [NL] NAME ('+='|'-=') expr
               | NAME '=' expr
    expr      := sum ['if' sum ('<'|'>') sum 'else' expr]
    sum       := product (('+'|'-') product)*
    product   := atom ('*' atom)*
    atom      := INT | NAME | '(' expr ')'
"""

from dataclasses import dataclass
import re


class ParseError(SyntaxError):
    def __init__(self, message, pos):
        super().__init__(f"{message} at offset {pos}")
        self.pos = pos


class EvalError(RuntimeError):
    pass


# -- AST ---------------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: int


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class BinOp:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class IfExpr:
    then: object
    cmp: str
    lhs: object
    rhs: object
    otherwise: object


@dataclass(frozen=True)
class Assign:
    name: str
    expr: object


@dataclass(frozen=True)
class Loop:
    var: str
    count: object
    target: str
    op: str
    expr: object


@dataclass(frozen=True)
class Print:
    expr: object


@dataclass(frozen=True)
class Ast:
    statements: tuple


# -- parsing -----------------------------------------------------------------

_TOKEN = re.compile(r"(?P<int>\d+)|(?P<name>[a-z_]+)|(?P<op>\+=|-=|[-+*=()<>:.;])|(?P<nl>\n)|(?P<ws>[ \t]+)")
_KEYWORDS = {"print", "for", "in", "range", "if", "else"}


def tokenize(code):
    tokens = []
    pos = 0
    while pos < len(code):
        m = _TOKEN.match(code, pos)
        if m is None:
            raise ParseError(f"unexpected character {code[pos]!r}", pos)
        kind = m.lastgroup
        text = m.group()
        if kind == "name" and text in _KEYWORDS:
            kind = "kw"
        elif kind == "op" and text == ";":
            kind = "nl"
        if kind != "ws":
            tokens.append((kind, text, pos))
        pos = m.end()
    tokens.append(("eof", "", len(code)))
    return tokens


class _Parser:
    def __init__(self, code):
        self.tokens = tokenize(code)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self, kind=None, text=None):
        tok = self.tokens[self.i]
        if (kind is not None and tok[0] != kind) or (text is not None and tok[1] != text):
            want = text or kind
            got = tok[1] or tok[0]
            raise ParseError(f"expected {want!r}, found {got!r}", tok[2])
        self.i += 1
        return tok

    def at(self, kind, text=None):
        tok = self.tokens[self.i]
        return tok[0] == kind and (text is None or tok[1] == text)

    def skip_newlines(self):
        while self.at("nl"):
            self.i += 1

    def program(self):
        statements = []
        self.skip_newlines()
        while True:
            stmt = self.statement()
            statements.append(stmt)
            if isinstance(stmt, Print):
                break
            if not self.at("nl"):
                tok = self.peek()
                raise ParseError(f"expected end of statement, found {tok[1] or tok[0]!r}", tok[2])
            self.skip_newlines()
        self.take("op", ".")
        self.skip_newlines()
        self.take("eof")
        return Ast(tuple(statements))

    def statement(self):
        tok = self.peek()
        if tok[0] == "kw" and tok[1] == "print":
            self.i += 1
            self.take("op", "(")
            expr = self.expr()
            self.take("op", ")")
            return Print(expr)
        if tok[0] == "kw" and tok[1] == "for":
            self.i += 1
            var = self.take("name")[1]
            self.take("kw", "in")
            self.take("kw", "range")
            self.take("op", "(")
            count = self.expr()
            self.take("op", ")")
            self.take("op", ":")
            self.skip_newlines()
            target = self.take("name")[1]
            op_tok = self.peek()
            if op_tok[1] not in ("+=", "-="):
                raise ParseError(f"loop body must be += or -=, found {op_tok[1]!r}", op_tok[2])
            self.i += 1
            if self.at("kw", "for"):
                raise ParseError("nested loops are not allowed", self.peek()[2])
            return Loop(var, count, target, op_tok[1][0], self.expr())
        if tok[0] == "name":
            self.i += 1
            self.take("op", "=")
            return Assign(tok[1], self.expr())
        raise ParseError(f"expected a statement, found {tok[1] or tok[0]!r}", tok[2])

    def expr(self):
        then = self.sum()
        if not self.at("kw", "if"):
            return then
        self.i += 1
        lhs = self.sum()
        cmp = self.peek()
        if cmp[1] not in ("<", ">"):
            raise ParseError(f"expected '<' or '>', found {cmp[1] or cmp[0]!r}", cmp[2])
        self.i += 1
        rhs = self.sum()
        self.take("kw", "else")
        return IfExpr(then, cmp[1], lhs, rhs, self.expr())

    def sum(self):
        node = self.product()
        while self.at("op", "+") or self.at("op", "-"):
            op = self.take()[1]
            node = BinOp(op, node, self.product())
        return node

    def product(self):
        node = self.atom()
        while self.at("op", "*"):
            self.i += 1
            node = BinOp("*", node, self.atom())
        return node

    def atom(self):
        tok = self.peek()
        if tok[0] == "int":
            self.i += 1
            return Num(int(tok[1]))
        if tok[0] == "name":
            self.i += 1
            return Var(tok[1])
        if tok[0] == "op" and tok[1] == "(":
            self.i += 1
            node = self.expr()
            self.take("op", ")")
            return node
        raise ParseError(f"expected a number, name or '(', found {tok[1] or tok[0]!r}", tok[2])


def parse(code: str) -> Ast:
    if not code.strip():
        raise ParseError("empty program", 0)
    return _Parser(code).program()


# -- evaluation --------------------------------------------------------------


class Evaluator:
    """Walks an :class:`Ast`; ``steps`` counts expression nodes and loop iterations."""

    def __init__(self):
        self.env = {}
        self.steps = 0

    def value(self, node):
        self.steps += 1
        if isinstance(node, Num):
            return node.value
        if isinstance(node, Var):
            try:
                return self.env[node.name]
            except KeyError:
                raise EvalError(f"variable {node.name!r} is not bound") from None
        if isinstance(node, BinOp):
            a = self.value(node.left)
            b = self.value(node.right)
            if node.op == "+":
                return a + b
            if node.op == "-":
                return a - b
            return a * b
        if isinstance(node, IfExpr):
            lhs = self.value(node.lhs)
            rhs = self.value(node.rhs)
            cond = lhs < rhs if node.cmp == "<" else lhs > rhs
            return self.value(node.then if cond else node.otherwise)
        raise EvalError(f"unknown node {node!r}")

    def run(self, ast: Ast) -> int:
        for stmt in ast.statements:
            if isinstance(stmt, Assign):
                self.env[stmt.name] = self.value(stmt.expr)
            elif isinstance(stmt, Loop):
                count = self.value(stmt.count)
                step = self.value(stmt.expr)
                if stmt.target not in self.env:
                    raise EvalError(f"variable {stmt.target!r} is not bound")
                for k in range(count):
                    self.steps += 1
                    self.env[stmt.var] = k
                    if stmt.op == "+":
                        self.env[stmt.target] += step
                    else:
                        self.env[stmt.target] -= step
            elif isinstance(stmt, Print):
                return self.value(stmt.expr)
        raise EvalError("program has no print statement")


def evaluate(ast: Ast) -> int:
    return Evaluator().run(ast)


def run(code: str) -> int:
    """Parse and evaluate in one go."""
    return evaluate(parse(code))
