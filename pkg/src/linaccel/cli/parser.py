"""Frontend for the loop description language.

A program is a list of `real` declarations, optional `assume(...)` lines
constraining the initial states, and structured statements:

    real x, y;
    assume(1 <= x <= 3 and 0 <= y <= 2);
    while (y <= 3) {
        x := 3/2 * x;
        y := y + 1;
    }

Assignments accept `:=` or `=`, plus `v++` and `v--` sugar.  Assertions
are conjunctions (`and` or `&&`) of chains of `<=`, `>=` and `=` over
affine expressions; strict comparisons are rejected.  Numeric literals
are exact rationals, in decimal (1.5 is 3/2) or p/q form.  The guard
`true` stands for the assertion 0 <= 0.  A loop body may start with a

    jordan { R = [[...], ...]; J = blocks [real(3/2, 1), ...]; }

override supplying the eigenbasis and block structure of the homogenized
body matrix when the built-in decomposition refuses the spectrum; blocks
are real(value, size) or complex(re, im, size), and Rinv may replace R.
Comments are /* ... */ or // to end of line.
"""

import re
from dataclasses import dataclass
from fractions import Fraction

from gmpy2 import mpq

from ..analyzer import Assign, If, Program, While, normalize


class ParseError(Exception):
    def __init__(self, message, line, col):
        super().__init__(f"line {line}, col {col}: {message}")
        self.line = line
        self.col = col


_KEYWORDS = {
    "real", "assume", "while", "if", "else", "true", "and",
    "jordan", "blocks", "complex",
}

_TOKEN_RE = re.compile(
    r"""(?P<ws>\s+)
      | (?P<comment>/\*.*?\*/|//[^\n]*)
      | (?P<number>\d+\.\d+|\.\d+|\d+)
      | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
      | (?P<punct>:=|<=|>=|&&|\+\+|--|[;,(){}\[\]+\-*/=<>])
    """,
    re.VERBOSE | re.DOTALL,
)


@dataclass(frozen=True)
class _Token:
    kind: str
    value: str
    line: int
    col: int


def _tokenize(text):
    out, pos = [], 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            line = text.count("\n", 0, pos) + 1
            col = pos - text.rfind("\n", 0, pos)
            if text.startswith("/*", pos):
                raise ParseError("unterminated comment", line, col)
            raise ParseError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        if kind not in ("ws", "comment"):
            line = text.count("\n", 0, pos) + 1
            col = pos - text.rfind("\n", 0, pos)
            out.append(_Token(kind, m.group(), line, col))
        pos = m.end()
    out.append(_Token("eof", "", text.count("\n") + 1, 1))
    return out


def _literal(text):
    f = Fraction(text)
    return mpq(f.numerator, f.denominator)


class _Parser:
    def __init__(self, tokens):
        self.tokens = tokens
        self.i = 0
        self.variables = []
        self.index = {}

    # -- token plumbing ---------------------------------------------------

    def peek(self, ahead=0):
        return self.tokens[min(self.i + ahead, len(self.tokens) - 1)]

    def next(self):
        tok = self.tokens[self.i]
        if tok.kind != "eof":
            self.i += 1
        return tok

    def fail(self, message, tok=None):
        tok = tok or self.peek()
        raise ParseError(message, tok.line, tok.col)

    def expect(self, value, what=None):
        tok = self.next()
        if tok.value != value:
            self.fail(f"expected {what or value!r}, found {tok.value!r}", tok)
        return tok

    def at_ident(self, *names):
        tok = self.peek()
        return tok.kind == "ident" and (not names or tok.value in names)

    # -- toplevel ---------------------------------------------------------

    def program(self, flatten_nested):
        while self.at_ident("real"):
            self.declaration()
        if not self.variables:
            self.fail("expected a 'real' declaration")
        assume = []
        while self.at_ident("assume"):
            assume.extend(self.assume_line())
        body = []
        while self.peek().kind != "eof":
            if self.at_ident("real"):
                self.fail("declarations must precede statements")
            if self.at_ident("assume"):
                self.fail("assume lines must precede statements")
            body.append(self.statement())
        return normalize(
            self.variables, tuple(assume), tuple(body),
            flatten_nested=flatten_nested,
        )

    def declaration(self):
        self.expect("real")
        while True:
            tok = self.next()
            if tok.kind != "ident" or tok.value in _KEYWORDS:
                self.fail("expected a variable name", tok)
            if tok.value in self.index:
                self.fail(f"variable {tok.value!r} declared twice", tok)
            self.index[tok.value] = len(self.variables)
            self.variables.append(tok.value)
            tok = self.next()
            if tok.value == ";":
                return
            if tok.value != ",":
                self.fail("expected ',' or ';' in declaration", tok)

    def assume_line(self):
        self.expect("assume")
        parens = self.peek().value == "("
        if parens:
            self.next()
        rows = self.assertion()
        if parens:
            self.expect(")")
        self.expect(";")
        return rows

    # -- statements -------------------------------------------------------

    def statement(self):
        tok = self.peek()
        if tok.kind != "ident":
            self.fail(f"expected a statement, found {tok.value!r}")
        if tok.value == "while":
            return self.while_stmt()
        if tok.value == "if":
            return self.if_stmt()
        if tok.value == "jordan":
            self.fail("jordan override must open a loop body")
        if tok.value in _KEYWORDS:
            self.fail(f"unexpected keyword {tok.value!r}")
        name = self.next()
        target = self.index.get(name.value)
        if target is None:
            self.fail(f"unknown variable {name.value!r}", name)
        op = self.next()
        unit = tuple(
            mpq(1) if j == target else mpq(0) for j in range(len(self.variables))
        )
        if op.value in ("++", "--"):
            self.expect(";")
            return Assign(target, unit, mpq(1) if op.value == "++" else mpq(-1))
        if op.value not in (":=", "="):
            self.fail("expected ':=', '=', '++' or '--'", op)
        coeffs, const = self.linexpr()
        self.expect(";")
        return Assign(target, coeffs, const)

    def while_stmt(self):
        self.expect("while")
        guard = self.guard()
        body, override = self.block(allow_jordan=True)
        return While(guard, body, override)

    def if_stmt(self):
        self.expect("if")
        cond = self.guard()
        then_body, _ = self.block()
        else_body = ()
        if self.at_ident("else"):
            self.next()
            if self.at_ident("if"):
                else_body = (self.if_stmt(),)
            else:
                else_body, _ = self.block()
        return If(cond, then_body, else_body)

    def guard(self):
        if self.peek().value == "(":
            self.next()
            rows = self.assertion()
            self.expect(")")
            return rows
        return self.assertion()

    def block(self, allow_jordan=False):
        self.expect("{")
        override = None
        if self.at_ident("jordan"):
            if not allow_jordan:
                self.fail("jordan override must open a loop body")
            override = self.jordan_override()
        body = []
        while self.peek().value != "}":
            if self.peek().kind == "eof":
                self.fail("unterminated block, expected '}'")
            body.append(self.statement())
        self.next()
        return tuple(body), override

    # -- assertions and expressions ----------------------------------------

    def assertion(self):
        rows = list(self.chain())
        while self.peek().value == "&&" or self.at_ident("and"):
            self.next()
            rows.extend(self.chain())
        return tuple(rows)

    def chain(self):
        dim = len(self.variables)
        if self.at_ident("true"):
            self.next()
            return [((mpq(0),) * dim, mpq(0))]
        exprs = [self.linexpr()]
        rels = []
        while True:
            tok = self.peek()
            if tok.value in ("<", ">"):
                self.fail("strict comparisons are not supported, use <= or >=")
            if tok.value not in ("<=", ">=", "="):
                break
            rels.append(self.next().value)
            exprs.append(self.linexpr())
        if not rels:
            self.fail("expected a comparison")
        rows = []
        for a, rel, b in zip(exprs, rels, exprs[1:]):
            if rel in ("<=", "="):
                rows.append(_row_le(a, b))
            if rel in (">=", "="):
                rows.append(_row_le(b, a))
        return rows

    def linexpr(self):
        coeffs, const = self.term()
        while self.peek().value in ("+", "-"):
            op = self.next().value
            c2, k2 = self.term()
            if op == "-":
                c2 = tuple(-c for c in c2)
                k2 = -k2
            coeffs = tuple(a + b for a, b in zip(coeffs, c2))
            const = const + k2
        return coeffs, const

    def term(self):
        e = self.factor()
        while self.peek().value in ("*", "/"):
            op = self.next()
            f = self.factor()
            if op.value == "*":
                if any(e[0]) and any(f[0]):
                    self.fail("non-affine product of variables", op)
                if any(f[0]):
                    e, f = f, e
                e = tuple(c * f[1] for c in e[0]), e[1] * f[1]
            else:
                if any(f[0]):
                    self.fail("non-affine division by a variable", op)
                if f[1] == 0:
                    self.fail("division by zero", op)
                e = tuple(c / f[1] for c in e[0]), e[1] / f[1]
        return e

    def factor(self):
        tok = self.next()
        dim = len(self.variables)
        if tok.value == "(":
            e = self.linexpr()
            self.expect(")")
            return e
        if tok.value == "-":
            coeffs, const = self.factor()
            return tuple(-c for c in coeffs), -const
        if tok.value == "+":
            return self.factor()
        if tok.kind == "number":
            return (mpq(0),) * dim, _literal(tok.value)
        if tok.kind == "ident" and tok.value not in _KEYWORDS:
            j = self.index.get(tok.value)
            if j is None:
                self.fail(f"unknown variable {tok.value!r}", tok)
            return (
                tuple(mpq(1) if i == j else mpq(0) for i in range(dim)),
                mpq(0),
            )
        self.fail(f"expected an expression, found {tok.value!r}", tok)

    # -- jordan override ----------------------------------------------------

    def jordan_override(self):
        self.expect("jordan")
        self.expect("{")
        R = R_inv = blocks = None
        while self.peek().value != "}":
            key = self.next()
            if key.kind != "ident":
                self.fail("expected R, Rinv or J", key)
            self.expect("=")
            if key.value == "J":
                self.expect("blocks")
                blocks = self.block_specs()
            elif key.value == "R":
                R = self.matrix()
            elif key.value == "Rinv":
                R_inv = self.matrix()
            else:
                self.fail("expected R, Rinv or J", key)
            self.expect(";")
        self.next()
        if blocks is None:
            self.fail("jordan override needs J = blocks [...]")
        if R is None and R_inv is None:
            self.fail("jordan override needs R or Rinv")
        return blocks, R, R_inv

    def block_specs(self):
        self.expect("[")
        out = []
        while True:
            kind = self.next()
            if kind.value == "real":
                self.expect("(")
                value = self.rational()
                self.expect(",")
                size = self.integer()
                self.expect(")")
                out.append(("real", value, size))
            elif kind.value == "complex":
                self.expect("(")
                re_part = self.rational()
                self.expect(",")
                im_part = self.rational()
                self.expect(",")
                size = self.integer()
                self.expect(")")
                out.append(("complex", re_part, im_part, size))
            else:
                self.fail("expected real(...) or complex(...)", kind)
            tok = self.next()
            if tok.value == "]":
                return tuple(out)
            if tok.value != ",":
                self.fail("expected ',' or ']'", tok)

    def matrix(self):
        self.expect("[")
        rows = []
        while True:
            rows.append(self.vector())
            tok = self.next()
            if tok.value == "]":
                break
            if tok.value != ",":
                self.fail("expected ',' or ']'", tok)
        if any(len(r) != len(rows[0]) for r in rows):
            self.fail("matrix rows differ in length")
        return tuple(rows)

    def vector(self):
        self.expect("[")
        out = []
        while True:
            out.append(self.rational())
            tok = self.next()
            if tok.value == "]":
                return tuple(out)
            if tok.value != ",":
                self.fail("expected ',' or ']'", tok)

    def rational(self):
        sign = mpq(1)
        while self.peek().value in ("-", "+"):
            if self.next().value == "-":
                sign = -sign
        tok = self.next()
        if tok.kind != "number":
            self.fail("expected a number", tok)
        value = _literal(tok.value)
        if self.peek().value == "/":
            self.next()
            den = self.next()
            if den.kind != "number":
                self.fail("expected a denominator", den)
            d = _literal(den.value)
            if d == 0:
                self.fail("division by zero", den)
            value = value / d
        return sign * value

    def integer(self):
        tok = self.next()
        if tok.kind != "number" or "." in tok.value:
            self.fail("expected an integer", tok)
        return int(tok.value)


def _row_le(a, b):
    # a <= b as (a - b) coefficients <= const difference
    coeffs = tuple(x - y for x, y in zip(a[0], b[0]))
    return coeffs, b[1] - a[1]


def parse(source, *, flatten_nested=False):
    """Parse source text into a normalized Program."""
    return _Parser(_tokenize(source)).program(flatten_nested)


# --------------------------------------------------------------------------
# pretty printer
# --------------------------------------------------------------------------


def _term_str(c, name):
    if c == 1:
        return name
    if c == -1:
        return f"-{name}"
    return f"{c}*{name}"


def _expr_str(coeffs, const, names):
    parts = [_term_str(c, n) for c, n in zip(coeffs, names) if c != 0]
    if const != 0 or not parts:
        parts.append(str(const))
    out = parts[0]
    for p in parts[1:]:
        out += f" - {p[1:]}" if p.startswith("-") else f" + {p}"
    return out


def _row_str(row, names):
    g, r = row
    return f"{_expr_str(g, mpq(0), names)} <= {r}"


def _assertion_str(rows, names):
    # exactly the shape `true` parses to, so round-trips stay identical
    if not rows or (len(rows) == 1 and not any(rows[0][0]) and rows[0][1] == 0):
        return "true"
    return " and ".join(_row_str(row, names) for row in rows)


def _matrix_str(rows):
    return "[" + ", ".join("[" + ", ".join(map(str, r)) + "]" for r in rows) + "]"


def _override_str(override, pad):
    blocks, R, R_inv = override
    lines = [f"{pad}jordan {{"]
    if R is not None:
        lines.append(f"{pad}  R = {_matrix_str(R)};")
    if R_inv is not None:
        lines.append(f"{pad}  Rinv = {_matrix_str(R_inv)};")
    items = []
    for b in blocks:
        if b[0] == "real":
            items.append(f"real({b[1]}, {b[2]})")
        else:
            items.append(f"complex({b[1]}, {b[2]}, {b[3]})")
    lines.append(f"{pad}  J = blocks [" + ", ".join(items) + "];")
    lines.append(f"{pad}}}")
    return lines


def _stmt_lines(stmts, names, depth):
    pad = "  " * depth
    out = []
    for s in stmts:
        if isinstance(s, Assign):
            expr = _expr_str(s.coeffs, mpq(s.const), names)
            out.append(f"{pad}{names[s.target]} := {expr};")
        elif isinstance(s, If):
            out.append(f"{pad}if ({_assertion_str(s.cond, names)}) {{")
            out.extend(_stmt_lines(s.then_body, names, depth + 1))
            if s.else_body:
                out.append(f"{pad}}} else {{")
                out.extend(_stmt_lines(s.else_body, names, depth + 1))
            out.append(f"{pad}}}")
        else:
            out.append(f"{pad}while ({_assertion_str(s.guard, names)}) {{")
            if s.jordan is not None:
                out.extend(_override_str(s.jordan, pad + "  "))
            out.extend(_stmt_lines(s.body, names, depth + 1))
            out.append(f"{pad}}}")
    return out


def print_program(program):
    """Render a Program back to source; reparsing yields the same Program."""
    names = program.source_variables
    lines = [f"real {', '.join(names)};"]
    if program.assume:
        lines.append(f"assume({_assertion_str(program.assume, names)});")
    lines.extend(_stmt_lines(program.structured, names, 0))
    return "\n".join(lines) + "\n"
