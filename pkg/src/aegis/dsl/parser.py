"""Recursive-descent parser for attack patterns.

Unicode, ASCII and LaTeX spellings of operators are interchangeable, so the
same text can be pasted from a table, typed on a terminal or kept in a file.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .. import opcodes
from .ast import (
    BLOCK_FIELDS,
    TRANSACTION_FIELDS,
    Accessor,
    Arith,
    Comparison,
    PatternAst,
    RelationKind,
    RelationNode,
)


class PatternError(ValueError):
    pass


class PatternSyntaxError(PatternError):
    def __init__(self, line: int, column: int, expected, found: str = "", message: str = ""):
        self.line = line
        self.column = column
        self.expected = frozenset(expected)
        self.found = found
        detail = message or (
            f"expected {' or '.join(sorted(self.expected))}" + (f", found {found!r}" if found else "")
        )
        super().__init__(f"{line}:{column}: {detail}")


class UnknownOpcodeError(PatternError):
    def __init__(self, name: str, line: int = 0, column: int = 0):
        self.name = name
        self.line = line
        self.column = column
        super().__init__(f"{line}:{column}: unknown opcode {name!r}")


_SYMBOLS = {
    "=>": ("REL", RelationKind.CONTROL_FLOW),
    "⇒": ("REL", RelationKind.CONTROL_FLOW),
    "~>": ("REL", RelationKind.DATA_FLOW),
    "⤳": ("REL", RelationKind.DATA_FLOW),
    "↝": ("REL", RelationKind.DATA_FLOW),
    "->": ("REL", RelationKind.FOLLOWS),
    "→": ("REL", RelationKind.FOLLOWS),
    "&&": ("AND", "&&"),
    "∧": ("AND", "&&"),
    "==": ("CMP", "="),
    "=": ("CMP", "="),
    "!=": ("CMP", "!="),
    "≠": ("CMP", "!="),
    "<=": ("CMP", "<="),
    "≤": ("CMP", "<="),
    ">=": ("CMP", ">="),
    "≥": ("CMP", ">="),
    "<": ("CMP", "<"),
    ">": ("CMP", ">"),
    "+": ("ARITH", "+"),
    "-": ("ARITH", "-"),
    "*": ("ARITH", "*"),
    "·": ("ARITH", "*"),
    "⋅": ("ARITH", "*"),
    "/": ("ARITH", "/"),
    "(": ("(", "("),
    ")": (")", ")"),
    ",": (",", ","),
    ".": (".", "."),
}
_LATEX = {
    "Rightarrow": _SYMBOLS["=>"],
    "leadsto": _SYMBOLS["~>"],
    "rightarrow": _SYMBOLS["->"],
    "to": _SYMBOLS["->"],
    "wedge": _SYMBOLS["&&"],
    "land": _SYMBOLS["&&"],
    "neq": _SYMBOLS["!="],
    "ne": _SYMBOLS["!="],
    "leq": _SYMBOLS["<="],
    "le": _SYMBOLS["<="],
    "geq": _SYMBOLS[">="],
    "ge": _SYMBOLS[">="],
    "cdot": _SYMBOLS["*"],
    "times": _SYMBOLS["*"],
}
_SYMBOL_KEYS = sorted(_SYMBOLS, key=len, reverse=True)
_WORD = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_INT = re.compile(r"0[xX][0-9a-fA-F]+|[0-9]+")


@dataclass
class Token:
    kind: str
    value: object
    text: str
    line: int
    column: int


def tokenize(text: str) -> list[Token]:
    tokens = []
    i, line, col = 0, 1, 1
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if ch.isspace() or ch == "$":
            i += 1
            col += 1
            continue
        if ch == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if ch == "\\":
            m = _WORD.match(text, i + 1)
            if not m or m.group() not in _LATEX:
                raise PatternSyntaxError(line, col, {"operator"}, text[i : i + 12].split()[0])
            kind, value = _LATEX[m.group()]
            tokens.append(Token(kind, value, text[i : m.end()], line, col))
            col += m.end() - i
            i = m.end()
            continue
        m = _INT.match(text, i)
        if m:
            tokens.append(Token("INT", int(m.group(), 0), m.group(), line, col))
            col += m.end() - i
            i = m.end()
            continue
        m = _WORD.match(text, i)
        if m:
            tokens.append(Token("IDENT", m.group(), m.group(), line, col))
            col += m.end() - i
            i = m.end()
            continue
        for sym in _SYMBOL_KEYS:
            if text.startswith(sym, i):
                kind, value = _SYMBOLS[sym]
                tokens.append(Token(kind, value, sym, line, col))
                i += len(sym)
                col += len(sym)
                break
        else:
            raise PatternSyntaxError(line, col, {"token"}, ch, f"unexpected character {ch!r}")
    tokens.append(Token("EOF", None, "", line, col))
    return tokens


@dataclass
class _Segment:
    relations: list
    first: str
    last: str
    grouped: bool


class _Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.pos = 0

    @property
    def tok(self) -> Token:
        return self.toks[self.pos]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.pos + k, len(self.toks) - 1)]

    def advance(self) -> Token:
        t = self.toks[self.pos]
        if t.kind != "EOF":
            self.pos += 1
        return t

    def fail(self, expected, message: str = ""):
        t = self.tok
        raise PatternSyntaxError(t.line, t.column, expected, t.text or "end of input", message)

    def expect(self, kind: str, value=None, label: str | None = None) -> Token:
        t = self.tok
        if t.kind != kind or (value is not None and t.value != value):
            self.fail({label or repr(value if value is not None else kind)})
        return self.advance()

    def is_word(self, word: str, k: int = 0) -> bool:
        t = self.peek(k) if k else self.tok
        return t.kind == "IDENT" and t.value == word

    # -- pattern structure -------------------------------------------------

    def parse(self) -> PatternAst:
        if self.tok.kind == "EOF":
            self.fail({"'(opcode = ...)'"}, "empty pattern")
        seg = self.chain()
        if self.tok.kind != "EOF":
            self.fail({"relation", "'where'", "end of input"})
        if not seg.relations:
            t = self.tok
            raise PatternSyntaxError(t.line, t.column, {"relation"}, t.text or "end of input",
                                     "a pattern needs at least one relation")
        return PatternAst(tuple(seg.relations))

    def chain(self) -> _Segment:
        seg = self.element()
        if seg.grouped and self.is_word("where"):
            seg = self.group_where(seg)
        while self.tok.kind == "REL":
            kind = self.advance().value
            right = self.element()
            join = RelationNode(kind, seg.last, right.first)
            if right.grouped and right.relations:
                if self.is_word("where"):
                    right = self.group_where(right)
            elif self.is_word("where"):
                self.advance()
                join = RelationNode(kind, seg.last, right.first, self.where_expr())
            seg = _Segment(seg.relations + [join] + right.relations, seg.first, right.last, False)
        if self.is_word("where"):
            self.fail({"relation", "end of input"}, "'where' must follow a relation")
        return seg

    def group_where(self, seg: _Segment) -> _Segment:
        where_tok = self.advance()
        if len(seg.relations) != 1:
            raise PatternSyntaxError(
                where_tok.line, where_tok.column, {"relation"}, "where",
                "a where-clause on a bracketed group must bind a single relation",
            )
        clause = self.where_expr()
        rel = seg.relations[0]
        merged = RelationNode(rel.kind, rel.src_opcode, rel.dst_opcode, rel.where_clause + clause)
        return _Segment([merged], seg.first, seg.last, True)

    def element(self) -> _Segment:
        if self.tok.kind != "(":
            self.fail({"'('"})
        if self.is_word("opcode", 1):
            op = self.endpoint()
            return _Segment([], op, op, False)
        self.advance()
        inner = self.chain()
        self.expect(")", label="')'")
        return _Segment(inner.relations, inner.first, inner.last, True)

    def endpoint(self) -> str:
        self.expect("(")
        self.advance()  # 'opcode'
        t = self.tok
        if t.kind != "CMP" or t.value != "=":
            self.fail({"'='"})
        self.advance()
        t = self.tok
        if t.kind != "IDENT":
            self.fail({"opcode mnemonic"})
        self.advance()
        name = t.value.upper()
        if not opcodes.is_known(name):
            raise UnknownOpcodeError(t.value, t.line, t.column)
        self.expect(")", label="')'")
        return name

    # -- where expressions -------------------------------------------------

    def where_expr(self) -> tuple[Comparison, ...]:
        kind, node = self.conj()
        if kind == "cmp":
            return (node,)
        if kind == "conj":
            return node
        self.fail({"comparison operator"}, "a where-clause must be a comparison")

    def conj(self):
        start = self.tok
        kind, node = self.cmp()
        if self.tok.kind != "AND":
            return kind, node
        parts = []
        while True:
            if kind == "cmp":
                parts.append(node)
            elif kind == "conj":
                parts.extend(node)
            else:
                raise PatternSyntaxError(start.line, start.column, {"comparison"}, start.text,
                                         "conjunction operands must be comparisons")
            if self.tok.kind != "AND":
                return "conj", tuple(parts)
            self.advance()
            start = self.tok
            kind, node = self.cmp()

    def cmp(self):
        start = self.tok
        kind, node = self.arith()
        if self.tok.kind != "CMP":
            return kind, node
        if kind != "arith":
            raise PatternSyntaxError(start.line, start.column, {"operand"}, start.text,
                                     "comparisons cannot be nested")
        op = self.advance().value
        rstart = self.tok
        rkind, rhs = self.arith()
        if rkind != "arith":
            raise PatternSyntaxError(rstart.line, rstart.column, {"operand"}, rstart.text,
                                     "comparisons cannot be nested")
        if self.tok.kind == "CMP":
            self.fail({"'&&'", "')'"}, "comparisons cannot be chained")
        return "cmp", Comparison(node, op, rhs)

    def arith(self):
        return self._binary(self.term, ("+", "-"))

    def term(self):
        return self._binary(self.factor, ("*", "/"))

    def _binary(self, sub, ops):
        start = self.tok
        kind, node = sub()
        while self.tok.kind == "ARITH" and self.tok.value in ops:
            if kind != "arith":
                raise PatternSyntaxError(start.line, start.column, {"operand"}, start.text,
                                         "arithmetic needs numeric operands")
            op = self.advance().value
            rstart = self.tok
            rkind, rhs = sub()
            if rkind != "arith":
                raise PatternSyntaxError(rstart.line, rstart.column, {"operand"}, rstart.text,
                                         "arithmetic needs numeric operands")
            node = Arith(node, op, rhs)
        return kind, node

    def factor(self):
        t = self.tok
        if t.kind == "INT":
            self.advance()
            return "arith", t.value
        if t.kind == "IDENT" and t.value in ("src", "dst"):
            return "arith", self.accessor()
        if t.kind == "(":
            self.advance()
            result = self.conj()
            self.expect(")", label="')'")
            return result
        self.fail({"integer", "'src.'", "'dst.'", "'('"})

    def accessor(self) -> Accessor:
        side = self.advance().value
        self.expect(".", label="'.'")
        t = self.tok
        if t.kind != "IDENT":
            self.fail({"accessor"})
        name = self.advance().value
        if name in ("depth", "pc", "address"):
            return Accessor(side, name)
        if name == "stack":
            if self.tok.kind == ".":
                self.advance()
                if not self.is_word("result"):
                    self.fail({"'result'"})
                self.advance()
                return Accessor(side, "result")
            self.expect("(", label="'('")
            idx = self.expect("INT", label="integer").value
            self.expect(")", label="')'")
            return Accessor(side, "stack", index=idx)
        if name == "memory":
            self.expect("(", label="'('")
            off = self.memory_arg(side)
            self.expect(",", label="','")
            size = self.memory_arg(side)
            self.expect(")", label="')'")
            return Accessor(side, "memory", mem_offset=off, mem_size=size)
        if name in ("transaction", "block"):
            self.expect(".", label="'.'")
            fields = TRANSACTION_FIELDS if name == "transaction" else BLOCK_FIELDS
            f = self.tok
            if f.kind != "IDENT" or f.value not in fields:
                self.fail({repr(x) for x in fields})
            self.advance()
            return Accessor(side, name, field=f.value)
        raise PatternSyntaxError(
            t.line, t.column,
            {"depth", "pc", "address", "stack", "memory", "transaction", "block"}, t.text,
        )

    def memory_arg(self, side: str):
        t = self.tok
        if t.kind == "INT":
            return self.advance().value
        if t.kind == "IDENT" and t.value in ("src", "dst"):
            if t.value != side:
                self.fail({f"'{side}.stack(...)'", "integer"},
                          "memory arguments must come from the same side")
            acc = self.accessor()
            if acc.kind != "stack":
                raise PatternSyntaxError(t.line, t.column, {"integer", f"{side}.stack(n)"}, t.text,
                                         "memory arguments must be integers or stack words")
            return acc
        self.fail({"integer", f"'{side}.stack(n)'"})


def parse_pattern(text: str) -> PatternAst:
    """Parse one attack pattern. Raises PatternSyntaxError or UnknownOpcodeError."""
    if not isinstance(text, str):
        raise TypeError("pattern text must be str")
    return _Parser(text).parse()
