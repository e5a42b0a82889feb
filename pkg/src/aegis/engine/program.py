"""Compiling a pattern AST into a match program."""

from __future__ import annotations

import operator
from dataclasses import dataclass
from typing import Callable, NamedTuple

from ..dsl.ast import Accessor, Arith, Comparison, PatternAst, RelationKind
from ..dsl.render import pattern_id, render_pattern
from ..dsl.validate import PatternValidationError, validate_pattern
from ..trace import AccessorError, BlockContext, TraceRecord, TransactionContext, read_accessor


class Endpoint(NamedTuple):
    """A record bound to a pattern endpoint, with its transaction context."""

    record: TraceRecord
    tx: TransactionContext
    block: BlockContext

    @property
    def seq(self) -> int:
        return self.record.seq


Predicate = Callable[[Endpoint, Endpoint], bool]


@dataclass(frozen=True)
class RelationStep:
    index: int
    kind: RelationKind
    src_opcode: str
    dst_opcode: str
    where: tuple[Comparison, ...]
    predicate: Predicate


@dataclass(frozen=True)
class MatchProgram:
    pattern_id: bytes
    steps: tuple[RelationStep, ...]
    ast: PatternAst
    name: str = ""

    @property
    def endpoints(self) -> tuple[str, ...]:
        return self.ast.endpoints

    @property
    def chain(self) -> tuple[tuple[int, int], ...]:
        """Endpoint slots joined by each step; step i's dst is step i+1's src."""
        return tuple((i, i + 1) for i in range(len(self.steps)))

    def canonical(self) -> str:
        return render_pattern(self.ast)


# -- where-clause semantics shared by the compiler below -------------------------


def int_div(a: int, b: int) -> int:
    """Division truncating toward zero; the divisor must be nonzero."""
    if b == 0:
        raise ZeroDivisionError("division by zero in where-clause")
    q = abs(a) // abs(b)
    return q if (a >= 0) == (b >= 0) else -q


ARITH = {"+": operator.add, "-": operator.sub, "*": operator.mul, "/": int_div}
COMPARE = {
    "=": operator.eq,
    "!=": operator.ne,
    "<": operator.lt,
    ">": operator.gt,
    "<=": operator.le,
    ">=": operator.ge,
}


def compare(op: str, a, b) -> bool:
    a_mem = isinstance(a, bytes)
    b_mem = isinstance(b, bytes)
    if a_mem or b_mem:
        if op not in ("=", "!="):
            raise TypeError(f"ordered comparison {op} on a memory value")
        if a_mem != b_mem:
            # A memory blob against a number compares as a big-endian integer.
            a = int.from_bytes(a, "big") if a_mem else a
            b = int.from_bytes(b, "big") if b_mem else b
    return COMPARE[op](a, b)


def arith(op: str, a, b) -> int:
    if isinstance(a, bytes) or isinstance(b, bytes):
        raise TypeError("arithmetic on a memory value")
    return ARITH[op](a, b)


def _compile_operand(x) -> Callable[[Endpoint, Endpoint], object]:
    if isinstance(x, int):
        return lambda s, d: x
    if isinstance(x, Arith):
        lhs, rhs, op = _compile_operand(x.lhs), _compile_operand(x.rhs), x.op
        return lambda s, d: arith(op, lhs(s, d), rhs(s, d))
    if isinstance(x, Accessor):
        src = x.side == "src"
        if x.kind == "stack":
            i = x.index

            def stack(s, d):
                st = (s if src else d).record.stack
                if i >= len(st):
                    raise AccessorError(f"stack({i}) underflow")
                return st[i]

            return stack
        if x.kind in ("pc", "depth", "address"):
            attr = operator.attrgetter(x.kind)
            return lambda s, d: attr((s if src else d).record)

        def generic(s, d):
            e = s if src else d
            return read_accessor(e.record, e.tx, e.block, x)

        return generic
    raise TypeError(f"not an operand: {x!r}")


def compile_where(where: tuple[Comparison, ...]) -> Predicate:
    if not where:
        return lambda s, d: True
    parts = [(c.op, _compile_operand(c.lhs), _compile_operand(c.rhs)) for c in where]

    def predicate(s: Endpoint, d: Endpoint) -> bool:
        try:
            for op, lhs, rhs in parts:
                if not compare(op, lhs(s, d), rhs(s, d)):
                    return False
        except (AccessorError, ZeroDivisionError):
            return False
        return True

    return predicate


def compile_pattern(ast: PatternAst, name: str = "") -> MatchProgram:
    report = validate_pattern(ast)
    if not report.ok:
        raise PatternValidationError(report)
    steps = tuple(
        RelationStep(i, rel.kind, rel.src_opcode, rel.dst_opcode, rel.where_clause, compile_where(rel.where_clause))
        for i, rel in enumerate(ast.relations)
    )
    return MatchProgram(pattern_id(ast), steps, ast, name)
