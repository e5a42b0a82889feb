"""Attack-pattern syntax tree.

A pattern is a chain of endpoints ``E0 rel0 E1 rel1 E2 ...``; relation ``i``
joins endpoint ``i`` (``src``) to endpoint ``i + 1`` (``dst``). Relations are
stored flat, so adjacent relations share an endpoint.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Union


class RelationKind(Enum):
    CONTROL_FLOW = "=>"
    DATA_FLOW = "~>"
    FOLLOWS = "->"


CMP_OPS = ("<", ">", "<=", ">=", "=", "!=")
ORDERED_OPS = ("<", ">", "<=", ">=")
ARITH_OPS = ("+", "-", "*", "/")

TRANSACTION_FIELDS = ("hash", "value", "from", "to")
BLOCK_FIELDS = ("number", "gasUsed", "gasLimit", "timestamp")


@dataclass(frozen=True)
class Accessor:
    """``src.<kind>`` or ``dst.<kind>``.

    ``kind`` is one of depth, pc, address, stack, result, memory, transaction,
    block. ``index`` is set for stack; ``field`` for transaction/block;
    ``mem_offset``/``mem_size`` (int literal or a same-side stack accessor) for
    memory.
    """

    side: str
    kind: str
    index: int | None = None
    field: str | None = None
    mem_offset: Union[int, "Accessor", None] = None
    mem_size: Union[int, "Accessor", None] = None


@dataclass(frozen=True)
class Arith:
    lhs: "Operand"
    op: str
    rhs: "Operand"


Operand = Union[Accessor, Arith, int]


@dataclass(frozen=True)
class Comparison:
    lhs: Operand
    op: str
    rhs: Operand


@dataclass(frozen=True)
class RelationNode:
    """One relation; ``where_clause`` is a conjunction of comparisons."""

    kind: RelationKind
    src_opcode: str
    dst_opcode: str
    where_clause: tuple[Comparison, ...] = ()


@dataclass(frozen=True)
class PatternAst:
    relations: tuple[RelationNode, ...]

    def __post_init__(self):
        if not self.relations:
            raise ValueError("a pattern needs at least one relation")
        for a, b in zip(self.relations, self.relations[1:]):
            if a.dst_opcode != b.src_opcode:
                raise ValueError(
                    f"relation chain broken: {a.dst_opcode} does not feed {b.src_opcode}"
                )

    @property
    def endpoints(self) -> tuple[str, ...]:
        return (self.relations[0].src_opcode,) + tuple(r.dst_opcode for r in self.relations)


def iter_accessors(operand):
    """Yield every accessor inside an operand, including memory arguments."""
    if isinstance(operand, Accessor):
        yield operand
        for arg in (operand.mem_offset, operand.mem_size):
            if isinstance(arg, Accessor):
                yield from iter_accessors(arg)
    elif isinstance(operand, Arith):
        yield from iter_accessors(operand.lhs)
        yield from iter_accessors(operand.rhs)
