from dataclasses import dataclass, field

from .. import opcodes
from .ast import (
    ARITH_OPS,
    BLOCK_FIELDS,
    CMP_OPS,
    ORDERED_OPS,
    TRANSACTION_FIELDS,
    Accessor,
    Arith,
    PatternAst,
    RelationKind,
)


@dataclass(frozen=True)
class Finding:
    relation: int
    message: str

    def __str__(self):
        return self.message


@dataclass
class ValidationReport:
    findings: list[Finding] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.findings

    def messages(self) -> list[str]:
        return [f.message for f in self.findings]


class PatternValidationError(ValueError):
    def __init__(self, report: ValidationReport):
        self.report = report
        super().__init__("; ".join(report.messages()))


def _is_memory(x) -> bool:
    return isinstance(x, Accessor) and x.kind == "memory"


def validate_pattern(ast: PatternAst) -> ValidationReport:
    report = ValidationReport()
    for i, rel in enumerate(ast.relations):
        def add(msg, i=i):
            report.findings.append(Finding(i, msg))

        if not isinstance(rel.kind, RelationKind):
            add(f"unknown relation kind {rel.kind!r}")
        ops = {"src": rel.src_opcode, "dst": rel.dst_opcode}
        for op in ops.values():
            if not opcodes.is_known(op):
                add(f"unknown opcode {op}")
        if any(not opcodes.is_known(op) for op in ops.values()):
            continue
        for cmp in rel.where_clause:
            if cmp.op not in CMP_OPS:
                add(f"unknown comparison {cmp.op!r}")
            if cmp.op in ORDERED_OPS and (_is_memory(cmp.lhs) or _is_memory(cmp.rhs)):
                add("ordered comparison on memory value")
            for side in (cmp.lhs, cmp.rhs):
                _check_operand(side, ops, add, top=True)
    return report


def _check_operand(x, ops, add, top=False):
    if isinstance(x, bool):
        add("boolean literal is not an operand")
    elif isinstance(x, int):
        if x < 0:
            add("negative literal")
    elif isinstance(x, Arith):
        if x.op not in ARITH_OPS:
            add(f"unknown arithmetic operator {x.op!r}")
        for sub in (x.lhs, x.rhs):
            if _is_memory(sub):
                add("arithmetic on memory value")
            _check_operand(sub, ops, add)
    elif isinstance(x, Accessor):
        _check_accessor(x, ops, add)
    else:
        add(f"not an operand: {x!r}")


def _check_accessor(a: Accessor, ops, add):
    if a.side not in ops:
        add(f"accessor side must be src or dst, not {a.side!r}")
        return
    op = ops[a.side]
    meta = opcodes.info(op)
    if a.kind == "stack":
        if not isinstance(a.index, int) or a.index < 0:
            add(f"stack index {a.index!r} is not a nonnegative integer")
        elif a.index >= meta.operands:
            add(f"stack index {a.index} exceeds {op} operand arity {meta.operands}")
    elif a.kind == "result":
        if opcodes.result_arity(op) != 1:
            add(f"stack.result on {op}, which pushes no result")
    elif a.kind == "memory":
        if not meta.memory:
            add(f"memory accessor on {op}, which has no memory semantics")
        for arg in (a.mem_offset, a.mem_size):
            if isinstance(arg, Accessor):
                if arg.side != a.side or arg.kind != "stack":
                    add("memory arguments must be integers or same-side stack words")
                else:
                    _check_accessor(arg, ops, add)
            elif not isinstance(arg, int) or isinstance(arg, bool) or arg < 0:
                add(f"memory argument {arg!r} is not a nonnegative integer")
    elif a.kind == "transaction":
        if a.field not in TRANSACTION_FIELDS:
            add(f"unknown transaction field {a.field!r}")
    elif a.kind == "block":
        if a.field not in BLOCK_FIELDS:
            add(f"unknown block field {a.field!r}")
    elif a.kind not in ("depth", "pc", "address"):
        add(f"unknown accessor {a.kind!r}")
