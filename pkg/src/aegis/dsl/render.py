from ..hashing import keccak256
from .ast import Accessor, Arith, PatternAst


def render_operand(x) -> str:
    if isinstance(x, bool):
        raise TypeError("boolean is not a pattern operand")
    if isinstance(x, int):
        return str(x)
    if isinstance(x, Arith):
        return f"({render_operand(x.lhs)} {x.op} {render_operand(x.rhs)})"
    if isinstance(x, Accessor):
        return render_accessor(x)
    raise TypeError(f"not a pattern operand: {x!r}")


def render_accessor(a: Accessor) -> str:
    if a.kind == "stack":
        body = f"stack({a.index})"
    elif a.kind == "result":
        body = "stack.result"
    elif a.kind == "memory":
        body = f"memory({render_operand(a.mem_offset)}, {render_operand(a.mem_size)})"
    elif a.kind in ("transaction", "block"):
        body = f"{a.kind}.{a.field}"
    else:
        body = a.kind
    return f"{a.side}.{body}"


def render_where(clause) -> str:
    return " && ".join(
        f"({render_operand(c.lhs)} {c.op} {render_operand(c.rhs)})" for c in clause
    )


def render_pattern(ast: PatternAst) -> str:
    """Canonical single-line ASCII form; parse_pattern() of it returns ``ast``."""
    parts = [f"(opcode = {ast.relations[0].src_opcode})"]
    for rel in ast.relations:
        parts.append(rel.kind.value)
        parts.append(f"(opcode = {rel.dst_opcode})")
        if rel.where_clause:
            parts.append("where " + render_where(rel.where_clause))
    return " ".join(parts)


def pattern_id(ast: PatternAst) -> bytes:
    return keccak256(render_pattern(ast).encode("utf-8"))
