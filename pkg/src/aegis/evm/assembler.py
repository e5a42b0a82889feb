"""Assembler for the mnemonic-per-line fixture format.

    ; comment                 everything after ';' is ignored
    loop:                     a label; emits JUMPDEST at this position
    PUSH @loop                PUSH2 of the label's offset
    PUSH 0x1f                 PUSH with the smallest width that fits
    PUSH4 $selector           explicit width; ``$name`` is a caller parameter
    ADD                       any other mnemonic from the opcode table

Labels may share a line with an instruction (``done: STOP``).
"""

from __future__ import annotations

from importlib import resources

from .. import opcodes


class AssemblyError(ValueError):
    def __init__(self, line_no: int, message: str):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {message}")


def _width(value: int) -> int:
    return max(1, (value.bit_length() + 7) // 8)


def _parse_value(tok: str, params: dict, line_no: int):
    if tok.startswith("@"):
        return ("label", tok[1:])
    if tok.startswith("$"):
        name = tok[1:]
        if name not in params:
            raise AssemblyError(line_no, f"missing parameter ${name}")
        v = params[name]
        if isinstance(v, (bytes, bytearray)):
            v = int.from_bytes(v, "big")
        return ("int", int(v))
    try:
        return ("int", int(tok, 0))
    except ValueError:
        raise AssemblyError(line_no, f"bad immediate {tok!r}") from None


def assemble(source: str, params: dict | None = None) -> bytes:
    params = params or {}
    items = []  # (line_no, kind, payload)
    for line_no, raw in enumerate(source.splitlines(), 1):
        line = raw.split(";", 1)[0].strip()
        while line:
            head, sep, rest = line.partition(":")
            if sep and head.strip() and " " not in head.strip():
                items.append((line_no, "label", head.strip()))
                line = rest.strip()
                continue
            break
        if not line:
            continue
        parts = line.split()
        op = parts[0].upper()
        if op == "PUSH" or (op.startswith("PUSH") and op[4:].isdigit()):
            if len(parts) != 2:
                raise AssemblyError(line_no, f"{op} takes exactly one immediate")
            kind, v = _parse_value(parts[1], params, line_no)
            width = int(op[4:]) if op != "PUSH" else None
            if width is not None and not 1 <= width <= 32:
                raise AssemblyError(line_no, f"unknown opcode {op}")
            if kind == "label":
                items.append((line_no, "push", (width or 2, kind, v)))
            else:
                if v < 0 or v >= 1 << 256:
                    raise AssemblyError(line_no, "immediate out of 256-bit range")
                w = width or _width(v)
                if _width(v) > w:
                    raise AssemblyError(line_no, f"immediate does not fit in {op}")
                items.append((line_no, "push", (w, kind, v)))
        else:
            if len(parts) != 1:
                raise AssemblyError(line_no, f"{op} takes no immediate")
            meta = opcodes.info(op) if opcodes.is_known(op) else None
            if meta is None or meta.code is None:
                raise AssemblyError(line_no, f"unknown opcode {op}")
            items.append((line_no, "op", meta.code))

    labels: dict[str, int] = {}
    pos = 0
    for line_no, kind, payload in items:
        if kind == "label":
            if payload in labels:
                raise AssemblyError(line_no, f"duplicate label {payload}")
            labels[payload] = pos
            pos += 1
        elif kind == "push":
            pos += 1 + payload[0]
        else:
            pos += 1

    out = bytearray()
    jumpdest = opcodes.info("JUMPDEST").code
    for line_no, kind, payload in items:
        if kind == "label":
            out.append(jumpdest)
        elif kind == "push":
            width, vkind, v = payload
            if vkind == "label":
                if v not in labels:
                    raise AssemblyError(line_no, f"undefined label {v}")
                v = labels[v]
                if _width(v) > width:
                    raise AssemblyError(line_no, "label offset does not fit")
            out.append(0x5F + width)
            out += v.to_bytes(width, "big")
        else:
            out.append(payload)
    return bytes(out)


def disassemble(code: bytes) -> list[tuple[int, str, int | None]]:
    out = []
    i = 0
    while i < len(code):
        meta = opcodes.by_code(code[i])
        if meta is None:
            out.append((i, f"INVALID_{code[i]:02x}", None))
            i += 1
            continue
        if meta.name.startswith("PUSH"):
            n = int(meta.name[4:])
            out.append((i, meta.name, int.from_bytes(code[i + 1 : i + 1 + n].ljust(n, b"\0"), "big")))
            i += 1 + n
        else:
            out.append((i, meta.name, None))
            i += 1
    return out


def init_code(runtime: bytes, prelude: str = "", params: dict | None = None) -> bytes:
    """Creation code that runs ``prelude`` then returns ``runtime`` as the account code.

    There is no CODECOPY in the subset, so the runtime bytes are written to
    memory one 32-byte PUSH32 at a time.
    """
    lines = [prelude]
    for off in range(0, len(runtime), 32):
        chunk = runtime[off : off + 32].ljust(32, b"\0")
        lines.append(f"PUSH32 0x{chunk.hex()}")
        lines.append(f"PUSH {off}")
        lines.append("MSTORE")
    lines += [f"PUSH {len(runtime)}", "PUSH 0", "RETURN"]
    return assemble("\n".join(lines), params)


def fixture_source(name: str) -> str:
    return (resources.files("aegis.evm") / "fixtures" / f"{name}.asm").read_text(encoding="utf-8")


def assemble_fixture(name: str, params: dict | None = None) -> bytes:
    return assemble(fixture_source(name), params)
