"""Execution-trace data model, accessor evaluation and the line-delimited wire format.

Stack and memory snapshots are taken *before* an instruction executes;
``result`` is the one post-state view (the word the instruction pushed).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import IO, Iterable, Iterator

from . import opcodes
from .dsl.ast import Accessor
from .hashing import parse_hex_bytes, parse_hex_int

MAX_MEMORY_READ = 1 << 20
ADDRESS_LIMIT = 1 << 160
HASH_LIMIT = 1 << 256


@dataclass(frozen=True, slots=True)
class TraceRecord:
    opcode: str
    pc: int
    depth: int
    address: int
    stack: tuple[int, ...]
    result: int | None = None
    memory: bytes = b""
    seq: int = 0
    # Full memory length when ``memory`` holds only a prefix of it.
    memory_size: int | None = None


@dataclass(frozen=True)
class TransactionContext:
    hash: int
    sender: int
    to: int | None
    value: int = 0
    gas_limit: int = 0
    input: bytes = b""


@dataclass(frozen=True)
class BlockContext:
    number: int = 0
    timestamp: int = 0
    gas_used: int = 0
    gas_limit: int = 0


@dataclass(frozen=True)
class TransactionTrace:
    tx: TransactionContext
    block: BlockContext
    records: tuple[TraceRecord, ...] = field(default_factory=tuple)
    status: str = "SUCCESS"

    def __len__(self):
        return len(self.records)


class TraceError(ValueError):
    pass


class FormatError(TraceError):
    def __init__(self, line_no: int, reason: str):
        self.line_no = line_no
        self.reason = reason
        super().__init__(f"line {line_no}: {reason}")


class OrderError(FormatError):
    pass


class AccessorError(LookupError):
    pass


class StackUnderflow(AccessorError):
    pass


class MissingResult(AccessorError):
    pass


class TruncatedMemory(AccessorError):
    pass


def read_memory(record: TraceRecord, offset: int, size: int) -> bytes:
    """``size`` bytes at ``offset`` of the pre-state memory, zero-extended."""
    if size == 0:
        return b""
    if size > MAX_MEMORY_READ or offset > MAX_MEMORY_READ:
        raise AccessorError(f"memory read of {size} bytes at {offset} is out of range")
    mem = record.memory
    end = offset + size
    if record.memory_size is not None and end > len(mem) and offset < record.memory_size:
        raise TruncatedMemory(f"record {record.seq} keeps only {len(mem)} memory bytes")
    chunk = mem[offset:end]
    return chunk + bytes(size - len(chunk))


def _stack_word(record: TraceRecord, index: int) -> int:
    if index >= len(record.stack):
        raise StackUnderflow(f"stack({index}) on a {len(record.stack)}-word stack at seq {record.seq}")
    return record.stack[index]


def _memory_arg(record, tx, blk, arg) -> int:
    if isinstance(arg, Accessor):
        return read_accessor(record, tx, blk, arg)
    return arg


def read_accessor(record: TraceRecord, tx: TransactionContext, blk: BlockContext, a: Accessor):
    kind = a.kind
    if kind == "stack":
        return _stack_word(record, a.index)
    if kind == "pc":
        return record.pc
    if kind == "address":
        return record.address
    if kind == "depth":
        return record.depth
    if kind == "result":
        if record.result is None:
            raise MissingResult(f"{record.opcode} at seq {record.seq} has no result")
        return record.result
    if kind == "memory":
        off = _memory_arg(record, tx, blk, a.mem_offset)
        size = _memory_arg(record, tx, blk, a.mem_size)
        return read_memory(record, off, size)
    if kind == "transaction":
        f = a.field
        if f == "hash":
            return tx.hash
        if f == "value":
            return tx.value
        if f == "from":
            return tx.sender
        if f == "to":
            return tx.to if tx.to is not None else 0
    if kind == "block":
        f = a.field
        if f == "number":
            return blk.number
        if f == "gasUsed":
            return blk.gas_used
        if f == "gasLimit":
            return blk.gas_limit
        if f == "timestamp":
            return blk.timestamp
    raise AccessorError(f"unsupported accessor {a!r}")


# -- wire format ------------------------------------------------------------


def _addr(v: int | None):
    return None if v is None else "0x%040x" % v


def tx_header(trace: TransactionTrace) -> dict:
    tx, blk = trace.tx, trace.block
    return {
        "type": "tx",
        "hash": "0x%064x" % tx.hash,
        "from": _addr(tx.sender),
        "to": _addr(tx.to),
        "value": hex(tx.value),
        "gas": tx.gas_limit,
        "input": "0x" + tx.input.hex(),
        "block": {
            "number": blk.number,
            "timestamp": blk.timestamp,
            "gasUsed": blk.gas_used,
            "gasLimit": blk.gas_limit,
        },
        "stack_order": "top_first",
        "status": trace.status,
    }


def step_line(r: TraceRecord) -> dict:
    d = {
        "type": "step",
        "op": r.opcode,
        "pc": r.pc,
        "depth": r.depth,
        "address": _addr(r.address),
        "stack": [hex(w) for w in r.stack],
        "result": None if r.result is None else hex(r.result),
        "memory": "0x" + r.memory.hex(),
    }
    if r.memory_size is not None:
        d["memory_size"] = r.memory_size
    return d


def export_lines(traces: Iterable[TransactionTrace]) -> Iterator[str]:
    for t in traces:
        yield json.dumps(tx_header(t), separators=(",", ":"))
        for r in t.records:
            yield json.dumps(step_line(r), separators=(",", ":"))


def export_traces(traces: Iterable[TransactionTrace], fp: IO[str]) -> None:
    for line in export_lines(traces):
        fp.write(line + "\n")


def _want(d: dict, key: str, line_no: int):
    if key not in d:
        raise FormatError(line_no, f"missing field {key!r}")
    return d[key]


def _int(v, line_no, what, limit=None):
    try:
        x = parse_hex_int(v) if isinstance(v, str) else v
    except ValueError as e:
        raise FormatError(line_no, f"{what}: {e}") from None
    if not isinstance(x, int) or isinstance(x, bool) or x < 0:
        raise FormatError(line_no, f"{what} must be a nonnegative integer")
    if limit is not None and x >= limit:
        raise FormatError(line_no, f"{what} out of range")
    return x


def _bytes(v, line_no, what):
    try:
        return parse_hex_bytes(v)
    except ValueError as e:
        raise FormatError(line_no, f"{what}: {e}") from None


def ingest_stream(lines: Iterable[str], seq_start: int = 0) -> Iterator[TransactionTrace]:
    """Parse the line-delimited trace format, yielding one trace per transaction."""
    seq = seq_start
    current = None
    records: list[TraceRecord] = []
    bottom_first = False
    seen_hashes: set[int] = set()
    last_block = -1

    def flush():
        return TransactionTrace(current[0], current[1], tuple(records), current[2])

    for line_no, raw in enumerate(lines, 1):
        if not raw.strip():
            continue
        try:
            d = json.loads(raw)
        except json.JSONDecodeError as e:
            raise FormatError(line_no, f"invalid JSON: {e.msg}") from None
        if not isinstance(d, dict):
            raise FormatError(line_no, "expected a JSON object")
        kind = d.get("type")
        if kind == "tx":
            if current is not None:
                yield flush()
            records = []
            blk = _want(d, "block", line_no)
            if not isinstance(blk, dict):
                raise FormatError(line_no, "block must be an object")
            h = _int(_want(d, "hash", line_no), line_no, "hash", HASH_LIMIT)
            if h in seen_hashes:
                raise FormatError(line_no, f"duplicate transaction hash {hex(h)}")
            seen_hashes.add(h)
            to = d.get("to")
            tx = TransactionContext(
                hash=h,
                sender=_int(_want(d, "from", line_no), line_no, "from", ADDRESS_LIMIT),
                to=None if to is None else _int(to, line_no, "to", ADDRESS_LIMIT),
                value=_int(d.get("value", "0x0"), line_no, "value"),
                gas_limit=_int(d.get("gas", 0), line_no, "gas"),
                input=_bytes(d.get("input", "0x"), line_no, "input"),
            )
            block = BlockContext(
                number=_int(_want(blk, "number", line_no), line_no, "block.number"),
                timestamp=_int(blk.get("timestamp", 0), line_no, "block.timestamp"),
                gas_used=_int(blk.get("gasUsed", 0), line_no, "block.gasUsed"),
                gas_limit=_int(blk.get("gasLimit", 0), line_no, "block.gasLimit"),
            )
            if block.number < last_block:
                raise FormatError(line_no, "block numbers must not decrease")
            last_block = block.number
            order = d.get("stack_order", "top_first")
            if order not in ("top_first", "bottom_first"):
                raise FormatError(line_no, f"unknown stack_order {order!r}")
            bottom_first = order == "bottom_first"
            status = d.get("status", "SUCCESS")
            if status not in ("SUCCESS", "REVERTED", "OUT_OF_GAS"):
                raise FormatError(line_no, f"unknown status {status!r}")
            current = (tx, block, status)
        elif kind == "step":
            if current is None:
                raise OrderError(line_no, "step record before any transaction header")
            op = _want(d, "op", line_no)
            if not isinstance(op, str) or not opcodes.is_known(op):
                raise FormatError(line_no, f"unknown opcode {op!r}")
            stack_raw = _want(d, "stack", line_no)
            if not isinstance(stack_raw, list):
                raise FormatError(line_no, "stack must be a list")
            stack = tuple(_int(w, line_no, "stack word", HASH_LIMIT) for w in stack_raw)
            if bottom_first:
                stack = stack[::-1]
            meta = opcodes.info(op)
            if len(stack) < meta.operands:
                raise FormatError(
                    line_no, f"{op} needs {meta.operands} stack operands, record has {len(stack)}"
                )
            res = d.get("result")
            result = None if res is None else _int(res, line_no, "result", HASH_LIMIT)
            if result is not None and opcodes.result_arity(op) != 1:
                raise FormatError(line_no, f"{op} pushes no result")
            depth = _int(_want(d, "depth", line_no), line_no, "depth")
            if depth < 1:
                raise FormatError(line_no, "depth must be at least 1")
            if not records and depth != 1:
                raise FormatError(line_no, "first record of a transaction must have depth 1")
            mem_size = d.get("memory_size")
            if mem_size is not None:
                mem_size = _int(mem_size, line_no, "memory_size")
            records.append(
                TraceRecord(
                    opcode=op,
                    pc=_int(_want(d, "pc", line_no), line_no, "pc"),
                    depth=depth,
                    address=_int(_want(d, "address", line_no), line_no, "address", ADDRESS_LIMIT),
                    stack=stack,
                    result=result,
                    memory=_bytes(d.get("memory", "0x"), line_no, "memory"),
                    seq=seq,
                    memory_size=mem_size,
                )
            )
            seq += 1
        else:
            raise FormatError(line_no, f"unknown record type {kind!r}")
    if current is not None:
        yield flush()


def read_trace_file(path, seq_start: int = 0) -> list[TransactionTrace]:
    with open(path, encoding="utf-8") as fp:
        return list(ingest_stream(fp, seq_start))
