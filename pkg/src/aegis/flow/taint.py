"""Byte-granular taint tracking over a record stream.

Every source instruction instance gets one bit, keyed by its seq. A byte's
taint is an int bitset over those bits; a word's taint is ``None`` (clean) or
a tuple of 32 bitsets, most significant byte first. A ``TaintTag`` names the
bit of its origin record, so tags of different patterns that share an origin
record share that bit. Propagation never depends on which bits are set, so
each tag's taint is exactly what a replay with only that tag would give.

Call-type instructions are resolved one record late: only the next record's
depth tells whether the call opened a frame.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce
from operator import or_
from typing import NamedTuple

from .. import opcodes
from ..trace import TraceRecord, TransactionTrace
from .calltree import MalformedDepth

Word = tuple  # 32 ints, or None for a clean word
MAX_REGION = 1 << 20

_ARITH = frozenset({"ADD", "MUL", "SUB", "DIV", "LT", "GT", "EQ", "ISZERO", "AND", "OR", "NOT"})
_CLEAN = frozenset(
    {"PC", "GAS", "CALLER", "ADDRESS", "CALLDATASIZE", "NUMBER", "TIMESTAMP"}
)
_CLEAN_HALTS = frozenset({"RETURN", "STOP", "SELFDESTRUCT"})


class TaintTag(NamedTuple):
    pattern_id: bytes
    relation_index: int
    origin_seq: int


def iter_bits(x: int):
    while x:
        low = x & -x
        yield low.bit_length() - 1
        x ^= low


def word_bits(w) -> int:
    return reduce(or_, w) if w else 0


def uniform(bits: int):
    return (bits,) * 32 if bits else None


def union(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return tuple(map(or_, a, b))


def _read_word(mem: dict, off: int):
    if not mem:
        return None
    w = tuple(mem.get(off + i, 0) for i in range(32))
    return w if any(w) else None


def _write_word(mem: dict, off: int, w) -> None:
    if w is None:
        if mem:
            for i in range(32):
                mem.pop(off + i, None)
        return
    for i, b in enumerate(w):
        if b:
            mem[off + i] = b
        else:
            mem.pop(off + i, None)


def _clear(mem: dict, off: int, size: int) -> None:
    if not mem or size <= 0:
        return
    if size <= 64:
        for i in range(off, off + size):
            mem.pop(i, None)
    else:
        for k in [k for k in mem if off <= k < off + size]:
            del mem[k]


def _region(mem: dict, off: int, size: int) -> dict:
    """Tainted bytes of ``[off, off + size)``, rebased to 0."""
    if not mem or size <= 0:
        return {}
    if size <= 64:
        return {i: mem[off + i] for i in range(size) if off + i in mem}
    return {k - off: v for k, v in mem.items() if off <= k < off + size}


def _region_bits(mem: dict, off: int, size: int) -> int:
    return reduce(or_, _region(mem, off, size).values(), 0)


def _paste(mem: dict, off: int, size: int, src: dict) -> None:
    _clear(mem, off, size)
    for k, v in src.items():
        if k < size:
            mem[off + k] = v


@dataclass
class _Pending:
    record: TraceRecord
    operands: list
    bits: int = 0


@dataclass
class FrameTaint:
    depth: int
    address: int
    stack: list = field(default_factory=list)  # bottom -> top
    memory: dict = field(default_factory=dict)
    calldata: dict = field(default_factory=dict)
    callvalue: tuple | None = None
    journal_mark: int = 0
    last: TraceRecord | None = None
    pending: _Pending | None = None


class TaintState:
    def __init__(self):
        self.frames: list[FrameTaint] = []
        self.storage: dict[tuple[int, int], tuple] = {}
        self.journal: list = []
        self.tags: dict[int, set[TaintTag]] = {}
        self.prev: TraceRecord | None = None
        self.status = "SUCCESS"
        self._synced = None

    # -- transaction boundaries -------------------------------------------

    def begin_transaction(self, trace: TransactionTrace | None = None) -> None:
        self.reset_volatile()
        self.status = trace.status if trace is not None else "SUCCESS"

    def end_transaction(self) -> None:
        while len(self.frames) > 1:
            self._return_frame()
        if self.status != "SUCCESS":
            self._rollback(0)
        self.reset_volatile()

    def reset_volatile(self) -> None:
        self.frames = []
        self.journal = []
        self.prev = None
        self._synced = None

    # -- queries ------------------------------------------------------------

    def storage_bits(self) -> int:
        return reduce(or_, (word_bits(w) for w in self.storage.values()), 0)

    def slot_taint(self, address: int, slot: int):
        return self.storage.get((address, slot))

    def consumed(self, r: TraceRecord) -> int:
        """Union of the bits on every operand ``r`` consumes."""
        self.sync(r)
        f = self.frames[-1]
        self._align(f, len(r.stack))
        n = opcodes.info(r.opcode).operands
        bits = 0
        st = f.stack
        for i in range(1, n + 1):
            w = st[-i]
            if w is not None:
                bits |= reduce(or_, w)
        if r.opcode == "SLOAD":
            bits |= word_bits(self.storage.get((r.address, r.stack[0])))
        return bits

    def check(self, r: TraceRecord, tag: TaintTag) -> bool:
        return bool(self.consumed(r) >> tag.origin_seq & 1)

    # -- stream processing --------------------------------------------------

    def sync(self, r: TraceRecord) -> None:
        """Settle frame changes between the previous record and ``r``."""
        if self._synced is r:
            return
        if not self.frames:
            self.frames.append(FrameTaint(r.depth, r.address))
        prev = self.prev
        if prev is not None:
            pf = self.frames[-1]
            pend = pf.pending
            if r.depth == prev.depth + 1:
                if pend is None or pend.record is not prev:
                    raise MalformedDepth(r.seq, f"depth increased after {prev.opcode}")
                self._open_frame(pf, pend, r)
            elif r.depth > prev.depth:
                raise MalformedDepth(r.seq, f"depth jumped from {prev.depth} to {r.depth}")
            else:
                if pend is not None and pend.record is prev:
                    pf.pending = None
                    if r.depth == prev.depth:
                        pf.stack.append(uniform(pend.bits))
                for _ in range(prev.depth - r.depth):
                    if len(self.frames) == 1:
                        break
                    self._return_frame()
        self._synced = r

    def propagate(self, r: TraceRecord) -> None:
        self.sync(r)
        f = self.frames[-1]
        st = f.stack
        self._align(f, len(r.stack))
        op = r.opcode
        f.last = r
        self.prev = r
        if op.startswith("DUP"):
            st.append(st[-int(op[3:])])
            return
        if op.startswith("SWAP"):
            n = int(op[4:])
            st[-1], st[-1 - n] = st[-1 - n], st[-1]
            return
        meta = opcodes.info(op)
        ins = [st.pop() for _ in range(meta.operands)]
        s = r.stack
        out = None
        if op in _ARITH:
            for w in ins:
                out = union(out, w)
        elif op.startswith("PUSH") or op in _CLEAN:
            out = None
        elif op == "CALLVALUE":
            out = f.callvalue
        elif op == "BALANCE":
            out = uniform(word_bits(ins[0]))
        elif op == "SHA3":
            out = uniform(_region_bits(f.memory, s[0], s[1]) if s[1] <= MAX_REGION else 0)
        elif op == "CALLDATALOAD":
            out = _read_word(f.calldata, s[0])
        elif op == "CALLDATACOPY":
            if s[2] <= MAX_REGION:
                _paste(f.memory, s[0], s[2], _region(f.calldata, s[1], s[2]))
        elif op == "MLOAD":
            out = _read_word(f.memory, s[0])
        elif op == "MSTORE":
            _write_word(f.memory, s[0], ins[1])
        elif op == "MSTORE8":
            b = ins[1][31] if ins[1] else 0
            if b:
                f.memory[s[0]] = b
            else:
                f.memory.pop(s[0], None)
        elif op == "SLOAD":
            out = self.storage.get((r.address, s[0]))
        elif op == "SSTORE":
            self._store((r.address, s[0]), ins[1])
        elif op in opcodes.CALL_OPS:
            f.pending = _Pending(r, ins)
            return
        if meta.results == 1:
            st.append(out)

    def introduce(self, r: TraceRecord, bits: int) -> None:
        """OR ``bits`` into the output of ``r``; call after propagate(r)."""
        if not bits:
            return
        op = r.opcode
        f = self.frames[-1]
        s = r.stack
        if op in opcodes.CALL_OPS:
            if f.pending is not None and f.pending.record is r:
                f.pending.bits |= bits
        elif op == "SSTORE":
            key = (r.address, s[0])
            self.storage[key] = union(self.storage.get(key), uniform(bits))
        elif op == "CALLDATACOPY":
            if s[2] <= MAX_REGION:
                for i in range(s[0], s[0] + s[2]):
                    f.memory[i] = f.memory.get(i, 0) | bits
        elif op == "MSTORE":
            for i in range(s[0], s[0] + 32):
                f.memory[i] = f.memory.get(i, 0) | bits
        elif op == "MSTORE8":
            f.memory[s[0]] = f.memory.get(s[0], 0) | bits
        elif opcodes.result_arity(op) == 1 and f.stack:
            f.stack[-1] = union(f.stack[-1], uniform(bits))

    def register(self, tag: TaintTag) -> int:
        self.tags.setdefault(tag.origin_seq, set()).add(tag)
        return 1 << tag.origin_seq

    # -- internals ------------------------------------------------------------

    @staticmethod
    def _align(f: FrameTaint, n: int) -> None:
        st = f.stack
        if len(st) < n:
            st[0:0] = [None] * (n - len(st))
        elif len(st) > n:
            del st[: len(st) - n]

    def _store(self, key, w) -> None:
        self.journal.append((key, self.storage.get(key)))
        if w is None:
            self.storage.pop(key, None)
        else:
            self.storage[key] = w

    def _rollback(self, mark: int) -> None:
        j = self.journal
        while len(j) > mark:
            key, old = j.pop()
            if old is None:
                self.storage.pop(key, None)
            else:
                self.storage[key] = old

    def _open_frame(self, pf: FrameTaint, pend: _Pending, r: TraceRecord) -> None:
        s = pend.record.stack
        op = pend.record.opcode
        calldata = {}
        if op in ("CALL", "CALLCODE"):
            calldata = _region(pf.memory, s[3], s[4]) if s[4] <= MAX_REGION else {}
            value = pend.operands[2]
        elif op == "DELEGATECALL":
            calldata = _region(pf.memory, s[2], s[3]) if s[3] <= MAX_REGION else {}
            value = pf.callvalue
        else:
            value = pend.operands[0]
        self.frames.append(
            FrameTaint(r.depth, r.address, calldata=calldata, callvalue=value, journal_mark=len(self.journal))
        )

    def _return_frame(self) -> None:
        child = self.frames.pop()
        parent = self.frames[-1]
        pend = parent.pending
        parent.pending = None
        if pend is None:
            return
        opener = pend.record
        last = child.last
        if opener.result is not None:
            ok = opener.result != 0
        else:
            ok = last is not None and last.opcode in _CLEAN_HALTS
        if not ok:
            self._rollback(child.journal_mark)
        parent.stack.append(uniform(pend.bits))
        if opener.opcode == "CREATE" or last is None or last.opcode not in ("RETURN", "REVERT"):
            return
        off, size = last.stack[0], last.stack[1]
        data = _region(child.memory, off, size) if size <= MAX_REGION else {}
        s = opener.stack
        out_off, out_size = (s[4], s[5]) if opener.opcode == "DELEGATECALL" else (s[5], s[6])
        n = min(out_size, size)
        if n > 0:
            _paste(parent.memory, out_off, n, data)

    # -- inspection -----------------------------------------------------------

    def locations(self) -> dict[int, list[str]]:
        """Tainted locations per origin bit, for debug dumps."""
        out: dict[int, list[str]] = {}

        def add(bits, text):
            for b in iter_bits(bits):
                out.setdefault(b, []).append(text)

        for (addr, slot), w in sorted(self.storage.items()):
            add(word_bits(w), f"storage 0x{addr:040x}:{hex(slot)}")
        for f in self.frames:
            for i, w in enumerate(reversed(f.stack)):
                add(word_bits(w), f"stack depth={f.depth} index={i}")
            for off, b in sorted(f.memory.items()):
                add(b, f"memory depth={f.depth} offset={off}")
        return out


def taint_introduce(state: TaintState, record: TraceRecord, tag: TaintTag) -> TaintState:
    state.introduce(record, state.register(tag))
    return state


def taint_propagate(state: TaintState, record: TraceRecord) -> TaintState:
    state.propagate(record)
    return state


def taint_check(state: TaintState, record: TraceRecord, tag: TaintTag) -> bool:
    return state.check(record, tag)


def reset_volatile(state: TaintState) -> TaintState:
    state.reset_volatile()
    return state
