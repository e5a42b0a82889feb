"""Deterministic executor for the EVM subset.

Frames run on an explicit stack rather than Python recursion, so call depth
is bounded only by gas and the 1024-frame limit.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import NamedTuple

from .. import opcodes
from ..hashing import MASK, keccak256
from ..trace import BlockContext, TraceRecord, TransactionContext, TransactionTrace
from .world import WorldState

SUCCESS = "SUCCESS"
REVERTED = "REVERTED"
OUT_OF_GAS = "OUT_OF_GAS"

ADDRESS_MASK = (1 << 160) - 1
MAX_STACK = 1024
MAX_DEPTH = 1024
MEMORY_LIMIT = 1 << 20
DEFAULT_MAX_STEPS = 1_000_000
CALL_COST = 40

_FREE = frozenset({"STOP", "RETURN", "REVERT"})
_BINARY = {
    "ADD": lambda a, b: (a + b) & MASK,
    "MUL": lambda a, b: (a * b) & MASK,
    "SUB": lambda a, b: (a - b) & MASK,
    "DIV": lambda a, b: a // b if b else 0,
    "LT": lambda a, b: int(a < b),
    "GT": lambda a, b: int(a > b),
    "EQ": lambda a, b: int(a == b),
    "AND": lambda a, b: a & b,
    "OR": lambda a, b: a | b,
}


class ExecutionResult(NamedTuple):
    trace: TransactionTrace
    status: str
    world: WorldState


class _Exceptional(Exception):
    def __init__(self, reason: str, out_of_gas: bool = False):
        super().__init__(reason)
        self.out_of_gas = out_of_gas


def op_cost(name: str) -> int:
    if name in _FREE:
        return 0
    if name in opcodes.CALL_OPS:
        return CALL_COST
    return 1


_JUMPDEST_CACHE: dict[bytes, frozenset[int]] = {}


def jumpdests(code: bytes) -> frozenset[int]:
    cached = _JUMPDEST_CACHE.get(code)
    if cached is not None:
        return cached
    dests = set()
    i = 0
    while i < len(code):
        b = code[i]
        if b == 0x5B:
            dests.add(i)
        if 0x60 <= b <= 0x7F:
            i += b - 0x5F
        i += 1
    result = frozenset(dests)
    _JUMPDEST_CACHE[code] = result
    return result


@dataclass
class _Frame:
    kind: str
    code: bytes
    code_address: int
    state_address: int
    caller: int
    value: int
    calldata: bytes
    gas: int
    depth: int
    snapshot: WorldState | None = None
    opener: int | None = None  # index of the call record in the trace
    out_off: int = 0
    out_size: int = 0
    pc: int = 0
    stack: list[int] = field(default_factory=list)
    memory: bytearray = field(default_factory=bytearray)


def _extend(f: _Frame, off: int, size: int) -> None:
    if size == 0:
        return
    end = off + size
    if end > MEMORY_LIMIT:
        raise _Exceptional("memory limit exceeded")
    if end > len(f.memory):
        f.memory.extend(bytes(((end + 31) // 32) * 32 - len(f.memory)))


def _restore(w: WorldState, snap: WorldState) -> None:
    w.accounts, w.killed, w.nonces = snap.accounts, snap.killed, snap.nonces


def execute_transaction(
    world: WorldState,
    tx: TransactionContext,
    blk: BlockContext,
    seq_start: int = 0,
    max_steps: int = DEFAULT_MAX_STEPS,
) -> ExecutionResult:
    """Run ``tx`` against a copy of ``world``; the input world is not modified."""
    if tx.value > world.balance(tx.sender):
        raise ValueError("transaction value exceeds sender balance")
    w = world.copy()
    records: list[TraceRecord] = []

    def done(status):
        return ExecutionResult(TransactionTrace(tx, blk, tuple(records), status), status, w)

    if tx.to is None:
        target = w.next_address(tx.sender)
    else:
        target = tx.to
        w.nonces[tx.sender] = w.nonces.get(tx.sender, 0) + 1
    if tx.gas_limit == 0:
        return done(OUT_OF_GAS)
    base = w.copy()

    w.account(tx.sender).balance -= tx.value
    w.account(target).balance += tx.value
    if tx.to is None:
        top = _Frame("CREATE", tx.input, target, target, tx.sender, tx.value, b"", tx.gas_limit, 1)
    else:
        top_code = w.code_at(target) if target not in w.killed else b""
        if not top_code:
            return done(SUCCESS)
        top = _Frame("TOP", top_code, target, target, tx.sender, tx.value, tx.input, tx.gas_limit, 1)

    frames = [top]
    steps = 0
    status = SUCCESS

    def finish(f: _Frame, success: bool, output: bytes, out_of_gas: bool, exceptional: bool):
        nonlocal status
        frames.pop()
        if f.kind == "CREATE" and success:
            acc = w.account(f.state_address)
            if f.state_address not in w.killed:
                acc.code = output
        if not frames:
            if not success:
                _restore(w, base)
                status = OUT_OF_GAS if out_of_gas else REVERTED
            return
        if not success and f.snapshot is not None:
            _restore(w, f.snapshot)
        parent = frames[-1]
        # Unused gas goes back even after an exceptional halt, so the failure stays in its frame.
        parent.gas = f.gas
        if f.kind == "CREATE":
            result = f.state_address if success else 0
        else:
            result = int(success)
            if not exceptional and f.out_size:
                n = min(f.out_size, len(output))
                parent.memory[f.out_off : f.out_off + n] = output[:n]
        parent.stack.append(result)
        records[f.opener] = replace(records[f.opener], result=result)

    while frames:
        f = frames[-1]
        if steps >= max_steps:
            while frames:
                finish(frames[-1], False, b"", True, True)
            break
        if f.pc >= len(f.code):
            finish(f, True, b"", False, False)
            continue
        meta = opcodes.by_code(f.code[f.pc])
        if meta is None or len(f.stack) < meta.operands:
            finish(f, False, b"", False, True)
            continue
        name = meta.name
        steps += 1
        stack = f.stack
        rec_index = len(records)
        pre_stack = tuple(reversed(stack))
        pre_memory = bytes(f.memory)
        cost = op_cost(name)

        def record(result=None):
            records.append(
                TraceRecord(
                    name, f.pc, f.depth, f.state_address, pre_stack, result, pre_memory,
                    seq_start + rec_index,
                )
            )

        if f.gas < cost:
            record()
            finish(f, False, b"", True, True)
            continue
        f.gas -= cost
        try:
            if len(stack) - meta.operands + meta.results > MAX_STACK:
                raise _Exceptional("stack overflow")
            next_pc = f.pc + 1
            result = None
            if name in _BINARY:
                a = stack.pop()
                b = stack.pop()
                result = _BINARY[name](a, b)
            elif name.startswith("PUSH"):
                n = int(name[4:])
                result = int.from_bytes(f.code[f.pc + 1 : f.pc + 1 + n].ljust(n, b"\0"), "big")
                next_pc = f.pc + 1 + n
            elif name.startswith("DUP"):
                stack.append(stack[-int(name[3:])])
            elif name.startswith("SWAP"):
                n = int(name[4:])
                stack[-1], stack[-1 - n] = stack[-1 - n], stack[-1]
            elif name == "ISZERO":
                result = int(stack.pop() == 0)
            elif name == "NOT":
                result = MASK ^ stack.pop()
            elif name == "POP":
                stack.pop()
            elif name == "SHA3":
                off, size = stack.pop(), stack.pop()
                _extend(f, off, size)
                result = int.from_bytes(keccak256(bytes(f.memory[off : off + size])), "big")
            elif name == "ADDRESS":
                result = f.state_address
            elif name == "BALANCE":
                result = w.balance(stack.pop() & ADDRESS_MASK)
            elif name == "CALLER":
                result = f.caller
            elif name == "CALLVALUE":
                result = f.value
            elif name == "CALLDATALOAD":
                i = stack.pop()
                chunk = f.calldata[i : i + 32] if i < len(f.calldata) else b""
                result = int.from_bytes(chunk.ljust(32, b"\0"), "big")
            elif name == "CALLDATASIZE":
                result = len(f.calldata)
            elif name == "CALLDATACOPY":
                dest, off, size = stack.pop(), stack.pop(), stack.pop()
                _extend(f, dest, size)
                chunk = f.calldata[off : off + size] if off < len(f.calldata) else b""
                f.memory[dest : dest + size] = chunk.ljust(size, b"\0")
            elif name == "TIMESTAMP":
                result = blk.timestamp
            elif name == "NUMBER":
                result = blk.number
            elif name == "MLOAD":
                off = stack.pop()
                _extend(f, off, 32)
                result = int.from_bytes(f.memory[off : off + 32], "big")
            elif name == "MSTORE":
                off, v = stack.pop(), stack.pop()
                _extend(f, off, 32)
                f.memory[off : off + 32] = v.to_bytes(32, "big")
            elif name == "MSTORE8":
                off, v = stack.pop(), stack.pop()
                _extend(f, off, 1)
                f.memory[off] = v & 0xFF
            elif name == "SLOAD":
                result = w.storage_at(f.state_address, stack.pop())
            elif name == "SSTORE":
                k, v = stack.pop(), stack.pop()
                st = w.account(f.state_address).storage
                if v:
                    st[k] = v
                else:
                    st.pop(k, None)
            elif name in ("JUMP", "JUMPI"):
                dest = stack.pop()
                cond = stack.pop() if name == "JUMPI" else 1
                if cond:
                    if dest not in jumpdests(f.code):
                        raise _Exceptional("invalid jump destination")
                    next_pc = dest
            elif name == "PC":
                result = f.pc
            elif name == "GAS":
                result = f.gas
            elif name in ("JUMPDEST", "STOP"):
                pass
            elif name in ("RETURN", "REVERT"):
                off, size = stack.pop(), stack.pop()
                _extend(f, off, size)
                output = bytes(f.memory[off : off + size])
                record()
                finish(f, name == "RETURN", output, False, False)
                continue
            elif name == "SELFDESTRUCT":
                beneficiary = stack.pop() & ADDRESS_MASK
                me = w.account(f.state_address)
                if beneficiary != f.state_address:
                    w.account(beneficiary).balance += me.balance
                    me.balance = 0
                w.killed.add(f.state_address)
                record()
                finish(f, True, b"", False, False)
                continue
            elif name in opcodes.CALL_OPS:
                child = _call(w, f, name, stack)
                if child is None:
                    result = stack.pop()  # _call pushed the immediate outcome
                else:
                    child.opener = rec_index
                    record()
                    f.pc = next_pc
                    frames.append(child)
                    continue
            else:  # pragma: no cover - every table entry is handled above
                raise _Exceptional(f"unimplemented opcode {name}")
        except _Exceptional as e:
            record()
            finish(f, False, b"", e.out_of_gas, True)
            continue
        if result is not None:
            stack.append(result)
        record(result)
        f.pc = next_pc
        if name == "STOP":
            finish(f, True, b"", False, False)
    return done(status)


def _call(w: WorldState, f: _Frame, name: str, stack: list[int]) -> _Frame | None:
    """Pop a call's operands; return the callee frame, or push the outcome and return None."""
    if name == "CREATE":
        value, off, size = stack.pop(), stack.pop(), stack.pop()
        _extend(f, off, size)
        init = bytes(f.memory[off : off + size])
        if value > w.balance(f.state_address) or f.depth >= MAX_DEPTH:
            stack.append(0)
            return None
        addr = w.next_address(f.state_address)
        if w.code_at(addr):
            stack.append(0)
            return None
        snap = w.copy()
        w.account(f.state_address).balance -= value
        w.account(addr).balance += value
        if not init:
            stack.append(addr)
            return None
        child = _Frame("CREATE", init, addr, addr, f.state_address, value, b"", f.gas, f.depth + 1, snap)
        f.gas = 0
        return child

    if name == "DELEGATECALL":
        _gas, to, in_off, in_size, out_off, out_size = (stack.pop() for _ in range(6))
        value = f.value
    else:
        _gas, to, value, in_off, in_size, out_off, out_size = (stack.pop() for _ in range(7))
    to &= ADDRESS_MASK
    _extend(f, in_off, in_size)
    _extend(f, out_off, out_size)
    calldata = bytes(f.memory[in_off : in_off + in_size])
    moves_value = name == "CALL"
    if (
        to in w.killed
        or f.depth >= MAX_DEPTH
        or (name in ("CALL", "CALLCODE") and value > w.balance(f.state_address))
    ):
        stack.append(0)
        return None
    code = w.code_at(to)
    snap = w.copy()
    if moves_value and value:
        w.account(f.state_address).balance -= value
        w.account(to).balance += value
    if not code:
        stack.append(1)
        return None
    if name == "CALL":
        state, caller = to, f.state_address
    elif name == "CALLCODE":
        state, caller = f.state_address, f.state_address
    else:
        state, caller = f.state_address, f.caller
    child = _Frame(name, code, to, state, caller, value, calldata, f.gas, f.depth + 1, snap)
    child.out_off, child.out_size = out_off, out_size
    f.gas = 0
    return child
