"""Random trace streams and patterns for differential tests."""

from __future__ import annotations

import random

from aegis import opcodes
from aegis.dsl.ast import Accessor, Arith, Comparison, PatternAst, RelationKind, RelationNode
from aegis.dsl.validate import validate_pattern
from aegis.trace import BlockContext, TraceRecord, TransactionContext, TransactionTrace

M = 2**256 - 1
VALUES = (0, 1, 2, 3, 32, 64, M)
ADDRESSES = (0xA, 0xB, 0xC)
KEYS = (0, 1, 2)

OPS = (
    "PUSH1", "ADD", "SUB", "MUL", "LT", "ISZERO", "SLOAD", "SSTORE", "MSTORE", "MLOAD",
    "CALLDATALOAD", "CALLDATACOPY", "JUMPI", "CALL", "DELEGATECALL", "RETURN", "STOP",
    "TIMESTAMP", "CALLVALUE", "DUP1", "SWAP1", "POP", "SHA3",
)
# Endpoint opcodes for generated patterns.
PATTERN_OPS = ("CALL", "DELEGATECALL", "SSTORE", "SLOAD", "ADD", "JUMPI", "CALLDATALOAD", "MSTORE", "MLOAD", "TIMESTAMP")


def _stack(rng: random.Random, op: str) -> tuple[int, ...]:
    n = opcodes.info(op).operands + rng.randint(0, 2)
    st = [rng.choice(VALUES) for _ in range(n)]
    if op in ("SLOAD", "SSTORE"):
        st[0] = rng.choice(KEYS)
    elif op in ("MSTORE", "MLOAD", "CALLDATALOAD"):
        st[0] = rng.choice((0, 1, 32, 64))
    elif op in ("CALLDATACOPY", "SHA3", "RETURN"):
        st[0] = rng.choice((0, 32))
        st[1] = rng.choice((0, 4, 32))
        if len(st) > 2:
            st[2] = rng.choice((0, 32, 36))
        if op in ("SHA3", "RETURN"):
            st[1] = rng.choice((0, 32, 64))
    elif op in ("CALL", "DELEGATECALL"):
        st[1] = rng.choice(ADDRESSES)
        base = 3 if op == "CALL" else 2
        st[base] = rng.choice((0, 32))
        st[base + 1] = rng.choice((0, 32, 64))
        st[base + 2] = rng.choice((0, 32))
        st[base + 3] = rng.choice((0, 32))
    return tuple(st)


def random_stream(rng: random.Random, n_records: int | None = None) -> list[TransactionTrace]:
    n = rng.randint(1, 50) if n_records is None else n_records
    n_tx = rng.randint(1, 4)
    cuts = sorted(rng.sample(range(1, n), min(n_tx - 1, n - 1))) if n > 1 else []
    sizes = [b - a for a, b in zip([0] + cuts, cuts + [n])]
    traces = []
    seq = 0
    block = 1
    for ti, size in enumerate(sizes):
        if rng.random() < 0.7:
            block += 1
        records = []
        depth = 1
        addrs = [rng.choice(ADDRESSES)]
        prev = None
        for _ in range(size):
            if prev is not None:
                if prev.opcode in opcodes.CALL_OPS and prev.result is not None and rng.random() < 0.6:
                    depth += 1
                    addrs.append(rng.choice(ADDRESSES))
                elif prev.opcode in opcodes.HALT_OPS and depth > 1:
                    depth -= 1
                    addrs.pop()
                elif depth > 1 and rng.random() < 0.03:
                    depth -= 1
                    addrs.pop()
            op = rng.choice(OPS)
            result = None
            if opcodes.result_arity(op) == 1 and op not in ("DUP1", "SWAP1"):
                result = rng.choice((0, 1)) if op in opcodes.CALL_OPS else rng.choice(VALUES)
            mem = bytes(rng.choice((0, 1, 255)) for _ in range(rng.choice((0, 0, 8, 40))))
            r = TraceRecord(op, rng.randint(0, 20), depth, addrs[-1], _stack(rng, op), result, mem, seq)
            records.append(r)
            prev = r
            seq += 1
        tx = TransactionContext(
            hash=0x1000 + ti,
            sender=rng.choice((0xE0, 0xE1)),
            to=rng.choice(ADDRESSES),
            value=rng.choice((0, 5)),
        )
        status = "SUCCESS" if rng.random() < 0.75 else "REVERTED"
        traces.append(TransactionTrace(tx, BlockContext(block, 1_600_000_000 + block), tuple(records), status))
    return traces


def _accessor(rng, side, op):
    meta = opcodes.info(op)
    kinds = ["pc", "address", "depth", "transaction"]
    if meta.operands:
        kinds += ["stack", "stack"]
    if opcodes.result_arity(op) == 1:
        kinds.append("result")
    kind = rng.choice(kinds)
    if kind == "stack":
        return Accessor(side, "stack", index=rng.randrange(meta.operands))
    if kind == "transaction":
        return Accessor(side, "transaction", field=rng.choice(("hash", "value", "from")))
    return Accessor(side, kind)


def _comparison(rng, src_op, dst_op):
    lhs = _accessor(rng, "src", src_op)
    rhs = _accessor(rng, "dst", dst_op) if rng.random() < 0.7 else rng.choice((0, 1, 32))
    if rng.random() < 0.15:
        lhs = Arith(lhs, rng.choice(("+", "-", "*")), _accessor(rng, "src", src_op))
    op = rng.choice(("=", "=", "!=", "<", ">", "<=", ">="))
    return Comparison(lhs, op, rhs)


def random_pattern(rng: random.Random) -> PatternAst:
    while True:
        n = rng.randint(1, 3)
        ops = [rng.choice(PATTERN_OPS) for _ in range(n + 1)]
        rels = []
        for i in range(n):
            kind = rng.choices(list(RelationKind), weights=(1, 3, 1))[0]
            if kind is RelationKind.CONTROL_FLOW and ops[i] not in ("CALL", "DELEGATECALL"):
                ops[i] = rng.choice(("CALL", "DELEGATECALL"))
                if i:
                    rels[-1] = RelationNode(rels[-1].kind, rels[-1].src_opcode, ops[i], rels[-1].where_clause)
            where = ()
            if rng.random() < 0.4:
                where = tuple(_comparison(rng, ops[i], ops[i + 1]) for _ in range(rng.randint(1, 2)))
            rels.append(RelationNode(kind, ops[i], ops[i + 1], where))
        ast = PatternAst(tuple(rels))
        if validate_pattern(ast).ok:
            return ast
