"""Exhaustive reference matcher for small streams.

Enumerates every endpoint tuple over the whole stream by depth-first search.
Data flow is decided by replaying taint from one origin at a time, and
where-clauses by walking the AST directly, so the streaming engine's
indexing, bit sharing and compiled predicates are all bypassed.
"""

from __future__ import annotations

from ..dsl.ast import Accessor, Arith, Comparison, RelationKind
from ..flow.calltree import build_call_tree, control_reaches, NotACall
from ..flow.taint import TaintState
from ..trace import AccessorError, TransactionTrace, read_accessor
from .program import Endpoint, MatchProgram, arith, compare

DEFAULT_ORACLE_BOUND = 200


class OracleBoundExceeded(ValueError):
    pass


def _value(x, src: Endpoint, dst: Endpoint):
    if isinstance(x, int):
        return x
    if isinstance(x, Arith):
        return arith(x.op, _value(x.lhs, src, dst), _value(x.rhs, src, dst))
    e = src if x.side == "src" else dst
    return read_accessor(e.record, e.tx, e.block, x)


def eval_where(where: tuple[Comparison, ...], src: Endpoint, dst: Endpoint) -> bool:
    """Left-to-right conjunction; a failing accessor makes the clause false."""
    for c in where:
        try:
            if not compare(c.op, _value(c.lhs, src, dst), _value(c.rhs, src, dst)):
                return False
        except (AccessorError, ZeroDivisionError):
            return False
    return True


class _Stream:
    def __init__(self, traces: list[TransactionTrace]):
        self.traces = traces
        self.endpoints: list[Endpoint] = []
        self.tx_index: dict[int, int] = {}
        self.trees = [build_call_tree(t) for t in traces]
        for ti, t in enumerate(traces):
            for r in t.records:
                self.endpoints.append(Endpoint(r, t.tx, t.block))
                self.tx_index[r.seq] = ti
        self._reach: dict[int, frozenset[int]] = {}

    def tainted_sinks(self, origin: Endpoint) -> frozenset[int]:
        """Seqs of records that consume taint introduced at ``origin``."""
        seq = origin.seq
        hit = self._reach.get(seq)
        if hit is not None:
            return hit
        state = TaintState()
        found = set()
        for t in self.traces[self.tx_index[seq] :]:
            state.begin_transaction(t)
            for r in t.records:
                if r.seq > seq and state.consumed(r) & 1:
                    found.add(r.seq)
                state.propagate(r)
                if r.seq == seq:
                    state.introduce(r, 1)
            state.end_transaction()
        hit = self._reach[seq] = frozenset(found)
        return hit

    def related(self, kind: RelationKind, s: Endpoint, d: Endpoint, anchor: int) -> bool:
        if kind is RelationKind.FOLLOWS:
            return d.seq > anchor
        if kind is RelationKind.CONTROL_FLOW:
            if self.tx_index[s.seq] != self.tx_index[d.seq]:
                return False
            try:
                return control_reaches(self.trees[self.tx_index[s.seq]], s.seq, d.seq)
            except NotACall:
                return False
        return d.seq in self.tainted_sinks(s)


def brute_force_oracle(
    programs: list[MatchProgram],
    traces: list[TransactionTrace],
    bound: int = DEFAULT_ORACLE_BOUND,
) -> set[tuple[bytes, tuple[int, ...]]]:
    total = sum(len(t.records) for t in traces)
    if total > bound:
        raise OracleBoundExceeded(f"{total} records exceed the oracle bound of {bound}")
    stream = _Stream(list(traces))
    eps = stream.endpoints
    out: set[tuple[bytes, tuple[int, ...]]] = set()
    for prog in programs:
        ops = prog.ast.endpoints
        rels = prog.ast.relations

        def extend(chain: list[Endpoint], prog=prog, ops=ops, rels=rels):
            i = len(chain) - 1
            if i == len(rels):
                out.add((prog.pattern_id, tuple(e.seq for e in chain)))
                return
            rel = rels[i]
            s = chain[-1]
            anchor = max(e.seq for e in chain)
            for d in eps:
                if d.record.opcode != ops[i + 1] or d.seq == s.seq:
                    continue
                if stream.related(rel.kind, s, d, anchor) and eval_where(rel.where_clause, s, d):
                    chain.append(d)
                    extend(chain)
                    chain.pop()

        for e in eps:
            if e.record.opcode == ops[0]:
                extend([e])
    return out


def engine_matches(verdicts) -> set[tuple[bytes, tuple[int, ...]]]:
    return {m for v in verdicts for m in v.matched}
