"""Streaming pattern matcher over a chain of transactions.

Partial matches wait per (program, pending step). Each record is first checked
as the dst of every waiting step, then seeds step 0, and only then carries its
own output taint, so a record never relates to itself.
"""

from __future__ import annotations

import time
from collections import defaultdict
from dataclasses import dataclass, field
from typing import IO, Iterable

from ..dsl.ast import RelationKind
from ..flow.calltree import CallTree, build_call_tree
from ..flow.taint import TaintState, TaintTag, iter_bits
from ..trace import TransactionTrace
from .program import Endpoint, MatchProgram

PASS = "PASS"
REVERT = "REVERT"
DEFAULT_HISTORY_CAP = 4096

_CF = RelationKind.CONTROL_FLOW
_DF = RelationKind.DATA_FLOW
_FW = RelationKind.FOLLOWS


@dataclass(frozen=True)
class PartialMatch:
    pattern_id: bytes
    next_step: int
    bound: tuple[Endpoint, ...]

    @property
    def anchor_seq(self) -> int:
        return self.bound[-1].seq

    @property
    def contract(self) -> int:
        return self.bound[0].record.address


@dataclass(frozen=True)
class Verdict:
    tx_hash: int
    matched: tuple[tuple[bytes, tuple[int, ...]], ...] = ()
    action: str = PASS
    elapsed: float = field(default=0.0, compare=False)


class Engine:
    def __init__(
        self,
        programs: Iterable[MatchProgram],
        history_cap: int | None = DEFAULT_HISTORY_CAP,
        taint_dump: IO[str] | None = None,
    ):
        self.programs = list(programs)
        self.history_cap = history_cap
        self.taint = TaintState()
        self.taint_dump = taint_dump
        n = len(self.programs)
        # Waiting partials, indexed [program][step].
        self._ctrl = [[[] for _ in p.steps] for p in self.programs]
        self._flow = [[{} for _ in p.steps] for p in self.programs]
        self._follow = [[[] for _ in p.steps] for p in self.programs]
        self._by_dst: dict[str, list[tuple[int, int]]] = defaultdict(list)
        self._by_src0: dict[str, list[int]] = defaultdict(list)
        for pi in range(n):
            prog = self.programs[pi]
            self._by_src0[prog.steps[0].src_opcode].append(pi)
            for step in prog.steps:
                self._by_dst[step.dst_opcode].append((pi, step.index))

    # -- public ------------------------------------------------------------------

    def process_transaction(self, trace: TransactionTrace, tree: CallTree | None = None) -> Verdict:
        t0 = time.perf_counter()
        if tree is None:
            tree = build_call_tree(trace)
        taint = self.taint
        taint.begin_transaction(trace)
        tx, blk = trace.tx, trace.block
        programs = self.programs
        by_dst, by_src0 = self._by_dst, self._by_src0
        ctrl, flow, follow = self._ctrl, self._flow, self._follow
        matched = []

        for r in trace.records:
            taint.sync(r)
            op = r.opcode
            ep = None
            new = []
            waiting = by_dst.get(op)
            if waiting:
                consumed = None
                for pi, k in waiting:
                    prog = programs[pi]
                    step = prog.steps[k]
                    kind = step.kind
                    if kind is _FW:
                        cands = follow[pi][k]
                    elif kind is _CF:
                        cands = [pm for pm, first, last in ctrl[pi][k] if first <= r.seq <= last]
                    else:
                        waiting_by_origin = flow[pi][k]
                        if not waiting_by_origin:
                            continue
                        if consumed is None:
                            consumed = taint.consumed(r)
                        if not consumed:
                            continue
                        if consumed.bit_count() < len(waiting_by_origin):
                            keys = [b for b in iter_bits(consumed) if b in waiting_by_origin]
                        else:
                            keys = [b for b in waiting_by_origin if consumed >> b & 1]
                        cands = [pm for b in keys for pm in waiting_by_origin[b]]
                    if not cands:
                        continue
                    if ep is None:
                        ep = Endpoint(r, tx, blk)
                    pred = step.predicate
                    last_step = k + 1 == len(prog.steps)
                    for pm in cands:
                        if pred(pm.bound[-1], ep):
                            bound = pm.bound + (ep,)
                            if last_step:
                                matched.append((prog.pattern_id, tuple(e.seq for e in bound)))
                            else:
                                new.append((pi, PartialMatch(prog.pattern_id, k + 1, bound)))
            seeds = by_src0.get(op)
            if seeds:
                if ep is None:
                    ep = Endpoint(r, tx, blk)
                for pi in seeds:
                    new.append((pi, PartialMatch(programs[pi].pattern_id, 0, (ep,))))

            taint.propagate(r)
            if not new:
                continue
            introduced = False
            for pi, pm in new:
                k = pm.next_step
                kind = programs[pi].steps[k].kind
                if kind is _FW:
                    follow[pi][k].append(pm)
                elif kind is _CF:
                    child = tree.opened_frame(r.seq)
                    if child is not None:
                        ctrl[pi][k].append((pm, child.first_seq, child.last_seq))
                else:
                    bit = taint.register(TaintTag(pm.pattern_id, k, r.seq))
                    if not introduced:
                        taint.introduce(r, bit)
                        introduced = True
                    flow[pi][k].setdefault(r.seq, []).append(pm)

        if self.taint_dump is not None:
            self._dump(trace)
        taint.end_transaction()
        self._retain()
        matched.sort()
        return Verdict(tx.hash, tuple(matched), REVERT if matched else PASS, time.perf_counter() - t0)

    def process_stream(self, traces: Iterable[TransactionTrace]) -> list[Verdict]:
        return [self.process_transaction(t) for t in traces]

    def partials(self) -> list[PartialMatch]:
        """All partial matches carried into the next transaction."""
        out = []
        for pi in range(len(self.programs)):
            for k in range(len(self.programs[pi].steps)):
                out.extend(self._follow[pi][k])
                for lst in self._flow[pi][k].values():
                    out.extend(lst)
        return out

    # -- internals ---------------------------------------------------------------

    def _retain(self) -> None:
        """Drop partials that cannot progress in a later transaction, then cap."""
        live = self.taint.storage_bits()
        kept: list[tuple[int, PartialMatch]] = []
        for pi, prog in enumerate(self.programs):
            for k in range(len(prog.steps)):
                self._ctrl[pi][k] = []
                kept.extend((pi, pm) for pm in self._follow[pi][k])
                for origin, lst in self._flow[pi][k].items():
                    if live >> origin & 1:
                        kept.extend((pi, pm) for pm in lst)
                self._follow[pi][k] = []
                self._flow[pi][k] = {}
        cap = self.history_cap
        if cap is not None:
            per_contract: dict[int, list[tuple[int, PartialMatch]]] = defaultdict(list)
            for item in kept:
                per_contract[item[1].contract].append(item)
            kept = []
            for items in per_contract.values():
                if len(items) > cap:
                    items.sort(key=lambda it: it[1].anchor_seq)
                    items = items[len(items) - cap :]
                kept.extend(items)
            kept.sort(key=lambda it: it[1].anchor_seq)
        for pi, pm in kept:
            k = pm.next_step
            if self.programs[pi].steps[k].kind is _FW:
                self._follow[pi][k].append(pm)
            else:
                self._flow[pi][k].setdefault(pm.anchor_seq, []).append(pm)

    def _dump(self, trace: TransactionTrace) -> None:
        fp = self.taint_dump
        fp.write(f"tx 0x{trace.tx.hash:064x}\n")
        for origin, locs in sorted(self.taint.locations().items()):
            for tag in sorted(self.taint.tags.get(origin, ())):
                name = f"{tag.pattern_id.hex()}:{tag.relation_index}:{tag.origin_seq}"
                for loc in locs:
                    fp.write(f"  {name} {loc}\n")


def process_transaction(engine: Engine, trace: TransactionTrace, tree: CallTree | None = None) -> Verdict:
    return engine.process_transaction(trace, tree)
