"""Dynamic call tree of one transaction.

A frame's records, together with those of all its descendants, form one
contiguous run of seqs, so subtree membership is an interval test.
"""

from __future__ import annotations

from dataclasses import dataclass

from .. import opcodes
from ..trace import TransactionTrace


class MalformedDepth(ValueError):
    def __init__(self, seq: int, message: str = ""):
        self.seq = seq
        super().__init__(message or f"malformed depth change at seq {seq}")


class NotACall(ValueError):
    def __init__(self, seq: int):
        self.seq = seq
        super().__init__(f"record {seq} opened no frame")


@dataclass
class CallFrame:
    frame_id: int
    parent_id: int | None
    creating_record_seq: int | None
    address: int
    kind: str
    depth: int
    first_seq: int | None = None
    last_seq: int | None = None  # last seq in this frame's subtree


class CallTree:
    def __init__(self, frames: list[CallFrame], frame_of: dict[int, int], child_of: dict[int, int]):
        self.frames = frames
        self.frame_of = frame_of  # record seq -> frame id
        self.child_of = child_of  # call record seq -> id of the frame it opened

    @property
    def root(self) -> CallFrame:
        return self.frames[0]

    def __len__(self):
        return len(self.frames)

    def frame_for(self, seq: int) -> CallFrame:
        return self.frames[self.frame_of[seq]]

    def opened_frame(self, seq: int) -> CallFrame | None:
        fid = self.child_of.get(seq)
        return None if fid is None else self.frames[fid]

    def subtree_interval(self, src_seq: int) -> tuple[int, int]:
        child = self.opened_frame(src_seq)
        if child is None:
            raise NotACall(src_seq)
        return child.first_seq, child.last_seq

    def children(self, frame_id: int) -> list[CallFrame]:
        return [f for f in self.frames if f.parent_id == frame_id]


def build_call_tree(trace: TransactionTrace) -> CallTree:
    records = trace.records
    root_addr = records[0].address if records else (trace.tx.to or 0)
    root_kind = "CREATE" if trace.tx.to is None else "TOP"
    frames = [CallFrame(0, None, None, root_addr, root_kind, 1)]
    frame_of: dict[int, int] = {}
    child_of: dict[int, int] = {}
    open_stack = [0]
    prev = None
    for r in records:
        if prev is None:
            if r.depth != 1:
                raise MalformedDepth(r.seq, f"first record at depth {r.depth}, expected 1")
        elif r.depth == prev.depth + 1:
            if prev.opcode not in opcodes.CALL_OPS:
                raise MalformedDepth(r.seq, f"depth increased after {prev.opcode}")
            fid = len(frames)
            frames.append(CallFrame(fid, open_stack[-1], prev.seq, r.address, prev.opcode, r.depth))
            child_of[prev.seq] = fid
            open_stack.append(fid)
        elif r.depth > prev.depth:
            raise MalformedDepth(r.seq, f"depth jumped from {prev.depth} to {r.depth}")
        elif r.depth < prev.depth:
            for _ in range(prev.depth - r.depth):
                open_stack.pop()
        fid = open_stack[-1]
        frame_of[r.seq] = fid
        f = frames[fid]
        if f.first_seq is None:
            f.first_seq = r.seq
        prev = r
    # Propagate subtree ends upwards: a parent's subtree ends no earlier than any child's.
    for r in records:
        fid = frame_of[r.seq]
        while fid is not None:
            f = frames[fid]
            if f.last_seq is not None and f.last_seq >= r.seq:
                break
            f.last_seq = r.seq
            fid = f.parent_id
    return CallTree(frames, frame_of, child_of)


def control_reaches(tree: CallTree, src_seq: int, dst_seq: int) -> bool:
    """Whether ``dst_seq`` executes inside the frame subtree opened by ``src_seq``."""
    first, last = tree.subtree_interval(src_seq)
    return first <= dst_seq <= last
