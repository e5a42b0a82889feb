from .calltree import CallFrame, CallTree, MalformedDepth, NotACall, build_call_tree, control_reaches
from .taint import (
    TaintState,
    TaintTag,
    reset_volatile,
    taint_check,
    taint_introduce,
    taint_propagate,
)

__all__ = [
    "CallFrame", "CallTree", "MalformedDepth", "NotACall", "build_call_tree",
    "control_reaches", "TaintState", "TaintTag", "reset_volatile", "taint_check",
    "taint_introduce", "taint_propagate",
]
