"""Opcode table shared by the assembler, the executor, the DSL and the taint engine."""

from dataclasses import dataclass


@dataclass(frozen=True)
class OpInfo:
    name: str
    code: int | None
    operands: int
    results: int
    memory: bool = False


_TABLE: dict[str, OpInfo] = {}
_BY_CODE: dict[int, OpInfo] = {}


def _add(name, code, operands, results, memory=False):
    info = OpInfo(name, code, operands, results, memory)
    _TABLE[name] = info
    if code is not None:
        _BY_CODE[code] = info


_add("STOP", 0x00, 0, 0)
_add("ADD", 0x01, 2, 1)
_add("MUL", 0x02, 2, 1)
_add("SUB", 0x03, 2, 1)
_add("DIV", 0x04, 2, 1)
_add("LT", 0x10, 2, 1)
_add("GT", 0x11, 2, 1)
_add("EQ", 0x14, 2, 1)
_add("ISZERO", 0x15, 1, 1)
_add("AND", 0x16, 2, 1)
_add("OR", 0x17, 2, 1)
_add("NOT", 0x19, 1, 1)
_add("SHA3", 0x20, 2, 1, memory=True)
_add("ADDRESS", 0x30, 0, 1)
_add("BALANCE", 0x31, 1, 1)
_add("CALLER", 0x33, 0, 1)
_add("CALLVALUE", 0x34, 0, 1)
_add("CALLDATALOAD", 0x35, 1, 1)
_add("CALLDATASIZE", 0x36, 0, 1)
_add("CALLDATACOPY", 0x37, 3, 0, memory=True)
_add("TIMESTAMP", 0x42, 0, 1)
_add("NUMBER", 0x43, 0, 1)
_add("POP", 0x50, 1, 0)
_add("MLOAD", 0x51, 1, 1, memory=True)
_add("MSTORE", 0x52, 2, 0, memory=True)
_add("MSTORE8", 0x53, 2, 0, memory=True)
_add("SLOAD", 0x54, 1, 1)
_add("SSTORE", 0x55, 2, 0)
_add("JUMP", 0x56, 1, 0)
_add("JUMPI", 0x57, 2, 0)
_add("PC", 0x58, 0, 1)
_add("GAS", 0x5A, 0, 1)
_add("JUMPDEST", 0x5B, 0, 0)
for _n in range(1, 33):
    _add(f"PUSH{_n}", 0x5F + _n, 0, 1)
for _n in range(1, 17):
    _add(f"DUP{_n}", 0x7F + _n, _n, _n + 1)
for _n in range(1, 17):
    _add(f"SWAP{_n}", 0x8F + _n, _n + 1, _n + 1)
_add("CREATE", 0xF0, 3, 1, memory=True)
_add("CALL", 0xF1, 7, 1, memory=True)
_add("CALLCODE", 0xF2, 7, 1, memory=True)
_add("RETURN", 0xF3, 2, 0, memory=True)
_add("DELEGATECALL", 0xF4, 6, 1, memory=True)
_add("REVERT", 0xFD, 2, 0, memory=True)
_add("SELFDESTRUCT", 0xFF, 1, 0)

CALL_OPS = frozenset({"CALL", "CALLCODE", "DELEGATECALL", "CREATE"})
HALT_OPS = frozenset({"STOP", "RETURN", "REVERT", "SELFDESTRUCT"})


def info(name: str) -> OpInfo:
    return _TABLE[name]


def by_code(code: int) -> OpInfo | None:
    return _BY_CODE.get(code)


def is_known(name: str) -> bool:
    return name in _TABLE


def known_names():
    return tuple(_TABLE)


def register_opcode(name: str, operands: int, results: int, memory: bool = False) -> OpInfo:
    """Make a mnemonic available to the pattern language.

    Registered opcodes without a byte code are not executable by the mini-EVM;
    they exist so patterns over traces from richer clients still validate.
    """
    if name in _TABLE:
        existing = _TABLE[name]
        if (existing.operands, existing.results) != (operands, results):
            raise ValueError(f"{name} already registered with a different arity")
        return existing
    _add(name, None, operands, results, memory)
    return _TABLE[name]


def result_arity(name: str) -> int:
    """Words left on the stack that the pattern language calls ``stack.result``.

    DUP and SWAP rearrange rather than produce, so they have no result.
    """
    if name.startswith(("DUP", "SWAP")):
        return 0
    return _TABLE[name].results
