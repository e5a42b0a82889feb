import pytest
from hypothesis import given, settings, strategies as st

import aegis.evm.scenarios as scenarios
from aegis.evm import (
    OUT_OF_GAS,
    REVERTED,
    SUCCESS,
    AssemblyError,
    UnknownScenario,
    WorldState,
    assemble,
    contract_address,
    deploy,
    disassemble,
    execute_transaction,
    fund,
    op_cost,
    run_scenario,
    scenario_names,
)
from aegis.evm.scenarios import ALICE, EVE, run_scenario_world
from aegis.evm.world import FAUCET
from aegis.hashing import keccak256
from aegis.trace import BlockContext, TransactionContext

M = 2**256
SENDER = 0xE0E0
BLK = BlockContext(1, 1_600_000_012, 0, 30_000_000)


def _world(code_src: str, params=None, storage=None, endowment=0):
    w = WorldState()
    addr = deploy(w, assemble(code_src, params), endowment=endowment, storage=storage)
    fund(w, SENDER, 1000)
    return w, addr


def _send(w, to, value=0, data=b"", gas=100_000, h=1):
    tx = TransactionContext(h, SENDER, to, value, gas, data)
    return execute_transaction(w, tx, BLK)


# -- assembler ---------------------------------------------------------------------------


def test_assembler_labels_and_widths():
    code = assemble("PUSH 1\nPUSH 0x1234\nPUSH @end\nJUMP\nend:\nSTOP")
    ops = [(name, arg) for _, name, arg in disassemble(code)]
    assert ops[0] == ("PUSH1", 1)
    assert ops[1] == ("PUSH2", 0x1234)
    assert ops[2][0] == "PUSH2"
    assert ops[3:] == [("JUMP", None), ("JUMPDEST", None), ("STOP", None)]
    assert ops[2][1] == 9


def test_assembler_params_and_comments():
    code = assemble("PUSH $x ; the answer\nSTOP", {"x": 42})
    assert code == bytes([0x60, 42, 0x00])


def test_assembler_error_has_line():
    with pytest.raises(AssemblyError) as exc:
        assemble("PUSH 1\nFROB\n")
    assert exc.value.line_no == 2


# -- world ---------------------------------------------------------------------------------


def test_deploy_fresh_addresses():
    w = WorldState()
    a = deploy(w, b"\x00")
    b = deploy(w, b"\x00")
    assert a != b
    assert a == contract_address(FAUCET, 0)
    assert w.balance(a) == 0 and w.code_at(a) == b"\x00"
    assert w.accounts[a].storage == {}


# -- execution -----------------------------------------------------------------------------


@settings(max_examples=100, deadline=None)
@given(st.integers(0, M - 1), st.integers(0, M - 1))
def test_word_arithmetic(a, b):
    src = "\n".join(f"PUSH32 $b\nPUSH32 $a\n{op}\nPOP" for op in ("ADD", "SUB", "MUL")) + "\nSTOP"
    w, addr = _world(src, {"a": a, "b": b})
    res = _send(w, addr)
    got = {r.opcode: r.result for r in res.trace.records if r.opcode in ("ADD", "SUB", "MUL")}
    assert got == {"ADD": (a + b) % M, "SUB": (a - b) % M, "MUL": (a * b) % M}


def test_gas_strictly_decreases():
    w, addr = _world("GAS\nGAS\nGAS\nPUSH 0\nGAS\nSTOP")
    gas = [r.result for r in _send(w, addr).trace.records if r.opcode == "GAS"]
    assert all(x > y for x, y in zip(gas, gas[1:]))
    assert op_cost("ADD") == 1 and op_cost("CALL") == 40 and op_cost("STOP") == 0


def test_zero_gas_is_out_of_gas_without_records():
    w, addr = _world("PUSH 1\nPUSH 0\nSSTORE")
    res = _send(w, addr, gas=0)
    assert res.status == OUT_OF_GAS
    assert res.trace.records == ()
    assert res.world.state_hash() == w.state_hash()


def test_revert_leaves_state_unchanged():
    w, addr = _world("PUSH 1\nPUSH 0\nSSTORE\nPUSH 0\nPUSH 0\nREVERT")
    res = _send(w, addr, value=5)
    assert res.status == REVERTED
    assert res.world.storage_at(addr, 0) == 0
    assert res.world.state_hash() == w.state_hash()


def test_infinite_loop_runs_out_of_gas():
    w, addr = _world("top:\nPUSH 1\nPUSH 0\nSSTORE\nPUSH @top\nJUMP")
    res = _send(w, addr, gas=500)
    assert res.status == OUT_OF_GAS
    assert res.world.state_hash() == w.state_hash()


def test_success_commits_storage_and_value():
    w, addr = _world("CALLVALUE\nPUSH 3\nSSTORE\nSTOP")
    res = _send(w, addr, value=9)
    assert res.status == SUCCESS
    assert res.world.storage_at(addr, 3) == 9
    assert res.world.balance(addr) == 9
    assert res.world.total_ether() == w.total_ether()


CALLER_SRC = """PUSH 0
PUSH 0
PUSH 0
PUSH 0
PUSH 0
PUSH $target
GAS
CALL
PUSH 0
SSTORE
STOP"""


def test_failing_callee_pushes_zero():
    w = WorldState()
    bad = deploy(w, assemble("PUSH 3\nJUMP"))
    caller = deploy(w, assemble(CALLER_SRC, {"target": bad}))
    fund(w, SENDER, 10)
    res = _send(w, caller)
    assert res.status == SUCCESS
    assert res.world.storage_at(caller, 0) == 0
    call = next(r for r in res.trace.records if r.opcode == "CALL")
    assert call.result == 0
    assert any(r.depth == 2 for r in res.trace.records)


def test_call_to_killed_address_returns_zero():
    w = WorldState()
    target = deploy(w, assemble("STOP"))
    w.killed.add(target)
    caller = deploy(w, assemble(CALLER_SRC, {"target": target}), storage={0: 7})
    fund(w, SENDER, 10)
    res = _send(w, caller)
    assert res.world.storage_at(caller, 0) == 0
    assert all(r.depth == 1 for r in res.trace.records)


def test_call_to_codeless_account_opens_no_frame():
    w = WorldState()
    caller = deploy(w, assemble(CALLER_SRC, {"target": 0xDEAD}))
    fund(w, SENDER, 10)
    res = _send(w, caller)
    assert res.world.storage_at(caller, 0) == 1
    assert all(r.depth == 1 for r in res.trace.records)


# -- scenarios -----------------------------------------------------------------------------


def test_registry_complete():
    names = set(scenario_names())
    for base in (
        "same_function_reentrancy", "cross_function_reentrancy", "vuln_bank_no_lock",
        "vuln_bank_buggy_lock", "vuln_bank_secure_lock", "unconditional_reentrancy",
        "parity_hack_1", "parity_hack_2", "integer_overflow_add", "integer_overflow_mul",
        "integer_underflow", "timestamp_dependence", "tx_order_dependency",
    ):
        assert base in names
    assert sum(n.endswith("_benign") for n in names) >= 10


def test_unknown_scenario():
    with pytest.raises(UnknownScenario):
        run_scenario("no_such_thing")


def test_scenarios_deterministic():
    for name in ("parity_hack_1", "vuln_bank_buggy_lock"):
        assert run_scenario(name) == run_scenario(name)


def test_conservation_and_isolation(monkeypatch):
    real = scenarios.execute_transaction
    checked = []

    def wrapped(world, tx, blk, **kw):
        res = real(world, tx, blk, **kw)
        assert res.world.total_ether() == world.total_ether()
        if res.status != SUCCESS:
            assert res.world.state_hash() == world.state_hash()
        checked.append(res.status)
        return res

    monkeypatch.setattr(scenarios, "execute_transaction", wrapped)
    for name in scenario_names():
        run_scenario(name)
    assert REVERTED in checked and len(checked) > 50


def test_deposit_writes_balance_slot():
    txs, world = run_scenario_world("same_function_reentrancy_benign")
    bank = contract_address(FAUCET, 0)
    slot = int.from_bytes(keccak256(ALICE.to_bytes(32, "big") + (1).to_bytes(32, "big")), "big")
    assert world.storage_at(bank, slot) == 10


def test_reentrancy_trace_shape():
    attack = run_scenario("same_function_reentrancy")[-1].trace.records
    calls = [r for r in attack if r.opcode == "CALL"]
    d2 = [r for r in calls if r.depth == 2]
    d4 = [r for r in calls if r.depth == 4]
    assert any(a.pc == b.pc and a.address == b.address for a in d2 for b in d4)
    stores = [r for r in attack if r.opcode == "SSTORE"]
    assert any(
        a.stack[0] == b.stack[0] and a.depth > b.depth and a.seq < b.seq for a in stores for b in stores
    )


def test_bank_balances_after_attacks():
    bank = contract_address(FAUCET, 0)
    honest = 30
    _, world = run_scenario_world("vuln_bank_no_lock")
    assert world.balance(bank) < honest
    for name in ("vuln_bank_secure_lock", "vuln_bank_buggy_lock"):
        _, world = run_scenario_world(name)
        assert world.balance(bank) >= honest


def test_parity1_shape():
    txs = run_scenario("parity_hack_1")
    assert [t.label for t in txs] == ["take_ownership", "drain"]
    first = txs[0].trace.records
    ops = [r.opcode for r in first]
    assert "DELEGATECALL" in ops and "CALLDATACOPY" in ops
    wallet = txs[0].trace.tx.to
    # Library code writes the wallet's storage.
    assert all(r.address == wallet for r in first if r.opcode == "SSTORE")
    assert any(r.depth == 2 for r in first if r.opcode == "SSTORE")
    _, world = run_scenario_world("parity_hack_1")
    assert world.balance(EVE) >= 100


def test_parity2_freezes_wallet():
    txs = run_scenario("parity_hack_2")
    assert txs[-1].status == REVERTED
    assert txs[1].trace.records[-1].opcode == "SELFDESTRUCT"


def test_overflow_trace_wraps():
    recs = run_scenario("integer_overflow_add")[0].trace.records
    add = [r for r in recs if r.opcode == "ADD" and r.stack[0] + r.stack[1] >= M]
    assert add and add[0].result == (add[0].stack[0] + add[0].stack[1]) % M


def test_benchmark_is_1000_records():
    assert len(run_scenario("benchmark_loop")[0].trace.records) == 1000
