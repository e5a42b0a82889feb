"""Built-in multi-transaction scenarios, each run against a fresh world."""

from __future__ import annotations

from typing import Callable, NamedTuple

from ..hashing import keccak256
from ..trace import BlockContext, TransactionContext, TransactionTrace
from .assembler import assemble_fixture, fixture_source, init_code
from .executor import execute_transaction
from .world import WorldState, contract_address, deploy, fund

ALICE = 0xA11CE0000000000000000000000000000000A11C
BOB = 0xB0B0000000000000000000000000000000000B0B
CAROL = 0xCA201000000000000000000000000000000CA201
OWNER = 0x0D0E0000000000000000000000000000000000E1
EVE = 0xEEE0000000000000000000000000000000000EEE
MALLORY = 0x3A110000000000000000000000000000000003A1

TX_GAS = 1_000_000
GENESIS_TIME = 1_600_000_000


class ScenarioTx(NamedTuple):
    trace: TransactionTrace
    status: str
    label: str


class UnknownScenario(KeyError):
    pass


def selector(signature: str) -> int:
    return int.from_bytes(keccak256(signature.encode())[:4], "big")


def calldata(signature: str, *args: int) -> bytes:
    return selector(signature).to_bytes(4, "big") + b"".join(a.to_bytes(32, "big") for a in args)


def _selector_params(**signatures: str) -> dict:
    params = {}
    for key, sig in signatures.items():
        params[f"sel_{key}"] = selector(sig)
        params[f"selw_{key}"] = selector(sig) << 224
    return params


BANK = _selector_params(deposit="deposit()", withdraw="withdraw()", transfer="transfer(address,uint256)")
UNCONDITIONAL_BANK = _selector_params(deposit="deposit()", withdraw="withdrawAll()")
WALLET = _selector_params(init="initWallet(address)", execute="execute(address,uint256)", kill="kill(address)")
LEDGER = _selector_params(deposit="deposit()", withdraw="withdraw(uint256)")
MARKET = _selector_params(set_price="setPrice(uint256)", buy="buy()")


class _Run:
    def __init__(self, name: str):
        self.name = name
        self.world = WorldState()
        self.seq = 0
        self.block = 0
        self.out: list[ScenarioTx] = []

    def send(self, sender, to, value=0, data=b"", label="", same_block=False, gas=TX_GAS):
        if not same_block:
            self.block += 1
        nonce = self.world.nonces.get(sender, 0)
        tx_hash = keccak256(sender.to_bytes(20, "big") + nonce.to_bytes(32, "big") + self.name.encode())
        tx = TransactionContext(int.from_bytes(tx_hash, "big"), sender, to, value, gas, data)
        blk = BlockContext(self.block, GENESIS_TIME + 12 * self.block, 0, 30_000_000)
        res = execute_transaction(self.world, tx, blk, seq_start=self.seq)
        self.world = res.world
        self.seq += len(res.trace.records)
        self.out.append(ScenarioTx(res.trace, res.status, label))
        return res

    def create(self, sender, code, value=0, label="deploy"):
        addr = contract_address(sender, self.world.nonces.get(sender, 0))
        self.send(sender, None, value, code, label)
        return addr


def _bank_setup(run: _Run, fixture: str, params: dict) -> int:
    bank = deploy(run.world, assemble_fixture(fixture, params))
    for who in (ALICE, BOB, CAROL):
        fund(run.world, who, 100)
        run.send(who, bank, 10, calldata("deposit()"), "setup")
    fund(run.world, EVE, 100)
    return bank


def _same_function_attack(run: _Run, bank: int, params: dict, label: str, reentries: int = 1):
    attacker = deploy(run.world, assemble_fixture("attacker_reenter", {**params, "max": reentries}),
                      storage={0: bank})
    run.send(EVE, attacker, 5, b"\x01", label)


def _cross_function_attack(run: _Run, bank: int, label: str):
    attacker = deploy(run.world, assemble_fixture("attacker_cross", BANK), storage={0: bank, 1: MALLORY})
    run.send(EVE, attacker, 5, b"\x01", label)


def _vuln_bank(run: _Run, fixture: str):
    bank = _bank_setup(run, fixture, BANK)
    _same_function_attack(run, bank, BANK, "same_function_attack")
    _cross_function_attack(run, bank, "cross_function_attack")


def vuln_bank_no_lock(run):
    _vuln_bank(run, "bank_nolock")


def vuln_bank_buggy_lock(run):
    _vuln_bank(run, "bank_buggy_lock")


def vuln_bank_secure_lock(run):
    _vuln_bank(run, "bank_secure_lock")


def same_function_reentrancy(run):
    bank = _bank_setup(run, "bank_nolock", BANK)
    _same_function_attack(run, bank, BANK, "attack")


def same_function_reentrancy_benign(run):
    bank = _bank_setup(run, "bank_nolock", BANK)
    run.send(EVE, bank, 5, calldata("deposit()"), "deposit")
    run.send(EVE, bank, 0, calldata("withdraw()"), "withdraw")


def cross_function_reentrancy(run):
    bank = _bank_setup(run, "bank_nolock", BANK)
    _cross_function_attack(run, bank, "attack")


def cross_function_reentrancy_benign(run):
    bank = _bank_setup(run, "bank_nolock", BANK)
    run.send(EVE, bank, 5, calldata("deposit()"), "deposit")
    run.send(EVE, bank, 0, calldata("transfer(address,uint256)", MALLORY, 2), "transfer")
    run.send(EVE, bank, 0, calldata("withdraw()"), "withdraw")


def unconditional_reentrancy(run):
    bank = _bank_setup(run, "bank_unconditional", UNCONDITIONAL_BANK)
    _same_function_attack(run, bank, UNCONDITIONAL_BANK, "attack", reentries=2)


def unconditional_reentrancy_benign(run):
    bank = _bank_setup(run, "bank_unconditional", UNCONDITIONAL_BANK)
    run.send(EVE, bank, 5, calldata("deposit()"), "deposit")
    run.send(EVE, bank, 0, calldata("withdrawAll()"), "withdraw")


def _library(run: _Run, owner: int = 0) -> int:
    return deploy(run.world, assemble_fixture("wallet_library", WALLET), storage={0: owner} if owner else None)


def _wallet_code(library: int) -> bytes:
    return assemble_fixture("wallet", {"library": library})


def parity_hack_1(run):
    lib = _library(run)
    wallet = deploy(run.world, _wallet_code(lib), endowment=100, storage={0: OWNER})
    fund(run.world, EVE, 10)
    run.send(EVE, wallet, 0, calldata("initWallet(address)", EVE), "take_ownership")
    run.send(EVE, wallet, 0, calldata("execute(address,uint256)", EVE, 100), "drain")


def parity_hack_1_fused(run):
    lib = _library(run)
    wallet = deploy(run.world, _wallet_code(lib), endowment=100, storage={0: OWNER})
    takeover = deploy(run.world, assemble_fixture("wallet_takeover", WALLET), storage={0: wallet, 1: EVE, 2: 100})
    fund(run.world, EVE, 10)
    run.send(EVE, takeover, 0, b"", "fused_attack")


def parity_hack_1_benign(run):
    lib = _library(run)
    fund(run.world, OWNER, 10)
    prelude = fixture_source("owner_constructor")
    wallet = run.create(OWNER, init_code(_wallet_code(lib), prelude), label="deploy_wallet")
    fund(run.world, wallet, 100)
    run.send(OWNER, wallet, 0, calldata("execute(address,uint256)", BOB, 30), "owner_execute")


def parity_hack_2(run):
    lib = _library(run)
    wallet = deploy(run.world, _wallet_code(lib), endowment=50, storage={0: OWNER})
    fund(run.world, EVE, 10)
    fund(run.world, OWNER, 10)
    run.send(EVE, lib, 0, calldata("initWallet(address)", EVE), "init_library")
    run.send(EVE, lib, 0, calldata("kill(address)", EVE), "kill_library")
    run.send(OWNER, wallet, 0, calldata("execute(address,uint256)", OWNER, 10), "frozen_wallet_call")


def parity_hack_2_benign(run):
    lib = _library(run)
    fund(run.world, OWNER, 20)
    code = assemble_fixture("init_and_kill", {**WALLET, "library": lib})
    run.create(OWNER, code, value=10, label="deploy_init_kill")


def _claim_contract(run, fixture, stored):
    addr = deploy(run.world, assemble_fixture(fixture), endowment=1000, storage={0: stored})
    fund(run.world, EVE, 10)
    return addr


def integer_overflow_add(run):
    c = _claim_contract(run, "overflow_add", 100)
    run.send(EVE, c, 0, calldata("claim(uint256)", (1 << 256) - 99), "attack")


def integer_overflow_add_benign(run):
    c = _claim_contract(run, "overflow_add", 100)
    run.send(EVE, c, 0, calldata("claim(uint256)", 5), "claim")


def integer_overflow_mul(run):
    c = _claim_contract(run, "overflow_mul", 2)
    run.send(EVE, c, 0, calldata("claim(uint256)", (1 << 255) + 1), "attack")


def integer_overflow_mul_benign(run):
    c = _claim_contract(run, "overflow_mul", 2)
    run.send(EVE, c, 0, calldata("claim(uint256)", 5), "claim")


def _ledger(run):
    c = deploy(run.world, assemble_fixture("underflow", LEDGER), endowment=100)
    fund(run.world, EVE, 20)
    run.send(EVE, c, 10, calldata("deposit()"), "setup")
    return c


def integer_underflow(run):
    c = _ledger(run)
    run.send(EVE, c, 0, calldata("withdraw(uint256)", 11), "attack")


def integer_underflow_benign(run):
    c = _ledger(run)
    run.send(EVE, c, 0, calldata("withdraw(uint256)", 4), "withdraw")


def timestamp_dependence(run):
    c = deploy(run.world, assemble_fixture("lottery", {"prize": 10}), endowment=100)
    fund(run.world, EVE, 10)
    run.send(EVE, c, 0, b"", "play")


def timestamp_dependence_benign(run):
    c = deploy(run.world, assemble_fixture("lottery_benign", {"prize": 10}), endowment=100)
    fund(run.world, EVE, 10)
    run.send(EVE, c, 0, b"", "play")


def _market(run):
    c = deploy(run.world, assemble_fixture("market", MARKET), storage={0: OWNER, 1: 100})
    fund(run.world, OWNER, 10)
    fund(run.world, BOB, 500)
    return c


def tx_order_dependency(run):
    c = _market(run)
    run.send(OWNER, c, 0, calldata("setPrice(uint256)", 150), "set_price")
    run.send(BOB, c, 200, calldata("buy()"), "buy", same_block=True)


def tx_order_dependency_benign(run):
    c = _market(run)
    run.send(OWNER, c, 0, calldata("setPrice(uint256)", 150), "set_price")
    run.send(BOB, c, 200, calldata("buy()"), "buy")


BENCHMARK_ITERATIONS = 45


def benchmark_loop(run):
    c = deploy(run.world, assemble_fixture("loop", {"n": BENCHMARK_ITERATIONS}))
    fund(run.world, EVE, 10)
    run.send(EVE, c, 0, calldata("run(uint256)", 7), "loop")


SCENARIOS: dict[str, Callable[[_Run], None]] = {
    "same_function_reentrancy": same_function_reentrancy,
    "same_function_reentrancy_benign": same_function_reentrancy_benign,
    "cross_function_reentrancy": cross_function_reentrancy,
    "cross_function_reentrancy_benign": cross_function_reentrancy_benign,
    "vuln_bank_no_lock": vuln_bank_no_lock,
    "vuln_bank_buggy_lock": vuln_bank_buggy_lock,
    "vuln_bank_secure_lock": vuln_bank_secure_lock,
    "unconditional_reentrancy": unconditional_reentrancy,
    "unconditional_reentrancy_benign": unconditional_reentrancy_benign,
    "parity_hack_1": parity_hack_1,
    "parity_hack_1_fused": parity_hack_1_fused,
    "parity_hack_1_benign": parity_hack_1_benign,
    "parity_hack_2": parity_hack_2,
    "parity_hack_2_benign": parity_hack_2_benign,
    "integer_overflow_add": integer_overflow_add,
    "integer_overflow_add_benign": integer_overflow_add_benign,
    "integer_overflow_mul": integer_overflow_mul,
    "integer_overflow_mul_benign": integer_overflow_mul_benign,
    "integer_underflow": integer_underflow,
    "integer_underflow_benign": integer_underflow_benign,
    "timestamp_dependence": timestamp_dependence,
    "timestamp_dependence_benign": timestamp_dependence_benign,
    "tx_order_dependency": tx_order_dependency,
    "tx_order_dependency_benign": tx_order_dependency_benign,
    "benchmark_loop": benchmark_loop,
}


def scenario_names() -> list[str]:
    return list(SCENARIOS)


def run_scenario_world(name: str) -> tuple[list[ScenarioTx], WorldState]:
    try:
        build = SCENARIOS[name]
    except KeyError:
        raise UnknownScenario(name) from None
    run = _Run(name)
    build(run)
    return run.out, run.world


def run_scenario(name: str) -> list[ScenarioTx]:
    return run_scenario_world(name)[0]
