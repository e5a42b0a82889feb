"""Minimal EVM-subset executor and the built-in scenario contracts."""

from .assembler import AssemblyError, assemble, assemble_fixture, disassemble, init_code
from .executor import (
    OUT_OF_GAS,
    REVERTED,
    SUCCESS,
    ExecutionResult,
    execute_transaction,
    op_cost,
)
from .scenarios import ScenarioTx, UnknownScenario, run_scenario, scenario_names
from .world import Account, WorldState, contract_address, deploy, fund

__all__ = [
    "Account",
    "AssemblyError",
    "ExecutionResult",
    "OUT_OF_GAS",
    "REVERTED",
    "SUCCESS",
    "ScenarioTx",
    "UnknownScenario",
    "WorldState",
    "assemble",
    "assemble_fixture",
    "contract_address",
    "deploy",
    "disassemble",
    "execute_transaction",
    "fund",
    "init_code",
    "op_cost",
    "run_scenario",
    "scenario_names",
]
