import random

import pytest
from hypothesis import given, settings, strategies as st

from aegis.dsl import (
    Accessor,
    PatternSyntaxError,
    PatternValidationError,
    RelationKind,
    UnknownOpcodeError,
    builtin_by_name,
    builtin_patterns,
    parse_pattern,
    parse_pattern_text,
    pattern_id,
    render_pattern,
    validate_pattern,
)
from aegis.engine import compile_pattern
from keccak_ref import keccak256 as keccak_ref
from tracegen import random_pattern

# Ids computed with the reference sponge over each canonical rendering.
GOLDEN_IDS = {
    "same_function_reentrancy": "cc1d918b5b5596bc61c4ac7069888a28cf3099c8e8292457a64d093d3fdcb7bc",
    "cross_function_reentrancy": "45770fe1b8b140246fdaafadaa52f06f4169720f715b8468d4f71b53667d6b62",
    "delegated_reentrancy_delegatecall": "8769baaab52a3d442cfe9ee4549f811eee86a4d69359972ec764e85910db56b1",
    "delegated_reentrancy_callcode": "02d5c5878fb4afe5eab7cd2e1b4484e777e13f49250f1b43b6798f77eaecd6e7",
    "create_based_reentrancy": "3d8e64551b8053d09b8bf8974b491be254072ef790489c6b60743c3e316cb843",
    "parity_wallet_hack_1": "bef6278bdc03d434fd89d960a4c8c42a2b5a42ba26214fd55584b3cd3bba34ba",
    "parity_wallet_hack_2": "f8f39791c85793698eea3a591a5ee896b21338edf155251d8f28e92b3763f371",
    "integer_overflow_addition": "2b27a8973bcbe7bc3e2475456f76273243fef98212ede9de78b7fe79dadb3614",
    "integer_overflow_multiplication": "9c0f6aa63bad5ce6cdcd22d852d1b1c5d284643fb129596778e4ec7543203f65",
    "integer_underflow": "3c422d13700f7a994b786fe92f88b3a8f9ac751657032026b1b08c87635c13fb",
    "timestamp_dependence": "4b831fc2c1f3daba10f494270c4c0412c29f231ad0f43ec55b09c4d2aca98822",
    "transaction_order_dependency": "f598d4621da271238f87b718f7bf974a6b6d72b4bb0bcad78cbcb902f62f340b",
}


def test_builtin_ids_are_frozen():
    corpus = builtin_by_name()
    assert set(corpus) == set(GOLDEN_IDS)
    for name, src in corpus.items():
        assert src.id.hex() == GOLDEN_IDS[name]
        assert src.declared_id == "0x" + GOLDEN_IDS[name]
        assert keccak_ref(src.canonical.encode("ascii")).hex() == GOLDEN_IDS[name]


def test_builtins_round_trip_and_validate():
    for src in builtin_patterns():
        assert validate_pattern(src.ast).ok
        again = parse_pattern(src.canonical)
        assert again == src.ast
        assert render_pattern(again) == src.canonical


def test_relation_counts():
    corpus = builtin_by_name()
    assert len(corpus["same_function_reentrancy"].ast.relations) == 3
    assert len(corpus["parity_wallet_hack_1"].ast.relations) == 5
    assert len(corpus["parity_wallet_hack_2"].ast.relations) == 4
    assert len(corpus["transaction_order_dependency"].ast.relations) == 1


def test_same_function_where_placement():
    rels = builtin_by_name()["same_function_reentrancy"].ast.relations
    assert [r.kind for r in rels] == [RelationKind.CONTROL_FLOW, RelationKind.FOLLOWS, RelationKind.FOLLOWS]
    assert len(rels[0].where_clause) == 3
    assert rels[1].where_clause == ()
    assert len(rels[2].where_clause) == 3


def test_parity1_hash_predicate_on_flow_step():
    prog = compile_pattern(builtin_by_name()["parity_wallet_hack_1"].ast)
    assert len(prog.steps) == 5
    step = prog.steps[2]
    assert step.kind is RelationKind.DATA_FLOW
    assert (step.src_opcode, step.dst_opcode) == ("SSTORE", "JUMPI")
    lhs = step.where[0].lhs
    assert lhs == Accessor("src", "transaction", field="hash")
    assert step.where[0].op == "!="


def test_ascii_and_unicode_agree():
    a = parse_pattern("(opcode = SSTORE) ⤳ (opcode = SLOAD) where (src.pc ≠ dst.pc) ∧ (src.depth ≥ 1)")
    b = parse_pattern("(opcode = SSTORE) ~> (opcode = SLOAD) where (src.pc != dst.pc) && (src.depth >= 1)")
    assert a == b
    assert pattern_id(a) == pattern_id(b)


def test_whitespace_does_not_change_id():
    a = parse_pattern("(opcode = ADD) -> (opcode = SSTORE)")
    b = parse_pattern("(opcode=ADD)\n   ->\t(opcode = SSTORE)")
    assert pattern_id(a) == pattern_id(b)


def test_unknown_opcode_position():
    with pytest.raises(UnknownOpcodeError) as exc:
        parse_pattern("(opcode = CAL) -> (opcode = SSTORE)")
    assert exc.value.name == "CAL"
    assert (exc.value.line, exc.value.column) == (1, 11)


def test_empty_pattern_is_syntax_error():
    with pytest.raises(PatternSyntaxError):
        parse_pattern("")
    with pytest.raises(PatternSyntaxError):
        parse_pattern_text("# name: nothing\n")


def test_truncated_chain():
    with pytest.raises(PatternSyntaxError):
        parse_pattern("(opcode = ADD) -> ")


def test_where_on_multi_relation_group_rejected():
    with pytest.raises(PatternSyntaxError):
        parse_pattern("((opcode = CALL) => (opcode = CALL) -> (opcode = SSTORE)) where (src.pc = 1)")


def test_single_relation_group_where_binds_inner():
    ast = parse_pattern("(opcode = ADD) -> ((opcode = SSTORE) ~> (opcode = SLOAD)) where (dst.stack(0) = 1)")
    assert ast.relations[0].where_clause == ()
    assert len(ast.relations[1].where_clause) == 1


@pytest.mark.parametrize(
    "text, fragment",
    [
        ("(opcode = ADD) ~> (opcode = SSTORE) where (src.memory(0, 32) = 3)", "memory semantics"),
        ("(opcode = MLOAD) -> (opcode = MLOAD) where (src.memory(0, 32) < dst.memory(0, 32))", "ordered"),
        ("(opcode = SLOAD) -> (opcode = SSTORE) where (dst.stack(5) = 1)", "arity"),
        ("(opcode = SSTORE) -> (opcode = SSTORE) where (src.stack.result = 1)", "no result"),
        ("(opcode = MLOAD) -> (opcode = ADD) where ((src.memory(0, 1) + 1) = 2)", "arithmetic on memory"),
    ],
)
def test_validation_findings(text, fragment):
    report = validate_pattern(parse_pattern(text))
    assert not report.ok
    assert any(fragment in m for m in report.messages())
    with pytest.raises(PatternValidationError):
        compile_pattern(parse_pattern(text))


def test_pairwise_distinct_ids():
    ids = [p.id for p in builtin_patterns()]
    assert len(set(ids)) == 12


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 2**32))
def test_random_patterns_round_trip(seed):
    ast = random_pattern(random.Random(seed))
    text = render_pattern(ast)
    assert parse_pattern(text) == ast
    assert render_pattern(parse_pattern(text)) == text
