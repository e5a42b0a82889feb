"""Exit criteria, one test each. The terminal summary prints a PASS/FAIL line per test."""

import random
import statistics
import time
from importlib import resources

import pytest

import test_flow
from aegis.dsl import builtin_by_name, parse_pattern, parse_pattern_text, render_pattern, validate_pattern
from aegis.engine import PASS, REVERT, Engine, compile_pattern
from aegis.evm import run_scenario
from aegis.governance import GovernanceState, commitment
from test_governance import check_sequence, random_ops
from test_oracle_equivalence import run_trials

pytestmark = pytest.mark.acceptance

CORPUS = builtin_by_name()
ALL = [compile_pattern(s.ast, n) for n, s in CORPUS.items()]
NAME_OF = {p.pattern_id: p.name for p in ALL}


def _verdicts(scenario, programs=ALL):
    txs = run_scenario(scenario)
    vs = Engine(programs).process_stream([t.trace for t in txs])
    return {t.label: v for t, v in zip(txs, vs)}, vs


def _flagged_by(v):
    return {NAME_OF[pid] for pid, _ in v.matched}


def test_criterion_1_pattern_corpus():
    t0 = time.perf_counter()
    files = sorted(resources.files("aegis.dsl").joinpath("patterns").iterdir(), key=lambda p: p.name)
    texts = [f.read_text(encoding="utf-8") for f in files if f.name.endswith(".pattern")]
    ids = []
    for text in texts:
        src = parse_pattern_text(text)
        assert validate_pattern(src.ast).ok
        again = parse_pattern(src.canonical)
        assert again == src.ast and render_pattern(again) == src.canonical
        assert src.declared_id == "0x" + src.id.hex()
        ids.append(src.id)
    elapsed = time.perf_counter() - t0
    assert len(texts) == 12 and len(set(ids)) == 12
    assert elapsed < 1.0


def test_criterion_2_bank_table():
    t0 = time.perf_counter()
    expected = {
        "vuln_bank_no_lock": (REVERT, REVERT),
        "vuln_bank_buggy_lock": (PASS, REVERT),
        "vuln_bank_secure_lock": (PASS, PASS),
    }
    got = {}
    for name in expected:
        by_label, _ = _verdicts(name)
        got[name] = (by_label["same_function_attack"].action, by_label["cross_function_attack"].action)
    assert got == expected
    assert time.perf_counter() - t0 < 10.0


def test_criterion_3_unconditional_reentrancy():
    only = [compile_pattern(CORPUS["same_function_reentrancy"].ast)]
    by_label, _ = _verdicts("unconditional_reentrancy", only)
    assert by_label["attack"].action == REVERT
    _, benign = _verdicts("unconditional_reentrancy_benign", only)
    assert all(v.action == PASS for v in benign)


def test_criterion_4_parity_hack_1():
    by_label, _ = _verdicts("parity_hack_1")
    assert by_label["take_ownership"].action == PASS
    assert by_label["drain"].action == REVERT
    assert _flagged_by(by_label["drain"]) == {"parity_wallet_hack_1"}
    _, fused = _verdicts("parity_hack_1_fused")
    assert [v.action for v in fused] == [PASS]


def test_criterion_5_parity_hack_2():
    by_label, _ = _verdicts("parity_hack_2")
    assert by_label["kill_library"].action == REVERT
    assert "parity_wallet_hack_2" in _flagged_by(by_label["kill_library"])
    _, benign = _verdicts("parity_hack_2_benign")
    assert [v.action for v in benign] == [PASS]


@pytest.mark.parametrize(
    "scenario, pattern",
    [
        ("integer_overflow_add", "integer_overflow_addition"),
        ("integer_overflow_mul", "integer_overflow_multiplication"),
        ("integer_underflow", "integer_underflow"),
        ("timestamp_dependence", "timestamp_dependence"),
        ("tx_order_dependency", "transaction_order_dependency"),
    ],
)
def test_criterion_6_dedicated_scenarios(scenario, pattern):
    _, verdicts = _verdicts(scenario)
    flagged = set().union(*(_flagged_by(v) for v in verdicts))
    assert flagged == {pattern}
    assert verdicts[-1].action == REVERT
    _, benign = _verdicts(scenario + "_benign")
    assert all(v.action == PASS for v in benign)


def test_criterion_7_oracle_equivalence():
    t0 = time.perf_counter()
    mismatches, nonempty, _ = run_trials(1000)
    assert mismatches == []
    assert nonempty >= 100
    assert time.perf_counter() - t0 < 300


@pytest.mark.parametrize(
    "prop",
    ["test_byte_precision", "test_store_load_symmetry", "test_volatile_clear_persistent_storage"],
)
def test_criterion_8_taint_properties(prop):
    fn = getattr(test_flow, prop)
    assert test_flow.PROPS.max_examples >= 500
    fn()


def test_criterion_9_governance():
    for n in range(1, 10):
        s = GovernanceState(0xA11CE, set(range(1, n + 1)), 1, 2, 2)
        vid = s.add_proposal(1, CORPUS["timestamp_dependence"].text)
        for v in range(1, n + 1):
            s.commit_to_vote(v, vid, commitment(vid, True, v), 1)
        s.advance_block(2)
        reveals = 0
        while s.proposals[vid].outcome == "OPEN":
            reveals += 1
            s.reveal_vote(reveals, vid, True, reveals)
        assert reveals == n // 2 + 1
    for seed in range(1000):
        rng = random.Random(seed)
        ops = random_ops(rng, rng.randint(10, 120))
        assert check_sequence(ops) == check_sequence(ops)


def test_criterion_10_latency_substitute():
    trace = run_scenario("benchmark_loop")[0].trace
    assert len(trace.records) == 1000
    samples = []
    for _ in range(21):
        v = Engine(ALL).process_transaction(trace)
        samples.append(v.elapsed)
    median_ms = statistics.median(samples) * 1000
    print(f"median latency {median_ms:.2f} ms per 1000-record transaction")
    assert median_ms <= 50.0
