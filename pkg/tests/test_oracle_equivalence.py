import random
from collections import Counter

import pytest

from aegis.dsl import RelationKind
from aegis.engine import DEFAULT_ORACLE_BOUND, Engine, OracleBoundExceeded, brute_force_oracle, compile_pattern, engine_matches
from tracegen import random_pattern, random_stream

TRIALS = 1000


def run_trials(n: int, seed: int = 20240611):
    """Engine (uncapped) against the exhaustive oracle on seeded random inputs."""
    rng = random.Random(seed)
    mismatches = []
    nonempty = 0
    kinds = Counter()
    for trial in range(n):
        traces = random_stream(rng, rng.randint(20, 150))
        progs = [compile_pattern(random_pattern(rng)) for _ in range(rng.randint(1, 3))]
        got = engine_matches(Engine(progs, history_cap=None).process_stream(traces))
        want = brute_force_oracle(progs, traces)
        if got != want:
            mismatches.append(trial)
        if want:
            nonempty += 1
            hit = {pid for pid, _ in want}
            for p in progs:
                if p.pattern_id in hit:
                    kinds.update(s.kind for s in p.steps)
    return mismatches, nonempty, kinds


def test_random_streams_agree():
    mismatches, nonempty, kinds = run_trials(TRIALS)
    assert mismatches == []
    # The generator must actually exercise matches of every relation kind.
    assert nonempty >= TRIALS // 10
    assert all(kinds[k] > 0 for k in RelationKind)


def test_empty_stream():
    progs = [compile_pattern(random_pattern(random.Random(1)))]
    assert brute_force_oracle(progs, []) == set()


def test_bound_enforced():
    rng = random.Random(3)
    traces = random_stream(rng, DEFAULT_ORACLE_BOUND + 1)
    with pytest.raises(OracleBoundExceeded):
        brute_force_oracle([compile_pattern(random_pattern(rng))], traces)
    assert brute_force_oracle([compile_pattern(random_pattern(rng))], traces, bound=DEFAULT_ORACLE_BOUND + 1) is not None
