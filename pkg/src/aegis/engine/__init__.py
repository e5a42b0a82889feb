from .matcher import DEFAULT_HISTORY_CAP, PASS, REVERT, Engine, PartialMatch, Verdict, process_transaction
from .oracle import DEFAULT_ORACLE_BOUND, OracleBoundExceeded, brute_force_oracle, engine_matches, eval_where
from .program import Endpoint, MatchProgram, RelationStep, compile_pattern, compile_where
from .report import read_verdicts, verdict_line, write_verdicts

__all__ = [
    "DEFAULT_HISTORY_CAP", "PASS", "REVERT", "Engine", "PartialMatch", "Verdict",
    "process_transaction", "DEFAULT_ORACLE_BOUND", "OracleBoundExceeded",
    "brute_force_oracle", "engine_matches", "eval_where", "Endpoint", "MatchProgram",
    "RelationStep", "compile_pattern", "compile_where", "read_verdicts", "verdict_line",
    "write_verdicts",
]
