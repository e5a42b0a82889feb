from .ast import Accessor, Arith, Comparison, PatternAst, RelationKind, RelationNode
from .corpus import (
    PatternSource,
    builtin_by_name,
    builtin_patterns,
    load_pattern_dir,
    load_pattern_file,
    parse_pattern_text,
)
from .parser import PatternError, PatternSyntaxError, UnknownOpcodeError, parse_pattern
from .render import pattern_id, render_pattern
from .validate import Finding, PatternValidationError, ValidationReport, validate_pattern

__all__ = [
    "Accessor", "Arith", "Comparison", "PatternAst", "RelationKind", "RelationNode",
    "PatternSource", "builtin_by_name", "builtin_patterns", "load_pattern_dir",
    "load_pattern_file", "parse_pattern_text", "PatternError", "PatternSyntaxError",
    "UnknownOpcodeError", "parse_pattern", "pattern_id", "render_pattern", "Finding",
    "PatternValidationError", "ValidationReport", "validate_pattern",
]
