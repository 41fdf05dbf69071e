"""dp_scout: one-shot LLM design pattern detection and hallucination-aware scoring for Java code."""

from .annotations import COMPOSITE, PatternInstance, RoleAssignment, RoleVocabulary
from .corpus import ClassIndex, ClassUnit, Snippet, assemble_snippet, index_project, strip_comments
from .detection import Prediction, classify_hallucinations, parse_response
from .evaluation import RoleConfusionMatrix, RunMetrics, aggregate_matrix, matrix_metrics, run_binary_metrics, score_run
from .names import common_root_package
from .promptgen import PromptPair, TokenBudget, enumerate_pairs, render_prompt

__version__ = "0.1.0"

__all__ = [
    "COMPOSITE",
    "ClassIndex",
    "ClassUnit",
    "PatternInstance",
    "Prediction",
    "PromptPair",
    "RoleAssignment",
    "RoleConfusionMatrix",
    "RoleVocabulary",
    "RunMetrics",
    "Snippet",
    "TokenBudget",
    "aggregate_matrix",
    "assemble_snippet",
    "classify_hallucinations",
    "common_root_package",
    "enumerate_pairs",
    "index_project",
    "matrix_metrics",
    "parse_response",
    "render_prompt",
    "run_binary_metrics",
    "score_run",
    "strip_comments",
]
