"""Family-wise error rate control by closed testing with e-values."""

from .core import (
    AdjustedResult,
    AlphaBudget,
    BadNodeId,
    BudgetOverflow,
    CycleError,
    GraphSpec,
    NegativeEValue,
    RowSumExceedsOne,
    TooLarge,
    ValidatedProblem,
    ValidationError,
    ancestor_set,
    topological_order,
    validate_problem,
)
from .edag import NotILDAG, dag_adjusted, graph_adjusted, ildag_adjusted, is_ildag
from .efallback import fallback_adjusted, fallback_naive, fallback_reverse, fallback_stack
from .eholm import holm_adjusted, holm_reject
from .oracle import brute_force_adjusted_e, brute_force_p_closure, hitting_weights
from .pgraph import e_to_p, sequential_rejection

__version__ = "0.1.0"

__all__ = [
    "AdjustedResult",
    "AlphaBudget",
    "BadNodeId",
    "BudgetOverflow",
    "CycleError",
    "GraphSpec",
    "NegativeEValue",
    "NotILDAG",
    "RowSumExceedsOne",
    "TooLarge",
    "ValidatedProblem",
    "ValidationError",
    "ancestor_set",
    "brute_force_adjusted_e",
    "brute_force_p_closure",
    "dag_adjusted",
    "e_to_p",
    "fallback_adjusted",
    "fallback_naive",
    "fallback_reverse",
    "fallback_stack",
    "graph_adjusted",
    "hitting_weights",
    "holm_adjusted",
    "holm_reject",
    "ildag_adjusted",
    "is_ildag",
    "sequential_rejection",
    "topological_order",
    "validate_problem",
]
