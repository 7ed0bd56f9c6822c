"""Numerical toolkit for continuous-logic sentences on finite tracial
matrix algebras and finite-dimensional normed spaces."""

from .errors import (
    BudgetError, ContModelError, EvaluationError, PanelMismatchError, ParseError, ShapeMismatchError,
    SignatureError, ValidationError,
)
from .evaluator import EvalOptions, EvalResult, bound_status, eval_qf, evaluate, witness_replay
from .formula import Formula, Signature, parse_formula, print_formula, validate
from .models import (
    Element, MatrixModel, NormedModel, a_value, b_value_closed, b_value_search, element, eval_term,
    load_model, make_matrix_model, make_normed_model, model_from_spec, moments, project_domain,
    sample_domain,
)
from .sentences import Panel, SentenceId, by_name, default_panel, import_panel
from .theory import (
    Fingerprint, FilterProxy, compare_universal, convergence_scan, fingerprint, microstate_search,
    ultralimit,
)

__version__ = "0.1.0"

__all__ = [
    "BudgetError", "ContModelError", "EvaluationError", "PanelMismatchError", "ParseError",
    "ShapeMismatchError", "SignatureError", "ValidationError", "EvalOptions", "EvalResult",
    "bound_status", "eval_qf", "evaluate", "witness_replay", "Formula", "Signature", "parse_formula",
    "print_formula", "validate", "Element", "MatrixModel", "NormedModel", "a_value", "b_value_closed",
    "b_value_search", "element", "eval_term", "load_model", "make_matrix_model", "make_normed_model",
    "model_from_spec", "moments", "project_domain", "sample_domain", "Panel", "SentenceId", "by_name",
    "default_panel", "import_panel", "Fingerprint", "FilterProxy", "compare_universal",
    "convergence_scan", "fingerprint", "microstate_search", "ultralimit", "__version__",
]
