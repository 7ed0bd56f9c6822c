"""The formula language: syntax trees, concrete syntax, validation, ranges."""

from .ast import (
    Abs, Add, Adj, Atom, Const, CRational, Formula, Max, Min, Minus, Mul, One,
    Plus, Quant, Scale, Signature, SMul, TruncSub, Var, Zero, alternation_depth,
    comm, is_quantifier_free, prefix, quantifiers, walk,
)
from .checks import RangeInterval, ValidationReport, range_of, term_bound, validate
from .parser import parse_formula
from .printer import print_formula, print_term

__all__ = [
    "Abs", "Add", "Adj", "Atom", "Const", "CRational", "Formula", "Max", "Min",
    "Minus", "Mul", "One", "Plus", "Quant", "Scale", "Signature", "SMul",
    "TruncSub", "Var", "Zero", "alternation_depth", "comm", "is_quantifier_free",
    "prefix", "quantifiers", "walk", "RangeInterval", "ValidationReport",
    "range_of", "term_bound", "validate", "parse_formula", "print_formula",
    "print_term",
]
