"""Expression parsing and forward-mode differentiation."""

from .compile import CompiledExpression, compile_expression
from .expr import (
    Binary,
    Const,
    Expression,
    Power,
    Unary,
    UNARY_FUNCTIONS,
    Var,
    max_variable_index,
    to_string,
)
from .jets import SecondOrderJet, evaluate, evaluate_jet
from .parser import parse

__all__ = [
    "Binary",
    "CompiledExpression",
    "Const",
    "Expression",
    "Power",
    "SecondOrderJet",
    "Unary",
    "UNARY_FUNCTIONS",
    "Var",
    "compile_expression",
    "evaluate",
    "evaluate_jet",
    "max_variable_index",
    "parse",
    "to_string",
]
