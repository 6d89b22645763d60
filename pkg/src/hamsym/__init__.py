"""Symmetry classification for regular autonomous Hamiltonian systems.

Build a Hamiltonian system from a symplectic form and a Hamiltonian,
classify candidate symmetry vector fields through a decision tree over
Lie derivatives of the symplectic form, derive the conserved quantity each
class guarantees, and cross-check every claim by numeric integration.
"""

__version__ = "0.1.0"

from .symexpr import (
    ConstantVerdict,
    EvalDomainError,
    Expr,
    ExprError,
    NoValidProbesError,
    ParseError,
    PhaseSpace,
    ProbeConfig,
    UnknownIdentifierError,
    ZeroVerdict,
    differentiate,
    eval_numeric,
    is_constant,
    is_zero,
    parse,
)

__all__ = [
    "ConstantVerdict",
    "EvalDomainError",
    "Expr",
    "ExprError",
    "NoValidProbesError",
    "ParseError",
    "PhaseSpace",
    "ProbeConfig",
    "UnknownIdentifierError",
    "ZeroVerdict",
    "differentiate",
    "eval_numeric",
    "is_constant",
    "is_zero",
    "parse",
    "__version__",
]
