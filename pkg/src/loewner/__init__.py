"""Numerical generalized Loewner theory in the unit disk.

Evolution families from Berkson-Porta driving data, standard Loewner chains
and their beta invariant, semigroup tools, and a verifier for the identities
that tie them together.
"""

from .chain import (
    ChainClassification,
    ChainValue,
    DecompositionFrame,
    NotConverged,
    StandardChain,
    TransportedChain,
    beta_limit,
    chain_value,
    classify,
    frame_at,
    frames,
    induced_evolution,
    transported_chain,
)
from .disk import DiskAutomorphism, hyperbolic_distance, pseudo_hyperbolic
from .drivers import bp, chordal, constant, oracle_catalog, radial, sampled_path, validate
from .engine import BoundaryEscape, EvolutionConfig, evolve_grid, evolve_path, evolve_point, evolve_with_derivative
from .expr import ExprSyntaxError, compile_expr, differentiate_z, parse
from .semigroup import SemigroupModel, classify_dw, hyperbolic_step, koenigs_boundary, koenigs_elliptic

__version__ = "0.1.0"
