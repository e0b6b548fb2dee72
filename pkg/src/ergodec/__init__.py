"""Ergodic decompositions of finite Dirichlet forms and intertwining order isomorphisms."""

from .core import (
    DEFAULT_TIMES,
    DEFAULT_TOL,
    DirichletForm,
    EdgeFormSpec,
    Generator,
    SemigroupSample,
    StateSpace,
    apply_form,
    build_form,
    generator,
    semigroup_at,
    validate_dirichlet,
    weighted_inner,
)
from .decomposition import (
    DecompositionMatch,
    ErgodicDecomposition,
    direct_sum,
    ergodic_decompose,
    is_invariant,
    is_irreducible,
    match_decompositions,
    validate_disintegration,
)
from .intertwine import (
    DecomposedIntertwiner,
    IntertwineReport,
    assemble_intertwiner,
    check_intertwine,
    decompose_intertwiner,
    match_and_decompose,
)
from .orderiso import OrderIso, adjoint, apply, factorize, is_order_preserving, is_unitary

__version__ = "0.1.0"
