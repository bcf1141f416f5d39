"""Finite-N simulations of superselection for macroscopic bodies.

Product-state overlaps, center-of-mass commutators, measurement decoherence
and splitter locality, all computed exactly in the number of sites N.
"""

from .branch import (
    Branch,
    BranchState,
    CapacityError,
    DegenerateStateError,
    ReducedDensityMatrix,
    ShapeError,
    SiteState,
    coherence,
    normalize,
    product_overlap,
    purity,
    reduce,
    trace_distance,
)
from .grammar import OperatorSyntaxError, format_operator, parse_operator
from .operators import (
    ComOperator,
    OperatorPolynomial,
    build_site_matrices,
    commutator_com,
    commutator_scaling,
    commutator_x,
    realize,
    term_count_bound,
)
from .series import ScalingSeries, fit_log_slope

__version__ = "0.1.0"
