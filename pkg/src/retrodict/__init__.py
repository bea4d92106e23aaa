"""Retrodiction with past quantum states, reduced past states and dimension witnesses."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    DimensionMismatch,
    ImpossiblePostselection,
    InvalidPovm,
    NonHermitianInput,
    RetrodictError,
    SchemaError,
    SingularDenominator,
    TruncationTooSevere,
)
from .operators import (  # noqa: E402
    SubsystemOperator,
    hermitian_eigs,
    partial_trace,
    partial_transpose,
    permute_subsystems,
    tensor_product,
)
from .retrodiction import (  # noqa: E402
    Observable,
    PastState,
    Povm,
    ProbabilityTable,
    past_moments,
    past_probs,
    past_probs_local,
    probability_table,
)
from .reduced import (  # noqa: E402
    ReducedPastState,
    negativity_witness,
    probs_from_xi,
    xi_from_past,
)
