"""Permutation limits: pattern densities, rectangular distances, permutons."""

__version__ = "0.1.0"

from .errors import (
    ArgumentError,
    DomainError,
    FeasibilityError,
    InvalidPermutation,
    PermLimitError,
    SizeError,
    StructuralError,
    TieError,
    ValidationError,
)
from .perm_core import (
    Pattern,
    Permutation,
    adjacency_matrix,
    all_patterns,
    count_occurrences,
    density,
    density_vector,
    parse_permutation,
)
from .weighted import (
    GeneralMatrix,
    IntervalPartition,
    WeightedPermutation,
    block_merge,
    blowup,
    equitable_partition,
    partition_matrix,
    validate_weighted,
    weak_regular_partition,
    weighted_density,
)
from .permuton import (
    DensityResult,
    GridPermuton,
    density_bounds,
    exact_density,
    from_permutation,
    from_weighted,
    mc_density,
    uniform_permuton,
    validate_limit_permutation,
)
from .metric import (
    RectWitness,
    discrepancy,
    dist_perm_vs_permuton,
    dist_permutations,
    dist_permutons,
    dist_weighted,
)
from .sampler import (
    RandomStream,
    SamplePair,
    draw_conditional,
    rank_compose,
    sample_subpermutation,
    sample_z_random,
)
from .convergence import (
    SequenceReport,
    cauchy_report,
    density_trajectories,
    estimate_limit,
)
