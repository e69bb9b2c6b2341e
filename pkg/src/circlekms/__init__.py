"""Exact KMS-state and ground-state classification of piecewise-linear
circle maps: branch engine, restricted orbits, entropy, conformal
measures, groupoid truncations and the classification report."""

from .builtin_maps import builtin_map, doubling, five_hump, tent
from .circlemap import (
    BranchSet,
    CircleMapPL,
    CirclePoint,
    Valency,
    eval_circle,
    exactness_probe,
    fixed_points,
    format_map,
    iterate_branches,
    parse_map,
    preimages,
    valency,
)
from .classifier import KmsReport, classify, ground_state_algebra, simplicity_check
from .entropy import (
    EntropyResult,
    MarkovData,
    best_entropy,
    certify_q_above_entropy,
    entropy_bracket,
    entropy_uniform,
    markov_entropy,
)
from .errors import (
    CircleKmsError,
    DivergentSeriesError,
    LocallyInjectiveError,
    MapSpecError,
    ResourceLimitError,
    ValidationError,
)
from .groupoid import (
    AlgebraElement,
    Bisection,
    GroupoidTruncation,
    adjoint,
    build_truncation,
    conformal_residual,
    convolve,
    gauge_twist,
    kms_residual,
    omega_state,
    sample_bisections,
)
from .limits import DEFAULT_LIMITS, Limits
from .measures import (
    AtomicMeasure,
    DistributionApprox,
    InverseTemperature,
    PartitionFunction,
    class_measure,
    maximal_measure,
    partition_function,
    verify_scaling,
)
from .orbits import (
    CriticalCatalog,
    OrbitAtom,
    PreperiodicityCertificate,
    ROWitness,
    critical_catalog,
    enumerate_orbit_atoms,
    preperiodicity,
    ro_witness,
)

__version__ = "0.1.0"
