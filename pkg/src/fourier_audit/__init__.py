"""Black-box classifier auditing through spectral sampling.

The package estimates robustness, individual fairness, statistical parity,
and multicalibration of ±1 (or K-ary) classifiers from query access alone:
a bucket-tree search recovers the significant coefficients of the model's
expansion in a distribution-adapted orthonormal basis, and each property is
a closed-form functional of that spectrum. Exact enumeration oracles,
i.i.d. baselines, sample-size calculators, and a sweep harness round out
the toolkit.
"""

from .basis import (
    ExactSpectrum,
    OrthonormalBasis,
    exact_fourier_spectrum,
    gram_schmidt_basis,
    parity_eval,
    parity_eval_batch,
)
from .core import (
    Empirical,
    Flip,
    FlipL,
    Product,
    RandomSource,
    Uniform,
    enumerate_points,
    format_subset,
    perturb,
    point_index,
    sample,
    subset_cardinality,
    subset_from_members,
    subset_members,
)
from .errors import (
    AuditError,
    BudgetExceededError,
    DatasetError,
    DegenerateGroupError,
    EmptyFileError,
    InvalidDimensionError,
    InvalidDistributionError,
    InvalidParameterError,
    InvalidSpecError,
    NonNumericCellError,
    NoValidPairError,
    OracleError,
    PartialEstimateError,
    StarvedGroupError,
    TooLargeError,
    TransportError,
    UnmappedCategoryError,
    UnsupportedPropertyError,
)
from .estimators import (
    AuditReport,
    GFQuadratic,
    IndividualFairness,
    Multicalibration,
    PropertySpec,
    Robustness,
    StatisticalParity,
    characteristic,
    estimate_multiclass_sp,
    estimate_spectral_property,
    estimate_squared_coefficient,
    estimate_statistical_parity,
    format_report,
    membership_influence,
    solve_gf_quadratic,
)
from .baselines import BaselineSpec, uniform_estimate
from .exact_oracle import (
    ExactResult,
    GroupRates,
    exact_cross_group_disagreement,
    exact_flip_influence,
    exact_group_rates,
    exact_pair_restricted_sp,
    exact_property,
)
from .goldreich_levin import (
    Bucket,
    SpectrumEntry,
    SpectrumList,
    bucket_sample_schedule,
    estimate_bucket_weight,
    goldreich_levin,
    pruning_radius,
)
from .guarantees import (
    MPSubclassMember,
    SampleSizeQuery,
    free_subsets,
    mp_subclass,
    quadratic_inputs,
    reconstruction_gap_bound,
    sample_size,
)
from .harness import (
    DatasetTable,
    SupportLookup,
    SweepConfig,
    SweepResult,
    SweepRow,
    ingest_csv,
    load_config,
    mc_reference,
    parse_config,
    parse_property,
    run_sweep,
)
from .models import (
    AuditBudget,
    DecisionStumpTree,
    ExternalModel,
    Junta,
    LinearThreshold,
    LookupTable,
    ModelOracle,
    StumpNode,
    build_model,
    random_junta,
    random_lookup,
    random_ltf,
    random_tree,
    zoo_models,
)

__version__ = "0.1.0"

__all__ = [
    "AuditBudget",
    "AuditError",
    "AuditReport",
    "BaselineSpec",
    "Bucket",
    "BudgetExceededError",
    "DatasetError",
    "DatasetTable",
    "DecisionStumpTree",
    "DegenerateGroupError",
    "Empirical",
    "EmptyFileError",
    "ExactResult",
    "ExactSpectrum",
    "ExternalModel",
    "Flip",
    "FlipL",
    "GFQuadratic",
    "GroupRates",
    "IndividualFairness",
    "InvalidDimensionError",
    "InvalidDistributionError",
    "InvalidParameterError",
    "InvalidSpecError",
    "Junta",
    "LinearThreshold",
    "LookupTable",
    "MPSubclassMember",
    "ModelOracle",
    "Multicalibration",
    "NonNumericCellError",
    "NoValidPairError",
    "OracleError",
    "OrthonormalBasis",
    "PartialEstimateError",
    "Product",
    "PropertySpec",
    "RandomSource",
    "Robustness",
    "SampleSizeQuery",
    "SpectrumEntry",
    "SpectrumList",
    "StarvedGroupError",
    "StatisticalParity",
    "StumpNode",
    "SupportLookup",
    "SweepConfig",
    "SweepResult",
    "SweepRow",
    "TooLargeError",
    "TransportError",
    "Uniform",
    "UnmappedCategoryError",
    "UnsupportedPropertyError",
    "bucket_sample_schedule",
    "build_model",
    "characteristic",
    "enumerate_points",
    "estimate_bucket_weight",
    "estimate_multiclass_sp",
    "estimate_spectral_property",
    "estimate_squared_coefficient",
    "estimate_statistical_parity",
    "exact_cross_group_disagreement",
    "exact_flip_influence",
    "exact_fourier_spectrum",
    "exact_group_rates",
    "exact_pair_restricted_sp",
    "exact_property",
    "format_report",
    "format_subset",
    "free_subsets",
    "goldreich_levin",
    "gram_schmidt_basis",
    "ingest_csv",
    "load_config",
    "mc_reference",
    "membership_influence",
    "mp_subclass",
    "parity_eval",
    "parity_eval_batch",
    "parse_config",
    "parse_property",
    "perturb",
    "point_index",
    "pruning_radius",
    "quadratic_inputs",
    "random_junta",
    "random_lookup",
    "random_ltf",
    "random_tree",
    "reconstruction_gap_bound",
    "run_sweep",
    "sample",
    "sample_size",
    "solve_gf_quadratic",
    "subset_cardinality",
    "subset_from_members",
    "subset_members",
    "uniform_estimate",
    "zoo_models",
]
