"""Closeness: distance preservation of delay-embedding maps.

Simulates coupled benchmark systems, builds delay embeddings of scalar
measurements, estimates how well the maps between attractors and embeddings
preserve squared distances, computes the analytic stable-embedding band for
oscillatory linear systems, and runs closeness-based directional-coupling
heuristics on the embeddings.
"""

__version__ = "0.1.0"

from .causal import (
    CausalVerdict,
    CertificateThreshold,
    Direction,
    Outcome,
    PairWitness,
    ThresholdProvenance,
    check_assumption1,
    expansivity_certificate,
    iff_test,
)
from .config import ExperimentConfig, config_from_dict, load_config
from .dynamics import (
    SystemKind,
    SystemModel,
    henon_henon,
    henon_step,
    integrate_ode,
    iterate_map,
    rhs_for,
    rossler_lorenz,
    rossler_rossler,
)
from .embedding import (
    AlignedRange,
    DelayEmbedding,
    Measurement,
    MeasurementDomain,
    NeighborIndex,
    NeighborQuery,
    align,
    coordinate,
    delay_embed,
    functional,
    knn,
    measure,
)
from .errors import (
    ClosenessError,
    ConditioningError,
    ConfigError,
    DegenerateInputError,
    DivergenceError,
    HypothesisViolation,
    ResonanceError,
    StiffnessError,
    ThresholdUndefined,
    ValidationError,
)
from .heuristics import (
    CcmResult,
    ContinuityStat,
    LResult,
    MResult,
    NeighborStats,
    RankStats,
    andrzejak_M,
    ccm,
    chicharro_L,
    pecora_continuity,
    simplex_weights,
    wilcoxon_signed_rank,
)
from .isometry import (
    IsometryEstimate,
    MapKind,
    MapUnderTest,
    TheoremBound,
    analytic_linear_bounds,
    build_maps,
    chain_ratios,
    distance_ratio_sweep,
    empirical_isometry,
    phi_matrix,
    ratios_on_pairs,
    resonance_factor,
    sample_pair_indices,
    subseed,
)
from .linear import (
    LinearSystemAd,
    MeasurementSet,
    build_class_Ad,
    default_initial_condition,
    example1_system,
    modal_amplitudes,
    simulate_linear,
    x_subsystem,
)
from .pipeline import (
    RunResult,
    SimulationProduct,
    build_embeddings,
    linear_verify_records,
    run_embed,
    run_heuristics,
    run_isometry,
    run_linear_verify,
    run_simulate,
    run_sweep,
    simulate_experiment,
)
from .trajectory import Trajectory, read_csv

__all__ = [
    "__version__",
    # errors
    "ClosenessError", "ValidationError", "ConfigError", "DivergenceError",
    "StiffnessError", "ConditioningError", "DegenerateInputError",
    "HypothesisViolation", "ResonanceError", "ThresholdUndefined",
    # trajectories and systems
    "Trajectory", "read_csv", "SystemKind", "SystemModel", "henon_henon",
    "henon_step", "rossler_lorenz", "rossler_rossler", "iterate_map",
    "integrate_ode", "rhs_for",
    # linear systems
    "LinearSystemAd", "MeasurementSet", "build_class_Ad", "simulate_linear",
    "x_subsystem", "example1_system", "default_initial_condition",
    "modal_amplitudes",
    # embeddings
    "Measurement", "MeasurementDomain", "coordinate", "functional",
    "measure", "DelayEmbedding", "delay_embed", "align", "AlignedRange",
    "NeighborQuery", "NeighborIndex", "knn",
    # isometry
    "MapKind", "MapUnderTest", "IsometryEstimate", "TheoremBound",
    "empirical_isometry", "sample_pair_indices", "ratios_on_pairs",
    "analytic_linear_bounds", "resonance_factor", "phi_matrix", "build_maps",
    "chain_ratios", "subseed", "distance_ratio_sweep",
    # causal logic
    "CertificateThreshold", "ThresholdProvenance", "PairWitness",
    "Direction", "Outcome", "CausalVerdict", "expansivity_certificate",
    "check_assumption1", "iff_test",
    # heuristics
    "NeighborStats", "RankStats", "MResult", "LResult", "CcmResult",
    "ContinuityStat", "andrzejak_M", "chicharro_L", "wilcoxon_signed_rank",
    "ccm", "pecora_continuity", "simplex_weights",
    # config and pipeline
    "ExperimentConfig", "load_config", "config_from_dict", "RunResult",
    "SimulationProduct", "simulate_experiment", "build_embeddings",
    "linear_verify_records", "run_simulate", "run_embed", "run_isometry",
    "run_heuristics", "run_sweep", "run_linear_verify",
]
