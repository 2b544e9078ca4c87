"""Prototype-image adaptation on frozen embeddings.

The package covers the full pipeline: deterministic synthetic embedding sets
(or files on disk), episodic task sampling, prototype construction, the NCC
and SCE objectives with exact analytic gradients, single- and dual-head
adaptation loops, and the gap measurement / bound verification suite.
"""

from .adapt import (
    METHODS,
    AdaptConfig,
    AdaptTrace,
    AdamState,
    EpisodeResult,
    TraceStep,
    adam_step,
    adapt_copa,
    adapt_episode,
    adapt_url,
    classify_query,
)
from .errors import (
    CopaError,
    DataError,
    DivergenceError,
    NonFiniteError,
    VerificationError,
)
from .gap import (
    BenchmarkStats,
    GapReport,
    ShiftCurve,
    aggregate,
    compute_gap,
    gap_bound_scalars,
    gap_shift_curve,
    gap_transform_sandwich,
    raw_gap_vector,
    vector_transform_sandwich,
)
from .losses import (
    LossConfig,
    LossResult,
    SceLossResult,
    ncc_loss,
    ncc_lower_bound,
    ncc_repr_loss,
    ncc_two_sided_loss,
    normalize_rows,
    sce_head_gradients,
    sce_loss,
    sce_lower_bound,
)
from .prototypes import PrototypeSet, build_prototypes, expand_prototypes
from .rng import Rng, mix64, substream
from .sampler import EpisodeTask, TaskProtocol, episode_views, sample_episode
from .store import EmbeddingSet, SynthSpec, generate_synthetic, load, save
from .verify import SuiteOutcome, run_all_suites, run_suite

__version__ = "0.1.0"

__all__ = [
    "AdaptConfig",
    "AdaptTrace",
    "AdamState",
    "BenchmarkStats",
    "CopaError",
    "DataError",
    "DivergenceError",
    "EmbeddingSet",
    "EpisodeResult",
    "EpisodeTask",
    "GapReport",
    "LossConfig",
    "LossResult",
    "METHODS",
    "NonFiniteError",
    "PrototypeSet",
    "Rng",
    "SceLossResult",
    "ShiftCurve",
    "SuiteOutcome",
    "SynthSpec",
    "TaskProtocol",
    "TraceStep",
    "VerificationError",
    "adam_step",
    "adapt_copa",
    "adapt_episode",
    "adapt_url",
    "aggregate",
    "build_prototypes",
    "classify_query",
    "compute_gap",
    "episode_views",
    "expand_prototypes",
    "gap_bound_scalars",
    "gap_shift_curve",
    "gap_transform_sandwich",
    "generate_synthetic",
    "load",
    "mix64",
    "ncc_loss",
    "ncc_lower_bound",
    "ncc_repr_loss",
    "ncc_two_sided_loss",
    "normalize_rows",
    "raw_gap_vector",
    "run_all_suites",
    "run_suite",
    "sample_episode",
    "save",
    "sce_head_gradients",
    "sce_loss",
    "sce_lower_bound",
    "substream",
    "vector_transform_sandwich",
]
