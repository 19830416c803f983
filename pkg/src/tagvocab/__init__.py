"""Vocabulary growth analysis for collaborative tagging streams.

Reconstructs tag-assignment tables from post logs, tracks distinct-tag
growth against intrinsic time (globally and per resource or user),
measures post-length distributions, estimates growth exponents and their
population distributions, and generates synthetic streams with known
exponents for validation.
"""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    EmptyStreamError,
    FitConvergenceError,
    InsufficientDataError,
    ParseError,
    TagvocabError,
    UndefinedExponentError,
    UnsortedInputError,
)
from .fit import (
    ExponentEstimate,
    GaussianFit,
    RescaledCurve,
    endpoint_exponent,
    exponent_distribution,
    gaussian_fit,
    loglog_regression_exponent,
    rank_entities,
    rescale_curve,
)
from .growth import (
    ContextSelector,
    GrowthCurve,
    SamplingPolicy,
    UserAccumulationCurve,
    track_entity_vocabularies,
    track_global_vocabulary,
    track_user_accumulation,
)
from .ingest import (
    CleaningPolicy,
    DatasetSummary,
    Post,
    TasRecord,
    build_tas,
    clean_posts,
    dataset_summary,
    parse_post_line,
)
from .stats import (
    Histogram,
    LogBinnedHistogram,
    post_length_distribution,
    tail_exponent,
)
from .synth import (
    FolksonomyGenConfig,
    FolksonomyGenerator,
    PitmanYorConfig,
    PostLengthModel,
    ZipfConfig,
    gen_folksonomy,
    gen_pitman_yor_stream,
    gen_zipf_stream,
    iter_pitman_yor_stream,
    iter_zipf_blocks,
    paper_like_config,
)

__all__ = [
    "__version__",
    "TagvocabError", "ConfigError", "ParseError", "UnsortedInputError",
    "EmptyStreamError", "InsufficientDataError", "UndefinedExponentError",
    "FitConvergenceError",
    "Post", "CleaningPolicy", "TasRecord", "DatasetSummary",
    "parse_post_line", "clean_posts", "build_tas", "dataset_summary",
    "ContextSelector", "SamplingPolicy", "GrowthCurve",
    "UserAccumulationCurve", "track_global_vocabulary",
    "track_entity_vocabularies", "track_user_accumulation",
    "Histogram", "LogBinnedHistogram", "post_length_distribution",
    "tail_exponent",
    "ExponentEstimate", "RescaledCurve", "GaussianFit", "endpoint_exponent",
    "loglog_regression_exponent", "rescale_curve", "rank_entities",
    "exponent_distribution", "gaussian_fit",
    "ZipfConfig", "PitmanYorConfig", "PostLengthModel", "FolksonomyGenConfig",
    "FolksonomyGenerator", "gen_zipf_stream", "gen_pitman_yor_stream",
    "iter_zipf_blocks", "iter_pitman_yor_stream",
    "gen_folksonomy", "paper_like_config",
]
