"""Lossy single-server private information retrieval.

Build and evaluate retrieval schemes that trade download rate against
reconstruction distortion and query privacy; estimate leakage from query
samples; and numerically evaluate the information-theoretic optimum for
finite-alphabet sources.
"""

from .core import (
    Dataset,
    DistortionKind,
    DistortionMeasure,
    GaussianSourceSpec,
    LeakageKind,
    SchemePoint,
    generate_gaussian_dataset,
    paper_gaussian_spec,
    per_symbol_distortion,
    shift_by_file_means,
    unshift_by_file_means,
)
from .errors import (
    BudgetExceededError,
    DimensionError,
    EstimationError,
    FormatError,
    InfeasibleProblemError,
    InvalidConfigError,
    LpirError,
    ProtocolError,
)
from .quantizer import Codebook, LloydConfig, LloydVectorQuantizer, lloyd_train, nearest
from .blocks import ScalarBlockQuantizer, block_mean_quantize, optimize_scalar_levels
from .color import merge_luma_chroma, split_luma_chroma
from .schemes import (
    CompressionScheme,
    Frontier,
    TimeSharedScheme,
    build_compression_scheme,
    convexify_shannon,
    eval_scheme,
    lower_hull,
    shannon_gaussian_distortion,
    time_share,
)
from .leakage import (
    MapAdversary,
    QuerySampleSet,
    expected_logloss,
    map_accuracy,
    mutual_info_discrete,
    query_variance,
)
from .rdl import (
    PrototypePmf,
    RdlConfig,
    RdlSolution,
    brute_force_rdl,
    rdl_properties_check,
    solve_rdl,
    uniform_binary_pmf,
)
from .protocol import (
    AnswerMessage,
    QueryMessage,
    decode_answer,
    decode_query,
    encode_answer,
    encode_query,
    run_experiment,
    server_answer,
    user_make_query,
    user_reconstruct,
)

__version__ = "0.1.0"
