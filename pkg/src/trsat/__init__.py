"""Formal workbench for transformer-encoder satisfiability.

Exact and fixed-width interpreters for a formal transformer-encoder
model, a compiler from octant tiling systems to encoders, brute-force
tiling oracles, bounded satisfiability search, and signature-based
witness shortening for quantized periodic encoders.
"""

from .arith import (
    ArithmeticContext,
    EXACT,
    EvaluationError,
    FixedWidthFormat,
    Rat,
    quantize,
    rat_from_str,
    rat_to_str,
)
from .encoder import (
    AdditivePeriodicEmbedding,
    Alphabet,
    AttentionHead,
    EvalTrace,
    Layer,
    TeComplexity,
    TransformerEncoder,
    TudecBuiltinEmbedding,
    accepts,
    attends_to,
    embed,
    evaluate,
    head_pool,
    head_scores,
    normalize_weight,
)
from .fnn import Fnn, eval_fnn, on_dims, par, seq
from .compiler import (
    CompiledReduction,
    build_decode_layers,
    build_leq_head,
    build_linear_head,
    compile_bounded,
    compile_unbounded,
    log_precision_format,
)
from .engine import (
    SatResult,
    Signature,
    compute_signature,
    reduce_witness,
    sat_bounded,
    sat_unbounded_search,
)
from .tiling import (
    TilingSystem,
    is_encoded_tiling,
    is_valid_encoded_tiling,
    octant_coords,
    octant_index,
    solve_bounded_tiling,
)

__version__ = "0.1.0"
