"""Compilation of octant tiling systems into transformer encoders.

The compiled encoder decodes each position into its octant cell in two
layers, gathers the relevant neighbour cells with linear-target
attention heads, checks the tiling conditions with ReLU gadgets, and
aggregates violations over all positions; the word is accepted iff no
check fires. A bounded variant additionally pins the final row and
rejects any word longer than the full octant, which keeps it sound
under a saturating logarithmic-precision fixed-width format.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from .arith import (
    FixedWidthFormat,
    OVERFLOW_SATURATE,
    ROUND_DOWN,
    Rat,
    RatLike,
)
from .encoder import (
    Alphabet,
    AttentionHead,
    Layer,
    NORM_HARDMAX,
    TransformerEncoder,
    TudecBuiltinEmbedding,
)
from .fnn import (
    ACT_IDENTITY,
    ACT_RELU,
    Fnn,
    affine_layer,
    gadget_and,
    gadget_eq,
    gadget_eq_const,
    gadget_guard,
    gadget_lt,
    gadget_neq_const,
    gadget_relation,
    on_dims,
    par,
    seq,
)
from .tiling import TilingSystem

VARIANT_UNBOUNDED = "unbounded"
VARIANT_BOUNDED = "bounded"


@dataclass
class CompiledReduction:
    te: TransformerEncoder
    system: TilingSystem
    variant: str
    n: Optional[int] = None
    recommended_format: Optional[FixedWidthFormat] = None

    def sidecar_json(self) -> dict:
        return {
            "variant": self.variant,
            "n": self.n,
            "recommended_format": (
                None
                if self.recommended_format is None
                else self.recommended_format.to_json()
            ),
        }


def _neg_relu_net() -> Fnn:
    # x -> -relu(x)
    return Fnn(
        1,
        [
            affine_layer([[1]], [0], ACT_RELU),
            affine_layer([[-1]], [0], ACT_IDENTITY),
        ],
    )


def _neg_abs_net() -> Fnn:
    # x -> -|x|
    return Fnn(
        1,
        [
            affine_layer([[1], [-1]], [0, 0], ACT_RELU),
            affine_layer([[-1, -1]], [0], ACT_IDENTITY),
        ],
    )


def _neg_abs_minus_one_net() -> Fnn:
    # x -> -|x - 1|
    return Fnn(
        1,
        [
            affine_layer([[1], [-1]], [-1, 1], ACT_RELU),
            affine_layer([[-1, -1]], [0], ACT_IDENTITY),
        ],
    )


def _unit_rows(dim: int, picks) -> list:
    rows = []
    for p in picks:
        row = [0] * dim
        row[p] = 1
        rows.append(row)
    return rows


def _identity_matrix(dim: int) -> list:
    return [[1 if i == j else 0 for j in range(dim)] for i in range(dim)]


def build_decode_layers(sys: TilingSystem, correct_position_one: bool = True):
    """Two layers turning the positional embedding (flag, 1, i, S_i, k)
    into (1, i, r, c, k) where (r, c) is the octant cell of position i.

    Layer 1 attends to the positions j with S_j <= i - 1 (there are
    exactly r of them, plus one at position 1) and pools the
    first-position flag, yielding 1/l. Layer 2 attends to the position
    j = l, recovers (l, S_l) and combines r = l and c = i - S_l - 1.
    With correct_position_one the first position's pooled count of 1 is
    cancelled against its flag so that position 1 decodes to (0, 0); the
    literal two-layer construction, which yields (1, 0) there, stays
    available for comparison.
    """
    # Layer 1: score -relu(S_j - (i - 1)).
    head1 = AttentionHead(
        q_matrix=[[0, 0, -1, 0, 0], [0, 1, 0, 0, 0], [0, 1, 0, 0, 0]],
        k_matrix=[[0, 1, 0, 0, 0], [0, 1, 0, 0, 0], [0, 0, 0, 1, 0]],
        score_net=_neg_relu_net(),
        pool_matrix=[[1, 0, 0, 0, 0]],
        norm=NORM_HARDMAX,
    )
    # comb1: (flag, 1, i, S_i, k) ++ (1/l) -> (1, i, S_i, k, 1/l, flag)
    comb1 = Fnn(6, [affine_layer(_unit_rows(6, [1, 2, 3, 4, 5, 0]), [0] * 6)])
    layer1 = Layer(heads=[head1], comb=comb1)

    # Layer 2: score -(|(1/l_i) * j - 1|), attends to j = l.
    head2 = AttentionHead(
        q_matrix=[[0, 0, 0, 0, 1, 0]],
        k_matrix=[[0, 1, 0, 0, 0, 0]],
        score_net=_neg_abs_minus_one_net(),
        pool_matrix=[[0, 1, 0, 0, 0, 0], [0, 0, 1, 0, 0, 0]],
        norm=NORM_HARDMAX,
    )
    # comb2: (1, i, S_i, k, 1/l, flag) ++ (l, S_l) -> (1, i, r, c, k)
    rows = [
        [1, 0, 0, 0, 0, 0, 0, 0],  # 1
        [0, 1, 0, 0, 0, 0, 0, 0],  # i
        [0, 0, 0, 0, 0, 0, 1, 0],  # r = relu(l)  (flag handled below)
        [0, 1, 0, 0, 0, 0, 0, -1],  # c = relu(i - S_l - 1), bias -1
        [0, 0, 0, 1, 0, 0, 0, 0],  # k
    ]
    if correct_position_one:
        rows[2][5] = -1  # r = relu(l - flag)
    comb2 = Fnn(8, [affine_layer(rows, [0, 0, 0, -1, 0])])
    layer2 = Layer(heads=[head2], comb=comb2)
    return layer1, layer2


def build_linear_head(coeffs: Sequence[RatLike], offset: RatLike, dim: int,
                      pool_matrix=None) -> AttentionHead:
    """Hardmax head scoring -|f(x_i) - j| for the affine target
    f(x) = offset + sum coeffs[h] * x[h]; attends to the position nearest
    f(x_i), with ties {j, j+1} at half-integers and clamping at the
    sequence ends. Inputs must carry 1 in dimension 1 and the position
    index in dimension 2."""
    coeffs = list(coeffs)
    if len(coeffs) != dim:
        raise ValueError("coefficient vector must match the input dimensionality")
    zero = [0] * dim
    q = [list(coeffs), [offset] + zero[1:], [1] + zero[1:]]
    k = [[1] + zero[1:], [1] + zero[1:], [0, -1] + zero[2:]]
    return AttentionHead(
        q_matrix=q,
        k_matrix=k,
        score_net=_neg_abs_net(),
        pool_matrix=_identity_matrix(dim) if pool_matrix is None else pool_matrix,
        norm=NORM_HARDMAX,
    )


def build_leq_head(dim: int) -> AttentionHead:
    """Hardmax head scoring -relu(j - i): ties all positions <= i at 0."""
    zero = [0] * dim
    q = [[0, -1] + zero[2:], [1] + zero[1:]]
    k = [[1] + zero[1:], [0, 1] + zero[2:]]
    return AttentionHead(
        q_matrix=q,
        k_matrix=k,
        score_net=_neg_relu_net(),
        pool_matrix=_identity_matrix(dim),
        norm=NORM_HARDMAX,
    )


# Index of group g's component h (both 1-based) in the layer-3 comb input
# (self, prev, next, step), each a 5-vector.
def _gi(group: int, comp: int) -> int:
    return 5 * (group - 1) + (comp - 1)


_W3 = 20  # layer-3 comb input width


def _pick(idx: int, width: int = _W3) -> Fnn:
    row = [0] * width
    row[idx] = 1
    return Fnn(width, [affine_layer([row], [0])])


def _guarded(cond: Fnn, check: Fnn) -> Fnn:
    """relu(check) when cond = 0, suppressed when cond = 1; both inputs
    are indicator-valued here so a guard bound of 1 suffices."""
    return seq(gadget_guard(1), par([cond, check]))


def _eq_dims(i: int, j: int, width: int = _W3) -> Fnn:
    return on_dims(gadget_eq(), [i, j], width)


def _lt_dims(i: int, j: int, width: int = _W3) -> Fnn:
    return on_dims(gadget_lt(), [i, j], width)


def _check_branches(sys: TilingSystem, n: Optional[int]) -> list:
    """The per-position violation indicators of the layer-3 combination."""
    codes = [sys.code(t) for t in sys.tiles]
    h_pairs = {(sys.code(a), sys.code(b)) for a, b in sys.horiz}
    v_pairs = {(sys.code(a), sys.code(b)) for a, b in sys.vert}

    is_last = _eq_dims(_gi(1, 2), _gi(3, 2))  # next clamps to self
    is_first = _eq_dims(_gi(1, 2), _gi(2, 2))  # prev clamps to self

    n_a = _guarded(is_last, _eq_dims(_gi(1, 3), _gi(1, 4)))
    n_b1 = _guarded(is_first, on_dims(gadget_eq_const(sys.code(sys.t_init)),
                                      [_gi(1, 5)], _W3))
    n_b2 = _guarded(_eq_dims(_gi(1, 2), _gi(3, 2)),
                    on_dims(gadget_eq_const(sys.code(sys.t_final)),
                            [_gi(1, 5)], _W3))
    n_c = _guarded(_lt_dims(_gi(1, 4), _gi(1, 3)),
                   on_dims(gadget_relation(h_pairs, codes),
                           [_gi(1, 5), _gi(3, 5)], _W3))
    n_d = _guarded(_lt_dims(_gi(1, 3), _gi(4, 3)),
                   on_dims(gadget_relation(v_pairs, codes),
                           [_gi(1, 5), _gi(4, 5)], _W3))
    branches = [n_a, n_b1, n_b2, n_c, n_d]
    if n is not None:
        n_e = _guarded(_eq_dims(_gi(1, 2), _gi(3, 2)),
                       on_dims(gadget_eq_const(n), [_gi(1, 3)], _W3))
        overflow_pos = (n + 1) * (n + 2) // 2 + 1
        n_f = on_dims(gadget_neq_const(overflow_pos), [_gi(1, 2)], _W3)
        branches.extend([n_e, n_f])
    return branches


def _compile(sys: TilingSystem, n: Optional[int]) -> TransformerEncoder:
    layer1, layer2 = build_decode_layers(sys)
    dim = 5
    prev = build_linear_head([0, 1, 0, 0, 0], -1, dim)
    nxt = build_linear_head([0, 1, 0, 0, 0], 1, dim)
    step = build_linear_head([0, 1, 1, 0, 0], 1, dim)
    comb3 = par([_pick(0), _pick(1)] + _check_branches(sys, n))
    layer3 = Layer(heads=[prev, nxt, step], comb=comb3)

    d3 = comb3.output_dim  # 7 unbounded, 9 bounded
    leq = build_leq_head(d3)
    # sum of the pooled violation indicators (dims 3..d3, pooled half)
    row = [0] * (2 * d3)
    for idx in range(d3 + 2, 2 * d3):
        row[idx] = 1
    comb4 = Fnn(2 * d3, [affine_layer([row], [0])])
    layer4 = Layer(heads=[leq], comb=comb4)

    out = Fnn(1, [affine_layer([[-1]], [1])])
    return TransformerEncoder(
        alphabet=Alphabet(sys.tiles),
        embedding=TudecBuiltinEmbedding(),
        layers=[layer1, layer2, layer3, layer4],
        out=out,
    )


def compile_unbounded(sys: TilingSystem) -> CompiledReduction:
    """Encoder accepting exactly the valid encoded tilings of sys."""
    return CompiledReduction(te=_compile(sys, None), system=sys,
                             variant=VARIANT_UNBOUNDED)


def compile_bounded(sys: TilingSystem, n: int) -> CompiledReduction:
    """Encoder accepting exactly the valid encoded tilings whose final
    row index is n; words longer than the full octant are rejected
    outright, which also holds under the recommended saturating format."""
    if n < 0:
        raise ValueError("octant parameter must be non-negative")
    fmt = log_precision_format(len(sys.tiles), max(n, 1), VARIANT_BOUNDED)
    return CompiledReduction(te=_compile(sys, n), system=sys,
                             variant=VARIANT_BOUNDED, n=n,
                             recommended_format=fmt)


def _floor_log2_pow(base: int, power: int) -> int:
    # floor(power * log2(base)) computed exactly
    return (base ** power).bit_length() - 1


def log_precision_format(sigma_size: int, n: int, variant: str) -> FixedWidthFormat:
    """Logarithmic-precision fixed-width formats for evaluating compiled
    encoders on words of length about n over sigma_size symbols.

    Unbounded variant: floor(4*log2(max(sigma, n))) + 2 magnitude bits
    plus a sign bit, floor(log2 n) + 1 fractional; bounded variant uses
    factors 6 and 2 respectively. Both round down and saturate. n is
    clamped to at least 2 so the fractional budget never degenerates to
    a single bit, which would make the attention-weight reciprocals
    vanish on short words.
    """
    if sigma_size < 1 or n < 1:
        raise ValueError("need sigma_size >= 1 and n >= 1")
    if variant not in (VARIANT_UNBOUNDED, VARIANT_BOUNDED):
        raise ValueError(f"unknown variant {variant!r}")
    n_eff = max(n, 2)
    base = max(sigma_size, n_eff)
    if variant == VARIANT_UNBOUNDED:
        magnitude = _floor_log2_pow(base, 4) + 2
        frac = _floor_log2_pow(n_eff, 1) + 1
    else:
        magnitude = _floor_log2_pow(base, 6) + 2
        frac = _floor_log2_pow(n_eff, 2) + 1
    return FixedWidthFormat(
        total_bits=magnitude + 1,  # sign bit
        frac_bits=frac,
        overflow=OVERFLOW_SATURATE,
        rounding=ROUND_DOWN,
    )
