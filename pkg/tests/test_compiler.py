import pytest

from helpers import all_words, one_tile_system
from trsat.arith import ArithmeticContext, EXACT
from trsat.compiler import (
    VARIANT_BOUNDED,
    VARIANT_UNBOUNDED,
    build_decode_layers,
    build_leq_head,
    build_linear_head,
    compile_bounded,
    compile_unbounded,
    log_precision_format,
)
from trsat.encoder import (
    Alphabet,
    NORM_HARDMAX,
    TransformerEncoder,
    TudecBuiltinEmbedding,
    accepts,
    attends_to,
    embed,
    evaluate,
    head_scores,
    normalize_weight,
)
from trsat.fnn import Fnn, affine_layer
from trsat.tiling import TilingSystem, is_valid_encoded_tiling, octant_coords

TWO_TILE_FLIP = TilingSystem(
    ("a", "b"),
    frozenset({("a", "b"), ("b", "a")}),
    frozenset({("a", "b"), ("b", "a")}),
    "a",
    "b",
)


def decode_te(sys, correct_position_one=True):
    """The two decode layers wrapped into a runnable encoder."""
    layer1, layer2 = build_decode_layers(sys, correct_position_one)
    out = Fnn(5, [affine_layer([[1, 0, 0, 0, 0]], [0], "identity")])
    return TransformerEncoder(Alphabet(sys.tiles), TudecBuiltinEmbedding(),
                              [layer1, layer2], out)


def decoded_vectors(sys, word, ctx=EXACT, correct_position_one=True):
    _, trace = evaluate(decode_te(sys, correct_position_one), word, ctx)
    return trace.sequences[2]


# --- decode layers -----------------------------------------------------------


def test_decode_examples():
    sys = one_tile_system()
    vecs = decoded_vectors(sys, ["a"] * 5)
    assert vecs[4] == (1, 5, 2, 1, 1)
    assert vecs[1] == (1, 2, 1, 0, 1)
    assert vecs[0] == (1, 1, 0, 0, 1)


def test_decode_carries_symbol_codes():
    vecs = decoded_vectors(TWO_TILE_FLIP, ["a", "b", "a"])
    assert [v[4] for v in vecs] == [1, 2, 1]


def test_decode_matches_octant_coords_up_to_length_20():
    sys = one_tile_system()
    for n in (1, 2, 3, 6, 10, 20):
        vecs = decoded_vectors(sys, ["a"] * n)
        for i, vec in enumerate(vecs, start=1):
            assert vec == (1, i) + octant_coords(i) + (1,), (n, i)


def test_uncorrected_decode_differs_only_at_position_one():
    sys = one_tile_system()
    strict = decoded_vectors(sys, ["a"] * 6, correct_position_one=False)
    fixed = decoded_vectors(sys, ["a"] * 6)
    assert strict[0] == (1, 1, 1, 0, 1)  # row 1 instead of the octant's 0
    assert fixed[0] == (1, 1, 0, 0, 1)
    assert strict[1:] == fixed[1:]


# --- targeting heads ----------------------------------------------------------


def decode_seq(n):
    return decoded_vectors(one_tile_system(), ["a"] * n)


def test_next_head_attends_to_the_following_position():
    head = build_linear_head([0, 1, 0, 0, 0], 1, 5)
    assert attends_to(head, decode_seq(4), 2, EXACT) == {3}


def test_next_head_clamps_at_the_end():
    head = build_linear_head([0, 1, 0, 0, 0], 1, 5)
    assert attends_to(head, decode_seq(4), 4, EXACT) == {4}


def test_prev_head_clamps_at_the_start():
    head = build_linear_head([0, 1, 0, 0, 0], -1, 5)
    assert attends_to(head, decode_seq(4), 1, EXACT) == {1}
    assert attends_to(head, decode_seq(4), 3, EXACT) == {2}


def test_half_integer_target_ties_two_positions():
    from trsat.arith import Rat

    head = build_linear_head([0, 1, 0, 0, 0], Rat(3, 2), 5)
    assert attends_to(head, decode_seq(4), 1, EXACT) == {2, 3}


def test_step_head_targets_the_cell_below():
    head = build_linear_head([0, 1, 1, 0, 0], 1, 5)
    n = 10
    seq = decode_seq(n)
    for i in range(1, n + 1):
        r, _ = octant_coords(i)
        target = i + r + 1
        expected = {target} if target <= n else {n}
        assert attends_to(head, seq, i, EXACT) == expected, i


def test_leq_head_attends_to_the_prefix():
    head = build_leq_head(5)
    seq = decode_seq(5)
    assert attends_to(head, seq, 3, EXACT) == {1, 2, 3}
    assert attends_to(head, seq, 1, EXACT) == {1}
    from trsat.arith import Rat

    scores = head_scores(head, seq, 4, EXACT)
    weights = [normalize_weight(NORM_HARDMAX, j, scores, EXACT)
               for j in range(1, 6)]
    assert weights == [Rat(1, 4)] * 4 + [0]


def test_linear_head_coefficient_arity_checked():
    with pytest.raises(ValueError):
        build_linear_head([0, 1], 1, 5)


# --- compiled encoders ---------------------------------------------------------


def test_compiled_structure():
    compiled = compile_unbounded(one_tile_system())
    te = compiled.te
    assert compiled.variant == VARIANT_UNBOUNDED
    assert len(te.layers) == 4
    assert [len(l.heads) for l in te.layers] == [1, 1, 3, 1]
    for layer in te.layers:
        for head in layer.heads:
            assert head.norm == NORM_HARDMAX
    assert te.layers[2].comb.output_dim == 7
    bounded = compile_bounded(one_tile_system(), 1)
    assert bounded.te.layers[2].comb.output_dim == 9
    assert bounded.variant == VARIANT_BOUNDED


def test_complexity_is_linear_in_the_tile_count():
    for s in (1, 2, 3, 4):
        tiles = tuple("abcd"[:s])
        pairs = frozenset((a, b) for a in tiles for b in tiles)
        sys = TilingSystem(tiles, pairs, pairs, tiles[0], tiles[-1])
        assert compile_unbounded(sys).te.complexity().value <= s + 20


def test_unbounded_acceptance_examples():
    te = compile_unbounded(one_tile_system()).te
    assert accepts(te, ["a"], EXACT)
    assert accepts(te, ["a"] * 3, EXACT)
    assert not accepts(te, ["a"] * 2, EXACT)


def test_unbounded_rejects_mismatched_endpoints():
    sys = TilingSystem(("a", "b"), frozenset({("a", "a")}),
                       frozenset({("a", "a")}), "a", "b")
    assert not accepts(compile_unbounded(sys).te, ["a"], EXACT)


def test_unbounded_rejects_bad_vertical_pair():
    assert not accepts(compile_unbounded(TWO_TILE_FLIP).te,
                       ["a", "a", "b"], EXACT)


def test_unbounded_matches_oracle_on_a_two_tile_sweep():
    te = compile_unbounded(TWO_TILE_FLIP).te
    for word in all_words("ab", 6):
        assert accepts(te, word, EXACT) == \
            is_valid_encoded_tiling(TWO_TILE_FLIP, word), word


def test_bounded_pins_the_final_row():
    sys = one_tile_system()
    te1 = compile_bounded(sys, 1).te
    assert accepts(te1, ["a"] * 3, EXACT)
    assert not accepts(te1, ["a"], EXACT)
    te0 = compile_bounded(sys, 0).te
    assert accepts(te0, ["a"], EXACT)
    assert not accepts(te0, ["a"] * 3, EXACT)


def test_bounded_rejects_overlong_words_under_recommended_format():
    compiled = compile_bounded(one_tile_system(), 1)
    ctx = ArithmeticContext(compiled.recommended_format)
    for n in range(4, 8):
        assert not accepts(compiled.te, ["a"] * n, ctx), n


def test_bounded_rejects_negative_n():
    with pytest.raises(ValueError):
        compile_bounded(one_tile_system(), -1)


def test_sidecar_json():
    compiled = compile_bounded(one_tile_system(), 2)
    sidecar = compiled.sidecar_json()
    assert sidecar["variant"] == "bounded"
    assert sidecar["n"] == 2
    assert sidecar["recommended_format"] == \
        compiled.recommended_format.to_json()
    assert compile_unbounded(one_tile_system()).sidecar_json() == {
        "variant": "unbounded", "n": None, "recommended_format": None
    }


# --- format selection -----------------------------------------------------------


def test_log_precision_format_examples():
    fmt = log_precision_format(2, 8, VARIANT_UNBOUNDED)
    assert (fmt.total_bits, fmt.frac_bits) == (15, 4)  # 14 magnitude + sign
    assert fmt.overflow == "saturate" and fmt.rounding == "down"
    fmt = log_precision_format(2, 8, VARIANT_BOUNDED)
    assert (fmt.total_bits, fmt.frac_bits) == (21, 7)  # 20 magnitude + sign


def test_log_precision_format_degenerate_inputs():
    fmt = log_precision_format(1, 1, VARIANT_UNBOUNDED)
    assert fmt.frac_bits >= 1 and fmt.total_bits >= 2


def test_log_precision_format_validation():
    with pytest.raises(ValueError):
        log_precision_format(0, 1, VARIANT_UNBOUNDED)
    with pytest.raises(ValueError):
        log_precision_format(1, 0, VARIANT_UNBOUNDED)
    with pytest.raises(ValueError):
        log_precision_format(1, 1, "fancy")
