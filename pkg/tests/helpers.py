"""Shared test fixtures: random quantized periodic encoders with a
calibrated accepting word, and the deterministic tiling-system grid the
oracle-equivalence suites sweep."""

import random

from trsat.arith import (
    ArithmeticContext,
    FixedWidthFormat,
    OVERFLOW_SATURATE,
    OVERFLOW_WRAP,
    Rat,
    ROUND_DOWN,
    ROUND_UP,
)
from trsat.encoder import (
    AdditivePeriodicEmbedding,
    Alphabet,
    AttentionHead,
    Layer,
    NORM_HARDMAX,
    TransformerEncoder,
    evaluate,
)
from trsat.fnn import Fnn, affine_layer
from trsat.tiling import TilingSystem


def grid_value(rng: random.Random, fmt: FixedWidthFormat, lo: int, hi: int) -> Rat:
    """A random representable value in [lo, hi]."""
    scale = 1 << fmt.frac_bits
    return Rat(rng.randint(lo * scale, hi * scale), scale)


def random_quantized_te(rng: random.Random, max_blocks: int = 12):
    """A random hardmax encoder with an additive-periodic embedding under
    a random small fixed-width format, plus a word it is calibrated to
    accept (the output net maps the word's raw score to exactly 1).

    Returns (te, ctx, word).
    """
    b = rng.choice([4, 5, 6])
    frac = rng.randint(1, b - 2)
    fmt = FixedWidthFormat(
        b,
        frac,
        rng.choice([OVERFLOW_SATURATE, OVERFLOW_SATURATE, OVERFLOW_WRAP]),
        rng.choice([ROUND_DOWN, ROUND_DOWN, ROUND_UP]),
    )
    ctx = ArithmeticContext(fmt)
    period = rng.choice([1, 2])
    dim = rng.choice([2, 3])
    symbols = ["a", "b"]
    base = {s: [grid_value(rng, fmt, -2, 2) for _ in range(dim)] for s in symbols}
    positional = [
        [grid_value(rng, fmt, -2, 2) for _ in range(dim)] for _ in range(period)
    ]
    embedding = AdditivePeriodicEmbedding(base, positional)

    layers = []
    d = dim
    for _ in range(rng.choice([1, 2])):
        heads = []
        for _ in range(rng.choice([1, 2])):
            rows = rng.randint(1, 2)
            q = [[rng.randint(-1, 1) for _ in range(d)] for _ in range(rows)]
            k = [[rng.randint(-1, 1) for _ in range(d)] for _ in range(rows)]
            score_net = Fnn(
                1,
                [affine_layer([[rng.choice([-1, 1])]], [rng.randint(-1, 1)],
                              "identity")],
            )
            pool = [
                [rng.randint(-1, 2) for _ in range(d)]
                for _ in range(rng.randint(1, 2))
            ]
            heads.append(AttentionHead(q, k, score_net, pool, NORM_HARDMAX))
        head_dim = sum(h.out_dim for h in heads)
        out_d = rng.choice([2, 3])
        comb = Fnn(
            d + head_dim,
            [affine_layer(
                [[rng.randint(-1, 1) for _ in range(d + head_dim)]
                 for _ in range(out_d)],
                [rng.randint(-1, 1) for _ in range(out_d)],
            )],
        )
        layers.append(Layer(heads, comb))
        d = out_d

    raw = Fnn(
        d,
        [affine_layer([[rng.randint(-1, 1) for _ in range(d)]],
                      [rng.randint(-1, 1)])],
    )
    probe = TransformerEncoder(Alphabet(symbols), embedding, layers, raw)
    blocks = rng.randint(2, max_blocks)
    word = [rng.choice(symbols) for _ in range(blocks * period)]
    target, _ = evaluate(probe, word, ctx)
    out = Fnn(
        d,
        list(raw.layers)
        + [
            affine_layer([[1], [-1]], [-target, target]),
            affine_layer([[-1, -1]], [1]),
        ],
    )
    te = TransformerEncoder(Alphabet(symbols), embedding, layers, out)
    return te, ctx, word


def one_tile_system(horiz=True, vert=True) -> TilingSystem:
    pairs = frozenset({("a", "a")})
    return TilingSystem(
        tiles=("a",),
        horiz=pairs if horiz else frozenset(),
        vert=pairs if vert else frozenset(),
        t_init="a",
        t_final="a",
    )


def tiling_grid():
    """Deterministic grid of >= 50 tiling systems: all 4 one-tile
    relation choices, 44 seeded two-tile systems, and 2 three-tile
    systems."""
    systems = []
    for h in (True, False):
        for v in (True, False):
            systems.append(one_tile_system(h, v))

    rng = random.Random(20240831)
    pairs2 = [(x, y) for x in "ab" for y in "ab"]
    seen = set()
    while sum(1 for s in systems if len(s.tiles) == 2) < 44:
        horiz = frozenset(p for p in pairs2 if rng.random() < 0.5)
        vert = frozenset(p for p in pairs2 if rng.random() < 0.5)
        t_init = rng.choice("ab")
        t_final = rng.choice("ab")
        key = (horiz, vert, t_init, t_final)
        if key in seen:
            continue
        seen.add(key)
        systems.append(TilingSystem(("a", "b"), horiz, vert, t_init, t_final))

    systems.append(TilingSystem(
        tiles=("a", "b", "c"),
        horiz=frozenset({("a", "b"), ("b", "c"), ("c", "a"), ("a", "a")}),
        vert=frozenset({("a", "a"), ("b", "b"), ("c", "c"), ("a", "c")}),
        t_init="a",
        t_final="c",
    ))
    systems.append(TilingSystem(
        tiles=("a", "b", "c"),
        horiz=frozenset({("a", "a"), ("a", "c"), ("c", "b"), ("b", "b")}),
        vert=frozenset({("a", "b"), ("b", "a"), ("c", "c"), ("b", "c")}),
        t_init="a",
        t_final="b",
    ))
    return systems


def all_words(symbols, max_len):
    from itertools import product

    for length in range(1, max_len + 1):
        for tup in product(symbols, repeat=length):
            yield list(tup)
