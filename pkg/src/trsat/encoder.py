"""Executable semantics of transformer encoders.

An encoder maps a word to a scalar: positional embedding, then layers
of attention heads (scalar-product scoring through a small network,
hardmax or softmax normalisation, pooled linear maps) combined by a
feed-forward network per position, and finally an output network
applied to the last position. A word is accepted iff the output is
exactly 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .arith import ArithmeticContext, EvaluationError, Rat, ZERO, ONE, rat_from_str, rat_to_str
from .fnn import Fnn, eval_fnn

NORM_HARDMAX = "hardmax"
NORM_SOFTMAX = "softmax"

SOFTMAX_EXP_DEGREE = 16

# Vectors are interned to small integers so per-pair caches (scores,
# projections) hash cheap int tuples instead of rational tuples.
_INTERN: dict = {}


def _intern(vec: tuple) -> int:
    vid = _INTERN.get(vec)
    if vid is None:
        vid = len(_INTERN)
        _INTERN[vec] = vid
    return vid


class Alphabet:
    """Ordered symbols with 1-based integer codes."""

    def __init__(self, symbols: Sequence[str]):
        symbols = list(symbols)
        if len(set(symbols)) != len(symbols):
            raise ValueError("alphabet symbols must be distinct")
        if not symbols:
            raise ValueError("alphabet must be non-empty")
        self.symbols = symbols
        self._code = {s: i + 1 for i, s in enumerate(symbols)}

    def code(self, symbol: str) -> int:
        try:
            return self._code[symbol]
        except KeyError:
            raise ValueError(f"unknown symbol {symbol!r}") from None

    def __len__(self):
        return len(self.symbols)

    def __contains__(self, symbol):
        return symbol in self._code

    def __iter__(self):
        return iter(self.symbols)


class TudecBuiltinEmbedding:
    """The tiling-reduction embedding: position 1 carries a flag, later
    positions carry the position index and its running triangular sum.

    emb(a, 1) = (1, 1, 1, 1, code(a))
    emb(a, i) = (0, 1, i, i(i+1)/2, code(a)) for i > 1
    """

    dim = 5
    variant = "tudec_builtin"

    def vector(self, code: int, i: int) -> tuple:
        if i == 1:
            return (ONE, ONE, ONE, ONE, Rat(code))
        return (ZERO, ONE, Rat(i), Rat(i * (i + 1), 2), Rat(code))

    def to_json(self) -> dict:
        return {"variant": self.variant}


class AdditivePeriodicEmbedding:
    """emb(a, i) = base(a) + positional(i mod p)."""

    variant = "additive_periodic"

    def __init__(self, base: dict, positional: Sequence[Sequence]):
        self.positional = [tuple(Rat(x) for x in v) for v in positional]
        if not self.positional:
            raise ValueError("positional table must be non-empty")
        self.base = {s: tuple(Rat(x) for x in v) for s, v in base.items()}
        dims = {len(v) for v in self.positional} | {len(v) for v in self.base.values()}
        if len(dims) != 1:
            raise ValueError("all embedding vectors must share one dimensionality")
        self.dim = dims.pop()

    @property
    def period(self) -> int:
        return len(self.positional)

    def vector_for_symbol(self, symbol: str, i: int) -> tuple:
        b = self.base[symbol]
        p = self.positional[i % self.period]
        return tuple(x + y for x, y in zip(b, p))

    def to_json(self) -> dict:
        return {
            "variant": self.variant,
            "base": {s: [rat_to_str(x) for x in v] for s, v in self.base.items()},
            "positional": [[rat_to_str(x) for x in v] for v in self.positional],
        }


class AttentionHead:
    """Scoring net over <Qx, Ky>, a normalisation, and a pooling matrix."""

    __slots__ = ("q_matrix", "k_matrix", "score_net", "pool_matrix", "norm",
                 "_qx", "_kx", "_wx", "_score")

    def __init__(self, q_matrix, k_matrix, score_net: Fnn, pool_matrix, norm: str):
        self.q_matrix = tuple(tuple(Rat(w) for w in row) for row in q_matrix)
        self.k_matrix = tuple(tuple(Rat(w) for w in row) for row in k_matrix)
        if len(self.q_matrix) != len(self.k_matrix):
            raise ValueError("Q and K must have equal row counts")
        if score_net.input_dim != 1:
            raise ValueError("scoring net must be scalar to scalar")
        self.score_net = score_net
        self.pool_matrix = tuple(tuple(Rat(w) for w in row) for row in pool_matrix)
        if norm not in (NORM_HARDMAX, NORM_SOFTMAX):
            raise ValueError(f"unknown normalisation {norm!r}")
        self.norm = norm
        self._qx, self._kx, self._wx, self._score = {}, {}, {}, {}

    @property
    def out_dim(self) -> int:
        return len(self.pool_matrix)

    def _matvec(self, matrix, x, ctx):
        exact = ctx.fmt is None
        out = []
        for row in matrix:
            acc = ZERO
            for w, v in zip(row, x):
                if w != 0:
                    if exact:
                        acc = acc + w * v
                    else:
                        acc = ctx.add(acc, ctx.mul(w, v))
            out.append(acc)
        return tuple(out)

    def score(self, x_m, x_j, ctx: ArithmeticContext) -> Rat:
        return self.score_ids(x_m, x_j, _intern(x_m), _intern(x_j), ctx)

    def score_ids(self, x_m, x_j, mid: int, jid: int,
                  ctx: ArithmeticContext) -> Rat:
        fmt = ctx.fmt
        key = (mid, jid, fmt)
        got = self._score.get(key)
        if got is not None:
            return got
        qk = (mid, fmt)
        qx = self._qx.get(qk)
        if qx is None:
            qx = self._qx[qk] = self._matvec(self.q_matrix, x_m, ctx)
        kk = (jid, fmt)
        kx = self._kx.get(kk)
        if kx is None:
            kx = self._kx[kk] = self._matvec(self.k_matrix, x_j, ctx)
        if fmt is None:
            dot = ZERO
            for a, b in zip(qx, kx):
                dot = dot + a * b
        else:
            dot = ZERO
            for a, b in zip(qx, kx):
                dot = ctx.add(dot, ctx.mul(a, b))
        s = eval_fnn(self.score_net, (dot,), ctx)[0]
        self._score[key] = s
        return s

    def pooled(self, x, ctx: ArithmeticContext) -> tuple:
        return self.pooled_id(x, _intern(x), ctx)

    def pooled_id(self, x, xid: int, ctx: ArithmeticContext) -> tuple:
        key = (xid, ctx.fmt)
        got = self._wx.get(key)
        if got is None:
            got = self._wx[key] = self._matvec(self.pool_matrix, x, ctx)
        return got

    def to_json(self) -> dict:
        return {
            "q": [[rat_to_str(w) for w in row] for row in self.q_matrix],
            "k": [[rat_to_str(w) for w in row] for row in self.k_matrix],
            "score_net": self.score_net.to_json(),
            "pool_w": [[rat_to_str(w) for w in row] for row in self.pool_matrix],
            "norm": self.norm,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "AttentionHead":
        return cls(
            q_matrix=[[rat_from_str(w) for w in row] for row in obj["q"]],
            k_matrix=[[rat_from_str(w) for w in row] for row in obj["k"]],
            score_net=Fnn.from_json(obj["score_net"]),
            pool_matrix=[[rat_from_str(w) for w in row] for row in obj["pool_w"]],
            norm=obj["norm"],
        )


@dataclass
class Layer:
    heads: list
    comb: Fnn

    def to_json(self) -> dict:
        return {"heads": [h.to_json() for h in self.heads], "comb": self.comb.to_json()}

    @classmethod
    def from_json(cls, obj: dict) -> "Layer":
        return cls(
            heads=[AttentionHead.from_json(h) for h in obj["heads"]],
            comb=Fnn.from_json(obj["comb"]),
        )


@dataclass
class EvalTrace:
    """Per-layer vector sequences and per-head score/weight matrices."""

    sequences: list  # sequences[i] = list of vectors after layer i (0 = embedding)
    scores: list  # scores[i][j][m-1] = score row of head j in layer i+1 at query m
    weights: list  # same shape, normalized weights

    @property
    def vector_set(self):
        return {x for seq in self.sequences for x in seq}


@dataclass(frozen=True)
class TeComplexity:
    sigma: int
    depth: int
    width: int
    dim: int
    period: Optional[int] = None
    bits: Optional[int] = None

    @property
    def value(self) -> int:
        total = self.sigma + self.depth + self.width + self.dim
        if self.period is not None:
            total += self.period
        if self.bits is not None:
            total += self.bits
        return total

    def to_json(self) -> dict:
        out = {
            "sigma": self.sigma,
            "depth": self.depth,
            "width": self.width,
            "dim": self.dim,
            "value": self.value,
        }
        if self.period is not None:
            out["period"] = self.period
        if self.bits is not None:
            out["bits"] = self.bits
        return out


class TransformerEncoder:
    def __init__(self, alphabet: Alphabet, embedding, layers: Sequence[Layer], out: Fnn):
        dim = embedding.dim
        for li, layer in enumerate(layers):
            head_dims = sum(h.out_dim for h in layer.heads)
            if layer.comb.input_dim != dim + head_dims:
                raise ValueError(
                    f"layer {li + 1}: comb expects {layer.comb.input_dim} inputs, "
                    f"wiring provides {dim + head_dims}"
                )
            dim = layer.comb.output_dim
        if out.input_dim != dim:
            raise ValueError("output net dimensionality mismatch")
        if out.output_dim != 1:
            raise ValueError("output net must be scalar")
        self.alphabet = alphabet
        self.embedding = embedding
        self.layers = list(layers)
        self.out = out

    def complexity(self, fmt=None) -> TeComplexity:
        dims = [self.embedding.dim]
        for layer in self.layers:
            dims.extend(h.out_dim for h in layer.heads)
            dims.append(layer.comb.output_dim)
        period = getattr(self.embedding, "period", None)
        return TeComplexity(
            sigma=len(self.alphabet),
            depth=len(self.layers),
            width=max((len(l.heads) for l in self.layers), default=0),
            dim=max(dims),
            period=period,
            bits=None if fmt is None else fmt.total_bits,
        )

    def to_json(self) -> dict:
        return {
            "alphabet": list(self.alphabet.symbols),
            "embedding": self.embedding.to_json(),
            "layers": [l.to_json() for l in self.layers],
            "out": self.out.to_json(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "TransformerEncoder":
        emb_obj = obj["embedding"]
        if emb_obj["variant"] == "tudec_builtin":
            embedding = TudecBuiltinEmbedding()
        elif emb_obj["variant"] == "additive_periodic":
            embedding = AdditivePeriodicEmbedding(
                base={s: [rat_from_str(x) for x in v] for s, v in emb_obj["base"].items()},
                positional=[[rat_from_str(x) for x in v] for v in emb_obj["positional"]],
            )
        else:
            raise ValueError(f"unknown embedding variant {emb_obj['variant']!r}")
        return cls(
            alphabet=Alphabet(obj["alphabet"]),
            embedding=embedding,
            layers=[Layer.from_json(l) for l in obj["layers"]],
            out=Fnn.from_json(obj["out"]),
        )


def embed(te: TransformerEncoder, word: Sequence[str], ctx: ArithmeticContext) -> list:
    """Embedding vectors for each position, brought into the context's
    value set (fixed-width mode quantizes componentwise)."""
    if not word:
        raise ValueError("empty word")
    vectors = []
    for i, symbol in enumerate(word, start=1):
        if symbol not in te.alphabet:
            raise ValueError(f"unknown symbol {symbol!r}")
        emb = te.embedding
        if isinstance(emb, TudecBuiltinEmbedding):
            vec = emb.vector(te.alphabet.code(symbol), i)
        else:
            vec = emb.vector_for_symbol(symbol, i)
        vectors.append(tuple(ctx.normalize(x) for x in vec))
    return vectors


def _exp_taylor(s: Rat, degree: int) -> Rat:
    acc = ONE
    term = ONE
    for k in range(1, degree + 1):
        term = term * s / k
        acc = acc + term
    return acc


def normalize_weight(norm: str, i: int, scores: Sequence[Rat], ctx: ArithmeticContext,
                     exp_degree: int = SOFTMAX_EXP_DEGREE) -> Rat:
    """Weight of 1-based position i given the full score list."""
    if not scores:
        raise ValueError("empty score list")
    if not 1 <= i <= len(scores):
        raise ValueError("position out of range")
    if norm == NORM_HARDMAX:
        top = max(scores)
        if scores[i - 1] != top:
            return ZERO
        return ctx.div(1, sum(1 for s in scores if s == top))
    # softmax: exact rational exp approximation, division through ctx
    exps = [_exp_taylor(s, exp_degree) for s in scores]
    return ctx.div(exps[i - 1], sum(exps))


def head_scores(head: AttentionHead, seq: Sequence[tuple], m: int,
                ctx: ArithmeticContext) -> list:
    if not 1 <= m <= len(seq):
        raise ValueError("query position out of range")
    x_m = seq[m - 1]
    return [head.score(x_m, x_j, ctx) for x_j in seq]


def _weights_for(head, scores, ctx):
    if head.norm == NORM_HARDMAX:
        top = max(scores)
        m = sum(1 for s in scores if s == top)
        w = ctx.div(1, m)
        return [w if s == top else ZERO for s in scores]
    exps = [_exp_taylor(s, SOFTMAX_EXP_DEGREE) for s in scores]
    total = sum(exps)
    return [ctx.div(e, total) for e in exps]


def head_pool(head: AttentionHead, seq: Sequence[tuple], m: int,
              ctx: ArithmeticContext) -> tuple:
    scores = head_scores(head, seq, m, ctx)
    weights = _weights_for(head, scores, ctx)
    return _pool(head, seq, weights, ctx)


def _pool(head, seq, weights, ctx, ids=None):
    # positions are folded in ascending order independently per component
    if ids is None:
        ids = [_intern(x) for x in seq]
    dim = head.out_dim
    rng = range(dim)
    accs = [ZERO] * dim
    exact = ctx.fmt is None
    for w, x, xid in zip(weights, seq, ids):
        if w == 0:
            continue
        wx = head.pooled_id(x, xid, ctx)
        if exact:
            if w == 1:
                for c in rng:
                    accs[c] = accs[c] + wx[c]
            else:
                for c in rng:
                    accs[c] = accs[c] + w * wx[c]
        else:
            for c in rng:
                accs[c] = ctx.add(accs[c], ctx.mul(w, wx[c]))
    return tuple(accs)


def attends_to(head: AttentionHead, seq: Sequence[tuple], m: int,
               ctx: ArithmeticContext) -> set:
    """Argmax position set of a hardmax head (1-based)."""
    if head.norm != NORM_HARDMAX:
        raise ValueError("attends_to is only defined for hardmax heads")
    scores = head_scores(head, seq, m, ctx)
    top = max(scores)
    return {j for j, s in enumerate(scores, start=1) if s == top}


def evaluate(te: TransformerEncoder, word: Sequence[str],
             ctx: ArithmeticContext) -> tuple:
    """Deterministic evaluation; returns (output scalar, trace)."""
    seq = embed(te, word, ctx)
    n = len(seq)
    sequences = [list(seq)]
    all_scores, all_weights = [], []
    for layer in te.layers:
        layer_scores = [[] for _ in layer.heads]
        layer_weights = [[] for _ in layer.heads]
        ids = [_intern(x) for x in seq]
        new_seq = []
        for m in range(1, n + 1):
            x_m = seq[m - 1]
            mid = ids[m - 1]
            comb_input = list(x_m)
            for j, head in enumerate(layer.heads):
                scores = [head.score_ids(x_m, x_j, mid, jid, ctx)
                          for x_j, jid in zip(seq, ids)]
                weights = _weights_for(head, scores, ctx)
                layer_scores[j].append(scores)
                layer_weights[j].append(weights)
                comb_input.extend(_pool(head, seq, weights, ctx, ids))
            new_seq.append(eval_fnn(layer.comb, comb_input, ctx))
        seq = new_seq
        sequences.append(list(seq))
        all_scores.append(layer_scores)
        all_weights.append(layer_weights)
    output = eval_fnn(te.out, seq[n - 1], ctx)[0]
    trace = EvalTrace(sequences=sequences, scores=all_scores, weights=all_weights)
    return output, trace


def accepts(te: TransformerEncoder, word: Sequence[str],
            ctx: ArithmeticContext) -> bool:
    output, _ = evaluate(te, word, ctx)
    return output == 1
