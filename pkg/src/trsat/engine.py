"""Satisfiability search and witness shortening.

Bounded satisfiability is exhaustive guess-and-check over all words up
to a length bound, in length-then-lexicographic order by symbol rank.
For quantized encoders with additive-periodic embeddings a budgeted
unbounded search and a signature-based witness-shortening procedure are
provided: two word prefixes with identical normalisation and pooling
behaviour on every reference-trace vector are interchangeable, so the
blocks between them can be cut; every cut is re-verified by direct
re-evaluation before it is kept.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from itertools import product
from typing import Optional, Sequence

from .arith import ArithmeticContext, ONE, ZERO
from .encoder import (
    AdditivePeriodicEmbedding,
    EvalTrace,
    NORM_HARDMAX,
    TransformerEncoder,
    _exp_taylor,
    _pool,
    _weights_for,
    accepts,
    evaluate,
)

OUTCOME_WITNESS = "witness"
OUTCOME_EXHAUSTED_BOUND = "exhausted_bound"
OUTCOME_EXHAUSTED_BUDGET = "exhausted_budget"


@dataclass
class SatResult:
    outcome: str
    witness: Optional[list]
    words_checked: int
    wall_time: float
    theoretical_bound_log2: Optional[int] = None

    @property
    def found(self) -> bool:
        return self.outcome == OUTCOME_WITNESS

    def to_json(self) -> dict:
        return {
            "outcome": self.outcome,
            "witness": self.witness,
            "words_checked": self.words_checked,
            "theoretical_bound_log2": self.theoretical_bound_log2,
        }


def _words_up_to(symbols: Sequence[str], max_len: int):
    for length in range(1, max_len + 1):
        for tup in product(symbols, repeat=length):
            yield list(tup)


def sat_bounded(te: TransformerEncoder, max_len: int,
                ctx: ArithmeticContext) -> SatResult:
    """First accepted word of length <= max_len in length-then-
    lexicographic order (by alphabet rank), or exhaustion."""
    if max_len < 1:
        raise ValueError("max_len must be positive")
    start = time.perf_counter()
    checked = 0
    for word in _words_up_to(te.alphabet.symbols, max_len):
        checked += 1
        if accepts(te, word, ctx):
            assert accepts(te, word, ctx)  # re-verify before returning
            return SatResult(OUTCOME_WITNESS, word, checked,
                             time.perf_counter() - start)
    return SatResult(OUTCOME_EXHAUSTED_BOUND, None, checked,
                     time.perf_counter() - start)


def _require_periodic_fixed(te: TransformerEncoder, ctx: ArithmeticContext):
    if not isinstance(te.embedding, AdditivePeriodicEmbedding):
        raise ValueError("requires an additive-periodic embedding")
    if ctx.is_exact:
        raise ValueError("requires a fixed-width arithmetic context")


@dataclass(frozen=True)
class Signature:
    """Canonical tables (layer, head, x[, x']) -> weight / pooled vector
    describing how a prefix normalises and pools every vector of a
    reference trace; equal signatures mean the prefixes are
    interchangeable as left context.

    The weight and pooling tables describe the prefix evaluated as a
    standalone word. They alone do not make equal prefixes safely
    interchangeable inside a longer word: a suffix position joining a
    hardmax tie re-divides the weight by the true tie count, and
    quantisation can collapse distinct counts (1/3 and 1/4 at two
    fractional bits) that diverge again once the suffix joins. The
    segment table closes that gap. Per layer, head and query vector it
    records, over the prefix segment of the reference trace itself, the
    exact maximal score together with the combined attention weight and
    the exact partial pooled sums the segment contributes for every
    possible number of suffix positions joining the tie (softmax heads
    record the full ordered score/row sequence instead). Equal segment
    tables therefore reproduce, operation for operation, the same
    partial state at the end of the prefix in any continuation.

    The boundary records the reference trace's vector at the prefix's
    last position on every level. It makes cuts that remove the tail of
    the word safe: the output is read at the last position, and equal
    boundaries mean the new last position carries the same vector the
    old one did."""

    norm_table: tuple
    pool_table: tuple
    segment_table: tuple
    boundary: tuple


def _external_weight(score, ctx_scores, norm, ctx):
    """Normalised weight a score would receive against a fixed context
    score list (the scored position itself is not part of the context)."""
    if norm == NORM_HARDMAX:
        top = max(ctx_scores)
        if score < top:
            return ZERO
        if score == top:
            return ctx.div(1, sum(1 for s in ctx_scores if s == top))
        return ONE
    exps_total = sum(_exp_taylor(s, 16) for s in ctx_scores)
    return ctx.div(_exp_taylor(score, 16), exps_total)


def _segment_entry(head, segment, x, ctx, horizon):
    """How a reference-trace segment behaves as the left part of any
    attention context for query x. For hardmax: the exact maximal score
    and, for each count of later positions joining the tie, the combined
    weight together with the partial pooled sums contributed by the
    segment (folded in ascending position order, exactly as pooling
    does). For softmax the full ordered score/row sequence is recorded,
    since every position contributes with a length-dependent weight."""
    scores = [head.score(x, v, ctx) for v in segment]
    if head.norm != NORM_HARDMAX:
        return ("softmax",
                tuple((s, head.pooled(v, ctx))
                      for v, s in zip(segment, scores)))
    top = max(scores)
    rows = [head.pooled(v, ctx)
            for v, s in zip(segment, scores) if s == top]
    m = len(rows)
    dim = head.out_dim
    per_tie = []
    for extra in range(horizon + 1):
        w = ctx.div(1, m + extra)
        accs = [ZERO] * dim
        for row in rows:
            for c in range(dim):
                accs[c] = ctx.add(accs[c], ctx.mul(w, row[c]))
        per_tie.append((w, tuple(accs)))
    return ("hardmax", top, tuple(per_tie))


def compute_signature(te: TransformerEncoder, u: Sequence[str],
                      ref_trace: EvalTrace,
                      ctx: ArithmeticContext) -> Signature:
    """Normalisation and pooling tables of the prefix u over all vectors
    occurring in the reference trace, per layer and head, plus the
    in-context segment tables of the reference trace restricted to the
    first len(u) positions and the boundary vectors at position len(u)."""
    _require_periodic_fixed(te, ctx)
    p = te.embedding.period
    if not u:
        raise ValueError("prefix must be non-empty")
    if len(u) % p != 0:
        raise ValueError("prefix length must be a multiple of the period")
    _, trace_u = evaluate(te, u, ctx)
    ref_len = len(ref_trace.sequences[0])
    # Tie counts beyond the point where 1/(m+extra) quantises to its
    # limit value contribute identical entries, so the tabulation stops
    # there (and never needs more positions than the reference word has).
    horizon = min((1 << ctx.fmt.frac_bits) + 1, ref_len)
    norm_entries = []
    pool_entries = []
    segment_entries = []
    for li, layer in enumerate(te.layers):
        context_seq = trace_u.sequences[li]
        ref_vectors = sorted(set(ref_trace.sequences[li]))
        segment = ref_trace.sequences[li][: len(u)]
        for hi, head in enumerate(layer.heads):
            for x in ref_vectors:
                ctx_scores = [head.score(x, v, ctx) for v in context_seq]
                for xp in ref_vectors:
                    s = head.score(x, xp, ctx)
                    w = _external_weight(s, ctx_scores, head.norm, ctx)
                    norm_entries.append(((li, hi, x, xp), w))
                weights = _weights_for(head, ctx_scores, ctx)
                pooled = _pool(head, context_seq, weights, ctx)
                pool_entries.append(((li, hi, x), pooled))
                segment_entries.append(
                    ((li, hi, x), _segment_entry(head, segment, x, ctx,
                                                 horizon)))
    boundary = tuple(seq[min(len(u), ref_len) - 1]
                     for seq in ref_trace.sequences)
    return Signature(tuple(sorted(norm_entries)), tuple(sorted(pool_entries)),
                     tuple(sorted(segment_entries)), boundary)


def reduce_witness(te: TransformerEncoder, word: Sequence[str],
                   ctx: ArithmeticContext, budget: int = 100) -> list:
    """Shorten an accepted word by cutting between period-block prefixes
    with equal signatures; a cut is kept only if re-evaluation leaves the
    output scalar unchanged. Terminates at a fixpoint or when the budget
    of attempted cuts runs out."""
    _require_periodic_fixed(te, ctx)
    word = list(word)
    ref_out, _ = evaluate(te, word, ctx)
    if ref_out != 1:
        raise ValueError("word is not accepted; nothing to shorten")
    p = te.embedding.period
    while budget > 0:
        _, ref_trace = evaluate(te, word, ctx)
        blocks = len(word) // p
        if blocks < 2:
            return word
        sigs = {h: compute_signature(te, word[: h * p], ref_trace, ctx)
                for h in range(1, blocks + 1)}
        cut = None
        for h1 in range(1, blocks):
            for h2 in range(h1 + 1, blocks + 1):
                if sigs[h1] != sigs[h2]:
                    continue
                candidate = word[: h1 * p] + word[h2 * p:]
                if not candidate:
                    continue
                budget -= 1
                if evaluate(te, candidate, ctx)[0] == ref_out:
                    cut = candidate
                    break
                if budget <= 0:
                    return word
            if cut is not None:
                break
        if cut is None:
            return word
        word = cut
    return word


def sat_unbounded_search(te: TransformerEncoder, ctx: ArithmeticContext,
                         budget_len: int) -> SatResult:
    """Budgeted exhaustive search for quantized periodic encoders. The
    short-word theorem bounds witnesses by 2^(|T|^6); that bound is
    reported, and acts as the search limit only when it undercuts the
    budget (degenerate encoders), distinguishing a genuinely exhausted
    bound from a merely exhausted budget."""
    _require_periodic_fixed(te, ctx)
    if budget_len < 1:
        raise ValueError("budget_len must be positive")
    comp = te.complexity(ctx.fmt)
    bound_log2 = comp.value ** 6
    if bound_log2 < 64 and (1 << bound_log2) <= budget_len:
        limit = 1 << bound_log2
        exhausted = OUTCOME_EXHAUSTED_BOUND
    else:
        limit = budget_len
        exhausted = OUTCOME_EXHAUSTED_BUDGET
    start = time.perf_counter()
    checked = 0
    for word in _words_up_to(te.alphabet.symbols, limit):
        checked += 1
        if accepts(te, word, ctx):
            return SatResult(OUTCOME_WITNESS, word, checked,
                             time.perf_counter() - start, bound_log2)
    return SatResult(exhausted, None, checked,
                     time.perf_counter() - start, bound_log2)
