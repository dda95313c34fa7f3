"""Feed-forward ReLU networks and the gadget algebra.

All scoring, combination and output functions of the workbench are
layered affine+ReLU networks over exact rational weights. The module
provides the basic predicate gadgets (absolute value, comparison,
equality, guarded implication, set membership, relation membership)
and the composition operators: parallel placement, sequential
composition and dimension selection.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .arith import ArithmeticContext, Rat, RatLike, ZERO, rat_from_str, rat_to_str

ACT_RELU = "relu"
ACT_IDENTITY = "identity"


@dataclass(frozen=True)
class FnnLayer:
    weights: tuple  # rows of Rat, row i feeds output neuron i
    bias: tuple
    activation: str

    @property
    def out_dim(self) -> int:
        return len(self.weights)

    @property
    def in_dim(self) -> int:
        return len(self.weights[0])


class Fnn:
    """A layered network; activation is relu everywhere except that the
    final layer may be identity (needed for scorings like -relu(x))."""

    __slots__ = ("input_dim", "layers", "_cache")

    def __init__(self, input_dim: int, layers: Sequence[FnnLayer]):
        if input_dim < 1:
            raise ValueError("input_dim must be positive")
        if not layers:
            raise ValueError("a network needs at least one layer")
        prev = input_dim
        for i, layer in enumerate(layers):
            if layer.in_dim != prev:
                raise ValueError(
                    f"layer {i}: expects {layer.in_dim} inputs, gets {prev}"
                )
            if len(layer.bias) != layer.out_dim:
                raise ValueError(f"layer {i}: bias/weight row count mismatch")
            if layer.activation == ACT_IDENTITY and i != len(layers) - 1:
                raise ValueError("identity activation only allowed on the last layer")
            if layer.activation not in (ACT_RELU, ACT_IDENTITY):
                raise ValueError(f"unknown activation {layer.activation!r}")
            prev = layer.out_dim
        self.input_dim = input_dim
        self.layers = tuple(layers)
        self._cache: dict = {}

    @property
    def output_dim(self) -> int:
        return self.layers[-1].out_dim

    @property
    def depth(self) -> int:
        return len(self.layers)

    def __call__(self, inputs, ctx: ArithmeticContext):
        return eval_fnn(self, inputs, ctx)

    def to_json(self) -> dict:
        return {
            "input_dim": self.input_dim,
            "layers": [
                {
                    "weights": [[rat_to_str(w) for w in row] for row in l.weights],
                    "bias": [rat_to_str(b) for b in l.bias],
                    "activation": l.activation,
                }
                for l in self.layers
            ],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Fnn":
        layers = [
            FnnLayer(
                weights=tuple(
                    tuple(rat_from_str(w) for w in row) for row in l["weights"]
                ),
                bias=tuple(rat_from_str(b) for b in l["bias"]),
                activation=l["activation"],
            )
            for l in obj["layers"]
        ]
        return cls(obj["input_dim"], layers)


def eval_fnn(net: Fnn, inputs, ctx: ArithmeticContext) -> tuple:
    """Layer-by-layer evaluation, every scalar operation through ctx.

    Results are memoized per (inputs, ctx); networks see a small set of
    distinct inputs in practice, which makes the exhaustive grids cheap.
    """
    vec = inputs if type(inputs) is tuple else tuple(inputs)
    if len(vec) != net.input_dim:
        raise ValueError(f"expected {net.input_dim} inputs, got {len(vec)}")
    key = (vec, ctx.fmt)
    got = net._cache.get(key)
    if got is not None:
        return got
    vec = tuple(Rat(x) for x in vec)
    exact = ctx.fmt is None
    for layer in net.layers:
        relu = layer.activation == ACT_RELU
        out = []
        for row, b in zip(layer.weights, layer.bias):
            if exact:
                acc = b
                for w, x in zip(row, vec):
                    if w != 0:
                        acc = acc + w * x
            else:
                acc = ctx.normalize(b)
                for w, x in zip(row, vec):
                    if w != 0:
                        acc = ctx.add(acc, ctx.mul(w, x))
            if relu and acc < 0:
                acc = ZERO
            out.append(acc)
        vec = tuple(out)
    net._cache[key] = vec
    return vec


def _q(x: RatLike) -> Rat:
    return Rat(x)


def affine_layer(rows, bias, activation=ACT_RELU) -> FnnLayer:
    return FnnLayer(
        weights=tuple(tuple(_q(w) for w in row) for row in rows),
        bias=tuple(_q(b) for b in bias),
        activation=activation,
    )


def identity_relu_layer(dim: int) -> FnnLayer:
    """Value-preserving layer; exact on non-negative inputs."""
    rows = [[1 if i == j else 0 for j in range(dim)] for i in range(dim)]
    return affine_layer(rows, [0] * dim, ACT_RELU)


def pad_to_depth(net: Fnn, depth: int) -> Fnn:
    """Append value-preserving relu layers until the net has `depth` layers.

    Sound whenever the net's outputs are non-negative, which holds for
    every gadget here by construction.
    """
    if net.depth >= depth:
        return net
    extra = [identity_relu_layer(net.output_dim) for _ in range(depth - net.depth)]
    return Fnn(net.input_dim, list(net.layers) + extra)


def par(nets: Sequence[Fnn]) -> Fnn:
    """Place networks next to each other over one shared input vector."""
    if not nets:
        raise ValueError("par of no networks")
    in_dim = nets[0].input_dim
    for n in nets:
        if n.input_dim != in_dim:
            raise ValueError("par requires equal input dimensionality")
    depth = max(n.depth for n in nets)
    nets = [pad_to_depth(n, depth) for n in nets]
    layers = []
    for li in range(depth):
        parts = [n.layers[li] for n in nets]
        acts = {p.activation for p in parts}
        if len(acts) != 1:
            raise ValueError("par requires matching activations per layer")
        in_sizes = [p.in_dim for p in parts]
        total_in = sum(in_sizes) if li > 0 else in_dim
        rows, bias = [], []
        offset = 0
        for p, isz in zip(parts, in_sizes):
            for row, b in zip(p.weights, p.bias):
                if li == 0:
                    rows.append(tuple(row))
                else:
                    full = [ZERO] * total_in
                    full[offset : offset + isz] = row
                    rows.append(tuple(full))
                bias.append(b)
            offset += isz
        layers.append(FnnLayer(tuple(rows), tuple(bias), parts[0].activation))
    return Fnn(in_dim, layers)


def seq(outer: Fnn, inner: Fnn) -> Fnn:
    """Sequential composition: x -> outer(inner(x)).

    If the inner net ends in an identity-activation layer, that affine
    map is folded into the outer net's first layer (exact rational
    weight composition at construction time), keeping identity
    activations confined to final layers.
    """
    if inner.output_dim != outer.input_dim:
        raise ValueError(
            f"seq: inner outputs {inner.output_dim}, outer expects {outer.input_dim}"
        )
    inner_layers = list(inner.layers)
    outer_layers = list(outer.layers)
    if inner_layers[-1].activation == ACT_IDENTITY:
        aff = inner_layers.pop()
        first = outer_layers[0]
        rows = tuple(
            tuple(
                sum(w * aw for w, aw in zip(row, col))
                for col in zip(*aff.weights)
            )
            for row in first.weights
        )
        bias = tuple(
            b + sum(w * ab for w, ab in zip(row, aff.bias))
            for row, b in zip(first.weights, first.bias)
        )
        outer_layers[0] = FnnLayer(rows, bias, first.activation)
    if not inner_layers:
        return Fnn(inner.input_dim, outer_layers)
    return Fnn(inner.input_dim, inner_layers + outer_layers)


def on_dims(net: Fnn, dims: Sequence[int], width: int) -> Fnn:
    """Lift a network to a wider input, reading only the selected
    0-based dimensions (in order) and weighting the rest with zero."""
    if len(dims) != net.input_dim:
        raise ValueError("on_dims: selection size must match the net's input_dim")
    if len(set(dims)) != len(dims):
        raise ValueError("on_dims: indices must be pairwise distinct")
    if any(d < 0 or d >= width for d in dims):
        raise ValueError("on_dims: index out of range")
    first = net.layers[0]
    rows = []
    for row in first.weights:
        full = [ZERO] * width
        for w, d in zip(row, dims):
            full[d] = w
        rows.append(tuple(full))
    lifted = FnnLayer(tuple(rows), first.bias, first.activation)
    return Fnn(width, [lifted] + list(net.layers[1:]))


def constant_net(value: RatLike, input_dim: int = 1) -> Fnn:
    """Constant non-negative output regardless of the input."""
    return Fnn(
        input_dim, [affine_layer([[0] * input_dim], [value], ACT_RELU)]
    )


# --- basic gadgets ---------------------------------------------------------


def gadget_abs() -> Fnn:
    """|x| as relu(relu(x) + relu(-x))."""
    return Fnn(
        1,
        [
            affine_layer([[1], [-1]], [0, 0]),
            affine_layer([[1, 1]], [0]),
        ],
    )


def gadget_lt() -> Fnn:
    """Clamped strict-comparison residue: 0 iff x1 + 1 <= x2, the value
    (x1 + 1) - x2 on (0;1), and 1 otherwise."""
    return Fnn(
        2,
        [
            affine_layer([[1, -1], [1, -1]], [1, 0]),
            affine_layer([[1, -1]], [0]),
        ],
    )


def gadget_eq() -> Fnn:
    """Clamped equality residue: 0 iff x1 = x2, |x2 - x1| on (0;1), else 1."""
    return Fnn(
        2,
        [
            affine_layer([[-1, 1], [-1, 1], [1, -1], [1, -1]], [0, -1, 0, -1]),
            affine_layer([[1, -1, 1, -1]], [0]),
        ],
    )


def gadget_guard(k: RatLike) -> Fnn:
    """Guarded pass-through relu(relu(x2) - k*relu(x1)): 0 when x1 = 1 or
    x1 = x2 = 0, otherwise relu(x2); valid for x1 in {0,1}, x2 in [0;k]."""
    if _q(k) <= 0:
        raise ValueError("guard bound k must be positive")
    return Fnn(
        2,
        [
            affine_layer([[0, 1], [1, 0]], [0, 0]),
            affine_layer([[1, -k]], [0]),
        ],
    )


def gadget_and(k: int) -> Fnn:
    """relu of the k-ary sum."""
    if k < 1:
        raise ValueError("need k >= 1")
    return Fnn(k, [affine_layer([[1] * k], [0])])


def gadget_eq_const(t: RatLike) -> Fnn:
    """0 iff x = t; in {0,1} on integer inputs."""
    t = _q(t)
    return Fnn(
        1,
        [
            affine_layer([[-1], [-1], [1], [1]], [t, t - 1, -t, -t - 1]),
            affine_layer([[1, -1, 1, -1]], [0]),
        ],
    )


def gadget_neq_const(t: RatLike) -> Fnn:
    """0 iff x != t on integer inputs; built as relu(1 - eq_const(x))."""
    flip = Fnn(1, [affine_layer([[-1]], [1])])
    return seq(flip, gadget_eq_const(t))


def _min2() -> Fnn:
    # min(a, b) = relu(b - relu(b - a)) for a, b >= 0
    return Fnn(
        2,
        [
            affine_layer([[-1, 1], [0, 1]], [0, 0]),
            affine_layer([[-1, 1]], [0]),
        ],
    )


def gadget_membership(members: Sequence[int], universe: Sequence[int]) -> Fnn:
    """Indicator on the universe: 0 on members, 1 on the rest.

    Realized as a min-tree over per-element equality gadgets; the empty
    member set yields the constant-1 network.
    """
    members = sorted(set(members))
    universe = set(universe)
    if not set(members) <= universe:
        raise ValueError("members must be a subset of the universe")
    if not members:
        return constant_net(1)
    acc = gadget_eq_const(members[0])
    for t in members[1:]:
        acc = seq(_min2(), par([acc, gadget_eq_const(t)]))
    return acc


def gadget_relation(pairs, universe: Sequence[int]) -> Fnn:
    """0 exactly on the relation, 1 on the rest of universe^2.

    One guarded branch per left element: when x1 equals the element, the
    branch passes the membership check of x2 against its image set.
    """
    universe = sorted(set(universe))
    pairs = set(pairs)
    for a, b in pairs:
        if a not in universe or b not in universe:
            raise ValueError("relation must be over universe^2")
    branches = []
    for s in universe:
        image = [b for a, b in pairs if a == s]
        branch = seq(
            gadget_guard(1),
            par(
                [
                    on_dims(gadget_eq_const(s), [0], 2),
                    on_dims(gadget_membership(image, universe), [1], 2),
                ]
            ),
        )
        branches.append(branch)
    return seq(gadget_and(len(branches)), par(branches))
