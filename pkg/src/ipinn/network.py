"""Fully connected tanh networks evaluated on jets, with flat parameter IO."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .autodiff import AdjointGraph, Jet3, N_COEFFS, Node


@dataclass(frozen=True)
class MlpLayout:
    """Shape of a scalar-input multilayer perceptron.

    hidden_layers counts the tanh layers; the output layer is linear.
    """

    input_dim: int = 1
    hidden_layers: int = 5
    hidden_width: int = 40
    output_dim: int = 1

    def dims(self) -> list[int]:
        return ([self.input_dim]
                + [self.hidden_width] * self.hidden_layers
                + [self.output_dim])

    def layer_shapes(self) -> list[tuple[tuple[int, int], tuple[int]]]:
        d = self.dims()
        return [((d[i + 1], d[i]), (d[i + 1],)) for i in range(len(d) - 1)]

    def flat_size(self) -> int:
        return sum(w[0] * w[1] + b[0] for w, b in self.layer_shapes())


class ParamSet:
    """Structured layer parameters with a lossless flat-vector view."""

    def __init__(self, layout: MlpLayout, weights, biases):
        expected = layout.layer_shapes()
        if len(weights) != len(expected) or len(biases) != len(expected):
            raise ValueError("wrong number of layers for layout")
        self.layout = layout
        self.weights = [np.asarray(w, dtype=float) for w in weights]
        self.biases = [np.asarray(b, dtype=float) for b in biases]
        for (wsh, bsh), w, b in zip(expected, self.weights, self.biases):
            if w.shape != wsh or b.shape != bsh:
                raise ValueError(f"layer shape mismatch: {w.shape} vs {wsh}")

    def to_flat(self) -> np.ndarray:
        parts = []
        for w, b in zip(self.weights, self.biases):
            parts.append(w.ravel())
            parts.append(b)
        return np.concatenate(parts)

    @classmethod
    def from_flat(cls, layout: MlpLayout, flat) -> "ParamSet":
        flat = np.asarray(flat, dtype=float)
        if flat.shape != (layout.flat_size(),):
            raise ValueError(f"flat vector of length {flat.shape} does not fit layout "
                             f"({layout.flat_size()} expected)")
        weights, biases = [], []
        pos = 0
        for wsh, bsh in layout.layer_shapes():
            n = wsh[0] * wsh[1]
            weights.append(flat[pos:pos + n].reshape(wsh).copy())
            pos += n
            biases.append(flat[pos:pos + bsh[0]].copy())
            pos += bsh[0]
        return cls(layout, weights, biases)

    def copy(self) -> "ParamSet":
        return ParamSet(self.layout,
                        [w.copy() for w in self.weights],
                        [b.copy() for b in self.biases])


def init_mlp(layout: MlpLayout, seed: int) -> ParamSet:
    """Glorot-uniform weights, zero biases; bit-identical for identical seeds."""
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for (out_d, in_d), (b_d,) in layout.layer_shapes():
        bound = np.sqrt(6.0 / (in_d + out_d))
        weights.append(rng.uniform(-bound, bound, size=(out_d, in_d)))
        biases.append(np.zeros(b_d))
    return ParamSet(layout, weights, biases)


class OutputJet:
    """One network output row with cached coefficient extraction."""

    def __init__(self, graph: AdjointGraph, node: Node, row: int):
        self.graph = graph
        self.node = node
        self.row = row
        self._coeffs: dict[int, Node] = {}

    def d(self, k: int) -> Node:
        """Plain node holding the k-th derivative of this output per point."""
        if k not in self._coeffs:
            self._coeffs[k] = self.graph.extract(self.node, self.row, k)
        return self._coeffs[k]


def forward_on_graph(graph: AdjointGraph, params: ParamSet,
                     x_values) -> tuple[list[OutputJet], list[Node]]:
    """Record a batched jet forward pass; returns output views and param nodes."""
    h = graph.input(x_values)
    pnodes: list[Node] = []
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        wn = graph.param(w)
        bn = graph.param(b)
        pnodes.extend((wn, bn))
        h = graph.affine(h, wn, bn)
        if i < last:
            h = graph.elem("tanh", h)
    outs = [OutputJet(graph, h, j) for j in range(params.layout.output_dim)]
    return outs, pnodes


def mlp_forward(params: ParamSet, x: Jet3) -> list[Jet3]:
    """Evaluate the network on a single jet; pure, no gradient bookkeeping."""
    graph = AdjointGraph()
    h = graph.const_jet(x.as_array().reshape(1, 1, N_COEFFS))
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        h = graph.affine(h, graph.const(w), graph.const(b))
        if i < last:
            h = graph.elem("tanh", h)
    return [Jet3.from_array(h.value[j, 0]) for j in range(params.layout.output_dim)]


def mlp_values(params: ParamSet, x_values) -> np.ndarray:
    """Network output values only, as an (output_dim, n) array; plain numpy."""
    h = np.asarray(x_values, dtype=float).reshape(1, -1)
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        h = w @ h + b[:, None]
        if i < last:
            h = np.tanh(h)
    return h


def save_weights(path, params: ParamSet, seed: int | None = None) -> None:
    """JSON header line (layout and seed) then the flat vector, little-endian f8."""
    layout = params.layout
    header = {
        "layout": {
            "input_dim": layout.input_dim,
            "hidden_layers": layout.hidden_layers,
            "hidden_width": layout.hidden_width,
            "output_dim": layout.output_dim,
        },
        "seed": seed,
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8"))
        fh.write(b"\n")
        fh.write(params.to_flat().astype("<f8").tobytes())


def load_weights(path) -> tuple[ParamSet, int | None]:
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode("utf-8"))
        flat = np.frombuffer(fh.read(), dtype="<f8")
    layout = MlpLayout(**header["layout"])
    return ParamSet.from_flat(layout, flat), header["seed"]
