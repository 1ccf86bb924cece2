"""Third-order Taylor jets and a reverse-mode adjoint graph over jet arithmetic.

A jet carries a value and its first three derivatives with respect to the
scalar input variable.  Forward arithmetic propagates whole jets, so a single
network evaluation yields every derivative a residual can ask for.  Reverse
accumulation runs over the recorded jet operations: the adjoint of a jet node
is itself a jet (one sensitivity per coefficient), while parameters and
scalars obtained by coefficient extraction carry plain array adjoints.

Jet node values are ndarrays of shape (rows, batch, 4) with the coefficient
axis last; plain node values are ndarrays of shape (batch,) or ().
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

JET_ORDER = 3
N_COEFFS = JET_ORDER + 1

ELEMENTARY = ("tanh", "exp", "ln", "sin", "cos", "reciprocal", "power")


class DomainError(ValueError):
    """An elementary function or a residual was evaluated outside its domain."""


# ---------------------------------------------------------------------------
# raw kernels on coefficient arrays (shape (..., 4))
# ---------------------------------------------------------------------------

def _kadd(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a + b


def _kmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Leibniz product of derivative-coefficient jets, truncated at order 3."""
    out = np.empty(np.broadcast_shapes(a.shape, b.shape))
    a0, a1, a2, a3 = a[..., 0], a[..., 1], a[..., 2], a[..., 3]
    b0, b1, b2, b3 = b[..., 0], b[..., 1], b[..., 2], b[..., 3]
    out[..., 0] = a0 * b0
    out[..., 1] = a1 * b0 + a0 * b1
    out[..., 2] = a2 * b0 + 2.0 * a1 * b1 + a0 * b2
    out[..., 3] = a3 * b0 + 3.0 * a2 * b1 + 3.0 * a1 * b2 + a0 * b3
    return out


def _kmul_t(ybar: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Transpose of jet multiplication by b, applied to an adjoint jet.

    If y = mul(a, b) then abar[j] = sum_k binom(k, j) * b[k - j] * ybar[k];
    this is the exact coefficient-space transpose of the Leibniz product.
    """
    out = np.empty(np.broadcast_shapes(ybar.shape, b.shape))
    y0, y1, y2, y3 = ybar[..., 0], ybar[..., 1], ybar[..., 2], ybar[..., 3]
    b0, b1, b2, b3 = b[..., 0], b[..., 1], b[..., 2], b[..., 3]
    out[..., 0] = y0 * b0 + y1 * b1 + y2 * b2 + y3 * b3
    out[..., 1] = y1 * b0 + 2.0 * y2 * b1 + 3.0 * y3 * b2
    out[..., 2] = y2 * b0 + 3.0 * y3 * b1
    out[..., 3] = y3 * b0
    return out


def _derivative_table(fname: str, x: np.ndarray, power: float | None = None):
    """Derivatives f, f', f'', f''', f'''' of an elementary function at x.

    The fourth derivative is needed because the adjoint of an order-3
    composition perturbs the base point of the order-3 chain.
    """
    if fname == "tanh":
        # value via exp in the overflow-safe half-domain form; the derivative
        # chain is generated from the value itself through 1 - tanh^2
        s = np.exp(-2.0 * np.abs(x))
        t = np.sign(x) * (1.0 - s) / (1.0 + s)
        p = 1.0 - t * t
        tt = t * t
        return t, p, -2.0 * t * p, p * (6.0 * tt - 2.0), p * (16.0 * t - 24.0 * tt * t)
    if fname == "exp":
        e = np.exp(x)
        return e, e, e, e, e
    if fname == "ln":
        if np.any(x <= 0.0):
            raise DomainError("ln requires a positive argument")
        i = 1.0 / x
        ii = i * i
        return np.log(x), i, -ii, 2.0 * ii * i, -6.0 * ii * ii
    if fname == "sin":
        s, c = np.sin(x), np.cos(x)
        return s, c, -s, -c, s
    if fname == "cos":
        s, c = np.sin(x), np.cos(x)
        return c, -s, -c, s, c
    if fname == "reciprocal":
        if np.any(x == 0.0):
            raise DomainError("reciprocal of zero")
        i = 1.0 / x
        ii = i * i
        return i, -ii, 2.0 * ii * i, -6.0 * ii * ii, 24.0 * ii * ii * i
    if fname == "power":
        if power is None:
            raise ValueError("power requires an exponent")
        p = float(power)
        if p != round(p) and np.any(x <= 0.0):
            raise DomainError("non-integer power requires a positive base")
        tables = []
        coeff = 1.0
        for k in range(5):
            if k > 0:
                coeff *= p - (k - 1)
            if coeff == 0.0:
                tables.append(np.zeros_like(np.asarray(x, dtype=float)))
                continue
            e = p - k
            if e < 0 and np.any(x == 0.0):
                raise DomainError("negative power of zero")
            tables.append(coeff * x ** e)
        return tuple(tables)
    raise ValueError(f"unknown elementary function {fname!r}")


def _kcompose(f0, f1, f2, f3, a: np.ndarray) -> np.ndarray:
    """Order-3 chain rule: compose derivative tables with the inner jet a."""
    out = np.empty(a.shape)
    a1, a2, a3 = a[..., 1], a[..., 2], a[..., 3]
    out[..., 0] = f0
    out[..., 1] = f1 * a1
    a1sq = a1 * a1
    out[..., 2] = f2 * a1sq + f1 * a2
    out[..., 3] = f3 * a1sq * a1 + 3.0 * f2 * a1 * a2 + f1 * a3
    return out


def _kelem(fname: str, a: np.ndarray, power: float | None = None):
    tables = _derivative_table(fname, a[..., 0], power)
    return _kcompose(tables[0], tables[1], tables[2], tables[3], a), tables


# ---------------------------------------------------------------------------
# scalar jets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Jet3:
    """Value and first three derivatives with respect to the input variable."""

    c0: float
    c1: float
    c2: float
    c3: float

    @classmethod
    def variable(cls, t0: float) -> "Jet3":
        """Jet of the input variable itself, evaluated at t0."""
        return cls(float(t0), 1.0, 0.0, 0.0)

    @classmethod
    def constant(cls, value: float) -> "Jet3":
        return cls(float(value), 0.0, 0.0, 0.0)

    @classmethod
    def from_array(cls, coeffs) -> "Jet3":
        c = np.asarray(coeffs, dtype=float)
        if c.shape != (N_COEFFS,):
            raise ValueError(f"expected {N_COEFFS} coefficients, got shape {c.shape}")
        return cls(float(c[0]), float(c[1]), float(c[2]), float(c[3]))

    def as_array(self) -> np.ndarray:
        return np.array([self.c0, self.c1, self.c2, self.c3])


def jet_add(a: Jet3, b: Jet3) -> Jet3:
    return Jet3(a.c0 + b.c0, a.c1 + b.c1, a.c2 + b.c2, a.c3 + b.c3)


def jet_mul(a: Jet3, b: Jet3) -> Jet3:
    return Jet3.from_array(_kmul(a.as_array(), b.as_array()))


def jet_elem(fname: str, a: Jet3, power: float | None = None) -> Jet3:
    if fname not in ELEMENTARY:
        raise ValueError(f"unknown elementary function {fname!r}")
    value, _ = _kelem(fname, a.as_array(), power)
    return Jet3.from_array(value)


# ---------------------------------------------------------------------------
# adjoint graph
# ---------------------------------------------------------------------------

_LEAVES = frozenset({"input", "const_jet", "const", "param"})


class Node:
    """One recorded value in an AdjointGraph."""

    __slots__ = ("graph", "index", "op", "args", "aux", "value", "kind",
                 "needs_grad", "adjoint", "cache")

    def __init__(self, graph, index, op, args, aux, value, kind, needs_grad):
        self.graph = graph
        self.index = index
        self.op = op
        self.args = args
        self.aux = aux
        self.value = value
        self.kind = kind
        self.needs_grad = needs_grad
        self.adjoint = None
        self.cache = None

    # arithmetic sugar so residual builders read like the equations they encode
    def _lift(self, other):
        return self.graph.lift(other, self.kind)

    def __add__(self, other):
        return self.graph.add(self, self._lift(other))

    def __radd__(self, other):
        return self.graph.add(self._lift(other), self)

    def __sub__(self, other):
        return self.graph.sub(self, self._lift(other))

    def __rsub__(self, other):
        return self.graph.sub(self._lift(other), self)

    def __mul__(self, other):
        return self.graph.mul(self, self._lift(other))

    def __rmul__(self, other):
        return self.graph.mul(self._lift(other), self)

    def __truediv__(self, other):
        return self.graph.div(self, self._lift(other))

    def __rtruediv__(self, other):
        return self.graph.div(self._lift(other), self)

    def __neg__(self):
        return self.graph.scale_shift(self, -1.0, 0.0)

    def __pow__(self, n):
        if not isinstance(n, int) or n < 1 or n > 4:
            raise ValueError("only small positive integer powers are supported on nodes")
        out = self
        for _ in range(n - 1):
            out = self.graph.mul(out, self)
        return out

    def exp(self):
        return self.graph.exp(self)

    def pick(self, i: int):
        return self.graph.pick(self, i)


def _forward_add(node, vals):
    return vals[0] + vals[1]


def _forward_sub(node, vals):
    return vals[0] - vals[1]


def _forward_mul(node, vals):
    if node.kind == "jet":
        return _kmul(vals[0], vals[1])
    return vals[0] * vals[1]


def _forward_div(node, vals):
    return vals[0] / vals[1]


def _forward_scale_shift(node, vals):
    scale, shift = node.aux
    out = vals[0] * scale
    if shift != 0.0:
        if node.kind == "jet":
            out[..., 0] += shift
        else:
            out = out + shift
    return out


def _forward_elem(node, vals):
    fname, power = node.aux
    return _kelem(fname, vals[0], power)[0]


def _forward_exp(node, vals):
    return np.exp(vals[0])


def _forward_affine(node, vals):
    x, w, b = vals
    rows, batch, _ = x.shape
    out = (w @ x.reshape(rows, batch * N_COEFFS)).reshape(w.shape[0], batch, N_COEFFS)
    out[..., 0] += b[:, None]
    return out


def _forward_extract(node, vals):
    row, k = node.aux
    return vals[0][row, :, k]


def _forward_pick(node, vals):
    return vals[0][node.aux]


def _forward_sum(node, vals):
    return np.add.reduce(vals[0], axis=None)


_FORWARD: dict[str, Callable] = {
    "add": _forward_add,
    "sub": _forward_sub,
    "mul": _forward_mul,
    "div": _forward_div,
    "scale_shift": _forward_scale_shift,
    "elem": _forward_elem,
    "exp": _forward_exp,
    "affine": _forward_affine,
    "extract": _forward_extract,
    "pick": _forward_pick,
    "sum": _forward_sum,
}


def _acc(arg: Node, contrib: np.ndarray, owned: bool = True) -> None:
    """Accumulate an adjoint contribution, reducing over broadcast axes."""
    if not arg.needs_grad:
        return
    target = arg.value.shape
    c = np.asarray(contrib)
    if c.shape != target:
        extra = c.ndim - len(target)
        if extra > 0:
            c = c.sum(axis=tuple(range(extra)))
        axes = tuple(i for i, n in enumerate(target) if n == 1 and c.shape[i] != 1)
        if axes:
            c = c.sum(axis=axes, keepdims=True)
        owned = True
    if arg.adjoint is None:
        arg.adjoint = c if owned else c.copy()
    else:
        arg.adjoint += c


def _vjp_add(node):
    a, b = node.args
    _acc(a, node.adjoint, owned=False)
    _acc(b, node.adjoint, owned=False)


def _vjp_sub(node):
    a, b = node.args
    _acc(a, node.adjoint, owned=False)
    _acc(b, -node.adjoint)


def _vjp_mul(node):
    a, b = node.args
    if node.kind == "jet":
        if a.needs_grad:
            _acc(a, _kmul_t(node.adjoint, b.value))
        if b.needs_grad:
            _acc(b, _kmul_t(node.adjoint, a.value))
    else:
        _acc(a, node.adjoint * b.value)
        _acc(b, node.adjoint * a.value)


def _vjp_div(node):
    a, b = node.args
    _acc(a, node.adjoint / b.value)
    _acc(b, -node.adjoint * node.value / b.value)


def _vjp_scale_shift(node):
    _acc(node.args[0], node.adjoint * node.aux[0])


def _vjp_elem(node):
    a = node.args[0]
    if not a.needs_grad:
        return
    _, f1, f2, f3, f4 = node.cache
    inner = _kcompose(f1, f2, f3, f4, a.value)
    _acc(a, _kmul_t(node.adjoint, inner))


def _vjp_exp(node):
    _acc(node.args[0], node.adjoint * node.value)


def _vjp_affine(node):
    x, w, b = node.args
    g = np.ascontiguousarray(node.adjoint)
    out_dim, batch, _ = g.shape
    gm = g.reshape(out_dim, batch * N_COEFFS)
    if x.needs_grad:
        xbar = (w.value.T @ gm).reshape(x.value.shape)
        _acc(x, xbar)
    if w.needs_grad:
        xm = np.ascontiguousarray(x.value).reshape(x.value.shape[0], batch * N_COEFFS)
        _acc(w, gm @ xm.T)
    if b.needs_grad:
        _acc(b, g[..., 0].sum(axis=1))


def _vjp_extract(node):
    a = node.args[0]
    if not a.needs_grad:
        return
    row, k = node.aux
    z = np.zeros(a.value.shape)
    z[row, :, k] = node.adjoint
    _acc(a, z)


def _vjp_pick(node):
    a = node.args[0]
    if not a.needs_grad:
        return
    z = np.zeros(a.value.shape)
    z[node.aux] = node.adjoint
    _acc(a, z)


def _vjp_sum(node):
    a = node.args[0]
    if not a.needs_grad:
        return
    _acc(a, np.full(a.value.shape, float(node.adjoint)))


_VJPS: dict[str, Callable[[Node], None]] = {
    "add": _vjp_add,
    "sub": _vjp_sub,
    "mul": _vjp_mul,
    "div": _vjp_div,
    "scale_shift": _vjp_scale_shift,
    "elem": _vjp_elem,
    "exp": _vjp_exp,
    "affine": _vjp_affine,
    "extract": _vjp_extract,
    "pick": _vjp_pick,
    "sum": _vjp_sum,
}


class AdjointGraph:
    """Append-only record of jet and scalar operations for reverse accumulation.

    Construction order is topological by definition, so the reverse pass is a
    single backward sweep that visits each node exactly once.
    """

    def __init__(self):
        self.nodes: list[Node] = []

    # ---- recording ----

    def _record(self, op, args, aux, value, kind, needs_grad=None) -> Node:
        for a in args:
            if a.graph is not self:
                raise ValueError("nodes belong to different graphs")
        if needs_grad is None:
            needs_grad = any(a.needs_grad for a in args)
        node = Node(self, len(self.nodes), op, tuple(args), aux,
                    np.asarray(value, dtype=float), kind, needs_grad)
        self.nodes.append(node)
        return node

    # ---- leaves ----

    def input(self, t_values) -> Node:
        """Jets of the input variable at the given points: (t, 1, 0, 0)."""
        t = np.asarray(t_values, dtype=float).ravel()
        value = np.zeros((1, t.size, N_COEFFS))
        value[0, :, 0] = t
        value[0, :, 1] = 1.0
        return self._record("input", (), None, value, "jet", needs_grad=False)

    def const_jet(self, coeffs) -> Node:
        value = np.asarray(coeffs, dtype=float)
        if value.ndim == 1:
            value = value.reshape(1, 1, N_COEFFS)
        elif value.ndim == 2:
            value = value.reshape(1, *value.shape)
        if value.ndim != 3 or value.shape[-1] != N_COEFFS:
            raise ValueError("constant jets must have 4 trailing coefficients")
        return self._record("const_jet", (), None, value, "jet", needs_grad=False)

    def const(self, values) -> Node:
        return self._record("const", (), None, values, "plain", needs_grad=False)

    def param(self, values) -> Node:
        """Plain leaf tracked for gradients; caller must not mutate `values`."""
        return self._record("param", (), None, values, "plain", needs_grad=True)

    # ---- coercion ----

    def lift(self, other, kind: str) -> Node:
        if isinstance(other, Node):
            if other.graph is not self:
                raise ValueError("nodes belong to different graphs")
            return other
        if isinstance(other, (int, float)):
            if kind == "jet":
                return self.const_jet([float(other), 0.0, 0.0, 0.0])
            return self.const(np.asarray(float(other)))
        if kind == "plain":
            return self.const(np.asarray(other, dtype=float))
        raise TypeError(f"cannot lift {type(other).__name__} to a jet node")

    # ---- operations ----

    def _binary(self, op, a, b):
        if a.kind != b.kind:
            raise ValueError(f"{op} requires nodes of the same kind, "
                             f"got {a.kind} and {b.kind}")
        node = self._record(op, (a, b), None, 0.0, a.kind)
        node.value = _FORWARD[op](node, [a.value, b.value])
        return node

    def add(self, a: Node, b: Node) -> Node:
        return self._binary("add", a, b)

    def sub(self, a: Node, b: Node) -> Node:
        return self._binary("sub", a, b)

    def mul(self, a: Node, b: Node) -> Node:
        return self._binary("mul", a, b)

    def div(self, a: Node, b: Node) -> Node:
        if a.kind == "jet":
            return self.mul(a, self.elem("reciprocal", b))
        return self._binary("div", a, b)

    def scale_shift(self, a: Node, scale: float, shift: float) -> Node:
        node = self._record("scale_shift", (a,), (float(scale), float(shift)), 0.0, a.kind)
        node.value = _FORWARD["scale_shift"](node, [a.value])
        return node

    def elem(self, fname: str, a: Node, power: float | None = None) -> Node:
        if a.kind != "jet":
            raise ValueError("elem operates on jet nodes")
        if fname not in ELEMENTARY:
            raise ValueError(f"unknown elementary function {fname!r}")
        value, tables = _kelem(fname, a.value, power)
        node = self._record("elem", (a,), (fname, power), value, "jet")
        node.cache = tables
        return node

    def exp(self, a: Node) -> Node:
        if a.kind == "jet":
            return self.elem("exp", a)
        return self._record("exp", (a,), None, np.exp(a.value), "plain")

    def affine(self, x: Node, w: Node, b: Node) -> Node:
        """w @ x + b applied coefficient-wise; w, b are constants of the input."""
        if x.kind != "jet" or w.kind != "plain" or b.kind != "plain":
            raise ValueError("affine expects a jet input and plain parameters")
        node = self._record("affine", (x, w, b), None, 0.0, "jet")
        node.value = _FORWARD["affine"](node, [x.value, w.value, b.value])
        return node

    def extract(self, a: Node, row: int, k: int) -> Node:
        """Coefficient k of the jets in the given row: a plain (batch,) node."""
        if a.kind != "jet":
            raise ValueError("extract operates on jet nodes")
        if not 0 <= k <= JET_ORDER:
            raise ValueError(f"coefficient index {k} out of range")
        return self._record("extract", (a,), (row, k), a.value[row, :, k], "plain")

    def pick(self, a: Node, i: int) -> Node:
        if a.kind != "plain":
            raise ValueError("pick operates on plain nodes")
        return self._record("pick", (a,), i, a.value[i], "plain")

    def sum(self, a: Node) -> Node:
        if a.kind != "plain":
            raise ValueError("sum operates on plain nodes")
        return self._record("sum", (a,), None, np.add.reduce(a.value, axis=None), "plain")

    # ---- reverse accumulation ----

    def backward(self, loss: Node) -> None:
        if loss.graph is not self:
            raise ValueError("loss node belongs to a different graph")
        if loss.kind != "plain" or loss.value.shape != ():
            raise ValueError("backward expects a scalar plain loss node")
        for node in self.nodes:
            node.adjoint = None
        loss.adjoint = np.ones(())
        for node in reversed(self.nodes):
            if node.adjoint is None or node.op in _LEAVES:
                continue
            _VJPS[node.op](node)

    # ---- replay ----

    def replay(self) -> list[np.ndarray]:
        """Recompute every node value from the recorded operations."""
        values: list[np.ndarray] = []
        for node in self.nodes:
            if node.op in _LEAVES:
                values.append(node.value)
            else:
                values.append(_FORWARD[node.op](node, [values[a.index] for a in node.args]))
        return values


def grad(loss: Node, params: Sequence[Node]) -> tuple[float, np.ndarray]:
    """Loss value and d loss / d params as one flat vector (reverse mode)."""
    loss.graph.backward(loss)
    parts = []
    for p in params:
        adj = p.adjoint if p.adjoint is not None else np.zeros_like(p.value)
        parts.append(np.asarray(adj, dtype=float).ravel())
    flat = np.concatenate(parts) if parts else np.zeros(0)
    return float(loss.value), flat
