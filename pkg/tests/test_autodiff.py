"""Jet arithmetic and reverse-mode graph tests."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import checks
import oracles
from ipinn.autodiff import (
    AdjointGraph,
    DomainError,
    Jet3,
    N_COEFFS,
    grad,
    jet_add,
    jet_elem,
    jet_mul,
)
from ipinn.network import MlpLayout, ParamSet, forward_on_graph, init_mlp

# ---------------------------------------------------------------------------
# frozen scalar-jet values
# ---------------------------------------------------------------------------


def test_square_jet_at_two():
    t = Jet3.variable(2.0)
    assert jet_mul(t, t) == Jet3(4.0, 4.0, 2.0, 0.0)


def test_exp_jet_at_zero():
    got = jet_elem("exp", Jet3.variable(0.0))
    assert got == Jet3(1.0, 1.0, 1.0, 1.0)


def test_tanh_jet_at_zero():
    got = jet_elem("tanh", Jet3.variable(0.0))
    assert got == Jet3(0.0, 1.0, 0.0, -2.0)


def test_sin_jet_at_half_pi():
    got = jet_elem("sin", Jet3.variable(math.pi / 2.0)).as_array()
    assert np.abs(got - [1.0, 0.0, -1.0, 0.0]).max() < 1e-15


def test_product_rule_sin_cos():
    t0 = 0.7
    got = jet_mul(jet_elem("sin", Jet3.variable(t0)),
                  jet_elem("cos", Jet3.variable(t0)))
    s, c = math.sin(2.0 * t0), math.cos(2.0 * t0)
    want = np.array([0.5 * s, c, -2.0 * s, -4.0 * c])
    assert np.abs(got.as_array() - want).max() < 1e-14


def test_constant_jet_has_no_derivatives():
    assert Jet3.constant(3.0) == Jet3(3.0, 0.0, 0.0, 0.0)


def test_power_matches_repeated_multiplication():
    t = Jet3.variable(1.3)
    cubed = jet_elem("power", t, power=3.0)
    assert np.abs(cubed.as_array()
                  - jet_mul(jet_mul(t, t), t).as_array()).max() < 1e-12


def test_from_array_roundtrip_and_shape_guard():
    j = Jet3.from_array([1.0, 2.0, 3.0, 4.0])
    assert np.array_equal(j.as_array(), [1.0, 2.0, 3.0, 4.0])
    with pytest.raises(ValueError):
        Jet3.from_array([1.0, 2.0])


# ---------------------------------------------------------------------------
# jets against the finite-difference oracle
# ---------------------------------------------------------------------------


def test_jets_match_finite_differences():
    assert checks.jet_fd_worst(n_cases=1000, seed=0) < 1e-5


def test_graph_jets_match_scalar_jets():
    """Batched tape evaluation and per-point scalar jets agree exactly."""
    rng = np.random.default_rng(7)
    for _ in range(50):
        tree = oracles.random_expression(rng, depth=3)
        points = rng.uniform(-1.5, 1.5, size=7)
        graph = AdjointGraph()
        node = checks.eval_tree_graph(graph, tree, graph.input(points))
        batched = np.broadcast_to(node.value[0], (points.size, N_COEFFS))
        for i, t0 in enumerate(points):
            scalar = checks.eval_tree_jet(tree, float(t0)).as_array()
            assert np.abs(batched[i] - scalar).max() < 1e-12


# ---------------------------------------------------------------------------
# algebraic properties
# ---------------------------------------------------------------------------

coeffs = st.floats(min_value=-3.0, max_value=3.0, allow_nan=False)
jets = st.builds(Jet3, coeffs, coeffs, coeffs, coeffs)


@settings(deadline=None)
@given(jets, jets)
def test_jet_multiplication_commutes(a, b):
    left = jet_mul(a, b).as_array()
    right = jet_mul(b, a).as_array()
    scale = 1.0 + np.abs(left).max()
    assert np.abs(left - right).max() < 1e-14 * scale


@settings(deadline=None)
@given(jets, jets, jets)
def test_jet_multiplication_associates(a, b, c):
    left = jet_mul(jet_mul(a, b), c).as_array()
    right = jet_mul(a, jet_mul(b, c)).as_array()
    scale = 1.0 + np.abs(left).max()
    assert np.abs(left - right).max() < 1e-10 * scale


@settings(deadline=None)
@given(jets, jets, jets)
def test_jet_multiplication_distributes(a, b, c):
    left = jet_mul(a, jet_add(b, c)).as_array()
    right = jet_add(jet_mul(a, b), jet_mul(a, c)).as_array()
    scale = 1.0 + np.abs(left).max()
    assert np.abs(left - right).max() < 1e-10 * scale


@settings(deadline=None)
@given(st.builds(Jet3, st.floats(-1.5, 1.5), st.floats(-1.5, 1.5),
                 st.floats(-1.5, 1.5), st.floats(-1.5, 1.5)),
       st.builds(Jet3, st.floats(-1.5, 1.5), st.floats(-1.5, 1.5),
                 st.floats(-1.5, 1.5), st.floats(-1.5, 1.5)))
def test_exp_turns_sums_into_products(a, b):
    left = jet_elem("exp", jet_add(a, b)).as_array()
    right = jet_mul(jet_elem("exp", a), jet_elem("exp", b)).as_array()
    scale = 1.0 + np.abs(left).max()
    assert np.abs(left - right).max() < 1e-10 * scale


@settings(deadline=None)
@given(jets)
def test_sin_cos_identity(a):
    s = jet_elem("sin", a)
    c = jet_elem("cos", a)
    got = jet_add(jet_mul(s, s), jet_mul(c, c)).as_array()
    assert np.abs(got - [1.0, 0.0, 0.0, 0.0]).max() < 1e-10


# ---------------------------------------------------------------------------
# reverse mode
# ---------------------------------------------------------------------------


def _everything_graph(layout: MlpLayout, flat: np.ndarray, x: np.ndarray):
    """A loss touching every operation and elementary function."""
    graph = AdjointGraph()
    outs, pnodes = forward_on_graph(graph, ParamSet.from_flat(layout, flat), x)
    y = outs[0].node
    mixed = y * y + graph.elem("sin", y) - 2.0 * y + 3.0
    mixed = mixed / (2.5 + graph.elem("cos", y))
    mixed = mixed + graph.elem("power", 2.5 + graph.elem("sin", y), power=1.7)
    mixed = mixed + graph.elem("tanh", y) + graph.elem("exp", graph.elem("sin", y))
    mixed = mixed + graph.elem("ln", 2.5 + graph.elem("cos", y))
    mixed = mixed + graph.elem("reciprocal", 2.5 + graph.elem("sin", y))
    total = None
    for row in range(layout.output_dim):
        for k in range(N_COEFFS):
            c = graph.extract(mixed, row, k)
            term = graph.sum(c * c)
            total = term if total is None else total + term
    p0 = graph.pick(graph.extract(y, 0, 1), 0)
    total = total + p0 * p0 + graph.exp(graph.scale_shift(p0, 0.25, -0.5))
    q = graph.extract(y, 0, 0)
    total = total + graph.sum(q / (q * q + 1.0))
    total = total + graph.sum(-q + (1.0 - q) * 0.5 + 1.0 / (q * q + 2.0))
    return graph, total, pnodes


def test_gradient_of_everything_graph_matches_fd():
    layout = MlpLayout(hidden_layers=2, hidden_width=5, output_dim=2)
    flat = init_mlp(layout, seed=3).to_flat()
    x = np.linspace(-1.0, 1.0, 5)

    _, loss, pnodes = _everything_graph(layout, flat, x)
    value, gvec = grad(loss, pnodes)
    assert math.isfinite(value)

    def f(v):
        _, node, _ = _everything_graph(layout, v, x)
        return float(node.value)

    rng = np.random.default_rng(11)
    for _ in range(5):
        v = rng.standard_normal(flat.size)
        v /= np.linalg.norm(v)
        want = oracles.directional_derivative(f, flat, v)
        assert abs(float(gvec @ v) - want) < 1e-6 * max(1.0, abs(want))


def test_parameter_gradients_match_finite_differences():
    assert checks.param_grad_worst(n_networks=100, seed=0) < 1e-4


def test_affine_gradient_is_exact_for_polynomial_loss():
    """loss = sum (w t + b)^2 has a closed-form gradient; match to roundoff."""
    layout = MlpLayout(hidden_layers=0, output_dim=1)
    t = np.array([-1.0, 0.5, 2.0])
    w0, b0 = 0.7, -0.3
    params = ParamSet(layout, [np.array([[w0]])], [np.array([b0])])

    graph = AdjointGraph()
    outs, pnodes = forward_on_graph(graph, params, t)
    loss = graph.sum(outs[0].d(0) * outs[0].d(0))
    value, gvec = grad(loss, pnodes)

    r = w0 * t + b0
    assert abs(value - (r * r).sum()) < 1e-14
    want = np.array([2.0 * (r * t).sum(), 2.0 * r.sum()])
    assert np.abs(gvec - want).max() < 1e-13


def test_gradient_skips_unused_parameters():
    graph = AdjointGraph()
    used = graph.param(np.array(2.0))
    unused = graph.param(np.array(5.0))
    loss = used * used
    value, gvec = grad(loss, [used, unused])
    assert value == 4.0
    assert np.array_equal(gvec, [4.0, 0.0])


def test_replay_reproduces_recorded_values():
    layout = MlpLayout(hidden_layers=2, hidden_width=5, output_dim=2)
    flat = init_mlp(layout, seed=5).to_flat()
    graph, loss, _ = _everything_graph(layout, flat, np.linspace(-1.0, 1.0, 5))
    for node, replayed in zip(graph.nodes, graph.replay()):
        assert np.array_equal(node.value, replayed)


def test_forward_pass_is_deterministic():
    layout = MlpLayout(hidden_layers=2, hidden_width=5, output_dim=2)
    flat = init_mlp(layout, seed=9).to_flat()
    x = np.linspace(-1.0, 1.0, 5)
    _, l1, _ = _everything_graph(layout, flat, x)
    _, l2, _ = _everything_graph(layout, flat, x)
    assert float(l1.value) == float(l2.value)


# ---------------------------------------------------------------------------
# domain and usage errors
# ---------------------------------------------------------------------------


def test_ln_rejects_nonpositive_values():
    with pytest.raises(DomainError):
        jet_elem("ln", Jet3.variable(0.0))
    with pytest.raises(DomainError):
        jet_elem("ln", Jet3.variable(-1.0))


def test_reciprocal_rejects_zero():
    with pytest.raises(DomainError):
        jet_elem("reciprocal", Jet3.variable(0.0))


def test_power_domain_errors():
    with pytest.raises(DomainError):
        jet_elem("power", Jet3.variable(-1.0), power=0.5)
    with pytest.raises(DomainError):
        jet_elem("power", Jet3.variable(0.0), power=-2.0)


def test_jet_division_by_zero_value_raises():
    graph = AdjointGraph()
    t = graph.input(np.array([0.0, 1.0]))
    with pytest.raises(DomainError):
        t / t  # denominator jet has value 0 at the first point


def test_unknown_elementary_function_rejected():
    graph = AdjointGraph()
    t = graph.input(np.array([1.0]))
    with pytest.raises(ValueError):
        graph.elem("sinh", t)
    with pytest.raises(ValueError):
        jet_elem("sinh", Jet3.variable(1.0))


def test_kind_mixing_rejected():
    graph = AdjointGraph()
    t = graph.input(np.array([1.0, 2.0]))
    c = graph.const(np.array([1.0, 2.0]))
    with pytest.raises(ValueError):
        graph.add(t, c)
    with pytest.raises(ValueError):
        graph.elem("sin", c)
    with pytest.raises(ValueError):
        graph.sum(t)


def test_nodes_cannot_cross_graphs():
    g1, g2 = AdjointGraph(), AdjointGraph()
    a = g1.input(np.array([1.0]))
    b = g2.input(np.array([1.0]))
    with pytest.raises(ValueError):
        g1.add(a, b)


def test_backward_requires_scalar_plain_loss():
    graph = AdjointGraph()
    t = graph.input(np.array([1.0, 2.0]))
    with pytest.raises(ValueError):
        graph.backward(t)
    vec = graph.extract(t, 0, 0)
    with pytest.raises(ValueError):
        graph.backward(vec)


def test_extract_coefficient_range_checked():
    graph = AdjointGraph()
    t = graph.input(np.array([1.0]))
    with pytest.raises(ValueError):
        graph.extract(t, 0, N_COEFFS)


def test_integer_powers_via_operator():
    graph = AdjointGraph()
    t = graph.input(np.array([1.7]))
    cubed = (t ** 3).value[0, 0]
    assert np.abs(cubed - [1.7 ** 3, 3 * 1.7 ** 2, 6 * 1.7, 6.0]).max() < 1e-12
    with pytest.raises(ValueError):
        t ** 0.5
