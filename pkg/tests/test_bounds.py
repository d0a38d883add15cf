"""Interval bound propagation tests: hand-checked cases, Monte-Carlo
soundness, monotonicity in the box radius, and branch forcing."""

import numpy as np
import pytest

from veritrain import bounds, nn


def make_net(weights, biases):
    return nn.MlpParams([np.array(w, float) for w in weights],
                        [np.array(b, float) for b in biases])


def random_net(rng, sizes=None):
    if sizes is None:
        depth = int(rng.integers(1, 3))
        sizes = [int(rng.integers(2, 6)) for _ in range(depth + 2)]
    return nn.init_params(sizes, seed=int(rng.integers(0, 2**31)))


# ---------------------------------------------------------------------------
# hand-checked propagation
# ---------------------------------------------------------------------------

def test_hand_computed_single_layer():
    net = make_net([[[1.0, -1.0], [2.0, 0.0]], [[1.0, 1.0]]],
                   [[0.0, -1.0], [0.0]])
    nb = bounds.compute_bounds(net, np.array([0.0, 0.0]), np.array([1.0, 1.0]))
    assert np.allclose(nb.pre_lo[0], [-1.0, -1.0])
    assert np.allclose(nb.pre_hi[0], [1.0, 1.0])
    assert np.allclose(nb.post_lo[0], [0.0, 0.0])
    assert np.allclose(nb.post_hi[0], [1.0, 1.0])
    assert np.allclose(nb.logit_lo, [0.0])
    assert np.allclose(nb.logit_hi, [2.0])
    assert list(nb.phases[0]) == [bounds.PHASE_UNSTABLE, bounds.PHASE_UNSTABLE]
    assert nb.unstable_count() == 2


def test_phase_classification():
    # One neuron pinned active, one pinned inactive, one straddling zero.
    net = make_net([[[1.0], [-1.0], [1.0]], [[1.0, 1.0, 1.0]]],
                   [[1.0, -2.0, -0.5], [0.0]])
    nb = bounds.compute_bounds(net, np.array([0.0]), np.array([1.0]))
    assert list(nb.phases[0]) == [bounds.PHASE_ACTIVE, bounds.PHASE_INACTIVE,
                                  bounds.PHASE_UNSTABLE]


def test_point_box_collapses_to_forward():
    rng = np.random.default_rng(3)
    for _ in range(10):
        net = random_net(rng)
        x = rng.uniform(0, 1, net.input_dim)
        nb = bounds.compute_bounds(net, x, x)
        assert np.array_equal(nb.logit_lo, nb.logit_hi)
        assert np.allclose(nb.logit_lo, nn.forward(net, x), atol=1e-12)


# ---------------------------------------------------------------------------
# soundness and monotonicity
# ---------------------------------------------------------------------------

def test_monte_carlo_containment():
    rng = np.random.default_rng(11)
    for _ in range(8):
        net = random_net(rng)
        center = rng.uniform(0, 1, net.input_dim)
        lo, hi = bounds.input_box(center, float(rng.uniform(0.02, 0.3)))
        nb = bounds.compute_bounds(net, lo, hi)
        xs = rng.uniform(lo, hi, size=(1000, net.input_dim))
        logits = nn.forward_batch(net, xs)
        assert np.all(logits >= nb.logit_lo - 1e-9)
        assert np.all(logits <= nb.logit_hi + 1e-9)
        # Hidden pre-activations stay inside their intervals too.
        h = xs
        for k, (w, b) in enumerate(zip(net.weights[:-1], net.biases[:-1])):
            pre = h @ w.T + b
            assert np.all(pre >= nb.pre_lo[k] - 1e-9)
            assert np.all(pre <= nb.pre_hi[k] + 1e-9)
            h = np.maximum(pre, 0.0)


def test_bounds_widen_with_radius():
    rng = np.random.default_rng(12)
    net = random_net(rng, sizes=[3, 8, 8, 3])
    center = rng.uniform(0.2, 0.8, 3)
    prev = None
    for radius in (0.01, 0.05, 0.1, 0.2):
        lo, hi = bounds.input_box(center, radius)
        nb = bounds.compute_bounds(net, lo, hi)
        if prev is not None:
            assert np.all(nb.logit_lo <= prev.logit_lo + 1e-12)
            assert np.all(nb.logit_hi >= prev.logit_hi - 1e-12)
        prev = nb


def test_input_box_respects_domain():
    lo, hi = bounds.input_box(np.array([0.05, 0.95]), 0.2)
    assert np.allclose(lo, [0.0, 0.75])
    assert np.allclose(hi, [0.25, 1.0])


# ---------------------------------------------------------------------------
# branch forcing
# ---------------------------------------------------------------------------

def test_forcing_narrows_posts():
    rng = np.random.default_rng(21)
    net = random_net(rng, sizes=[2, 6, 2])
    lo, hi = bounds.input_box(rng.uniform(0, 1, 2), 0.4)
    free = bounds.compute_bounds(net, lo, hi)
    unstable = np.flatnonzero(free.phases[0] == bounds.PHASE_UNSTABLE)
    assert unstable.size > 0
    i = int(unstable[0])

    force = [np.zeros(6, dtype=np.int8)]
    force[0][i] = bounds.FORCE_INACTIVE
    nb = bounds.compute_bounds(net, lo, hi, forced=force)
    assert not nb.infeasible
    assert nb.post_lo[0][i] == 0.0 and nb.post_hi[0][i] == 0.0
    assert nb.phases[0][i] == bounds.PHASE_INACTIVE

    force[0][i] = bounds.FORCE_ACTIVE
    nb = bounds.compute_bounds(net, lo, hi, forced=force)
    assert not nb.infeasible
    assert nb.phases[0][i] == bounds.PHASE_ACTIVE
    assert nb.post_lo[0][i] >= 0.0
    assert nb.post_hi[0][i] == pytest.approx(max(free.pre_hi[0][i], 0.0))


def test_contradictory_force_flags_infeasible():
    # Neuron with pre-activation interval strictly below zero cannot be active.
    net = make_net([[[1.0]], [[1.0]]], [[-5.0], [0.0]])
    force = [np.array([bounds.FORCE_ACTIVE], dtype=np.int8)]
    nb = bounds.compute_bounds(net, np.array([0.0]), np.array([1.0]), forced=force)
    assert nb.infeasible
    force = [np.array([bounds.FORCE_INACTIVE], dtype=np.int8)]
    net2 = make_net([[[1.0]], [[1.0]]], [[5.0], [0.0]])
    nb2 = bounds.compute_bounds(net2, np.array([0.0]), np.array([1.0]), forced=force)
    assert nb2.infeasible


# ---------------------------------------------------------------------------
# margin bound used for target pruning
# ---------------------------------------------------------------------------

def test_margin_upper_bound_sound_and_tighter():
    rng = np.random.default_rng(31)
    for _ in range(10):
        net = random_net(rng, sizes=[3, 7, 4])
        center = rng.uniform(0, 1, 3)
        lo, hi = bounds.input_box(center, 0.15)
        nb = bounds.compute_bounds(net, lo, hi)
        xs = rng.uniform(lo, hi, size=(800, 3))
        logits = nn.forward_batch(net, xs)
        for y in range(4):
            for t in range(4):
                if t == y:
                    continue
                ub = bounds.margin_upper_bound(net, nb, y, t)
                observed = float((logits[:, t] - logits[:, y]).max())
                assert observed <= ub + 1e-9
                assert ub <= nb.logit_hi[t] - nb.logit_lo[y] + 1e-12
