"""Robust training objective: cross-entropy on interval-propagated
worst-case logits.

For each sample the input is inflated to the L-infinity ball of radius
epsilon (clipped to the [0, 1] domain), interval bounds are pushed through
the network, and the loss is evaluated on the most pessimistic logit vector:
the true class at its lower bound, every other class at its upper bound.
Minimising this upper-bounds the worst-case cross-entropy over the ball.

The gradient is computed by hand through the bound propagation (the positive
and negative weight parts route the lower/upper interval ends).  With
epsilon = 0 the computation delegates to the plain unperturbed path so that
training trajectories agree bit for bit.
"""

from __future__ import annotations

import numpy as np

from .nn import (ContractError, Gradients, MlpParams, _log_softmax,
                 backward_arrays, cross_entropy_mean, forward_batch)


def _ibp_forward(params: MlpParams, lo: np.ndarray, hi: np.ndarray):
    """Batched interval propagation keeping every intermediate interval."""
    los, his = [lo], [hi]
    pre_los, pre_his = [], []
    for w, b in zip(params.weights[:-1], params.biases[:-1]):
        wp = np.maximum(w, 0.0)
        wm = np.minimum(w, 0.0)
        pre_lo = los[-1] @ wp.T + his[-1] @ wm.T + b
        pre_hi = his[-1] @ wp.T + los[-1] @ wm.T + b
        pre_los.append(pre_lo)
        pre_his.append(pre_hi)
        los.append(np.maximum(pre_lo, 0.0))
        his.append(np.maximum(pre_hi, 0.0))
    w, b = params.weights[-1], params.biases[-1]
    wp = np.maximum(w, 0.0)
    wm = np.minimum(w, 0.0)
    logit_lo = los[-1] @ wp.T + his[-1] @ wm.T + b
    logit_hi = his[-1] @ wp.T + los[-1] @ wm.T + b
    return los, his, pre_los, pre_his, logit_lo, logit_hi


def robust_logit_bounds(params: MlpParams, xs: np.ndarray, epsilon: float,
                        domain_lo: float = 0.0, domain_hi: float = 1.0):
    """Per-sample logit intervals over the epsilon-ball, shape (n, classes)."""
    xs = np.asarray(xs, dtype=float)
    if epsilon < 0:
        raise ContractError("epsilon must be nonnegative")
    lo = np.clip(xs - epsilon, domain_lo, domain_hi)
    hi = np.clip(xs + epsilon, domain_lo, domain_hi)
    *_, logit_lo, logit_hi = _ibp_forward(params, lo, hi)
    return logit_lo, logit_hi


def worst_case_logits(logit_lo: np.ndarray, logit_hi: np.ndarray,
                      ys: np.ndarray) -> np.ndarray:
    """True class pinned to its lower bound, all others to their upper bound."""
    ys = np.asarray(ys, dtype=int)
    z = logit_hi.copy()
    rows = np.arange(len(ys))
    z[rows, ys] = logit_lo[rows, ys]
    return z


def robust_loss(params: MlpParams, xs: np.ndarray, ys: np.ndarray,
                epsilon: float) -> float:
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=int)
    if epsilon == 0.0:
        return cross_entropy_mean(forward_batch(params, xs), ys)
    lo_z, hi_z = robust_logit_bounds(params, xs, epsilon)
    return cross_entropy_mean(worst_case_logits(lo_z, hi_z, ys), ys)


def robust_backward(params: MlpParams, xs: np.ndarray, ys: np.ndarray,
                    epsilon: float) -> Gradients:
    """Gradient of :func:`robust_loss` with respect to all parameters."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=int)
    if xs.ndim != 2 or xs.shape[0] == 0:
        raise ContractError("empty or mis-shaped batch")
    if epsilon == 0.0:
        return backward_arrays(params, xs, ys)

    n = xs.shape[0]
    lo0 = np.clip(xs - epsilon, 0.0, 1.0)
    hi0 = np.clip(xs + epsilon, 0.0, 1.0)
    los, his, pre_los, pre_his, logit_lo, logit_hi = _ibp_forward(params, lo0, hi0)

    z = worst_case_logits(logit_lo, logit_hi, ys)
    g = np.exp(_log_softmax(z))
    rows = np.arange(n)
    g[rows, ys] -= 1.0
    g /= n
    # Split the logit gradient back onto the interval ends it was read from.
    g_lo = np.zeros_like(g)
    g_lo[rows, ys] = g[rows, ys]
    g_hi = g.copy()
    g_hi[rows, ys] = 0.0

    grads_w = [None] * len(params.weights)
    grads_b = [None] * len(params.biases)
    for k in range(len(params.weights) - 1, -1, -1):
        w = params.weights[k]
        wp_mask = w > 0.0
        wm_mask = w < 0.0
        a_lo, a_hi = los[k], his[k]
        # logit_lo = a_lo W+^T + a_hi W-^T + b ; logit_hi swaps the ends.
        d_wp = g_lo.T @ a_lo + g_hi.T @ a_hi
        d_wm = g_lo.T @ a_hi + g_hi.T @ a_lo
        grads_w[k] = np.where(wp_mask, d_wp, 0.0) + np.where(wm_mask, d_wm, 0.0)
        grads_b[k] = (g_lo + g_hi).sum(axis=0)
        if k > 0:
            wp = np.where(wp_mask, w, 0.0)
            wm = np.where(wm_mask, w, 0.0)
            na_lo = g_lo @ wp + g_hi @ wm
            na_hi = g_hi @ wp + g_lo @ wm
            g_lo = na_lo * (pre_los[k - 1] > 0.0)
            g_hi = na_hi * (pre_his[k - 1] > 0.0)
    return Gradients(grads_w, grads_b)
