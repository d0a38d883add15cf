"""Interval bounds for dense ReLU networks over a box of inputs.

Propagates lower/upper bounds layer by layer (interval arithmetic on the
affine maps, exact clipping through ReLU).  Each hidden neuron is classified
by its pre-activation interval: stably active (lower bound >= 0), stably
inactive (upper bound <= 0), or unstable.  Callers exploring a branch tree
can force phases; a forced phase that contradicts the interval marks the
region empty.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nn import MlpParams

PHASE_UNSTABLE = 0
PHASE_ACTIVE = 1
PHASE_INACTIVE = 2

FORCE_NONE = 0
FORCE_ACTIVE = 1
FORCE_INACTIVE = 2


@dataclass
class NetworkBounds:
    """Per-layer interval state for one input box."""

    input_lo: np.ndarray
    input_hi: np.ndarray
    pre_lo: list[np.ndarray]      # hidden pre-activations
    pre_hi: list[np.ndarray]
    post_lo: list[np.ndarray]     # hidden post-activations
    post_hi: list[np.ndarray]
    logit_lo: np.ndarray
    logit_hi: np.ndarray
    phases: list[np.ndarray]      # effective phase per hidden neuron
    infeasible: bool = False

    def unstable_count(self) -> int:
        return int(sum((p == PHASE_UNSTABLE).sum() for p in self.phases))


def affine_interval(w: np.ndarray, b: np.ndarray, lo: np.ndarray, hi: np.ndarray):
    """Interval image of w @ x + b for x in [lo, hi]."""
    wp = np.maximum(w, 0.0)
    wm = np.minimum(w, 0.0)
    out_lo = wp @ lo + wm @ hi + b
    out_hi = wp @ hi + wm @ lo + b
    return out_lo, out_hi


def compute_bounds(params: MlpParams, input_lo: np.ndarray, input_hi: np.ndarray,
                   forced: list[np.ndarray] | None = None) -> NetworkBounds:
    """Interval bounds through the whole network for one input box.

    ``forced`` optionally gives one code array per hidden layer
    (FORCE_NONE / FORCE_ACTIVE / FORCE_INACTIVE).  Forcing a phase narrows
    the post-activation interval to that branch; when the branch region is
    empty the result is flagged infeasible (bounds are still populated).
    """
    input_lo = np.asarray(input_lo, dtype=float)
    input_hi = np.asarray(input_hi, dtype=float)
    pre_lo_all, pre_hi_all = [], []
    post_lo_all, post_hi_all = [], []
    phases_all = []
    infeasible = False

    lo, hi = input_lo, input_hi
    n_hidden = len(params.weights) - 1
    for k in range(n_hidden):
        pre_lo, pre_hi = affine_interval(params.weights[k], params.biases[k], lo, hi)
        phase = np.where(pre_lo >= 0.0, PHASE_ACTIVE,
                         np.where(pre_hi <= 0.0, PHASE_INACTIVE, PHASE_UNSTABLE)).astype(np.int8)
        post_lo = np.maximum(pre_lo, 0.0)
        post_hi = np.maximum(pre_hi, 0.0)
        if forced is not None:
            force = forced[k]
            act = force == FORCE_ACTIVE
            inact = force == FORCE_INACTIVE
            if (act & (pre_hi < 0.0)).any() or (inact & (pre_lo > 0.0)).any():
                infeasible = True
            # Inside an active branch the output tracks the pre-activation
            # restricted to >= 0; inside an inactive branch it is exactly 0.
            post_lo = np.where(act, np.maximum(pre_lo, 0.0), post_lo)
            post_hi = np.where(act, np.maximum(pre_hi, 0.0), post_hi)
            post_lo = np.where(inact, 0.0, post_lo)
            post_hi = np.where(inact, 0.0, post_hi)
            phase = np.where(act, PHASE_ACTIVE, phase).astype(np.int8)
            phase = np.where(inact, PHASE_INACTIVE, phase).astype(np.int8)
        pre_lo_all.append(pre_lo)
        pre_hi_all.append(pre_hi)
        post_lo_all.append(post_lo)
        post_hi_all.append(post_hi)
        phases_all.append(phase)
        lo, hi = post_lo, post_hi

    logit_lo, logit_hi = affine_interval(params.weights[-1], params.biases[-1], lo, hi)
    return NetworkBounds(
        input_lo=input_lo, input_hi=input_hi,
        pre_lo=pre_lo_all, pre_hi=pre_hi_all,
        post_lo=post_lo_all, post_hi=post_hi_all,
        logit_lo=logit_lo, logit_hi=logit_hi,
        phases=phases_all, infeasible=infeasible,
    )


def margin_upper_bound(params: MlpParams, nb: NetworkBounds, y: int, t: int) -> float:
    """Sound upper bound on logit_t - logit_y over the box.

    Bounds the single affine difference of the output layer over the last
    hidden layer's interval, which is tighter than subtracting the two
    individual logit intervals.
    """
    w = params.weights[-1][t] - params.weights[-1][y]
    b = params.biases[-1][t] - params.biases[-1][y]
    if len(params.weights) == 1:
        lo, hi = nb.input_lo, nb.input_hi
    else:
        lo, hi = nb.post_lo[-1], nb.post_hi[-1]
    wp = np.maximum(w, 0.0)
    wm = np.minimum(w, 0.0)
    return float(wp @ hi + wm @ lo + b)


def input_box(center: np.ndarray, radius: float,
              domain_lo: float = 0.0, domain_hi: float = 1.0):
    """Box of the L-infinity ball around ``center`` clipped to the domain."""
    center = np.asarray(center, dtype=float)
    return (np.clip(center - radius, domain_lo, domain_hi),
            np.clip(center + radius, domain_lo, domain_hi))
