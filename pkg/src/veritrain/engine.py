"""Training loop with verification-driven data augmentation.

The engine trains a ReLU classifier while periodically attacking its own
training points with the exact verifier.  Every ``verify_every`` epochs it
pops up to ``verify_cap`` roots off a priority queue, searches each for a
minimal adversary, and routes every adversary found either to a labeler
(oracle / human / none) or to the assumed-label pool:

- labeled adversaries join the permanent set ``D0`` with their new label,
  and both the root and the adversary re-enter the queue;
- assumed adversaries join ``D_adv`` with the root's label; ``D_adv`` is
  cleared and rebuilt each round.

Each epoch then minimizes mean cross-entropy over ``D0`` together with the
current ``D_adv``.  With verification disabled the loop is bit-identical to
plain training under the same seed.
"""

from __future__ import annotations

import heapq
import itertools
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import nn, verifier
from .labeling import make_labeler
from .nn import AdamState, MlpParams, Sample

log = logging.getLogger("veritrain.engine")

PROV_ORIGINAL = "original"
PROV_HUMAN = "human-labeled adversary"
PROV_ASSUMED = "assumed-label adversary"

_ENSEMBLE_EPOCHS = 200      # proxy-classifier budget for the agreement check
_STATUS_EVERY = 25          # epochs between live status pushes


@dataclass
class TaggedSample:
    """A training point with identity, provenance, and queue level."""

    id: int
    x: np.ndarray
    y: int
    provenance: str
    level: int


class LabeledSet:
    """Ordered sample container with unique ids and cached arrays."""

    def __init__(self):
        self._items: list[TaggedSample] = []
        self._by_id: dict[int, TaggedSample] = {}
        self._arrays = None

    def add(self, sample_id: int, x, y, provenance: str, level: int) -> TaggedSample:
        if sample_id in self._by_id:
            raise ValueError(f"duplicate sample id {sample_id}")
        item = TaggedSample(sample_id, np.asarray(x, dtype=float), int(y),
                            provenance, int(level))
        self._items.append(item)
        self._by_id[sample_id] = item
        self._arrays = None
        return item

    def clear(self) -> None:
        self._items.clear()
        self._by_id.clear()
        self._arrays = None

    def by_id(self, sample_id: int) -> TaggedSample:
        return self._by_id[sample_id]

    def ids(self) -> set[int]:
        return set(self._by_id)

    def arrays(self):
        if self._arrays is None:
            if self._items:
                xs = np.stack([s.x for s in self._items])
                ys = np.array([s.y for s in self._items], dtype=np.int64)
            else:
                xs, ys = np.zeros((0, 0)), np.zeros(0, dtype=np.int64)
            self._arrays = (xs, ys)
        return self._arrays

    def provenance_counts(self) -> dict:
        out: dict[str, int] = {}
        for s in self._items:
            out[s.provenance] = out.get(s.provenance, 0) + 1
        return out

    def __len__(self):
        return len(self._items)

    def __iter__(self):
        return iter(self._items)


class VerifyQueue:
    """Priority queue over sample ids.

    Pop order: level ascending, then last known minimal distance ascending
    (never-verified entries first), then insertion order.
    """

    def __init__(self):
        self._heap: list = []
        self._seq = itertools.count()

    def push(self, sample_id: int, level: int, last_delta: float | None) -> None:
        delta_key = -np.inf if last_delta is None else float(last_delta)
        heapq.heappush(self._heap,
                       (int(level), delta_key, next(self._seq), int(sample_id)))

    def pop(self):
        level, delta_key, _, sample_id = heapq.heappop(self._heap)
        return sample_id, level, (None if delta_key == -np.inf else delta_key)

    def pop_batch(self, k: int) -> list:
        return [self.pop() for _ in range(min(k, len(self._heap)))]

    def __len__(self):
        return len(self._heap)


def scheduler_decides(delta: float, adversary, ensemble, d: float) -> bool:
    """Whether an adversary warrants a label request.

    True when the minimal distance exceeds the threshold, or when every
    member of a (non-empty) ensemble assigns the adversary the same class.
    """
    if delta > d:
        return True
    if ensemble:
        first = nn.predict(ensemble[0], adversary)
        return all(nn.predict(p, adversary) == first for p in ensemble[1:])
    return False


# ---------------------------------------------------------------------------
# verification round
# ---------------------------------------------------------------------------

@dataclass
class RoundRecord:
    """Per-round bookkeeping that lands in the run report."""

    epoch: int
    round_index: int
    popped: int = 0
    found: int = 0
    misclassified_roots: int = 0     # adversaries at distance zero
    robust: int = 0
    timeouts: int = 0
    human_labeled: int = 0
    assumed: int = 0
    true_adversary_fraction: float | None = None
    queue_depth_after: int = 0
    verify_seconds: float = 0.0
    human_seconds: float = 0.0
    total_seconds: float = 0.0

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _verify_task(args):
    params, x, y, epsilon, node_budget = args
    return verifier.min_adversary(params, x, epsilon, y, node_budget=node_budget)


def _run_verifications(params: MlpParams, roots, cfg):
    tasks = [(params, r.x, r.y, cfg.epsilon, cfg.node_budget) for r in roots]
    if cfg.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            return list(pool.map(_verify_task, tasks))   # order-preserving
    return [_verify_task(t) for t in tasks]


def _ensemble_seed(seed: int, round_index: int, member: int) -> int:
    return int(np.random.SeedSequence([seed, 7001 + round_index, member])
               .generate_state(1)[0])


def train_ensemble(D0: LabeledSet, cfg, round_index: int) -> list[MlpParams]:
    """Independently seeded proxy classifiers fit on the current D0."""
    xs, ys = D0.arrays()
    layers = [xs.shape[1]] + list(cfg.hidden) + [cfg.class_count]
    out = []
    for i in range(cfg.ensemble_size):
        p = nn.init_params(layers, seed=_ensemble_seed(cfg.seed, round_index, i))
        st = AdamState.init_like(p, alpha=cfg.learning_rate)
        for _ in range(_ENSEMBLE_EPOCHS):
            nn.adam_step(p, nn.backward_arrays(p, xs, ys), st)
        out.append(p)
    return out


def verification_round(params: MlpParams, D0: LabeledSet, d_adv: LabeledSet,
                       qv: VerifyQueue, cfg, labeler, *, epoch: int,
                       round_index: int, id_gen, verify_fn=None) -> RoundRecord:
    """One augmentation round: clear D_adv, verify ≤ verify_cap roots, route.

    ``verify_fn(params, root, cfg) -> AdversaryResult`` may be injected for
    tests; the default runs the exact verifier at the configured radius.
    """
    t_round = time.perf_counter()
    rec = RoundRecord(epoch=epoch, round_index=round_index)
    d_adv.clear()

    entries = qv.pop_batch(cfg.verify_cap)
    roots = [D0.by_id(sid) for sid, _, _ in entries]
    rec.popped = len(roots)

    ensemble = train_ensemble(D0, cfg, round_index) if cfg.ensemble_size > 0 else []

    t0 = time.perf_counter()
    if verify_fn is None:
        results = _run_verifications(params, roots, cfg)
    else:
        results = [verify_fn(params, r, cfg) for r in roots]
    rec.verify_seconds = time.perf_counter() - t0

    pending = []        # (root, result) for the label path, in pop order
    assumed = []        # (root, result) for the assumed path
    for root, res in zip(roots, results):
        if res.outcome == verifier.FOUND:
            rec.found += 1
            if res.delta == 0.0:
                rec.misclassified_roots += 1
            if scheduler_decides(res.delta, res.x_adv, ensemble, cfg.d):
                pending.append((root, res))
            else:
                assumed.append((root, res))
        elif res.outcome == verifier.ROBUST_WITHIN:
            rec.robust += 1
            qv.push(root.id, root.level, cfg.epsilon)
        else:
            rec.timeouts += 1
            bound = res.bound if res.bound is not None else cfg.epsilon
            qv.push(root.id, root.level, bound)
            log.info("verification timeout on sample %d (epoch %d)", root.id, epoch)

    labels: list[int | None] = []
    if pending:
        requests = [dict(x_adv=res.x_adv, root_x=root.x, root_label=root.y,
                         delta=res.delta) for root, res in pending]
        t0 = time.perf_counter()
        try:
            labels = list(labeler.label_batch(requests))
        except Exception:
            log.exception("labeler failed; routing %d adversaries to the "
                          "assumed path", len(pending))
            labels = [None] * len(pending)
        rec.human_seconds = time.perf_counter() - t0
        if len(labels) != len(pending):
            raise RuntimeError(
                f"labeler returned {len(labels)} answers for {len(pending)} requests")

    true_labeled = 0
    for (root, res), label in zip(pending, labels):
        if label is None:           # declined or timed out: assumed path
            log.info("label request for sample %d unresolved; assuming root "
                     "label", root.id)
            assumed.append((root, res))
            continue
        new_id = next(id_gen)
        D0.add(new_id, res.x_adv, label, PROV_HUMAN, root.level + 1)
        qv.push(root.id, root.level, res.delta)
        qv.push(new_id, root.level + 1, None)
        rec.human_labeled += 1
        if label == root.y:
            true_labeled += 1

    for root, res in assumed:
        d_adv.add(next(id_gen), res.x_adv, root.y, PROV_ASSUMED, root.level + 1)
        rec.assumed += 1
        if cfg.requeue_on_assume:
            qv.push(root.id, root.level, res.delta)

    if rec.human_labeled:
        rec.true_adversary_fraction = true_labeled / rec.human_labeled
    rec.queue_depth_after = len(qv)
    rec.total_seconds = time.perf_counter() - t_round
    return rec


# ---------------------------------------------------------------------------
# training loops
# ---------------------------------------------------------------------------

@dataclass
class RunReport:
    """Everything a finished run wants to say about itself."""

    config: dict
    rounds: list = field(default_factory=list)
    final: dict = field(default_factory=dict)
    timing: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "rounds": [r.to_dict() for r in self.rounds],
            "final": self.final,
            "timing": self.timing,
        }

    def metrics(self) -> dict:
        """The deterministic slice: everything except wall-clock fields."""
        rounds = []
        for r in self.rounds:
            d = r.to_dict()
            for k in ("verify_seconds", "human_seconds", "total_seconds"):
                d.pop(k)
            rounds.append(d)
        return {"rounds": rounds, "final": dict(self.final)}


def _epoch_rng(seed: int, epoch: int):
    return np.random.default_rng([seed, 0xE90C, epoch])


def _gradient_epoch(params: MlpParams, state: AdamState, xs, ys, batch_size,
                    rng) -> None:
    n = ys.shape[0]
    if batch_size is None or batch_size >= n:
        nn.adam_step(params, nn.backward_arrays(params, xs, ys), state)
        return
    order = rng.permutation(n)
    for i in range(0, n, batch_size):
        idx = order[i:i + batch_size]
        nn.adam_step(params, nn.backward_arrays(params, xs[idx], ys[idx]), state)


def _init_model(cfg, input_dim: int) -> tuple[MlpParams, AdamState]:
    layers = [input_dim] + list(cfg.hidden) + [cfg.class_count]
    params = nn.init_params(layers, seed=cfg.seed)
    return params, AdamState.init_like(params, alpha=cfg.learning_rate)


def train_regular(samples: list[Sample], cfg) -> MlpParams:
    """Plain cross-entropy training on a fixed dataset."""
    cfg.validate()
    xs = np.stack([s.x for s in samples])
    ys = np.array([s.y for s in samples], dtype=np.int64)
    params, state = _init_model(cfg, xs.shape[1])
    for epoch in range(1, cfg.max_epoch + 1):
        _gradient_epoch(params, state, xs, ys, cfg.batch_size,
                        _epoch_rng(cfg.seed, epoch))
    return params


def train_iada(samples: list[Sample], cfg, labeler=None, *, broker=None,
               status_sink=None, verify_fn=None) -> tuple[MlpParams, RunReport]:
    """Train with periodic verification-driven augmentation.

    ``status_sink``, when given, receives progress dicts for live monitoring.
    Returns the trained parameters and the run report.
    """
    cfg.validate()
    if labeler is None:
        labeler = make_labeler(cfg, broker)

    id_gen = itertools.count()
    D0, d_adv = LabeledSet(), LabeledSet()
    qv = VerifyQueue()
    for s in samples:
        item = D0.add(next(id_gen), s.x, s.y, PROV_ORIGINAL, 0)
        qv.push(item.id, 0, None)

    params, state = _init_model(cfg, D0.arrays()[0].shape[1])
    report = RunReport(config=cfg.to_dict())
    timing = {"verification": 0.0, "human": 0.0, "update": 0.0, "other": 0.0}
    totals = {"human": 0, "assumed": 0}

    def push_status(epoch: int):
        if status_sink is not None:
            last = report.rounds[-1] if report.rounds else None
            status_sink(dict(
                epoch=epoch, round=len(report.rounds), d0_size=len(D0),
                d_adv_size=len(d_adv), queue_depth=len(qv),
                human_labeled=totals["human"], assumed=totals["assumed"],
                true_adversary_fraction=(
                    last.true_adversary_fraction if last else None)))

    t_start = time.perf_counter()
    push_status(0)
    for epoch in range(1, cfg.max_epoch + 1):
        if epoch % cfg.verify_every == 0:
            rec = verification_round(
                params, D0, d_adv, qv, cfg, labeler, epoch=epoch,
                round_index=len(report.rounds), id_gen=id_gen,
                verify_fn=verify_fn)
            report.rounds.append(rec)
            totals["human"] += rec.human_labeled
            totals["assumed"] += rec.assumed
            timing["verification"] += rec.verify_seconds
            timing["human"] += rec.human_seconds
            timing["other"] += rec.total_seconds - rec.verify_seconds - rec.human_seconds
            push_status(epoch)

        t0 = time.perf_counter()
        xs0, ys0 = D0.arrays()
        xsa, ysa = d_adv.arrays()
        if len(d_adv):
            xs, ys = np.concatenate([xs0, xsa]), np.concatenate([ys0, ysa])
        else:
            xs, ys = xs0, ys0
        _gradient_epoch(params, state, xs, ys, cfg.batch_size,
                        _epoch_rng(cfg.seed, epoch))
        timing["update"] += time.perf_counter() - t0
        if epoch % _STATUS_EVERY == 0:
            push_status(epoch)

    total = time.perf_counter() - t_start
    timing["other"] += total - sum(timing.values())
    timing["total"] = total
    report.timing = {k: round(v, 6) for k, v in timing.items()}
    counts = D0.provenance_counts()
    report.final = {
        "epochs": cfg.max_epoch,
        "d0_size": len(D0),
        "d0_original": counts.get(PROV_ORIGINAL, 0),
        "d0_human_labeled": counts.get(PROV_HUMAN, 0),
        "d_adv_size": len(d_adv),
        "human_labeled_total": totals["human"],
        "assumed_total": totals["assumed"],
        "augmentation_count": counts.get(PROV_HUMAN, 0) + len(d_adv),
        "queue_depth": len(qv),
        "rounds": len(report.rounds),
    }
    push_status(cfg.max_epoch)
    return params, report
