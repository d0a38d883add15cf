"""Label acquisition for adversaries that pass the scheduler.

Three modes:

- ``oracle``: answers from ground truth — the analytic region function for
  the planar task, the nearest noise-free archetype for trajectories, and
  the root's label for image data (no analytic ground truth exists there);
- ``always-assume``: declines everything, so every adversary takes the
  assumed-label path;
- ``human-service``: parks requests on a thread-safe broker that the HTTP
  service exposes to a browser, and waits up to a timeout per request.

The broker guarantees exactly-once resolution: each request ends in exactly
one of labeled / declined / timed-out, and later attempts report a conflict.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field

import numpy as np

from . import data

PENDING = "pending"
LABELED = "labeled"
DECLINED = "declined"

# broker verdicts for submissions, mapped to HTTP codes by the service
OK = "ok"
UNKNOWN_ID = "unknown-id"
BAD_CLASS = "bad-class"
ALREADY_RESOLVED = "already-resolved"

_RENDER_HINTS = {"2d": "2d-point", "mnist": "digit-image", "trajectory": "trajectory"}


@dataclass
class LabelRequest:
    """One adversary awaiting a class decision."""

    id: int
    x_adv: np.ndarray
    root_x: np.ndarray
    root_label: int
    delta: float
    hint: str                          # 2d-point | digit-image | trajectory
    enqueue_time: float = field(default_factory=time.time)
    status: str = PENDING
    label: int | None = None           # set iff status == labeled

    def view(self) -> dict:
        return {
            "id": self.id,
            "hint": self.hint,
            "payload": np.asarray(self.x_adv, dtype=float).tolist(),
            "root_payload": np.asarray(self.root_x, dtype=float).tolist(),
            "root_label": int(self.root_label),
            "delta": float(self.delta),
            "enqueue_time": self.enqueue_time,
        }


def render_hint(task: str) -> str:
    return _RENDER_HINTS[task]


class LabelBroker:
    """Thread-safe request store shared by the engine and the HTTP service."""

    def __init__(self, class_count: int):
        self.class_count = int(class_count)
        self._lock = threading.Lock()
        self._cond = threading.Condition(self._lock)
        self._requests: dict[int, LabelRequest] = {}
        self._order: list[int] = []
        self._next_id = 0
        self._counts = {LABELED: 0, DECLINED: 0, "timed-out": 0}
        self._status: dict = {"epoch": 0, "round": 0}

    # -- engine side -------------------------------------------------------
    def enqueue(self, x_adv, root_x, root_label, delta, hint) -> int:
        with self._lock:
            rid = self._next_id
            self._next_id += 1
            self._requests[rid] = LabelRequest(
                rid, np.asarray(x_adv, float), np.asarray(root_x, float),
                int(root_label), float(delta), hint)
            self._order.append(rid)
            return rid

    def wait(self, rid: int, timeout: float) -> int | None:
        """Block until the request resolves; on timeout force the declined path.

        Returns the submitted class, or None for declined / timed out.
        """
        deadline = time.monotonic() + timeout
        with self._cond:
            req = self._requests[rid]
            while req.status == PENDING:
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    break
                self._cond.wait(timeout=min(remaining, 1.0))
            if req.status == PENDING:            # timeout: counts as a decline
                req.status = DECLINED
                self._counts["timed-out"] += 1
                self._cond.notify_all()
            return req.label if req.status == LABELED else None

    def set_status(self, status=None, **fields) -> None:
        with self._lock:
            if status:
                self._status.update(status)
            self._status.update(fields)

    # -- service side ------------------------------------------------------
    def pending_views(self) -> list[dict]:
        with self._lock:
            return [self._requests[i].view() for i in self._order
                    if self._requests[i].status == PENDING]

    def submit_label(self, rid, cls) -> str:
        with self._cond:
            req = self._requests.get(rid)
            if req is None:
                return UNKNOWN_ID
            if not isinstance(cls, int) or not 0 <= cls < self.class_count:
                return BAD_CLASS
            if req.status != PENDING:
                return ALREADY_RESOLVED
            req.status = LABELED
            req.label = cls
            self._counts[LABELED] += 1
            self._cond.notify_all()
            return OK

    def submit_decline(self, rid) -> str:
        with self._cond:
            req = self._requests.get(rid)
            if req is None:
                return UNKNOWN_ID
            if req.status != PENDING:
                return ALREADY_RESOLVED
            req.status = DECLINED
            self._counts[DECLINED] += 1
            self._cond.notify_all()
            return OK

    def status_snapshot(self) -> dict:
        with self._lock:
            out = dict(self._status)
            out["queue_depth"] = sum(
                1 for i in self._order if self._requests[i].status == PENDING)
            out["resolved"] = dict(self._counts)
            return out


# ---------------------------------------------------------------------------
# labelers consumed by the engine
# ---------------------------------------------------------------------------

class OracleLabeler:
    """Ground-truth labels where they exist; the root's label otherwise."""

    def __init__(self, task: str):
        self.task = task

    def _label_one(self, x_adv, root_label) -> int:
        if self.task == "2d":
            return data.ground2d_label(x_adv)
        if self.task == "trajectory":
            return data.nearest_archetype(x_adv)
        return int(root_label)          # image data: no analytic ground truth

    def label_batch(self, requests) -> list[int | None]:
        return [self._label_one(r["x_adv"], r["root_label"]) for r in requests]


class AssumeLabeler:
    """Declines every request: all adversaries take the assumed-label path."""

    def label_batch(self, requests) -> list[int | None]:
        return [None for _ in requests]


class HumanServiceLabeler:
    """Routes requests through a broker for a human to resolve over HTTP.

    All of a round's requests are enqueued before any wait begins, so the
    operator sees the full batch at once; each request still gets its own
    timeout, after which it resolves down the declined path.
    """

    def __init__(self, broker: LabelBroker, hint: str, timeout: float = 120.0):
        self.broker = broker
        self.hint = hint
        self.timeout = timeout

    def label_batch(self, requests) -> list[int | None]:
        ids = [self.broker.enqueue(r["x_adv"], r["root_x"], r["root_label"],
                                   r["delta"], self.hint)
               for r in requests]
        return [self.broker.wait(rid, self.timeout) for rid in ids]


def make_labeler(cfg, broker: LabelBroker | None = None):
    """Construct the labeler named by ``cfg.labeler``."""
    if cfg.labeler == "oracle":
        return OracleLabeler(cfg.task)
    if cfg.labeler == "always-assume":
        return AssumeLabeler()
    if cfg.labeler == "human-service":
        if broker is None:
            raise ValueError("human-service labeler needs a broker")
        return HumanServiceLabeler(broker, render_hint(cfg.task), cfg.label_timeout)
    raise ValueError(f"unknown labeler {cfg.labeler!r}")
