"""Experiment runner: trains every requested method under one config.

All methods share the same initial parameters, training data, and random
streams, so accuracy differences come from the training procedure alone:

- ``reg``: plain cross-entropy training;
- ``robust``: interval-bound training at the configured radius;
- ``iada``: verification-driven augmentation (the point of the package);
- ``reg_da`` / ``robust_da``: the same baselines with uniform input-box
  augmentation of matched size, labeled by the analytic oracle.

Results land in the output directory as a JSON report, a CSV summary, per
method checkpoints, and rendered figures.
"""

from __future__ import annotations

import logging
import os
import time
from pathlib import Path

import numpy as np

from . import data, engine, nn, report, robust, verifier
from .config import ConfigError, ExperimentConfig
from .nn import MlpParams, Sample

log = logging.getLogger("veritrain.experiment")

MNIST_TRAIN_FILES = ("train-images-idx3-ubyte", "train-labels-idx1-ubyte")
MNIST_TEST_FILES = ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte")

# canonical execution order: iada must precede the *_da arms so their
# augmentation size can be matched to what iada actually added
_EXEC_ORDER = ("reg", "robust", "iada", "reg_da", "robust_da")


def mnist_root(cfg) -> Path:
    root = cfg.mnist_dir or os.environ.get("VERITRAIN_MNIST_DIR")
    if not root:
        raise ConfigError(
            "the mnist task needs the IDX files: set mnist_dir in the config "
            "or the VERITRAIN_MNIST_DIR environment variable")
    return Path(root)


def build_datasets(cfg) -> tuple[list[Sample], list[Sample]]:
    """Seeded (train, eval) sample lists for the configured task."""
    if cfg.task == "2d":
        return (data.sample_ground2d(cfg.data_size, cfg.seed),
                data.sample_ground2d(cfg.eval_size, cfg.eval_seed))
    if cfg.task == "trajectory":
        return (data.gen_trajectories(cfg.data_size, cfg.seed),
                data.gen_trajectories(cfg.eval_size, cfg.eval_seed))
    root = mnist_root(cfg)
    train = data.load_mnist(root / MNIST_TRAIN_FILES[0], root / MNIST_TRAIN_FILES[1],
                            subset_size=cfg.data_size, seed=cfg.seed)
    test = data.load_mnist(root / MNIST_TEST_FILES[0], root / MNIST_TEST_FILES[1],
                           subset_size=min(cfg.eval_size, 10000), seed=cfg.eval_seed)
    return train.to_samples(), test.to_samples()


def accuracy(params: MlpParams, samples) -> float:
    """Fraction of samples whose predicted class matches the label."""
    if not samples:
        raise ValueError("empty evaluation set")
    xs = np.stack([s.x for s in samples])
    ys = np.array([s.y for s in samples])
    return float(np.mean(nn.predict_batch(params, xs) == ys))


def train_robust(samples, cfg) -> MlpParams:
    """Interval-bound training: minimizes the worst-case cross-entropy."""
    cfg.validate()
    xs = np.stack([s.x for s in samples])
    ys = np.array([s.y for s in samples], dtype=np.int64)
    params, state = engine._init_model(cfg, xs.shape[1])
    eps = cfg.train_robust_epsilon
    for epoch in range(1, cfg.max_epoch + 1):
        rng = engine._epoch_rng(cfg.seed, epoch)
        n = ys.shape[0]
        if cfg.batch_size is None or cfg.batch_size >= n:
            nn.adam_step(params, robust.robust_backward(params, xs, ys, eps), state)
        else:
            order = rng.permutation(n)
            for i in range(0, n, cfg.batch_size):
                idx = order[i:i + cfg.batch_size]
                nn.adam_step(params,
                             robust.robust_backward(params, xs[idx], ys[idx], eps),
                             state)
    return params


def uniform_augment(cfg, count: int) -> list[Sample]:
    """Uniform input-box samples labeled by the task's analytic oracle."""
    rng = np.random.default_rng([cfg.seed, 0xDA])
    if cfg.task == "2d":
        pts = rng.uniform(size=(count, 2))
        labels = data.ground2d_label_batch(pts)
        return [Sample(pts[i], int(labels[i])) for i in range(count)]
    if cfg.task == "trajectory":
        pts = rng.uniform(size=(count, data.TRAJECTORY_DIM))
        return [Sample(p, data.nearest_archetype(p)) for p in pts]
    raise ConfigError("uniform augmentation is not defined for image data")


def perturbation_bound(params, samples, cfg) -> dict | None:
    """Mean minimal perturbation over the first ``pb_size`` eval points."""
    if cfg.pb_size <= 0:
        return None
    subset = samples[:cfg.pb_size]
    xs = np.stack([s.x for s in subset])
    ys = np.array([s.y for s in subset])
    stats = verifier.average_perturbation_bound(
        params, xs, ys, cfg.epsilon, node_budget=cfg.node_budget,
        workers=cfg.workers)
    return {"value": stats.value, "found": stats.found, "robust": stats.robust,
            "misclassified": stats.misclassified, "timed_out": stats.timed_out,
            "sample_size": len(subset)}


def export_boundary_raster(params: MlpParams, resolution: int) -> np.ndarray:
    """Predicted classes on a resolution × resolution grid over [0, 1]².

    ``raster[i, j]`` is the class at x = xs[j], y = ys[i] with both axes
    ascending, so the first row is the bottom edge of the square.
    """
    if resolution < 2:
        raise ValueError(f"resolution must be at least 2, got {resolution}")
    if params.input_dim != 2:
        raise ValueError("boundary rasters are only defined for planar models")
    axis = np.linspace(0.0, 1.0, resolution)
    gx, gy = np.meshgrid(axis, axis)
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    return nn.predict_batch(params, pts).reshape(resolution, resolution)


def _train_method(method: str, train, cfg, aug_count: int | None, *,
                  broker=None, status_sink=None, verify_fn=None):
    """Dispatch one training arm; returns (params, run_report | None, extras)."""
    if method == "reg":
        return engine.train_regular(train, cfg), None, {}
    if method == "robust":
        return train_robust(train, cfg), None, {}
    if method == "iada":
        params, run_report = engine.train_iada(
            train, cfg, broker=broker, status_sink=status_sink,
            verify_fn=verify_fn)
        return params, run_report, {
            "augmentation_count": run_report.final["augmentation_count"]}
    count = aug_count if aug_count is not None else cfg.data_size
    augmented = train + uniform_augment(cfg, count)
    extras = {"augmentation_count": count}
    if method == "reg_da":
        return engine.train_regular(augmented, cfg), None, extras
    if method == "robust_da":
        return train_robust(augmented, cfg), None, extras
    raise ConfigError(f"unknown method {method!r}")


def run_experiment(cfg: ExperimentConfig, *, broker=None, status_sink=None,
                   verify_fn=None) -> dict:
    """Train every configured method on identical data; write all reports.

    Returns the report dict.  A method failure still writes the partial
    report — flagged incomplete — before the error propagates.
    """
    cfg.validate()
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    train, eval_set = build_datasets(cfg)

    ordered = [m for m in _EXEC_ORDER if m in cfg.methods]
    results: dict[str, dict] = {}
    iada_report = None
    aug_count = cfg.da_count
    failure = None
    train_models: dict[str, MlpParams] = {}

    for method in ordered:
        t0 = time.perf_counter()
        try:
            params, run_report, extras = _train_method(
                method, train, cfg, aug_count, broker=broker,
                status_sink=status_sink, verify_fn=verify_fn)
        except Exception as exc:
            log.exception("method %s failed", method)
            failure = (method, exc)
            break
        if method == "iada":
            iada_report = run_report
            if cfg.da_count is None:
                aug_count = extras["augmentation_count"]
        entry = {
            "accuracy": accuracy(params, eval_set),
            "train_seconds": round(time.perf_counter() - t0, 6),
            "augmentation_count": extras.get("augmentation_count", 0),
        }
        pb = perturbation_bound(params, eval_set, cfg)
        if pb is not None:
            entry["perturbation_bound"] = pb
        ckpt = out_dir / f"model_{method}.json"
        nn.save_checkpoint(params, ckpt, config=cfg.to_dict())
        entry["checkpoint"] = ckpt.name
        results[method] = entry
        train_models[method] = params
        log.info("method %s: accuracy %.4f", method, entry["accuracy"])

    doc = {
        "config": cfg.to_dict(),
        "eval_size": len(eval_set),
        "methods": results,
        "incomplete": failure is not None,
    }
    if failure is not None:
        doc["error"] = {"method": failure[0], "message": str(failure[1])}
    if iada_report is not None:
        doc["iada"] = iada_report.to_dict()
    report.write_reports(out_dir, cfg, doc, train_models, train)

    if failure is not None:
        raise RuntimeError(
            f"method {failure[0]} failed: {failure[1]}") from failure[1]
    return doc
