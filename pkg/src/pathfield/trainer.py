"""Desk-scale auto-decoder training loop.

Instead of an encoder, every object owns a bank of free codewords that
are optimized jointly with the shared head parameters against the
matching objective. One optimizer step per object per epoch; everything
is float64 and fully deterministic given the config seed.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields, asdict
from typing import Callable, Mapping, Sequence

import numpy as np

from .matching import (
    CONF_CLAMP,
    LossBreakdown,
    focal_conf_loss,
    hungarian,
    pad_targets,
    position_cost_matrix,
)
from .neural_field import (
    HeadConfig,
    HeadParams,
    _backward_from_cache,
    _conf_backward_from_cache,
    _confidence_with_cache,
    _forward_with_cache,
    accumulate_gradients,
    confidence_forward,
    gradient_arrays,
    head_forward_batch,
    head_from_document,
    head_to_document,
    init_head,
    named_parameters,
    zero_gradients,
)
from .paths import ParamSamplingConfig, Path, PredictedPath, SAMPLING_STRATEGIES, sample_params

CHECKPOINT_FORMAT = "pathfield.checkpoint.v1"

__all__ = [
    "TrainingError",
    "TrainConfig",
    "TrainState",
    "init_state",
    "adam_step",
    "train_epoch",
    "fit",
    "predict",
    "checkpoint_to_document",
    "checkpoint_from_document",
    "save_checkpoint",
    "load_checkpoint",
]


class TrainingError(RuntimeError):
    """Raised when optimization hits a numeric or bookkeeping problem."""


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters of one auto-decoder run.

    slots is the number of prediction slots N (must cover the largest
    ground-truth path count). train_samples / test_samples are the
    scalar counts used during optimization and at inference.
    """

    slots: int = 40
    train_samples: int = 64
    test_samples: int = 384
    epochs: int = 200
    step_size: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    sampling: str = "uniform"
    sampling_noise: float | None = None
    gamma: float = 2.0
    seed: int = 0
    codeword_sigma: float = 0.01
    conf_threshold: float = 0.5
    lr_schedule: str = "constant"
    lr_min: float = 1e-8
    head: HeadConfig = field(default_factory=HeadConfig)

    def __post_init__(self) -> None:
        if self.slots < 1:
            raise ValueError("slots must be >= 1")
        if self.train_samples < 1 or self.test_samples < 1:
            raise ValueError("sample counts must be >= 1")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.step_size <= 0:
            raise ValueError("step_size must be positive")
        if self.sampling not in SAMPLING_STRATEGIES:
            raise ValueError(f"unknown sampling strategy {self.sampling!r}")
        if self.lr_schedule not in ("constant", "cosine"):
            raise ValueError(f"unknown lr_schedule {self.lr_schedule!r}")
        if self.seed < 0:
            raise ValueError("seed must be >= 0")
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")

    def to_document(self) -> dict:
        return asdict(self)

    @classmethod
    def from_document(cls, doc: dict) -> "TrainConfig":
        if not isinstance(doc, dict):
            raise ValueError("train config document must be a JSON object")
        data = dict(doc)
        head_doc = data.pop("head", None)
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValueError(f"unknown train config keys: {unknown}")
        if head_doc is not None:
            head_known = {f.name for f in fields(HeadConfig)}
            head_unknown = sorted(set(head_doc) - head_known)
            if head_unknown:
                raise ValueError(f"unknown head config keys: {head_unknown}")
            data["head"] = HeadConfig(**head_doc)
        return cls(**data)


@dataclass
class TrainState:
    """Everything the optimizer mutates, plus the per-step loss history."""

    config: TrainConfig
    head: HeadParams
    codewords: dict[str, np.ndarray]  # object id -> (slots, code_dim)
    moments: dict[str, dict]  # parameter name -> {"m", "v", "step"}
    epoch: int
    loss_history: list[tuple[float, float, float]]  # (points, conf, total) per step


def init_state(dataset: Mapping[str, Sequence[Path]], config: TrainConfig) -> TrainState:
    """Fresh head plus Gaussian codewords for every object in the dataset."""
    ids = sorted(dataset)
    if not ids:
        raise ValueError("dataset is empty")
    for object_id in ids:
        if len(dataset[object_id]) > config.slots:
            raise ValueError(
                f"object {object_id!r} has {len(dataset[object_id])} paths, more than "
                f"the {config.slots} prediction slots"
            )
    head = init_head(config.head)
    rng = np.random.default_rng([config.seed, 1])
    codewords = {
        object_id: rng.normal(0.0, config.codeword_sigma, (config.slots, config.head.code_dim))
        for object_id in ids
    }
    return TrainState(config, head, codewords, {}, 0, [])


def _parameter_registry(state: TrainState) -> dict[str, np.ndarray]:
    registry = {f"head.{name}": arr for name, arr in named_parameters(state.head).items()}
    for object_id, arr in state.codewords.items():
        registry[f"codewords.{object_id}"] = arr
    return registry


def adam_step(
    state: TrainState,
    gradients: Mapping[str, np.ndarray],
    config: TrainConfig | None = None,
    step_size: float | None = None,
) -> TrainState:
    """Bias-corrected adaptive-moment update, in place and in float64.

    Each parameter tensor keeps its own step counter, so codewords that
    are only touched on their object's steps stay correctly corrected.
    """
    cfg = config or state.config
    lr = cfg.step_size if step_size is None else step_size
    registry = _parameter_registry(state)
    for name in sorted(gradients):
        grad = np.asarray(gradients[name], dtype=float)
        if name not in registry:
            raise TrainingError(f"gradient for unknown parameter {name!r}")
        param = registry[name]
        if grad.shape != param.shape:
            raise TrainingError(f"gradient shape {grad.shape} != parameter shape {param.shape} for {name!r}")
        if not np.all(np.isfinite(grad)):
            raise TrainingError(f"non-finite gradient for {name!r}")
        slot = state.moments.get(name)
        if slot is None:
            slot = {"m": np.zeros_like(param), "v": np.zeros_like(param), "step": 0}
            state.moments[name] = slot
        slot["step"] += 1
        slot["m"] = cfg.adam_beta1 * slot["m"] + (1.0 - cfg.adam_beta1) * grad
        slot["v"] = cfg.adam_beta2 * slot["v"] + (1.0 - cfg.adam_beta2) * grad * grad
        m_hat = slot["m"] / (1.0 - cfg.adam_beta1 ** slot["step"])
        v_hat = slot["v"] / (1.0 - cfg.adam_beta2 ** slot["step"])
        param -= lr * m_hat / (np.sqrt(v_hat) + cfg.adam_eps)
    return state


def focal_prob_gradient(targets, predicted, gamma: float = 2.0) -> np.ndarray:
    """d(focal_conf_loss)/d(predicted probability), elementwise.

    Uses the clamped probabilities like the loss itself, so the powers
    never see a zero base even for gamma < 1.
    """
    tgt = np.asarray(targets, dtype=float)
    f = np.clip(np.asarray(predicted, dtype=float), CONF_CLAMP, 1.0 - CONF_CLAMP)
    g = float(gamma)
    return np.where(
        tgt > 0.5,
        g * (1.0 - f) ** (g - 1.0) * np.log(f) - (1.0 - f) ** g / f,
        -g * f ** (g - 1.0) * np.log(1.0 - f) + f ** g / (1.0 - f),
    )


def _epoch_step_size(config: TrainConfig, epoch: int) -> float:
    if config.lr_schedule == "constant":
        return config.step_size
    progress = min(epoch / max(config.epochs, 1), 1.0)
    return config.lr_min + 0.5 * (config.step_size - config.lr_min) * (1.0 + math.cos(math.pi * progress))


def _object_gradients(
    state: TrainState,
    object_id: str,
    gt_paths: Sequence[Path],
    svals: np.ndarray,
    config: TrainConfig,
) -> tuple[LossBreakdown, dict[str, np.ndarray]]:
    head = state.head
    codes = state.codewords[object_id]
    n_slots = config.slots
    t_count = svals.size
    targets = pad_targets(gt_paths, n_slots, svals)

    caches = [_forward_with_cache(head, codes[i], svals) for i in range(n_slots)]
    raw = np.stack([c.raw for c in caches])  # (N, T, 6)
    conf_caches = [_confidence_with_cache(head, codes[i]) for i in range(n_slots)]
    confs = np.array([c.prob for c in conf_caches])

    match = hungarian(position_cost_matrix(targets.paths, targets.conf_targets, raw))
    perm = match.permutation
    assigned_real = targets.conf_targets[perm] > 0.5
    n_real = int(assigned_real.sum())

    d_raw = np.zeros_like(raw)
    points_total = 0.0
    if n_real:
        weight = 1.0 / (n_real * t_count)
        for i in np.nonzero(assigned_real)[0]:
            tgt = targets.paths[perm[i]]
            delta_p = raw[i, :, :3] - tgt[:, :3]
            dist = np.linalg.norm(delta_p, axis=1)
            tgt_unit = tgt[:, 3:] / np.linalg.norm(tgt[:, 3:], axis=1)[:, None]
            pred_ori = raw[i, :, 3:]
            ori_norm = np.linalg.norm(pred_ori, axis=1)
            if np.any(ori_norm < 1e-12):
                raise TrainingError(f"degenerate predicted orientation for object {object_id!r}")
            cosine = (tgt_unit * pred_ori).sum(axis=1) / ori_norm
            gap = tgt_unit - pred_ori / ori_norm[:, None]
            points_total += float((dist + 0.5 * (gap * gap).sum(axis=1)).sum()) * weight
            safe = np.where(dist > 0, dist, 1.0)
            d_raw[i, :, :3] = weight * np.where(dist[:, None] > 0, delta_p / safe[:, None], 0.0)
            d_raw[i, :, 3:] = weight * (
                cosine[:, None] * pred_ori / (ori_norm ** 2)[:, None] - tgt_unit / ori_norm[:, None]
            )

    conf_targets = targets.conf_targets[perm]
    conf_loss = focal_conf_loss(conf_targets, confs, config.gamma)
    d_prob = focal_prob_gradient(conf_targets, confs, config.gamma)

    total = zero_gradients(head)
    code_grads = np.zeros_like(codes)
    for i in range(n_slots):
        if d_raw[i].any():
            pose_grads = _backward_from_cache(head, caches[i], d_raw[i])
            accumulate_gradients(total, pose_grads)
            code_grads[i] += pose_grads.codeword
        conf_grads = _conf_backward_from_cache(head, conf_caches[i], float(d_prob[i]))
        accumulate_gradients(total, conf_grads)
        code_grads[i] += conf_grads.codeword

    grads = {
        f"head.{name}": arr for name, arr in gradient_arrays(total).items() if name != "codeword"
    }
    grads[f"codewords.{object_id}"] = code_grads
    breakdown = LossBreakdown(points_total, conf_loss, points_total + conf_loss)
    return breakdown, grads


def train_epoch(
    state: TrainState,
    dataset: Mapping[str, Sequence[Path]],
    config: TrainConfig | None = None,
) -> float:
    """One pass over the dataset (shuffled by seed), one Adam step per object.

    Returns the mean object loss; per-step breakdowns are appended to the
    state's loss history.
    """
    cfg = config or state.config
    ids = sorted(dataset)
    for object_id in ids:
        if object_id not in state.codewords:
            raise ValueError(f"object {object_id!r} has no codewords in this state")
    order = np.random.default_rng([cfg.seed, state.epoch, 0]).permutation(len(ids))
    lr = _epoch_step_size(cfg, state.epoch)
    losses = []
    for position, index in enumerate(order):
        object_id = ids[int(index)]
        sub_seed = int(np.random.SeedSequence([cfg.seed, state.epoch, position + 1]).generate_state(1)[0])
        svals = sample_params(
            ParamSamplingConfig(cfg.sampling, cfg.train_samples, cfg.sampling_noise, sub_seed)
        )
        breakdown, grads = _object_gradients(state, object_id, list(dataset[object_id]), svals, cfg)
        adam_step(state, grads, cfg, lr)
        state.loss_history.append((breakdown.points_loss, breakdown.conf_loss, breakdown.total))
        losses.append(breakdown.total)
    state.epoch += 1
    return float(np.mean(losses))


def fit(
    dataset: Mapping[str, Sequence[Path]],
    config: TrainConfig,
    state: TrainState | None = None,
    progress: Callable[[int, float], None] | None = None,
) -> TrainState:
    """Train until config.epochs, resuming from `state` when given."""
    if state is None:
        state = init_state(dataset, config)
    while state.epoch < config.epochs:
        loss = train_epoch(state, dataset, config)
        if progress is not None:
            progress(state.epoch, loss)
    return state


def predict(
    state: TrainState,
    object_id: str,
    t_test: int | None = None,
    conf_threshold: float | None = None,
) -> list[PredictedPath]:
    """Decode every slot at equispaced parameters and keep confident paths.

    Paths are returned sorted by confidence, descending; slot order
    breaks ties. The pose view normalizes orientations.
    """
    if object_id not in state.codewords:
        raise ValueError(f"unknown object {object_id!r}")
    cfg = state.config
    count = cfg.test_samples if t_test is None else int(t_test)
    threshold = cfg.conf_threshold if conf_threshold is None else float(conf_threshold)
    grid = sample_params(ParamSamplingConfig("equispaced", count))
    kept: list[PredictedPath] = []
    for slot in range(cfg.slots):
        code = state.codewords[object_id][slot]
        confidence = confidence_forward(state.head, code)
        if confidence < threshold:
            continue
        raw = head_forward_batch(state.head, code, grid)
        norms = np.linalg.norm(raw[:, 3:], axis=1)
        if np.any(norms < 1e-12):
            raise TrainingError(f"degenerate predicted orientation for object {object_id!r}")
        poses = np.concatenate([raw[:, :3], raw[:, 3:] / norms[:, None]], axis=1)
        kept.append(PredictedPath(Path(poses), confidence))
    kept.sort(key=lambda p: -p.confidence)
    return kept


def checkpoint_to_document(state: TrainState) -> dict:
    return {
        "format": CHECKPOINT_FORMAT,
        "config": state.config.to_document(),
        "head": head_to_document(state.head),
        "codewords": {oid: arr.tolist() for oid, arr in state.codewords.items()},
        "moments": {
            name: {"m": slot["m"].tolist(), "v": slot["v"].tolist(), "step": slot["step"]}
            for name, slot in state.moments.items()
        },
        "epoch": state.epoch,
        "loss_history": [list(entry) for entry in state.loss_history],
    }


def checkpoint_from_document(doc: dict) -> TrainState:
    if not isinstance(doc, dict) or doc.get("format") != CHECKPOINT_FORMAT:
        raise ValueError("not a checkpoint document")
    config_doc = dict(doc["config"])
    head_doc = config_doc.get("head")
    config = TrainConfig.from_document(config_doc)
    head = head_from_document(doc["head"])
    if head_doc is not None and asdict(head.config) != asdict(config.head):
        raise ValueError("checkpoint head config disagrees with train config")
    codewords = {}
    for object_id, values in doc["codewords"].items():
        arr = np.asarray(values, dtype=float)
        if arr.shape != (config.slots, config.head.code_dim):
            raise ValueError(f"codeword array for {object_id!r} has shape {arr.shape}")
        codewords[object_id] = arr
    moments = {}
    for name, slot in doc.get("moments", {}).items():
        moments[name] = {
            "m": np.asarray(slot["m"], dtype=float),
            "v": np.asarray(slot["v"], dtype=float),
            "step": int(slot["step"]),
        }
    history = [tuple(float(x) for x in entry) for entry in doc.get("loss_history", [])]
    return TrainState(config, head, codewords, moments, int(doc["epoch"]), history)


def save_checkpoint(state: TrainState, path) -> None:
    with open(path, "w") as fh:
        json.dump(checkpoint_to_document(state), fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def load_checkpoint(path) -> TrainState:
    with open(path) as fh:
        return checkpoint_from_document(json.load(fh))
