"""Set-to-set training objective over padded path slots.

Ground-truth paths are resampled at the drawn scalar parameters and
zero-padded up to the number of prediction slots. A bipartite matching on
mean 3D position distance assigns each prediction a target slot; matched
real slots contribute a position+orientation points loss and every slot
contributes a focal confidence loss.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .paths import Path, PredictedPath, resample

CONF_CLAMP = 1e-7

__all__ = [
    "CONF_CLAMP",
    "MatchResult",
    "PaddedTargets",
    "LossBreakdown",
    "pad_targets",
    "match_cost",
    "hungarian",
    "points_loss",
    "focal_conf_loss",
    "total_loss",
]


@dataclass(frozen=True)
class MatchResult:
    """permutation[i] is the target slot assigned to prediction i."""

    permutation: np.ndarray
    total_cost: float


@dataclass(frozen=True)
class PaddedTargets:
    """(N, T, 6) target array, real paths first, all-zero padding after."""

    paths: np.ndarray
    conf_targets: np.ndarray  # (N,) 1.0 for real slots, 0.0 for padding


@dataclass(frozen=True)
class LossBreakdown:
    points_loss: float
    conf_loss: float
    total: float


def pad_targets(gt: Sequence[Path], n_slots: int, params: Sequence[float]) -> PaddedTargets:
    """Resample every ground-truth path at params, zero-pad up to n_slots."""
    gt = list(gt)
    if n_slots < len(gt):
        raise ValueError(f"{len(gt)} ground-truth paths exceed the {n_slots} available slots")
    vals = np.asarray(params, dtype=float)
    if vals.ndim != 1 or vals.size == 0:
        raise ValueError("params must be a nonempty 1-D sequence")
    arrays = np.zeros((n_slots, vals.size, 6))
    for i, path in enumerate(gt):
        arrays[i] = resample(path, vals).poses
    conf = np.zeros(n_slots)
    conf[: len(gt)] = 1.0
    return PaddedTargets(arrays, conf)


def match_cost(target, pred, is_real: bool) -> float:
    """Mean position distance at equal sample index; padded slots cost 0."""
    tgt = np.asarray(target, dtype=float)
    prd = np.asarray(pred, dtype=float)
    if tgt.ndim != 2 or prd.ndim != 2 or tgt.shape[1] not in (3, 6) or tgt.shape != prd.shape:
        raise ValueError("target and prediction must be equal-shape (T, 3) or (T, 6) arrays")
    if not is_real:
        return 0.0
    return float(np.linalg.norm(tgt[:, :3] - prd[:, :3], axis=1).mean())


def hungarian(cost) -> MatchResult:
    """Minimum-cost assignment on a square matrix, O(N^3).

    Shortest-augmenting-path implementation with dual potentials. The
    scan order makes the result deterministic; when several assignments
    tie on cost the lexicographically smallest permutation is returned
    (resolved on the tight-edge graph of the optimal duals).
    """
    c = np.asarray(cost, dtype=float)
    if c.ndim != 2 or c.shape[0] != c.shape[1] or c.shape[0] == 0:
        raise ValueError("cost must be a nonempty square matrix")
    if not np.all(np.isfinite(c)):
        raise ValueError("cost entries must be finite")
    n = c.shape[0]

    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    p = np.zeros(n + 1, dtype=int)  # p[j]: row matched to column j, 1-based, 0 = free
    way = np.zeros(n + 1, dtype=int)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = np.full(n + 1, np.inf)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = p[j0]
            free = np.nonzero(~used[1:])[0] + 1
            cur = c[i0 - 1, free - 1] - u[i0] - v[free]
            better = cur < minv[free]
            minv[free] = np.where(better, cur, minv[free])
            way[free[better]] = j0
            pick = int(np.argmin(minv[free]))  # first minimum: smallest column wins ties
            j1 = int(free[pick])
            delta = float(minv[j1])
            u[p[used]] += delta
            v[used] -= delta
            minv[~used] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0:
            j1 = int(way[j0])
            p[j0] = p[j1]
            j0 = j1

    perm = np.zeros(n, dtype=int)
    perm[p[1:] - 1] = np.arange(n)

    # Complementary slackness: every optimal assignment lives on edges with
    # zero reduced cost. If any row has more than one such edge the optimum
    # may be non-unique; re-pick the lexicographically smallest matching.
    reduced = c - u[1:][:, None] - v[1:][None, :]
    tol = 1e-9 * max(1.0, float(np.abs(c).max()))
    tight = reduced <= tol
    if np.any(tight.sum(axis=1) > 1):
        refined = _lex_smallest_tight_matching(tight)
        if refined is not None:
            perm = refined

    total = 0.0
    for i in range(n):
        total += float(c[i, perm[i]])
    return MatchResult(perm, total)


def _lex_smallest_tight_matching(tight: np.ndarray) -> np.ndarray | None:
    """Lexicographically smallest perfect matching on the tight-edge graph."""
    n = tight.shape[0]
    adjacency = [np.nonzero(tight[r])[0].tolist() for r in range(n)]
    used = np.zeros(n, dtype=bool)
    chosen = np.empty(n, dtype=int)
    for row in range(n):
        placed = False
        for col in adjacency[row]:
            if used[col]:
                continue
            used[col] = True
            if _rows_matchable(adjacency, used, row + 1, n):
                chosen[row] = col
                placed = True
                break
            used[col] = False
        if not placed:
            return None
    return chosen


def _rows_matchable(adjacency, used_cols, start: int, n: int) -> bool:
    row_of: dict[int, int] = {}

    def augment(row: int, seen: set[int]) -> bool:
        for col in adjacency[row]:
            if used_cols[col] or col in seen:
                continue
            seen.add(col)
            if col not in row_of or augment(row_of[col], seen):
                row_of[col] = row
                return True
        return False

    for row in range(start, n):
        if not augment(row, set()):
            return False
    return True


def points_loss(matched_pairs: Iterable[tuple[np.ndarray, np.ndarray]]) -> float:
    """Mean over real slots and samples of position distance + cosine gap.

    Each term is ||p - p_hat|| + (1 - cos angle(v, v_hat)) with both
    orientation vectors normalized before the cosine.
    """
    total = 0.0
    count = 0
    for target, pred in matched_pairs:
        tgt = np.asarray(target, dtype=float)
        prd = np.asarray(pred, dtype=float)
        if tgt.shape != prd.shape or tgt.ndim != 2 or tgt.shape[1] != 6:
            raise ValueError("matched pair must be equal-shape (T, 6) arrays")
        dist = np.linalg.norm(tgt[:, :3] - prd[:, :3], axis=1)
        tgt_norm = np.linalg.norm(tgt[:, 3:], axis=1)
        prd_norm = np.linalg.norm(prd[:, 3:], axis=1)
        if np.any(tgt_norm < 1e-12) or np.any(prd_norm < 1e-12):
            raise ValueError("zero-norm orientation in points loss")
        # 1 - cos computed as half the squared unit-vector gap: same value,
        # but exactly 0 for identical inputs and never negative
        gap = tgt[:, 3:] / tgt_norm[:, None] - prd[:, 3:] / prd_norm[:, None]
        total += float((dist + 0.5 * (gap * gap).sum(axis=1)).sum())
        count += tgt.shape[0]
    return total / count if count else 0.0


def focal_conf_loss(targets, predicted, gamma: float = 2.0) -> float:
    """Focal confidence loss summed over slots.

    Target 1 contributes -(1-f)^gamma * log f, target 0 contributes
    -f^gamma * log(1-f); predictions are clamped away from {0, 1} before
    the logarithm.
    """
    tgt = np.asarray(targets, dtype=float)
    f = np.asarray(predicted, dtype=float)
    if tgt.shape != f.shape:
        raise ValueError("targets and predictions must have equal shape")
    f = np.clip(f, CONF_CLAMP, 1.0 - CONF_CLAMP)
    positive = tgt > 0.5
    terms = np.where(
        positive,
        -((1.0 - f) ** gamma) * np.log(f),
        -(f ** gamma) * np.log(1.0 - f),
    )
    return float(terms.sum())


def position_cost_matrix(target_paths: np.ndarray, conf_targets: np.ndarray, pred_paths: np.ndarray) -> np.ndarray:
    """(N, N) matching cost: rows are predictions, columns are target slots."""
    diff = pred_paths[:, None, :, :3] - target_paths[None, :, :, :3]
    cost = np.sqrt((diff ** 2).sum(axis=3)).mean(axis=2)
    return cost * (conf_targets > 0.5)[None, :]


def total_loss(
    gt: Sequence[Path],
    preds: Sequence[PredictedPath],
    n_slots: int,
    params: Sequence[float],
    gamma: float = 2.0,
) -> LossBreakdown:
    """Full training objective for one object: points loss plus confidence loss."""
    preds = list(preds)
    if len(preds) != n_slots:
        raise ValueError(f"expected {n_slots} predictions, got {len(preds)}")
    targets = pad_targets(gt, n_slots, params)
    vals = np.asarray(params, dtype=float)
    arrays = np.stack([p.path.poses for p in preds])
    if arrays.shape[1] != vals.size:
        raise ValueError("predictions are not sampled at the given params")
    confidences = np.array([p.confidence for p in preds])

    cost = position_cost_matrix(targets.paths, targets.conf_targets, arrays)
    result = hungarian(cost)
    is_real = targets.conf_targets > 0.5
    pairs = [
        (targets.paths[result.permutation[i]], arrays[i])
        for i in range(n_slots)
        if is_real[result.permutation[i]]
    ]
    points = points_loss(pairs) if pairs else 0.0
    conf = focal_conf_loss(targets.conf_targets[result.permutation], confidences, gamma)
    return LossBreakdown(points, conf, points + conf)
