"""Training objective: prediction loss plus weighted contrastive loss.

The prediction term compares per-frame probabilities against fuzzy labels
under a mean L1 (default) or L2 norm. The contrastive term pushes triplet
anchors toward positives and away from negatives in every block's hidden
space, with cosine similarity remapped from [-1, 1] to [0, 1] and clamped
away from {0, 1} so the logs stay finite.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ShapeError, ValidationError
from .sampling import RANDOM_VECTOR, Triplet, random_unit_vector

DEFAULT_ALPHA = 0.05
DEFAULT_EPSILON = 1e-7

NORM_KINDS = ("l1", "l2")


class NoTripletsWarning(UserWarning):
    """Raised (as a warning) when a batch yields no usable triplets."""


@dataclass(frozen=True)
class LossConfig:
    alpha: float = DEFAULT_ALPHA
    similarity_epsilon: float = DEFAULT_EPSILON
    norm_kind: str = "l1"

    def __post_init__(self):
        if self.alpha < 0:
            raise ValidationError(f"alpha must be non-negative, got {self.alpha}")
        object.__setattr__(self, "norm_kind", str(self.norm_kind).lower())
        if self.norm_kind not in NORM_KINDS:
            raise ValidationError(
                f"norm_kind must be one of {NORM_KINDS}, got {self.norm_kind!r}"
            )
        if not 0 < self.similarity_epsilon < 0.5:
            raise ValidationError(
                f"similarity_epsilon must lie in (0, 0.5), got {self.similarity_epsilon}"
            )


def prediction_loss(pred: Tensor, labels: np.ndarray, norm: str = "l1") -> Tensor:
    """Mean per-frame deviation between probabilities and fuzzy labels."""
    y = np.asarray(labels, dtype=pred.value.dtype).reshape(-1, 1)
    if y.shape != pred.shape:
        raise ShapeError(f"labels {y.shape} do not match predictions {pred.shape}")
    diff = ad.sub(pred, Tensor(y))
    if norm == "l1":
        return ad.mean_all(ad.absolute(diff))
    if norm == "l2":
        return ad.mean_all(ad.mul(diff, diff))
    raise ValidationError(f"unknown prediction norm {norm!r}")


def _similarity(a: Tensor, b: Tensor, epsilon: float) -> Tensor:
    """Cosine similarity remapped to (epsilon, 1 - epsilon)."""
    s = ad.scale(ad.add_scalar(ad.cosine_rowwise(a, b), 1.0), 0.5)
    return ad.clamp(s, epsilon, 1.0 - epsilon)


def contrastive_loss(
    hidden: list[Tensor],
    triplets: list[Triplet],
    rng: np.random.Generator,
    epsilon: float = DEFAULT_EPSILON,
) -> Tensor:
    """Average triplet term over all blocks.

    loss = -(1 / (T_e * N)) * sum_j sum_i [log s+(i,j) + log(1 - s-(i,j))]

    The same triplet indices apply to every block; RANDOM_VECTOR negatives
    are materialized as fresh unit vectors per (triplet, block), since each
    block lives in its own representation space. An empty triplet list
    contributes zero and emits NoTripletsWarning.
    """
    if not hidden:
        raise ValidationError("contrastive_loss needs at least one hidden layer")
    if not triplets:
        warnings.warn("no triplets in batch; contrastive term is zero",
                      NoTripletsWarning, stacklevel=2)
        return Tensor(np.zeros((1, 1), dtype=hidden[0].value.dtype))
    num_frames = hidden[0].shape[0]
    anchor_idx = np.array([t.anchor for t in triplets], dtype=np.int64)
    pos_idx = np.array([t.positive for t in triplets], dtype=np.int64)
    neg_idx = np.array([t.negative for t in triplets], dtype=np.int64)
    random_slots = np.flatnonzero(neg_idx == RANDOM_VECTOR)
    resolved_neg = neg_idx.copy()
    resolved_neg[random_slots] = num_frames + np.arange(random_slots.size)
    if (anchor_idx.max() >= num_frames or pos_idx.max() >= num_frames
            or (np.delete(neg_idx, random_slots).max(initial=-1) >= num_frames)):
        raise ValidationError("triplet frame index outside the hidden sequence")

    total: Tensor | None = None
    for h in hidden:
        if h.shape[0] != num_frames:
            raise ShapeError("hidden layers disagree on sequence length")
        if random_slots.size:
            extra = np.stack(
                [random_unit_vector(h.shape[1], rng) for _ in random_slots]
            ).astype(h.value.dtype)
            table = ad.concat_rows(h, Tensor(extra))
        else:
            table = h
        anchors = ad.gather_rows(table, anchor_idx)
        positives = ad.gather_rows(table, pos_idx)
        negatives = ad.gather_rows(table, resolved_neg)
        s_pos = _similarity(anchors, positives, epsilon)
        s_neg = _similarity(anchors, negatives, epsilon)
        keep = ad.add(ad.log(s_pos),
                      ad.log(ad.add_scalar(ad.scale(s_neg, -1.0), 1.0)))
        layer_sum = ad.sum_all(keep)
        total = layer_sum if total is None else ad.add(total, layer_sum)
    return ad.scale(total, -1.0 / (len(triplets) * len(hidden)))


def combined_loss(
    pred: Tensor,
    hidden: list[Tensor],
    labels: np.ndarray,
    triplets: list[Triplet],
    rng: np.random.Generator,
    config: LossConfig | None = None,
) -> tuple[Tensor, dict[str, float]]:
    """Total objective and its scalar components.

    total = prediction + alpha * contrastive
    """
    cfg = config or LossConfig()
    pred_term = prediction_loss(pred, labels, cfg.norm_kind)
    if cfg.alpha > 0:
        con_term = contrastive_loss(hidden, triplets, rng, cfg.similarity_epsilon)
        total = ad.add(pred_term, ad.scale(con_term, cfg.alpha))
        con_value = con_term.item()
    else:
        total = pred_term
        con_value = 0.0
    parts = {
        "prediction": pred_term.item(),
        "contrastive": con_value,
        "total": total.item(),
    }
    return total, parts
