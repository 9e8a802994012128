"""Deterministic trainer: Adam over the combined objective.

A batch is a fixed-size group of whole dialogues (one by default); the
gradient is the ordered sum of per-dialogue gradients. Per-epoch loss
components and validation F1 are logged, and the parameters that scored
the best validation F1 are restored at the end. Everything is driven by
seeded generators, so a fixed config reproduces checkpoints bit-exactly.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field

import numpy as np

from .annotations import DEFAULT_MERGE_TOLERANCE, derive_change_points
from .autodiff import Tensor, backward
from .detection import DetectionConfig, detect_change_points
from .errors import TrainingDivergedError, ValidationError
from .labeling import SegmentMap, fuzzy_labels, segment_map
from .losses import LossConfig, combined_loss
from .metrics import MetricReport, aggregate, evaluate_annotation
from .model import FrameClassifier
from .sampling import Triplet, sample_triplets
from .simulator import Dialogue


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_epsilon: float = 1e-8
    clip_norm: float = 5.0
    batch_size: int = 1
    val_fraction: float = 0.1
    seed: int = 0
    resample_triplets: bool = True  # fresh triplets each step vs. fixed per dialogue
    min_segment_frames: int = 2
    stop_at_f1: float | None = None  # early exit once validation reaches this
    num_workers: int = 1
    deterministic_reduction: bool = True

    def __post_init__(self):
        if self.epochs < 1:
            raise ValidationError("epochs must be at least 1")
        if self.learning_rate <= 0:
            raise ValidationError("learning_rate must be positive")
        if not 0.0 < self.beta1 < 1.0 or not 0.0 < self.beta2 < 1.0:
            raise ValidationError("Adam betas must lie in (0, 1)")
        if self.adam_epsilon <= 0 or self.clip_norm <= 0:
            raise ValidationError("adam_epsilon and clip_norm must be positive")
        if self.batch_size < 1 or self.num_workers < 1:
            raise ValidationError("batch_size and num_workers must be at least 1")
        if not 0.0 <= self.val_fraction < 1.0:
            raise ValidationError("val_fraction must lie in [0, 1)")
        if self.stop_at_f1 is not None and not 0.0 < self.stop_at_f1 <= 1.0:
            raise ValidationError("stop_at_f1 must lie in (0, 1]")


class Adam:
    """Adaptive-moment updates with global-norm gradient clipping."""

    def __init__(self, params: list[Tensor], config: TrainConfig):
        self.params = params
        self.cfg = config
        self.step_count = 0
        self.moment1 = [np.zeros_like(p.value) for p in params]
        self.moment2 = [np.zeros_like(p.value) for p in params]

    def step(self, grads: dict[Tensor, np.ndarray]) -> float:
        """Apply one update; returns the pre-clip global gradient norm."""
        cfg = self.cfg
        glist = [np.asarray(grads[p], dtype=np.float64) for p in self.params]
        total = float(np.sqrt(sum(float(np.sum(g * g)) for g in glist)))
        if total > cfg.clip_norm:
            scl = cfg.clip_norm / total
            glist = [g * scl for g in glist]
        self.step_count += 1
        t = self.step_count
        bias1 = 1.0 - cfg.beta1**t
        bias2 = 1.0 - cfg.beta2**t
        for p, g, m, v in zip(self.params, glist, self.moment1, self.moment2):
            g32 = g.astype(np.float32)
            m += (1.0 - cfg.beta1) * (g32 - m)
            v += (1.0 - cfg.beta2) * (g32 * g32 - v)
            update = (m / bias1) / (np.sqrt(v / bias2) + cfg.adam_epsilon)
            p.value -= cfg.learning_rate * update
        return total


@dataclass
class Prepared:
    """A dialogue with its derived training targets."""

    dialogue: Dialogue
    labels: np.ndarray
    segments: SegmentMap
    fixed_triplets: list[Triplet] | None = None


@dataclass
class EpochRecord:
    epoch: int
    prediction_loss: float
    contrastive_loss: float
    total_loss: float
    val_f1: float | None

    def to_dict(self) -> dict:
        return {
            "epoch": self.epoch,
            "prediction_loss": self.prediction_loss,
            "contrastive_loss": self.contrastive_loss,
            "total_loss": self.total_loss,
            "val_f1": self.val_f1,
        }


@dataclass
class TrainResult:
    model: FrameClassifier
    log: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0
    best_f1: float | None = None


def split_corpus(count: int, val_fraction: float, seed: int) -> tuple[list[int], list[int]]:
    """Seeded shuffle, then the trailing fraction becomes validation."""
    order = np.random.Generator(np.random.PCG64(seed)).permutation(count)
    n_val = int(round(count * val_fraction))
    if val_fraction > 0 and n_val == 0 and count > 1:
        n_val = 1
    train = [int(i) for i in order[: count - n_val]]
    val = [int(i) for i in order[count - n_val:]]
    return train, val


def prepare(dialogue: Dialogue, merge_tolerance: float = DEFAULT_MERGE_TOLERANCE) -> Prepared:
    points = derive_change_points(dialogue.annotation, merge_tolerance)
    return Prepared(
        dialogue=dialogue,
        labels=fuzzy_labels(points, dialogue.grid),
        segments=segment_map(points, dialogue.grid),
    )


def dialogue_gradients(
    model: FrameClassifier,
    item: Prepared,
    triplets: list[Triplet],
    loss_config: LossConfig,
    rng: np.random.Generator,
) -> tuple[dict[Tensor, np.ndarray], dict[str, float]]:
    """Forward + backward on one dialogue; grads keyed by parameter."""
    pred, hidden = model.forward(item.dialogue.stack.layers)
    total, parts = combined_loss(pred, hidden, item.labels, triplets, rng, loss_config)
    if not np.isfinite(total.value).all():
        raise TrainingDivergedError(epoch=-1, step=-1)
    return backward(total, wrt=model.parameters()), parts


def validation_report(
    model: FrameClassifier,
    items: list[Prepared],
    detection: DetectionConfig,
    merge_tolerance: float = DEFAULT_MERGE_TOLERANCE,
) -> MetricReport:
    reports = []
    for item in items:
        probs = model.predict(item.dialogue.stack.layers)
        points = detect_change_points(probs, item.dialogue.grid, detection)
        reports.append(
            evaluate_annotation(item.dialogue.annotation, points, merge_tolerance)
        )
    return aggregate(reports)


def train(
    model: FrameClassifier,
    dialogues: list[Dialogue],
    config: TrainConfig | None = None,
    loss_config: LossConfig | None = None,
    detection: DetectionConfig | None = None,
    merge_tolerance: float = DEFAULT_MERGE_TOLERANCE,
    log_fn=None,
) -> TrainResult:
    """Fit the model in place and return it with the training log.

    With num_workers > 1 a batch's dialogue gradients are computed on a
    thread pool. deterministic_reduction keeps the gradient sum in batch
    order (bit-reproducible); switching it off sums in completion order,
    which is faster under contention but not bit-stable.
    """
    cfg = config or TrainConfig()
    loss_cfg = loss_config or LossConfig()
    det = detection or DetectionConfig()
    if not dialogues:
        raise ValidationError("training needs at least one dialogue")

    seeds = np.random.SeedSequence(cfg.seed).spawn(4)
    shuffle_rng = np.random.Generator(np.random.PCG64(seeds[0]))
    triplet_rng = np.random.Generator(np.random.PCG64(seeds[1]))
    negative_rng = np.random.Generator(np.random.PCG64(seeds[2]))
    split_seed = int(seeds[3].generate_state(1)[0])

    items = [prepare(d, merge_tolerance) for d in dialogues]
    train_idx, val_idx = split_corpus(len(items), cfg.val_fraction, split_seed)
    train_items = [items[i] for i in train_idx]
    val_items = [items[i] for i in val_idx]
    if not train_items:
        raise ValidationError("validation split left no training dialogues")
    if not cfg.resample_triplets:
        for item in train_items:
            item.fixed_triplets = sample_triplets(
                item.segments, triplet_rng, cfg.min_segment_frames
            )

    optimizer = Adam(model.parameters(), cfg)
    result = TrainResult(model=model)
    best_params: list[np.ndarray] | None = None

    pool = (ThreadPoolExecutor(max_workers=cfg.num_workers)
            if cfg.num_workers > 1 else None)
    try:
        for epoch in range(cfg.epochs):
            order = shuffle_rng.permutation(len(train_items))
            sums = {"prediction": 0.0, "contrastive": 0.0, "total": 0.0}
            step = 0
            for lo in range(0, len(order), cfg.batch_size):
                batch = [train_items[i] for i in order[lo: lo + cfg.batch_size]]
                # triplets and per-dialogue negative generators are drawn
                # sequentially up front so worker scheduling cannot change them
                jobs = []
                for item in batch:
                    trip = (item.fixed_triplets
                            if item.fixed_triplets is not None
                            else sample_triplets(item.segments, triplet_rng,
                                                 cfg.min_segment_frames))
                    neg_seed = int(negative_rng.integers(0, 2**63))
                    jobs.append((item, trip,
                                 np.random.Generator(np.random.PCG64(neg_seed))))

                def run(job):
                    item, trip, rng = job
                    return dialogue_gradients(model, item, trip, loss_cfg, rng)

                try:
                    if pool is None:
                        outcomes = [run(j) for j in jobs]
                    elif cfg.deterministic_reduction:
                        outcomes = list(pool.map(run, jobs))
                    else:
                        futures = [pool.submit(run, j) for j in jobs]
                        outcomes = [f.result() for f in as_completed(futures)]
                except TrainingDivergedError as exc:
                    raise TrainingDivergedError(epoch=epoch, step=step) from exc
                merged: dict[Tensor, np.ndarray] = {}
                for grads, parts in outcomes:
                    for p, g in grads.items():
                        if p in merged:
                            merged[p] = merged[p] + g
                        else:
                            merged[p] = g
                    for key in sums:
                        sums[key] += parts[key]
                if not all(np.isfinite(g).all() for g in merged.values()):
                    raise TrainingDivergedError(epoch=epoch, step=step)
                optimizer.step(merged)
                step += 1

            n = len(train_items)
            val_f1 = None
            if val_items:
                val_f1 = validation_report(model, val_items, det, merge_tolerance).f1
            record = EpochRecord(
                epoch=epoch,
                prediction_loss=sums["prediction"] / n,
                contrastive_loss=sums["contrastive"] / n,
                total_loss=sums["total"] / n,
                val_f1=val_f1,
            )
            result.log.append(record)
            if log_fn is not None:
                shown = "n/a" if val_f1 is None else f"{val_f1:.4f}"
                log_fn(
                    f"epoch {epoch}: loss {record.total_loss:.4f} "
                    f"(pred {record.prediction_loss:.4f}, "
                    f"contrast {record.contrastive_loss:.4f}), val_f1 {shown}"
                )
            if val_f1 is not None and (result.best_f1 is None or val_f1 > result.best_f1):
                result.best_f1 = val_f1
                result.best_epoch = epoch
                best_params = [p.value.copy() for p in model.parameters()]
            if (cfg.stop_at_f1 is not None and val_f1 is not None
                    and val_f1 >= cfg.stop_at_f1):
                break
    finally:
        if pool is not None:
            pool.shutdown()

    if best_params is not None:
        for p, value in zip(model.parameters(), best_params):
            p.value = value
    return result
