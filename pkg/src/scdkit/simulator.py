"""Synthetic dialogue generator in feature space.

Each speaker gets one random unit "voice" vector per layer. Speech frames
are the sum of active voices plus isotropic Gaussian noise; silence is
noise alone. Deeper layers blend the voice with a dialogue-wide drift
vector, so speaker identity fades with depth and the fusion weights have
something real to find. Turn timing (speaker alternation, pauses,
overlaps) is drawn from the config and recorded exactly in the paired
annotation, so ground truth is perfect by construction. There is no
acoustic realism here — the point is verifiable learning, not audio.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, replace

import numpy as np

from .annotations import Annotation, TimeSpan
from .errors import FileFormatError, ValidationError
from .labeling import FrameGrid
from .model import LayerStack

FEATURES_MAGIC = b"SCDF"
FEATURES_VERSION = 1

_U32_MAX = 2**32 - 1
_MASK64 = 2**64 - 1


@dataclass(frozen=True)
class SimConfig:
    """Defaults describe a small, learnable corpus: few speakers in a
    roomy feature space (voice pairs stay well separated), multi-second
    turns, light noise and drift. Harder regimes are one override away."""

    num_speakers: int = 3
    feature_dim: int = 64
    num_layers: int = 4
    frame_rate: float = 50.0
    num_turns: int = 5
    segment_duration: tuple[float, float] = (2.0, 5.0)
    pause_prob: float = 0.3
    pause_duration: tuple[float, float] = (0.4, 1.0)
    overlap_prob: float = 0.1
    overlap_duration: tuple[float, float] = (0.3, 0.5)
    noise_sigma: float = 0.05
    layer_drift: float = 0.25
    identity_layer: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.num_speakers < 1:
            raise ValidationError("num_speakers must be at least 1")
        if self.feature_dim < 1 or self.num_layers < 1:
            raise ValidationError("feature_dim and num_layers must be positive")
        if self.frame_rate <= 0:
            raise ValidationError(f"frame_rate must be positive, got {self.frame_rate}")
        if self.num_turns < 1:
            raise ValidationError("num_turns must be at least 1")
        for name in ("segment_duration", "pause_duration", "overlap_duration"):
            lo, hi = getattr(self, name)
            if not 0 < lo <= hi:
                raise ValidationError(f"{name} range ({lo}, {hi}) must be 0 < min <= max")
        for name in ("pause_prob", "overlap_prob"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValidationError(f"{name} must lie in [0, 1], got {p}")
        if self.noise_sigma < 0:
            raise ValidationError("noise_sigma must be non-negative")
        if not 0.0 <= self.layer_drift <= 1.0:
            raise ValidationError("layer_drift must lie in [0, 1]")
        if self.identity_layer is not None and not (
                0 <= self.identity_layer < self.num_layers):
            raise ValidationError(
                f"identity_layer {self.identity_layer} outside 0..{self.num_layers - 1}"
            )


@dataclass(frozen=True)
class Dialogue:
    stack: LayerStack
    annotation: Annotation
    grid: FrameGrid


def _unit(rng: np.random.Generator, dim: int) -> np.ndarray:
    v = rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def _voice_table(cfg: SimConfig, rng: np.random.Generator) -> np.ndarray:
    """Per-layer per-speaker unit voices, (L, K, D).

    Layer l mixes the raw voice with a shared drift vector at weight
    layer_drift * l / (L - 1). With identity_layer set, that layer keeps
    the pure voice and every other layer gets a zero voice, so its frames
    are noise alone and carry no identity at all.
    """
    l_num, k_num, d = cfg.num_layers, cfg.num_speakers, cfg.feature_dim
    drift = np.stack([_unit(rng, d) for _ in range(l_num)])
    raw = np.stack([[_unit(rng, d) for _ in range(k_num)] for _ in range(l_num)])
    voices = np.zeros((l_num, k_num, d))
    for l in range(l_num):
        if cfg.identity_layer is not None:
            if l != cfg.identity_layer:
                continue
            m = 0.0
        elif l_num == 1:
            m = 0.0
        else:
            m = cfg.layer_drift * l / (l_num - 1)
        for k in range(k_num):
            mixed = (1.0 - m) * raw[l, k] + m * drift[l]
            voices[l, k] = mixed / np.linalg.norm(mixed)
    return voices


def _turn_plan(cfg: SimConfig, rng: np.random.Generator) -> list[tuple[float, float, int]]:
    """(start, end, speaker) per turn. Starts at 0; no immediate self-follow."""
    lo, hi = cfg.segment_duration
    speakers: list[int] = []
    for _ in range(cfg.num_turns):
        if not speakers or cfg.num_speakers == 1:
            speakers.append(int(rng.integers(0, cfg.num_speakers)))
        else:
            nxt = int(rng.integers(0, cfg.num_speakers - 1))
            if nxt >= speakers[-1]:
                nxt += 1
            speakers.append(nxt)
    turns: list[tuple[float, float, int]] = []
    cursor = 0.0
    prev_dur = 0.0
    for i, spk in enumerate(speakers):
        dur = float(rng.uniform(lo, hi))
        if i > 0:
            u_overlap = float(rng.uniform())
            u_pause = float(rng.uniform())
            can_overlap = speakers[i - 1] != spk
            if can_overlap and u_overlap < cfg.overlap_prob:
                ov = float(rng.uniform(*cfg.overlap_duration))
                # same-speaker spans one junction apart must stay disjoint
                ov = min(ov, 0.5 * prev_dur, 0.5 * dur)
                cursor -= ov
            elif u_pause < cfg.pause_prob:
                cursor += float(rng.uniform(*cfg.pause_duration))
        start = cursor
        cursor = start + dur
        prev_dur = dur
        turns.append((start, cursor, spk))
    return turns


def _merge_contiguous(turns: list[tuple[float, float, int]]) -> list[tuple[float, float, int]]:
    """Fold a turn into its predecessor when the same speaker continues
    with no gap (only possible for K=1, where self-follow is allowed)."""
    merged: list[tuple[float, float, int]] = []
    for start, end, spk in turns:
        if merged and merged[-1][2] == spk and start <= merged[-1][1]:
            prev = merged[-1]
            merged[-1] = (prev[0], max(prev[1], end), spk)
        else:
            merged.append((start, end, spk))
    return merged


def simulate(cfg: SimConfig) -> Dialogue:
    """Generate one dialogue; identical configs give identical results."""
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    voices = _voice_table(cfg, rng)
    turns = _merge_contiguous(_turn_plan(cfg, rng))
    last_end = max(end for _, end, _ in turns)
    num_frames = int(np.ceil(last_end * cfg.frame_rate))
    if num_frames < 1:
        raise ValidationError("configuration yields a zero-frame dialogue")
    grid = FrameGrid(num_frames=num_frames, frame_rate=cfg.frame_rate)
    extent = TimeSpan(0.0, last_end)
    annotation = Annotation.from_entries(
        [(TimeSpan(s, e), f"spk{k:02d}") for s, e, k in turns], extent=extent
    )
    instants = grid.instants()
    stack = np.empty((cfg.num_layers, num_frames, cfg.feature_dim), dtype=np.float32)
    for l in range(cfg.num_layers):
        frame = rng.normal(0.0, cfg.noise_sigma, size=(num_frames, cfg.feature_dim))
        for s, e, k in turns:
            active = (instants >= s) & (instants < e)
            frame[active] += voices[l, k]
        stack[l] = frame.astype(np.float32)
    return Dialogue(
        stack=LayerStack(stack, frame_rate=cfg.frame_rate, source=f"sim:{cfg.seed}"),
        annotation=annotation,
        grid=grid,
    )


def splitmix64(state: int) -> tuple[int, int]:
    """One step of the splitmix64 sequence: (next_state, output)."""
    state = (state + 0x9E3779B97F4A7C15) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return state, z ^ (z >> 31)


def derive_seeds(master_seed: int, count: int) -> list[int]:
    """Per-dialogue seeds from a master seed, stable across corpus sizes."""
    state = master_seed & _MASK64
    seeds = []
    for _ in range(count):
        state, value = splitmix64(state)
        seeds.append(value)
    return seeds


def simulate_corpus(cfg: SimConfig, count: int) -> list[Dialogue]:
    """count dialogues with seeds derived from cfg.seed.

    Dialogues are independent given their derived seeds, so they could be
    generated in parallel; at these sizes a simple loop is fast enough.
    """
    if count < 0:
        raise ValidationError("count must be non-negative")
    return [simulate(replace(cfg, seed=s)) for s in derive_seeds(cfg.seed, count)]


# ---------------------------------------------------------------------------
# feature file: "SCDF", u32 version, u32 L, u32 T, u32 D, f32 frame_rate,
# then L*T*D little-endian float32 values (layer-major, then row-major).

_FEATURES_HEADER = struct.Struct("<4sIIIIf")


def features_bytes(stack: LayerStack) -> bytes:
    l, t, d = stack.layers.shape
    if max(l, t, d) > _U32_MAX:
        raise FileFormatError("stack dimensions overflow the u32 header fields")
    head = _FEATURES_HEADER.pack(FEATURES_MAGIC, FEATURES_VERSION, l, t, d,
                                 stack.frame_rate)
    return head + np.ascontiguousarray(stack.layers, dtype="<f4").tobytes()


def write_features(stack: LayerStack, path) -> None:
    with open(path, "wb") as fh:
        fh.write(features_bytes(stack))


def features_from_bytes(blob: bytes) -> LayerStack:
    if len(blob) < _FEATURES_HEADER.size:
        raise FileFormatError("feature file truncated before header")
    magic, version, l, t, d, frame_rate = _FEATURES_HEADER.unpack_from(blob)
    if magic != FEATURES_MAGIC:
        raise FileFormatError(f"bad feature magic {magic!r}")
    if version != FEATURES_VERSION:
        raise FileFormatError(f"unsupported feature version {version}")
    if min(l, t, d) < 1:
        raise FileFormatError(f"bad feature dimensions L={l}, T={t}, D={d}")
    expected = 4 * l * t * d
    payload = blob[_FEATURES_HEADER.size:]
    if len(payload) != expected:
        raise FileFormatError(
            f"feature payload holds {len(payload)} bytes, expected {expected}"
        )
    layers = np.frombuffer(payload, dtype="<f4").reshape(l, t, d).astype(np.float32)
    return LayerStack(layers, frame_rate=frame_rate)


def read_features(path) -> LayerStack:
    with open(path, "rb") as fh:
        return features_from_bytes(fh.read())
