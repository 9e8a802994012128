"""Frame-level change classifier over a stack of feature layers.

The input is an (L, T, D) stack of per-frame feature layers. A learnable
softmax-weighted fusion collapses the stack to (T, D); a linear projection
with sinusoidal positions lifts it to width H; N residual blocks
(half-weighted feed-forward, self-attention, depthwise convolution,
half-weighted feed-forward, each behind its own layer norm) refine it; a
sigmoid head emits one change probability per frame. Each block's final
normalized output is kept for the contrastive objective.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import FileFormatError, ShapeError, ValidationError

FF_EXPANSION = 2
DEFAULT_HIDDEN_DIM = 64
DEFAULT_NUM_BLOCKS = 3
DEFAULT_KERNEL_SIZE = 7

CHECKPOINT_MAGIC = b"SCDN"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class LayerStack:
    """An (L, T, D) stack of per-frame feature layers plus its frame rate."""

    layers: np.ndarray
    frame_rate: float = 50.0
    source: str = ""

    def __post_init__(self):
        arr = np.asarray(self.layers, dtype=np.float32)
        if arr.ndim != 3 or min(arr.shape) < 1:
            raise ShapeError(f"layer stack must be (L, T, D), got {arr.shape}")
        if not np.isfinite(arr).all():
            raise ValidationError("layer stack contains non-finite values")
        if self.frame_rate <= 0:
            raise ValidationError(f"frame_rate must be positive, got {self.frame_rate}")
        object.__setattr__(self, "layers", arr)

    @property
    def num_layers(self) -> int:
        return self.layers.shape[0]

    @property
    def num_frames(self) -> int:
        return self.layers.shape[1]

    @property
    def dim(self) -> int:
        return self.layers.shape[2]


@dataclass(frozen=True)
class ModelConfig:
    num_input_layers: int
    input_dim: int
    hidden_dim: int = DEFAULT_HIDDEN_DIM
    num_blocks: int = DEFAULT_NUM_BLOCKS
    kernel_size: int = DEFAULT_KERNEL_SIZE

    def __post_init__(self):
        for field in ("num_input_layers", "input_dim", "hidden_dim",
                      "num_blocks", "kernel_size"):
            v = getattr(self, field)
            if not isinstance(v, int) or v < 1:
                raise ValidationError(f"{field} must be a positive integer, got {v!r}")
        if self.hidden_dim % 2 != 0:
            raise ValidationError("hidden_dim must be even (paired sinusoid columns)")


def parameter_shapes(config: ModelConfig) -> dict[str, tuple[int, int]]:
    """Canonical parameter table; declaration order fixes serialization order."""
    l, d, h, k = (config.num_input_layers, config.input_dim,
                  config.hidden_dim, config.kernel_size)
    f = FF_EXPANSION * h
    shapes: dict[str, tuple[int, int]] = {
        "fusion.logits": (1, l),
        "input.weight": (d, h),
        "input.bias": (1, h),
    }
    for j in range(config.num_blocks):
        p = f"block{j}"
        shapes[f"{p}.ln1.gamma"] = (1, h)
        shapes[f"{p}.ln1.beta"] = (1, h)
        shapes[f"{p}.ffn1.w1"] = (h, f)
        shapes[f"{p}.ffn1.b1"] = (1, f)
        shapes[f"{p}.ffn1.w2"] = (f, h)
        shapes[f"{p}.ffn1.b2"] = (1, h)
        shapes[f"{p}.ln2.gamma"] = (1, h)
        shapes[f"{p}.ln2.beta"] = (1, h)
        for head in ("q", "k", "v", "o"):
            shapes[f"{p}.attn.w{head}"] = (h, h)
            shapes[f"{p}.attn.b{head}"] = (1, h)
        shapes[f"{p}.ln3.gamma"] = (1, h)
        shapes[f"{p}.ln3.beta"] = (1, h)
        shapes[f"{p}.conv.kernel"] = (k, h)
        shapes[f"{p}.conv.bias"] = (1, h)
        shapes[f"{p}.ln4.gamma"] = (1, h)
        shapes[f"{p}.ln4.beta"] = (1, h)
        shapes[f"{p}.ffn2.w1"] = (h, f)
        shapes[f"{p}.ffn2.b1"] = (1, f)
        shapes[f"{p}.ffn2.w2"] = (f, h)
        shapes[f"{p}.ffn2.b2"] = (1, h)
        shapes[f"{p}.ln5.gamma"] = (1, h)
        shapes[f"{p}.ln5.beta"] = (1, h)
    shapes["head.weight"] = (h, 1)
    shapes["head.bias"] = (1, 1)
    return shapes


def init_parameters(config: ModelConfig, seed: int = 0) -> dict[str, Tensor]:
    """Uniform +-1/sqrt(fan_in) weights, zero biases and fusion logits,
    identity layer norms. fan_in is the contracted axis (rows).

    The output head starts at the no-change prior (zero weights, bias -2)
    rather than at a random projection: change frames are rare, and a head
    that opens with confident random guesses floods peak picking with
    spurious detections until training undoes the damage. Starting quiet
    costs one epoch of head warm-up and nothing else."""
    rng = np.random.Generator(np.random.PCG64(seed))
    params: dict[str, Tensor] = {}
    for name, shape in parameter_shapes(config).items():
        leaf = name.rsplit(".", 1)[1]
        if name == "head.weight":
            value = np.zeros(shape, dtype=np.float32)
        elif name == "head.bias":
            value = np.full(shape, -2.0, dtype=np.float32)
        elif leaf == "gamma":
            value = np.ones(shape, dtype=np.float32)
        elif leaf in ("beta", "bias", "logits") or leaf.startswith("b"):
            value = np.zeros(shape, dtype=np.float32)
        else:
            bound = 1.0 / np.sqrt(shape[0])
            value = rng.uniform(-bound, bound, size=shape).astype(np.float32)
        params[name] = Tensor(value, requires_grad=True)
    return params


def positional_encoding(num_frames: int, width: int) -> np.ndarray:
    """Interleaved sine/cosine position table, (T, H) float32."""
    pos = np.arange(num_frames, dtype=np.float64)[:, None]
    idx = np.arange(width // 2, dtype=np.float64)[None, :]
    angle = pos * np.power(10000.0, -2.0 * idx / width)
    pe = np.empty((num_frames, width), dtype=np.float32)
    pe[:, 0::2] = np.sin(angle)
    pe[:, 1::2] = np.cos(angle)
    return pe


class FrameClassifier:
    """The classifier: parameters plus the forward graph builder."""

    def __init__(self, config: ModelConfig, params: dict[str, Tensor] | None = None,
                 seed: int = 0):
        self.config = config
        expected = parameter_shapes(config)
        if params is None:
            params = init_parameters(config, seed)
        if list(params) != list(expected):
            raise ValidationError("parameter names do not match the model config")
        for name, tensor in params.items():
            if tensor.shape != expected[name]:
                raise ShapeError(
                    f"parameter {name}: expected {expected[name]}, got {tensor.shape}"
                )
        self.params = params

    def parameters(self) -> list[Tensor]:
        return list(self.params.values())

    def parameter_names(self) -> list[str]:
        return list(self.params)

    def num_parameters(self) -> int:
        return sum(t.value.size for t in self.params.values())

    def fusion_weights(self) -> np.ndarray:
        """Current softmax layer weights, length L float64."""
        logits = self.params["fusion.logits"].value.astype(np.float64).ravel()
        e = np.exp(logits - logits.max())
        return e / e.sum()

    def _check_stack(self, stack: np.ndarray) -> np.ndarray:
        stack = np.asarray(stack, dtype=np.float32)
        c = self.config
        if stack.ndim != 3 or stack.shape[0] != c.num_input_layers \
                or stack.shape[2] != c.input_dim:
            raise ShapeError(
                f"feature stack {stack.shape} does not match "
                f"(L={c.num_input_layers}, T, D={c.input_dim})"
            )
        if stack.shape[1] < 1:
            raise ShapeError("feature stack needs at least one frame")
        if not np.isfinite(stack).all():
            raise ValidationError("feature stack contains non-finite values")
        return stack

    def _ffn(self, x: Tensor, prefix: str) -> Tensor:
        p = self.params
        h = ad.relu(ad.add(ad.matmul(x, p[f"{prefix}.w1"]), p[f"{prefix}.b1"]))
        return ad.add(ad.matmul(h, p[f"{prefix}.w2"]), p[f"{prefix}.b2"])

    def _norm(self, x: Tensor, prefix: str) -> Tensor:
        p = self.params
        return ad.layer_norm(x, p[f"{prefix}.gamma"], p[f"{prefix}.beta"])

    def _attention(self, x: Tensor, prefix: str) -> Tensor:
        p = self.params

        def proj(tag):
            return ad.add(ad.matmul(x, p[f"{prefix}.w{tag}"]), p[f"{prefix}.b{tag}"])

        mixed = ad.attention(proj("q"), proj("k"), proj("v"))
        return ad.add(ad.matmul(mixed, p[f"{prefix}.wo"]), p[f"{prefix}.bo"])

    def forward(self, stack: np.ndarray) -> tuple[Tensor, list[Tensor]]:
        """Build the graph; returns (per-frame probabilities (T, 1),
        the N per-block normalized hidden states (T, H))."""
        stack = self._check_stack(stack)
        p = self.params
        x = ad.fuse_layers(p["fusion.logits"], stack)
        x = ad.add(ad.matmul(x, p["input.weight"]), p["input.bias"])
        x = ad.add(x, Tensor(positional_encoding(stack.shape[1], self.config.hidden_dim)))
        hidden: list[Tensor] = []
        for j in range(self.config.num_blocks):
            b = f"block{j}"
            x = ad.add(x, ad.scale(self._ffn(self._norm(x, f"{b}.ln1"), f"{b}.ffn1"), 0.5))
            x = ad.add(x, self._attention(self._norm(x, f"{b}.ln2"), f"{b}.attn"))
            conv_in = self._norm(x, f"{b}.ln3")
            x = ad.add(x, ad.depthwise_conv1d(conv_in, p[f"{b}.conv.kernel"],
                                              p[f"{b}.conv.bias"]))
            x = ad.add(x, ad.scale(self._ffn(self._norm(x, f"{b}.ln4"), f"{b}.ffn2"), 0.5))
            x = self._norm(x, f"{b}.ln5")
            hidden.append(x)
        pred = ad.sigmoid(ad.add(ad.matmul(x, p["head.weight"]), p["head.bias"]))
        return pred, hidden

    def predict(self, stack: np.ndarray) -> np.ndarray:
        """Per-frame change probabilities as a length-T float array."""
        pred, _ = self.forward(stack)
        return pred.value[:, 0].copy()


# ---------------------------------------------------------------------------
# checkpoint format: "SCDN", then six little-endian u32 (version, L, D, H,
# N, k), then every parameter's float32 entries in declaration order.

_HEADER = struct.Struct("<4s6I")


def checkpoint_bytes(model: FrameClassifier) -> bytes:
    c = model.config
    head = _HEADER.pack(CHECKPOINT_MAGIC, CHECKPOINT_VERSION, c.num_input_layers,
                        c.input_dim, c.hidden_dim, c.num_blocks, c.kernel_size)
    body = b"".join(
        np.ascontiguousarray(t.value, dtype="<f4").tobytes()
        for t in model.parameters()
    )
    return head + body


def save_checkpoint(model: FrameClassifier, path) -> None:
    with open(path, "wb") as fh:
        fh.write(checkpoint_bytes(model))


def checkpoint_from_bytes(blob: bytes) -> FrameClassifier:
    if len(blob) < _HEADER.size:
        raise FileFormatError("checkpoint truncated before header")
    magic, version, l, d, h, n, k = _HEADER.unpack_from(blob)
    if magic != CHECKPOINT_MAGIC:
        raise FileFormatError(f"bad checkpoint magic {magic!r}")
    if version != CHECKPOINT_VERSION:
        raise FileFormatError(f"unsupported checkpoint version {version}")
    try:
        config = ModelConfig(num_input_layers=l, input_dim=d, hidden_dim=h,
                             num_blocks=n, kernel_size=k)
    except ValidationError as exc:
        raise FileFormatError(f"bad checkpoint header: {exc}") from exc
    shapes = parameter_shapes(config)
    expected = sum(r * c for r, c in shapes.values())
    payload = blob[_HEADER.size:]
    if len(payload) != 4 * expected:
        raise FileFormatError(
            f"checkpoint payload holds {len(payload)} bytes, expected {4 * expected}"
        )
    flat = np.frombuffer(payload, dtype="<f4")
    params: dict[str, Tensor] = {}
    offset = 0
    for name, shape in shapes.items():
        count = shape[0] * shape[1]
        value = flat[offset:offset + count].reshape(shape).astype(np.float32)
        params[name] = Tensor(value, requires_grad=True)
        offset += count
    return FrameClassifier(config, params)


def load_checkpoint(path) -> FrameClassifier:
    with open(path, "rb") as fh:
        return checkpoint_from_bytes(fh.read())
