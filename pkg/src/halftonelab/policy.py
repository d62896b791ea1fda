"""Shared convolutional policy: forward pass, gradients, optimizer.

The policy is a small residual CNN mapping a two-channel state (gray image
and noise map) to a per-pixel probability of emitting a one.  Layers are
3x3 convolutions with mirror padding and ReLU, identity-skip residual
blocks, and a 1x1 sigmoid head; there is no normalization anywhere, which
keeps the hand-written reverse pass short and the arithmetic deterministic.

Reverse-mode gradients are exact for the scalar sum(prob_map * grad_out);
the optimizer is plain Adam with an optional cosine learning-rate schedule.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DimensionMismatch, InvalidParam, IoFailure, MalformedHeader, ShapeMismatch
from .image import GrayImage, NoiseMap
from .rng import Stream

PROB_EPS = 1e-6  # probabilities clamped to [PROB_EPS, 1 - PROB_EPS]

# presets: (blocks, channels)
DESK_PRESET = (4, 16)
PAPER_PRESET = (16, 32)

_CKPT_MAGIC = b"HTLCKPT1"


@dataclass(frozen=True)
class ProbabilityMap:
    """Per-pixel probability of action 1, clamped inside (0, 1)."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise DimensionMismatch(f"expected 2D map, got shape {v.shape}")
        if v.min() < PROB_EPS or v.max() > 1.0 - PROB_EPS:
            raise InvalidParam("probabilities must lie in the clamped open interval")
        v = np.ascontiguousarray(v)
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


class PolicyParams:
    """All trainable weights, kept as a flat list of named arrays."""

    def __init__(self, blocks: int, channels: int, arrays: list[np.ndarray]):
        if blocks < 1 or channels < 1:
            raise InvalidParam("blocks and channels must be >= 1")
        self.blocks = blocks
        self.channels = channels
        self.arrays = arrays
        for a in arrays:
            if not np.isfinite(a).all():
                raise InvalidParam("policy parameters must be finite")

    @staticmethod
    def array_shapes(blocks: int, channels: int) -> list[tuple[int, ...]]:
        shapes: list[tuple[int, ...]] = [(channels, 2, 3, 3), (channels,)]
        for _ in range(blocks):
            shapes += [
                (channels, channels, 3, 3), (channels,),
                (channels, channels, 3, 3), (channels,),
            ]
        shapes += [(channels,), ()]  # 1x1 head weights and bias
        return shapes

    def copy(self) -> "PolicyParams":
        return PolicyParams(self.blocks, self.channels,
                            [a.copy() for a in self.arrays])

    def num_parameters(self) -> int:
        return sum(a.size for a in self.arrays)


def init_params(blocks: int, channels: int, seed: int) -> PolicyParams:
    """He fan-in initialization, deterministic per seed; biases zero."""
    stream = Stream(seed)

    def he(shape, fan_in):
        std = np.sqrt(2.0 / fan_in)
        return std * stream.normal(int(np.prod(shape))).reshape(shape)

    arrays = [he((channels, 2, 3, 3), 2 * 9), np.zeros(channels)]
    for _ in range(blocks):
        arrays += [he((channels, channels, 3, 3), channels * 9), np.zeros(channels),
                   he((channels, channels, 3, 3), channels * 9), np.zeros(channels)]
    arrays += [he((channels,), channels), np.zeros(())]  # 1x1 head, bias 0
    return PolicyParams(blocks, channels, arrays)


@lru_cache(maxsize=64)
def _fold_indices(n: int, pad: int) -> np.ndarray:
    """Source index for each padded index under whole-sample mirroring."""
    js = np.arange(-pad, n + pad)
    if n == 1:
        out = np.zeros_like(js)
    else:
        period = 2 * n - 2
        m = np.mod(js, period)
        out = np.where(m >= n, period - m, m)
    out.flags.writeable = False
    return out


def _mirror_pad(x: np.ndarray, pad: int) -> np.ndarray:
    iy = _fold_indices(x.shape[1], pad)
    ix = _fold_indices(x.shape[2], pad)
    return x[:, iy[:, None], ix[None, :]]


def _mirror_pad_adjoint(g: np.ndarray, height: int, width: int, pad: int) -> np.ndarray:
    iy = _fold_indices(height, pad)
    ix = _fold_indices(width, pad)
    tmp = np.zeros((g.shape[0], height, width + 2 * pad))
    np.add.at(tmp, (slice(None), iy), g)
    out = np.zeros((g.shape[0], height, width))
    np.add.at(out.transpose(2, 0, 1), ix, tmp.transpose(2, 0, 1))
    return out


def _conv3(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    _, height, width = x.shape
    xp = _mirror_pad(x, 1)
    out = np.zeros((w.shape[0], height, width))
    for dy in range(3):
        for dx in range(3):
            out += np.tensordot(w[:, :, dy, dx],
                                xp[:, dy:dy + height, dx:dx + width],
                                axes=([1], [0]))
    return out + b[:, None, None]


def _conv3_backward(x: np.ndarray, w: np.ndarray, g: np.ndarray):
    """Gradients of sum(conv3(x, w, b) * g) w.r.t. (x, w, b)."""
    _, height, width = x.shape
    xp = _mirror_pad(x, 1)
    dw = np.zeros_like(w)
    dxp = np.zeros_like(xp)
    for dy in range(3):
        for dx in range(3):
            patch = xp[:, dy:dy + height, dx:dx + width]
            dw[:, :, dy, dx] = np.tensordot(g, patch, axes=([1, 2], [1, 2]))
            dxp[:, dy:dy + height, dx:dx + width] += np.tensordot(
                w[:, :, dy, dx], g, axes=([0], [0]))
    db = g.sum(axis=(1, 2))
    dx_ = _mirror_pad_adjoint(dxp, height, width, 1)
    return dx_, dw, db


def _relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def _sigmoid(t: np.ndarray) -> np.ndarray:
    out = np.empty_like(t)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    et = np.exp(t[~pos])
    out[~pos] = et / (1.0 + et)
    return out


def _stack_state(c, z) -> np.ndarray:
    cd = c.data if isinstance(c, GrayImage) else np.asarray(c, dtype=np.float64)
    zd = z.data if isinstance(z, NoiseMap) else np.asarray(z, dtype=np.float64)
    if cd.shape != zd.shape:
        raise DimensionMismatch(f"image {cd.shape} vs noise {zd.shape}")
    return np.stack([cd, zd])


def _forward_cached(params: PolicyParams, x: np.ndarray):
    """Run the network, recording pre-activations for the reverse pass."""
    arrs = params.arrays
    cache = {"x": x}
    pre_in = _conv3(x, arrs[0], arrs[1])
    cache["pre_in"] = pre_in
    act = _relu(pre_in)
    block_cache = []
    idx = 2
    for _ in range(params.blocks):
        w1, b1, w2, b2 = arrs[idx], arrs[idx + 1], arrs[idx + 2], arrs[idx + 3]
        idx += 4
        pre1 = _conv3(act, w1, b1)
        mid = _relu(pre1)
        pre2 = _conv3(mid, w2, b2)
        pre_out = act + pre2
        block_cache.append((act, pre1, mid, pre_out))
        act = _relu(pre_out)
    w_head, b_head = arrs[idx], arrs[idx + 1]
    logits = np.tensordot(w_head, act, axes=([0], [0])) + b_head
    sig = _sigmoid(logits)
    cache["blocks"] = block_cache
    cache["feat"] = act
    cache["sig"] = sig
    prob = np.clip(sig, PROB_EPS, 1.0 - PROB_EPS)
    return prob, cache


def forward(params: PolicyParams, c, z) -> ProbabilityMap:
    """Probability of emitting 1 at every pixel for state (c, z)."""
    prob, _ = _forward_cached(params, _stack_state(c, z))
    return ProbabilityMap(prob)


def _backward_cached(params: PolicyParams, cache, grad_out: np.ndarray):
    arrs = params.arrays
    grads = [np.zeros_like(a) for a in arrs]
    sig = cache["sig"]
    inside = (sig > PROB_EPS) & (sig < 1.0 - PROB_EPS)
    dlogits = grad_out * sig * (1.0 - sig) * inside
    idx = 2 + 4 * params.blocks
    feat = cache["feat"]
    grads[idx] = np.tensordot(dlogits, feat, axes=([0, 1], [1, 2]))
    grads[idx + 1] = np.asarray(dlogits.sum())
    dact = arrs[idx][:, None, None] * dlogits[None, :, :]
    for bi in range(params.blocks - 1, -1, -1):
        act_in, pre1, mid, pre_out = cache["blocks"][bi]
        base = 2 + 4 * bi
        w1, w2 = arrs[base], arrs[base + 2]
        dpre_out = dact * (pre_out > 0)
        dmid, dw2, db2 = _conv3_backward(mid, w2, dpre_out)
        dpre1 = dmid * (pre1 > 0)
        dact_in, dw1, db1 = _conv3_backward(act_in, w1, dpre1)
        grads[base], grads[base + 1] = dw1, db1
        grads[base + 2], grads[base + 3] = dw2, db2
        dact = dact_in + dpre_out  # skip connection
    dpre_in = dact * (cache["pre_in"] > 0)
    _, dw_in, db_in = _conv3_backward(cache["x"], arrs[0], dpre_in)
    grads[0], grads[1] = dw_in, db_in
    return grads


def backward(params: PolicyParams, c, z, grad_out: np.ndarray) -> list[np.ndarray]:
    """Exact gradients of sum(prob_map * grad_out) w.r.t. every parameter."""
    x = _stack_state(c, z)
    grad_out = np.asarray(grad_out, dtype=np.float64)
    if grad_out.shape != x.shape[1:]:
        raise DimensionMismatch(f"grad_out {grad_out.shape} vs image {x.shape[1:]}")
    _, cache = _forward_cached(params, x)
    return _backward_cached(params, cache, grad_out)


# ---------------------------------------------------------------------------
# Optimizer
# ---------------------------------------------------------------------------

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


class AdamState:
    def __init__(self, params: PolicyParams):
        self.step = 0
        self.m = [np.zeros_like(a) for a in params.arrays]
        self.v = [np.zeros_like(a) for a in params.arrays]


def adam_step(params: PolicyParams, grads: list[np.ndarray],
              state: AdamState, lr: float) -> PolicyParams:
    """One Adam update; params are replaced, state is updated in place."""
    if len(grads) != len(params.arrays):
        raise ShapeMismatch("gradient list length does not match parameters")
    state.step += 1
    t = state.step
    bc1 = 1.0 - ADAM_BETA1**t
    bc2 = 1.0 - ADAM_BETA2**t
    new_arrays = []
    for i, (a, g) in enumerate(zip(params.arrays, grads)):
        g = np.asarray(g, dtype=np.float64)
        if g.shape != a.shape:
            raise ShapeMismatch(f"array {i}: grad {g.shape} vs param {a.shape}")
        state.m[i] = ADAM_BETA1 * state.m[i] + (1.0 - ADAM_BETA1) * g
        state.v[i] = ADAM_BETA2 * state.v[i] + (1.0 - ADAM_BETA2) * g * g
        m_hat = state.m[i] / bc1
        v_hat = state.v[i] / bc2
        new_arrays.append(a - lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS))
    return PolicyParams(params.blocks, params.channels, new_arrays)


def cosine_lr(step: int, total: int, lr_max: float = 3e-4,
              lr_min: float = 1e-5) -> float:
    """Cosine annealing from lr_max (step 0) to lr_min (step total)."""
    if not 0 <= step <= total or total <= 0:
        raise InvalidParam(f"need 0 <= step <= total, got {step}/{total}")
    return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + np.cos(np.pi * step / total))


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------
# Little-endian binary layout:
#   8s  magic "HTLCKPT1"
#   u32 version (1)
#   u32 blocks, u32 channels
#   u64 training step
#   u8  has_adam
#   parameter arrays in PolicyParams.array_shapes order, raw float64 LE
#   if has_adam: u64 adam step, then all m arrays, then all v arrays

def save_checkpoint(path, params: PolicyParams, step: int = 0,
                    adam: AdamState | None = None) -> None:
    head = _CKPT_MAGIC + struct.pack(
        "<IIIQB", 1, params.blocks, params.channels, step, 1 if adam else 0)
    chunks = [head]
    chunks += [np.ascontiguousarray(a, dtype="<f8").tobytes() for a in params.arrays]
    if adam is not None:
        chunks.append(struct.pack("<Q", adam.step))
        chunks += [np.ascontiguousarray(a, dtype="<f8").tobytes() for a in adam.m]
        chunks += [np.ascontiguousarray(a, dtype="<f8").tobytes() for a in adam.v]
    try:
        with open(path, "wb") as fh:
            fh.write(b"".join(chunks))
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def load_checkpoint(path) -> tuple[PolicyParams, int, AdamState | None]:
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    if raw[:8] != _CKPT_MAGIC:
        raise MalformedHeader(f"{path}: not a policy checkpoint")
    version, blocks, channels, step, has_adam = struct.unpack_from("<IIIQB", raw, 8)
    if version != 1:
        raise MalformedHeader(f"{path}: unsupported checkpoint version {version}")
    off = 8 + struct.calcsize("<IIIQB")

    def take(shape):
        nonlocal off
        size = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(raw, dtype="<f8", count=size, offset=off)
        off += size * 8
        return arr.reshape(shape).astype(np.float64)

    shapes = PolicyParams.array_shapes(blocks, channels)
    params = PolicyParams(blocks, channels, [take(s) for s in shapes])
    adam = None
    if has_adam:
        adam = AdamState(params)
        (adam.step,) = struct.unpack_from("<Q", raw, off)
        off += 8
        adam.m = [take(s) for s in shapes]
        adam.v = [take(s) for s in shapes]
    return params, step, adam
