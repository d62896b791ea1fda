"""Policy training: sampling, counterfactual rewards, combined loss.

Each output pixel is treated as an agent choosing a binary action from a
shared policy.  The gradient estimator evaluates, for every pixel, the
global reward of both actions while freezing the other pixels' sampled
actions; summing both actions out per pixel gives a much lower-variance
estimate than scoring only the sampled joint action.  A single sampled
joint action per image per step is used.

The combined loss adds an anisotropy-suppressing term computed on the
probability maps of constant-gray inputs, weighted by omega_a.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import DimensionMismatch, InvalidParam
from .image import BinaryImage, GrayImage, NoiseMap, constant_image, sample_noise
from .metrics import SSIM_L, ErrorMetricConfig, reward
from .hvs import apply_hvs
from .policy import (
    AdamState,
    PolicyParams,
    ProbabilityMap,
    _backward_cached,
    _forward_cached,
    _stack_state,
    adam_step,
    cosine_lr,
    forward,
)
from .rng import Stream
from .spectral import anisotropy_loss

DEFAULT_OMEGA_A = 0.002
DEFAULT_BRIGHTNESS_JITTER = 0.9
PAPER_BATCH = 64  # reference full-scale setting; desk default below


@dataclass(frozen=True)
class TrainConfig:
    omega_a: float = DEFAULT_OMEGA_A
    metric: ErrorMetricConfig = field(default_factory=ErrorMetricConfig)
    batch: int = 4
    crop: int = 32
    iterations: int = 200
    lr_max: float = 3e-4
    lr_min: float = 1e-5
    seed: int = 0
    brightness_jitter: float = DEFAULT_BRIGHTNESS_JITTER
    blocks: int = 4
    channels: int = 16

    def __post_init__(self):
        if self.omega_a < 0:
            raise InvalidParam("omega_a must be >= 0")
        if self.batch < 1 or self.iterations < 1:
            raise InvalidParam("batch and iterations must be >= 1")
        if self.crop < 2 * self.local_window + 1:
            raise InvalidParam(
                f"crop {self.crop} smaller than 2*local_window+1 "
                f"= {2 * self.local_window + 1}")

    @property
    def omega_s(self) -> float:
        return self.metric.omega_s

    @property
    def local_window(self) -> int:
        """Radius of a single flip's influence on the reward: HVS radius
        plus SSIM window half-width.  Makes the fast counterfactual path
        exact rather than approximate."""
        half_ssim = self.metric.ssim_window // 2 if self.metric.omega_s > 0 else 0
        return self.metric.hvs.radius + half_ssim


@dataclass(frozen=True)
class CounterfactualTable:
    """Per-pixel rewards of both actions with all other pixels fixed at the
    sampled halftone: r0[a] = R({h_a=0, h'_-a}), r1[a] = R({h_a=1, h'_-a})."""

    r0: np.ndarray
    r1: np.ndarray


def sample_halftone(p: ProbabilityMap, seed: int) -> BinaryImage:
    """Independent per-pixel Bernoulli sample, deterministic per seed."""
    u = Stream(seed).uniform(p.width * p.height).reshape(p.values.shape)
    return BinaryImage((u <= p.values).astype(np.uint8))


def counterfactual_rewards(h: BinaryImage, c: GrayImage,
                           cfg: ErrorMetricConfig | None = None,
                           fast: bool = True) -> CounterfactualTable:
    """Both-action rewards per pixel with every other pixel fixed.

    The fast path computes each flip's effect on MSE(G(h), G(c)) and SSIM
    restricted to the flip's influence window (exact, not approximate);
    the reference path re-evaluates the reward from scratch per flip.
    """
    cfg = cfg or ErrorMetricConfig()
    if h.data.shape != c.data.shape:
        raise DimensionMismatch(f"halftone {h.data.shape} vs image {c.data.shape}")
    base = reward(h, c, cfg)
    if fast:
        deltas = _flip_deltas_fast(h, c, cfg)
    else:
        deltas = _flip_deltas_reference(h, c, cfg, base)
    flipped = base + deltas
    hd = h.data.astype(bool)
    r1 = np.where(hd, base, flipped)
    r0 = np.where(hd, flipped, base)
    return CounterfactualTable(r0=r0, r1=r1)


def _flip_deltas_fast(h: BinaryImage, c: GrayImage,
                      cfg: ErrorMetricConfig) -> np.ndarray:
    hvs = cfg.hvs
    hf = h.astype_float()
    e = apply_hvs(hvs, hf) - apply_hvs(hvs, c.data)
    rk = hvs.radius
    cyk, cynk = _kernels.mirror_copies(h.height, rk)
    cxk, cxnk = _kernels.mirror_copies(h.width, rk)
    use_ssim = cfg.omega_s > 0
    if use_ssim:
        from scipy import ndimage

        w = cfg.ssim_kernel()
        rw = cfg.ssim_window // 2
        cyw, cynw = _kernels.mirror_copies(h.height, rw)
        cxw, cxnw = _kernels.mirror_copies(h.width, rw)
        conv = lambda x: ndimage.correlate(x, w, mode="mirror")
        mu_h = conv(hf)
        hh = conv(hf * hf)
        hc = conv(hf * c.data)
        mu_c = conv(c.data)
        var_c = conv(c.data * c.data) - mu_c * mu_c
        c1 = (cfg.ssim_k1 * SSIM_L) ** 2
        c2 = (cfg.ssim_k2 * SSIM_L) ** 2
        num = (2.0 * mu_h * mu_c + c1) * (2.0 * (hc - mu_h * mu_c) + c2)
        den = ((mu_h * mu_h + mu_c * mu_c + c1)
               * ((hh - mu_h * mu_h) + var_c + c2))
        s_map = num / den
    else:
        w = np.zeros((1, 1))
        rw = 0
        cyw, cynw = _kernels.mirror_copies(h.height, 0)
        cxw, cxnw = _kernels.mirror_copies(h.width, 0)
        z = np.zeros_like(hf)
        mu_h = hh = hc = mu_c = var_c = s_map = z
        c1 = c2 = 0.0
    return _kernels.flip_reward_deltas(
        h.data, c.data, e, hvs.kernel, rk, cyk, cynk, cxk, cxnk,
        use_ssim, w, rw, cyw, cynw, cxw, cxnw,
        mu_h, hh, hc, mu_c, var_c, s_map, c1, c2, cfg.omega_s)


def _flip_deltas_reference(h: BinaryImage, c: GrayImage,
                           cfg: ErrorMetricConfig, base: float) -> np.ndarray:
    deltas = np.zeros(h.data.shape)
    work = h.data.copy()
    for y in range(h.height):
        for x in range(h.width):
            work[y, x] = 1 - work[y, x]
            deltas[y, x] = reward(BinaryImage(work.copy()), c, cfg) - base
            work[y, x] = 1 - work[y, x]
    return deltas


def counterfactual_gradient(p: ProbabilityMap,
                            table: CounterfactualTable) -> np.ndarray:
    """Per-pixel gradient of the negated expected reward w.r.t. p.

    With pi_a(1) = p_a and pi_a(0) = 1 - p_a, summing both actions gives
    d(-sum_action pi * R)/dp_a = -(r1_a - r0_a).
    """
    if table.r0.shape != p.values.shape:
        raise DimensionMismatch(
            f"table {table.r0.shape} vs map {p.values.shape}")
    return -(table.r1 - table.r0)


def augment_brightness(c: GrayImage, jitter: float, stream: Stream) -> GrayImage:
    """Scale all pixels by a factor uniform in [max(0, 1-jitter), 1+jitter],
    clamping the result back to [0, 1]."""
    if jitter < 0:
        raise InvalidParam("jitter must be >= 0")
    if jitter == 0:
        return c
    lo = max(0.0, 1.0 - jitter)
    hi = 1.0 + jitter
    factor = lo + (hi - lo) * float(stream.uniform(1)[0])
    return GrayImage(np.clip(c.data * factor, 0.0, 1.0))


def infer_halftone(params: PolicyParams, c: GrayImage, seed: int) -> BinaryImage:
    """Deterministic inference: h = 1 wherever p >= 0.5."""
    z = sample_noise(c.width, c.height, seed)
    p = forward(params, c, z)
    return BinaryImage((p.values >= 0.5).astype(np.uint8))


@dataclass(frozen=True)
class StepReport:
    step: int
    lr: float
    mean_reward: float
    anisotropy_loss: float
    wall_ms: float


def train_step(params: PolicyParams, opt: AdamState, step: int,
               batch: list[tuple[GrayImage, NoiseMap]], cfg: TrainConfig,
               stream: Stream) -> tuple[PolicyParams, StepReport]:
    """One optimization step over a prepared batch of (crop, noise) pairs.

    Accumulates the counterfactual policy gradient on the natural crops,
    adds the omega_a-weighted anisotropy-loss gradient computed on the
    probability maps of a same-size batch of constant-gray images with
    fresh noise, and applies one Adam update at the cosine-annealed rate.
    """
    t0 = time.perf_counter()
    nb = len(batch)
    grads = None
    reward_sum = 0.0
    for i, (c, z) in enumerate(batch):
        x = _stack_state(c, z)
        prob, cache = _forward_cached(params, x)
        pm = ProbabilityMap(prob)
        h = sample_halftone(pm, stream.split(1, i).seed)
        table = counterfactual_rewards(h, c, cfg.metric)
        reward_sum += reward_of_table(table, h)
        outer = counterfactual_gradient(pm, table) / nb
        g = _backward_cached(params, cache, outer)
        grads = g if grads is None else [a + b for a, b in zip(grads, g)]

    as_sum = 0.0
    if cfg.omega_a > 0:
        for j in range(nb):
            sub = stream.split(2, j)
            g_level = float(sub.uniform(1)[0])
            cg = constant_image(cfg.crop, cfg.crop, min(g_level, 1.0))
            zg = sample_noise(cfg.crop, cfg.crop, sub.split(1).seed)
            x = _stack_state(cg, zg)
            prob, cache = _forward_cached(params, x)
            value, grad_p = anisotropy_loss(prob)
            as_sum += value
            g = _backward_cached(params, cache, cfg.omega_a * grad_p / nb)
            grads = g if grads is None else [a + b for a, b in zip(grads, g)]

    lr = cosine_lr(min(step, cfg.iterations), cfg.iterations,
                   cfg.lr_max, cfg.lr_min)
    params = adam_step(params, grads, opt, lr)
    wall = (time.perf_counter() - t0) * 1e3
    return params, StepReport(step=step, lr=float(lr),
                              mean_reward=reward_sum / nb,
                              anisotropy_loss=as_sum / nb,
                              wall_ms=wall)


def reward_of_table(table: CounterfactualTable, h: BinaryImage) -> float:
    """Reward of the sampled halftone, read back from its own table entry."""
    hd = h.data.astype(bool)
    vals = np.where(hd, table.r1, table.r0)
    return float(vals.flat[0]) if vals.size else 0.0


def make_batch(images: list[GrayImage], cfg: TrainConfig,
               stream: Stream) -> list[tuple[GrayImage, NoiseMap]]:
    """Sample jittered random crops and fresh noise maps for one step."""
    batch = []
    for i in range(cfg.batch):
        sub = stream.split(0, i)
        img = images[int(sub.integers(1, len(images))[0])]
        if img.width < cfg.crop or img.height < cfg.crop:
            raise InvalidParam(
                f"image {img.width}x{img.height} smaller than crop {cfg.crop}")
        ox = int(sub.integers(1, img.width - cfg.crop + 1)[0])
        oy = int(sub.integers(1, img.height - cfg.crop + 1)[0])
        crop = GrayImage(img.data[oy:oy + cfg.crop, ox:ox + cfg.crop])
        crop = augment_brightness(crop, cfg.brightness_jitter, sub)
        z = sample_noise(cfg.crop, cfg.crop, sub.split(9).seed)
        batch.append((crop, z))
    return batch


def train_policy(cfg: TrainConfig, images: list[GrayImage],
                 params: PolicyParams | None = None,
                 opt: AdamState | None = None,
                 start_step: int = 0,
                 on_step=None) -> tuple[PolicyParams, AdamState, list[StepReport]]:
    """Run the training loop; fully deterministic given cfg.seed."""
    from .policy import init_params

    if params is None:
        params = init_params(cfg.blocks, cfg.channels, cfg.seed)
    if opt is None:
        opt = AdamState(params)
    history: list[StepReport] = []
    root = Stream(cfg.seed)
    for step in range(start_step, cfg.iterations):
        stream = root.split(step)
        batch = make_batch(images, cfg, stream)
        params, report = train_step(params, opt, step, batch, cfg, stream)
        history.append(report)
        if on_step is not None:
            on_step(report)
    return params, opt, history
