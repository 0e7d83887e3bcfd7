"""Mask-aware inpainting: gated-conv coarse/refine generator, patch-level
least-squares discriminator, fixed perceptual feature network.

Images are normalized to [-1, 1] inside the networks; compositing back
onto the input happens in integer pixel space so unmasked pixels survive
bit for bit.
"""

from __future__ import annotations

import hashlib
import math
import os
import warnings
from dataclasses import dataclass, field

import cv2
import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .errors import ConfigError, InvalidArgument, NoData, ShapeError, UncheckedModelWarning
from .imgutils import read_mask, read_rgb
from .masks import OcclusionMask
from .schedules import LossWeights, OptimSchedule
from .segmenter import SegModel, segment

CHECKPOINT_VERSION = 1
PERCEPTUAL_SEED = 0x5EED


@dataclass
class GeneratorConfig:
    base_channels: int = 32
    input_channels: int = 4
    dilations: tuple = (2, 4, 8, 16)

    def __post_init__(self):
        if self.input_channels != 4:
            raise ConfigError("generator input is image(3) + mask(1)")
        if self.base_channels < 2:
            raise ConfigError("base_channels too small")

    def layer_kinds(self):
        body = (
            ["gated"] * 5
            + ["dilated_gated"] * len(self.dilations)
            + ["gated"] * 5
            + ["normal"]
        )
        return {"coarse": body, "refine": list(body)}


@dataclass
class DiscriminatorConfig:
    layers: int = 6
    kernel: int = 5
    stride: int = 2
    base_channels: int = 32
    input_channels: int = 4

    def __post_init__(self):
        if (self.layers, self.kernel, self.stride) != (6, 5, 2):
            raise ConfigError("discriminator is fixed at six k5/s2 convolutions")


class GatedConv2d(nn.Module):
    """Convolution modulated by a learned per-location sigmoid gate."""

    def __init__(self, c_in, c_out, kernel, stride=1, dilation=1, activation=True):
        super().__init__()
        pad = dilation * (kernel - 1) // 2
        self.c_in = c_in
        self.conv_feat = nn.Conv2d(c_in, c_out, kernel, stride, pad, dilation)
        self.conv_gate = nn.Conv2d(c_in, c_out, kernel, stride, pad, dilation)
        self.act = nn.LeakyReLU(0.2, inplace=False) if activation else nn.Identity()

    def forward(self, x):
        if x.shape[1] != self.c_in:
            raise ShapeError(f"expected {self.c_in} channels, got {x.shape[1]}")
        return self.act(self.conv_feat(x)) * torch.sigmoid(self.conv_gate(x))


def _stage(config: GeneratorConfig):
    w = config.base_channels
    layers = nn.ModuleList([
        GatedConv2d(4, w, 5),
        GatedConv2d(w, 2 * w, 3, stride=2),
        GatedConv2d(2 * w, 2 * w, 3),
        GatedConv2d(2 * w, 4 * w, 3, stride=2),
        GatedConv2d(4 * w, 4 * w, 3),
    ])
    for d in config.dilations:
        layers.append(GatedConv2d(4 * w, 4 * w, 3, dilation=d))
    layers.extend([
        GatedConv2d(4 * w, 4 * w, 3),
        GatedConv2d(4 * w, 2 * w, 3),   # after first upsample
        GatedConv2d(2 * w, 2 * w, 3),
        GatedConv2d(2 * w, w, 3),       # after second upsample
        GatedConv2d(w, w, 3),
    ])
    head = nn.Conv2d(w, 3, 3, padding=1)
    return layers, head


class _StageNet(nn.Module):
    def __init__(self, config: GeneratorConfig):
        super().__init__()
        self.layers, self.head = _stage(config)
        self.n_dilated = len(config.dilations)

    def forward(self, x):
        up_at = {5 + self.n_dilated + 1, 5 + self.n_dilated + 3}
        for i, layer in enumerate(self.layers):
            if i in up_at:
                x = F.interpolate(x, scale_factor=2, mode="nearest")
            x = layer(x)
        return torch.tanh(self.head(x))


class Generator(nn.Module):
    """Coarse fill, composite, then a refinement pass over the composite."""

    def __init__(self, config: GeneratorConfig = None):
        super().__init__()
        self.config = config or GeneratorConfig()
        self.coarse = _StageNet(self.config)
        self.refine = _StageNet(self.config)
        self.trained_iterations = 0

    def forward(self, image, mask):
        x = torch.cat([image, mask], dim=1)
        coarse = self.coarse(x)
        coarse_comp = mask * coarse + (1.0 - mask) * image
        refined = self.refine(torch.cat([coarse_comp, mask], dim=1))
        return coarse, refined


class Discriminator(nn.Module):
    """Six k5/s2 convolutions; every output element judges its patch."""

    def __init__(self, config: DiscriminatorConfig = None):
        super().__init__()
        self.config = config or DiscriminatorConfig()
        w = self.config.base_channels
        widths = [w, 2 * w, 4 * w, 4 * w, 4 * w, 4 * w]
        layers = []
        c_in = self.config.input_channels
        for i, c_out in enumerate(widths):
            layers.append(nn.Conv2d(c_in, c_out, 5, stride=2, padding=2))
            if i < len(widths) - 1:
                layers.append(nn.LeakyReLU(0.2, inplace=False))
            c_in = c_out
        self.net = nn.Sequential(*layers)

    def forward(self, x):
        return self.net(x)


# --------------------------------------------------------------------------
# Losses


def huber(error: torch.Tensor) -> torch.Tensor:
    """Elementwise: 0.5 e^2 below unit error, |e| - 0.5 above.

    Continuous in value and slope at |e| = 1; mean over all elements.
    """
    e = torch.abs(error)
    return torch.mean(torch.where(e < 1.0, 0.5 * e * e, e - 0.5))


def _gaussian_window(size: int, sigma: float = 1.5) -> torch.Tensor:
    k = cv2.getGaussianKernel(size, sigma)
    w = torch.from_numpy((k @ k.T).astype(np.float32))
    return w


def ssim_mean(x: torch.Tensor, y: torch.Tensor, data_range: float = 2.0) -> torch.Tensor:
    """Differentiable mean SSIM; window shrinks to fit small inputs."""
    if x.shape != y.shape:
        raise ShapeError(f"ssim shapes differ: {x.shape} vs {y.shape}")
    c = x.shape[1]
    size = min(11, x.shape[2], x.shape[3])
    if size % 2 == 0:
        size -= 1
    if size < 1:
        raise ShapeError("input smaller than any ssim window")
    win = _gaussian_window(size).to(x.dtype).expand(c, 1, size, size).contiguous()
    pad = size // 2

    def filt(t):
        return F.conv2d(t, win, padding=pad, groups=c)

    c1 = (0.01 * data_range) ** 2
    c2 = (0.03 * data_range) ** 2
    mu_x, mu_y = filt(x), filt(y)
    var_x = filt(x * x) - mu_x * mu_x
    var_y = filt(y * y) - mu_y * mu_y
    cov = filt(x * y) - mu_x * mu_y
    num = (2 * mu_x * mu_y + c1) * (2 * cov + c2)
    den = (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
    return torch.mean(num / den)


def reconstruction_loss(output: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """Huber distance plus structural dissimilarity (1 - SSIM)."""
    return huber(output - target) + (1.0 - ssim_mean(output, target))


class PerceptualNet(nn.Module):
    """Frozen conv backbone exposing three intermediate feature maps.

    The default backbone draws its weights from a fixed seed, giving a
    deterministic feature space with no download; random conv features
    still carry enough structure to penalize blur and texture drift.
    """

    def __init__(self, backbone: str = "random", taps: int = 3):
        super().__init__()
        if backbone != "random":
            raise ConfigError(
                f"backbone '{backbone}' needs external pretrained weights; "
                "this build ships only the deterministic 'random' backbone"
            )
        self.taps = taps
        gen = torch.Generator().manual_seed(PERCEPTUAL_SEED)
        blocks = []
        c_in = 3
        for c_out in (32, 64, 128)[:taps]:
            blocks.append(nn.Sequential(
                nn.Conv2d(c_in, c_out, 3, stride=2, padding=1),
                nn.LeakyReLU(0.2),
                nn.Conv2d(c_out, c_out, 3, padding=1),
                nn.LeakyReLU(0.2),
            ))
            c_in = c_out
        self.blocks = nn.ModuleList(blocks)
        with torch.no_grad():
            for p in self.parameters():
                p.copy_(torch.empty_like(p).normal_(0.0, 0.08, generator=gen))
        for p in self.parameters():
            p.requires_grad_(False)
        self.eval()

    def forward(self, x):
        feats = []
        for block in self.blocks:
            x = block(x)
            feats.append(x)
        return feats


def perceptual_loss(feats_a, feats_b) -> torch.Tensor:
    if len(feats_a) != len(feats_b):
        raise InvalidArgument("tap counts differ")
    losses = [F.mse_loss(a, b) for a, b in zip(feats_a, feats_b)]
    return torch.stack(losses).mean()


def generator_loss(coarse, refined, target, disc_out, perceptual_feats,
                   weights: LossWeights = None):
    """Weighted sum of coarse/refined reconstruction, perceptual distance,
    and the least-squares adversarial term against an all-ones target map.

    Returns (total, components) with components reported unweighted.
    """
    if any(t is None for t in (coarse, refined, target, disc_out)):
        raise InvalidArgument("missing loss component tensor")
    if perceptual_feats is None:
        raise InvalidArgument("missing perceptual features")
    weights = weights or LossWeights()
    feats_out, feats_target = perceptual_feats
    l_rc_coarse = reconstruction_loss(coarse, target)
    l_rc_refined = reconstruction_loss(refined, target)
    l_perc = perceptual_loss(feats_out, feats_target)
    l_adv = F.mse_loss(disc_out, torch.ones_like(disc_out))
    total = (
        weights.rc_coarse * l_rc_coarse
        + weights.rc_refined * l_rc_refined
        + weights.perc * l_perc
        + weights.adv * l_adv
    )
    components = {
        "rc_coarse": l_rc_coarse,
        "rc_refined": l_rc_refined,
        "perc": l_perc,
        "adv": l_adv,
    }
    return total, components


def discriminator_loss(disc_real_out, disc_fake_out) -> torch.Tensor:
    """0.5 * (MSE(fake, 0) + MSE(real, 1)); each feature element is its
    own least-squares critic."""
    if disc_real_out.shape != disc_fake_out.shape:
        raise ShapeError(
            f"real {tuple(disc_real_out.shape)} vs fake {tuple(disc_fake_out.shape)}"
        )
    l_fake = F.mse_loss(disc_fake_out, torch.zeros_like(disc_fake_out))
    l_real = F.mse_loss(disc_real_out, torch.ones_like(disc_real_out))
    return 0.5 * (l_fake + l_real)


# --------------------------------------------------------------------------
# Numpy-side conversion and compositing


def _to_unit(image: np.ndarray) -> torch.Tensor:
    x = torch.from_numpy(np.ascontiguousarray(image)).float() / 127.5 - 1.0
    return x.permute(2, 0, 1)


def _to_uint8(t: torch.Tensor) -> np.ndarray:
    arr = ((t.clamp(-1.0, 1.0) + 1.0) * 127.5).round().byte()
    return arr.permute(1, 2, 0).numpy()


def composite_np(generated: np.ndarray, image: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """mask*generated + (1-mask)*image with exact pixel carry-over."""
    m = mask.astype(bool)[..., None]
    return np.where(m, generated, image)


def generate(gen: Generator, image: np.ndarray, mask: OcclusionMask):
    """Run both stages on one image; returns (coarse, refined) uint8."""
    if mask.shape != image.shape[:2]:
        raise ShapeError(f"mask {mask.shape} vs image {image.shape[:2]}")
    h, w = image.shape[:2]
    if h % 4 or w % 4:
        raise ShapeError("image sides must be divisible by 4")
    if gen.trained_iterations == 0:
        warnings.warn("generator has no recorded training", UncheckedModelWarning)
    gen.eval()
    with torch.no_grad():
        x = _to_unit(image).unsqueeze(0)
        m = torch.from_numpy(mask.data).float().unsqueeze(0).unsqueeze(0)
        coarse, refined = gen(x, m)
    return _to_uint8(coarse[0]), _to_uint8(refined[0])


def remove_filter(seg: SegModel, gen: Generator, image: np.ndarray,
                  threshold: float = 0.5) -> np.ndarray:
    """Segment, inpaint, composite; unmasked pixels pass through exactly."""
    mask = segment(seg, image, threshold)
    if mask.data.sum() == 0:
        return image.copy()
    _, refined = generate(gen, image, mask)
    return composite_np(refined, image, mask.data)


# --------------------------------------------------------------------------
# Training


@dataclass
class GanCheckpoint:
    gen_config: GeneratorConfig
    disc_config: DiscriminatorConfig
    gen_state: dict
    disc_state: dict
    iteration: int
    lr: float
    loss_history: list = field(default_factory=list)
    config_hash: str = ""
    version: int = CHECKPOINT_VERSION

    def save(self, path):
        os.makedirs(os.path.dirname(str(path)) or ".", exist_ok=True)
        torch.save({
            "version": self.version,
            "gen_config": vars(self.gen_config),
            "disc_config": vars(self.disc_config),
            "gen_state": self.gen_state,
            "disc_state": self.disc_state,
            "iteration": self.iteration,
            "lr": self.lr,
            "loss_history": self.loss_history,
            "config_hash": self.config_hash,
        }, path)

    @classmethod
    def load(cls, path) -> "GanCheckpoint":
        blob = torch.load(path, map_location="cpu", weights_only=False)
        if blob.get("version") != CHECKPOINT_VERSION:
            raise ConfigError(f"unsupported checkpoint version {blob.get('version')}")
        return cls(
            gen_config=GeneratorConfig(**blob["gen_config"]),
            disc_config=DiscriminatorConfig(**blob["disc_config"]),
            gen_state=blob["gen_state"],
            disc_state=blob["disc_state"],
            iteration=blob["iteration"],
            lr=blob["lr"],
            loss_history=blob["loss_history"],
            config_hash=blob["config_hash"],
        )

    def build_generator(self) -> Generator:
        gen = Generator(self.gen_config)
        gen.load_state_dict(self.gen_state)
        gen.trained_iterations = self.iteration
        return gen


def _load_triples(manifest_rows, data_root):
    xs, ms, ys = [], [], []
    for row in manifest_rows:
        if row.get("mask_path") is None or row.get("source_path") is None:
            continue
        xs.append(read_rgb(os.path.join(data_root, row["path"])))
        ms.append(read_mask(os.path.join(data_root, row["mask_path"])))
        ys.append(read_rgb(os.path.join(data_root, row["source_path"])))
    return xs, ms, ys


def train_gan(
    gen: Generator,
    disc: Discriminator,
    perceptual: PerceptualNet,
    manifest_rows,
    schedule: OptimSchedule,
    weights: LossWeights = None,
    data_root: str = ".",
    iterations: int = None,
    batch_size: int = 8,
    seed: int = 0,
    config_hash: str = "",
) -> GanCheckpoint:
    """Alternating one discriminator step and one generator step per
    iteration; both optimizers follow the same step-decay schedule."""
    weights = weights or LossWeights()
    xs, ms, ys = _load_triples(manifest_rows, data_root)
    if not xs:
        raise NoData("manifest has no (occluded, mask, source) triples")
    n = len(xs)
    if iterations is None:
        iterations = schedule.epochs * math.ceil(n / batch_size)

    x_all = torch.stack([_to_unit(im) for im in xs])
    m_all = torch.stack([
        torch.from_numpy(np.ascontiguousarray(m)).float().unsqueeze(0) for m in ms
    ])
    y_all = torch.stack([_to_unit(im) for im in ys])

    rng = np.random.default_rng(seed)
    opt_g = torch.optim.Adam(gen.parameters(), lr=schedule.lr_at(0), betas=(0.5, 0.999))
    opt_d = torch.optim.Adam(disc.parameters(), lr=schedule.lr_at(0), betas=(0.5, 0.999))
    gen.train()
    disc.train()
    history = []
    order = []
    it = 0
    while it < iterations:
        if not order:
            order = list(rng.permutation(n))
        idx = [order.pop() for _ in range(min(batch_size, len(order)))]
        xb, mb, yb = x_all[idx], m_all[idx], y_all[idx]
        lr = schedule.lr_at(it)
        for opt in (opt_g, opt_d):
            for group in opt.param_groups:
                group["lr"] = lr

        coarse, refined = gen(xb, mb)
        composited = mb * refined + (1.0 - mb) * xb

        d_real = disc(torch.cat([yb, mb], dim=1))
        d_fake = disc(torch.cat([composited.detach(), mb], dim=1))
        l_d = discriminator_loss(d_real, d_fake)
        opt_d.zero_grad()
        l_d.backward()
        opt_d.step()

        d_fake_g = disc(torch.cat([composited, mb], dim=1))
        with torch.no_grad():
            feats_target = perceptual(yb)
        feats_out = perceptual(composited)
        l_g, parts = generator_loss(
            coarse, refined, yb, d_fake_g, (feats_out, feats_target), weights
        )
        opt_g.zero_grad()
        l_g.backward()
        opt_g.step()

        history.append({
            "iteration": it,
            "lr": lr,
            "d": float(l_d.detach()),
            "g": float(l_g.detach()),
            "rc_refined": float(parts["rc_refined"].detach()),
        })
        it += 1

    gen.trained_iterations = it
    return GanCheckpoint(
        gen_config=gen.config,
        disc_config=disc.config,
        gen_state=gen.state_dict(),
        disc_state=disc.state_dict(),
        iteration=it,
        lr=schedule.lr_at(max(0, it - 1)),
        loss_history=history,
        config_hash=config_hash,
    )
