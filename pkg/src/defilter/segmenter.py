"""Occlusion segmentation: U-Net encoder/decoder with channel gating.

Five encoder blocks, each a small conv stack with a squeeze-and-excite
gate and a 2x2/stride-2 max-pool; the decoder mirrors them with
upsampling plus deconvolution and concatenates the encoder feature map
of equal resolution.  Output is a per-pixel coverage probability.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .errors import ConfigError, NoData, ShapeError
from .imgutils import read_mask, read_rgb
from .masks import OcclusionMask, binary_open
from .schedules import OptimSchedule

CHECKPOINT_VERSION = 1


@dataclass
class SegNetConfig:
    encoder_blocks: int = 5
    se_block_layers: tuple = (0, 1, 2, 3, 4)
    base_channels: int = 32
    input_size: tuple = (512, 512)

    def __post_init__(self):
        self.se_block_layers = tuple(sorted(int(i) for i in self.se_block_layers))
        bad = [i for i in self.se_block_layers if not 0 <= i < self.encoder_blocks]
        if bad:
            raise ConfigError(f"se_block_layers {bad} outside encoder range")
        h, w = self.input_size
        factor = 2 ** self.encoder_blocks
        if h % factor or w % factor:
            raise ConfigError(
                f"input size {h}x{w} not divisible by 2^{self.encoder_blocks}"
            )


class SEBlock(nn.Module):
    """Per-channel gate from globally pooled features."""

    def __init__(self, channels, reduction=16):
        super().__init__()
        hidden = max(1, channels // reduction)
        self.pool = nn.AdaptiveAvgPool2d(1)
        self.fc = nn.Sequential(
            nn.Linear(channels, hidden, bias=False),
            nn.ReLU(inplace=True),
            nn.Linear(hidden, channels, bias=False),
            nn.Sigmoid(),
        )

    def forward(self, x):
        b, c, _, _ = x.shape
        gate = self.fc(self.pool(x).view(b, c)).view(b, c, 1, 1)
        return x * gate


class _EncoderBlock(nn.Module):
    def __init__(self, c_in, c_out, use_se):
        super().__init__()
        self.convs = nn.Sequential(
            nn.Conv2d(c_in, c_out, 3, padding=1),
            nn.BatchNorm2d(c_out),
            nn.ReLU(inplace=True),
            nn.Conv2d(c_out, c_out, 3, padding=1),
            nn.BatchNorm2d(c_out),
            nn.ReLU(inplace=True),
        )
        self.se = SEBlock(c_out) if use_se else nn.Identity()

    def forward(self, x):
        return self.se(self.convs(x))


class _DecoderBlock(nn.Module):
    def __init__(self, c_in, c_skip, c_out):
        super().__init__()
        self.up = nn.Upsample(scale_factor=2, mode="nearest")
        self.deconv = nn.ConvTranspose2d(c_in, c_out, 3, padding=1)
        self.fuse = nn.Sequential(
            nn.Conv2d(c_out + c_skip, c_out, 3, padding=1),
            nn.BatchNorm2d(c_out),
            nn.ReLU(inplace=True),
        )

    def forward(self, x, skip):
        x = self.deconv(self.up(x))
        return self.fuse(torch.cat([x, skip], dim=1))


class SegModel(nn.Module):
    def __init__(self, config: SegNetConfig):
        super().__init__()
        self.config = config
        widths = [config.base_channels * 2 ** i for i in range(config.encoder_blocks)]
        self.encoders = nn.ModuleList()
        c_in = 3
        for i, w in enumerate(widths):
            self.encoders.append(_EncoderBlock(c_in, w, i in config.se_block_layers))
            c_in = w
        self.pool = nn.MaxPool2d(kernel_size=2, stride=2)
        self.bottleneck = nn.Sequential(
            nn.Conv2d(widths[-1], widths[-1], 3, padding=1),
            nn.BatchNorm2d(widths[-1]),
            nn.ReLU(inplace=True),
        )
        self.decoders = nn.ModuleList()
        c = widths[-1]
        for w in reversed(widths):
            self.decoders.append(_DecoderBlock(c, w, w))
            c = w
        self.head = nn.Conv2d(widths[0], 1, 1)
        self.trained_iterations = 0

    def forward_logits(self, x):
        skips = []
        for enc in self.encoders:
            x = enc(x)
            skips.append(x)
            x = self.pool(x)
        x = self.bottleneck(x)
        for dec, skip in zip(self.decoders, reversed(skips)):
            x = dec(x, skip)
        return self.head(x)

    def forward(self, x):
        return torch.sigmoid(self.forward_logits(x))


def build_segnet(config: SegNetConfig) -> SegModel:
    return SegModel(config)


def bce_loss(probabilities, targets, eps=1e-7):
    """Per-pixel binary cross-entropy on probabilities, clamped away
    from the log singularities, averaged over pixels and batch."""
    p = torch.clamp(probabilities, eps, 1.0 - eps)
    t = targets.to(p.dtype)
    return torch.mean(-(t * torch.log(p) + (1.0 - t) * torch.log(1.0 - p)))


def bce_with_logits_loss(logits, targets):
    return F.binary_cross_entropy_with_logits(logits, targets.to(logits.dtype))


def _to_input_tensor(image: np.ndarray) -> torch.Tensor:
    x = torch.from_numpy(np.ascontiguousarray(image)).float() / 255.0
    return x.permute(2, 0, 1).unsqueeze(0)


def segment(model: SegModel, image: np.ndarray, threshold: float = 0.5) -> OcclusionMask:
    """Probability map -> threshold -> 3x3 opening.

    The opening removes isolated false positives and restores solid
    regions up to their one-pixel boundary ring.
    """
    h, w = image.shape[:2]
    if (h, w) != tuple(model.config.input_size):
        raise ShapeError(
            f"image {h}x{w} does not match model input {model.config.input_size}"
        )
    model.eval()
    with torch.no_grad():
        prob = model(_to_input_tensor(image))[0, 0].numpy()
    raw = (prob >= threshold).astype(np.uint8)
    return OcclusionMask(binary_open(raw), threshold_used=threshold)


def iou(pred: np.ndarray, target: np.ndarray) -> float:
    p = pred.astype(bool)
    t = target.astype(bool)
    union = np.logical_or(p, t).sum()
    if union == 0:
        return 1.0
    return float(np.logical_and(p, t).sum() / union)


@dataclass
class SegCheckpoint:
    config: SegNetConfig
    state_dict: dict
    iterations: int
    loss_history: list = field(default_factory=list)
    version: int = CHECKPOINT_VERSION

    def save(self, path):
        os.makedirs(os.path.dirname(str(path)) or ".", exist_ok=True)
        torch.save({
            "version": self.version,
            "config": vars(self.config),
            "state_dict": self.state_dict,
            "iterations": self.iterations,
            "loss_history": self.loss_history,
        }, path)

    @classmethod
    def load(cls, path) -> "SegCheckpoint":
        blob = torch.load(path, map_location="cpu", weights_only=False)
        if blob.get("version") != CHECKPOINT_VERSION:
            raise ConfigError(f"unsupported checkpoint version {blob.get('version')}")
        return cls(
            config=SegNetConfig(**blob["config"]),
            state_dict=blob["state_dict"],
            iterations=blob["iterations"],
            loss_history=blob["loss_history"],
        )

    def build(self) -> SegModel:
        model = build_segnet(self.config)
        model.load_state_dict(self.state_dict)
        model.trained_iterations = self.iterations
        return model


def _load_pairs(manifest_rows, data_root):
    images, masks = [], []
    for row in manifest_rows:
        if row.get("mask_path") is None:
            continue
        images.append(read_rgb(os.path.join(data_root, row["path"])))
        masks.append(read_mask(os.path.join(data_root, row["mask_path"])))
    return images, masks


def train_segnet(
    model: SegModel,
    manifest_rows,
    schedule: OptimSchedule,
    data_root: str = ".",
    iterations: int = None,
    batch_size: int = 8,
    seed: int = 0,
) -> SegCheckpoint:
    """Adam training on (image, mask) pairs drawn from the manifest.

    Batch order is a seeded shuffle per epoch, so a fixed seed replays
    the identical batch sequence.
    """
    images, masks = _load_pairs(manifest_rows, data_root)
    if not images:
        raise NoData("manifest has no image/mask pairs")
    n = len(images)
    if iterations is None:
        iterations = schedule.epochs * math.ceil(n / batch_size)

    x_all = torch.stack([
        torch.from_numpy(np.ascontiguousarray(im)).float().permute(2, 0, 1) / 255.0
        for im in images
    ])
    y_all = torch.stack([
        torch.from_numpy(np.ascontiguousarray(m)).float().unsqueeze(0) for m in masks
    ])

    rng = np.random.default_rng(seed)
    opt = torch.optim.Adam(model.parameters(), lr=schedule.lr_at(0))
    model.train()
    history = []
    it = 0
    order = []
    while it < iterations:
        if not order:
            order = list(rng.permutation(n))
        idx = [order.pop() for _ in range(min(batch_size, len(order)))]
        xb, yb = x_all[idx], y_all[idx]
        lr = schedule.lr_at(it)
        for group in opt.param_groups:
            group["lr"] = lr
        opt.zero_grad()
        loss = bce_with_logits_loss(model.forward_logits(xb), yb)
        loss.backward()
        opt.step()
        history.append(float(loss.detach()))
        it += 1
    model.trained_iterations = it
    return SegCheckpoint(
        config=model.config,
        state_dict=model.state_dict(),
        iterations=it,
        loss_history=history,
    )


def smoothed_history(history, points: int = 10):
    """Mean loss over `points` consecutive windows of the history."""
    if not history:
        return []
    window = max(1, len(history) // points)
    return [
        float(np.mean(history[i:i + window]))
        for i in range(0, window * points, window)
        if history[i:i + window]
    ]
