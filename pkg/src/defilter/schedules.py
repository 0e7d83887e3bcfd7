"""Optimizer schedule and loss weighting shared by both trainers."""

from __future__ import annotations

from dataclasses import dataclass
from decimal import Decimal

from .errors import InvalidArgument


@dataclass
class OptimSchedule:
    """Adam with step decay: lr = initial_lr * decay_factor^(it // decay_every).

    The decay is evaluated in decimal arithmetic so the scheduled values
    are the exact floats 1e-3, 1e-4, 1e-5, ... rather than products of
    binary-rounded factors.
    """

    optimizer: str = "adam"
    initial_lr: float = 0.001
    decay_factor: float = 0.1
    decay_every: int = 50_000
    epochs: int = 70

    def __post_init__(self):
        if self.initial_lr <= 0 or not 0 < self.decay_factor <= 1:
            raise InvalidArgument("learning-rate schedule out of range")
        if self.decay_every < 1 or self.epochs < 1:
            raise InvalidArgument("schedule intervals must be positive")

    def lr_at(self, iteration: int) -> float:
        if iteration < 0:
            raise InvalidArgument("iteration must be non-negative")
        k = iteration // self.decay_every
        lr = Decimal(str(self.initial_lr)) * Decimal(str(self.decay_factor)) ** k
        return float(lr)


@dataclass
class LossWeights:
    """Generator loss weights; defaults are the trained operating point."""

    rc_coarse: float = 30.0
    rc_refined: float = 70.0
    perc: float = 50.0
    adv: float = 0.7

    def __post_init__(self):
        for name in ("rc_coarse", "rc_refined", "perc", "adv"):
            if getattr(self, name) <= 0:
                raise InvalidArgument(f"loss weight {name} must be strictly positive")
