"""Experiment configuration: declarative profiles plus file overrides.

The "paper" profile carries the full-scale operating point (512x512,
70 epochs, 7/3 filter split); "desk" shrinks everything so the whole
pipeline runs on a CPU in minutes while keeping every contract intact.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field

import yaml

from .errors import ConfigError
from .schedules import LossWeights, OptimSchedule
from .segmenter import SegNetConfig
from .inpaint import DiscriminatorConfig, GeneratorConfig
from .synthfaces import TEST_FILTERS, TRAIN_FILTERS


@dataclass
class ExperimentConfig:
    profile: str = "desk"
    seed: int = 7

    image_size: int = 64
    train_identities: int = 10
    eval_identities: int = 8
    sessions: int = 3

    train_filters: tuple = TRAIN_FILTERS
    test_filters: tuple = TEST_FILTERS

    augment_per_image: int = 2
    n_subregions: int = 16
    fill_range: tuple = (0.3, 0.9)

    seg_base_channels: int = 8
    seg_se_layers: tuple = (0, 1, 2, 3, 4)
    seg_threshold: float = 0.5
    seg_iterations: int = 600
    seg_batch_size: int = 8

    gan_base_channels: int = 8
    gan_iterations: int = 500
    gan_batch_size: int = 8

    initial_lr: float = 0.001
    decay_factor: float = 0.1
    decay_every: int = 50_000
    epochs: int = 70
    validation_fraction: float = 0.1

    rc_coarse_weight: float = 30.0
    rc_refined_weight: float = 70.0
    perc_weight: float = 50.0
    adv_weight: float = 0.7

    fmr_targets: tuple = (0.0001, 0.001, 0.01)
    impostors_per_probe: int = 10

    def __post_init__(self):
        self.train_filters = tuple(self.train_filters)
        self.test_filters = tuple(self.test_filters)
        self.fill_range = tuple(self.fill_range)
        self.seg_se_layers = tuple(self.seg_se_layers)
        self.fmr_targets = tuple(self.fmr_targets)
        overlap = set(self.train_filters) & set(self.test_filters)
        if overlap:
            raise ConfigError(f"filters in both splits: {sorted(overlap)}")
        if self.profile == "paper" and len(self.test_filters) != 3:
            raise ConfigError("paper profile holds out exactly 3 filters")
        if not self.train_filters or not self.test_filters:
            raise ConfigError("both filter splits must be non-empty")
        lo, hi = self.fill_range
        if not 0.0 <= lo <= hi <= 1.0:
            raise ConfigError(f"fill_range {self.fill_range} outside [0, 1]")
        factor = 2 ** 5
        if self.image_size % factor:
            raise ConfigError(f"image_size {self.image_size} not divisible by {factor}")

    def segnet_config(self) -> SegNetConfig:
        return SegNetConfig(
            encoder_blocks=5,
            se_block_layers=self.seg_se_layers,
            base_channels=self.seg_base_channels,
            input_size=(self.image_size, self.image_size),
        )

    def generator_config(self) -> GeneratorConfig:
        return GeneratorConfig(base_channels=self.gan_base_channels)

    def discriminator_config(self) -> DiscriminatorConfig:
        return DiscriminatorConfig(base_channels=self.gan_base_channels)

    def optim_schedule(self) -> OptimSchedule:
        return OptimSchedule(
            initial_lr=self.initial_lr,
            decay_factor=self.decay_factor,
            decay_every=self.decay_every,
            epochs=self.epochs,
        )

    def loss_weights(self) -> LossWeights:
        return LossWeights(
            rc_coarse=self.rc_coarse_weight,
            rc_refined=self.rc_refined_weight,
            perc=self.perc_weight,
            adv=self.adv_weight,
        )


PROFILES = {
    "desk": {},
    "paper": {
        "profile": "paper",
        "image_size": 512,
        "train_identities": 200,
        "eval_identities": 100,
        "sessions": 5,
        "augment_per_image": 3,
        "seg_base_channels": 32,
        "seg_iterations": None,
        "gan_base_channels": 32,
        "gan_iterations": None,
        "seg_batch_size": 4,
        "gan_batch_size": 4,
    },
}


def load_config(path=None, profile: str = "desk", seed: int = None) -> ExperimentConfig:
    """Profile defaults, then file overrides, then an explicit seed."""
    if profile not in PROFILES:
        raise ConfigError(f"unknown profile '{profile}'; choose from {sorted(PROFILES)}")
    values = dict(PROFILES[profile])
    values.setdefault("profile", profile)
    if path is not None:
        try:
            with open(path) as f:
                loaded = yaml.safe_load(f) or {}
        except OSError as e:
            raise ConfigError(f"cannot read config file {path}: {e}") from e
        except yaml.YAMLError as e:
            raise ConfigError(f"config file {path} is not valid YAML: {e}") from e
        if not isinstance(loaded, dict):
            raise ConfigError(f"config file {path} must hold a mapping")
        known = set(ExperimentConfig.__dataclass_fields__)
        unknown = set(loaded) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        values.update(loaded)
    if seed is not None:
        values["seed"] = seed
    try:
        return ExperimentConfig(**values)
    except TypeError as e:
        raise ConfigError(str(e)) from e


def config_hash(config: ExperimentConfig) -> str:
    blob = json.dumps(asdict(config), sort_keys=True, default=list)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def derive_seed(global_seed: int, label: str) -> int:
    digest = hashlib.sha256(f"{global_seed}:{label}".encode()).digest()
    return int.from_bytes(digest[:4], "big")
