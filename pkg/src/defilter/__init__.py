"""Sticker-overlay occlusion synthesis, removal, and biometric impact
measurement for face images."""

from .compositor import (
    Anchor,
    CoverageReport,
    FaceRecord,
    FacePolygon,
    FilterAsset,
    apply_filter,
    build_manifest,
    classify_coverage,
    composite_with_mask,
    coverage_intensity,
    facial_polygon,
    load_asset,
    save_asset,
)
from .augment import ShapeSpec, Subregion, augment, subdivide
from .masks import OcclusionMask, binary_open
from .metrics import (
    DetectionResult,
    DetectionStats,
    TrialSet,
    detection_stats,
    det_curve,
    eer,
    fnmr_at_fmr,
    fnmr_at_fmr_detailed,
    fte,
    minmax_normalize,
)
from .engines import BaselineEngine, EngineAdapter, assemble_trials, baseline_embed
from .quality import QualityScorePair, mssim, psnr, quality_pair
from .schedules import LossWeights, OptimSchedule
from .segmenter import (
    SegCheckpoint,
    SegNetConfig,
    build_segnet,
    segment,
    train_segnet,
)
from .inpaint import (
    DiscriminatorConfig,
    GanCheckpoint,
    GeneratorConfig,
    Generator,
    Discriminator,
    PerceptualNet,
    discriminator_loss,
    generate,
    generator_loss,
    remove_filter,
    train_gan,
)
from .config import ExperimentConfig, load_config
from .pipeline import run_all, run_stage

__version__ = "0.1.0"
