"""Adaptive sensitivity-guided image augmentation.

The library estimates how strongly a model reacts to each of 24 basis
image perturbations, solves for intensities equally spaced in cumulative
sensitivity with a minimal evaluation budget, and turns the result into a
Beta-Binomial sampling policy that an online training loop can follow.
"""

from .augment import (
    ALL_KINDS,
    AugmentationError,
    AugmentationKind,
    AugmentationSpec,
    DegenerateCropError,
    affine_matrix,
    apply,
    apply_affine,
    channel_scale,
    gaussian_blur,
    gaussian_noise,
    hsv_to_rgb,
    rgb_to_hsv,
)
from .curve import (
    Bracket,
    CurveError,
    CurveEstimate,
    Knot,
    bracket_uncertainty,
    curve_from_json,
    curve_to_json,
    invert,
    pchip_eval,
    pchip_fit,
)
from .image import ImageBuffer, ImageError, read_image, synthetic_image, write_image
from .loop import LoopConfig, LoopError, MemoryMeter, SimulatedLearner, training_loop
from .metrics import (
    FeatureSet,
    FileFeatureExtractor,
    MetricsError,
    RandomProjectionExtractor,
    SegSample,
    confusion_matrix,
    delta_kid_normalized,
    delta_ma,
    feature_extract,
    kid,
    mmd2_unbiased,
    seg_metrics,
)
from .policy import (
    AugmentationPolicy,
    PolicyError,
    beta_binomial_pmf,
    build_policy,
    policy_from_json,
    policy_to_json,
    sample,
)
from .reference import load_reference_levels
from .sensitivity import (
    EvaluatorBinding,
    GSample,
    LevelSet,
    NonDegradingError,
    SAConfig,
    SensitivityError,
    g_value,
    level_sets_from_json,
    level_sets_to_json,
    run_sensitivity_analysis,
    solve_levels_adaptive,
    solve_levels_dense,
)

__version__ = "0.1.0"
