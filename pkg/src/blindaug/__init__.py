"""Blind estimation and re-synthesis of camera motion blur, depth of field and noise."""

from ._config import get_num_threads, set_num_threads
from .core import (
    LaplacianPyramid,
    build_laplacian_pyramid,
    gaussian_blur,
    local_std,
    reconstruct_laplacian,
    to_luminance,
)
from .estimation import (
    ModelSet,
    SceneBundle,
    estimate_sigma_map,
    fit_all,
    fit_dof_model,
    fit_mb_exposure,
    fit_noise_model,
    predict_noise_std,
    texture_mask,
)
from .estimators import (
    CameraDistortionModel,
    DofEstimator,
    MotionBlurEstimator,
    NoiseEstimator,
)
from .exceptions import DegenerateFitError, FileFormatError, InvalidInputError, NotFittedError
from .synthesis import (
    DofModel,
    MbModel,
    NoiseModel,
    alpha_composite,
    composite_virtual,
    distort_chain,
    synthesize_dof,
    synthesize_mb,
    synthesize_noise,
)

__version__ = "0.1.0"
