"""scikit-learn style wrappers around the fitting and synthesis functions.

Every estimator learns how a camera turns a clean image into what it
actually records: ``fit(X, y, ...)`` takes the clean image ``X`` and the
camera's observation ``y``; ``transform(X, ...)`` applies the learned
distortion to new clean content. Scene geometry (depth, flow) is passed as
keyword arguments to both.
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_image
from .estimation import (
    ModelSet,
    SceneBundle,
    dof_sigma_grid,
    estimate_sigma_map,
    fit_all,
    fit_dof_model,
    fit_mb_exposure,
    fit_noise_model,
    mb_beta_grid,
    texture_mask,
)
from .synthesis import (
    composite_virtual,
    distort_chain,
    synthesize_dof,
    synthesize_mb,
    synthesize_noise,
)


class _DistortionEstimator(TransformerMixin, BaseEstimator):

    def fit_transform(self, X, y, **geometry):
        return self.fit(X, y, **geometry).transform(X, **geometry)

    def score(self, X, y, **geometry):
        """Negative mean squared error of the re-distorted ``X`` against ``y``."""
        pred = self.transform(X, **geometry)
        y = check_image(y)
        return -float(np.mean((pred - y) ** 2))


class DofEstimator(_DistortionEstimator):
    """Depth-of-field blur as a quadratic function of depth.

    Parameters
    ----------
    sigma_max : float
        Upper end of the blur search and clamp ceiling of the model, pixels.
    n_steps : int
        Number of candidate blur stds searched per pixel.
    texture_threshold, texture_sigma : float
        Pixels whose pooled luminance std is below the threshold carry no
        blur information and are left out of the fit.
    damping : float
        Diagonal regularization of the normal equations.

    Attributes
    ----------
    model_ : DofModel
    sigma_map_ : ndarray
        Best-fit blur std per pixel.
    mask_ : ndarray of bool
        Textured pixels used in the fit.
    """

    def __init__(self, sigma_max=10.0, n_steps=100, texture_threshold=0.02,
                 texture_sigma=2.0, damping=1e-8):
        self.sigma_max = sigma_max
        self.n_steps = n_steps
        self.texture_threshold = texture_threshold
        self.texture_sigma = texture_sigma
        self.damping = damping

    def fit(self, X, y, *, depth):
        grid = dof_sigma_grid(self.n_steps, self.sigma_max)
        self.sigma_map_ = estimate_sigma_map(y, X, grid)
        self.mask_ = texture_mask(X, self.texture_threshold, self.texture_sigma)
        self.model_ = fit_dof_model(self.sigma_map_, depth, self.mask_,
                                    damping=self.damping, sigma_max=self.sigma_max)
        return self

    def transform(self, X, *, depth):
        check_is_fitted(self, "model_")
        return synthesize_dof(X, self.model_, depth)


class MotionBlurEstimator(_DistortionEstimator):
    """Global exposure fraction found by exhaustive search.

    Attributes
    ----------
    model_ : MbModel
    losses_ : ndarray
        MSE for every candidate exposure.
    """

    def __init__(self, n_steps=10):
        self.n_steps = n_steps

    def fit(self, X, y, *, flow):
        self.model_ = fit_mb_exposure(y, X, flow, mb_beta_grid(self.n_steps))
        self.losses_ = self.model_.losses_
        return self

    def transform(self, X, *, flow):
        check_is_fitted(self, "model_")
        return synthesize_mb(X, self.model_, flow)


class NoiseEstimator(_DistortionEstimator):
    """Luminance-dependent, multi-scale sensor noise.

    ``transform`` draws fresh noise from ``seed``, so it is deterministic
    for a fixed estimator.
    """

    def __init__(self, levels=4, pool_sigma=4.0, stride=32, pool_radius=4, seed=0):
        self.levels = levels
        self.pool_sigma = pool_sigma
        self.stride = stride
        self.pool_radius = pool_radius
        self.seed = seed

    def fit(self, X, y):
        self.model_ = fit_noise_model(y, X, levels=self.levels, pool_sigma=self.pool_sigma,
                                      stride=self.stride, pool_radius=self.pool_radius)
        return self

    def transform(self, X):
        check_is_fitted(self, "model_")
        return synthesize_noise(X, self.model_, self.seed)


class CameraDistortionModel(_DistortionEstimator):
    """All three distortions, fitted independently and applied DoF, MB, noise.

    Parameters
    ----------
    skip : tuple of {"noise", "dof", "mb"}
        Distortions to leave at identity.
    seed : int
        Noise seed used by ``transform`` and ``composite``.
    """

    def __init__(self, skip=(), seed=0):
        self.skip = skip
        self.seed = seed

    def fit(self, X, y, *, depth, flow):
        bundle = SceneBundle(clean=X, depth=depth, flow=flow, distorted=y)
        self.model_set_ = fit_all(bundle, skip=tuple(self.skip))
        return self

    @classmethod
    def from_model_set(cls, model_set, seed=0):
        est = cls(seed=seed)
        est.model_set_ = model_set
        return est

    def _stages(self):
        check_is_fitted(self, "model_set_")
        m = self.model_set_
        return (None if "dof" in self.skip else m.dof,
                None if "mb" in self.skip else m.mb,
                None if "noise" in self.skip else m.noise)

    def transform(self, X, *, depth=None, flow=None):
        dof, mb, noise = self._stages()
        return distort_chain(X, dof=dof, depth=depth, mb=mb, flow=flow, noise=noise,
                             seed=self.seed)

    def composite(self, real, virtual_rgb, alpha, *, depth, flow):
        """Distort a rendered layer and its alpha, then blend it over ``real``."""
        dof, mb, noise = self._stages()
        return composite_virtual(real, virtual_rgb, alpha, depth, flow, dof=dof, mb=mb,
                                 noise=noise, seed=self.seed)

    def to_json(self):
        check_is_fitted(self, "model_set_")
        return self.model_set_.to_json()

    @classmethod
    def from_json(cls, text, seed=0):
        return cls.from_model_set(ModelSet.from_json(text), seed=seed)
