"""Forward distortion operators: depth of field, motion blur and sensor noise.

All operators are pure functions of their inputs. Identity parameters return
an exact copy of the input.
"""

from dataclasses import dataclass
from math import ceil

import numpy as np

from ._random import standard_normal
from ._validation import check_depth, check_flow, check_image, check_same_size
from .core import (
    LaplacianPyramid,
    build_laplacian_pyramid,
    gaussian_blur,
    gaussian_pyramid,
    local_std,
    reconstruct_laplacian,
    to_luminance,
)
from .exceptions import InvalidInputError

# below this the truncated kernel is effectively a single tap
MIN_BLUR_SIGMA = 0.25
# per-sigma full-image blurs are used when a depth map has this few distinct blurs
_MAX_GROUPED_SIGMAS = 48
_NORM_EPS = 1e-6


@dataclass
class DofModel:
    """Quadratic map from depth to Gaussian blur std, ``a Z^2 + b Z + c`` pixels."""

    a: float = 0.0
    b: float = 0.0
    c: float = 0.0
    sigma_max: float = 10.0

    def __post_init__(self):
        if not self.sigma_max > 0:
            raise InvalidInputError(f"sigma_max must be > 0, got {self.sigma_max}")

    @property
    def coef(self):
        return np.array([self.a, self.b, self.c])

    def __call__(self, depth):
        """Unclamped blur std at ``depth``."""
        depth = np.asarray(depth, dtype=np.float64)
        return (self.a * depth + self.b) * depth + self.c

    def is_identity(self):
        return self.a == 0 and self.b == 0 and self.c == 0

    def sigma_map(self, depth):
        """Per-pixel blur std as used by :func:`synthesize_dof`."""
        sigma = np.clip(self(depth), 0.0, self.sigma_max)
        sigma[sigma < MIN_BLUR_SIGMA] = 0.0
        return sigma


@dataclass
class MbModel:
    """Exposure fraction: the part of the frame interval the sensor integrates."""

    beta: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.beta <= 1.0:
            raise InvalidInputError(f"beta must lie in [0, 1], got {self.beta}")

    def is_identity(self):
        return self.beta == 0


@dataclass
class NoiseModel:
    """Per-pyramid-level affine maps from luminance to per-channel noise std.

    ``maps[l, 0]`` holds the RGB slopes and ``maps[l, 1]`` the RGB intercepts
    for band ``l``. Pooling for the local statistics uses a Gaussian of
    ``pool_sigma / 2**l`` truncated at ``pool_radius`` taps; the fitting
    subgrid ``stride`` is halved per level as well.
    """

    maps: np.ndarray = None
    pool_sigma: float = 4.0
    stride: int = 32
    pool_radius: int = 4

    def __post_init__(self):
        if self.maps is None:
            self.maps = np.zeros((4, 2, 3))
        self.maps = np.asarray(self.maps, dtype=np.float64)
        if self.maps.ndim != 3 or self.maps.shape[1:] != (2, 3) or len(self.maps) < 1:
            raise InvalidInputError(f"noise maps must have shape (L, 2, 3), got {self.maps.shape}")

    @classmethod
    def zeros(cls, levels=4, **kwargs):
        return cls(maps=np.zeros((levels, 2, 3)), **kwargs)

    @property
    def level_count(self):
        return len(self.maps)

    @property
    def n_params(self):
        return self.maps.size

    def pool_params(self, level):
        """``(sigma, radius)`` of the pooling blur at pyramid ``level``."""
        sigma = self.pool_sigma / 2 ** level
        return sigma, min(self.pool_radius, max(1, ceil(3.0 * sigma)))

    def level_stride(self, level):
        return max(1, self.stride >> level)

    def is_identity(self):
        return not np.any(self.maps)


def predict_noise_std(model, y, level):
    """Per-channel noise std predicted for luminance ``y`` at pyramid ``level``.

    Returns an array of shape ``np.shape(y) + (3,)``, clamped to be >= 0.
    """
    if not 0 <= level < model.level_count:
        raise InvalidInputError(f"level {level} outside [0, {model.level_count})")
    y = np.asarray(y, dtype=np.float64)[..., None]
    slope, intercept = model.maps[level]
    return np.maximum(slope * y + intercept, 0.0)


def _as_3d(img):
    return img[..., None] if img.ndim == 2 else img


def synthesize_dof(img, model, depth):
    """Depth-dependent Gaussian blur, gathered per output pixel.

    Pixel ``p`` becomes the normalized Gaussian average of its neighbours with
    std ``clip(G(Z(p)), 0, sigma_max)`` where ``G`` is ``model``.
    """
    img = check_image(img)
    depth = check_depth(depth, img)
    sigma = model.sigma_map(depth)
    values = np.unique(sigma)
    if len(values) <= _MAX_GROUPED_SIGMAS:
        # exact: a gather blur with one sigma equals the uniform blur there
        out = img.copy()
        for s in values[values > 0]:
            sel = sigma == s
            out[sel] = gaussian_blur(img, s)[sel]
        return out
    from ._kernels import variable_gaussian_gather

    out = variable_gaussian_gather(np.ascontiguousarray(_as_3d(img)), sigma)
    return out.reshape(img.shape)


def synthesize_mb(img, model, flow):
    """Blur each pixel along its own motion vector scaled by the exposure.

    ``S = max(3, ceil(|beta F(p)|) + 1)`` bilinear taps are placed uniformly on
    the segment ``p + t beta F(p)``, ``t`` in ``[-1/2, 1/2]``, and averaged.
    """
    img = check_image(img)
    flow = check_flow(flow, img)
    if model.beta == 0:
        return img.copy()
    from ._kernels import line_blur_gather

    disp = np.ascontiguousarray(model.beta * flow)
    out = line_blur_gather(np.ascontiguousarray(_as_3d(img)), disp)
    return out.reshape(img.shape)


def synthesize_noise(img, model, seed=0):
    """Add pyramid-shaped noise whose band stds follow ``model``.

    A seeded white-noise field is decomposed into a Laplacian pyramid, each
    band is normalized to unit local std and rescaled per channel by the std
    predicted from the luminance of ``img`` at that band's resolution. The
    residual is dropped (zero-mean noise). The result is not clipped.
    """
    img = check_image(img, channels=3)
    if model.is_identity():
        return img.copy()
    h, w = img.shape[:2]
    levels = model.level_count
    white = build_laplacian_pyramid(standard_normal(seed, h, w, 3), levels)
    lum = gaussian_pyramid(to_luminance(img), levels)
    bands = []
    for lvl, band in enumerate(white.levels):
        sigma, radius = model.pool_params(lvl)
        unit = band / (local_std(band, sigma, radius) + _NORM_EPS)
        bands.append(unit * predict_noise_std(model, lum[lvl], lvl))
    noise = reconstruct_laplacian(LaplacianPyramid(bands, np.zeros_like(white.residual)))
    return img + noise


def noise_total_std(model, y, size=128, seed=0):
    """Per-channel std of the noise ``model`` synthesizes on a flat field of luminance ``y``.

    Measured on a ``size`` x ``size`` grey field, so it includes every effect
    of the band normalization and reconstruction, not just the band maps.
    """
    flat = np.full((size, size, 3), float(y))
    return (synthesize_noise(flat, model, seed) - flat).std(axis=(0, 1))


def distort_chain(img, dof=None, depth=None, mb=None, flow=None, noise=None, seed=0):
    """Apply DoF, then motion blur, then noise.

    Stages that are ``None`` or have identity parameters are skipped, in which
    case their geometry argument may be ``None`` too.
    """
    out = check_image(img, copy=True)
    if dof is not None and not dof.is_identity():
        out = synthesize_dof(out, dof, depth)
    if mb is not None and not mb.is_identity():
        out = synthesize_mb(out, mb, flow)
    if noise is not None and not noise.is_identity():
        out = synthesize_noise(out, noise, seed)
    return out


def alpha_composite(real, virtual_rgb, alpha):
    """Straight-alpha ``over``: ``alpha * virtual + (1 - alpha) * real``."""
    real = check_image(real)
    virtual_rgb = check_image(virtual_rgb)
    alpha = check_image(alpha, channels=1)
    if real.shape != virtual_rgb.shape:
        raise InvalidInputError(
            f"virtual layer shape {virtual_rgb.shape} does not match real frame {real.shape}"
        )
    check_same_size(real, alpha, name="alpha")
    if alpha.min() < 0 or alpha.max() > 1:
        raise InvalidInputError("alpha must lie in [0, 1]")
    a = alpha.reshape(alpha.shape[:2] + (1,) * (real.ndim - 2))
    return a * virtual_rgb + (1.0 - a) * real


def composite_virtual(real, virtual_rgb, alpha, depth, flow, dof=None, mb=None,
                      noise=None, seed=0):
    """Distort a rendered layer to match the camera and composite it over ``real``.

    The virtual colour and its alpha go through the same DoF and motion blur,
    so blurred silhouettes blend. Noise is synthesized on the composite and
    added in proportion to the distorted alpha, leaving real pixels, which
    already carry camera noise, untouched.
    """
    virtual_rgb = check_image(virtual_rgb, channels=3)
    alpha = check_image(alpha, channels=1)
    if alpha.ndim == 3:
        alpha = alpha[..., 0]
    layer = distort_chain(virtual_rgb, dof=dof, depth=depth, mb=mb, flow=flow)
    a = distort_chain(alpha, dof=dof, depth=depth, mb=mb, flow=flow)
    a = np.clip(a, 0.0, 1.0)
    out = alpha_composite(real, layer, a)
    if noise is not None and not noise.is_identity():
        grain = synthesize_noise(out, noise, seed) - out
        out = out + a[..., None] * grain
    return out
