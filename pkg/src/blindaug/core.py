"""Raster primitives: luminance, Gaussian filtering, Laplacian pyramids, local statistics.

Images are float64 numpy arrays shaped ``(H, W)`` or ``(H, W, C)``. Every
filter here replicates edge pixels (clamp-to-edge) at the borders.
"""

from dataclasses import dataclass, field
from math import ceil
from typing import List

import numpy as np
import scipy.fft
from scipy.ndimage import correlate1d

from . import _config
from ._validation import check_image
from .exceptions import InvalidInputError

LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])
BINOMIAL_5 = np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0


def to_luminance(img):
    """BT.601 luma ``Y = 0.299 R + 0.587 G + 0.114 B`` of an RGB image."""
    img = check_image(img, channels=3)
    return img @ LUMA_WEIGHTS


def gaussian_kernel(sigma, radius=None):
    """Normalized 1-D Gaussian taps over ``[-radius, radius]``.

    The default radius is ``max(1, ceil(3 * sigma))``.
    """
    if radius is None:
        radius = max(1, ceil(3.0 * sigma))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    w = np.exp(-0.5 * (x / sigma) ** 2)
    return w / w.sum()


def gaussian_blur(img, sigma, radius=None):
    """Separable Gaussian blur with clamp-to-edge borders.

    Parameters
    ----------
    img : ndarray
        ``(H, W)`` or ``(H, W, C)`` raster.
    sigma : float
        Standard deviation in pixels. ``0`` returns a copy of the input.
    radius : int, optional
        Explicit kernel support; defaults to ``max(1, ceil(3 * sigma))``.

    Returns
    -------
    ndarray
        Blurred image, same shape as ``img``.
    """
    img = check_image(img)
    if sigma < 0:
        raise InvalidInputError(f"sigma must be >= 0, got {sigma}")
    if sigma == 0:
        return img.copy()
    w = gaussian_kernel(sigma, radius)
    out = correlate1d(img, w, axis=0, mode="nearest")
    return correlate1d(out, w, axis=1, mode="nearest")


class GaussianBlurBank:
    """Blur one image at many sigmas, sharing a single forward FFT.

    The image is edge-padded by the largest kernel radius that will be
    requested, so circular convolution reproduces :func:`gaussian_blur`
    (clamp-to-edge) exactly on the original support, up to FFT round-off.
    """

    def __init__(self, img, max_sigma):
        img = check_image(img)
        self._squeeze = img.ndim == 2
        if self._squeeze:
            img = img[..., None]
        self.shape = img.shape
        self.pad = max(1, ceil(3.0 * max_sigma))
        self.max_sigma = max_sigma
        p = self.pad
        # pad past 2p up to a fast transform length; the extra rows are edge copies too
        h = scipy.fft.next_fast_len(img.shape[0] + 2 * p, real=True)
        w = scipy.fft.next_fast_len(img.shape[1] + 2 * p, real=True)
        padded = np.pad(img, ((p, h - img.shape[0] - p), (p, w - img.shape[1] - p), (0, 0)),
                        mode="edge")
        self._ph, self._pw = padded.shape[:2]
        self._spec = scipy.fft.rfft2(padded, axes=(0, 1), workers=_config.get_num_threads())
        self._img = img

    def _kernel_spectrum(self, sigma, n, real):
        w = gaussian_kernel(sigma)
        r = (len(w) - 1) // 2
        k = np.zeros(n)
        k[: r + 1] = w[r:]
        k[n - r:] = w[:r]
        return scipy.fft.rfft(k).real if real else scipy.fft.fft(k).real

    def blur(self, sigma):
        if sigma == 0:
            out = self._img.copy()
        else:
            if sigma > self.max_sigma:
                raise InvalidInputError(f"sigma {sigma} exceeds bank limit {self.max_sigma}")
            ky = self._kernel_spectrum(sigma, self._ph, real=False)
            kx = self._kernel_spectrum(sigma, self._pw, real=True)
            spec = self._spec * (ky[:, None, None] * kx[None, :, None])
            full = scipy.fft.irfft2(
                spec, s=(self._ph, self._pw), axes=(0, 1), workers=_config.get_num_threads()
            )
            p = self.pad
            out = full[p: p + self.shape[0], p: p + self.shape[1]]
        return out[..., 0] if self._squeeze else out


def _downsample(img):
    # filtering rows that decimation discards is wasted work
    out = correlate1d(img, BINOMIAL_5, axis=0, mode="nearest")[::2]
    out = correlate1d(out, BINOMIAL_5, axis=1, mode="nearest")
    return out[:, ::2]


def _linear_weights(n_out, n_in):
    # output sample i sits at input coordinate i / 2
    pos = np.arange(n_out) / 2.0
    pos = np.minimum(pos, n_in - 1)
    i0 = np.floor(pos).astype(np.intp)
    i1 = np.minimum(i0 + 1, n_in - 1)
    return i0, i1, pos - i0


def upsample(img, shape):
    """Bilinear upsampling by two to the exact ``shape[:2]``, clamp-to-edge."""
    h, w = shape[:2]
    y0, y1, fy = _linear_weights(h, img.shape[0])
    x0, x1, fx = _linear_weights(w, img.shape[1])
    ex = (slice(None),) + (None,) * (img.ndim - 1)
    rows = img[y0] * (1.0 - fy)[ex] + img[y1] * fy[ex]
    ex = (None, slice(None)) + (None,) * (img.ndim - 2)
    return rows[:, x0] * (1.0 - fx)[ex] + rows[:, x1] * fx[ex]


def gaussian_pyramid(img, levels):
    """Return ``levels + 1`` Gaussian levels, finest first."""
    out = [img]
    for _ in range(levels):
        out.append(_downsample(out[-1]))
    return out


@dataclass
class LaplacianPyramid:
    """Band-pass levels (finest first) plus the low-pass residual."""

    levels: List[np.ndarray] = field(default_factory=list)
    residual: np.ndarray = None

    @property
    def n_levels(self):
        return len(self.levels)


def build_laplacian_pyramid(img, levels):
    """Decompose ``img`` into ``levels`` band-pass images and a residual.

    Band ``l`` is Gaussian level ``l`` minus the upsampled Gaussian level
    ``l + 1``. Level sizes use ceiling division, so odd sizes are fine.
    """
    img = check_image(img)
    if levels < 1:
        raise InvalidInputError(f"levels must be >= 1, got {levels}")
    if min(img.shape[:2]) / 2 ** levels < 1:
        raise InvalidInputError(
            f"{levels} levels is too many for a {img.shape[1]}x{img.shape[0]} image"
        )
    gauss = gaussian_pyramid(img, levels)
    bands = [g - upsample(g_next, g.shape) for g, g_next in zip(gauss[:-1], gauss[1:])]
    return LaplacianPyramid(levels=bands, residual=gauss[-1])


def reconstruct_laplacian(pyr):
    """Collapse a Laplacian pyramid, coarse to fine."""
    out = np.asarray(pyr.residual, dtype=np.float64)
    for band in reversed(pyr.levels):
        expected = tuple(-(-s // 2) for s in band.shape[:2])
        if out.shape[:2] != expected or out.shape[2:] != band.shape[2:]:
            raise InvalidInputError(
                f"pyramid level of shape {band.shape} cannot sit above a level of shape {out.shape}"
            )
        out = band + upsample(out, band.shape)
    return out


def local_std(level, sigma_pool, radius=None):
    """Gaussian-pooled local standard deviation ``sqrt(B(X^2) - B(X)^2)``.

    Channels are treated independently. Small negative variances from
    round-off are clamped to zero before the square root.
    """
    if sigma_pool <= 0:
        raise InvalidInputError(f"sigma_pool must be > 0, got {sigma_pool}")
    level = check_image(level)
    # variance is shift invariant; centering avoids cancellation
    level = level - level.mean(axis=(0, 1))
    mean = gaussian_blur(level, sigma_pool, radius)
    mean_sq = gaussian_blur(level * level, sigma_pool, radius)
    return np.sqrt(np.maximum(mean_sq - mean * mean, 0.0))


def sample_bilinear(img, y, x):
    """Bilinearly sample ``img`` at float coordinates, clamp-to-edge.

    ``y`` and ``x`` are equal-shape arrays; the result has shape
    ``y.shape + img.shape[2:]``.
    """
    h, w = img.shape[:2]
    y = np.clip(y, 0.0, h - 1)
    x = np.clip(x, 0.0, w - 1)
    y0 = np.floor(y).astype(np.intp)
    x0 = np.floor(x).astype(np.intp)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = y - y0
    fx = x - x0
    if img.ndim == 3:
        fy = fy[..., None]
        fx = fx[..., None]
    top = img[y0, x0] * (1.0 - fx) + img[y0, x1] * fx
    bottom = img[y1, x0] * (1.0 - fx) + img[y1, x1] * fx
    return top * (1.0 - fy) + bottom * fy


def _pooled_at(img, w, rows, cols):
    r = (len(w) - 1) // 2
    h, wd = img.shape[:2]
    offs = np.arange(-r, r + 1)
    ry = np.clip(rows[:, None] + offs, 0, h - 1)
    cx = np.clip(cols[:, None] + offs, 0, wd - 1)
    vert = np.einsum("kt...,t->k...", img[ry], w)
    return np.einsum("kjt...,t->kj...", vert[:, cx], w)


def local_std_subgrid(level, sigma_pool, radius=None, start=0, step=1):
    """:func:`local_std` evaluated only at ``[start::step, start::step]``.

    Cheaper when the statistic is needed on a sparse grid only.
    """
    if sigma_pool <= 0:
        raise InvalidInputError(f"sigma_pool must be > 0, got {sigma_pool}")
    level = check_image(level)
    level = level - level.mean(axis=(0, 1))
    rows = np.arange(start, level.shape[0], step)
    cols = np.arange(start, level.shape[1], step)
    w = gaussian_kernel(sigma_pool, radius)
    mean = _pooled_at(level, w, rows, cols)
    mean_sq = _pooled_at(level * level, w, rows, cols)
    return np.sqrt(np.maximum(mean_sq - mean * mean, 0.0))
