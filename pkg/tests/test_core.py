from math import ceil

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from blindaug.core import (
    GaussianBlurBank,
    LaplacianPyramid,
    build_laplacian_pyramid,
    gaussian_blur,
    local_std,
    local_std_subgrid,
    reconstruct_laplacian,
    sample_bilinear,
    to_luminance,
)
from blindaug.exceptions import InvalidInputError


def dense_blur_oracle(img, sigma):
    """Direct 2-D weighted sum with clamped indices."""
    r = max(1, ceil(3 * sigma))
    h, w = img.shape[:2]
    out = np.zeros_like(img)
    for y in range(h):
        for x in range(w):
            acc = 0.0
            norm = 0.0
            for dy in range(-r, r + 1):
                for dx in range(-r, r + 1):
                    k = np.exp(-(dy * dy + dx * dx) / (2 * sigma * sigma))
                    acc = acc + k * img[min(max(y + dy, 0), h - 1), min(max(x + dx, 0), w - 1)]
                    norm += k
            out[y, x] = acc / norm
    return out


def windowed_std_oracle(img, sigma, r):
    """Weighted std from explicit windows, two-pass (mean, then squared deviations)."""
    h, w = img.shape
    out = np.zeros_like(img)
    for y in range(h):
        for x in range(w):
            vals, wts = [], []
            for dy in range(-r, r + 1):
                for dx in range(-r, r + 1):
                    vals.append(img[min(max(y + dy, 0), h - 1), min(max(x + dx, 0), w - 1)])
                    wts.append(np.exp(-(dy * dy + dx * dx) / (2 * sigma * sigma)))
            vals, wts = np.array(vals), np.array(wts) / np.sum(wts)
            m = np.sum(wts * vals)
            out[y, x] = np.sqrt(np.sum(wts * (vals - m) ** 2))
    return out


# -- luminance ---------------------------------------------------------------


@pytest.mark.parametrize("rgb, y", [((0, 0, 0), 0.0), ((1, 1, 1), 1.0), ((1, 0, 0), 0.299)])
def test_luminance_examples(rgb, y):
    img = np.broadcast_to(np.array(rgb, dtype=float), (4, 5, 3))
    np.testing.assert_allclose(to_luminance(img), y, atol=1e-15)


def test_luminance_rejects_wrong_channels():
    with pytest.raises(InvalidInputError):
        to_luminance(np.zeros((4, 4, 2)))
    with pytest.raises(InvalidInputError):
        to_luminance(np.zeros((4, 4)))


@given(arrays(np.float64, (3, 4, 3), elements=st.floats(0, 1)), st.floats(0, 10))
def test_luminance_is_linear(img, a):
    np.testing.assert_allclose(to_luminance(a * img), a * to_luminance(img), atol=1e-12)


# -- gaussian blur -------------------------------------------------------------


def test_blur_constant_and_zero_sigma(rng):
    const = np.full((20, 17, 3), 0.37)
    for s in (0.5, 2.5, 9.0):
        np.testing.assert_allclose(gaussian_blur(const, s), const, atol=1e-15)
    img = rng.random((9, 11))
    out = gaussian_blur(img, 0)
    assert np.array_equal(out, img) and out is not img


def test_blur_matches_dense_convolution(rng):
    img = rng.random((16, 16, 3))
    np.testing.assert_allclose(gaussian_blur(img, 2.5), dense_blur_oracle(img, 2.5), atol=1e-5)


def test_blur_negative_sigma():
    with pytest.raises(InvalidInputError):
        gaussian_blur(np.zeros((4, 4)), -1)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.3, 4.0), st.integers(20, 40), st.integers(20, 40))
def test_blur_preserves_mean_with_constant_border(seed, sigma, h, w):
    # interior content well inside a constant frame: clamp-to-edge equals an
    # infinite constant extension, so no mass crosses the image border
    r = max(1, ceil(3 * sigma))
    img = np.full((h + 4 * r, w + 4 * r), 0.5)
    img[2 * r:-2 * r, 2 * r:-2 * r] = np.random.default_rng(seed).random((h, w))
    assert abs(gaussian_blur(img, sigma).mean() - img.mean()) <= 1e-12


def test_blur_mean_drift_small_on_large_noise(rng):
    img = rng.random((256, 256))
    assert abs(gaussian_blur(img, 2.0).mean() - img.mean()) <= 1e-4


@pytest.mark.parametrize("shape", [(40, 33), (31, 50, 3)])
def test_blur_bank_matches_spatial_blur(rng, shape):
    img = rng.random(shape)
    bank = GaussianBlurBank(img, 6.0)
    for s in (0.0, 0.3, 1.7, 6.0):
        np.testing.assert_allclose(bank.blur(s), gaussian_blur(img, s), atol=1e-12)
    with pytest.raises(InvalidInputError):
        bank.blur(7.0)


# -- pyramid -------------------------------------------------------------------


def test_pyramid_level_sizes():
    pyr = build_laplacian_pyramid(np.zeros((512, 512, 3)), 4)
    assert [b.shape[:2] for b in pyr.levels] == [(512, 512), (256, 256), (128, 128), (64, 64)]
    assert pyr.residual.shape[:2] == (32, 32)
    pyr = build_laplacian_pyramid(np.zeros((37, 20)), 3)
    assert [b.shape for b in pyr.levels] == [(37, 20), (19, 10), (10, 5)]
    assert pyr.residual.shape == (5, 3)


def test_pyramid_zero():
    pyr = build_laplacian_pyramid(np.zeros((30, 30, 3)), 4)
    assert all(not np.any(b) for b in pyr.levels) and not np.any(pyr.residual)
    zero = LaplacianPyramid([np.zeros(s) for s in [(30, 30), (15, 15)]], np.zeros((8, 8)))
    assert not np.any(reconstruct_laplacian(zero))


def test_pyramid_too_many_levels():
    with pytest.raises(InvalidInputError):
        build_laplacian_pyramid(np.zeros((15, 64)), 4)
    with pytest.raises(InvalidInputError):
        build_laplacian_pyramid(np.zeros((16, 16)), 0)


def test_reconstruct_dimension_mismatch(rng):
    pyr = build_laplacian_pyramid(rng.random((32, 32)), 3)
    pyr.levels[1] = np.zeros((10, 16))
    with pytest.raises(InvalidInputError):
        reconstruct_laplacian(pyr)


@settings(max_examples=25, deadline=None)
@given(st.integers(16, 70), st.integers(16, 70), st.sampled_from([1, 3]),
       st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_pyramid_round_trip(h, w, c, levels, seed):
    img = np.random.default_rng(seed).random((h, w, c) if c > 1 else (h, w))
    out = reconstruct_laplacian(build_laplacian_pyramid(img, levels))
    assert np.max(np.abs(out - img)) <= 1e-5


def test_scaled_band_stays_in_its_range(rng):
    img = rng.random((128, 128, 3))
    pyr = build_laplacian_pyramid(img, 4)
    band = pyr.levels[1].copy()
    pyr.levels[1] = 2 * band
    diff = reconstruct_laplacian(pyr) - img
    # linearity: the change is exactly band 1 expanded on its own
    alone = LaplacianPyramid([np.zeros_like(b) for b in pyr.levels], np.zeros_like(pyr.residual))
    alone.levels[1] = band
    np.testing.assert_allclose(diff, reconstruct_laplacian(alone), atol=1e-12)
    # re-decomposed, the change sits in bands 0-1; coarser bands keep < 1e-3 of its energy
    q = build_laplacian_pyramid(diff, 4)
    energy = np.array([np.sum(b ** 2) for b in q.levels] + [np.sum(q.residual ** 2)])
    assert energy[2:].sum() / energy.sum() < 1e-2
    assert energy[3:].sum() / energy.sum() < 1e-3


# -- local std -------------------------------------------------------------------


def test_local_std_constant_is_zero():
    assert not np.any(local_std(np.full((20, 20, 3), 0.731), 4.0))


def test_local_std_unit_noise():
    noise = np.random.default_rng(0).standard_normal((256, 256))
    s = local_std(noise, 4.0)
    assert abs(s.mean() - 1.0) <= 0.1


def test_local_std_matches_window_oracle(rng):
    img = rng.random((32, 32))
    np.testing.assert_allclose(local_std(img, 2.0), windowed_std_oracle(img, 2.0, 6), atol=1e-4)
    np.testing.assert_allclose(local_std(img, 4.0, radius=4),
                               windowed_std_oracle(img, 4.0, 4), atol=1e-4)


def test_local_std_bad_sigma():
    with pytest.raises(InvalidInputError):
        local_std(np.zeros((5, 5)), 0)


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, (12, 9, 3), elements=st.floats(-5, 5)), st.floats(0.5, 5))
def test_local_std_nonnegative(img, sigma):
    assert np.all(local_std(img, sigma) >= 0)


@pytest.mark.parametrize("sigma, radius, start, step", [(4.0, 4, 16, 32), (1.0, 3, 2, 4),
                                                       (0.5, 2, 0, 1)])
def test_local_std_subgrid_matches_dense(rng, sigma, radius, start, step):
    img = rng.standard_normal((70, 65, 3))
    dense = local_std(img, sigma, radius)[start::step, start::step]
    np.testing.assert_allclose(local_std_subgrid(img, sigma, radius, start, step), dense,
                               atol=1e-12)


def test_sample_bilinear(rng):
    img = rng.random((6, 7, 3))
    yy, xx = np.mgrid[0:6, 0:7].astype(float)
    np.testing.assert_array_equal(sample_bilinear(img, yy, xx), img)
    mid = sample_bilinear(img, np.array([2.5]), np.array([3.25]))
    expect = (0.5 * (0.75 * img[2, 3] + 0.25 * img[2, 4])
              + 0.5 * (0.75 * img[3, 3] + 0.25 * img[3, 4]))
    np.testing.assert_allclose(mid[0], expect, atol=1e-15)
    # clamp outside the frame
    np.testing.assert_array_equal(sample_bilinear(img, np.array([-3.0]), np.array([99.0]))[0],
                                  img[0, 6])
