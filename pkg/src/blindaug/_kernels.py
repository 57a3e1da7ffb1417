"""Compiled per-pixel gather kernels.

Each output pixel is computed independently from read-only inputs, so the
results are identical for any thread count.
"""

import math

import numba
import numpy as np

from ._config import configure_numba

configure_numba()


@numba.njit(parallel=True, cache=True)
def variable_gaussian_gather(img, sigma):
    h, w, nc = img.shape
    out = np.empty_like(img)
    for y in numba.prange(h):
        for x in range(w):
            s = sigma[y, x]
            if s <= 0.0:
                for c in range(nc):
                    out[y, x, c] = img[y, x, c]
                continue
            r = max(1, int(math.ceil(3.0 * s)))
            taps = np.empty(2 * r + 1)
            total = 0.0
            for k in range(-r, r + 1):
                v = math.exp(-0.5 * (k / s) ** 2)
                taps[k + r] = v
                total += v
            for k in range(2 * r + 1):
                taps[k] /= total
            acc = np.zeros(nc)
            for dy in range(-r, r + 1):
                yy = min(max(y + dy, 0), h - 1)
                row = np.zeros(nc)
                for dx in range(-r, r + 1):
                    xx = min(max(x + dx, 0), w - 1)
                    wx = taps[dx + r]
                    for c in range(nc):
                        row[c] += wx * img[yy, xx, c]
                wy = taps[dy + r]
                for c in range(nc):
                    acc[c] += wy * row[c]
            for c in range(nc):
                out[y, x, c] = acc[c]
    return out


@numba.njit(parallel=True, cache=True)
def line_blur_gather(img, disp):
    h, w, nc = img.shape
    out = np.empty_like(img)
    for y in numba.prange(h):
        for x in range(w):
            dx = disp[y, x, 0]
            dy = disp[y, x, 1]
            if dx == 0.0 and dy == 0.0:
                for c in range(nc):
                    out[y, x, c] = img[y, x, c]
                continue
            n = max(3, int(math.ceil(math.sqrt(dx * dx + dy * dy))) + 1)
            acc = np.zeros(nc)
            for i in range(n):
                t = -0.5 + i / (n - 1)
                sy = min(max(y + t * dy, 0.0), h - 1.0)
                sx = min(max(x + t * dx, 0.0), w - 1.0)
                y0 = int(math.floor(sy))
                x0 = int(math.floor(sx))
                y1 = min(y0 + 1, h - 1)
                x1 = min(x0 + 1, w - 1)
                fy = sy - y0
                fx = sx - x0
                for c in range(nc):
                    top = img[y0, x0, c] * (1.0 - fx) + img[y0, x1, c] * fx
                    bot = img[y1, x0, c] * (1.0 - fx) + img[y1, x1, c] * fx
                    acc[c] += top * (1.0 - fy) + bot * fy
            for c in range(nc):
                out[y, x, c] = acc[c] / n
    return out


@numba.njit(parallel=True, cache=True)
def argmin_update(best_err, best_val, pred, target, value):
    """Keep ``value`` where the channel-summed squared error of ``pred`` is a new strict minimum."""
    h, w, nc = pred.shape
    for y in numba.prange(h):
        for x in range(w):
            err = 0.0
            for c in range(nc):
                d = pred[y, x, c] - target[y, x, c]
                err += d * d
            if err < best_err[y, x]:
                best_err[y, x] = err
                best_val[y, x] = value
