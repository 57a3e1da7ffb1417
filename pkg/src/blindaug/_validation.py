"""Input validation helpers, in the spirit of ``sklearn.utils.check_array``."""

import numpy as np

from .exceptions import InvalidInputError


def check_image(img, *, name="image", channels=None, copy=False):
    """Validate a raster and return it as a float64 array.

    Images are ``(H, W)`` for single-channel data or ``(H, W, C)`` otherwise.

    Parameters
    ----------
    img : array-like
        Raster to validate.
    name : str
        Used in error messages.
    channels : int or tuple of int, optional
        Accepted channel counts. ``(H, W)`` counts as one channel.
    copy : bool
        Force a copy even if ``img`` is already float64.
    """
    arr = np.asarray(img, dtype=np.float64)
    if copy:
        arr = arr.copy()
    if arr.ndim not in (2, 3):
        raise InvalidInputError(f"{name} must be 2-D or 3-D, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise InvalidInputError(f"{name} must be at least 1x1, got shape {arr.shape}")
    if channels is not None:
        allowed = (channels,) if np.isscalar(channels) else tuple(channels)
        if n_channels(arr) not in allowed:
            raise InvalidInputError(
                f"{name} must have {' or '.join(map(str, allowed))} channel(s), "
                f"got {n_channels(arr)}"
            )
    return arr


def n_channels(arr):
    return 1 if arr.ndim == 2 else arr.shape[2]


def check_same_size(ref, other, *, name="array"):
    if ref.shape[:2] != other.shape[:2]:
        raise InvalidInputError(
            f"{name} has size {other.shape[:2]}, expected {ref.shape[:2]}"
        )


def check_depth(depth, like=None):
    depth = np.asarray(depth, dtype=np.float64)
    if depth.ndim == 3 and depth.shape[2] == 1:
        depth = depth[..., 0]
    if depth.ndim != 2:
        raise InvalidInputError(f"depth must be 2-D, got shape {depth.shape}")
    if not np.all(np.isfinite(depth)) or np.any(depth <= 0):
        raise InvalidInputError("depth values must be positive and finite")
    if like is not None:
        check_same_size(like, depth, name="depth")
    return depth


def check_flow(flow, like=None):
    flow = np.asarray(flow, dtype=np.float64)
    if flow.ndim != 3 or flow.shape[2] != 2:
        raise InvalidInputError(f"flow must have shape (H, W, 2), got {flow.shape}")
    if not np.all(np.isfinite(flow)):
        raise InvalidInputError("flow values must be finite")
    if like is not None:
        check_same_size(like, flow, name="flow")
    return flow
