"""Readers and writers for PNG images, PFM depth maps and Middlebury .flo flow."""

import struct
from pathlib import Path

import numpy as np
from PIL import Image

from .exceptions import FileFormatError

FLO_MAGIC = 202021.25


def read_png(path, mode=None):
    """Load an 8-bit image as float64 in [0, 1].

    ``mode`` is ``"RGB"`` or ``"L"``; by default RGB(A) files load as RGB
    and grayscale files as a 2-D array.
    """
    try:
        with Image.open(path) as im:
            if mode is None:
                mode = "L" if im.mode in ("L", "LA", "I", "I;16", "1") else "RGB"
            arr = np.asarray(im.convert(mode))
    except OSError as exc:
        raise FileFormatError(f"{path}: cannot read image ({exc})") from exc
    return arr.astype(np.float64) / 255.0


def to_uint8(img):
    return np.round(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)


def write_png(path, img):
    """Save a float image, clamped to [0, 1] and rounded to 8 bits."""
    arr = to_uint8(np.asarray(img, dtype=np.float64))
    if arr.ndim == 3 and arr.shape[2] == 1:
        arr = arr[..., 0]
    try:
        Image.fromarray(arr).save(path, format="PNG")
    except OSError as exc:
        raise FileFormatError(f"{path}: cannot write image ({exc})") from exc


def read_pfm(path):
    """Read a PFM file; rows are stored bottom-up."""
    path = Path(path)
    try:
        with open(path, "rb") as f:
            header = f.readline().strip()
            if header == b"Pf":
                channels = 1
            elif header == b"PF":
                channels = 3
            else:
                raise FileFormatError(f"{path}: not a PFM file (header {header!r})")
            dims = f.readline().split()
            width, height = int(dims[0]), int(dims[1])
            scale = float(f.readline().strip())
            endian = "<" if scale < 0 else ">"
            data = np.frombuffer(f.read(), dtype=endian + "f4")
    except (OSError, ValueError, IndexError) as exc:
        if isinstance(exc, FileFormatError):
            raise
        raise FileFormatError(f"{path}: malformed PFM ({exc})") from exc
    expected = width * height * channels
    if data.size != expected:
        raise FileFormatError(f"{path}: expected {expected} samples, found {data.size}")
    shape = (height, width) if channels == 1 else (height, width, 3)
    return np.flipud(data.reshape(shape)).astype(np.float64)


def write_pfm(path, img):
    """Write a little-endian PFM ("Pf" for 2-D input, "PF" for RGB)."""
    img = np.asarray(img, dtype="<f4")
    if img.ndim == 2:
        header = b"Pf"
    elif img.ndim == 3 and img.shape[2] == 3:
        header = b"PF"
    else:
        raise FileFormatError(f"cannot store array of shape {img.shape} as PFM")
    height, width = img.shape[:2]
    try:
        with open(path, "wb") as f:
            f.write(header + b"\n")
            f.write(f"{width} {height}\n".encode("ascii"))
            f.write(b"-1.0\n")
            f.write(np.ascontiguousarray(np.flipud(img)).tobytes())
    except OSError as exc:
        raise FileFormatError(f"{path}: cannot write PFM ({exc})") from exc


def read_flo(path):
    """Read a Middlebury .flo file into an ``(H, W, 2)`` array of (u, v)."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise FileFormatError(f"{path}: cannot read flow ({exc})") from exc
    if len(raw) < 12:
        raise FileFormatError(f"{path}: truncated .flo header")
    magic, width, height = struct.unpack("<fii", raw[:12])
    if magic != FLO_MAGIC:
        raise FileFormatError(f"{path}: bad .flo magic {magic}")
    if width < 1 or height < 1:
        raise FileFormatError(f"{path}: bad .flo size {width}x{height}")
    data = np.frombuffer(raw, dtype="<f4", offset=12)
    if data.size != 2 * width * height:
        raise FileFormatError(
            f"{path}: expected {2 * width * height} flow samples, found {data.size}"
        )
    return data.reshape(height, width, 2).astype(np.float64)


def write_flo(path, flow):
    flow = np.asarray(flow, dtype="<f4")
    if flow.ndim != 3 or flow.shape[2] != 2:
        raise FileFormatError(f"flow must have shape (H, W, 2), got {flow.shape}")
    height, width = flow.shape[:2]
    try:
        with open(path, "wb") as f:
            f.write(struct.pack("<fii", FLO_MAGIC, width, height))
            f.write(np.ascontiguousarray(flow).tobytes())
    except OSError as exc:
        raise FileFormatError(f"{path}: cannot write flow ({exc})") from exc
