#!/usr/bin/env python3
"""
Raster Operations Module

Resampling primitives shared by the renderer and the line extractor:
bilinear sampling at arbitrary points, separable Catmull-Rom bicubic
resizing and portable 8-bit rounding.

Sample positions are given in pixel-index space (pixel i has its center at
index i); callers convert from continuous image coordinates by subtracting 0.5.
"""

from typing import Tuple

import numpy as np

# Catmull-Rom
BICUBIC_A = -0.5


def round_to_u8(values: np.ndarray) -> np.ndarray:
    """Round half away from zero and clip into [0, 255]."""
    values = np.asarray(values, dtype=np.float64)
    rounded = np.sign(values) * np.floor(np.abs(values) + 0.5)
    return np.clip(rounded, 0, 255).astype(np.uint8)


def as_float_channels(image: np.ndarray) -> np.ndarray:
    """View an HxW or HxWxC raster as float64 HxWxC."""
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    return arr


def restore_shape(values: np.ndarray, like: np.ndarray) -> np.ndarray:
    return values[..., 0] if np.asarray(like).ndim == 2 else values


def bilinear_sample(image: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Bilinear interpolation with clamped edges.

    Args:
        image: HxW or HxWxC raster
        xs: Column positions (index space), any shape
        ys: Row positions (index space), same shape as xs

    Returns:
        float64 array of shape xs.shape + (C,)
    """
    src = as_float_channels(image)
    height, width = src.shape[:2]
    xs = np.clip(np.asarray(xs, dtype=np.float64), 0, width - 1)
    ys = np.clip(np.asarray(ys, dtype=np.float64), 0, height - 1)

    x0 = np.floor(xs).astype(np.intp)
    y0 = np.floor(ys).astype(np.intp)
    x1 = np.minimum(x0 + 1, width - 1)
    y1 = np.minimum(y0 + 1, height - 1)
    fx = (xs - x0)[..., None]
    fy = (ys - y0)[..., None]

    top = src[y0, x0] * (1 - fx) + src[y0, x1] * fx
    bottom = src[y1, x0] * (1 - fx) + src[y1, x1] * fx
    return top * (1 - fy) + bottom * fy


def cubic_weights(t: np.ndarray, a: float = BICUBIC_A) -> np.ndarray:
    """Keys cubic convolution weights for the 4 taps at offsets -1, 0, 1, 2.

    Args:
        t: Fractional positions in [0, 1)

    Returns:
        Array of shape t.shape + (4,)
    """
    t = np.asarray(t, dtype=np.float64)[..., None]
    d = np.abs(np.array([-1.0, 0.0, 1.0, 2.0]) - t)
    near = ((a + 2) * d - (a + 3)) * d * d + 1
    far = ((a * d - 5 * a) * d + 8 * a) * d - 4 * a
    return np.where(d <= 1, near, np.where(d < 2, far, 0.0))


def _resample_axis(data: np.ndarray, out_len: int, axis: int) -> np.ndarray:
    in_len = data.shape[axis]
    if out_len == in_len:
        return data
    pos = (np.arange(out_len) + 0.5) * (in_len / out_len) - 0.5
    base = np.floor(pos).astype(np.intp)
    weights = cubic_weights(pos - base)
    result = None
    for tap in range(4):
        idx = np.clip(base + tap - 1, 0, in_len - 1)
        taken = np.take(data, idx, axis=axis)
        shape = [1] * data.ndim
        shape[axis] = out_len
        term = taken * weights[:, tap].reshape(shape)
        result = term if result is None else result + term
    return result


def resize_bicubic(image: np.ndarray, out_width: int, out_height: int) -> np.ndarray:
    """Separable Catmull-Rom resize to (out_width, out_height), uint8 output."""
    if out_width < 1 or out_height < 1:
        raise ValueError(f"output size must be positive, got {out_width}x{out_height}")
    src = as_float_channels(image)
    rows = _resample_axis(src, out_height, axis=0)
    both = _resample_axis(rows, out_width, axis=1)
    return restore_shape(round_to_u8(both), image)


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    """Peak signal-to-noise ratio in dB for 8-bit rasters (inf when equal)."""
    diff = np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)
    mse = float(np.mean(diff * diff))
    if mse == 0:
        return float('inf')
    return 10.0 * np.log10(255.0 ** 2 / mse)


def raster_size(image: np.ndarray) -> Tuple[int, int]:
    """(width, height) of a raster."""
    return int(image.shape[1]), int(image.shape[0])
