"""Pixel-level color conversions.

Hue is normalized to the unit interval ``[0, 1)`` rather than degrees, so the
skin-tone mask ``(0, 0.1)`` corresponds to 0-36 degrees.
"""
from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .exceptions import FormatError

# BT.601 luma weights
KR = 0.299
KB = 0.114
KG = 1.0 - KR - KB

RANGE_MODES = ("limited", "full")


class RgbPixel(NamedTuple):
    r: int
    g: int
    b: int


class HsvPixel(NamedTuple):
    h: float
    s: float
    v: float


def rgb_to_hsv(p) -> HsvPixel:
    """Convert one 8-bit RGB triple to hexcone HSV on the unit interval."""
    r, g, b = (int(c) for c in p)
    for c in (r, g, b):
        if not 0 <= c <= 255:
            raise ValueError(f"channel value {c} outside [0, 255]")
    mx = max(r, g, b)
    mn = min(r, g, b)
    v = mx / 255.0
    if mx == 0:
        return HsvPixel(0.0, 0.0, v)
    delta = mx - mn
    s = delta / mx
    if delta == 0:
        return HsvPixel(0.0, s, v)
    if mx == r:
        h = ((g - b) / delta) % 6.0
    elif mx == g:
        h = (b - r) / delta + 2.0
    else:
        h = (r - g) / delta + 4.0
    h /= 6.0
    if h >= 1.0:
        h -= 1.0
    return HsvPixel(h, s, v)


def rgb_to_hsv_array(rgb: np.ndarray) -> np.ndarray:
    """Vectorized :func:`rgb_to_hsv` over an ``(..., 3)`` uint8 array.

    Returns a float64 array of the same leading shape with ``h, s, v`` in the
    last axis. Sector selection follows the scalar version exactly (red wins
    ties, then green), so both paths agree bit for bit.
    """
    rgb = np.asarray(rgb)
    if rgb.shape[-1] != 3:
        raise ValueError("last axis must hold 3 channels")
    c = rgb.astype(np.float64)
    r, g, b = c[..., 0], c[..., 1], c[..., 2]
    mx = c.max(axis=-1)
    mn = c.min(axis=-1)
    delta = mx - mn
    safe = np.where(delta == 0, 1.0, delta)

    h = np.where(
        mx == r,
        np.mod((g - b) / safe, 6.0),
        np.where(mx == g, (b - r) / safe + 2.0, (r - g) / safe + 4.0),
    )
    h = np.where(delta == 0, 0.0, h / 6.0)
    h = np.where(h >= 1.0, h - 1.0, h)
    s = np.where(mx == 0, 0.0, delta / np.where(mx == 0, 1.0, mx))
    v = mx / 255.0
    return np.stack([h, s, v], axis=-1)


def hue_array(rgb: np.ndarray) -> np.ndarray:
    """Hue channel only; cheaper than the full conversion for ROI reduction."""
    return rgb_to_hsv_array(rgb)[..., 0]


def hsv_to_rgb_float(h, s, v):
    """Inverse hexcone on floats in ``[0, 1]``; returns channels in ``[0, 1]``.

    Used by the synthetic renderer, which needs sub-quantization precision
    before rounding to 8 bits.
    """
    h = np.asarray(h, dtype=np.float64)
    s = np.asarray(s, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    h6 = np.mod(h, 1.0) * 6.0
    i = np.floor(h6).astype(int) % 6
    f = h6 - np.floor(h6)
    p = v * (1.0 - s)
    q = v * (1.0 - s * f)
    t = v * (1.0 - s * (1.0 - f))
    r = np.choose(i, [v, q, p, p, t, v])
    g = np.choose(i, [t, v, v, q, p, p])
    b = np.choose(i, [p, p, t, v, v, q])
    return np.stack(np.broadcast_arrays(r, g, b), axis=-1)


def _check_range(range_mode: str) -> None:
    if range_mode not in RANGE_MODES:
        raise ValueError(f"range_mode must be one of {RANGE_MODES}, got {range_mode!r}")


def yuv_to_rgb(y, u, v, range_mode: str = "limited") -> np.ndarray:
    """BT.601 YUV to 8-bit RGB for same-shaped planes (4:4:4)."""
    _check_range(range_mode)
    y = np.asarray(y, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64) - 128.0
    v = np.asarray(v, dtype=np.float64) - 128.0
    if range_mode == "limited":
        y = (y - 16.0) * (255.0 / 219.0)
        u = u * (255.0 / 224.0)
        v = v * (255.0 / 224.0)
    r = y + 2.0 * (1.0 - KR) * v
    b = y + 2.0 * (1.0 - KB) * u
    g = (y - KR * r - KB * b) / KG
    out = np.stack([r, g, b], axis=-1)
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def rgb_to_yuv(rgb: np.ndarray, range_mode: str = "limited"):
    """BT.601 8-bit RGB to full-resolution ``(y, u, v)`` float planes (unrounded)."""
    _check_range(range_mode)
    c = np.asarray(rgb, dtype=np.float64)
    r, g, b = c[..., 0], c[..., 1], c[..., 2]
    y = KR * r + KG * g + KB * b
    u = (b - y) / (2.0 * (1.0 - KB))
    v = (r - y) / (2.0 * (1.0 - KR))
    if range_mode == "limited":
        y = 16.0 + y * (219.0 / 255.0)
        u = u * (224.0 / 255.0)
        v = v * (224.0 / 255.0)
    return y, u + 128.0, v + 128.0


def _to_u8(plane) -> np.ndarray:
    return np.clip(np.rint(plane), 0, 255).astype(np.uint8)


def rgb_to_yuv444_planes(rgb: np.ndarray, range_mode: str = "limited"):
    y, u, v = rgb_to_yuv(rgb, range_mode)
    return _to_u8(y), _to_u8(u), _to_u8(v)


def rgb_to_yuv420_planes(rgb: np.ndarray, range_mode: str = "limited"):
    """Encode RGB to 4:2:0 planes; chroma is the mean of each 2x2 block."""
    rgb = np.asarray(rgb)
    height, width = rgb.shape[:2]
    y, u, v = rgb_to_yuv(rgb, range_mode)
    cw, ch = (width + 1) // 2, (height + 1) // 2

    def down(plane):
        padded = np.pad(plane, ((0, 2 * ch - height), (0, 2 * cw - width)), mode="edge")
        return padded.reshape(ch, 2, cw, 2).mean(axis=(1, 3))

    return _to_u8(y), _to_u8(down(u)), _to_u8(down(v))


def yuv420_to_rgb(y_plane, u_plane, v_plane, width: int, height: int,
                  range_mode: str = "limited") -> np.ndarray:
    """Decode planar 4:2:0 to an ``(height, width, 3)`` uint8 RGB image.

    Planes may be flat buffers or 2-D arrays. Chroma is upsampled by
    nearest neighbor.
    """
    _check_range(range_mode)
    cw, ch = (width + 1) // 2, (height + 1) // 2
    y = np.asarray(y_plane, dtype=np.uint8)
    u = np.asarray(u_plane, dtype=np.uint8)
    v = np.asarray(v_plane, dtype=np.uint8)
    if y.size != width * height:
        raise FormatError(f"luma plane has {y.size} samples, expected {width * height}")
    if u.size != cw * ch or v.size != cw * ch:
        raise FormatError(
            f"chroma planes have {u.size}/{v.size} samples, expected {cw * ch} for 4:2:0"
        )
    y = y.reshape(height, width)
    u = np.repeat(np.repeat(u.reshape(ch, cw), 2, axis=0), 2, axis=1)[:height, :width]
    v = np.repeat(np.repeat(v.reshape(ch, cw), 2, axis=0), 2, axis=1)[:height, :width]
    return yuv_to_rgb(y, u, v, range_mode)


def yuv444_to_rgb(y_plane, u_plane, v_plane, width: int, height: int,
                  range_mode: str = "limited") -> np.ndarray:
    n = width * height
    planes = [np.asarray(p, dtype=np.uint8) for p in (y_plane, u_plane, v_plane)]
    if any(p.size != n for p in planes):
        raise FormatError(f"4:4:4 planes must each hold {n} samples")
    y, u, v = (p.reshape(height, width) for p in planes)
    return yuv_to_rgb(y, u, v, range_mode)


def green_channel(rgb: np.ndarray) -> np.ndarray:
    return np.asarray(rgb)[..., 1]
