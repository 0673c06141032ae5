"""Input validation helpers shared by the estimator classes and the CLI."""
from __future__ import annotations

import numbers

import numpy as np

from .roi import CHANNELS, HueMask
from .signal import Band, IppgSeries


def check_channel(channel) -> str:
    if channel not in CHANNELS:
        raise ValueError(f"channel must be one of {CHANNELS}, got {channel!r}")
    return channel


def check_positive(name: str, value, integer: bool = False):
    kind = numbers.Integral if integer else numbers.Real
    if isinstance(value, bool) or not isinstance(value, kind) or not value > 0:
        what = "positive integer" if integer else "positive number"
        raise ValueError(f"{name} must be a {what}, got {value!r}")
    return value


def check_band(name: str, band) -> Band:
    if isinstance(band, Band):
        return band
    try:
        lo, hi = band
        return Band(float(lo), float(hi))
    except (TypeError, ValueError) as exc:
        raise ValueError(f"{name} must be a (lo, hi) pair with 0 < lo < hi, got {band!r}") from exc


def check_mask(mask) -> HueMask:
    if isinstance(mask, HueMask):
        return mask
    try:
        lo, hi = mask
        lo, hi = float(lo), float(hi)
        return HueMask(lo, hi, wrap=lo > hi)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"hue_mask must be a (lo, hi) pair, got {mask!r}") from exc


def check_series(X, channel: str = "hue") -> IppgSeries:
    """Coerce an ``IppgSeries`` or an ``(n, 2)`` array of (time, value) rows."""
    if isinstance(X, IppgSeries):
        return X
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError(f"expected an (n_samples, 2) array of (time, value), got shape {arr.shape}")
    return IppgSeries(arr[:, 0], arr[:, 1], channel)


def check_series_list(X, channel: str = "hue") -> list[IppgSeries]:
    """A single series or a list of them."""
    if isinstance(X, IppgSeries):
        return [X]
    if isinstance(X, np.ndarray) and X.ndim == 2:
        return [check_series(X, channel)]
    return [check_series(x, channel) for x in X]
