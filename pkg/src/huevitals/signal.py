"""Spectral estimation of heart and respiration rate from an iPPG series."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .exceptions import BandResolutionError, InsufficientDataError

DEFAULT_RESAMPLE_HZ = 9.0
DEFAULT_ZERO_PAD = 4
DEFAULT_MAX_GAP_S = 0.5
MIN_SPECTRUM_LEN = 8


@dataclass(frozen=True)
class Band:
    lo_hz: float
    hi_hz: float

    def __post_init__(self):
        if not 0 < self.lo_hz < self.hi_hz:
            raise ValueError(f"band needs 0 < lo < hi, got ({self.lo_hz}, {self.hi_hz})")

    @property
    def bpm_bounds(self) -> tuple[float, float]:
        return 60.0 * self.lo_hz, 60.0 * self.hi_hz

    @classmethod
    def parse(cls, text: str) -> "Band":
        lo, hi = (float(p) for p in text.split(","))
        return cls(lo, hi)


HR_BAND = Band(0.8, 2.2)
RR_BAND = Band(0.18, 0.5)


@dataclass(frozen=True)
class IppgSeries:
    times: np.ndarray
    values: np.ndarray
    channel: str = "hue"

    def __post_init__(self):
        t = np.asarray(self.times, dtype=np.float64).ravel()
        v = np.asarray(self.values, dtype=np.float64).ravel()
        if t.shape != v.shape:
            raise ValueError("times and values must have equal length")
        if t.size > 1 and not np.all(np.diff(t) > 0):
            raise ValueError("timestamps must be strictly increasing")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(v))):
            raise ValueError("series contains non-finite entries")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_samples(cls, samples: Sequence, channel: str = "hue") -> "IppgSeries":
        """Build from ``(timestamp, value)`` pairs or objects with those attributes."""
        ts, vs = [], []
        for s in samples:
            if hasattr(s, "timestamp_s"):
                ts.append(s.timestamp_s)
                vs.append(s.value)
            else:
                ts.append(s[0])
                vs.append(s[1])
        return cls(np.array(ts, dtype=float), np.array(vs, dtype=float), channel)

    def __len__(self) -> int:
        return self.times.size


@dataclass(frozen=True)
class UniformSeries:
    start_s: float
    rate_hz: float
    values: np.ndarray
    gap_flags: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        if not self.rate_hz > 0:
            raise ValueError("rate_hz must be positive")
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.float64))
        if self.gap_flags is None:
            object.__setattr__(self, "gap_flags", np.zeros(self.values.size, dtype=bool))

    @property
    def times(self) -> np.ndarray:
        return self.start_s + np.arange(self.values.size) / self.rate_hz

    @property
    def duration_s(self) -> float:
        return (self.values.size - 1) / self.rate_hz if self.values.size else 0.0

    def __len__(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class Spectrum:
    freqs_hz: np.ndarray
    mags: np.ndarray
    window_len_s: float

    def band_indices(self, band: Band) -> np.ndarray:
        return np.flatnonzero((self.freqs_hz >= band.lo_hz) & (self.freqs_hz <= band.hi_hz))


@dataclass(frozen=True)
class BandPeak:
    freq_hz: float
    mag: float

    @property
    def rate_per_min(self) -> float:
        return 60.0 * self.freq_hz


def resample_uniform(s: IppgSeries, rate_hz: float = DEFAULT_RESAMPLE_HZ,
                     max_gap_s: float = DEFAULT_MAX_GAP_S) -> UniformSeries:
    """Linearly interpolate an irregular series onto a uniform grid.

    The grid starts at the first timestamp. Grid points farther than
    ``max_gap_s`` from every real sample take the value of the nearest real
    sample and are flagged in ``gap_flags``.
    """
    if len(s) < 2:
        raise InsufficientDataError(f"need at least 2 samples to resample, got {len(s)}")
    if rate_hz <= 2 * HR_BAND.hi_hz:
        raise ValueError(f"rate_hz {rate_hz} must exceed {2 * HR_BAND.hi_hz} Hz")
    t, v = s.times, s.values
    span = t[-1] - t[0]
    n = int(math.floor(span * rate_hz + 1e-9)) + 1
    grid = t[0] + np.arange(n) / rate_hz
    out = np.interp(grid, t, v)

    right = np.clip(np.searchsorted(t, grid), 1, t.size - 1)
    left = right - 1
    d_left = grid - t[left]
    d_right = t[right] - grid
    nearest = np.where(d_left <= d_right, left, right)
    dist = np.minimum(np.abs(d_left), np.abs(d_right))
    gaps = dist > max_gap_s
    out[gaps] = v[nearest[gaps]]
    return UniformSeries(float(t[0]), float(rate_hz), out, gaps)


def next_pow2(n: int) -> int:
    return 1 << max(0, int(n - 1).bit_length())


def hann(n: int) -> np.ndarray:
    """Periodic Hann window (DFT-even)."""
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def prepare(values: np.ndarray) -> np.ndarray:
    """Mean removal followed by the Hann taper."""
    x = np.asarray(values, dtype=np.float64)
    return (x - x.mean()) * hann(x.size)


def spectrum(u: UniformSeries, zero_pad_factor: int = DEFAULT_ZERO_PAD) -> Spectrum:
    """One-sided magnitude spectrum of the detrended, Hann-tapered series.

    Magnitudes are the unnormalized ``|X[k]|`` of a DFT of length
    ``next_pow2(len * zero_pad_factor)``.
    """
    n = len(u)
    if n < MIN_SPECTRUM_LEN:
        raise InsufficientDataError(f"spectrum needs >= {MIN_SPECTRUM_LEN} samples, got {n}")
    if zero_pad_factor < 1:
        raise ValueError("zero_pad_factor must be >= 1")
    nfft = next_pow2(n * int(zero_pad_factor))
    mags = np.abs(np.fft.rfft(prepare(u.values), nfft))
    freqs = np.arange(mags.size) * (u.rate_hz / nfft)
    return Spectrum(freqs, mags, n / u.rate_hz)


def band_peak(sp: Spectrum, band: Band) -> BandPeak:
    """Strongest in-band bin, refined by a parabola through it and its neighbors.

    ``np.argmax`` returns the first maximum, so ties resolve to the lower
    frequency. The refined frequency is clamped to the band.
    """
    idx = sp.band_indices(band)
    if idx.size == 0:
        raise BandResolutionError(
            f"no spectrum bin inside ({band.lo_hz}, {band.hi_hz}) Hz"
        )
    k = int(idx[np.argmax(sp.mags[idx])])
    mags = sp.mags
    offset = 0.0
    if 0 < k < mags.size - 1:
        a, b, c = mags[k - 1], mags[k], mags[k + 1]
        denom = a - 2.0 * b + c
        if denom < 0:
            offset = 0.5 * (a - c) / denom
            offset = min(max(offset, -0.5), 0.5)
    step = sp.freqs_hz[1] - sp.freqs_hz[0] if sp.freqs_hz.size > 1 else 0.0
    freq = sp.freqs_hz[k] + offset * step
    freq = min(max(freq, band.lo_hz), band.hi_hz)
    return BandPeak(float(freq), float(mags[k]))


def band_filter(u: UniformSeries, band: Band) -> UniformSeries:
    """Zero-phase band isolation by masking the DFT outside ``band``."""
    n = len(u)
    if n < MIN_SPECTRUM_LEN:
        raise InsufficientDataError(f"band_filter needs >= {MIN_SPECTRUM_LEN} samples, got {n}")
    X = np.fft.rfft(u.values)
    f = np.fft.rfftfreq(n, d=1.0 / u.rate_hz)
    X[(f < band.lo_hz) | (f > band.hi_hz)] = 0.0
    return UniformSeries(u.start_s, u.rate_hz, np.fft.irfft(X, n), u.gap_flags)


def estimate_rate(series: IppgSeries, band: Band, rate_hz: float = DEFAULT_RESAMPLE_HZ,
                  zero_pad_factor: int = DEFAULT_ZERO_PAD,
                  max_gap_s: float = DEFAULT_MAX_GAP_S) -> BandPeak:
    """resample -> spectrum -> band peak in one call."""
    u = resample_uniform(series, rate_hz, max_gap_s)
    return band_peak(spectrum(u, zero_pad_factor), band)
