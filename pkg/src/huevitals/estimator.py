"""Streaming HR/RR estimator and the offline frame-to-estimate driver."""
from __future__ import annotations

import json
import math
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from itertools import islice
from typing import Iterable, Mapping, Optional

import numpy as np
from sklearn.base import BaseEstimator

from . import signal as sig
from ._validation import (
    check_band,
    check_channel,
    check_mask,
    check_positive,
    check_series_list,
)
from .exceptions import (
    BandResolutionError,
    ConfigError,
    GeometryError,
    InsufficientDataError,
    OrderingError,
)
from .ingest import Frame, simulate_drops
from .roi import ForeheadRect, HueMask, RoiSample, forehead_from_landmarks, reduce_frame

WARMING_UP = "warming-up"
FLAT_SIGNAL = "flat-signal"
NO_FACE = "no-face"
NO_PIXELS = "no-usable-pixels"
BAND_RESOLUTION = "insufficient-band-resolution"
INSUFFICIENT_DATA = "insufficient-data"

FLAT_TOL = 1e-12


@dataclass(frozen=True)
class EstimatorConfig:
    channel: str = "hue"
    window_s: float = 11.0
    hr_band: sig.Band = sig.HR_BAND
    rr_band: sig.Band = sig.RR_BAND
    hr_warmup_s: float = 2.0
    rr_warmup_s: float = 6.0
    smooth_n: int = 10
    resample_hz: float = sig.DEFAULT_RESAMPLE_HZ
    zero_pad_factor: int = sig.DEFAULT_ZERO_PAD
    max_gap_s: float = sig.DEFAULT_MAX_GAP_S
    hue_mask: HueMask = field(default_factory=HueMask)

    def __post_init__(self):
        try:
            check_channel(self.channel)
            check_positive("window_s", self.window_s)
            check_positive("smooth_n", self.smooth_n, integer=True)
            check_positive("zero_pad_factor", self.zero_pad_factor, integer=True)
            check_positive("max_gap_s", self.max_gap_s)
            object.__setattr__(self, "hr_band", check_band("hr_band", self.hr_band))
            object.__setattr__(self, "rr_band", check_band("rr_band", self.rr_band))
            object.__setattr__(self, "hue_mask", check_mask(self.hue_mask))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if not 0 <= self.hr_warmup_s <= self.rr_warmup_s <= self.window_s:
            raise ConfigError("need 0 <= hr_warmup_s <= rr_warmup_s <= window_s")
        if not self.resample_hz > 2 * self.hr_band.hi_hz:
            raise ConfigError(
                f"resample_hz {self.resample_hz} must exceed twice the HR band top"
            )


@dataclass(frozen=True)
class VitalsEstimate:
    t_s: int
    hr_bpm: Optional[float]
    rr_bpm: Optional[float]
    hr_raw: Optional[float]
    rr_raw: Optional[float]
    window_used_s: float
    sample_count: int
    channel: str
    reason: Optional[str] = None

    def to_record(self) -> dict:
        return {
            "t": self.t_s,
            "hr": self.hr_bpm,
            "rr": self.rr_bpm,
            "hr_raw": self.hr_raw,
            "rr_raw": self.rr_raw,
            "reason": self.reason,
            "channel": self.channel,
            "samples": self.sample_count,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_record())


class StreamingEstimator:
    """Sliding-window HR/RR estimator fed one ROI sample at a time.

    A new estimate is emitted by the first sample that falls in a new whole
    second. HR needs ``t >= hr_warmup_s`` and RR ``t >= rr_warmup_s``; until
    the window fills, whatever history exists is analyzed. Reported rates are
    the mean of the last ``smooth_n`` raw rates.
    """

    def __init__(self, config: Optional[EstimatorConfig] = None):
        self.config = config or EstimatorConfig()
        self.reset()

    def reset(self) -> None:
        cfg = self.config
        self._times: deque[float] = deque()
        self._values: deque[float] = deque()
        self.hr_raws: deque[float] = deque(maxlen=cfg.smooth_n)
        self.rr_raws: deque[float] = deque(maxlen=cfg.smooth_n)
        self._last_ts: Optional[float] = None
        self._second: Optional[int] = None
        self._last_missing: Optional[str] = None
        self._last_valid_ts: Optional[float] = None

    @property
    def sample_count(self) -> int:
        return len(self._times)

    def push_sample(self, s: RoiSample, missing_reason: str = NO_PIXELS) -> Optional[VitalsEstimate]:
        """Feed one sample. Invalid samples (no pixels, no face) advance the clock only."""
        ts = float(s.timestamp_s)
        if self._last_ts is not None and ts <= self._last_ts:
            raise OrderingError(f"timestamp {ts} does not follow {self._last_ts}")
        self._last_ts = ts
        if s.valid:
            self._times.append(ts)
            self._values.append(float(s.value))
            self._last_valid_ts = ts
        else:
            self._last_missing = missing_reason
        cutoff = ts - self.config.window_s
        while self._times and self._times[0] < cutoff:
            self._times.popleft()
            self._values.popleft()

        sec = math.floor(ts)
        if self._second is not None and sec <= self._second:
            return None
        self._second = sec
        return self._emit(sec, ts)

    def push_missing(self, timestamp_s: float, reason: str = NO_FACE) -> Optional[VitalsEstimate]:
        channel = self.config.channel
        return self.push_sample(RoiSample(timestamp_s, None, 0, channel), missing_reason=reason)

    def _rate(self, series: sig.IppgSeries, band: sig.Band):
        cfg = self.config
        try:
            peak = sig.estimate_rate(series, band, cfg.resample_hz, cfg.zero_pad_factor,
                                     cfg.max_gap_s)
        except BandResolutionError:
            return None, BAND_RESOLUTION
        except InsufficientDataError:
            return None, INSUFFICIENT_DATA
        return peak.rate_per_min, None

    def _emit(self, sec: int, now: float) -> VitalsEstimate:
        cfg = self.config
        n = len(self._times)
        window_used = self._times[-1] - self._times[0] if n else 0.0
        hr_raw = rr_raw = None

        if sec < cfg.hr_warmup_s:
            hr_reason = rr_reason = WARMING_UP
        elif self._last_valid_ts is None or now - self._last_valid_ts > 1.0:
            hr_reason = rr_reason = self._last_missing or INSUFFICIENT_DATA
        elif n < 2:
            hr_reason = rr_reason = INSUFFICIENT_DATA
        else:
            values = np.fromiter(self._values, dtype=np.float64, count=n)
            if np.ptp(values) <= FLAT_TOL * max(1.0, abs(values.mean())):
                hr_reason = rr_reason = FLAT_SIGNAL
            else:
                series = sig.IppgSeries(np.fromiter(self._times, np.float64, n), values,
                                        cfg.channel)
                hr_raw, hr_reason = self._rate(series, cfg.hr_band)
                if sec >= cfg.rr_warmup_s:
                    rr_raw, rr_reason = self._rate(series, cfg.rr_band)
                else:
                    rr_reason = WARMING_UP

        if hr_raw is not None:
            self.hr_raws.append(hr_raw)
        if rr_raw is not None:
            self.rr_raws.append(rr_raw)
        hr = sum(self.hr_raws) / len(self.hr_raws) if hr_raw is not None else None
        rr = sum(self.rr_raws) / len(self.rr_raws) if rr_raw is not None else None
        return VitalsEstimate(sec, hr, rr, hr_raw, rr_raw, window_used, n, cfg.channel,
                              hr_reason or rr_reason)

    def run(self, samples: Iterable[RoiSample]) -> list[VitalsEstimate]:
        out = []
        for s in samples:
            est = self.push_sample(s)
            if est is not None:
                out.append(est)
        return out


# --------------------------------------------------------------------------- #
# offline driver

def _frame_sample(frame: Frame, lm, fixed_rect, cfg: EstimatorConfig):
    """Reduce one frame; returns ``(sample, missing_reason)``."""
    if lm is None and fixed_rect is None:
        return None, NO_FACE
    try:
        if lm is not None:
            rect = forehead_from_landmarks(lm, frame.width, frame.height)
        else:
            rect = fixed_rect.clamp(frame.width, frame.height)
    except GeometryError:
        return None, NO_FACE
    s = reduce_frame(frame, rect, cfg.channel, cfg.hue_mask)
    return (s, None) if s.valid else (None, NO_PIXELS)


def _batched(it, size):
    it = iter(it)
    while True:
        chunk = list(islice(it, size))
        if not chunk:
            return
        yield chunk


def iter_samples(frames: Iterable[Frame], landmarks: Optional[Mapping] = None,
                 cfg: Optional[EstimatorConfig] = None, roi: Optional[ForeheadRect] = None,
                 n_jobs: int = 1, batch: int = 64):
    """Yield ``(frame, sample, missing_reason)`` in frame order.

    With ``n_jobs > 1`` frames are reduced on a thread pool; ``Executor.map``
    keeps results in submission order so output is identical to ``n_jobs=1``.
    """
    cfg = cfg or EstimatorConfig()
    lookup = landmarks.get if landmarks is not None else (lambda _i: None)

    def work(frame):
        return (frame,) + _frame_sample(frame, lookup(frame.index), roi, cfg)

    if n_jobs <= 1:
        for frame in frames:
            yield work(frame)
        return
    with ThreadPoolExecutor(max_workers=n_jobs) as pool:
        for chunk in _batched(frames, batch):
            yield from pool.map(work, chunk)


def run_offline(stream, landmarks: Optional[Mapping] = None,
                cfg: Optional[EstimatorConfig] = None, roi: Optional[ForeheadRect] = None,
                keep_rate: Optional[float] = None, drop_seed=None,
                n_jobs: int = 1) -> list[VitalsEstimate]:
    """Frames -> forehead samples -> per-second estimates.

    ``stream`` is either the ``(StreamMeta, frames)`` pair from ``open_stream``
    or any iterable of frames. ``landmarks`` maps frame index to
    ``LandmarkSet``; ``roi`` is the fixed-rectangle fallback used when no
    landmarks are given.
    """
    cfg = cfg or EstimatorConfig()
    if landmarks is None and roi is None:
        raise ConfigError("either landmarks or a fixed roi is required")
    frames = stream[1] if isinstance(stream, tuple) else stream
    if keep_rate is not None and keep_rate < 1.0:
        frames = simulate_drops(frames, keep_rate, drop_seed)

    est = StreamingEstimator(cfg)
    out: list[VitalsEstimate] = []
    seen = 0
    for frame, sample, missing in iter_samples(frames, landmarks, cfg, roi, n_jobs):
        seen += 1
        try:
            if sample is not None:
                e = est.push_sample(sample)
            else:
                e = est.push_missing(frame.timestamp_s, missing)
        except OrderingError as exc:
            raise OrderingError(f"frame {frame.index}: {exc}") from None
        if e is not None:
            out.append(e)
    if seen == 0:
        raise InsufficientDataError("stream contains no frames")
    return out


def write_estimates(estimates: Iterable[VitalsEstimate], fh, fmt: str = "jsonl") -> None:
    if fmt == "jsonl":
        for e in estimates:
            fh.write(e.to_json() + "\n")
    elif fmt == "csv":
        cols = ["t", "hr", "rr", "hr_raw", "rr_raw", "reason", "channel", "samples"]
        fh.write(",".join(cols) + "\n")
        for e in estimates:
            rec = e.to_record()
            fh.write(",".join("" if rec[c] is None else str(rec[c]) for c in cols) + "\n")
    else:
        raise ValueError(f"unknown format {fmt!r}")


def final_rates(estimates: Iterable[VitalsEstimate]) -> tuple[Optional[float], Optional[float]]:
    """Last reported (smoothed) HR and RR in a run."""
    hr = rr = None
    for e in estimates:
        if e.hr_bpm is not None:
            hr = e.hr_bpm
        if e.rr_bpm is not None:
            rr = e.rr_bpm
    return hr, rr


# --------------------------------------------------------------------------- #
# scikit-learn facade

class VitalsEstimator(BaseEstimator):
    """Estimator-API wrapper over :class:`StreamingEstimator`.

    ``X`` is one series as an ``(n_samples, 2)`` array of ``(time_s, value)``
    rows, an ``IppgSeries``, or a list of either. ``predict`` returns an
    ``(n_series, 2)`` array with the final smoothed HR and RR per series
    (NaN where no estimate was reached).

    Parameters
    ----------
    channel : {'hue', 'green'}
        Label attached to the output; the arithmetic is channel-agnostic.
    window_s : float
        Seconds of history per spectral estimate.
    hr_band, rr_band : (float, float)
        Search bands in Hz.
    hr_warmup_s, rr_warmup_s : float
        Seconds before the first HR / RR is reported.
    smooth_n : int
        Number of trailing raw rates averaged.
    resample_hz, zero_pad_factor, max_gap_s
        Passed to the spectral stage.
    """

    def __init__(self, channel="hue", window_s=11.0, hr_band=(0.8, 2.2),
                 rr_band=(0.18, 0.5), hr_warmup_s=2.0, rr_warmup_s=6.0, smooth_n=10,
                 resample_hz=9.0, zero_pad_factor=4, max_gap_s=0.5, hue_mask=(0.0, 0.1)):
        self.channel = channel
        self.window_s = window_s
        self.hr_band = hr_band
        self.rr_band = rr_band
        self.hr_warmup_s = hr_warmup_s
        self.rr_warmup_s = rr_warmup_s
        self.smooth_n = smooth_n
        self.resample_hz = resample_hz
        self.zero_pad_factor = zero_pad_factor
        self.max_gap_s = max_gap_s
        self.hue_mask = hue_mask

    def _make_config(self) -> EstimatorConfig:
        return EstimatorConfig(**self.get_params())

    def fit(self, X=None, y=None):
        """Validate hyperparameters. There is nothing to learn."""
        self.config_ = self._make_config()
        return self

    def _check_fitted(self):
        if not hasattr(self, "config_"):
            self.fit()
        return self.config_

    def stream(self, X) -> list[list[VitalsEstimate]]:
        cfg = self._check_fitted()
        out = []
        for series in check_series_list(X, cfg.channel):
            est = StreamingEstimator(cfg)
            out.append(est.run(RoiSample(t, v, 1, cfg.channel)
                               for t, v in zip(series.times, series.values)))
        return out

    def predict(self, X) -> np.ndarray:
        rows = []
        for estimates in self.stream(X):
            hr, rr = final_rates(estimates)
            rows.append([np.nan if hr is None else hr, np.nan if rr is None else rr])
        return np.asarray(rows, dtype=np.float64).reshape(-1, 2)

    def transform(self, X) -> list[np.ndarray]:
        """Per-second ``[t, hr, rr]`` arrays (NaN for absent values), one per series."""
        result = []
        for estimates in self.stream(X):
            result.append(np.array(
                [[e.t_s, np.nan if e.hr_bpm is None else e.hr_bpm,
                  np.nan if e.rr_bpm is None else e.rr_bpm] for e in estimates],
                dtype=np.float64).reshape(-1, 3))
        return result


def config_to_dict(cfg: EstimatorConfig) -> dict:
    d = asdict(cfg)
    d["hr_band"] = [cfg.hr_band.lo_hz, cfg.hr_band.hi_hz]
    d["rr_band"] = [cfg.rr_band.lo_hz, cfg.rr_band.hi_hz]
    d["hue_mask"] = [cfg.hue_mask.lo, cfg.hue_mask.hi]
    return d
