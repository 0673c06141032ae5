"""Synthetic face videos with planted heart and respiration rhythms.

The face is a flat skin-colored ellipse on a blue background. Forehead pixels
carry the planted hue trace exactly before an ordered-dither rounding to 8
bits and, through the value channel, a planted green trace. Brightness drift
multiplies the whole frame, which moves green but leaves hue untouched.
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass
from typing import Iterator, Optional

import numpy as np

from .color import hsv_to_rgb_float
from .ingest import Frame, write_image_sequence, write_y4m
from .roi import ForeheadRect, LandmarkSet, write_landmark_sidecar

BACKGROUND_RGB = (40, 70, 150)

# 4x4 Bayer thresholds in (0, 1). Ordered dithering makes the mean over any
# patch track the float color instead of one rounded value, so region means
# keep sub-level precision even without noise.
_BAYER4 = (np.array([[0, 8, 2, 10],
                     [12, 4, 14, 6],
                     [3, 11, 1, 9],
                     [15, 7, 13, 5]], dtype=np.float32) + 0.5) / 16.0


@dataclass(frozen=True)
class SynthSpec:
    hr_hz: float = 1.1
    rr_hz: float = 0.3
    hue_amp: float = 0.008
    green_amp: float = 2.0
    base_h: float = 0.05
    base_s: float = 0.35
    base_v: float = 0.8
    noise_sigma: float = 0.0
    brightness_drift: bool = False
    drift_hz: float = 0.05
    drift_min_gain: float = 0.7
    fps: float = 30.0
    duration_s: float = 20.0
    width: int = 160
    height: int = 120
    seed: int = 0
    chroma: str = "420"
    container: str = "y4m"

    def __post_init__(self):
        if not 0.8 < self.hr_hz < 2.2:
            raise ValueError(f"hr_hz {self.hr_hz} outside (0.8, 2.2)")
        if not 0.18 < self.rr_hz < 0.5:
            raise ValueError(f"rr_hz {self.rr_hz} outside (0.18, 0.5)")
        peak = self.hue_amp * 1.5
        if not (0 < self.base_h - peak and self.base_h + peak < 0.1):
            raise ValueError("hue modulation leaves the (0, 0.1) mask")
        if self.fps <= 0 or self.duration_s <= 0:
            raise ValueError("fps and duration_s must be positive")
        if self.width < 32 or self.height < 32:
            raise ValueError("frame must be at least 32x32")
        if self.chroma not in ("420", "444") or self.container not in ("y4m", "image_sequence"):
            raise ValueError("unsupported chroma or container")

    @property
    def n_frames(self) -> int:
        return int(round(self.fps * self.duration_s))

    @property
    def base_green(self) -> float:
        """Unmodulated 8-bit green level of the skin color."""
        return 255.0 * float(hsv_to_rgb_float(self.base_h, self.base_s, self.base_v)[1])


@dataclass
class GroundTruth:
    hr_bpm: float
    rr_bpm: float
    forehead_rect: tuple
    mean_hue_trace: list
    mean_green_trace: list
    timestamps: list

    def to_json(self) -> str:
        d = asdict(self)
        d["forehead_rect"] = list(self.forehead_rect)
        return json.dumps(d)


@dataclass(frozen=True)
class FaceGeometry:
    cx: float
    cy: float
    ax: float
    ay: float
    face_box: tuple
    points: tuple

    @property
    def forehead(self) -> ForeheadRect:
        x21, y21 = self.points[21]
        x24, y24 = self.points[24]
        return ForeheadRect(int(x21), int(self.face_box[1]), int(x24), int(min(y21, y24)))


def face_geometry(width: int, height: int) -> FaceGeometry:
    """Analytic 68-point layout on integer pixel coordinates.

    The skin ellipse extends above the face box so the whole forehead
    rectangle is skin.
    """
    cx, cy = width / 2.0, height * 0.55
    ax, ay = width * 0.30, height * 0.42
    box = (round(cx - ax * 0.9), round(cy - ay * 0.62), round(cx + ax * 0.9), round(cy + ay * 0.95))
    brow_y = round(cy - ay * 0.25)
    pts = []
    # jaw 0-16
    for i in range(17):
        a = math.pi * (1.0 - i / 16.0)
        pts.append((round(cx + ax * 0.85 * math.cos(a)), round(cy + ay * 0.1 + ay * 0.8 * math.sin(a))))
    # brows 17-21 (left) and 22-26 (right)
    for x in np.linspace(cx - ax * 0.7, cx - ax * 0.15, 5):
        pts.append((round(x), brow_y))
    for x in np.linspace(cx + ax * 0.15, cx + ax * 0.7, 5):
        pts.append((round(x), brow_y))
    # nose 27-35
    for i in range(4):
        pts.append((round(cx), round(brow_y + (i + 1) * ay * 0.1)))
    for i in range(5):
        pts.append((round(cx + (i - 2) * ax * 0.08), round(cy + ay * 0.22)))
    # eyes 36-47
    for ex in (cx - ax * 0.4, cx + ax * 0.4):
        for k in range(6):
            a = 2 * math.pi * k / 6
            pts.append((round(ex + ax * 0.15 * math.cos(a)), round(cy - ay * 0.1 + ay * 0.05 * math.sin(a))))
    # mouth 48-67
    for k in range(20):
        a = 2 * math.pi * k / 20
        pts.append((round(cx + ax * 0.35 * math.cos(a)), round(cy + ay * 0.5 + ay * 0.1 * math.sin(a))))
    pts = tuple((float(x), float(y)) for x, y in pts)
    return FaceGeometry(cx, cy, ax, ay, tuple(float(v) for v in box), pts)


def modulation(spec: SynthSpec, t) -> np.ndarray:
    """Unit-amplitude HR component plus half-amplitude RR component."""
    t = np.asarray(t, dtype=np.float64)
    return np.sin(2 * np.pi * spec.hr_hz * t) + 0.5 * np.sin(2 * np.pi * spec.rr_hz * t)


def brightness_gain(spec: SynthSpec, t) -> np.ndarray:
    t = np.asarray(t, dtype=np.float64)
    if not spec.brightness_drift:
        return np.ones_like(t)
    lo = spec.drift_min_gain
    return lo + (1.0 - lo) * 0.5 * (1.0 + np.cos(2 * np.pi * spec.drift_hz * t))


def planted_traces(spec: SynthSpec, t):
    m = modulation(spec, t)
    return spec.base_h + spec.hue_amp * m, spec.base_green + spec.green_amp * m


def _skin_color(spec: SynthSpec, hue: float, green: float) -> np.ndarray:
    """Float RGB (0-255) with exactly the requested hue and green level."""
    unit = hsv_to_rgb_float(hue, spec.base_s, 1.0)
    v = green / (255.0 * float(unit[1]))
    return 255.0 * v * unit


def render_frames(spec: SynthSpec) -> Iterator[np.ndarray]:
    """Yield ``(height, width, 3)`` uint8 frames, deterministic for ``spec.seed``."""
    geo = face_geometry(spec.width, spec.height)
    yy, xx = np.mgrid[0:spec.height, 0:spec.width]
    skin = ((xx + 0.5 - geo.cx) / geo.ax) ** 2 + ((yy + 0.5 - geo.cy) / geo.ay) ** 2 <= 1.0
    background = np.array(BACKGROUND_RGB, dtype=np.float64)
    rng = np.random.default_rng(spec.seed)
    times = np.arange(spec.n_frames) / spec.fps
    hues, greens = planted_traces(spec, times)
    gains = brightness_gain(spec, times)
    shape = (spec.height, spec.width, 3)
    skin = np.broadcast_to(skin[..., None], shape)
    reps = (-(-spec.height // 4), -(-spec.width // 4))
    dither = np.tile(_BAYER4, reps)[:spec.height, :spec.width, None]
    img = np.empty(shape, dtype=np.float32)
    for i in range(spec.n_frames):
        color = _skin_color(spec, hues[i], greens[i])
        img[...] = background * gains[i]
        np.copyto(img, (color * gains[i]).astype(np.float32), where=skin)
        if spec.noise_sigma > 0:
            noise = rng.standard_normal(shape, dtype=np.float32)
            noise *= np.float32(spec.noise_sigma)
            img += noise
        img += dither
        np.floor(img, out=img)
        np.clip(img, 0, 255, out=img)
        yield img.astype(np.uint8)


def iter_synthetic_frames(spec: SynthSpec) -> Iterator[Frame]:
    """In-memory frames without touching disk."""
    for i, px in enumerate(render_frames(spec)):
        yield Frame(i, i / spec.fps, px)


def landmarks_for(spec: SynthSpec) -> list[LandmarkSet]:
    geo = face_geometry(spec.width, spec.height)
    return [LandmarkSet(i, geo.face_box, geo.points) for i in range(spec.n_frames)]


def ground_truth(spec: SynthSpec) -> GroundTruth:
    times = np.arange(spec.n_frames) / spec.fps
    hues, greens = planted_traces(spec, times)
    greens = greens * brightness_gain(spec, times)
    return GroundTruth(
        hr_bpm=60.0 * spec.hr_hz,
        rr_bpm=60.0 * spec.rr_hz,
        forehead_rect=face_geometry(spec.width, spec.height).forehead.as_tuple(),
        mean_hue_trace=[float(h) for h in hues],
        mean_green_trace=[float(g) for g in greens],
        timestamps=[float(t) for t in times],
    )


VIDEO_NAME = "video.y4m"
SEQUENCE_DIR = "frames"
LANDMARK_NAME = "landmarks.lmjsonl"
TRUTH_NAME = "truth.json"


def generate(spec: SynthSpec, out_dir, range_mode: str = "limited") -> GroundTruth:
    """Write video, landmark sidecar and ground truth JSON into ``out_dir``."""
    os.makedirs(out_dir, exist_ok=True)
    if spec.container == "y4m":
        write_y4m(os.path.join(out_dir, VIDEO_NAME), render_frames(spec), spec.fps,
                  spec.chroma, range_mode)
    else:
        write_image_sequence(os.path.join(out_dir, SEQUENCE_DIR), render_frames(spec), spec.fps)
    write_landmark_sidecar(os.path.join(out_dir, LANDMARK_NAME), landmarks_for(spec))
    truth = ground_truth(spec)
    with open(os.path.join(out_dir, TRUTH_NAME), "w", encoding="utf-8") as fh:
        fh.write(truth.to_json())
    return truth


def video_path(out_dir, spec: Optional[SynthSpec] = None) -> str:
    if spec is not None and spec.container == "image_sequence":
        return os.path.join(out_dir, SEQUENCE_DIR)
    return os.path.join(out_dir, VIDEO_NAME)
