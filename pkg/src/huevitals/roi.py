"""Forehead geometry and per-frame reduction to a single iPPG observation."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .color import hue_array
from .exceptions import GeometryError, LandmarkParseError, UnreadableFileError

N_LANDMARKS = 68
LEFT_BROW_INNER = 21
RIGHT_BROW_INNER = 24
CHANNELS = ("hue", "green")


@dataclass(frozen=True)
class ForeheadRect:
    """Half-open pixel rectangle: columns ``[left, right)``, rows ``[top, bottom)``."""

    left: int
    top: int
    right: int
    bottom: int

    def __post_init__(self):
        if not (self.left < self.right and self.top < self.bottom):
            raise GeometryError(f"degenerate rectangle {self.as_tuple()}")

    @property
    def area(self) -> int:
        return (self.right - self.left) * (self.bottom - self.top)

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.left, self.top, self.right, self.bottom)

    def clamp(self, width: int, height: int) -> "ForeheadRect":
        return ForeheadRect(
            min(max(self.left, 0), width),
            min(max(self.top, 0), height),
            min(max(self.right, 0), width),
            min(max(self.bottom, 0), height),
        )

    @classmethod
    def parse(cls, text: str) -> "ForeheadRect":
        """Parse ``"L,T,R,B"``."""
        parts = [p.strip() for p in text.split(",")]
        if len(parts) != 4:
            raise ValueError(f"expected L,T,R,B, got {text!r}")
        return cls(*(int(round(float(p))) for p in parts))


@dataclass(frozen=True)
class LandmarkSet:
    frame_index: int
    face_box: tuple[float, float, float, float]
    points: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if len(self.points) != N_LANDMARKS:
            raise GeometryError(f"expected {N_LANDMARKS} points, got {len(self.points)}")
        left, top, right, bottom = self.face_box
        if not (right > left and bottom > top):
            raise GeometryError(f"face box {self.face_box} has no area")

    def to_json(self) -> str:
        return json.dumps({
            "frame": self.frame_index,
            "face_box": list(self.face_box),
            "points": [list(p) for p in self.points],
        })


@dataclass(frozen=True)
class HueMask:
    """Open hue interval ``(lo, hi)``; ``wrap`` means it passes through 0."""

    lo: float = 0.0
    hi: float = 0.1
    wrap: bool = False

    def __post_init__(self):
        if self.lo == self.hi:
            raise ValueError("mask bounds must differ")
        if not self.wrap and self.lo > self.hi:
            raise ValueError(f"lo {self.lo} > hi {self.hi} requires wrap=True")

    def contains(self, hue: np.ndarray) -> np.ndarray:
        if self.wrap:
            return (hue > self.lo) | (hue < self.hi)
        return (hue > self.lo) & (hue < self.hi)

    @classmethod
    def parse(cls, text: str) -> "HueMask":
        lo, hi = (float(p) for p in text.split(","))
        return cls(lo, hi, wrap=lo > hi)


@dataclass(frozen=True)
class RoiSample:
    timestamp_s: float
    value: Optional[float]
    pixel_count: int
    channel: str

    @property
    def valid(self) -> bool:
        return self.pixel_count > 0 and self.value is not None


def forehead_from_landmarks(lm: LandmarkSet, frame_w: int, frame_h: int) -> ForeheadRect:
    """Rectangle between the face-box top and the two inner-eyebrow points.

    Columns span from landmark 21 to landmark 24; rows run from the face box
    top down to the higher of the two eyebrow points.
    """
    x21, y21 = lm.points[LEFT_BROW_INNER]
    x24, y24 = lm.points[RIGHT_BROW_INNER]
    left, right = int(round(x21)), int(round(x24))
    top = int(round(lm.face_box[1]))
    bottom = int(round(min(y21, y24)))
    if left >= right or top >= bottom:
        raise GeometryError(
            f"frame {lm.frame_index}: forehead ({left}, {top}, {right}, {bottom}) is degenerate"
        )
    left, right = min(max(left, 0), frame_w), min(max(right, 0), frame_w)
    top, bottom = min(max(top, 0), frame_h), min(max(bottom, 0), frame_h)
    if left >= right or top >= bottom:
        raise GeometryError(f"frame {lm.frame_index}: forehead lies outside the frame")
    return ForeheadRect(left, top, right, bottom)


def _crop(pixels: np.ndarray, rect: ForeheadRect) -> np.ndarray:
    h, w = pixels.shape[:2]
    if rect.right > w or rect.bottom > h or rect.left < 0 or rect.top < 0:
        raise GeometryError(f"rect {rect.as_tuple()} exceeds frame {w}x{h}")
    return pixels[rect.top:rect.bottom, rect.left:rect.right]


def _pixels(frame):
    return frame.pixels if hasattr(frame, "pixels") else np.asarray(frame)


def mean_hue_masked(frame, rect: ForeheadRect, mask: HueMask = HueMask(),
                    timestamp_s: Optional[float] = None) -> RoiSample:
    """Arithmetic mean hue over ROI pixels whose hue lies inside ``mask``."""
    ts = frame.timestamp_s if timestamp_s is None else timestamp_s
    hue = hue_array(_crop(_pixels(frame), rect))
    keep = mask.contains(hue)
    n = int(keep.sum())
    if n == 0:
        return RoiSample(ts, None, 0, "hue")
    return RoiSample(ts, float(hue[keep].mean()), n, "hue")


def mean_green(frame, rect: ForeheadRect, timestamp_s: Optional[float] = None) -> RoiSample:
    ts = frame.timestamp_s if timestamp_s is None else timestamp_s
    roi = _crop(_pixels(frame), rect)
    return RoiSample(ts, float(roi[..., 1].mean(dtype=np.float64)), rect.area, "green")


def reduce_frame(frame, rect: ForeheadRect, channel: str, mask: HueMask = HueMask()) -> RoiSample:
    if channel == "hue":
        return mean_hue_masked(frame, rect, mask)
    if channel == "green":
        return mean_green(frame, rect)
    raise ValueError(f"channel must be one of {CHANNELS}, got {channel!r}")


def _parse_landmark_row(obj, line: int) -> LandmarkSet:
    if not isinstance(obj, dict):
        raise LandmarkParseError(line, "row is not a JSON object")
    try:
        frame = obj["frame"]
        box = obj["face_box"]
        points = obj["points"]
    except KeyError as exc:
        raise LandmarkParseError(line, f"missing key {exc.args[0]!r}") from None
    if not isinstance(frame, int) or isinstance(frame, bool) or frame < 0:
        raise LandmarkParseError(line, "'frame' must be a non-negative integer")
    if not isinstance(box, list) or len(box) != 4:
        raise LandmarkParseError(line, "'face_box' must be [l, t, r, b]")
    if not isinstance(points, list) or len(points) != N_LANDMARKS:
        count = len(points) if isinstance(points, list) else "non-list"
        raise LandmarkParseError(line, f"expected {N_LANDMARKS} points, got {count}")
    try:
        box_t = tuple(float(v) for v in box)
        pts = tuple((float(p[0]), float(p[1])) for p in points if len(p) == 2)
    except (TypeError, ValueError):
        raise LandmarkParseError(line, "non-numeric coordinate") from None
    if len(pts) != N_LANDMARKS or not all(map(math.isfinite, box_t + sum(pts, ()))):
        raise LandmarkParseError(line, "points must be finite [x, y] pairs")
    try:
        return LandmarkSet(frame, box_t, pts)
    except GeometryError as exc:
        raise LandmarkParseError(line, str(exc)) from None


def parse_landmark_sidecar(path) -> dict[int, LandmarkSet]:
    """Read a JSON-lines landmark file into ``{frame_index: LandmarkSet}``.

    Frames missing from the mapping have no detected face. Blank lines are
    skipped; any malformed row raises ``LandmarkParseError`` with its line
    number (1-based).
    """
    out: dict[int, LandmarkSet] = {}
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise UnreadableFileError(str(exc)) from exc
    with fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise LandmarkParseError(lineno, f"invalid JSON ({exc.msg})") from None
            lm = _parse_landmark_row(obj, lineno)
            if lm.frame_index in out:
                raise LandmarkParseError(lineno, f"duplicate frame {lm.frame_index}")
            out[lm.frame_index] = lm
    return out


def write_landmark_sidecar(path, landmarks: Sequence[LandmarkSet]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for lm in landmarks:
            fh.write(lm.to_json() + "\n")
