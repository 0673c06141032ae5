"""Frame-stream decoding (Y4M, numbered image sequences, raw RGB24) and
frame-drop simulation."""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator, Optional

import numpy as np

from . import color
from .exceptions import (
    FrameSizeError,
    IngestError,
    MalformedHeaderError,
    UnreadableFileError,
)

SOURCE_KINDS = ("y4m", "image_sequence", "raw_rgb")
Y4M_MAGIC = b"YUV4MPEG2"
SEQUENCE_META = "meta.json"


@dataclass(frozen=True, eq=False)
class Frame:
    index: int
    timestamp_s: float
    pixels: np.ndarray = field(repr=False)

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.uint8)
        if px.ndim != 3 or px.shape[2] != 3:
            raise FrameSizeError(f"frame {self.index}: pixels must be (height, width, 3)")
        if not px.flags.c_contiguous:
            px = np.ascontiguousarray(px)
        if px.flags.writeable:
            px = px.copy()
            px.flags.writeable = False
        object.__setattr__(self, "pixels", px)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def buffer(self) -> bytes:
        """Row-major RGB8 bytes, length ``width * height * 3``."""
        return self.pixels.tobytes()


@dataclass(frozen=True)
class StreamMeta:
    nominal_fps: float
    width: int
    height: int
    source_kind: str
    frame_count: Optional[int] = None
    chroma: Optional[str] = None
    range_mode: Optional[str] = None

    def __post_init__(self):
        if not self.nominal_fps > 0:
            raise MalformedHeaderError(f"nominal_fps must be positive, got {self.nominal_fps}")
        if self.source_kind not in SOURCE_KINDS:
            raise ValueError(f"unknown source kind {self.source_kind!r}")


# --------------------------------------------------------------------------- #
# Y4M

def parse_y4m_header(line: bytes) -> dict:
    """Parse a ``YUV4MPEG2`` stream header line (without trailing newline)."""
    tokens = line.split(b" ")
    if not tokens or tokens[0] != Y4M_MAGIC:
        raise MalformedHeaderError("missing YUV4MPEG2 signature")
    info = {"chroma": "420", "range_mode": None, "fps": None}
    for tok in tokens[1:]:
        if not tok:
            continue
        key, val = chr(tok[0]), tok[1:].decode("ascii", "replace")
        try:
            if key == "W":
                info["width"] = int(val)
            elif key == "H":
                info["height"] = int(val)
            elif key == "F":
                num, den = val.split(":")
                info["fps"] = Fraction(int(num), int(den))
            elif key == "C":
                if val.startswith("420"):
                    info["chroma"] = "420"
                elif val.startswith("444") and val != "444alpha":
                    info["chroma"] = "444"
                else:
                    raise MalformedHeaderError(f"unsupported colorspace C{val}")
            elif key == "X" and val.upper().startswith("COLORRANGE="):
                rng = val.split("=", 1)[1].upper()
                info["range_mode"] = "full" if rng == "FULL" else "limited"
        except (ValueError, ZeroDivisionError) as exc:
            raise MalformedHeaderError(f"bad header token {tok!r}") from exc
    if "width" not in info or "height" not in info:
        raise MalformedHeaderError("header lacks W or H")
    if info["width"] <= 0 or info["height"] <= 0:
        raise MalformedHeaderError("non-positive frame size")
    if info["fps"] is None or info["fps"] <= 0:
        raise MalformedHeaderError("header lacks a positive F rate")
    return info


def _y4m_frame_bytes(width: int, height: int, chroma: str) -> tuple[int, int]:
    if chroma == "444":
        return width * height, width * height
    return width * height, ((width + 1) // 2) * ((height + 1) // 2)


def _iter_y4m(path, info, range_mode, header_len) -> Iterator[Frame]:
    width, height, chroma = info["width"], info["height"], info["chroma"]
    fps = float(info["fps"])
    ny, nc = _y4m_frame_bytes(width, height, chroma)
    payload = ny + 2 * nc
    decode = color.yuv444_to_rgb if chroma == "444" else color.yuv420_to_rgb
    with open(path, "rb") as fh:
        fh.seek(header_len)
        index = 0
        while True:
            marker = fh.readline()
            if not marker:
                return
            if not marker.startswith(b"FRAME"):
                raise MalformedHeaderError(f"frame {index}: expected FRAME marker")
            data = fh.read(payload)
            if len(data) != payload:
                raise FrameSizeError(
                    f"frame {index}: truncated payload ({len(data)} of {payload} bytes)"
                )
            buf = np.frombuffer(data, dtype=np.uint8)
            rgb = decode(buf[:ny], buf[ny:ny + nc], buf[ny + nc:], width, height, range_mode)
            yield Frame(index, index / fps, rgb)
            index += 1


def _open_y4m(path, range_mode=None):
    try:
        with open(path, "rb") as fh:
            header = fh.readline()
            size = os.fstat(fh.fileno()).st_size
    except OSError as exc:
        raise UnreadableFileError(str(exc)) from exc
    if not header.endswith(b"\n"):
        raise MalformedHeaderError("empty file or unterminated Y4M header")
    info = parse_y4m_header(header.rstrip(b"\n"))
    mode = range_mode or info["range_mode"] or "limited"
    ny, nc = _y4m_frame_bytes(info["width"], info["height"], info["chroma"])
    # exact when every FRAME marker carries no parameters
    per_frame = len(b"FRAME\n") + ny + 2 * nc
    body = size - len(header)
    count = body // per_frame if body % per_frame == 0 else None
    meta = StreamMeta(float(info["fps"]), info["width"], info["height"], "y4m",
                      count, info["chroma"], mode)
    return meta, _iter_y4m(path, info, mode, len(header))


def write_y4m(path, frames: Iterable, fps, chroma: str = "420",
              range_mode: str = "limited") -> int:
    """Write RGB frames (``Frame`` or ``(H, W, 3)`` arrays) as Y4M. Returns frame count."""
    if chroma not in ("420", "444"):
        raise ValueError("chroma must be '420' or '444'")
    rate = Fraction(fps).limit_denominator(1001)
    encode = color.rgb_to_yuv444_planes if chroma == "444" else color.rgb_to_yuv420_planes
    count = 0
    shape = None
    with open(path, "wb") as fh:
        for frame in frames:
            px = frame.pixels if isinstance(frame, Frame) else np.asarray(frame, np.uint8)
            if shape is None:
                shape = px.shape
                header = (f"YUV4MPEG2 W{px.shape[1]} H{px.shape[0]} "
                          f"F{rate.numerator}:{rate.denominator} Ip A1:1 C{chroma} "
                          f"XCOLORRANGE={range_mode.upper()}\n")
                fh.write(header.encode("ascii"))
            elif px.shape != shape:
                raise FrameSizeError(f"frame {count}: size {px.shape} differs from {shape}")
            fh.write(b"FRAME\n")
            for plane in encode(px, range_mode):
                fh.write(plane.tobytes())
            count += 1
    if shape is None:
        raise IngestError("no frames to write")
    return count


# --------------------------------------------------------------------------- #
# image sequences and raw RGB24

def _load_meta_json(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            meta = json.load(fh)
    except FileNotFoundError as exc:
        raise UnreadableFileError(f"metadata file not found: {path}") from exc
    except (OSError, json.JSONDecodeError) as exc:
        raise MalformedHeaderError(f"unreadable metadata {path}: {exc}") from exc
    if not isinstance(meta, dict) or "fps" not in meta:
        raise MalformedHeaderError(f"{path}: metadata must be an object with 'fps'")
    try:
        meta["fps"] = float(meta["fps"])
    except (TypeError, ValueError) as exc:
        raise MalformedHeaderError(f"{path}: fps is not a number") from exc
    return meta


def _format_pattern(pattern: str, i: int) -> str:
    try:
        return pattern % i
    except (TypeError, ValueError) as exc:
        raise MalformedHeaderError(f"bad filename pattern {pattern!r}") from exc


def _open_sequence(directory):
    meta = _load_meta_json(os.path.join(directory, SEQUENCE_META))
    pattern = meta.get("pattern", "frame_%05d.ppm")
    start = 0 if os.path.exists(os.path.join(directory, _format_pattern(pattern, 0))) else 1
    files = []
    i = start
    while True:
        candidate = os.path.join(directory, _format_pattern(pattern, i))
        if not os.path.exists(candidate):
            break
        files.append(candidate)
        i += 1
    width, height = meta.get("width"), meta.get("height")
    if files and (width is None or height is None):
        first = _read_image(files[0])
        height, width = first.shape[:2]
    stream_meta = StreamMeta(meta["fps"], int(width or 0), int(height or 0),
                             "image_sequence", len(files))
    return stream_meta, _iter_sequence(files, meta["fps"], stream_meta.width, stream_meta.height)


def _read_image(path) -> np.ndarray:
    from PIL import Image

    try:
        with Image.open(path) as im:
            return np.asarray(im.convert("RGB"), dtype=np.uint8)
    except OSError as exc:
        raise UnreadableFileError(f"{path}: {exc}") from exc


def _iter_sequence(files, fps, width, height) -> Iterator[Frame]:
    for index, name in enumerate(files):
        px = _read_image(name)
        if px.shape[:2] != (height, width):
            raise FrameSizeError(
                f"frame {index} ({name}) is {px.shape[1]}x{px.shape[0]}, expected {width}x{height}"
            )
        yield Frame(index, index / fps, px)


def write_image_sequence(directory, frames: Iterable, fps, pattern: str = "frame_%05d.ppm") -> int:
    from PIL import Image

    os.makedirs(directory, exist_ok=True)
    count = 0
    shape = None
    for frame in frames:
        px = frame.pixels if isinstance(frame, Frame) else np.asarray(frame, np.uint8)
        shape = shape or px.shape
        if px.shape != shape:
            raise FrameSizeError(f"frame {count}: size {px.shape} differs from {shape}")
        Image.fromarray(px, "RGB").save(os.path.join(directory, pattern % count))
        count += 1
    if shape is None:
        raise IngestError("no frames to write")
    with open(os.path.join(directory, SEQUENCE_META), "w", encoding="utf-8") as fh:
        json.dump({"fps": fps, "width": shape[1], "height": shape[0], "pattern": pattern}, fh)
    return count


def raw_meta_path(path) -> str:
    return str(path) + ".json"


def _open_raw(path):
    meta = _load_meta_json(raw_meta_path(path))
    fmt = meta.get("pixel_format", "rgb24")
    if fmt != "rgb24":
        raise MalformedHeaderError(f"unsupported pixel_format {fmt!r}")
    try:
        width, height = int(meta["width"]), int(meta["height"])
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedHeaderError("raw metadata needs integer width and height") from exc
    if width <= 0 or height <= 0:
        raise MalformedHeaderError("non-positive frame size")
    try:
        size = os.path.getsize(path)
    except OSError as exc:
        raise UnreadableFileError(str(exc)) from exc
    frame_bytes = width * height * 3
    if size % frame_bytes:
        raise FrameSizeError(f"file size {size} is not a multiple of the frame size {frame_bytes}")
    stream_meta = StreamMeta(meta["fps"], width, height, "raw_rgb", size // frame_bytes)
    return stream_meta, _iter_raw(path, stream_meta)


def _iter_raw(path, meta: StreamMeta) -> Iterator[Frame]:
    frame_bytes = meta.width * meta.height * 3
    with open(path, "rb") as fh:
        for index in range(meta.frame_count):
            data = fh.read(frame_bytes)
            px = np.frombuffer(data, dtype=np.uint8).reshape(meta.height, meta.width, 3)
            yield Frame(index, index / meta.nominal_fps, px)


def write_raw_rgb(path, frames: Iterable, fps) -> int:
    count = 0
    shape = None
    with open(path, "wb") as fh:
        for frame in frames:
            px = frame.pixels if isinstance(frame, Frame) else np.asarray(frame, np.uint8)
            shape = shape or px.shape
            if px.shape != shape:
                raise FrameSizeError(f"frame {count}: size {px.shape} differs from {shape}")
            fh.write(np.ascontiguousarray(px).tobytes())
            count += 1
    if shape is None:
        raise IngestError("no frames to write")
    with open(raw_meta_path(path), "w", encoding="utf-8") as fh:
        json.dump({"fps": fps, "width": shape[1], "height": shape[0],
                   "pattern": os.path.basename(str(path)), "pixel_format": "rgb24"}, fh)
    return count


# --------------------------------------------------------------------------- #

def detect_format(path) -> str:
    if os.path.isdir(path):
        return "image_sequence"
    if not os.path.exists(path):
        raise UnreadableFileError(f"no such file: {path}")
    ext = os.path.splitext(str(path))[1].lower()
    if ext == ".y4m":
        return "y4m"
    if ext in (".rgb", ".raw", ".rgb24"):
        return "raw_rgb"
    try:
        with open(path, "rb") as fh:
            head = fh.read(len(Y4M_MAGIC))
    except OSError as exc:
        raise UnreadableFileError(str(exc)) from exc
    if head == Y4M_MAGIC:
        return "y4m"
    if os.path.exists(raw_meta_path(path)):
        return "raw_rgb"
    # an unrecognized regular file is treated as Y4M so the header check reports it
    return "y4m"


def open_stream(path, format_hint: Optional[str] = None, range_mode: Optional[str] = None):
    """Open a frame source and return ``(StreamMeta, frame iterator)``.

    ``format_hint`` is one of ``y4m``, ``image_sequence`` or ``raw_rgb``; when
    omitted the format is taken from the extension or magic bytes. Headers are
    validated eagerly, pixel data is decoded lazily.
    """
    path = os.fspath(path)
    kind = format_hint or detect_format(path)
    if kind == "y4m":
        if not os.path.isfile(path):
            raise UnreadableFileError(f"no such file: {path}")
        return _open_y4m(path, range_mode)
    if kind == "image_sequence":
        if not os.path.isdir(path):
            raise UnreadableFileError(f"not a directory: {path}")
        return _open_sequence(path)
    if kind == "raw_rgb":
        return _open_raw(path)
    raise ValueError(f"unknown format hint {format_hint!r}; expected one of {SOURCE_KINDS}")


def simulate_drops(frames: Iterable[Frame], keep_rate: float, seed=None) -> Iterator[Frame]:
    """Keep each frame independently with probability ``keep_rate``.

    Original indices and timestamps are preserved, so the output is
    irregularly sampled.
    """
    if not 0.0 < keep_rate <= 1.0:
        raise ValueError(f"keep_rate must be in (0, 1], got {keep_rate}")
    rng = np.random.default_rng(seed)
    for frame in frames:
        if rng.random() < keep_rate:
            yield frame

