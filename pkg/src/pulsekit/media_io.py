"""On-disk formats: PPM frame clips, signal CSVs, and the PNXT tensor container.

This is the only module that touches the filesystem. Every format round-trips
losslessly at its declared precision (8-bit frames, 9 significant digits for
CSV, float32 for tensors) and every reader raises a :class:`FormatError`
subclass instead of crashing on malformed input.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    CorruptClipError,
    CorruptFileError,
    InvalidInputError,
    SignalParseError,
    UnsupportedFormatError,
)
from .numerics import RealSignal
from .validation import check_positive

MANIFEST_NAME = "manifest.json"
FRAME_PATTERN = "frame_{:06d}.ppm"

TENSOR_MAGIC = b"PNXT"
TENSOR_VERSION = 1


@dataclass
class FrameSequence:
    """T RGB frames of identical geometry, 8 bits per channel."""

    frames: np.ndarray  # (T, H, W, 3) uint8
    fps: float

    def __post_init__(self):
        frames = np.asarray(self.frames)
        if frames.ndim != 4 or frames.shape[-1] != 3:
            raise InvalidInputError(f"frames must be (T, H, W, 3), got {frames.shape}")
        if frames.shape[0] < 1:
            raise InvalidInputError("a clip needs at least one frame")
        if frames.dtype != np.uint8:
            raise InvalidInputError("frames must be uint8")
        self.frames = frames
        self.fps = check_positive(self.fps, "fps")

    @property
    def frame_count(self) -> int:
        return self.frames.shape[0]

    @property
    def height(self) -> int:
        return self.frames.shape[1]

    @property
    def width(self) -> int:
        return self.frames.shape[2]


@dataclass
class ClipManifest:
    fps: float
    width: int
    height: int
    frame_count: int
    gt_signal: str | None = None


# ---------------------------------------------------------------------------
# PPM frames + manifest


def _write_ppm(path: Path, frame: np.ndarray) -> None:
    h, w = frame.shape[:2]
    with open(path, "wb") as f:
        f.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        f.write(frame.tobytes())


def _read_ppm(path: Path) -> np.ndarray:
    data = path.read_bytes()
    if not data.startswith(b"P6"):
        raise UnsupportedFormatError(f"{path.name}: not a binary PPM (P6) file")
    # Header: magic, width, height, maxval as whitespace-separated tokens,
    # with optional '#' comment lines.
    pos = 2
    tokens: list[int] = []
    while len(tokens) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise CorruptClipError(f"{path.name}: truncated PPM header")
        try:
            tokens.append(int(data[start:pos]))
        except ValueError as exc:
            raise CorruptClipError(f"{path.name}: bad PPM header token") from exc
    width, height, maxval = tokens
    if maxval != 255:
        raise UnsupportedFormatError(f"{path.name}: only maxval 255 is supported")
    if width < 1 or height < 1:
        raise CorruptClipError(f"{path.name}: bad dimensions {width}x{height}")
    pos += 1  # single whitespace byte after maxval
    pixels = data[pos : pos + width * height * 3]
    if len(pixels) != width * height * 3:
        raise CorruptClipError(f"{path.name}: truncated pixel data")
    return np.frombuffer(pixels, dtype=np.uint8).reshape(height, width, 3)


def write_clip(clip: FrameSequence, dir_path, gt_signal_name: str | None = None) -> None:
    """Write frames plus ``manifest.json`` into ``dir_path`` (created if needed)."""
    out = Path(dir_path)
    out.mkdir(parents=True, exist_ok=True)
    for i in range(clip.frame_count):
        _write_ppm(out / FRAME_PATTERN.format(i), clip.frames[i])
    manifest = {
        "fps": clip.fps,
        "width": clip.width,
        "height": clip.height,
        "frame_count": clip.frame_count,
    }
    if gt_signal_name is not None:
        manifest["gt_signal"] = gt_signal_name
    (out / MANIFEST_NAME).write_text(json.dumps(manifest, indent=2) + "\n")


def read_manifest(dir_path) -> ClipManifest:
    path = Path(dir_path) / MANIFEST_NAME
    if not path.is_file():
        raise CorruptClipError(f"missing {MANIFEST_NAME} in {dir_path}")
    try:
        raw = json.loads(path.read_text())
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise CorruptClipError(f"unreadable {MANIFEST_NAME}: {exc}") from exc
    try:
        return ClipManifest(
            fps=float(raw["fps"]),
            width=int(raw["width"]),
            height=int(raw["height"]),
            frame_count=int(raw["frame_count"]),
            gt_signal=raw.get("gt_signal"),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptClipError(f"bad {MANIFEST_NAME}: {exc}") from exc


def read_clip(dir_path) -> FrameSequence:
    """Load a clip directory written by :func:`write_clip`."""
    root = Path(dir_path)
    manifest = read_manifest(root)
    frames = []
    for i in range(manifest.frame_count):
        path = root / FRAME_PATTERN.format(i)
        if not path.is_file():
            raise CorruptClipError(f"missing frame {path.name}")
        frame = _read_ppm(path)
        if frame.shape[0] != manifest.height or frame.shape[1] != manifest.width:
            raise CorruptClipError(
                f"{path.name}: {frame.shape[1]}x{frame.shape[0]} does not match manifest"
            )
        frames.append(frame)
    return FrameSequence(np.stack(frames), manifest.fps)


# ---------------------------------------------------------------------------
# Signal CSV


def write_signal_csv(signal: RealSignal, path) -> None:
    """Write ``time_s,value`` rows with 9 significant digits."""
    lines = ["time_s,value"]
    rate = signal.rate_hz
    for i, v in enumerate(signal.samples):
        lines.append(f"{i / rate:.9g},{v:.9g}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_signal_csv(path) -> RealSignal:
    """Read a signal CSV; the rate is recovered from the time column.

    Single-row files carry no spacing information and fall back to 1 Hz.
    """
    text = Path(path).read_text()
    lines = text.splitlines()
    if not lines or lines[0].strip() != "time_s,value":
        raise SignalParseError("expected header 'time_s,value'", line=1)
    times: list[float] = []
    values: list[float] = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise SignalParseError(f"expected 2 fields, got {len(parts)}", line=lineno)
        try:
            times.append(float(parts[0]))
            values.append(float(parts[1]))
        except ValueError as exc:
            raise SignalParseError(str(exc), line=lineno)
    if not values:
        raise SignalParseError("no data rows", line=len(lines))
    if len(values) == 1 or times[-1] <= 0:
        rate = 1.0
    else:
        # Re-round to 9 significant digits so a written rate survives the trip.
        rate = float(f"{(len(values) - 1) / times[-1]:.9g}")
    return RealSignal(np.asarray(values), rate)


# ---------------------------------------------------------------------------
# PNXT named-tensor container


def write_tensors(entries, path) -> None:
    """Serialize named float32 tensors.

    Layout (all integers little-endian): magic ``PNXT``, version u32,
    entry count u32, then per entry: name length u32, UTF-8 name, ndim u32,
    dims u32 each, float32 data in C order.

    ``entries`` is a mapping or sequence of ``(name, array)`` pairs; order
    is preserved.
    """
    pairs = list(entries.items()) if hasattr(entries, "items") else list(entries)
    names = [name for name, _ in pairs]
    if len(set(names)) != len(names):
        raise InvalidInputError("tensor names must be unique")
    blob = bytearray()
    blob += TENSOR_MAGIC
    blob += struct.pack("<II", TENSOR_VERSION, len(pairs))
    for name, array in pairs:
        arr = np.ascontiguousarray(array, dtype=np.float32)
        encoded = name.encode("utf-8")
        blob += struct.pack("<I", len(encoded))
        blob += encoded
        blob += struct.pack("<I", arr.ndim)
        blob += struct.pack(f"<{arr.ndim}I", *arr.shape)
        blob += arr.tobytes()
    Path(path).write_bytes(bytes(blob))


class _Cursor:
    """Bounds-checked reader over an in-memory byte string."""

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if n < 0 or self.pos + n > len(self.data):
            raise CorruptFileError(
                f"truncated tensor file: wanted {n} bytes at offset {self.pos}, "
                f"have {len(self.data) - self.pos}"
            )
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]


def read_tensors(path) -> dict[str, np.ndarray]:
    """Read a PNXT file into an ordered ``{name: float32 array}`` mapping."""
    cur = _Cursor(Path(path).read_bytes())
    if cur.take(4) != TENSOR_MAGIC:
        raise UnsupportedFormatError("bad magic: not a PNXT tensor file")
    version = cur.u32()
    if version != TENSOR_VERSION:
        raise UnsupportedFormatError(f"unsupported PNXT version {version}")
    count = cur.u32()
    out: dict[str, np.ndarray] = {}
    for _ in range(count):
        name_len = cur.u32()
        try:
            name = cur.take(name_len).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise CorruptFileError(f"undecodable tensor name: {exc}") from exc
        ndim = cur.u32()
        dims = tuple(cur.u32() for _ in range(ndim))
        size = 1
        for d in dims:
            size *= d
        data = np.frombuffer(cur.take(4 * size), dtype="<f4").reshape(dims)
        if name in out:
            raise CorruptFileError(f"duplicate tensor name {name!r}")
        out[name] = data.copy()
    if cur.pos != len(cur.data):
        raise CorruptFileError(f"{len(cur.data) - cur.pos} trailing bytes after last entry")
    return out
