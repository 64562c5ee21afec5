"""Grid data types and bit-exact file formats.

Three on-disk formats are supported:

* CEBP -- probability maps: ASCII header ``CEBP <width> <height>\\n`` followed
  by width*height little-endian IEEE-754 float32 samples, row-major from the
  top-left pixel.  Round-trips are bit-exact for any finite value in [0, 1].
* 16-bit PGM (binary P5, maxval 65535, big-endian samples) -- accepted as a
  portable fallback for probability maps (value v decodes to v/65535) and used
  natively for label maps (raw instance ids, 0 = background).
* 8-bit PGM (P5, maxval 255, samples in {0, 255}) -- boundary signature
  rasters.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError, RangeError


@dataclass(frozen=True)
class ProbMap:
    """A per-pixel foreground probability grid with values in [0, 1]."""

    values: np.ndarray  # float32, shape (height, width), read-only

    def __post_init__(self):
        v = self.values
        if v.ndim != 2:
            raise ValueError("probability map must be 2D")
        if v.shape[0] < 1 or v.shape[1] < 1:
            raise ValueError("probability map dimensions must be at least 1x1")
        if v.dtype != np.float32:
            raise ValueError("probability map values must be float32")
        if not np.all(np.isfinite(v)):
            raise RangeError("probability map contains non-finite values")
        if v.min() < 0.0 or v.max() > 1.0:
            raise RangeError("probability values must lie in [0, 1]")
        v.setflags(write=False)

    @classmethod
    def from_array(cls, arr) -> "ProbMap":
        return cls(np.array(arr, dtype=np.float32))

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


@dataclass(frozen=True)
class LabelMap:
    """An instance-id grid; 0 is background, positive ids are instances."""

    labels: np.ndarray  # int32, shape (height, width), read-only

    def __post_init__(self):
        lab = self.labels
        if lab.ndim != 2:
            raise ValueError("label map must be 2D")
        if lab.dtype != np.int32:
            raise ValueError("label map must be int32")
        if lab.min(initial=0) < 0:
            raise ValueError("label ids must be non-negative")
        lab.setflags(write=False)

    @classmethod
    def from_array(cls, arr) -> "LabelMap":
        return cls(np.array(arr, dtype=np.int32))

    @classmethod
    def zeros(cls, height: int, width: int) -> "LabelMap":
        return cls(np.zeros((height, width), dtype=np.int32))

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.labels.shape

    def ids(self) -> list[int]:
        present = np.unique(self.labels)
        return [int(i) for i in present if i > 0]

    def instances(self) -> dict[int, set[tuple[int, int]]]:
        """Pixel set per positive id, as (x, y) tuples."""
        out: dict[int, set[tuple[int, int]]] = {}
        ys, xs = np.nonzero(self.labels)
        vals = self.labels[ys, xs]
        for x, y, v in zip(xs.tolist(), ys.tolist(), vals.tolist()):
            out.setdefault(int(v), set()).add((x, y))
        return out


@dataclass(frozen=True)
class BinaryRaster:
    """A square {0,1} raster used for boundary signatures."""

    bits: np.ndarray  # uint8, shape (side, side), read-only

    def __post_init__(self):
        b = self.bits
        if b.ndim != 2 or b.shape[0] != b.shape[1]:
            raise ValueError("binary raster must be square")
        if b.dtype != np.uint8:
            raise ValueError("binary raster must be uint8")
        if b.max(initial=0) > 1:
            raise ValueError("binary raster values must be 0 or 1")
        b.setflags(write=False)

    @classmethod
    def from_array(cls, arr) -> "BinaryRaster":
        return cls(np.array(arr, dtype=np.uint8))

    @property
    def side(self) -> int:
        return self.bits.shape[0]


# ---------------------------------------------------------------------------
# CEBP probability maps


def _decode_cebp(data: bytes, path) -> ProbMap:
    nl = data.find(b"\n")
    if nl < 0:
        raise FormatError(f"{path}: missing CEBP header terminator")
    try:
        parts = data[:nl].decode("ascii").split()
    except UnicodeDecodeError as exc:
        raise FormatError(f"{path}: undecodable CEBP header") from exc
    if len(parts) != 3 or parts[0] != "CEBP":
        raise FormatError(f"{path}: malformed CEBP header {parts!r}")
    try:
        width, height = int(parts[1]), int(parts[2])
    except ValueError as exc:
        raise FormatError(f"{path}: non-integer CEBP dimensions") from exc
    if width < 1 or height < 1:
        raise FormatError(f"{path}: CEBP dimensions must be positive, got {width}x{height}")
    payload = data[nl + 1:]
    expected = width * height * 4
    if len(payload) != expected:
        raise FormatError(f"{path}: CEBP payload is {len(payload)} bytes, expected {expected}")
    arr = np.frombuffer(payload, dtype="<f4").reshape(height, width).copy()
    if not np.all(np.isfinite(arr)):
        raise RangeError(f"{path}: CEBP contains non-finite values")
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise RangeError(f"{path}: CEBP values outside [0, 1]")
    return ProbMap(arr)


def write_probmap(prob: ProbMap, path) -> None:
    """Write a probability map in CEBP format (lossless for float32)."""
    path = Path(path)
    header = f"CEBP {prob.width} {prob.height}\n".encode("ascii")
    path.write_bytes(header + prob.values.astype("<f4").tobytes())


def read_probmap(path) -> ProbMap:
    """Read a probability map from a CEBP or 16-bit PGM file."""
    path = Path(path)
    data = path.read_bytes()
    if data.startswith(b"CEBP"):
        return _decode_cebp(data, path)
    if data.startswith(b"P5"):
        width, height, maxval, raw = _decode_pgm(data, path)
        if maxval != 65535:
            raise FormatError(f"{path}: probability PGM must have maxval 65535, got {maxval}")
        arr = (raw.astype(np.float64) / 65535.0).astype(np.float32).reshape(height, width)
        return ProbMap(arr)
    raise FormatError(f"{path}: unrecognized probability map format")


# ---------------------------------------------------------------------------
# PGM


def _decode_pgm(data: bytes, path):
    """Parse a binary P5 PGM; returns (width, height, maxval, flat samples)."""
    pos = 0
    fields = []
    if data[:2] != b"P5":
        raise FormatError(f"{path}: not a P5 PGM")
    pos = 2
    while len(fields) < 3:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos:pos + 1] == b"#":
            end = data.find(b"\n", pos)
            if end < 0:
                raise FormatError(f"{path}: unterminated PGM comment")
            pos = end + 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        token = data[start:pos]
        if not token:
            raise FormatError(f"{path}: truncated PGM header")
        try:
            fields.append(int(token))
        except ValueError as exc:
            raise FormatError(f"{path}: bad PGM header token {token!r}") from exc
    pos += 1  # single whitespace after maxval
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise FormatError(f"{path}: PGM dimensions must be positive")
    if maxval <= 0 or maxval > 65535:
        raise FormatError(f"{path}: unsupported PGM maxval {maxval}")
    sample_bytes = 2 if maxval > 255 else 1
    expected = width * height * sample_bytes
    payload = data[pos:pos + expected]
    if len(payload) != expected:
        raise FormatError(f"{path}: PGM payload is {len(payload)} bytes, expected {expected}")
    dtype = ">u2" if sample_bytes == 2 else np.uint8
    raw = np.frombuffer(payload, dtype=dtype).astype(np.int64)
    if raw.max(initial=0) > maxval:
        raise FormatError(f"{path}: PGM sample exceeds maxval")
    return width, height, maxval, raw


def write_labelmap(labmap: LabelMap, path) -> None:
    """Write a label map as a 16-bit binary PGM (raw ids)."""
    path = Path(path)
    if labmap.labels.max(initial=0) > 65535:
        raise FormatError(f"{path}: label id exceeds 65535, cannot encode as 16-bit PGM")
    header = f"P5\n{labmap.width} {labmap.height}\n65535\n".encode("ascii")
    path.write_bytes(header + labmap.labels.astype(">u2").tobytes())


def read_labelmap(path) -> LabelMap:
    """Read a label map from a 16-bit PGM; 8-bit files are rejected."""
    path = Path(path)
    data = path.read_bytes()
    width, height, maxval, raw = _decode_pgm(data, path)
    if maxval != 65535:
        raise FormatError(f"{path}: label PGM must be 16-bit (maxval 65535), got maxval {maxval}")
    return LabelMap(raw.astype(np.int32).reshape(height, width).copy())


def write_signature_pgm(raster: BinaryRaster, path) -> None:
    """Write a signature raster as an 8-bit PGM with values in {0, 255}."""
    path = Path(path)
    header = f"P5\n{raster.side} {raster.side}\n255\n".encode("ascii")
    path.write_bytes(header + (raster.bits * np.uint8(255)).tobytes())


def read_signature_pgm(path) -> BinaryRaster:
    path = Path(path)
    data = path.read_bytes()
    width, height, maxval, raw = _decode_pgm(data, path)
    if maxval != 255:
        raise FormatError(f"{path}: signature PGM must have maxval 255")
    if width != height:
        raise FormatError(f"{path}: signature raster must be square")
    bad = set(np.unique(raw).tolist()) - {0, 255}
    if bad:
        raise FormatError(f"{path}: signature PGM has values other than 0/255: {sorted(bad)}")
    bits = (raw.reshape(height, width) == 255).astype(np.uint8)
    return BinaryRaster(bits)
