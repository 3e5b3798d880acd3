"""Grayscale images, PGM (P2/P5) I/O, and integral images.

Pixels are 8-bit (0-255); integral sums are int64 so rectangle sums are
exact for any image size this package handles.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class PgmError(Exception):
    """Malformed or unsupported PGM input."""


class PgmMagicError(PgmError):
    """File does not start with P2 or P5."""


class PgmHeaderError(PgmError):
    """Header is malformed (bad dimensions, maxval, etc.)."""


class PgmTruncatedError(PgmError):
    """Pixel data ends before width*height samples."""


@dataclass(frozen=True)
class GrayImage:
    """Immutable 8-bit grayscale raster, row-major."""

    pixels: np.ndarray  # uint8, shape (height, width)

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.uint8)
        if px.ndim != 2 or px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError("image must be a 2-D array with positive dimensions")
        px = np.ascontiguousarray(px)
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, GrayImage):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and bool(
            np.array_equal(self.pixels, other.pixels)
        )

    def __hash__(self):
        return hash((self.pixels.shape, self.pixels.tobytes()))


@dataclass(frozen=True)
class IntegralImage:
    """Inclusive cumulative-sum table: sums[y, x] = sum of pixels[0..y, 0..x]."""

    sums: np.ndarray  # int64, shape (height, width)
    # Same table with a zero row/column prepended; box_sum uses it to avoid
    # branching on rectangle edges that touch the image border.
    padded: np.ndarray = field(repr=False, compare=False, default=None)

    @property
    def width(self) -> int:
        return self.sums.shape[1]

    @property
    def height(self) -> int:
        return self.sums.shape[0]


def _read_header_tokens(data: bytes, count: int, start: int) -> tuple[list[int], int]:
    """Read `count` whitespace-separated integer tokens, honoring # comments.

    Returns the tokens and the offset one past the single whitespace byte
    that terminates the last token.
    """
    tokens: list[int] = []
    i = start
    n = len(data)
    while len(tokens) < count:
        while i < n and data[i : i + 1].isspace():
            i += 1
        if i < n and data[i] == ord("#"):
            while i < n and data[i] not in (0x0A, 0x0D):
                i += 1
            continue
        j = i
        while j < n and not data[j : j + 1].isspace() and data[j] != ord("#"):
            j += 1
        if j == i:
            raise PgmHeaderError("unexpected end of header")
        tok = data[i:j]
        if not tok.isdigit():
            raise PgmHeaderError(f"non-numeric header token {tok!r}")
        tokens.append(int(tok))
        i = j
    if i >= n or not data[i : i + 1].isspace():
        raise PgmHeaderError("missing whitespace after header")
    return tokens, i + 1


def decode_pgm(data: bytes) -> GrayImage:
    """Parse PGM bytes: P5 (binary) or P2 (ASCII), maxval <= 255."""
    magic = data[:2]
    if magic not in (b"P2", b"P5"):
        raise PgmMagicError(f"unsupported magic {magic!r} (want P2 or P5)")
    (width, height, maxval), offset = _read_header_tokens(data, 3, 2)
    if width < 1 or height < 1:
        raise PgmHeaderError(f"bad dimensions {width}x{height}")
    if maxval < 1 or maxval > 255:
        raise PgmHeaderError(f"maxval {maxval} out of range (must be 1-255)")
    n = width * height
    if magic == b"P5":
        raster = data[offset : offset + n]
        if len(raster) < n:
            raise PgmTruncatedError(f"expected {n} pixel bytes, got {len(raster)}")
        px = np.frombuffer(raster, dtype=np.uint8, count=n).copy()
        if int(px.max(initial=0)) > maxval:
            raise PgmHeaderError("pixel sample exceeds maxval")
    else:
        values = data[offset:].split()
        if len(values) < n:
            raise PgmTruncatedError(f"expected {n} pixel samples, got {len(values)}")
        try:
            px = np.array([int(v) for v in values[:n]], dtype=np.int64)
        except ValueError as exc:
            raise PgmHeaderError(f"non-numeric pixel sample: {exc}") from exc
        if px.min() < 0 or px.max() > maxval:
            raise PgmHeaderError("pixel sample out of range")
        px = px.astype(np.uint8)
    return GrayImage(px.reshape(height, width))


def encode_pgm(img: GrayImage) -> bytes:
    """P5 encoding as bytes (also the wire-protocol payload format)."""
    return f"P5\n{img.width} {img.height}\n255\n".encode("ascii") + img.pixels.tobytes()


def load_pgm(path) -> GrayImage:
    """Load a P5 or P2 portable graymap from disk."""
    with open(path, "rb") as f:
        return decode_pgm(f.read())


def save_pgm(img: GrayImage, path) -> None:
    """Write a binary (P5) PGM; load_pgm after save_pgm is the identity."""
    with open(path, "wb") as f:
        f.write(encode_pgm(img))


def integral(img: GrayImage) -> IntegralImage:
    """Single-pass inclusive cumulative sum: sums[0, 0] == pixels[0, 0]."""
    sums = img.pixels.astype(np.int64).cumsum(axis=0).cumsum(axis=1)
    padded = np.zeros((sums.shape[0] + 1, sums.shape[1] + 1), dtype=np.int64)
    padded[1:, 1:] = sums
    sums.setflags(write=False)
    padded.setflags(write=False)
    return IntegralImage(sums=sums, padded=padded)


def box_sum(ii: IntegralImage, x0: int, y0: int, x1: int, y1: int) -> int:
    """Sum of pixels over the inclusive rectangle [x0..x1] x [y0..y1].

    Four table lookups, constant time regardless of rectangle area.
    """
    if not (0 <= x0 <= x1 < ii.width and 0 <= y0 <= y1 < ii.height):
        raise IndexError(
            f"rectangle ({x0},{y0})-({x1},{y1}) out of bounds for "
            f"{ii.width}x{ii.height} image"
        )
    p = ii.padded
    return int(p[y1 + 1, x1 + 1] - p[y0, x1 + 1] - p[y1 + 1, x0] + p[y0, x0])
