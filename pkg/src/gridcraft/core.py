"""Grayscale image representation, raster decode/encode, and geometry types.

Intensities are kept as non-negative float64 in the source file's linear
units; nothing is rescaled to [0, 1], so bit-depth mistakes stay visible
downstream. Coordinates are x = column, y = row, origin at the top left.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import CorruptData, OutOfBounds, UnsupportedFormat

__all__ = [
    "Axis",
    "ChannelPolicy",
    "IntensityImage",
    "Rect",
    "crop",
    "invert",
    "load_image",
    "save_image",
]


class Axis(enum.Enum):
    """Profile direction: one value per column, or one value per row."""

    COLUMNS = "columns"  # aggregate over rows -> one value per column index
    ROWS = "rows"        # aggregate over columns -> one value per row index


class ChannelPolicy(enum.Enum):
    """How an RGB raster is reduced to a single intensity channel."""

    GRAY = "gray"            # input must already be single-channel
    RED = "red"
    GREEN = "green"
    LUMINANCE = "luminance"  # 0.2126 R + 0.7152 G + 0.0722 B on linear values


@dataclass(frozen=True)
class Rect:
    """Half-open pixel rectangle: x in [x0, x1), y in [y0, y1)."""

    x0: int
    y0: int
    x1: int
    y1: int

    def __post_init__(self) -> None:
        if not (0 <= self.x0 < self.x1 and 0 <= self.y0 < self.y1):
            raise ValueError(f"degenerate rectangle {self!r}")

    @property
    def width(self) -> int:
        return self.x1 - self.x0

    @property
    def height(self) -> int:
        return self.y1 - self.y0

    @property
    def area(self) -> int:
        return self.width * self.height


@dataclass(frozen=True, eq=False)
class IntensityImage:
    """Immutable rectangular grid of non-negative intensities.

    ``pixels`` is a read-only float64 array of shape (height, width),
    row-major. ``bit_depth_hint`` records the source file's sample size
    (8 or 16) and is informational only.
    """

    pixels: np.ndarray
    bit_depth_hint: int = 16

    def __post_init__(self) -> None:
        arr = np.asarray(self.pixels, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"image must be 2-D and non-empty, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)) or arr.min() < 0:
            raise ValueError("intensities must be finite and non-negative")
        if self.bit_depth_hint not in (8, 16):
            raise ValueError("bit_depth_hint must be 8 or 16")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "pixels", arr)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    def extent(self, axis: Axis) -> int:
        return self.width if axis is Axis.COLUMNS else self.height

    def full_rect(self) -> Rect:
        return Rect(0, 0, self.width, self.height)


def load_image(path: str | Path, channel_policy: ChannelPolicy = ChannelPolicy.LUMINANCE) -> IntensityImage:
    """Decode an 8/16-bit grayscale or 8-bit RGB PNG/TIFF into an image.

    RGB rasters are reduced per ``channel_policy``; grayscale rasters ignore
    the policy except GRAY, which additionally rejects RGB input. Values are
    taken as linear; no gamma transform is applied.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(str(path))
    try:
        with Image.open(path) as im:
            if getattr(im, "n_frames", 1) > 1:
                raise UnsupportedFormat(f"{path}: multi-page rasters are not supported")
            mode = im.mode
            if mode in ("L", "I;16", "I;16B", "I;16L", "I"):
                arr = np.asarray(im)
                bit_depth = 8 if mode == "L" else 16
                if arr.dtype == np.int32:  # Pillow widens some 16-bit TIFFs to 'I'
                    if arr.min() < 0 or arr.max() > 65535:
                        raise UnsupportedFormat(f"{path}: sample range exceeds 16 bits")
                data = arr.astype(np.float64)
            elif mode == "RGB":
                if channel_policy is ChannelPolicy.GRAY:
                    raise UnsupportedFormat(
                        f"{path}: RGB input needs channel policy red/green/luminance"
                    )
                rgb = np.asarray(im).astype(np.float64)
                if channel_policy is ChannelPolicy.RED:
                    data = rgb[:, :, 0]
                elif channel_policy is ChannelPolicy.GREEN:
                    data = rgb[:, :, 1]
                else:
                    data = 0.2126 * rgb[:, :, 0] + 0.7152 * rgb[:, :, 1] + 0.0722 * rgb[:, :, 2]
                bit_depth = 8
            else:
                raise UnsupportedFormat(f"{path}: unsupported raster mode {mode!r}")
            return IntensityImage(data, bit_depth_hint=bit_depth)
    except UnidentifiedImageError as exc:
        raise UnsupportedFormat(f"{path}: not a decodable raster") from exc
    except (OSError, SyntaxError, ValueError) as exc:
        if isinstance(exc, (UnsupportedFormat, CorruptData)):
            raise
        raise CorruptData(f"{path}: {exc}") from exc


def save_image(img: IntensityImage, path: str | Path, bit_depth: int = 16) -> None:
    """Write an image as an 8- or 16-bit grayscale PNG.

    Intensities are rounded and clamped to the target range; callers keep
    values inside it when a lossless round trip matters.
    """
    if bit_depth not in (8, 16):
        raise ValueError("bit_depth must be 8 or 16")
    limit = 255 if bit_depth == 8 else 65535
    data = np.clip(np.rint(img.pixels), 0, limit)
    if bit_depth == 8:
        pil = Image.fromarray(data.astype(np.uint8), mode="L")
    else:
        pil = Image.fromarray(data.astype("<u2"), mode="I;16")
    pil.save(Path(path), format="PNG")


def crop(img: IntensityImage, r: Rect) -> IntensityImage:
    """Return the sub-image covered by ``r``; the source is untouched."""
    if r.x1 > img.width or r.y1 > img.height:
        raise OutOfBounds(f"{r!r} exceeds {img.width}x{img.height} image")
    return IntensityImage(img.pixels[r.y0:r.y1, r.x0:r.x1], bit_depth_hint=img.bit_depth_hint)


def invert(img: IntensityImage) -> IntensityImage:
    """Flip dark-spot scans: every intensity becomes (max - value)."""
    return IntensityImage(img.pixels.max() - img.pixels, bit_depth_hint=img.bit_depth_hint)
