"""1-D projection profiles and the transforms the gridding methods consume.

A profile collapses the image along one axis: summing (or averaging, or
taking the sample standard deviation of) the intensities of every column
gives one value per column index, and symmetrically for rows. Discrete
differencing of such a profile locates the valleys between spots without
any intensity threshold; binarization against a range-relative threshold
is the alternative that does need one.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .core import Axis, IntensityImage
from .errors import BadWindow, DegenerateExtent, FlatProfile, TooShort

__all__ = [
    "Profile1D",
    "ProfileKind",
    "binarize",
    "derivative",
    "export_profile_csv",
    "mean_profile",
    "smooth",
    "stddev_profile",
    "sum_profile",
]


class ProfileKind(enum.Enum):
    SUM = "sum"
    STDDEV = "stddev"
    MEAN = "mean"
    DERIVATIVE = "derivative"
    SECOND_DERIVATIVE = "second_derivative"
    BINARY = "binary"


_DIRECT_KINDS = (ProfileKind.SUM, ProfileKind.STDDEV, ProfileKind.MEAN)


@dataclass(frozen=True, eq=False)
class Profile1D:
    """An ordered sequence of reals derived from one image axis.

    ``origin_offset`` is the source-image coordinate of values[0]. Direct
    profiles start at 0; differencing shortens the sequence but keeps the
    offset, so sample i of a derivative sits between source positions i
    and i+1.
    """

    axis: Axis
    kind: ProfileKind
    values: np.ndarray
    origin_offset: int = 0

    def __post_init__(self) -> None:
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("profile values must be a non-empty 1-D sequence")
        if self.kind is ProfileKind.BINARY and not np.all(np.isin(arr, (0.0, 1.0))):
            raise ValueError("binary profile may only contain 0 and 1")
        if self.kind in (ProfileKind.SUM, ProfileKind.STDDEV) and arr.min() < 0:
            raise ValueError(f"{self.kind.value} profile cannot be negative")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    def __len__(self) -> int:
        return int(self.values.size)


def _aggregate_axis(axis: Axis) -> int:
    # COLUMNS profile aggregates over rows (numpy axis 0), ROWS over columns.
    return 0 if axis is Axis.COLUMNS else 1


def sum_profile(img: IntensityImage, axis: Axis) -> Profile1D:
    """Sum of intensities along the aggregated axis, one value per index."""
    values = img.pixels.sum(axis=_aggregate_axis(axis))
    return Profile1D(axis, ProfileKind.SUM, values)


def mean_profile(img: IntensityImage, axis: Axis) -> Profile1D:
    """Mean intensity along the aggregated axis."""
    values = img.pixels.mean(axis=_aggregate_axis(axis))
    return Profile1D(axis, ProfileKind.MEAN, values)


def stddev_profile(img: IntensityImage, axis: Axis) -> Profile1D:
    """Sample standard deviation (n-1 denominator) along the aggregated axis."""
    agg = _aggregate_axis(axis)
    if img.pixels.shape[agg] < 2:
        raise DegenerateExtent(
            f"stddev over {img.pixels.shape[agg]} sample(s); need at least 2"
        )
    values = img.pixels.std(axis=agg, ddof=1)
    return Profile1D(axis, ProfileKind.STDDEV, values)


def derivative(p: Profile1D) -> Profile1D:
    """First difference: out[i] = p[i+1] - p[i], one sample shorter."""
    if p.kind is ProfileKind.BINARY:
        raise ValueError("differencing a binary profile is meaningless")
    if len(p) < 2:
        raise TooShort("derivative needs at least 2 samples")
    if p.kind is ProfileKind.DERIVATIVE or p.kind is ProfileKind.SECOND_DERIVATIVE:
        kind = ProfileKind.SECOND_DERIVATIVE
    else:
        kind = ProfileKind.DERIVATIVE
    return Profile1D(p.axis, kind, np.diff(p.values), origin_offset=p.origin_offset)


def smooth(p: Profile1D, window: int) -> Profile1D:
    """Centered moving average; edge samples average their truncated window."""
    n = len(p)
    if window < 1 or window % 2 == 0 or window > n:
        raise BadWindow(f"window must be odd, positive, and <= {n}; got {window}")
    if window == 1:
        return p
    half = window // 2
    csum = np.concatenate(([0.0], np.cumsum(p.values)))
    idx = np.arange(n)
    lo = np.maximum(idx - half, 0)
    hi = np.minimum(idx + half + 1, n)
    values = (csum[hi] - csum[lo]) / (hi - lo)
    return replace(p, values=values)


def binarize(p: Profile1D, threshold_fraction: float) -> Profile1D:
    """Threshold at min + fraction * (max - min); samples at/above become 1.

    The threshold is relative to the profile's own dynamic range, so the
    result is invariant under any increasing affine rescale of the data.
    """
    if p.kind not in _DIRECT_KINDS:
        raise ValueError(f"cannot binarize a {p.kind.value} profile")
    if not 0.0 < threshold_fraction < 1.0:
        raise ValueError("threshold_fraction must lie strictly between 0 and 1")
    lo = p.values.min()
    hi = p.values.max()
    if hi == lo:
        raise FlatProfile("profile has no dynamic range to threshold")
    cut = lo + threshold_fraction * (hi - lo)
    values = (p.values >= cut).astype(np.float64)
    return Profile1D(p.axis, ProfileKind.BINARY, values, origin_offset=p.origin_offset)


def export_profile_csv(p: Profile1D, path: str | Path) -> None:
    """Write the profile as two-column CSV (index, value)."""
    with open(Path(path), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "value"])
        for i, v in enumerate(p.values, start=p.origin_offset):
            writer.writerow([i, repr(float(v))])
