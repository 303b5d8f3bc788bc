"""Turning profiles into cut positions and cut positions into cell grids.

Two families of methods share the pipeline. Threshold methods binarize a
sum or standard-deviation profile against a caller-supplied fraction of
its range and cut at the middle of each gap of zeros. Derivative methods
need no threshold from the caller: they difference the profile and cut at
the local minima, where the first difference swings from negative to
non-negative with positive curvature.

Whole images are first split into subarrays, then each subarray into
one-spot cells, with the same profile machinery at both levels. Subarray
boundaries are told apart from spot gaps purely by gap width: the low
stretches of the profile between subarrays are far wider than the dips
between adjacent spots.
"""

from __future__ import annotations

import enum
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from .core import Axis, IntensityImage, Rect, crop
from .keyval import parse_keyvals
from .errors import (
    FlatProfile,
    GeometricDistortion,
    InvalidMethod,
    MethodMismatch,
    NoStructure,
    TemplateTooLarge,
    TooFewCuts,
    TooShort,
)
from .profiles import (
    Profile1D,
    ProfileKind,
    binarize,
    smooth,
    stddev_profile,
    sum_profile,
)

__all__ = [
    "CellGrid",
    "GridLines",
    "Method",
    "MethodKind",
    "Scope",
    "Template",
    "TemplateMatchResult",
    "derivative_minima_cuts",
    "estimate_period",
    "gap_middle_cuts",
    "grid_axis",
    "grid_image",
    "grid_pipeline",
    "grid_subarray",
    "render_template",
    "template_match",
]


@dataclass(frozen=True)
class GridLines:
    """Ordered cut positions along one axis, borders included.

    ``cuts`` always starts at 0 and ends at the image extent; everything in
    between is an interior boundary.
    """

    axis: Axis
    cuts: tuple[int, ...]

    def __post_init__(self) -> None:
        cuts = tuple(int(c) for c in self.cuts)
        if len(cuts) < 2 or cuts[0] != 0:
            raise ValueError("cuts must start at 0 and contain the extent")
        if any(b <= a for a, b in zip(cuts, cuts[1:])):
            raise ValueError(f"cuts must be strictly increasing, got {cuts}")
        object.__setattr__(self, "cuts", cuts)

    @property
    def extent(self) -> int:
        return self.cuts[-1]

    @property
    def interior(self) -> tuple[int, ...]:
        return self.cuts[1:-1]

    @property
    def n_intervals(self) -> int:
        return len(self.cuts) - 1


@dataclass(frozen=True)
class CellGrid:
    """Cartesian product of column and row cut lines: addressable cells."""

    col_lines: GridLines
    row_lines: GridLines

    def __post_init__(self) -> None:
        if self.col_lines.axis is not Axis.COLUMNS or self.row_lines.axis is not Axis.ROWS:
            raise ValueError("CellGrid needs a COLUMNS line set and a ROWS line set")

    @property
    def n_rows(self) -> int:
        return self.row_lines.n_intervals

    @property
    def n_cols(self) -> int:
        return self.col_lines.n_intervals

    @property
    def n_cells(self) -> int:
        return self.n_rows * self.n_cols

    def cell(self, row: int, col: int) -> Rect:
        cc = self.col_lines.cuts
        rc = self.row_lines.cuts
        return Rect(cc[col], rc[row], cc[col + 1], rc[row + 1])

    def cells(self) -> list[Rect]:
        """All cells in row-major order."""
        return [self.cell(r, c) for r in range(self.n_rows) for c in range(self.n_cols)]


@dataclass(frozen=True)
class Template:
    """Ideal subarray geometry used by the matching method."""

    n_rows: int
    n_cols: int
    pitch_x: float
    pitch_y: float
    spot_radius: float
    margin: float = 0.0

    def __post_init__(self) -> None:
        if self.n_rows < 1 or self.n_cols < 1:
            raise ValueError("template needs at least one spot row and column")
        if self.pitch_x <= 0 or self.pitch_y <= 0 or self.spot_radius <= 0 or self.margin < 0:
            raise ValueError("template dimensions must be positive (margin may be 0)")
        if min(self.pitch_x, self.pitch_y) <= 2 * self.spot_radius:
            warnings.warn("template spots wider than their pitch will overlap", stacklevel=2)

    def to_text(self) -> str:
        lines = [f"{k}={getattr(self, k)}" for k in (
            "n_rows", "n_cols", "pitch_x", "pitch_y", "spot_radius", "margin")]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Template":
        fields = parse_keyvals(text)
        try:
            return cls(
                n_rows=int(fields.pop("n_rows")),
                n_cols=int(fields.pop("n_cols")),
                pitch_x=float(fields.pop("pitch_x")),
                pitch_y=float(fields.pop("pitch_y")),
                spot_radius=float(fields.pop("spot_radius")),
                margin=float(fields.pop("margin", 0.0)),
            )
        except KeyError as exc:
            raise ValueError(f"template spec missing key {exc}") from exc


class MethodKind(enum.Enum):
    TEMPLATE_MATCH = "template"
    SUM_THRESHOLD = "sum"
    STDDEV_THRESHOLD = "stddev"
    SUM_DERIVATIVE = "sum-deriv"
    STDDEV_DERIVATIVE = "stddev-deriv"


_THRESHOLD_KINDS = (MethodKind.SUM_THRESHOLD, MethodKind.STDDEV_THRESHOLD)
_DERIVATIVE_KINDS = (MethodKind.SUM_DERIVATIVE, MethodKind.STDDEV_DERIVATIVE)


@dataclass(frozen=True)
class Method:
    """A gridding method plus its (sometimes mandatory) threshold.

    Threshold methods must carry ``threshold_fraction``; derivative methods
    must not, which makes "no threshold required" part of the type rather
    than a runtime convention.
    """

    kind: MethodKind
    threshold_fraction: float | None = None

    def __post_init__(self) -> None:
        if self.kind in _THRESHOLD_KINDS:
            if self.threshold_fraction is None:
                raise InvalidMethod(f"{self.kind.value} requires a threshold fraction")
            if not 0.0 < self.threshold_fraction < 1.0:
                raise InvalidMethod("threshold fraction must lie strictly in (0, 1)")
        elif self.threshold_fraction is not None:
            raise InvalidMethod(f"{self.kind.value} does not take a threshold")


class Scope(enum.Enum):
    """What an axis pass is looking for: spot gaps or subarray gaps."""

    SPOTS = "spots"
    SUBARRAYS = "subarrays"


# Fraction of the profile's dynamic range below which samples count as
# "low" for the internal masks (subarray-gap detection, minima screening).
# Fixed midrange rule; never exposed to callers.
_MIDRANGE = 0.5


def _zero_runs(values: np.ndarray) -> list[tuple[int, int]]:
    """Maximal runs of zeros as (start, end) inclusive index pairs."""
    runs: list[tuple[int, int]] = []
    start = None
    for i, v in enumerate(values):
        if v == 0 and start is None:
            start = i
        elif v != 0 and start is not None:
            runs.append((start, i - 1))
            start = None
    if start is not None:
        runs.append((start, values.size - 1))
    return runs


def gap_middle_cuts(b: Profile1D, extent: int) -> GridLines:
    """Cut at the floor midpoint of every interior run of zeros.

    Runs touching either border are absorbed into the border cuts; an
    all-ones profile yields just the borders.
    """
    if b.kind is not ProfileKind.BINARY:
        raise ValueError("gap_middle_cuts needs a binary profile")
    if len(b) != extent or b.origin_offset != 0:
        raise ValueError("binary profile must span the full axis extent")
    cuts = [0, extent]
    for start, end in _zero_runs(b.values):
        if start == 0 or end == extent - 1:
            continue
        cuts.append((start + end) // 2)
    return GridLines(b.axis, tuple(sorted(set(cuts))))


def _raw_minima(values: np.ndarray) -> list[int]:
    """Indices of local minima: d1 swings negative -> positive, plateaus
    of zeros collapse to their floor center."""
    d1 = np.diff(values)
    n = d1.size
    minima: list[int] = []
    i = 0
    while i < n:
        if d1[i] < 0:
            j = i + 1
            while j < n and d1[j] == 0:
                j += 1
            if j < n and d1[j] > 0:
                minima.append((i + 1 + j) // 2)
            i = max(j, i + 1)
        else:
            i += 1
    return minima


def _dominant_period(values: np.ndarray) -> float | None:
    """Lattice period of a profile from its autocorrelation peak.

    Looks for the first positive autocorrelation maximum past the central
    lobe; returns None when the profile is too short or shows no
    periodicity. Noise barely moves this estimate because every sample
    contributes to every lag.
    """
    n = values.size
    if n < 8:
        return None
    x = values - values.mean()
    size = 1 << (2 * n - 1).bit_length()
    spectrum = np.fft.rfft(x, size)
    r = np.fft.irfft(spectrum * np.conj(spectrum), size)[:n]
    positive = np.flatnonzero(r <= 0)
    if positive.size == 0:
        return None
    k0 = int(positive[0])
    hi = n // 2 + 1
    if k0 >= hi:
        return None
    k = k0 + int(np.argmax(r[k0:hi]))
    if r[k] <= 0:
        return None
    return float(k)


def _refine_minimum(d1: np.ndarray, m: int, half: int) -> int:
    """Sharpen a V-minimum to the zero crossing of the first difference.

    A least-squares line through d1 on a window around the crossing uses
    the steep valley walls instead of the flat bottom, which localizes far
    better under noise and reproduces the exact center of symmetric
    valleys. Plateau minima keep their floor-center position unchanged.
    """
    if not (m >= 1 and d1[m - 1] < 0 and m < d1.size and d1[m] > 0):
        return m  # plateau center or border case: leave as detected
    lo = max(m - half, 0)
    hi = min(m + half, d1.size)  # d1 indices [lo, hi)
    seg = d1[lo:hi]
    pos = np.arange(lo, hi) + 0.5  # d1[i] sits between samples i and i+1
    slope, intercept = np.polyfit(pos, seg, 1)
    if slope <= 0:
        return m
    crossing = -intercept / slope
    if not (pos[0] <= crossing <= pos[-1]):
        return m
    return int(np.floor(crossing + 0.5))


def derivative_minima_cuts(p: Profile1D, extent: int) -> GridLines:
    """Cut at every significant local minimum of a sum/stddev profile.

    Detection is threshold-free from the caller's point of view; three
    range- and spacing-relative rules keep it usable on noisy data:

    * minima whose profile value lies in the upper half of the range are
      discarded (noise dimples on spot peaks are not gaps);
    * minima closer to a border than the median minima spacing are
      absorbed into that border (margins cannot hold a full cell);
    * surviving minima closer together than half the median spacing merge,
      keeping the lowest, and each kept V-minimum is re-localized at the
      first difference's zero crossing.
    """
    if p.kind not in (ProfileKind.SUM, ProfileKind.STDDEV):
        raise ValueError(f"derivative cuts expect a sum or stddev profile, got {p.kind.value}")
    if len(p) < 3:
        raise TooShort("need at least 3 samples to locate an interior minimum")
    if p.origin_offset != 0 or len(p) != extent:
        raise ValueError("profile must span the full axis extent")

    values = p.values
    d1 = np.diff(values)
    candidates = _raw_minima(values)

    lo = values.min()
    hi = values.max()
    midrange = lo + _MIDRANGE * (hi - lo)
    candidates = [c for c in candidates if values[c] <= midrange]

    refine_half = 1
    if len(candidates) >= 2:
        spacing = _dominant_period(values)
        if spacing is None:
            spacing = float(np.median(np.diff(candidates)))
        refine_half = max(1, int(round(spacing / 4)))
        candidates = [c for c in candidates if c >= spacing and extent - c >= spacing]
        merged: list[int] = []
        cluster: list[int] = []
        for c in candidates:
            if cluster and c - cluster[-1] < spacing / 2:
                cluster.append(c)
            else:
                if cluster:
                    merged.append(min(cluster, key=lambda k: (values[k], k)))
                cluster = [c]
        if cluster:
            merged.append(min(cluster, key=lambda k: (values[k], k)))
        candidates = merged

    refined: list[int] = []
    for c in candidates:
        r = _refine_minimum(d1, c, refine_half)
        if 0 < r < extent and (not refined or r > refined[-1]):
            refined.append(r)
    candidates = refined

    if not candidates:
        raise NoStructure("no interior minima found")
    return GridLines(p.axis, (0, *candidates, extent))


def estimate_period(g: GridLines) -> float:
    """Median spacing of consecutive interior cuts: the spot pitch."""
    interior = g.interior
    if len(interior) < 2:
        raise TooFewCuts("period needs at least two interior cuts")
    return float(np.median(np.diff(interior)))


def _base_profile(img: IntensityImage, axis: Axis, method: Method) -> Profile1D:
    if method.kind in (MethodKind.SUM_THRESHOLD, MethodKind.SUM_DERIVATIVE):
        return sum_profile(img, axis)
    return stddev_profile(img, axis)


def _wide_gap_cuts(mask: Profile1D, extent: int) -> GridLines:
    """Subarray boundaries: midpoints of interior low runs that are wider
    than twice the median run width (spot-scale gaps set the median)."""
    runs = [(s, e) for s, e in _zero_runs(mask.values) if s > 0 and e < extent - 1]
    cuts = [0, extent]
    if runs:
        widths = np.array([e - s + 1 for s, e in runs], dtype=np.float64)
        limit = 2.0 * float(np.median(widths))
        cuts += [(s + e) // 2 for (s, e), w in zip(runs, widths) if w > limit]
    return GridLines(mask.axis, tuple(sorted(set(cuts))))


def grid_axis(
    img: IntensityImage,
    axis: Axis,
    method: Method,
    smooth_window: int = 1,
    scope: Scope = Scope.SPOTS,
) -> GridLines:
    """One axis pass of a profile-based method.

    SPOTS scope cuts at every gap (the per-subarray pass); SUBARRAYS scope
    keeps only gaps wide enough to separate subarrays. Template matching is
    a whole-grid operation and is rejected here.
    """
    if method.kind is MethodKind.TEMPLATE_MATCH:
        raise MethodMismatch("template matching does not grid single axes")
    extent = img.extent(axis)
    base = _base_profile(img, axis, method)
    if method.kind in _DERIVATIVE_KINDS and smooth_window > 1:
        base = smooth(base, smooth_window)

    if scope is Scope.SUBARRAYS:
        if method.kind in _THRESHOLD_KINDS:
            mask = binarize(base, method.threshold_fraction)
        else:
            try:
                mask = binarize(base, _MIDRANGE)
            except FlatProfile as exc:
                raise NoStructure(str(exc)) from exc
        return _wide_gap_cuts(mask, extent)

    if method.kind in _THRESHOLD_KINDS:
        return gap_middle_cuts(binarize(base, method.threshold_fraction), extent)
    return derivative_minima_cuts(base, extent)


def grid_image(img: IntensityImage, method: Method, smooth_window: int = 1) -> CellGrid:
    """Split a whole image into its subarrays."""
    return CellGrid(
        col_lines=grid_axis(img, Axis.COLUMNS, method, smooth_window, Scope.SUBARRAYS),
        row_lines=grid_axis(img, Axis.ROWS, method, smooth_window, Scope.SUBARRAYS),
    )


def grid_subarray(sub: IntensityImage, method: Method, smooth_window: int = 1) -> CellGrid:
    """Split one subarray crop into one-spot cells."""
    return CellGrid(
        col_lines=grid_axis(sub, Axis.COLUMNS, method, smooth_window, Scope.SPOTS),
        row_lines=grid_axis(sub, Axis.ROWS, method, smooth_window, Scope.SPOTS),
    )


def grid_pipeline(
    img: IntensityImage,
    method: Method,
    smooth_window: int = 1,
    jobs: int = 1,
    sub_grid: CellGrid | None = None,
) -> tuple[CellGrid, list[list[CellGrid]]]:
    """Full two-level gridding: image -> subarrays -> spot cells.

    Returns the subarray grid and, per subarray in row-major order, the
    spot grid local to that subarray's crop. Results do not depend on
    ``jobs``; it only sizes the worker pool. A precomputed subarray grid
    may be passed to skip the first level.
    """
    if method.kind is MethodKind.TEMPLATE_MATCH:
        raise MethodMismatch("template matching uses template_match(), not the profile pipeline")
    if sub_grid is None:
        sub_grid = grid_image(img, method, smooth_window)
    rects = sub_grid.cells()

    def _one(rect: Rect) -> CellGrid:
        return grid_subarray(crop(img, rect), method, smooth_window)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            flat = list(pool.map(_one, rects))
    else:
        flat = [_one(rect) for rect in rects]
    ncols = sub_grid.n_cols
    spots = [flat[r * ncols:(r + 1) * ncols] for r in range(sub_grid.n_rows)]
    return sub_grid, spots


def render_template(t: Template) -> IntensityImage:
    """Render the ideal noiseless subarray described by a template.

    Unit-amplitude Gaussian discs (sigma = spot_radius / 2) sit at pitch
    spacing inside the margin, on a zero background.
    """
    width = int(round(2 * t.margin + t.n_cols * t.pitch_x))
    height = int(round(2 * t.margin + t.n_rows * t.pitch_y))
    sigma = t.spot_radius / 2.0
    ys = np.arange(height, dtype=np.float64)
    xs = np.arange(width, dtype=np.float64)
    img = np.zeros((height, width))
    for r in range(t.n_rows):
        cy = t.margin + (r + 0.5) * t.pitch_y
        gy = np.exp(-((ys - cy) ** 2) / (2 * sigma * sigma))
        for c in range(t.n_cols):
            cx = t.margin + (c + 0.5) * t.pitch_x
            gx = np.exp(-((xs - cx) ** 2) / (2 * sigma * sigma))
            img += np.outer(gy, gx)
    return IntensityImage(img)


@dataclass(frozen=True)
class TemplateMatchResult:
    offset: tuple[int, int]  # (dx, dy) of the template's top-left corner
    score: float             # zero-normalized cross-correlation in [-1, 1]
    grid: CellGrid


def _zncc_map(image: np.ndarray, tpl: np.ndarray) -> np.ndarray:
    """Zero-normalized cross-correlation of tpl against every window."""
    tz = tpl - tpl.mean()
    t_ss = float((tz * tz).sum())
    num = fftconvolve(image, tz[::-1, ::-1], mode="valid")

    # Exact windowed sums via integral images (no FFT roundoff in the norm).
    pad = np.pad(image, ((1, 0), (1, 0)))
    ii = pad.cumsum(axis=0).cumsum(axis=1)
    pad2 = np.pad(image * image, ((1, 0), (1, 0)))
    ii2 = pad2.cumsum(axis=0).cumsum(axis=1)
    th, tw = tpl.shape
    win_s = ii[th:, tw:] - ii[:-th, tw:] - ii[th:, :-tw] + ii[:-th, :-tw]
    win_ss = ii2[th:, tw:] - ii2[:-th, tw:] - ii2[th:, :-tw] + ii2[:-th, :-tw]
    win_var = np.maximum(win_ss - win_s * win_s / (th * tw), 0.0)

    denom = np.sqrt(win_var * t_ss)
    scores = np.zeros_like(num)
    ok = denom > 1e-12 * max(t_ss, 1.0)
    scores[ok] = num[ok] / denom[ok]
    return np.clip(scores, -1.0, 1.0)


def template_match(
    img: IntensityImage,
    t: Template,
    min_score: float = 0.5,
) -> TemplateMatchResult:
    """Exhaustive translation search of the rendered template over the image.

    Returns the best integer offset, its correlation score, and the cell
    grid obtained by laying the template's pitch lattice at that offset.
    Scores below ``min_score`` raise GeometricDistortion: translation-only
    search cannot fit scaled or sheared lattices.
    """
    tpl = render_template(t)
    if tpl.width > img.width or tpl.height > img.height:
        raise TemplateTooLarge(
            f"template {tpl.width}x{tpl.height} exceeds image {img.width}x{img.height}"
        )
    scores = _zncc_map(img.pixels, tpl.pixels)
    best = int(np.argmax(scores))
    dy, dx = np.unravel_index(best, scores.shape)
    score = float(scores[dy, dx])
    offset = (int(dx), int(dy))
    if score < min_score:
        raise GeometricDistortion(
            f"best correlation {score:.3f} below cutoff {min_score:.3f}", score, offset
        )

    def _lattice(origin: int, pitch: float, count: int, extent: int, axis: Axis) -> GridLines:
        cuts = {0, extent}
        for k in range(count + 1):
            pos = int(round(origin + t.margin + k * pitch))
            if 0 < pos < extent:
                cuts.add(pos)
        return GridLines(axis, tuple(sorted(cuts)))

    grid = CellGrid(
        col_lines=_lattice(dx, t.pitch_x, t.n_cols, img.width, Axis.COLUMNS),
        row_lines=_lattice(dy, t.pitch_y, t.n_rows, img.height, Axis.ROWS),
    )
    return TemplateMatchResult(offset=offset, score=score, grid=grid)
