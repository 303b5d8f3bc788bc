"""Deterministic synthetic microarray generator with exact ground truth.

Real scans of the kind this library targets are not redistributable, so
accuracy is measured against generated arrays whose geometry is known by
construction: a meta-grid of subarrays, each a lattice of Gaussian spots
with per-spot random amplitude, optional dropouts (spots left at zero
amplitude but still occupying a lattice position), and additive Gaussian
noise clamped at zero.

Randomness comes from a counter-based SplitMix64 stream so that the same
spec byte-for-byte reproduces the same image in any implementation:

* ``draw(i) = mix64(seed + (i + 1) * 0x9E3779B97F4A7C15)`` with the usual
  SplitMix64 finalizer (xor-shift 30 / mul 0xBF58476D1CE4E5B9 /
  xor-shift 27 / mul 0x94D049BB133111EB / xor-shift 31), all modulo 2^64;
* uniforms take the top 53 bits: ``u(i) = draw(i) >> 11) * 2^-53``;
* counters 0..n_spots-1 feed spot amplitudes (lo + u * (hi - lo), spots in
  row-major meta-then-spot order), counters n_spots..2*n_spots-1 feed the
  dropout test (u < dropout_rate), and counters from 2*n_spots feed noise
  as Box-Muller pairs: z0 = sqrt(-2 ln u1) cos(2 pi u2) for even pixels,
  the matching sine term for odd pixels, row-major.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .core import Axis, IntensityImage, Rect
from .errors import SpecInvalid
from .gridding import CellGrid, GridLines
from .keyval import parse_keyvals

__all__ = [
    "GroundTruth",
    "SyntheticSpec",
    "fig3_like_spec",
    "generate",
]

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_U53 = float(2.0 ** -53)


def _splitmix64(counters: np.ndarray) -> np.ndarray:
    z = counters * np.uint64(1)  # copy, stays uint64
    z ^= z >> np.uint64(30)
    z *= _MIX1
    z ^= z >> np.uint64(27)
    z *= _MIX2
    z ^= z >> np.uint64(31)
    return z


def _uniforms(seed: int, start: int, count: int) -> np.ndarray:
    """count uniforms in [0, 1) for counters start .. start+count-1."""
    idx = np.arange(start + 1, start + count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        states = np.uint64(seed & 0xFFFFFFFFFFFFFFFF) + idx * _GOLDEN
        bits = _splitmix64(states)
    return (bits >> np.uint64(11)).astype(np.float64) * _U53


def _gaussians(seed: int, start: int, count: int) -> np.ndarray:
    """count standard normals from Box-Muller pairs at counters >= start."""
    pairs = (count + 1) // 2
    u = _uniforms(seed, start, 2 * pairs)
    u1 = np.maximum(u[0::2], _U53)  # keep log finite
    u2 = u[1::2]
    r = np.sqrt(-2.0 * np.log(u1))
    z = np.empty(2 * pairs)
    z[0::2] = r * np.cos(2.0 * np.pi * u2)
    z[1::2] = r * np.sin(2.0 * np.pi * u2)
    return z[:count]


@dataclass(frozen=True)
class SyntheticSpec:
    """Declarative description of a synthetic array.

    ``pitch`` and ``subarray_gap`` must be even so that every true cut and
    every spot center lands on an integer pixel coordinate.
    """

    meta_rows: int
    meta_cols: int
    spots_rows: int
    spots_cols: int
    pitch: int
    spot_sigma: float
    subarray_gap: int
    background_level: float
    spot_amplitude_range: tuple[float, float]
    noise_sigma: float
    dropout_rate: float
    seed: int
    spot_shape: str = "gaussian"  # or "disc" for hard-edged worst cases

    def __post_init__(self) -> None:
        ints = (self.meta_rows, self.meta_cols, self.spots_rows, self.spots_cols)
        if any(int(v) != v or v < 1 for v in ints):
            raise SpecInvalid("grid dimensions must be positive integers")
        if self.pitch < 2 or self.pitch % 2:
            raise SpecInvalid("pitch must be an even integer >= 2")
        if self.subarray_gap < 2 or self.subarray_gap % 2:
            raise SpecInvalid("subarray_gap must be an even integer >= 2")
        if self.spot_sigma <= 0:
            raise SpecInvalid("spot_sigma must be positive")
        lo, hi = self.spot_amplitude_range
        if lo < 0 or hi < lo:
            raise SpecInvalid("amplitude range must satisfy 0 <= lo <= hi")
        if self.noise_sigma < 0 or self.background_level < 0:
            raise SpecInvalid("noise_sigma and background_level must be >= 0")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise SpecInvalid("dropout_rate must lie in [0, 1)")
        if self.spot_shape not in ("gaussian", "disc"):
            raise SpecInvalid(f"unknown spot_shape {self.spot_shape!r}")
        if self.pitch <= 4 * self.spot_sigma:
            warnings.warn("pitch <= 4*spot_sigma: neighboring spots will blur together",
                          stacklevel=2)

    # -- derived geometry -------------------------------------------------
    @property
    def cell_width(self) -> int:
        return self.spots_cols * self.pitch + self.subarray_gap

    @property
    def cell_height(self) -> int:
        return self.spots_rows * self.pitch + self.subarray_gap

    @property
    def width(self) -> int:
        return self.meta_cols * self.cell_width

    @property
    def height(self) -> int:
        return self.meta_rows * self.cell_height

    @property
    def n_spots(self) -> int:
        return self.meta_rows * self.meta_cols * self.spots_rows * self.spots_cols

    # -- serialization -----------------------------------------------------
    def to_text(self) -> str:
        lo, hi = self.spot_amplitude_range
        pairs = [
            ("meta_rows", self.meta_rows), ("meta_cols", self.meta_cols),
            ("spots_rows", self.spots_rows), ("spots_cols", self.spots_cols),
            ("pitch", self.pitch), ("spot_sigma", self.spot_sigma),
            ("subarray_gap", self.subarray_gap),
            ("background_level", self.background_level),
            ("amplitude_lo", lo), ("amplitude_hi", hi),
            ("noise_sigma", self.noise_sigma), ("dropout_rate", self.dropout_rate),
            ("seed", self.seed), ("spot_shape", self.spot_shape),
        ]
        return "".join(f"{k}={v}\n" for k, v in pairs)

    @classmethod
    def from_text(cls, text: str) -> "SyntheticSpec":
        try:
            fields = parse_keyvals(text)
            return cls(
                meta_rows=int(fields["meta_rows"]),
                meta_cols=int(fields["meta_cols"]),
                spots_rows=int(fields["spots_rows"]),
                spots_cols=int(fields["spots_cols"]),
                pitch=int(fields["pitch"]),
                spot_sigma=float(fields["spot_sigma"]),
                subarray_gap=int(fields["subarray_gap"]),
                background_level=float(fields["background_level"]),
                spot_amplitude_range=(float(fields["amplitude_lo"]),
                                      float(fields["amplitude_hi"])),
                noise_sigma=float(fields["noise_sigma"]),
                dropout_rate=float(fields["dropout_rate"]),
                seed=int(fields["seed"]),
                spot_shape=fields.get("spot_shape", "gaussian"),
            )
        except (KeyError, ValueError) as exc:
            if isinstance(exc, SpecInvalid):
                raise
            raise SpecInvalid(f"bad synthetic spec: {exc}") from exc


@dataclass(frozen=True)
class GroundTruth:
    """Exact geometry of a generated array.

    Spot cut lines are stored once, local to a subarray crop; the lattice
    is identical in every subarray. ``spot_centers`` rows are (x, y,
    amplitude) with amplitude 0 marking dropouts.
    """

    spec: SyntheticSpec
    subarray_grid: CellGrid
    spot_grid_local: CellGrid
    spot_centers: np.ndarray

    def subarray_rect(self, row: int, col: int) -> Rect:
        return self.subarray_grid.cell(row, col)

    def centers_in_cell(self, rect: Rect) -> np.ndarray:
        c = self.spot_centers
        inside = (
            (c[:, 0] >= rect.x0) & (c[:, 0] < rect.x1)
            & (c[:, 1] >= rect.y0) & (c[:, 1] < rect.y1)
        )
        return c[inside]


def _truth_for(spec: SyntheticSpec, amplitudes: np.ndarray) -> GroundTruth:
    sub_cols = GridLines(Axis.COLUMNS, tuple(
        c * spec.cell_width for c in range(spec.meta_cols + 1)))
    sub_rows = GridLines(Axis.ROWS, tuple(
        r * spec.cell_height for r in range(spec.meta_rows + 1)))
    half_gap = spec.subarray_gap // 2
    local_cols = GridLines(Axis.COLUMNS, (0, *(
        half_gap + k * spec.pitch for k in range(1, spec.spots_cols)), spec.cell_width))
    local_rows = GridLines(Axis.ROWS, (0, *(
        half_gap + k * spec.pitch for k in range(1, spec.spots_rows)), spec.cell_height))

    centers = np.empty((spec.n_spots, 3))
    i = 0
    for mr in range(spec.meta_rows):
        for mc in range(spec.meta_cols):
            oy = mr * spec.cell_height + half_gap
            ox = mc * spec.cell_width + half_gap
            for r in range(spec.spots_rows):
                cy = oy + r * spec.pitch + spec.pitch // 2
                for c in range(spec.spots_cols):
                    cx = ox + c * spec.pitch + spec.pitch // 2
                    centers[i] = (cx, cy, amplitudes[i])
                    i += 1
    return GroundTruth(
        spec=spec,
        subarray_grid=CellGrid(sub_cols, sub_rows),
        spot_grid_local=CellGrid(local_cols, local_rows),
        spot_centers=centers,
    )


def generate(spec: SyntheticSpec) -> tuple[IntensityImage, GroundTruth]:
    """Render the array described by ``spec``; a pure function of the spec."""
    n = spec.n_spots
    lo, hi = spec.spot_amplitude_range
    amplitudes = lo + _uniforms(spec.seed, 0, n) * (hi - lo)
    dropped = _uniforms(spec.seed, n, n) < spec.dropout_rate
    amplitudes[dropped] = 0.0

    truth = _truth_for(spec, amplitudes)
    height, width = spec.height, spec.width
    img = np.full((height, width), float(spec.background_level))

    sigma = spec.spot_sigma
    reach = int(np.ceil(4 * sigma))
    for cx, cy, amp in truth.spot_centers:
        if amp == 0.0:
            continue
        x0 = max(int(cx) - reach, 0)
        x1 = min(int(cx) + reach + 1, width)
        y0 = max(int(cy) - reach, 0)
        y1 = min(int(cy) + reach + 1, height)
        dx = np.arange(x0, x1) - cx
        dy = np.arange(y0, y1) - cy
        if spec.spot_shape == "gaussian":
            patch = np.exp(-(dy[:, None] ** 2 + dx[None, :] ** 2) / (2 * sigma * sigma))
        else:
            patch = ((dy[:, None] ** 2 + dx[None, :] ** 2) <= (2 * sigma) ** 2).astype(float)
        img[y0:y1, x0:x1] += amp * patch

    if spec.noise_sigma > 0:
        noise = _gaussians(spec.seed, 2 * n, height * width)
        img += spec.noise_sigma * noise.reshape(height, width)
        np.maximum(img, 0.0, out=img)

    return IntensityImage(img), truth


def fig3_like_spec(seed: int = 20260810) -> SyntheticSpec:
    """Canonical 4x4-subarray array with 24x16 spots per subarray.

    Matches the published example's counts (16 subarrays, 6,144 spots);
    pitch, spot size, brightness spread, and noise level are this
    project's own choices since the original scan parameters are unknown.
    """
    return SyntheticSpec(
        meta_rows=4,
        meta_cols=4,
        spots_rows=24,
        spots_cols=16,
        pitch=12,
        spot_sigma=2.5,
        subarray_gap=18,
        background_level=200.0,
        spot_amplitude_range=(2800.0, 9000.0),
        noise_sigma=400.0,
        dropout_rate=0.1,
        seed=seed,
    )
