"""Materializing grids into spot cells and scoring grids against truth.

The spot counter here is an evaluation oracle, not a segmentation
product: pixels at or above the cell's range midpoint form the
foreground, 8-connected components of at least 4 px count as spots.
That is deliberately simple and is only used to judge gridding quality
(a correctly gridded cell holds exactly one spot).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .core import IntensityImage, Rect, crop, save_image
from .errors import AxisMismatch, DimensionMismatch
from .gridding import CellGrid, GridLines

__all__ = [
    "GridScore",
    "SpotCell",
    "count_spots",
    "extract_all_cells",
    "extract_cells",
    "score_documents",
    "score_grid",
    "spot_count_histogram",
    "write_cells_csv",
    "write_crops",
]

_EIGHT_CONNECTED = np.ones((3, 3), dtype=int)
_MIN_SPOT_AREA = 4


@dataclass(frozen=True)
class SpotCell:
    """One grid cell: which subarray it belongs to, and where."""

    subarray_index: tuple[int, int]  # (row, col) of the parent subarray
    cell_index: tuple[int, int]      # (row, col) within that subarray
    bounds: Rect                     # pixel bounds, image coordinates


@dataclass(frozen=True)
class GridScore:
    """How well a found cut set matches the true one."""

    matched_cuts: int
    missed_cuts: int
    spurious_cuts: int
    mean_abs_offset: float
    max_abs_offset: float


def extract_cells(
    img: IntensityImage,
    g: CellGrid,
    subarray_index: tuple[int, int] = (0, 0),
) -> list[SpotCell]:
    """All cells of a grid over ``img``, row-major."""
    if g.col_lines.extent != img.width or g.row_lines.extent != img.height:
        raise DimensionMismatch(
            f"grid {g.col_lines.extent}x{g.row_lines.extent} vs image {img.width}x{img.height}"
        )
    return [
        SpotCell(subarray_index=subarray_index, cell_index=(r, c), bounds=g.cell(r, c))
        for r in range(g.n_rows)
        for c in range(g.n_cols)
    ]


def extract_all_cells(
    img: IntensityImage,
    subarray_grid: CellGrid,
    spot_grids: list[list[CellGrid]],
) -> list[SpotCell]:
    """Two-level extraction: every spot cell of every subarray, with bounds
    translated into whole-image coordinates."""
    if subarray_grid.col_lines.extent != img.width or subarray_grid.row_lines.extent != img.height:
        raise DimensionMismatch("subarray grid does not span the image")
    cells: list[SpotCell] = []
    for sr in range(subarray_grid.n_rows):
        for sc in range(subarray_grid.n_cols):
            rect = subarray_grid.cell(sr, sc)
            local = spot_grids[sr][sc]
            if local.col_lines.extent != rect.width or local.row_lines.extent != rect.height:
                raise DimensionMismatch(f"spot grid of subarray ({sr}, {sc}) does not span its crop")
            for cell in extract_cells(crop(img, rect), local, subarray_index=(sr, sc)):
                b = cell.bounds
                cells.append(SpotCell(
                    subarray_index=(sr, sc),
                    cell_index=cell.cell_index,
                    bounds=Rect(b.x0 + rect.x0, b.y0 + rect.y0, b.x1 + rect.x0, b.y1 + rect.y0),
                ))
    return cells


def count_spots(cell_img: IntensityImage) -> int:
    """Number of 8-connected foreground blobs of >= 4 px in one cell.

    Foreground is everything at or above the cell's range midpoint; a flat
    cell has no foreground.
    """
    px = cell_img.pixels
    lo = px.min()
    hi = px.max()
    if hi == lo:
        return 0
    mask = px >= lo + 0.5 * (hi - lo)
    labels, n = ndimage.label(mask, structure=_EIGHT_CONNECTED)
    if n == 0:
        return 0
    areas = np.bincount(labels.ravel())[1:]
    return int(np.count_nonzero(areas >= _MIN_SPOT_AREA))


def score_grid(found: GridLines, truth: GridLines, tol: float) -> GridScore:
    """Greedy nearest-first one-to-one matching of interior cuts.

    Cut pairs are accepted closest-first while both sides are unmatched and
    their distance is within ``tol``. Unmatched true cuts are missed,
    unmatched found cuts are spurious.
    """
    if found.axis is not truth.axis:
        raise AxisMismatch(f"{found.axis} vs {truth.axis}")
    if found.extent != truth.extent:
        raise AxisMismatch(f"extents differ: {found.extent} vs {truth.extent}")
    f = found.interior
    t = truth.interior
    pairs = sorted(
        (abs(fv - tv), ti, fi)
        for fi, fv in enumerate(f)
        for ti, tv in enumerate(t)
        if abs(fv - tv) <= tol
    )
    used_f: set[int] = set()
    used_t: set[int] = set()
    offsets: list[float] = []
    for dist, ti, fi in pairs:
        if fi in used_f or ti in used_t:
            continue
        used_f.add(fi)
        used_t.add(ti)
        offsets.append(float(dist))
    matched = len(offsets)
    return GridScore(
        matched_cuts=matched,
        missed_cuts=len(t) - matched,
        spurious_cuts=len(f) - matched,
        mean_abs_offset=float(np.mean(offsets)) if offsets else 0.0,
        max_abs_offset=float(np.max(offsets)) if offsets else 0.0,
    )


def _score_dict(s: GridScore) -> dict:
    return {
        "matched_cuts": s.matched_cuts,
        "missed_cuts": s.missed_cuts,
        "spurious_cuts": s.spurious_cuts,
        "mean_abs_offset": s.mean_abs_offset,
        "max_abs_offset": s.max_abs_offset,
    }


def _aggregate(scores: list[GridScore]) -> GridScore:
    matched = sum(s.matched_cuts for s in scores)
    total_offset = sum(s.mean_abs_offset * s.matched_cuts for s in scores)
    return GridScore(
        matched_cuts=matched,
        missed_cuts=sum(s.missed_cuts for s in scores),
        spurious_cuts=sum(s.spurious_cuts for s in scores),
        mean_abs_offset=total_offset / matched if matched else 0.0,
        max_abs_offset=max((s.max_abs_offset for s in scores), default=0.0),
    )


def _globalized(local: GridLines, origin: int, image_extent: int) -> GridLines:
    """One subarray's interior spot cuts, mapped into image coordinates."""
    cuts = {0, image_extent}
    cuts.update(origin + c for c in local.interior)
    return GridLines(local.axis, tuple(sorted(cuts)))


def score_documents(found: dict, truth: dict, tol: float) -> dict:
    """Compare two grid documents: per-axis subarray scores, and spot-cut
    scores aggregated over subarrays (matched up by subarray index)."""
    from .documents import grids_from_document  # local import avoids a cycle

    f_sub, f_spots = grids_from_document(found)
    t_sub, t_spots = grids_from_document(truth)
    report: dict = {
        "tolerance_px": tol,
        "subarrays": {
            "cols": _score_dict(score_grid(f_sub.col_lines, t_sub.col_lines, tol)),
            "rows": _score_dict(score_grid(f_sub.row_lines, t_sub.row_lines, tol)),
        },
        "spots": None,
    }
    if f_spots is None or t_spots is None:
        return report
    if (f_sub.n_rows, f_sub.n_cols) != (t_sub.n_rows, t_sub.n_cols):
        report["spots"] = {"skipped": "subarray grid shapes differ"}
        return report

    width = found["image"]["width"]
    height = found["image"]["height"]
    col_scores: list[GridScore] = []
    row_scores: list[GridScore] = []
    for sr in range(t_sub.n_rows):
        for sc in range(t_sub.n_cols):
            f_rect = f_sub.cell(sr, sc)
            t_rect = t_sub.cell(sr, sc)
            col_scores.append(score_grid(
                _globalized(f_spots[sr][sc].col_lines, f_rect.x0, width),
                _globalized(t_spots[sr][sc].col_lines, t_rect.x0, width),
                tol,
            ))
            row_scores.append(score_grid(
                _globalized(f_spots[sr][sc].row_lines, f_rect.y0, height),
                _globalized(t_spots[sr][sc].row_lines, t_rect.y0, height),
                tol,
            ))
    report["spots"] = {
        "cols": _score_dict(_aggregate(col_scores)),
        "rows": _score_dict(_aggregate(row_scores)),
    }
    return report


def spot_count_histogram(img: IntensityImage, cells: list[SpotCell]) -> dict[int, int]:
    """Distribution of per-cell spot counts over ``cells``."""
    hist: dict[int, int] = {}
    for cell in cells:
        n = count_spots(crop(img, cell.bounds))
        hist[n] = hist.get(n, 0) + 1
    return hist


def write_cells_csv(path: str | Path, img: IntensityImage, cells: list[SpotCell]) -> None:
    """Cells table: indices, bounds, and the per-cell spot count."""
    with open(Path(path), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([
            "subarray_row", "subarray_col", "cell_row", "cell_col",
            "x0", "y0", "x1", "y1", "spot_count",
        ])
        for cell in cells:
            b = cell.bounds
            n = count_spots(crop(img, b))
            writer.writerow([
                cell.subarray_index[0], cell.subarray_index[1],
                cell.cell_index[0], cell.cell_index[1],
                b.x0, b.y0, b.x1, b.y1, n,
            ])


def write_crops(directory: str | Path, img: IntensityImage, cells: list[SpotCell]) -> None:
    """Write each cell as sub{R}_{C}/spot{r}_{c}.png (16-bit grayscale)."""
    root = Path(directory)
    for cell in cells:
        sub_dir = root / f"sub{cell.subarray_index[0]}_{cell.subarray_index[1]}"
        sub_dir.mkdir(parents=True, exist_ok=True)
        out = sub_dir / f"spot{cell.cell_index[0]}_{cell.cell_index[1]}.png"
        save_image(crop(img, cell.bounds), out, bit_depth=16)
