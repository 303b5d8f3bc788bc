"""Grid document (schema v1): the JSON wire format for found and true grids.

Top-level fields, in order: ``schema_version`` (1), ``image`` ({path,
width, height}), ``method`` (descriptor), ``subarray_cols`` and
``subarray_rows`` (cut lists including borders), ``spots`` (2-D array
indexed [subarray_row][subarray_col] of {cols, rows} local cut lists, or
null for subarray-only runs), and ``timing`` (milliseconds per stage,
excluded from determinism comparisons).
"""

from __future__ import annotations

import json
from pathlib import Path

from .core import Axis, IntensityImage
from .gridding import CellGrid, GridLines
from .synth import GroundTruth

SCHEMA_VERSION = 1

__all__ = [
    "SCHEMA_VERSION",
    "build_document",
    "dumps_document",
    "grids_from_document",
    "load_document",
    "truth_document",
    "validate_document",
    "write_centers_csv",
]


def _grid_entry(grid: CellGrid) -> dict:
    return {"cols": list(grid.col_lines.cuts), "rows": list(grid.row_lines.cuts)}


def build_document(
    image_path: str,
    img: IntensityImage,
    method: dict,
    subarray_grid: CellGrid,
    spot_grids: list[list[CellGrid]] | None,
    timing: dict[str, float] | None = None,
) -> dict:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "image": {"path": image_path, "width": img.width, "height": img.height},
        "method": method,
        "subarray_cols": list(subarray_grid.col_lines.cuts),
        "subarray_rows": list(subarray_grid.row_lines.cuts),
        "spots": None if spot_grids is None else [
            [_grid_entry(g) for g in row] for row in spot_grids
        ],
        "timing": timing or {},
    }
    validate_document(doc)
    return doc


def truth_document(truth: GroundTruth, image_path: str = "") -> dict:
    """Ground truth in the same schema, so eval treats both sides alike."""
    spec = truth.spec
    spots = [
        [_grid_entry(truth.spot_grid_local) for _ in range(spec.meta_cols)]
        for _ in range(spec.meta_rows)
    ]
    return {
        "schema_version": SCHEMA_VERSION,
        "image": {"path": image_path, "width": spec.width, "height": spec.height},
        "method": {"name": "ground-truth"},
        "subarray_cols": list(truth.subarray_grid.col_lines.cuts),
        "subarray_rows": list(truth.subarray_grid.row_lines.cuts),
        "spots": spots,
        "timing": {},
    }


def _check_cuts(cuts, extent: int, label: str) -> None:
    if (
        not isinstance(cuts, list)
        or len(cuts) < 2
        or cuts[0] != 0
        or cuts[-1] != extent
        or any(not isinstance(c, int) for c in cuts)
        or any(b <= a for a, b in zip(cuts, cuts[1:]))
    ):
        raise ValueError(f"{label}: not a strictly increasing 0..{extent} cut list")


def validate_document(doc: dict) -> None:
    """Raise ValueError if ``doc`` is not a valid schema-v1 grid document."""
    if not isinstance(doc, dict):
        raise ValueError("grid document must be a JSON object")
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported schema_version {doc.get('schema_version')!r}")
    image = doc.get("image")
    if not isinstance(image, dict) or not {"path", "width", "height"} <= set(image):
        raise ValueError("image must carry path, width, height")
    width, height = image["width"], image["height"]
    _check_cuts(doc.get("subarray_cols"), width, "subarray_cols")
    _check_cuts(doc.get("subarray_rows"), height, "subarray_rows")
    spots = doc.get("spots")
    if spots is None:
        return
    n_rows = len(doc["subarray_rows"]) - 1
    n_cols = len(doc["subarray_cols"]) - 1
    if not isinstance(spots, list) or len(spots) != n_rows or any(
        not isinstance(row, list) or len(row) != n_cols for row in spots
    ):
        raise ValueError("spots must be a [subarray_row][subarray_col] array")
    for r, row in enumerate(spots):
        for c, entry in enumerate(row):
            cw = doc["subarray_cols"][c + 1] - doc["subarray_cols"][c]
            ch = doc["subarray_rows"][r + 1] - doc["subarray_rows"][r]
            if not isinstance(entry, dict):
                raise ValueError(f"spots[{r}][{c}] must be an object")
            _check_cuts(entry.get("cols"), cw, f"spots[{r}][{c}].cols")
            _check_cuts(entry.get("rows"), ch, f"spots[{r}][{c}].rows")


def grids_from_document(doc: dict) -> tuple[CellGrid, list[list[CellGrid]] | None]:
    validate_document(doc)
    sub = CellGrid(
        col_lines=GridLines(Axis.COLUMNS, tuple(doc["subarray_cols"])),
        row_lines=GridLines(Axis.ROWS, tuple(doc["subarray_rows"])),
    )
    if doc["spots"] is None:
        return sub, None
    spots = [
        [
            CellGrid(
                col_lines=GridLines(Axis.COLUMNS, tuple(entry["cols"])),
                row_lines=GridLines(Axis.ROWS, tuple(entry["rows"])),
            )
            for entry in row
        ]
        for row in doc["spots"]
    ]
    return sub, spots


def dumps_document(doc: dict) -> str:
    return json.dumps(doc, indent=2) + "\n"


def load_document(path: str | Path) -> dict:
    with open(Path(path)) as fh:
        doc = json.load(fh)
    validate_document(doc)
    return doc


def write_centers_csv(path: str | Path, truth: GroundTruth) -> None:
    """Spot centers as x,y,amplitude (amplitude 0 marks dropouts)."""
    with open(Path(path), "w", newline="") as fh:
        fh.write("x,y,amplitude\n")
        for x, y, amp in truth.spot_centers:
            fh.write(f"{int(x)},{int(y)},{repr(float(amp))}\n")
