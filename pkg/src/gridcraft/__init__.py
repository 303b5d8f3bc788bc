"""Automatic gridding of cDNA microarray images.

The library splits an array scan into its subarrays and each subarray
into one-spot cells using 1-D projection profiles (sum and standard
deviation), their discrete derivatives, range-relative thresholding, and
template matching. A deterministic synthetic generator provides ground
truth for evaluating every method.
"""

from .core import (
    Axis,
    ChannelPolicy,
    IntensityImage,
    Rect,
    crop,
    invert,
    load_image,
    save_image,
)
from .errors import (
    AxisMismatch,
    BadWindow,
    CorruptData,
    DegenerateExtent,
    DimensionMismatch,
    FlatProfile,
    GeometricDistortion,
    GridcraftError,
    InvalidMethod,
    MethodMismatch,
    NoStructure,
    OutOfBounds,
    SpecInvalid,
    TemplateTooLarge,
    TooFewCuts,
    TooShort,
    UnsupportedFormat,
)
from .extraction import (
    GridScore,
    SpotCell,
    count_spots,
    extract_all_cells,
    extract_cells,
    score_documents,
    score_grid,
    spot_count_histogram,
    write_cells_csv,
    write_crops,
)
from .gridding import (
    CellGrid,
    GridLines,
    Method,
    MethodKind,
    Scope,
    Template,
    TemplateMatchResult,
    derivative_minima_cuts,
    estimate_period,
    gap_middle_cuts,
    grid_axis,
    grid_image,
    grid_pipeline,
    grid_subarray,
    render_template,
    template_match,
)
from .profiles import (
    Profile1D,
    ProfileKind,
    binarize,
    derivative,
    export_profile_csv,
    mean_profile,
    smooth,
    stddev_profile,
    sum_profile,
)
from .synth import GroundTruth, SyntheticSpec, fig3_like_spec, generate

__version__ = "0.1.0"
