"""gaborlens: oriented-bandpass analysis of 2D convolution kernels.

Numerically verifies that complex exponentials are eigenfunctions of
circular convolution and that windowing shifts a kernel's frequency
response to its center frequency, then fits the windowed-cosine
pointspread model to convolutional kernel slices and reports per-layer
residual statistics, calibration curves, and kernel/fit renderings.
"""
from .coremath import (
    GaborParams,
    axis_coords,
    circular_convolve2,
    complex_exponential,
    dft2,
    eigenfunction_residual,
    embed_kernel,
    gabor_kernel,
    gaussian_window,
    grid_coords,
    idft2,
    mtf,
    wft_kernel,
    wft_shift_residual,
)
from .fitting import (
    FitNumericalError,
    FitResult,
    canonicalize,
    fit_kernel,
    init_candidates,
    normalize_kernel,
    objective_rms,
    refine,
)
from .ingestion import (
    ArchiveError,
    ArchiveParseError,
    KernelSlice,
    TensorArchive,
    TruncatedPayloadError,
    UnsupportedDtypeError,
    extract_conv_slices,
    load_archive,
    write_archive,
)
from .render import (
    render_boxplot_svg,
    render_curve_svg,
    render_histogram_svg,
    render_kernel_image,
)
from .report import CSV_COLUMNS, emit_report, report_document
from .stats import (
    CalibrationPoint,
    HistogramResult,
    LayerSummary,
    calibration_curve,
    histogram,
    layer_summary,
    log_spaced_edges,
    percentile,
)

__version__ = "0.1.0"

__all__ = [
    "GaborParams",
    "axis_coords",
    "grid_coords",
    "gaussian_window",
    "gabor_kernel",
    "dft2",
    "idft2",
    "circular_convolve2",
    "embed_kernel",
    "complex_exponential",
    "mtf",
    "eigenfunction_residual",
    "wft_kernel",
    "wft_shift_residual",
    "FitNumericalError",
    "FitResult",
    "normalize_kernel",
    "objective_rms",
    "init_candidates",
    "refine",
    "canonicalize",
    "fit_kernel",
    "ArchiveError",
    "ArchiveParseError",
    "UnsupportedDtypeError",
    "TruncatedPayloadError",
    "TensorArchive",
    "KernelSlice",
    "load_archive",
    "write_archive",
    "extract_conv_slices",
    "LayerSummary",
    "CalibrationPoint",
    "HistogramResult",
    "percentile",
    "layer_summary",
    "histogram",
    "log_spaced_edges",
    "calibration_curve",
    "render_kernel_image",
    "render_boxplot_svg",
    "render_histogram_svg",
    "render_curve_svg",
    "CSV_COLUMNS",
    "report_document",
    "emit_report",
    "__version__",
]
