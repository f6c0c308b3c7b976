"""Command-line pipeline: theory verification, synthetic kernel generation,
batch fitting of archived conv weights, and noise calibration.

Exit codes: 0 success, 1 runtime/data failure, 2 usage error. All
subcommands are deterministic given their flags and seed; `--jobs` never
changes any emitted byte (results are reordered by slice provenance
before writing).
"""
from __future__ import annotations

import argparse
import math
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import coremath
from .coremath import (
    GaborParams,
    eigenfunction_residual,
    gabor_kernel,
    gaussian_window,
    grid_coords,
    wft_shift_residual,
)
from .fitting import FitResult, fit_kernel
from .ingestion import ArchiveError, KernelSlice, extract_conv_slices, load_archive, write_archive
from .render import (
    render_boxplot_svg,
    render_curve_svg,
    render_histogram_svg,
    render_kernel_image,
)
from .report import emit_report
from .stats import calibration_curve, histogram, layer_summary, log_spaced_edges

RESIDUAL_TOLERANCE = 1e-9
DEFAULT_NOISE_FRACTIONS = tuple(i / 100.0 for i in range(21))


@dataclass
class RunConfig:
    """Parsed invocation; `out` is created on demand."""

    subcommand: str
    input: Path | None = None
    out: Path = Path("out")
    select: str = "*"
    seed: int = 0
    bins: int = 50
    noise_fractions: tuple[float, ...] = field(default_factory=lambda: DEFAULT_NOISE_FRACTIONS)
    trials: int = 500
    parallelism: int = 1

    def outdir(self) -> Path:
        self.out.mkdir(parents=True, exist_ok=True)
        return self.out


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _noise_list(text: str) -> tuple[float, ...]:
    return tuple(float(part) for part in text.split(",") if part.strip() != "")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gaborlens",
        description="Oriented-bandpass analysis of 2D convolution kernels.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    verify = sub.add_parser("verify-theory", help="check the spectral identities numerically")
    verify.add_argument("--seed", type=int, default=0)
    verify.add_argument("--kernels", type=_positive_int, default=20, help="random kernels per grid size")
    verify.add_argument("--break-convolution", action="store_true", help=argparse.SUPPRESS)

    synth = sub.add_parser("synth", help="write a synthetic oriented-bandpass kernel")
    synth.add_argument("--out", type=Path, default=Path("out"))
    synth.add_argument("--k", type=_positive_int, default=15)
    synth.add_argument("--sigma", type=float, default=2.5)
    synth.add_argument("--u1", type=float, default=math.pi / 3)
    synth.add_argument("--u2", type=float, default=0.0)
    synth.add_argument("--phase", type=float, default=0.0)
    synth.add_argument("--amplitude", type=float, default=1.0)
    synth.add_argument("--seed", type=int, default=0)

    fit = sub.add_parser("fit", help="fit every conv kernel slice of an archive")
    fit.add_argument("--input", type=Path, required=True)
    fit.add_argument("--out", type=Path, default=Path("out"))
    fit.add_argument("--select", default="*", help="glob over tensor names")
    fit.add_argument("--bins", type=_positive_int, default=50)
    fit.add_argument("--jobs", type=_positive_int, default=1)
    fit.add_argument("--seed", type=int, default=0)

    calibrate = sub.add_parser("calibrate", help="RMS versus corruption of a synthetic kernel")
    calibrate.add_argument("--out", type=Path, default=Path("out"))
    calibrate.add_argument("--k", type=_positive_int, default=11)
    calibrate.add_argument("--noise", type=_noise_list, default=DEFAULT_NOISE_FRACTIONS)
    calibrate.add_argument("--trials", type=_positive_int, default=500)
    calibrate.add_argument("--seed", type=int, default=0)
    return parser


def cmd_verify_theory(config: RunConfig, kernel_count: int, break_convolution: bool = False) -> int:
    if not break_convolution:
        return _run_verify(config, kernel_count)
    # test hook: force a failing identity, restoring the honest operator after
    honest = coremath.circular_convolve2
    coremath.circular_convolve2 = lambda f, h: honest(f, h) + 1e-3
    try:
        return _run_verify(config, kernel_count)
    finally:
        coremath.circular_convolve2 = honest


def _run_verify(config: RunConfig, kernel_count: int) -> int:
    rng = np.random.default_rng(config.seed)
    failures = []
    for n in (8, 16, 32):
        worst_eigen = 0.0
        for index in range(kernel_count):
            k = (1, 3, 5)[index % 3]
            kernel = rng.standard_normal((k, k))
            for m1 in range(n):
                for m2 in range(n):
                    worst_eigen = max(worst_eigen, eigenfunction_residual(kernel, (m1, m2), n))
        ok = worst_eigen < RESIDUAL_TOLERANCE
        print(f"eigenfunction N={n:>2} kernels={kernel_count} frequencies={n * n} "
              f"max_residual={worst_eigen:.3e} {'PASS' if ok else 'FAIL'}")
        if not ok:
            failures.append(f"eigenfunction at N={n}: {worst_eigen:.3e}")

        worst_shift = 0.0
        cases = 20
        for _ in range(cases):
            k = int(rng.choice([s for s in (1, 3, 5, 7, 9) if s <= n]))
            sigma = float(rng.uniform(0.5, 3.0))
            window = gaussian_window(grid_coords(k), sigma)
            b1, b2 = (int(v) for v in rng.integers(0, n, size=2))
            u = (2.0 * math.pi * b1 / n, 2.0 * math.pi * b2 / n)
            worst_shift = max(worst_shift, wft_shift_residual(window, u, n))
        ok = worst_shift < RESIDUAL_TOLERANCE
        print(f"wft-shift     N={n:>2} cases={cases} max_residual={worst_shift:.3e} "
              f"{'PASS' if ok else 'FAIL'}")
        if not ok:
            failures.append(f"wft-shift at N={n}: {worst_shift:.3e}")

    if failures:
        print(f"verify-theory: FAIL ({'; '.join(failures)})")
        return 1
    print(f"verify-theory: PASS (all residuals < {RESIDUAL_TOLERANCE:.0e})")
    return 0


def cmd_synth(config: RunConfig, k: int, params: GaborParams) -> int:
    out = config.outdir()
    kernel = gabor_kernel(k, params)
    write_archive(
        out / "synth.tensors",
        {"synth.kernel": kernel[np.newaxis, np.newaxis, :, :]},
        layer_order=["synth.kernel"],
        model_id="synth",
    )
    (out / "synth.pgm").write_bytes(render_kernel_image(kernel, _render_side(k)))
    print(f"wrote {out / 'synth.tensors'} and {out / 'synth.pgm'}")
    return 0


def _render_side(k: int) -> int:
    return k * max(1, math.ceil(96 / k))


def _safe_name(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "_", name)


def _fit_many(slices: list[KernelSlice], jobs: int) -> list[FitResult]:
    values = [s.values for s in slices]
    if jobs <= 1 or len(slices) < 2:
        return [fit_kernel(v) for v in values]
    chunk = max(1, len(values) // (jobs * 4))
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fit_kernel, values, chunksize=chunk))


def cmd_fit(config: RunConfig) -> int:
    archive = load_archive(config.input)
    slices = extract_conv_slices(archive, config.select)
    model_id = str(archive.metadata.get("model_id", "")) or Path(config.input).stem
    out = config.outdir()

    fits = _fit_many(slices, config.parallelism)
    pairs = list(zip(slices, fits))

    layer_names: list[str] = []
    grouped: dict[str, list[tuple[KernelSlice, FitResult]]] = {}
    for kslice, fit in pairs:
        if kslice.layer_name not in grouped:
            grouped[kslice.layer_name] = []
            layer_names.append(kslice.layer_name)
        grouped[kslice.layer_name].append((kslice, fit))

    summaries = [layer_summary([f for _, f in grouped[name]], name) for name in layer_names]
    aggregate = layer_summary(fits, "all")
    edges = log_spaced_edges(config.bins)
    hist = histogram([f.rms for f in fits if not f.degenerate], edges)

    emit_report(model_id, pairs, summaries + [aggregate], hist, "json", out / "report.json")
    emit_report(model_id, pairs, summaries + [aggregate], hist, "csv", out / "report.csv")
    if summaries:
        (out / "boxplot.svg").write_text(render_boxplot_svg(summaries, aggregate), encoding="utf-8")
    (out / "histogram.svg").write_text(
        render_histogram_svg(hist, f"RMS residuals, {model_id}"), encoding="utf-8"
    )

    pair_dir = out / "pairs"
    pair_dir.mkdir(exist_ok=True)
    for name in layer_names:
        chosen = _median_representative(grouped[name])
        if chosen is None:
            continue
        kslice, fit = chosen
        side = _render_side(kslice.values.shape[0])
        stem = _safe_name(name)
        (pair_dir / f"{stem}_learned.pgm").write_bytes(render_kernel_image(kslice.values, side))
        model = gabor_kernel(kslice.values.shape[0], fit.params)
        (pair_dir / f"{stem}_fit.pgm").write_bytes(render_kernel_image(model, side))

    degenerate = sum(1 for f in fits if f.degenerate)
    print(f"fitted {len(fits)} slices across {len(layer_names)} layers "
          f"({degenerate} degenerate); reports in {out}")
    return 0


def _median_representative(layer_pairs):
    """Slice whose rms is the layer's lower-median element, ties by provenance."""
    usable = [(f.rms, ks.layer_index, ks.filter_index, ks.channel_index, ks, f)
              for ks, f in layer_pairs if not f.degenerate]
    if not usable:
        return None
    usable.sort(key=lambda row: row[:4])
    _, _, _, _, kslice, fit = usable[(len(usable) - 1) // 2]
    return kslice, fit


def cmd_calibrate(config: RunConfig, k: int) -> int:
    out = config.outdir()
    truth = GaborParams(amplitude=1.0, phase=0.0, u1=math.pi / 2, u2=0.0, sigma=2.5)
    points = calibration_curve(k, truth, config.noise_fractions, config.trials, config.seed)
    lines = ["noise_fraction,mean_rms,trials"]
    lines += [f"{p.noise_fraction},{p.mean_rms!r},{p.trials}" for p in points]
    (out / "calibration.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    (out / "calibration.svg").write_text(render_curve_svg(points), encoding="utf-8")
    print(f"wrote {out / 'calibration.csv'} and {out / 'calibration.svg'}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)

    config = RunConfig(
        subcommand=ns.subcommand,
        input=getattr(ns, "input", None),
        out=getattr(ns, "out", Path("out")),
        select=getattr(ns, "select", "*"),
        seed=getattr(ns, "seed", 0),
        bins=getattr(ns, "bins", 50),
        noise_fractions=getattr(ns, "noise", DEFAULT_NOISE_FRACTIONS),
        trials=getattr(ns, "trials", 500),
        parallelism=getattr(ns, "jobs", 1),
    )

    try:
        if ns.subcommand == "verify-theory":
            return cmd_verify_theory(config, ns.kernels, ns.break_convolution)
        if ns.subcommand == "synth":
            if ns.sigma <= 0:
                parser.error(f"--sigma must be positive, got {ns.sigma}")
            params = GaborParams(ns.amplitude, ns.phase, ns.u1, ns.u2, ns.sigma)
            return cmd_synth(config, ns.k, params)
        if ns.subcommand == "fit":
            return cmd_fit(config)
        if ns.subcommand == "calibrate":
            try:
                return cmd_calibrate(config, ns.k)
            except ValueError as exc:
                parser.error(str(exc))
    except ArchiveError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    raise AssertionError(f"unhandled subcommand {ns.subcommand}")


if __name__ == "__main__":
    raise SystemExit(main())
