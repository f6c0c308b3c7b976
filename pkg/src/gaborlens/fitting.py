"""Least-squares fitting of the oriented-bandpass pointspread model to 2D
kernel slices.

The model has five free parameters (amplitude, phase, center frequency
(u1, u2), window sigma); kernels are normalized to unit peak magnitude
before fitting so residuals are comparable across layers. Minimization is
a damped Gauss-Newton descent with an analytic Jacobian, restarted from
several spectral and fixed-orientation initializations; the lowest final
objective wins, ties going to the earlier start.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .coremath import GaborParams, gabor_kernel, gaussian_window, grid_coords, mtf

__all__ = [
    "FLAT_EPS",
    "SIGMA_MIN",
    "SIGMA_MAX_FACTOR",
    "FitNumericalError",
    "FitResult",
    "normalize_kernel",
    "objective_rms",
    "model_and_jacobian",
    "init_candidates",
    "refine",
    "canonicalize",
    "fit_kernel",
]

FLAT_EPS = 1e-8
SIGMA_MIN = 0.25
SIGMA_MAX_FACTOR = 8.0

MAX_ITERATIONS = 200
STEP_TOL = 1e-10
RELATIVE_DECREASE_TOL = 1e-12


class FitNumericalError(RuntimeError):
    """Objective became non-finite during refinement."""


@dataclass(frozen=True)
class FitResult:
    """Outcome of fitting one kernel slice (on the normalized scale)."""

    params: GaborParams
    rms: float
    degenerate: bool
    iterations: int
    init_rank: int


def normalize_kernel(raw) -> tuple[np.ndarray, float, bool]:
    """Scale a square kernel to unit peak magnitude.

    Returns (normalized, scale, degenerate). Kernels whose peak magnitude
    is below FLAT_EPS are returned unscaled with scale 0 and flagged
    degenerate.
    """
    raw = np.asarray(raw, dtype=float)
    if raw.ndim != 2 or raw.shape[0] != raw.shape[1]:
        raise ValueError(f"kernel must be square, got shape {raw.shape}")
    peak = float(np.max(np.abs(raw))) if raw.size else 0.0
    if peak > FLAT_EPS:
        return raw / peak, peak, False
    return raw.copy(), 0.0, True


def objective_rms(kernel, params: GaborParams) -> float:
    """Root-mean-square pointwise deviation between a kernel and the model."""
    kernel = np.asarray(kernel, dtype=float)
    if kernel.ndim != 2 or kernel.shape[0] != kernel.shape[1]:
        raise ValueError(f"kernel must be square, got shape {kernel.shape}")
    model = gabor_kernel(kernel.shape[0], params)
    return float(np.sqrt(np.mean((kernel - model) ** 2)))


def model_and_jacobian(theta, x1, x2):
    """Model values and analytic partials w.r.t. (A, phase, u1, u2, sigma).

    ``theta`` is the raw parameter vector; ``x1``/``x2`` are flattened
    coordinate arrays.
    """
    a, phi, u1, u2, sigma = theta
    r2 = x1 * x1 + x2 * x2
    env = np.exp(-r2 / (sigma * sigma))
    arg = u1 * x1 + u2 * x2 + phi
    cos_a = np.cos(arg)
    sin_a = np.sin(arg)
    model = a * env * cos_a
    d_phi = -a * env * sin_a
    jac = np.stack(
        [env * cos_a, d_phi, d_phi * x1, d_phi * x2, model * (2.0 * r2 / sigma**3)],
        axis=1,
    )
    return model, jac


def _sigma_bounds(k: int) -> tuple[float, float]:
    return SIGMA_MIN, SIGMA_MAX_FACTOR * k


def _project_quadratures(kernel, x1, x2, u1, u2, sigma):
    """Closed-form least-squares amplitude/phase for fixed (u, sigma)."""
    env = np.exp(-(x1 * x1 + x2 * x2) / (sigma * sigma))
    arg = u1 * x1 + u2 * x2
    c1 = env * np.cos(arg)
    c2 = -env * np.sin(arg)
    g11 = float(c1 @ c1)
    g12 = float(c1 @ c2)
    g22 = float(c2 @ c2)
    r1 = float(kernel @ c1)
    r2 = float(kernel @ c2)
    det = g11 * g22 - g12 * g12
    if det > 1e-12 * max(g11 * g22, 1e-300):
        alpha = (g22 * r1 - g12 * r2) / det
        beta = (g11 * r2 - g12 * r1) / det
    else:
        alpha = r1 / g11 if g11 > 0 else 0.0
        beta = 0.0
    return math.hypot(alpha, beta), math.atan2(beta, alpha)


def init_candidates(kernel) -> list[GaborParams]:
    """Initialization ladder for the multi-start fit of a normalized kernel.

    Top-3 spectral peaks in the canonical half-plane of a 4k-point
    frequency response, a broad DC start, and four fixed-orientation
    fallbacks at |u| = pi/2; always at least 8 entries.
    """
    kernel = np.asarray(kernel, dtype=float)
    k = kernel.shape[0]
    n = 4 * k
    lo, hi = _sigma_bounds(k)
    sigma0 = min(max(k / 2.0, lo), hi)
    x1g, x2g = grid_coords(k)
    x1 = x1g.ravel()
    x2 = x2g.ravel()
    flat = kernel.ravel()
    window_mass = float(np.sum(gaussian_window((x1g, x2g), sigma0)))

    spectrum = mtf(kernel, n)
    m = np.arange(n)
    canonical = np.where(m <= n // 2, m, m - n)
    u1g = 2.0 * np.pi * canonical[None, :] / n
    u2g = 2.0 * np.pi * canonical[:, None] / n
    half_plane = (u2g > 0) | ((u2g == 0) & (u1g >= 0))
    magnitude = np.abs(spectrum)

    indices = np.flatnonzero(half_plane.ravel())
    order = np.lexsort((indices, -magnitude.ravel()[indices]))
    candidates: list[GaborParams] = []
    for flat_index in indices[order[:3]].tolist():
        m2i, m1i = divmod(flat_index, n)
        coeff = spectrum[m2i, m1i]
        u1 = float(u1g[0, m1i])
        u2 = float(u2g[m2i, 0])
        if m1i == 0 and m2i == 0:
            amp = abs(coeff) / window_mass
            phase = 0.0 if coeff.real >= 0 else math.pi
        else:
            amp = 2.0 * abs(coeff) / window_mass
            phase = math.atan2(coeff.imag, coeff.real)
        candidates.append(GaborParams(amp, phase, u1, u2, sigma0))

    sigma_dc = min(float(k), hi)
    env_dc = gaussian_window((x1g, x2g), sigma_dc).ravel()
    amp_dc = float(flat @ env_dc) / float(env_dc @ env_dc)
    candidates.append(GaborParams(amp_dc, 0.0, 0.0, 0.0, sigma_dc))

    for angle in (0.0, math.pi / 4, math.pi / 2, 3 * math.pi / 4):
        u1 = (math.pi / 2) * math.cos(angle)
        u2 = (math.pi / 2) * math.sin(angle)
        amp, phase = _project_quadratures(flat, x1, x2, u1, u2, sigma0)
        candidates.append(GaborParams(amp, phase, u1, u2, sigma0))
    return candidates


def refine(kernel, start: GaborParams) -> tuple[GaborParams, int]:
    """Damped Gauss-Newton descent from one start; monotone in the objective.

    Terminates on step norm < 1e-10, relative objective decrease < 1e-12,
    or 200 accepted iterations. Sigma is clamped to the search bounds at
    every trial point. Raises FitNumericalError if the objective is
    non-finite at the current iterate.
    """
    kernel = np.asarray(kernel, dtype=float)
    k = kernel.shape[0]
    lo, hi = _sigma_bounds(k)
    x1g, x2g = grid_coords(k)
    x1 = x1g.ravel()
    x2 = x2g.ravel()
    data = kernel.ravel()

    theta = np.array(
        [start.amplitude, start.phase, start.u1, start.u2, min(max(start.sigma, lo), hi)]
    )
    model, jac = model_and_jacobian(theta, x1, x2)
    residual = model - data
    cost = float(residual @ residual)
    if not math.isfinite(cost):
        raise FitNumericalError(f"non-finite objective at start {start}")

    lam = 1e-3
    iterations = 0
    for _ in range(MAX_ITERATIONS):
        jtj = jac.T @ jac
        jtr = jac.T @ residual
        diag = np.maximum(np.diag(jtj), 1e-12)
        accepted = False
        for _ in range(30):
            try:
                step = np.linalg.solve(jtj + lam * np.diag(diag), -jtr)
            except np.linalg.LinAlgError:
                lam = min(lam * 10.0, 1e12)
                continue
            if float(np.linalg.norm(step)) < STEP_TOL:
                return _params_from(theta), iterations
            trial = theta + step
            trial[4] = min(max(trial[4], lo), hi)
            model_t, jac_t = model_and_jacobian(trial, x1, x2)
            residual_t = model_t - data
            cost_t = float(residual_t @ residual_t)
            if math.isfinite(cost_t) and cost_t < cost:
                theta, jac, residual = trial, jac_t, residual_t
                previous, cost = cost, cost_t
                iterations += 1
                lam = max(lam / 3.0, 1e-12)
                accepted = True
                break
            lam = min(lam * 10.0, 1e12)
        if not accepted:
            break
        rms_prev = math.sqrt(previous / data.size)
        rms_now = math.sqrt(cost / data.size)
        if rms_prev - rms_now < RELATIVE_DECREASE_TOL * max(rms_prev, 1e-300):
            break
    return _params_from(theta), iterations


def _params_from(theta) -> GaborParams:
    return GaborParams(float(theta[0]), float(theta[1]), float(theta[2]), float(theta[3]), float(theta[4]))


def _wrap_angle(t: float) -> float:
    """Wrap into (-pi, pi]."""
    w = math.remainder(t, 2.0 * math.pi)
    if w <= -math.pi:
        w += 2.0 * math.pi
    return w


def canonicalize(params: GaborParams, grid_side: int | None = None) -> GaborParams:
    """Resolve the model's parameter ambiguities deterministically.

    Amplitude made nonnegative (phase shifted by pi), frequency components
    wrapped into (-pi, pi] when the grid has integer coordinates (odd side;
    the 2*pi wrap is only an exact aliasing there), frequency flipped into
    the closed upper half-plane with the phase negated, phase wrapped into
    (-pi, pi], and at zero frequency the phase sign fixed nonnegative.
    """
    a, phi, u1, u2, sigma = params.amplitude, params.phase, params.u1, params.u2, params.sigma
    if a < 0:
        a, phi = -a, phi + math.pi
    if grid_side is None or grid_side % 2 == 1:
        u1 = _wrap_angle(u1)
        u2 = _wrap_angle(u2)
    if u2 < 0 or (u2 == 0 and u1 < 0):
        u1, u2, phi = -u1, -u2, -phi
    phi = _wrap_angle(phi)
    if u1 == 0 and u2 == 0:
        phi = abs(phi)
    return GaborParams(a, phi, u1, u2, sigma)


def fit_kernel(raw) -> FitResult:
    """Normalize a kernel slice and fit the model from every initialization.

    Degenerate inputs (peak magnitude below FLAT_EPS, or 1x1 slices) skip
    fitting and report the residual of the zero model. Deterministic for a
    given input.
    """
    normalized, _, degenerate = normalize_kernel(raw)
    k = normalized.shape[0]
    if degenerate or k == 1:
        params = GaborParams(0.0, 0.0, 0.0, 0.0, 1.0)
        return FitResult(params, objective_rms(normalized, params), True, 0, 0)

    best_params: GaborParams | None = None
    best_rms = math.inf
    best_iterations = 0
    best_rank = 0
    for rank, start in enumerate(init_candidates(normalized)):
        try:
            refined, iterations = refine(normalized, start)
        except FitNumericalError:
            continue
        rms = objective_rms(normalized, refined)
        if rms < best_rms:
            best_params, best_rms = refined, rms
            best_iterations, best_rank = iterations, rank
    assert best_params is not None  # finite starts cannot all fail
    params = canonicalize(best_params, grid_side=k)
    return FitResult(params, objective_rms(normalized, params), False, best_iterations, best_rank)
