"""Grids, windows, Gabor synthesis, DFT, circular convolution, and the
spectral identities they satisfy on periodic grids.

Conventions used throughout the package:

* a field is a 2D ndarray indexed ``[row, col]``;
* coordinate and frequency pairs are ``(first, second)`` where the first
  component runs along columns and the second along rows: the sample at
  index ``[i, j]`` of a k-sided kernel sits at ``(x1, x2) = (c[j], c[i])``
  for the centered axis ``c = arange(k) - (k - 1) / 2``;
* spectra are indexed ``[m2, m1]``: bin ``(m1, m2)`` of an N-point grid
  holds the frequency ``u = 2*pi*(m1, m2)/N`` in radians per sample.

Kernel spectra (`mtf`) are evaluated on the centered coordinates directly,
so phases are relative to the kernel midpoint and the shift identity for
windowed exponentials is exact at bin-aligned center frequencies.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

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
]


@dataclass(frozen=True)
class GaborParams:
    """Parameters of the real oriented-bandpass pointspread model

        A * exp(-(x1^2 + x2^2) / sigma^2) * cos(u1*x1 + u2*x2 + phase).

    ``(u1, u2)`` is the center frequency in radians per sample, ``sigma``
    the window standard deviation in samples.
    """

    amplitude: float
    phase: float
    u1: float
    u2: float
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")

    @property
    def u(self) -> tuple[float, float]:
        return (self.u1, self.u2)


def axis_coords(k: int) -> np.ndarray:
    """Centered 1D sample coordinates: integers for odd k, half-integers for even."""
    if k < 1:
        raise ValueError(f"grid side must be >= 1, got {k}")
    return np.arange(k, dtype=float) - (k - 1) / 2.0


def grid_coords(k: int) -> tuple[np.ndarray, np.ndarray]:
    """Centered k-by-k coordinate grids ``(x1, x2)``, row-major.

    ``x1`` varies along columns and ``x2`` along rows, so both arrays index
    like the fields they parameterize.
    """
    c = axis_coords(k)
    x2, x1 = np.meshgrid(c, c, indexing="ij")
    return x1, x2


def gaussian_window(coords, sigma: float, kappa: float = 1.0) -> np.ndarray:
    """Gaussian-like window kappa * exp(-||x||^2 / sigma^2) on a coordinate grid.

    Note the plain sigma^2 in the denominator (not 2*sigma^2).
    """
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    x1, x2 = coords
    return kappa * np.exp(-(np.asarray(x1) ** 2 + np.asarray(x2) ** 2) / (sigma * sigma))


def gabor_kernel(k: int, params: GaborParams) -> np.ndarray:
    """Real k-by-k oriented-bandpass pointspread for the given parameters.

    Oscillates along u/||u|| with period 2*pi/||u|| samples and is constant
    along the orthogonal direction before windowing.
    """
    x1, x2 = grid_coords(k)
    window = gaussian_window((x1, x2), params.sigma)
    return params.amplitude * window * np.cos(params.u1 * x1 + params.u2 * x2 + params.phase)


def _as_2d(field) -> np.ndarray:
    arr = np.asarray(field)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2D field, got shape {arr.shape}")
    return arr


def dft2(field) -> np.ndarray:
    """Unnormalized forward 2D DFT: F[m2, m1] = sum f[n2, n1] e^{-i2pi(m.n)/N}."""
    return np.fft.fft2(_as_2d(field))


def idft2(spectrum) -> np.ndarray:
    """Inverse of `dft2`: +i kernel with 1/(N1*N2) scaling."""
    return np.fft.ifft2(_as_2d(spectrum))


def circular_convolve2(f, h) -> np.ndarray:
    """Direct circular convolution out(n) = sum_a f(n - a mod N) h(a).

    Evaluated as a spatial sum over the nonzero samples of ``h`` (no
    spectral shortcut), linear in both arguments; complex inputs allowed.
    """
    f = _as_2d(f)
    h = _as_2d(h)
    if f.shape != h.shape:
        raise ValueError(f"field shapes differ: {f.shape} vs {h.shape}")
    rows_n, cols_n = f.shape
    out = np.zeros(f.shape, dtype=np.result_type(f, h, float))
    # tiling makes every circular shift of f a contiguous view:
    # tiled[rows_n - i : 2*rows_n - i, ...][r, c] = f[(r - i) % rows_n, ...]
    tiled = np.tile(f, (2, 2))
    rows, cols = np.nonzero(h)
    for i, j in zip(rows.tolist(), cols.tolist()):
        shifted = tiled[rows_n - i : 2 * rows_n - i, cols_n - j : 2 * cols_n - j]
        out += h[i, j] * shifted
    return out


def embed_kernel(kernel, n: int) -> np.ndarray:
    """Zero-pad a square odd-sided kernel onto an n-by-n periodic grid with
    its center sample at index (0, 0), wrapping negative coordinates."""
    kernel = _as_2d(kernel)
    k = kernel.shape[0]
    if kernel.shape[1] != k:
        raise ValueError(f"kernel must be square, got {kernel.shape}")
    if k % 2 == 0:
        raise ValueError(f"kernel side must be odd to embed on a periodic grid, got {k}")
    if k > n:
        raise ValueError(f"kernel side {k} exceeds grid size {n}")
    idx = (np.arange(k) - (k - 1) // 2) % n
    out = np.zeros((n, n), dtype=kernel.dtype)
    out[np.ix_(idx, idx)] = kernel
    return out


def complex_exponential(n: int, freq_index) -> np.ndarray:
    """E[n2, n1] = exp(i 2pi (m1 n1 + m2 n2) / n) for integer bin (m1, m2)."""
    m1, m2 = freq_index
    t = np.arange(n)
    p1 = np.exp(2j * np.pi * m1 * t / n)
    p2 = np.exp(2j * np.pi * m2 * t / n)
    return np.outer(p2, p1)


def mtf(kernel, n: int) -> np.ndarray:
    """Frequency response of a kernel on an n-by-n grid.

    Direct evaluation on the kernel's centered coordinates,
    M[m2, m1] = sum_x kernel(x) e^{-i 2pi (m1 x1 + m2 x2) / n},
    which also handles the half-integer grids of even-sided kernels.
    M[0, 0] equals the sum of kernel values.
    """
    kernel = _as_2d(kernel)
    kh, kw = kernel.shape
    if kh > n or kw > n:
        raise ValueError(f"kernel shape {kernel.shape} exceeds grid size {n}")
    m = np.arange(n)
    e1 = np.exp(-2j * np.pi * np.outer(m, axis_coords(kw)) / n)
    e2 = np.exp(-2j * np.pi * np.outer(m, axis_coords(kh)) / n)
    return e2 @ kernel @ e1.T


def eigenfunction_residual(kernel, freq_index, n: int) -> float:
    """Max pointwise deviation of (kernel * E) from lambda * E, where E is the
    complex exponential at the given bin and lambda its `mtf` value.

    Exactness of the identity on the periodic grid puts this at numerical
    noise level for any kernel.
    """
    m1, m2 = freq_index
    if not (0 <= m1 < n and 0 <= m2 < n):
        raise IndexError(f"frequency index {freq_index} out of range [0, {n})")
    exponential = complex_exponential(n, (m1, m2))
    convolved = circular_convolve2(exponential, embed_kernel(kernel, n))
    eigenvalue = mtf(kernel, n)[m2, m1]
    return float(np.max(np.abs(convolved - eigenvalue * exponential)))


def wft_kernel(k: int, window_sigma: float, u_c) -> np.ndarray:
    """Complex pointspread of the windowed Fourier transform, w(x) e^{i u_c.x}.

    Real part equals `gabor_kernel` with amplitude 1 and phase 0; the
    imaginary part is the sine quadrature.
    """
    x1, x2 = grid_coords(k)
    window = gaussian_window((x1, x2), window_sigma)
    u1, u2 = u_c
    return window * np.exp(1j * (u1 * x1 + u2 * x2))


def _bin_of(u: float, n: int) -> int:
    b = u * n / (2.0 * math.pi)
    rounded = round(b)
    if abs(b - rounded) > 1e-9:
        raise ValueError(f"center frequency {u} does not lie on a DFT bin of the {n}-point grid")
    return int(rounded) % n


def wft_shift_residual(window, u_c, n: int) -> float:
    """Max pointwise deviation between mtf(w(x) e^{i u_c.x}) and the window's
    own mtf circularly shifted to u_c.

    u_c must be bin-aligned (the identity is only exact on bins) and the
    window odd-sided (integer coordinates make the spectrum n-periodic).
    """
    window = _as_2d(window)
    if window.shape[0] != window.shape[1]:
        raise ValueError(f"window must be square, got {window.shape}")
    if window.shape[0] % 2 == 0:
        raise ValueError(f"window side must be odd, got {window.shape[0]}")
    u1, u2 = u_c
    b1 = _bin_of(u1, n)
    b2 = _bin_of(u2, n)
    x1, x2 = grid_coords(window.shape[0])
    modulated = window * np.exp(1j * (u1 * x1 + u2 * x2))
    shifted = np.roll(mtf(window, n), (b2, b1), axis=(0, 1))
    return float(np.max(np.abs(mtf(modulated, n) - shifted)))
