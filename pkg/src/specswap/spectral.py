"""2-D DFT utilities and amplitude/phase recombination.

All transforms act on the trailing two axes, so single images (C, H, W)
and batches (B, C, H, W) go through the same code path. Images must be
square. The forward transform carries no normalization; the inverse
divides by N*N, so ``idft(dft(x))`` reproduces ``x``.

The fast path uses numpy's FFT and requires a power-of-two side length;
every other size falls back to the explicit double-sum transform, which
is exact but O(N^4).
"""

import numpy as np

__all__ = [
    "dft",
    "idft",
    "dft_direct",
    "idft_direct",
    "amplitude",
    "phase",
    "recombine",
    "adversarial_amplitude_swap",
    "apr_swap",
]


def _check_square(arr: np.ndarray) -> int:
    if arr.ndim < 2:
        raise ValueError(f"expected at least a 2-D grid, got shape {arr.shape}")
    h, w = arr.shape[-2], arr.shape[-1]
    if h != w:
        raise ValueError(f"spectral ops require square grids, got {h}x{w}")
    return h


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def _twiddle(n: int) -> np.ndarray:
    # w[a, b] = exp(-2i*pi*a*b / n), the forward DFT kernel matrix
    ab = np.outer(np.arange(n), np.arange(n))
    return np.exp(-2j * np.pi * ab / n)


def dft(image: np.ndarray) -> np.ndarray:
    """Forward per-channel 2-D DFT of a real image grid."""
    n = _check_square(image)
    if _is_pow2(n):
        return np.fft.fft2(np.asarray(image, dtype=np.float64), axes=(-2, -1))
    return dft_direct(image)


def dft_direct(image: np.ndarray) -> np.ndarray:
    """Double-sum forward DFT, exact for any side length (O(N^4))."""
    n = _check_square(image)
    w = _twiddle(n)
    x = np.asarray(image, dtype=np.float64)
    # F[u, v] = sum_h sum_w x[h, w] * w[u, h] * w[v, w]
    return np.einsum("uh,...hw,vw->...uv", w, x, w)


def idft(spectrum: np.ndarray) -> tuple[np.ndarray, float]:
    """Inverse DFT with 1/(N*N) normalization.

    Returns the real part of the reconstruction (no clamping) together
    with the maximum absolute imaginary residual as a diagnostic. The
    residual is ~0 whenever the spectrum is Hermitian-symmetric.
    """
    n = _check_square(spectrum)
    spec = np.asarray(spectrum, dtype=np.complex128)
    if _is_pow2(n):
        grid = np.fft.ifft2(spec, axes=(-2, -1))
    else:
        grid = _idft_direct_complex(spec, n)
    residual = float(np.max(np.abs(grid.imag))) if grid.size else 0.0
    return grid.real, residual


def _idft_direct_complex(spec: np.ndarray, n: int) -> np.ndarray:
    w = np.conj(_twiddle(n))
    return np.einsum("hu,...uv,wv->...hw", w, spec, w) / (n * n)


def idft_direct(spectrum: np.ndarray) -> tuple[np.ndarray, float]:
    """Double-sum inverse DFT; same contract as :func:`idft`."""
    n = _check_square(spectrum)
    grid = _idft_direct_complex(np.asarray(spectrum, dtype=np.complex128), n)
    residual = float(np.max(np.abs(grid.imag))) if grid.size else 0.0
    return grid.real, residual


def amplitude(spectrum: np.ndarray) -> np.ndarray:
    """Per-bin magnitude sqrt(Re^2 + Im^2)."""
    return np.abs(spectrum)


def phase(spectrum: np.ndarray) -> np.ndarray:
    """Per-bin four-quadrant angle in (-pi, pi].

    Zero-amplitude bins get phase 0 by convention; the literal
    arctan(Im/Re) form loses the quadrant and cannot reconstruct the
    spectrum, so atan2 is used instead.
    """
    spec = np.asarray(spectrum)
    p = np.angle(spec)
    # atan2 on signed zeros can yield -pi or a spurious pi at null bins
    p = np.where(p == -np.pi, np.pi, p)
    return np.where(np.abs(spec) == 0.0, 0.0, p)


def recombine(amp: np.ndarray, phs: np.ndarray) -> tuple[np.ndarray, float]:
    """Inverse DFT of amp * exp(i * phase); returns (grid, imag residual)."""
    if amp.shape != phs.shape:
        raise ValueError(f"amplitude/phase shape mismatch: {amp.shape} vs {phs.shape}")
    return idft(amp * np.exp(1j * phs))


def adversarial_amplitude_swap(
    clean: np.ndarray, adv: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Swap amplitude spectra between a clean image and its adversarial image.

    Returns ``(x_aa, x_ap)`` where x_aa combines the adversarial
    amplitude with the clean phase and x_ap the clean amplitude with the
    adversarial phase. Both are clamped to [0, 1] and keep the clean
    image's label by definition.
    """
    if clean.shape != adv.shape:
        raise ValueError(f"image shape mismatch: {clean.shape} vs {adv.shape}")
    spec_clean = dft(clean)
    spec_adv = dft(adv)
    x_aa, _ = recombine(amplitude(spec_adv), phase(spec_clean))
    x_ap, _ = recombine(amplitude(spec_clean), phase(spec_adv))
    return np.clip(x_aa, 0.0, 1.0), np.clip(x_ap, 0.0, 1.0)


def apr_swap(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Replace a's amplitude spectrum with b's, keeping a's phase and label."""
    if a.shape != b.shape:
        raise ValueError(f"image shape mismatch: {a.shape} vs {b.shape}")
    grid, _ = recombine(amplitude(dft(b)), phase(dft(a)))
    return np.clip(grid, 0.0, 1.0)
