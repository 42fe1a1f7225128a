"""Symbol demodulation: dechirp, N-point DFT, non-coherent peak decision.

The DFT is the unnormalized forward transform, so a clean dechirped
symbol produces a single peak of height N. Argmax ties break toward the
lowest bin index (np.argmax already does), keeping decisions
deterministic in degenerate inputs.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["DftSpectrum", "CircularWindow", "dechirp", "dft_spectrum", "demod_symbol"]

_VALID_N = (128, 256, 512, 1024, 2048, 4096)


@dataclass(frozen=True)
class DftSpectrum:
    bins: np.ndarray
    peak_index: int
    peak_magnitude: float

    def __len__(self) -> int:
        return len(self.bins)


def dechirp(window: np.ndarray, reference: np.ndarray) -> np.ndarray:
    """Pointwise product of a received window with a reference chirp.

    With reference = conj(x_0) and a noiseless symbol s in the window,
    the result is the pure tone exp(j*2*pi*s*n/N).
    """
    if len(window) != len(reference):
        raise ValueError(f"length mismatch: {len(window)} vs {len(reference)}")
    return window * reference


def dft_spectrum(dechirped: np.ndarray) -> DftSpectrum:
    """N-point DFT of a dechirped window with peak bookkeeping."""
    n = len(dechirped)
    if n not in _VALID_N:
        raise ValueError(f"window length must be a power of two in [128, 4096], got {n}")
    bins = np.fft.fft(dechirped)
    mags = np.abs(bins)
    peak = int(np.argmax(mags))
    return DftSpectrum(bins=bins, peak_index=peak, peak_magnitude=float(mags[peak]))


@dataclass
class CircularWindow:
    """Two-symbol circular buffer the receiver demodulates out of."""

    backing: np.ndarray  # length 2N

    def __post_init__(self):
        if len(self.backing) % 2 != 0:
            raise ValueError("circular buffer length must be 2N")

    @property
    def half(self) -> int:
        return len(self.backing) // 2

    def write_half(self, index: int, samples: np.ndarray) -> None:
        n = self.half
        if len(samples) != n:
            raise ValueError(f"expected {n} samples, got {len(samples)}")
        self.backing[(index % 2) * n:(index % 2) * n + n] = samples

    def read(self, start: int, length: int) -> np.ndarray:
        """Read `length` samples beginning at `start`, wrapping mod 2N."""
        size = len(self.backing)
        start %= size
        if start + length <= size:
            return self.backing[start:start + length].copy()
        head = self.backing[start:]
        return np.concatenate([head, self.backing[:length - len(head)]])


def demod_symbol(window: CircularWindow, start: int, reference: np.ndarray) -> tuple[int, DftSpectrum]:
    """Demodulate N samples read (with wrap) from the circular buffer."""
    n = len(reference)
    if not 0 <= start < 2 * n:
        raise ValueError(f"start must lie in [0, {2 * n}), got {start}")
    samples = window.read(start, n)
    spectrum = dft_spectrum(dechirp(samples, reference))
    return spectrum.peak_index, spectrum
