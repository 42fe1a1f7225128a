"""Hot numeric kernels: numba-jitted with a pure-numpy fallback.

The Monte-Carlo harness pushes gigasamples through the oversampled chain
(polyphase interpolation, CFO rotation, polyphase decimation), so these
inner loops dominate runtime. Backend selection:

    LORASIM_BACKEND=numba   force numba (error if unavailable)
    LORASIM_BACKEND=numpy   force the pure-numpy implementations
    unset / auto            numba when importable, else numpy

Both implementations of each kernel are kept importable so the test suite
and ``benchmarks/bench_kernels.py`` can compare them directly.
"""
from __future__ import annotations

import os
import warnings

import numpy as np

__all__ = [
    "BACKEND",
    "polyphase_upsample",
    "rotate",
    "decimate_window",
    "polyphase_upsample_np",
    "rotate_np",
    "decimate_window_np",
]


def _pick_backend() -> str:
    choice = os.environ.get("LORASIM_BACKEND", "auto").lower()
    if choice not in ("auto", "numba", "numpy"):
        raise ValueError(f"LORASIM_BACKEND must be auto/numba/numpy, got {choice!r}")
    if choice == "numpy":
        return "numpy"
    try:
        import numba  # noqa: F401
        return "numba"
    except ImportError:
        if choice == "numba":
            raise
        warnings.warn("numba not importable; falling back to numpy kernels")
        return "numpy"


BACKEND = _pick_backend()


# ---------------------------------------------------------------------------
# numpy implementations (reference semantics)
# ---------------------------------------------------------------------------

def polyphase_upsample_np(x: np.ndarray, taps: np.ndarray, r: int) -> np.ndarray:
    """Interpolate x by r: zero-stuff then FIR with gain r, causal indexing.

    out[i] = r * sum_m x[m] * taps[i - m*r], taps length 8r+1.
    """
    n_out = len(x) * r
    out = np.zeros(n_out, dtype=np.complex128)
    # One correlation per polyphase branch keeps everything vectorized.
    for q in range(r):
        sub = taps[q::r]  # taps[q], taps[q+r], ...
        acc = np.zeros(n_out // r, dtype=np.complex128)
        for b, h in enumerate(sub):
            if h == 0.0:
                continue
            # out[m*r + q] += r * h * x[m - b]  (x index clipped causally)
            if b == 0:
                acc += h * x
            else:
                acc[b:] += h * x[:-b]
        out[q::r] = r * acc
    return out


def rotate_np(x: np.ndarray, freq: float, phase0: float = 0.0) -> np.ndarray:
    """Multiply sample m by exp(j*(phase0 + 2*pi*freq*m))."""
    n = len(x)
    # Block decomposition keeps the exp() calls to O(sqrt(n)).
    block = max(1, int(np.sqrt(n)) + 1)
    n_blocks = -(-n // block)
    inner = np.exp(1j * (phase0 + 2.0 * np.pi * freq * np.arange(block)))
    outer = np.exp(1j * (2.0 * np.pi * freq * block * np.arange(n_blocks)))
    phasor = (outer[:, None] * inner[None, :]).ravel()[:n]
    return x * phasor


def decimate_window_np(
    x: np.ndarray, taps: np.ndarray, r: int, phase: int, start: int, n_out: int
) -> np.ndarray:
    """FIR-filter then decimate, computing only the requested window.

    out[t] = sum_j taps[j] * x[(start + t)*r + phase - j], x zero outside.
    Identical (up to float summation order) to decimating the full causal
    convolution of x with taps.
    """
    out = np.zeros(n_out, dtype=np.complex128)
    base = start * r + phase
    n_x = len(x)
    for j, h in enumerate(taps):
        if h == 0.0:
            continue
        idx0 = base - j
        # valid output positions t: 0 <= idx0 + t*r < n_x
        t_lo = 0 if idx0 >= 0 else (-idx0 + r - 1) // r
        t_hi = min(n_out, (n_x - 1 - idx0) // r + 1)
        if t_hi > t_lo:
            out[t_lo:t_hi] += h * x[idx0 + t_lo * r: idx0 + t_hi * r: r]
    return out


# ---------------------------------------------------------------------------
# numba implementations
# ---------------------------------------------------------------------------

if BACKEND == "numba":
    from numba import njit

    @njit(cache=True, nogil=True)
    def _polyphase_upsample_nb(x, taps, r):
        n_in = x.shape[0]
        n_taps = taps.shape[0]
        out = np.zeros(n_in * r, dtype=np.complex128)
        for i in range(n_in * r):
            q = i % r
            m0 = i // r
            acc = 0.0 + 0.0j
            j = q
            while j < n_taps:
                m = m0 - j // r
                if m < 0:
                    break
                h = taps[j]
                if h != 0.0:
                    acc += h * x[m]
                j += r
            out[i] = r * acc
        return out

    @njit(cache=True, nogil=True)
    def _rotate_nb(x, freq, phase0):
        n = x.shape[0]
        out = np.empty(n, dtype=np.complex128)
        step = np.exp(1j * 2.0 * np.pi * freq)
        w = np.exp(1j * phase0)
        for m in range(n):
            out[m] = x[m] * w
            w *= step
            # Renormalize occasionally so the recurrence cannot drift.
            if m % 4096 == 4095:
                w /= abs(w)
        return out

    @njit(cache=True, nogil=True)
    def _decimate_window_nb(x, taps, r, phase, start, n_out):
        n_x = x.shape[0]
        n_taps = taps.shape[0]
        out = np.zeros(n_out, dtype=np.complex128)
        for t in range(n_out):
            k = (start + t) * r + phase
            acc = 0.0 + 0.0j
            j_max = n_taps if k + 1 >= n_taps else k + 1
            for j in range(j_max):
                idx = k - j
                if idx < n_x:
                    acc += taps[j] * x[idx]
            out[t] = acc
        return out

    def polyphase_upsample(x, taps, r):
        return _polyphase_upsample_nb(
            np.ascontiguousarray(x, dtype=np.complex128),
            np.ascontiguousarray(taps, dtype=np.float64),
            r,
        )

    def rotate(x, freq, phase0=0.0):
        return _rotate_nb(np.ascontiguousarray(x, dtype=np.complex128), float(freq), float(phase0))

    def decimate_window(x, taps, r, phase, start, n_out):
        return _decimate_window_nb(
            np.ascontiguousarray(x, dtype=np.complex128),
            np.ascontiguousarray(taps, dtype=np.float64),
            int(r), int(phase), int(start), int(n_out),
        )

else:
    polyphase_upsample = polyphase_upsample_np
    rotate = rotate_np
    decimate_window = decimate_window_np
