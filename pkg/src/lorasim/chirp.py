"""Reference chirp generation and symbol modulation at Nyquist rate.

A symbol s in [0, N) is the phasor

    x_s[n] = exp(j*2*pi*(n^2/(2N) + (s/N - 1/2)*n)),   n = 0..N-1

i.e. an upchirp whose initial instantaneous frequency is selected by s.
The base upchirp (s = 0) is generated once per spreading factor and
cached; modulation is a cyclic shift of the cached table plus the
constant phase that makes the shifted table equal the formula exactly.
"""
from __future__ import annotations

import threading

import numpy as np

from .core import ModemParams, validate_symbol

__all__ = ["base_upchirp", "base_downchirp", "modulate_symbol", "chirp_phase"]

_cache_lock = threading.Lock()
_upchirp_cache: dict[int, np.ndarray] = {}


def chirp_phase(n: np.ndarray, s: int, n_samples: int) -> np.ndarray:
    """Phase/(2*pi) of x_s at sample indices n, reduced mod 1.

    Reduction happens in exact integer/rational pieces before the complex
    exponential: n^2/(2N) reaches 2048 at SF12 and would otherwise cost
    several digits of precision.
    """
    n = np.asarray(n, dtype=np.int64)
    two_n = 2 * n_samples
    # n^2/(2N) mod 1 == (n^2 mod 2N)/(2N); the linear term likewise.
    quad = (n * n) % two_n
    lin = (n * (2 * s - n_samples)) % two_n
    return ((quad + lin) % two_n) / two_n


def base_upchirp(params: ModemParams) -> np.ndarray:
    """Base upchirp x_0 (unit-modulus, length N). Cached per SF."""
    n_samples = params.n_samples
    with _cache_lock:
        cached = _upchirp_cache.get(n_samples)
        if cached is None:
            n = np.arange(n_samples)
            cached = np.exp(2j * np.pi * chirp_phase(n, 0, n_samples))
            cached.setflags(write=False)
            _upchirp_cache[n_samples] = cached
    return cached


def base_downchirp(params: ModemParams) -> np.ndarray:
    """Element-wise conjugate of the base upchirp."""
    return np.conj(base_upchirp(params))


def modulate_symbol(s: int, params: ModemParams) -> np.ndarray:
    """Waveform of symbol s, equal to the direct phase formula for every n.

    Realized as a cyclic shift of the cached base chirp: advancing the
    table by s samples yields x_s times the constant phasor
    exp(j*2*pi*(s^2/(2N) - s/2)), which is divided back out so the result
    matches the formula exactly, not just up to a symbol-dependent phase.
    """
    n_samples = params.n_samples
    validate_symbol(s, n_samples)
    base = base_upchirp(params)
    if s == 0:
        return base.copy()
    twiddle = np.exp(-2j * np.pi * (((s * s) % (2 * n_samples)) / (2 * n_samples) - (s % 2) / 2))
    return np.roll(base, -s) * twiddle
