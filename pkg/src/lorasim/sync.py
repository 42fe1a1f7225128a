"""Offset estimators and preamble-detection primitives.

Offset sign convention (consistent across channel, DFE and receiver): a
positive sampling-time offset means the receiver's window grid lags the
packet, so integer offsets move the demodulated peak of an upchirp to
(s + l_sto + l_cfo) mod N, and a downchirp dechirped with the upchirp
reads (l_cfo - l_sto) mod N. Summing the two demodulated preamble values
and halving isolates the integer CFO; subtracting it from the upchirp
value isolates the integer STO.
"""
from __future__ import annotations

import numpy as np

from .core import DegenerateSpectrumError
from .demod import DftSpectrum

__all__ = [
    "detect_preamble",
    "estimate_frac_cfo",
    "estimate_frac_sto",
    "resolve_integer_offsets",
    "apply_cfo_to_reference",
    "select_decimation_phase",
    "signed_residue",
]


def detect_preamble(recent_decisions, n_samples: int) -> bool:
    """True when the last three decisions sit within {v-1, v, v+1} mod N
    for some common v (adjacent bins count, per the +-1 demod tolerance)."""
    if len(recent_decisions) < 3:
        return False
    d1, d2, d3 = (int(d) for d in list(recent_decisions)[-3:])
    for v in (d1 - 1, d1, d1 + 1):
        window = {(v - 1) % n_samples, v % n_samples, (v + 1) % n_samples}
        if d1 in window and d2 in window and d3 in window:
            return True
    return False


def estimate_frac_cfo(y1: DftSpectrum, y2: DftSpectrum) -> float:
    """Fractional CFO from two consecutive preamble upchirp spectra.

    lambda_hat = angle(sum_{i=-2..2} Y2[s+i] * conj(Y1[s+i])) / (2*pi),
    s = argmax |Y2|. The N-sample spacing turns the carrier offset into a
    per-window phase advance of 2*pi*(l_cfo + lambda); only the
    fractional turn survives the angle.
    """
    n = len(y2.bins)
    s = y2.peak_index
    idx = [(s + i) % n for i in range(-2, 3)]
    acc = np.sum(y2.bins[idx] * np.conj(y1.bins[idx]))
    if abs(acc) < 1e-12:
        raise DegenerateSpectrumError("five-bin correlation magnitude below 1e-12")
    return float(np.angle(acc) / (2.0 * np.pi))


def estimate_frac_sto(y: DftSpectrum, l_sto_hat: int, n_samples: int) -> float:
    """Fractional STO from one dechirped preamble spectrum.

    lambda_hat = -Re[(a*Y[i+1] - b*Y[i-1]) / (2*Y[i] - a*Y[i+1] - b*Y[i-1])]
    with a = exp(-j*2*pi*l_sto_hat/N), b = conj(a), i the peak bin.
    The first pass approximates l_sto_hat by the peak index itself; a
    second pass with the resolved integer STO is more accurate. Result is
    clamped to [-0.5, 0.5].
    """
    i = y.peak_index
    rot = np.exp(-2j * np.pi * l_sto_hat / n_samples)
    y_hi = y.bins[(i + 1) % n_samples] * rot
    y_lo = y.bins[(i - 1) % n_samples] * np.conj(rot)
    denom = 2.0 * y.bins[i] - y_hi - y_lo
    if abs(denom) < 1e-12:
        raise DegenerateSpectrumError("estimator denominator magnitude below 1e-12")
    est = -float(np.real((y_hi - y_lo) / denom))
    return float(np.clip(est, -0.5, 0.5))


def signed_residue(value: int, n_samples: int) -> int:
    """Map a mod-N value to the signed residue in [-N/2, N/2)."""
    value %= n_samples
    return value - n_samples if value >= n_samples // 2 else value


def resolve_integer_offsets(s_up: int, s_down: int, n_samples: int) -> tuple[int, int]:
    """Integer CFO and STO from one demodulated upchirp and downchirp.

    Works for any integer STO mod N; the halving ambiguity of
    (s_up + s_down) = 2*l_cfo mod N is resolved by requiring
    |l_cfo| <= N/4 (documented limit). Odd sums round toward zero, the
    half-bin residue being fractional-CFO territory.
    """
    doubled = signed_residue((s_up + s_down) % n_samples, n_samples)
    l_cfo = int(doubled / 2)  # truncation toward zero
    l_sto = signed_residue(s_up - l_cfo, n_samples)
    return l_cfo, l_sto


def apply_cfo_to_reference(reference: np.ndarray, lambda_cfo: float, n_samples: int) -> np.ndarray:
    """Fold exp(-j*2*pi*lambda*n/N) into a dechirp reference so subsequent
    demodulation removes the fractional CFO."""
    if abs(lambda_cfo) > 0.5:
        raise ValueError(f"|lambda_cfo| must be <= 0.5, got {lambda_cfo}")
    n = np.arange(n_samples)
    return reference * np.exp(-2j * np.pi * lambda_cfo * n / n_samples)


def select_decimation_phase(lambda_sto: float, osf: int) -> int:
    """Polyphase index nearest to osf*lambda_sto, wrapped into [0, osf)."""
    if abs(lambda_sto) > 0.5:
        raise ValueError(f"|lambda_sto| must be <= 0.5, got {lambda_sto}")
    return int(round(osf * lambda_sto)) % osf
