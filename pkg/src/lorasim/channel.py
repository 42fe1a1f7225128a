"""Impairment simulator: Tx upsampling, CFO rotation, sample-time offset
on the oversampled grid, and calibrated AWGN.

Timing model. The stream starts with `lead_symbols` symbol periods of
silence (noise only after add_awgn), and the packet is placed so that
after the receiver's FIR group delay the window grid lags the packet
start by exactly tau = l_sto + lambda_sto baseband samples. With that
convention the demodulated peak of a symbol s lands on
(s + l_sto + l_cfo) mod N, matching the sign conventions of the sync
module. The zero prefix is therefore

    lead*N*R - round(tau*R) - (interpolator delay + DFE FIR delay)

oversampled samples; both delays are integers by construction, keeping
the realized offsets exact on the 1/R grid.

SNR is defined at the decimator output. White noise of variance
sigma^2 = R * 10^(-snr/10) * calibration is added at the oversampled
rate; the calibration factor (close to 1) accounts for the actual FIR
noise bandwidth and the small in-band signal attenuation of the
interpolation + decimation cascade, so the measured SNR after the DFE
equals the requested value.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .chirp import base_upchirp
from .core import ModemParams
from .dfe import DfeConfig, DfeStream, fir_group_delay

__all__ = [
    "ChannelConfig",
    "interp_taps",
    "interp_group_delay",
    "upsample_tx",
    "apply_offsets",
    "add_awgn",
    "noise_calibration",
    "chain_group_delay",
]

_TAPS_PER_PHASE = 8


@dataclass(frozen=True)
class ChannelConfig:
    snr_db: float
    l_cfo: int = 0
    lambda_cfo: float = 0.0
    l_sto: int = 0
    lambda_sto: float = 0.0
    osf: int = 16
    seed: int = 0
    lead_symbols: int = 2

    def __post_init__(self):
        for name in ("lambda_cfo", "lambda_sto"):
            value = getattr(self, name)
            if not -0.5 < value <= 0.5:
                raise ValueError(f"{name} must lie in (-0.5, 0.5], got {value}")
        grid = self.lambda_sto * self.osf
        if abs(grid - round(grid)) > 1e-9:
            raise ValueError(
                f"lambda_sto must sit on the 1/{self.osf} grid, got {self.lambda_sto}"
            )

    @property
    def tau(self) -> float:
        return self.l_sto + self.lambda_sto

    def cfo_total(self) -> float:
        return self.l_cfo + self.lambda_cfo


def interp_taps(osf: int) -> np.ndarray:
    """Interpolation prototype: odd-length (8*R+1) Hamming-windowed sinc.

    Odd length makes the group delay exactly 4*R samples and the phase-0
    polyphase branch an exact pass-through, so on-grid samples of the
    upsampled stream reproduce the input bit for bit.
    """
    if osf == 1:
        return np.array([1.0])
    length = _TAPS_PER_PHASE * osf + 1
    k = np.arange(length)
    center = (length - 1) // 2
    return np.sinc((k - center) / osf) * np.hamming(length) / osf


def interp_group_delay(osf: int) -> int:
    return 0 if osf == 1 else _TAPS_PER_PHASE * osf // 2


def upsample_tx(baseband: np.ndarray, osf: int) -> np.ndarray:
    """Polyphase windowed-sinc interpolation by R (identity for R=1).

    Output length is len(baseband)*R; callers that need the interpolation
    tail must pad the input. Group delay is interp_group_delay(osf).
    """
    if osf < 1:
        raise ValueError("osf must be >= 1")
    x = np.ascontiguousarray(baseband, dtype=np.complex128)
    if osf == 1:
        return x.copy()
    return _kernels.polyphase_upsample(x, interp_taps(osf), osf)


def chain_group_delay(osf: int, dfe_taps: np.ndarray) -> int:
    """Total Tx-interpolation + Rx-FIR delay in oversampled samples."""
    total = interp_group_delay(osf) + fir_group_delay(dfe_taps)
    rounded = int(round(total))
    if abs(total - rounded) > 1e-6:
        raise ValueError(f"chain group delay {total} is not an integer sample count")
    return rounded


def apply_offsets(
    oversampled: np.ndarray,
    cfg: ChannelConfig,
    params: ModemParams,
    delay_compensation: int = 0,
) -> np.ndarray:
    """Place the packet on the receiver timeline and rotate in the CFO.

    `delay_compensation` is the chain group delay (see chain_group_delay)
    the caller wants absorbed into the prefix so the realized offsets are
    exactly the configured ones.
    """
    r = cfg.osf
    n = params.n_samples
    prefix = cfg.lead_symbols * n * r - int(round(cfg.tau * r)) - delay_compensation
    if prefix < 0:
        raise ValueError(
            f"offsets too large for {cfg.lead_symbols} lead symbols (prefix {prefix})"
        )
    stream = np.concatenate([np.zeros(prefix, dtype=np.complex128), oversampled])
    delta_fc_norm = (cfg.l_cfo + cfg.lambda_cfo) / (n * r)  # cycles per oversampled sample
    if delta_fc_norm != 0.0:
        stream = _kernels.rotate(stream, delta_fc_norm)
    return stream


def noise_calibration(params: ModemParams, dfe_config: DfeConfig) -> float:
    """Correction factor for add_awgn so the decimator-output SNR is exact.

    factor = kappa / (R * sum(h^2)) where sum(h^2) is the FIR noise gain
    and kappa the measured in-band signal power through the
    interpolation + FIR cascade (both deterministic given the taps).
    """
    r = params.osf
    taps = np.asarray(dfe_config.fir_taps, dtype=np.float64)
    noise_gain = float(np.sum(taps * taps))
    if r == 1 and len(taps) == 1:
        return float(taps[0] ** 2 / noise_gain)  # == 1.0; keep the formula shape
    # Steady-state signal power of an upchirp train through the chain.
    chirp = base_upchirp(params)
    train = np.tile(chirp, 4)
    stream = upsample_tx(train, r)
    dfe = DfeStream(stream, DfeConfig(fir_taps=taps, osf=r, window_len=params.n_samples))
    windows = list(dfe.windows())
    if len(windows) < 3:
        raise ValueError("calibration needs at least 3 symbol windows")
    steady = np.concatenate(windows[1:3])
    kappa = float(np.mean(np.abs(steady) ** 2))
    return kappa / (r * noise_gain)


def add_awgn(
    signal: np.ndarray,
    snr_db: float,
    osf: int,
    seed,
    calibration: float = 1.0,
) -> np.ndarray:
    """Add circularly-symmetric complex Gaussian noise at the oversampled
    rate, variance R * 10^(-snr/10) * calibration per sample, so the
    post-decimation baseband SNR equals snr_db. Deterministic per seed;
    snr_db = +inf returns the signal unchanged.
    """
    if np.isinf(snr_db) and snr_db > 0:
        return np.array(signal)
    variance = osf * 10.0 ** (-snr_db / 10.0) * calibration
    rng = np.random.default_rng(seed)
    scale = np.sqrt(variance / 2.0)
    noise = rng.standard_normal(len(signal)) + 1j * rng.standard_normal(len(signal))
    return signal + scale * noise
