"""Monte-Carlo packet-error-rate harness.

Each trial builds a fresh packet, runs it through the full impairment
chain (Tx upsampling, CFO/STO placement, calibrated AWGN, DFE filtering
and decimation) and either the synchronized receiver or the ideal
ground-truth receiver. A packet counts as an error on any decode failure
or payload byte mismatch.

Determinism: every trial derives its RNG from
SeedSequence([seed, sf, snr_millidB, trial]), so results are bit-stable
across runs and across the number of worker threads.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .channel import (
    ChannelConfig,
    add_awgn,
    apply_offsets,
    chain_group_delay,
    noise_calibration,
    upsample_tx,
)
from .chirp import base_upchirp
from .codec import decode_frame
from .core import ModemError, ModemParams, make_params
from .dfe import DfeConfig, DfeStream, quantize12
from .frame import PREAMBLE_SYMBOLS, Receiver, frame_symbol_count, run_receiver, transmit_frame
from .sync import apply_cfo_to_reference

__all__ = [
    "SweepPoint",
    "random_offsets",
    "run_trial",
    "run_point",
    "run_sweep",
    "REALISTIC_L_CFO_RANGE",
]

# "Realistic" random offsets for PER sweeps: integer CFO within +-25 bins
# (about +-20 ppm at 868 MHz for B = 125 kHz), arbitrary packet position
# on the symbol grid, fractions uniform on their grids.
REALISTIC_L_CFO_RANGE = 25


@dataclass(frozen=True)
class SweepPoint:
    sf: int
    snr_db: float
    packets: int
    errors: int

    @property
    def per(self) -> float:
        return self.errors / self.packets if self.packets else 0.0


def _trial_rng(seed: int, sf: int, snr_db: float, trial: int) -> np.random.Generator:
    snr_key = int(round(snr_db * 1000.0)) & 0xFFFFFFFF
    return np.random.default_rng(np.random.SeedSequence([seed, sf, snr_key, trial]))


def random_offsets(rng: np.random.Generator, params: ModemParams) -> dict:
    """Draw one set of channel offsets from the sweep distribution."""
    r = params.osf
    lambda_sto = 0.0
    if r > 1:
        lambda_sto = int(rng.integers(-(r // 2) + 1, r // 2 + 1)) / r
    return {
        "l_cfo": int(rng.integers(-REALISTIC_L_CFO_RANGE, REALISTIC_L_CFO_RANGE + 1)),
        "lambda_cfo": float(rng.uniform(-0.5, 0.5)),
        "l_sto": int(rng.integers(0, params.n_samples)),
        "lambda_sto": lambda_sto,
    }


def _build_stream(
    payload: bytes,
    params: ModemParams,
    cfg: ChannelConfig,
    dfe_config: DfeConfig,
    rng,
    calibration: float,
) -> np.ndarray:
    baseband = transmit_frame(payload, params)
    tail = np.zeros(3 * params.n_samples, dtype=np.complex128)
    oversampled = upsample_tx(np.concatenate([baseband, tail]), cfg.osf)
    delay = chain_group_delay(cfg.osf, dfe_config.fir_taps)
    placed = apply_offsets(oversampled, cfg, params, delay_compensation=delay)
    return add_awgn(placed, cfg.snr_db, cfg.osf, rng, calibration)


def _receive_synchronized(stream, params, dfe_config) -> bytes | None:
    dfe = DfeStream(stream, dfe_config)
    receiver = Receiver(params, initial_phase=dfe_config.active_phase)
    result = run_receiver(dfe, receiver)
    return None if result is None else result.payload


def _receive_perfect(stream, params, cfg: ChannelConfig, dfe_config, n_symbols: int) -> bytes | None:
    """Ground-truth receiver: exact alignment, exact offset corrections,
    no estimation. Mirrors a perfectly synchronized demodulator."""
    n = params.n_samples
    r = cfg.osf
    packet_over = cfg.lead_symbols * n * r - int(round(cfg.tau * r))
    phase = packet_over % r
    first = (packet_over - phase) // r + int(PREAMBLE_SYMBOLS * n)
    taps = np.asarray(dfe_config.fir_taps, dtype=np.float64)
    reference = apply_cfo_to_reference(np.conj(base_upchirp(params)), cfg.lambda_cfo, n)
    symbols = []
    for j in range(n_symbols):
        window = _kernels.decimate_window(stream, taps, r, phase, first + j * n, n)
        if dfe_config.quantize:
            window = quantize12(window)
        spectrum = np.fft.fft(window * reference)
        peak = int(np.argmax(np.abs(spectrum)))
        symbols.append((peak - cfg.l_cfo) % n)
    try:
        return decode_frame(symbols, params)
    except ModemError:
        return None


def run_trial(
    params: ModemParams,
    snr_db: float,
    payload_len: int,
    seed: int,
    trial: int,
    quantize: bool = False,
    perfect_sync: bool = False,
    calibration: float | None = None,
    dfe_config: DfeConfig | None = None,
) -> bool:
    """Run one packet; returns True when the payload came back intact."""
    rng = _trial_rng(seed, params.sf, snr_db, trial)
    payload = rng.integers(0, 256, payload_len, dtype=np.uint8).tobytes()
    offsets = random_offsets(rng, params)
    cfg = ChannelConfig(snr_db=snr_db, osf=params.osf, **offsets)
    if dfe_config is None:
        dfe_config = DfeConfig.for_params(params, quantize=quantize)
    if calibration is None:
        calibration = noise_calibration(params, dfe_config)
    stream = _build_stream(payload, params, cfg, dfe_config, rng, calibration)
    if perfect_sync:
        n_symbols = frame_symbol_count(payload_len, params)
        decoded = _receive_perfect(stream, params, cfg, dfe_config, n_symbols)
    else:
        decoded = _receive_synchronized(stream, params, dfe_config)
    return decoded == payload


def run_point(
    params: ModemParams,
    snr_db: float,
    trials: int,
    seed: int,
    payload_len: int = 11,
    quantize: bool = False,
    perfect_sync: bool = False,
    jobs: int = 1,
) -> SweepPoint:
    """Monte-Carlo PER at one SNR point."""
    dfe_config = DfeConfig.for_params(params, quantize=quantize)
    calibration = noise_calibration(params, dfe_config)

    def one(trial: int) -> bool:
        return run_trial(
            params, snr_db, payload_len, seed, trial,
            quantize=quantize, perfect_sync=perfect_sync,
            calibration=calibration, dfe_config=dfe_config,
        )

    if jobs <= 1:
        outcomes = [one(t) for t in range(trials)]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(one, range(trials)))
    errors = sum(1 for ok in outcomes if not ok)
    return SweepPoint(sf=params.sf, snr_db=snr_db, packets=trials, errors=errors)


def run_sweep(
    sf: int,
    bw: int,
    cr_denominator: int,
    snr_grid,
    trials: int,
    seed: int,
    payload_len: int = 11,
    osf: int = 16,
    quantize: bool = False,
    perfect_sync: bool = False,
    jobs: int = 1,
) -> list[SweepPoint]:
    """PER across an SNR grid for one spreading factor."""
    params = make_params(sf, bw, cr_denominator, osf)
    return [
        run_point(
            params, float(snr_db), trials, seed,
            payload_len=payload_len, quantize=quantize,
            perfect_sync=perfect_sync, jobs=jobs,
        )
        for snr_db in snr_grid
    ]


def snr_at_per(points: list[SweepPoint], target: float = 0.1) -> float:
    """SNR where the measured curve crosses `target`, by log-linear
    interpolation between the bracketing grid points."""
    usable = sorted((p for p in points if p.per > 0.0), key=lambda p: p.snr_db)
    if len(usable) < 2:
        raise ValueError("need at least two nonzero-PER points to interpolate")
    for lo, hi in zip(usable, usable[1:]):
        # PER decreases with SNR: lo has higher PER than hi.
        if hi.per <= target <= lo.per:
            log_lo, log_hi = np.log(lo.per), np.log(hi.per)
            frac = (np.log(target) - log_lo) / (log_hi - log_lo)
            return float(lo.snr_db + frac * (hi.snr_db - lo.snr_db))
    raise ValueError(f"curve does not cross PER={target} on the measured grid")
