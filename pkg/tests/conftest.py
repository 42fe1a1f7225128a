import numpy as np
import pytest

from lorasim.channel import (
    ChannelConfig,
    add_awgn,
    apply_offsets,
    chain_group_delay,
    noise_calibration,
    upsample_tx,
)
from lorasim.core import ModemParams
from lorasim.dfe import DfeConfig, DfeStream


def impaired_stream(
    baseband: np.ndarray,
    params: ModemParams,
    cfg: ChannelConfig,
    dfe_config: DfeConfig | None = None,
    tail_symbols: int = 3,
    rng=None,
) -> tuple[np.ndarray, DfeConfig]:
    """Tx baseband through upsampling, offset placement and AWGN; returns
    the oversampled stream and the DFE config to consume it with."""
    if dfe_config is None:
        dfe_config = DfeConfig.for_params(params)
    tail = np.zeros(tail_symbols * params.n_samples, dtype=np.complex128)
    oversampled = upsample_tx(np.concatenate([baseband, tail]), cfg.osf)
    delay = chain_group_delay(cfg.osf, dfe_config.fir_taps)
    placed = apply_offsets(oversampled, cfg, params, delay_compensation=delay)
    seed = rng if rng is not None else cfg.seed
    calibration = 1.0
    if np.isfinite(cfg.snr_db):
        calibration = noise_calibration(params, dfe_config)
    noisy = add_awgn(placed, cfg.snr_db, cfg.osf, seed, calibration)
    return noisy, dfe_config


def dfe_windows(stream: np.ndarray, dfe_config: DfeConfig):
    return DfeStream(stream, dfe_config)


@pytest.fixture
def make_stream():
    return impaired_stream
