import numpy as np
import pytest

from lorasim.chirp import base_upchirp
from lorasim.core import make_params
from lorasim.channel import upsample_tx
from lorasim.demod import dechirp, dft_spectrum
from lorasim.dfe import (
    DfeConfig,
    DfeStream,
    decimate,
    default_fir_taps,
    deliver_windows,
    fir_filter,
    fir_group_delay,
    load_taps,
    quantize12,
)
from lorasim.sync import estimate_frac_sto


def test_default_taps_properties():
    taps = default_fir_taps(16)
    assert len(taps) == 64
    assert taps.sum() == pytest.approx(1.0, abs=1e-12)  # unity DC gain
    assert fir_group_delay(taps) == pytest.approx(31.0, abs=1e-9)
    assert default_fir_taps(1).tolist() == [1.0]


def test_default_taps_stopband_attenuation():
    """Tone at 0.45 of the oversampled rate vs an in-band tone at 0.2 f_S:
    relative attenuation at least 40 dB, measured on the taps' response."""
    r = 16
    taps = default_fir_taps(r)
    freqs = np.fft.fftfreq(8192)
    response = np.abs(np.fft.fft(taps, 8192))
    in_band = response[np.argmin(np.abs(freqs - 0.2 / r))]
    stop = response[np.argmin(np.abs(freqs - 0.45))]
    assert 20 * np.log10(in_band / stop) >= 40.0


def test_fir_filter_identity_tap():
    rng = np.random.default_rng(0)
    x = rng.standard_normal(100) + 1j * rng.standard_normal(100)
    out, delay = fir_filter(x, np.array([1.0]))
    np.testing.assert_allclose(out, x, atol=0)
    assert delay == 0.0


def test_fir_filter_impulse_response():
    taps = np.array([0.25, 0.5, 0.25])
    impulse = np.zeros(10, dtype=complex)
    impulse[0] = 1.0
    out, delay = fir_filter(impulse, taps)
    np.testing.assert_allclose(out[:3].real, taps, atol=1e-15)
    assert delay == pytest.approx(1.0)


def test_decimate_basics():
    x = np.arange(32, dtype=complex)
    np.testing.assert_array_equal(decimate(x, 1, 0), x)
    np.testing.assert_array_equal(decimate(x, 4, 1), x[1::4])
    with pytest.raises(ValueError):
        decimate(x, 16, 16)
    with pytest.raises(ValueError):
        decimate(x, 16, -1)


def test_decimation_phase_shifts_quarter_sample():
    """Phase 0 vs phase 4 at R=16: a quarter-sample timing difference,
    visible as a ~0.25 difference between the timing estimates."""
    p = make_params(7, 125000, 8, 16)
    train = np.tile(base_upchirp(p), 8)
    stream = upsample_tx(train, 16)
    ref = np.conj(base_upchirp(p))
    estimates = []
    for phase in (0, 4):
        config = DfeConfig(fir_taps=default_fir_taps(16), osf=16,
                           window_len=128, active_phase=phase)
        dfe = DfeStream(stream, config)
        windows = list(dfe.windows())
        spec = dft_spectrum(dechirp(windows[3], ref))
        estimates.append(estimate_frac_sto(spec, 0, 128))
    assert estimates[1] - estimates[0] == pytest.approx(0.25, abs=0.08)


def test_deliver_windows_counts():
    x = np.arange(3 * 128, dtype=complex)
    windows = deliver_windows(x, 128)
    assert len(windows) == 3
    np.testing.assert_array_equal(np.concatenate(windows), x)
    # trailing partial window is withheld
    assert len(deliver_windows(x[:-1], 128)) == 2


def test_quantize_unit_chirp_error_bound():
    p = make_params(7, 125000, 8, 16)
    x = base_upchirp(p)
    q = quantize12(x)
    err = np.max(np.maximum(np.abs(q.real - x.real), np.abs(q.imag - x.imag)))
    assert err < 1.0 / 2047


def test_quantize_strong_noise_does_not_clip():
    rng = np.random.default_rng(1)
    x = 5.0 * (rng.standard_normal(128) + 1j * rng.standard_normal(128))
    q = quantize12(x)
    err = np.abs(q - x)
    scale = max(np.max(np.abs(x.real)), np.max(np.abs(x.imag)))
    assert np.max(err) < scale / 2047 * 1.5


def test_quantized_decisions_match_unquantized_at_0db():
    """Paired run at 0 dB: 12-bit quantization flips almost no decisions."""
    p = make_params(7, 125000, 8, 16)
    rng = np.random.default_rng(2)
    n, trials = 128, 10000
    ref = np.conj(base_upchirp(p))
    same = 0
    for _ in range(trials):
        s = int(rng.integers(0, n))
        x = np.roll(base_upchirp(p), -s)
        noisy = x + np.sqrt(0.5) * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
        d_plain = dft_spectrum(dechirp(noisy, ref)).peak_index
        d_quant = dft_spectrum(dechirp(quantize12(noisy), ref)).peak_index
        same += d_plain == d_quant
    assert same / trials >= 0.999


def test_stream_equals_filter_then_decimate():
    rng = np.random.default_rng(3)
    x = rng.standard_normal(4096) + 1j * rng.standard_normal(4096)
    taps = default_fir_taps(16)
    filtered, _ = fir_filter(x, taps)
    expected = decimate(filtered, 16, 5)
    config = DfeConfig(fir_taps=taps, osf=16, window_len=64, active_phase=5)
    dfe = DfeStream(x, config)
    got = np.concatenate(list(dfe.windows()))
    np.testing.assert_allclose(got, expected[: len(got)], atol=1e-12)


def test_stream_phase_update_latency():
    """A phase change between windows never alters the delivered window
    and applies to the whole next window."""
    rng = np.random.default_rng(4)
    x = rng.standard_normal(8192) + 1j * rng.standard_normal(8192)
    taps = default_fir_taps(16)
    config = DfeConfig(fir_taps=taps, osf=16, window_len=128)
    dfe = DfeStream(x, config)
    first = dfe.next_window()
    dfe.set_phase(7)
    second = dfe.next_window()
    filtered, _ = fir_filter(x, taps)
    np.testing.assert_allclose(first, decimate(filtered, 16, 0)[:128], atol=1e-12)
    np.testing.assert_allclose(second, decimate(filtered, 16, 7)[128:256], atol=1e-12)


def test_stream_withholds_partial_window():
    x = np.ones(16 * 100, dtype=complex)
    config = DfeConfig(fir_taps=np.array([1.0]), osf=16, window_len=64)
    dfe = DfeStream(x, config)
    assert dfe.next_window() is not None
    assert dfe.next_window() is None  # only 100 decimated samples exist


def test_config_validation():
    with pytest.raises(ValueError):
        DfeConfig(fir_taps=np.array([1.0]), osf=16, window_len=128, active_phase=16)
    with pytest.raises(ValueError):
        DfeConfig(fir_taps=np.array([]), osf=16, window_len=128)
    with pytest.raises(ValueError):
        DfeConfig(fir_taps=np.array([1.0]), osf=16, window_len=0)


def test_load_taps_round_trip(tmp_path):
    taps = default_fir_taps(16)
    path = tmp_path / "taps.txt"
    path.write_text("\n".join(f"{t:.17g}" for t in taps) + "\n")
    np.testing.assert_allclose(load_taps(path), taps, atol=0)


def test_load_taps_rejects_empty_file(tmp_path):
    path = tmp_path / "empty.txt"
    path.write_text("\n\n")
    with pytest.raises(ValueError):
        load_taps(path)
