import numpy as np
import pytest

from lorasim.chirp import base_downchirp, base_upchirp, modulate_symbol
from lorasim.core import make_params


def direct_waveform(s: int, n_samples: int) -> np.ndarray:
    """Independent oracle: evaluate the symbol phase formula literally."""
    n = np.arange(n_samples, dtype=np.float64)
    phase = n * n / (2.0 * n_samples) + (s / n_samples - 0.5) * n
    return np.exp(2j * np.pi * phase)


@pytest.fixture(params=[7, 8, 9, 10, 11, 12])
def params(request):
    return make_params(request.param, 125000, 8, 16)


def test_upchirp_first_sample_is_one(params):
    assert base_upchirp(params)[0] == pytest.approx(1.0 + 0.0j, abs=1e-15)


def test_sf7_second_sample_frozen_value():
    p = make_params(7, 125000, 8, 16)
    assert base_upchirp(p)[1] == pytest.approx(-0.99970 - 0.02454j, abs=1e-4)
    assert base_downchirp(p)[1] == pytest.approx(-0.99970 + 0.02454j, abs=1e-4)


def test_unit_modulus(params):
    assert np.max(np.abs(np.abs(base_upchirp(params)) - 1.0)) < 1e-12


def test_downchirp_is_conjugate(params):
    up = base_upchirp(params)
    down = base_downchirp(params)
    np.testing.assert_array_equal(np.conj(down), up)


def test_cyclic_shift_matches_direct_formula(params):
    n = params.n_samples
    symbols = range(n) if n == 128 else np.linspace(0, n - 1, 17, dtype=int)
    for s in symbols:
        got = modulate_symbol(int(s), params)
        expected = direct_waveform(int(s), n)
        assert np.max(np.abs(got - expected)) < 1e-9, f"s={s}"


def test_modulate_zero_is_base(params):
    np.testing.assert_allclose(modulate_symbol(0, params), base_upchirp(params), atol=1e-15)


def test_shift_wraps_cyclically():
    p = make_params(7, 125000, 8, 16)
    # shifting the s = N-1 waveform by one more sample wraps to s = 0:
    # the contents coincide up to the constant modulation phasor
    last = modulate_symbol(p.n_samples - 1, p)
    ratio = np.roll(last, -1) / base_upchirp(p)
    assert abs(abs(ratio[0]) - 1.0) < 1e-12
    assert np.max(np.abs(ratio - ratio[0])) < 1e-9


def test_unit_power(params):
    x = modulate_symbol(17 % params.n_samples, params)
    assert np.mean(np.abs(x) ** 2) == pytest.approx(1.0, abs=1e-12)


def test_dechirp_orthogonality():
    p = make_params(7, 125000, 8, 16)
    n = p.n_samples
    rng = np.random.default_rng(7)
    pairs = {(int(a), int(b)) for a, b in rng.integers(0, n, size=(40, 2)) if a != b}
    for s1, s2 in pairs:
        x1 = modulate_symbol(s1, p)
        x2 = modulate_symbol(s2, p)
        assert abs(np.sum(x1 * np.conj(x2))) < 1e-6 * n


def test_symbol_range_validated():
    p = make_params(7, 125000, 8, 16)
    with pytest.raises(ValueError):
        modulate_symbol(128, p)
    with pytest.raises(ValueError):
        modulate_symbol(-1, p)


def test_cache_returns_consistent_array():
    p = make_params(7, 125000, 8, 16)
    a = base_upchirp(p)
    b = base_upchirp(p)
    assert a is b
    assert not a.flags.writeable
