from fractions import Fraction

import numpy as np
import pytest

from lorasim.core import (
    InvalidBandwidthError,
    InvalidCodingRateError,
    InvalidOversamplingError,
    InvalidSpreadingFactorError,
    OffsetEstimate,
    RateTag,
    SampleBuffer,
    make_params,
)


def test_params_sf7_derived_constants():
    p = make_params(7, 125000, 8, 16)
    assert p.n_samples == 128
    assert p.f_s == 125000
    assert p.t_sym == pytest.approx(1.024e-3, rel=1e-12)


def test_params_sf8_derived_constants():
    p = make_params(8, 125000, 8, 1)
    assert p.n_samples == 256
    assert p.t_sym == pytest.approx(2.048e-3, rel=1e-12)


def test_invalid_sf_rejected():
    with pytest.raises(InvalidSpreadingFactorError):
        make_params(6, 125000, 8, 16)
    with pytest.raises(InvalidSpreadingFactorError):
        make_params(13, 125000, 8, 16)


def test_invalid_cr_rejected():
    with pytest.raises(InvalidCodingRateError):
        make_params(7, 125000, 5, 16)
    with pytest.raises(InvalidCodingRateError):
        make_params(7, 125000, 9, 16)


def test_invalid_bw_and_osf_rejected():
    with pytest.raises(InvalidBandwidthError):
        make_params(7, 0, 8, 16)
    with pytest.raises(InvalidBandwidthError):
        make_params(7, -125000, 8, 16)
    with pytest.raises(InvalidOversamplingError):
        make_params(7, 125000, 8, 0)


@pytest.mark.parametrize("sf", [7, 8, 9, 10, 11, 12])
@pytest.mark.parametrize("bw", [125000, 250000, 500000])
def test_symbol_time_exact_rational(sf, bw):
    p = make_params(sf, bw, 8, 16)
    assert p.t_sym_exact * bw == Fraction(p.n_samples)
    # determinism / totality: same inputs, same values
    assert make_params(sf, bw, 8, 16) == p


def test_sample_buffer_validation():
    with pytest.raises(ValueError):
        SampleBuffer(np.array([]))
    with pytest.raises(ValueError):
        SampleBuffer(np.array([1.0, np.inf]))
    buf = SampleBuffer(np.ones(4, dtype=complex), RateTag.OVERSAMPLED)
    assert len(buf) == 4


def test_offset_estimate_fraction_range():
    with pytest.raises(ValueError):
        OffsetEstimate(0, 0.75, 0, 0.0)
    with pytest.raises(ValueError):
        OffsetEstimate(0, 0.0, 0, -0.5)  # -0.5 is excluded, +0.5 allowed
    OffsetEstimate(0, 0.5, 0, 0.5)


def test_offset_estimate_derived_fields():
    p = make_params(7, 125000, 8, 16)
    est = OffsetEstimate(3, 0.25, 5, -0.1875)
    assert est.delta_fc_hz(p) == pytest.approx(125000 / 128 * 3.25, rel=1e-15)
    assert est.tau_samples == pytest.approx(4.8125, rel=1e-15)


def test_offset_estimate_canonical_split():
    est = OffsetEstimate.from_composite(3.5, -2.5)
    assert (est.l_cfo, est.lambda_cfo) == (3, 0.5)
    assert (est.l_sto, est.lambda_sto) == (-3, 0.5)
    est = OffsetEstimate.from_composite(-0.25, 7.125)
    assert (est.l_cfo, est.lambda_cfo) == (0, -0.25)
    assert (est.l_sto, est.lambda_sto) == (7, 0.125)
