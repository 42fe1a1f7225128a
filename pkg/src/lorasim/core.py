"""Shared modem parameters, domain types and error taxonomy.

Everything here is immutable after construction and safe to share between
threads. All other modules validate their inputs through these types.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

import numpy as np

__all__ = [
    "ModemError",
    "InvalidSpreadingFactorError",
    "InvalidCodingRateError",
    "InvalidOversamplingError",
    "InvalidBandwidthError",
    "UncorrectableCodewordError",
    "BadHeaderChecksumError",
    "InvalidCrFieldError",
    "CrcMismatchError",
    "TruncatedSymbolStreamError",
    "DegenerateSpectrumError",
    "SyncFailedError",
    "RateTag",
    "ModemParams",
    "SampleBuffer",
    "OffsetEstimate",
    "make_params",
    "validate_symbol",
]

VALID_SF = (7, 8, 9, 10, 11, 12)
VALID_CR_DENOMINATORS = (6, 7, 8)


class ModemError(Exception):
    """Base class for all modem errors."""


class InvalidSpreadingFactorError(ModemError):
    pass


class InvalidCodingRateError(ModemError):
    pass


class InvalidOversamplingError(ModemError):
    pass


class InvalidBandwidthError(ModemError):
    pass


class UncorrectableCodewordError(ModemError):
    """Hamming(8,4) syndrome inconsistent with any single bit flip."""


class BadHeaderChecksumError(ModemError):
    pass


class InvalidCrFieldError(ModemError):
    pass


class CrcMismatchError(ModemError):
    pass


class TruncatedSymbolStreamError(ModemError):
    pass


class DegenerateSpectrumError(ModemError):
    """Estimator input too weak to produce a meaningful value."""


class SyncFailedError(ModemError):
    """Network-identifier validation or offset resolution failed."""


class RateTag(Enum):
    BASEBAND = "baseband"
    OVERSAMPLED = "oversampled"


# A symbol value is a plain int in [0, n_samples); validate_symbol() is the
# checked constructor used at module boundaries.
SymbolValue = int


def validate_symbol(s: int, n_samples: int) -> int:
    if not 0 <= s < n_samples:
        raise ValueError(f"symbol value {s} outside [0, {n_samples})")
    return int(s)


@dataclass(frozen=True)
class ModemParams:
    """Modulation parameters plus every derived constant the chains need.

    sf: spreading factor, 7..12
    bw: bandwidth in Hz (exact integer)
    cr_denominator: n of the (4, n) Hamming code, 6..8
    osf: DFE oversampling factor R (>= 1)
    """

    sf: int
    bw: int
    cr_denominator: int
    osf: int

    @property
    def n_samples(self) -> int:
        """Samples (and possible symbol values) per symbol, N = 2**sf."""
        return 1 << self.sf

    @property
    def f_s(self) -> int:
        """Baseband (Nyquist) sample rate in Hz, equal to the bandwidth."""
        return self.bw

    @property
    def t_sym(self) -> float:
        """Symbol duration in seconds, N / bw."""
        return self.n_samples / self.bw

    @property
    def t_sym_exact(self) -> Fraction:
        """Symbol duration as an exact rational, for drift-free bookkeeping."""
        return Fraction(self.n_samples, self.bw)


def make_params(sf: int, bw: int, cr_denominator: int, osf: int) -> ModemParams:
    """Validate raw parameters and derive all constants.

    Raises a distinct error type per out-of-range field.
    """
    if sf not in VALID_SF:
        raise InvalidSpreadingFactorError(f"sf must be in {VALID_SF}, got {sf}")
    if cr_denominator not in VALID_CR_DENOMINATORS:
        raise InvalidCodingRateError(
            f"cr_denominator must be in {VALID_CR_DENOMINATORS}, got {cr_denominator}"
        )
    if int(bw) != bw or bw <= 0:
        raise InvalidBandwidthError(f"bw must be a positive integer in Hz, got {bw}")
    if int(osf) != osf or osf < 1:
        raise InvalidOversamplingError(f"osf must be an integer >= 1, got {osf}")
    return ModemParams(sf=int(sf), bw=int(bw), cr_denominator=int(cr_denominator), osf=int(osf))


@dataclass(frozen=True)
class SampleBuffer:
    """Complex baseband samples tagged with the rate they were produced at."""

    samples: np.ndarray
    rate_tag: RateTag = RateTag.BASEBAND

    def __post_init__(self):
        samples = np.asarray(self.samples)
        if samples.ndim != 1 or samples.size == 0:
            raise ValueError("SampleBuffer requires a non-empty 1-D sample array")
        if not np.isfinite(samples).all():
            raise ValueError("SampleBuffer samples must all be finite")
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return len(self.samples)


def _canonical_split(value: float) -> tuple[int, float]:
    """Split value into integer + fraction with the fraction in (-0.5, 0.5]."""
    integer = int(np.ceil(value - 0.5))
    return integer, value - integer


@dataclass(frozen=True)
class OffsetEstimate:
    """The four synchronization unknowns and their derived composites.

    Fractions live in (-0.5, 0.5]. A positive STO means the receiver's
    window grid lags the packet start, so integer offsets shift the
    demodulated peak of a symbol s to (s + l_sto + l_cfo) mod N.
    """

    l_cfo: int
    lambda_cfo: float
    l_sto: int
    lambda_sto: float

    def __post_init__(self):
        for name in ("lambda_cfo", "lambda_sto"):
            value = getattr(self, name)
            if not -0.5 < value <= 0.5:
                raise ValueError(f"{name} must lie in (-0.5, 0.5], got {value}")

    def delta_fc_hz(self, params: ModemParams) -> float:
        """Carrier frequency offset in Hz: (bw/N) * (l_cfo + lambda_cfo)."""
        return params.bw / params.n_samples * (self.l_cfo + self.lambda_cfo)

    @property
    def tau_samples(self) -> float:
        """Sampling time offset in baseband samples: l_sto + lambda_sto."""
        return self.l_sto + self.lambda_sto

    @classmethod
    def from_composite(cls, cfo_total: float, sto_total: float) -> "OffsetEstimate":
        """Canonical decomposition of composite offsets (fractions in (-0.5, 0.5])."""
        l_cfo, lambda_cfo = _canonical_split(cfo_total)
        l_sto, lambda_sto = _canonical_split(sto_total)
        return cls(l_cfo=l_cfo, lambda_cfo=lambda_cfo, l_sto=l_sto, lambda_sto=lambda_sto)
