"""IQ sample file formats and PER result serialization.

cf32: interleaved little-endian IEEE-754 float32, I then Q per sample.
cs16: interleaved little-endian signed int16, full scale 32767. The file
formats are interchange surfaces and deliberately independent of the
DFE's internal 12-bit grid (12-bit content embeds losslessly in cs16).
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

__all__ = ["write_iq", "read_iq", "write_per_csv", "CS16_FULL_SCALE"]

CS16_FULL_SCALE = 32767.0
_FORMATS = ("cf32", "cs16")


def write_iq(path: str | Path, samples: np.ndarray, fmt: str = "cf32") -> None:
    """Write complex samples to an IQ file in the requested format.

    cs16 inputs must satisfy |I|, |Q| <= 1.0; values are scaled by 32767.
    """
    samples = np.asarray(samples)
    if fmt not in _FORMATS:
        raise ValueError(f"format must be one of {_FORMATS}, got {fmt!r}")
    interleaved = np.empty(2 * len(samples), dtype=np.float64)
    interleaved[0::2] = samples.real
    interleaved[1::2] = samples.imag
    if fmt == "cf32":
        interleaved.astype("<f4").tofile(path)
        return
    if np.max(np.abs(interleaved), initial=0.0) > 1.0:
        raise ValueError("cs16 requires |I|, |Q| <= 1.0; scale the buffer first")
    np.round(interleaved * CS16_FULL_SCALE).astype("<i2").tofile(path)


def read_iq(path: str | Path, fmt: str = "cf32") -> np.ndarray:
    """Read an IQ file back to complex128 samples."""
    if fmt not in _FORMATS:
        raise ValueError(f"format must be one of {_FORMATS}, got {fmt!r}")
    raw = Path(path).read_bytes()
    item = 4 if fmt == "cf32" else 2
    if len(raw) % (2 * item) != 0:
        raise ValueError(
            f"malformed {fmt} file: {len(raw)} bytes is not a multiple of {2 * item}"
        )
    if fmt == "cf32":
        flat = np.frombuffer(raw, dtype="<f4").astype(np.float64)
    else:
        flat = np.frombuffer(raw, dtype="<i2").astype(np.float64) / CS16_FULL_SCALE
    return flat[0::2] + 1j * flat[1::2]


def write_per_csv(rows) -> str:
    """Render PER sweep rows as CSV text, ordered by descending SNR.

    Rows are (snr_db, packets, errors, per) tuples; the per column is
    printed to six significant digits.
    """
    lines = ["snr_db,packets,errors,per"]
    for snr_db, packets, errors, per in sorted(rows, key=lambda r: -r[0]):
        lines.append(f"{snr_db:g},{packets},{errors},{per:.6g}")
    return "\n".join(lines) + "\n"
