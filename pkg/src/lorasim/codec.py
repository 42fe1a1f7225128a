"""Bit-level Tx/Rx processing: whitening, Hamming FEC, diagonal
interleaving, Gray mapping, CRC, header packing, and the frame codec
that chains them.

Wire conventions (this artifact defines its own; commercial-radio
bit-exactness is out of scope):

* Whitening: 8-bit Fibonacci LFSR x^8+x^6+x^5+x^4+1, seed 0xFF. The
  current state is the whitening byte; the register then advances 8
  single-bit steps per byte. Applied to payload+CRC, never the header.
* Hamming(4, n): parities p0=d0^d1^d2, p1=d1^d2^d3, p2=d0^d1^d3,
  p3=d0^d2^d3; codeword bits [d0..d3, p0..p3] LSB-first; n=7 drops p3,
  n=6 drops p2 and p3.
* Interleaver: symbol[j] bit i = codeword[(i+j) mod SF] bit j.
* Bytes split high nibble first.
* Header: 20 bits len(8)|cr(3)|has_crc(1)|checksum(8) packed MSB-first,
  cr field stores cr_denominator-5, checksum = CRC-8 (poly 0x07, init 0)
  over the first 12 bits left-padded to two bytes. Header codewords are
  always n=8 and fill the first interleaver block, padded with zero
  nibbles.
* CRC-16/CCITT (poly 0x1021, init 0, no reflection) appended low byte
  first, before whitening.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    BadHeaderChecksumError,
    InvalidCrFieldError,
    CrcMismatchError,
    ModemParams,
    TruncatedSymbolStreamError,
    UncorrectableCodewordError,
)

__all__ = [
    "FrameHeader",
    "whiten",
    "whitening_sequence",
    "hamming_encode",
    "hamming_decode",
    "interleave",
    "deinterleave",
    "gray_map_rx",
    "gray_demap_tx",
    "crc16",
    "crc8",
    "build_header",
    "parse_header",
    "encode_frame",
    "decode_frame",
    "decode_header_block",
    "decode_payload_symbols",
    "payload_symbol_count",
    "HEADER_NIBBLES",
]

HEADER_NIBBLES = 5
_LFSR_TAPS = (7, 5, 4, 3)  # bit indices for x^8 + x^6 + x^5 + x^4 + 1
_LFSR_SEED = 0xFF


# ---------------------------------------------------------------------------
# Whitening
# ---------------------------------------------------------------------------

def whitening_sequence(length: int) -> bytes:
    """First `length` bytes of the whitening PRBS."""
    out = bytearray(length)
    state = _LFSR_SEED
    for i in range(length):
        out[i] = state
        for _ in range(8):
            fb = 0
            for t in _LFSR_TAPS:
                fb ^= (state >> t) & 1
            state = ((state << 1) | fb) & 0xFF
    return bytes(out)


def whiten(data: bytes) -> bytes:
    """XOR with the whitening PRBS; applying twice restores the input."""
    if len(data) == 0:
        raise ValueError("whiten requires a non-empty input")
    prbs = whitening_sequence(len(data))
    return bytes(a ^ b for a, b in zip(data, prbs))


# ---------------------------------------------------------------------------
# Hamming (4, n)
# ---------------------------------------------------------------------------

def hamming_encode(nibble: int, cr_denominator: int) -> int:
    """Encode a nibble into an n-bit codeword, bits [d0..d3, p0..p3][:n]."""
    if not 0 <= nibble <= 0xF:
        raise ValueError(f"nibble out of range: {nibble}")
    d0 = nibble & 1
    d1 = (nibble >> 1) & 1
    d2 = (nibble >> 2) & 1
    d3 = (nibble >> 3) & 1
    p0 = d0 ^ d1 ^ d2
    p1 = d1 ^ d2 ^ d3
    p2 = d0 ^ d1 ^ d3
    p3 = d0 ^ d2 ^ d3
    word = nibble | (p0 << 4) | (p1 << 5) | (p2 << 6) | (p3 << 7)
    return word & ((1 << cr_denominator) - 1)


# Syndrome (s0|s1<<1|s2<<2|s3<<3) -> codeword bit to flip, for n=8 and n=7.
# Weight-3 syndromes point at data bits, weight-1 at the parity bit itself.
_SYNDROME_FLIP_8 = {
    0b0000: None,
    0b1101: 0, 0b0111: 1, 0b1011: 2, 0b1110: 3,
    0b0001: 4, 0b0010: 5, 0b0100: 6, 0b1000: 7,
}
_SYNDROME_FLIP_7 = {
    0b000: None,
    0b101: 0, 0b111: 1, 0b011: 2, 0b110: 3,
    0b001: 4, 0b010: 5, 0b100: 6,
}


def _syndrome(word: int, n_parity: int) -> int:
    d0 = word & 1
    d1 = (word >> 1) & 1
    d2 = (word >> 2) & 1
    d3 = (word >> 3) & 1
    expected = (d0 ^ d1 ^ d2, d1 ^ d2 ^ d3, d0 ^ d1 ^ d3, d0 ^ d2 ^ d3)
    syn = 0
    for k in range(n_parity):
        received = (word >> (4 + k)) & 1
        syn |= (received ^ expected[k]) << k
    return syn


def hamming_decode(codeword: int, cr_denominator: int) -> tuple[int, bool]:
    """Decode one codeword, returning (nibble, corrected-or-flagged).

    n=8: corrects any single error; a syndrome inconsistent with a single
    flip raises UncorrectableCodewordError (double-error detection).
    n=7: corrects any single error.
    n=6: detects errors only; the flag is set and the data bits are
    returned unmodified.
    """
    if not 0 <= codeword < (1 << cr_denominator):
        raise ValueError(f"codeword wider than {cr_denominator} bits: {codeword:#x}")
    if cr_denominator == 6:
        syn = _syndrome(codeword, 2)
        return codeword & 0xF, syn != 0
    if cr_denominator == 7:
        syn = _syndrome(codeword, 3)
        flip = _SYNDROME_FLIP_7[syn]
    else:
        syn = _syndrome(codeword, 4)
        try:
            flip = _SYNDROME_FLIP_8[syn]
        except KeyError:
            raise UncorrectableCodewordError(
                f"syndrome {syn:#06b} inconsistent with any single bit flip"
            ) from None
    if flip is None:
        return codeword & 0xF, False
    return (codeword ^ (1 << flip)) & 0xF, True


def _hamming_decode_lenient(codeword: int, cr_denominator: int) -> int:
    """Frame-decode path: uncorrectable words pass their data bits through
    so the CRC (or header checksum) can report the failure."""
    try:
        nibble, _ = hamming_decode(codeword, cr_denominator)
    except UncorrectableCodewordError:
        nibble = codeword & 0xF
    return nibble


# ---------------------------------------------------------------------------
# Diagonal interleaver
# ---------------------------------------------------------------------------

def interleave(codewords: list[int], sf: int, cr_denominator: int) -> list[int]:
    """SF codewords of n bits -> n symbols of SF bits.

    symbol[j] bit i = codeword[(i + j) mod SF] bit j.
    """
    if len(codewords) != sf:
        raise ValueError(f"interleaver block needs exactly {sf} codewords, got {len(codewords)}")
    n = cr_denominator
    symbols = []
    for j in range(n):
        value = 0
        for i in range(sf):
            bit = (codewords[(i + j) % sf] >> j) & 1
            value |= bit << i
        symbols.append(value)
    return symbols


def deinterleave(symbols: list[int], sf: int, cr_denominator: int) -> list[int]:
    """Exact inverse of interleave."""
    n = cr_denominator
    if len(symbols) != n:
        raise ValueError(f"deinterleaver block needs exactly {n} symbols, got {len(symbols)}")
    codewords = [0] * sf
    for j in range(n):
        for i in range(sf):
            bit = (symbols[j] >> i) & 1
            codewords[(i + j) % sf] |= bit << j
    return codewords


# ---------------------------------------------------------------------------
# Gray mapping
# ---------------------------------------------------------------------------

def gray_map_rx(s: int) -> int:
    """Binary-reflected Gray code of a demodulated symbol value."""
    return s ^ (s >> 1)


def gray_demap_tx(bits: int) -> int:
    """Inverse Gray code: the symbol value whose Gray code is `bits`."""
    s = bits
    shift = 1
    while (s >> shift) > 0:
        s ^= s >> shift
        shift <<= 1
    return s


# ---------------------------------------------------------------------------
# CRCs
# ---------------------------------------------------------------------------

def crc16(payload: bytes) -> int:
    """CRC-16/CCITT: poly 0x1021, init 0x0000, no reflection, no final XOR."""
    if len(payload) == 0:
        raise ValueError("crc16 requires a non-empty payload")
    crc = 0
    for byte in payload:
        crc ^= byte << 8
        for _ in range(8):
            crc = ((crc << 1) ^ 0x1021) & 0xFFFF if crc & 0x8000 else (crc << 1) & 0xFFFF
    return crc


def crc8(data: bytes) -> int:
    """CRC-8 with poly 0x07, init 0x00 (header checksum)."""
    crc = 0
    for byte in data:
        crc ^= byte
        for _ in range(8):
            crc = ((crc << 1) ^ 0x07) & 0xFF if crc & 0x80 else (crc << 1) & 0xFF
    return crc


# ---------------------------------------------------------------------------
# Header
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FrameHeader:
    payload_len: int
    cr_denominator: int
    has_crc: bool
    checksum: int


def _header_checksum(payload_len: int, cr_denominator: int, has_crc: bool) -> int:
    first12 = (payload_len << 4) | ((cr_denominator - 5) << 1) | int(has_crc)
    return crc8(bytes([(first12 >> 8) & 0xFF, first12 & 0xFF]))


def build_header(payload_len: int, cr_denominator: int, has_crc: bool) -> tuple[FrameHeader, list[int]]:
    """Build the header and its five n=8 codewords (one per nibble)."""
    if not 1 <= payload_len <= 255:
        raise ValueError(f"payload length must be 1..255 bytes, got {payload_len}")
    if cr_denominator not in (6, 7, 8):
        raise InvalidCrFieldError(f"cr_denominator must be 6..8, got {cr_denominator}")
    checksum = _header_checksum(payload_len, cr_denominator, has_crc)
    header = FrameHeader(payload_len, cr_denominator, bool(has_crc), checksum)
    nibbles = [
        payload_len >> 4,
        payload_len & 0xF,
        ((cr_denominator - 5) << 1) | int(has_crc),
        checksum >> 4,
        checksum & 0xF,
    ]
    return header, [hamming_encode(nib, 8) for nib in nibbles]


def parse_header(nibbles: list[int]) -> FrameHeader:
    """Parse five header nibbles; checksum failure is reported before any
    field-range error so corrupted headers surface consistently."""
    if len(nibbles) < HEADER_NIBBLES:
        raise ValueError(f"header needs {HEADER_NIBBLES} nibbles, got {len(nibbles)}")
    payload_len = (nibbles[0] << 4) | nibbles[1]
    cr_field = (nibbles[2] >> 1) & 0x7
    has_crc = bool(nibbles[2] & 1)
    checksum = (nibbles[3] << 4) | nibbles[4]
    first12 = (payload_len << 4) | (cr_field << 1) | int(has_crc)
    expected = crc8(bytes([(first12 >> 8) & 0xFF, first12 & 0xFF]))
    if checksum != expected:
        raise BadHeaderChecksumError(
            f"header checksum {checksum:#04x} != expected {expected:#04x}"
        )
    cr_denominator = cr_field + 5
    if cr_denominator not in (6, 7, 8):
        raise InvalidCrFieldError(f"invalid coding-rate field {cr_field}")
    if payload_len == 0:
        raise ValueError("header declares a zero-length payload")
    return FrameHeader(payload_len, cr_denominator, has_crc, checksum)


# ---------------------------------------------------------------------------
# Frame codec
# ---------------------------------------------------------------------------

def _bytes_to_nibbles(data: bytes) -> list[int]:
    nibbles = []
    for byte in data:
        nibbles.append(byte >> 4)
        nibbles.append(byte & 0xF)
    return nibbles


def _nibbles_to_bytes(nibbles: list[int]) -> bytes:
    return bytes((nibbles[i] << 4) | nibbles[i + 1] for i in range(0, len(nibbles) - 1, 2))


def payload_symbol_count(payload_len: int, params: ModemParams, has_crc: bool = True) -> int:
    """Symbols in the payload section (header block excluded)."""
    n_nibbles = 2 * (payload_len + (2 if has_crc else 0))
    n_blocks = -(-n_nibbles // params.sf)
    return n_blocks * params.cr_denominator


def _encode_blocks(nibbles: list[int], sf: int, cr_denominator: int) -> list[int]:
    padded = list(nibbles) + [0] * (-len(nibbles) % sf)
    symbols = []
    for blk in range(0, len(padded), sf):
        codewords = [hamming_encode(nib, cr_denominator) for nib in padded[blk:blk + sf]]
        symbols.extend(gray_demap_tx(b) for b in interleave(codewords, sf, cr_denominator))
    return symbols


def encode_frame(payload: bytes, params: ModemParams, has_crc: bool = True) -> list[int]:
    """Payload bytes -> symbol values: header block (n=8) then payload
    blocks at the configured coding rate."""
    if not 1 <= len(payload) <= 255:
        raise ValueError(f"payload must be 1..255 bytes, got {len(payload)}")
    _, header_codewords = build_header(len(payload), params.cr_denominator, has_crc)
    header_block = header_codewords + [hamming_encode(0, 8)] * (params.sf - HEADER_NIBBLES)
    symbols = [gray_demap_tx(b) for b in interleave(header_block, params.sf, 8)]

    data = bytes(payload)
    if has_crc:
        check = crc16(data)
        data += bytes([check & 0xFF, (check >> 8) & 0xFF])
    symbols.extend(_encode_blocks(_bytes_to_nibbles(whiten(data)), params.sf, params.cr_denominator))
    return symbols


def decode_header_block(symbols: list[int], params: ModemParams) -> FrameHeader:
    """Decode the first interleaver block (always 8 symbols, n=8)."""
    if len(symbols) < 8:
        raise TruncatedSymbolStreamError(f"header block needs 8 symbols, got {len(symbols)}")
    bits = [gray_map_rx(s) for s in symbols[:8]]
    codewords = deinterleave(bits, params.sf, 8)
    nibbles = [_hamming_decode_lenient(w, 8) for w in codewords[:HEADER_NIBBLES]]
    return parse_header(nibbles)


def decode_payload_symbols(symbols: list[int], header: FrameHeader, params: ModemParams) -> bytes:
    """Decode the payload section given a parsed header; verifies the CRC."""
    n = header.cr_denominator
    n_nibbles = 2 * (header.payload_len + (2 if header.has_crc else 0))
    n_blocks = -(-n_nibbles // params.sf)
    expected_symbols = n_blocks * n
    if len(symbols) < expected_symbols:
        raise TruncatedSymbolStreamError(
            f"payload needs {expected_symbols} symbols, got {len(symbols)}"
        )
    nibbles: list[int] = []
    for blk in range(n_blocks):
        bits = [gray_map_rx(s) for s in symbols[blk * n:(blk + 1) * n]]
        codewords = deinterleave(bits, params.sf, n)
        nibbles.extend(_hamming_decode_lenient(w, n) for w in codewords)
    data = _nibbles_to_bytes(nibbles[:n_nibbles])
    data = whiten(data)
    if header.has_crc:
        payload, crc_bytes = data[:-2], data[-2:]
        received = crc_bytes[0] | (crc_bytes[1] << 8)
        computed = crc16(payload)
        if received != computed:
            raise CrcMismatchError(f"crc {received:#06x} != computed {computed:#06x}")
        return payload
    return data


def decode_frame(symbols: list[int], params: ModemParams) -> bytes:
    """Full inverse of encode_frame. The decoded header is authoritative
    for the payload coding rate and CRC presence."""
    header = decode_header_block(symbols, params)
    return decode_payload_symbols(symbols[8:], header, params)
