"""Packet-level orchestration.

Tx: preamble construction (8 upchirps, two network-identifier symbols,
2.25 downchirps) and frame assembly at Nyquist rate.

Rx: the DETECT -> SYNC -> HEADER -> PAYLOAD state machine. The receiver
consumes one N-sample window per push and reads symbols out of a
two-window circular buffer, so it never re-visits samples. Fractional
corrections are commanded to the DFE between windows via
`requested_phase`; the driving loop applies them before producing the
next window (see `run_receiver`).

Sync schedule (d = window where three adjacent decisions matched):
  d-1, d   fractional CFO from the two buffered upchirp spectra; the
           dechirp references absorb the correction immediately
  d+1      first-pass fractional STO (argmax approximation), decimation
           phase update commanded
  d+2...   track the upchirp run (s_up refreshed each window) until the
           decision jumps by the first netid value
  netid    both identifier symbols validated within +-2 bins
  netid+1  first full downchirp: s_down, integer CFO/STO resolution,
           second-pass fractional STO on the downchirp spectrum, final
           phase update, header start position computed
  header/payload demodulated from the circular buffer at the resolved
  offset; integer CFO is subtracted from each decision before Gray
  demapping.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .chirp import base_downchirp, base_upchirp, modulate_symbol
from .codec import (
    FrameHeader,
    decode_header_block,
    decode_payload_symbols,
    encode_frame,
    payload_symbol_count,
)
from .core import ModemError, ModemParams, OffsetEstimate
from .demod import CircularWindow, DftSpectrum, demod_symbol, dft_spectrum, dechirp
from .sync import (
    apply_cfo_to_reference,
    detect_preamble,
    estimate_frac_cfo,
    estimate_frac_sto,
    resolve_integer_offsets,
    signed_residue,
)

__all__ = [
    "DEFAULT_NETID",
    "PREAMBLE_SYMBOLS",
    "PreamblePlan",
    "build_preamble",
    "transmit_frame",
    "frame_symbol_count",
    "payload_data_rate",
    "RxPhase",
    "DecodedFrame",
    "Receiver",
    "run_receiver",
]

DEFAULT_NETID = (8, 16)
PREAMBLE_UPCHIRPS = 8
PREAMBLE_DOWNCHIRPS = 2.25
PREAMBLE_SYMBOLS = PREAMBLE_UPCHIRPS + 2 + PREAMBLE_DOWNCHIRPS  # 12.25
_NETID_TOLERANCE = 2
_MAX_TRACK_WINDOWS = 12


@dataclass(frozen=True)
class PreamblePlan:
    upchirps: int
    netid: tuple[int, int]
    downchirps: float
    n_samples: int


def build_preamble(params: ModemParams, netid: tuple[int, int] = DEFAULT_NETID) -> tuple[PreamblePlan, np.ndarray]:
    """Preamble waveform: upchirp run, netid symbols, 2.25 downchirps."""
    n = params.n_samples
    up = base_upchirp(params)
    down = base_downchirp(params)
    parts = [up] * PREAMBLE_UPCHIRPS
    parts.append(modulate_symbol(netid[0], params))
    parts.append(modulate_symbol(netid[1], params))
    parts.extend([down, down, down[: n // 4]])
    samples = np.concatenate(parts)
    plan = PreamblePlan(PREAMBLE_UPCHIRPS, tuple(netid), PREAMBLE_DOWNCHIRPS, len(samples))
    return plan, samples


def frame_symbol_count(payload_len: int, params: ModemParams, has_crc: bool = True) -> int:
    """Data symbols in a frame: header block plus payload blocks."""
    return 8 + payload_symbol_count(payload_len, params, has_crc)


def payload_data_rate(params: ModemParams) -> float:
    """Raw payload-section throughput in bit/s, from the generated sample
    counts: each symbol of N samples carries SF coded bits at rate 4/n."""
    return params.sf * (4.0 / params.cr_denominator) * params.bw / params.n_samples


def transmit_frame(
    payload: bytes,
    params: ModemParams,
    has_crc: bool = True,
    netid: tuple[int, int] = DEFAULT_NETID,
) -> np.ndarray:
    """Full frame at Nyquist rate: preamble then modulated data symbols."""
    symbols = encode_frame(payload, params, has_crc=has_crc)
    _, preamble = build_preamble(params, netid)
    waves = [preamble]
    waves.extend(modulate_symbol(s, params) for s in symbols)
    return np.concatenate(waves)


# ---------------------------------------------------------------------------
# Receiver
# ---------------------------------------------------------------------------

class RxPhase(Enum):
    DETECT = "detect"
    SYNC = "sync"
    HEADER = "header"
    PAYLOAD = "payload"
    DONE = "done"


class _SyncStep(Enum):
    FRAC_STO = "frac_sto"
    TRACK = "track"
    NETID2 = "netid2"
    DOWN = "down"
    DOWN2 = "down2"


@dataclass
class DecodedFrame:
    payload: bytes
    header: FrameHeader
    offsets: OffsetEstimate
    crc_ok: bool


class Receiver:
    """Streaming packet receiver over N-sample windows.

    Push windows with `push_window`; a decoded payload is returned exactly
    once per packet. After each push the driver must honor
    `requested_phase` (if not None) before producing the next window.
    Any sync or decode failure resets the machine to DETECT; the failure
    reason is kept in `last_error`.
    """

    def __init__(self, params: ModemParams, netid: tuple[int, int] = DEFAULT_NETID,
                 initial_phase: int = 0):
        self.params = params
        self.netid = tuple(netid)
        n = params.n_samples
        self._ref_up_base = np.conj(base_upchirp(params))
        self._ref_down_base = base_upchirp(params)
        self.circular = CircularWindow(np.zeros(2 * n, dtype=np.complex128))
        self.requested_phase: int | None = None
        self.last_error: str | None = None
        self.windows_seen = 0
        self._dfe_phase = initial_phase % params.osf
        # Signed fractional-sample movement of the sampling grid since the
        # start of the stream; offsets are reported relative to the grid
        # the channel placed the packet on, so this survives resets.
        self._phase_moved = 0.0
        self._reset()

    # -- state management ---------------------------------------------------

    def _reset(self) -> None:
        self.phase = RxPhase.DETECT
        self._sync_step = _SyncStep.FRAC_STO
        self._recent: list[tuple[int, DftSpectrum]] = []
        self._ref_up = self._ref_up_base
        self._ref_down = self._ref_down_base
        self.lambda_cfo_hat = 0.0
        self._run_value = 0
        self._track_count = 0
        self._track_misses = 0
        self._netid1_window = -1
        self._netid1_mag = 0.0
        self._netid_direct16 = False
        self._run_mag_sum = 0.0
        self._run_mag_count = 0
        self._s_up = 0
        self._l_cfo = 0
        self._l_sto = 0
        self._sto_coarse = 0.0
        self._sto_refined = 0.0
        self._down_mag = 0.0
        self._down2_mag = 0.0
        self._moved_at_resolution = 0.0
        self._header_start = -1
        self._next_symbol = 0
        self.decisions: list[int] = []
        self.symbols_expected = 0
        self._data_symbols: list[int] = []
        self._header: FrameHeader | None = None
        self.offsets: OffsetEstimate | None = None

    def _abort(self, reason: str) -> None:
        self.last_error = reason
        self._reset()

    def _request_phase_step(self, steps: int) -> None:
        """Move the decimation index by `steps` polyphase positions.

        The grid movement is the absolute-phase difference: a command
        that wraps modulo R shifts the sampling grid by a full sample in
        the other direction, which the integer-offset estimate absorbs.
        """
        if steps == 0:
            return
        old = self._dfe_phase
        self._dfe_phase = (old + steps) % self.params.osf
        self.requested_phase = self._dfe_phase
        self._phase_moved += (self._dfe_phase - old) / self.params.osf

    @property
    def dfe_phase(self) -> int:
        """Decimation phase the receiver believes the DFE is using."""
        return self._dfe_phase

    # -- window processing ----------------------------------------------------

    def push_window(self, window: np.ndarray) -> DecodedFrame | None:
        n = self.params.n_samples
        if len(window) != n:
            raise ValueError(f"windows must hold exactly {n} samples")
        self.requested_phase = None
        self.circular.write_half(self.windows_seen, np.asarray(window, dtype=np.complex128))
        self.windows_seen += 1
        handler = {
            RxPhase.DETECT: self._on_detect,
            RxPhase.SYNC: self._on_sync,
            RxPhase.HEADER: self._on_data,
            RxPhase.PAYLOAD: self._on_data,
        }.get(self.phase)
        if handler is None:  # DONE: stay idle
            return None
        return handler()

    def _demod_aligned(self, reference: np.ndarray) -> tuple[int, DftSpectrum]:
        start = ((self.windows_seen - 1) % 2) * self.params.n_samples
        return demod_symbol(self.circular, start, reference)

    # -- DETECT ---------------------------------------------------------------

    def _on_detect(self):
        decision, spectrum = self._demod_aligned(self._ref_up)
        self._recent.append((decision, spectrum))
        if len(self._recent) > 3:
            self._recent.pop(0)
        decisions = [d for d, _ in self._recent]
        if not detect_preamble(decisions, self.params.n_samples):
            return None
        # The CFO pair must be two comparable preamble windows; a packet
        # edge (or the filter ring-in before it) shows up as a large peak
        # magnitude imbalance, in which case detection waits one window.
        mag_prev = self._recent[-2][1].peak_magnitude
        mag_now = spectrum.peak_magnitude
        if min(mag_prev, mag_now) < 0.5 * max(mag_prev, mag_now):
            return None
        try:
            self.lambda_cfo_hat = estimate_frac_cfo(self._recent[-2][1], self._recent[-1][1])
        except ModemError:
            return None
        n = self.params.n_samples
        self._ref_up = apply_cfo_to_reference(self._ref_up_base, self.lambda_cfo_hat, n)
        self._ref_down = apply_cfo_to_reference(self._ref_down_base, self.lambda_cfo_hat, n)
        self._run_value = decisions[-1]
        self.phase = RxPhase.SYNC
        self._sync_step = _SyncStep.FRAC_STO
        return None

    # -- SYNC -----------------------------------------------------------------

    def _on_sync(self):
        step = self._sync_step
        if step == _SyncStep.FRAC_STO:
            return self._sync_frac_sto()
        if step == _SyncStep.TRACK:
            return self._sync_track()
        if step == _SyncStep.NETID2:
            return self._sync_netid2()
        if step == _SyncStep.DOWN:
            return self._sync_down()
        return self._sync_down2()

    def _sync_frac_sto(self):
        decision, spectrum = self._demod_aligned(self._ref_up)
        osf = self.params.osf
        n = self.params.n_samples
        try:
            frac = estimate_frac_sto(spectrum, signed_residue(decision, n), n)
        except ModemError:
            self._abort("degenerate_spectrum")
            return None
        if osf > 1:
            self._request_phase_step(-int(np.round(osf * frac)))
        self._run_value = decision
        self._s_up = decision
        self._track_count = 0
        self._sync_step = _SyncStep.TRACK
        return None

    def _sync_track(self):
        n = self.params.n_samples
        decision, spectrum = self._demod_aligned(self._ref_up)
        delta = signed_residue(decision - self._run_value, n)
        if abs(delta) <= _NETID_TOLERANCE:
            self._run_value = decision
            self._s_up = decision
            self._run_mag_sum += spectrum.peak_magnitude
            self._run_mag_count += 1
            self._track_count += 1
            self._track_misses = 0
            if self._track_count > _MAX_TRACK_WINDOWS:
                self._abort("sync_failed")
            return None
        if abs(signed_residue(decision - self._s_up - self.netid[0], n)) <= _NETID_TOLERANCE:
            self._netid1_window = self.windows_seen - 1
            self._netid1_mag = spectrum.peak_magnitude
            self._sync_step = _SyncStep.NETID2
            return None
        # A heavily straddled first identifier symbol can lose both of its
        # boundary windows; the second identifier then shows up directly.
        if abs(signed_residue(decision - self._s_up - self.netid[1], n)) <= _NETID_TOLERANCE:
            self._netid1_window = self.windows_seen - 2
            self._netid_direct16 = True
            self._sync_step = _SyncStep.DOWN
            return None
        # One inexplicable decision is tolerated as noise; two in a row
        # mean the preamble is gone.
        self._track_misses += 1
        if self._track_misses >= 2:
            self._abort("sync_failed")
        return None

    def _sync_netid2(self):
        n = self.params.n_samples
        decision, spectrum = self._demod_aligned(self._ref_up)
        if abs(signed_residue(decision - self._s_up - self.netid[1], n)) <= _NETID_TOLERANCE:
            self._sync_step = _SyncStep.DOWN
            return None
        # The first match may have fired one window early on a straddled
        # symbol; allow the identifier pair to slide once.
        if abs(signed_residue(decision - self._s_up - self.netid[0], n)) <= _NETID_TOLERANCE:
            self._netid1_window = self.windows_seen - 1
            self._netid1_mag = spectrum.peak_magnitude
            return None
        # A single corrupted second-identifier decision should not kill
        # the packet: proceed and let the integer resolution and header
        # checksum arbitrate. Genuinely false identifiers still die there.
        self._sync_step = _SyncStep.DOWN
        return None

    def _sync_down(self):
        n = self.params.n_samples
        osf = self.params.osf
        s_down, spectrum = self._demod_aligned(self._ref_down)
        l_cfo, l_sto = resolve_integer_offsets(self._s_up, s_down, n)
        if abs(l_cfo) > n // 4:
            # Beyond N/4 the halved-sum CFO is ambiguous (documented limit).
            self._abort("sync_failed")
            return None
        self._l_cfo = l_cfo
        self._l_sto = l_sto
        self._down_mag = spectrum.peak_magnitude
        # Integer lag is valid at the current grid position; later phase
        # steps that wrap the register move the grid by a whole sample,
        # which the header read position must absorb.
        self._moved_at_resolution = self._phase_moved
        residual = 0.0
        if osf > 1:
            try:
                # The downchirp sees the timing offset with reversed
                # sign; the rotation parameter is the integer STO itself
                # (it tracks the chirp-boundary position, which does not
                # depend on the chirp direction).
                residual = -estimate_frac_sto(spectrum, l_sto, n)
            except ModemError:
                residual = 0.0
        # Composite STO relative to the sampling grid at stream start:
        # what is measured now, minus how far the grid has been moved.
        self._sto_coarse = l_sto + residual - self._phase_moved
        if osf > 1:
            self._request_phase_step(-int(np.round(osf * residual)))
        self._sync_step = _SyncStep.DOWN2
        return None

    def _sync_down2(self):
        # Second full downchirp, re-demodulated after the phase update:
        # refines the fractional STO with the resolved integer in hand.
        n = self.params.n_samples
        osf = self.params.osf
        _, spectrum = self._demod_aligned(self._ref_down)
        self._down2_mag = spectrum.peak_magnitude
        residual = 0.0
        if osf > 1:
            try:
                residual = -estimate_frac_sto(spectrum, self._l_sto, n)
            except ModemError:
                residual = 0.0
        # The refined fraction is measured against whatever integer lag
        # holds now; the coarse estimate pins the integer turn.
        refined = residual - self._phase_moved
        refined += round(self._sto_coarse - refined)
        if self._down2_mag >= 0.8 * self._down_mag:
            self._finish_sync(refined)
        else:
            # This window was weak (identifier label may have slipped a
            # symbol); the first, cleaner downchirp measurement wins.
            self._finish_sync(self._sto_coarse)
        if osf > 1:
            self._request_phase_step(-int(np.round(osf * residual)))
        # Current integer lag: the resolved value plus any whole samples
        # the grid moved through since (phase-register wraps).
        l_now = self._l_sto + round(self._phase_moved - self._moved_at_resolution)
        # Demodulation starts one symbol ahead of the nominal header
        # position: near a half-symbol lag the identifier anchor can sit
        # one window off either way, so three candidate header lanes are
        # collected and the header checksum arbitrates (see _on_data).
        self._header_start = (self._netid1_window + 3) * n + n // 4 - l_now
        self._next_symbol = 0
        self._data_symbols = []
        # A large positive lag puts the first lane's symbol inside the
        # circular buffer right now; catch up within this push.
        return self._on_data()

    def _finish_sync(self, sto_total: float) -> None:
        cfo_total = self._l_cfo + self.lambda_cfo_hat
        self.offsets = OffsetEstimate.from_composite(cfo_total, sto_total)
        self.phase = RxPhase.HEADER

    # -- HEADER / PAYLOAD -------------------------------------------------------

    # Candidate header lanes, in preference order: nominal anchor first,
    # then one window late, then one window early.
    _LANE_ORDER = (1, 0, 2)

    def _try_commit_header(self):
        """Once three symbols past the earliest lane's header block are
        in, pick the lane whose header checksum validates."""
        for lane in self._LANE_ORDER:
            try:
                header = decode_header_block(
                    self._data_symbols[lane:lane + 8], self.params
                )
            except ModemError:
                continue
            self._lane = lane
            self._header = header
            self.symbols_expected = lane + 8 + payload_symbol_count(
                header.payload_len, self.params, header.has_crc
            )
            self.phase = RxPhase.PAYLOAD
            return True
        self._abort("bad_header:no_lane_validates")
        return False

    def _on_data(self):
        n = self.params.n_samples
        result = None
        while self._header_start + (self._next_symbol + 1) * n <= self.windows_seen * n:
            start = self._header_start + self._next_symbol * n
            if start < (self.windows_seen - 2) * n:
                self._abort("buffer_overrun")
                return None
            decision, _ = demod_symbol(self.circular, start % (2 * n), self._ref_up)
            corrected = (decision - self._l_cfo) % n
            self.decisions.append(corrected)
            self._data_symbols.append(corrected)
            self._next_symbol += 1

            if self.phase == RxPhase.HEADER and len(self._data_symbols) == 10:
                if not self._try_commit_header():
                    return None

            if self.phase == RxPhase.PAYLOAD and len(self._data_symbols) == self.symbols_expected:
                try:
                    payload = decode_payload_symbols(
                        self._data_symbols[self._lane + 8:], self._header, self.params
                    )
                except ModemError as exc:
                    self._abort(f"decode_failed:{type(exc).__name__}")
                    return None
                result = DecodedFrame(
                    payload=payload,
                    header=self._header,
                    offsets=self.offsets,
                    crc_ok=True,
                )
                self._reset()
                return result
        return result


def run_receiver(dfe_stream, receiver: Receiver, max_windows: int | None = None):
    """Drive a DfeStream into a Receiver, honoring phase requests between
    windows. Returns the first decoded frame, or None if the stream ends."""
    if dfe_stream.phase != receiver.dfe_phase:
        raise ValueError("receiver and DFE disagree on the initial decimation phase")
    count = 0
    for window in dfe_stream.windows():
        result = receiver.push_window(window)
        if receiver.requested_phase is not None:
            dfe_stream.set_phase(receiver.requested_phase)
        if result is not None:
            return result
        count += 1
        if max_windows is not None and count >= max_windows:
            return None
    return None
