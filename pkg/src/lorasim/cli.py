"""Command-line harness: tx (encode to IQ file), rx (decode an IQ file),
per (Monte-Carlo PER sweep to CSV).

Exit codes: 0 success, 1 encode failure, 2 invalid flags, 3 decode
failure (the reason goes to stderr: no_preamble, sync_failed,
bad_header, crc_mismatch).
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .channel import upsample_tx
from .core import ModemError, make_params
from .dfe import DfeConfig, DfeStream, default_fir_taps, load_taps
from .frame import Receiver, RxPhase, frame_symbol_count, transmit_frame
from .iqio import read_iq, write_iq, write_per_csv
from .persim import run_sweep

__all__ = ["main", "cmd_tx", "cmd_rx", "cmd_per"]


def _add_common_params(parser: argparse.ArgumentParser, default_osf: int) -> None:
    parser.add_argument("--sf", type=int, required=True, help="spreading factor (7..12)")
    parser.add_argument("--bw", type=int, default=125000, help="bandwidth in Hz")
    parser.add_argument("--cr", type=int, default=8, help="coding-rate denominator n of (4,n)")
    parser.add_argument("--osf", type=int, default=default_osf, help="oversampling factor R")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lorasim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    tx = sub.add_parser("tx", help="encode a payload and write the frame's IQ samples")
    _add_common_params(tx, default_osf=1)
    group = tx.add_mutually_exclusive_group(required=True)
    group.add_argument("--payload", help="payload as a hex string")
    group.add_argument("--payload-file", help="read payload bytes from a file")
    tx.add_argument("--format", choices=("cf32", "cs16"), default="cf32")
    tx.add_argument("--no-crc", action="store_true", help="omit the payload CRC")
    tx.add_argument("out", help="output IQ file")

    rx = sub.add_parser("rx", help="decode a packet from an IQ file")
    _add_common_params(rx, default_osf=1)
    rx.add_argument("--format", choices=("cf32", "cs16"), default="cf32")
    rx.add_argument("--quantize", action="store_true", help="model 12-bit DFE quantization")
    rx.add_argument("--taps", help="FIR coefficient file (one per line) for the DFE")
    rx.add_argument("infile", help="input IQ file at R times the bandwidth")

    per = sub.add_parser("per", help="Monte-Carlo PER sweep, CSV output")
    per.add_argument("--config", help="key=value config file; flags override")
    # Defaults are applied after the config file is merged, so a flag given
    # on the command line always wins over the file.
    per.add_argument("--sf", type=int, nargs="+", help="spreading factors")
    per.add_argument("--bw", type=int)
    per.add_argument("--cr", type=int)
    per.add_argument("--osf", type=int)
    per.add_argument("--payload-len", type=int)
    per.add_argument("--snr", type=float, nargs="+", help="SNR grid in dB")
    per.add_argument("--trials", type=int)
    per.add_argument("--seed", type=int)
    per.add_argument("--jobs", type=int)
    per.add_argument("--perfect-sync", action="store_true",
                     help="bypass synchronization, feed ground-truth offsets")
    per.add_argument("--quantize", action="store_true")
    per.add_argument("out", help="output CSV (per-SF suffix added for multiple SFs)")
    return parser


def cmd_tx(args) -> int:
    try:
        params = make_params(args.sf, args.bw, args.cr, 1)
    except ModemError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        if args.payload is not None:
            payload = bytes.fromhex(args.payload)
        else:
            payload = Path(args.payload_file).read_bytes()
        baseband = transmit_frame(payload, params, has_crc=not args.no_crc)
    except (ValueError, ModemError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    samples = baseband if args.osf == 1 else upsample_tx(baseband, args.osf)
    try:
        write_iq(args.out, samples, args.format)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    n_symbols = frame_symbol_count(len(payload), params, has_crc=not args.no_crc)
    duration = (12.25 + n_symbols) * params.t_sym
    print(f"symbols: {n_symbols} (+12.25 preamble)")
    print(f"duration: {duration * 1e3:.3f} ms")
    print(f"samples: {len(samples)} at {args.osf}x oversampling -> {args.out}")
    return 0


_FAIL_REASONS = {
    None: "no_preamble",
    "sync_failed": "sync_failed",
    "degenerate_spectrum": "sync_failed",
}


def _failure_reason(receiver: Receiver) -> str:
    err = receiver.last_error
    if err is None:
        return "no_preamble"
    if err.startswith("bad_header"):
        return "bad_header"
    if err.startswith("decode_failed"):
        return "crc_mismatch"
    return _FAIL_REASONS.get(err, "sync_failed")


def cmd_rx(args) -> int:
    try:
        params = make_params(args.sf, args.bw, args.cr, args.osf)
    except ModemError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        samples = read_iq(args.infile, args.format)
        taps = load_taps(args.taps) if args.taps else default_fir_taps(args.osf)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    config = DfeConfig(fir_taps=taps, osf=args.osf, window_len=params.n_samples,
                       quantize=args.quantize)
    # Pad so a packet ending at the capture edge still fills its last
    # window (a live receiver would simply keep sampling).
    pad = np.zeros(2 * params.n_samples * args.osf, dtype=np.complex128)
    dfe = DfeStream(np.concatenate([samples, pad]), config)
    receiver = Receiver(params)
    result = None
    for window in dfe.windows():
        result = receiver.push_window(window)
        if receiver.requested_phase is not None:
            dfe.set_phase(receiver.requested_phase)
        if result is not None:
            break
    if result is None:
        print(_failure_reason(receiver), file=sys.stderr)
        return 3
    off = result.offsets
    print(f"payload: {result.payload.hex()}")
    print(f"l_cfo: {off.l_cfo}  lambda_cfo: {off.lambda_cfo:+.4f}  "
          f"l_sto: {off.l_sto}  lambda_sto: {off.lambda_sto:+.4f}")
    print(f"crc: {'ok' if result.crc_ok else 'not checked'}")
    return 0


def _load_config_file(path: str) -> dict:
    values: dict[str, str] = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"bad config line (expected key=value): {line!r}")
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip()
    return values


_PER_DEFAULTS = {
    "bw": 125000, "cr": 8, "osf": 16, "payload_len": 11,
    "trials": 1000, "seed": 0, "jobs": 1,
}

_PER_CONVERTERS = {
    "sf": lambda v: [int(x) for x in v.split()],
    "snr": lambda v: [float(x) for x in v.split()],
    "bw": int, "cr": int, "osf": int, "payload_len": int,
    "trials": int, "seed": int, "jobs": int,
}


def _apply_config_defaults(args) -> None:
    """Fill unset `per` options from the config file, then hard defaults."""
    if args.config:
        for key, raw in _load_config_file(args.config).items():
            attr = key.replace("-", "_")
            if attr not in _PER_CONVERTERS:
                raise ValueError(f"unknown config key: {key}")
            if getattr(args, attr) is None:
                setattr(args, attr, _PER_CONVERTERS[attr](raw))
    for attr, default in _PER_DEFAULTS.items():
        if getattr(args, attr) is None:
            setattr(args, attr, default)


def cmd_per(args) -> int:
    try:
        _apply_config_defaults(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if not args.sf or not args.snr:
        print("error: --sf and --snr are required (flags or config file)", file=sys.stderr)
        return 2
    if args.trials < 1:
        print("error: --trials must be >= 1", file=sys.stderr)
        return 2
    out = Path(args.out)
    for sf in args.sf:
        try:
            points = run_sweep(
                sf, args.bw, args.cr, args.snr, args.trials, args.seed,
                payload_len=args.payload_len, osf=args.osf,
                quantize=args.quantize, perfect_sync=args.perfect_sync,
                jobs=args.jobs,
            )
        except (ValueError, ModemError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        rows = [(p.snr_db, p.packets, p.errors, p.per) for p in points]
        target = out if len(args.sf) == 1 else out.with_name(f"{out.stem}_sf{sf}{out.suffix}")
        target.write_text(write_per_csv(rows))
        for p in sorted(points, key=lambda p: -p.snr_db):
            print(f"sf{sf} snr {p.snr_db:+.1f} dB: per {p.per:.4f} ({p.errors}/{p.packets})")
        print(f"wrote {target}")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handler = {"tx": cmd_tx, "rx": cmd_rx, "per": cmd_per}[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
