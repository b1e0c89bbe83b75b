"""Command line interface.

Global options (``--config``, ``--seed``, ``--threads``, ``--out``) may be
given before or after the subcommand. Failures print a single line
``error: kind=<kind> msg=<message>`` to stderr and exit nonzero.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .channel import complex_normal, make_rng, snr_to_sigma2
from .codebook import design_for_config
from .core import (Codebook, SystemConfig, addressable_bits, codeword_space_size,
                   count_allocations, count_frequency_sets, stirling_bit_approx,
                   format_allocation_file)
from .decode import DECODER_NAMES, Decoder
from .rate import rate_upper_bound
from .sim import (ber_csv, distance_scatter, load_spec, rate_csv, run_ber, run_codebook_study,
                  run_rate, scatter_csv, tomllib)

RECEIVED_FORMAT = "majorcom-received"
ENCODE_NOISE_KEY = (1 << 32) + 1
DEFAULT_CONFIG = {"enumerate": "ber", "encode": "ber", "decode": "ber", "ber": "ber",
                  "rate": "rate", "codebook": "codebook"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(",") if v.strip())


def _names(text: str) -> tuple[str, ...]:
    return tuple(v.strip() for v in text.split(",") if v.strip())


def _global_options(defaults: bool) -> argparse.ArgumentParser:
    p = _Parser(add_help=False)
    d = (lambda v: v) if defaults else (lambda v: argparse.SUPPRESS)
    p.add_argument("--config", default=d(None),
                   help="experiment TOML file or packaged name (rate, ber, codebook)")
    p.add_argument("--seed", type=int, default=d(None), help="override experiment.seed")
    p.add_argument("--threads", type=int, default=d(1), help="worker processes for trials")
    p.add_argument("--out", default=d(None), help="output file (default: stdout)")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _global_options(defaults=False)
    parser = _Parser(prog="majorcom", parents=[_global_options(defaults=True)],
                     description="Index-modulation link simulator for carrier-agile arrays.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub.add_parser("enumerate", parents=[common], help="codeword space sizes")

    p = sub.add_parser("encode", parents=[common], help="encode a hex payload into received blocks")
    p.add_argument("--hex", required=True, dest="payload", help="payload as hex digits")
    p.add_argument("--snr-db", type=float, default=60.0)

    p = sub.add_parser("decode", parents=[common], help="decode received blocks to hex")
    p.add_argument("--in", required=True, dest="source", help="file written by encode")
    p.add_argument("--decoder", default="ml", choices=DECODER_NAMES)

    p = sub.add_parser("ber", parents=[common], help="Monte-Carlo bit error rates")
    p.add_argument("--trials", type=int)
    p.add_argument("--snr-db", type=_floats, help="comma separated SNR grid in dB")
    p.add_argument("--decoders", type=_names, help=f"comma separated, from {', '.join(DECODER_NAMES)}")
    p.add_argument("--timing", action="store_true", help="add a wall_time column")

    p = sub.add_parser("rate", parents=[common], help="rate bounds and baselines")
    p.add_argument("--snr-db", type=_floats)
    p.add_argument("--draws", type=int, help="Rayleigh realisations to average")

    p = sub.add_parser("codebook", parents=[common], help="allocation codebook design")
    csub = p.add_subparsers(dest="action", required=True, parser_class=_Parser)
    d = csub.add_parser("design", parents=[common], help="write a designed codebook file")
    d.add_argument("--n-b", type=int, required=True)
    s = csub.add_parser("study", parents=[common], help="BER of designed codebooks")
    s.add_argument("--trials", type=int)
    s.add_argument("--snr-db", type=_floats)
    s.add_argument("--n-b", type=_ints)
    s.add_argument("--scatter", help="also write the distance scatter CSV here")
    s.add_argument("--timing", action="store_true")
    return parser


def _emit(text: str, out) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _spec(args, **overrides):
    source = args.config or DEFAULT_CONFIG[args.command]
    return load_spec(source, seed=args.seed, **overrides)


def cmd_enumerate(args) -> None:
    cfg = _spec(args).system
    n_f, n_p, n_x = count_frequency_sets(cfg), count_allocations(cfg), codeword_space_size(cfg)
    rows = [("frequency_sets", n_f), ("allocations", n_p), ("codewords", n_x),
            ("upper_bound_bits", rate_upper_bound(n_x)),
            ("stirling_bits", stirling_bit_approx(cfg)),
            ("addressable_bits", addressable_bits(n_f) + addressable_bits(n_p))]
    text = "".join(f"{k}={v!r}\n" if isinstance(v, float) else f"{k}={v}\n" for k, v in rows)
    if args.out:
        Path(args.out).write_text("# majorcom enumerate v1\nquantity,value\n" +
                                  "".join(f"{k},{v!r}\n" for k, v in rows))
    sys.stdout.write(text)


def _payload_bits(payload: str) -> np.ndarray:
    payload = payload.strip().lower().removeprefix("0x")
    if not payload or any(c not in "0123456789abcdef" for c in payload):
        raise ValueError(f"payload is not a hex string: {payload!r}")
    return np.array([(int(c, 16) >> s) & 1 for c in payload for s in (3, 2, 1, 0)], dtype=np.int64)


def _complex_to_json(a: np.ndarray):
    return np.stack([a.real, a.imag], axis=-1).tolist()


def _complex_from_json(a) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    return a[..., 0] + 1j * a[..., 1]


def cmd_encode(args) -> None:
    spec = _spec(args)
    cfg, codebook = spec.system, spec.active_codebook()
    bits = _payload_bits(args.payload)
    bps = codebook.bits_per_symbol
    padded = np.concatenate([bits, np.zeros(-len(bits) % bps, dtype=np.int64)])
    index = codebook.bits_to_index(padded.reshape(-1, bps))
    h = spec.channel().h
    sigma2 = float(snr_to_sigma2(args.snr_db))
    noise = complex_normal(make_rng(spec.seed, ENCODE_NOISE_KEY), (len(index), cfg.n_rx, cfg.n_samples))
    y = h @ codebook.transmit_blocks()[index] + math.sqrt(sigma2) * noise
    doc = {"format": RECEIVED_FORMAT, "version": 1, "system": asdict(cfg),
           "alloc_ranks": list(codebook.alloc_ranks), "n_bits": int(len(bits)),
           "snr_db": args.snr_db, "sigma2": sigma2, "h": _complex_to_json(h),
           "blocks": _complex_to_json(y)}
    _emit(json.dumps(doc, sort_keys=True) + "\n", args.out)


def cmd_decode(args) -> None:
    doc = json.loads(Path(args.source).read_text())
    if doc.get("format") != RECEIVED_FORMAT:
        raise ValueError(f"{args.source}: not a {RECEIVED_FORMAT} file")
    cfg = SystemConfig(**doc["system"])
    codebook = Codebook.addressable(cfg, doc["alloc_ranks"])
    y = _complex_from_json(doc["blocks"])
    h = _complex_from_json(doc["h"])
    index = Decoder(codebook).batch(y, h).run(args.decoder)
    bits = codebook.index_to_bits(index).reshape(-1)[: doc["n_bits"]]
    digits = "".join(f"{int(''.join(map(str, bits[i:i + 4])), 2):x}" for i in range(0, len(bits), 4))
    _emit(digits + "\n", args.out)


def cmd_ber(args) -> None:
    spec = _spec(args, trials=args.trials, snr_db=args.snr_db, decoders=args.decoders)
    records = run_ber(spec, threads=args.threads)
    _emit(ber_csv(records, include_timing=args.timing), args.out)


def cmd_rate(args) -> None:
    spec = _spec(args, snr_db=args.snr_db, channel_draws=args.draws)
    _emit(rate_csv(run_rate(spec), spec.baselines), args.out)


def cmd_codebook(args) -> None:
    if args.action == "design":
        spec = _spec(args)
        designed = design_for_config(spec.system, args.n_b, spec.seed)
        _emit(format_allocation_file(spec.system, designed.selected), args.out)
        return
    spec = _spec(args, trials=args.trials, snr_db=args.snr_db, n_b=args.n_b)
    records = run_codebook_study(spec, threads=args.threads)
    _emit(ber_csv(records, include_timing=args.timing), args.out)
    if args.scatter:
        scatter_csv(distance_scatter(spec), args.scatter)


COMMANDS = {"enumerate": cmd_enumerate, "encode": cmd_encode, "decode": cmd_decode,
            "ber": cmd_ber, "rate": cmd_rate, "codebook": cmd_codebook}


def _fail(kind: str, exc) -> int:
    msg = " ".join(str(exc).split()) or type(exc).__name__
    print(f"error: kind={kind} msg={msg}", file=sys.stderr)
    return 2 if kind == "usage" else 1


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.threads < 1:
            raise UsageError("--threads must be at least 1")
        COMMANDS[args.command](args)
    except UsageError as exc:
        return _fail("usage", exc)
    except tomllib.TOMLDecodeError as exc:
        return _fail("config", exc)
    except (OSError, json.JSONDecodeError) as exc:
        return _fail("io", exc)
    except (ValueError, KeyError, TypeError) as exc:
        return _fail("value", exc)
    return 0


if __name__ == "__main__":
    sys.exit(main())
