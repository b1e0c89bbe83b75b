"""Experiment configuration and Monte-Carlo orchestration.

Experiments are described by TOML files with three tables::

    [system]                     # SystemConfig fields
    n_carriers = 7
    n_tx = 6
    steer_angle_deg = 0.0        # or steer_angle in radians
    spacing_wavelengths = 0.5    # or spacing in meters; wavelength of carrier_start
    n_samples = 70

    [channel]
    model = "rayleigh"           # rayleigh | spatial_decay | explicit
    redraw = "per-trial"         # per-trial | fixed
    file = "h.csv"               # explicit model only, relative to the config file
    draws = 100                  # Rayleigh realisations averaged by rate runs

    [experiment]
    seed = 1
    snr_db = [-12.0, -10.0]
    trials = 100000
    decoders = ["ml", "noniter-ml"]
    codebook = "full"            # full, or a path to an allocation codebook file
    n_b = [2, 8, 32]             # codebook study sizes
    known_frequency = false      # decode allocations with the true carrier set
    i_max = 10
    baselines = [1, 2]           # dedicated-antenna reference curves of rate runs

Random numbers
--------------
Trials are processed in blocks of ``block_size``. Block ``b`` draws its bits,
channels and unit-variance noise from the stream ``(seed, b)``, and every SNR
point reuses those draws with the noise scaled to the target variance. Each
block is an independent unit of work; error counts are integers summed per
block, so the number of worker processes cannot change any result.
"""

from __future__ import annotations

import csv
import io
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from .channel import (ChannelMatrix, complex_normal, make_rayleigh_channel, make_rng,
                      make_spatial_decay_channel, rayleigh_batch, read_channel_csv, snr_to_sigma2)
from .codebook import allocation_distance, design_for_config, h_distance
from .core import SPEED_OF_LIGHT, Codebook, SystemConfig, enumerate_allocations
from .decode import DECODER_NAMES, Decoder
from .rate import baseline_curve, rate_curve

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

CSV_VERSION = 1
CHANNEL_MODELS = ("rayleigh", "spatial_decay", "explicit")
REDRAW_MODES = ("per-trial", "fixed")
BUILTIN_CONFIGS = ("rate", "ber", "codebook")
FIXED_CHANNEL_KEY = 1 << 32


@dataclass(frozen=True)
class ExperimentSpec:
    """Everything needed to reproduce one experiment."""

    system: SystemConfig
    channel_model: str = "rayleigh"
    channel_redraw: str = "per-trial"
    channel_file: str | None = None
    channel_draws: int = 100
    seed: int = 0
    snr_db: tuple[float, ...] = (0.0,)
    trials: int = 100_000
    decoders: tuple[str, ...] = DECODER_NAMES
    codebook: str = "full"
    n_b: tuple[int, ...] = ()
    known_frequency: bool = False
    i_max: int = 10
    baselines: tuple[int, ...] = (1, 2)
    block_size: int = 1000
    output: str | None = None

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if not self.snr_db:
            raise ValueError("SNR grid is empty")
        unknown = [d for d in self.decoders if d not in DECODER_NAMES]
        if unknown:
            raise ValueError(f"unknown decoders {unknown}; expected names from {list(DECODER_NAMES)}")
        if self.channel_model not in CHANNEL_MODELS:
            raise ValueError(f"unknown channel model {self.channel_model!r}")
        if self.channel_redraw not in REDRAW_MODES:
            raise ValueError(f"unknown channel redraw mode {self.channel_redraw!r}")
        if self.channel_model == "explicit" and not self.channel_file:
            raise ValueError("explicit channel model needs channel.file")
        if self.block_size < 1 or self.i_max < 1:
            raise ValueError("block_size and i_max must be positive")

    def channel(self) -> ChannelMatrix:
        """The fixed channel used when channels are not redrawn per trial."""
        if self.channel_model == "spatial_decay":
            return make_spatial_decay_channel(self.system)
        if self.channel_model == "explicit":
            return read_channel_csv(self.channel_file, self.system)
        return make_rayleigh_channel(self.system, self.seed, FIXED_CHANNEL_KEY)

    def active_codebook(self) -> Codebook:
        if self.codebook == "full":
            return Codebook.addressable(self.system)
        return Codebook.from_allocation_file(self.system, self.codebook)


# ---------------------------------------------------------------- config IO

_SYSTEM_KEYS = {"carrier_start", "carrier_step", "n_carriers", "n_active", "n_tx", "n_rx",
                "steer_angle", "steer_angle_deg", "spacing", "spacing_wavelengths",
                "pulse_width", "sample_interval", "n_samples"}
_CHANNEL_KEYS = {"model", "redraw", "file", "draws"}
_EXPERIMENT_KEYS = {"seed", "snr_db", "trials", "decoders", "codebook", "n_b", "known_frequency",
                    "i_max", "baselines", "block_size", "output"}


def _check_keys(table: dict, allowed: set, name: str) -> None:
    extra = sorted(set(table) - allowed)
    if extra:
        raise ValueError(f"unknown keys in [{name}]: {', '.join(extra)}")


def system_from_table(table: dict) -> SystemConfig:
    _check_keys(table, _SYSTEM_KEYS, "system")
    kw = dict(table)
    if "steer_angle_deg" in kw:
        if "steer_angle" in kw:
            raise ValueError("give steer_angle or steer_angle_deg, not both")
        kw["steer_angle"] = math.radians(kw.pop("steer_angle_deg"))
    if "spacing_wavelengths" in kw:
        if "spacing" in kw:
            raise ValueError("give spacing or spacing_wavelengths, not both")
        start = kw.get("carrier_start", SystemConfig.carrier_start)
        kw["spacing"] = kw.pop("spacing_wavelengths") * SPEED_OF_LIGHT / start
    return SystemConfig(**kw)


def spec_from_mapping(data: dict, base_dir: Path | None = None) -> ExperimentSpec:
    _check_keys(data, {"system", "channel", "experiment"}, "top level")
    system = system_from_table(data.get("system", {}))
    ch = data.get("channel", {})
    _check_keys(ch, _CHANNEL_KEYS, "channel")
    ex = data.get("experiment", {})
    _check_keys(ex, _EXPERIMENT_KEYS, "experiment")

    def resolve(p):
        if p is None or base_dir is None or Path(p).is_absolute():
            return p
        return str(base_dir / p)

    kw = dict(system=system,
              channel_model=ch.get("model", "rayleigh"),
              channel_redraw=ch.get("redraw", "per-trial"),
              channel_file=resolve(ch.get("file")),
              channel_draws=int(ch.get("draws", 100)))
    for key in ("seed", "trials", "i_max", "block_size"):
        if key in ex:
            kw[key] = int(ex[key])
    if "snr_db" in ex:
        kw["snr_db"] = tuple(float(s) for s in ex["snr_db"])
    for key in ("decoders", "n_b", "baselines"):
        if key in ex:
            kw[key] = tuple(ex[key])
    if "codebook" in ex:
        kw["codebook"] = ex["codebook"] if ex["codebook"] == "full" else resolve(ex["codebook"])
    if "known_frequency" in ex:
        kw["known_frequency"] = bool(ex["known_frequency"])
    if "output" in ex:
        kw["output"] = ex["output"]
    return ExperimentSpec(**kw)


def builtin_config_path(name: str) -> Path:
    """Path of a packaged configuration (``rate``, ``ber`` or ``codebook``)."""
    if name not in BUILTIN_CONFIGS:
        raise ValueError(f"no packaged config named {name!r}")
    return Path(str(resources.files("majorcom") / "configs" / f"{name}.toml"))


def load_spec(source, **overrides) -> ExperimentSpec:
    """Read a TOML experiment file (or packaged config name) and apply overrides."""
    path = Path(source)
    if not path.exists() and str(source) in BUILTIN_CONFIGS:
        path = builtin_config_path(str(source))
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    spec = spec_from_mapping(data, path.parent)
    overrides = {k: v for k, v in overrides.items() if v is not None}
    return replace(spec, **overrides) if overrides else spec


# ------------------------------------------------------------------ records

@dataclass(frozen=True)
class BerRecord:
    snr_db: float
    decoder: str
    bit_errors: int
    bits_total: int
    symbol_errors: int
    symbols: int
    wall_time: float = 0.0
    n_b: int | None = None
    bits_per_symbol: int | None = None

    def __post_init__(self):
        if not 0 <= self.bit_errors <= self.bits_total:
            raise ValueError("bit error count out of range")

    @property
    def ber(self) -> float:
        return self.bit_errors / self.bits_total

    @property
    def ser(self) -> float:
        return self.symbol_errors / self.symbols

    @property
    def ber_std_error(self) -> float:
        """Binomial standard error of :attr:`ber`."""
        p = self.ber
        return math.sqrt(p * (1 - p) / self.bits_total)


# ------------------------------------------------------------------ BER runs

@lru_cache(maxsize=8)
def _decoder(cfg: SystemConfig, freq_ranks: tuple, alloc_ranks: tuple) -> Decoder:
    return Decoder(Codebook(cfg, freq_ranks, alloc_ranks))


def _popcount(x: np.ndarray) -> np.ndarray:
    return np.bitwise_count(x.astype(np.uint64)).astype(np.int64)


def _simulate_block(spec: ExperimentSpec, codebook: Codebook, fixed_h, block: int):
    """Error counts of one block: ``(errors, timing)``.

    ``errors`` has shape ``(n_snr, n_decoders, 2)`` holding bit and symbol
    errors; ``timing`` holds decoding seconds per ``(snr, decoder)``.
    """
    cfg = spec.system
    dec = _decoder(cfg, codebook.freq_ranks, codebook.alloc_ranks)
    n = min(spec.block_size, spec.trials - block * spec.block_size)
    rng = make_rng(spec.seed, block)
    n_alloc_bits = codebook.n_alloc_bits
    sent = rng.integers(0, 1 << codebook.bits_per_symbol, size=n)
    index = (sent >> n_alloc_bits) * len(codebook.alloc_ranks) + (sent & ((1 << n_alloc_bits) - 1))
    h = rayleigh_batch(rng, n, cfg) if fixed_h is None else np.broadcast_to(fixed_h, (n,) + fixed_h.shape)
    noise = complex_normal(rng, (n, cfg.n_rx, cfg.n_samples))
    clean = h @ codebook.transmit_blocks()[index]
    fpos = dec.fpos[index] if spec.known_frequency else None

    errors = np.zeros((len(spec.snr_db), len(spec.decoders), 2), dtype=np.int64)
    timing = np.zeros((len(spec.snr_db), len(spec.decoders)))
    for p, snr in enumerate(spec.snr_db):
        batch = dec.batch(clean + math.sqrt(float(snr_to_sigma2(snr))) * noise, h)
        for d, name in enumerate(spec.decoders):
            t0 = time.perf_counter()
            est = batch.run(name, spec.i_max, fpos=fpos)
            timing[p, d] = time.perf_counter() - t0
            f_est, a_est = np.divmod(est, len(codebook.alloc_ranks))
            packed = (f_est << n_alloc_bits) | a_est
            errors[p, d, 0] = _popcount(packed ^ sent).sum()
            errors[p, d, 1] = np.count_nonzero(est != index)
    return errors, timing


def _block_task(args):
    return _simulate_block(*args)


def run_ber(spec: ExperimentSpec, codebook: Codebook | None = None, threads: int = 1,
            n_b: int | None = None) -> list[BerRecord]:
    """Monte-Carlo bit and symbol error counts per SNR point and decoder."""
    codebook = codebook or spec.active_codebook()
    if spec.known_frequency and any(d not in ("noniter-ml", "noniter-greedy") for d in spec.decoders):
        raise ValueError("known_frequency applies to the non-iterative decoders only")
    fixed_h = None
    if spec.channel_model != "rayleigh" or spec.channel_redraw == "fixed":
        fixed_h = spec.channel().h
    n_blocks = -(-spec.trials // spec.block_size)
    tasks = [(spec, codebook, fixed_h, b) for b in range(n_blocks)]
    errors = np.zeros((len(spec.snr_db), len(spec.decoders), 2), dtype=np.int64)
    timing = np.zeros((len(spec.snr_db), len(spec.decoders)))
    if threads > 1 and n_blocks > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_block_task, tasks))
    else:
        results = map(_block_task, tasks)
    for e, t in results:
        errors += e
        timing += t
    bps = codebook.bits_per_symbol
    return [BerRecord(float(snr), name, int(errors[p, d, 0]), spec.trials * bps,
                      int(errors[p, d, 1]), spec.trials, float(timing[p, d]), n_b, bps)
            for p, snr in enumerate(spec.snr_db) for d, name in enumerate(spec.decoders)]


# ----------------------------------------------------------------- rate runs

@dataclass(frozen=True)
class RateRow:
    snr_db: float
    lower_bound: float
    upper_bound: float
    baselines: tuple[float, ...] = field(default=())


def run_rate(spec: ExperimentSpec) -> list[RateRow]:
    """Rate bounds over the full codeword set plus dedicated-antenna references."""
    cfg = spec.system
    channel = spec.channel_model if spec.channel_model != "explicit" else spec.channel().h
    points = rate_curve(channel, cfg, Codebook.full(cfg), spec.snr_db,
                        draws=spec.channel_draws, seed=spec.seed)
    refs = [baseline_curve(channel, cfg, spec.snr_db, n, spec.channel_draws, spec.seed)
            for n in spec.baselines]
    return [RateRow(p.snr_db, p.lower_bound, p.upper_bound, tuple(r[i] for r in refs))
            for i, p in enumerate(points)]


# ------------------------------------------------------------ codebook study

@dataclass(frozen=True)
class DistancePair:
    reference: int
    other: int
    dist: int
    h_dist: float


def distance_scatter(spec: ExperimentSpec) -> list[DistancePair]:
    """Allocation distance against channel-weighted distance, relative to allocation 0."""
    cfg = spec.system
    allocs = enumerate_allocations(cfg)
    h = spec.channel().h if spec.channel_model != "rayleigh" else \
        make_rayleigh_channel(cfg, spec.seed, FIXED_CHANNEL_KEY).h
    return [DistancePair(0, j, allocation_distance(0, j, allocs), h_distance(0, j, allocs, h, cfg))
            for j in range(1, len(allocs))]


def run_codebook_study(spec: ExperimentSpec, threads: int = 1) -> list[BerRecord]:
    """BER of designed allocation codebooks, one sweep per codebook size."""
    if not spec.n_b:
        raise ValueError("codebook study needs experiment.n_b")
    records = []
    for n_b in spec.n_b:
        designed = design_for_config(spec.system, n_b, spec.seed)
        codebook = Codebook.addressable(spec.system, designed.selected)
        records += run_ber(spec, codebook, threads, n_b=n_b)
    return records


# --------------------------------------------------------------------- CSV

def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.integer):
        return str(int(value))
    return str(value)


def _write_csv(kind: str, header: Sequence[str], rows, out) -> str:
    buf = io.StringIO()
    buf.write(f"# majorcom {kind} v{CSV_VERSION}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    text = buf.getvalue()
    if out is not None:
        Path(out).write_text(text)
    return text


def ber_csv(records: Sequence[BerRecord], out=None, include_timing: bool = False) -> str:
    """CSV of BER records. Timing is opt-in because it changes between runs."""
    header = ["n_b", "bits_per_symbol", "snr_db", "decoder", "bit_errors", "bits_total", "ber",
              "symbol_errors", "symbols", "ser"]
    if include_timing:
        header.append("wall_time")
    rows = []
    for r in records:
        row = [r.n_b, r.bits_per_symbol, r.snr_db, r.decoder, r.bit_errors, r.bits_total, r.ber,
               r.symbol_errors, r.symbols, r.ser]
        rows.append(row + [r.wall_time] if include_timing else row)
    return _write_csv("ber", header, rows, out)


def rate_csv(rows: Sequence[RateRow], baselines: Sequence[int], out=None) -> str:
    header = ["snr_db", "lower_bound", "upper_bound"] + [f"capacity_{n}ant" for n in baselines]
    return _write_csv("rate", header, ([r.snr_db, r.lower_bound, r.upper_bound, *r.baselines]
                                       for r in rows), out)


def scatter_csv(pairs: Sequence[DistancePair], out=None) -> str:
    return _write_csv("distance", ["reference", "other", "dist", "h_dist"],
                      ([p.reference, p.other, p.dist, p.h_dist] for p in pairs), out)


def read_ber_csv(path) -> list[dict]:
    lines = [ln for ln in Path(path).read_text().splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(lines))
