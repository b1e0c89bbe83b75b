"""Channel matrices, noise and received-block formation.

Random draws use numpy's ``Generator`` on the counter-based Philox bit
generator, keyed through ``SeedSequence`` so that independent streams can be
derived from ``(seed, *keys)`` without sharing state. Gaussian samples come
from ``Generator.standard_normal`` (ziggurat method). A proper complex
Gaussian with total variance ``v`` has independent real and imaginary parts of
variance ``v / 2``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import SystemConfig

MODELS = ("spatial_decay", "rayleigh", "explicit")


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    """Independent Philox stream for ``(seed, *keys)``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), *map(int, keys)])))


def complex_normal(rng: np.random.Generator, shape, variance: float = 1.0) -> np.ndarray:
    scale = np.sqrt(variance / 2.0)
    re = rng.standard_normal(shape)
    im = rng.standard_normal(shape)
    return scale * (re + 1j * im)


def snr_to_sigma2(snr_db) -> np.ndarray | float:
    """Noise variance for SNR defined as ``1 / sigma2``."""
    return 10.0 ** (-np.asarray(snr_db, dtype=float) / 10.0)


@dataclass(frozen=True)
class ChannelMatrix:
    h: np.ndarray
    model: str = "explicit"

    def __post_init__(self):
        h = np.asarray(self.h, dtype=complex)
        if h.ndim != 2:
            raise ValueError(f"channel matrix must be 2-D, got shape {h.shape}")
        if not np.all(np.isfinite(h)):
            raise ValueError("channel matrix has non-finite entries")
        if self.model not in MODELS:
            raise ValueError(f"unknown channel model {self.model!r}")
        object.__setattr__(self, "h", h)

    def check(self, cfg: SystemConfig) -> None:
        if self.h.shape != (cfg.n_rx, cfg.n_tx):
            raise ValueError(f"channel shape {self.h.shape} does not match "
                             f"({cfg.n_rx}, {cfg.n_tx})")


def make_spatial_decay_channel(cfg: SystemConfig) -> ChannelMatrix:
    """``h[a, b] = exp(-(|a - b| + 1j * (a - b) * pi) / 4)`` with 0-based indices."""
    a = np.arange(cfg.n_rx)[:, None]
    b = np.arange(cfg.n_tx)[None, :]
    diff = a - b
    return ChannelMatrix(np.exp(-0.25 * (np.abs(diff) + 1j * diff * np.pi)), "spatial_decay")


def make_rayleigh_channel(cfg: SystemConfig, seed: int, *keys: int) -> ChannelMatrix:
    h = complex_normal(make_rng(seed, *keys), (cfg.n_rx, cfg.n_tx))
    return ChannelMatrix(h, "rayleigh")


def rayleigh_batch(rng: np.random.Generator, n: int, cfg: SystemConfig) -> np.ndarray:
    return complex_normal(rng, (n, cfg.n_rx, cfg.n_tx))


def transmit_through(x: np.ndarray, h, sigma2: float, seed: int | np.random.Generator | None = None,
                     carriers: Sequence[int] | None = None) -> np.ndarray:
    """Received block ``h @ x + noise``.

    Args:
        x: transmit block, ``(n_tx, n_samples)``.
        h: a :class:`ChannelMatrix`, a 2-D array, or a sequence of per-carrier
            matrices indexed by carrier; the latter requires ``carriers``.
        sigma2: total complex noise variance per entry; 0 gives the noiseless block.
        seed: integer seed or a ready generator for the noise draw.
        carriers: carrier used by each transmit antenna (per-carrier channels only).
    """
    if sigma2 < 0:
        raise ValueError("sigma2 must be non-negative")
    x = np.asarray(x)
    if isinstance(h, ChannelMatrix):
        h = h.h
    if isinstance(h, np.ndarray) and h.ndim == 2:
        effective = h
    else:
        if carriers is None:
            raise ValueError("per-carrier channels need the carrier of every antenna")
        stack = [np.asarray(m, dtype=complex) for m in h]
        carriers = np.asarray(carriers)
        effective = np.stack([stack[c][:, l] for l, c in enumerate(carriers)], axis=1)
    if effective.shape[1] != x.shape[0]:
        raise ValueError(f"channel has {effective.shape[1]} inputs, block has {x.shape[0]} rows")
    y = effective @ x
    if sigma2 > 0:
        rng = seed if isinstance(seed, np.random.Generator) else make_rng(0 if seed is None else seed)
        y = y + complex_normal(rng, y.shape, sigma2)
    return y


# CSV layout: one line per receive antenna; each line holds n_tx consecutive
# "re,im" pairs, i.e. 2 * n_tx comma-separated floats.

def write_channel_csv(path, h) -> None:
    h = h.h if isinstance(h, ChannelMatrix) else np.asarray(h)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for row in h:
            writer.writerow([repr(float(v)) for z in row for v in (z.real, z.imag)])


def read_channel_csv(path, cfg: SystemConfig | None = None) -> ChannelMatrix:
    rows = []
    with open(Path(path), newline="") as fh:
        for line in csv.reader(fh):
            if not line or line[0].lstrip().startswith("#"):
                continue
            vals = [float(v) for v in line]
            if len(vals) % 2:
                raise ValueError(f"{path}: odd number of values in a row")
            rows.append(np.array(vals[0::2]) + 1j * np.array(vals[1::2]))
    if not rows or len({len(r) for r in rows}) != 1:
        raise ValueError(f"{path}: rows must be nonempty and of equal length")
    ch = ChannelMatrix(np.stack(rows), "explicit")
    if cfg is not None:
        ch.check(cfg)
    return ch
