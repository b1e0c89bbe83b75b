"""Achievable-rate bounds for one channel use with a single sample per pulse.

With one sample the transmitted vector of codeword ``n`` is
``x_n[l] = w_{c(l)}[l]``, the steering weight of antenna ``l`` at its carrier,
and the receiver sees ``u = H x_n + noise``. Under equiprobable codewords the
output density is an equal-weight Gaussian mixture centred on the signatures
``H x_n``. Its entropy is lower bounded by evaluating the mixture at the
centres, which gives a computable lower bound on the rate; ``log2 |codebook|``
is the trivial upper bound.

The module also holds the dedicated-antenna Gaussian capacity used as a
reference curve.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .channel import ChannelMatrix, make_rayleigh_channel, make_spatial_decay_channel, snr_to_sigma2
from .core import Codebook, SystemConfig, steering_matrix

LOG2E = math.log2(math.e)
DEFAULT_MAX_CODEWORDS = 4096


@dataclass(frozen=True)
class RatePoint:
    snr_db: float
    lower_bound: float
    upper_bound: float


def gm_log_density(u, signatures, sigma2: float) -> float:
    """``log2`` of the equal-weight complex Gaussian mixture density at ``u``.

    Each component is a proper complex Gaussian with covariance ``sigma2 * I``.
    The sum over components uses a max-shifted log-sum-exp.
    """
    if sigma2 <= 0:
        raise ValueError("sigma2 must be positive")
    s = np.atleast_2d(np.asarray(signatures, dtype=complex))
    if s.shape[0] == 0:
        raise ValueError("signature list is empty")
    u = np.asarray(u, dtype=complex)
    dist = np.sum(np.abs(s - u) ** 2, axis=1)
    ln = logsumexp(-dist / sigma2) - math.log(len(s)) - s.shape[1] * math.log(math.pi * sigma2)
    return float(ln / math.log(2))


def codeword_signatures(h, cfg: SystemConfig, codebook: Codebook | None = None) -> np.ndarray:
    """Noiseless single-sample outputs ``H x_n``, shape ``(len(codebook), n_rx)``."""
    codebook = codebook or Codebook.full(cfg)
    h = np.asarray(getattr(h, "h", h))
    x = steering_matrix(cfg)[codebook.carrier_table, np.arange(cfg.n_tx)]
    return x @ h.T


def _pairwise_sq_dist(s: np.ndarray) -> np.ndarray:
    return np.sum(np.abs(s[:, None, :] - s[None, :, :]) ** 2, axis=-1)


def _bound_from_distances(dist: np.ndarray, n_rx: int, sigma2) -> np.ndarray:
    sigma2 = np.atleast_1d(np.asarray(sigma2, dtype=float))
    if np.any(sigma2 <= 0):
        raise ValueError("sigma2 must be positive")
    n = len(dist)
    # -(1/n) sum_i log2 f(s_i) - n_rx log2(pi e sigma2), with the pi*sigma2 terms cancelled.
    lse = np.array([logsumexp(-dist / s2, axis=1).mean() for s2 in sigma2])
    return math.log2(n) - lse / math.log(2) - n_rx * LOG2E


def rate_lower_bound(h, cfg: SystemConfig, codebook: Codebook | None = None,
                     sigma2: float = 1.0, max_codewords: int = DEFAULT_MAX_CODEWORDS) -> float:
    """Gaussian-mixture lower bound on the rate, bits per channel use.

    Evaluated exactly as a double sum over codeword pairs. The value is a
    bound, so it may be negative at low SNR; no clamping is applied.

    Raises:
        ValueError: non-positive ``sigma2`` or more than ``max_codewords`` codewords.
    """
    codebook = codebook or Codebook.full(cfg)
    if len(codebook) > max_codewords:
        raise ValueError(f"codebook has {len(codebook)} codewords, above the cap of {max_codewords}")
    dist = _pairwise_sq_dist(codeword_signatures(h, cfg, codebook))
    return float(_bound_from_distances(dist, cfg.n_rx, sigma2)[0])


def rate_upper_bound(codebook: Codebook | int) -> float:
    """``log2`` of the codebook size."""
    n = codebook if isinstance(codebook, int) else len(codebook)
    if n < 1:
        raise ValueError("codebook must be nonempty")
    return math.log2(n)


def resolve_channel(channel, cfg: SystemConfig, seed: int = 0, draw: int = 0) -> np.ndarray:
    """Channel matrix from a model name, a :class:`ChannelMatrix` or an array."""
    if isinstance(channel, str):
        if channel == "spatial_decay":
            return make_spatial_decay_channel(cfg).h
        if channel == "rayleigh":
            return make_rayleigh_channel(cfg, seed, draw).h
        raise ValueError(f"unknown channel model {channel!r}")
    ch = channel if isinstance(channel, ChannelMatrix) else ChannelMatrix(channel)
    ch.check(cfg)
    return ch.h


def rate_curve(channel, cfg: SystemConfig, codebook: Codebook | None = None,
               snr_grid: Sequence[float] = (0.0,), draws: int = 100, seed: int = 0,
               max_codewords: int = DEFAULT_MAX_CODEWORDS) -> list[RatePoint]:
    """Lower and upper bounds over an SNR grid.

    For ``channel="rayleigh"`` the lower bound is averaged over ``draws``
    channel realisations; draw ``i`` uses the stream ``(seed, i)``. Any other
    channel is deterministic and evaluated once.
    """
    codebook = codebook or Codebook.full(cfg)
    if len(codebook) > max_codewords:
        raise ValueError(f"codebook has {len(codebook)} codewords, above the cap of {max_codewords}")
    sigma2 = snr_to_sigma2(np.asarray(snr_grid, dtype=float))
    n_draws = draws if isinstance(channel, str) and channel == "rayleigh" else 1
    if n_draws < 1:
        raise ValueError("draws must be at least 1")
    total = np.zeros(len(sigma2))
    for i in range(n_draws):
        h = resolve_channel(channel, cfg, seed, i)
        dist = _pairwise_sq_dist(codeword_signatures(h, cfg, codebook))
        total += _bound_from_distances(dist, cfg.n_rx, sigma2)
    upper = rate_upper_bound(codebook)
    return [RatePoint(float(s), float(lb), upper) for s, lb in zip(snr_grid, total / n_draws)]


# ---------------------------------------------------------------- baselines

def gaussian_capacity(h, sigma2: float, n_antennas: int, power: float = 1.0) -> float:
    """Capacity of a Gaussian MIMO link using the first ``n_antennas`` transmit antennas.

    The transmitter knows the channel and water-fills ``power`` over the
    eigenmodes of ``H_d^H H_d``, where ``H_d`` keeps the first ``n_antennas``
    columns of ``h``.
    """
    h = np.asarray(getattr(h, "h", h))
    if not 1 <= n_antennas <= h.shape[1]:
        raise ValueError(f"n_antennas must lie in [1, {h.shape[1]}]")
    gains = np.linalg.eigvalsh(h[:, :n_antennas].conj().T @ h[:, :n_antennas]) / sigma2
    gains = np.sort(gains[gains > 1e-12])[::-1]
    for m in range(len(gains), 0, -1):
        level = (power + np.sum(1.0 / gains[:m])) / m
        alloc = level - 1.0 / gains[:m]
        if alloc[-1] > 0:
            return float(np.sum(np.log2(1.0 + alloc * gains[:m])))
    return 0.0


def baseline_curve(channel, cfg: SystemConfig, snr_grid: Sequence[float], n_antennas: int,
                   draws: int = 100, seed: int = 0) -> list[float]:
    """Dedicated-antenna capacity per SNR, averaged like :func:`rate_curve`."""
    n_draws = draws if isinstance(channel, str) and channel == "rayleigh" else 1
    out = np.zeros(len(snr_grid))
    for i in range(n_draws):
        h = resolve_channel(channel, cfg, seed, i)
        out += [gaussian_capacity(h, float(snr_to_sigma2(s)), n_antennas) for s in snr_grid]
    return [float(v) for v in out / n_draws]
