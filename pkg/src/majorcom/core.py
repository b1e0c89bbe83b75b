"""System configuration, codeword enumeration, bit mapping and waveform synthesis.

A codeword is a pair (frequency selection, antenna allocation). Frequency
selections are stored ascending and allocation group ``k`` always serves the
``k``-th smallest selected carrier, so every physical transmission has exactly
one canonical representation.

Enumeration order
-----------------
* Frequency selections: lexicographic order of the ascending index tuples.
* Allocations: group 0 is chosen first among all antennas, then group 1 among
  the remaining ones, and so on. Within a group the candidate index tuples are
  taken in lexicographic order, which is the descending order of the binary
  group vectors (``[1,1,0,0]`` before ``[1,0,1,0]``). Ranks are therefore mixed
  radix with group 0 most significant.

Only the first ``2**floor(log2 N)`` entries of each enumeration carry bits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0


@dataclass(frozen=True)
class SystemConfig:
    """Physical and dimensional parameters of one transmitter/receiver pair.

    Attributes:
        carrier_start: lowest carrier frequency, Hz.
        carrier_step: spacing of the carrier grid, Hz.
        n_carriers: number of carriers on the grid.
        n_active: carriers transmitted in each pulse.
        n_tx: transmit antennas; must be a multiple of ``n_active``.
        n_rx: receive antennas.
        steer_angle: beam steering angle, radians.
        spacing: distance between adjacent transmit antennas, meters.
        pulse_width: pulse duration, seconds.
        sample_interval: receiver sampling interval, seconds. ``None`` selects
            Nyquist sampling of the full band, ``1 / (n_carriers * carrier_step)``.
        n_samples: samples per pulse. ``None`` derives
            ``floor(pulse_width / sample_interval) + 1``.
    """

    carrier_start: float = 1.9e9
    carrier_step: float = 10e6
    n_carriers: int = 7
    n_active: int = 2
    n_tx: int = 6
    n_rx: int = 4
    steer_angle: float = 0.0
    spacing: float = 0.5 * SPEED_OF_LIGHT / 1.9e9
    pulse_width: float = 1e-6
    sample_interval: float | None = None
    n_samples: int | None = None

    def __post_init__(self):
        for name in ("n_carriers", "n_active", "n_tx", "n_rx"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")
            object.__setattr__(self, name, int(value))
        if self.n_active > self.n_carriers:
            raise ValueError(
                f"n_active={self.n_active} exceeds n_carriers={self.n_carriers}")
        if self.n_tx % self.n_active:
            raise ValueError(
                f"n_tx={self.n_tx} is not a multiple of n_active={self.n_active}")
        if self.carrier_step <= 0 or self.pulse_width <= 0:
            raise ValueError("carrier_step and pulse_width must be positive")
        if self.sample_interval is None:
            object.__setattr__(self, "sample_interval",
                               1.0 / (self.n_carriers * self.carrier_step))
        elif self.sample_interval <= 0:
            raise ValueError("sample_interval must be positive")
        if self.n_samples is None:
            ratio = self.pulse_width / self.sample_interval
            object.__setattr__(self, "n_samples", int(math.floor(ratio + 1e-9)) + 1)
        elif int(self.n_samples) != self.n_samples or self.n_samples < 1:
            raise ValueError(f"n_samples must be a positive integer, got {self.n_samples!r}")
        else:
            object.__setattr__(self, "n_samples", int(self.n_samples))

    @property
    def tx_per_carrier(self) -> int:
        return self.n_tx // self.n_active

    def carrier_frequency(self, index) -> np.ndarray:
        return self.carrier_start + np.asarray(index) * self.carrier_step


@dataclass(frozen=True)
class FrequencySelection:
    """Ascending tuple of the active carrier indices."""

    indices: tuple[int, ...]

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ValueError(f"frequency indices must be strictly increasing: {idx}")
        object.__setattr__(self, "indices", idx)

    def validate(self, cfg: SystemConfig) -> None:
        if len(self.indices) != cfg.n_active:
            raise ValueError(f"expected {cfg.n_active} carriers, got {len(self.indices)}")
        if self.indices[0] < 0 or self.indices[-1] >= cfg.n_carriers:
            raise ValueError(f"carrier index out of range 0..{cfg.n_carriers - 1}")


@dataclass(frozen=True)
class AntennaAllocation:
    """Partition of the transmit antennas into labeled groups.

    ``groups[k]`` is the ascending tuple of antennas that transmit the
    ``k``-th smallest selected carrier.
    """

    groups: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        groups = tuple(tuple(sorted(int(a) for a in g)) for g in self.groups)
        object.__setattr__(self, "groups", groups)

    @classmethod
    def from_labels(cls, labels: Sequence[int], n_groups: int) -> "AntennaAllocation":
        labels = np.asarray(labels)
        return cls(tuple(tuple(np.flatnonzero(labels == k)) for k in range(n_groups)))

    @property
    def labels(self) -> np.ndarray:
        """Group label of every antenna."""
        out = np.empty(sum(len(g) for g in self.groups), dtype=np.int64)
        for k, g in enumerate(self.groups):
            out[list(g)] = k
        return out

    def vectors(self, n_tx: int | None = None) -> np.ndarray:
        """Binary selection vectors, one row per group."""
        n_tx = n_tx if n_tx is not None else sum(len(g) for g in self.groups)
        p = np.zeros((len(self.groups), n_tx), dtype=np.int64)
        for k, g in enumerate(self.groups):
            p[k, list(g)] = 1
        return p

    def validate(self, cfg: SystemConfig) -> None:
        if len(self.groups) != cfg.n_active:
            raise ValueError(f"expected {cfg.n_active} groups, got {len(self.groups)}")
        if any(len(g) != cfg.tx_per_carrier for g in self.groups):
            raise ValueError(f"every group must hold {cfg.tx_per_carrier} antennas")
        flat = sorted(a for g in self.groups for a in g)
        if flat != list(range(cfg.n_tx)):
            raise ValueError("groups must partition the transmit antennas")


@dataclass(frozen=True)
class Codeword:
    freq: FrequencySelection
    alloc: AntennaAllocation

    def validate(self, cfg: SystemConfig) -> None:
        self.freq.validate(cfg)
        self.alloc.validate(cfg)

    def carriers(self) -> np.ndarray:
        """Carrier index used by every transmit antenna."""
        return np.asarray(self.freq.indices)[self.alloc.labels]


# ---------------------------------------------------------------- counting

def count_frequency_sets(cfg: SystemConfig) -> int:
    return math.comb(cfg.n_carriers, cfg.n_active)


def count_allocations(cfg: SystemConfig) -> int:
    return math.factorial(cfg.n_tx) // math.factorial(cfg.tx_per_carrier) ** cfg.n_active


def codeword_space_size(cfg: SystemConfig) -> int:
    """Number of distinct codewords; exact (arbitrary precision integers)."""
    return count_frequency_sets(cfg) * count_allocations(cfg)


def stirling_bit_approx(cfg: SystemConfig) -> float:
    """Large-array approximation of ``log2`` of the codeword count.

    Returns ``K log2 M + L_R log2 K`` with ``K`` active carriers out of ``M``
    and ``L_R`` transmit antennas. The approximation is only meaningful when
    ``n_tx >> n_active`` and ``n_carriers >> n_active``; at small sizes it
    overestimates noticeably (10.64 bits against the exact 8.08 for a
    10-carrier, 4-antenna, 2-active setup).
    """
    return cfg.n_active * math.log2(cfg.n_carriers) + cfg.n_tx * math.log2(cfg.n_active)


def addressable_bits(count: int) -> int:
    if count < 1:
        raise ValueError("cannot address an empty set")
    return count.bit_length() - 1


# ------------------------------------------------------------ enumeration

def enumerate_frequency_sets(cfg: SystemConfig) -> list[FrequencySelection]:
    return [FrequencySelection(c) for c in combinations(range(cfg.n_carriers), cfg.n_active)]


def _allocation_groups(remaining: tuple[int, ...], size: int, n_groups: int):
    if n_groups == 1:
        yield (remaining,)
        return
    for first in combinations(remaining, size):
        rest = tuple(a for a in remaining if a not in first)
        for tail in _allocation_groups(rest, size, n_groups - 1):
            yield (first,) + tail


def enumerate_allocations(cfg: SystemConfig) -> list[AntennaAllocation]:
    return [AntennaAllocation(g) for g in
            _allocation_groups(tuple(range(cfg.n_tx)), cfg.tx_per_carrier, cfg.n_active)]


def _unrank_combination(rank: int, pool: Sequence[int], size: int) -> tuple[int, ...]:
    # lexicographic unranking over positions of ``pool``
    out = []
    start = 0
    n = len(pool)
    for slot in range(size):
        for pos in range(start, n):
            block = math.comb(n - pos - 1, size - slot - 1)
            if rank < block:
                out.append(pool[pos])
                start = pos + 1
                break
            rank -= block
    return tuple(out)


def _rank_combination(chosen: Sequence[int], pool: Sequence[int]) -> int:
    positions = [pool.index(c) for c in chosen]
    n, size = len(pool), len(chosen)
    rank, start = 0, 0
    for slot, pos in enumerate(positions):
        for skipped in range(start, pos):
            rank += math.comb(n - skipped - 1, size - slot - 1)
        start = pos + 1
    return rank


def unrank_frequency_set(rank: int, cfg: SystemConfig) -> FrequencySelection:
    if not 0 <= rank < count_frequency_sets(cfg):
        raise ValueError(f"frequency rank {rank} out of range")
    return FrequencySelection(_unrank_combination(rank, range(cfg.n_carriers), cfg.n_active))


def rank_frequency_set(freq: FrequencySelection, cfg: SystemConfig) -> int:
    freq.validate(cfg)
    return _rank_combination(freq.indices, list(range(cfg.n_carriers)))


def unrank_allocation(rank: int, cfg: SystemConfig) -> AntennaAllocation:
    if not 0 <= rank < count_allocations(cfg):
        raise ValueError(f"allocation rank {rank} out of range")
    size = cfg.tx_per_carrier
    remaining = list(range(cfg.n_tx))
    radices = [math.comb(cfg.n_tx - k * size, size) for k in range(cfg.n_active)]
    groups = []
    for k in range(cfg.n_active):
        below = math.prod(radices[k + 1:])
        digit, rank = divmod(rank, below)
        group = _unrank_combination(digit, remaining, size)
        groups.append(group)
        remaining = [a for a in remaining if a not in group]
    return AntennaAllocation(tuple(groups))


def rank_allocation(alloc: AntennaAllocation, cfg: SystemConfig) -> int:
    alloc.validate(cfg)
    size = cfg.tx_per_carrier
    remaining = list(range(cfg.n_tx))
    rank = 0
    for k, group in enumerate(alloc.groups):
        rank = rank * math.comb(cfg.n_tx - k * size, size) + _rank_combination(group, remaining)
        remaining = [a for a in remaining if a not in group]
    return rank


# ------------------------------------------------------------ bit mapping

def _bits_to_int(bits: Sequence[int]) -> int:
    value = 0
    for b in bits:
        if b not in (0, 1):
            raise ValueError(f"bits must be 0/1, got {b!r}")
        value = (value << 1) | int(b)
    return value


def _int_to_bits(value: int, width: int) -> np.ndarray:
    return np.array([(value >> (width - 1 - i)) & 1 for i in range(width)], dtype=np.uint8)


def bits_to_codeword(bits: Sequence[int], cfg: SystemConfig,
                     allocations: Sequence[int] | None = None) -> Codeword:
    """Map one symbol's bits to a codeword.

    The leading ``floor(log2 C(M, K))`` bits give the frequency rank and the
    rest select an allocation: the allocation rank itself, or a position in
    ``allocations`` (a list of allocation ranks) when a reduced codebook is
    active.
    """
    bits = [int(b) for b in bits]
    n_freq = addressable_bits(count_frequency_sets(cfg))
    n_alloc_total = len(allocations) if allocations is not None else count_allocations(cfg)
    n_alloc = addressable_bits(n_alloc_total)
    if len(bits) != n_freq + n_alloc:
        raise ValueError(f"expected {n_freq + n_alloc} bits, got {len(bits)}")
    f_rank = _bits_to_int(bits[:n_freq])
    a_pos = _bits_to_int(bits[n_freq:])
    a_rank = allocations[a_pos] if allocations is not None else a_pos
    return Codeword(unrank_frequency_set(f_rank, cfg), unrank_allocation(a_rank, cfg))


def codeword_to_bits(cw: Codeword, cfg: SystemConfig,
                     allocations: Sequence[int] | None = None) -> np.ndarray:
    n_freq = addressable_bits(count_frequency_sets(cfg))
    n_alloc_total = len(allocations) if allocations is not None else count_allocations(cfg)
    n_alloc = addressable_bits(n_alloc_total)
    f_rank = rank_frequency_set(cw.freq, cfg)
    a_rank = rank_allocation(cw.alloc, cfg)
    if allocations is None:
        a_pos = a_rank
    elif a_rank in allocations:
        a_pos = list(allocations).index(a_rank)
    else:
        a_pos = -1
    if f_rank >= 1 << n_freq or not 0 <= a_pos < 1 << n_alloc:
        raise ValueError("codeword lies outside the addressable part of the codebook")
    return np.concatenate([_int_to_bits(f_rank, n_freq), _int_to_bits(a_pos, n_alloc)])


# --------------------------------------------------------------- waveform

def steering_vector(freq_index: int, cfg: SystemConfig) -> np.ndarray:
    """Phase weights pointing the array at ``cfg.steer_angle`` for one carrier."""
    f = cfg.carrier_frequency(freq_index)
    ell = np.arange(cfg.n_tx)
    return np.exp(2j * np.pi * f * ell * cfg.spacing * np.sin(cfg.steer_angle) / SPEED_OF_LIGHT)


def steering_matrix(cfg: SystemConfig) -> np.ndarray:
    """Steering vectors of every carrier, shape ``(n_carriers, n_tx)``."""
    return np.stack([steering_vector(m, cfg) for m in range(cfg.n_carriers)])


def tone_dictionary(cfg: SystemConfig) -> np.ndarray:
    """Baseband tones of every carrier as columns, shape ``(n_samples, n_carriers)``."""
    i = np.arange(cfg.n_samples)[:, None]
    m = np.arange(cfg.n_carriers)[None, :]
    return np.exp(2j * np.pi * m * cfg.carrier_step * cfg.sample_interval * i)


def tones_orthogonal(cfg: SystemConfig, tol: float = 1e-9) -> bool:
    psi = tone_dictionary(cfg)
    gram = psi.conj().T @ psi
    off = gram - np.diag(np.diag(gram))
    return bool(np.abs(off).max(initial=0.0) <= tol * cfg.n_samples)


def synthesize_transmit(cw: Codeword, cfg: SystemConfig) -> np.ndarray:
    """Baseband transmit block, shape ``(n_tx, n_samples)``.

    Row ``l`` is the steering weight of antenna ``l`` at its carrier times that
    carrier's sampled tone; every entry has unit modulus.
    """
    cw.validate(cfg)
    carriers = cw.carriers()
    w = steering_matrix(cfg)[carriers, np.arange(cfg.n_tx)]
    psi = tone_dictionary(cfg)[:, carriers].T
    return w[:, None] * psi


# --------------------------------------------------------------- codebook

@dataclass(frozen=True, eq=False)
class Codebook:
    """Ordered set of codewords: every listed frequency set paired with every
    listed allocation, frequency major.

    ``freq_ranks`` and ``alloc_ranks`` index the full enumerations. Bit mapping
    addresses the first ``2**floor(log2 len)`` entries of each list.
    """

    config: SystemConfig
    freq_ranks: tuple[int, ...]
    alloc_ranks: tuple[int, ...]
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if not self.freq_ranks or not self.alloc_ranks:
            raise ValueError("codebook must be nonempty")
        object.__setattr__(self, "freq_ranks", tuple(int(r) for r in self.freq_ranks))
        object.__setattr__(self, "alloc_ranks", tuple(int(r) for r in self.alloc_ranks))
        if len(set(self.freq_ranks)) != len(self.freq_ranks) or \
                len(set(self.alloc_ranks)) != len(self.alloc_ranks):
            raise ValueError("codebook ranks must be distinct")

    @classmethod
    def full(cls, cfg: SystemConfig) -> "Codebook":
        return cls(cfg, tuple(range(count_frequency_sets(cfg))),
                   tuple(range(count_allocations(cfg))))

    @classmethod
    def addressable(cls, cfg: SystemConfig,
                    alloc_ranks: Sequence[int] | None = None) -> "Codebook":
        """Codebook of exactly the codewords reachable from bits."""
        n_f = 1 << addressable_bits(count_frequency_sets(cfg))
        if alloc_ranks is None:
            alloc_ranks = range(1 << addressable_bits(count_allocations(cfg)))
        alloc_ranks = list(alloc_ranks)[: 1 << addressable_bits(len(alloc_ranks))]
        return cls(cfg, tuple(range(n_f)), tuple(alloc_ranks))

    @classmethod
    def from_allocation_file(cls, cfg: SystemConfig, path) -> "Codebook":
        return cls.addressable(cfg, read_allocation_file(path, cfg))

    @classmethod
    def for_frequencies(cls, cfg: SystemConfig, freqs: Iterable[FrequencySelection],
                        alloc_ranks: Sequence[int] | None = None) -> "Codebook":
        if alloc_ranks is None:
            alloc_ranks = range(count_allocations(cfg))
        return cls(cfg, tuple(rank_frequency_set(f, cfg) for f in freqs), tuple(alloc_ranks))

    def __len__(self) -> int:
        return len(self.freq_ranks) * len(self.alloc_ranks)

    @property
    def n_freq_bits(self) -> int:
        return addressable_bits(len(self.freq_ranks))

    @property
    def n_alloc_bits(self) -> int:
        return addressable_bits(len(self.alloc_ranks))

    @property
    def bits_per_symbol(self) -> int:
        return self.n_freq_bits + self.n_alloc_bits

    def frequency_sets(self) -> list[FrequencySelection]:
        return [unrank_frequency_set(r, self.config) for r in self.freq_ranks]

    def allocations(self) -> list[AntennaAllocation]:
        return [unrank_allocation(r, self.config) for r in self.alloc_ranks]

    def codeword(self, index: int) -> Codeword:
        f_pos, a_pos = divmod(int(index), len(self.alloc_ranks))
        return Codeword(unrank_frequency_set(self.freq_ranks[f_pos], self.config),
                        unrank_allocation(self.alloc_ranks[a_pos], self.config))

    def codewords(self) -> list[Codeword]:
        freqs, allocs = self.frequency_sets(), self.allocations()
        return [Codeword(f, a) for f in freqs for a in allocs]

    def index_of(self, cw: Codeword) -> int:
        f_rank = rank_frequency_set(cw.freq, self.config)
        a_rank = rank_allocation(cw.alloc, self.config)
        try:
            return self.freq_ranks.index(f_rank) * len(self.alloc_ranks) + \
                self.alloc_ranks.index(a_rank)
        except ValueError:
            raise ValueError("codeword is not part of this codebook") from None

    def position_of_frequency(self, freq: FrequencySelection) -> int:
        return self.freq_ranks.index(rank_frequency_set(freq, self.config))

    # Array views used by the vectorised decoders and the simulator.

    def _cached(self, key, build):
        if key not in self._cache:
            self._cache[key] = build()
        return self._cache[key]

    @property
    def freq_table(self) -> np.ndarray:
        """Active carriers of each listed frequency set, ``(n_freq_sets, K)``."""
        return self._cached("freq_table", lambda: np.array(
            [f.indices for f in self.frequency_sets()], dtype=np.int64))

    @property
    def label_table(self) -> np.ndarray:
        """Group label per antenna for each listed allocation, ``(n_allocs, n_tx)``."""
        return self._cached("label_table", lambda: np.array(
            [a.labels for a in self.allocations()], dtype=np.int64))

    @property
    def freq_position(self) -> np.ndarray:
        return np.repeat(np.arange(len(self.freq_ranks)), len(self.alloc_ranks))

    @property
    def alloc_position(self) -> np.ndarray:
        return np.tile(np.arange(len(self.alloc_ranks)), len(self.freq_ranks))

    @property
    def carrier_table(self) -> np.ndarray:
        """Carrier used by every antenna for every codeword, ``(len(self), n_tx)``."""
        return self._cached("carrier_table", lambda: np.take_along_axis(
            self.freq_table[self.freq_position], self.label_table[self.alloc_position], axis=1))

    @property
    def group_carriers(self) -> np.ndarray:
        """Carrier of group ``k`` for every codeword, ``(len(self), K)``."""
        return self._cached("group_carriers", lambda: np.repeat(
            self.freq_table, len(self.alloc_ranks), axis=0))

    def transmit_blocks(self) -> np.ndarray:
        """All transmit blocks, ``(len(self), n_tx, n_samples)``."""
        def build():
            cfg = self.config
            carriers = self.carrier_table
            w = steering_matrix(cfg)[carriers, np.arange(cfg.n_tx)[None, :]]
            psi = tone_dictionary(cfg).T[carriers]
            return w[..., None] * psi
        return self._cached("blocks", build)

    def index_to_bits(self, index) -> np.ndarray:
        """Bits of codebook indices (frequency bits first), ``(..., bits_per_symbol)``."""
        index = np.asarray(index, dtype=np.int64)
        f_pos, a_pos = np.divmod(index, len(self.alloc_ranks))
        if np.any(f_pos >= 1 << self.n_freq_bits) or np.any(a_pos >= 1 << self.n_alloc_bits):
            raise ValueError("index lies outside the addressable part of the codebook")
        packed = (f_pos << self.n_alloc_bits) | a_pos
        shifts = np.arange(self.bits_per_symbol - 1, -1, -1)
        return ((packed[..., None] >> shifts) & 1).astype(np.uint8)

    def bits_to_index(self, bits) -> np.ndarray:
        bits = np.asarray(bits, dtype=np.int64)
        if bits.shape[-1] != self.bits_per_symbol:
            raise ValueError(f"expected {self.bits_per_symbol} bits per symbol, "
                             f"got {bits.shape[-1]}")
        if np.any((bits != 0) & (bits != 1)):
            raise ValueError("bits must be 0/1")
        packed = (bits << np.arange(self.bits_per_symbol - 1, -1, -1)).sum(-1)
        f_pos = packed >> self.n_alloc_bits
        a_pos = packed & ((1 << self.n_alloc_bits) - 1)
        return f_pos * len(self.alloc_ranks) + a_pos


# ------------------------------------------------------ allocation files

ALLOCATION_FILE_TAG = "# majorcom allocation codebook v1"


def format_allocation_file(cfg: SystemConfig, alloc_ranks: Sequence[int]) -> str:
    """Text of a reduced allocation codebook.

    Layout::

        # majorcom allocation codebook v1
        L_R=8 K=2 L_K=4 N_b=2
        0 0 0 0 1 1 1 1
        1 1 1 1 0 0 0 0

    One line per codeword giving the group label of each transmit antenna.
    """
    lines = [ALLOCATION_FILE_TAG,
             f"L_R={cfg.n_tx} K={cfg.n_active} L_K={cfg.tx_per_carrier} N_b={len(alloc_ranks)}"]
    for r in alloc_ranks:
        lines.append(" ".join(str(int(v)) for v in unrank_allocation(int(r), cfg).labels))
    return "\n".join(lines) + "\n"


def write_allocation_file(path, cfg: SystemConfig, alloc_ranks: Sequence[int]) -> None:
    """Write :func:`format_allocation_file` output to ``path``."""
    Path(path).write_text(format_allocation_file(cfg, alloc_ranks))


def read_allocation_file(path, cfg: SystemConfig) -> list[int]:
    """Read a file written by :func:`write_allocation_file`; returns allocation ranks."""
    rows = [ln.strip() for ln in Path(path).read_text().splitlines()]
    rows = [ln for ln in rows if ln and not ln.startswith("#")]
    if not rows:
        raise ValueError(f"{path}: empty codebook file")
    header = dict(item.split("=", 1) for item in rows[0].split())
    try:
        dims = {k: int(header[k]) for k in ("L_R", "K", "L_K", "N_b")}
    except (KeyError, ValueError):
        raise ValueError(f"{path}: malformed header {rows[0]!r}") from None
    if (dims["L_R"], dims["K"], dims["L_K"]) != (cfg.n_tx, cfg.n_active, cfg.tx_per_carrier):
        raise ValueError(f"{path}: codebook dimensions {dims} do not match the configuration")
    body = rows[1:]
    if len(body) != dims["N_b"]:
        raise ValueError(f"{path}: header announces {dims['N_b']} codewords, found {len(body)}")
    ranks = []
    for ln in body:
        labels = [int(v) for v in ln.split()]
        alloc = AntennaAllocation.from_labels(labels, cfg.n_active)
        if len(labels) != cfg.n_tx:
            raise ValueError(f"{path}: expected {cfg.n_tx} labels per line")
        ranks.append(rank_allocation(alloc, cfg))
    return ranks
