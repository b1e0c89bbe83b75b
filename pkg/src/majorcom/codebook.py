"""Design of reduced allocation codebooks.

An allocation is represented by its stacked group indicator vectors
``[p_0; ...; p_{K-1}]`` (length ``K * n_tx``). The distance between two
allocations is the squared Euclidean distance of these stacks, which equals
twice the number of antennas whose group label differs.

The design keeps ``n_b`` allocations that are far apart: the indicator stacks
are embedded isometrically with a PCA, clustered with k-means, and the member
nearest to each cluster centre is kept.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.cluster import KMeans

from .core import (AntennaAllocation, FrequencySelection, SystemConfig, enumerate_allocations,
                   steering_matrix, tones_orthogonal, write_allocation_file)


def allocation_labels(alloc_set, n_groups: int | None = None) -> tuple[np.ndarray, int]:
    """Label array ``(n_allocs, n_tx)`` and group count of an allocation set.

    ``alloc_set`` is a sequence of :class:`AntennaAllocation` or an integer
    array of group labels (one row per allocation).
    """
    if len(alloc_set) and isinstance(alloc_set[0], AntennaAllocation):
        labels = np.array([a.labels for a in alloc_set], dtype=np.int64)
        n_groups = len(alloc_set[0].groups)
    else:
        labels = np.asarray(alloc_set, dtype=np.int64)
        if labels.ndim != 2 or labels.size == 0:
            raise ValueError("allocation labels must be a nonempty 2-D array")
        if n_groups is None:
            n_groups = int(labels.max()) + 1
    return labels, n_groups


def indicator_stack(labels: np.ndarray, n_groups: int) -> np.ndarray:
    """Stacked group indicators, ``(n_allocs, n_groups * n_tx)``."""
    onehot = labels[:, None, :] == np.arange(n_groups)[None, :, None]
    return onehot.reshape(len(labels), -1).astype(float)


def allocation_distance(i: int, j: int, alloc_set) -> int:
    """Sum over groups of the squared difference of the indicator vectors."""
    labels, _ = allocation_labels(alloc_set)
    return 2 * int(np.count_nonzero(labels[i] != labels[j]))


def h_distance(i: int, j: int, alloc_set, h, cfg: SystemConfig,
               freq: FrequencySelection | None = None, force: bool = False) -> float:
    """Channel-weighted allocation distance ``sum_k ||H diag(w_k) (p_k^i - p_k^j)||^2``.

    This is the noiseless residual between two codewords sharing the carrier
    set ``freq`` (default: the lowest ``n_active`` carriers) per received
    sample, which requires mutually orthogonal tones.

    Raises:
        ValueError: the sampled tones are not orthogonal and ``force`` is false.
    """
    if not force and not tones_orthogonal(cfg):
        raise ValueError("h_distance assumes orthogonal tones; pass force=True to override")
    labels, n_groups = allocation_labels(alloc_set)
    carriers = freq.indices if freq is not None else tuple(range(n_groups))
    h = np.asarray(getattr(h, "h", h))
    w = steering_matrix(cfg)
    total = 0.0
    for k, c in enumerate(carriers):
        diff = (labels[i] == k).astype(float) - (labels[j] == k).astype(float)
        total += float(np.sum(np.abs(h @ (w[c] * diff)) ** 2))
    return total


@dataclass(frozen=True)
class DistanceMatrix:
    """Pairwise allocation distances; symmetric with a zero diagonal."""

    r: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.r)
        if r.ndim != 2 or r.shape[0] != r.shape[1]:
            raise ValueError("distance matrix must be square")
        if not np.array_equal(r, r.T) or np.any(np.diagonal(r) != 0):
            raise ValueError("distance matrix must be symmetric with zero diagonal")

    @property
    def rows_are_permutations(self) -> bool:
        """Whether every row holds the same multiset of values as row 0."""
        ref = np.sort(self.r[0])
        return bool(np.all(np.sort(self.r, axis=1) == ref))

    def min_off_diagonal(self, subset: Sequence[int] | None = None) -> int:
        idx = np.arange(len(self.r)) if subset is None else np.asarray(subset)
        sub = self.r[np.ix_(idx, idx)]
        return int(sub[~np.eye(len(idx), dtype=bool)].min())


def distance_matrix_naive(alloc_set) -> DistanceMatrix:
    labels, _ = allocation_labels(alloc_set)
    return DistanceMatrix(2 * np.sum(labels[:, None, :] != labels[None, :, :], axis=-1))


def _antenna_permutation(src: np.ndarray, dst: np.ndarray, n_groups: int) -> np.ndarray:
    """``perm`` with ``perm[a] = b`` mapping the group-``k`` antennas of ``src``
    onto those of ``dst`` in sorted order, so that ``dst = src[inverse(perm)]``."""
    perm = np.empty(len(src), dtype=np.int64)
    for k in range(n_groups):
        perm[np.flatnonzero(src == k)] = np.flatnonzero(dst == k)
    return perm


def distance_matrix(alloc_set, method: str = "auto") -> DistanceMatrix:
    """Pairwise distance matrix of an allocation set.

    The fast path computes row 0 directly and obtains every other row by
    relabelling antennas: if the antenna permutation ``perm`` turns pattern 0
    into pattern ``i``, then ``R[i, j] = R[0, index(labels_j[perm])]``. It
    applies whenever the set is closed under those permutations (for example
    the full allocation set); otherwise, or with ``method="naive"``, all pairs
    are compared directly.
    """
    if method not in ("auto", "fast", "naive"):
        raise ValueError(f"unknown method {method!r}")
    labels, n_groups = allocation_labels(alloc_set)
    if method == "naive":
        return distance_matrix_naive(labels)
    if len(set(map(tuple, labels))) != len(labels):
        raise ValueError("allocation set contains duplicates")
    weights = n_groups ** np.arange(labels.shape[1])[::-1]
    keys = labels @ weights
    order = np.argsort(keys)
    sorted_keys = keys[order]
    row0 = 2 * np.sum(labels != labels[0], axis=1)
    r = np.empty((len(labels), len(labels)), dtype=np.int64)
    for i in range(len(labels)):
        perm = _antenna_permutation(labels[0], labels[i], n_groups)
        moved = labels[:, perm] @ weights
        pos = np.searchsorted(sorted_keys, moved)
        pos = np.minimum(pos, len(keys) - 1)
        if not np.array_equal(sorted_keys[pos], moved):
            if method == "fast":
                raise ValueError("allocation set is not closed under antenna relabelling")
            return distance_matrix_naive(labels)
        r[i] = row0[order[pos]]
    return DistanceMatrix(r)


# ------------------------------------------------------------- embedding

@dataclass(frozen=True)
class ReducedCodewords:
    """Isometric low-dimensional coordinates, one row per allocation."""

    coords: np.ndarray
    intrinsic_dim: int
    mean_offset: float


class AllocationEmbedding(TransformerMixin, BaseEstimator):
    """PCA of the stacked indicator vectors with exact distance preservation.

    Every entry of an indicator stack has mean ``1 / n_groups`` over the full
    allocation set, so that constant is subtracted before the SVD. All
    components with a singular value above ``tol`` times the largest are kept,
    so squared distances between embedded points equal allocation distances.

    Args:
        n_groups: number of groups; inferred from the labels when omitted.
        tol: relative singular value cutoff defining the intrinsic dimension.

    Attributes:
        components_: ``(intrinsic_dim_, n_groups * n_tx)`` principal axes.
        singular_values_: all singular values, descending.
        intrinsic_dim_: number of retained components.
    """

    def __init__(self, n_groups: int | None = None, tol: float = 1e-9):
        self.n_groups = n_groups
        self.tol = tol

    def fit(self, X, y=None):
        labels, n_groups = allocation_labels(X, self.n_groups)
        if len(labels) < 2:
            raise ValueError("need at least two allocations")
        self.n_groups_ = n_groups
        self.offset_ = 1.0 / n_groups
        _, s, vt = np.linalg.svd(indicator_stack(labels, n_groups) - self.offset_,
                                 full_matrices=False)
        self.singular_values_ = s
        self.intrinsic_dim_ = int(np.count_nonzero(s > self.tol * s[0]))
        self.components_ = vt[: self.intrinsic_dim_]
        return self

    def transform(self, X):
        labels, _ = allocation_labels(X, self.n_groups_)
        return (indicator_stack(labels, self.n_groups_) - self.offset_) @ self.components_.T


def reduce_dimensions(alloc_set, tol: float = 1e-9) -> ReducedCodewords:
    emb = AllocationEmbedding(tol=tol)
    coords = emb.fit_transform(alloc_set)
    return ReducedCodewords(coords, emb.intrinsic_dim_, emb.offset_)


# ---------------------------------------------------------------- design

@dataclass(frozen=True)
class DesignedCodebook:
    """Indices of the kept allocations and their smallest pairwise distance."""

    selected: tuple[int, ...]
    min_distance: int

    def __post_init__(self):
        if len(set(self.selected)) != len(self.selected):
            raise ValueError("selected allocations must be distinct")


class MaxMinCodebookDesigner(BaseEstimator):
    """Choose ``n_b`` well separated points by k-means clustering.

    Each cluster contributes the member nearest to its centre. Clusters are
    visited in order of their lowest member index. When several members are
    equally near the centre (up to ``1e-9`` relative), the one farthest from
    the representatives already chosen wins, then the lowest index; exact
    ties are common because allocation sets are highly symmetric.

    k-means is restarted ``n_init`` times from k-means++ seeds. With
    ``restart_selection="max_min"`` the restart whose representatives have the
    largest smallest pairwise distance is kept (lower inertia breaks ties);
    ``"inertia"`` keeps the usual lowest-inertia clustering.

    Args:
        n_b: codebook size.
        n_init: k-means restarts.
        random_state: seed of the k-means initialisations.
        restart_selection: ``"max_min"`` or ``"inertia"``.

    Attributes:
        selected_: indices of the chosen points, in cluster visiting order.
        min_distance_: smallest squared distance between chosen points.
        labels_: cluster of every point.
        cluster_centers_: centres of the kept clustering.
    """

    def __init__(self, n_b: int = 2, n_init: int = 50, random_state: int = 0,
                 restart_selection: str = "max_min"):
        self.n_b = n_b
        self.n_init = n_init
        self.random_state = random_state
        self.restart_selection = restart_selection

    @staticmethod
    def _representatives(X, labels, centers, n_b) -> list[int]:
        clusters = sorted(range(n_b), key=lambda c: np.flatnonzero(labels == c)[0])
        chosen: list[int] = []
        for c in clusters:
            members = np.flatnonzero(labels == c)
            d = np.sum((X[members] - centers[c]) ** 2, axis=1)
            near = members[d <= d.min() + 1e-9 * max(d.min(), 1.0)]
            if len(near) > 1 and chosen:
                sep = np.min(np.sum((X[near][:, None] - X[chosen][None]) ** 2, axis=-1), axis=1)
                near = near[sep >= sep.max() - 1e-9 * max(sep.max(), 1.0)]
            chosen.append(int(near[0]))
        return chosen

    @staticmethod
    def _min_distance(X, chosen) -> float:
        if len(chosen) < 2:
            return math.inf
        sq = np.sum((X[chosen][:, None] - X[chosen][None]) ** 2, axis=-1)
        return float(sq[~np.eye(len(chosen), dtype=bool)].min())

    def fit(self, X, y=None):
        X = np.asarray(X, dtype=float)
        if not 1 <= self.n_b <= len(X):
            raise ValueError(f"n_b={self.n_b} must lie in [1, {len(X)}]")
        if self.restart_selection not in ("max_min", "inertia"):
            raise ValueError(f"unknown restart selection {self.restart_selection!r}")
        if self.n_b == len(X):
            runs = [(0.0, np.arange(len(X)), X.copy())]
        else:
            seeds = np.random.SeedSequence(self.random_state).generate_state(self.n_init)
            runs = []
            for s in seeds:
                km = KMeans(n_clusters=self.n_b, init="k-means++", n_init=1,
                            random_state=int(s)).fit(X)
                runs.append((float(km.inertia_), km.labels_, km.cluster_centers_))
        best = None
        for inertia, labels, centers in runs:
            chosen = self._representatives(X, labels, centers, self.n_b)
            dmin = self._min_distance(X, chosen)
            if self.restart_selection == "max_min":
                key = (-round(dmin, 9), round(inertia, 9))
            else:
                key = (round(inertia, 9),)
            if best is None or key < best[0]:
                best = (key, labels, centers, chosen, dmin)
        _, self.labels_, self.cluster_centers_, chosen, self.min_distance_ = best
        self.selected_ = tuple(chosen)
        return self


def design_codebook(reduced: ReducedCodewords, n_b: int, seed: int = 0,
                    n_init: int = 50) -> DesignedCodebook:
    """k-means design on embedded allocations.

    Raises:
        ValueError: ``n_b`` outside ``[2, number of allocations]``.
    """
    if not 2 <= n_b <= len(reduced.coords):
        raise ValueError(f"n_b={n_b} must lie in [2, {len(reduced.coords)}]")
    est = MaxMinCodebookDesigner(n_b, n_init, seed).fit(reduced.coords)
    return DesignedCodebook(est.selected_, int(round(est.min_distance_)))


def design_for_config(cfg: SystemConfig, n_b: int, seed: int = 0,
                      n_init: int = 50) -> DesignedCodebook:
    """Design over the complete allocation set of ``cfg``; indices are allocation ranks."""
    return design_codebook(reduce_dimensions(enumerate_allocations(cfg)), n_b, seed, n_init)


def save_designed_codebook(path, cfg: SystemConfig, designed: DesignedCodebook) -> None:
    """Write a design made by :func:`design_for_config` in the allocation file format."""
    write_allocation_file(path, cfg, designed.selected)
