"""Maximum-likelihood and low-complexity decoders.

All decoders work on batches: ``Y`` has shape ``(B, n_rx, n_samples)`` and
``H`` shape ``(B, n_rx, n_tx)``. Decoded codewords are returned as indices into
the active :class:`~majorcom.core.Codebook`, which keeps every estimate inside
the set the transmitter can actually emit. Greedy searches only walk branches
that still lead to an active codeword; with the complete codebook this is the
unconstrained search.

The residual of a candidate codeword ``n`` with noiseless block ``S_n`` is
expanded as ``||Y||^2 - 2 Re<S_n, Y> + ||S_n||^2``. Only the last two terms
depend on ``n``; they are evaluated from the tone projections ``Y conj(Psi)``
and the tone Gram matrix, never by synthesising ``S_n``.

Ties are broken towards the lowest index everywhere.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .core import (AntennaAllocation, Codebook, Codeword, FrequencySelection,
                   SystemConfig, steering_matrix, tone_dictionary, tones_orthogonal)

EVIDENCE_MODES = ("projection", "pseudoinverse", "auto")
DECODER_NAMES = ("ml", "noniter-ml", "noniter-greedy", "iter-ml", "iter-greedy")


@dataclass(frozen=True)
class FrequencyEvidence:
    """Per-carrier evidence: row ``m`` estimates the received signature of carrier ``m``."""

    a_hat: np.ndarray
    row_norms: np.ndarray

    @classmethod
    def from_rows(cls, a_hat) -> "FrequencyEvidence":
        a_hat = np.asarray(a_hat)
        return cls(a_hat, np.linalg.norm(a_hat, axis=-1))


@dataclass(frozen=True)
class DecodeResult:
    codeword: Codeword
    index: int
    objective: float
    iterations: int = 0


def select_frequencies(norms: np.ndarray, n_active: int,
                       members: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Pick carriers by descending evidence norm.

    Args:
        norms: ``(B, M)`` row norms.
        n_active: carriers to select.
        members: optional ``(F, M)`` membership table of the allowed frequency
            sets. A carrier is only eligible while some allowed set still
            contains it together with the carriers already picked.

    Returns:
        ``(position, order)``: index of the chosen set in ``members`` (``-1``
        when unconstrained) and ``(B, n_active)`` carriers in pick order.
    """
    norms = np.atleast_2d(norms)
    B, M = norms.shape
    if n_active > M:
        raise ValueError(f"cannot select {n_active} of {M} carriers")
    picked = np.zeros((B, M), dtype=bool)
    consistent = None if members is None else np.ones((B, len(members)), dtype=bool)
    order = np.empty((B, n_active), dtype=np.int64)
    rows = np.arange(B)
    for j in range(n_active):
        allowed = ~picked
        if consistent is not None:
            allowed &= (consistent[:, :, None] & members[None]).any(axis=1)
        c = np.argmax(np.where(allowed, norms, -np.inf), axis=1)
        order[:, j] = c
        picked[rows, c] = True
        if consistent is not None:
            consistent &= members[:, c].T
    position = np.full(B, -1) if consistent is None else np.argmax(consistent, axis=1)
    return position, order


class Decoder:
    """Decoding tables for one configuration and active codebook.

    Args:
        codebook: the codewords the transmitter may send.
        evidence_mode: ``"projection"`` (tone correlation scaled by
            ``1 / n_samples``), ``"pseudoinverse"`` (ridge-regularised least
            squares) or ``"auto"`` (projection when the sampled tones are
            orthogonal).
    """

    def __init__(self, codebook: Codebook, evidence_mode: str = "auto"):
        if evidence_mode not in EVIDENCE_MODES:
            raise ValueError(f"unknown evidence mode {evidence_mode!r}")
        cfg = codebook.config
        self.cfg = cfg
        self.codebook = codebook
        if evidence_mode == "auto":
            evidence_mode = "projection" if tones_orthogonal(cfg) else "pseudoinverse"
        self.evidence_mode = evidence_mode

        self.psi = tone_dictionary(cfg)
        self.gram = self.psi.conj().T @ self.psi
        self.steer = steering_matrix(cfg)
        self.carriers = codebook.carrier_table
        self.group_carriers = codebook.group_carriers
        self.fpos = codebook.freq_position
        self.apos = codebook.alloc_position
        members = np.zeros((len(codebook.freq_ranks), cfg.n_carriers), dtype=bool)
        np.put_along_axis(members, codebook.freq_table, True, axis=1)
        self.members = members

        K, L = cfg.n_active, cfg.n_tx
        labels = codebook.label_table[self.apos]
        weights = self.steer[self.carriers, np.arange(L)]
        in_group = labels[:, None, :] == np.arange(K)[None, :, None]
        self.group_weights = in_group * weights[:, None, :]            # (N, K, L)
        gc = self.group_carriers
        self.pair_gram = self.gram[gc[:, :, None], gc[:, None, :]]     # (N, K, K)

        if evidence_mode == "pseudoinverse":
            eps = 1e-9 * np.trace(self.gram).real / cfg.n_carriers
            self._solve = np.linalg.inv(self.gram + eps * np.eye(cfg.n_carriers))

    def __len__(self):
        return len(self.codebook)

    def batch(self, Y, H) -> "Batch":
        return Batch(self, np.asarray(Y), np.asarray(H))

    # -- building blocks ------------------------------------------------

    def evidence_from_projection(self, Z: np.ndarray) -> np.ndarray:
        """``(B, M, n_rx)`` carrier evidence from tone projections ``Z``."""
        zt = np.swapaxes(Z, 1, 2)
        if self.evidence_mode == "projection":
            return zt / self.cfg.n_samples
        return self._solve @ zt

    def residual_metric(self, Z: np.ndarray, H: np.ndarray) -> np.ndarray:
        """``||S_n||^2 - 2 Re<S_n, Y>`` for every codeword, ``(B, N)``."""
        B = len(H)
        N, K, L = self.group_weights.shape
        g = H @ self.group_weights.reshape(N * K, L).T                 # (B, Lc, N*K)
        zsel = Z[:, :, self.group_carriers.reshape(-1)]
        corr = (g.conj() * zsel).real.sum(axis=1).reshape(B, N, K).sum(axis=-1)
        g = g.reshape(B, -1, N, K)
        inner = (g.conj()[..., :, None] * g[..., None, :]).sum(axis=1)  # (B, N, K, K)
        energy = (inner * self.pair_gram[None]).real.sum(axis=(-1, -2))
        return energy - 2.0 * corr

    def residual_metric_subset(self, Z: np.ndarray, H: np.ndarray, index: np.ndarray) -> np.ndarray:
        """:meth:`residual_metric` restricted to per-trial candidates ``index`` ``(B, A)``."""
        g = np.einsum("bil,bakl->baki", H, self.group_weights[index])           # (B, A, K, Lc)
        zsel = np.take_along_axis(np.swapaxes(Z, 1, 2)[:, None],
                                  self.group_carriers[index][..., None], axis=2)  # (B, A, K, Lc)
        corr = (g.conj() * zsel).real.sum(axis=(-1, -2))
        inner = np.einsum("baki,baji->bakj", g.conj(), g)
        energy = (inner * self.pair_gram[index]).real.sum(axis=(-1, -2))
        return energy - 2.0 * corr

    def signatures(self, H: np.ndarray, index: np.ndarray) -> np.ndarray:
        """Received per-group signatures of codewords ``index``, ``(B, K, n_rx)``."""
        return np.einsum("bil,bkl->bki", H, self.group_weights[index])

    def refined_evidence(self, H: np.ndarray, index: np.ndarray) -> np.ndarray:
        """Evidence whose active rows are the model signatures of ``index``."""
        B = len(H)
        evid = np.zeros((B, self.cfg.n_carriers, self.cfg.n_rx), dtype=complex)
        evid[np.arange(B)[:, None], self.group_carriers[index]] = self.signatures(H, index)
        return evid

    def group_order(self, evid: np.ndarray, index: np.ndarray) -> np.ndarray:
        """Carriers of ``index`` sorted by descending evidence norm."""
        gc = self.group_carriers[index]
        norms = np.linalg.norm(evid[np.arange(len(gc))[:, None], gc], axis=-1)
        return np.take_along_axis(gc, np.argsort(-norms, axis=1, kind="stable"), axis=1)

    def select(self, evid: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        position, order = select_frequencies(np.linalg.norm(evid, axis=-1),
                                             self.cfg.n_active, self.members)
        return position, order

    def spatial_ml(self, metric: np.ndarray, fpos: np.ndarray) -> np.ndarray:
        mask = self.fpos[None, :] == np.asarray(fpos)[:, None]
        return np.argmin(np.where(mask, metric, np.inf), axis=1)

    def frequency_refine_ml(self, metric: np.ndarray, index: np.ndarray) -> np.ndarray:
        mask = self.apos[None, :] == self.apos[index][:, None]
        return np.argmin(np.where(mask, metric, np.inf), axis=1)

    def spatial_greedy(self, evid, H, fpos, order, counts: list | None = None) -> np.ndarray:
        """Sequential allocation search, one carrier group at a time.

        ``order`` gives the carriers of the selected set in the order their
        groups are solved. Each step minimises ``||evid[c] - H diag(w_c) p||``
        over the groups ``p`` still compatible with the previous steps.
        """
        B = len(H)
        rows = np.arange(B)
        cand = self.fpos[None, :] == np.asarray(fpos)[:, None]
        best = np.zeros(B, dtype=np.int64)
        for j in range(order.shape[1]):
            c = order[:, j]
            on = self.carriers[None, :, :] == c[:, None, None]         # (B, N, L)
            hw = H * self.steer[c][:, None, :]
            pred = on.astype(float) @ np.swapaxes(hw, 1, 2)           # (B, N, Lc)
            score = np.sum(np.abs(evid[rows, c][:, None, :] - pred) ** 2, axis=-1)
            if counts is not None:
                counts.append(_distinct_candidates(on, cand))
            best = np.argmin(np.where(cand, score, np.inf), axis=1)
            cand &= np.all(on == on[rows, best][:, None, :], axis=-1)
        return best

    def frequency_refine_greedy(self, Z, H, index, order, counts: list | None = None) -> np.ndarray:
        """Sequential carrier search with the antenna groups held fixed.

        Groups are visited in ``order`` (carriers of the current estimate);
        each is moved to the carrier that best explains ``Y`` once the groups
        already placed are subtracted.
        """
        B = len(H)
        M = self.cfg.n_carriers
        rows = np.arange(B)
        current = self.carriers[index]
        cand = np.ones((B, len(self)), dtype=bool)
        placed = np.zeros((B, M, self.cfg.n_rx), dtype=complex)       # sum_m g_m G[c, c_m]
        zt = np.swapaxes(Z, 1, 2)
        diag = self.gram.diagonal().real
        best = np.zeros(B, dtype=np.int64)
        for j in range(order.shape[1]):
            group = current == order[:, j][:, None]                   # (B, L)
            lo = np.where(group[:, None, :], self.carriers[None], M).min(axis=-1)
            hi = np.where(group[:, None, :], self.carriers[None], -1).max(axis=-1)
            valid = cand & (lo == hi)
            g_all = (group[:, None, :] * self.steer[None]) @ np.swapaxes(H, 1, 2)  # (B, M, Lc)
            score_c = (np.sum(np.abs(g_all) ** 2, axis=-1) * diag
                       - 2.0 * np.sum((g_all.conj() * (zt - placed)).real, axis=-1))
            score = np.take_along_axis(score_c, np.minimum(lo, M - 1), axis=1)
            if counts is not None:
                counts.append([len(np.unique(lo[b, valid[b]])) for b in range(B)])
            best = np.argmin(np.where(valid, score, np.inf), axis=1)
            chosen = lo[rows, best]
            g = g_all[rows, chosen]
            placed += self.gram[:, chosen].T[:, :, None] * g[:, None, :]
            cand = valid & (lo == chosen[:, None])
        return best


def _distinct_candidates(on: np.ndarray, cand: np.ndarray) -> list[int]:
    out = []
    for b in range(len(on)):
        groups = {tuple(row) for row in on[b, cand[b]]}
        out.append(0 if len(groups) == 1 else len(groups))
    return out


class Batch:
    """Lazily computed quantities shared by every decoder on one batch."""

    def __init__(self, decoder: Decoder, Y: np.ndarray, H: np.ndarray):
        cfg = decoder.cfg
        if Y.ndim == 2:
            Y = Y[None]
        if H.ndim == 2:
            H = np.broadcast_to(H, (len(Y),) + H.shape)
        if Y.shape[1:] != (cfg.n_rx, cfg.n_samples):
            raise ValueError(f"received block shape {Y.shape[1:]} does not match "
                             f"({cfg.n_rx}, {cfg.n_samples})")
        if H.shape != (len(Y), cfg.n_rx, cfg.n_tx):
            raise ValueError(f"channel shape {H.shape[1:]} does not match ({cfg.n_rx}, {cfg.n_tx})")
        self.decoder = decoder
        self.Y = Y
        self.H = H

    def __len__(self):
        return len(self.Y)

    @cached_property
    def Z(self) -> np.ndarray:
        return self.Y @ self.decoder.psi.conj()

    @cached_property
    def metric(self) -> np.ndarray:
        return self.decoder.residual_metric(self.Z, self.H)

    @cached_property
    def evidence(self) -> np.ndarray:
        return self.decoder.evidence_from_projection(self.Z)

    # -- decoders --------------------------------------------------------

    def ml(self) -> np.ndarray:
        return np.argmin(self.metric, axis=1)

    def noniter(self, spatial: str = "ml", fpos=None):
        """Non-iterative decoder; returns ``(index, order)``.

        ``fpos`` forces the frequency set (genie-aided decoding).
        """
        dec = self.decoder
        evid = self.evidence
        forced = fpos is not None
        if fpos is None:
            fpos, order = dec.select(evid)
        else:
            fpos = np.broadcast_to(np.asarray(fpos), (len(self),))
            sets = dec.codebook.freq_table[fpos]
            norms = np.linalg.norm(evid[np.arange(len(self))[:, None], sets], axis=-1)
            order = np.take_along_axis(sets, np.argsort(-norms, axis=1, kind="stable"), axis=1)
        if spatial == "ml" and forced:
            n_alloc = len(dec.codebook.alloc_ranks)
            candidates = fpos[:, None] * n_alloc + np.arange(n_alloc)
            metric = dec.residual_metric_subset(self.Z, self.H, candidates)
            index = candidates[np.arange(len(self)), np.argmin(metric, axis=1)]
        elif spatial == "ml":
            index = dec.spatial_ml(self.metric, fpos)
        elif spatial == "greedy":
            index = dec.spatial_greedy(evid, self.H, fpos, order)
        else:
            raise ValueError(f"unknown spatial mode {spatial!r}")
        return index, dec.group_order(evid, index)

    def iterative(self, mode: str = "ml", i_max: int = 10):
        """Alternating refinement; returns ``(index, iterations)``.

        A trial stops early once an iteration reproduces both its codeword and
        the carrier order used by the next greedy step, since every later
        iteration would repeat it exactly.
        """
        if i_max < 1:
            raise ValueError("i_max must be at least 1")
        if mode not in ("ml", "greedy"):
            raise ValueError(f"unknown mode {mode!r}")
        dec = self.decoder
        index, order = self.noniter(mode)
        index, order = index.copy(), order.copy()
        iterations = np.zeros(len(self), dtype=np.int64)
        active = np.ones(len(self), dtype=bool)
        for _ in range(1, i_max):
            idx = np.flatnonzero(active)
            if idx.size == 0:
                break
            H = self.H[idx]
            if mode == "ml":
                metric = self.metric[idx]
                refined = dec.frequency_refine_ml(metric, index[idx])
                new = dec.spatial_ml(metric, dec.fpos[refined])
                new_order = order[idx]
            else:
                refined = dec.frequency_refine_greedy(self.Z[idx], H, index[idx], order[idx])
                evid = dec.refined_evidence(H, refined)
                new = dec.spatial_greedy(evid, H, dec.fpos[refined], dec.group_order(evid, refined))
                new_order = dec.group_order(dec.refined_evidence(H, new), new)
            iterations[idx] += 1
            settled = (new == index[idx]) & np.all(new_order == order[idx], axis=1)
            index[idx] = new
            order[idx] = new_order
            active[idx[settled]] = False
        return index, iterations

    def run(self, name: str, i_max: int = 10, fpos=None) -> np.ndarray:
        """Decode with a registry name from :data:`DECODER_NAMES`."""
        if name == "ml":
            return self.ml()
        if name in ("noniter-ml", "noniter-greedy"):
            return self.noniter(name.split("-")[1], fpos=fpos)[0]
        if name in ("iter-ml", "iter-greedy"):
            return self.iterative(name.split("-")[1], i_max)[0]
        raise ValueError(f"unknown decoder {name!r}; expected one of {', '.join(DECODER_NAMES)}")


# ---------------------------------------------------------------------------
# Single-block API.

def _channel_array(h) -> np.ndarray:
    return np.asarray(getattr(h, "h", h))


def _result(decoder: Decoder, y, h, index: int, iterations: int = 0) -> DecodeResult:
    block = decoder.codebook.transmit_blocks()[index]
    objective = float(np.sum(np.abs(np.asarray(y) - h @ block) ** 2))
    return DecodeResult(decoder.codebook.codeword(index), int(index), objective, int(iterations))


def ml_decode(y, h, cfg: SystemConfig, codebook: Codebook | None = None) -> DecodeResult:
    """Exhaustive minimum-residual search over the codebook."""
    codebook = codebook or Codebook.addressable(cfg)
    dec = Decoder(codebook)
    h = _channel_array(h)
    index = int(dec.batch(y, h).ml()[0])
    return _result(dec, y, h, index)


def frequency_initialize(y, cfg: SystemConfig, mode: str = "projection",
                         codebook: Codebook | None = None):
    """Carrier evidence and the initial carrier estimate.

    Without a codebook the ``n_active`` strongest rows are selected; with one,
    selection is restricted to its frequency sets.
    """
    if cfg.n_active > cfg.n_carriers:
        raise ValueError("n_active exceeds n_carriers")
    psi = tone_dictionary(cfg)
    zt = psi.conj().T @ np.asarray(y).T
    if mode == "projection":
        a_hat = zt / cfg.n_samples
    elif mode == "pseudoinverse":
        gram = psi.conj().T @ psi
        eps = 1e-9 * np.trace(gram).real / cfg.n_carriers
        a_hat = np.linalg.solve(gram + eps * np.eye(cfg.n_carriers), zt)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    evidence = FrequencyEvidence.from_rows(a_hat)
    members = None
    if codebook is not None:
        members = np.zeros((len(codebook.freq_ranks), cfg.n_carriers), dtype=bool)
        np.put_along_axis(members, codebook.freq_table, True, axis=1)
    _, order = select_frequencies(evidence.row_norms[None], cfg.n_active, members)
    return evidence, FrequencySelection(tuple(sorted(order[0])))


def _local_codebook(cfg, freq: FrequencySelection, codebook: Codebook | None) -> Codebook:
    alloc_ranks = codebook.alloc_ranks if codebook is not None else None
    return Codebook.for_frequencies(cfg, [freq], alloc_ranks)


def spatial_ml(y, freq: FrequencySelection, h, cfg: SystemConfig,
               codebook: Codebook | None = None) -> AntennaAllocation:
    """Best allocation for a fixed carrier set, searching the codebook's allocations."""
    dec = Decoder(_local_codebook(cfg, freq, codebook))
    index = dec.batch(y, _channel_array(h)).noniter("ml", fpos=0)[0][0]
    return dec.codebook.codeword(index).alloc


def spatial_greedy(evidence: FrequencyEvidence, freq: FrequencySelection, h, cfg: SystemConfig,
                   codebook: Codebook | None = None, counts: list | None = None) -> AntennaAllocation:
    """Group-by-group allocation search driven by the carrier evidence.

    Groups are solved in descending order of the evidence norm of their
    carrier; ``counts`` collects the number of candidates evaluated per step
    (a forced last step counts as zero).
    """
    dec = Decoder(_local_codebook(cfg, freq, codebook))
    h = _channel_array(h)[None]
    evid = np.asarray(evidence.a_hat)[None]
    sets = np.array([freq.indices])
    norms = np.linalg.norm(evid[0][sets[0]], axis=-1)
    order = sets[:, np.argsort(-norms, kind="stable")]
    step_counts = [] if counts is not None else None
    index = dec.spatial_greedy(evid, h, np.zeros(1, dtype=np.int64), order, step_counts)[0]
    if counts is not None:
        counts.extend(c[0] for c in step_counts)
    return dec.codebook.codeword(index).alloc


def frequency_refine(y, cw: Codeword, h, cfg: SystemConfig, mode: str = "ml",
                     codebook: Codebook | None = None, evidence: FrequencyEvidence | None = None,
                     counts: list | None = None) -> Codeword:
    """Re-estimate the carriers with the antenna groups held fixed.

    The returned codeword is canonical, so group labels follow the new
    carrier order. In greedy mode the groups are visited in descending
    evidence norm (the model evidence of ``cw`` when ``evidence`` is omitted).
    """
    codebook = codebook or Codebook.full(cfg)
    dec = Decoder(codebook)
    h = _channel_array(h)
    batch = dec.batch(y, h)
    index = np.array([codebook.index_of(cw)])
    if mode == "ml":
        new = dec.frequency_refine_ml(batch.metric, index)
    elif mode == "greedy":
        evid = dec.refined_evidence(batch.H, index) if evidence is None \
            else np.asarray(evidence.a_hat)[None]
        step_counts = [] if counts is not None else None
        new = dec.frequency_refine_greedy(batch.Z, batch.H, index,
                                          dec.group_order(evid, index), step_counts)
        if counts is not None:
            counts.extend(c[0] for c in step_counts)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return codebook.codeword(int(new[0]))


def refine_evidence(cw: Codeword, h, cfg: SystemConfig) -> FrequencyEvidence:
    """Model evidence of a codeword: row ``c_k`` is ``H P_k w_k``, other rows zero."""
    cw.validate(cfg)
    h = _channel_array(h)
    w = steering_matrix(cfg)
    a_hat = np.zeros((cfg.n_carriers, cfg.n_rx), dtype=complex)
    for c, p in zip(cw.freq.indices, cw.alloc.vectors(cfg.n_tx)):
        a_hat[c] = h @ (p * w[c])
    return FrequencyEvidence.from_rows(a_hat)


def decode_noniter(y, h, cfg: SystemConfig, codebook: Codebook | None = None,
                   spatial: str = "ml", evidence_mode: str = "auto") -> DecodeResult:
    codebook = codebook or Codebook.addressable(cfg)
    dec = Decoder(codebook, evidence_mode)
    h = _channel_array(h)
    index = int(dec.batch(y, h).noniter(spatial)[0][0])
    return _result(dec, y, h, index)


def decode_iter(y, h, cfg: SystemConfig, codebook: Codebook | None = None,
                mode: str = "ml", i_max: int = 10, evidence_mode: str = "auto") -> DecodeResult:
    codebook = codebook or Codebook.addressable(cfg)
    dec = Decoder(codebook, evidence_mode)
    h = _channel_array(h)
    index, iterations = dec.batch(y, h).iterative(mode, i_max)
    return _result(dec, y, h, int(index[0]), int(iterations[0]))
