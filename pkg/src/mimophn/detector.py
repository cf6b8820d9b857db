"""Iterative soft detector: vector channel likelihoods, marginalizing
equalizer, soft demapper, decoder exchange, symbol mapper, and the posterior
mapper producing per-instant soft symbol statistics.

All message passing is in the probability domain with clamping to
[CLAMP_EPS, 1 - CLAMP_EPS]. Every emitted categorical distribution is
normalized to unit mass. The equalizer marginalizes exactly over all
order^num_tx candidate symbol vectors; this is the contract, not an
approximation (2x2 with 16-QAM gives 256 candidates).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bicm import Constellation, FrameLayout, Interleaver, deinterleave, interleave
from .channel import ReceivedFrame, effective_channels_reduced
from .errors import ConfigurationError, ModelError
from .ldpc import CLAMP_EPS, LdpcCode, decode_spa


@dataclass(frozen=True)
class DetectorConfig:
    """Loop counts: equalizer<->soft-modem, demapper<->decoder, and decoder
    iterations per call. decoder_early_exit=False forces the decoder to run
    all iterations even after the syndrome clears (needed when converged
    beliefs matter, e.g. exact marginals on cycle-free codes)."""

    outer_iters: int = 1
    inner_iters: int = 1
    decoder_iters: int = 1
    decoder_early_exit: bool = True

    def __post_init__(self):
        if min(self.outer_iters, self.inner_iters, self.decoder_iters) < 1:
            raise ConfigurationError("all iteration counts must be >= 1")


@dataclass
class DetectorDiagnostics:
    """Counters for numerical guard events."""

    zero_marginals: int = 0
    regularized: int = 0


@dataclass(frozen=True)
class CandidateSet:
    """Enumeration of all symbol vectors over num_tx antennas.

    digits[m, c] is the constellation index transmitted by antenna m in
    candidate c; membership[m, a, c] flags candidates with digits[m, c] == a.
    """

    vectors: np.ndarray     # (num_tx, num_candidates) complex
    digits: np.ndarray      # (num_tx, num_candidates) int
    membership: np.ndarray  # (num_tx, order, num_candidates) float 0/1
    constellation: Constellation

    @property
    def num_tx(self) -> int:
        return self.vectors.shape[0]

    @property
    def num_candidates(self) -> int:
        return self.vectors.shape[1]


def candidate_set(cst: Constellation, num_tx: int) -> CandidateSet:
    m = cst.order
    count = m ** num_tx
    idx = np.arange(count)
    digits = np.empty((num_tx, count), dtype=np.int64)
    for a in range(num_tx):
        digits[a] = (idx // (m ** (num_tx - 1 - a))) % m
    vectors = cst.points[digits]
    membership = np.zeros((num_tx, m, count))
    for a in range(num_tx):
        membership[a, digits[a], idx] = 1.0
    return CandidateSet(vectors=vectors, digits=digits, membership=membership,
                        constellation=cst)


@dataclass(frozen=True)
class SymbolVectorLikelihoods:
    """Per data instant, one likelihood value per candidate symbol vector,
    max-normalized per instant before exponentiation."""

    values: np.ndarray  # (num_data_slots, num_candidates)
    candidates: CandidateSet


@dataclass(frozen=True)
class SoftSymbolStats:
    """Posterior mean alpha (num_tx, frame_len) and per-instant second-moment
    matrices (frame_len, num_tx, num_tx) of the transmitted vector."""

    alpha: np.ndarray
    second_moment: np.ndarray


def channel_likelihoods(y: ReceivedFrame, h: np.ndarray, phi,
                        cst: Constellation, layout: FrameLayout,
                        cands: CandidateSet | None = None) -> SymbolVectorLikelihoods:
    """Gaussian vector-channel likelihoods at the data instants.

    The exponent is -||y(k) - X(k) a||^2 / (2 sigma_w^2) with sigma_w^2 the
    total complex noise variance per entry; the per-instant maximum is
    subtracted before exponentiation so the top candidate always maps to 1.
    Pilot instants carry known vectors and are excluded here.
    """
    phi = np.asarray(getattr(phi, "phi", phi), dtype=float)
    if cands is None:
        cands = candidate_set(cst, layout.num_tx)
    sigma2 = y.noise_var_scalar()
    if sigma2 <= 0:
        raise ModelError("likelihoods need a positive noise variance")
    x = effective_channels_reduced(h, phi)[layout.data_instants]  # (K, Nr, Nt)
    xa = np.einsum("krt,tc->krc", x, cands.vectors)
    resid = y.observations[:, layout.data_instants].T[:, :, None] - xa
    metric = -np.sum(np.abs(resid) ** 2, axis=1) / (2.0 * sigma2)
    metric -= metric.max(axis=1, keepdims=True)
    return SymbolVectorLikelihoods(values=np.exp(metric), candidates=cands)


def _normalize(dist: np.ndarray, axis: int,
               diag: DetectorDiagnostics | None) -> np.ndarray:
    """Normalize to unit mass along axis; all-zero slices become uniform."""
    total = dist.sum(axis=axis, keepdims=True)
    bad = total <= 0
    if np.any(bad):
        if diag is not None:
            diag.zero_marginals += int(bad.sum())
        dist = np.where(bad, 1.0, dist)
        total = dist.sum(axis=axis, keepdims=True)
    return dist / total


def _candidate_prior_products(sym_priors: np.ndarray, cands: CandidateSet) -> np.ndarray:
    """Per-candidate per-antenna leave-one-out prior products.

    Returns loo of shape (num_tx, K, C) where loo[m] is the product of the
    other antennas' priors evaluated at each candidate, built from prefix and
    suffix products so exact zeros stay exact.
    """
    num_tx = cands.num_tx
    gathered = np.stack([sym_priors[:, m, cands.digits[m]] for m in range(num_tx)])
    left = np.ones_like(gathered)
    right = np.ones_like(gathered)
    np.cumprod(gathered[:-1], axis=0, out=left[1:])
    np.cumprod(gathered[:0:-1], axis=0, out=right[-2::-1])
    return left * right


def equalizer_extrinsic(lik: SymbolVectorLikelihoods, sym_priors: np.ndarray,
                        diag: DetectorDiagnostics | None = None) -> np.ndarray:
    """Marginalize the vector likelihood per antenna, weighting the other
    antennas by their priors and excluding the target antenna's own prior.

    sym_priors is (K, num_tx, order); returns extrinsics of the same shape.
    """
    cands = lik.candidates
    loo = _candidate_prior_products(sym_priors, cands)
    ext = np.einsum("mac,kc,mkc->kma", cands.membership, lik.values, loo)
    return _normalize(ext, axis=2, diag=diag)


def _bit_factor_products(bit_priors: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Leave-one-out products over bit positions of each point's label
    priors. bit_priors (K, num_tx, D) -> (K, num_tx, order, D)."""
    lab = labels.astype(bool)[None, None, :, :]
    p = np.where(lab, bit_priors[:, :, None, :], 1.0 - bit_priors[:, :, None, :])
    left = np.ones_like(p)
    right = np.ones_like(p)
    np.cumprod(p[..., :-1], axis=-1, out=left[..., 1:])
    np.cumprod(p[..., :0:-1], axis=-1, out=right[..., -2::-1])
    return left * right


def demapper_extrinsic(sym_ext: np.ndarray, bit_priors: np.ndarray,
                       cst: Constellation,
                       diag: DetectorDiagnostics | None = None) -> np.ndarray:
    """Per-bit extrinsic from symbol extrinsics and the other bits' priors.

    For each bit position the constellation is split by that bit's label
    value and the symbol extrinsics are summed weighted by the remaining
    bits' priors. Returns P(bit = 1) of shape (K, num_tx, D); the
    complementary mass is the normalizer.
    """
    labels = cst.labels
    excl = _bit_factor_products(bit_priors, labels)
    contrib = sym_ext[:, :, :, None] * excl
    one = np.einsum("nd,kmnd->kmd", labels.astype(float), contrib)
    zero = np.einsum("nd,kmnd->kmd", 1.0 - labels.astype(float), contrib)
    pair = _normalize(np.stack([zero, one], axis=-1), axis=-1, diag=diag)
    return np.clip(pair[..., 1], CLAMP_EPS, 1.0 - CLAMP_EPS)


def symbol_priors_from_bits(bit_priors: np.ndarray, cst: Constellation,
                            diag: DetectorDiagnostics | None = None) -> np.ndarray:
    """Product of per-bit priors over each point's label, normalized per
    (instant, antenna). bit_priors (K, num_tx, D) -> (K, num_tx, order)."""
    lab = cst.labels.astype(bool)[None, None, :, :]
    p = np.where(lab, bit_priors[:, :, None, :], 1.0 - bit_priors[:, :, None, :])
    return _normalize(np.prod(p, axis=-1), axis=2, diag=diag)


def posterior_mapper(lik: SymbolVectorLikelihoods, bit_priors: np.ndarray,
                     layout: FrameLayout,
                     diag: DetectorDiagnostics | None = None):
    """Joint symbol-vector posterior and the soft statistics alpha / B.

    The posterior at a data instant is the normalized product of the vector
    likelihood and all antennas' bit priors. Pilot instants contribute point
    masses on the known pilot vector, so alpha equals the pilot vector and B
    its outer product there.
    """
    cands = lik.candidates
    sym_w = symbol_priors_from_bits(bit_priors, cands.constellation, diag)
    gathered = np.stack([sym_w[:, m, cands.digits[m]] for m in range(cands.num_tx)])
    post = _normalize(lik.values * np.prod(gathered, axis=0), axis=1, diag=diag)

    num_tx, frame_len = layout.num_tx, layout.frame_len
    alpha = np.empty((num_tx, frame_len), dtype=np.complex128)
    second = np.empty((frame_len, num_tx, num_tx), dtype=np.complex128)
    alpha[:, layout.data_instants] = cands.vectors @ post.T
    second[layout.data_instants] = np.einsum(
        "ic,jc,kc->kij", cands.vectors, np.conj(cands.vectors), post
    )
    pilots = layout.pilot_symbols
    alpha[:, layout.pilot_instants] = pilots
    second[layout.pilot_instants] = np.einsum("ip,jp->pij", pilots, np.conj(pilots))
    return post, SoftSymbolStats(alpha=alpha, second_moment=second)


@dataclass(frozen=True)
class DetectorResult:
    soft: SoftSymbolStats
    vector_posterior: np.ndarray   # (num_data_slots, num_candidates)
    bit_posteriors: np.ndarray     # (block_len,) P(bit = 1) from the decoder
    info_hard: np.ndarray          # hard decisions on systematic positions
    bit_priors_out: np.ndarray     # (K, num_tx, D) warm start for the next pass
    syndrome_ok: bool
    diagnostics: DetectorDiagnostics = field(default_factory=DetectorDiagnostics)


def uniform_bit_priors(layout: FrameLayout) -> np.ndarray:
    return np.full(
        (layout.num_data_slots, layout.num_tx, layout.bits_per_symbol), 0.5
    )


def run_detector(y: ReceivedFrame, h: np.ndarray, phi, layout: FrameLayout,
                 code: LdpcCode, il: Interleaver, cst: Constellation,
                 cfg: DetectorConfig,
                 warm_bit_priors: np.ndarray | None = None) -> DetectorResult:
    """One full detector pass for a given phase estimate.

    Loop nesting: outer equalizer/soft-modem loop around an inner
    demapper/decoder loop, then the posterior mapper. warm_bit_priors (same
    shape as the interleaved per-slot bit array) seeds the exchange; None
    means uniform, as used on the first pass.
    """
    diag = DetectorDiagnostics()
    cands = candidate_set(cst, layout.num_tx)
    lik = channel_likelihoods(y, h, phi, cst, layout, cands)

    bit_pri = uniform_bit_priors(layout) if warm_bit_priors is None \
        else np.asarray(warm_bit_priors, dtype=float)
    sym_pri = symbol_priors_from_bits(bit_pri, cst, diag)

    dec = None
    for _ in range(cfg.outer_iters):
        sym_ext = equalizer_extrinsic(lik, sym_pri, diag)
        for _ in range(cfg.inner_iters):
            bit_ext = demapper_extrinsic(sym_ext, bit_pri, cst, diag)
            deint = deinterleave(il, bit_ext.reshape(-1))
            dec = decode_spa(code, deint[: code.block_len], cfg.decoder_iters,
                             early_exit=cfg.decoder_early_exit)
            flat = np.full(layout.total_bits, 0.5)
            flat[: code.block_len] = dec.extrinsic.prob_one
            bit_pri = interleave(il, flat).reshape(bit_pri.shape)
        sym_pri = symbol_priors_from_bits(bit_pri, cst, diag)

    post, soft = posterior_mapper(lik, bit_pri, layout, diag)
    bit_post = dec.posterior.prob_one
    info_hard = (bit_post[code.systematic_cols] > 0.5).astype(np.uint8)
    return DetectorResult(
        soft=soft,
        vector_posterior=post,
        bit_posteriors=bit_post,
        info_hard=info_hard,
        bit_priors_out=bit_pri,
        syndrome_ok=dec.syndrome_ok,
        diagnostics=diag,
    )
