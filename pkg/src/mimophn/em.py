"""Alternating estimation/detection receiver: pilot-based initialization,
detector passes producing soft symbol statistics, phase re-estimation with
the filter-smoother, plus the surrogate-objective evaluator and a
grid-search reference estimator usable at small frame sizes.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .bicm import Constellation, FrameLayout, Interleaver
from .channel import ReceivedFrame, effective_channels_reduced
from .detector import (DetectorConfig, DetectorResult, SoftSymbolStats,
                       run_detector)
from .ekfs import EkfsConfig, filter_sequence, run_ekfs
from .errors import ConfigurationError, ModelError
from .ldpc import LdpcCode


@dataclass(frozen=True)
class EmConfig:
    """Receiver loop parameters. The pilot geometry itself lives in the
    frame layout shared with the transmitter."""

    em_iters: int = 3
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    innovation_var: float = 5e-5
    structured_prior: bool = False

    def __post_init__(self):
        if self.em_iters < 1:
            raise ConfigurationError("em_iters must be >= 1")


@dataclass(frozen=True)
class MapOracleConfig:
    """Grid-search settings: step size (rad) over [-pi, pi) and the number
    of full coordinate-ascent cycles."""

    grid_step: float = 1e-2
    ap_cycles: int = 4

    def __post_init__(self):
        if self.grid_step <= 0 or self.ap_cycles < 1:
            raise ConfigurationError("grid_step > 0 and ap_cycles >= 1 required")


def _ekfs_config(y: ReceivedFrame, h: np.ndarray, innovation_var: float,
                 structured: bool) -> EkfsConfig:
    num_rx, num_tx = h.shape
    return EkfsConfig(
        innovation_var=innovation_var,
        noise_var=y.noise_var_scalar(),
        num_rx=num_rx,
        num_tx=num_tx,
        structured_process_cov=structured,
    )


def init_pilot_phn(y: ReceivedFrame, h: np.ndarray, layout: FrameLayout,
                   innovation_var: float,
                   structured_prior: bool = False) -> np.ndarray:
    """Initial phase trajectory from pilots only.

    The filter-smoother runs over the pilot subsequence with the prediction
    covariance inflated by the skipped-instant count, then each reduced
    component is linearly interpolated across the data instants; beyond the
    outermost pilots the edge value is held.
    """
    cfg = _ekfs_config(y, h, innovation_var, structured_prior)
    n, frame_len = cfg.state_dim, layout.frame_len
    pilots = layout.pilot_instants
    if pilots.size == 0:
        warnings.warn("no pilots in layout; starting from an all-zero trajectory")
        return np.zeros((n, frame_len))
    gaps = np.diff(pilots, prepend=-1)
    traj = filter_sequence(
        y.observations[:, pilots].T, h, layout.pilot_symbols, gaps, cfg
    )
    if pilots.size == 1:
        warnings.warn("single pilot; holding one estimate across the frame")
        return np.repeat(traj.smoothed_state.T, frame_len, axis=1)
    grid = np.arange(frame_len)
    phi = np.empty((n, frame_len))
    for f in range(n):
        phi[f] = np.interp(grid, pilots, traj.smoothed_state[:, f])
    return phi


def _log_prior(phi: np.ndarray, q: np.ndarray) -> float:
    """Random-walk log-prior on the increments, constants dropped. The
    initial sample is left free, so common shifts that the reduced model
    cannot observe do not change the value."""
    d = np.diff(phi, axis=1)
    if d.size == 0:
        return 0.0
    return -0.5 * float(np.sum(d * np.linalg.solve(q, d)))


def evaluate_q(phi, y: ReceivedFrame, h: np.ndarray, soft: SoftSymbolStats,
               innovation_var: float, structured_prior: bool = False) -> float:
    """Surrogate objective for a candidate trajectory given soft statistics.

    Likelihood part: sum over instants of
    (2 Re{(X alpha)^H y} - tr(X B X^H)) / (2 sigma_w^2); prior part: the
    increment log-prior above. Constant terms are dropped throughout.
    """
    phi = np.asarray(getattr(phi, "phi", phi), dtype=float)
    sigma2 = y.noise_var_scalar()
    x = effective_channels_reduced(h, phi)  # (L, Nr, Nt)
    xa = np.einsum("krt,tk->rk", x, soft.alpha)
    term1 = 2.0 * float(np.sum(np.real(np.conj(xa) * y.observations)))
    term2 = float(np.real(np.einsum("krt,kts,krs->", x, soft.second_moment,
                                    np.conj(x))))
    num_rx, num_tx = h.shape
    cfg = EkfsConfig(innovation_var, sigma2, num_rx, num_tx,
                     structured_process_cov=structured_prior)
    return (term1 - term2) / (2.0 * sigma2) + _log_prior(phi, cfg.process_cov())


def map_oracle(y: ReceivedFrame, h: np.ndarray, alpha: np.ndarray,
               cfg: MapOracleConfig, innovation_var: float,
               structured_prior: bool = False) -> np.ndarray:
    """Cyclic coordinate ascent on a phase grid, for desk-scale frames.

    Maximizes the known-symbol objective
    -sum_k ||y(k) - X(k) alpha(k)||^2 / (2 sigma_w^2) + log-prior
    by sweeping every (component, instant) over a grid_step grid on
    [-pi, pi), holding the rest fixed, for ap_cycles full cycles starting
    from the all-zero trajectory. Deterministic; returns the best grid point
    found per coordinate.
    """
    num_rx, num_tx = h.shape
    n = num_rx + num_tx - 1
    frame_len = y.frame_len
    alpha = np.asarray(alpha, dtype=np.complex128)
    if alpha.shape != (num_tx, frame_len):
        raise ModelError("alpha must be (num_tx, frame_len)")
    sigma2 = y.noise_var_scalar()
    q = EkfsConfig(innovation_var, sigma2, num_rx, num_tx,
                   structured_process_cov=structured_prior).process_cov()
    q_inv = np.linalg.inv(q)
    grid = np.arange(-np.pi, np.pi, cfg.grid_step)
    g_len = grid.size

    phi = np.zeros((n, frame_len))
    for _ in range(cfg.ap_cycles):
        for f in range(n):
            for k in range(frame_len):
                cand = np.repeat(phi[:, k][:, None], g_len, axis=1)
                cand[f] = grid
                # likelihood at instant k for every grid value
                gr = np.exp(1j * cand[:num_rx])            # (Nr, G)
                gt = np.ones((num_tx, g_len), dtype=np.complex128)
                if num_tx > 1:
                    gt[:-1] = np.exp(1j * cand[num_rx:])
                z = gr * (h @ (gt * alpha[:, k][:, None]))
                score = -np.sum(np.abs(y.observations[:, k][:, None] - z) ** 2,
                                axis=0) / (2.0 * sigma2)
                # prior terms: the two increments touching instant k
                if k > 0:
                    d = cand - phi[:, k - 1][:, None]
                    score -= 0.5 * np.sum(d * (q_inv @ d), axis=0)
                if k < frame_len - 1:
                    d = phi[:, k + 1][:, None] - cand
                    score -= 0.5 * np.sum(d * (q_inv @ d), axis=0)
                phi[f, k] = grid[int(np.argmax(score))]
    return phi


@dataclass(frozen=True)
class EmIteration:
    """History record of one estimation/detection round."""

    index: int
    q_value: float
    info_hard: np.ndarray
    syndrome_ok: bool
    syndrome_weight: int
    phi_used: np.ndarray
    phi_next: np.ndarray
    bit_errors: int | None = None


@dataclass(frozen=True)
class EmRunResult:
    history: list
    phi_init: np.ndarray
    phi_final: np.ndarray

    @property
    def info_hard(self) -> np.ndarray:
        return self.history[-1].info_hard


def run_em(y: ReceivedFrame, h: np.ndarray, layout: FrameLayout,
           code: LdpcCode, il: Interleaver, cst: Constellation,
           cfg: EmConfig, truth_info: np.ndarray | None = None,
           collect_q: bool = True) -> EmRunResult:
    """Full receiver: pilot initialization, then em_iters alternations of a
    detector pass (warm-started with the previous round's bit priors) and a
    phase re-estimation pass. Hard decisions come from the last detector
    pass; the trailing phase estimate is kept for diagnostics.
    """
    ek_cfg = _ekfs_config(y, h, cfg.innovation_var, cfg.structured_prior)
    phi = init_pilot_phn(y, h, layout, cfg.innovation_var, cfg.structured_prior)
    phi_init = phi.copy()
    warm = None
    history = []
    for i in range(1, cfg.em_iters + 1):
        det = run_detector(y, h, phi, layout, code, il, cst, cfg.detector,
                           warm_bit_priors=warm)
        traj = run_ekfs(y, h, det.soft, ek_cfg)
        phi_next = traj.smoothed_state.T
        q_val = evaluate_q(phi_next, y, h, det.soft, cfg.innovation_var,
                           cfg.structured_prior) if collect_q else float("nan")
        hard_word = (det.bit_posteriors > 0.5).astype(np.uint8)
        history.append(EmIteration(
            index=i,
            q_value=q_val,
            info_hard=det.info_hard,
            syndrome_ok=det.syndrome_ok,
            syndrome_weight=int(code.syndrome(hard_word).sum()),
            phi_used=phi,
            phi_next=phi_next,
            bit_errors=None if truth_info is None
            else int(np.count_nonzero(det.info_hard != truth_info)),
        ))
        warm = det.bit_priors_out
        phi = phi_next
    return EmRunResult(history=history, phi_init=phi_init, phi_final=phi)


def disjoint_receiver(y: ReceivedFrame, h: np.ndarray, layout: FrameLayout,
                      code: LdpcCode, il: Interleaver, cst: Constellation,
                      detector_cfg: DetectorConfig,
                      innovation_var: float) -> DetectorResult:
    """Baseline: pilot-only phase estimation followed by a single detector
    pass, with no feedback of soft decisions into the estimator."""
    phi = init_pilot_phn(y, h, layout, innovation_var)
    return run_detector(y, h, phi, layout, code, il, cst, detector_cfg)


def write_em_diagnostics(result: EmRunResult, path) -> None:
    """One JSON record per iteration: index, objective value, syndrome
    weight, and bit errors when truth was supplied."""
    with open(path, "w", encoding="ascii") as f:
        for it in result.history:
            rec = {
                "iteration": it.index,
                "q_value": it.q_value,
                "syndrome_weight": it.syndrome_weight,
                "bit_errors": it.bit_errors,
            }
            f.write(json.dumps(rec) + "\n")
