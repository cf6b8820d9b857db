"""Soft-decision-directed extended Kalman filter with fixed-interval
smoother over the reduced phase state.

State model per instant: phi(k) = phi(k-1) + increment, increment covariance
Q (diagonal 2*innovation_var by default, or the exact structured covariance
of the reduced increments as an opt-in). Observation model:
y(k) ~= z(phi(k)) + w(k) with z(phi) = G_r(phi) H G_t(phi) alpha(k) and the
soft symbol mean alpha standing in for the unknown symbols.

The complex measurement is folded to the real state through the real part of
the gain-weighted innovation, with complex innovation covariance
noise_var * I (real and imaginary parts noise_var / 2 each).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ReceivedFrame
from .detector import SoftSymbolStats
from .errors import ConfigurationError, ModelError

_REG = 1e-12  # added to a singular innovation/prediction covariance


@dataclass(frozen=True)
class EkfsConfig:
    """Filter parameters; state_dim is num_rx + num_tx - 1."""

    innovation_var: float
    noise_var: float
    num_rx: int
    num_tx: int
    structured_process_cov: bool = False

    def __post_init__(self):
        if self.innovation_var < 0 or self.noise_var <= 0:
            raise ConfigurationError("variances must be positive (innovation >= 0)")
        if self.num_rx < 1 or self.num_tx < 1:
            raise ConfigurationError("antenna counts must be >= 1")

    @property
    def state_dim(self) -> int:
        return self.num_rx + self.num_tx - 1

    def process_cov(self) -> np.ndarray:
        """Per-step increment covariance Q.

        Default: 2*innovation_var * I. Structured: the exact covariance of
        the reduced increments, which share the reference oscillator's
        innovation: innovation_var * (I + v v^T) with v = (+1,...,+1 | -1,...,-1)
        over the receive / transmit partitions.
        """
        n = self.state_dim
        if not self.structured_process_cov:
            return 2.0 * self.innovation_var * np.eye(n)
        v = np.concatenate([np.ones(self.num_rx), -np.ones(self.num_tx - 1)])
        return self.innovation_var * (np.eye(n) + np.outer(v, v))


@dataclass(frozen=True)
class EkfsTrajectory:
    """Forward-filter and smoother outputs over the processed instants."""

    prior_state: np.ndarray    # (T, N)
    post_state: np.ndarray     # (T, N)
    smoothed_state: np.ndarray  # (T, N)
    prior_cov: np.ndarray      # (T, N, N)
    post_cov: np.ndarray       # (T, N, N)
    smoothed_cov: np.ndarray   # (T, N, N)
    regularized: int = 0

    @property
    def frame_len(self) -> int:
        return self.prior_state.shape[0]


def predict(phi_prev: np.ndarray, cov_prev: np.ndarray, cfg: EkfsConfig,
            steps: int = 1):
    """Time update: the state estimate carries over and the covariance grows
    by steps * Q (steps > 1 bridges skipped instants on pilot-only runs)."""
    return phi_prev.copy(), cov_prev + steps * cfg.process_cov()


def _phase_split(phi: np.ndarray, num_rx: int, num_tx: int):
    gr = np.exp(1j * phi[:num_rx])
    gt = np.ones(num_tx, dtype=np.complex128)
    if num_tx > 1:
        gt[:-1] = np.exp(1j * phi[num_rx:])
    return gr, gt


def predicted_observation(phi: np.ndarray, h: np.ndarray,
                          alpha_k: np.ndarray) -> np.ndarray:
    """z(phi) = G_r H G_t alpha for one instant."""
    num_rx, num_tx = h.shape
    if phi.shape != (num_rx + num_tx - 1,):
        raise ModelError("state length does not match antenna counts")
    gr, gt = _phase_split(phi, num_rx, num_tx)
    return gr * (h @ (gt * alpha_k))


def jacobian(phi: np.ndarray, h: np.ndarray, alpha_k: np.ndarray) -> np.ndarray:
    """Derivative of z with respect to the reduced state at phi.

    The receive block is diag(j * z); the transmit block has entries
    j * h[l, m] * exp(j phi_l) * alpha[m] * exp(j phi_{num_rx + m}) for the
    num_tx - 1 non-reference transmit oscillators.
    """
    num_rx, num_tx = h.shape
    gr, gt = _phase_split(phi, num_rx, num_tx)
    z = gr * (h @ (gt * alpha_k))
    out = np.zeros((num_rx, num_rx + num_tx - 1), dtype=np.complex128)
    out[:, :num_rx] = np.diag(1j * z)
    if num_tx > 1:
        out[:, num_rx:] = 1j * gr[:, None] * h[:, :-1] * (alpha_k[:-1] * gt[:-1])[None, :]
    return out


def _solve_right(a: np.ndarray, b: np.ndarray):
    """x satisfying x @ b = a, via a linear solve on b^T."""
    return np.linalg.solve(b.T, a.T).T


def update(phi_minus: np.ndarray, cov_minus: np.ndarray, y_k: np.ndarray,
           z: np.ndarray, jac: np.ndarray, cfg: EkfsConfig):
    """Measurement update.

    Gain K = M- J^H (C_w + J M- J^H)^(-1) with C_w = noise_var * I; the state
    moves by Re{K (y - z)} and the covariance by (I - Re{K J}) M-, then is
    symmetrized. Returns (phi_plus, cov_plus, regularized_flag).
    """
    n = cfg.state_dim
    s = cfg.noise_var * np.eye(cfg.num_rx) + jac @ cov_minus @ jac.conj().T
    mjh = cov_minus @ jac.conj().T
    reg = 0
    try:
        gain = _solve_right(mjh, s)
    except np.linalg.LinAlgError:
        gain = _solve_right(mjh, s + _REG * np.eye(cfg.num_rx))
        reg = 1
    phi_plus = phi_minus + (gain @ (y_k - z)).real
    cov_plus = (np.eye(n) - (gain @ jac).real) @ cov_minus
    cov_plus = 0.5 * (cov_plus + cov_plus.T)
    return phi_plus, cov_plus, reg


def smooth(prior_state: np.ndarray, post_state: np.ndarray,
           prior_cov: np.ndarray, post_cov: np.ndarray):
    """Fixed-interval backward recursion.

    Boundary: smoothed(T-1) = posterior(T-1). Gain G = M+(k) inv(M-(k+1))
    is computed by linear solve; a singular prediction covariance is
    regularized and flagged. Returns (smoothed_state, smoothed_cov, n_reg).
    """
    t_len, n = post_state.shape
    sm_state = post_state.copy()
    sm_cov = post_cov.copy()
    n_reg = 0
    for k in range(t_len - 2, -1, -1):
        m_pred = prior_cov[k + 1]
        try:
            gain = _solve_right(post_cov[k], m_pred)
        except np.linalg.LinAlgError:
            gain = _solve_right(post_cov[k], m_pred + _REG * np.eye(n))
            n_reg += 1
        sm_state[k] = post_state[k] + gain @ (sm_state[k + 1] - prior_state[k + 1])
        cov = post_cov[k] + gain @ (sm_cov[k + 1] - m_pred) @ gain.T
        sm_cov[k] = 0.5 * (cov + cov.T)
    return sm_state, sm_cov, n_reg


def filter_sequence(observations: np.ndarray, h: np.ndarray,
                    alpha: np.ndarray, gaps: np.ndarray,
                    cfg: EkfsConfig) -> EkfsTrajectory:
    """Forward filter plus smoother over an arbitrary instant subsequence.

    observations is (T, num_rx), alpha (num_tx, T); gaps[t] counts the
    elapsed instants since the previous processed one (all ones for a full
    frame). Initialization: state 0, covariance 2*innovation_var * I.
    """
    t_len = observations.shape[0]
    n = cfg.state_dim
    prior_state = np.zeros((t_len, n))
    post_state = np.zeros((t_len, n))
    prior_cov = np.zeros((t_len, n, n))
    post_cov = np.zeros((t_len, n, n))

    phi = np.zeros(n)
    cov = 2.0 * cfg.innovation_var * np.eye(n)
    n_reg = 0
    for t in range(t_len):
        phi_minus, cov_minus = predict(phi, cov, cfg, steps=int(gaps[t]))
        z = predicted_observation(phi_minus, h, alpha[:, t])
        jac = jacobian(phi_minus, h, alpha[:, t])
        phi, cov, reg = update(phi_minus, cov_minus, observations[t], z, jac, cfg)
        n_reg += reg
        prior_state[t], prior_cov[t] = phi_minus, cov_minus
        post_state[t], post_cov[t] = phi, cov

    sm_state, sm_cov, reg2 = smooth(prior_state, post_state, prior_cov, post_cov)
    return EkfsTrajectory(
        prior_state=prior_state,
        post_state=post_state,
        smoothed_state=sm_state,
        prior_cov=prior_cov,
        post_cov=post_cov,
        smoothed_cov=sm_cov,
        regularized=n_reg + reg2,
    )


def run_ekfs(y: ReceivedFrame, h: np.ndarray, soft: SoftSymbolStats,
             cfg: EkfsConfig) -> EkfsTrajectory:
    """Filter and smooth over every instant of a frame using the detector's
    soft symbol means (pilot instants already hold their known vectors)."""
    frame_len = y.frame_len
    if soft.alpha.shape[1] != frame_len:
        raise ModelError("soft statistics do not cover the frame")
    gaps = np.ones(frame_len, dtype=int)
    return filter_sequence(y.observations.T, h, soft.alpha, gaps, cfg)


def dump_trajectory_csv(traj: EkfsTrajectory, path) -> None:
    """Write (instant, prior, posterior, smoothed, smoothed covariance
    diagonal) rows for plotting and regression fixtures."""
    n = traj.prior_state.shape[1]
    cols = (["k"]
            + [f"prior_{f}" for f in range(n)]
            + [f"post_{f}" for f in range(n)]
            + [f"smoothed_{f}" for f in range(n)]
            + [f"cov_{f}" for f in range(n)])
    with open(path, "w", encoding="ascii") as f:
        f.write(",".join(cols) + "\n")
        for k in range(traj.frame_len):
            row = [str(k + 1)]
            row += [f"{v:.9g}" for v in traj.prior_state[k]]
            row += [f"{v:.9g}" for v in traj.post_state[k]]
            row += [f"{v:.9g}" for v in traj.smoothed_state[k]]
            row += [f"{v:.9g}" for v in np.diag(traj.smoothed_cov[k])]
            f.write(",".join(row) + "\n")
