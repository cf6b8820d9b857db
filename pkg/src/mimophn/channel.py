"""Signal model: Rician block-fading MIMO channel, per-oscillator Wiener phase
noise, and the noisy per-instant observation

    y(k) = G_r(k) H G_t(k) s(k) + w(k),

where G_r / G_t are diagonal matrices of unit-modulus receive / transmit
oscillator phase rotations and w is circular complex Gaussian noise.

All generators are pure functions of an explicit seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, ModelError


@dataclass(frozen=True)
class ChannelConfig:
    """Static parameters of the Rician MIMO channel.

    rician_factor_db is the LoS/NLoS power ratio in dB; -inf gives a pure
    NLoS (Rayleigh) channel. channel_mean / channel_var apply per entry.
    """

    num_tx: int
    num_rx: int
    rician_factor_db: float = 2.0
    channel_mean: complex = 0j
    channel_var: float = 1.0

    def __post_init__(self):
        if self.num_tx < 1 or self.num_rx < 1:
            raise ConfigurationError("antenna counts must be >= 1")
        if not self.channel_var > 0:
            raise ConfigurationError("channel_var must be > 0")


@dataclass(frozen=True)
class PhnConfig:
    """Wiener phase-noise parameters: per-step innovation variance (rad^2)
    and the number of time instants per frame."""

    innovation_var: float
    frame_len: int

    def __post_init__(self):
        if self.innovation_var < 0:
            raise ConfigurationError("innovation_var must be >= 0")
        if self.frame_len < 1:
            raise ConfigurationError("frame_len must be >= 1")


@dataclass(frozen=True)
class PhnTrajectories:
    """Per-oscillator random-walk phase sample paths over one frame.

    rx_phase is (num_rx, frame_len), tx_phase is (num_tx, frame_len), in rad.
    The stored innovations satisfy phase[:, k] - phase[:, k-1] == innovation[:, k]
    exactly, with the walk started from phase 0 before the first instant.
    """

    rx_phase: np.ndarray
    tx_phase: np.ndarray
    rx_innovations: np.ndarray
    tx_innovations: np.ndarray
    innovation_var: float

    @property
    def num_rx(self) -> int:
        return self.rx_phase.shape[0]

    @property
    def num_tx(self) -> int:
        return self.tx_phase.shape[0]

    @property
    def frame_len(self) -> int:
        return self.rx_phase.shape[1]


@dataclass(frozen=True)
class ReducedPhnTrajectory:
    """Identifiable phase combinations after removing the common-phase
    ambiguity against the last transmit oscillator.

    phi is (num_rx + num_tx - 1, frame_len):
      phi[f]          = rx_phase[f] + tx_phase[-1]          for f < num_rx
      phi[num_rx + m] = tx_phase[m] - tx_phase[-1]          for m < num_tx - 1
    Each reduced component is a random walk with per-step variance
    reduced_innovation_var = 2 * innovation_var.
    """

    phi: np.ndarray
    reduced_innovation_var: float

    @property
    def state_dim(self) -> int:
        return self.phi.shape[0]

    @property
    def frame_len(self) -> int:
        return self.phi.shape[1]


@dataclass(frozen=True)
class ReceivedFrame:
    """Noisy observations (num_rx, frame_len) plus the noise variance per
    receive antenna (total complex variance per entry)."""

    observations: np.ndarray
    noise_var: np.ndarray
    eb_n0_db: float | None = None

    @property
    def num_rx(self) -> int:
        return self.observations.shape[0]

    @property
    def frame_len(self) -> int:
        return self.observations.shape[1]

    def noise_var_scalar(self) -> float:
        """Single noise variance shared by all antennas.

        Raises ModelError if per-antenna values differ; the receiver chain
        assumes one global value.
        """
        nv = np.asarray(self.noise_var, dtype=float)
        if nv.ndim == 0:
            return float(nv)
        if not np.all(nv == nv.flat[0]):
            raise ModelError("per-antenna noise variances differ")
        return float(nv.flat[0])


def generate_rician_channel(cfg: ChannelConfig, seed) -> np.ndarray:
    """Draw one (num_rx, num_tx) Rician channel matrix.

    Each entry is channel_mean plus a deterministic LoS term (all entries
    equal) plus zero-mean complex Gaussian NLoS scatter; the LoS/NLoS power
    split is K/(K+1) vs 1/(K+1) with K = 10^(rician_factor_db/10), and the
    random part has total per-entry variance channel_var * 1/(K+1).
    """
    rng = np.random.default_rng(seed)
    k_lin = 10.0 ** (cfg.rician_factor_db / 10.0)
    los_power = cfg.channel_var * k_lin / (1.0 + k_lin)
    nlos_power = cfg.channel_var / (1.0 + k_lin)
    shape = (cfg.num_rx, cfg.num_tx)
    scatter = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    h = cfg.channel_mean + np.sqrt(los_power) + np.sqrt(nlos_power / 2.0) * scatter
    return h.astype(np.complex128)


def generate_phn(cfg: PhnConfig, num_tx: int, num_rx: int, seed) -> PhnTrajectories:
    """Draw num_rx + num_tx independent Wiener phase walks of length frame_len.

    The first sample is itself an innovation from phase 0, so the recursion
    phase(k) = phase(k-1) + innovation(k) holds at every instant.
    """
    if num_tx < 1 or num_rx < 1:
        raise ConfigurationError("antenna counts must be >= 1")
    rng = np.random.default_rng(seed)
    std = np.sqrt(cfg.innovation_var)
    rx_phase = np.cumsum(std * rng.standard_normal((num_rx, cfg.frame_len)), axis=1)
    tx_phase = np.cumsum(std * rng.standard_normal((num_tx, cfg.frame_len)), axis=1)
    # store the increments actually present in the rounded walks so the
    # recursion phase(k) = phase(k-1) + innovation(k) is exact
    return PhnTrajectories(
        rx_phase=rx_phase,
        tx_phase=tx_phase,
        rx_innovations=np.diff(rx_phase, axis=1, prepend=0.0),
        tx_innovations=np.diff(tx_phase, axis=1, prepend=0.0),
        innovation_var=cfg.innovation_var,
    )


def reduce_ambiguity(phn: PhnTrajectories) -> ReducedPhnTrajectory:
    """Map full per-oscillator phases to the identifiable reduced state."""
    ref = phn.tx_phase[-1]
    phi = np.concatenate([phn.rx_phase + ref, phn.tx_phase[:-1] - ref], axis=0)
    return ReducedPhnTrajectory(phi=phi, reduced_innovation_var=2.0 * phn.innovation_var)


def effective_channels(h: np.ndarray, phn: PhnTrajectories) -> np.ndarray:
    """Stack of per-instant effective matrices X(k) = G_r(k) H G_t(k),
    shape (frame_len, num_rx, num_tx).

    The two rotations act entrywise as exp(j(theta_r + theta_t)); summing
    the phases before exponentiating keeps the common-phase ambiguity an
    exact symmetry whenever the shifted phases themselves are exact.
    """
    num_rx, num_tx = h.shape
    if phn.num_rx != num_rx or phn.num_tx != num_tx:
        raise ModelError("phase trajectories do not match channel dimensions")
    total = phn.rx_phase.T[:, :, None] + phn.tx_phase.T[:, None, :]
    return h[None, :, :] * np.exp(1j * total)


def effective_channels_reduced(h: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Same stack built from a reduced trajectory (num_rx+num_tx-1, frame_len).

    The last transmit rotation is fixed to 1; the reduced parameterization
    yields exactly the same X(k) as the full one it was derived from.
    """
    num_rx, num_tx = h.shape
    if phi.shape[0] != num_rx + num_tx - 1:
        raise ModelError("reduced state dimension does not match antennas")
    gr = np.exp(1j * phi[:num_rx].T)  # (L, num_rx)
    gt = np.ones((phi.shape[1], num_tx), dtype=np.complex128)
    if num_tx > 1:
        gt[:, :-1] = np.exp(1j * phi[num_rx:].T)
    return gr[:, :, None] * h[None, :, :] * gt[:, None, :]


def apply_channel(symbols, h: np.ndarray, phn: PhnTrajectories | None,
                  noise_var, seed, eb_n0_db: float | None = None) -> ReceivedFrame:
    """Propagate a symbol frame through the phase-rotated channel plus AWGN.

    symbols may be a (num_tx, frame_len) array or any object with a .symbols
    attribute of that shape. phn=None means no phase noise (identity
    rotations). noise_var is the total complex noise variance per receive
    antenna entry (scalar or length num_rx); 0 disables noise.
    """
    s = np.asarray(getattr(symbols, "symbols", symbols), dtype=np.complex128)
    num_rx, num_tx = h.shape
    if s.ndim != 2 or s.shape[0] != num_tx:
        raise ModelError(f"symbol matrix must be ({num_tx}, L), got {s.shape}")
    frame_len = s.shape[1]
    nv = np.broadcast_to(np.asarray(noise_var, dtype=float), (num_rx,)).copy()
    if np.any(nv < 0):
        raise ModelError("noise_var must be >= 0")

    if phn is None:
        clean = h @ s
    else:
        if phn.frame_len != frame_len:
            raise ModelError("phase trajectories do not match frame length")
        x = effective_channels(h, phn)
        clean = np.einsum("krt,tk->rk", x, s)

    rng = np.random.default_rng(seed)
    w = rng.standard_normal((num_rx, frame_len)) + 1j * rng.standard_normal((num_rx, frame_len))
    w *= np.sqrt(nv / 2.0)[:, None]
    return ReceivedFrame(observations=clean + w, noise_var=nv, eb_n0_db=eb_n0_db)
