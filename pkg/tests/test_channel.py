"""Channel model: Rician statistics, Wiener phase walks, reduced state, and
the observation equation."""

import numpy as np
import pytest

from mimophn.channel import (ChannelConfig, PhnConfig, PhnTrajectories,
                             apply_channel, effective_channels,
                             effective_channels_reduced, generate_phn,
                             generate_rician_channel, reduce_ambiguity)
from mimophn.errors import ConfigurationError, ModelError


def _phn_from_phases(rx_phase, tx_phase, innovation_var):
    rx_inn = np.diff(rx_phase, axis=1, prepend=0.0)
    tx_inn = np.diff(tx_phase, axis=1, prepend=0.0)
    return PhnTrajectories(rx_phase, tx_phase, rx_inn, tx_inn, innovation_var)


# ---------------------------------------------------------------------------
# Rician channel
# ---------------------------------------------------------------------------

def test_rician_power_split_at_2db():
    # K = 10^0.2: LoS fraction K/(K+1) ~ 0.6131, scatter fraction ~ 0.3869
    cfg = ChannelConfig(num_tx=40, num_rx=50, rician_factor_db=2.0)
    h = generate_rician_channel(cfg, seed=0)
    k = 10.0 ** 0.2
    los = np.sqrt(k / (1 + k))
    draws = np.stack([generate_rician_channel(cfg, seed=s) for s in range(50)])
    assert abs(np.mean(draws) - los) < 0.01
    assert abs(np.var(draws) - 1.0 / (1 + k)) < 0.01
    assert abs(np.mean(np.abs(h) ** 2) - 1.0) < 0.05


def test_rician_rayleigh_limit():
    cfg = ChannelConfig(num_tx=100, num_rx=100, rician_factor_db=-np.inf)
    draws = np.stack([generate_rician_channel(cfg, seed=s) for s in range(10)])
    assert abs(np.mean(np.abs(draws) ** 2) - 1.0) < 0.02
    assert abs(np.mean(draws)) < 0.01


def test_rician_deterministic_given_seed():
    cfg = ChannelConfig(2, 2)
    assert np.array_equal(generate_rician_channel(cfg, 7),
                          generate_rician_channel(cfg, 7))


def test_channel_config_validation():
    with pytest.raises(ConfigurationError):
        ChannelConfig(0, 2)
    with pytest.raises(ConfigurationError):
        ChannelConfig(2, 2, channel_var=0.0)


# ---------------------------------------------------------------------------
# phase-noise walks
# ---------------------------------------------------------------------------

def test_phn_zero_variance_is_identically_zero():
    phn = generate_phn(PhnConfig(0.0, 64), 2, 2, seed=1)
    assert not phn.rx_phase.any() and not phn.tx_phase.any()


def test_phn_terminal_variance_matches_walk_law():
    # var(theta(L)) = L * innovation_var; 1000 walks of length 10^4
    var, length = 5e-5, 10_000
    phn = generate_phn(PhnConfig(var, length), 500, 500, seed=2)
    finals = np.concatenate([phn.rx_phase[:, -1], phn.tx_phase[:, -1]])
    assert abs(np.var(finals) - length * var) < 0.1 * length * var


def test_phn_recursion_invariant_exact():
    phn = generate_phn(PhnConfig(1e-4, 257), 3, 2, seed=3)
    assert np.array_equal(np.diff(phn.rx_phase, axis=1, prepend=0.0),
                          phn.rx_innovations)
    assert np.array_equal(np.diff(phn.tx_phase, axis=1, prepend=0.0),
                          phn.tx_innovations)


def test_phn_innovation_statistics():
    # empirical innovation variance within 3 standard errors over >= 1e4 draws
    var = 2e-4
    phn = generate_phn(PhnConfig(var, 4000), 2, 2, seed=4)
    inn = np.concatenate([phn.rx_innovations.ravel(), phn.tx_innovations.ravel()])
    n = inn.size
    assert n >= 10_000
    se = var * np.sqrt(2.0 / n)  # stderr of a Gaussian variance estimate
    assert abs(np.var(inn) - var) < 3 * se


# ---------------------------------------------------------------------------
# reduced state
# ---------------------------------------------------------------------------

def test_reduce_zero_is_zero():
    phn = generate_phn(PhnConfig(0.0, 8), 2, 2, seed=0)
    assert not reduce_ambiguity(phn).phi.any()


def test_reduce_worked_example():
    rx = np.array([[0.1], [0.2]])
    tx = np.array([[0.3], [0.4]])
    phn = _phn_from_phases(rx, tx, 1e-4)
    red = reduce_ambiguity(phn)
    assert red.phi.shape == (3, 1)
    np.testing.assert_allclose(red.phi[:, 0], [0.5, 0.6, -0.1], atol=1e-15)
    assert red.reduced_innovation_var == pytest.approx(2e-4)


def test_reduce_kills_common_phase_shift():
    rng = np.random.default_rng(5)
    rx = rng.normal(size=(3, 16))
    tx = rng.normal(size=(2, 16))
    c = 0.777
    a = reduce_ambiguity(_phn_from_phases(rx, tx, 1e-4))
    b = reduce_ambiguity(_phn_from_phases(rx - c, tx + c, 1e-4))
    np.testing.assert_allclose(a.phi, b.phi, atol=1e-12)


# ---------------------------------------------------------------------------
# observation equation
# ---------------------------------------------------------------------------

def test_apply_channel_no_phn_no_noise():
    rng = np.random.default_rng(6)
    h = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    s = rng.standard_normal((2, 10)) + 1j * rng.standard_normal((2, 10))
    phn = generate_phn(PhnConfig(0.0, 10), 2, 2, seed=0)
    y = apply_channel(s, h, phn, 0.0, seed=1)
    np.testing.assert_allclose(y.observations, h @ s, atol=1e-14)


def test_apply_channel_pi_rotation_flips_sign():
    rx = np.array([[np.pi / 3]])
    tx = np.array([[np.pi - np.pi / 3]])
    phn = _phn_from_phases(rx, tx, 0.0)
    y = apply_channel(np.ones((1, 1)), np.ones((1, 1)), phn, 0.0, seed=0)
    np.testing.assert_allclose(y.observations, [[-1.0]], atol=1e-12)


def test_full_and_reduced_factorizations_agree():
    rng = np.random.default_rng(7)
    h = rng.standard_normal((3, 2)) + 1j * rng.standard_normal((3, 2))
    phn = generate_phn(PhnConfig(1e-3, 32), 2, 3, seed=8)
    x_full = effective_channels(h, phn)
    x_red = effective_channels_reduced(h, reduce_ambiguity(phn).phi)
    np.testing.assert_allclose(x_full, x_red, atol=1e-12)


def test_phase_ambiguity_invariance_bit_exact():
    # dyadic phases and shift keep the phase sums exact, so the noiseless
    # observations must be bit-identical
    rng = np.random.default_rng(9)
    quant = 2.0 ** 20
    rx = np.round(rng.normal(size=(2, 12)) * quant) / quant
    tx = np.round(rng.normal(size=(2, 12)) * quant) / quant
    c = 0.25
    h = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    s = rng.standard_normal((2, 12)) + 1j * rng.standard_normal((2, 12))
    y1 = apply_channel(s, h, _phn_from_phases(rx, tx, 0.0), 0.0, seed=0)
    y2 = apply_channel(s, h, _phn_from_phases(rx - c, tx + c, 0.0), 0.0, seed=0)
    assert np.array_equal(y1.observations, y2.observations)


def test_energy_conservation_under_receive_rotation():
    rng = np.random.default_rng(10)
    h = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    phn = generate_phn(PhnConfig(1e-3, 20), 2, 2, seed=11)
    s = rng.standard_normal((2, 20)) + 1j * rng.standard_normal((2, 20))
    x = effective_channels(h, phn)
    xs = np.einsum("krt,tk->rk", x, s)
    gt = np.exp(1j * phn.tx_phase)
    hs = h @ (gt * s)
    np.testing.assert_allclose(np.linalg.norm(xs, axis=0),
                               np.linalg.norm(hs, axis=0), rtol=1e-12)


def test_apply_channel_noise_variance():
    s = np.zeros((2, 20000), dtype=complex)
    h = np.eye(2).astype(complex)
    y = apply_channel(s, h, None, 0.02, seed=12)
    measured = np.mean(np.abs(y.observations) ** 2)
    assert abs(measured - 0.02) < 0.001
    assert y.noise_var_scalar() == pytest.approx(0.02)


def test_apply_channel_dimension_mismatch():
    with pytest.raises(ModelError):
        apply_channel(np.ones((3, 4)), np.ones((2, 2)), None, 0.1, seed=0)
    phn = generate_phn(PhnConfig(1e-4, 5), 2, 2, seed=0)
    with pytest.raises(ModelError):
        apply_channel(np.ones((2, 4)), np.ones((2, 2)), phn, 0.1, seed=0)


def test_per_antenna_noise_round_trip():
    y = apply_channel(np.zeros((2, 8)), np.eye(2).astype(complex), None,
                      [0.1, 0.2], seed=0)
    with pytest.raises(ModelError):
        y.noise_var_scalar()
