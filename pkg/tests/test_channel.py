import numpy as np
import pytest

from stsbc import channel, stbc
from stsbc.harness import spectral_efficiency
from stsbc.stbc import SchemeId


def test_noise_examples():
    assert channel.noise_from_ebn0(0, 4).n0 == pytest.approx(0.25)
    assert channel.noise_from_ebn0(10, 1).n0 == pytest.approx(0.1)
    with pytest.raises(ValueError):
        channel.noise_from_ebn0(3, 0)


@pytest.mark.parametrize("scheme,order,rate,eta", [
    ("alamouti", 64, "2/3", 4), ("sm", 16, "1/2", 4), ("golden", 16, "1/2", 4),
    ("3d", 16, "1/2", 4), ("alamouti", 256, "3/4", 6), ("golden", 64, "1/2", 6),
    ("3d", 64, "1/2", 6),
])
def test_caption_spectral_efficiency(scheme, order, rate, eta):
    assert spectral_efficiency(scheme, order, rate) == eta


def test_equal_power_variance():
    rng = np.random.default_rng(0)
    h = channel.draw_channel(rng, 2, "golden", 0.0, 50_000).h[:, 0]
    var = np.mean(np.abs(h) ** 2, axis=(0, 1))
    np.testing.assert_allclose(var, 1.0, rtol=0.02)


def test_imbalanced_site_variance():
    rng = np.random.default_rng(1)
    h = channel.draw_channel(rng, 2, "3d", -12.0, 50_000).h[:, 0]
    var = np.mean(np.abs(h) ** 2, axis=(0, 1))
    np.testing.assert_allclose(var[:2], 1.0, rtol=0.02)
    np.testing.assert_allclose(var[2:], 10 ** -1.2, rtol=0.02)


def test_deep_imbalance_silences_site_two():
    rng = np.random.default_rng(2)
    h = channel.draw_channel(rng, 2, "alamouti", -100.0, 1000).h
    assert np.max(np.abs(h[..., 1])) < 1e-4
    assert np.mean(np.abs(h[..., 0]) ** 2) == pytest.approx(1.0, rel=0.1)


def test_quasi_static_and_per_slot():
    rng = np.random.default_rng(3)
    h = channel.draw_channel(rng, 2, "3d", 0.0, 10).h
    assert h.shape == (10, 4, 2, 4)
    assert np.all(h == h[:, :1])
    h = channel.draw_channel(rng, 2, "3d", 0.0, 10, per_slot=True).h
    assert not np.allclose(h[:, 0], h[:, 1])


def test_noiseless_identity_channel():
    x = stbc.encode_golden([1, 2j, -1, 0.5]).entries
    y = channel.apply(np.eye(2), x, channel.NoiseSpec(0.0))
    np.testing.assert_allclose(y, x)
    h = np.zeros((2, 4))
    h[0, 0] = h[1, 1] = 1
    x3 = stbc.encode_3d(np.arange(8) + 1j).entries
    np.testing.assert_allclose(channel.apply(h, x3, channel.NoiseSpec(0.0)), x3[:2])


def test_pure_noise_variance():
    rng = np.random.default_rng(4)
    n0 = 0.37
    y = channel.apply(np.ones((2, 2)), np.zeros((50_000, 2, 1)), channel.NoiseSpec(n0), rng)
    assert np.mean(np.abs(y) ** 2) == pytest.approx(n0, rel=0.02)


def test_received_energy_balance():
    rng = np.random.default_rng(5)
    n = 50_000
    scheme = SchemeId.GOLDEN
    s = (rng.choice([-1, 1], (n, 4)) + 1j * rng.choice([-1, 1], (n, 4))) / np.sqrt(2)
    x = stbc.encode_batch(scheme, s)
    chan = channel.draw_channel(rng, 2, scheme, -6.0, n)
    n0 = 0.2
    y = channel.apply(chan, x, channel.NoiseSpec(n0), rng)
    clean = channel.propagate(chan.h, x)
    expected = np.mean(np.sum(np.abs(clean) ** 2, axis=(1, 2))) + 2 * 2 * n0
    assert np.mean(np.sum(np.abs(y) ** 2, axis=(1, 2))) == pytest.approx(expected, rel=0.02)


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        channel.apply(np.ones((2, 3)), np.ones((2, 2)), channel.NoiseSpec(0.0))


def test_noise_requires_rng():
    with pytest.raises(ValueError):
        channel.apply(np.eye(2), np.ones((2, 1)), channel.NoiseSpec(0.1))


def simulate_bpsk_rayleigh(ebn0_db, rng, min_errors=10_000):
    """Uncoded BPSK over 1x1 flat Rayleigh with the simulator's noise calibration."""
    noise = channel.noise_from_ebn0(ebn0_db, 1.0)
    errors = bits = 0
    while errors < min_errors:
        n = 200_000
        b = rng.integers(0, 2, n)
        x = (1.0 - 2.0 * b).reshape(n, 1, 1)
        chan = channel.draw_channel(rng, 1, 1, 0.0, n)
        y = channel.apply(chan, x, noise, rng)
        z = np.real(np.conj(chan.h[:, 0, 0, 0]) * y[:, 0, 0])
        errors += np.count_nonzero((z < 0) != b)
        bits += n
    return errors / bits, errors


@pytest.mark.parametrize("ebn0_db", [0.0, 10.0])
def test_bpsk_rayleigh_closed_form(ebn0_db):
    ber, errors = simulate_bpsk_rayleigh(ebn0_db, np.random.default_rng(9), min_errors=100_000)
    assert errors >= 10_000
    assert ber == pytest.approx(channel.rayleigh_bpsk_ber(ebn0_db), rel=0.02)
