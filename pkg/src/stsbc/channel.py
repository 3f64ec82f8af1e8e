"""Flat Rayleigh SFN channel with a site power imbalance and AWGN."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .stbc import SchemeId


@dataclass(frozen=True)
class NoiseSpec:
    n0: float  # noise power per complex receive sample


@dataclass(frozen=True)
class ChannelRealization:
    """Gains of shape (n_cw, n_time, m_r, n_tx), one matrix per time slot.

    Quasi-static draws repeat the same matrix across a codeword's slots.
    """

    h: np.ndarray
    beta_db: float

    @property
    def n_codewords(self) -> int:
        return self.h.shape[0]


def noise_from_ebn0(ebn0_db: float, eta: float) -> NoiseSpec:
    """Total transmit energy is 1 per channel use and carries ``eta`` bits."""
    if eta <= 0:
        raise ValueError(f"spectral efficiency must be positive, got {eta}")
    return NoiseSpec(1.0 / (eta * 10.0 ** (ebn0_db / 10.0)))


def crandn(rng: np.random.Generator, shape, var: float = 1.0) -> np.ndarray:
    """Circularly-symmetric complex Gaussian samples with variance ``var``."""
    return np.sqrt(var / 2.0) * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def site_gains(n_tx: int, beta_db: float) -> np.ndarray:
    """Amplitude scale per transmit antenna; the second half belongs to site 2."""
    g = np.ones(n_tx)
    g[n_tx // 2:] = np.sqrt(10.0 ** (beta_db / 10.0))
    return g


def draw_channel(
    rng: np.random.Generator,
    m_r: int,
    scheme: "SchemeId | str | int",
    beta_db: float = 0.0,
    n_codewords: int = 1,
    per_slot: bool = False,
) -> ChannelRealization:
    """Draw i.i.d. CN(0,1) gains, site-2 columns scaled to variance 10^(beta/10).

    ``scheme`` may also be a bare transmit antenna count (with a single
    antenna there is no site 2 and ``beta_db`` is ignored).
    """
    if isinstance(scheme, (int, np.integer)):
        n_tx, n_time = int(scheme), 1
    else:
        scheme = SchemeId.parse(scheme)
        n_tx, n_time = scheme.n_tx, scheme.n_time
    gains = site_gains(n_tx, beta_db) if n_tx > 1 else np.ones(1)
    slots = n_time if per_slot else 1
    h = crandn(rng, (n_codewords, slots, m_r, n_tx)) * gains
    if not per_slot:
        h = np.broadcast_to(h, (n_codewords, n_time, m_r, n_tx))
    return ChannelRealization(h, beta_db)


def propagate(h, x) -> np.ndarray:
    """Noise-free ``H X`` slot by slot: h (..., n_time, m_r, n_tx), x (..., n_tx, n_time)."""
    h = np.asarray(h)
    x = np.asarray(x)
    if h.shape[-1] != x.shape[-2] or h.shape[-3] != x.shape[-1]:
        raise ValueError(f"channel {h.shape} does not match codeword {x.shape}")
    return np.einsum("...trk,...kt->...rt", h, x)


def apply(
    chan: "ChannelRealization | np.ndarray",
    x,
    noise: NoiseSpec,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Received block(s) ``Y = H X + W`` with W ~ CN(0, N0)."""
    h = chan.h if isinstance(chan, ChannelRealization) else np.asarray(chan)
    x = np.asarray(x)
    if h.ndim == 2:
        n_time = x.shape[-1]
        h = np.broadcast_to(h, (n_time,) + h.shape)
    y = propagate(h, x)
    if noise.n0 > 0:
        if rng is None:
            raise ValueError("an RNG is required when N0 > 0")
        y = y + crandn(rng, y.shape, noise.n0)
    return y


def rayleigh_bpsk_ber(ebn0_db) -> np.ndarray:
    """Closed-form BER of coherent BPSK over flat Rayleigh fading."""
    g = 10.0 ** (np.asarray(ebn0_db, dtype=float) / 10.0)
    return 0.5 * (1.0 - np.sqrt(g / (1.0 + g)))
