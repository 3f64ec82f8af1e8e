"""Gray-mapped square QAM and the bit-LLR <-> symbol-prior conversions.

Each axis carries half the label bits (most significant half on I) with a
binary-reflected Gray code. Bit value 0 maps to the positive half of an axis,
consistent with the LLR convention ``LLR > 0 => bit 0``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import expit, logsumexp

LLR_CLAMP = 50.0
ORDERS = (4, 16, 64, 256)


def _gray_inverse(g: int) -> int:
    i = 0
    while g:
        i ^= g
        g >>= 1
    return i


@dataclass(frozen=True)
class Constellation:
    order: int
    points: np.ndarray  # (M,), index = integer label (MSB first)
    labels: np.ndarray  # (M, log2 M) bits
    axis_levels: np.ndarray  # (sqrt M,), index = axis label
    axis_labels: np.ndarray  # (sqrt M, log2 M / 2)

    @property
    def bits_per_symbol(self) -> int:
        return self.labels.shape[1]

    @property
    def bits_per_axis(self) -> int:
        return self.axis_labels.shape[1]


@lru_cache(maxsize=None)
def qam(order: int) -> Constellation:
    if order not in ORDERS:
        raise ValueError(f"QAM order must be one of {ORDERS}, got {order}")
    m = int(np.log2(order))
    half = m // 2
    side = 1 << half
    norm = np.sqrt(2.0 * (order - 1) / 3.0)
    axis_levels = np.array(
        [(side - 1 - 2 * _gray_inverse(g)) / norm for g in range(side)]
    )
    axis_labels = ((np.arange(side)[:, None] >> np.arange(half - 1, -1, -1)) & 1).astype(np.int8)
    labels = ((np.arange(order)[:, None] >> np.arange(m - 1, -1, -1)) & 1).astype(np.int8)
    points = axis_levels[np.arange(order) >> half] + 1j * axis_levels[np.arange(order) & (side - 1)]
    for arr in (points, labels, axis_levels, axis_labels):
        arr.setflags(write=False)
    return Constellation(order, points, labels, axis_levels, axis_labels)


def map_bits(bits, order: int) -> np.ndarray:
    const = qam(order)
    b = np.asarray(bits, dtype=np.int64).ravel()
    m = const.bits_per_symbol
    if b.size % m:
        raise ValueError(f"bit count {b.size} is not a multiple of {m}")
    idx = b.reshape(-1, m) @ (1 << np.arange(m - 1, -1, -1))
    return const.points[idx]


def demap_hard(symbols, order: int) -> np.ndarray:
    """Nearest-point hard decision, returned as a flat bit vector."""
    const = qam(order)
    s = np.asarray(symbols).ravel()
    idx = np.argmin(np.abs(s[:, None] - const.points[None, :]), axis=1)
    return const.labels[idx].ravel()


def priors_from_llrs(llrs, order: int) -> np.ndarray:
    """Per-symbol prior probabilities over the M points.

    ``P(point) = prod_b sigmoid(+-llr_b)``, + for label bit 0.
    Returns an array of shape (n_symbols, M).
    """
    const = qam(order)
    m = const.bits_per_symbol
    lam = np.clip(np.asarray(llrs, dtype=float).reshape(-1, m), -LLR_CLAMP, LLR_CLAMP)
    sign = 1.0 - 2.0 * const.labels  # +1 for bit 0
    # log sigmoid(sign * llr) summed over bits, then normalized
    logp = -np.logaddexp(0.0, -(lam[:, None, :] * sign[None, :, :])).sum(axis=-1)
    logp -= logsumexp(logp, axis=1, keepdims=True)
    return np.exp(logp)


def soft_symbol_stats(prior) -> tuple[np.ndarray, np.ndarray]:
    """Mean and variance of the symbol under ``prior`` (shape (..., M))."""
    p = np.asarray(prior, dtype=float)
    points = qam(p.shape[-1]).points
    mean = p @ points
    var = p @ (np.abs(points) ** 2) - np.abs(mean) ** 2
    return mean, np.maximum(var, 0.0)


def axis_stats(llrs, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-axis (real dimension) soft mean and variance from bit LLRs.

    ``llrs`` has shape (..., Q * log2 M); the result has shape (..., 2Q) in
    (Re s1, Im s1, Re s2, ...) order. Exploits the I/Q independence of the
    labeling: I levels depend only on the first half of a symbol's bits.
    """
    const = qam(order)
    h = const.bits_per_axis
    lam = np.clip(np.asarray(llrs, dtype=float), -LLR_CLAMP, LLR_CLAMP)
    lam = lam.reshape(lam.shape[:-1] + (-1, h))  # (..., 2Q, h)
    # P(bit = 0) for each axis bit
    p0 = expit(lam)
    lab = const.axis_labels.astype(float)  # (side, h)
    # probability of each axis level: prod over bits
    probs = np.prod(
        np.where(lab[None, :, :] == 0, p0[..., None, :], 1.0 - p0[..., None, :]), axis=-1
    )  # (..., 2Q, side)
    mean = probs @ const.axis_levels
    var = probs @ const.axis_levels ** 2 - mean ** 2
    return mean, np.maximum(var, 0.0)


def axis_llrs(estimate, noise_var, order: int) -> np.ndarray:
    """Bit LLRs of a PAM axis observed as ``estimate = level + N(0, noise_var)``.

    ``estimate`` and ``noise_var`` share shape (..., 2Q); the result has shape
    (..., 2Q * log2 M / 2), i.e. bits in label order per symbol. Exact
    log-sum-exp over the axis levels, uniform level prior.
    """
    const = qam(order)
    x = np.asarray(estimate, dtype=float)[..., None]
    v = np.asarray(noise_var, dtype=float)[..., None]
    metric = -((x - const.axis_levels) ** 2) / (2.0 * v)  # (..., 2Q, side)
    metric -= metric.max(axis=-1, keepdims=True)
    w = np.exp(metric)
    out = []
    for b in range(const.bits_per_axis):
        zero = const.axis_labels[:, b] == 0
        with np.errstate(divide="ignore"):
            out.append(np.log(w[..., zero].sum(axis=-1)) - np.log(w[..., ~zero].sum(axis=-1)))
    llr = np.stack(out, axis=-1)  # (..., 2Q, h)
    llr = np.clip(llr, -LLR_CLAMP, LLR_CLAMP)
    return llr.reshape(llr.shape[:-2] + (-1,))
