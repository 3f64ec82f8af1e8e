"""Soft MIMO detection on the real-valued equivalent channel.

The codeword is real-linear in ``u = (Re s1, Im s1, ...)``, so the received
block satisfies ``realvec(Y) = Heq @ u + realvec(W)`` for any scheme. Both
detectors work on that model, batched over codewords, and return extrinsic
bit LLRs (positive favours 0).
"""

from __future__ import annotations

import itertools
from functools import lru_cache

import numpy as np

from . import modem
from .modem import LLR_CLAMP
from .stbc import DispersionSet, symbols_to_real

REG_EPS = 1e-12
MAX_CANDIDATES = 1 << 20


def realvec(y) -> np.ndarray:
    """Flatten the trailing (m_r, n_time) block and interleave Re/Im."""
    y = np.asarray(y)
    flat = y.reshape(y.shape[:-2] + (-1,))
    out = np.empty(flat.shape[:-1] + (2 * flat.shape[-1],))
    out[..., 0::2] = flat.real
    out[..., 1::2] = flat.imag
    return out


def build_equivalent(h, disp: DispersionSet) -> np.ndarray:
    """Real equivalent channel(s).

    ``h`` has shape (..., n_time, m_r, n_tx) (or (m_r, n_tx) for a single
    quasi-static matrix); the result has shape (..., 2 m_r n_time, 2Q) with
    column k equal to ``realvec(H G_k)``.
    """
    g = disp.generators
    h = np.asarray(h)
    if h.ndim == 2:
        h = np.broadcast_to(h, (g.shape[2],) + h.shape)
    if h.shape[-1] != g.shape[1] or h.shape[-3] != g.shape[2]:
        raise ValueError(f"channel {h.shape} does not match generators {g.shape}")
    hg = np.einsum("...trk,qkt->...qrt", h, g)
    return np.swapaxes(realvec(hg), -1, -2)


def _as_batch(heq, y, llrs):
    heq = np.asarray(heq, dtype=float)
    y = np.asarray(y, dtype=float)
    single = heq.ndim == 2
    if single:
        heq, y = heq[None], y[None]
        if llrs is not None:
            llrs = np.asarray(llrs, dtype=float)[None]
    return heq, y, llrs, single


def mmse_ic_detect(heq, y, n0: float, prior_llrs, order: int) -> np.ndarray:
    """Soft-interference-cancelling MMSE detection, one real dimension at a time.

    For dimension k the soft means of all other dimensions are subtracted and
    an MMSE filter is built from their residual variances, with dimension k
    itself treated as unknown (variance 1/2, no prior). The unbiased filter
    output ``est_k = u_k + N(0, var_k)`` is demapped under a Gaussian
    approximation. A single matrix solve per codeword serves all k via the
    Sherman-Morrison identity:

        c_k = h_k^T S^-1 h_k,  est_k = h_k^T S^-1 r / c_k + mean_k,
        var_k = 1 / c_k - lambda_k,

    with ``S = Heq diag(lambda) Heq^T + N0/2 I`` and ``r = y - Heq mean``.

    Args:
        heq: (N, D, 2Q) or (D, 2Q) equivalent channel.
        y: (N, D) or (D,) real received vector.
        n0: complex noise variance.
        prior_llrs: (N, Q log2 M) a-priori bit LLRs, or None for uniform.
        order: QAM order.

    Returns:
        Extrinsic bit LLRs with the shape of ``prior_llrs``.
    """
    heq, y, prior_llrs, single = _as_batch(heq, y, prior_llrs)
    n, d, k2 = heq.shape
    bits = k2 // 2 * modem.qam(order).bits_per_symbol
    if prior_llrs is None:
        mean = np.zeros((n, k2))
        lam = np.full((n, k2), 0.5)
    else:
        prior_llrs = prior_llrs.reshape(n, bits)
        mean, lam = modem.axis_stats(prior_llrs, order)
    cov = (heq * lam[:, None, :]) @ np.swapaxes(heq, 1, 2)
    cov[:, np.arange(d), np.arange(d)] += max(n0 / 2.0, 0.0) + REG_EPS
    a = np.linalg.solve(cov, heq)  # S^-1 h_k for every k
    c = np.maximum(np.einsum("ndk,ndk->nk", heq, a), 1e-300)
    r = y - (heq @ mean[..., None])[..., 0]
    est = (r[:, None, :] @ a)[:, 0, :] / c + mean
    var = np.maximum(1.0 / c - lam, REG_EPS)
    out = modem.axis_llrs(est, var, order)
    return out[0] if single else out


@lru_cache(maxsize=8)
def _candidates(order: int, n_syms: int):
    const = modem.qam(order)
    m = const.bits_per_symbol
    idx = np.array(list(itertools.product(range(order), repeat=n_syms)), dtype=np.int64)
    u = symbols_to_real(const.points[idx])
    bits = const.labels[idx].reshape(len(idx), n_syms * m)
    return u, bits


def exhaustive_maxlog_detect(heq, y, n0: float, prior_llrs, order: int) -> np.ndarray:
    """Exact max-log-MAP extrinsic LLRs by enumerating every symbol vector."""
    heq, y, prior_llrs, single = _as_batch(heq, y, prior_llrs)
    n, d, k2 = heq.shape
    q = k2 // 2
    if order ** q > MAX_CANDIDATES:
        raise ValueError(
            f"{order}^{q} candidates exceed the exhaustive search limit; use MMSE-IC"
        )
    u, bits = _candidates(order, q)
    nb = bits.shape[1]
    if prior_llrs is None:
        prior_llrs = np.zeros((n, nb))
    prior_llrs = np.clip(prior_llrs.reshape(n, nb), -LLR_CLAMP, LLR_CLAMP)
    bipolar = 1.0 - 2.0 * bits  # +1 for bit 0
    zero = bits == 0
    scale = 1.0 / max(n0, REG_EPS)
    out = np.empty((n, nb))
    for i in range(n):
        resid = y[i][:, None] - heq[i] @ u.T  # (D, C)
        metric = -scale * np.einsum("dc,dc->c", resid, resid) + 0.5 * bipolar @ prior_llrs[i]
        for b in range(nb):
            out[i, b] = metric[zero[:, b]].max() - metric[~zero[:, b]].max()
    out = np.clip(out - prior_llrs, -LLR_CLAMP, LLR_CLAMP)
    return out[0] if single else out
