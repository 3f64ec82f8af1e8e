"""DVB-T inner FEC: (171,133) convolutional code, puncturing, interleaving
and soft-in/soft-out trellis decoding.

LLRs are signed so that a positive value favours bit 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numba
import numpy as np

from .modem import LLR_CLAMP

CONSTRAINT_LENGTH = 7
MEMORY = CONSTRAINT_LENGTH - 1
N_STATES = 1 << MEMORY
GENERATORS_OCTAL = (0o171, 0o133)


def _taps(octal: int) -> np.ndarray:
    return np.array([(octal >> (MEMORY - i)) & 1 for i in range(CONSTRAINT_LENGTH)], dtype=np.int8)


TAPS = np.stack([_taps(g) for g in GENERATORS_OCTAL])  # (2, 7), tap 0 = current input


def _build_trellis():
    # state = (u[k-1] ... u[k-6]) with u[k-1] as the MSB
    next_state = np.empty((N_STATES, 2), dtype=np.int64)
    outputs = np.empty((N_STATES, 2, 2), dtype=np.int64)
    for s in range(N_STATES):
        past = [(s >> (MEMORY - 1 - i)) & 1 for i in range(MEMORY)]
        for u in (0, 1):
            reg = [u] + past
            for j in range(2):
                outputs[s, u, j] = int(np.dot(TAPS[j], reg)) & 1
            next_state[s, u] = (u << (MEMORY - 1)) | (s >> 1)
    return next_state, outputs


NEXT_STATE, OUTPUTS = _build_trellis()


@dataclass(frozen=True)
class PuncturePattern:
    rate: Fraction
    keep_x: tuple[int, ...]
    keep_y: tuple[int, ...]

    @property
    def period(self) -> int:
        return len(self.keep_x)

    def mask(self, coded_len: int) -> np.ndarray:
        """Boolean keep-mask over an interleaved (x1, y1, x2, y2, ...) stream."""
        if coded_len % 2:
            raise ValueError(f"coded length {coded_len} is odd")
        steps = coded_len // 2
        reps = -(-steps // self.period)
        per_step = np.stack([np.tile(self.keep_x, reps), np.tile(self.keep_y, reps)], axis=1)
        return per_step[:steps].ravel().astype(bool)


PUNCTURE_PATTERNS = {
    Fraction(1, 2): PuncturePattern(Fraction(1, 2), (1,), (1,)),
    Fraction(2, 3): PuncturePattern(Fraction(2, 3), (1, 0), (1, 1)),
    Fraction(3, 4): PuncturePattern(Fraction(3, 4), (1, 0, 1), (1, 1, 0)),
}


def puncture_pattern(rate) -> PuncturePattern:
    r = Fraction(rate)
    if r not in PUNCTURE_PATTERNS:
        raise ValueError(f"unsupported code rate {rate}; choose from 1/2, 2/3, 3/4")
    return PUNCTURE_PATTERNS[r]


def conv_encode(info) -> np.ndarray:
    """Rate-1/2 encoding with 6 zero tail bits.

    Output is interleaved (x1, y1, x2, y2, ...) with length 2 * (len + 6).
    """
    u = np.asarray(info, dtype=np.int64).ravel()
    if u.size == 0:
        raise ValueError("cannot encode an empty frame")
    padded = np.concatenate([u, np.zeros(MEMORY, dtype=np.int64)])
    n = padded.size
    out = np.empty(2 * n, dtype=np.int8)
    for j in range(2):
        out[j::2] = np.convolve(padded, TAPS[j])[:n] & 1
    return out


def final_state(info) -> int:
    """Trellis state after encoding ``info`` plus its tail."""
    s = 0
    for u in np.concatenate([np.asarray(info, dtype=np.int64).ravel(), np.zeros(MEMORY, np.int64)]):
        s = NEXT_STATE[s, u]
    return int(s)


def puncture(coded, rate) -> np.ndarray:
    c = np.asarray(coded)
    return c[puncture_pattern(rate).mask(c.size)]


def depuncture(llrs, rate, coded_len: int) -> np.ndarray:
    """Reinsert zero-LLR erasures at punctured positions."""
    mask = puncture_pattern(rate).mask(coded_len)
    lam = np.asarray(llrs, dtype=float)
    if lam.size != int(mask.sum()):
        raise ValueError(
            f"expected {int(mask.sum())} LLRs for coded length {coded_len} at rate {rate}, got {lam.size}"
        )
    out = np.zeros(coded_len)
    out[mask] = lam
    return out


def punctured_length(info_len: int, rate) -> int:
    return int(puncture_pattern(rate).mask(2 * (info_len + MEMORY)).sum())


class Interleaver:
    """Seeded pseudo-random bit permutation: ``y[i] = x[perm[i]]``."""

    def __init__(self, length: int, seed: int = 0):
        self.length = length
        self.seed = seed
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, length])))
        self.perm = rng.permutation(length)
        self.inverse = np.empty_like(self.perm)
        self.inverse[self.perm] = np.arange(length)

    def interleave(self, x) -> np.ndarray:
        x = np.asarray(x)
        if x.shape[-1] != self.length:
            raise ValueError(f"interleaver length {self.length}, got {x.shape[-1]}")
        return x[..., self.perm]

    def deinterleave(self, y) -> np.ndarray:
        y = np.asarray(y)
        if y.shape[-1] != self.length:
            raise ValueError(f"interleaver length {self.length}, got {y.shape[-1]}")
        return y[..., self.inverse]


# -- trellis decoding ---------------------------------------------------------

_NEG = -1e300


@numba.njit(cache=True, inline="always")
def _max(a, b):
    return a if a > b else b


@numba.njit(cache=True, inline="always")
def _jacobian_log(a, b):
    if a < b:
        a, b = b, a
    if b <= _NEG:
        return a
    return a + np.log1p(np.exp(b - a))


def _make_bcjr_kernel(_maxstar):
    @numba.njit(cache=True)
    def kernel(lc, la, next_state, outputs):
        return _bcjr_body(lc, la, next_state, outputs, _maxstar)

    return kernel


@numba.njit(cache=True, inline="always")
def _bcjr_body(lc, la, next_state, outputs, _maxstar):
    n = la.shape[0]
    ns = next_state.shape[0]
    # label index per branch: 4 * u + 2 * x + y
    label = np.empty((ns, 2), dtype=np.int64)
    for s in range(ns):
        for u in range(2):
            label[s, u] = 4 * u + 2 * outputs[s, u, 0] + outputs[s, u, 1]
    # branch metric: half-correlation of the bipolar labels with the LLRs
    gamma = np.empty((n, 8))
    for k in range(n):
        for j in range(8):
            u, x, y = j >> 2, (j >> 1) & 1, j & 1
            gamma[k, j] = 0.5 * ((1 - 2 * u) * la[k] + (1 - 2 * x) * lc[2 * k]
                                 + (1 - 2 * y) * lc[2 * k + 1])
    alpha = np.full((n + 1, ns), _NEG)
    alpha[0, 0] = 0.0
    for k in range(n):
        cur = alpha[k]
        nxt = alpha[k + 1]
        for s in range(ns):
            a = cur[s]
            for u in range(2):
                t = next_state[s, u]
                nxt[t] = _maxstar(nxt[t], a + gamma[k, label[s, u]])
        top = nxt.max()
        for s in range(ns):
            nxt[s] = max(nxt[s] - top, _NEG)
    beta = np.full((n + 1, ns), _NEG)
    beta[n, 0] = 0.0
    post_info = np.empty(n)
    post_coded = np.empty(2 * n)
    m = np.empty(6)
    for k in range(n - 1, -1, -1):
        bk = beta[k]
        bn = beta[k + 1]
        for j in range(6):
            m[j] = _NEG
        for s in range(ns):
            a = alpha[k, s]
            acc = _NEG
            for u in range(2):
                lab = label[s, u]
                g = gamma[k, lab] + bn[next_state[s, u]]
                acc = _maxstar(acc, g)
                full = a + g
                m[u] = _maxstar(m[u], full)
                xi = 2 + ((lab >> 1) & 1)
                m[xi] = _maxstar(m[xi], full)
                yi = 4 + (lab & 1)
                m[yi] = _maxstar(m[yi], full)
            bk[s] = acc
        top = bk.max()
        for s in range(ns):
            bk[s] = max(bk[s] - top, _NEG)
        post_info[k] = m[0] - m[1]
        post_coded[2 * k] = m[2] - m[3]
        post_coded[2 * k + 1] = m[4] - m[5]
    return post_info, post_coded


_bcjr_maxlog = _make_bcjr_kernel(_max)
_bcjr_logmap = _make_bcjr_kernel(_jacobian_log)


def bcjr_decode(apriori_coded, apriori_info=None, exact: bool = False):
    """Soft-in/soft-out decoding over the terminated trellis.

    Args:
        apriori_coded: LLRs of the 2 * n mother-code bits (tail included).
        apriori_info: LLRs of the n trellis inputs (tail included), or None.
        exact: use log-sum-exp instead of max (true log-MAP).

    Returns:
        (extrinsic_coded, posterior_info), of lengths 2n and n.
    """
    lc = np.clip(np.asarray(apriori_coded, dtype=float), -LLR_CLAMP, LLR_CLAMP)
    if lc.size % 2:
        raise ValueError("coded LLR count must be even")
    n = lc.size // 2
    if apriori_info is None:
        la = np.zeros(n)
    else:
        la = np.clip(np.asarray(apriori_info, dtype=float), -LLR_CLAMP, LLR_CLAMP)
        if la.size != n:
            raise ValueError(f"expected {n} info LLRs, got {la.size}")
    kernel = _bcjr_logmap if exact else _bcjr_maxlog
    post_info, post_coded = kernel(lc, la, NEXT_STATE, OUTPUTS)
    extrinsic = np.clip(post_coded - lc, -LLR_CLAMP, LLR_CLAMP)
    return extrinsic, post_info


@numba.njit(cache=True)
def _viterbi_kernel(lc, next_state, outputs):
    n = lc.shape[0] // 2
    ns = next_state.shape[0]
    metric = np.full(ns, _NEG)
    metric[0] = 0.0
    prev = np.empty((n, ns), dtype=np.int64)
    bit = np.empty((n, ns), dtype=np.int8)
    for k in range(n):
        new = np.full(ns, _NEG)
        for s in range(ns):
            if metric[s] <= _NEG:
                continue
            for u in range(2):
                t = next_state[s, u]
                m = metric[s] + 0.5 * lc[2 * k] * (1 - 2 * outputs[s, u, 0]) \
                    + 0.5 * lc[2 * k + 1] * (1 - 2 * outputs[s, u, 1])
                if m > new[t]:
                    new[t] = m
                    prev[k, t] = s
                    bit[k, t] = u
        metric = new
    out = np.empty(n, dtype=np.int8)
    s = 0
    for k in range(n - 1, -1, -1):
        out[k] = bit[k, s]
        s = prev[k, s]
    return out


def viterbi_decode(llrs) -> np.ndarray:
    """Maximum-likelihood path for zero-terminated frames; returns all n
    trellis inputs (tail included)."""
    lc = np.asarray(llrs, dtype=float)
    if lc.size % 2:
        raise ValueError("coded LLR count must be even")
    return _viterbi_kernel(lc, NEXT_STATE, OUTPUTS)
