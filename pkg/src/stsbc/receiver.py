"""Frame-level transmit chain and the iterative (turbo) receiver.

Transmit: info bits -> (171,133) encoder + tail -> puncturing -> interleaver
-> filler bits up to a whole number of codewords -> Gray QAM -> STBC.
The receiver walks the same chain backwards, passing only extrinsic LLRs
between the MIMO detector and the trellis decoder.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import detector, fec, modem, stbc
from .channel import ChannelRealization, NoiseSpec

DETECTORS = ("mmse_ic", "exhaustive")


@dataclass(frozen=True)
class ReceiverConfig:
    scheme: stbc.SchemeId
    order: int
    rate: Fraction
    iterations: int = 5
    detector: str = "mmse_ic"
    early_exit: bool = False

    def __post_init__(self):
        object.__setattr__(self, "scheme", stbc.SchemeId.parse(self.scheme))
        object.__setattr__(self, "rate", Fraction(self.rate))
        object.__setattr__(self, "detector", self.detector.replace("-", "_"))
        if self.iterations < 1:
            raise ValueError(f"iterations must be >= 1, got {self.iterations}")
        if self.detector not in DETECTORS:
            raise ValueError(f"detector must be one of {DETECTORS}, got {self.detector!r}")
        modem.qam(self.order)
        fec.puncture_pattern(self.rate)


@dataclass(frozen=True)
class FrameLayout:
    info_len: int
    scheme: stbc.SchemeId
    order: int
    rate: Fraction

    @property
    def mother_len(self) -> int:
        return 2 * (self.info_len + fec.MEMORY)

    @property
    def coded_len(self) -> int:
        return fec.punctured_length(self.info_len, self.rate)

    @property
    def bits_per_codeword(self) -> int:
        return self.scheme.n_syms * modem.qam(self.order).bits_per_symbol

    @property
    def n_codewords(self) -> int:
        return -(-self.coded_len // self.bits_per_codeword)

    @property
    def pad_len(self) -> int:
        return self.n_codewords * self.bits_per_codeword - self.coded_len

    @classmethod
    def for_config(cls, info_len: int, config: ReceiverConfig) -> "FrameLayout":
        return cls(info_len, config.scheme, config.order, config.rate)


@dataclass
class TxFrame:
    info: np.ndarray
    coded: np.ndarray  # punctured, before interleaving
    symbols: np.ndarray  # (n_cw, Q)
    codewords: np.ndarray  # (n_cw, n_tx, n_time)


def transmit_frame(info, layout: FrameLayout, interleaver: fec.Interleaver,
                   rng: np.random.Generator) -> TxFrame:
    info = np.asarray(info, dtype=np.int8)
    if info.size != layout.info_len:
        raise ValueError(f"expected {layout.info_len} info bits, got {info.size}")
    coded = fec.puncture(fec.conv_encode(info), layout.rate)
    stream = np.concatenate([interleaver.interleave(coded), rng.integers(0, 2, layout.pad_len)])
    symbols = modem.map_bits(stream, layout.order).reshape(layout.n_codewords, layout.scheme.n_syms)
    return TxFrame(info, coded, symbols, stbc.encode_batch(layout.scheme, symbols))


@dataclass
class Diagnostics:
    iterations_run: int = 0
    ber_per_iteration: list[float] = field(default_factory=list)
    llr_histograms: list[tuple[np.ndarray, np.ndarray]] = field(default_factory=list)


_HIST_EDGES = np.linspace(-modem.LLR_CLAMP, modem.LLR_CLAMP, 51)


def demodulate_frame(
    received,
    channel: "ChannelRealization | np.ndarray",
    noise: NoiseSpec,
    config: ReceiverConfig,
    info_len: int,
    interleaver: fec.Interleaver,
    truth=None,
):
    """Iterative detection and decoding of one frame.

    Args:
        received: (n_cw, m_r, n_time) complex received blocks.
        channel: per-codeword gains, (n_cw, n_time, m_r, n_tx).
        noise: noise level used by the detector.
        config: receiver configuration.
        info_len: information bits in the frame (tail excluded).
        interleaver: the transmitter's interleaver.
        truth: optional transmitted info bits for per-iteration BER.

    Returns:
        (info bit decisions, Diagnostics)
    """
    layout = FrameLayout.for_config(info_len, config)
    h = channel.h if isinstance(channel, ChannelRealization) else np.asarray(channel)
    received = np.asarray(received)
    if received.shape[0] != layout.n_codewords or h.shape[0] != layout.n_codewords:
        raise ValueError(
            f"frame geometry mismatch: layout needs {layout.n_codewords} codewords, "
            f"got {received.shape[0]} received blocks and {h.shape[0]} channel matrices"
        )
    if interleaver.length != layout.coded_len:
        raise ValueError(
            f"interleaver length {interleaver.length} != coded length {layout.coded_len}"
        )
    disp = stbc.dispersion(config.scheme)
    heq = detector.build_equivalent(h, disp)
    y = detector.realvec(received)
    detect = (
        detector.mmse_ic_detect if config.detector == "mmse_ic" else detector.exhaustive_maxlog_detect
    )
    diag = Diagnostics()
    priors = None
    decisions = None
    previous = None
    for it in range(config.iterations):
        ext_det = detect(heq, y, noise.n0, priors, config.order).ravel()[: layout.coded_len]
        apriori_coded = fec.depuncture(interleaver.deinterleave(ext_det), config.rate, layout.mother_len)
        ext_dec, post_info = fec.bcjr_decode(apriori_coded)
        decisions = (post_info[:info_len] < 0).astype(np.int8)
        diag.iterations_run = it + 1
        diag.llr_histograms.append(np.histogram(ext_det, bins=_HIST_EDGES))
        if truth is not None:
            diag.ber_per_iteration.append(float(np.mean(decisions != np.asarray(truth))))
        # max-log decisions always re-encode consistently, so early exit
        # waits for the decisions to stop changing between iterations
        if config.early_exit and previous is not None and np.array_equal(decisions, previous):
            break
        previous = decisions
        if it + 1 < config.iterations:
            fb = interleaver.interleave(fec.puncture(ext_dec, config.rate))
            priors = np.concatenate([fb, np.zeros(layout.pad_len)]).reshape(layout.n_codewords, -1)
    return decisions, diag

