"""Monte Carlo BER engine: single points, Eb/N0 sweeps and required-Eb/N0
search, with CSV output.

Every frame draws from its own counter-based RNG stream keyed by
(seed, operating point, frame index), and frames are consumed in fixed-size
chunks, so results do not depend on the number of worker processes.
"""

from __future__ import annotations

import csv
import logging
import math
import os
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from fractions import Fraction
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from . import channel, fec, receiver, stbc
from .modem import qam

log = logging.getLogger(__name__)

CSV_COLUMNS = (
    "scheme", "mod", "rc", "eta", "beta_db", "ebn0_db", "bits", "bit_errors",
    "frame_errors", "ber", "ci95", "iters", "seed",
)
GRID_STEP_DB = 0.5
CHUNK_FRAMES = 8


@dataclass(frozen=True)
class SimConfig:
    scheme: stbc.SchemeId
    order: int
    rate: Fraction
    beta_db: float = 0.0
    ebn0_grid: tuple[float, ...] = ()
    target_ber: float = 1e-3
    min_frame_errors: int = 100
    min_bit_errors: int = 0
    max_bits: int | None = None
    seed: int = 0
    iterations: int = 5
    m_r: int = 2
    detector: str = "mmse_ic"
    info_len: int = 9000
    per_slot_fading: bool = False
    early_exit: bool = False
    ebn0_range: tuple[float, float] = (-5.0, 60.0)
    start_db: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "scheme", stbc.SchemeId.parse(self.scheme))
        object.__setattr__(self, "rate", Fraction(self.rate))
        object.__setattr__(self, "detector", self.detector.replace("-", "_"))
        object.__setattr__(self, "ebn0_grid", tuple(float(x) for x in self.ebn0_grid))
        if self.min_frame_errors < 100 and self.max_bits is None:
            raise ValueError(
                "valid BER points need >= 100 frame errors; lower it only together with max_bits"
            )
        self.receiver_config()

    @property
    def eta(self) -> float:
        return float(stbc.code_rate(self.scheme) * self.rate) * math.log2(self.order)

    def receiver_config(self) -> receiver.ReceiverConfig:
        return receiver.ReceiverConfig(
            self.scheme, self.order, self.rate, self.iterations, self.detector, self.early_exit
        )

    def layout(self) -> receiver.FrameLayout:
        return receiver.FrameLayout(self.info_len, self.scheme, self.order, self.rate)


def spectral_efficiency(scheme, order: int, rate) -> float:
    return float(stbc.code_rate(scheme) * Fraction(rate)) * math.log2(order)


@dataclass
class BerPoint:
    scheme: str
    order: int
    rate: str
    eta: float
    beta_db: float
    ebn0_db: float
    bits: int = 0
    bit_errors: int = 0
    frame_errors: int = 0
    frames: int = 0
    iterations: int = 0
    seed: int = 0
    iteration_errors: list[int] = field(default_factory=list)

    @property
    def ber(self) -> float:
        return self.bit_errors / self.bits if self.bits else float("nan")

    @property
    def ci95(self) -> float:
        if not self.bits:
            return float("nan")
        p = self.ber
        return 1.96 * math.sqrt(p * (1.0 - p) / self.bits)

    @property
    def ber_per_iteration(self) -> list[float]:
        return [e / self.bits for e in self.iteration_errors] if self.bits else []

    def csv_row(self) -> dict:
        return {
            "scheme": self.scheme, "mod": self.order, "rc": self.rate, "eta": f"{self.eta:g}",
            "beta_db": f"{self.beta_db:g}", "ebn0_db": f"{self.ebn0_db:g}", "bits": self.bits,
            "bit_errors": self.bit_errors, "frame_errors": self.frame_errors,
            "ber": f"{self.ber:.6e}", "ci95": f"{self.ci95:.6e}", "iters": self.iterations,
            "seed": self.seed,
        }


def _point_key(config: SimConfig, ebn0_db: float) -> int:
    text = f"{config.scheme.value}|{config.order}|{config.rate}|{config.beta_db:.6f}|{ebn0_db:.6f}"
    return zlib.crc32(text.encode())


def frame_rng(config: SimConfig, ebn0_db: float, frame: int) -> np.random.Generator:
    seq = np.random.SeedSequence([config.seed, _point_key(config, ebn0_db), frame])
    return np.random.Generator(np.random.Philox(seq))


def simulate_frame(config: SimConfig, ebn0_db: float, frame: int,
                   interleaver: fec.Interleaver | None = None) -> tuple[int, list[int]]:
    """Run one frame; returns (bit errors, bit errors after each iteration)."""
    layout = config.layout()
    if interleaver is None:
        interleaver = fec.Interleaver(layout.coded_len, config.seed)
    rng = frame_rng(config, ebn0_db, frame)
    noise = channel.noise_from_ebn0(ebn0_db, config.eta)
    info = rng.integers(0, 2, config.info_len, dtype=np.int8)
    tx = receiver.transmit_frame(info, layout, interleaver, rng)
    chan = channel.draw_channel(
        rng, config.m_r, config.scheme, config.beta_db, layout.n_codewords, config.per_slot_fading
    )
    y = channel.apply(chan, tx.codewords, noise, rng)
    decisions, diag = receiver.demodulate_frame(
        y, chan, noise, config.receiver_config(), config.info_len, interleaver, truth=info
    )
    per_iter = [int(round(b * config.info_len)) for b in diag.ber_per_iteration]
    # iterations skipped by early exit keep the last decisions
    per_iter += per_iter[-1:] * (config.iterations - len(per_iter))
    return int(np.count_nonzero(decisions != info)), per_iter


def _run_chunk(args) -> list[tuple[int, list[int]]]:
    config, ebn0_db, start, count = args
    il = fec.Interleaver(config.layout().coded_len, config.seed)
    return [simulate_frame(config, ebn0_db, f, il) for f in range(start, start + count)]


def worker_count() -> int:
    cap = os.environ.get("STSBC_THREADS")
    n = os.cpu_count() or 1
    return max(1, min(n, int(cap))) if cap else n


def _done(pt: BerPoint, config: SimConfig) -> bool:
    if config.max_bits is not None and pt.bits >= config.max_bits:
        return True
    return pt.frame_errors >= config.min_frame_errors and pt.bit_errors >= config.min_bit_errors


def run_ber_point(config: SimConfig, ebn0_db: float, workers: int | None = None) -> BerPoint:
    """Simulate frames at one Eb/N0 until the stopping rule is met."""
    workers = worker_count() if workers is None else workers
    pt = BerPoint(
        config.scheme.value, config.order, str(config.rate), config.eta, config.beta_db,
        float(ebn0_db), iterations=config.iterations, seed=config.seed,
        iteration_errors=[0] * config.iterations,
    )
    next_frame = 0
    pool = ProcessPoolExecutor(workers) if workers > 1 else None
    try:
        while not _done(pt, config):
            jobs = [(config, ebn0_db, next_frame + i * CHUNK_FRAMES, CHUNK_FRAMES)
                    for i in range(workers)]
            next_frame += workers * CHUNK_FRAMES
            results = pool.map(_run_chunk, jobs) if pool else map(_run_chunk, jobs)
            for chunk in results:
                if _done(pt, config):
                    break
                for errors, per_iter in chunk:
                    pt.frames += 1
                    pt.bits += config.info_len
                    pt.bit_errors += errors
                    pt.frame_errors += errors > 0
                    pt.iteration_errors = [a + b for a, b in zip(pt.iteration_errors, per_iter)]
    finally:
        if pool:
            pool.shutdown()
    log.info("%s beta=%g Eb/N0=%g: BER %.3e (%d/%d bits, %d frame errors)", pt.scheme,
             pt.beta_db, pt.ebn0_db, pt.ber, pt.bit_errors, pt.bits, pt.frame_errors)
    return pt


def run_sweep(config: SimConfig, workers: int | None = None) -> list[BerPoint]:
    return [run_ber_point(config, e, workers) for e in config.ebn0_grid]


# -- required Eb/N0 -----------------------------------------------------------


@dataclass
class RequiredEbN0:
    ebn0_db: float | None
    target_ber: float
    lower: object = None  # point just above the target BER
    upper: object = None  # point at or below the target BER
    evaluated: dict = field(default_factory=dict)

    @property
    def in_range(self) -> bool:
        return self.ebn0_db is not None

    def interval(self) -> tuple[float, float] | None:
        """95% range of the crossing, from shifting both bracket BERs by their ci95."""
        if not self.in_range or not isinstance(self.lower, BerPoint):
            return None
        p0, p1 = self.lower, self.upper
        x0, x1 = p0.ebn0_db, p1.ebn0_db
        b0, b1 = _floor_ber(p0), _floor_ber(p1)
        c0, c1 = p0.ci95, p1.ci95
        lo = interpolate_crossing(x0, max(b0 - c0, b0 * 1e-3), x1, max(b1 - c1, b1 * 1e-3),
                                  self.target_ber)
        hi = interpolate_crossing(x0, b0 + c0, x1, b1 + c1, self.target_ber)
        return min(lo, hi), max(lo, hi)


def _ber_of(p) -> float:
    return p.ber if isinstance(p, BerPoint) else float(p)


def _floor_ber(p) -> float:
    b = _ber_of(p)
    if b > 0:
        return b
    # no errors observed: half an error over the simulated budget
    return 0.5 / p.bits if isinstance(p, BerPoint) and p.bits else 1e-300


def interpolate_crossing(x0: float, b0: float, x1: float, b1: float, target: float) -> float:
    """Linear interpolation of log10(BER) against Eb/N0 in dB."""
    l0, l1, lt = math.log10(b0), math.log10(b1), math.log10(target)
    if l0 == l1:
        return x1
    return x0 + (lt - l0) * (x1 - x0) / (l1 - l0)


def _snap(x: float) -> float:
    return round(x / GRID_STEP_DB) * GRID_STEP_DB


def search_required_ebn0(
    evaluate: Callable[[float], object],
    target: float,
    start_db: float = 10.0,
    ebn0_range: tuple[float, float] = (-5.0, 60.0),
    probe: Callable[[float], object] | None = None,
    coarse_step_db: float = 2.0,
) -> RequiredEbN0:
    """Bracket ``target`` on the 0.5 dB grid, then interpolate in log-BER.

    ``evaluate`` returns a BerPoint (or a bare BER) at a given Eb/N0.
    ``probe`` is an optional cheaper evaluator used only to narrow the
    search with coarse steps before the grid walk; it never contributes to
    the reported bracket.
    """
    if not 0.0 < target < 0.5:
        raise ValueError(f"target BER must lie in (0, 0.5), got {target}")
    lo_lim, hi_lim = ebn0_range
    x = min(max(_snap(start_db), lo_lim), hi_lim)
    if probe is not None:
        above = _ber_of(probe(x)) > target
        step = coarse_step_db if above else -coarse_step_db
        while lo_lim <= x + step <= hi_lim:
            nxt = x + step
            now_above = _ber_of(probe(nxt)) > target
            x = nxt
            if now_above != above:
                break
        # the crossing lies within one coarse step of x
        x = _snap(x - step / 2.0)

    cache: dict[float, object] = {}

    def ev(e: float):
        e = round(e, 6)
        if e not in cache:
            cache[e] = evaluate(e)
        return cache[e]

    result = RequiredEbN0(None, target, evaluated=cache)
    x = min(max(x, lo_lim), hi_lim)
    while True:
        if _ber_of(ev(x)) > target:
            up = x + GRID_STEP_DB
            if up > hi_lim + 1e-9:
                return result
            if _ber_of(ev(up)) <= target:
                lo, hi = x, up
                break
            x = up
        else:
            down = x - GRID_STEP_DB
            if down < lo_lim - 1e-9:
                return result
            if _ber_of(ev(down)) > target:
                lo, hi = down, x
                break
            x = down
    p_lo, p_hi = ev(lo), ev(hi)
    result.lower, result.upper = p_lo, p_hi
    result.ebn0_db = interpolate_crossing(lo, _floor_ber(p_lo), hi, _floor_ber(p_hi), target)
    return result


def required_ebn0(config: SimConfig, target_ber: float | None = None,
                  workers: int | None = None) -> RequiredEbN0:
    target = config.target_ber if target_ber is None else target_ber
    probe_cfg = replace(config, min_frame_errors=10, max_bits=max(config.info_len * 40, 1))
    start = config.start_db if config.start_db is not None else 10.0
    res = search_required_ebn0(
        lambda e: run_ber_point(config, e, workers),
        target,
        start_db=start,
        ebn0_range=config.ebn0_range,
        probe=lambda e: run_ber_point(probe_cfg, e, workers),
    )
    log.info("%s beta=%g eta=%g: required Eb/N0 %s dB", config.scheme.value, config.beta_db,
             config.eta, "out of range" if res.ebn0_db is None else f"{res.ebn0_db:.2f}")
    return res


# -- paper scenarios and CSV --------------------------------------------------

BETA_GRID_DB = (0.0, -3.0, -6.0, -9.0, -12.0, -15.0)

# (scheme, QAM order, FEC rate) giving each spectral efficiency
SCHEME_SETTINGS = {
    4: {
        stbc.SchemeId.ALAMOUTI: (64, Fraction(2, 3)),
        stbc.SchemeId.SPATIAL_MUX: (16, Fraction(1, 2)),
        stbc.SchemeId.GOLDEN: (16, Fraction(1, 2)),
        stbc.SchemeId.THREE_D: (16, Fraction(1, 2)),
    },
    6: {
        stbc.SchemeId.ALAMOUTI: (256, Fraction(3, 4)),
        stbc.SchemeId.SPATIAL_MUX: (64, Fraction(1, 2)),
        stbc.SchemeId.GOLDEN: (64, Fraction(1, 2)),
        stbc.SchemeId.THREE_D: (64, Fraction(1, 2)),
    },
}

FIGURE_SCHEMES = {
    2: ((4,), (stbc.SchemeId.ALAMOUTI, stbc.SchemeId.SPATIAL_MUX, stbc.SchemeId.GOLDEN)),
    3: ((4, 6), (stbc.SchemeId.THREE_D, stbc.SchemeId.ALAMOUTI, stbc.SchemeId.GOLDEN)),
}


def scenario_config(scheme, eta: int, beta_db: float, **overrides) -> SimConfig:
    scheme = stbc.SchemeId.parse(scheme)
    order, rate = SCHEME_SETTINGS[eta][scheme]
    return SimConfig(scheme, order, rate, beta_db=beta_db, **overrides)


def figure_configs(fig_id: int, betas: Sequence[float] = BETA_GRID_DB, **overrides) -> list[SimConfig]:
    if fig_id not in FIGURE_SCHEMES:
        raise ValueError(f"unknown figure id {fig_id}; choose 2 or 3")
    etas, schemes = FIGURE_SCHEMES[fig_id]
    return [scenario_config(s, eta, b, **overrides) for eta in etas for s in schemes for b in betas]


def write_csv(points: Iterable[BerPoint], path: "str | Path", append: bool = False) -> Path:
    path = Path(path)
    try:
        new = not (append and path.exists() and path.stat().st_size > 0)
        with path.open("a" if append else "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
            if new:
                w.writeheader()
            for p in points:
                w.writerow(p.csv_row())
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc}") from exc
    return path


def sweep(configs: Iterable[SimConfig], path: "str | Path", append: bool = False,
          workers: int | None = None) -> list[BerPoint]:
    """One CSV row per (scheme, beta, Eb/N0); rows are flushed per config."""
    path = Path(path)
    points: list[BerPoint] = []
    write_csv([], path, append=append)
    for cfg in configs:
        pts = run_sweep(cfg, workers)
        write_csv(pts, path, append=True)
        points.extend(pts)
    return points


def config_to_dict(config: SimConfig) -> dict:
    d = asdict(config)
    d["scheme"] = config.scheme.value
    d["rate"] = str(config.rate)
    return d
