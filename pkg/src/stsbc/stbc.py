"""Space-time block codes for two-site SFN transmission.

Four schemes are supported: Alamouti, spatial multiplexing (SM), the Golden
code and the double-layer 3D code (Alamouti between sites, Golden within a
site). Every codeword has rows = transmit antennas in site-major order and
columns = time slots.

All power-normalized encoders radiate a total average energy of 1 per channel
use when the input symbols have unit average energy, i.e. each of the
``n_tx`` antennas carries ``1 / n_tx`` on average.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

THETA = (1.0 + np.sqrt(5.0)) / 2.0
THETA_BAR = 1.0 - THETA
ALPHA = 1.0 + 1j * (1.0 - THETA)
ALPHA_BAR = 1.0 + 1j * (1.0 - THETA_BAR)
MU = 1j
GOLDEN_SCALE = 1.0 / np.sqrt(5.0)


class SchemeId(enum.Enum):
    ALAMOUTI = "alamouti"
    SPATIAL_MUX = "sm"
    GOLDEN = "golden"
    THREE_D = "3d"

    @classmethod
    def parse(cls, value: "str | SchemeId") -> "SchemeId":
        if isinstance(value, cls):
            return value
        key = str(value).lower()
        aliases = {"spatialmux": "sm", "threed": "3d", "three_d": "3d"}
        return cls(aliases.get(key, key))

    @property
    def shape(self) -> tuple[int, int, int]:
        """(n_tx, n_time, n_syms)."""
        return _SHAPES[self]

    @property
    def n_tx(self) -> int:
        return _SHAPES[self][0]

    @property
    def n_time(self) -> int:
        return _SHAPES[self][1]

    @property
    def n_syms(self) -> int:
        return _SHAPES[self][2]

    @property
    def antennas_per_site(self) -> int:
        return self.n_tx // 2


_SHAPES = {
    SchemeId.ALAMOUTI: (2, 2, 2),
    SchemeId.SPATIAL_MUX: (2, 1, 2),
    SchemeId.GOLDEN: (2, 2, 4),
    SchemeId.THREE_D: (4, 4, 8),
}


@dataclass(frozen=True)
class CodeConstants:
    theta: float = THETA
    theta_bar: float = THETA_BAR
    alpha: complex = ALPHA
    alpha_bar: complex = ALPHA_BAR
    mu: complex = MU
    scale: float = GOLDEN_SCALE


@dataclass(frozen=True)
class Codeword:
    entries: np.ndarray
    scheme: SchemeId

    def __post_init__(self):
        n_tx, n_time, _ = self.scheme.shape
        if self.entries.shape != (n_tx, n_time):
            raise ValueError(
                f"{self.scheme.name} codeword must be {n_tx}x{n_time}, got {self.entries.shape}"
            )


@dataclass(frozen=True)
class DispersionSet:
    """Real-linear generators: ``X = sum_k u[k] * generators[k]``.

    ``u`` interleaves real and imaginary parts, ``(Re s1, Im s1, Re s2, ...)``.
    """

    generators: np.ndarray  # (2Q, n_tx, n_time) complex

    @property
    def n_syms(self) -> int:
        return self.generators.shape[0] // 2

    def reconstruct(self, symbols) -> np.ndarray:
        """Codeword(s) for symbols of shape (..., Q)."""
        u = symbols_to_real(symbols)
        return np.tensordot(u, self.generators, axes=([-1], [0]))


def symbols_to_real(symbols) -> np.ndarray:
    s = np.asarray(symbols, dtype=complex)
    u = np.empty(s.shape[:-1] + (2 * s.shape[-1],))
    u[..., 0::2] = s.real
    u[..., 1::2] = s.imag
    return u


def real_to_symbols(u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    return u[..., 0::2] + 1j * u[..., 1::2]


def _check_count(symbols, n: int, name: str) -> np.ndarray:
    s = np.asarray(symbols, dtype=complex)
    if s.ndim != 1 or s.shape[0] != n:
        raise ValueError(f"{name} takes exactly {n} symbols, got shape {s.shape}")
    return s


def _golden_block(s: np.ndarray) -> np.ndarray:
    """Unnormalized-by-site Golden layer, including the 1/sqrt(5) factor."""
    return GOLDEN_SCALE * np.array(
        [
            [ALPHA * (s[0] + THETA * s[1]), ALPHA * (s[2] + THETA * s[3])],
            [MU * ALPHA_BAR * (s[2] + THETA_BAR * s[3]), ALPHA_BAR * (s[0] + THETA_BAR * s[1])],
        ]
    )


def encode_alamouti(s1: complex, s2: complex) -> Codeword:
    x = np.array([[s1, -np.conj(s2)], [s2, np.conj(s1)]], dtype=complex) / np.sqrt(2.0)
    return Codeword(x, SchemeId.ALAMOUTI)


def encode_sm(s1: complex, s2: complex) -> Codeword:
    x = np.array([[s1], [s2]], dtype=complex) / np.sqrt(2.0)
    return Codeword(x, SchemeId.SPATIAL_MUX)


def encode_golden(symbols: Sequence[complex], normalize: bool = True) -> "Codeword | np.ndarray":
    """Golden codeword of four symbols.

    With ``normalize=False`` the bare layer matrix (scale 1/sqrt(5) only) is
    returned as an ndarray; the normalized codeword carries an extra
    1/sqrt(2) so that the two antennas share unit power per channel use.
    """
    s = _check_count(symbols, 4, "encode_golden")
    x = _golden_block(s)
    if not normalize:
        return x
    return Codeword(x / np.sqrt(2.0), SchemeId.GOLDEN)


def encode_3d(symbols: Sequence[complex], normalize: bool = True) -> "Codeword | np.ndarray":
    """Double-layer 3D codeword of eight symbols.

    Site 1 (rows 0-1) sends Golden(s1..s4) then Golden(s5..s8); site 2
    (rows 2-3) sends -conj(Golden(s5..s8)) then conj(Golden(s1..s4)).
    """
    s = _check_count(symbols, 8, "encode_3d")
    a = GOLDEN_SCALE * np.array(
        [
            [ALPHA * (s[0] + THETA * s[1]), ALPHA * (s[2] + THETA * s[3]),
             ALPHA * (s[4] + THETA * s[5]), ALPHA * (s[6] + THETA * s[7])],
            [1j * ALPHA_BAR * (s[2] + THETA_BAR * s[3]), ALPHA_BAR * (s[0] + THETA_BAR * s[1]),
             1j * ALPHA_BAR * (s[6] + THETA_BAR * s[7]), ALPHA_BAR * (s[4] + THETA_BAR * s[5])],
            [-np.conj(ALPHA) * (np.conj(s[4]) + THETA * np.conj(s[5])),
             -np.conj(ALPHA) * (np.conj(s[6]) + THETA * np.conj(s[7])),
             np.conj(ALPHA) * (np.conj(s[0]) + THETA * np.conj(s[1])),
             np.conj(ALPHA) * (np.conj(s[2]) + THETA * np.conj(s[3]))],
            [1j * np.conj(ALPHA_BAR) * (np.conj(s[6]) + THETA_BAR * np.conj(s[7])),
             -np.conj(ALPHA_BAR) * (np.conj(s[4]) + THETA_BAR * np.conj(s[5])),
             -1j * np.conj(ALPHA_BAR) * (np.conj(s[2]) + THETA_BAR * np.conj(s[3])),
             np.conj(ALPHA_BAR) * (np.conj(s[0]) + THETA_BAR * np.conj(s[1]))],
        ]
    )
    if not normalize:
        return a
    return Codeword(a / 2.0, SchemeId.THREE_D)


# -- double-layer construction ------------------------------------------------


@dataclass(frozen=True)
class InnerLayer:
    """Intra-site code: Q symbols -> (M_T x T) block."""

    n_rows: int
    n_cols: int
    n_syms: int
    encode: Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class OuterLayer:
    """Inter-site code given as a sign/conjugation pattern over L entries.

    ``pattern[i][j] = (entry index, sign, conjugate)`` places
    ``sign * (conj?)(block[entry])`` at block position (i, j).
    """

    pattern: tuple[tuple[tuple[int, int, bool], ...], ...]
    n_entries: int

    @property
    def n_rows(self) -> int:
        return len(self.pattern)

    @property
    def n_cols(self) -> int:
        return len(self.pattern[0])


# Inter-site Alamouti as it appears in the combined 3D matrix: site 1 sends
# (x1, x2), site 2 sends (-x2*, x1*).
ALAMOUTI_OUTER = OuterLayer(
    pattern=(((0, 1, False), (1, 1, False)), ((1, -1, True), (0, 1, True))),
    n_entries=2,
)
GOLDEN_INNER = InnerLayer(2, 2, 4, _golden_block)
IDENTITY_INNER = InnerLayer(1, 1, 1, lambda s: np.asarray(s, dtype=complex).reshape(1, 1))


@dataclass(frozen=True)
class DoubleLayerEncoder:
    outer: OuterLayer
    inner: InnerLayer
    scale: float

    @property
    def n_syms(self) -> int:
        return self.inner.n_syms * self.outer.n_entries

    @property
    def shape(self) -> tuple[int, int]:
        return (self.outer.n_rows * self.inner.n_rows, self.outer.n_cols * self.inner.n_cols)

    @property
    def rate(self) -> Fraction:
        return Fraction(self.n_syms, self.shape[1])

    def raw(self, symbols) -> np.ndarray:
        s = _check_count(symbols, self.n_syms, "double-layer encoder")
        q = self.inner.n_syms
        blocks = [self.inner.encode(s[i * q:(i + 1) * q]) for i in range(self.outer.n_entries)]
        rows = []
        for pattern_row in self.outer.pattern:
            row = []
            for idx, sign, conj in pattern_row:
                b = np.conj(blocks[idx]) if conj else blocks[idx]
                row.append(sign * b)
            rows.append(row)
        return np.block(rows)

    def __call__(self, symbols) -> np.ndarray:
        return self.scale * self.raw(symbols)


def build_double_layer(outer: OuterLayer, inner: InnerLayer) -> DoubleLayerEncoder:
    """Compose an inter-site layer with an intra-site layer.

    The result is power normalized: with unit-energy symbols the expected
    total energy per time slot is 1.
    """
    if outer.n_rows != 2:
        raise ValueError(f"outer layer must span exactly two sites, got {outer.n_rows} rows")
    if any(len(r) != outer.n_cols for r in outer.pattern):
        raise ValueError("outer layer pattern is ragged")
    used = {idx for r in outer.pattern for idx, _, _ in r}
    if not used <= set(range(outer.n_entries)):
        raise ValueError("outer layer pattern references entries beyond n_entries")
    probe = inner.encode(np.zeros(inner.n_syms, dtype=complex))
    if probe.shape != (inner.n_rows, inner.n_cols):
        raise ValueError(
            f"inner layer declared {inner.n_rows}x{inner.n_cols} but produced {probe.shape}"
        )
    unscaled = DoubleLayerEncoder(outer, inner, 1.0)
    gens = _generators(unscaled.raw, unscaled.n_syms)
    # E|u_k|^2 = 1/2 for unit-energy symbols
    energy = 0.5 * np.sum(np.abs(gens) ** 2)
    scale = float(np.sqrt(unscaled.shape[1] / energy))
    return DoubleLayerEncoder(outer, inner, scale)


# -- scheme-level API ---------------------------------------------------------


def encode(scheme: "SchemeId | str", symbols) -> Codeword:
    scheme = SchemeId.parse(scheme)
    s = _check_count(symbols, scheme.n_syms, f"{scheme.name} encoder")
    if scheme is SchemeId.ALAMOUTI:
        return encode_alamouti(s[0], s[1])
    if scheme is SchemeId.SPATIAL_MUX:
        return encode_sm(s[0], s[1])
    if scheme is SchemeId.GOLDEN:
        return encode_golden(s)
    return encode_3d(s)


_RATES = {
    SchemeId.ALAMOUTI: Fraction(1),
    SchemeId.SPATIAL_MUX: Fraction(2),
    SchemeId.GOLDEN: Fraction(2),
    SchemeId.THREE_D: Fraction(2),
}


def code_rate(scheme: "SchemeId | str") -> Fraction:
    return _RATES[SchemeId.parse(scheme)]


def _generators(fn: Callable[[np.ndarray], np.ndarray], n_syms: int) -> np.ndarray:
    gens = []
    for k in range(2 * n_syms):
        s = np.zeros(n_syms, dtype=complex)
        s[k // 2] = 1.0 if k % 2 == 0 else 1j
        gens.append(np.asarray(fn(s), dtype=complex))
    return np.stack(gens)


_DISPERSION_CACHE: dict[SchemeId, DispersionSet] = {}


def dispersion(scheme: "SchemeId | str") -> DispersionSet:
    """Generator matrices of the power-normalized encoder.

    Every encoder is real-linear, so evaluating it on unit real and unit
    imaginary inputs gives the generators exactly.
    """
    scheme = SchemeId.parse(scheme)
    if scheme not in _DISPERSION_CACHE:
        gens = _generators(lambda s: encode(scheme, s).entries, scheme.n_syms)
        gens.setflags(write=False)
        _DISPERSION_CACHE[scheme] = DispersionSet(gens)
    return _DISPERSION_CACHE[scheme]


def encode_batch(scheme: "SchemeId | str", symbols) -> np.ndarray:
    """Codewords for symbols of shape (N, Q); returns (N, n_tx, n_time)."""
    return dispersion(scheme).reconstruct(symbols)
