import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stsbc import stbc
from stsbc.stbc import SchemeId

SQ2 = np.sqrt(2.0)
SQ5 = np.sqrt(5.0)


def rand_symbols(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / SQ2


def test_constants():
    c = stbc.CodeConstants()
    assert c.theta * c.theta_bar == pytest.approx(-1.0, abs=1e-15)
    assert c.theta + c.theta_bar == pytest.approx(1.0, abs=1e-15)
    assert c.alpha == pytest.approx(1 - 0.6180339887j)
    assert c.alpha_bar == pytest.approx(1 + 1.6180339887j)
    assert c.mu == 1j
    assert c.scale == pytest.approx(1 / SQ5)


@pytest.mark.parametrize("scheme,shape", [
    (SchemeId.ALAMOUTI, (2, 2, 2)), (SchemeId.SPATIAL_MUX, (2, 1, 2)),
    (SchemeId.GOLDEN, (2, 2, 4)), (SchemeId.THREE_D, (4, 4, 8)),
])
def test_scheme_shapes(scheme, shape):
    assert scheme.shape == shape
    x = stbc.encode(scheme, np.ones(shape[2]))
    assert x.entries.shape == shape[:2]


def test_alamouti_examples():
    np.testing.assert_allclose(stbc.encode_alamouti(1, 0).entries, np.eye(2) / SQ2)
    x = stbc.encode_alamouti(1 + 1j, 1 - 1j).entries
    np.testing.assert_allclose(x, np.array([[1 + 1j, -1 - 1j], [1 - 1j, 1 - 1j]]) / SQ2)


def test_alamouti_orthogonality():
    rng = np.random.default_rng(3)
    for s1, s2 in rand_symbols(rng, (100, 2)):
        x = stbc.encode_alamouti(s1, s2).entries
        gram = x @ x.conj().T
        np.testing.assert_allclose(gram, (abs(s1) ** 2 + abs(s2) ** 2) / 2 * np.eye(2), atol=1e-15)


def test_sm_examples():
    np.testing.assert_allclose(stbc.encode_sm(1, 0).entries, np.array([[1], [0]]) / SQ2)
    a, b = 0.3 - 0.2j, -1.1 + 0.7j
    np.testing.assert_allclose(stbc.encode_sm(a, b).entries, np.array([[a], [b]]) / SQ2)
    assert stbc.code_rate(SchemeId.SPATIAL_MUX) == 2


def test_golden_unit_input():
    raw = stbc.encode_golden([1, 0, 0, 0], normalize=False)
    expected = np.array([[1 - 0.6180339887j, 0], [0, 1 + 1.6180339887j]]) / SQ5
    np.testing.assert_allclose(raw, expected, atol=1e-10)
    # the power-normalized codeword shares the antennas' unit budget
    np.testing.assert_allclose(stbc.encode_golden([1, 0, 0, 0]).entries, expected / SQ2, atol=1e-10)
    np.testing.assert_array_equal(stbc.encode_golden(np.zeros(4)).entries, np.zeros((2, 2)))


def test_golden_wrong_count():
    with pytest.raises(ValueError):
        stbc.encode_golden([1, 2, 3])
    with pytest.raises(ValueError):
        stbc.encode_3d(np.ones(7))


def golden_min_det_4qam():
    """Exhaustive scan over all non-zero 4-QAM difference vectors."""
    pts = np.array([1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j]) / SQ2
    diffs = np.unique(np.round((pts[:, None] - pts[None, :]).ravel(), 12))
    best = np.inf
    for d in itertools.product(diffs, repeat=4):
        if not any(d):
            continue
        x = stbc.encode_golden(np.array(d), normalize=False)
        best = min(best, abs(x[0, 0] * x[1, 1] - x[0, 1] * x[1, 0]))
    return best


def test_golden_nonvanishing_determinant():
    best = golden_min_det_4qam()
    assert best > 0
    # min |det| is 1/sqrt(5) over Z[i]; 4-QAM differences live in sqrt(2) Z[i]
    assert best == pytest.approx(2 / SQ5, rel=1e-12)


def test_3d_unit_input():
    raw = stbc.encode_3d(np.eye(8)[0], normalize=False)
    a, ab = stbc.ALPHA, stbc.ALPHA_BAR
    expected = np.diag([a, ab, np.conj(a), np.conj(ab)]) / SQ5
    np.testing.assert_allclose(raw, expected, atol=1e-15)
    np.testing.assert_array_equal(stbc.encode_3d(np.zeros(8)).entries, np.zeros((4, 4)))


def test_3d_block_structure():
    rng = np.random.default_rng(5)
    s = rand_symbols(rng, 8)
    x = stbc.encode_3d(s, normalize=False)
    a = stbc.encode_golden(s[:4], normalize=False)
    b = stbc.encode_golden(s[4:], normalize=False)
    np.testing.assert_allclose(x[:2, :2], a, atol=1e-14)
    np.testing.assert_allclose(x[:2, 2:], b, atol=1e-14)
    np.testing.assert_allclose(x[2:, :2], -np.conj(b), atol=1e-14)
    np.testing.assert_allclose(x[2:, 2:], np.conj(a), atol=1e-14)


def test_3d_equals_double_layer():
    enc = stbc.build_double_layer(stbc.ALAMOUTI_OUTER, stbc.GOLDEN_INNER)
    assert enc.shape == (4, 4)
    # 16 unit-energy entries over 4 slots -> amplitude 1/2
    assert enc.scale == pytest.approx(0.5, rel=1e-12)
    rng = np.random.default_rng(6)
    for s in rand_symbols(rng, (1000, 8)):
        np.testing.assert_allclose(enc(s), stbc.encode_3d(s).entries, rtol=0, atol=1e-12)


def test_double_layer_single_site_antenna_is_alamouti():
    enc = stbc.build_double_layer(stbc.ALAMOUTI_OUTER, stbc.IDENTITY_INNER)
    assert enc.rate == 1
    rng = np.random.default_rng(7)
    for s in rand_symbols(rng, (20, 2)):
        x = enc(s)
        # transposed (time <-> antenna) form of the single-layer convention
        np.testing.assert_allclose(x, stbc.encode_alamouti(*s).entries.T, atol=1e-15)
        np.testing.assert_allclose(x @ x.conj().T, np.sum(abs(s) ** 2) / 2 * np.eye(2), atol=1e-14)


def test_double_layer_rate_formula():
    enc = stbc.build_double_layer(stbc.ALAMOUTI_OUTER, stbc.GOLDEN_INNER)
    q, l, u, t = 4, 2, 2, 2
    assert enc.rate == Fraction(q * l, u * t) == stbc.code_rate(SchemeId.THREE_D)


def test_double_layer_rejects_bad_layers():
    three_sites = stbc.OuterLayer((((0, 1, False),),) * 3, 1)
    with pytest.raises(ValueError):
        stbc.build_double_layer(three_sites, stbc.GOLDEN_INNER)
    liar = stbc.InnerLayer(2, 2, 4, lambda s: np.zeros((3, 2), complex))
    with pytest.raises(ValueError):
        stbc.build_double_layer(stbc.ALAMOUTI_OUTER, liar)


@pytest.mark.parametrize("scheme,rate", [
    ("alamouti", 1), ("sm", 2), ("golden", 2), ("3d", 2),
])
def test_code_rate(scheme, rate):
    r = stbc.code_rate(scheme)
    assert r == rate
    n_tx, n_time, q = SchemeId.parse(scheme).shape
    assert r == Fraction(q, n_time)


def test_dispersion_alamouti_first_generator():
    g = stbc.dispersion(SchemeId.ALAMOUTI).generators
    np.testing.assert_allclose(g[0], np.eye(2) / SQ2)
    assert stbc.dispersion(SchemeId.THREE_D).generators.shape == (16, 4, 4)


@pytest.mark.parametrize("scheme", list(SchemeId))
def test_dispersion_reconstruction(scheme):
    disp = stbc.dispersion(scheme)
    rng = np.random.default_rng(11)
    s = rand_symbols(rng, (200, scheme.n_syms))
    batch = disp.reconstruct(s)
    for si, xi in zip(s, batch):
        np.testing.assert_allclose(xi, stbc.encode(scheme, si).entries, rtol=0, atol=1e-12)


@pytest.mark.parametrize("scheme", list(SchemeId))
def test_power_normalization_exact(scheme):
    g = stbc.dispersion(scheme).generators
    assert 0.5 * np.sum(np.abs(g) ** 2) / scheme.n_time == pytest.approx(1.0, rel=1e-12)


@pytest.mark.parametrize("scheme", list(SchemeId))
def test_power_normalization_monte_carlo(scheme):
    rng = np.random.default_rng(12)
    # unit-energy 16-QAM inputs
    levels = np.array([-3, -1, 1, 3]) / np.sqrt(10)
    s = rng.choice(levels, (100_000, scheme.n_syms)) + 1j * rng.choice(levels, (100_000, scheme.n_syms))
    x = stbc.encode_batch(scheme, s)
    per_use = np.mean(np.sum(np.abs(x) ** 2, axis=(1, 2))) / scheme.n_time
    assert per_use == pytest.approx(1.0, rel=0.01)


complex_st = st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False)


@settings(max_examples=50, deadline=None)
@given(
    scheme=st.sampled_from(list(SchemeId)),
    a=st.floats(-3, 3), b=st.floats(-3, 3),
    data=st.data(),
)
def test_real_linearity(scheme, a, b, data):
    n = scheme.n_syms
    s = np.array(data.draw(st.lists(complex_st, min_size=n, max_size=n)))
    t = np.array(data.draw(st.lists(complex_st, min_size=n, max_size=n)))
    lhs = stbc.encode(scheme, a * s + b * t).entries
    rhs = a * stbc.encode(scheme, s).entries + b * stbc.encode(scheme, t).entries
    np.testing.assert_allclose(lhs, rhs, atol=1e-9)


def test_scheme_parse():
    assert SchemeId.parse("3D") is SchemeId.THREE_D
    assert SchemeId.parse("SpatialMux") is SchemeId.SPATIAL_MUX
    with pytest.raises(ValueError):
        SchemeId.parse("ostbc")
