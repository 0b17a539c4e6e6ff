import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from lib.cascades import CascadeSpec, MultiplierLaw, synthesize
from lib.errors import DegenerateValueError, ParameterError, RegressionError
from lib.mfa import (LEGENDRE_Q_GRID, PLeaderField, analyze_pyramid, compute_pleaders,
                     correct_cumulants, correct_log_structure, correct_pleaders, correct_stats,
                     correct_structure, cumulants, default_eta_range, default_range,
                     estimate_eta, estimate_p0, gamma_correction, legendre, regress,
                     scaling_stats, settled_octave, structure_function)
from lib.processes import synth_fbm
from lib.rng import make_rng
from lib.wavelet import Signal, WaveletPyramid, dwt


def small_pyramid():
    return WaveletPyramid(
        details=(np.array([[1.0, -2.0, 3.0, -4.0]]), np.array([[5.0, 6.0]])),
        approximation=np.ones(2), n_vanishing_moments=None)


@pytest.fixture(scope='module')
def mrws_pyramid():
    law = MultiplierLaw.from_log_cumulants(0.8, -0.08)
    return synthesize(CascadeSpec(kind='mrws', depth=12, law=law, seed=5))


@pytest.fixture(scope='module')
def fbm_pyramid():
    return dwt(synth_fbm(0.7, 2**14, seed=3), 3, boundary_policy='discard_border')


def test_restricted_leaders_by_hand():
    pyramid = small_pyramid()
    ones = compute_pleaders(pyramid, 1.0)
    assert_allclose(ones.leaders[0], [1, 2, 3, 4])
    assert_allclose(ones.leaders[1], [0.5 * 3 + 5, 0.5 * 7 + 6])
    twos = compute_pleaders(pyramid, 2.0)
    assert_allclose(twos.leaders[1] ** 2, [0.5 * 5 + 25, 0.5 * 25 + 36])
    maxima = compute_pleaders(pyramid, np.inf)
    assert_allclose(maxima.leaders[1], [5, 6])


def test_full3lambda_at_inf_is_neighbor_max():
    pyramid = small_pyramid()
    restricted = compute_pleaders(pyramid, np.inf).leaders[0]
    full = compute_pleaders(pyramid, np.inf, mode='full3lambda').leaders[0]
    expected = np.maximum(np.maximum(np.roll(restricted, 1), restricted), np.roll(restricted, -1))
    assert_array_equal(full, expected)


def test_full3lambda_dominates_restricted(mrws_pyramid):
    for p in (0.5, 2.0, np.inf):
        restricted = compute_pleaders(mrws_pyramid, p)
        full = compute_pleaders(mrws_pyramid, p, mode='full3lambda')
        for r, f in zip(restricted.leaders, full.leaders):
            assert np.all(f >= r * (1 - 1e-12))


def test_full3lambda_keeps_restricted_slopes():
    law = MultiplierLaw.from_log_cumulants(0.8, -0.08)
    differences = []
    for index in range(5):
        pyramid = synthesize(CascadeSpec(kind='rwc', depth=12, law=law, seed=11), index)
        slopes = {}
        for mode in ('restricted', 'full3lambda'):
            stats = cumulants(compute_pleaders(pyramid, 1.0, mode=mode), 2)
            slopes[mode] = np.array([regress(row, stats.octaves, stats.n_j, 3, 9).slope
                                     for row in stats.C]) * np.log2(np.e)
        differences.append(slopes['full3lambda'] - slopes['restricted'])
    assert_allclose(np.mean(differences, axis=0), 0.0, atol=0.05)


def test_finest_octave_skips_fine_scales(mrws_pyramid):
    field = compute_pleaders(mrws_pyramid, 1.0, finest_octave=3)
    assert field.octaves[0] == 3
    assert len(field.leaders) == mrws_pyramid.n_octaves - 2


def test_bad_p_and_mode():
    with pytest.raises(ParameterError):
        compute_pleaders(small_pyramid(), 0.0)
    with pytest.raises(ParameterError):
        compute_pleaders(small_pyramid(), 1.0, mode='wide')


def test_gamma_values():
    assert gamma_correction(1, 0.7) == pytest.approx(1.0)
    assert gamma_correction(3, 1.0) == pytest.approx(1.75)
    assert gamma_correction(5, 0.0) == 5
    assert_allclose(gamma_correction(np.array([1, 2, 3]), 1e-10), [1, 2, 3])
    # negative eta: the tail grows instead of converging
    assert gamma_correction(2, -1.0) == pytest.approx(3.0)
    with pytest.raises(ParameterError):
        gamma_correction(0, 0.5)


def test_settled_octave():
    assert settled_octave(0.5, 0.35) == 6
    assert settled_octave(2.0, 1.4) == 2
    assert settled_octave(2.0, 2.0) == 1
    assert settled_octave(np.inf, None) == 1
    assert settled_octave(1.0, 0.0) is None
    assert settled_octave(1.0, -0.2) is None
    assert settled_octave(1.0, None) is None
    # 1 - 2**(-j * 0.35) first reaches 0.75 at j = 6
    assert 1 - 2**(-5 * 0.35) < 0.75 <= 1 - 2**(-6 * 0.35)
    with pytest.raises(ParameterError):
        settled_octave(1.0, 0.5, threshold=1.0)


def test_corrected_cumulants_equal_cumulants_of_rescaled_leaders(mrws_pyramid):
    eta_p = 0.35
    for p in (0.5, 1.0, 2.0):
        field = compute_pleaders(mrws_pyramid, p)
        stats = scaling_stats(field, (-1.0, 1.0, 2.0), 3)
        corrected = correct_stats(stats, eta_p)
        rescaled = scaling_stats(correct_pleaders(field, eta_p), (-1.0, 1.0, 2.0), 3)
        assert_allclose(corrected.C, rescaled.C, rtol=0, atol=1e-12)
        assert_allclose(corrected.S, rescaled.S, rtol=1e-12)
        assert_array_equal(corrected.C[1:], stats.C[1:])
        assert corrected.eta_used == eta_p


def test_inf_correction_is_identity(fbm_pyramid):
    field = compute_pleaders(fbm_pyramid, np.inf)
    stats = scaling_stats(field, (-2.0, 1.0, 2.0), 3)
    corrected = correct_stats(stats, 0.4)
    assert_array_equal(corrected.S, stats.S)
    assert_array_equal(corrected.C, stats.C)
    assert corrected.eta_used is None
    assert correct_pleaders(field, 0.4) is field


def test_correct_structure_and_cumulants_formulas():
    octaves = np.arange(1, 5)
    gamma = gamma_correction(octaves, 0.5)
    S = np.ones((2, 4))
    out = correct_structure(S, 0.5, 2.0, (1.0, 4.0), octaves)
    assert_allclose(out[0], gamma ** -0.5)
    assert_allclose(out[1], gamma ** -2.0)
    C = np.zeros((2, 4))
    out = correct_cumulants(C, 0.5, 2.0, octaves)
    assert_allclose(out[0], -np.log(gamma) / 2)
    assert_array_equal(out[1], 0.0)


def test_log_structure_correction_matches_linear():
    octaves = np.arange(1, 7)
    q = (-2.0, -0.5, 1.0, 3.0)
    S = np.exp(make_rng(4).standard_normal((4, 6)))
    for p in (0.5, 2.0, np.inf):
        linear = correct_structure(S, 0.6, p, q, octaves)
        logged = correct_log_structure(np.log2(S), 0.6, p, q, octaves)
        assert_allclose(logged, np.log2(linear), rtol=0, atol=1e-12)


def test_corrections_agree_through_the_generating_function(mrws_pyramid):
    q = (-1.0, -0.5, 0.5, 1.0, 2.0)
    for p in (0.5, 1.0):
        stats = scaling_stats(compute_pleaders(mrws_pyramid, p), q, 2)
        corrected = correct_stats(stats, 0.35)
        shift = (corrected.log2_S - stats.log2_S) * np.log(2.0)
        expected = np.outer(q, corrected.C[0] - stats.C[0])
        assert_allclose(shift, expected, rtol=0, atol=1e-12)


def test_structure_function_and_zero_handling():
    field = PLeaderField(p=1.0, mode='restricted',
                         leaders=(np.array([1.0, 2.0, 0.0, 4.0]), np.array([3.0, 5.0])))
    stats = structure_function(field, (1.0, 2.0))
    assert_allclose(stats.S[:, 1], [4.0, 17.0])
    with pytest.raises(DegenerateValueError) as info:
        structure_function(field, (-1.0,))
    assert info.value.count == 1
    with pytest.raises(DegenerateValueError):
        cumulants(field)


def test_cumulants_drop_a_few_zeros():
    values = np.exp(np.linspace(-1, 1, 400))
    values[7] = 0.0
    field = PLeaderField(p=1.0, mode='restricted', leaders=(values, np.ones(200)))
    stats = cumulants(field, 2)
    assert stats.dropped[0] == 1
    assert stats.warnings
    assert_allclose(stats.C[0, 0], np.mean(np.log(np.delete(values, 7))))


def test_lognormal_cumulants_converge():
    rng = make_rng(8)
    n, mu, sigma = 2**16, -0.3, 0.7
    field = PLeaderField(p=1.0, mode='restricted', leaders=(
        np.exp(rng.normal(mu, sigma, n)), np.exp(rng.normal(mu + 0.5, sigma, n // 2))))
    stats = cumulants(field, 3)
    for col, (mean, size) in enumerate([(mu, n), (mu + 0.5, n // 2)]):
        assert abs(stats.C[0, col] - mean) < 4 * sigma / np.sqrt(size)
        assert abs(stats.C[1, col] - sigma**2) < 4 * sigma**2 * np.sqrt(2 / size)
        assert abs(stats.C[2, col]) < 4 * np.sqrt(6 * sigma**6 / size)


def test_two_point_field_uses_unbiased_cumulants():
    a, b = 0.5, 4.0
    field = PLeaderField(p=1.0, mode='restricted',
                         leaders=(np.array([a, b, a, b]), np.array([a, b])))
    stats = cumulants(field, 3)
    d = np.log(a) - np.log(b)
    assert_allclose(stats.C[0], (np.log(a) + np.log(b)) / 2)
    # sample variance with the n - 1 denominator
    assert_allclose(stats.C[1], [d**2 / 3, d**2 / 2])
    assert_allclose(stats.C[2, 0], 0.0, atol=1e-12)


def test_log_structure_function_matches_cumulant_expansion():
    rng = make_rng(9)
    n = 2**16
    field = PLeaderField(p=1.0, mode='restricted', leaders=(
        np.exp(rng.normal(0.4, 0.6, n)), np.exp(rng.normal(0.1, 0.5, n // 2))))
    q = np.array([-0.2, -0.1, 0.1, 0.2])
    stats = scaling_stats(field, q, 3)
    C = stats.C
    series = np.outer(q, C[0]) + np.outer(q**2 / 2, C[1]) + np.outer(q**3 / 6, C[2])
    assert_allclose(stats.log2_S * np.log(2.0), series, rtol=0, atol=1e-5)


def test_huge_magnitudes_stay_finite():
    field = PLeaderField(p=1.0, mode='restricted',
                         leaders=(np.full(4, 1e200), np.full(2, 1e-200)))
    stats = structure_function(field, (-5.0, 5.0))
    assert_allclose(stats.log2_S[:, 0], [-5 * 200 * np.log2(10), 5 * 200 * np.log2(10)])
    assert np.all(np.isfinite(stats.log2_S))

    values = synth_fbm(0.7, 2**12, seed=6).values
    base = dwt(Signal(values), 3)
    scaled = dwt(Signal(values * 1e17), 3)
    eta = estimate_eta(base)
    eta_scaled = estimate_eta(scaled)
    assert_allclose(eta_scaled.eta, eta.eta, rtol=0, atol=1e-8)
    assert estimate_p0(eta_scaled.p_grid, eta_scaled.eta).value == \
        estimate_p0(eta.p_grid, eta.eta).value
    analysis = analyze_pyramid(scaled, p_list=(1.0, np.inf), q_grid=(-2.0, 2.0), m_max=2)
    assert all(np.all(np.isfinite(r.corrected_stats.log2_S)) for r in analysis.results)


def test_coefficient_structure_function_needs_nonnegative_q(fbm_pyramid):
    with pytest.raises(ParameterError):
        structure_function(fbm_pyramid, (-1.0,))


def test_regress_exact_line_and_errors():
    octaves = np.arange(1, 9)
    fit = regress(2.0 + 0.3 * octaves, octaves, 2.0 ** (10 - octaves), 2, 7)
    assert fit.slope == pytest.approx(0.3)
    assert fit.intercept == pytest.approx(2.0)
    assert fit.stderr == pytest.approx(0.0, abs=1e-12)
    assert np.isnan(regress(octaves * 1.0, octaves, np.ones(8), 3, 4).stderr)
    with pytest.raises(RegressionError):
        regress(octaves * 1.0, octaves, np.ones(8), 4, 4)
    with pytest.raises(ParameterError):
        regress(octaves * 1.0, octaves, np.ones(8), 1, 4, weights='inverse')


def test_weighting_schemes_differ_on_curved_data():
    octaves = np.arange(1, 9)
    y = octaves**2 * 0.1
    n_j = 2.0 ** (10 - octaves)
    nj = regress(y, octaves, n_j, 1, 8, 'nj').slope
    uniform = regress(y, octaves, n_j, 1, 8, 'uniform').slope
    assert uniform == pytest.approx(0.9)
    assert nj < uniform


def test_default_ranges():
    octaves = np.arange(1, 11)
    n_j = 2 ** (11 - octaves)  # 1024 .. 2
    assert default_range(octaves, n_j) == (3, 8)
    assert default_range(octaves, n_j, j1=1) == (1, 8)
    assert default_range(np.arange(1, 4), np.array([16, 8, 4])) == (1, 2)
    assert default_eta_range(octaves) == (3, 8)
    assert default_eta_range(np.arange(1, 5)) == (1, 4)


def test_p0_from_parabolic_eta():
    p = np.arange(0.25, 20.0001, 0.25)
    eta = 0.8 * p - 0.04 * p**2
    estimate = estimate_p0(p, eta)
    assert estimate.value == pytest.approx(20.0, abs=2e-3)
    assert not estimate.below_grid


def test_p0_interpolates_a_sign_change():
    p = np.array([1.0, 2.0, 3.0, 4.0])
    estimate = estimate_p0(p, np.array([0.3, 0.1, -0.1, -0.3]))
    assert estimate.value == pytest.approx(2.5, abs=1e-3)


def test_p0_infinite_and_below_grid():
    p = np.array([0.5, 1.0, 2.0])
    assert estimate_p0(p, np.array([0.1, 0.2, 0.3])).value == np.inf
    below = estimate_p0(p, np.array([-0.1, -0.2, -0.3]))
    assert below.below_grid
    assert below.value == 0.5


def test_legendre_of_parabola():
    q = np.array(LEGENDRE_Q_GRID)
    zeta = 0.8 * q - 0.04 * q**2
    spectrum = legendre(zeta, q, 1, h_grid=[0.4, 0.8])
    assert spectrum.concave
    assert_allclose(spectrum.L, [0.0, 1.0], atol=1e-3)


def test_legendre_flags_non_concave():
    q = np.linspace(-2, 2, 9)
    spectrum = legendre(0.5 * q + 0.1 * q**2, q, 1)
    assert not spectrum.concave


def test_legendre_of_linear_zeta_is_a_single_point():
    q = np.array(LEGENDRE_Q_GRID)
    spectrum = legendre(0.5 * q, q, 1)
    assert spectrum.h.size == 1
    assert spectrum.h[0] == pytest.approx(0.5)
    assert spectrum.L[0] == pytest.approx(1.0)


def test_analyze_fbm(fbm_pyramid):
    analysis = analyze_pyramid(fbm_pyramid, p_list=(1.0, 2.0, np.inf), q_grid=(-1.0, 1.0, 2.0),
                               m_max=2)
    assert analysis.p0.value == np.inf
    for result in analysis.results:
        assert result.corrected_estimate.c[0] == pytest.approx(0.7, abs=0.1)
        assert abs(result.corrected_estimate.c[1]) < 0.05
    inf = analysis.for_p(np.inf)
    assert_array_equal(inf.corrected_stats.C, inf.stats.C)
    assert_array_equal(inf.corrected_stats.S, inf.stats.S)
    assert inf.eta_p is None
    assert analysis.coefficient_estimate.c[0] == pytest.approx(0.7, abs=0.1)


def test_analyze_without_correction(fbm_pyramid):
    analysis = analyze_pyramid(fbm_pyramid, p_list=(1.0,), q_grid=(1.0,), m_max=1,
                               correction=False)
    result = analysis.results[0]
    assert result.corrected_stats is None
    assert result.corrected_estimate is None


def test_analyze_warns_at_or_above_p0():
    # eta(q) = 1 - log2(1.2**q + 0.5**q) changes sign near q = 3.57
    pyramid = synthesize(CascadeSpec(kind='dbwc1d', depth=10, weights=(1.2, 0.5)))
    analysis = analyze_pyramid(pyramid, p_list=(1.0, 5.0), q_grid=(1.0,), m_max=1)
    assert 3.4 < analysis.p0.value < 3.8
    assert not analysis.p0.below_grid
    assert not any('p0' in w for w in analysis.for_p(1.0).warnings)
    assert any('p0' in w for w in analysis.for_p(5.0).warnings)


def test_analysis_reports_truncated_signal():
    values = synth_fbm(0.7, 2**12, seed=7).values[:4000]
    pyramid = dwt(Signal(values), 3)
    assert pyramid.warnings
    analysis = analyze_pyramid(pyramid, p_list=(1.0,), q_grid=(1.0,), m_max=1)
    assert any('truncated' in w for w in analysis.warnings)

