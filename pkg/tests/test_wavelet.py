import numpy as np
import pytest
from numpy.testing import assert_allclose

from lib.errors import DepthError, ParameterError
from lib.processes import synth_fbm
from lib.rng import make_rng
from lib.wavelet import Signal, WaveletPyramid, daubechies_filter, dwt, l2_energy, max_depth

# Orthonormal db3 synthesis low-pass taps.
DB3_REC_LO = np.array([
    0.33267055295008261599851158914,
    0.80689150931109257649449360409,
    0.45987750211849157009515194215,
    -0.13501102001025458869638990670,
    -0.08544127388202666169281916918,
    0.03522629188570953660274066472,
])


def test_signal_rejects_bad_input():
    with pytest.raises(ParameterError):
        Signal(np.zeros((2, 2, 2)))
    with pytest.raises(ParameterError):
        Signal(np.array([1.0, np.nan]))
    with pytest.raises(ParameterError):
        Signal(np.ones(4), sample_period=0)


def test_db3_filter_matches_reference_taps():
    dec_lo, dec_hi = daubechies_filter(3)
    assert_allclose(dec_lo[::-1], DB3_REC_LO, atol=1e-10)
    assert_allclose(np.sum(dec_lo), np.sqrt(2), atol=1e-12)
    assert_allclose(np.sum(dec_hi), 0.0, atol=1e-12)


def test_filter_range():
    with pytest.raises(ParameterError):
        daubechies_filter(0)
    with pytest.raises(ParameterError):
        daubechies_filter(11)


def test_constant_signal_has_zero_details():
    pyramid = dwt(Signal(np.full(1024, 3.5)), 3)
    for j in pyramid.octaves:
        assert_allclose(pyramid.octave(j), 0.0, atol=1e-10)


def test_linear_ramp_interior_details_vanish():
    pyramid = dwt(Signal(np.arange(1024.0)), 2, max_octaves=3)
    for j in pyramid.octaves:
        octave = pyramid.octave(j)[0]
        n = octave.size
        assert_allclose(octave[n // 4:3 * n // 4], 0.0, atol=1e-9)


def test_energy_is_preserved_1d_and_2d():
    rng = make_rng(1)
    x = rng.standard_normal(2048)
    assert_allclose(l2_energy(dwt(Signal(x), 2)), np.sum(x**2), rtol=1e-10)
    image = rng.standard_normal((128, 128))
    pyramid = dwt(Signal(image), 2)
    assert pyramid.n_subbands == 3
    assert_allclose(l2_energy(pyramid), np.sum(image**2), rtol=1e-10)


def test_octave_one_is_finest():
    pyramid = dwt(Signal(np.arange(1024.0) ** 0.5), 2)
    sizes = [pyramid.octave(j).shape[-1] for j in pyramid.octaves]
    assert sizes[0] == 512
    assert all(a == 2 * b for a, b in zip(sizes, sizes[1:]))


def test_shift_by_dyadic_step_shifts_coefficients():
    x = make_rng(2).standard_normal(1024)
    base = dwt(Signal(x), 3, max_octaves=5)
    for j in (1, 3):
        shifted = dwt(Signal(np.roll(x, 2**j)), 3, max_octaves=5)
        assert_allclose(shifted.octave(j), np.roll(base.octave(j), 1, axis=-1), atol=1e-10)


def test_l1_normalization_scales_white_noise_coefficients():
    # Orthonormal coefficients of white noise have unit variance at every octave.
    x = make_rng(3).standard_normal(2**16)
    pyramid = dwt(Signal(x), 2, max_octaves=6)
    for j in pyramid.octaves:
        orthonormal = pyramid.octave(j) * 2.0 ** (j / 2)
        assert abs(np.var(orthonormal) - 1.0) < 0.1


def test_depth_limits():
    assert max_depth((1024,), 3) == 7
    with pytest.raises(DepthError) as info:
        dwt(Signal(np.ones(1024)), 3, max_octaves=8)
    assert info.value.max_depth == 7
    with pytest.raises(DepthError):
        dwt(Signal(np.ones(8)), 3)


def test_non_dyadic_length_is_truncated():
    pyramid = dwt(Signal(np.ones(1001)), 1, max_octaves=3)
    assert pyramid.octave(1).shape == (1, 500)
    assert len(pyramid.warnings) == 1
    assert 'truncated' in pyramid.warnings[0]
    assert dwt(Signal(np.ones(1024)), 1, max_octaves=3).warnings == ()


def test_frozen_signal_values_are_transformed():
    signal = synth_fbm(0.7, 2**12, seed=3)
    assert not signal.values.flags.writeable
    pyramid = dwt(signal, 3)
    assert pyramid.octave(1).shape == (1, 2**11)
    assert_allclose(l2_energy(pyramid), np.sum(signal.values**2), rtol=1e-10)
    assert not signal.values.flags.writeable


def test_discard_border_records_border():
    pyramid = dwt(Signal(np.ones(1024)), 3, boundary_policy='discard_border')
    assert pyramid.border == 6
    assert pyramid.boundary_policy == 'discard_border'
    with pytest.raises(ParameterError):
        dwt(Signal(np.ones(1024)), 3, boundary_policy='mirror')


def test_pyramid_validates_halving():
    with pytest.raises(ParameterError):
        WaveletPyramid(details=(np.ones((1, 8)), np.ones((1, 3))), approximation=np.ones(3))
