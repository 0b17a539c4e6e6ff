"""Discrete wavelet pyramids for 1D and 2D signals.

Octave convention used everywhere in this package: octave j = 1 is the
finest scale and j grows toward coarse scales. A quantity written in the
fine-going index as "the number of available finer-or-equal scales" is
simply j here.

Coefficients are stored L1-normalized: the stored value at octave j is
2**(-j*d/2) times the output of the orthonormal fast transform, so that
|c| ~ 2**(j*h) for a signal with regularity h.

Usage:
    from lib.wavelet import Signal, dwt
    pyramid = dwt(Signal(values), n_vanishing_moments=3)
"""

import logging
from dataclasses import dataclass, field

import numpy as np
import pywt

from lib.errors import DepthError, ParameterError

logger = logging.getLogger(__name__)

# Daubechies filters supported by the transform (db1 .. db10).
MIN_VANISHING_MOMENTS = 1
MAX_VANISHING_MOMENTS = 10
DEFAULT_N_VANISHING_MOMENTS = 3

# 'periodic' keeps the transform orthonormal; 'discard_border' uses the same
# periodized transform but drops the wrapped coefficients from statistics.
BOUNDARY_POLICIES = ('periodic', 'discard_border')

INDEX_CONVENTION = 'octave 1 is the finest; j grows toward coarse scales'


def _frozen(array):
    array = np.array(array, dtype=float)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class Signal:
    """Uniformly sampled 1D series or 2D image."""

    values: np.ndarray
    sample_period: float = 1.0

    def __post_init__(self):
        values = _frozen(self.values)
        if values.ndim not in (1, 2):
            raise ParameterError(f'signal must be 1D or 2D, got {values.ndim} dimensions')
        if values.size == 0:
            raise ParameterError('signal is empty')
        if not np.all(np.isfinite(values)):
            raise ParameterError('signal contains non-finite values')
        if not self.sample_period > 0:
            raise ParameterError(f'sample_period must be > 0, got {self.sample_period}')
        object.__setattr__(self, 'values', values)

    @property
    def dimension(self):
        return self.values.ndim

    @property
    def shape(self):
        return self.values.shape


@dataclass(frozen=True)
class WaveletPyramid:
    """Per-octave detail coefficients, L1-normalized.

    details[j - 1] holds octave j as an array of shape
    (n_subbands, *spatial_shape); spatial size halves per axis with each
    increment of j. `approximation` is the coarsest low-pass array (the
    root value 1 for synthesized cascades), same normalization.

    `border` is the number of coefficients dropped at each end of every
    axis when statistics are computed (0 for the periodic policy).
    """

    details: tuple
    approximation: np.ndarray
    n_vanishing_moments: int | None = DEFAULT_N_VANISHING_MOMENTS
    boundary_policy: str = 'periodic'
    border: int = 0
    warnings: tuple = ()
    normalization: str = field(default='L1', init=False)

    def __post_init__(self):
        details = tuple(_frozen(d) for d in self.details)
        if not details:
            raise DepthError('pyramid has no octaves', max_depth=0)
        dim = details[0].ndim - 1
        if dim not in (1, 2):
            raise ParameterError(f'octave arrays must be (subbands, *spatial), got ndim {dim + 1}')
        n_subbands = 2**dim - 1
        for j, octave in enumerate(details, start=1):
            if octave.ndim != dim + 1 or octave.shape[0] != n_subbands:
                raise ParameterError(
                    f'octave {j}: expected {n_subbands} subband(s) of dimension {dim}, '
                    f'got shape {octave.shape}')
            if octave.shape[1:] and min(octave.shape[1:]) == 0:
                raise DepthError(f'octave {j} is empty', max_depth=j - 1)
            if j > 1:
                finer = details[j - 2].shape[1:]
                if tuple(n // 2 for n in finer) != octave.shape[1:]:
                    raise ParameterError(
                        f'octave {j} shape {octave.shape[1:]} is not half of {finer}')
            if not np.all(np.isfinite(octave)):
                raise ParameterError(f'octave {j} has non-finite coefficients')
        if self.boundary_policy not in BOUNDARY_POLICIES:
            raise ParameterError(f'unknown boundary policy {self.boundary_policy!r}')
        if self.border < 0:
            raise ParameterError(f'border must be >= 0, got {self.border}')
        object.__setattr__(self, 'details', details)
        object.__setattr__(self, 'warnings', tuple(self.warnings))
        object.__setattr__(self, 'approximation', _frozen(self.approximation))

    @property
    def dimension(self):
        return self.details[0].ndim - 1

    @property
    def n_octaves(self):
        return len(self.details)

    @property
    def n_subbands(self):
        return self.details[0].shape[0]

    @property
    def octaves(self):
        return np.arange(1, self.n_octaves + 1)

    def octave(self, j):
        """Coefficient array (n_subbands, *spatial) of octave j (1-based)."""
        if not 1 <= j <= self.n_octaves:
            raise DepthError(f'octave {j} outside 1..{self.n_octaves}', max_depth=self.n_octaves)
        return self.details[j - 1]


def trim_border(array, border, n_lead=0):
    """Drop `border` entries at both ends of every spatial axis.

    The first `n_lead` axes (subbands) are left alone. Axes too short to
    lose 2*border entries keep their middle entry.
    """
    if border <= 0:
        return array
    index = [slice(None)] * n_lead
    for n in array.shape[n_lead:]:
        if n > 2 * border:
            index.append(slice(border, n - border))
        else:
            index.append(slice(n // 2, n // 2 + 1))
    return array[tuple(index)]


def daubechies_filter(n_vanishing_moments):
    """Orthonormal Daubechies analysis pair (low-pass, high-pass).

    Taps come from PyWavelets' db<N> wavelet, in analysis (decomposition)
    order; the synthesis low-pass is the reversed analysis low-pass.
    """
    n = n_vanishing_moments
    if not isinstance(n, (int, np.integer)) or not (
            MIN_VANISHING_MOMENTS <= n <= MAX_VANISHING_MOMENTS):
        raise ParameterError(
            f'n_vanishing_moments must be an integer in '
            f'{MIN_VANISHING_MOMENTS}..{MAX_VANISHING_MOMENTS}, got {n!r}')
    wavelet = pywt.Wavelet(f'db{int(n)}')
    return np.array(wavelet.dec_lo), np.array(wavelet.dec_hi)


def max_depth(shape, n_vanishing_moments):
    """Deepest decomposition keeping at least one filter length per axis."""
    filter_len = 2 * n_vanishing_moments
    n = min(shape)
    depth = 0
    while n // 2**(depth + 1) >= filter_len:
        depth += 1
    return depth


def usable_shape(shape, n_octaves):
    """Largest shape with every axis a multiple of 2**n_octaves."""
    step = 2**n_octaves
    return tuple(n - n % step for n in shape)


def dwt(signal, n_vanishing_moments=DEFAULT_N_VANISHING_MOMENTS, max_octaves=None,
        boundary_policy='periodic'):
    """Decompose a Signal into an L1-normalized WaveletPyramid.

    The transform is PyWavelets' periodized Mallat scheme (separable 3-subband
    in 2D: horizontal, vertical, diagonal). Axes whose length is not a
    multiple of 2**J are truncated at the end; the message is logged and kept
    in `WaveletPyramid.warnings`.
    """
    if boundary_policy not in BOUNDARY_POLICIES:
        raise ParameterError(f'unknown boundary policy {boundary_policy!r}')
    daubechies_filter(n_vanishing_moments)  # range check
    feasible = max_depth(signal.shape, n_vanishing_moments)
    depth = feasible if max_octaves is None else int(max_octaves)
    if depth < 1 or depth > feasible:
        raise DepthError(
            f'{depth} octaves requested but shape {signal.shape} with '
            f'{n_vanishing_moments} vanishing moments supports at most {feasible}',
            max_depth=feasible)

    shape = usable_shape(signal.shape, depth)
    # pywt needs a writable buffer; Signal values are frozen
    values = np.array(signal.values)
    warnings = ()
    if shape != signal.shape:
        message = (f'signal truncated from {signal.shape} to {shape} samples '
                   f'(multiple of 2**{depth})')
        logger.warning(message)
        warnings = (message,)
        values = values[tuple(slice(0, n) for n in shape)]

    name = f'db{int(n_vanishing_moments)}'
    d = signal.dimension
    if d == 1:
        coeffs = pywt.wavedec(values, name, mode='periodization', level=depth)
        # wavedec returns [cA_J, cD_J, ..., cD_1]
        raw = [np.asarray(c)[np.newaxis] for c in coeffs[:0:-1]]
    else:
        coeffs = pywt.wavedec2(values, name, mode='periodization', level=depth)
        raw = [np.stack(bands) for bands in coeffs[:0:-1]]
    details = tuple(c * 2.0**(-j * d / 2) for j, c in enumerate(raw, start=1))
    approximation = np.asarray(coeffs[0]) * 2.0**(-depth * d / 2)

    border = 2 * n_vanishing_moments if boundary_policy == 'discard_border' else 0
    return WaveletPyramid(details=details, approximation=approximation,
                          n_vanishing_moments=int(n_vanishing_moments),
                          boundary_policy=boundary_policy, border=border,
                          warnings=warnings)


def l2_energy(pyramid):
    """Sum of squared orthonormal coefficients (details plus approximation)."""
    d = pyramid.dimension
    total = sum(np.sum((c * 2.0**(j * d / 2))**2)
                for j, c in enumerate(pyramid.details, start=1))
    return total + np.sum((pyramid.approximation * 2.0**(pyramid.n_octaves * d / 2))**2)
