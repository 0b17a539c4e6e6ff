"""Time-domain test processes: fBm, multifractal random walk, alpha-stable Levy.

Gaussian stages use exact circulant-embedding synthesis. Every synthesizer
is deterministic given (seed, realization index), see lib/rng.py.

fractional_integrate() moves the critical Lebesgue index p0 of any of
them: integrating with order s raises eta(p) by s*p.
"""

import logging
from dataclasses import dataclass

import numpy as np

from lib.errors import ParameterError, SpecError
from lib.mfa import DEFAULT_P0_GRID, estimate_eta
from lib.rng import make_rng
from lib.wavelet import DEFAULT_N_VANISHING_MOMENTS, Signal, dwt

logger = logging.getLogger(__name__)

PROCESS_KINDS = ('fbm', 'mrw', 'levy')
MIN_LENGTH = 2**10

# Circulant embedding starts at 2N and doubles this many times before giving up.
EMBEDDING_RETRIES = 3
# Negative eigenvalues smaller than this fraction of the largest are rounding noise.
EIGEN_CLIP = 1e-8


def fgn_autocovariance(H):
    """Unit-variance fractional Gaussian noise autocovariance r(k)."""

    def r(k):
        k = np.abs(np.asarray(k, dtype=float))
        return 0.5 * (np.abs(k - 1) ** (2 * H) - 2 * k ** (2 * H) + (k + 1) ** (2 * H))

    return r


def log_autocovariance(lam, integral_scale):
    """lambda**2 * ln+(L / (|k| + 1)), the MRW log-volatility covariance."""

    def r(k):
        k = np.abs(np.asarray(k, dtype=float))
        return lam**2 * np.log(np.maximum(integral_scale / (k + 1), 1.0))

    return r


def circulant_gaussian(autocovariance, n, rng):
    """One stationary Gaussian sample of length n with the given autocovariance.

    Davies-Harte / Wood-Chan embedding of size M = 2n (doubled when the
    circulant has significantly negative eigenvalues).
    """
    m = 2 * n
    for _ in range(EMBEDDING_RETRIES + 1):
        half = m // 2
        lags = np.concatenate([np.arange(half + 1), np.arange(half - 1, 0, -1)])
        eigenvalues = np.fft.fft(autocovariance(lags)).real
        smallest, largest = eigenvalues.min(), eigenvalues.max()
        if smallest >= -EIGEN_CLIP * largest:
            eigenvalues = np.clip(eigenvalues, 0.0, None)
            z = rng.standard_normal(m) + 1j * rng.standard_normal(m)
            return np.fft.fft(np.sqrt(eigenvalues / m) * z).real[:n]
        logger.info('Circulant embedding of size %d not positive (min eigenvalue %.3g); '
                    'doubling', m, smallest)
        m *= 2
    raise ParameterError(f'circulant embedding not positive definite up to size {m // 2}')


def _check_length(n):
    if int(n) < MIN_LENGTH:
        raise ParameterError(f'process length must be >= {MIN_LENGTH}, got {n}')
    return int(n)


def fgn(H, n, rng):
    if not 0 < H < 1:
        raise ParameterError(f'H must be in (0, 1), got {H}')
    return circulant_gaussian(fgn_autocovariance(H), n, rng)


def synth_fbm(H, n, seed, index=0):
    """fBm as the cumulative sum of unit-variance fGn."""
    n = _check_length(n)
    return Signal(np.cumsum(fgn(H, n, make_rng(seed, index))))


def synth_mrw(H, lam, n, seed, index=0, integral_scale=None):
    """Multifractal random walk: cumulative sum of fGn(H) * exp(omega).

    omega is Gaussian with covariance lambda**2 ln+(L / (|i - j| + 1)) and mean
    -lambda**2 ln L, so that E[exp(2 omega)] = 1. The integral scale L
    defaults to n.
    """
    n = _check_length(n)
    if lam < 0:
        raise ParameterError(f'lambda must be >= 0, got {lam}')
    L = float(n if integral_scale is None else integral_scale)
    rng = make_rng(seed, index)
    noise = fgn(H, n, rng)
    if lam == 0:
        return Signal(np.cumsum(noise))
    omega = circulant_gaussian(log_autocovariance(lam, L), n, rng) - lam**2 * np.log(L)
    return Signal(np.cumsum(noise * np.exp(omega)))


def stable_increments(alpha, size, rng):
    """Symmetric alpha-stable draws by the Chambers-Mallows-Stuck transform."""
    if not 0 < alpha <= 2:
        raise ParameterError(f'alpha must be in (0, 2], got {alpha}')
    v = rng.uniform(-np.pi / 2, np.pi / 2, size)
    w = rng.exponential(1.0, size)
    if alpha == 1:
        return np.tan(v)
    return (np.sin(alpha * v) / np.cos(v) ** (1 / alpha)
            * (np.cos(v - alpha * v) / w) ** ((1 - alpha) / alpha))


def synth_levy(alpha, n, seed, index=0):
    """Symmetric alpha-stable Levy process (cumulative sum of i.i.d. increments)."""
    n = _check_length(n)
    return Signal(np.cumsum(stable_increments(alpha, n, make_rng(seed, index))))


def fractional_integrate(signal, s):
    """Fourier multiplier |omega|**(-s); the zero frequency is left unchanged.

    Negative s differentiates. s = 0 returns the input values.
    """
    if s == 0:
        return Signal(signal.values.copy(), signal.sample_period)
    x = signal.values
    spectrum = np.fft.fftn(x)
    grids = np.meshgrid(*[2 * np.pi * np.fft.fftfreq(n) for n in x.shape], indexing='ij')
    radius = np.sqrt(sum(g**2 for g in grids))
    multiplier = np.ones_like(radius)
    nonzero = radius > 0
    multiplier[nonzero] = radius[nonzero] ** (-s)
    return Signal(np.fft.ifftn(spectrum * multiplier).real, signal.sample_period)


def tune_fractional_order(signal, target_p0, n_vanishing_moments=DEFAULT_N_VANISHING_MOMENTS,
                          p_grid=DEFAULT_P0_GRID):
    """Integration order s putting p0 of the integrated signal at target_p0.

    eta(p) moves to eta(p) + s*p, so s = -eta(target)/target with eta
    estimated on the base signal and interpolated on p_grid.
    """
    if not 0 < target_p0 < np.inf:
        raise ParameterError(f'target p0 must be finite and > 0, got {target_p0}')
    eta = estimate_eta(dwt(signal, n_vanishing_moments), p_grid)
    return -eta.at(target_p0) / target_p0


@dataclass(frozen=True)
class ProcessSpec:
    """Process kind, parameters, length, seed and fractional integration order.

    `frac_int_order` is applied after synthesis; `target_p0` (if set) is
    turned into an order per realization with tune_fractional_order and
    replaces frac_int_order.
    """

    kind: str
    n: int = 2**15
    H: float = 0.7
    lam: float = 0.0
    alpha: float = 1.5
    seed: int = 0
    frac_int_order: float = 0.0
    target_p0: float | None = None
    integral_scale: float | None = None

    def __post_init__(self):
        if self.kind not in PROCESS_KINDS:
            raise SpecError(f'unknown process kind {self.kind!r}; use one of {PROCESS_KINDS}')
        _check_length(self.n)
        if self.kind in ('fbm', 'mrw') and not 0 < self.H < 1:
            raise ParameterError(f'H must be in (0, 1), got {self.H}')
        if self.kind == 'levy' and not 0 < self.alpha <= 2:
            raise ParameterError(f'alpha must be in (0, 2], got {self.alpha}')
        if self.kind == 'mrw' and self.lam < 0:
            raise ParameterError(f'lambda must be >= 0, got {self.lam}')

    def synthesize(self, index=0):
        """Realization `index`, fractionally integrated as requested, and the order used."""
        if self.kind == 'fbm':
            base = synth_fbm(self.H, self.n, self.seed, index)
        elif self.kind == 'mrw':
            base = synth_mrw(self.H, self.lam, self.n, self.seed, index, self.integral_scale)
        else:
            base = synth_levy(self.alpha, self.n, self.seed, index)
        order = self.frac_int_order
        if self.target_p0 is not None:
            order = tune_fractional_order(base, self.target_p0)
        return fractional_integrate(base, order), order

    def truth(self, s=None):
        """Analytic log-cumulants (c1, c2, c3) after integration of order s.

        For intermittent MRW, c1 = H + lambda**2/2 holds only while 2H - lambda**2 > 1;
        outside that range the value is returned with a logged warning.
        """
        s = self.frac_int_order if s is None else s
        if self.kind == 'fbm':
            return np.array([self.H + s, 0.0, 0.0])
        if self.kind == 'mrw':
            if self.lam > 0 and 2 * self.H - self.lam**2 <= 1:
                logger.warning('MRW truth assumes 2H - lambda**2 > 1; got H = %g, lambda = %g',
                               self.H, self.lam)
            return np.array([self.H + self.lam**2 / 2 + s, -self.lam**2, 0.0])
        return np.array([1.0 / self.alpha + s, 0.0, 0.0])
