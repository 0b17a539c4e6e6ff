"""p-leader multifractal analysis with the finite-resolution correction.

From a WaveletPyramid this module computes p-leaders, structure functions,
log-cumulants, the wavelet scaling function eta(p), the critical Lebesgue
index p0, regression estimates and Legendre spectra.

Sign convention: octave 1 is the finest (see lib/wavelet.py), so every
exponent is the POSITIVE slope against j: zeta(q) is the slope of
log2 S(q, j), eta(p) the slope of log2 S_c(p, j), and
c_m = log2(e) * slope of C(m, j).

Finite-resolution correction: p-leaders computed from the octaves that
were actually measured miss the contribution of all scales finer than the
finest one. The missing mass is a geometric tail whose partial sum is

    gamma(j, eta) = (1 - 2**(-j*eta)) / (1 - 2**(-eta))

and the corrected statistics are
    S_bar(q, j) = S(q, j) * gamma**(-q/p)
    C_bar(1, j) = C(1, j) - ln(gamma) / p,   C_bar(m >= 2, j) = C(m, j).
eta(p) always comes from the wavelet coefficients, never from leaders.
"""

import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import optimize, special, stats

from lib.errors import DegenerateValueError, DepthError, ParameterError, RegressionError
from lib.wavelet import WaveletPyramid, trim_border

logger = logging.getLogger(__name__)

# p values analyzed by default (p = inf gives wavelet leaders).
DEFAULT_P_LIST = (0.25, 0.5, 1.0, 2.0, 5.0, np.inf)

# Leader structure functions use -5..5 step 0.25 without q = 0, whose
# value S(0, j) = 1 carries no information (zeta(0) = 0 is added back for
# the Legendre transform).
DEFAULT_Q_GRID = tuple(float(q) for q in np.arange(-5.0, 5.0001, 0.25) if q != 0)
LEGENDRE_Q_GRID = tuple(float(q) for q in np.arange(-5.0, 5.0001, 0.25))
DEFAULT_M_MAX = 3

# Regression range: j1 = 3 up to the coarsest octave with at least 8 positions.
DEFAULT_J1 = 3
MIN_COEFFS_J2 = 8
WEIGHT_SCHEMES = ('uniform', 'nj')
DEFAULT_WEIGHTS = 'nj'

LEADER_MODES = ('restricted', 'full3lambda')

# |eta| below this uses the limit gamma(j, 0) = j.
ETA_EPS = 1e-8

# Fraction of zero (or subnormal) leaders an octave may lose before logs fail.
ZERO_DROP_LIMIT = 0.01

# p grid and tolerance for p0 = sup{p : eta(p) > 0}.
DEFAULT_P0_GRID = tuple(float(p) for p in np.arange(0.25, 20.0001, 0.25))
P0_TOL = 1e-3

CONCAVITY_TOL = 1e-6
H_GRID_POINTS = 201

# Share of the limiting mass 1 / (1 - 2**(-eta)) that gamma(j, eta) must reach
# before leader log-statistics stop drifting with j.
SETTLED_MASS = 0.75


def _frozen(array):
    array = np.array(array, dtype=float)
    array.setflags(write=False)
    return array


def _check_p(p):
    if not (p > 0):
        raise ParameterError(f'p must be > 0 (or inf), got {p}')
    return float(p)


# --------------------------------------------------------------------------
# Types
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class PLeaderField:
    """p-leaders per octave, leaders[i] belonging to octave finest_octave_used + i."""

    p: float
    mode: str
    leaders: tuple
    border: int = 0
    finest_octave_used: int = 1

    def __post_init__(self):
        leaders = tuple(_frozen(a) for a in self.leaders)
        if not leaders:
            raise DepthError('leader field has no octaves', max_depth=0)
        if any(a.size == 0 for a in leaders):
            raise DepthError('leader field has an empty octave')
        if any(np.any(a < 0) for a in leaders):
            raise ParameterError('p-leaders must be non-negative')
        object.__setattr__(self, 'leaders', leaders)

    @property
    def dimension(self):
        return self.leaders[0].ndim

    @property
    def octaves(self):
        return np.arange(self.finest_octave_used, self.finest_octave_used + len(self.leaders))

    def values(self, j):
        """Leaders of octave j used in statistics (border trimmed, flattened)."""
        i = j - self.finest_octave_used
        if not 0 <= i < len(self.leaders):
            raise DepthError(f'octave {j} not in leader field {self.octaves[[0, -1]]}')
        return trim_border(self.leaders[i], self.border).ravel()

    @property
    def n_j(self):
        return np.array([self.values(j).size for j in self.octaves])


@dataclass(frozen=True)
class ScalingStats:
    """Per-octave statistics of a leader field (or of raw coefficients).

    log2_S has shape (len(q_grid), n_octaves) and is stored in the log domain
    so that large magnitudes or large |q| stay finite; `S` is 2**log2_S.
    C has shape (m_max, n_octaves) and holds natural-log cumulants C(1..m_max, j).
    """

    octaves: np.ndarray
    n_j: np.ndarray
    q_grid: np.ndarray | None = None
    log2_S: np.ndarray | None = None
    C: np.ndarray | None = None
    p: float | None = None
    source: str = 'leaders'
    finest_octave_used: int = 1
    S_corrected: bool = False
    C_corrected: bool = False
    eta_used: float | None = None
    dropped: np.ndarray | None = None
    warnings: tuple = ()

    def merge(self, other):
        """Combine an S-only and a C-only table of the same field."""
        return replace(
            self,
            q_grid=self.q_grid if self.log2_S is not None else other.q_grid,
            log2_S=self.log2_S if self.log2_S is not None else other.log2_S,
            C=self.C if self.C is not None else other.C,
            dropped=self.dropped if self.dropped is not None else other.dropped,
            warnings=self.warnings + other.warnings,
        )

    @property
    def S(self):
        if self.log2_S is None:
            return None
        with np.errstate(over='ignore'):
            return 2.0**self.log2_S


@dataclass(frozen=True)
class CorrectionFactor:
    eta_p: float
    gamma: np.ndarray
    n_octaves_below: np.ndarray


@dataclass(frozen=True)
class Regression:
    slope: float
    intercept: float
    stderr: float
    j1: int
    j2: int
    weights: str


@dataclass(frozen=True)
class EtaSamples:
    """Wavelet scaling function eta(p) sampled on p_grid."""

    p_grid: np.ndarray
    eta: np.ndarray
    stderr: np.ndarray
    j1: int
    j2: int

    def at(self, p):
        """eta at p, interpolated on the grid (exact on grid points)."""
        hit = np.flatnonzero(np.isclose(self.p_grid, p, rtol=0, atol=1e-12))
        if hit.size:
            return float(self.eta[hit[0]])
        return float(np.interp(p, self.p_grid, self.eta))


@dataclass(frozen=True)
class P0Estimate:
    """p0 estimate; with below_grid set, value is the smallest grid p (an upper bound)."""

    value: float
    below_grid: bool = False


@dataclass(frozen=True)
class LegendreSpectrum:
    h: np.ndarray
    L: np.ndarray
    concave: bool = True


@dataclass(frozen=True)
class ScalingEstimate:
    """Regression estimates from one ScalingStats table."""

    p: float | None
    q_grid: np.ndarray | None
    zeta: np.ndarray | None
    zeta_stderr: np.ndarray | None
    c: np.ndarray | None
    c_stderr: np.ndarray | None
    j1: int
    j2: int
    weights: str
    corrected: bool = False
    eta: EtaSamples | None = None
    p0: P0Estimate | None = None
    legendre: LegendreSpectrum | None = None
    warnings: tuple = ()


@dataclass(frozen=True)
class PLeaderAnalysis:
    p: float
    mode: str
    eta_p: float | None
    stats: ScalingStats
    estimate: ScalingEstimate
    corrected_stats: ScalingStats | None = None
    corrected_estimate: ScalingEstimate | None = None
    warnings: tuple = ()


@dataclass(frozen=True)
class Analysis:
    """Everything analyze_pyramid produces for one input."""

    eta: EtaSamples
    p0: P0Estimate
    results: tuple
    coefficient_stats: ScalingStats
    coefficient_estimate: ScalingEstimate
    warnings: tuple = field(default=())

    def for_p(self, p):
        for result in self.results:
            if result.p == p:
                return result
        raise KeyError(p)


# --------------------------------------------------------------------------
# p-leaders
# --------------------------------------------------------------------------

def _block_reduce(array, how):
    """Combine each 2 (1D) or 2x2 (2D) block of children into its parent."""
    if array.ndim == 1:
        blocks = array.reshape(-1, 2)
        axes = 1
    else:
        n1, n2 = array.shape
        blocks = array.reshape(n1 // 2, 2, n2 // 2, 2)
        axes = (1, 3)
    return blocks.max(axis=axes) if how == 'max' else blocks.sum(axis=axes)


def _neighborhood(array, how):
    """Sum (or max) over the 3**d neighbors of every position, with wraparound."""
    shifts = (-1, 0, 1)
    if array.ndim == 1:
        shifted = [np.roll(array, s) for s in shifts]
    else:
        shifted = [np.roll(array, (s1, s2), axis=(0, 1)) for s1 in shifts for s2 in shifts]
    stack = np.stack(shifted)
    return stack.max(axis=0) if how == 'max' else stack.sum(axis=0)


def compute_pleaders(pyramid, p, mode='restricted', finest_octave=1):
    """p-leaders of a pyramid.

    Restricted sums are built fine to coarse:
        R_j = 2**(-d) * (sum of the 2**d children R_{j-1}) + sum_i |c_j|**p
    and l = R**(1/p). full3lambda adds up the 3**d neighboring restricted sums.
    For p = inf every sum becomes a max (wavelet leaders).
    Octaves finer than `finest_octave` are ignored.
    """
    p = _check_p(p)
    if mode not in LEADER_MODES:
        raise ParameterError(f'mode must be one of {LEADER_MODES}, got {mode!r}')
    if not 1 <= finest_octave <= pyramid.n_octaves:
        raise DepthError(f'finest_octave {finest_octave} outside 1..{pyramid.n_octaves}',
                         max_depth=pyramid.n_octaves)

    d = pyramid.dimension
    how = 'max' if np.isinf(p) else 'sum'
    restricted = []
    previous = None
    for j in range(finest_octave, pyramid.n_octaves + 1):
        magnitude = np.abs(pyramid.octave(j))
        own = magnitude.max(axis=0) if how == 'max' else np.sum(magnitude**p, axis=0)
        if previous is None:
            current = own
        elif how == 'max':
            current = np.maximum(_block_reduce(previous, 'max'), own)
        else:
            current = 2.0**(-d) * _block_reduce(previous, 'sum') + own
        restricted.append(current)
        previous = current

    if mode == 'full3lambda':
        sums = [_neighborhood(r, how) for r in restricted]
    else:
        sums = restricted
    leaders = sums if how == 'max' else [s**(1.0 / p) for s in sums]
    return PLeaderField(p=p, mode=mode, leaders=tuple(leaders), border=pyramid.border,
                        finest_octave_used=finest_octave)


# --------------------------------------------------------------------------
# Structure functions and cumulants
# --------------------------------------------------------------------------

def _coefficient_magnitudes(pyramid, j):
    """|c| of octave j as (n_subbands, n_positions), border trimmed."""
    c = trim_border(pyramid.octave(j), pyramid.border, n_lead=1)
    return np.abs(c).reshape(c.shape[0], -1)


def structure_function(source, q_grid):
    """S(q, j) = mean over positions of l**q (or of sum_i |c|**q for a pyramid).

    Evaluated as a log-sum-exp of q ln|value|; the result holds log2 S.
    """
    q = np.atleast_1d(np.asarray(q_grid, dtype=float))
    is_pyramid = isinstance(source, WaveletPyramid)
    if is_pyramid and np.any(q < 0):
        raise ParameterError('coefficient structure functions need q >= 0')
    octaves = source.octaves
    log2_S = np.empty((q.size, octaves.size))
    n_j = np.empty(octaves.size, dtype=int)
    for col, j in enumerate(octaves):
        if is_pyramid:
            values = _coefficient_magnitudes(source, j)
        else:
            values = source.values(j)[np.newaxis]
        n_j[col] = values.shape[1]
        if np.any(q <= 0):
            zeros = int(np.count_nonzero(values == 0))
            if zeros:
                raise DegenerateValueError(
                    f'{zeros} zero value(s) at octave {j} with q <= 0 in the grid', count=zeros)
        with np.errstate(divide='ignore'):
            logs = np.log(values).ravel()
        for row, qk in enumerate(q):
            log2_S[row, col] = (special.logsumexp(qk * logs) - np.log(n_j[col])) / np.log(2.0)
    return ScalingStats(
        octaves=octaves, n_j=n_j, q_grid=q, log2_S=log2_S,
        p=None if is_pyramid else source.p,
        source='coefficients' if is_pyramid else 'leaders',
        finest_octave_used=1 if is_pyramid else source.finest_octave_used,
    )


def _log_cumulants(values, m_max):
    logs = np.log(values)
    centered = logs - logs.mean()
    out = [logs.mean()]
    for m in range(2, m_max + 1):
        out.append(stats.kstat(centered, m) if logs.size >= m else np.nan)
    return out


def cumulants(source, m_max=DEFAULT_M_MAX):
    """Natural-log cumulants C(m, j), m = 1..m_max.

    C(1) is the mean of ln l, C(2) and C(3) are the unbiased k-statistics.
    Zero or subnormal values are dropped first; more than ZERO_DROP_LIMIT of
    an octave is an error. A pyramid source gives the cumulants of ln |c|
    over all subbands.
    """
    if not 1 <= m_max <= 3:
        raise ParameterError(f'm_max must be 1..3, got {m_max}')
    is_pyramid = isinstance(source, WaveletPyramid)
    octaves = source.octaves
    C = np.empty((m_max, octaves.size))
    n_j = np.empty(octaves.size, dtype=int)
    dropped = np.zeros(octaves.size, dtype=int)
    notes = []
    for col, j in enumerate(octaves):
        if is_pyramid:
            magnitudes = _coefficient_magnitudes(source, j)
            n_j[col] = magnitudes.shape[1]
            values = magnitudes.ravel()
        else:
            values = source.values(j)
            n_j[col] = values.size
        keep = values > np.finfo(float).tiny
        lost = values.size - int(np.count_nonzero(keep))
        if lost > ZERO_DROP_LIMIT * values.size:
            raise DegenerateValueError(
                f'{lost} of {values.size} values at octave {j} are zero', count=lost)
        if lost:
            message = f'dropped {lost} zero value(s) at octave {j}'
            logger.warning(message.capitalize())
            notes.append(message)
        dropped[col] = lost
        C[:, col] = _log_cumulants(values[keep], m_max)
    return ScalingStats(
        octaves=octaves, n_j=n_j, C=C, dropped=dropped,
        p=None if is_pyramid else source.p,
        source='coefficients' if is_pyramid else 'leaders',
        finest_octave_used=1 if is_pyramid else source.finest_octave_used,
        warnings=tuple(notes),
    )


def scaling_stats(field_, q_grid=DEFAULT_Q_GRID, m_max=DEFAULT_M_MAX):
    """Structure functions and cumulants of one leader field."""
    return structure_function(field_, q_grid).merge(cumulants(field_, m_max))


# --------------------------------------------------------------------------
# Finite-resolution correction
# --------------------------------------------------------------------------

def gamma_correction(j, eta_p):
    """gamma(j, eta) = (1 - 2**(-j*eta)) / (1 - 2**(-eta)), j finer-or-equal octaves.

    Vectorized over j; gamma(j, 0) = j.
    """
    j = np.asarray(j, dtype=float)
    if np.any(j < 1):
        raise ParameterError('gamma needs at least one finer-or-equal octave')
    if abs(eta_p) < ETA_EPS:
        return j.copy() if j.ndim else float(j)
    x = -eta_p * np.log(2.0)
    gamma = np.expm1(j * x) / np.expm1(x)
    return gamma if gamma.ndim else float(gamma)


def settled_octave(p, eta_p, threshold=SETTLED_MASS):
    """Smallest j with 1 - 2**(-j*eta(p)) >= threshold.

    Below this octave the leaders still average over too few finer scales:
    the correction restores the mean of ln l but not its narrowed spread, so
    C(m >= 2, j) keeps drifting there. Returns 1 for p = inf (no averaging)
    and None when eta(p) <= 0 or is unknown.
    """
    if not 0 < threshold < 1:
        raise ParameterError(f'threshold must lie in (0, 1), got {threshold}')
    if np.isinf(p):
        return 1
    if eta_p is None or not eta_p > 0:
        return None
    j = np.log2(1.0 / (1.0 - threshold)) / eta_p
    return max(1, int(np.ceil(j - 1e-12)))


def correction_factor(octaves, eta_p, finest_octave_used=1):
    n_below = np.asarray(octaves) - finest_octave_used + 1
    return CorrectionFactor(eta_p=float(eta_p),
                            gamma=np.atleast_1d(gamma_correction(n_below, eta_p)),
                            n_octaves_below=n_below)


def correct_structure(S, eta_p, p, q_grid, octaves, finest_octave_used=1):
    """S_bar(q, j) = S(q, j) * gamma(j, eta(p))**(-q/p); identity for p = inf."""
    S = np.asarray(S, dtype=float)
    if np.isinf(p):
        return S.copy()
    gamma = correction_factor(octaves, eta_p, finest_octave_used).gamma
    q = np.asarray(q_grid, dtype=float).reshape(-1, 1)
    return S * gamma[np.newaxis, :] ** (-q / p)


def correct_log_structure(log2_S, eta_p, p, q_grid, octaves, finest_octave_used=1):
    """log2 S_bar(q, j) = log2 S(q, j) - (q/p) log2 gamma(j, eta(p)); identity for p = inf."""
    log2_S = np.array(log2_S, dtype=float)
    if np.isinf(p):
        return log2_S
    gamma = correction_factor(octaves, eta_p, finest_octave_used).gamma
    q = np.asarray(q_grid, dtype=float).reshape(-1, 1)
    return log2_S - (q / p) * np.log2(gamma)[np.newaxis, :]


def correct_cumulants(C, eta_p, p, octaves, finest_octave_used=1):
    """C_bar(1, j) = C(1, j) - ln(gamma)/p; higher orders unchanged; identity for p = inf."""
    C = np.array(C, dtype=float)
    if np.isinf(p):
        return C
    gamma = correction_factor(octaves, eta_p, finest_octave_used).gamma
    C[0] = C[0] - np.log(gamma) / p
    return C


def correct_pleaders(field_, eta_p):
    """Leaders multiplied by gamma(j, eta(p))**(-1/p) octave by octave."""
    if np.isinf(field_.p):
        return field_
    gamma = correction_factor(field_.octaves, eta_p, field_.finest_octave_used).gamma
    scaled = tuple(a * g**(-1.0 / field_.p) for a, g in zip(field_.leaders, gamma))
    return replace(field_, leaders=scaled)


def correct_stats(scaling, eta_p):
    """Apply both corrections to a leader ScalingStats table."""
    if scaling.source != 'leaders':
        raise ParameterError('only leader statistics are corrected')
    p = scaling.p
    log2_S = C = None
    if scaling.log2_S is not None:
        log2_S = correct_log_structure(scaling.log2_S, eta_p, p, scaling.q_grid,
                                       scaling.octaves, scaling.finest_octave_used)
    if scaling.C is not None:
        C = correct_cumulants(scaling.C, eta_p, p, scaling.octaves,
                              scaling.finest_octave_used)
    return replace(scaling, log2_S=log2_S, C=C, S_corrected=log2_S is not None,
                   C_corrected=C is not None,
                   eta_used=None if np.isinf(p) else float(eta_p))


# --------------------------------------------------------------------------
# Regression
# --------------------------------------------------------------------------

def default_range(octaves, n_j, j1=None, j2=None):
    """Fill in j1 = 3 and j2 = coarsest octave with n_j >= 8 when not given."""
    octaves = np.asarray(octaves)
    if j2 is None:
        enough = octaves[np.asarray(n_j) >= MIN_COEFFS_J2]
        j2 = int(enough.max()) if enough.size else int(octaves.max())
    if j1 is None:
        j1 = max(int(octaves.min()), min(DEFAULT_J1, j2 - 1))
    return int(j1), int(j2)


def default_eta_range(octaves):
    """[3, J - 2], widened to all octaves when that leaves fewer than two."""
    octaves = np.asarray(octaves)
    j1, j2 = DEFAULT_J1, int(octaves.max()) - 2
    if j2 - j1 < 1:
        return int(octaves.min()), int(octaves.max())
    return j1, j2


def regress(values, octaves, n_j, j1, j2, weights=DEFAULT_WEIGHTS):
    """Weighted least-squares line through value(j) for j1 <= j <= j2.

    weights: 'nj' (w_j proportional to n_j) or 'uniform'. The standard
    error is NaN when only two octaves are used.
    """
    if weights not in WEIGHT_SCHEMES:
        raise ParameterError(f'weights must be one of {WEIGHT_SCHEMES}, got {weights!r}')
    if j2 <= j1:
        raise RegressionError(f'empty scaling range [{j1}, {j2}]')
    x = np.asarray(octaves, dtype=float)
    y = np.asarray(values, dtype=float)
    mask = (x >= j1) & (x <= j2)
    if np.count_nonzero(mask) < 2:
        raise RegressionError(f'fewer than 2 octaves in [{j1}, {j2}]')
    x, y = x[mask], y[mask]
    if not np.all(np.isfinite(y)):
        raise RegressionError(f'non-finite values in scaling range [{j1}, {j2}]')
    w = np.asarray(n_j, dtype=float)[mask] if weights == 'nj' else np.ones_like(x)
    x_bar = np.sum(w * x) / np.sum(w)
    y_bar = np.sum(w * y) / np.sum(w)
    sxx = np.sum(w * (x - x_bar) ** 2)
    slope = np.sum(w * (x - x_bar) * (y - y_bar)) / sxx
    intercept = y_bar - slope * x_bar
    dof = x.size - 2
    if dof > 0:
        residuals = y - (intercept + slope * x)
        stderr = np.sqrt(np.sum(w * residuals**2) / dof / sxx)
    else:
        stderr = np.nan
    return Regression(slope=float(slope), intercept=float(intercept), stderr=float(stderr),
                      j1=int(j1), j2=int(j2), weights=weights)


# --------------------------------------------------------------------------
# eta(p), p0 and Legendre spectrum
# --------------------------------------------------------------------------

def estimate_eta(pyramid, p_grid=DEFAULT_P0_GRID, j1=None, j2=None, weights=DEFAULT_WEIGHTS):
    """eta(p): slope of log2 S_c(p, j) over [j1, j2] (default [3, J - 2])."""
    p_grid = np.asarray(p_grid, dtype=float)
    if np.any(p_grid < 0) or np.any(~np.isfinite(p_grid)):
        raise ParameterError('eta needs finite p >= 0')
    d1, d2 = default_eta_range(pyramid.octaves)
    j1 = d1 if j1 is None else j1
    j2 = d2 if j2 is None else j2
    sf = structure_function(pyramid, p_grid)
    eta = np.empty(p_grid.size)
    stderr = np.empty(p_grid.size)
    for row in range(p_grid.size):
        fit = regress(sf.log2_S[row], sf.octaves, sf.n_j, j1, j2, weights)
        eta[row], stderr[row] = fit.slope, fit.stderr
    return EtaSamples(p_grid=p_grid, eta=eta, stderr=stderr, j1=int(j1), j2=int(j2))


def estimate_p0(p_grid, eta):
    """p0 = sup{p : eta(p) > 0} by bisection on the interpolated eta.

    Returns inf when eta > 0 on the whole grid; flags below_grid when eta is
    already non-positive at the smallest p.
    """
    p_grid = np.asarray(p_grid, dtype=float)
    eta = np.asarray(eta, dtype=float)
    ok = np.isfinite(eta)
    p_grid, eta = p_grid[ok], eta[ok]
    if p_grid.size == 0:
        raise ParameterError('no finite eta samples')
    if np.any(np.diff(p_grid) <= 0):
        raise ParameterError('p grid must be increasing')
    if eta[0] <= 0:
        return P0Estimate(value=float(p_grid[0]), below_grid=True)
    non_positive = np.flatnonzero(eta <= 0)
    if non_positive.size == 0:
        return P0Estimate(value=np.inf)
    i = non_positive[0]
    root = optimize.bisect(lambda p: np.interp(p, p_grid, eta), p_grid[i - 1], p_grid[i],
                           xtol=P0_TOL)
    return P0Estimate(value=float(root))


def _is_concave(q, zeta):
    slopes = np.diff(zeta) / np.diff(q)
    tol = CONCAVITY_TOL * max(1.0, float(np.max(np.abs(slopes)))) if slopes.size else 0.0
    return bool(np.all(np.diff(slopes) <= tol))


def legendre(zeta, q_grid, d, h_grid=None):
    """L(h) = min_q (d + q*h - zeta(q)).

    The default h grid spans the numerical derivative range of zeta. Only
    points with L(h) >= 0 (up to rounding) are returned; a non-concave zeta
    is flagged but still transformed (the result is that of its concave hull).
    """
    q = np.asarray(q_grid, dtype=float)
    zeta = np.asarray(zeta, dtype=float)
    order = np.argsort(q)
    q, zeta = q[order], zeta[order]
    if q.size < 2:
        raise ParameterError('Legendre transform needs at least two q values')
    concave = _is_concave(q, zeta)
    if not concave:
        logger.warning('zeta(q) is not concave; Legendre spectrum is that of its concave hull')
    if h_grid is None:
        slopes = np.gradient(zeta, q)
        lo, hi = float(slopes.min()), float(slopes.max())
        if hi - lo <= CONCAVITY_TOL * max(1.0, abs(hi)):
            # linear zeta: a single h
            h = np.array([0.5 * (lo + hi)])
        else:
            h = np.linspace(lo, hi, H_GRID_POINTS)
    else:
        h = np.asarray(h_grid, dtype=float)
    L = np.min(d + np.outer(h, q) - zeta[np.newaxis, :], axis=1)
    keep = L >= -1e-9
    return LegendreSpectrum(h=h[keep], L=L[keep], concave=concave)


# --------------------------------------------------------------------------
# Estimates and the full pipeline
# --------------------------------------------------------------------------

def estimate_scaling(scaling, dimension, j1=None, j2=None, weights=DEFAULT_WEIGHTS,
                     with_legendre=True):
    """zeta(q), c_m and the Legendre spectrum from one ScalingStats table."""
    j1, j2 = default_range(scaling.octaves, scaling.n_j, j1, j2)
    zeta = zeta_se = c = c_se = spectrum = None
    notes = []
    if scaling.log2_S is not None:
        fits = [regress(row, scaling.octaves, scaling.n_j, j1, j2, weights)
                for row in scaling.log2_S]
        zeta = np.array([f.slope for f in fits])
        zeta_se = np.array([f.stderr for f in fits])
        if with_legendre:
            q = np.asarray(scaling.q_grid, dtype=float)
            if not np.any(q == 0):
                q, z = np.append(q, 0.0), np.append(zeta, 0.0)
            else:
                z = zeta
            spectrum = legendre(z, q, dimension)
            if not spectrum.concave:
                notes.append('zeta(q) is not concave; Legendre spectrum uses its concave hull')
    if scaling.C is not None:
        fits = [regress(row, scaling.octaves, scaling.n_j, j1, j2, weights)
                for row in scaling.C]
        c = np.array([f.slope for f in fits]) * np.log2(np.e)
        c_se = np.array([f.stderr for f in fits]) * np.log2(np.e)
    return ScalingEstimate(
        p=scaling.p, q_grid=scaling.q_grid, zeta=zeta, zeta_stderr=zeta_se, c=c, c_stderr=c_se,
        j1=j1, j2=j2, weights=weights, corrected=scaling.S_corrected or scaling.C_corrected,
        legendre=spectrum, warnings=tuple(notes))


def analyze_pyramid(pyramid, p_list=DEFAULT_P_LIST, q_grid=DEFAULT_Q_GRID, m_max=DEFAULT_M_MAX,
                    j1=None, j2=None, weights=DEFAULT_WEIGHTS, mode='restricted',
                    correction=True, p0_grid=DEFAULT_P0_GRID, eta_range=(None, None),
                    with_legendre=True):
    """Full pipeline: eta and p0 from coefficients, then per-p leader statistics.

    Every p gets uncorrected statistics; with `correction` it also gets the
    corrected ones (identical for p = inf). Requesting p >= p0 is allowed but
    recorded as a warning. An empty `q_grid` skips the structure functions.
    """
    if not p_list:
        raise ParameterError('p list is empty')
    eta_j1, eta_j2 = eta_range
    eta = estimate_eta(pyramid, p0_grid, eta_j1, eta_j2, weights)
    p0 = estimate_p0(eta.p_grid, eta.eta)
    notes = list(pyramid.warnings)
    if p0.below_grid:
        notes.append(f'eta(p) <= 0 already at p = {p0.value}; p0 is below the p grid')
        logger.warning(notes[-1])

    finite = [float(p) for p in p_list if np.isfinite(p)]
    eta_p = {}
    if finite:
        own = estimate_eta(pyramid, finite, eta.j1, eta.j2, weights)
        eta_p = dict(zip(finite, own.eta))

    results = []
    for p in p_list:
        p = _check_p(p)
        p_notes = []
        if np.isfinite(p0.value) and p >= p0.value:
            p_notes.append(f'p = {p} is not below the estimated p0 = {p0.value:.3g}; '
                           'p-leader estimates are not meaningful there')
            logger.warning(p_notes[-1])
        leaders = compute_pleaders(pyramid, p, mode)
        raw = scaling_stats(leaders, q_grid, m_max) if q_grid else cumulants(leaders, m_max)
        p_notes.extend(raw.warnings)
        estimate = estimate_scaling(raw, pyramid.dimension, j1, j2, weights, with_legendre)
        estimate = replace(estimate, eta=eta, p0=p0)
        corrected_stats = corrected_estimate = None
        if correction:
            corrected_stats = correct_stats(raw, eta_p.get(p, 0.0))
            corrected_estimate = replace(
                estimate_scaling(corrected_stats, pyramid.dimension, j1, j2, weights,
                                 with_legendre),
                eta=eta, p0=p0)
        results.append(PLeaderAnalysis(
            p=p, mode=mode, eta_p=eta_p.get(p), stats=raw, estimate=estimate,
            corrected_stats=corrected_stats, corrected_estimate=corrected_estimate,
            warnings=tuple(p_notes) + estimate.warnings))

    coefficient_stats = cumulants(pyramid, m_max)
    coefficient_estimate = replace(
        estimate_scaling(coefficient_stats, pyramid.dimension, j1, j2, weights),
        eta=eta, p0=p0)
    return Analysis(eta=eta, p0=p0, results=tuple(results),
                    coefficient_stats=coefficient_stats,
                    coefficient_estimate=coefficient_estimate, warnings=tuple(notes))
