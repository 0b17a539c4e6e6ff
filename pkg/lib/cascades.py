"""Wavelet-domain multiplicative cascades and their closed-form oracles.

Three constructions, all returned as WaveletPyramid objects with the root
value 1 stored as the approximation:

    DBWC  deterministic binomial wavelet cascade (1D: 2 weights, 2D: 4
          weights and 3 subband anisotropy factors)
    MRWS  multiplicative random wavelet series: every coefficient is an
          independent product of t i.i.d. multipliers
    RWC   random wavelet cascade: a tree, siblings share all but the last
          multiplier

Tree level t = 1..depth (t = 1 coarsest, 2**(d*t) coefficients) is octave
j = depth + 1 - t in the package-wide convention (octave 1 finest).

The oracles give what restricted p-leaders of these cascades must produce;
the test-suite and the benchmark compare against them.
"""

import logging
from dataclasses import dataclass

import numpy as np

from lib.errors import ParameterError, SpecError
from lib.mfa import gamma_correction
from lib.rng import make_rng
from lib.wavelet import WaveletPyramid

logger = logging.getLogger(__name__)

CASCADE_KINDS = ('dbwc1d', 'dbwc2d', 'mrws', 'rwc')
LAW_KINDS = ('deterministic', 'lognormal', 'two-point')
MIN_DEPTH = 2


def _population_cumulants(values):
    """First three cumulants of the uniform distribution on `values`."""
    centered = values - values.mean()
    return np.array([values.mean(), np.mean(centered**2), np.mean(centered**3)])


@dataclass(frozen=True)
class MultiplierLaw:
    """Law of the positive multiplier W.

    deterministic: W = weight
    lognormal:     ln W ~ N(mu, sigma2)
    two-point:     W in {w0, w1} with probability 1/2 each
    """

    kind: str
    weight: float = 1.0
    mu: float = 0.0
    sigma2: float = 0.0
    w0: float = 1.0
    w1: float = 1.0

    def __post_init__(self):
        if self.kind not in LAW_KINDS:
            raise ParameterError(f'unknown multiplier law {self.kind!r}; use one of {LAW_KINDS}')
        if self.kind == 'deterministic' and not self.weight > 0:
            raise ParameterError(f'deterministic weight must be > 0, got {self.weight}')
        if self.kind == 'lognormal' and self.sigma2 < 0:
            raise ParameterError(f'sigma2 must be >= 0, got {self.sigma2}')
        if self.kind == 'two-point' and not (self.w0 > 0 and self.w1 > 0):
            raise ParameterError(f'two-point values must be > 0, got {self.w0}, {self.w1}')

    @classmethod
    def deterministic(cls, weight):
        return cls(kind='deterministic', weight=float(weight))

    @classmethod
    def lognormal(cls, mu, sigma2):
        return cls(kind='lognormal', mu=float(mu), sigma2=float(sigma2))

    @classmethod
    def two_point(cls, w0, w1):
        return cls(kind='two-point', w0=float(w0), w1=float(w1))

    @classmethod
    def from_log_cumulants(cls, c1, c2):
        """Log-normal law with eta(q) = c1*q + c2*q**2/2 (c2 <= 0)."""
        if c2 > 0:
            raise ParameterError(f'c2 must be <= 0 for a log-normal law, got {c2}')
        return cls.lognormal(mu=-c1 * np.log(2.0), sigma2=-c2 * np.log(2.0))

    def moment(self, q):
        """E[W**q]."""
        q = np.asarray(q, dtype=float)
        if self.kind == 'deterministic':
            out = self.weight**q
        elif self.kind == 'lognormal':
            out = np.exp(q * self.mu + 0.5 * q**2 * self.sigma2)
        else:
            out = 0.5 * (self.w0**q + self.w1**q)
        return out if np.ndim(out) else float(out)

    def eta(self, q):
        """eta(q) = -log2 E[W**q]."""
        q = np.asarray(q, dtype=float)
        if self.kind == 'deterministic':
            out = -q * np.log2(self.weight)
        elif self.kind == 'lognormal':
            out = -(q * self.mu + 0.5 * q**2 * self.sigma2) / np.log(2.0)
        else:
            out = -np.log2(self.moment(q))
        return out if np.ndim(out) else float(out)

    def truth(self):
        """Exact (c1, c2, c3) of a cascade with this law: -kappa_m(ln W) / ln 2."""
        if self.kind == 'deterministic':
            kappa = np.array([np.log(self.weight), 0.0, 0.0])
        elif self.kind == 'lognormal':
            kappa = np.array([self.mu, self.sigma2, 0.0])
        else:
            kappa = _population_cumulants(np.log([self.w0, self.w1]))
        return -kappa / np.log(2.0)

    def sample(self, rng, size):
        if self.kind == 'deterministic':
            return np.full(size, self.weight)
        if self.kind == 'lognormal':
            return np.exp(rng.normal(self.mu, np.sqrt(self.sigma2), size))
        return np.where(rng.random(size) < 0.5, self.w0, self.w1)

    def sample_product(self, rng, n_factors, size):
        """Independent draws of the product of n_factors i.i.d. copies of W."""
        if self.kind == 'deterministic':
            return np.full(size, self.weight**n_factors)
        if self.kind == 'lognormal':
            return np.exp(rng.normal(n_factors * self.mu,
                                     np.sqrt(n_factors * self.sigma2), size))
        k = rng.binomial(n_factors, 0.5, size)
        return self.w1**k * self.w0**(n_factors - k)


@dataclass(frozen=True)
class CascadeSpec:
    """What to synthesize: kind, multipliers, depth and seed."""

    kind: str
    depth: int
    weights: tuple = ()
    anisotropy: tuple = (1.0, 1.0, 1.0)
    law: MultiplierLaw | None = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in CASCADE_KINDS:
            raise SpecError(f'unknown cascade kind {self.kind!r}; use one of {CASCADE_KINDS}')
        if int(self.depth) < MIN_DEPTH:
            raise ParameterError(f'cascade depth must be >= {MIN_DEPTH}, got {self.depth}')
        object.__setattr__(self, 'depth', int(self.depth))
        object.__setattr__(self, 'weights', tuple(float(w) for w in self.weights))
        object.__setattr__(self, 'anisotropy', tuple(float(a) for a in self.anisotropy))
        if self.kind.startswith('dbwc'):
            expected = 4 if self.kind == 'dbwc2d' else 2
            if len(self.weights) != expected:
                raise ParameterError(
                    f'{self.kind} needs {expected} weights, got {len(self.weights)}')
            if any(w <= 0 for w in self.weights):
                raise ParameterError(f'weights must be > 0, got {self.weights}')
            if self.kind == 'dbwc2d' and (
                    len(self.anisotropy) != 3 or any(a <= 0 for a in self.anisotropy)):
                raise ParameterError(
                    f'dbwc2d needs 3 positive anisotropy factors, got {self.anisotropy}')
        elif self.law is None:
            raise ParameterError(f'{self.kind} needs a multiplier law')

    @property
    def dimension(self):
        return 2 if self.kind == 'dbwc2d' else 1

    @property
    def alpha(self):
        return self.anisotropy if self.kind == 'dbwc2d' else (1.0,)


def _pyramid(levels, alpha):
    """Tree levels (coarsest first) to a pyramid in octave order."""
    alpha = np.asarray(alpha, dtype=float)
    details = []
    for level in reversed(levels):
        shape = (alpha.size,) + (1,) * level.ndim
        details.append(alpha.reshape(shape) * level[np.newaxis])
    root = np.ones((1,) * levels[0].ndim)
    return WaveletPyramid(details=tuple(details), approximation=root, n_vanishing_moments=None)


def synth_dbwc2d(spec):
    """2D DBWC: each parent spawns a 2x2 block of children w_m * parent."""
    if spec.kind != 'dbwc2d':
        raise ParameterError(f'synth_dbwc2d needs a dbwc2d spec, got {spec.kind}')
    w0, w1, w2, w3 = spec.weights
    block = np.array([[w0, w1], [w2, w3]])
    levels = []
    current = np.ones((1, 1))
    for _ in range(spec.depth):
        current = np.kron(current, block)
        levels.append(current)
    return _pyramid(levels, spec.anisotropy)


def synth_dbwc1d(spec):
    """1D DBWC: children w0 * parent and w1 * parent."""
    if spec.kind != 'dbwc1d':
        raise ParameterError(f'synth_dbwc1d needs a dbwc1d spec, got {spec.kind}')
    block = np.array(spec.weights)
    levels = []
    current = np.ones(1)
    for _ in range(spec.depth):
        current = np.kron(current, block)
        levels.append(current)
    return _pyramid(levels, (1.0,))


def synth_mrws(spec, index=0):
    """MRWS realization `index`: independent products, no shared ancestors."""
    if spec.kind != 'mrws':
        raise ParameterError(f'synth_mrws needs an mrws spec, got {spec.kind}')
    rng = make_rng(spec.seed, index)
    levels = [spec.law.sample_product(rng, t, 2**t) for t in range(1, spec.depth + 1)]
    return _pyramid(levels, (1.0,))


def synth_rwc(spec, index=0):
    """RWC realization `index`: c[2k] = W * c[k], c[2k+1] = W' * c[k]."""
    if spec.kind != 'rwc':
        raise ParameterError(f'synth_rwc needs an rwc spec, got {spec.kind}')
    rng = make_rng(spec.seed, index)
    levels = []
    current = np.ones(1)
    for t in range(1, spec.depth + 1):
        current = np.repeat(current, 2) * spec.law.sample(rng, 2**t)
        levels.append(current)
    return _pyramid(levels, (1.0,))


SYNTHESIZERS = {
    'dbwc1d': lambda spec, index=0: synth_dbwc1d(spec),
    'dbwc2d': lambda spec, index=0: synth_dbwc2d(spec),
    'mrws': synth_mrws,
    'rwc': synth_rwc,
}


def synthesize(spec, index=0):
    return SYNTHESIZERS[spec.kind](spec, index)


# --------------------------------------------------------------------------
# Scaling functions
# --------------------------------------------------------------------------

def dbwc_eta(weights, d):
    """eta(q) = d - log2 sum_m w_m**q, for q > 0."""
    weights = np.asarray(weights, dtype=float)
    if weights.size != 2**d:
        raise ParameterError(f'{2**d} weights expected for d = {d}, got {weights.size}')

    def eta(q):
        q = np.asarray(q, dtype=float)
        out = d - np.log2(np.sum(weights[:, np.newaxis] ** q.reshape(1, -1), axis=0))
        return out.reshape(q.shape) if q.ndim else float(out[0])

    return eta


def law_eta(law):
    """eta(q) = -log2 E[W**q] of a multiplier law."""
    return law.eta


def dbwc_truth(weights):
    """Exact (c1, c2, c3) of a DBWC: -kappa_m(ln w) / ln 2 over the equally likely weights."""
    return -_population_cumulants(np.log(np.asarray(weights, dtype=float))) / np.log(2.0)


def _tree_level(j, depth):
    if not 1 <= j <= depth:
        raise ParameterError(f'octave {j} outside 1..{depth}')
    return depth + 1 - j


def _norm_power(alpha, q):
    """||alpha||_q**q = sum_i alpha_i**q."""
    return float(np.sum(np.asarray(alpha, dtype=float) ** q))


# --------------------------------------------------------------------------
# Oracles
# --------------------------------------------------------------------------

def dbwc_coefficient_sf(weights, alpha, q, j, depth):
    """S_c(q, j) = ||alpha||_q**q * (sum w**q / 2**d)**t, t = depth + 1 - j."""
    weights = np.asarray(weights, dtype=float)
    d = 2 if weights.size == 4 else 1
    t = _tree_level(j, depth)
    return _norm_power(alpha, q) * (np.sum(weights**q) / 2**d) ** t


def oracle_dbwc_sf(weights, alpha, p, q, j, depth):
    """Restricted p-leader structure function of a DBWC, no correction applied.

    Every leader at octave j equals ||alpha||_p * d_k * gamma(j, eta(p))**(1/p),
    so S(q, j) = ||alpha||_p**q / ||alpha||_q**q * S_c(q, j) * gamma**(q/p).
    For p = inf the leader is max(alpha) * d_k * max(1, max(w))**(j - 1).
    """
    weights = np.asarray(weights, dtype=float)
    d = 2 if weights.size == 4 else 1
    coefficient_sf = dbwc_coefficient_sf(weights, alpha, q, j, depth)
    if np.isinf(p):
        lead = np.max(alpha) * max(1.0, np.max(weights)) ** (j - 1)
        return lead**q / _norm_power(alpha, q) * coefficient_sf
    gamma = gamma_correction(j, dbwc_eta(weights, d)(p))
    ratio = _norm_power(alpha, p) ** (q / p) / _norm_power(alpha, q)
    return ratio * coefficient_sf * gamma ** (q / p)


def oracle_mrws_bounds(law, p, n, j, depth):
    """(b_S, B_S) bounding E S(np, j) / (E S_c(np, j) * gamma(j, eta(p))**n) for an MRWS.

    b_S = 2**(-t*(n*eta(p) - eta(n*p))) with t = depth + 1 - j, and
    B_S = gamma(j, eta(n*p)/n)**n / gamma(j, eta(p))**n. Both equal 1 when
    eta is linear or n = 1.
    """
    if n < 1:
        raise ParameterError(f'n must be >= 1, got {n}')
    t = _tree_level(j, depth)
    eta_p, eta_np = law.eta(p), law.eta(n * p)
    lower = 2.0 ** (-t * (n * eta_p - eta_np))
    upper = (gamma_correction(j, eta_np / n) / gamma_correction(j, eta_p)) ** n
    return float(lower), float(upper)


def mrws_exact_ratio(law, p, j, depth):
    """Exact E S(2p, j) / (E S_c(2p, j) * gamma(j, eta(p))**2) for an MRWS.

    A leader's p-th power at tree level t sums 2**(-s) c_u**p over the 2**s
    descendants u at s levels below, all independent; only identical pairs
    contribute E[W**(2p)] instead of E[W**p]**2.
    """
    t = _tree_level(j, depth)
    a, b = law.moment(p), law.moment(2 * p)
    gamma = gamma_correction(j, law.eta(p))
    s = np.arange(j)
    diagonal = np.sum(2.0**(-s) * (b ** (t + s) - a ** (2 * (t + s))))
    return float((a ** (2 * t) * gamma**2 + diagonal) / (b**t * gamma**2))


def lca_pair_count(l1, l2, level):
    """Pairs (u1, u2), u_i at depth l_i below a node, sharing an ancestor at depth `level`."""
    if not 0 <= level <= min(l1, l2):
        raise ParameterError(f'level {level} outside 0..min({l1}, {l2})')
    return 2 ** (l1 + l2 - level)


def lca_exact_count(l1, l2, level):
    """Pairs whose lowest common ancestor is exactly at depth `level`."""
    top = min(l1, l2)
    if level == top:
        return lca_pair_count(l1, l2, level)
    return lca_pair_count(l1, l2, level) - lca_pair_count(l1, l2, level + 1)


def rwc_f(law, p, j):
    """Higher-order factor f(j, p) of the RWC structure function at q = 2p.

    f = E[X**2] / E[X]**2 where X = sum_s 2**(-s) sum_u prod(W**p) runs over
    the descendants u up to j - 1 levels below a node. A pair of
    descendants at depths l1, l2 whose lowest common ancestor sits at depth h
    contributes A**(l1 + l2) * rho**h, with A = E[W**p] and
    rho = E[W**(2p)] / A**2.
    """
    a = law.moment(p)
    rho = law.moment(2 * p) / a**2
    m = j - 1
    second = 0.0
    for l1 in range(m + 1):
        for l2 in range(m + 1):
            shared = sum(lca_exact_count(l1, l2, h) * rho**h for h in range(min(l1, l2) + 1))
            second += 2.0 ** (-l1 - l2) * a ** (l1 + l2) * shared
    return float(second / gamma_correction(j, law.eta(p)) ** 2)


def oracle_rwc_sf(law, p, j, depth, order='p'):
    """Expected restricted p-leader structure function of an RWC at q = p or q = 2p."""
    t = _tree_level(j, depth)
    gamma = gamma_correction(j, law.eta(p))
    if order == 'p':
        return float(2.0 ** (-t * law.eta(p)) * gamma)
    if order == '2p':
        return float(2.0 ** (-t * law.eta(2 * p)) * gamma**2 * rwc_f(law, p, j))
    raise ParameterError(f"order must be 'p' or '2p', got {order!r}")
