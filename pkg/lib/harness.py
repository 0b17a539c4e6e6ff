"""Monte Carlo benchmark of corrected vs. uncorrected p-leader estimates.

For each realization of a process or cascade: synthesize, transform,
compute p-leaders for every p, take log-cumulants with and without the
finite-resolution correction, and regress them for every lower cutoff j1
(j2 fixed at the coarsest usable octave). Aggregates are bias / std / rmse
against the analytic log-cumulants, the log10 ratio of squared departures
from true scaling, and the optimal lower cutoffs.

Realizations run on a thread pool (PLEADERS_THREADS workers) and are
reduced in index order, so the output does not depend on scheduling.
"""

import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import pandas as pd

from lib.cascades import CascadeSpec, dbwc_truth, mrws_exact_ratio, oracle_mrws_bounds, rwc_f
from lib.cascades import synthesize as synthesize_cascade
from lib.errors import (MonteCarloError, ParameterError, PLeaderError, RegressionError,
                        SpecError)
from lib.mfa import (DEFAULT_J1, DEFAULT_M_MAX, DEFAULT_P_LIST, DEFAULT_WEIGHTS,
                     LEADER_MODES, analyze_pyramid, default_range, gamma_correction, regress,
                     settled_octave)
from lib.processes import ProcessSpec
from lib.wavelet import BOUNDARY_POLICIES, DEFAULT_N_VANISHING_MOMENTS, dwt

logger = logging.getLogger(__name__)

# A run fails when more than this fraction of realizations fail.
MAX_FAILED_FRACTION = 0.05

# log10 SE ratios are capped here; a capped value means the correction is exact.
SE_RATIO_CAP = 12.0

THREADS_ENV = 'PLEADERS_THREADS'

ESTIMATORS = ('uncorrected', 'corrected')
HARNESS_Q_GRID = (-2.0, -1.0, 1.0, 2.0)

FIGURE_FILES = {
    'logscale': 'logscale.csv',
    'mrws_bounds': 'mrws_bounds.csv',
    'rwc_terms': 'rwc_terms.csv',
    'perf_j1': 'perf_j1.csv',
    'c2': 'c2.csv',
}
FIGURE_COLUMNS = ['j', 'value', 'p', 'series']


def default_workers():
    value = os.environ.get(THREADS_ENV)
    if value:
        try:
            workers = int(value)
        except ValueError:
            raise ParameterError(f'{THREADS_ENV} must be an integer, got {value!r}') from None
        if workers < 1:
            raise ParameterError(f'{THREADS_ENV} must be >= 1, got {workers}')
        return workers
    return min(4, os.cpu_count() or 1)


@dataclass(frozen=True)
class ExperimentSpec:
    """One benchmark: what to synthesize, how many times, and how to analyze it.

    `boundary_policy` applies to time-domain processes only; cascades are
    synthesized as pyramids and have no border.
    """

    name: str
    process: ProcessSpec | CascadeSpec
    n_mc: int = 50
    p_list: tuple = DEFAULT_P_LIST
    q_grid: tuple = HARNESS_Q_GRID
    m_max: int = DEFAULT_M_MAX
    j2: int | None = None
    j1_values: tuple | None = None
    weights: str = DEFAULT_WEIGHTS
    mode: str = 'restricted'
    n_vanishing_moments: int = DEFAULT_N_VANISHING_MOMENTS
    boundary_policy: str = 'discard_border'
    seed: int = 0

    def __post_init__(self):
        if self.n_mc < 2:
            raise SpecError(f'n_mc must be >= 2, got {self.n_mc}')
        if not self.p_list:
            raise SpecError('p_list is empty')
        if any(not p > 0 for p in self.p_list):
            raise SpecError(f'p values must be > 0, got {self.p_list}')
        if self.mode not in LEADER_MODES:
            raise SpecError(f'mode must be one of {LEADER_MODES}, got {self.mode!r}')
        if not 1 <= self.m_max <= 3:
            raise SpecError(f'm_max must be 1..3, got {self.m_max}')
        if self.boundary_policy not in BOUNDARY_POLICIES:
            raise SpecError(f'boundary_policy must be one of {BOUNDARY_POLICIES}, '
                            f'got {self.boundary_policy!r}')
        object.__setattr__(self, 'p_list', tuple(float(p) for p in self.p_list))
        object.__setattr__(self, 'q_grid', tuple(float(q) for q in self.q_grid))
        object.__setattr__(self, 'process', replace(self.process, seed=int(self.seed)))


@dataclass(frozen=True)
class Realization:
    """Per-realization raw results."""

    index: int
    truth: np.ndarray
    frac_int_order: float
    octaves: np.ndarray
    n_j: np.ndarray
    eta_p: dict
    p0: float
    cumulants: dict  # (estimator, p) -> C(m, j) array
    estimates: dict  # (estimator, p, j1) -> c_m array
    zeta: dict  # (estimator, p) -> zeta(q) over the default range


@dataclass(frozen=True)
class PerfTable:
    """rows: estimator, p, p0, j1, m, bias, std, rmse; summary: one row per p."""

    rows: pd.DataFrame
    summary: pd.DataFrame


@dataclass(frozen=True)
class MonteCarloResult:
    spec: ExperimentSpec
    table: PerfTable
    realizations: tuple
    failures: tuple
    j1_values: tuple
    j2: int
    p0: float
    warnings: tuple = field(default=())


# --------------------------------------------------------------------------
# Statistics helpers
# --------------------------------------------------------------------------

def standard_error(x):
    x = np.asarray(x, dtype=float)
    if x.size < 2:
        return float('nan')
    return float(np.std(x, ddof=1) / np.sqrt(x.size))


def ratio_of_means(numerator, denominator):
    """mean(numerator) / mean(denominator) with its delta-method standard error."""
    num = np.asarray(numerator, dtype=float)
    den = np.asarray(denominator, dtype=float)
    if num.shape != den.shape or num.size < 2:
        raise ParameterError('ratio_of_means needs two equally long samples of size >= 2')
    ratio = num.mean() / den.mean()
    residual = num - ratio * den
    se = np.std(residual, ddof=1) / np.sqrt(num.size) / abs(den.mean())
    return float(ratio), float(se)


def error_stats(estimates, truth):
    """bias, std (population) and rmse of estimates against truth; rmse**2 = bias**2 + std**2."""
    err = np.asarray(estimates, dtype=float) - np.asarray(truth, dtype=float)
    bias = float(np.mean(err))
    std = float(np.std(err))
    rmse = float(np.sqrt(np.mean(err**2)))
    return bias, std, rmse


def aligned_departures(C1, truth):
    """C(1, j) - truth(j), shifted to vanish at the coarsest octave (last column)."""
    departures = np.atleast_2d(C1) - np.atleast_2d(truth)
    return departures - departures[:, -1:]


def se_ratio(corrected, uncorrected, truth):
    """log10(SE_uncorrected / SE_corrected) and whether the cap was hit.

    SE is the realization-average of the summed squared aligned departures
    of C(1, j) from the true scaling. Arrays are (realizations, octaves).
    """
    se_cor = float(np.mean(np.sum(aligned_departures(corrected, truth) ** 2, axis=1)))
    se_unc = float(np.mean(np.sum(aligned_departures(uncorrected, truth) ** 2, axis=1)))
    if se_unc == se_cor:
        return 0.0, False
    if se_cor == 0.0:
        return SE_RATIO_CAP, True
    if se_unc == 0.0:
        return -SE_RATIO_CAP, False
    value = float(np.log10(se_unc / se_cor))
    if value >= SE_RATIO_CAP:
        return SE_RATIO_CAP, True
    return max(value, -SE_RATIO_CAP), False


def rormse_and_olc(j1_values, rmse_uncorrected, rmse_corrected):
    """(min rmse ratio uncorrected/corrected, argmin j1 uncorrected, argmin j1 corrected).

    Ties go to the smaller j1.
    """
    j1_values = np.asarray(j1_values)
    order = np.argsort(j1_values, kind='stable')
    j1_values = j1_values[order]
    unc = np.asarray(rmse_uncorrected, dtype=float)[order]
    cor = np.asarray(rmse_corrected, dtype=float)[order]
    i_unc, i_cor = int(np.nanargmin(unc)), int(np.nanargmin(cor))
    best_unc, best_cor = unc[i_unc], cor[i_cor]
    if best_unc == best_cor:
        ratio = 1.0
    elif best_cor == 0:
        ratio = np.inf
    else:
        ratio = float(best_unc / best_cor)
    return ratio, int(j1_values[i_unc]), int(j1_values[i_cor])


# --------------------------------------------------------------------------
# Running
# --------------------------------------------------------------------------

def _truth(spec, order):
    process = spec.process
    if isinstance(process, ProcessSpec):
        truth = process.truth(order)
    elif process.kind.startswith('dbwc'):
        truth = dbwc_truth(process.weights)
    else:
        truth = process.law.truth()
    return np.asarray(truth[:spec.m_max], dtype=float)


def _pyramid(spec, index):
    process = spec.process
    if isinstance(process, CascadeSpec):
        return synthesize_cascade(process, index), 0.0
    signal, order = process.synthesize(index)
    return dwt(signal, spec.n_vanishing_moments, boundary_policy=spec.boundary_policy), order


def run_realization(spec, index):
    """Synthesize and analyze realization `index` of an experiment."""
    pyramid, order = _pyramid(spec, index)
    octaves = pyramid.octaves
    analysis = analyze_pyramid(pyramid, p_list=spec.p_list, q_grid=spec.q_grid,
                               m_max=spec.m_max, j2=spec.j2, weights=spec.weights,
                               mode=spec.mode, correction=True, with_legendre=False)
    table = {}
    zeta = {}
    eta_p = {}
    for result in analysis.results:
        p = result.p
        if result.eta_p is not None:
            eta_p[p] = float(result.eta_p)
        table['uncorrected', p] = result.stats.C
        table['corrected', p] = result.corrected_stats.C
        if spec.q_grid:
            zeta['uncorrected', p] = result.estimate.zeta
            zeta['corrected', p] = result.corrected_estimate.zeta
    table['dwt', None] = analysis.coefficient_stats.C
    n_j = analysis.results[0].stats.n_j

    _, j2 = default_range(octaves, n_j, 1, spec.j2)
    j1_values = spec.j1_values or tuple(range(1, j2 - 1))
    if not j1_values:
        raise RegressionError(f'no lower cutoff leaves 3 octaves below j2 = {j2}')
    estimates = {}
    for (estimator, p), C in table.items():
        for j1 in j1_values:
            estimates[estimator, p, j1] = np.array([
                regress(row, octaves, n_j, j1, j2, spec.weights).slope for row in C
            ]) * np.log2(np.e)
    return Realization(index=index, truth=_truth(spec, order), frac_int_order=float(order),
                       octaves=octaves, n_j=n_j, eta_p=eta_p, p0=float(analysis.p0.value),
                       cumulants=table, estimates=estimates, zeta=zeta)


def run_monte_carlo(spec, workers=None):
    """Run all realizations and aggregate them into a PerfTable."""
    workers = default_workers() if workers is None else workers
    logger.info('Running %s: %d realizations on %d worker(s)', spec.name, spec.n_mc, workers)

    def attempt(index):
        try:
            return run_realization(spec, index)
        except (PLeaderError, ValueError, FloatingPointError, np.linalg.LinAlgError) as exc:
            logger.warning('Realization %d failed: %s', index, exc)
            return exc

    with ThreadPoolExecutor(max_workers=workers) as pool:
        outcomes = list(pool.map(attempt, range(spec.n_mc)))

    failures = tuple((i, f'{type(o).__name__}: {o}') for i, o in enumerate(outcomes)
                     if isinstance(o, Exception))
    realizations = tuple(o for o in outcomes if not isinstance(o, Exception))
    if len(failures) > MAX_FAILED_FRACTION * spec.n_mc or not realizations:
        raise MonteCarloError(
            f'{len(failures)} of {spec.n_mc} realizations failed; first: {failures[0][1]}')
    notes = []
    if failures:
        notes.append(f'{len(failures)} realization(s) failed and were excluded')

    first = realizations[0]
    j1_values = tuple(sorted({key[2] for key in first.estimates}))
    j2 = default_range(first.octaves, first.n_j, 1, spec.j2)[1]
    p0 = _p0_label(spec, realizations)
    table = aggregate(spec, realizations, j1_values, p0)
    return MonteCarloResult(spec=spec, table=table, realizations=realizations,
                            failures=failures, j1_values=j1_values, j2=j2, p0=p0,
                            warnings=tuple(notes))


def _p0_label(spec, realizations):
    process = spec.process
    if isinstance(process, ProcessSpec) and process.target_p0 is not None:
        return float(process.target_p0)
    return float(np.median([r.p0 for r in realizations]))


def _c1_arrays(realizations, estimator, p, j2):
    keep = realizations[0].octaves <= j2
    C1 = np.array([r.cumulants[estimator, p][0][keep] for r in realizations])
    truth = np.array([r.truth[0] * np.log(2.0) * r.octaves[keep] for r in realizations])
    return C1, truth


def _settled_j1(realizations, p, j1_values):
    """Lower cutoff at which gamma(j, eta(p)) has settled, from the median eta(p).

    Clipped to [max(DEFAULT_J1, min j1), max j1]; DEFAULT_J1 when eta(p) is unknown.
    """
    etas = [r.eta_p[p] for r in realizations if p in r.eta_p]
    settled = settled_octave(p, float(np.median(etas)) if etas else None)
    low, high = max(DEFAULT_J1, min(j1_values)), max(j1_values)
    if settled is None:
        settled = low
    return int(min(max(settled, low), high))


def aggregate(spec, realizations, j1_values, p0):
    """PerfTable from realizations (already ordered by index)."""
    j2 = default_range(realizations[0].octaves, realizations[0].n_j, 1, spec.j2)[1]
    truths = np.array([r.truth for r in realizations])
    rows = []
    keys = [(estimator, p) for p in spec.p_list for estimator in ESTIMATORS] + [('dwt', None)]
    for estimator, p in keys:
        for j1 in j1_values:
            values = np.array([r.estimates[estimator, p, j1] for r in realizations])
            for m in range(spec.m_max):
                bias, std, rmse = error_stats(values[:, m], truths[:, m])
                rows.append({'estimator': estimator, 'p': np.nan if p is None else p,
                             'p0': p0, 'j1': j1, 'm': m + 1,
                             'bias': bias, 'std': std, 'rmse': rmse})
    frame = pd.DataFrame(rows, columns=['estimator', 'p', 'p0', 'j1', 'm', 'bias', 'std', 'rmse'])

    summary = []
    for p in spec.p_list:
        C_unc, truth = _c1_arrays(realizations, 'uncorrected', p, j2)
        C_cor, _ = _c1_arrays(realizations, 'corrected', p, j2)
        ratio, exact = se_ratio(C_cor, C_unc, truth)
        first = frame[(frame.p == p) & (frame.m == 1)]
        curve_unc = first[first.estimator == 'uncorrected'].sort_values('j1')
        curve_cor = first[first.estimator == 'corrected'].sort_values('j1')
        rormse, olc_unc, olc_cor = rormse_and_olc(
            curve_unc.j1.to_numpy(), curve_unc.rmse.to_numpy(), curve_cor.rmse.to_numpy())
        summary.append({
            'p': p, 'p0': p0, 'se_ratio': ratio, 'se_exact': exact, 'rormse': rormse,
            'olc_uncorrected': olc_unc, 'olc_corrected': olc_cor,
            'olc_uncorrected_octaves_used': j2 - olc_unc + 1,
            'olc_corrected_octaves_used': j2 - olc_cor + 1,
            'j1_settled': _settled_j1(realizations, p, j1_values),
        })
    return PerfTable(rows=frame, summary=pd.DataFrame(summary))


# --------------------------------------------------------------------------
# Figure data
# --------------------------------------------------------------------------

def _frame(rows):
    frame = pd.DataFrame(rows, columns=FIGURE_COLUMNS)
    if frame.empty:
        return frame
    return frame.sort_values(['series', 'p', 'j'], kind='stable').reset_index(drop=True)


def logscale_rows(result):
    """Mean aligned departures of corrected / uncorrected C(1, j) from true scaling."""
    rows = []
    for p in result.spec.p_list:
        for estimator in ESTIMATORS:
            C1, truth = _c1_arrays(result.realizations, estimator, p, result.j2)
            mean = aligned_departures(C1, truth).mean(axis=0)
            octaves = result.realizations[0].octaves[:mean.size]
            rows += [{'j': int(j), 'value': float(v), 'p': p, 'series': estimator}
                     for j, v in zip(octaves, mean)]
    return _frame(rows)


def perf_rows(result, m=1):
    """bias / std / rmse of c_m against j1, one block per (statistic, estimator)."""
    frame = result.table.rows
    rows = []
    for estimator in ESTIMATORS:
        for p in result.spec.p_list:
            sel = frame[(frame.estimator == estimator) & (frame.p == p) & (frame.m == m)]
            for stat in ('bias', 'std', 'rmse'):
                rows += [{'j': int(j1), 'value': float(v), 'p': p, 'series': f'{stat}:{estimator}'}
                         for j1, v in zip(sel.j1, sel[stat])]
    return _frame(rows)


def c2_rows(result):
    """Realization-mean C(2, j) per p, corrected and uncorrected (identical by construction)."""
    rows = []
    if result.spec.m_max < 2:
        return _frame(rows)
    for p in result.spec.p_list:
        for estimator in ESTIMATORS:
            C2 = np.mean([r.cumulants[estimator, p][1] for r in result.realizations], axis=0)
            rows += [{'j': int(j), 'value': float(v), 'p': p, 'series': estimator}
                     for j, v in zip(result.realizations[0].octaves, C2)]
    return _frame(rows)


def mrws_bound_rows(law, p_list, n, depth):
    """gamma**n * b_S, gamma**n and gamma**n * B_S per octave (plus the exact ratio for n = 2)."""
    rows = []
    for p in p_list:
        for j in range(1, depth + 1):
            lower, upper = oracle_mrws_bounds(law, p, n, j, depth)
            gamma_n = gamma_correction(j, law.eta(p)) ** n
            rows += [
                {'j': j, 'value': gamma_n * lower, 'p': p, 'series': 'lower'},
                {'j': j, 'value': gamma_n, 'p': p, 'series': 'correction'},
                {'j': j, 'value': gamma_n * upper, 'p': p, 'series': 'upper'},
            ]
            if n == 2:
                rows.append({'j': j, 'value': gamma_n * mrws_exact_ratio(law, p, j, depth),
                             'p': p, 'series': 'exact'})
    return _frame(rows)


def rwc_term_rows(law, p_list, depth):
    """log2 gamma**2 and log2(gamma**2 f) per octave."""
    rows = []
    for p in p_list:
        for j in range(1, depth + 1):
            log_gamma2 = 2 * np.log2(gamma_correction(j, law.eta(p)))
            rows += [
                {'j': j, 'value': log_gamma2, 'p': p, 'series': 'gamma2'},
                {'j': j, 'value': log_gamma2 + np.log2(rwc_f(law, p, j)), 'p': p,
                 'series': 'gamma2_f'},
            ]
    return _frame(rows)


def emit_figure_data(kind, rows, outdir):
    """Write one figure CSV (j, value, p, series); an empty frame gives a header-only file."""
    if kind not in FIGURE_FILES:
        raise ParameterError(f'unknown figure kind {kind!r}; use one of {list(FIGURE_FILES)}')
    path = Path(outdir) / FIGURE_FILES[kind]
    frame = rows if isinstance(rows, pd.DataFrame) else _frame(rows)
    frame = frame.reindex(columns=FIGURE_COLUMNS)
    frame.to_csv(path, index=False, float_format='%.17g', lineterminator='\n')
    return path


def write_results(result, outdir):
    """perf.csv, summary.csv, summary.json and the figure CSVs for one run."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    perf = outdir / 'perf.csv'
    result.table.rows.to_csv(perf, index=False, float_format='%.17g', lineterminator='\n')
    summary = outdir / 'summary.csv'
    result.table.summary.to_csv(summary, index=False, float_format='%.17g', lineterminator='\n')
    written += [perf, summary]

    written.append(emit_figure_data('logscale', logscale_rows(result), outdir))
    written.append(emit_figure_data('perf_j1', perf_rows(result), outdir))
    written.append(emit_figure_data('c2', c2_rows(result), outdir))
    process = result.spec.process
    finite = [p for p in result.spec.p_list if np.isfinite(p)]
    if isinstance(process, CascadeSpec) and process.kind == 'mrws':
        written.append(emit_figure_data(
            'mrws_bounds', mrws_bound_rows(process.law, finite, 2, process.depth), outdir))
    if isinstance(process, CascadeSpec) and process.kind == 'rwc':
        written.append(emit_figure_data(
            'rwc_terms', rwc_term_rows(process.law, finite, process.depth), outdir))

    payload = {
        'format': 'pleaders-bench',
        'version': 1,
        'name': result.spec.name,
        'n_mc': result.spec.n_mc,
        'n_failed': len(result.failures),
        'failures': [{'index': i, 'error': message} for i, message in result.failures],
        'j1_values': list(result.j1_values),
        'j2': result.j2,
        'p0': _json_float(result.p0),
        'summary': [{k: _json_value(v) for k, v in row.items()}
                    for row in result.table.summary.to_dict(orient='records')],
        'zeta': _zeta_summary(result),
        'warnings': list(result.warnings),
    }
    path = outdir / 'summary.json'
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(payload, f, indent=2, sort_keys=False)
        f.write('\n')
    written.append(path)
    return written


def _zeta_summary(result):
    if not result.spec.q_grid:
        return []
    out = []
    for p in result.spec.p_list:
        for estimator in ESTIMATORS:
            values = np.array([r.zeta[estimator, p] for r in result.realizations])
            out.append({'p': _json_float(p), 'estimator': estimator,
                        'q': list(result.spec.q_grid),
                        'mean': [float(v) for v in values.mean(axis=0)]})
    return out


def _json_float(value):
    value = float(value)
    if np.isinf(value):
        return 'inf' if value > 0 else '-inf'
    if np.isnan(value):
        return None
    return value


def _json_value(value):
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    return _json_float(value)
