"""File formats: signal CSV, pyramid / report JSON, synthesis and experiment specs.

Signals are headered CSV, (index,value) in 1D and (row,col,value) in 2D.
Pyramids and reports are versioned JSON carrying the octave convention.
Floats go through json's repr (and %.17g in CSV), so files round-trip
exactly; infinities are written as the strings "inf" / "-inf".
"""

import json
import logging
import math

import numpy as np
import pandas as pd

from lib.cascades import CascadeSpec, MultiplierLaw
from lib.errors import IngestionError, SpecError
from lib.harness import ExperimentSpec
from lib.processes import ProcessSpec
from lib.wavelet import INDEX_CONVENTION, Signal, WaveletPyramid

logger = logging.getLogger(__name__)

PYRAMID_FORMAT = 'pleaders-pyramid'
REPORT_FORMAT = 'pleaders-report'
FORMAT_VERSION = 1
FLOAT_FORMAT = '%.17g'

PROCESS_KEYS = {
    'fbm': {'H'},
    'mrw': {'H', 'lambda', 'lambda2', 'integral_scale'},
    'levy': {'alpha'},
}
COMMON_PROCESS_KEYS = {'kind', 'n', 'seed', 'frac_int_order', 'target_p0'}
CASCADE_KEYS = {'kind', 'depth', 'weights', 'anisotropy', 'law', 'seed'}
EXPERIMENT_KEYS = {'name', 'process', 'n_mc', 'p_list', 'q_grid', 'm_max', 'j2', 'j1_values',
                   'weights', 'mode', 'n_vanishing_moments', 'boundary_policy', 'seed'}


def number(value):
    """JSON-safe float: inf/nan become strings / null."""
    value = float(value)
    if math.isinf(value):
        return 'inf' if value > 0 else '-inf'
    if math.isnan(value):
        return None
    return value


def numbers(values):
    return [number(v) for v in np.ravel(values)]


def parse_number(value):
    """Inverse of number(): accepts floats, ints and 'inf' strings."""
    if value is None:
        return float('nan')
    if isinstance(value, str):
        text = value.strip().lower()
        if text in ('inf', '+inf', 'infinity'):
            return float('inf')
        if text in ('-inf', '-infinity'):
            return float('-inf')
    try:
        return float(value)
    except (TypeError, ValueError):
        raise SpecError(f'not a number: {value!r}') from None


def load_json(path):
    with open(path, encoding='utf-8') as f:
        return json.load(f)


def dump_json(payload, path):
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(payload, f, indent=2, allow_nan=False)
        f.write('\n')


# --------------------------------------------------------------------------
# Signals
# --------------------------------------------------------------------------

def write_signal_csv(signal, path):
    values = signal.values
    if signal.dimension == 1:
        frame = pd.DataFrame({'index': np.arange(values.size), 'value': values})
    else:
        rows, cols = np.indices(values.shape)
        frame = pd.DataFrame({'row': rows.ravel(), 'col': cols.ravel(), 'value': values.ravel()})
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator='\n')


def read_signal_csv(path, sample_period=1.0):
    try:
        frame = pd.read_csv(path, float_precision='round_trip')
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise IngestionError(f'{path}: {exc}') from exc
    columns = list(frame.columns)
    if columns == ['index', 'value']:
        frame = frame.sort_values('index')
        if not np.array_equal(frame['index'].to_numpy(), np.arange(len(frame))):
            raise IngestionError(f'{path}: index column must run 0..N-1')
        return Signal(frame['value'].to_numpy(dtype=float), sample_period)
    if columns == ['row', 'col', 'value']:
        n_rows, n_cols = int(frame['row'].max()) + 1, int(frame['col'].max()) + 1
        if len(frame) != n_rows * n_cols:
            raise IngestionError(f'{path}: 2D signal is not a complete {n_rows}x{n_cols} grid')
        grid = np.full((n_rows, n_cols), np.nan)
        grid[frame['row'].to_numpy(), frame['col'].to_numpy()] = frame['value'].to_numpy(float)
        if np.isnan(grid).any():
            raise IngestionError(f'{path}: 2D signal has duplicate or missing cells')
        return Signal(grid, sample_period)
    raise IngestionError(
        f'{path}: expected header index,value or row,col,value, got {",".join(columns)}')


# --------------------------------------------------------------------------
# Pyramids
# --------------------------------------------------------------------------

def pyramid_payload(pyramid):
    return {
        'format': PYRAMID_FORMAT,
        'version': FORMAT_VERSION,
        'index_convention': INDEX_CONVENTION,
        'dimension': pyramid.dimension,
        'n_vanishing_moments': pyramid.n_vanishing_moments,
        'normalization': pyramid.normalization,
        'boundary_policy': pyramid.boundary_policy,
        'border': pyramid.border,
        'octaves': [{'j': int(j), 'subbands': pyramid.octave(j).tolist()} for j in pyramid.octaves],
        'approximation': pyramid.approximation.tolist(),
    }


def write_pyramid_json(pyramid, path):
    dump_json(pyramid_payload(pyramid), path)


def read_pyramid_json(path):
    payload = load_json(path)
    if payload.get('format') != PYRAMID_FORMAT:
        raise IngestionError(f'{path}: not a {PYRAMID_FORMAT} file')
    if payload.get('version') != FORMAT_VERSION:
        raise IngestionError(f'{path}: unsupported version {payload.get("version")}')
    octaves = sorted(payload['octaves'], key=lambda o: o['j'])
    if [o['j'] for o in octaves] != list(range(1, len(octaves) + 1)):
        raise IngestionError(f'{path}: octaves must be numbered 1..J')
    return WaveletPyramid(
        details=tuple(np.array(o['subbands'], dtype=float) for o in octaves),
        approximation=np.array(payload['approximation'], dtype=float),
        n_vanishing_moments=payload.get('n_vanishing_moments'),
        boundary_policy=payload.get('boundary_policy', 'periodic'),
        border=int(payload.get('border', 0)),
    )


# --------------------------------------------------------------------------
# Specs
# --------------------------------------------------------------------------

def _check_keys(payload, allowed, what):
    unknown = set(payload) - allowed
    if unknown:
        raise SpecError(f'unknown {what} key(s): {", ".join(sorted(unknown))}')


def parse_law(payload):
    """Multiplier law: lognormal by (c1, c2) or (mu, sigma2), two-point, deterministic."""
    if not isinstance(payload, dict) or 'kind' not in payload:
        raise SpecError('law must be an object with a "kind"')
    kind = payload['kind']
    if kind == 'lognormal':
        _check_keys(payload, {'kind', 'c1', 'c2', 'mu', 'sigma2'}, 'law')
        if 'c1' in payload:
            return MultiplierLaw.from_log_cumulants(float(payload['c1']), float(payload['c2']))
        return MultiplierLaw.lognormal(float(payload['mu']), float(payload['sigma2']))
    if kind == 'two-point':
        _check_keys(payload, {'kind', 'w0', 'w1'}, 'law')
        return MultiplierLaw.two_point(float(payload['w0']), float(payload['w1']))
    if kind == 'deterministic':
        _check_keys(payload, {'kind', 'weight'}, 'law')
        return MultiplierLaw.deterministic(float(payload['weight']))
    raise SpecError(f'unknown law kind {kind!r}')


def parse_synthesis_spec(payload):
    """ProcessSpec or CascadeSpec from a synthesis spec object."""
    if not isinstance(payload, dict) or 'kind' not in payload:
        raise SpecError('synthesis spec must be an object with a "kind"')
    kind = payload['kind']
    try:
        if kind in PROCESS_KEYS:
            _check_keys(payload, COMMON_PROCESS_KEYS | PROCESS_KEYS[kind], f'{kind} spec')
            lam = payload.get('lambda')
            if lam is None and 'lambda2' in payload:
                lam = math.sqrt(float(payload['lambda2']))
            target = payload.get('target_p0')
            return ProcessSpec(
                kind=kind, n=int(payload.get('n', 2**15)), H=float(payload.get('H', 0.7)),
                lam=float(lam or 0.0), alpha=float(payload.get('alpha', 1.5)),
                seed=int(payload.get('seed', 0)),
                frac_int_order=float(payload.get('frac_int_order', 0.0)),
                target_p0=None if target is None else parse_number(target),
                integral_scale=payload.get('integral_scale'))
        if kind in ('dbwc1d', 'dbwc2d', 'mrws', 'rwc'):
            _check_keys(payload, CASCADE_KEYS, f'{kind} spec')
            law = parse_law(payload['law']) if 'law' in payload else None
            return CascadeSpec(
                kind=kind, depth=int(payload['depth']), weights=tuple(payload.get('weights', ())),
                anisotropy=tuple(payload.get('anisotropy', (1.0, 1.0, 1.0))), law=law,
                seed=int(payload.get('seed', 0)))
    except KeyError as exc:
        raise SpecError(f'{kind} spec is missing {exc}') from None
    except (TypeError, ValueError) as exc:
        raise SpecError(f'{kind} spec: {exc}') from exc
    raise SpecError(f'unknown synthesis kind {kind!r}')


def parse_experiment_spec(payload):
    if not isinstance(payload, dict):
        raise SpecError('experiment spec must be a JSON object')
    _check_keys(payload, EXPERIMENT_KEYS, 'experiment')
    if 'process' not in payload:
        raise SpecError('experiment spec needs a "process"')
    options = {}
    for key in ('n_mc', 'm_max', 'n_vanishing_moments', 'seed', 'j2'):
        if payload.get(key) is not None:
            options[key] = int(payload[key])
    for key in ('weights', 'mode', 'boundary_policy'):
        if key in payload:
            options[key] = str(payload[key])
    if 'p_list' in payload:
        options['p_list'] = tuple(parse_number(p) for p in payload['p_list'])
    if 'q_grid' in payload:
        options['q_grid'] = tuple(float(q) for q in payload['q_grid'])
    if payload.get('j1_values') is not None:
        options['j1_values'] = tuple(int(j) for j in payload['j1_values'])
    process = parse_synthesis_spec(payload['process'])
    options.setdefault('seed', process.seed)
    return ExperimentSpec(name=str(payload.get('name', 'experiment')), process=process,
                          **options)


# --------------------------------------------------------------------------
# Reports
# --------------------------------------------------------------------------

def _estimate_payload(estimate):
    out = {'j1': int(estimate.j1), 'j2': int(estimate.j2), 'weights': estimate.weights}
    if estimate.zeta is not None:
        out['zeta'] = numbers(estimate.zeta)
        out['zeta_stderr'] = numbers(estimate.zeta_stderr)
    if estimate.c is not None:
        out['c'] = numbers(estimate.c)
        out['c_stderr'] = numbers(estimate.c_stderr)
    if estimate.legendre is not None:
        out['legendre'] = {'h': numbers(estimate.legendre.h), 'L': numbers(estimate.legendre.L),
                           'concave': estimate.legendre.concave}
    return out


def _table(values):
    return [numbers(row) for row in np.atleast_2d(values)]


def report_payload(analysis, source, settings):
    """Versioned JSON report of an Analysis; corrected fields only when computed."""
    log2e = np.log2(np.e)
    analyses = []
    for result in analysis.results:
        stats = result.stats
        entry = {
            'p': number(result.p),
            'mode': result.mode,
            'eta_p': None if result.eta_p is None else number(result.eta_p),
            'octaves': [int(j) for j in stats.octaves],
            'n_j': [int(n) for n in stats.n_j],
            'q': None if stats.q_grid is None else numbers(stats.q_grid),
            'log2_S': None if stats.log2_S is None else _table(stats.log2_S),
            'log2_C': _table(stats.C * log2e),
            'estimate': _estimate_payload(result.estimate),
        }
        if result.corrected_stats is not None:
            entry['log2_S_corrected'] = (None if result.corrected_stats.log2_S is None
                                         else _table(result.corrected_stats.log2_S))
            entry['log2_C_corrected'] = _table(result.corrected_stats.C * log2e)
            entry['estimate_corrected'] = _estimate_payload(result.corrected_estimate)
        entry['warnings'] = list(result.warnings)
        analyses.append(entry)
    return {
        'format': REPORT_FORMAT,
        'version': FORMAT_VERSION,
        'index_convention': INDEX_CONVENTION,
        'input': source,
        'settings': settings,
        'eta': {'p': numbers(analysis.eta.p_grid), 'eta': numbers(analysis.eta.eta),
                'j1': int(analysis.eta.j1), 'j2': int(analysis.eta.j2)},
        'p0': number(analysis.p0.value),
        'p0_below_grid': analysis.p0.below_grid,
        'analyses': analyses,
        'dwt_cumulants': {
            'log2_C': _table(analysis.coefficient_stats.C * log2e),
            'estimate': _estimate_payload(analysis.coefficient_estimate),
        },
        'warnings': list(analysis.warnings),
    }
