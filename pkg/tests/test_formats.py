import json
from pathlib import Path

import numpy as np
import pytest
from numpy.testing import assert_array_equal

from lib.cascades import CascadeSpec, MultiplierLaw, synthesize
from lib.errors import IngestionError, SpecError
from lib.formats import (dump_json, load_json, parse_experiment_spec, parse_synthesis_spec,
                         read_pyramid_json, read_signal_csv, report_payload, write_pyramid_json,
                         write_signal_csv)
from lib.mfa import analyze_pyramid, compute_pleaders, scaling_stats
from lib.processes import ProcessSpec
from lib.rng import make_rng
from lib.wavelet import Signal

EXPERIMENTS = Path(__file__).resolve().parent.parent / 'experiments'


def test_signal_csv_is_exact(tmp_path):
    values = np.concatenate([make_rng(1).standard_normal(257) * 1e-3,
                             [0.1 + 0.2, np.nextafter(1.0, 2.0), 1e-300, 123456789.123456789]])
    write_signal_csv(Signal(values), tmp_path / 'x.csv')
    assert_array_equal(read_signal_csv(tmp_path / 'x.csv').values, values)
    image = make_rng(2).standard_normal((4, 6))
    write_signal_csv(Signal(image), tmp_path / 'img.csv')
    assert_array_equal(read_signal_csv(tmp_path / 'img.csv').values, image)


def test_signal_csv_rejects_bad_files(tmp_path):
    (tmp_path / 'bad.csv').write_text('time,value\n0,1\n', encoding='utf-8')
    with pytest.raises(IngestionError):
        read_signal_csv(tmp_path / 'bad.csv')
    (tmp_path / 'gap.csv').write_text('row,col,value\n0,0,1\n0,1,2\n1,0,3\n', encoding='utf-8')
    with pytest.raises(IngestionError):
        read_signal_csv(tmp_path / 'gap.csv')


def test_pyramid_json_gives_identical_statistics(tmp_path):
    law = MultiplierLaw.from_log_cumulants(0.8, -0.08)
    pyramid = synthesize(CascadeSpec(kind='rwc', depth=8, law=law, seed=4))
    write_pyramid_json(pyramid, tmp_path / 'p.json')
    loaded = read_pyramid_json(tmp_path / 'p.json')
    assert loaded.n_vanishing_moments is None
    for p in (0.5, np.inf):
        before = scaling_stats(compute_pleaders(pyramid, p), (-1.0, 2.0), 3)
        after = scaling_stats(compute_pleaders(loaded, p), (-1.0, 2.0), 3)
        assert_array_equal(before.S, after.S)
        assert_array_equal(before.C, after.C)


def test_pyramid_json_checks_format(tmp_path):
    dump_json({'format': 'something-else', 'version': 1}, tmp_path / 'x.json')
    with pytest.raises(IngestionError):
        read_pyramid_json(tmp_path / 'x.json')


def test_parse_process_specs():
    fbm = parse_synthesis_spec({'kind': 'fbm', 'H': 0.6, 'n': 2048, 'seed': 3})
    assert fbm == ProcessSpec(kind='fbm', H=0.6, n=2048, seed=3)
    mrw = parse_synthesis_spec({'kind': 'mrw', 'H': 0.84, 'lambda2': 0.08})
    assert mrw.lam == pytest.approx(np.sqrt(0.08))
    levy = parse_synthesis_spec({'kind': 'levy', 'alpha': 0.8, 'target_p0': 'inf'})
    assert levy.target_p0 == np.inf


def test_parse_cascade_specs():
    rwc = parse_synthesis_spec({'kind': 'rwc', 'depth': 10,
                                'law': {'kind': 'lognormal', 'c1': 0.8, 'c2': -0.08}})
    assert rwc.law.eta(1.0) == pytest.approx(0.76)
    dbwc = parse_synthesis_spec({'kind': 'dbwc2d', 'depth': 5, 'weights': [0.3, 0.5, 0.7, 0.9],
                                 'anisotropy': [1, 2, 0.5]})
    assert dbwc.anisotropy == (1.0, 2.0, 0.5)


@pytest.mark.parametrize('payload', [
    {'H': 0.7},
    {'kind': 'fbm', 'H': 0.7, 'hurst': 0.7},
    {'kind': 'brownian'},
    {'kind': 'rwc', 'law': {'kind': 'lognormal', 'c1': 0.8, 'c2': -0.08}},
    {'kind': 'mrws', 'depth': 6, 'law': {'kind': 'pareto'}},
    {'kind': 'fbm', 'H': 1.5},
])
def test_bad_synthesis_specs(payload):
    with pytest.raises(SpecError):
        parse_synthesis_spec(payload)


def test_experiment_presets_parse():
    paths = sorted(EXPERIMENTS.glob('*.json'))
    assert len(paths) >= 5
    for path in paths:
        spec = parse_experiment_spec(load_json(path))
        assert spec.n_mc >= 2
        assert spec.process.seed == spec.seed


def test_experiment_spec_errors():
    with pytest.raises(SpecError):
        parse_experiment_spec({'name': 'x'})
    with pytest.raises(SpecError):
        parse_experiment_spec({'process': {'kind': 'fbm'}, 'n_mc': 1})
    with pytest.raises(SpecError):
        parse_experiment_spec({'process': {'kind': 'fbm'}, 'workers': 4})


def test_report_payload(tmp_path):
    pyramid = synthesize(CascadeSpec(kind='dbwc1d', depth=9, weights=(0.6, 0.8)))
    analysis = analyze_pyramid(pyramid, p_list=(1.0, np.inf), q_grid=(1.0, 2.0), m_max=2)
    payload = report_payload(analysis, 'cascade.json', {'correction': True})
    dump_json(payload, tmp_path / 'report.json')
    report = json.loads((tmp_path / 'report.json').read_text(encoding='utf-8'))
    assert report['format'] == 'pleaders-report'
    assert report['p0'] == 'inf'
    first, inf = report['analyses']
    assert first['octaves'] == list(range(1, 10))
    assert len(first['log2_C']) == 2
    assert inf['p'] == 'inf'
    assert inf['log2_C_corrected'] == inf['log2_C']

    bare = report_payload(analyze_pyramid(pyramid, p_list=(1.0,), q_grid=(1.0,), m_max=1,
                                          correction=False), 'cascade.json', {})
    assert not any(key.endswith('_corrected') for key in bare['analyses'][0])
