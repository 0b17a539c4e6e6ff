"""Multifractal analysis of heart-rate variability from RR intervals.

Reads RR intervals (seconds, one beat per line, optionally preceded by the
beat time), resamples them on a uniform grid with a natural cubic spline
and runs the p-leader analysis on the result. The report adds the
corrected / uncorrected C(1, j) overlay for small p.

Usage:
    uv run python hrv.py rr.txt
    uv run python hrv.py rr.txt --fs 4 --signal-out rr_4hz.csv -o hrv_report.json
"""

import numpy as np

from lib.cli import (ArgumentParser, add_analysis_arguments, analysis_settings, analyze,
                     console, print_analysis, run, setup_logging, transform)
from lib.formats import dump_json, number, numbers, report_payload, write_signal_csv
from lib.rr import DEFAULT_FS, load_rr

OVERLAY_P = (0.25, 0.5, 1.0)


def c1_overlay(analysis):
    """log2-unit C(1, j) with and without correction for the overlay p values."""
    log2e = np.log2(np.e)
    overlay = []
    for result in analysis.results:
        if result.p not in OVERLAY_P:
            continue
        entry = {'p': result.p, 'octaves': [int(j) for j in result.stats.octaves],
                 'uncorrected': numbers(result.stats.C[0] * log2e)}
        if result.corrected_stats is not None:
            entry['corrected'] = numbers(result.corrected_stats.C[0] * log2e)
        overlay.append(entry)
    return overlay


def main(argv=None):
    parser = ArgumentParser(description='p-leader analysis of an RR-interval series.')
    parser.add_argument('rr', help='RR interval text file')
    parser.add_argument('--fs', type=float, default=DEFAULT_FS,
                        help='resampling rate in Hz (default %(default)s)')
    parser.add_argument('--signal-out', help='write the resampled series as a signal CSV')
    parser.add_argument('-o', '--output', help='report JSON path')
    add_analysis_arguments(parser)
    parser.set_defaults(p=OVERLAY_P + (2.0, np.inf))
    args = parser.parse_args(argv)
    setup_logging(args.verbose)

    record = load_rr(args.rr, args.fs)
    if args.signal_out:
        write_signal_csv(record.resampled, args.signal_out)
    analysis = analyze(transform(record.resampled, args), args)
    print_analysis(analysis)
    if args.output:
        payload = report_payload(analysis, record.source, analysis_settings(args))
        payload['rr'] = {'n_beats': int(record.rr.size), 'fs': record.fs,
                         'duration': number(record.beat_times[-1] - record.beat_times[0]),
                         'n_samples': int(record.resampled.values.size)}
        payload['c1_overlay'] = c1_overlay(analysis)
        dump_json(payload, args.output)
        console.print(f'report -> {args.output}')


if __name__ == '__main__':
    run(main)
