"""Monte Carlo benchmark of corrected vs. uncorrected p-leader estimates.

Writes perf.csv, summary.csv, summary.json and the figure CSVs into the
output directory. Worker threads: PLEADERS_THREADS (default min(4, cpus)).

Usage:
    uv run python bench.py experiments/mrw-panel.json out/mrw
    uv run python bench.py experiments/dbwc.json out/dbwc --n-mc 10
    uv run python bench.py experiments/mrws-bounds.json out/bounds --workers 1
"""

import logging
from dataclasses import replace

from rich.table import Table

from lib.cli import ArgumentParser, console, run, setup_logging
from lib.formats import load_json, parse_experiment_spec
from lib.harness import run_monte_carlo, write_results

logger = logging.getLogger(__name__)


def print_summary(result):
    table = Table(title=f'{result.spec.name}: {len(result.realizations)} realizations')
    for column in result.table.summary.columns:
        table.add_column(str(column), justify='right')
    for row in result.table.summary.itertuples(index=False):
        table.add_row(*[f'{v:.4g}' if isinstance(v, float) else str(v) for v in row])
    console.print(table)


def main(argv=None):
    parser = ArgumentParser(description='Monte Carlo benchmark of the p-leader correction.')
    parser.add_argument('experiment', help='experiment spec JSON')
    parser.add_argument('outdir', help='output directory')
    parser.add_argument('--n-mc', type=int, default=None, help='override the realization count')
    parser.add_argument('--workers', type=int, default=None,
                        help='worker threads (default: PLEADERS_THREADS or min(4, cpus))')
    parser.add_argument('-v', '--verbose', action='count', default=0)
    args = parser.parse_args(argv)
    setup_logging(args.verbose)

    spec = parse_experiment_spec(load_json(args.experiment))
    if args.n_mc is not None:
        spec = replace(spec, n_mc=args.n_mc)
    result = run_monte_carlo(spec, workers=args.workers)
    written = write_results(result, args.outdir)
    print_summary(result)
    for note in result.warnings:
        console.print(f'[yellow]warning:[/yellow] {note}', highlight=False)
    for path in written:
        logger.info('wrote %s', path)
    console.print(f'{len(written)} files -> {args.outdir}')


if __name__ == '__main__':
    run(main)
