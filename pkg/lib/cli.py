"""Shared command-line plumbing for synth.py, analyze.py, bench.py and hrv.py.

Exit codes: 0 on success, 1 for bad input or a library error (one line on
stderr, "error: <kind>: <message>"), 2 for anything unexpected.
"""

import argparse
import json
import logging
import sys

import numpy as np
from rich.console import Console
from rich.logging import RichHandler
from rich.markup import escape
from rich.table import Table

from lib.errors import PLeaderError
from lib.mfa import (DEFAULT_M_MAX, DEFAULT_P_LIST, DEFAULT_Q_GRID, DEFAULT_WEIGHTS,
                     LEADER_MODES, WEIGHT_SCHEMES, analyze_pyramid)
from lib.wavelet import DEFAULT_N_VANISHING_MOMENTS, dwt

console = Console()
err_console = Console(stderr=True)


class ArgumentParser(argparse.ArgumentParser):
    """argparse with usage errors mapped to exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        err_console.print(f'[red]error: usage: {escape(message)}[/red]', highlight=False)
        raise SystemExit(1)


def setup_logging(verbose=0):
    level = logging.WARNING if verbose == 0 else logging.INFO if verbose == 1 else logging.DEBUG
    logging.basicConfig(level=level, format='%(message)s', datefmt='[%X]',
                        handlers=[RichHandler(console=err_console, show_path=False)],
                        force=True)


def parse_float_list(text):
    """'0.25,0.5,inf' -> (0.25, 0.5, inf)."""
    try:
        return tuple(float(item) for item in text.split(',') if item.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f'not a comma-separated list of numbers: {text!r}')


def add_analysis_arguments(parser):
    parser.add_argument('--p', type=parse_float_list, default=DEFAULT_P_LIST,
                        help='comma-separated p values, "inf" allowed (default %(default)s)')
    parser.add_argument('--q', type=parse_float_list, default=DEFAULT_Q_GRID,
                        help='comma-separated moment orders q (default -5..5 step 0.25)')
    parser.add_argument('--m', type=int, default=DEFAULT_M_MAX, choices=(1, 2, 3),
                        help='highest log-cumulant order')
    parser.add_argument('--j1', type=int, default=None, help='finest octave of the fit')
    parser.add_argument('--j2', type=int, default=None, help='coarsest octave of the fit')
    parser.add_argument('--no-correction', action='store_true',
                        help='skip the finite-resolution correction')
    parser.add_argument('--mode', choices=LEADER_MODES, default='restricted')
    parser.add_argument('--weights', choices=WEIGHT_SCHEMES, default=DEFAULT_WEIGHTS)
    parser.add_argument('--nvm', type=int, default=DEFAULT_N_VANISHING_MOMENTS,
                        help='Daubechies vanishing moments')
    parser.add_argument('--discard-border', action='store_true',
                        help='drop boundary-affected coefficients instead of periodizing')
    parser.add_argument('-v', '--verbose', action='count', default=0)


def analysis_settings(args):
    return {
        'p': [float(p) if np.isfinite(p) else 'inf' for p in args.p],
        'q': list(args.q),
        'm_max': args.m,
        'j1': args.j1,
        'j2': args.j2,
        'correction': not args.no_correction,
        'mode': args.mode,
        'weights': args.weights,
        'n_vanishing_moments': args.nvm,
        'boundary_policy': 'discard_border' if args.discard_border else 'periodic',
    }


def transform(signal, args):
    policy = 'discard_border' if args.discard_border else 'periodic'
    return dwt(signal, args.nvm, boundary_policy=policy)


def analyze(pyramid, args):
    return analyze_pyramid(pyramid, p_list=args.p, q_grid=args.q, m_max=args.m, j1=args.j1,
                           j2=args.j2, weights=args.weights, mode=args.mode,
                           correction=not args.no_correction)


def _fmt(value):
    if value is None:
        return '-'
    value = float(value)
    return 'inf' if np.isinf(value) else f'{value:.4f}'


def print_analysis(analysis):
    p0 = analysis.p0
    label = f'<= {p0.value:g}' if p0.below_grid else _fmt(p0.value)
    console.print(f'[bold]p0[/bold] = {label}')

    table = Table(title='log-cumulants (c1, c2, c3)')
    table.add_column('p', justify='right')
    table.add_column('eta(p)', justify='right')
    table.add_column('uncorrected')
    table.add_column('corrected')
    table.add_column('j1..j2', justify='center')
    for result in analysis.results:
        corrected = result.corrected_estimate
        table.add_row(
            _fmt(result.p), _fmt(result.eta_p),
            ', '.join(_fmt(c) for c in result.estimate.c),
            '-' if corrected is None else ', '.join(_fmt(c) for c in corrected.c),
            f'{result.estimate.j1}..{result.estimate.j2}')
    coefficients = analysis.coefficient_estimate
    table.add_row('dwt', '-', ', '.join(_fmt(c) for c in coefficients.c), '-',
                  f'{coefficients.j1}..{coefficients.j2}')
    console.print(table)
    for note in analysis.warnings + tuple(w for r in analysis.results for w in r.warnings):
        console.print(f'[yellow]warning:[/yellow] {escape(note)}', highlight=False)


def run(main, argv=None):
    """Call main(argv) and turn exceptions into exit codes."""
    try:
        main(argv)
    except SystemExit:
        raise
    except PLeaderError as exc:
        err_console.print(f'[red]error: {exc.kind}: {escape(str(exc))}[/red]', highlight=False)
        raise SystemExit(1) from exc
    except json.JSONDecodeError as exc:
        err_console.print(f'[red]error: json: {escape(str(exc))}[/red]', highlight=False)
        raise SystemExit(1) from exc
    except (OSError, ValueError) as exc:
        err_console.print(f'[red]error: input: {escape(str(exc))}[/red]', highlight=False)
        raise SystemExit(1) from exc
    except Exception as exc:
        logging.getLogger(__name__).exception('internal error')
        err_console.print(f'[red]error: internal: {escape(str(exc))}[/red]', highlight=False)
        raise SystemExit(2) from exc
    raise SystemExit(0)
