"""Synthesize one realization of a test process or cascade.

Processes (fbm, mrw, levy) are written as a signal CSV; cascades (dbwc1d,
dbwc2d, mrws, rwc) are built directly in the wavelet domain and written as
a pyramid JSON file that analyze.py reads like any other pyramid.

Usage:
    uv run python synth.py spec.json out.csv          # process -> signal CSV
    uv run python synth.py cascade.json out.json      # cascade -> pyramid JSON
    uv run python synth.py spec.json out.csv --index 7
"""

import logging

from lib.cascades import CascadeSpec
from lib.cascades import synthesize as synthesize_cascade
from lib.cli import ArgumentParser, console, run, setup_logging
from lib.formats import (load_json, parse_synthesis_spec, write_pyramid_json,
                         write_signal_csv)

logger = logging.getLogger(__name__)


def main(argv=None):
    parser = ArgumentParser(description='Synthesize a test signal or cascade pyramid.')
    parser.add_argument('spec', help='synthesis spec JSON')
    parser.add_argument('output', help='output path (.csv for processes, .json for cascades)')
    parser.add_argument('--index', type=int, default=0,
                        help='realization index; (seed, index) fixes the output')
    parser.add_argument('-v', '--verbose', action='count', default=0)
    args = parser.parse_args(argv)
    setup_logging(args.verbose)

    spec = parse_synthesis_spec(load_json(args.spec))
    if isinstance(spec, CascadeSpec):
        pyramid = synthesize_cascade(spec, args.index)
        write_pyramid_json(pyramid, args.output)
        console.print(f'[green]{spec.kind}[/green]: {pyramid.n_octaves} octaves '
                      f'-> {args.output}')
        return
    signal, order = spec.synthesize(args.index)
    write_signal_csv(signal, args.output)
    logger.info('fractional integration order %.4f', order)
    console.print(f'[green]{spec.kind}[/green]: {signal.values.size} samples -> {args.output}')


if __name__ == '__main__':
    run(main)
