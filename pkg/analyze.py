"""p-leader multifractal analysis of a signal CSV or a pyramid JSON.

Prints p0 and the log-cumulants per p (uncorrected and corrected) and,
with --output, writes the full report JSON.

Usage:
    uv run python analyze.py signal.csv
    uv run python analyze.py signal.csv --p 0.5,1,2,inf --j1 3 --j2 10 -o report.json
    uv run python analyze.py cascade.json --no-correction
"""

from pathlib import Path

from lib.cli import (ArgumentParser, add_analysis_arguments, analysis_settings, analyze,
                     console, print_analysis, run, setup_logging, transform)
from lib.formats import dump_json, read_pyramid_json, read_signal_csv, report_payload


def load_pyramid(path, args):
    """Pyramid JSON as is; anything else is read as a signal CSV and transformed."""
    if Path(path).suffix.lower() == '.json':
        return read_pyramid_json(path)
    return transform(read_signal_csv(path), args)


def main(argv=None):
    parser = ArgumentParser(description='p-leader multifractal analysis.')
    parser.add_argument('input', help='signal CSV or pyramid JSON')
    parser.add_argument('-o', '--output', help='report JSON path')
    add_analysis_arguments(parser)
    args = parser.parse_args(argv)
    setup_logging(args.verbose)

    pyramid = load_pyramid(args.input, args)
    analysis = analyze(pyramid, args)
    print_analysis(analysis)
    if args.output:
        dump_json(report_payload(analysis, str(args.input), analysis_settings(args)),
                  args.output)
        console.print(f'report -> {args.output}')


if __name__ == '__main__':
    run(main)
