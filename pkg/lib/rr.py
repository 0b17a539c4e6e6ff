"""RR-interval ingestion and uniform resampling for heart-rate analysis.

Input is plain text, one beat per line: either the RR interval alone (in
seconds) or `time rr` with the beat time first. Whitespace or commas
separate fields; anything after '#' is a comment.
"""

import logging
import re
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from lib.errors import IngestionError, ParameterError
from lib.wavelet import Signal

logger = logging.getLogger(__name__)

DEFAULT_FS = 4.0  # Hz
MIN_BEATS = 4

_SEPARATORS = re.compile(r'[\s,]+')


@dataclass(frozen=True)
class RRRecord:
    rr: np.ndarray
    beat_times: np.ndarray
    fs: float
    times: np.ndarray
    resampled: Signal
    source: str = ''


def parse_rr_lines(lines):
    """(beat_times or None, rr) from text lines; the column count must not change."""
    times, rr, n_fields = [], [], None
    for line_number, raw in enumerate(lines, start=1):
        text = raw.split('#', 1)[0].strip()
        if not text:
            continue
        fields = _SEPARATORS.split(text)
        if len(fields) not in (1, 2):
            raise IngestionError(f'expected 1 or 2 fields, got {len(fields)}', line_number)
        if n_fields is None:
            n_fields = len(fields)
        elif len(fields) != n_fields:
            raise IngestionError('mixed one- and two-column rows', line_number)
        try:
            values = [float(f) for f in fields]
        except ValueError:
            raise IngestionError(f'not a number: {text!r}', line_number) from None
        if not np.isfinite(values).all():
            raise IngestionError(f'non-finite value: {text!r}', line_number)
        if values[-1] <= 0:
            raise IngestionError(f'RR interval must be > 0, got {values[-1]}', line_number)
        if n_fields == 2:
            if times and values[0] <= times[-1]:
                raise IngestionError('beat times must increase strictly', line_number)
            times.append(values[0])
        rr.append(values[-1])
    if len(rr) < MIN_BEATS:
        raise IngestionError(f'need at least {MIN_BEATS} RR intervals, got {len(rr)}')
    return (np.array(times) if n_fields == 2 else None), np.array(rr)


def read_rr_file(path):
    with open(path, encoding='utf-8') as f:
        try:
            return parse_rr_lines(f)
        except IngestionError as exc:
            raise IngestionError(f'{path}: {exc}') from exc


def resample_rr(beat_times, rr, fs=DEFAULT_FS):
    """Natural cubic spline of rr(t) sampled every 1/fs seconds from the first beat."""
    if not fs > 0:
        raise ParameterError(f'sampling rate must be > 0, got {fs}')
    spline = CubicSpline(beat_times, rr, bc_type='natural')
    n = int(np.floor((beat_times[-1] - beat_times[0]) * fs + 1e-9)) + 1
    times = beat_times[0] + np.arange(n) / fs
    return times, spline(times)


def load_rr(path, fs=DEFAULT_FS):
    beat_times, rr = read_rr_file(path)
    if beat_times is None:
        beat_times = np.cumsum(rr)
    times, values = resample_rr(beat_times, rr, fs)
    logger.info('%s: %d beats over %.1f s, resampled to %d points at %g Hz',
                path, rr.size, beat_times[-1] - beat_times[0], values.size, fs)
    return RRRecord(rr=rr, beat_times=beat_times, fs=fs, times=times,
                    resampled=Signal(values, 1.0 / fs), source=str(path))
