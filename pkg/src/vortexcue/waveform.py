"""Speaker drive waveforms: square pulses, the rounding filter, PCM export.

The rounding filter is a first-order low-pass (exponential smoothing)::

    y[k] = b * x[k] + (1 - b) * y[k - 1],    y[-1] = 0

``b = 1`` passes the square wave through untouched; small ``b`` rounds the
edges, which lowers both the ejection noise and the peak piston velocity.
"""

from __future__ import annotations

import math
import os
import tempfile
import wave
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import InvalidParameterError, OutOfRangeError

DEFAULT_SAMPLE_RATE = 48000
DEFAULT_AMPLITUDE = 10.0  # V
PCM_FULL_SCALE = 32767


@dataclass(frozen=True)
class DriveWaveform:
    sample_rate: int
    samples: np.ndarray = field(repr=False)
    amplitude: float
    pulse_length: float
    roundness: float = 1.0

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise InvalidParameterError("sample_rate must be positive")
        if not 0 < self.roundness <= 1:
            raise InvalidParameterError(f"roundness coefficient must be in (0, 1], got {self.roundness}")
        if self.amplitude < 0:
            raise InvalidParameterError("amplitude must be >= 0")

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


def _check_roundness(b):
    if not (isinstance(b, (int, float)) and math.isfinite(b) and 0 < b <= 1):
        raise InvalidParameterError(f"roundness out of range: b must be in (0, 1], got {b!r}")


def pulse_train(amplitude: float, pulse_length: float, count: int = 1, interval: float = 1.0,
                sample_rate: int = DEFAULT_SAMPLE_RATE, lead: float = 0.001,
                tail: float = 0.001) -> DriveWaveform:
    """``count`` square pulses whose onsets are ``interval`` seconds apart.

    ``lead`` and ``tail`` are the zero padding before the first onset and
    after the end of the last pulse.
    """
    if not (math.isfinite(amplitude) and amplitude >= 0):
        raise InvalidParameterError("amplitude must be >= 0")
    if not (pulse_length > 0 and sample_rate > 0):
        raise InvalidParameterError("pulse_length and sample_rate must be positive")
    if count < 1:
        raise InvalidParameterError("count must be >= 1")
    if count > 1 and not interval > 0:
        raise InvalidParameterError("interval must be positive when count > 1")
    if lead < 0 or tail < 0:
        raise InvalidParameterError("padding must be >= 0")

    width = int(round(pulse_length * sample_rate))
    if width < 1:
        raise InvalidParameterError("pulse shorter than one sample")
    step = int(round(interval * sample_rate)) if count > 1 else 0
    if count > 1 and step < width:
        raise InvalidParameterError("pulses overlap: interval shorter than pulse_length")
    n_lead = int(round(lead * sample_rate))
    n_tail = int(round(tail * sample_rate))

    samples = np.zeros(n_lead + (count - 1) * step + width + n_tail)
    for k in range(count):
        start = n_lead + k * step
        samples[start:start + width] = amplitude
    return DriveWaveform(sample_rate, samples, float(amplitude), float(pulse_length))


def square_pulse(amplitude: float, pulse_length: float, sample_rate: int = DEFAULT_SAMPLE_RATE,
                 lead: float = 0.001, tail: float = 0.001) -> DriveWaveform:
    """A single square pulse of ``round(pulse_length * sample_rate)`` samples."""
    return pulse_train(amplitude, pulse_length, 1, 1.0, sample_rate, lead, tail)


def round_samples(x, b: float) -> np.ndarray:
    """Run the rounding recursion over a raw sample sequence."""
    _check_roundness(b)
    x = np.asarray(x, dtype=float)
    if b == 1:
        return x.copy()
    keep = 1.0 - b
    out = np.empty_like(x)
    y = 0.0
    for k, xk in enumerate(x.tolist()):
        y = b * xk + keep * y
        out[k] = y
    return out


def apply_rounding(w: DriveWaveform, b: float) -> DriveWaveform:
    """Filter ``w`` with roundness coefficient ``b``, starting from rest."""
    return replace(w, samples=round_samples(w.samples, b), roundness=float(b))


@dataclass(frozen=True)
class PistonCalibration:
    """Measured peak piston velocity (mm/s) per roundness coefficient.

    The displacement span is the vibrometer's min/max membrane excursion.
    """

    table: dict
    displacement_min_mm: float = -4.6
    displacement_max_mm: float = 4.0

    def __post_init__(self):
        if not self.table:
            raise InvalidParameterError("calibration table is empty")
        items = sorted(self.table.items())
        if any(b <= 0 or b > 1 for b, _ in items):
            raise InvalidParameterError("calibration coefficients must lie in (0, 1]")
        velocities = [v for _, v in items]
        if any(v2 <= v1 for v1, v2 in zip(velocities, velocities[1:])):
            raise InvalidParameterError("peak velocity must be strictly increasing in b")

    @property
    def displacement_span_mm(self) -> float:
        return self.displacement_max_mm - self.displacement_min_mm

    @classmethod
    def reference(cls) -> "PistonCalibration":
        return cls(dict(REFERENCE_PISTON_VELOCITY))


# Peak membrane velocity at 10 V drive, from the vibrometer measurements.
REFERENCE_PISTON_VELOCITY = {
    0.001: 568.83,
    0.002: 892.97,
    0.003: 1139.30,
    0.004: 1321.72,
    1.0: 2032.20,
}


def peak_piston_velocity(b: float, cal: PistonCalibration | None = None) -> float:
    """Peak piston velocity in mm/s for roundness ``b``.

    Exact at calibrated coefficients, linear in ``log(b)`` between them.
    No extrapolation.
    """
    cal = cal or PistonCalibration.reference()
    if b in cal.table:
        return cal.table[b]
    bs = sorted(cal.table)
    if not (bs[0] <= b <= bs[-1]):
        raise OutOfRangeError(f"roundness {b} outside calibrated range [{bs[0]}, {bs[-1]}]")
    i = int(np.searchsorted(bs, b))
    b0, b1 = bs[i - 1], bs[i]
    t = (math.log(b) - math.log(b0)) / (math.log(b1) - math.log(b0))
    return cal.table[b0] + t * (cal.table[b1] - cal.table[b0])


def pcm16(w: DriveWaveform) -> np.ndarray:
    """Scale to signed 16-bit: ``amplitude`` volts maps to 32767 (half-even rounding)."""
    if not w.amplitude > 0:
        raise InvalidParameterError("amplitude must be positive to export")
    s = np.asarray(w.samples, dtype=float)
    if s.size and np.max(np.abs(s)) > w.amplitude * (1 + 1e-12):
        raise InvalidParameterError("samples exceed the waveform amplitude")
    codes = np.rint(s / w.amplitude * PCM_FULL_SCALE)
    return np.clip(codes, -PCM_FULL_SCALE, PCM_FULL_SCALE).astype("<i2")


def export_pcm(w: DriveWaveform, path) -> Path:
    """Write ``w`` as a mono 16-bit PCM RIFF/WAVE file.

    The file is written to a temporary sibling and renamed into place, so
    readers never see a partial file.
    """
    path = Path(path)
    data = pcm16(w).tobytes()
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            with wave.open(fh, "wb") as wav:
                wav.setnchannels(1)
                wav.setsampwidth(2)
                wav.setframerate(int(w.sample_rate))
                wav.writeframes(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path
