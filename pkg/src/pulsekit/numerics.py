"""Real-signal mathematics: FFT, spectra, circular correlation, filtering, statistics.

Conventions used throughout the toolkit:

* Spectra are one-sided (``floor(n/2) + 1`` bins) with no zero padding, so
  correlation computed through the frequency domain is *circular*.
* Cross-correlation follows ``r(t) = sum_n x(n) * y(n + t mod T)``, i.e.
  ``r = irfft(conj(rfft(x)) * rfft(y))``.
* All computation is float64; file formats quantize separately.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, UndefinedStatisticError
from .validation import as_float_array, check_band, check_positive, check_same_length, check_same_rate

# Log-power floor for peak interpolation: keeps log() finite on empty bins
# while preserving the symmetry of equal neighbors.
_LOG_FLOOR = 1e-300


@dataclass(frozen=True)
class RealSignal:
    """A uniformly sampled 1-D real signal."""

    samples: np.ndarray
    rate_hz: float

    def __post_init__(self):
        object.__setattr__(self, "samples", as_float_array(self.samples, "samples", ndim=1))
        object.__setattr__(self, "rate_hz", check_positive(self.rate_hz, "rate_hz"))

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def duration_s(self) -> float:
        return len(self) / self.rate_hz

    @property
    def times(self) -> np.ndarray:
        return np.arange(len(self)) / self.rate_hz


# The recovered pulse waveform is an ordinary real signal.
BVPSignal = RealSignal


@dataclass(frozen=True)
class ComplexSpectrum:
    """One-sided DFT of a real signal of length ``source_length``."""

    bins: np.ndarray
    source_length: int

    def __post_init__(self):
        bins = np.asarray(self.bins, dtype=np.complex128)
        if bins.ndim != 1:
            raise InvalidInputError("spectrum bins must be 1-D")
        if bins.shape[0] != self.source_length // 2 + 1:
            raise InvalidInputError(
                f"expected {self.source_length // 2 + 1} one-sided bins, got {bins.shape[0]}"
            )
        if not np.all(np.isfinite(bins.view(np.float64))):
            raise InvalidInputError("spectrum contains non-finite values")
        object.__setattr__(self, "bins", bins)


@dataclass(frozen=True)
class PowerSpectrum:
    """Per-bin power ``|X_k|^2`` with bin spacing ``bin_hz``."""

    power: np.ndarray
    bin_hz: float

    def __post_init__(self):
        power = as_float_array(self.power, "power", ndim=1)
        if np.any(power < 0):
            raise InvalidInputError("power must be nonnegative")
        object.__setattr__(self, "power", power)
        object.__setattr__(self, "bin_hz", check_positive(self.bin_hz, "bin_hz"))

    @property
    def freqs(self) -> np.ndarray:
        return np.arange(self.power.shape[0]) * self.bin_hz


def rfft(x: RealSignal) -> ComplexSpectrum:
    """One-sided DFT of ``x`` (FFT length = signal length)."""
    if len(x) < 2:
        raise InvalidInputError("rfft requires at least 2 samples")
    return ComplexSpectrum(np.fft.rfft(x.samples), len(x))


def irfft(spectrum: ComplexSpectrum, rate_hz: float) -> RealSignal:
    """Inverse of :func:`rfft`; ``rate_hz`` restores the time axis."""
    return RealSignal(np.fft.irfft(spectrum.bins, spectrum.source_length), rate_hz)


def xcorr_circular(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Circular cross-correlation of two equal-length sample arrays."""
    return np.fft.irfft(np.conj(np.fft.rfft(a)) * np.fft.rfft(b), a.shape[-1])


def circular_xcorr(x: RealSignal, y: RealSignal) -> RealSignal:
    """Circular cross-correlation ``r(t) = sum_n x(n) y(n + t)``, length preserved."""
    check_same_length(x, y)
    check_same_rate(x.rate_hz, y.rate_hz)
    return RealSignal(xcorr_circular(x.samples, y.samples), x.rate_hz)


def power_spectrum(x: RealSignal) -> PowerSpectrum:
    """One-sided power spectrum ``|rfft(x)|^2``."""
    spec = rfft(x)
    return PowerSpectrum(np.abs(spec.bins) ** 2, x.rate_hz / len(x))


def bandpass(x: RealSignal, lo_hz: float, hi_hz: float) -> RealSignal:
    """Spectral-mask band-pass: zero every bin outside ``[lo_hz, hi_hz]``.

    The result has exactly zero mean (the DC bin is always outside the band)
    and the operation is idempotent up to FFT round-off.
    """
    check_band(lo_hz, hi_hz, x.rate_hz)
    if len(x) < 2:
        raise InvalidInputError("bandpass requires at least 2 samples")
    spec = np.fft.rfft(x.samples)
    freqs = np.fft.rfftfreq(len(x), d=1.0 / x.rate_hz)
    spec[(freqs < lo_hz) | (freqs > hi_hz)] = 0.0
    return RealSignal(np.fft.irfft(spec, len(x)), x.rate_hz)


def pearson_r(a: RealSignal, b: RealSignal) -> float:
    """Sample Pearson correlation, clamped to [-1, 1] against round-off."""
    check_same_length(a, b)
    if len(a) < 2:
        raise InvalidInputError("pearson_r requires at least 2 samples")
    da = a.samples - a.samples.mean()
    db = b.samples - b.samples.mean()
    denom = np.sqrt(np.sum(da * da) * np.sum(db * db))
    if denom == 0.0:
        raise UndefinedStatisticError("pearson_r undefined for zero-variance input")
    return float(np.clip(np.sum(da * db) / denom, -1.0, 1.0))


def quadratic_peak_interp(power: PowerSpectrum, k: int) -> float:
    """Refine a spectral peak at bin ``k`` to sub-bin resolution (Hz).

    Fits a parabola through the log-power of bins ``k-1, k, k+1`` and
    returns its vertex frequency; the vertex offset is clamped to half a
    bin on either side.
    """
    n = power.power.shape[0]
    if not (1 <= k <= n - 2):
        raise InvalidInputError(f"peak bin {k} must satisfy 1 <= k <= {n - 2}")
    y0, y1, y2 = np.log(np.maximum(power.power[k - 1 : k + 2], _LOG_FLOOR))
    denom = y0 - 2.0 * y1 + y2
    delta = 0.0 if denom == 0.0 or not np.isfinite(denom) else 0.5 * (y0 - y2) / denom
    delta = float(np.clip(delta, -0.5, 0.5))
    return (k + delta) * power.bin_hz


def median(values) -> float:
    """Lower median: the exact element at sorted index ``(n - 1) // 2``.

    Even-length input returns the lower of the two middle elements, so the
    result is always one of the samples.
    """
    arr = as_float_array(values, "values", ndim=1)
    return float(np.partition(arr, (arr.shape[0] - 1) // 2)[(arr.shape[0] - 1) // 2])


def standardize(x: RealSignal) -> RealSignal:
    """Shift/scale to zero mean and unit (population) variance."""
    centered = x.samples - x.samples.mean()
    scale = np.sqrt(np.mean(centered * centered))
    if scale == 0.0:
        raise UndefinedStatisticError("cannot standardize a constant signal")
    return RealSignal(centered / scale, x.rate_hz)


def hann(n: int) -> np.ndarray:
    """Periodic Hann window of length ``n``."""
    if n < 1:
        raise InvalidInputError("window length must be >= 1")
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)
