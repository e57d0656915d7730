"""FFT spectra of Rabi traces, peak picking and triplet characterization."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import NoCenterPeakError, TooShortError
from .integrator import TimeTrace


@dataclass(frozen=True)
class Spectrum:
    """One-sided amplitude spectrum.

    ``mag`` is normalized by the window's coherent gain, so a cosine of
    amplitude ``a`` shows up as a peak of height close to ``a``.
    ``bin_width`` is the native resolution 1/(N dt) before zero padding;
    ``freq`` may be finer when the trace was zero padded.
    """

    freq: np.ndarray
    mag: np.ndarray
    bin_width: float

    def __post_init__(self):
        if self.freq.shape != self.mag.shape:
            raise ValueError("freq and mag must have the same length")

    @property
    def df(self) -> float:
        return float(self.freq[1] - self.freq[0])

    def dominant(self) -> float:
        """Frequency of the largest peak (parabolic refinement), MHz."""
        peaks = find_peaks(self, min_rel_height=1.0, min_separation=0.0)
        if not peaks:
            return float(self.freq[int(np.argmax(self.mag))])
        return peaks[0][0]


def fft_spectrum(trace: TimeTrace, window: Literal["none", "hann"] = "hann", zero_pad_factor: int = 4) -> Spectrum:
    n = len(trace)
    if n < 8:
        raise TooShortError(f"trace has {n} samples, need at least 8")
    if zero_pad_factor < 1:
        raise ValueError("zero_pad_factor must be >= 1")
    # exact zeros for a flat trace instead of rounding residue of the mean
    x = trace.p0 - trace.p0.mean() if np.ptp(trace.p0) > 0 else np.zeros(n)
    if window == "hann":
        # periodic Hann; symmetric would put a zero at both ends
        w = 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)
    elif window == "none":
        w = np.ones(n)
    else:
        raise ValueError(f"unknown window {window!r}")
    n_fft = n * zero_pad_factor
    spec = np.abs(np.fft.rfft(x * w, n_fft))
    mag = spec * (2.0 / w.sum())
    mag[0] *= 0.5
    if n_fft % 2 == 0:
        mag[-1] *= 0.5
    freq = np.fft.rfftfreq(n_fft, trace.dt)
    return Spectrum(freq, mag, 1.0 / (n * trace.dt))


def _refine(mag: np.ndarray, k: int) -> tuple[float, float]:
    """3-point parabolic vertex around bin k -> (fractional offset, height)."""
    if k == 0 or k == mag.size - 1:
        return 0.0, float(mag[k])
    a, b, c = mag[k - 1], mag[k], mag[k + 1]
    denom = a - 2.0 * b + c
    if denom == 0:
        return 0.0, float(b)
    off = 0.5 * (a - c) / denom
    return float(off), float(b - 0.25 * (a - c) * off)


def find_peaks(s: Spectrum, min_rel_height: float = 0.1, min_separation: float | None = None) -> list[tuple[float, float]]:
    """Local maxima of ``s.mag`` as ``(freq, mag)`` pairs sorted by frequency.

    Candidates below ``min_rel_height * max(mag)`` are dropped; the rest
    are pruned greedily (tallest first) so that no two kept peaks are
    closer than ``min_separation`` MHz (default: two native bins).
    """
    if not 0 < min_rel_height <= 1:
        raise ValueError("min_rel_height must be in (0, 1]")
    if min_separation is None:
        min_separation = 2.0 * s.bin_width
    mag = s.mag
    top = float(mag.max()) if mag.size else 0.0
    if top <= 0:
        return []
    inner = (mag[1:-1] > mag[:-2]) & (mag[1:-1] >= mag[2:])
    cand = np.flatnonzero(inner) + 1
    cand = cand[mag[cand] >= min_rel_height * top]
    order = cand[np.argsort(-mag[cand], kind="stable")]
    kept: list[tuple[float, float]] = []
    df = s.df
    for k in order:
        off, height = _refine(mag, int(k))
        f = float(s.freq[k]) + off * df
        if all(abs(f - g) >= min_separation for g, _ in kept):
            kept.append((f, height))
    kept.sort()
    return kept


@dataclass(frozen=True)
class TripletResult:
    """Center line plus nearest flanking lines of a spectrum.

    ``peak_mags`` holds (lower, center, upper) heights; ``asymmetry`` is
    ``((upper - center) - (center - lower)) / 2`` in MHz.
    """

    center_freq: float
    lower_freq: float | None
    upper_freq: float | None
    splitting: float | None
    peak_mags: tuple[float | None, float, float | None]
    asymmetry: float | None

    @property
    def resolved(self) -> bool:
        return self.splitting is not None


def characterize_triplet(
    s: Spectrum,
    expected_center: float,
    min_rel_height: float = 0.1,
    min_separation: float | None = None,
) -> TripletResult:
    if not s.freq[0] <= expected_center <= s.freq[-1]:
        raise ValueError("expected_center outside the spectrum")
    peaks = find_peaks(s, min_rel_height, min_separation)
    near = [pk for pk in peaks if abs(pk[0] - expected_center) <= 0.2 * expected_center]
    if not near:
        raise NoCenterPeakError(f"no spectral peak within 20% of {expected_center:g} MHz")
    center = min(near, key=lambda pk: abs(pk[0] - expected_center))
    below = [pk for pk in peaks if pk[0] < center[0]]
    above = [pk for pk in peaks if pk[0] > center[0]]
    lower = below[-1] if below else None
    upper = above[0] if above else None
    splitting = asym = None
    if lower is not None and upper is not None:
        splitting = 0.5 * (upper[0] - lower[0])
        asym = 0.5 * ((upper[0] - center[0]) - (center[0] - lower[0]))
    return TripletResult(
        center_freq=center[0],
        lower_freq=lower[0] if lower else None,
        upper_freq=upper[0] if upper else None,
        splitting=splitting,
        peak_mags=(lower[1] if lower else None, center[1], upper[1] if upper else None),
        asymmetry=asym,
    )
