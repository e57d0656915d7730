"""Figure-level measurement protocols built on the model, integrator and spectra.

Every sweep evaluates its points independently and assembles them in index
order, so results do not depend on ``jobs``.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Literal, Sequence

import numpy as np
from scipy.optimize import least_squares

from . import analytic
from .errors import NoCenterPeakError, RegimeViolationError
from .integrator import IntegratorConfig, ShotNoise, TimeTrace, rabi_trace
from .model import DriveParams
from .spectral import Spectrum, TripletResult, characterize_triplet, fft_spectrum, find_peaks


def parallel_map(fn: Callable, items: Sequence, jobs: int = 1) -> list:
    """``[fn(x) for x in items]``, optionally spread over worker processes."""
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=min(jobs, len(items))) as pool:
        return list(pool.map(fn, items))


@dataclass
class SweepResult:
    """Per-point outputs of a parameter sweep.

    ``values`` holds one array per scalar quantity (same length as ``axis``;
    NaN where undefined); ``summary`` holds sweep-level scalars.
    """

    axis_name: str
    axis: np.ndarray
    params: list[DriveParams]
    traces: list[TimeTrace] | None = None
    spectra: list[Spectrum] | None = None
    triplets: list[TripletResult | None] | None = None
    values: dict[str, np.ndarray] = field(default_factory=dict)
    summary: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.axis = np.asarray(self.axis, dtype=float)
        d = np.diff(self.axis)
        if d.size and not (np.all(d > 0) or np.all(d < 0)):
            raise ValueError(f"{self.axis_name} axis must be strictly monotone")


# ---------------------------------------------------------------------------
# CW ESR (phenomenological line model)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EsrConfig:
    """MW detuning scan and line model.

    ``linewidth`` is the Lorentzian half width at half maximum (MHz).
    """

    mw_start: float = -50.0
    mw_stop: float = 50.0
    mw_points: int = 2001
    regime: Literal["adiabatic", "resolved-sideband"] = "resolved-sideband"
    linewidth: float = 0.5
    contrast: float = 0.2

    def __post_init__(self):
        if self.mw_points < 2:
            raise ValueError("mw_points must be >= 2")
        if not self.linewidth > 0:
            raise ValueError("linewidth must be > 0")
        if not 0 < self.contrast <= 0.4:
            raise ValueError("contrast must be in (0, 0.4]")
        if self.regime not in ("adiabatic", "resolved-sideband"):
            raise ValueError(f"unknown regime {self.regime!r}")

    @property
    def detunings(self) -> np.ndarray:
        return np.linspace(self.mw_start, self.mw_stop, self.mw_points)


def lorentzian(x, hwhm: float):
    """Unit-peak Lorentzian."""
    x = np.asarray(x, dtype=float) / hwhm
    return 1.0 / (1.0 + x * x)


def _check_regime(p: DriveParams, cfg: EsrConfig, regime: str):
    if regime == "adiabatic" and not p.rf_frequency <= cfg.linewidth / 10:
        raise RegimeViolationError(
            f"adiabatic regime needs rf_frequency <= linewidth/10 ({cfg.linewidth / 10:g} MHz)"
        )
    if regime == "resolved-sideband" and not p.rf_frequency >= 3 * cfg.linewidth:
        raise RegimeViolationError(
            f"resolved-sideband regime needs rf_frequency >= 3 linewidth ({3 * cfg.linewidth:g} MHz)"
        )


def _hyperfine_lines(p: DriveParams):
    if p.hyperfine is None:
        return [(0.0, 1.0)]
    return [(o, w) for o, w in zip(p.hyperfine.offsets, p.hyperfine.weights) if w > 0]


def sideband_order(x: float, tol: float = 1e-6) -> int:
    """Smallest N with 1 - sum_{|n|<=N} J_n(x)^2 < tol."""
    total = analytic.bessel_j(0, x) ** 2
    n = 0
    while 1.0 - total >= tol:
        n += 1
        total += 2.0 * analytic.bessel_j(n, x) ** 2
        if n >= 50:
            break
    return n


def _phase_samples(n: int) -> np.ndarray:
    return 2.0 * np.pi * (np.arange(n) + 0.5) / n


def esr_spectrum(p: DriveParams, cfg: EsrConfig = EsrConfig()) -> SweepResult:
    """Fluorescence contrast versus MW detuning under RF modulation."""
    _check_regime(p, cfg, cfg.regime)
    delta = cfg.detunings
    contrast = np.zeros_like(delta)
    summary: dict[str, Any] = {"regime": cfg.regime}
    if cfg.regime == "resolved-sideband":
        x = p.rf_amplitude / p.rf_frequency
        n_max = sideband_order(x)
        orders = list(range(-n_max, n_max + 1))
        weights = [analytic.bessel_j(n, x) ** 2 for n in orders]
        for off, hw in _hyperfine_lines(p):
            for n, wn in zip(orders, weights):
                contrast += hw * wn * lorentzian(delta - off - n * p.rf_frequency, cfg.linewidth)
        line_area = cfg.contrast * math.pi * cfg.linewidth
        summary.update(
            orders=orders,
            line_centers_mhz=[n * p.rf_frequency for n in orders],
            line_weights=weights,
            sideband_areas=[line_area * wn for wn in weights],
            area_ratios=[wn / weights[n_max] for wn in weights],
        )
    else:
        phi = _phase_samples(512)
        for off, hw in _hyperfine_lines(p):
            centers = off + p.rf_amplitude * np.cos(phi)
            contrast += hw * lorentzian(delta[:, None] - centers[None, :], cfg.linewidth).mean(axis=1)
        summary.update(horn_positions_mhz=[-p.rf_amplitude, p.rf_amplitude])
    contrast *= cfg.contrast
    summary["total_area"] = float(np.sum(contrast) * (delta[1] - delta[0]))
    return SweepResult(
        "mw_detuning_mhz", delta, [p], values={"contrast": contrast, "fluorescence": 1.0 - contrast}, summary=summary
    )


@dataclass
class PhaseGatedMap:
    """ESR contrast per RF-phase gate (rows) and MW detuning (columns)."""

    phases: np.ndarray
    detunings: np.ndarray
    contrast: np.ndarray
    ridge: np.ndarray
    amplitude: float
    period: float
    phase_offset: float


def _gated_contrast(delta, phase_centers, amplitude, phase0, cycles, duty, hwhm, n_sub=512):
    u = (np.arange(n_sub) + 0.5) / n_sub - 0.5
    ph = phase_centers[:, None] + 2.0 * np.pi * duty * u[None, :]
    centers = amplitude * np.cos(cycles * ph - phase0)
    return lorentzian(delta[None, :, None] - centers[:, None, :], hwhm).mean(axis=2)


def phase_gated_esr(p: DriveParams, cfg: EsrConfig, n_phase_bins: int = 10, duty: float = 0.2) -> PhaseGatedMap:
    """Adiabatic ESR with photon counts gated on the RF phase.

    Each bin averages the instantaneous line over a gate covering ``duty``
    of the RF cycle. The ridge of the map is fitted with the same gated
    line model (free amplitude, phase offset and cycles per RF period), so
    the gate's averaging of the cosine does not bias the amplitude.
    """
    _check_regime(p, cfg, "adiabatic")
    if not 0 < duty <= 1:
        raise ValueError("duty must be in (0, 1]")
    if n_phase_bins < 3:
        raise ValueError("need at least 3 phase bins")
    delta = cfg.detunings
    phases = 2.0 * np.pi * np.arange(n_phase_bins) / n_phase_bins
    lines = _hyperfine_lines(p)

    def model(amp, phase0, cycles):
        out = np.zeros((n_phase_bins, delta.size))
        for off, hw in lines:
            out += hw * _gated_contrast(delta - off, phases, amp, phase0 + p.rf_phase, cycles, duty, cfg.linewidth)
        return cfg.contrast * out

    data = model(p.rf_amplitude, 0.0, 1.0)
    ridge = delta[np.argmax(data, axis=1)]
    # start from the ridge's first harmonic across bins
    h1 = np.fft.rfft(ridge)[1] * 2.0 / n_phase_bins
    x0 = [max(abs(h1), cfg.linewidth), -np.angle(h1) if abs(h1) > 0 else 0.0, 1.0]

    def resid(x):
        return (model(*x) - data).ravel()

    fit = least_squares(resid, x0, x_scale=[1.0, 0.1, 0.01], xtol=1e-12, ftol=1e-12, gtol=1e-12)
    amp, phase0, cycles = fit.x
    if amp < 0:
        amp, phase0 = -amp, phase0 + np.pi
    return PhaseGatedMap(
        phases=phases,
        detunings=delta,
        contrast=data,
        ridge=ridge,
        amplitude=float(amp),
        period=float(2.0 * np.pi / cycles),
        phase_offset=float(math.remainder(phase0, 2.0 * np.pi)),
    )


# ---------------------------------------------------------------------------
# Rabi experiments
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TraceJob:
    params: DriveParams
    cfg: IntegratorConfig
    tau_max: float
    n_tau: int
    rf_phase_average: int
    shot_noise: ShotNoise | None = None


def _run_trace(job: TraceJob) -> tuple[TimeTrace, Spectrum]:
    tr = rabi_trace(job.params, job.cfg, job.tau_max, job.n_tau, job.rf_phase_average, job.shot_noise)
    return tr, fft_spectrum(tr)


def _traces(params, cfg, tau_max, n_tau, rf_phase_average, shot_noise, jobs):
    work = []
    for i, p in enumerate(params):
        noise = None
        if shot_noise is not None:
            # one deterministic stream per sweep point
            noise = ShotNoise(shot_noise.photons, shot_noise.seed + i)
        work.append(TraceJob(p, cfg, tau_max, n_tau, rf_phase_average, noise))
    out = parallel_map(_run_trace, work, jobs)
    return [t for t, _ in out], [s for _, s in out]


def rabi_map(
    p_base: DriveParams,
    detunings: Sequence[float],
    tau_max: float,
    n_tau: int,
    cfg: IntegratorConfig = IntegratorConfig(),
    rf_phase_average: int = 16,
    shot_noise: ShotNoise | None = None,
    jobs: int = 1,
) -> SweepResult:
    """Rabi traces versus MW detuning, with the dominant FFT line per trace."""
    detunings = np.asarray(detunings, dtype=float)
    if detunings.size == 0:
        raise ValueError("detuning grid is empty")
    params = [p_base.with_(mw_detuning=float(d)) for d in detunings]
    traces, spectra = _traces(params, cfg, tau_max, n_tau, rf_phase_average, shot_noise, jobs)
    dominant = np.array([s.dominant() for s in spectra])
    depth = np.array([1.0 - float(tr.p0.min()) for tr in traces])
    return SweepResult(
        "mw_detuning_mhz",
        detunings,
        params,
        traces=traces,
        spectra=spectra,
        values={"dominant_freq_mhz": dominant, "depth": depth},
    )


def _gap(t: TripletResult | None) -> float:
    """Two-sided half splitting, or the one visible sideband's distance."""
    if t is None:
        return math.nan
    if t.splitting is not None:
        return t.splitting
    for f in (t.lower_freq, t.upper_freq):
        if f is not None:
            return abs(f - t.center_freq)
    return math.nan


def _triplets(spectra, center):
    out = []
    for s in spectra:
        try:
            out.append(characterize_triplet(s, center))
        except NoCenterPeakError:
            out.append(None)
    return out


def _nan(x):
    return math.nan if x is None else float(x)


def _triplet_values(triplets):
    return {
        "center_freq_mhz": np.array([_nan(t.center_freq) if t else math.nan for t in triplets]),
        "lower_freq_mhz": np.array([_nan(t.lower_freq) if t else math.nan for t in triplets]),
        "upper_freq_mhz": np.array([_nan(t.upper_freq) if t else math.nan for t in triplets]),
        "splitting_mhz": np.array([_nan(t.splitting) if t else math.nan for t in triplets]),
        "gap_mhz": np.array([_gap(t) for t in triplets]),
    }


def sync_point_from_gaps(rabi: np.ndarray, gap: np.ndarray) -> float:
    """Rabi frequency of minimal gap from a hyperbolic fit.

    Near the avoided crossing gap^2 = (rabi - r0)^2 + g^2 is quadratic in
    rabi, so a parabola through gap^2 gives r0 between grid points. Uses
    the points whose gap is within twice the smallest one.
    """
    ok = np.isfinite(gap)
    if not np.any(ok):
        return math.nan
    r, g = rabi[ok], gap[ok]
    k = int(np.argmin(g))
    sel = g <= 2.0 * g[k]
    if sel.sum() < 3 or k in (0, r.size - 1):
        return float(r[k])
    a, b, _ = np.polyfit(r[sel], g[sel] ** 2, 2)
    if a <= 0:
        return float(r[k])
    return float(-b / (2.0 * a))


def sync_scan(
    p_base: DriveParams,
    rabi_scan: Sequence[float],
    tau_max: float = 20.0,
    n_tau: int = 2048,
    cfg: IntegratorConfig = IntegratorConfig(),
    rf_phase_average: int = 16,
    shot_noise: ShotNoise | None = None,
    jobs: int = 1,
) -> SweepResult:
    """Rabi spectra while the MW power sweeps the Rabi frequency across rf."""
    if p_base.mw_detuning != 0:
        raise ValueError("sync_scan runs at MW resonance (mw_detuning = 0)")
    rabi_scan = np.asarray(rabi_scan, dtype=float)
    params = [p_base.with_(rabi_frequency=float(r)) for r in rabi_scan]
    traces, spectra = _traces(params, cfg, tau_max, n_tau, rf_phase_average, shot_noise, jobs)
    triplets = _triplets(spectra, p_base.rf_frequency)
    values = _triplet_values(triplets)
    values["dominant_freq_mhz"] = np.array([s.dominant() for s in spectra])
    gap = values["gap_mhz"]
    summary: dict[str, Any] = {}
    if np.any(np.isfinite(gap)):
        summary["min_gap_mhz"] = float(np.nanmin(gap))
        summary["rabi_sync_grid_mhz"] = float(rabi_scan[int(np.nanargmin(gap))])
    summary["rabi_sync_mhz"] = sync_point_from_gaps(rabi_scan, gap)
    return SweepResult("rabi_frequency_mhz", rabi_scan, params, traces, spectra, triplets, values, summary)


def amplitude_scan(
    p_base: DriveParams,
    amplitudes: Sequence[float],
    tau_max: float = 20.0,
    n_tau: int = 2048,
    cfg: IntegratorConfig = IntegratorConfig(),
    rf_phase_average: int = 16,
    shot_noise: ShotNoise | None = None,
    jobs: int = 1,
) -> SweepResult:
    """Triplet splitting at the synchronization point versus RF amplitude."""
    if p_base.mw_detuning != 0 or p_base.rabi_frequency != p_base.rf_frequency:
        raise ValueError("amplitude_scan needs mw_detuning = 0 and rabi_frequency = rf_frequency")
    amplitudes = np.asarray(amplitudes, dtype=float)
    params = [p_base.with_(rf_amplitude=float(a)) for a in amplitudes]
    traces, spectra = _traces(params, cfg, tau_max, n_tau, rf_phase_average, shot_noise, jobs)
    triplets = _triplets(spectra, p_base.rf_frequency)
    values = _triplet_values(triplets)
    split = values["splitting_mhz"]
    ok = np.isfinite(split)
    summary: dict[str, Any] = {"resolved_points": int(ok.sum())}
    if ok.sum() >= 2:
        slope, intercept = np.polyfit(amplitudes[ok], split[ok], 1)
        summary.update(slope=float(slope), intercept_mhz=float(intercept))
    return SweepResult("rf_amplitude_mhz", amplitudes, params, traces, spectra, triplets, values, summary)


def rf_frequency_scan(
    p_base: DriveParams,
    rf_frequencies: Sequence[float],
    tau_max: float = 20.0,
    n_tau: int = 2048,
    cfg: IntegratorConfig = IntegratorConfig(),
    rf_phase_average: int = 16,
    shot_noise: ShotNoise | None = None,
    jobs: int = 1,
) -> SweepResult:
    """Rabi spectra versus RF frequency at fixed MW power.

    A point is locked when the dominant line sits on the RF frequency
    within one native FFT bin.
    """
    if p_base.mw_detuning != 0:
        raise ValueError("rf_frequency_scan runs at MW resonance (mw_detuning = 0)")
    rf = np.asarray(rf_frequencies, dtype=float)
    params = [p_base.with_(rf_frequency=float(f)) for f in rf]
    traces, spectra = _traces(params, cfg, tau_max, n_tau, rf_phase_average, shot_noise, jobs)
    dominant = np.array([s.dominant() for s in spectra])
    bins = np.array([s.bin_width for s in spectra])
    locked = np.abs(dominant - rf) <= bins
    summary: dict[str, Any] = {"locked_points": int(locked.sum())}
    if locked.any():
        lo, hi = float(rf[locked].min()), float(rf[locked].max())
        summary.update(locking_band_mhz=[lo, hi], capture_width_mhz=hi - lo)
    else:
        summary.update(locking_band_mhz=None, capture_width_mhz=0.0)
    return SweepResult(
        "rf_frequency_mhz",
        rf,
        params,
        traces,
        spectra,
        values={"dominant_freq_mhz": dominant, "locked": locked.astype(float)},
        summary=summary,
    )


# ---------------------------------------------------------------------------
# Floquet-side sweeps (no time integration)
# ---------------------------------------------------------------------------


def _floquet_point(args):
    rabi, rf, amp, cfg = args
    hi, lo = analytic.floquet_quasienergies(rabi, rf, amp, cfg)
    return hi, lo, analytic.quasienergy_gap(rabi, rf, amp, cfg, check=False)


def floquet_scan(
    p_base: DriveParams, rabi_scan: Sequence[float], cfg: analytic.FloquetConfig = analytic.FloquetConfig(), jobs: int = 1
) -> SweepResult:
    """Quasi-energies and gap versus Rabi frequency (MW resonance)."""
    rabi_scan = np.asarray(rabi_scan, dtype=float)
    rows = parallel_map(
        _floquet_point, [(float(r), p_base.rf_frequency, p_base.rf_amplitude, cfg) for r in rabi_scan], jobs
    )
    arr = np.array(rows, dtype=float).reshape(-1, 3)
    dressed = np.array([analytic.dressed_splitting(r, p_base.rf_frequency, p_base.rf_amplitude) for r in rabi_scan])
    return SweepResult(
        "rabi_frequency_mhz",
        rabi_scan,
        [p_base.with_(rabi_frequency=float(r)) for r in rabi_scan],
        values={
            "quasienergy_plus_mhz": arr[:, 0],
            "quasienergy_minus_mhz": arr[:, 1],
            "gap_mhz": arr[:, 2],
            "dressed_splitting_mhz": dressed,
        },
    )


def _lightshift_point(args):
    rf, amp, cfg = args
    ls = analytic.lightshift_center(rf, amp, cfg)
    return ls.center, ls.series


def lightshift_scan(
    p_base: DriveParams,
    amplitudes: Sequence[float],
    cfg: analytic.FloquetConfig = analytic.FloquetConfig(),
    jobs: int = 1,
) -> SweepResult:
    """Synchronization Rabi frequency versus RF amplitude."""
    amplitudes = np.asarray(amplitudes, dtype=float)
    rows = parallel_map(_lightshift_point, [(p_base.rf_frequency, float(a), cfg) for a in amplitudes], jobs)
    arr = np.array(rows, dtype=float).reshape(-1, 2)
    c2, c4, c6 = analytic.lightshift_series(cfg)
    return SweepResult(
        "rf_amplitude_mhz",
        amplitudes,
        [p_base.with_(rf_amplitude=float(a)) for a in amplitudes],
        values={"rabi_sync_mhz": arr[:, 0], "rabi_sync_series_mhz": arr[:, 1]},
        summary={"series_coefficients": {"c2": c2, "c4": c4, "c6": c6}},
    )


def dominant_peaks(s: Spectrum, min_rel_height: float = 0.1) -> list[tuple[float, float]]:
    """Peaks sorted by height, tallest first."""
    return sorted(find_peaks(s, min_rel_height), key=lambda pk: -pk[1])
