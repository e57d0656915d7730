"""Fourth-order Runge-Kutta integration of the Bloch equations.

The equations of motion are affine in the Bloch vector, so one classical
RK4 step is itself an affine map ``[u, v, w, 1] -> M_n [u, v, w, 1]`` that
depends only on the step start time. We build those 4x4 step maps in bulk
with numpy (vectorized over steps, RF phases and hyperfine lines) and only
loop in Python over sample intervals. The arithmetic is the textbook RK4
stage sequence; it is just evaluated on matrices instead of vectors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import NonFiniteError
from .model import TWO_PI, BlochState, DriveParams, fastest_frequency, generator

# Upper bound on 4x4 matrices materialized at once (~13 MB of float64).
_MAP_BUDGET = 200_000


@dataclass(frozen=True)
class IntegratorConfig:
    """Step control.

    ``dt_max=None`` picks 50 steps per period of the fastest frequency in
    the drive parameters.
    """

    dt_max: float | None = None
    rel_tol: float = 1e-8
    mode: Literal["fixed", "adaptive"] = "fixed"

    def __post_init__(self):
        if self.dt_max is not None and not self.dt_max > 0:
            raise ValueError("dt_max must be > 0")
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be > 0")
        if self.mode not in ("fixed", "adaptive"):
            raise ValueError(f"unknown integrator mode {self.mode!r}")

    def step_for(self, p: DriveParams) -> float:
        if self.dt_max is not None:
            return self.dt_max
        return default_dt(p)


def default_dt(p: DriveParams) -> float:
    f_max = fastest_frequency(p)
    # Relaxation-only runs still need a sane step.
    f_max = max(f_max, (p.gamma1 + p.gamma2) / TWO_PI, 1e-3)
    return 1.0 / (50.0 * f_max)


@dataclass(frozen=True)
class TimeTrace:
    """P(m_S=0) sampled on a uniform grid of MW pulse durations (us)."""

    t: np.ndarray
    p0: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        p0 = np.asarray(self.p0, dtype=float)
        if t.ndim != 1 or t.shape != p0.shape:
            raise ValueError("t and p0 must be 1-D arrays of equal length")
        if t.size >= 2:
            steps = np.diff(t)
            if np.any(steps <= 0):
                raise ValueError("time grid must be strictly increasing")
            if np.ptp(steps) > 1e-9 * max(abs(t[-1]), 1.0):
                raise ValueError("time grid must be uniform")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "p0", p0)

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])

    def __len__(self) -> int:
        return self.t.size


@dataclass(frozen=True)
class ShotNoise:
    """Binomial readout noise: ``photons`` detection events per point."""

    photons: int
    seed: int = 0

    def apply(self, p0: np.ndarray) -> np.ndarray:
        rng = np.random.default_rng(self.seed)
        counts = rng.binomial(self.photons, np.clip(p0, 0.0, 1.0))
        return counts / self.photons


def _matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # einsum keeps the reduction order fixed (no BLAS threading).
    return np.einsum("...ij,...jk->...ik", a, b)


def rk4_maps(p: DriveParams, t: np.ndarray, h: float, phases: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    """RK4 step maps for step start times ``t`` and ensemble members.

    Returns shape ``t.shape + (n_members, 4, 4)``; member ``e`` uses RF phase
    ``phases[e]`` and static detuning offset ``offsets[e]``.
    """
    t = np.asarray(t, dtype=float)[..., None]
    phases = np.asarray(phases, dtype=float)
    offsets = np.asarray(offsets, dtype=float)
    w = TWO_PI * p.rf_frequency

    def gen(tt):
        det = p.mw_detuning + offsets + p.rf_amplitude * np.cos(w * tt + phases)
        return generator(p, det)

    g1, g2, g3 = gen(t), gen(t + 0.5 * h), gen(t + h)
    eye = np.eye(4)
    k1 = g1
    k2 = _matmul(g2, eye + 0.5 * h * k1)
    k3 = _matmul(g2, eye + 0.5 * h * k2)
    k4 = _matmul(g3, eye + h * k3)
    return eye + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _propagate(p, phases, offsets, y0, t0, h, steps_per_interval, n_intervals):
    """Fixed-step RK4; returns states at every interval boundary.

    Output shape ``(n_intervals + 1, n_members, 4)``.
    """
    n_members = len(phases)
    s = steps_per_interval
    out = np.empty((n_intervals + 1, n_members, 4))
    out[0] = y0
    y = y0
    block = max(1, _MAP_BUDGET // (s * n_members))
    sub = max(1, _MAP_BUDGET // (block * n_members))
    for j0 in range(0, n_intervals, block):
        j1 = min(n_intervals, j0 + block)
        idx = np.arange(j0, j1)[:, None] * s
        prod = None
        for i0 in range(0, s, sub):
            i1 = min(s, i0 + sub)
            # integer step index times h keeps grid times free of accumulated drift
            times = t0 + (idx + np.arange(i0, i1)[None, :]) * h
            maps = rk4_maps(p, times, h, phases, offsets)
            for i in range(i1 - i0):
                prod = maps[:, i] if prod is None else _matmul(maps[:, i], prod)
        for k in range(j1 - j0):
            y = np.einsum("eij,ej->ei", prod[k], y)
            out[j0 + k + 1] = y
        if not np.all(np.isfinite(y)):
            raise NonFiniteError(f"Bloch vector became non-finite near t = {t0 + j1 * s * h:g} us")
    return out


def _adaptive(p, phases, offsets, y0, t0, t1, dt_max, rel_tol):
    """Step-doubling RK4 from t0 to t1 (step never exceeds dt_max)."""
    y = y0
    t = t0
    h = dt_max
    while t1 - t > 1e-12 * max(1.0, abs(t1)):
        h = min(h, t1 - t)
        while True:
            full = np.einsum("eij,ej->ei", rk4_maps(p, t, h, phases, offsets), y)
            half = rk4_maps(p, np.array([t, t + 0.5 * h]), 0.5 * h, phases, offsets)
            two = np.einsum("eij,ej->ei", half[1], np.einsum("eij,ej->ei", half[0], y))
            scale = max(float(np.max(np.abs(two[:, :3]))), 1e-12)
            err = float(np.max(np.abs(two - full))) / (15.0 * scale)
            if not math.isfinite(err):
                raise NonFiniteError(f"Bloch vector became non-finite near t = {t:g} us")
            if err < rel_tol or h < 1e-14:
                break
            h *= 0.5
        y = two
        t += h
        if err < rel_tol / 32.0:
            h = min(2.0 * h, dt_max)
    return y


def _ensemble(p: DriveParams, rf_phase_average: int):
    """(phases, offsets, weights) of the incoherent ensemble."""
    k = rf_phase_average if p.rf_amplitude > 0 else 1
    phases = p.rf_phase + TWO_PI * np.arange(k) / k
    if p.hyperfine is None:
        lines = [(0.0, 1.0)]
    else:
        lines = [(o, wt) for o, wt in zip(p.hyperfine.offsets, p.hyperfine.weights) if wt > 0]
    ph = np.array([phi for _ in lines for phi in phases])
    off = np.array([o for o, _ in lines for _ in phases])
    wts = np.array([wt / k for _, wt in lines for _ in phases])
    return ph, off, wts


def integrate(p: DriveParams, cfg: IntegratorConfig, s0: BlochState, t0: float, t1: float) -> BlochState:
    """Bloch state at ``t1`` starting from ``s0`` at ``t0``.

    Uses the single static detuning in ``p`` (hyperfine lines are ignored
    here; ensembles are handled by :func:`rabi_trace`).
    """
    if t1 < t0:
        raise ValueError("t1 must be >= t0")
    y0 = np.array([[s0.u, s0.v, s0.w, 1.0]])
    phases = np.array([p.rf_phase])
    offsets = np.zeros(1)
    if t1 == t0:
        return s0
    dt_max = cfg.step_for(p)
    if cfg.mode == "adaptive":
        y = _adaptive(p, phases, offsets, y0, t0, t1, dt_max, cfg.rel_tol)
    else:
        n = max(1, math.ceil((t1 - t0) / dt_max - 1e-9))
        y = _propagate(p, phases, offsets, y0, t0, (t1 - t0) / n, n, 1)[-1]
    return BlochState.from_array(y[0, :3])


def rabi_trace(
    p: DriveParams,
    cfg: IntegratorConfig,
    tau_max: float,
    n_samples: int,
    rf_phase_average: int = 16,
    shot_noise: ShotNoise | None = None,
) -> TimeTrace:
    """P(m_S=0) after MW pulses of duration 0 .. tau_max, starting in m_S = 0.

    The RF phase at pulse start is averaged over ``rf_phase_average``
    equally spaced values (pulses not synchronized to the RF), and
    hyperfine lines are averaged with their population weights.
    """
    if n_samples < 2:
        raise ValueError("n_samples must be >= 2")
    if rf_phase_average < 1:
        raise ValueError("rf_phase_average must be >= 1")
    if not tau_max > 0:
        raise ValueError("tau_max must be > 0")
    phases, offsets, weights = _ensemble(p, rf_phase_average)
    t = np.linspace(0.0, tau_max, n_samples)
    y0 = np.tile([0.0, 0.0, 1.0, 1.0], (len(phases), 1))
    spacing = tau_max / (n_samples - 1)
    dt_max = cfg.step_for(p)
    if cfg.mode == "adaptive":
        states = [y0]
        for j in range(n_samples - 1):
            states.append(_adaptive(p, phases, offsets, states[-1], t[j], t[j + 1], dt_max, cfg.rel_tol))
        states = np.stack(states)
    else:
        s = max(1, math.ceil(spacing / dt_max - 1e-9))
        states = _propagate(p, phases, offsets, y0, 0.0, spacing / s, s, n_samples - 1)
    p0 = (0.5 * (1.0 + states[:, :, 2]) * weights[None, :]).sum(axis=1)
    if shot_noise is not None:
        p0 = shot_noise.apply(p0)
    return TimeTrace(t, p0)
