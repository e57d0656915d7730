"""Drive parameters and rotating-frame Bloch equations of the doubly driven qubit.

Every frequency handed to this module is an ordinary frequency in MHz and
every time is in microseconds; conversion to angular units (x 2 pi) happens
here and nowhere else. Relaxation rates are plain rates in 1/us.

The MW drive is treated in the rotating-wave approximation; the RF energy
modulation is kept fully time dependent, so counter-rotating effects of the
RF field (Bloch-Siegert shifts of the dressed qubit) come out of the
integration without further approximation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

TWO_PI = 2.0 * math.pi

#: Longitudinal relaxation rate for T1 = 173 us, in 1/us.
GAMMA1_NV = 1.0 / 173.0
#: Transverse decay rate 3e5 1/s expressed in 1/us.
GAMMA2_NV = 0.3
#: 14N hyperfine splitting of the NV ground state, MHz.
HYPERFINE_SPLITTING_MHZ = 2.16


@dataclass(frozen=True)
class Hyperfine:
    """Incoherent three-line 14N ensemble: detuning offsets -A, 0, +A."""

    splitting: float = HYPERFINE_SPLITTING_MHZ
    weights: tuple[float, float, float] = (1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0)

    def __post_init__(self):
        weights = tuple(float(x) for x in self.weights)
        if len(weights) != 3:
            raise ValueError("hyperfine needs exactly three population weights")
        if any(x < 0 for x in weights) or abs(sum(weights) - 1.0) > 1e-12:
            raise ValueError(f"hyperfine weights must be >= 0 and sum to 1, got {weights}")
        object.__setattr__(self, "weights", weights)

    @classmethod
    def polarized(cls, splitting: float = HYPERFINE_SPLITTING_MHZ) -> Hyperfine:
        """Nuclear spin fully polarized (excited-state level anti-crossing)."""
        return cls(splitting, (0.0, 1.0, 0.0))

    @property
    def offsets(self) -> tuple[float, float, float]:
        return (-self.splitting, 0.0, self.splitting)


@dataclass(frozen=True)
class DriveParams:
    """All drive and relaxation constants of the doubly driven qubit.

    Attributes:
        rabi_frequency: MW Rabi frequency, MHz.
        rf_frequency: RF (emulated mechanical) frequency, MHz.
        mw_detuning: MW detuning from the spin transition, MHz.
        rf_amplitude: depth of the parametric energy modulation, MHz.
        rf_phase: RF phase at t = 0, rad.
        gamma1: longitudinal relaxation rate, 1/us.
        gamma2: transverse decay rate, 1/us.
        w_eq: equilibrium longitudinal polarization.
        hyperfine: optional three-line ensemble.
    """

    rabi_frequency: float
    rf_frequency: float
    mw_detuning: float = 0.0
    rf_amplitude: float = 0.0
    rf_phase: float = 0.0
    gamma1: float = 0.0
    gamma2: float = 0.0
    w_eq: float = 1.0
    hyperfine: Hyperfine | None = field(default=None)

    def __post_init__(self):
        checks = (
            (self.rabi_frequency >= 0, "rabi_frequency must be >= 0"),
            (self.rf_frequency > 0, "rf_frequency must be > 0"),
            (self.rf_amplitude >= 0, "rf_amplitude must be >= 0"),
            (self.gamma1 >= 0, "gamma1 must be >= 0"),
            (self.gamma2 >= 0, "gamma2 must be >= 0"),
            (abs(self.w_eq) <= 1, "|w_eq| must be <= 1"),
        )
        for ok, msg in checks:
            if not ok:
                raise ValueError(msg)
        for name in ("rabi_frequency", "rf_frequency", "mw_detuning", "rf_amplitude", "rf_phase"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    def with_(self, **changes) -> DriveParams:
        return replace(self, **changes)


@dataclass(frozen=True)
class BlochState:
    """Spin polarization (u, v, w) in the MW rotating frame; w = +1 is m_S = 0."""

    u: float
    v: float
    w: float

    @classmethod
    def ground(cls) -> BlochState:
        return cls(0.0, 0.0, 1.0)

    @classmethod
    def from_array(cls, a) -> BlochState:
        u, v, w = (float(x) for x in a)
        return cls(u, v, w)

    def as_array(self) -> np.ndarray:
        return np.array([self.u, self.v, self.w])

    def norm(self) -> float:
        return math.sqrt(self.u * self.u + self.v * self.v + self.w * self.w)

    @property
    def p0(self) -> float:
        """Population of m_S = 0."""
        return 0.5 * (1.0 + self.w)


def instantaneous_detuning(p: DriveParams, t):
    """MW detuning seen by the spin at time ``t`` (us), in MHz.

    Works elementwise when ``t`` is an array.
    """
    return p.mw_detuning + p.rf_amplitude * np.cos(TWO_PI * p.rf_frequency * t + p.rf_phase)


def bloch_rhs(p: DriveParams, t: float, s: BlochState) -> BlochState:
    """Time derivative of the Bloch vector, per us.

    du/dt = -D(t) v - G2 u
    dv/dt = +D(t) u - W w - G2 v
    dw/dt = +W v - G1 (w - w_eq)

    with D = 2 pi x instantaneous detuning and W = 2 pi x Rabi frequency.
    """
    d = TWO_PI * float(instantaneous_detuning(p, t))
    om = TWO_PI * p.rabi_frequency
    return BlochState(
        -d * s.v - p.gamma2 * s.u,
        d * s.u - om * s.w - p.gamma2 * s.v,
        om * s.v - p.gamma1 * (s.w - p.w_eq),
    )


def generator(p: DriveParams, detuning, offset: float = 0.0) -> np.ndarray:
    """Affine generator of the Bloch equations in homogeneous coordinates.

    Returns an array of shape ``detuning.shape + (4, 4)`` such that
    ``d/dt [u, v, w, 1] = G @ [u, v, w, 1]``. ``detuning`` is the
    instantaneous detuning in MHz (already including RF modulation);
    ``offset`` is an extra static detuning (hyperfine line).
    """
    d = TWO_PI * (np.asarray(detuning, dtype=float) + offset)
    om = TWO_PI * p.rabi_frequency
    g = np.zeros(d.shape + (4, 4))
    g[..., 0, 0] = -p.gamma2
    g[..., 0, 1] = -d
    g[..., 1, 0] = d
    g[..., 1, 1] = -p.gamma2
    g[..., 1, 2] = -om
    g[..., 2, 1] = om
    g[..., 2, 2] = -p.gamma1
    g[..., 2, 3] = p.gamma1 * p.w_eq
    return g


def fastest_frequency(p: DriveParams) -> float:
    """Largest frequency scale of the dynamics, MHz."""
    hf = p.hyperfine.splitting if p.hyperfine is not None else 0.0
    return max(p.rabi_frequency, p.rf_frequency, abs(p.mw_detuning) + hf + p.rf_amplitude)
