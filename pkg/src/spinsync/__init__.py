"""Simulation of a spin qubit under MW driving and parametric RF modulation."""

__version__ = "0.1.0"

from .analytic import (
    FloquetConfig,
    bessel_j,
    dressed_splitting,
    effective_rabi,
    floquet_quasienergies,
    lightshift_center,
    sideband_rabi,
)
from .integrator import IntegratorConfig, TimeTrace, integrate, rabi_trace
from .model import BlochState, DriveParams, Hyperfine, bloch_rhs, instantaneous_detuning
from .spectral import Spectrum, TripletResult, characterize_triplet, fft_spectrum, find_peaks

__all__ = [
    "BlochState",
    "DriveParams",
    "FloquetConfig",
    "Hyperfine",
    "IntegratorConfig",
    "Spectrum",
    "TimeTrace",
    "TripletResult",
    "bessel_j",
    "bloch_rhs",
    "characterize_triplet",
    "dressed_splitting",
    "effective_rabi",
    "fft_spectrum",
    "find_peaks",
    "floquet_quasienergies",
    "instantaneous_detuning",
    "integrate",
    "lightshift_center",
    "rabi_trace",
    "sideband_rabi",
]
