"""Closed-form and Floquet oracles for the doubly driven qubit.

All frequencies in MHz. The Floquet part works with the MW-resonant
rotating-frame Hamiltonian in frequency units,

    H(t)/h = (rabi/2) sigma_x + (rf_amplitude/2) cos(2 pi rf t) sigma_z,

whose Bloch-vector dynamics is exactly that of :mod:`spinsync.model`
at zero detuning and without relaxation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import NotConvergedError, OutOfRangeError

# ---------------------------------------------------------------------------
# Bessel functions of the first kind
# ---------------------------------------------------------------------------

_SERIES_MAX_X = 1.0


def _bessel_series(n: int, x: float) -> float:
    # converges fast and without cancellation trouble for |x| <= 1
    half = 0.5 * x
    term = half**n / math.factorial(n)
    total = term
    q = -half * half
    k = 0
    while True:
        k += 1
        term *= q / (k * (k + n))
        total += term
        if abs(term) <= 1e-17 * abs(total):
            return total


def _bessel_miller(n: int, x: float) -> float:
    """Downward recurrence normalized by J0 + 2 (J2 + J4 + ...) = 1, x > 0."""
    m = 2 * ((max(n, int(x)) + 20 + int(math.sqrt(60.0 * max(n, x)))) // 2)
    two_over_x = 2.0 / x
    j_next, j = 0.0, 1e-300
    even_sum = 0.0
    result = 0.0
    for k in range(m, 0, -1):
        j_prev = k * two_over_x * j - j_next
        j_next, j = j, j_prev
        if abs(j) > 1e250:
            j *= 1e-250
            j_next *= 1e-250
            even_sum *= 1e-250
            result *= 1e-250
        # j now holds the unnormalized J_{k-1}
        if k - 1 == n:
            result = j
        if (k - 1) % 2 == 0 and k - 1 > 0:
            even_sum += j
    norm = 2.0 * even_sum + j
    return result / norm


def bessel_j(n: int, x: float) -> float:
    """Bessel function of the first kind J_n(x) for |n|, |x| <= 50."""
    if abs(n) > 50 or not abs(x) <= 50:
        raise OutOfRangeError(f"bessel_j supports |n| <= 50, |x| <= 50; got n={n}, x={x}")
    n = int(n)
    sign = 1.0
    if n < 0:
        n = -n
        sign = -1.0 if n % 2 else 1.0
    if x < 0:
        x = -x
        sign *= -1.0 if n % 2 else 1.0
    if x == 0:
        return sign * (1.0 if n == 0 else 0.0)
    if x <= _SERIES_MAX_X:
        return sign * _bessel_series(n, x)
    return sign * _bessel_miller(n, x)


# ---------------------------------------------------------------------------
# Closed forms
# ---------------------------------------------------------------------------


def sideband_rabi(rabi: float, n: int, rf_amplitude: float, rf_frequency: float) -> float:
    """Rabi frequency when driving the n-th motional sideband: rabi |J_n(amp/rf)|."""
    if not rf_frequency > 0:
        raise ValueError("rf_frequency must be > 0")
    return rabi * abs(bessel_j(n, rf_amplitude / rf_frequency))


def dressed_splitting(rabi: float, rf_frequency: float, rf_amplitude: float) -> float:
    """Doubly dressed splitting sqrt((rabi - rf)^2 + amp^2 / 4).

    The Rabi-oscillation spectrum then carries lines at ``rf`` and
    ``rf +/- splitting``.
    """
    return math.sqrt((rabi - rf_frequency) ** 2 + 0.25 * rf_amplitude**2)


def triplet_lines(rabi: float, rf_frequency: float, rf_amplitude: float) -> tuple[float, float, float]:
    d = dressed_splitting(rabi, rf_frequency, rf_amplitude)
    return rf_frequency - d, rf_frequency, rf_frequency + d


def effective_rabi(rabi: float, detuning: float) -> float:
    """Small-detuning expansion rabi + detuning^2 / (2 rabi) of sqrt(rabi^2 + detuning^2).

    At detuning = 0.6 rabi the expansion already overshoots the exact
    generalized Rabi frequency by about 1.2 %.
    """
    if not rabi > 0:
        raise ValueError("rabi must be > 0")
    return rabi + detuning**2 / (2.0 * rabi)


def generalized_rabi(rabi: float, detuning: float) -> float:
    return math.hypot(rabi, detuning)


# ---------------------------------------------------------------------------
# Floquet quasi-energies
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FloquetConfig:
    truncation: int = 40
    eigentolerance: float = 1e-9

    def __post_init__(self):
        if self.truncation < 1:
            raise ValueError("truncation must be >= 1")
        if not self.eigentolerance > 0:
            raise ValueError("eigentolerance must be > 0")


def fold(e: float, period: float) -> float:
    """Map ``e`` into the zone (-period/2, period/2]."""
    r = math.fmod(e, period)
    if r > 0.5 * period:
        r -= period
    elif r <= -0.5 * period:
        r += period
    return r


def _circular_distance(a: float, b: float, period: float) -> float:
    return abs(fold(a - b, period))


def floquet_matrix(rabi: float, rf_frequency: float, rf_amplitude: float, truncation: int) -> np.ndarray:
    """Real symmetric Floquet Hamiltonian on |sigma> x |m>, m = -N..N.

    Basis index is ``2 * (m + N) + sigma`` with sigma 0/1 the sigma_z
    eigenstates +1/-1.
    """
    nb = 2 * truncation + 1
    size = 2 * nb
    h = np.zeros((size, size))
    for i, m in enumerate(range(-truncation, truncation + 1)):
        a = 2 * i
        h[a, a] = h[a + 1, a + 1] = m * rf_frequency
        h[a, a + 1] = h[a + 1, a] = 0.5 * rabi
        if i + 1 < nb:
            # cos term couples neighbouring harmonics with half its amplitude
            c = 0.25 * rf_amplitude
            h[a, a + 2] = h[a + 2, a] = c
            h[a + 1, a + 3] = h[a + 3, a + 1] = -c
    return h


def _central_quasienergy(rabi, rf_frequency, rf_amplitude, truncation) -> float:
    h = floquet_matrix(rabi, rf_frequency, rf_amplitude, truncation)
    vals, vecs = np.linalg.eigh(h)
    centre = slice(2 * truncation, 2 * truncation + 2)
    weight = (vecs[centre, :] ** 2).sum(axis=0)
    return fold(float(vals[int(np.argmax(weight))]), rf_frequency)


def _quasienergy_pair(eps: float, rf_frequency: float) -> tuple[float, float]:
    # SU(2) one-period propagator: quasi-energies come as +/- eps mod rf
    a = fold(eps, rf_frequency)
    b = fold(-eps, rf_frequency)
    return (a, b) if a >= b else (b, a)


def floquet_quasienergies(
    rabi: float, rf_frequency: float, rf_amplitude: float, cfg: FloquetConfig = FloquetConfig(), check: bool = True
) -> tuple[float, float]:
    """The two quasi-energies (MHz) folded into (-rf/2, rf/2], larger first.

    With ``check`` the result is recomputed with truncation N+2 and 2N and
    :class:`NotConvergedError` is raised if either moves it by more than
    ``cfg.eigentolerance``.
    """
    if not rf_frequency > 0:
        raise ValueError("rf_frequency must be > 0")
    eps = _central_quasienergy(rabi, rf_frequency, rf_amplitude, cfg.truncation)
    if check:
        for n in (cfg.truncation + 2, 2 * cfg.truncation):
            other = _central_quasienergy(rabi, rf_frequency, rf_amplitude, n)
            # compare the +/- pair, not the arbitrary representative
            moved = min(
                _circular_distance(eps, other, rf_frequency), _circular_distance(eps, -other, rf_frequency)
            )
            if moved > cfg.eigentolerance:
                raise NotConvergedError(
                    f"quasi-energy moved by {moved:.3g} MHz going from N={cfg.truncation} to N={n}"
                )
    return _quasienergy_pair(eps, rf_frequency)


def quasienergy_gap(rabi: float, rf_frequency: float, rf_amplitude: float, cfg: FloquetConfig = FloquetConfig(), check: bool = True) -> float:
    """Smallest distance between the two quasi-energy ladders, MHz.

    Equals ``dressed_splitting`` when rf_amplitude << rf_frequency.
    """
    hi, lo = floquet_quasienergies(rabi, rf_frequency, rf_amplitude, cfg, check)
    d = math.fmod(hi - lo, rf_frequency)
    return min(d, rf_frequency - d)


# ---------------------------------------------------------------------------
# RF light shift of the synchronization point
# ---------------------------------------------------------------------------

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0
SERIES_FIT_RANGE = 0.9


@dataclass(frozen=True)
class LightShift:
    """Rabi frequency that minimizes the quasi-energy gap.

    ``coefficients`` are (c2, c4, c6) of the even series
    rabi_sync / rf = 1 + c2 x^2 + c4 x^4 + c6 x^6 with x = amplitude / rf,
    fitted to the Floquet result over x in [0, 0.9].
    """

    center: float
    series: float
    coefficients: tuple[float, float, float]


def _sync_point(rf_frequency: float, rf_amplitude: float, cfg: FloquetConfig) -> float:
    if rf_amplitude == 0:
        return rf_frequency

    def gap(r):
        return quasienergy_gap(r, rf_frequency, rf_amplitude, cfg, check=False)

    # the gap also closes at rabi -> 0, so stay around rabi ~ rf
    grid = np.linspace(0.6 * rf_frequency, 1.2 * rf_frequency, 31)
    vals = [gap(r) for r in grid]
    k = int(np.argmin(vals))
    a, b = grid[max(k - 1, 0)], grid[min(k + 1, grid.size - 1)]
    tol = 1e-4 * rf_frequency
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = gap(c), gap(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = gap(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = gap(d)
    r = 0.5 * (a + b)
    quasienergy_gap(r, rf_frequency, rf_amplitude, cfg, check=True)
    return r


@lru_cache(maxsize=8)
def lightshift_series(cfg: FloquetConfig = FloquetConfig()) -> tuple[float, float, float]:
    """(c2, c4, c6) fitted to Floquet synchronization points.

    The problem is scale free in rf, so the coefficients are universal.
    """
    x = np.linspace(0.0, SERIES_FIT_RANGE, 19)
    y = np.array([_sync_point(1.0, xi, cfg) - 1.0 for xi in x])
    basis = np.stack([x**2, x**4, x**6], axis=1)
    coef, *_ = np.linalg.lstsq(basis, y, rcond=None)
    return tuple(float(c) for c in coef)


def lightshift_center(rf_frequency: float, rf_amplitude: float, cfg: FloquetConfig = FloquetConfig()) -> LightShift:
    """Rabi frequency (MHz) at which the triplet splitting is smallest."""
    if not 0 <= rf_amplitude < rf_frequency:
        raise ValueError("need 0 <= rf_amplitude < rf_frequency")
    center = _sync_point(rf_frequency, rf_amplitude, cfg)
    c2, c4, c6 = lightshift_series(cfg)
    x = rf_amplitude / rf_frequency
    series = rf_frequency * (1.0 + c2 * x**2 + c4 * x**4 + c6 * x**6)
    return LightShift(float(center), float(series), (c2, c4, c6))
