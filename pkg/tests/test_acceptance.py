"""Acceptance gate: one PASS/FAIL line per criterion, printed as it runs."""

import json
import math
import time

import numpy as np
import pytest

from spinsync import analytic, cli
from spinsync.analytic import FloquetConfig, bessel_j, lightshift_center, lightshift_series, quasienergy_gap
from spinsync.experiments import EsrConfig, amplitude_scan, esr_spectrum, phase_gated_esr, rabi_map, sync_scan
from spinsync.integrator import IntegratorConfig, integrate, rabi_trace
from spinsync.model import GAMMA1_NV, GAMMA2_NV, BlochState, DriveParams
from spinsync.spectral import characterize_triplet, fft_spectrum

NV = {"gamma1": GAMMA1_NV, "gamma2": GAMMA2_NV}


def bessel_oracle(n, x, terms=40):
    """Plain ascending series, independent of the package's implementation."""
    return sum((-1) ** k * (x / 2) ** (2 * k + n) / (math.factorial(k) * math.factorial(k + n)) for k in range(terms))


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\n[acceptance {number}] {'PASS' if ok else 'FAIL'}: {detail}")
        assert ok, detail

    return emit


@pytest.fixture(scope="module")
def sideband_map():
    p = DriveParams(0.5, 15.0, rf_amplitude=4.5)
    t0 = time.perf_counter()
    res = rabi_map(p, [-15.0, 0.0, 15.0], tau_max=100.0, n_tau=4096)
    return res, time.perf_counter() - t0


def test_bessel_sideband_law(sideband_map, report):
    res, elapsed = sideband_map
    f = dict(zip(res.axis.tolist(), res.values["dominant_freq_mhz"]))
    expect = {0.0: 0.5 * bessel_oracle(0, 0.3), 15.0: 0.5 * bessel_oracle(1, 0.3), -15.0: 0.5 * bessel_oracle(1, 0.3)}
    errs = {d: abs(f[d] / expect[d] - 1) for d in expect}
    ok = max(errs.values()) <= 0.03 and elapsed <= 30
    detail = ", ".join(f"d={d:+g}: {f[d]:.5f} vs {expect[d]:.5f}" for d in sorted(expect))
    report(1, ok, f"{detail}; max rel err {max(errs.values()):.2%}; {elapsed:.1f} s")


def test_esr_sideband_structure(sideband_map, report):
    x = 9.1 / 15.0
    r = esr_spectrum(DriveParams(0.0, 15.0, rf_amplitude=9.1))
    s = r.summary
    centers_ok = all(c == n * 15.0 for n, c in zip(s["orders"], s["line_centers_mhz"]))
    oracle = {n: bessel_oracle(n if n >= 0 else -n, x) ** 2 / bessel_oracle(0, x) ** 2 for n in s["orders"]}
    ratio_err = max(abs(a - oracle[n]) for n, a in zip(s["orders"], s["area_ratios"]))
    # dips sit on the grid points n * 15 MHz
    c = r.values["contrast"]
    dips = [float(r.axis[k]) for k in range(1, c.size - 1) if c[k] > c[k - 1] and c[k] >= c[k + 1] and c[k] > 1e-3]
    dips_ok = all(abs(d - 15.0 * round(d / 15.0)) < 1e-9 for d in dips) and len(dips) >= 3
    # time domain: (sideband Rabi / carrier Rabi)^2 against the same ratio at x = 0.3
    res, _ = sideband_map
    f = dict(zip(res.axis.tolist(), res.values["dominant_freq_mhz"]))
    esr = esr_spectrum(DriveParams(0.0, 15.0, rf_amplitude=4.5)).summary
    esr_ratio = dict(zip(esr["orders"], esr["area_ratios"]))
    td_err = max(abs((f[d] / f[0.0]) ** 2 / esr_ratio[n] - 1) for d, n in ((15.0, 1), (-15.0, -1)))
    ok = centers_ok and dips_ok and ratio_err <= 1e-6 and td_err <= 0.03
    report(2, ok, f"dips at {dips}; max area-ratio err {ratio_err:.1e}; time-domain cross-check {td_err:.2%}")


def test_adiabatic_phase_gated_ridge(report):
    p = DriveParams(0.0, 0.01, rf_amplitude=9.1)
    t0 = time.perf_counter()
    m = phase_gated_esr(p, EsrConfig(-20.0, 20.0, 801, "adiabatic"))
    elapsed = time.perf_counter() - t0
    ok = abs(m.amplitude / 9.1 - 1) <= 0.02 and abs(m.period - 2 * math.pi) <= 0.02 * 2 * math.pi and elapsed <= 5
    report(3, ok, f"amplitude {m.amplitude:.4f} MHz, period {m.period:.4f} rad, {elapsed:.2f} s")


def test_mollow_triplet(report):
    t0 = time.perf_counter()
    details, ok = [], True
    for rf in (6.0, 5.0):
        p = DriveParams(rf, rf, rf_amplitude=2.7, **NV)
        trip = characterize_triplet(fft_spectrum(rabi_trace(p, IntegratorConfig(), 20.0, 2048, 16)), rf)
        lines = (trip.lower_freq, trip.center_freq, trip.upper_freq)
        expect = (rf - 1.35, rf, rf + 1.35)
        err = max(abs(a - b) if a is not None else math.inf for a, b in zip(lines, expect))
        ok &= err <= 0.1
        details.append(f"rf={rf:g}: " + "/".join(f"{v:.3f}" if v is not None else "-" for v in lines) + f" (max err {err:.3f})")
    elapsed = time.perf_counter() - t0
    ok &= elapsed <= 60
    report(4, ok, "; ".join(details) + f"; {elapsed:.1f} s")


def test_linear_capture_region(report):
    res = amplitude_scan(DriveParams(6.0, 6.0, **NV), [0.5, 1.0, 1.5, 2.0, 2.7])
    s = res.summary
    ok = s["resolved_points"] == 5 and abs(s["slope"] - 0.5) <= 0.05 and abs(s["intercept_mhz"]) < 0.1
    report(5, ok, f"splittings {np.round(res.values['splitting_mhz'], 4).tolist()}; slope {s['slope']:.4f}, intercept {s['intercept_mhz']:+.4f} MHz")


def test_light_shift(report):
    res = sync_scan(DriveParams(6.0, 6.0, rf_amplitude=2.7, **NV), np.linspace(5.0, 7.0, 41))
    measured = res.summary["rabi_sync_mhz"]
    floquet = lightshift_center(6.0, 2.7).center
    c = lightshift_series()
    worst = 0.0
    for x in np.linspace(0.0, 0.9, 37):
        ls = lightshift_center(6.0, 6.0 * x)
        worst = max(worst, abs(ls.series - ls.center) / 6.0)
    ok = measured < 6.0 and abs(measured / floquet - 1) <= 0.01 and worst <= 0.002
    report(
        6,
        ok,
        f"sync scan {measured:.4f} MHz vs Floquet {floquet:.4f} MHz ({measured / floquet - 1:+.3%}); "
        f"series c2={c[0]:.5f}, worst series error {worst:.2e} of rf",
    )


def test_floquet_vs_closed_form(report):
    rf = 6.0
    errs, moved = [], []
    for x in (0.02, 0.05, 0.1, 0.2):
        amp = x * rf
        gap = quasienergy_gap(rf, rf, amp)
        errs.append(abs(gap / (amp / 2) - 1))
        hi = analytic.floquet_quasienergies(rf, rf, amp, FloquetConfig(40), check=False)[0]
        hi2 = analytic.floquet_quasienergies(rf, rf, amp, FloquetConfig(42), check=False)[0]
        moved.append(abs(hi - hi2))
    ok = max(errs) <= 0.01 and max(moved) <= 1e-9
    report(7, ok, f"max gap error {max(errs):.2e}; max change N->N+2 {max(moved):.1e} MHz")


def test_integrator_fidelity(report):
    s0 = BlochState(0.6, 0.0, 0.8)
    s1 = integrate(DriveParams(1.0, 1.5, mw_detuning=0.2, rf_amplitude=0.5), IntegratorConfig(dt_max=1e-3), s0, 0.0, 100.0)
    drift = abs(s1.norm() - s0.norm())

    og = math.hypot(5.0, 3.0)
    exact = 1 - (5.0 / og) ** 2 * (1 - math.cos(2 * math.pi * og * 2.0))
    p = DriveParams(5.0, 1.0, mw_detuning=3.0)
    e1, e2 = (abs(integrate(p, IntegratorConfig(dt_max=h), BlochState.ground(), 0.0, 2.0).w - exact) for h in (0.005, 0.0025))

    relax = DriveParams(0.0, 1.0, gamma1=GAMMA1_NV)
    w = integrate(relax, IntegratorConfig(), BlochState(0, 0, -1), 0.0, 173.0).w
    t1_err = abs(w - (1 - 2 * math.exp(-1)))
    ok = drift < 1e-8 and e1 / e2 >= 14 and t1_err <= 1e-6
    report(8, ok, f"norm drift {drift:.1e} over 1e5 steps; error ratio {e1 / e2:.2f}; T1 error {t1_err:.1e}")


def test_parallel_invariance(tmp_path, report):
    doc = {
        "experiment": "sync-scan",
        "drive": {
            "rabi_frequency_mhz": 6.0,
            "mw_detuning_mhz": 0.0,
            "rf_frequency_mhz": 6.0,
            "rf_amplitude_mhz": 2.7,
            "rf_phase_rad": 0.0,
            "gamma1_per_us": GAMMA1_NV,
            "gamma2_per_us": GAMMA2_NV,
            "w_eq": 1.0,
        },
        "settings": {"rabi_scan": {"start": 5.5, "stop": 6.5, "points": 8}, "tau_max_us": 5.0, "n_tau": 512, "rf_phase_average": 4},
        "seed": 3,
    }
    path = tmp_path / "sweep.json"
    path.write_text(json.dumps(doc))
    blobs = []
    for name, jobs in (("j1", "1"), ("j8", "8"), ("j1again", "1")):
        assert cli.main(["run", str(path), "--jobs", jobs, "--out", str(tmp_path / name)]) == 0
        blobs.append((tmp_path / name / "result.csv").read_bytes())
    ok = blobs[0] == blobs[1] == blobs[2]
    report(9, ok, f"--jobs 1, --jobs 8 and a rerun give {'identical' if ok else 'different'} CSVs ({len(blobs[0])} bytes)")
