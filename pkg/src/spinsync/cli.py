"""Command-line front end: ``spinsync run|validate|oracle``."""

from __future__ import annotations

import argparse
import json
import math
import os
import platform
import sys
import tempfile
import time
from dataclasses import replace
from pathlib import Path
from typing import Any, Iterable

import numpy as np

from . import __version__, analytic, experiments
from .config import RunConfig, config_from_dict, load_config
from .errors import SpinSyncError
from .integrator import IntegratorConfig, ShotNoise

EXIT_IO = 14


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    # repr of a Python float is the shortest round-trip decimal
    return repr(float(x))


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_jsonable(v) for v in x.tolist()]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, np.integer):
        return int(x)
    return x


def _trace_kwargs(cfg: RunConfig) -> dict[str, Any]:
    s = cfg.settings
    noise = None
    if s.get("shot_noise_photons") is not None:
        noise = ShotNoise(int(s["shot_noise_photons"]), cfg.seed or 0)
    return {
        "tau_max": float(s["tau_max_us"]),
        "n_tau": int(s["n_tau"]),
        "cfg": IntegratorConfig(s["dt_max_us"], float(s["rel_tol"]), s["integrator"]),
        "rf_phase_average": int(s["rf_phase_average"]),
        "shot_noise": noise,
    }


def _esr_config(cfg: RunConfig) -> experiments.EsrConfig:
    s = cfg.settings
    grid = cfg.grid("mw_scan")
    return experiments.EsrConfig(
        float(grid[0]), float(grid[-1]), int(grid.size), s["regime"], float(s["linewidth_mhz"]), float(s["contrast"])
    )


def _point_summaries(res: experiments.SweepResult) -> list[dict[str, Any]]:
    rows = []
    for i, x in enumerate(res.axis):
        row = {res.axis_name: float(x)}
        row.update({k: float(v[i]) for k, v in res.values.items()})
        rows.append(row)
    return rows


def _spectrum_rows(res: experiments.SweepResult) -> Iterable[tuple]:
    for i, (x, spec) in enumerate(zip(res.axis, res.spectra)):
        for f, m in zip(spec.freq, spec.mag):
            yield (i, x, f, m)


def execute(cfg: RunConfig, jobs: int) -> tuple[list[str], list[tuple], dict[str, Any]]:
    """Run the configured experiment -> (csv header, csv rows, summary)."""
    p = cfg.drive
    kind = cfg.experiment
    summary: dict[str, Any] = {}
    if kind == "esr":
        res = experiments.esr_spectrum(p, _esr_config(cfg))
        header = ["mw_detuning_mhz", "contrast", "fluorescence"]
        rows = list(zip(res.axis, res.values["contrast"], res.values["fluorescence"]))
        summary.update(res.summary)
    elif kind == "phase-gated-esr":
        s = cfg.settings
        m = experiments.phase_gated_esr(p, _esr_config(cfg), int(s["n_phase_bins"]), float(s["duty"]))
        header = ["phase_bin", "rf_phase_rad", "mw_detuning_mhz", "contrast"]
        rows = [
            (k, ph, d, c)
            for k, ph in enumerate(m.phases)
            for d, c in zip(m.detunings, m.contrast[k])
        ]
        summary.update(
            ridge_amplitude_mhz=m.amplitude,
            ridge_period_rad=m.period,
            ridge_phase_offset_rad=m.phase_offset,
            ridge_argmax_mhz=m.ridge,
        )
    elif kind == "rabi-map":
        res = experiments.rabi_map(p, cfg.grid("detuning_scan"), jobs=jobs, **_trace_kwargs(cfg))
        header = ["point", "mw_detuning_mhz", "tau_us", "p0"]
        rows = [(i, x, t, v) for i, (x, tr) in enumerate(zip(res.axis, res.traces)) for t, v in zip(tr.t, tr.p0)]
        summary["points"] = _point_summaries(res)
    elif kind in ("sync-scan", "amplitude-scan", "rf-scan"):
        fn, key = {
            "sync-scan": (experiments.sync_scan, "rabi_scan"),
            "amplitude-scan": (experiments.amplitude_scan, "rf_amplitude_scan"),
            "rf-scan": (experiments.rf_frequency_scan, "rf_frequency_scan"),
        }[kind]
        res = fn(p, cfg.grid(key), jobs=jobs, **_trace_kwargs(cfg))
        header = ["point", res.axis_name, "freq_mhz", "mag"]
        rows = list(_spectrum_rows(res))
        summary.update(res.summary)
        summary["points"] = _point_summaries(res)
        if kind == "sync-scan" and 0 < p.rf_amplitude < p.rf_frequency:
            summary["floquet_rabi_sync_mhz"] = analytic.lightshift_center(p.rf_frequency, p.rf_amplitude).center
    elif kind in ("floquet", "lightshift"):
        fcfg = analytic.FloquetConfig(int(cfg.settings["truncation"]), float(cfg.settings["eigentolerance"]))
        if kind == "floquet":
            res = experiments.floquet_scan(p, cfg.grid("rabi_scan"), fcfg, jobs)
        else:
            res = experiments.lightshift_scan(p, cfg.grid("rf_amplitude_scan"), fcfg, jobs)
        header = [res.axis_name, *res.values]
        rows = list(zip(res.axis, *res.values.values()))
        summary.update(res.summary)
        summary["points"] = _point_summaries(res)
    else:  # pragma: no cover - load_config rejects unknown kinds
        raise ValueError(kind)
    return header, rows, summary


def _write_atomic(out: Path, files: dict[str, str]):
    temps = []
    try:
        for name, text in files.items():
            fd, tmp = tempfile.mkstemp(prefix=f".{name}.", dir=out)
            temps.append((tmp, out / name))
            with os.fdopen(fd, "w", newline="") as fh:
                fh.write(text)
        for tmp, final in temps:
            os.replace(tmp, final)
    except BaseException:
        for tmp, _ in temps:
            if os.path.exists(tmp):
                os.unlink(tmp)
        raise


def run(config: RunConfig) -> int:
    """Execute ``config`` and write result.csv, summary.json, meta.json."""
    t_start = time.perf_counter()
    jobs = config.jobs or os.cpu_count() or 1
    out = config.output_dir
    try:
        out.mkdir(parents=True, exist_ok=True)
        if not os.access(out, os.W_OK | os.X_OK):
            raise PermissionError(f"output directory {out} is not writable")
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        header, rows, summary = execute(config, jobs)
    except SpinSyncError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    csv_text = ",".join(header) + "\n" + "".join(",".join(_fmt(v) for v in row) + "\n" for row in rows)
    summary = {"experiment": config.experiment, **summary, "config": config.to_dict()}
    meta = {
        "tool": "spinsync",
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "jobs": jobs,
        "wall_time_s": time.perf_counter() - t_start,
    }
    try:
        _write_atomic(
            out,
            {
                "result.csv": csv_text,
                "summary.json": json.dumps(_jsonable(summary), indent=2) + "\n",
                "meta.json": json.dumps(meta, indent=2) + "\n",
            },
        )
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    return 0


def _oracle(args) -> dict[str, Any]:
    if args.what == "bessel":
        n, x = int(args.values[0]), float(args.values[1])
        return {"n": n, "x": x, "value": analytic.bessel_j(n, x)}
    rabi, rf, amp = (float(v) for v in args.values)
    if args.what == "splitting":
        return {"splitting_mhz": analytic.dressed_splitting(rabi, rf, amp), "lines_mhz": analytic.triplet_lines(rabi, rf, amp)}
    fcfg = analytic.FloquetConfig(args.truncation)
    hi, lo = analytic.floquet_quasienergies(rabi, rf, amp, fcfg)
    return {"quasienergies_mhz": [hi, lo], "gap_mhz": analytic.quasienergy_gap(rabi, rf, amp, fcfg, check=False)}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spinsync", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment config")
    p_run.add_argument("config")
    p_run.add_argument("--jobs", type=int, default=None, help="worker processes (default: all CPUs)")
    p_run.add_argument("--seed", type=int, default=None, help="shot-noise seed")
    p_run.add_argument("--out", default=None, help="output directory (overrides output_dir)")

    p_val = sub.add_parser("validate", help="parse and check a config without running it")
    p_val.add_argument("config")

    p_or = sub.add_parser("oracle", help="analytic queries")
    p_or.add_argument("what", choices=["bessel", "splitting", "floquet"])
    p_or.add_argument("values", nargs="+", help="bessel: N X; splitting/floquet: RABI RF AMPLITUDE (MHz)")
    p_or.add_argument("--truncation", type=int, default=40)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "oracle":
            need = 2 if args.what == "bessel" else 3
            if len(args.values) != need:
                print(f"error: oracle {args.what} takes {need} values", file=sys.stderr)
                return 2
            print(json.dumps(_jsonable(_oracle(args))))
            return 0
        cfg = load_config(args.config)
        if args.command == "validate":
            print(f"ok: {cfg.experiment}")
            return 0
        changes = {}
        if args.jobs is not None:
            if args.jobs < 1:
                print("error: --jobs must be >= 1", file=sys.stderr)
                return 2
            changes["jobs"] = args.jobs
        if args.seed is not None:
            changes["seed"] = args.seed
        if args.out is not None:
            changes["output_dir"] = Path(args.out)
        return run(replace(cfg, **changes))
    except SpinSyncError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())


__all__ = ["main", "run", "execute", "config_from_dict"]
