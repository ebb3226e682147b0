"""Sweep orchestration, record persistence and experimental-data import."""
from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import MissingSidebandError, extract_rabi, fit_four_peaks, fit_lower_sideband
from .calibration import (
    DEFAULT_SIGMA_FRACTION,
    LinewidthCurve,
    fit_phonon_rates,
    synthetic_curve,
)
from .config import ConfigError, RunConfig
from .dynamics import (
    FockConvergenceError,
    GridResolutionError,
    PropagatorError,
    SteadyStateError,
    converge_fock,
    simulate,
)
from .lorentzian import LorentzianPeak, instrument_convolve
from .model import SystemParams, bare_rabi_frequency, drive_for_rabi

log = logging.getLogger(__name__)

RECORD_SCHEMA = "sweep-record/1"
CURVE_SCHEMA = "linewidth-curve/1"
SPECTRUM_SCHEMA = "spectrum/1"
METADATA_SCHEMA = "sweep-metadata/1"

FAILURE_THRESHOLD = 0.2
EXCLUSION_WINDOW = 10.0  # GHz around the cavity resonance
SPOT_CHECKS = 3
SPOT_RTOL = 1e-8


class SchemaError(ValueError):
    """Malformed input file (exit code 2)."""


@dataclass
class SweepRecord:
    """One sweep point.  ``omega_sq`` is the squared lower-sideband detuning."""

    variant: str
    index: int
    J: float
    omega_target: float | None = None
    omega_sq: float | None = None
    omega_low: float | None = None
    omega_extracted: float | None = None
    lower_fwhm: float | None = None
    lower_fwhm_fp: float | None = None
    upper_fwhm: float | None = None
    upper_center: float | None = None
    area_low: float | None = None
    area_high: float | None = None
    area_ratio: float | None = None
    cavity_area: float | None = None
    cavity_interpolated: bool = False
    N_used: int | None = None
    top_fock_population: float | None = None
    tail_unresolved: bool = False
    lower_converged: bool = False
    full_converged: bool = False
    error: str = ""

    @property
    def failed(self) -> bool:
        return bool(self.error)


RECORD_FIELDS = [f.name for f in dataclasses.fields(SweepRecord)]
_BOOL_FIELDS = {"cavity_interpolated", "tail_unresolved", "lower_converged", "full_converged"}
_INT_FIELDS = {"index", "N_used"}
_STR_FIELDS = {"variant", "error"}


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    return f"{float(v):.9g}"


def _parse(name: str, s: str):
    if name in _STR_FIELDS:
        return s
    if s == "":
        return None if name not in _BOOL_FIELDS else False
    if name in _BOOL_FIELDS:
        return s == "1"
    if name in _INT_FIELDS:
        return int(s)
    return float(s)


def records_to_csv(records) -> str:
    buf = io.StringIO()
    buf.write(f"# schema: {RECORD_SCHEMA}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RECORD_FIELDS)
    for r in records:
        w.writerow([_fmt(getattr(r, n)) for n in RECORD_FIELDS])
    return buf.getvalue()


def read_records(path) -> list[SweepRecord]:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0].strip() != f"# schema: {RECORD_SCHEMA}":
        raise SchemaError(f"{path}: line 1 must be '# schema: {RECORD_SCHEMA}'")
    rows = list(csv.reader(lines[1:]))
    if not rows or rows[0] != RECORD_FIELDS:
        raise SchemaError(f"{path}: line 2 header does not match {RECORD_SCHEMA}")
    out = []
    for lineno, row in enumerate(rows[1:], start=3):
        if len(row) != len(RECORD_FIELDS):
            raise SchemaError(f"{path}: line {lineno} has {len(row)} fields, expected {len(RECORD_FIELDS)}")
        try:
            out.append(SweepRecord(**{n: _parse(n, v) for n, v in zip(RECORD_FIELDS, row)}))
        except ValueError as exc:
            raise SchemaError(f"{path}: line {lineno}: {exc}") from exc
    return out


# ---------------------------------------------------------------- points


@dataclass(frozen=True)
class PointTask:
    variant: str
    index: int
    params: SystemParams  # drive included
    omega_target: float | None
    grid: tuple | None
    t_max: float | None
    fock: int | str
    keep_spectrum: bool = False


def _error_code(exc: BaseException) -> str:
    for cls, code in (
        (SteadyStateError, "steady_state"),
        (PropagatorError, "propagator"),
        (GridResolutionError, "grid"),
        (FockConvergenceError, "fock"),
        (MissingSidebandError, "no_sideband"),
    ):
        if isinstance(exc, cls):
            return code
    return "numerical"


def _simulate_point(task: PointTask, cache: bool = True):
    omega = None if task.grid is None else np.asarray(task.grid)
    if task.fock == "auto":
        return converge_fock(task.params, omega=omega, T_max=task.t_max, cache=cache)
    p = task.params if task.fock is None else task.params.with_(fock_dim=int(task.fock))
    return simulate(p, omega=omega, T_max=task.t_max, cache=cache), p.fock_dim


def _fill_full_fit(rec: SweepRecord, full) -> None:
    lo, hi = full.peak("lower"), full.peak("upper")
    rec.omega_extracted = extract_rabi(full)
    rec.upper_fwhm = hi.fwhm
    rec.upper_center = hi.center
    rec.area_low = lo.area
    rec.area_high = hi.area
    rec.area_ratio = hi.area / lo.area if lo.area > 0 else None
    rec.cavity_area = full.peak("cavity").area
    rec.full_converged = full.converged


def evaluate_point(task: PointTask, cavity: LorentzianPeak | None = None, cache: bool = True):
    """Simulate and analyse one point; returns (record, spectrum or None).

    Failures are caught and written into ``record.error``.
    """
    rec = SweepRecord(task.variant, task.index, task.params.drive_J, task.omega_target)
    trace = None
    try:
        sim, n = _simulate_point(task, cache=cache)
        rec.N_used = n
        rec.top_fock_population = sim.top_fock_population
        rec.tail_unresolved = sim.correlation.tail_unresolved
        trace = sim.spectrum
        hint = bare_rabi_frequency(sim.params)
        if hint > 0:
            low = fit_lower_sideband(trace, hint)
            pk = low.peak("lower")
            rec.omega_low = abs(pk.center)
            rec.omega_sq = pk.center**2
            rec.lower_fwhm = pk.fwhm
            rec.lower_converged = low.converged
            try:
                conv = instrument_convolve(trace, "fabry_perot")
                rec.lower_fwhm_fp = fit_lower_sideband(conv, hint).peak("lower").fwhm
            except ValueError:
                rec.lower_fwhm_fp = None
            full = fit_four_peaks(trace, sim.params, hint, cavity=cavity)
            _fill_full_fit(rec, full)
            rec.cavity_interpolated = cavity is not None
    except Exception as exc:  # recorded per point, never aborts the sweep
        rec.error = _error_code(exc)
        log.warning("point %s/%d failed: %s", task.variant, task.index, exc)
    return rec, (trace if task.keep_spectrum or cavity is None else None)


def _run_task(task: PointTask):
    return evaluate_point(task)


def _interpolate_cavity(records, params: SystemParams):
    """Cavity areas for points whose upper sideband sits inside the exclusion window."""
    ok = [r for r in records if not r.failed and r.upper_center is not None]
    inside = {r.index for r in ok if abs(r.upper_center - params.delta_c) < EXCLUSION_WINDOW}
    outside = [r for r in ok if r.index not in inside]
    if not inside or not outside:
        return {}
    xs = np.array([r.J for r in outside])
    ys = np.array([r.cavity_area for r in outside])
    order = np.argsort(xs)
    xs, ys = xs[order], ys[order]
    out = {}
    for r in ok:
        if r.index in inside:
            # linear between the nearest outside points, constant beyond them
            area = float(np.interp(r.J, xs, ys))
            out[r.index] = LorentzianPeak(params.delta_c, params.kappa, max(area, 0.0))
    return out


def _refit_in_window(records, spectra, params: SystemParams) -> None:
    for idx, cav in _interpolate_cavity(records, params).items():
        rec = records[idx]
        q = params.with_(drive_J=rec.J)
        try:
            full = fit_four_peaks(spectra[idx], q, bare_rabi_frequency(q), cavity=cav)
            _fill_full_fit(rec, full)
            rec.cavity_interpolated = True
        except Exception as exc:
            rec.error = _error_code(exc)


# ---------------------------------------------------------------- runs


@dataclass
class RunResult:
    config: RunConfig
    records: list
    paths: dict
    metadata: dict
    exit_code: int = 0


def _tasks(config: RunConfig, keep_spectrum: bool):
    grid = config.grid.omega()
    grid_t = None if grid is None else tuple(float(x) for x in grid)
    tasks = []
    for variant in config.variants:
        p = config.variant_params(variant)
        for i, v in enumerate(config.sweep.values):
            if config.sweep.kind == "omega":
                J, target = (drive_for_rabi(p, v) if v > 0 else 0.0), v
            else:
                J, target = v, None
            q = p.with_(drive_J=float(J))
            if target is None:
                target = bare_rabi_frequency(q)
            tasks.append(PointTask(variant, i, q, target, grid_t, config.grid.t_max, config.fock, keep_spectrum))
    return tasks


def _execute(tasks, workers: int):
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            # map keeps submission (axis) order whatever the completion order
            return list(pool.map(_run_task, tasks))
    return [_run_task(t) for t in tasks]


def spot_check(config: RunConfig, records, n: int = SPOT_CHECKS, rng=None):
    """Recompute ``n`` random rows from the recorded parameters with the cache bypassed."""
    rng = np.random.default_rng(config.seed) if rng is None else rng
    candidates = [r for r in records if not r.failed]
    if not candidates:
        return []
    pick = rng.choice(len(candidates), size=min(n, len(candidates)), replace=False)
    by_key = {(t.variant, t.index): t for t in _tasks(config, keep_spectrum=False)}
    results = []
    for k in sorted(int(i) for i in pick):
        rec = candidates[k]
        task = by_key[(rec.variant, rec.index)]
        cav = None
        if rec.cavity_interpolated:
            cav = LorentzianPeak(task.params.delta_c, task.params.kappa, rec.cavity_area)
        again, _ = evaluate_point(task, cavity=cav, cache=False)
        worst = 0.0
        for name in RECORD_FIELDS:
            a, b = getattr(rec, name), getattr(again, name)
            if isinstance(a, float) and isinstance(b, float):
                worst = max(worst, abs(a - b) / max(abs(a), 1e-300))
            elif a != b and name not in ("error",):
                worst = math.inf
        results.append({"variant": rec.variant, "index": rec.index, "max_rel_diff": worst, "ok": worst <= SPOT_RTOL})
    return results


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _spectra_csv(tasks, spectra) -> str:
    buf = io.StringIO()
    buf.write(f"# schema: {SPECTRUM_SCHEMA}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["variant", "index", "omega_GHz", "S", "coherent_amplitude"])
    for t, tr in zip(tasks, spectra):
        if tr is None:
            continue
        for om, s in zip(tr.omega, tr.values):
            w.writerow([t.variant, t.index, _fmt(om), _fmt(s), _fmt(tr.coherent_amplitude)])
    return buf.getvalue()


def run(config: RunConfig) -> RunResult:
    """Execute a configured run and write CSV, JSON metadata and plots."""
    if config.protocol == "calibrate":
        return run_calibration(config)
    out = Path(config.output_dir)
    keep = config.protocol == "spectrum"
    tasks = _tasks(config, keep_spectrum=keep)
    t0 = time.time()
    results = _execute(tasks, config.workers)
    records = [r for r, _ in results]
    spectra = [s for _, s in results]

    if config.protocol != "spectrum":
        for variant in config.variants:
            sel = [i for i, t in enumerate(tasks) if t.variant == variant]
            _refit_in_window(
                [records[i] for i in sel],
                [spectra[i] for i in sel],
                config.variant_params(variant),
            )

    paths = {"records": out / "records.csv", "metadata": out / "metadata.json"}
    _write(paths["records"], records_to_csv(records))
    if keep:
        paths["spectra"] = out / "spectra.csv"
        _write(paths["spectra"], _spectra_csv(tasks, spectra))

    failed = sum(r.failed for r in records)
    checks = spot_check(config, records)
    meta = {
        "schema": METADATA_SCHEMA,
        "tool_version": __version__,
        "config": config.to_dict(),
        "params": {v: dataclasses.asdict(config.variant_params(v)) for v in config.variants},
        "points": [
            {"variant": t.variant, "index": t.index, "J": t.params.drive_J, "N_used": r.N_used,
             "tail_unresolved": r.tail_unresolved, "error": r.error}
            for t, r in zip(tasks, records)
        ],
        "failed_points": failed,
        "failure_fraction": failed / max(len(records), 1),
        "spot_check": checks,
        "elapsed_s": round(time.time() - t0, 3),
        "created": time.strftime("%Y-%m-%dT%H:%M:%S"),
    }
    exit_code = 0
    if failed > FAILURE_THRESHOLD * len(records):
        exit_code = 3
        log.error("%d of %d points failed", failed, len(records))
    if any(not c["ok"] for c in checks):
        exit_code = 3
        log.error("spot-check recomputation disagrees with the written rows")
    _write(paths["metadata"], json.dumps(meta, indent=2, sort_keys=True, default=str))

    if config.plot:
        from .plots import plot_run

        paths.update(plot_run(out))
    return RunResult(config, records, paths, meta, exit_code)


# ------------------------------------------------------------ calibration


def curve_to_csv(curve: LinewidthCurve) -> str:
    buf = io.StringIO()
    buf.write(f"# schema: {CURVE_SCHEMA}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["omega_sq_GHz2", "fwhm_GHz", "fwhm_sigma_GHz"])
    for x, y, s in zip(curve.omega_sq, curve.fwhm, curve.fwhm_sigma):
        w.writerow([_fmt(x), _fmt(y), _fmt(s)])
    return buf.getvalue()


def read_curve(path):
    """(omega_sq, fwhm, sigma) arrays from a file written by :func:`curve_to_csv`."""
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0].strip() != f"# schema: {CURVE_SCHEMA}":
        raise SchemaError(f"{path}: line 1 must be '# schema: {CURVE_SCHEMA}'")
    rows = list(csv.reader(lines[2:]))
    arr = np.array([[float(c) for c in r] for r in rows if r]).reshape(-1, 3)
    return arr[:, 0], arr[:, 1], arr[:, 2]


def import_experimental(path, fixed_params: SystemParams) -> LinewidthCurve:
    """Read a measured linewidth curve.

    Columns ``omega_sq_GHz2, fwhm_GHz`` and optionally ``fwhm_sigma_GHz``;
    an optional ``# schema:`` first line must name ``linewidth-curve/1``.
    Without the sigma column every sigma defaults to 5% of the FWHM and the
    returned curve has ``sigma_defaulted`` set.
    """
    path = Path(path)
    lines = path.read_text().splitlines()
    start = 0
    if lines and lines[0].startswith("#"):
        tag = lines[0].lstrip("#").strip()
        if tag != f"schema: {CURVE_SCHEMA}":
            raise SchemaError(f"{path}: line 1: unsupported schema {tag!r}")
        start = 1
    rows = list(csv.reader(lines[start:]))
    if not rows:
        raise SchemaError(f"{path}: no header")
    header = [h.strip() for h in rows[0]]
    hdr_line = start + 1
    required = ["omega_sq_GHz2", "fwhm_GHz"]
    allowed = required + ["fwhm_sigma_GHz"]
    if header[:2] != required or any(h not in allowed for h in header) or len(set(header)) != len(header):
        raise SchemaError(f"{path}: line {hdr_line}: header must be {allowed} (sigma optional)")
    has_sigma = "fwhm_sigma_GHz" in header
    xs, ys, ss, seen = [], [], [], {}
    for offset, row in enumerate(rows[1:], start=1):
        lineno = hdr_line + offset
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise SchemaError(f"{path}: line {lineno}: expected {len(header)} fields, got {len(row)}")
        try:
            vals = [float(c) for c in row]
        except ValueError as exc:
            raise SchemaError(f"{path}: line {lineno}: {exc}") from exc
        if not all(math.isfinite(v) for v in vals):
            raise SchemaError(f"{path}: line {lineno}: non-finite value")
        x = vals[0]
        if x in seen:
            raise SchemaError(f"{path}: duplicate omega_sq {x:g} on lines {seen[x]} and {lineno}")
        seen[x] = lineno
        if xs and x < xs[-1]:
            raise SchemaError(f"{path}: line {lineno}: omega_sq not increasing")
        xs.append(x)
        ys.append(vals[1])
        if has_sigma:
            ss.append(vals[2])
    if not xs:
        raise SchemaError(f"{path}: no data rows")
    try:
        return LinewidthCurve(
            np.array(xs), np.array(ys), fixed_params.delta_cx, fixed_params,
            np.array(ss) if has_sigma else None,
        )
    except ValueError as exc:
        raise SchemaError(f"{path}: {exc}") from exc


def run_calibration(config: RunConfig) -> RunResult:
    out = Path(config.output_dir)
    fixed = config.params
    if isinstance(config.fock, int):
        fixed = fixed.with_(fock_dim=config.fock)
    cal = config.calibration
    if cal.data is not None:
        data = import_experimental(cal.data, fixed)
        source = str(cal.data)
    else:
        if config.sweep.kind != "omega":
            raise ConfigError("synthetic calibration data needs an omega sweep")
        data = synthetic_curve(fixed, config.sweep.values, rates=cal.rates, noise=cal.noise, seed=config.seed)
        source = f"synthetic rates={list(cal.rates)} noise={cal.noise} seed={config.seed}"
    if config.fock == "auto":
        # truncation set by the strongest drive of the curve
        strongest = fixed.with_(drive_J=drive_for_rabi(fixed, math.sqrt(data.omega_sq[-1])))
        _, n = converge_fock(strongest)
        fixed = fixed.with_(fock_dim=n)
        data = LinewidthCurve(data.omega_sq, data.fwhm, data.delta_cx, fixed, data.fwhm_sigma)
    t0 = time.time()
    res = fit_phonon_rates(data, start=cal.start)
    paths = {
        "data": out / "data.csv",
        "predicted": out / "predicted.csv",
        "metadata": out / "metadata.json",
    }
    _write(paths["data"], curve_to_csv(data))
    _write(paths["predicted"], curve_to_csv(res.curve_predicted))
    meta = {
        "schema": METADATA_SCHEMA,
        "tool_version": __version__,
        "config": config.to_dict(),
        "data_source": source,
        "sigma_defaulted": data.sigma_defaulted,
        "fock_dim": fixed.fock_dim,
        "sigma_default_fraction": DEFAULT_SIGMA_FRACTION,
        "result": {
            "gamma_ph_ads": res.gamma_ph_ads,
            "gamma_ph_asp": res.gamma_ph_asp,
            "sigma_ads": res.sigma_ads,
            "sigma_asp": res.sigma_asp,
            "residual_norm": res.residual_norm,
            "iterations": res.iterations,
            "clamped": res.clamped,
            "objective_history": list(res.history),
        },
        "elapsed_s": round(time.time() - t0, 3),
        "created": time.strftime("%Y-%m-%dT%H:%M:%S"),
    }
    _write(paths["metadata"], json.dumps(meta, indent=2, sort_keys=True, default=str))
    if config.plot:
        from .plots import plot_calibration

        paths.update(plot_calibration(out))
    return RunResult(config, [], paths, meta, 0)
