"""Static figures rendered from the written CSV files only."""
from __future__ import annotations

import csv
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def _by_variant(records):
    groups = defaultdict(list)
    for r in records:
        if not r.failed:
            groups[r.variant].append(r)
    return groups


def plot_linewidth(records_csv, out_png) -> Path:
    """Lower-sideband FWHM against |Omega/2pi|^2, one line per variant."""
    from .sweep import read_records

    fig, ax = plt.subplots(figsize=(5, 3.6))
    for variant, rows in _by_variant(read_records(records_csv)).items():
        pts = sorted((r.omega_sq, r.lower_fwhm) for r in rows if r.lower_fwhm is not None)
        if pts:
            ax.plot(*zip(*pts), "o-", ms=3, label=variant)
    ax.set_xlabel(r"$|\Omega/2\pi|^2$ (GHz$^2$)")
    ax.set_ylabel("lower-sideband FWHM (GHz)")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_png, dpi=120)
    plt.close(fig)
    return Path(out_png)


def plot_ratio(records_csv, out_png) -> Path:
    """Upper/lower sideband area ratio against the extracted Rabi frequency."""
    from .sweep import read_records

    fig, ax = plt.subplots(figsize=(5, 3.6))
    for variant, rows in _by_variant(read_records(records_csv)).items():
        pts = sorted((r.omega_extracted, r.area_ratio) for r in rows if r.area_ratio is not None)
        if pts:
            ax.plot(*zip(*pts), "s-", ms=3, label=variant)
    ax.axhline(1.0, color="0.6", lw=0.8)
    ax.set_xlabel(r"$\Omega/2\pi$ (GHz)")
    ax.set_ylabel("area ratio upper / lower")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_png, dpi=120)
    plt.close(fig)
    return Path(out_png)


def plot_spectra(spectra_csv, out_png) -> Path:
    series = defaultdict(lambda: ([], []))
    with open(spectra_csv) as fh:
        next(fh)  # schema line
        for row in csv.DictReader(fh):
            xs, ys = series[(row["variant"], int(row["index"]))]
            xs.append(float(row["omega_GHz"]))
            ys.append(float(row["S"]))
    fig, ax = plt.subplots(figsize=(5, 3.6))
    for (variant, idx), (xs, ys) in sorted(series.items()):
        ax.plot(xs, ys, lw=0.8, label=f"{variant} #{idx}")
    ax.set_xlabel(r"$\omega'$ (GHz)")
    ax.set_ylabel("spectral density (arb.)")
    if len(series) <= 10:
        ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(out_png, dpi=120)
    plt.close(fig)
    return Path(out_png)


def plot_calibration(out_dir) -> dict:
    from .sweep import read_curve

    out_dir = Path(out_dir)
    data = read_curve(out_dir / "data.csv")
    pred = read_curve(out_dir / "predicted.csv")
    fig, ax = plt.subplots(figsize=(5, 3.6))
    ax.errorbar(data[0], data[1], yerr=data[2], fmt="o", ms=3, label="data")
    ax.plot(pred[0], pred[1], "-", label="fit")
    ax.set_xlabel(r"$|\Omega/2\pi|^2$ (GHz$^2$)")
    ax.set_ylabel("lower-sideband FWHM (GHz)")
    ax.legend(fontsize=8)
    fig.tight_layout()
    path = out_dir / "calibration.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return {"plot_calibration": path}


def plot_run(out_dir) -> dict:
    """Every figure derivable from the CSVs in ``out_dir``."""
    out_dir = Path(out_dir)
    made = {}
    rec = out_dir / "records.csv"
    if rec.exists():
        made["plot_linewidth"] = plot_linewidth(rec, out_dir / "linewidth.png")
        made["plot_ratio"] = plot_ratio(rec, out_dir / "area_ratio.png")
    spec = out_dir / "spectra.csv"
    if spec.exists():
        made["plot_spectra"] = plot_spectra(spec, out_dir / "spectra.png")
    return made
