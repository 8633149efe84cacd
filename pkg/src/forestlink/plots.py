"""Figure rendering for the report path; only the CLI imports this module,
so library users never pay for matplotlib."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .campaign import FitResult, ModelComparison, PathLossSamples
from .channel import RadioConfig, mean_path_loss_array
from .fading import FadeDepthReport, FadingFit, empirical_cdf, pdf
from .simulate import SweepResult

_DPI = 130


def render_fit(fit: FitResult, samples: PathLossSamples, out_png) -> None:
    fig, (ax_pl, ax_res) = plt.subplots(1, 2, figsize=(10, 4))
    heights = np.unique(samples.h_m)
    cmap = plt.get_cmap("viridis")
    for i, h in enumerate(heights):
        mask = samples.h_m == h
        color = cmap(i / max(len(heights) - 1, 1))
        ax_pl.scatter(
            samples.d3d_m[mask],
            samples.pl_large_db[mask],
            s=3,
            alpha=0.25,
            color=color,
            label=f"h = {h:g} m",
        )
        grid = np.geomspace(samples.d3d_m[mask].min(), samples.d3d_m[mask].max(), 200)
        ax_pl.plot(grid, mean_path_loss_array(fit.model, grid, h), color=color, lw=1.5)
    ax_pl.set_xscale("log")
    ax_pl.set_xlabel("3D distance (m)")
    ax_pl.set_ylabel("large-scale path loss (dB)")
    ax_pl.set_title(f"fit: {fit.model.name}")
    ax_pl.legend(fontsize=8)
    ax_res.hist(fit.residuals_db, bins=60, density=True, alpha=0.7)
    ax_res.set_xlabel("residual (dB)")
    ax_res.set_ylabel("density")
    ax_res.set_title(f"shadow fading, sigma = {fit.model.sigma_sf_db:.2f} dB")
    fig.tight_layout()
    fig.savefig(out_png, dpi=_DPI)
    plt.close(fig)


def render_compare(comparisons: list[ModelComparison], out_png) -> None:
    fig, (ax_cdf, ax_abs) = plt.subplots(1, 2, figsize=(10, 4))
    for comp in comparisons:
        diffs = np.sort(comp.diffs_db)
        cdf = np.arange(1, diffs.size + 1) / diffs.size
        label = f"{comp.name} (median |d| = {comp.median_abs_diff_db:.2f} dB)"
        ax_cdf.plot(diffs, cdf, lw=1.2, label=label)
        abs_sorted = np.sort(np.abs(comp.diffs_db))
        ax_abs.plot(abs_sorted, np.arange(1, abs_sorted.size + 1) / abs_sorted.size, lw=1.2)
    ax_cdf.set_xlabel("expected - measured loss (dB)")
    ax_cdf.set_ylabel("CDF")
    ax_cdf.legend(fontsize=7)
    ax_abs.set_xlabel("|expected - measured| (dB)")
    ax_abs.set_ylabel("CDF")
    fig.tight_layout()
    fig.savefig(out_png, dpi=_DPI)
    plt.close(fig)


def render_fading(
    small_scale_db: np.ndarray,
    fit: FadingFit,
    report: FadeDepthReport,
    out_png,
) -> None:
    fig, (ax_db, ax_env) = plt.subplots(1, 2, figsize=(10, 4))
    magnitudes = np.abs(small_scale_db)
    cdf = empirical_cdf(magnitudes)
    ax_db.step(cdf.support, cdf.fractions, where="post", lw=1.2)
    for level, value in ((0.50, report.level_50_db), (0.99, report.level_99_db)):
        ax_db.axvline(value, color="grey", ls="--", lw=0.8)
        ax_db.annotate(f"{level:.0%}: {value:.2f} dB", (value, level), fontsize=7)
    ax_db.set_xlabel("fading magnitude (dB)")
    ax_db.set_ylabel("CDF")
    ax_db.set_title(f"fade depth {report.depth_db:.2f} dB")
    envelope = 10.0 ** (np.asarray(small_scale_db, dtype=float) / 20.0)
    ax_env.hist(envelope, bins=80, density=True, alpha=0.6, label="envelope")
    grid = np.linspace(envelope.min(), envelope.max(), 400)
    ax_env.plot(grid, pdf(fit.family, fit.params, grid), lw=1.5, label=fit.family.value)
    ax_env.set_xlabel("linear envelope")
    ax_env.set_ylabel("density")
    ax_env.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_png, dpi=_DPI)
    plt.close(fig)


def render_simulate(sweep: SweepResult, radio: RadioConfig, out_png) -> None:
    fig, (ax_rssi, ax_pdr) = plt.subplots(1, 2, figsize=(10, 4))
    for row, trace in zip(sweep.rows, sweep.traces):
        order = np.argsort(trace.d3d_m)
        ax_rssi.plot(
            trace.d3d_m[order],
            trace.rssi_dbm[order],
            lw=0.4,
            alpha=0.7,
            label=f"h = {row.h_m:g} m",
        )
        edges = np.linspace(trace.d3d_m.min(), trace.d3d_m.max() + 1e-9, 25)
        centers, ratios = [], []
        for lo, hi in zip(edges[:-1], edges[1:]):
            mask = (trace.d3d_m >= lo) & (trace.d3d_m < hi)
            if mask.any():
                centers.append((lo + hi) / 2.0)
                ratios.append(float(np.mean(trace.delivered[mask])))
        ax_pdr.plot(centers, ratios, marker="o", ms=2.5, lw=1.0, label=f"h = {row.h_m:g} m")
    ax_rssi.axhline(radio.sensitivity_dbm, color="red", ls="--", lw=0.9, label="sensitivity")
    ax_rssi.set_xlabel("3D distance (m)")
    ax_rssi.set_ylabel("reported RSSI (dBm)")
    ax_rssi.legend(fontsize=7)
    ax_pdr.set_xlabel("3D distance (m)")
    ax_pdr.set_ylabel("packet delivery ratio")
    ax_pdr.set_ylim(-0.05, 1.05)
    ax_pdr.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(out_png, dpi=_DPI)
    plt.close(fig)


def render_ccdf(gain_dbi: np.ndarray, plf_db: np.ndarray, level: float, out_png) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    for values, label in ((gain_dbi, "gain (dBi)"), (plf_db, "polarization loss (dB)")):
        finite = np.asarray(values, dtype=float)
        finite = finite[np.isfinite(finite)]
        ordered = np.sort(finite)
        ccdf = 1.0 - np.arange(ordered.size) / ordered.size
        ax.plot(ordered, ccdf, lw=1.2, label=label)
    ax.axhline(level, color="grey", ls="--", lw=0.8)
    ax.set_xlabel("value (dB)")
    ax.set_ylabel("CCDF")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_png, dpi=_DPI)
    plt.close(fig)
