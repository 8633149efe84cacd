"""Measurement-campaign pipeline: turn raw signal logs into a fitted model.

Steps: resolve geometry (GPS or precomputed ranges), recover per-packet path
loss from RSSI/SNR, strip small-scale fading with a moving window of half a
wavelength on each side, then least-squares fit the log-distance law and
judge it against benchmark models.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass

import numpy as np

from . import defaults
from .channel import LinkGeometry, PathLossModel, RadioConfig, mean_path_loss_array
from .geometry import compose_d3d, haversine_distance_m

RANGE_CSV_COLUMNS = ("timestamp_s", "d3d_m", "h_m", "rssi_dbm", "snr_db")
GEO_CSV_COLUMNS = ("timestamp_s", "lat_deg", "lon_deg", "rssi_dbm", "snr_db")


class LogFormatError(ValueError):
    """Malformed input log; the message carries file and line context."""


class DegenerateFitError(ValueError):
    """Design matrix cannot identify the requested parameters."""


@dataclass(frozen=True)
class RawLogRecord:
    """One received message with resolved geometry."""

    timestamp_s: float
    d3d_m: float
    h_m: float
    rssi_dbm: float
    snr_db: float
    suspicious: bool = False


def path_loss_from_signal(rssi_dbm, snr_db, radio: RadioConfig):
    """Per-packet path loss recovered from the receiver's RSSI and SNR.

    The reported RSSI contains ambient noise power; the SNR-dependent term
    removes that contribution before the link budget is subtracted.  SNR is
    converted from dB to linear internally.
    """
    rssi_dbm = np.asarray(rssi_dbm, dtype=float)
    snr_linear = 10.0 ** (np.asarray(snr_db, dtype=float) / 10.0)
    pl = radio.link_budget_db + 10.0 * np.log10(1.0 + 1.0 / snr_linear) - rssi_dbm
    if pl.ndim == 0:
        return float(pl)
    return pl


def _open_rows(path):
    with open(path, "r", encoding="utf-8", newline="") as fh:
        lines = fh.readlines()
    # '#' lines carry run headers and never count as data; blank lines are
    # dropped too so data line numbers stay aligned with the csv reader
    return [
        (i + 1, line)
        for i, line in enumerate(lines)
        if not line.startswith("#") and line.strip()
    ]


def _parse_log(path, expected_columns) -> list[dict]:
    rows = _open_rows(path)
    if not rows:
        raise LogFormatError(f"{path}: file is empty")
    header_line_no, header = rows[0]
    names = tuple(name.strip() for name in header.strip().split(","))
    missing = [c for c in expected_columns if c not in names]
    if missing:
        raise LogFormatError(
            f"{path}:{header_line_no}: header {','.join(names)} is missing "
            f"column(s) {', '.join(missing)}"
        )
    if len(rows) == 1:
        raise LogFormatError(f"{path}: no data rows")
    reader = csv.DictReader(
        [header] + [line for _, line in rows[1:]], fieldnames=None
    )
    parsed = []
    line_numbers = [no for no, _ in rows[1:]]
    for line_no, row in zip(line_numbers, reader):
        values = {}
        for column in expected_columns:
            raw = row.get(column)
            try:
                values[column] = float(raw)
            except (TypeError, ValueError):
                raise LogFormatError(
                    f"{path}:{line_no}: bad value {raw!r} for {column}"
                ) from None
        values["_line"] = line_no
        parsed.append(values)
    return parsed


def _finalize_records(path, entries) -> list[RawLogRecord]:
    records = []
    previous_ts = -math.inf
    for entry in entries:
        line_no = entry["_line"]
        if entry["timestamp_s"] < previous_ts:
            raise LogFormatError(
                f"{path}:{line_no}: timestamps must be non-decreasing within a file"
            )
        previous_ts = entry["timestamp_s"]
        rssi = entry["rssi_dbm"]
        if not -160.0 <= rssi <= 0.0:
            raise LogFormatError(f"{path}:{line_no}: rssi_dbm {rssi!r} outside [-160, 0]")
        if entry["d3d_m"] < defaults.REFERENCE_DISTANCE_M:
            raise LogFormatError(
                f"{path}:{line_no}: d3d_m {entry['d3d_m']!r} below the 1 m reference distance"
            )
        if entry["h_m"] < 0:
            raise LogFormatError(f"{path}:{line_no}: h_m must be non-negative")
        records.append(
            RawLogRecord(
                timestamp_s=entry["timestamp_s"],
                d3d_m=entry["d3d_m"],
                h_m=entry["h_m"],
                rssi_dbm=rssi,
                snr_db=entry["snr_db"],
                # an exactly-zero RSSI is almost always a missing datum
                suspicious=rssi == 0.0,
            )
        )
    return records


def read_range_log(path) -> list[RawLogRecord]:
    """Read a log whose geometry is already resolved (d3d_m and h_m columns)."""
    return _finalize_records(path, _parse_log(path, RANGE_CSV_COLUMNS))


def read_geo_log(path, sidecar) -> list[RawLogRecord]:
    """Read a GPS log; the sidecar holds the hovering position and heights."""
    if isinstance(sidecar, (str, os.PathLike)):
        with open(sidecar, "r", encoding="utf-8") as fh:
            sidecar = json.load(fh)
    expected = {"uav_lat_deg", "uav_lon_deg", "h_m", "h_rx_m"}
    unknown = set(sidecar) - expected
    if unknown:
        raise LogFormatError(f"unknown sidecar keys: {sorted(unknown)}")
    missing = expected - set(sidecar)
    if missing:
        raise LogFormatError(f"sidecar is missing keys: {sorted(missing)}")
    entries = _parse_log(path, GEO_CSV_COLUMNS)
    for entry in entries:
        d2d = haversine_distance_m(
            entry["lat_deg"],
            entry["lon_deg"],
            float(sidecar["uav_lat_deg"]),
            float(sidecar["uav_lon_deg"]),
        )
        entry["d3d_m"] = compose_d3d(d2d, float(sidecar["h_m"]), float(sidecar["h_rx_m"]))
        entry["h_m"] = float(sidecar["h_m"])
    return _finalize_records(path, entries)


def read_log(path, schema: str, sidecar=None) -> list[RawLogRecord]:
    if schema == "range":
        return read_range_log(path)
    if schema == "geo":
        if sidecar is None:
            raise LogFormatError(f"{path}: the geo schema needs a position sidecar")
        return read_geo_log(path, sidecar)
    raise LogFormatError(f"unknown log schema {schema!r}")


# ---------------------------------------------------------------------------
# small-scale separation


def separate_small_scale(d3d_m, pl_db, wavelength_m: float = defaults.WAVELENGTH_M):
    """Split path loss into a moving-window mean and the residual fast term.

    Each sample's large-scale value is the arithmetic dB mean over every
    sample within half a wavelength of its own distance (itself included);
    the small-scale value is whatever is left.  Inputs may arrive unsorted;
    outputs align with the input order.  Samples from different flying
    heights must be separated *before* calling this, otherwise the altitude
    term contaminates the local mean.
    """
    if wavelength_m <= 0:
        raise ValueError("wavelength must be positive")
    d3d = np.asarray(d3d_m, dtype=float).reshape(-1)
    pl = np.asarray(pl_db, dtype=float).reshape(-1)
    if d3d.size == 0:
        raise ValueError("empty sample set")
    if d3d.shape != pl.shape:
        raise ValueError("d3d_m and pl_db must align")
    order = np.argsort(d3d, kind="stable")
    d_sorted = d3d[order]
    pl_sorted = pl[order]
    half = wavelength_m / 2.0
    left = np.searchsorted(d_sorted, d_sorted - half, side="left")
    right = np.searchsorted(d_sorted, d_sorted + half, side="right")
    large_sorted = np.empty_like(pl_sorted)
    start = -1
    stop = -1
    window_mean = 0.0
    for i in range(d_sorted.size):
        if left[i] != start or right[i] != stop:
            start, stop = left[i], right[i]
            window_mean = float(np.mean(pl_sorted[start:stop]))
        large_sorted[i] = window_mean
    large = np.empty_like(large_sorted)
    large[order] = large_sorted
    return large, pl - large


@dataclass(frozen=True)
class PLSample:
    """One decomposed observation: geometry plus the three loss components."""

    geom: LinkGeometry
    pl_instantaneous_db: float
    pl_large_scale_db: float
    small_scale_db: float


@dataclass(frozen=True)
class PathLossSamples:
    """Column-oriented set of decomposed observations."""

    d3d_m: np.ndarray
    h_m: np.ndarray
    pl_db: np.ndarray
    pl_large_db: np.ndarray
    small_scale_db: np.ndarray

    def __post_init__(self):
        arrays = {
            name: np.asarray(getattr(self, name), dtype=float).reshape(-1)
            for name in ("d3d_m", "h_m", "pl_db", "pl_large_db", "small_scale_db")
        }
        n = arrays["d3d_m"].size
        if n == 0:
            raise ValueError("empty sample set")
        if any(a.size != n for a in arrays.values()):
            raise ValueError("sample columns must align")
        residual = arrays["pl_db"] - (arrays["pl_large_db"] + arrays["small_scale_db"])
        if np.max(np.abs(residual)) > 1e-9:
            raise ValueError("decomposition identity violated beyond 1e-9 dB")
        for name, arr in arrays.items():
            object.__setattr__(self, name, arr)

    def __len__(self) -> int:
        return self.d3d_m.size

    def __getitem__(self, index: int) -> PLSample:
        return PLSample(
            geom=LinkGeometry(float(self.d3d_m[index]), float(self.h_m[index])),
            pl_instantaneous_db=float(self.pl_db[index]),
            pl_large_scale_db=float(self.pl_large_db[index]),
            small_scale_db=float(self.small_scale_db[index]),
        )


def decompose_path_loss(
    d3d_m, h_m, pl_db, wavelength_m: float = defaults.WAVELENGTH_M
) -> PathLossSamples:
    """Run the moving-window separation independently per flying height."""
    d3d = np.asarray(d3d_m, dtype=float).reshape(-1)
    h = np.asarray(h_m, dtype=float).reshape(-1)
    pl = np.asarray(pl_db, dtype=float).reshape(-1)
    large = np.empty_like(pl)
    small = np.empty_like(pl)
    for height in np.unique(h):
        mask = h == height
        large[mask], small[mask] = separate_small_scale(d3d[mask], pl[mask], wavelength_m)
    return PathLossSamples(d3d_m=d3d, h_m=h, pl_db=pl, pl_large_db=large, small_scale_db=small)


def samples_from_records(
    records: list[RawLogRecord],
    radio: RadioConfig,
    wavelength_m: float = defaults.WAVELENGTH_M,
) -> PathLossSamples:
    """Full ingestion path: per-packet loss recovery, then separation."""
    if not records:
        raise ValueError("no records")
    d3d = np.array([r.d3d_m for r in records])
    h = np.array([r.h_m for r in records])
    rssi = np.array([r.rssi_dbm for r in records])
    snr = np.array([r.snr_db for r in records])
    pl = path_loss_from_signal(rssi, snr, radio)
    return decompose_path_loss(d3d, h, pl, wavelength_m)


# ---------------------------------------------------------------------------
# least-squares fit and validation


@dataclass(frozen=True)
class RseBin:
    d_lo_m: float
    d_hi_m: float
    h_m: float
    count: int
    rse: float


@dataclass(frozen=True)
class RseTable:
    bins: tuple
    mean_rse: float
    skipped_empty: int

    def to_dict(self) -> dict:
        return {
            "bins": [
                {
                    "d_lo_m": b.d_lo_m,
                    "d_hi_m": b.d_hi_m,
                    "h_m": b.h_m,
                    "count": b.count,
                    "rse": b.rse,
                }
                for b in self.bins
            ],
            "mean_rse": self.mean_rse,
            "skipped_empty": self.skipped_empty,
        }


def rse_value(sigma_sf_db: float, sample_count: int, pl_mean_db: float) -> float:
    """Relative standard error of a mean-loss estimate from M averaged samples."""
    if sample_count < 1:
        raise ValueError("sample_count must be at least 1")
    return sigma_sf_db / (math.sqrt(sample_count) * pl_mean_db)


def rse_table(
    model: PathLossModel,
    samples: PathLossSamples,
    d_bin_width_m: float = 10.0,
) -> RseTable:
    """Per-(distance bin, height) relative standard error of the fit.

    Distance bins are regular with the given width; heights are kept at
    their exact values.  Bins without samples are skipped and counted.
    """
    if d_bin_width_m <= 0:
        raise ValueError("bin width must be positive")
    d = samples.d3d_m
    h = samples.h_m
    lo = math.floor(np.min(d) / d_bin_width_m) * d_bin_width_m
    hi = math.ceil(np.max(d) / d_bin_width_m) * d_bin_width_m
    edges = np.arange(lo, hi + d_bin_width_m, d_bin_width_m)
    bins = []
    skipped = 0
    for height in np.unique(h):
        height_mask = h == height
        for i in range(edges.size - 1):
            d_lo, d_hi = float(edges[i]), float(edges[i + 1])
            in_bin = height_mask & (d >= d_lo) & (d < d_hi)
            count = int(np.count_nonzero(in_bin))
            if count == 0:
                skipped += 1
                continue
            center = max((d_lo + d_hi) / 2.0, defaults.REFERENCE_DISTANCE_M)
            pl_center = float(
                mean_path_loss_array(model, center, float(height))
            )
            bins.append(
                RseBin(
                    d_lo_m=d_lo,
                    d_hi_m=d_hi,
                    h_m=float(height),
                    count=count,
                    rse=rse_value(model.sigma_sf_db, count, pl_center),
                )
            )
    mean_rse = float(np.mean([b.rse for b in bins])) if bins else math.nan
    return RseTable(bins=tuple(bins), mean_rse=mean_rse, skipped_empty=skipped)


@dataclass(frozen=True)
class FitResult:
    """Fitted model, its residuals, and the per-bin validation table."""

    model: PathLossModel
    residuals_db: np.ndarray
    sample_count: int
    rse_by_bin: RseTable

    def to_dict(self) -> dict:
        res = self.residuals_db
        return {
            "model": self.model.to_dict(),
            "residuals": {
                "count": self.sample_count,
                "mean_db": float(np.mean(res)),
                "std_db": float(np.std(res)),
                "min_db": float(np.min(res)),
                "max_db": float(np.max(res)),
            },
            "rse": self.rse_by_bin.to_dict(),
        }


def fit_path_loss_model(
    samples: PathLossSamples,
    name: str,
    d_bin_width_m: float = 10.0,
) -> FitResult:
    """Ordinary least squares of the large-scale loss on the log-distance law.

    Regressors are [1, 10*log10(d3d), -h]; the shadow-fading deviation is the
    standard deviation of the residuals.  The altitude coefficient needs at
    least two distinct flying heights to be identifiable, the slope at least
    two distinct distances.
    """
    d = samples.d3d_m
    h = samples.h_m
    if np.any(d < defaults.REFERENCE_DISTANCE_M):
        raise ValueError("samples below the 1 m reference distance")
    if np.unique(h).size < 2:
        raise DegenerateFitError(
            "eta unidentifiable: all samples share one flying height, the "
            "altitude regressor is constant"
        )
    if np.unique(d).size < 2:
        raise DegenerateFitError(
            "gamma unidentifiable: all samples share one distance, the "
            "log-distance regressor is constant"
        )
    design = np.column_stack([np.ones_like(d), 10.0 * np.log10(d), -h])
    target = samples.pl_large_db
    coeffs, _, rank, _ = np.linalg.lstsq(design, target, rcond=None)
    if rank < 3:
        raise DegenerateFitError("rank-deficient design matrix: regressors are collinear")
    residuals = target - design @ coeffs
    model = PathLossModel(
        name=name,
        pl_intercept_db=float(coeffs[0]),
        gamma=float(coeffs[1]),
        eta_db_per_m=float(coeffs[2]),
        sigma_sf_db=float(np.std(residuals)),
    )
    return FitResult(
        model=model,
        residuals_db=residuals,
        sample_count=len(samples),
        rse_by_bin=rse_table(model, samples, d_bin_width_m),
    )


# ---------------------------------------------------------------------------
# benchmark comparison


@dataclass(frozen=True)
class ModelComparison:
    """Signed expected-minus-measured differences of one model on a dataset."""

    name: str
    median_abs_diff_db: float
    diffs_db: np.ndarray


def compare_models(
    samples: PathLossSamples, models: list[PathLossModel]
) -> list[ModelComparison]:
    """Expected loss (no shadow term) minus measured instantaneous loss, per model.

    Returns one entry per model with the full signed difference sample (for
    CDF plotting) and the median absolute difference used for ranking.
    """
    results = []
    for model in models:
        expected = mean_path_loss_array(model, samples.d3d_m, samples.h_m)
        diffs = expected - samples.pl_db
        results.append(
            ModelComparison(
                name=model.name,
                median_abs_diff_db=float(np.median(np.abs(diffs))),
                diffs_db=diffs,
            )
        )
    return results
