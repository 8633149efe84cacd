"""Forward Monte Carlo link simulator: RSSI/SNR traces, delivery, and range.

Geometry comes from a walked path against a hovering transmitter; every
message gets its own random substream derived from the master seed, so a
trace is reproducible bit for bit no matter how the message set is
partitioned across workers.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

from . import defaults
from .channel import PathLossModel, RadioConfig, mean_path_loss_array
from .fading import FadingFit, family_geometric_mean, sample_envelope

SHADOW_MODE_MESSAGE = "message"
SHADOW_MODE_POSITION = "position"

TRACE_CSV_COLUMNS = (
    "timestamp_s",
    "d3d_m",
    "h_m",
    "pl_db",
    "rssi_dbm",
    "snr_db",
    "delivered",
)


@dataclass(frozen=True)
class MissionSpec:
    """Hovering transmitter, walked path, and message schedule.

    ``gps_grid_m`` > 0 snaps wearer positions to a square grid, mimicking
    position quantization of a tracked walk; ``shadow_mode`` picks whether
    shadow fading redraws per message or is tied to the (snapped) position,
    the latter making large-scale fading persistent when a spot is revisited.
    """

    uav_x_m: float
    uav_y_m: float
    heights_m: tuple
    path: tuple
    speed_mps: float
    msg_rate_hz: float
    duration_s: float | None = None
    h_rx_m: float = defaults.RX_ANTENNA_HEIGHT_M
    gps_grid_m: float = 0.0
    shadow_mode: str = SHADOW_MODE_MESSAGE

    def __post_init__(self):
        if not self.heights_m:
            raise ValueError("mission needs at least one flying height")
        if any(h <= 0 for h in self.heights_m):
            raise ValueError("flying heights must be positive")
        if not self.path:
            raise ValueError("mission needs at least one waypoint")
        if any(len(p) != 2 for p in self.path):
            raise ValueError("waypoints must be (x, y) pairs")
        if self.speed_mps <= 0:
            raise ValueError("walking speed must be positive")
        if self.msg_rate_hz <= 0:
            raise ValueError("message rate must be positive")
        if self.duration_s is not None and self.duration_s <= 0:
            raise ValueError("duration must be positive when given")
        if self.h_rx_m < 0:
            raise ValueError("receiver height must be non-negative")
        if self.gps_grid_m < 0:
            raise ValueError("gps grid must be non-negative")
        if self.shadow_mode not in (SHADOW_MODE_MESSAGE, SHADOW_MODE_POSITION):
            raise ValueError(f"unknown shadow mode {self.shadow_mode!r}")
        if self.shadow_mode == SHADOW_MODE_POSITION and self.gps_grid_m <= 0:
            raise ValueError("position-keyed shadowing needs gps_grid_m > 0")
        object.__setattr__(self, "heights_m", tuple(float(h) for h in self.heights_m))
        object.__setattr__(
            self, "path", tuple((float(x), float(y)) for x, y in self.path)
        )

    @property
    def path_duration_s(self) -> float:
        return self._path_length() / self.speed_mps

    def _path_length(self) -> float:
        pts = np.asarray(self.path, dtype=float)
        if pts.shape[0] < 2:
            return 0.0
        return float(np.sum(np.hypot(*np.diff(pts, axis=0).T)))

    def to_dict(self) -> dict:
        return {
            "uav": {"x_m": self.uav_x_m, "y_m": self.uav_y_m},
            "heights_m": list(self.heights_m),
            "path": [list(p) for p in self.path],
            "speed_mps": self.speed_mps,
            "msg_rate_hz": self.msg_rate_hz,
            "duration_s": self.duration_s,
            "h_rx_m": self.h_rx_m,
            "gps_grid_m": self.gps_grid_m,
            "shadow_mode": self.shadow_mode,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MissionSpec":
        expected = {
            "uav",
            "heights_m",
            "path",
            "speed_mps",
            "msg_rate_hz",
            "duration_s",
            "h_rx_m",
            "gps_grid_m",
            "shadow_mode",
        }
        unknown = set(data) - expected
        if unknown:
            raise ValueError(f"unknown mission keys: {sorted(unknown)}")
        for required in ("uav", "heights_m", "path", "speed_mps", "msg_rate_hz"):
            if required not in data:
                raise ValueError(f"mission is missing key {required!r}")
        uav = data["uav"]
        uav_unknown = set(uav) - {"x_m", "y_m"}
        if uav_unknown:
            raise ValueError(f"unknown uav keys: {sorted(uav_unknown)}")
        return cls(
            uav_x_m=float(uav.get("x_m", 0.0)),
            uav_y_m=float(uav.get("y_m", 0.0)),
            heights_m=tuple(float(h) for h in data["heights_m"]),
            path=tuple((float(x), float(y)) for x, y in data["path"]),
            speed_mps=float(data["speed_mps"]),
            msg_rate_hz=float(data["msg_rate_hz"]),
            duration_s=None if data.get("duration_s") is None else float(data["duration_s"]),
            h_rx_m=float(data.get("h_rx_m", defaults.RX_ANTENNA_HEIGHT_M)),
            gps_grid_m=float(data.get("gps_grid_m", 0.0)),
            shadow_mode=str(data.get("shadow_mode", SHADOW_MODE_MESSAGE)),
        )


def load_mission(path) -> MissionSpec:
    with open(path, "r", encoding="utf-8") as fh:
        return MissionSpec.from_dict(json.load(fh))


@dataclass(frozen=True)
class SimTrace:
    """Per-message records of one simulated flight at a fixed height."""

    h_m: float
    seed: int
    timestamp_s: np.ndarray
    d3d_m: np.ndarray
    pl_db: np.ndarray
    rssi_dbm: np.ndarray
    snr_db: np.ndarray
    delivered: np.ndarray

    def __len__(self) -> int:
        return self.timestamp_s.size


def _positions_at(mission: MissionSpec, times_s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    pts = np.asarray(mission.path, dtype=float)
    if pts.shape[0] == 1:
        x = np.full(times_s.shape, pts[0, 0])
        y = np.full(times_s.shape, pts[0, 1])
        return x, y
    seg = np.diff(pts, axis=0)
    seg_len = np.hypot(seg[:, 0], seg[:, 1])
    arc = np.concatenate([[0.0], np.cumsum(seg_len)])
    walked = np.clip(times_s * mission.speed_mps, 0.0, arc[-1])
    x = np.interp(walked, arc, pts[:, 0])
    y = np.interp(walked, arc, pts[:, 1])
    return x, y


def _snap(values: np.ndarray, grid: float) -> np.ndarray:
    if grid <= 0:
        return values
    return np.round(values / grid) * grid


def _message_times(mission: MissionSpec) -> np.ndarray:
    duration = mission.duration_s
    if duration is None:
        duration = mission.path_duration_s
    count = max(int(math.floor(duration * mission.msg_rate_hz)) + 1, 1)
    return np.arange(count) / mission.msg_rate_hz


def _cell_entropy(value: float, grid: float) -> int:
    # stable non-negative integer id of a grid cell
    return int(round(value / grid)) & 0xFFFFFFFF


def snr_measurement_bias_db(snr_db):
    """Extra power the receiver reports because noise rides on the signal."""
    return 10.0 * np.log10(1.0 + 10.0 ** (-np.asarray(snr_db, dtype=float) / 10.0))


def synthesize_trace(
    mission: MissionSpec,
    model: PathLossModel,
    radio: RadioConfig,
    fading: FadingFit | None,
    seed: int,
    height_index: int = 0,
    message_indices=None,
    height_key: int | None = None,
) -> SimTrace:
    """Simulate every message of one flight height.

    Per message: interpolate (and optionally snap) the wearer position, add
    shadow fading and a small-scale draw to the mean loss, then derive what
    the receiver would log.  The recorded RSSI is the noise-inflated reading
    (signal plus noise power); delivery thresholds the underlying signal
    component against the sensitivity and the true SNR against its floor.
    The small-scale dB term is the fitted envelope normalized by the family's
    geometric mean, so it is zero-mean in dB and the moving-window separation
    recovers it without biasing the large-scale component.

    ``message_indices`` restricts synthesis to a subset of messages (the
    partitioning hook for parallel deployments); values for a given
    (seed, height, message) triple never depend on the partition.
    """
    h = mission.heights_m[height_index]
    if height_key is None:
        height_key = height_index
    times = _message_times(mission)
    if message_indices is None:
        indices = np.arange(times.size)
    else:
        indices = np.asarray(message_indices, dtype=int)
        if np.any(indices < 0) or np.any(indices >= times.size):
            raise ValueError("message_indices outside the mission schedule")
    times = times[indices]
    x, y = _positions_at(mission, times)
    x = _snap(x, mission.gps_grid_m)
    y = _snap(y, mission.gps_grid_m)
    d2d = np.hypot(x - mission.uav_x_m, y - mission.uav_y_m)
    d3d = np.hypot(d2d, h - mission.h_rx_m)
    if np.any(d3d < defaults.REFERENCE_DISTANCE_M):
        raise ValueError("mission geometry drops below the 1 m model validity limit")
    mean_pl = mean_path_loss_array(model, d3d, h)

    env_center = None
    if fading is not None:
        env_center = family_geometric_mean(fading.family, fading.params)

    shadow = np.zeros(times.size)
    small_scale = np.zeros(times.size)
    position_cache: dict[tuple[int, int], float] = {}
    for row, msg_index in enumerate(indices):
        msg_rng = np.random.default_rng(
            np.random.SeedSequence(entropy=(int(seed), int(height_key), int(msg_index)))
        )
        if mission.shadow_mode == SHADOW_MODE_POSITION:
            cell = (
                _cell_entropy(x[row], mission.gps_grid_m),
                _cell_entropy(y[row], mission.gps_grid_m),
            )
            if cell not in position_cache:
                cell_rng = np.random.default_rng(
                    np.random.SeedSequence(
                        entropy=(int(seed), int(height_key), 1, cell[0], cell[1])
                    )
                )
                position_cache[cell] = cell_rng.normal(0.0, model.sigma_sf_db)
            shadow[row] = position_cache[cell]
        else:
            shadow[row] = msg_rng.normal(0.0, model.sigma_sf_db)
        if fading is not None:
            envelope = sample_envelope(fading, 1, msg_rng)[0]
            small_scale[row] = 20.0 * math.log10(envelope / env_center)

    pl = mean_pl + shadow + small_scale
    signal_rssi = radio.link_budget_db - pl
    snr = signal_rssi - radio.noise_floor_dbm
    rssi = signal_rssi + snr_measurement_bias_db(snr)
    delivered = (signal_rssi >= radio.sensitivity_dbm) & (snr >= radio.snr_floor_db)
    return SimTrace(
        h_m=h,
        seed=int(seed),
        timestamp_s=times,
        d3d_m=d3d,
        pl_db=pl,
        rssi_dbm=rssi,
        snr_db=snr,
        delivered=delivered,
    )


def packet_delivery_ratio(trace: SimTrace) -> float:
    if len(trace) == 0:
        raise ValueError("empty trace")
    return float(np.mean(trace.delivered))


def pdr_by_distance(trace: SimTrace, bin_edges) -> list[tuple[float, float, int, float]]:
    """Delivery ratio per distance bin as (lo, hi, count, pdr); empty bins skipped."""
    edges = np.asarray(bin_edges, dtype=float)
    if edges.size < 2 or np.any(np.diff(edges) <= 0):
        raise ValueError("bin edges must be strictly increasing")
    rows = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        mask = (trace.d3d_m >= lo) & (trace.d3d_m < hi)
        count = int(np.count_nonzero(mask))
        if count == 0:
            continue
        rows.append((float(lo), float(hi), count, float(np.mean(trace.delivered[mask]))))
    return rows


# ---------------------------------------------------------------------------
# radio range


def _max_allowed_pl(model: PathLossModel, radio: RadioConfig, include_snr_term: bool) -> float:
    # delivery needs both thresholds; the tighter one sets the budget
    rssi_min = max(radio.sensitivity_dbm, radio.noise_floor_dbm + radio.snr_floor_db)
    pl_max = radio.link_budget_db - rssi_min
    if include_snr_term:
        pl_max += float(snr_measurement_bias_db(radio.snr_floor_db))
    return pl_max


def radio_range(
    model: PathLossModel,
    radio: RadioConfig,
    h_m: float,
    definition: str = "mean-threshold",
    *,
    include_snr_term: bool = False,
    outage_p: float = 0.5,
    fading: FadingFit | None = None,
    seed: int = 0,
    n_draws: int = 100_000,
    tol_m: float = 1.0,
) -> float:
    """Distance at which the link budget runs out.

    ``mean-threshold`` inverts the mean-loss law against the tighter of the
    two decode thresholds in closed form (the noise-inflation term of the
    reported RSSI is left out unless requested, since delivery is decided on
    the signal component).  ``outage`` finds, by bisection over a common set
    of fading draws, the largest distance whose delivery probability still
    reaches ``outage_p``; the shared draws make the empirical probability
    monotone in distance, so the bisection is exact to ``tol_m``.
    """
    pl_max = _max_allowed_pl(model, radio, include_snr_term)
    exponent = (pl_max - model.pl_intercept_db + model.eta_db_per_m * h_m) / (
        10.0 * model.gamma
    )
    if exponent < 0.0:
        raise ValueError(
            "no finite range: the allowed path loss is below the model intercept"
        )
    mean_threshold_range = 10.0**exponent

    if definition == "mean-threshold":
        return float(mean_threshold_range)
    if definition != "outage":
        raise ValueError(f"unknown range definition {definition!r}")
    if not 0.0 < outage_p < 1.0:
        raise ValueError("outage_p must be inside (0, 1)")

    rng = np.random.default_rng(np.random.SeedSequence(entropy=(int(seed), 2)))
    noise = rng.normal(0.0, model.sigma_sf_db, size=n_draws)
    if fading is not None:
        envelope = sample_envelope(fading, n_draws, rng)
        noise = noise + 20.0 * np.log10(
            envelope / family_geometric_mean(fading.family, fading.params)
        )

    def delivery_probability(d: float) -> float:
        margin = pl_max - float(mean_path_loss_array(model, d, h_m))
        return float(np.mean(noise <= margin))

    lo = defaults.REFERENCE_DISTANCE_M
    if delivery_probability(lo) < outage_p:
        raise ValueError("no range: delivery probability below target at 1 m")
    hi = max(2.0 * mean_threshold_range, lo + 1.0)
    while delivery_probability(hi) >= outage_p:
        hi *= 2.0
        if hi > 1e7:
            raise ValueError("no finite outage range below 10^7 m")
    while hi - lo > tol_m:
        mid = (lo + hi) / 2.0
        if delivery_probability(mid) >= outage_p:
            lo = mid
        else:
            hi = mid
    return float(lo)


# ---------------------------------------------------------------------------
# height sweep


@dataclass(frozen=True)
class HeightSummary:
    h_m: float
    predicted_range_m: float
    observed_range_m: float
    pdr: float
    sent: int
    delivered: int


@dataclass(frozen=True)
class SweepResult:
    rows: tuple
    traces: tuple

    def to_dict(self) -> dict:
        return {
            "rows": [
                {
                    "h_m": r.h_m,
                    "predicted_range_m": r.predicted_range_m,
                    "observed_range_m": r.observed_range_m,
                    "pdr": r.pdr,
                    "sent": r.sent,
                    "delivered": r.delivered,
                }
                for r in self.rows
            ]
        }


def sweep_heights(
    mission: MissionSpec,
    model: PathLossModel,
    radio: RadioConfig,
    fading: FadingFit | None,
    seed: int,
    *,
    share_seed_across_heights: bool = False,
) -> SweepResult:
    """Simulate every mission height and summarize range and delivery per height.

    Each height gets an independent substream keyed by its index unless
    ``share_seed_across_heights`` forces identical draws for every height.
    """
    rows = []
    traces = []
    for index in range(len(mission.heights_m)):
        key = 0 if share_seed_across_heights else index
        trace = synthesize_trace(
            mission, model, radio, fading, seed, height_index=index, height_key=key
        )
        delivered = int(np.count_nonzero(trace.delivered))
        observed = float(np.max(trace.d3d_m[trace.delivered])) if delivered else math.nan
        rows.append(
            HeightSummary(
                h_m=trace.h_m,
                predicted_range_m=radio_range(model, radio, trace.h_m),
                observed_range_m=observed,
                pdr=packet_delivery_ratio(trace),
                sent=len(trace),
                delivered=delivered,
            )
        )
        traces.append(trace)
    return SweepResult(rows=tuple(rows), traces=tuple(traces))


# ---------------------------------------------------------------------------
# trace files


def write_trace_csv(trace: SimTrace, path, header_comment: str | None = None) -> None:
    """Write a trace in the log-compatible layout (floats keep full precision)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        writer = csv.writer(fh)
        writer.writerow(TRACE_CSV_COLUMNS)
        for i in range(len(trace)):
            writer.writerow(
                [
                    repr(float(trace.timestamp_s[i])),
                    repr(float(trace.d3d_m[i])),
                    repr(float(trace.h_m)),
                    repr(float(trace.pl_db[i])),
                    repr(float(trace.rssi_dbm[i])),
                    repr(float(trace.snr_db[i])),
                    int(trace.delivered[i]),
                ]
            )
