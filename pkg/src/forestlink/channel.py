"""Closed-form air-ground channel equations and the bundled model registry.

The mean loss follows a log-distance law with a linear altitude term; the
instantaneous loss adds small-scale fading and zero-mean Gaussian shadowing
on top of it.  Everything here is a pure function over immutable inputs:
random draws take an explicit generator owned by the caller.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass
from importlib import resources

import numpy as np

from . import defaults

REGISTRY_ENV_VAR = "FORESTLINK_MODELS"


@dataclass(frozen=True)
class LinkGeometry:
    """One transmitter-receiver arrangement: 3D separation and flying height."""

    d3d_m: float
    h_m: float

    def __post_init__(self):
        if not (math.isfinite(self.d3d_m) and math.isfinite(self.h_m)):
            raise ValueError("link geometry must be finite")
        if self.d3d_m < defaults.REFERENCE_DISTANCE_M:
            raise ValueError(
                f"d3d_m={self.d3d_m!r} is below the {defaults.REFERENCE_DISTANCE_M} m "
                "reference distance; the log-distance model is not valid there"
            )
        if self.h_m < 0:
            raise ValueError("flying height must be non-negative")


@dataclass(frozen=True)
class PathLossModel:
    """Named parameter set of the log-distance law with altitude term.

    ``eta_db_per_m`` may be zero for models without an altitude dependence;
    ``sigma_sf_db`` is the shadow-fading standard deviation in dB.
    """

    name: str
    pl_intercept_db: float
    gamma: float
    eta_db_per_m: float
    sigma_sf_db: float

    def __post_init__(self):
        for field in ("pl_intercept_db", "gamma", "eta_db_per_m", "sigma_sf_db"):
            if not math.isfinite(getattr(self, field)):
                raise ValueError(f"{field} must be finite")
        if self.gamma <= 0:
            raise ValueError("path-loss exponent gamma must be positive")
        if self.sigma_sf_db < 0:
            raise ValueError("sigma_sf_db must be non-negative")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "PathLossModel":
        expected = {"name", "pl_intercept_db", "gamma", "eta_db_per_m", "sigma_sf_db"}
        unknown = set(data) - expected
        if unknown:
            raise ValueError(f"unknown path-loss model keys: {sorted(unknown)}")
        missing = expected - set(data)
        if missing:
            raise ValueError(f"missing path-loss model keys: {sorted(missing)}")
        return cls(
            name=str(data["name"]),
            pl_intercept_db=float(data["pl_intercept_db"]),
            gamma=float(data["gamma"]),
            eta_db_per_m=float(data["eta_db_per_m"]),
            sigma_sf_db=float(data["sigma_sf_db"]),
        )


@dataclass(frozen=True)
class CorrectionInputs:
    """Observed RSSI/SNR shifts that map a fitted model onto new conditions."""

    delta_rssi_db: float
    snr_db: float
    delta_snr_db: float

    def __post_init__(self):
        for field in ("delta_rssi_db", "snr_db", "delta_snr_db"):
            if not math.isfinite(getattr(self, field)):
                raise ValueError(f"{field} must be finite")


@dataclass(frozen=True)
class RadioConfig:
    """Transmit power, effective link gains, and receiver decode thresholds.

    The gain and polarization terms are *effective* statistical values, not
    boresight figures.  ``sensitivity_dbm`` applies to the signal component
    of the received power; ``snr_floor_db`` is the minimum decodable SNR.
    """

    p_tx_dbm: float = defaults.TX_POWER_DBM
    g_tx_dbi: float = defaults.TX_GAIN_DBI
    g_rx_dbi: float = defaults.RX_EFFECTIVE_GAIN_DBI
    chi_db: float = defaults.POLARIZATION_LOSS_DB
    sensitivity_dbm: float = defaults.SENSITIVITY_DBM
    snr_floor_db: float = defaults.SNR_FLOOR_DB
    noise_floor_dbm: float = defaults.NOISE_FLOOR_DBM

    def __post_init__(self):
        if not -30.0 <= self.p_tx_dbm <= 36.0:
            raise ValueError("p_tx_dbm outside the plausible [-30, +36] dBm range")
        if self.chi_db > 0:
            raise ValueError("polarization loss chi_db cannot be positive")
        if self.sensitivity_dbm >= 0:
            raise ValueError("sensitivity_dbm must be negative")

    @property
    def link_budget_db(self) -> float:
        """Sum of transmit power and effective gains (signal side of the budget)."""
        return self.p_tx_dbm + self.g_tx_dbi + self.g_rx_dbi + self.chi_db

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RadioConfig":
        base = cls()
        expected = set(base.to_dict())
        unknown = set(data) - expected
        if unknown:
            raise ValueError(f"unknown radio config keys: {sorted(unknown)}")
        merged = {**base.to_dict(), **{k: float(v) for k, v in data.items()}}
        return cls(**merged)


def mean_path_loss(model: PathLossModel, geom: LinkGeometry):
    """Median loss in dB at a geometry: intercept + slope in log-distance - altitude term.

    Accepts scalars through ``LinkGeometry``; see ``mean_path_loss_array`` for
    the vectorized form.
    """
    return mean_path_loss_array(model, geom.d3d_m, geom.h_m)


def mean_path_loss_array(model: PathLossModel, d3d_m, h_m):
    """Vectorized mean loss; inputs must already satisfy d3d >= 1 m, h >= 0."""
    d3d_m = np.asarray(d3d_m, dtype=float)
    if np.any(d3d_m < defaults.REFERENCE_DISTANCE_M):
        raise ValueError("d3d_m below the 1 m reference distance")
    return (
        model.pl_intercept_db
        + 10.0 * model.gamma * np.log10(d3d_m)
        - model.eta_db_per_m * np.asarray(h_m, dtype=float)
    )


def instantaneous_path_loss(
    model: PathLossModel,
    geom: LinkGeometry,
    small_scale_db: float,
    rng: np.random.Generator,
) -> float:
    """One per-packet loss draw: mean + small-scale + Normal(0, sigma_sf).

    Terms are added in that fixed order so a given generator state always
    reproduces the same value bit for bit.
    """
    shadow = rng.normal(0.0, model.sigma_sf_db)
    return mean_path_loss(model, geom) + small_scale_db + shadow


def corrective_factor(c: CorrectionInputs) -> float:
    """Mean-loss correction from RSSI/SNR shifts measured under new conditions.

    Evaluated exactly as printed below; note that for zero shifts the result
    does not vanish at finite reference SNR (it decays like the residual
    noise term) and approaches 0 only in the high-SNR limit.
    """
    return -c.delta_rssi_db + 10.0 * math.log10(
        1.0 + 10.0 ** (-(c.snr_db + c.delta_snr_db) / 10.0)
    )


def corrected_mean_path_loss(
    model: PathLossModel, geom: LinkGeometry, c: CorrectionInputs
) -> float:
    """Mean loss shifted by the corrective factor for changed conditions."""
    return mean_path_loss(model, geom) + corrective_factor(c)


def _registry_text() -> str:
    override = os.environ.get(REGISTRY_ENV_VAR)
    if override:
        with open(override, "r", encoding="utf-8") as fh:
            return fh.read()
    return resources.files("forestlink.data").joinpath("models.json").read_text("utf-8")


def load_models(path: str | os.PathLike | None = None) -> list[PathLossModel]:
    """Load a model registry: explicit path, else $FORESTLINK_MODELS, else bundled."""
    if path is not None:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    else:
        raw = json.loads(_registry_text())
    if not isinstance(raw, list):
        raise ValueError("model registry must be a JSON array")
    return [PathLossModel.from_dict(entry) for entry in raw]


def builtin_models() -> list[PathLossModel]:
    """The five bundled presets (honors the registry override variable)."""
    return load_models()


def find_model(name: str, models: list[PathLossModel] | None = None) -> PathLossModel:
    models = builtin_models() if models is None else models
    for model in models:
        if model.name == name:
            return model
    known = ", ".join(m.name for m in models)
    raise KeyError(f"unknown model {name!r} (known: {known})")
