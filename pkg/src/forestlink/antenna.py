"""Polarization mismatch and statistical reduction of angular gain patterns.

A body-worn antenna has no single gain: pattern nulls and the wearer's pose
smear it over the half-space.  This module reduces tabulated angular samples
to the single effective values a link budget needs, via the guaranteed-value
reading of the complementary CDF: the largest value that at least a chosen
fraction of arrangements still meets.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from . import defaults

_UNIT_NORM_TOL = 1e-6

# Pocket-worn transmitter dipole tilted 30 degrees off the ground plane.
DEFAULT_TX_POLARIZATION = np.array(
    [-math.cos(math.radians(30.0)), math.sin(math.radians(30.0)), 0.0],
    dtype=complex,
)

ANGULAR_CSV_COLUMNS = (
    "theta_deg",
    "phi_deg",
    "gain_dbi",
    "re_x",
    "im_x",
    "re_y",
    "im_y",
    "re_z",
    "im_z",
)


def as_polarization(vector) -> np.ndarray:
    """Validate and return a complex unit 3-vector."""
    v = np.asarray(vector, dtype=complex).reshape(-1)
    if v.shape != (3,):
        raise ValueError("polarization vector must have exactly three components")
    norm = np.linalg.norm(v)
    if abs(norm - 1.0) > _UNIT_NORM_TOL:
        raise ValueError(f"polarization vector norm {norm!r} deviates from 1 by more than {_UNIT_NORM_TOL}")
    return v


def polarization_loss(tx, rx) -> float:
    """Power coupling factor |tx . conj(rx)|^2 between unit polarization vectors.

    Symmetric in its arguments; 1 for matched polarizations, 0 for orthogonal
    ones.
    """
    tx = as_polarization(tx)
    rx = as_polarization(rx)
    value = abs(np.sum(tx * np.conj(rx))) ** 2
    # Cauchy-Schwarz bounds the exact value by 1; clip float overshoot only.
    return min(float(value), 1.0)


def db_from_power_ratio(ratio) -> np.ndarray | float:
    """10*log10 with exact zeros mapped to -inf (no warnings)."""
    ratio = np.asarray(ratio, dtype=float)
    with np.errstate(divide="ignore"):
        out = 10.0 * np.log10(ratio)
    if out.ndim == 0:
        return float(out)
    return out


def ccdf_guaranteed_value(samples, level: float) -> float:
    """Largest sample value G such that at least ``level`` of samples are >= G.

    Candidates are the sample values themselves; among ties the largest
    qualifying one is returned.  -inf entries are legal and sort below all
    finite values.
    """
    values = np.asarray(samples, dtype=float).reshape(-1)
    if values.size == 0:
        raise ValueError("cannot take a guaranteed value of an empty sample set")
    if np.any(np.isnan(values)):
        raise ValueError("sample set contains NaN")
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must be inside (0, 1), got {level!r}")
    ordered = np.sort(values)
    n = ordered.size
    candidates = np.unique(ordered)
    # fraction of samples >= candidate, evaluated for every distinct value
    counts_ge = n - np.searchsorted(ordered, candidates, side="left")
    qualifying = candidates[counts_ge / n >= level]
    # the minimum always qualifies (all samples are >= it), so this is non-empty
    return float(qualifying[-1])


@dataclass(frozen=True)
class AngularSamples:
    """Tabulated gain and polarization over the half-space above ground.

    Arrays are index-aligned; ``polarization`` holds one complex unit vector
    per direction.
    """

    theta_deg: np.ndarray
    phi_deg: np.ndarray
    gain_dbi: np.ndarray
    polarization: np.ndarray

    def __post_init__(self):
        theta = np.asarray(self.theta_deg, dtype=float)
        phi = np.asarray(self.phi_deg, dtype=float)
        gain = np.asarray(self.gain_dbi, dtype=float)
        pol = np.asarray(self.polarization, dtype=complex)
        n = theta.size
        if n == 0:
            raise ValueError("angular sample set is empty")
        if phi.shape != (n,) or gain.shape != (n,) or pol.shape != (n, 3):
            raise ValueError("angular sample arrays are not index-aligned")
        if np.any(phi < 0.0) or np.any(phi > 180.0):
            raise ValueError("phi_deg must stay within [0, 180] (half-space above ground)")
        pairs = set(zip(theta.tolist(), phi.tolist()))
        if len(pairs) != n:
            raise ValueError("duplicate (theta, phi) directions in angular sample set")
        norms = np.linalg.norm(pol, axis=1)
        if np.any(np.abs(norms - 1.0) > _UNIT_NORM_TOL):
            raise ValueError("angular sample polarizations must be unit vectors")
        object.__setattr__(self, "theta_deg", theta)
        object.__setattr__(self, "phi_deg", phi)
        object.__setattr__(self, "gain_dbi", gain)
        object.__setattr__(self, "polarization", pol)

    def __len__(self) -> int:
        return self.theta_deg.size


@dataclass(frozen=True)
class EffectiveLinkTerms:
    """Effective receiver gain and polarization loss at a guarantee level."""

    g_rx_dbi: float
    chi_db: float

    def to_dict(self) -> dict:
        return {"g_rx_dbi": self.g_rx_dbi, "chi_db": self.chi_db}


def effective_link_terms(
    samples: AngularSamples,
    tx_polarization=DEFAULT_TX_POLARIZATION,
    level: float = defaults.GUARANTEE_LEVEL,
) -> EffectiveLinkTerms:
    """Reduce an angular pattern to (gain, polarization loss) guaranteed in ``level`` of arrangements.

    Both reductions run over the grid of directions with uniform weight.
    Perfectly cross-polarized directions contribute -inf dB and therefore
    sort below every finite candidate.
    """
    tx = as_polarization(tx_polarization)
    losses = np.abs(np.sum(tx[None, :] * np.conj(samples.polarization), axis=1)) ** 2
    losses = np.minimum(losses, 1.0)
    chi_db = ccdf_guaranteed_value(db_from_power_ratio(losses), level)
    g_rx_dbi = ccdf_guaranteed_value(samples.gain_dbi, level)
    return EffectiveLinkTerms(g_rx_dbi=g_rx_dbi, chi_db=chi_db)


def read_angular_csv(path) -> AngularSamples:
    """Load an angular sample table (see ``ANGULAR_CSV_COLUMNS`` for the header)."""
    theta, phi, gain, pol = [], [], [], []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(row for row in fh if not row.startswith("#"))
        got = tuple(reader.fieldnames or ())
        if got != ANGULAR_CSV_COLUMNS:
            raise ValueError(
                f"{path}: expected header {','.join(ANGULAR_CSV_COLUMNS)}, got {','.join(got)}"
            )
        for line_no, row in enumerate(reader, start=2):
            try:
                theta.append(float(row["theta_deg"]))
                phi.append(float(row["phi_deg"]))
                gain.append(float(row["gain_dbi"]))
                pol.append(
                    [
                        complex(float(row["re_x"]), float(row["im_x"])),
                        complex(float(row["re_y"]), float(row["im_y"])),
                        complex(float(row["re_z"]), float(row["im_z"])),
                    ]
                )
            except (TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{line_no}: bad angular sample row ({exc})") from exc
    if not theta:
        raise ValueError(f"{path}: no angular samples")
    return AngularSamples(
        theta_deg=np.array(theta),
        phi_deg=np.array(phi),
        gain_dbi=np.array(gain),
        polarization=np.array(pol),
    )


def write_angular_csv(samples: AngularSamples, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(ANGULAR_CSV_COLUMNS)
        for i in range(len(samples)):
            p = samples.polarization[i]
            writer.writerow(
                [
                    repr(float(samples.theta_deg[i])),
                    repr(float(samples.phi_deg[i])),
                    repr(float(samples.gain_dbi[i])),
                    repr(float(p[0].real)),
                    repr(float(p[0].imag)),
                    repr(float(p[1].real)),
                    repr(float(p[1].imag)),
                    repr(float(p[2].real)),
                    repr(float(p[2].imag)),
                ]
            )
