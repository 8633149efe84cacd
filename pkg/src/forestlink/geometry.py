"""Geodesic and link-geometry helpers for GPS-tracked measurement logs."""

from __future__ import annotations

import math

from . import defaults


def haversine_distance_m(lat1_deg, lon1_deg, lat2_deg, lon2_deg) -> float:
    """Great-circle distance on a spherical Earth (radius 6371 km)."""
    for lat in (lat1_deg, lat2_deg):
        if not -90.0 <= lat <= 90.0:
            raise ValueError(f"latitude {lat!r} outside [-90, 90]")
    for lon in (lon1_deg, lon2_deg):
        if not -180.0 <= lon <= 180.0:
            raise ValueError(f"longitude {lon!r} outside [-180, 180]")
    phi1 = math.radians(lat1_deg)
    phi2 = math.radians(lat2_deg)
    dphi = math.radians(lat2_deg - lat1_deg)
    dlam = math.radians(lon2_deg - lon1_deg)
    a = math.sin(dphi / 2.0) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlam / 2.0) ** 2
    return 2.0 * defaults.EARTH_RADIUS_M * math.asin(math.sqrt(a))


def compose_d3d(d2d_m, h_uav_m, h_rx_m=defaults.RX_ANTENNA_HEIGHT_M):
    """3D separation from ground distance and the two antenna heights."""
    if d2d_m < 0 or h_uav_m < 0 or h_rx_m < 0:
        raise ValueError("distances and heights must be non-negative")
    return math.hypot(d2d_m, h_uav_m - h_rx_m)
