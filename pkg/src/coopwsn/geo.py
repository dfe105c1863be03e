"""Geographic coordinates and great-circle distances on a spherical Earth.

Distances drive both the cooperation filter (only nearby networks qualify)
and the proximity seeding of trust, so this module is deliberately small
and dependency-free.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

EARTH_MEAN_RADIUS_KM = 6371.0

#: Largest possible great-circle distance on the spherical model.
MAX_DISTANCE_KM = math.pi * EARTH_MEAN_RADIUS_KM


class DmsParseError(ValueError):
    """A degrees-minutes-seconds string could not be parsed."""


@dataclass(frozen=True)
class GeoCoordinate:
    """WGS84 point in decimal degrees; south and west are negative."""

    latitude_deg: float
    longitude_deg: float

    def __post_init__(self) -> None:
        if not -90.0 <= self.latitude_deg <= 90.0:
            raise ValueError(f"latitude {self.latitude_deg!r} outside [-90, +90]")
        if not -180.0 <= self.longitude_deg <= 180.0:
            raise ValueError(f"longitude {self.longitude_deg!r} outside [-180, +180]")


def haversine_distance(a: GeoCoordinate, b: GeoCoordinate) -> float:
    """Great-circle distance between two coordinates in kilometers.

    Uses the haversine form with the mean Earth radius, which stays
    numerically stable for nearby points. The result is symmetric in its
    arguments and lies in [0, MAX_DISTANCE_KM].
    """
    lat1 = math.radians(a.latitude_deg)
    lat2 = math.radians(b.latitude_deg)
    dlat = math.radians(b.latitude_deg - a.latitude_deg)
    dlon = math.radians(b.longitude_deg - a.longitude_deg)
    h = math.sin(dlat / 2.0) ** 2 + math.cos(lat1) * math.cos(lat2) * math.sin(dlon / 2.0) ** 2
    # rounding can push h a hair outside [0, 1]
    h = min(1.0, max(0.0, h))
    return 2.0 * EARTH_MEAN_RADIUS_KM * math.asin(math.sqrt(h))


_AXIS_RE = re.compile(
    r"""^\s*([A-Za-z])\s*(\d+)\s*°\s*(\d+)\s*'\s*(\d+(?:\.\d+)?)\s*"\s*$"""
)


def _parse_axis(text: str, axis: str) -> float:
    match = _AXIS_RE.match(text)
    if match is None:
        raise DmsParseError(f"malformed {axis} component {text.strip()!r}")
    hemisphere, deg_s, min_s, sec_s = match.groups()
    hemisphere = hemisphere.upper()
    allowed = "NS" if axis == "latitude" else "EW"
    if hemisphere not in allowed:
        raise DmsParseError(f"invalid hemisphere tag {hemisphere!r} in {axis} component")
    minutes = int(min_s)
    seconds = float(sec_s)
    if minutes >= 60:
        raise DmsParseError(f"minutes out of range in token {min_s!r}")
    if seconds >= 60.0:
        raise DmsParseError(f"seconds out of range in token {sec_s!r}")
    value = int(deg_s) + minutes / 60.0 + seconds / 3600.0
    if hemisphere in "SW":
        value = -value
    return value


def parse_dms(text: str) -> GeoCoordinate:
    """Parse a coordinate pair like ``N 49° 47' 39.4506", E 9° 55' 38.9778"``.

    The latitude axis must be tagged N or S, the longitude axis E or W.
    Raises DmsParseError naming the offending token on malformed input.
    """
    parts = text.split(",")
    if len(parts) != 2:
        raise DmsParseError(
            f"expected two comma-separated axes, got {len(parts)} in {text!r}"
        )
    latitude = _parse_axis(parts[0], "latitude")
    longitude = _parse_axis(parts[1], "longitude")
    try:
        return GeoCoordinate(latitude, longitude)
    except ValueError as exc:
        raise DmsParseError(str(exc)) from exc


def _format_axis(value: float, positive: str, negative: str) -> str:
    hemisphere = negative if value < 0 else positive
    total = abs(value)
    degrees = int(total)
    rem = (total - degrees) * 60.0
    minutes = int(rem)
    seconds = (rem - minutes) * 60.0
    sec_s = f"{seconds:.7f}".rstrip("0").rstrip(".")
    if sec_s == "60":  # rounding carried over
        sec_s = "0"
        minutes += 1
        if minutes == 60:
            minutes = 0
            degrees += 1
    return f'{hemisphere} {degrees}° {minutes}\' {sec_s}"'


def format_dms(coord: GeoCoordinate) -> str:
    """Render a coordinate in the DMS display format used by table dumps.

    Round-trips through parse_dms within 1e-9 degrees.
    """
    lat = _format_axis(coord.latitude_deg, "N", "S")
    lon = _format_axis(coord.longitude_deg, "E", "W")
    return f"{lat}, {lon}"
