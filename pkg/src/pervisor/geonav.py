"""Haversine distances, POI proximity filtering, and annotation sectors."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from enum import Enum

EARTH_RADIUS_M = 6_371_000.0  # mean radius


class Sector(Enum):
    AHEAD = 0
    AHEAD_RIGHT = 1
    RIGHT = 2
    BEHIND_RIGHT = 3
    BEHIND = 4
    BEHIND_LEFT = 5
    LEFT = 6
    AHEAD_LEFT = 7


@dataclass(frozen=True)
class GeoPoint:
    lat: float  # degrees, [-90, 90]
    lon: float  # degrees, normalized to (-180, 180]

    def __post_init__(self):
        if not (-90.0 <= self.lat <= 90.0):
            raise ValueError(f"latitude {self.lat} out of [-90, 90]")
        lon = math.fmod(self.lon, 360.0)
        if lon <= -180.0:
            lon += 360.0
        elif lon > 180.0:
            lon -= 360.0
        object.__setattr__(self, "lon", lon)


@dataclass(frozen=True)
class Poi:
    id: str
    name: str
    location: GeoPoint
    description: str = ""
    priority: int = 1  # 0 = landmark, larger = lower priority

    def __post_init__(self):
        if self.priority < 0:
            raise ValueError("priority must be non-negative")


@dataclass(frozen=True)
class AnnotationPlacement:
    poi_id: str
    distance_m: float
    bearing_deg: float  # [0, 360) from true north
    sector: Sector  # 45-degree bin of (bearing - heading)


def haversine_distance(p1: GeoPoint, p2: GeoPoint) -> float:
    """Great-circle distance in meters on the mean-radius sphere."""
    phi1 = math.radians(p1.lat)
    phi2 = math.radians(p2.lat)
    dphi = math.radians(p2.lat - p1.lat)
    dlam = math.radians(p2.lon - p1.lon)
    a = math.sin(dphi / 2) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlam / 2) ** 2
    a = min(1.0, a)
    c = 2.0 * math.atan2(math.sqrt(a), math.sqrt(1.0 - a))
    return EARTH_RADIUS_M * c


def filter_pois(
    user: GeoPoint, pois, radius_m: float, max_results: int
) -> list[Poi]:
    """POIs within radius_m of the user, by (priority, distance), truncated.

    Priority-0 landmarks sort ahead of everything else regardless of
    distance; within a priority class, nearer first.
    """
    if radius_m <= 0:
        raise ValueError("radius_m must be positive")
    if max_results < 1:
        raise ValueError("max_results must be positive")
    within = []
    for i, p in enumerate(pois):
        d = haversine_distance(user, p.location)
        if d <= radius_m:
            within.append((p.priority, d, i, p))
    within.sort(key=lambda t: (t[0], t[1], t[2]))
    return [p for _, _, _, p in within[:max_results]]


def bearing_deg(origin: GeoPoint, target: GeoPoint) -> float:
    """Forward azimuth from origin to target, degrees in [0, 360)."""
    phi1 = math.radians(origin.lat)
    phi2 = math.radians(target.lat)
    dlam = math.radians(target.lon - origin.lon)
    y = math.sin(dlam) * math.cos(phi2)
    x = math.cos(phi1) * math.sin(phi2) - math.sin(phi1) * math.cos(phi2) * math.cos(dlam)
    return math.degrees(math.atan2(y, x)) % 360.0


def sector_of(bearing: float, heading: float) -> Sector:
    """45-degree bin of the relative bearing, AHEAD centered on 0.

    Bin edges belong to the counter-clockwise bin: relative bearing 22.5
    is still AHEAD, 67.5 still AHEAD_RIGHT, and so on.
    """
    rel = (bearing - heading) % 360.0
    idx = math.ceil((rel - 22.5) / 45.0) % 8
    return Sector(idx)


def place_annotation(user: GeoPoint, heading: float, poi: Poi) -> AnnotationPlacement:
    """Distance, bearing, and screen sector for one POI."""
    if poi.location == user:
        raise ValueError("bearing undefined for a POI at the user's position")
    b = bearing_deg(user, poi.location)
    return AnnotationPlacement(
        poi_id=poi.id,
        distance_m=haversine_distance(user, poi.location),
        bearing_deg=b,
        sector=sector_of(b, heading),
    )


def load_pois_csv(path) -> list[Poi]:
    """Read POIs from CSV with header id,name,lat,lon,priority,description."""
    pois: list[Poi] = []
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is not None:
            missing = {"id", "name", "lat", "lon", "priority"} - set(reader.fieldnames)
            if missing:
                raise ValueError(f"POI CSV missing columns: {sorted(missing)}")
        for row in reader:
            pois.append(
                Poi(
                    id=row["id"],
                    name=row["name"],
                    location=GeoPoint(float(row["lat"]), float(row["lon"])),
                    description=row.get("description", "") or "",
                    priority=int(row["priority"]),
                )
            )
    ids = [p.id for p in pois]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate POI ids in CSV")
    return pois
