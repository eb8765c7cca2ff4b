"""Mobility-driven ADAS workload generation.

Sessions arrive from a nonhomogeneous Poisson process whose rate follows
daily and weekly patterns; each session belongs to a vehicle that random
walks between uniformly drawn waypoints inside the bounding box of the
access points. Fixed scenarios can be replayed from CSV traces instead.
"""

from __future__ import annotations

import bisect
import csv
import math
import os
from dataclasses import dataclass

import numpy as np

from .errors import InvalidProfile, ParseError, ValidationError
from .kernel import substream

#: Assumed per-session defaults; not measured values.
DEFAULT_SESSION_DURATION_S = 600.0
DEFAULT_SESSION_DEMAND_UNITS = 1.0

WORKLOAD_CSV = "workload.csv"
VEHICLES_CSV = "vehicles.csv"


@dataclass(frozen=True)
class AccessPoint:
    id: str
    x_m: float
    y_m: float
    coverage_radius_m: float

    def __post_init__(self):
        if not (self.coverage_radius_m > 0):
            raise ValidationError("coverage_radius_m > 0")


@dataclass(frozen=True)
class VehicleTrace:
    """Piecewise-linear vehicle path as (time, x, y) waypoints."""

    id: int
    waypoints: tuple[tuple[float, float, float], ...]

    def __post_init__(self):
        times = [w[0] for w in self.waypoints]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValidationError("waypoint times strictly increasing")

    def position_at(self, t_s: float) -> tuple[float, float]:
        """Linear interpolation; clamps to the first/last waypoint."""
        pts = self.waypoints
        if t_s <= pts[0][0]:
            return pts[0][1], pts[0][2]
        if t_s >= pts[-1][0]:
            return pts[-1][1], pts[-1][2]
        i = bisect.bisect_right([w[0] for w in pts], t_s)
        (t0, x0, y0), (t1, x1, y1) = pts[i - 1], pts[i]
        f = (t_s - t0) / (t1 - t0)
        return x0 + f * (x1 - x0), y0 + f * (y1 - y0)


@dataclass(frozen=True)
class SessionRequest:
    """One allocatable ADAS workload unit; demand is in GPU-slot units."""

    id: int
    vehicle_id: int
    start_s: float
    duration_s: float
    demand_units: float

    def __post_init__(self):
        if not (self.duration_s > 0):
            raise ValidationError("duration_s > 0")
        if not (self.demand_units > 0):
            raise ValidationError("demand_units > 0")


@dataclass(frozen=True)
class DemandProfile:
    """Session arrival rate with diurnal and weekly modulation.

    rate(t) = base * weekly[day] * (1 + amplitude * cos(2pi (h - peak)/24))
    """

    base_rate_per_hour: float
    diurnal_amplitude: float = 0.0
    peak_hour: float = 18.0
    weekly_factor: tuple[float, ...] = (1.0,) * 7

    def __post_init__(self):
        if self.base_rate_per_hour < 0:
            raise InvalidProfile("base_rate_per_hour >= 0")
        if not (0.0 <= self.diurnal_amplitude < 1.0):
            raise InvalidProfile("diurnal_amplitude in [0, 1)")
        if len(self.weekly_factor) != 7:
            raise InvalidProfile("weekly_factor has 7 entries")
        if any(f < 0 for f in self.weekly_factor):
            raise InvalidProfile("weekly_factor entries >= 0 (rate would go negative)")
        object.__setattr__(self, "weekly_factor", tuple(self.weekly_factor))

    def rate_per_hour(self, t_s: float) -> float:
        day = int(t_s // 86400.0) % 7
        hour = (t_s / 3600.0) % 24.0
        diurnal = 1.0 + self.diurnal_amplitude * math.cos(
            2.0 * math.pi * (hour - self.peak_hour) / 24.0
        )
        return self.base_rate_per_hour * self.weekly_factor[day] * diurnal

    @property
    def max_rate_per_hour(self) -> float:
        return (
            self.base_rate_per_hour
            * max(self.weekly_factor)
            * (1.0 + self.diurnal_amplitude)
        )


def coverage_bbox(aps) -> tuple[float, float, float, float]:
    """Bounding box (xmin, xmax, ymin, ymax) of all coverage circles."""
    if not aps:
        raise ValidationError("at least one access point")
    xmin = min(ap.x_m - ap.coverage_radius_m for ap in aps)
    xmax = max(ap.x_m + ap.coverage_radius_m for ap in aps)
    ymin = min(ap.y_m - ap.coverage_radius_m for ap in aps)
    ymax = max(ap.y_m + ap.coverage_radius_m for ap in aps)
    return xmin, xmax, ymin, ymax


def serving_ap(x_m: float, y_m: float, aps) -> str | None:
    """Nearest access point covering the position, or None if uncovered.

    Ties break toward the lowest id, so the result does not depend on the
    order of the AP list.
    """
    if not aps:
        raise ValidationError("at least one access point")
    best = None
    for ap in aps:
        d = math.hypot(x_m - ap.x_m, y_m - ap.y_m)
        if d <= ap.coverage_radius_m and (best is None or (d, ap.id) < best):
            best = (d, ap.id)
    return best[1] if best else None


def _vehicle_trace(
    rng, vehicle_id: int, start_s: float, duration_s: float, bbox, waypoint_interval_s
) -> VehicleTrace:
    xmin, xmax, ymin, ymax = bbox
    legs = max(1, math.ceil(duration_s / waypoint_interval_s))
    times = np.linspace(start_s, start_s + duration_s, legs + 1)
    xs = rng.uniform(xmin, xmax, size=legs + 1)
    ys = rng.uniform(ymin, ymax, size=legs + 1)
    waypoints = tuple(
        (float(t), float(x), float(y)) for t, x, y in zip(times, xs, ys)
    )
    return VehicleTrace(id=vehicle_id, waypoints=waypoints)


def generate_workload(
    profile: DemandProfile,
    aps,
    horizon_s: float,
    seed: int,
    session_duration_s: float = DEFAULT_SESSION_DURATION_S,
    session_demand_units: float = DEFAULT_SESSION_DEMAND_UNITS,
    waypoint_interval_s: float = 120.0,
):
    """Draw the synthetic workload for one run.

    Arrival times come from thinning a homogeneous Poisson process at the
    profile's peak rate. One vehicle is created per session, its trace
    spanning exactly [start, start + duration]. Deterministic per seed.
    """
    if not aps:
        raise ValidationError("at least one access point")
    if not (horizon_s > 0):
        raise ValidationError("horizon_s > 0")
    rng = substream(seed, "demand.workload")
    bbox = coverage_bbox(aps)

    vehicles: list[VehicleTrace] = []
    sessions: list[SessionRequest] = []
    lam_max = profile.max_rate_per_hour / 3600.0  # per second
    if lam_max <= 0:
        return vehicles, sessions
    t = 0.0
    next_id = 0
    while True:
        t += rng.exponential(1.0 / lam_max)
        if t >= horizon_s:
            break
        if rng.uniform() * lam_max > profile.rate_per_hour(t) / 3600.0:
            continue  # thinned out
        vehicles.append(
            _vehicle_trace(rng, next_id, t, session_duration_s, bbox, waypoint_interval_s)
        )
        sessions.append(
            SessionRequest(
                id=next_id,
                vehicle_id=next_id,
                start_s=t,
                duration_s=session_duration_s,
                demand_units=session_demand_units,
            )
        )
        next_id += 1
    return vehicles, sessions


def save_workload_trace(directory, vehicles, sessions) -> None:
    """Write workload.csv and vehicles.csv; full float precision for replay."""
    os.makedirs(directory, exist_ok=True)
    with open(os.path.join(directory, WORKLOAD_CSV), "w", newline="") as fh:
        fh.write("session_id,vehicle_id,start_s,duration_s,demand_units\n")
        for s in sessions:
            fh.write(f"{s.id},{s.vehicle_id},{s.start_s!r},{s.duration_s!r},{s.demand_units!r}\n")
    with open(os.path.join(directory, VEHICLES_CSV), "w", newline="") as fh:
        fh.write("vehicle_id,t_s,x_m,y_m\n")
        for v in vehicles:
            for t, x, y in v.waypoints:
                fh.write(f"{v.id},{t!r},{x!r},{y!r}\n")


def _parse_row(path, line_no, row, fields):
    try:
        return [conv(row[i]) for i, conv in enumerate(fields)]
    except (ValueError, IndexError) as exc:
        raise ParseError(str(exc), location=f"{os.path.basename(path)}:{line_no}") from exc


def load_workload_trace(directory):
    """Load a saved workload; returns (vehicles, sessions) in file order.

    The directory must contain workload.csv and vehicles.csv with the
    documented headers. Invariant violations report the offending line.
    """
    wpath = os.path.join(directory, WORKLOAD_CSV)
    vpath = os.path.join(directory, VEHICLES_CSV)
    sessions = []
    with open(wpath, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["session_id", "vehicle_id", "start_s", "duration_s", "demand_units"]:
            raise ParseError("bad header", location=f"{WORKLOAD_CSV}:1")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            sid, vid, start, dur, dem = _parse_row(
                wpath, line_no, row, (int, int, float, float, float)
            )
            try:
                sessions.append(SessionRequest(sid, vid, start, dur, dem))
            except ValidationError as exc:
                raise ValidationError(f"{WORKLOAD_CSV}:{line_no}: {exc}") from exc

    waypoints: dict[int, list] = {}
    order: list[int] = []
    with open(vpath, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["vehicle_id", "t_s", "x_m", "y_m"]:
            raise ParseError("bad header", location=f"{VEHICLES_CSV}:1")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            vid, t, x, y = _parse_row(vpath, line_no, row, (int, float, float, float))
            if vid not in waypoints:
                waypoints[vid] = []
                order.append(vid)
            waypoints[vid].append((t, x, y))
    vehicles = []
    for vid in order:
        try:
            vehicles.append(VehicleTrace(id=vid, waypoints=tuple(waypoints[vid])))
        except ValidationError as exc:
            raise ValidationError(f"{VEHICLES_CSV}: vehicle {vid}: {exc}") from exc

    known = {v.id for v in vehicles}
    for s in sessions:
        if s.vehicle_id not in known:
            raise ValidationError(f"session {s.id} references unknown vehicle {s.vehicle_id}")
    return vehicles, sessions
