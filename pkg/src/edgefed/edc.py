"""Single Edge data center model: IT power, cooling power, and PUE.

Two cooling technologies are supported. Two-phase immersion reduces the
cooling overhead to a circulation pump whose drive is oversized, so its
draw is a constant set by the minimum flow rate; overhead is therefore
independent of ambient temperature. Air cooling is modeled as an overhead
ratio proportional to IT power with a linear ambient correction,
calibrated so the default gives PUE 1.55 at the reference ambient.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import CapacityExceeded, DomainError, UndefinedPue, ValidationError


@dataclass(frozen=True)
class ItPowerModel:
    """Aggregate IT power, affine in utilization.

    ``idle_fraction`` is the share of ``p_max_w`` drawn at zero utilization
    while powered on: 0 suits GPU clusters, ~0.7 suits server-class gear.
    """

    p_max_w: float
    idle_fraction: float = 0.0

    def __post_init__(self):
        if not (self.p_max_w > 0):
            raise ValidationError("p_max_w > 0")
        if not (0.0 <= self.idle_fraction <= 1.0):
            raise ValidationError("0 <= idle_fraction <= 1")


@dataclass(frozen=True)
class ImmersionCoolingSpec:
    """Two-phase immersion tank with dry-cooler heat rejection.

    Defaults describe a 50 kW prototype: a 1300 W drive pump at minimum
    flow, tank-inlet/ambient and tank-inlet/outlet interface ranges of
    20 K and 8 K, and a dielectric fluid boiling at 61 degC.
    """

    pump_power_w: float = 1300.0
    standby_power_w: float = 0.0
    capacity_w: float = 50000.0
    dt1_max_c: float = 20.0
    dt2_max_c: float = 8.0
    boiling_point_c: float = 61.0

    def __post_init__(self):
        if not (self.pump_power_w > 0):
            raise ValidationError("pump_power_w > 0")
        if self.standby_power_w < 0:
            raise ValidationError("standby_power_w >= 0")
        if not (self.capacity_w > 0):
            raise ValidationError("capacity_w > 0")
        if not (0.0 < self.dt2_max_c <= self.dt1_max_c):
            raise ValidationError("0 < dt2_max_c <= dt1_max_c")


@dataclass(frozen=True)
class AirCoolingSpec:
    """Proportional air-cooling overhead: P_cool = kappa(T_amb) * P_it."""

    kappa0: float = 0.55
    alpha_per_c: float = 0.01
    t_ref_c: float = 20.0

    def __post_init__(self):
        if not (self.kappa0 > 0):
            raise ValidationError("kappa0 > 0")

    def kappa(self, t_amb_c: float) -> float:
        k = self.kappa0 * (1.0 + self.alpha_per_c * (t_amb_c - self.t_ref_c))
        if k <= 0:
            raise ValidationError("kappa(t_amb) > 0 over the ambient range")
        return k


CoolingSpec = ImmersionCoolingSpec | AirCoolingSpec


@dataclass(frozen=True)
class CoolingState:
    """Thermal interface temperatures of an immersion-cooled EDC."""

    t_amb_c: float
    t_in_c: float
    t_out_c: float

    @property
    def dt1_c(self) -> float:
        return self.t_in_c - self.t_amb_c

    @property
    def dt2_c(self) -> float:
        return self.t_in_c - self.t_out_c


@dataclass(frozen=True)
class AmbientProfile:
    """Diurnal sinusoid of outdoor temperature; constant if amplitude is 0."""

    mean_c: float
    amplitude_c: float = 0.0
    peak_hour: float = 15.0

    def __post_init__(self):
        if self.amplitude_c < 0:
            raise ValidationError("amplitude_c >= 0")

    def at(self, t_s: float) -> float:
        hour = (t_s / 3600.0) % 24.0
        return self.mean_c + self.amplitude_c * math.cos(
            2.0 * math.pi * (hour - self.peak_hour) / 24.0
        )


@dataclass(frozen=True)
class EdcSpec:
    """Static configuration of one Edge data center."""

    id: str
    x_m: float
    y_m: float
    slots: int
    it_model: ItPowerModel
    cooling: CoolingSpec
    ambient: AmbientProfile

    def __post_init__(self):
        if self.slots < 1:
            raise ValidationError("slots >= 1")


@dataclass(frozen=True)
class PowerBreakdown:
    p_it_w: float
    p_cool_w: float

    @property
    def p_total_w(self) -> float:
        return self.p_it_w + self.p_cool_w


def it_power(u: float, model: ItPowerModel) -> float:
    """IT power at utilization ``u`` in [0, 1]: affine from idle to p_max."""
    if not (0.0 <= u <= 1.0):
        raise DomainError(f"utilization must be in [0, 1], got {u}")
    return model.p_max_w * (model.idle_fraction + (1.0 - model.idle_fraction) * u)


def immersion_thermal_state(t_amb_c: float, spec: ImmersionCoolingSpec) -> CoolingState:
    """Interface temperatures when operating at the maxima of the supported
    ranges, e.g. 32 degC ambient gives a 52 degC inlet and 44 degC outlet."""
    t_in = t_amb_c + spec.dt1_max_c
    return CoolingState(t_amb_c=t_amb_c, t_in_c=t_in, t_out_c=t_in - spec.dt2_max_c)


def cooling_power(p_it_w: float, t_amb_c: float, cooling: CoolingSpec) -> float:
    """Cooling power needed to extract ``p_it_w`` of heat.

    Immersion draws the constant pump power whenever there is any load
    (standby power otherwise) and is independent of ambient temperature.
    Air cooling scales with IT power and ambient.
    """
    if p_it_w < 0:
        raise DomainError("p_it_w >= 0")
    if isinstance(cooling, ImmersionCoolingSpec):
        if p_it_w > cooling.capacity_w:
            raise CapacityExceeded(
                f"IT load {p_it_w} W exceeds extractable {cooling.capacity_w} W"
            )
        return cooling.pump_power_w if p_it_w > 0 else cooling.standby_power_w
    return cooling.kappa(t_amb_c) * p_it_w


def pue(p_it_w: float, p_cool_w: float) -> float:
    """Power usage effectiveness: total facility power over IT power."""
    if p_it_w <= 0:
        raise UndefinedPue("PUE undefined for p_it_w <= 0")
    return (p_it_w + p_cool_w) / p_it_w


def edc_power(spec: EdcSpec, occupied_slots: int, t_amb_c: float) -> PowerBreakdown:
    """Instantaneous power decomposition at the given occupancy and ambient."""
    if not (0 <= occupied_slots <= spec.slots):
        raise DomainError(f"occupied_slots in [0, {spec.slots}], got {occupied_slots}")
    p_it = it_power(occupied_slots / spec.slots, spec.it_model)
    return PowerBreakdown(p_it_w=p_it, p_cool_w=cooling_power(p_it, t_amb_c, spec.cooling))


def slots_needed(demand_units: float) -> int:
    """Whole GPU slots for a session demand; fractional demand rounds up."""
    if demand_units <= 0:
        raise DomainError("demand_units > 0")
    return max(1, math.ceil(demand_units))


def admit(spec: EdcSpec, current_occupied: int, demand_slots: int):
    """New occupied-slot count, or None when capacity is insufficient."""
    if demand_slots < 1:
        raise DomainError("demand_slots >= 1")
    new = current_occupied + demand_slots
    return new if new <= spec.slots else None
