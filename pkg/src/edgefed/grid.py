"""Smart-grid consumer model: tariff, solar generation, battery dispatch.

Each EDC owns one consumer installation (solar panels, a battery, and a
controller). The controller is price-aware and rule-based: solar serves
the EDC first, excess solar charges the battery and is otherwise
curtailed, the battery discharges to displace expensive grid energy
during non-off-peak tiers, and during off-peak tiers the battery charges
from the grid. Every step keeps an exact power balance so whole-run
energy conservation is testable to tight tolerances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError, ValidationError


@dataclass(frozen=True)
class PriceTier:
    start_hour: float
    end_hour: float
    price_eur_kwh: float

    def __post_init__(self):
        if not (0.0 <= self.start_hour < self.end_hour <= 24.0):
            raise ValidationError("0 <= start_hour < end_hour <= 24")
        if not (self.price_eur_kwh > 0):
            raise ValidationError("price_eur_kwh > 0")


@dataclass(frozen=True)
class PriceSchedule:
    """Time-of-use tariff covering the whole day without gaps or overlaps.

    A tier is off-peak when its price equals the schedule minimum; the
    battery controller only grid-charges inside those tiers.
    """

    tiers: tuple[PriceTier, ...]

    def __post_init__(self):
        if not self.tiers:
            raise ValidationError("at least one price tier")
        ordered = sorted(self.tiers, key=lambda tier: tier.start_hour)
        if ordered[0].start_hour != 0.0 or ordered[-1].end_hour != 24.0:
            raise ValidationError("tiers cover [0, 24) fully")
        for prev, cur in zip(ordered, ordered[1:]):
            if prev.end_hour != cur.start_hour:
                raise ValidationError("tiers cover [0, 24) without gaps or overlaps")
        object.__setattr__(self, "tiers", tuple(ordered))

    @property
    def min_price(self) -> float:
        return min(tier.price_eur_kwh for tier in self.tiers)

    def tier_at(self, t_s: float) -> PriceTier:
        hour = (t_s / 3600.0) % 24.0
        for tier in self.tiers:
            if tier.start_hour <= hour < tier.end_hour:
                return tier
        return self.tiers[-1]  # hour == 24.0 cannot occur after modulo

    def is_off_peak(self, t_s: float) -> bool:
        return self.tier_at(t_s).price_eur_kwh == self.min_price


@dataclass(frozen=True)
class SolarSpec:
    """Half-sine irradiation profile between sunrise and sunset."""

    peak_power_w: float
    sunrise_hour: float = 7.0
    sunset_hour: float = 19.0

    def __post_init__(self):
        if self.peak_power_w < 0:
            raise ValidationError("peak_power_w >= 0")
        if not (0.0 <= self.sunrise_hour < self.sunset_hour <= 24.0):
            raise ValidationError("0 <= sunrise_hour < sunset_hour <= 24")


@dataclass(frozen=True)
class BatterySpec:
    capacity_wh: float
    max_charge_w: float
    max_discharge_w: float
    round_trip_efficiency: float = 0.95  # applied on charge

    def __post_init__(self):
        if not (self.capacity_wh > 0):
            raise ValidationError("capacity_wh > 0")
        if not (self.max_charge_w > 0):
            raise ValidationError("max_charge_w > 0")
        if not (self.max_discharge_w > 0):
            raise ValidationError("max_discharge_w > 0")
        if not (0.0 < self.round_trip_efficiency <= 1.0):
            raise ValidationError("0 < round_trip_efficiency <= 1")


@dataclass(frozen=True)
class BatteryState:
    soc_wh: float = 0.0


@dataclass(frozen=True)
class ConsumerSpec:
    """One EDC's installation: tariff plus optional solar and battery."""

    schedule: PriceSchedule
    solar: SolarSpec | None = None
    battery: BatterySpec | None = None


@dataclass(frozen=True)
class GridStep:
    """Power-flow accounting for one controller step of length dt.

    ``p_charge_w`` is signed: positive while charging, negative while
    discharging. Balance holds exactly:
    solar + grid draw + discharge == EDC demand + charge + surplus.
    """

    t_s: float
    p_edc_w: float
    p_solar_w: float
    p_charge_w: float
    p_cons_w: float
    p_surplus_w: float
    cost_eur: float


def price_at(t_s: float, schedule: PriceSchedule) -> float:
    """Tariff at a simulation time; a boundary hour starts its tier."""
    return schedule.tier_at(t_s).price_eur_kwh


def solar_power(t_s: float, spec: SolarSpec | None) -> float:
    """Generated solar power at a simulation time, 0 outside daylight."""
    if spec is None:
        return 0.0
    hour = (t_s / 3600.0) % 24.0
    if hour < spec.sunrise_hour or hour > spec.sunset_hour:
        return 0.0
    phase = (hour - spec.sunrise_hour) / (spec.sunset_hour - spec.sunrise_hour)
    return spec.peak_power_w * math.sin(math.pi * phase)


def step_cost(p_cons_w: float, dt_s: float, price_eur_kwh: float) -> float:
    """Cost of drawing ``p_cons_w`` from the grid for ``dt_s`` seconds."""
    if p_cons_w < 0 or dt_s < 0 or price_eur_kwh < 0:
        raise DomainError("step_cost arguments must be >= 0")
    return p_cons_w * dt_s / 3600.0 / 1000.0 * price_eur_kwh


def controller_step(
    t_s: float,
    p_edc_w: float,
    battery: BatteryState,
    spec: ConsumerSpec,
    dt_s: float,
) -> tuple[GridStep, BatteryState]:
    """Advance the storage controller by one step.

    Rule order: (1) solar serves the EDC; (2) excess solar charges the
    battery up to rate and headroom, the remainder is curtailed; (3) in a
    non-off-peak tier, the battery discharges to cover the deficit and
    the residual comes from the grid; (4) in an off-peak tier the full
    deficit comes from the grid and the battery additionally grid-charges.
    All flows saturate at their limits; nothing here raises.
    """
    if p_edc_w < 0:
        raise DomainError("p_edc_w >= 0")
    if dt_s <= 0:
        raise DomainError("dt_s > 0")

    price = price_at(t_s, spec.schedule)
    off_peak = spec.schedule.is_off_peak(t_s)
    p_solar = solar_power(t_s, spec.solar)

    solar_to_edc = min(p_solar, p_edc_w)
    excess = p_solar - solar_to_edc
    deficit = p_edc_w - solar_to_edc

    bspec = spec.battery
    soc = battery.soc_wh
    hours = dt_s / 3600.0
    solar_charge = 0.0
    grid_charge = 0.0
    discharge = 0.0

    if bspec is not None and excess > 0.0:
        headroom_w = (bspec.capacity_wh - soc) / hours
        solar_charge = min(excess, bspec.max_charge_w, headroom_w)
        soc += solar_charge * hours * bspec.round_trip_efficiency
    surplus = excess - solar_charge

    if off_peak:
        if bspec is not None:
            headroom_w = (bspec.capacity_wh - soc) / hours
            grid_charge = min(bspec.max_charge_w - solar_charge, headroom_w)
            grid_charge = max(0.0, grid_charge)
            soc += grid_charge * hours * bspec.round_trip_efficiency
        p_cons = deficit + grid_charge
    else:
        if bspec is not None and deficit > 0.0:
            discharge = max(0.0, min(deficit, bspec.max_discharge_w, soc / hours))
            soc -= discharge * hours
        p_cons = deficit - discharge

    if bspec is not None:
        # kill float residues so soc stays exactly inside [0, capacity]
        soc = min(max(soc, 0.0), bspec.capacity_wh)

    step = GridStep(
        t_s=t_s,
        p_edc_w=p_edc_w,
        p_solar_w=p_solar,
        p_charge_w=solar_charge + grid_charge - discharge,
        p_cons_w=p_cons,
        p_surplus_w=surplus,
        cost_eur=step_cost(p_cons, dt_s, price),
    )
    return step, BatteryState(soc_wh=soc)
