"""Session placement policies over a federation snapshot.

Three pluggable policies: a delay-greedy baseline (nearest EDC with
capacity), an energy-aware policy minimizing the marginal federation
power of the placement, and a cost-aware variant ranking by marginal
grid-cost rate. All are deterministic functions of the snapshot with
documented tie-breaks, so exhaustive enumeration is a valid oracle.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import edc as edc_model
from .demand import SessionRequest
from .errors import CapacityExceeded, ValidationError


@dataclass(frozen=True)
class DelayModel:
    """Distance-proxy service delay: base + per_meter * distance."""

    base_latency_ms: float = 2.0
    per_meter_latency_ms: float = 0.001

    def __post_init__(self):
        if self.base_latency_ms < 0 or self.per_meter_latency_ms < 0:
            raise ValidationError("latencies >= 0")

    def delay_ms(self, distance_m: float) -> float:
        return self.base_latency_ms + self.per_meter_latency_ms * distance_m


@dataclass(frozen=True)
class EdcSnapshot:
    """One EDC's state as seen by the allocator at decision time."""

    spec: edc_model.EdcSpec
    occupied_slots: int
    t_amb_c: float
    power: edc_model.PowerBreakdown
    price_eur_kwh: float
    off_peak: bool
    solar_w: float = 0.0
    battery_soc_wh: float = 0.0
    max_discharge_w: float = 0.0


@dataclass(frozen=True)
class FederationView:
    """Consistent snapshot of the federation at a single time."""

    t_s: float
    edcs: tuple[EdcSnapshot, ...]
    ap_edc_distance_m: dict

    def distance_m(self, ap_id: str, edc_id: str) -> float:
        return self.ap_edc_distance_m[(ap_id, edc_id)]


@dataclass(frozen=True)
class AllocationDecision:
    session_id: int
    edc_id: str | None  # None means blocked
    est_delay_ms: float = 0.0
    est_marginal_power_w: float = 0.0

    @property
    def blocked(self) -> bool:
        return self.edc_id is None


def marginal_power_w(snap: EdcSnapshot, demand_slots: int) -> float | None:
    """Federation power increase for admitting the session here.

    None when the EDC lacks slot capacity or the extra load would exceed
    the immersion system's extractable heat.
    """
    new_occupied = edc_model.admit(snap.spec, snap.occupied_slots, demand_slots)
    if new_occupied is None:
        return None
    try:
        after = edc_model.edc_power(snap.spec, new_occupied, snap.t_amb_c)
    except CapacityExceeded:
        return None
    return after.p_total_w - snap.power.p_total_w


def _effective_price(snap: EdcSnapshot, delta_w: float) -> float:
    """Tier price unless free power covers the increment.

    Free cover is current solar surplus plus, outside off-peak tiers, the
    battery's discharge capability. One-step optimistic estimate; the
    controller enforces the real limits.
    """
    cover_w = max(0.0, snap.solar_w - snap.power.p_total_w)
    if not snap.off_peak and snap.battery_soc_wh > 0:
        cover_w += snap.max_discharge_w
    return 0.0 if delta_w <= cover_w else snap.price_eur_kwh


def _candidates(session, ap_id, view, delay_model):
    demand_slots = edc_model.slots_needed(session.demand_units)
    for snap in view.edcs:
        delay = delay_model.delay_ms(view.distance_m(ap_id, snap.spec.id))
        delta = marginal_power_w(snap, demand_slots)
        yield snap, delay, delta


def allocate_nearest(
    session: SessionRequest, ap_id: str, view: FederationView, delay_model: DelayModel
) -> AllocationDecision:
    """Delay-greedy baseline: closest EDC with capacity, no energy signal."""
    feasible = [
        (delay, snap.spec.id, delta)
        for snap, delay, delta in _candidates(session, ap_id, view, delay_model)
        if delta is not None
    ]
    if not feasible:
        return AllocationDecision(session_id=session.id, edc_id=None)
    delay, edc_id, delta = min(feasible)
    return AllocationDecision(session.id, edc_id, est_delay_ms=delay, est_marginal_power_w=delta)


def allocate_energy_aware(
    session: SessionRequest,
    ap_id: str,
    view: FederationView,
    delay_model: DelayModel,
    max_delay_ms: float,
) -> AllocationDecision:
    """Greedy marginal-power minimization within the delay bound.

    Ties break by lower delay, then lower EDC id.
    """
    if not (max_delay_ms > 0):
        raise ValidationError("max_delay_ms > 0")
    feasible = [
        (delta, delay, snap.spec.id)
        for snap, delay, delta in _candidates(session, ap_id, view, delay_model)
        if delta is not None and delay <= max_delay_ms
    ]
    if not feasible:
        return AllocationDecision(session_id=session.id, edc_id=None)
    delta, delay, edc_id = min(feasible)
    return AllocationDecision(session.id, edc_id, est_delay_ms=delay, est_marginal_power_w=delta)


def allocate_cost_aware(
    session: SessionRequest,
    ap_id: str,
    view: FederationView,
    delay_model: DelayModel,
    max_delay_ms: float,
) -> AllocationDecision:
    """Like the energy policy but ranks by marginal grid-cost rate.

    The rate is delta_power * effective_price, with effective price 0
    while an EDC's solar surplus or battery discharge covers the load.
    """
    if not (max_delay_ms > 0):
        raise ValidationError("max_delay_ms > 0")
    feasible = []
    for snap, delay, delta in _candidates(session, ap_id, view, delay_model):
        if delta is None or delay > max_delay_ms:
            continue
        rate = delta / 1000.0 * _effective_price(snap, delta)  # eur per hour
        feasible.append((rate, delay, snap.spec.id, delta))
    if not feasible:
        return AllocationDecision(session_id=session.id, edc_id=None)
    rate, delay, edc_id, delta = min(feasible)
    return AllocationDecision(session.id, edc_id, est_delay_ms=delay, est_marginal_power_w=delta)


#: Policy names accepted by the CLI and config files.
POLICIES = ("nearest", "energy", "cost")


def allocate(
    policy: str,
    session: SessionRequest,
    ap_id: str,
    view: FederationView,
    delay_model: DelayModel,
    max_delay_ms: float,
) -> AllocationDecision:
    """Dispatch to the named policy."""
    if policy == "nearest":
        return allocate_nearest(session, ap_id, view, delay_model)
    if policy == "energy":
        return allocate_energy_aware(session, ap_id, view, delay_model, max_delay_ms)
    if policy == "cost":
        return allocate_cost_aware(session, ap_id, view, delay_model, max_delay_ms)
    raise ValidationError(f"policy in {POLICIES}, got {policy!r}")
