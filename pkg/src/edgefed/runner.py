"""Experiment orchestration: wire demand, allocation, EDCs and grid into
the kernel, account energy and cost, and emit the run CSVs.

Energy accounting follows the kernel's left-endpoint rule: the power
computed at a sample tick is held for the whole step. Sessions arriving
exactly on a boundary are processed before the tick, so they count from
that step onward. Vehicles are re-checked against AP coverage at every
tick: a session whose vehicle moved under another AP is handed over, and
one that left all coverage is dropped and counted as blocked.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass

import numpy as np

from . import alloc as alloc_mod
from . import edc as edc_mod
from . import grid as grid_mod
from .config import ExperimentConfig, config_hash
from .demand import generate_workload, load_workload_trace, serving_ap
from .errors import MismatchedScenarios, ParseError
from .kernel import JOULES_PER_KWH, Component, Kernel

POWER_CSV = "power.csv"
GRID_CSV = "grid.csv"
SESSIONS_CSV = "sessions.csv"
SUMMARY_CSV = "summary.csv"
META_JSON = "meta.json"

FEDERATION_ID = "federation"

SUMMARY_FIELDS = (
    "it_energy_kwh",
    "cooling_energy_kwh",
    "grid_energy_kwh",
    "solar_energy_kwh",
    "curtailed_kwh",
    "cost_eur",
    "mean_pue",
    "sessions_served",
    "sessions_blocked",
    "mean_delay_ms",
    "p95_delay_ms",
)


def _fmt(value) -> str:
    """Numeric CSV cell: 6 significant digits, empty for None."""
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return "%.6g" % value


@dataclass(frozen=True)
class PowerRow:
    t_s: float
    edc_id: str
    utilization: float
    p_it_w: float
    p_cool_w: float
    p_total_w: float
    pue: float  # 0.0 sentinel when p_it is 0


@dataclass(frozen=True)
class GridRow:
    t_s: float
    edc_id: str
    step: grid_mod.GridStep
    soc_wh: float  # state of charge after the step
    off_peak: bool
    price_eur_kwh: float


@dataclass
class SessionRecord:
    session_id: int
    vehicle_id: int
    start_s: float
    end_s: float | None = None
    edc_id: str | None = None
    delay_ms: float | None = None
    blocked: bool = False
    dropped: bool = False


@dataclass(frozen=True)
class SummaryRow:
    edc_id: str
    it_energy_kwh: float
    cooling_energy_kwh: float
    grid_energy_kwh: float
    solar_energy_kwh: float
    curtailed_kwh: float
    cost_eur: float
    mean_pue: float
    sessions_served: int
    sessions_blocked: int
    mean_delay_ms: float
    p95_delay_ms: float


@dataclass(frozen=True)
class RunSummary:
    """Per-EDC rows plus the federation total, with run identity."""

    rows: tuple[SummaryRow, ...]  # EDCs in config order, federation last
    policy: str
    seed: int
    config_hash: str

    @property
    def federation(self) -> SummaryRow:
        return self.rows[-1]

    def edc(self, edc_id: str) -> SummaryRow:
        for row in self.rows:
            if row.edc_id == edc_id:
                return row
        raise KeyError(edc_id)

    @property
    def total_energy_kwh(self) -> float:
        return self.federation.it_energy_kwh + self.federation.cooling_energy_kwh


@dataclass
class SimulationResult:
    """Full-precision outcome of one run, before CSV rounding."""

    summary: RunSummary
    power_rows: list
    grid_rows: list
    session_records: list
    initial_soc_wh: dict
    final_soc_wh: dict
    charge_energy_kwh: dict  # energy sent into batteries, pre-efficiency


class _EnergyAccount:
    __slots__ = ("it_j", "cool_j", "grid_j", "solar_j", "curtail_j", "charge_j", "cost_eur")

    def __init__(self):
        self.it_j = 0.0
        self.cool_j = 0.0
        self.grid_j = 0.0
        self.solar_j = 0.0
        self.curtail_j = 0.0
        self.charge_j = 0.0
        self.cost_eur = 0.0


class _Federation(Component):
    """Single component owning occupancy, batteries and all accounting."""

    continuous = True

    def __init__(self, config: ExperimentConfig, vehicles, sessions):
        super().__init__(FEDERATION_ID)
        self.config = config
        self.sites = config.edcs
        self.vehicles = {v.id: v for v in vehicles}
        self.sessions = sessions
        self.occupied = {site.spec.id: 0 for site in self.sites}
        self.batteries = {site.spec.id: grid_mod.BatteryState(0.0) for site in self.sites}
        self.accounts = {site.spec.id: _EnergyAccount() for site in self.sites}
        self.active: dict[int, dict] = {}
        self.records: dict[int, SessionRecord] = {}
        self.dropped_at = {site.spec.id: 0 for site in self.sites}
        self.power_rows: list[PowerRow] = []
        self.grid_rows: list[GridRow] = []
        self.distances = {
            (ap.id, site.spec.id): math.hypot(ap.x_m - site.spec.x_m, ap.y_m - site.spec.y_m)
            for ap in config.access_points
            for site in self.sites
        }

    # -- discrete transitions ------------------------------------------------

    def start(self, kernel: Kernel) -> None:
        for session in self.sessions:
            kernel.schedule(session.start_s, self.id, ("session-start", session))

    def handle(self, kernel: Kernel, event) -> None:
        kind, payload = event.payload
        if kind == "session-start":
            self._on_session_start(kernel, payload)
        elif kind == "session-end":
            self._on_session_end(payload)

    def _on_session_start(self, kernel: Kernel, session) -> None:
        t = kernel.now
        record = SessionRecord(
            session_id=session.id, vehicle_id=session.vehicle_id, start_s=session.start_s
        )
        self.records[session.id] = record
        x, y = self.vehicles[session.vehicle_id].position_at(t)
        ap_id = serving_ap(x, y, self.config.access_points)
        if ap_id is None:
            record.blocked = True
            return
        decision = alloc_mod.allocate(
            self.config.policy,
            session,
            ap_id,
            self._view(t),
            self.config.delay_model,
            self.config.max_delay_ms,
        )
        if decision.blocked:
            record.blocked = True
            return
        slots = edc_mod.slots_needed(session.demand_units)
        self.occupied[decision.edc_id] += slots
        record.edc_id = decision.edc_id
        record.delay_ms = decision.est_delay_ms
        record.end_s = session.start_s + session.duration_s
        kernel.schedule(record.end_s, self.id, ("session-end", session.id))
        self.active[session.id] = {
            "edc_id": decision.edc_id,
            "slots": slots,
            "vehicle_id": session.vehicle_id,
        }

    def _on_session_end(self, session_id: int) -> None:
        info = self.active.pop(session_id, None)
        if info is not None:
            self.occupied[info["edc_id"]] -= info["slots"]

    # -- continuous sampling -------------------------------------------------

    def _view(self, t: float) -> alloc_mod.FederationView:
        snaps = []
        for site in self.sites:
            spec = site.spec
            t_amb = spec.ambient.at(t)
            battery = site.consumer.battery
            snaps.append(
                alloc_mod.EdcSnapshot(
                    spec=spec,
                    occupied_slots=self.occupied[spec.id],
                    t_amb_c=t_amb,
                    power=edc_mod.edc_power(spec, self.occupied[spec.id], t_amb),
                    price_eur_kwh=grid_mod.price_at(t, site.consumer.schedule),
                    off_peak=site.consumer.schedule.is_off_peak(t),
                    solar_w=grid_mod.solar_power(t, site.consumer.solar),
                    battery_soc_wh=self.batteries[spec.id].soc_wh,
                    max_discharge_w=battery.max_discharge_w if battery else 0.0,
                )
            )
        return alloc_mod.FederationView(
            t_s=t, edcs=tuple(snaps), ap_edc_distance_m=self.distances
        )

    def _handover_sweep(self, t: float) -> None:
        for session_id in list(self.active):
            info = self.active[session_id]
            x, y = self.vehicles[info["vehicle_id"]].position_at(t)
            if serving_ap(x, y, self.config.access_points) is None:
                self.occupied[info["edc_id"]] -= info["slots"]
                self.dropped_at[info["edc_id"]] += 1
                record = self.records[session_id]
                record.blocked = True
                record.dropped = True
                record.end_s = t
                del self.active[session_id]

    def sample(self, kernel: Kernel, t: float) -> dict:
        dt = kernel.config.sample_step_s
        self._handover_sweep(t)
        p_federation = 0.0
        for site in self.sites:
            spec = site.spec
            t_amb = spec.ambient.at(t)
            power = edc_mod.edc_power(spec, self.occupied[spec.id], t_amb)
            step, battery = grid_mod.controller_step(
                t, power.p_total_w, self.batteries[spec.id], site.consumer, dt
            )
            self.batteries[spec.id] = battery
            account = self.accounts[spec.id]
            account.it_j += power.p_it_w * dt
            account.cool_j += power.p_cool_w * dt
            account.grid_j += step.p_cons_w * dt
            account.solar_j += step.p_solar_w * dt
            account.curtail_j += step.p_surplus_w * dt
            account.charge_j += max(0.0, step.p_charge_w) * dt
            account.cost_eur += step.cost_eur
            p_federation += power.p_total_w
            self.power_rows.append(
                PowerRow(
                    t_s=t,
                    edc_id=spec.id,
                    utilization=self.occupied[spec.id] / spec.slots,
                    p_it_w=power.p_it_w,
                    p_cool_w=power.p_cool_w,
                    p_total_w=power.p_total_w,
                    pue=edc_mod.pue(power.p_it_w, power.p_cool_w) if power.p_it_w > 0 else 0.0,
                )
            )
            self.grid_rows.append(
                GridRow(
                    t_s=t,
                    edc_id=spec.id,
                    step=step,
                    soc_wh=battery.soc_wh,
                    off_peak=site.consumer.schedule.is_off_peak(t),
                    price_eur_kwh=grid_mod.price_at(t, site.consumer.schedule),
                )
            )
        return {"p_federation_w": p_federation}


def _delay_stats(delays) -> tuple[float, float]:
    if not delays:
        return 0.0, 0.0
    arr = np.asarray(delays)
    return float(arr.mean()), float(np.percentile(arr, 95))


def _summary_row(edc_id, account, served, blocked, delays) -> SummaryRow:
    it_kwh = account.it_j / JOULES_PER_KWH
    cool_kwh = account.cool_j / JOULES_PER_KWH
    mean_delay, p95_delay = _delay_stats(delays)
    return SummaryRow(
        edc_id=edc_id,
        it_energy_kwh=it_kwh,
        cooling_energy_kwh=cool_kwh,
        grid_energy_kwh=account.grid_j / JOULES_PER_KWH,
        solar_energy_kwh=account.solar_j / JOULES_PER_KWH,
        curtailed_kwh=account.curtail_j / JOULES_PER_KWH,
        cost_eur=account.cost_eur,
        mean_pue=(it_kwh + cool_kwh) / it_kwh if it_kwh > 0 else 0.0,
        sessions_served=served,
        sessions_blocked=blocked,
        mean_delay_ms=mean_delay,
        p95_delay_ms=p95_delay,
    )


def simulate(config: ExperimentConfig) -> SimulationResult:
    """Run one experiment in memory; deterministic per config and seed."""
    horizon = config.kernel.horizon_s
    if config.demand.profile is not None:
        vehicles, sessions = generate_workload(
            config.demand.profile,
            config.access_points,
            horizon,
            seed=config.kernel.seed,
            session_duration_s=config.demand.session_duration_s,
            session_demand_units=config.demand.session_demand_units,
        )
    else:
        vehicles, sessions = load_workload_trace(config.demand.trace_dir)
        sessions = [s for s in sessions if s.start_s < horizon]

    federation = _Federation(config, vehicles, sessions)
    kernel = Kernel(config.kernel)
    kernel.register(federation)
    kernel.run()

    rows = []
    fed_account = _EnergyAccount()
    fed_served = 0
    fed_blocked = 0
    fed_delays: list[float] = []
    records = [federation.records[s.id] for s in sessions]
    for site in config.edcs:
        edc_id = site.spec.id
        account = federation.accounts[edc_id]
        delays = [
            r.delay_ms for r in records if r.edc_id == edc_id and not r.blocked
        ]
        served = len(delays)
        blocked = federation.dropped_at[edc_id]
        rows.append(_summary_row(edc_id, account, served, blocked, delays))
        for attr in _EnergyAccount.__slots__:
            setattr(fed_account, attr, getattr(fed_account, attr) + getattr(account, attr))
        fed_served += served
        fed_delays.extend(delays)
    fed_blocked = sum(1 for r in records if r.blocked)
    rows.append(_summary_row(FEDERATION_ID, fed_account, fed_served, fed_blocked, fed_delays))

    summary = RunSummary(
        rows=tuple(rows),
        policy=config.policy,
        seed=config.kernel.seed,
        config_hash=config_hash(config),
    )
    return SimulationResult(
        summary=summary,
        power_rows=federation.power_rows,
        grid_rows=federation.grid_rows,
        session_records=sorted(records, key=lambda r: r.session_id),
        initial_soc_wh={site.spec.id: 0.0 for site in config.edcs},
        final_soc_wh={k: v.soc_wh for k, v in federation.batteries.items()},
        charge_energy_kwh={
            k: federation.accounts[k].charge_j / JOULES_PER_KWH for k in federation.accounts
        },
    )


# ---------------------------------------------------------------------------
# CSV emission


def _write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def write_outputs(result: SimulationResult, out_dir) -> None:
    """Write power.csv, grid.csv, sessions.csv, summary.csv and meta.json."""
    os.makedirs(out_dir, exist_ok=True)
    _write_csv(
        os.path.join(out_dir, POWER_CSV),
        ("t_s", "edc_id", "utilization", "p_it_w", "p_cool_w", "p_total_w", "pue"),
        (
            (
                _fmt(r.t_s), r.edc_id, _fmt(r.utilization), _fmt(r.p_it_w),
                _fmt(r.p_cool_w), _fmt(r.p_total_w), _fmt(r.pue),
            )
            for r in result.power_rows
        ),
    )
    _write_csv(
        os.path.join(out_dir, GRID_CSV),
        (
            "t_s", "edc_id", "p_solar_w", "p_charge_w", "p_cons_w",
            "p_surplus_w", "soc_wh", "price_eur_kwh", "cost_eur",
        ),
        (
            (
                _fmt(r.t_s), r.edc_id, _fmt(r.step.p_solar_w), _fmt(r.step.p_charge_w),
                _fmt(r.step.p_cons_w), _fmt(r.step.p_surplus_w), _fmt(r.soc_wh),
                _fmt(r.price_eur_kwh), _fmt(r.step.cost_eur),
            )
            for r in result.grid_rows
        ),
    )
    _write_csv(
        os.path.join(out_dir, SESSIONS_CSV),
        ("session_id", "vehicle_id", "start_s", "end_s", "edc_id", "delay_ms", "blocked"),
        (
            (
                str(r.session_id), str(r.vehicle_id), _fmt(r.start_s), _fmt(r.end_s),
                r.edc_id or "", _fmt(r.delay_ms), str(int(r.blocked)),
            )
            for r in result.session_records
        ),
    )
    summary = result.summary
    _write_csv(
        os.path.join(out_dir, SUMMARY_CSV),
        ("edc_id",) + SUMMARY_FIELDS,
        (
            (row.edc_id,) + tuple(_fmt(getattr(row, f)) for f in SUMMARY_FIELDS)
            for row in summary.rows
        ),
    )
    meta = {"config_hash": summary.config_hash, "policy": summary.policy, "seed": summary.seed}
    with open(os.path.join(out_dir, META_JSON), "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def run_experiment(config: ExperimentConfig, out_dir) -> RunSummary:
    """Simulate and persist one experiment; returns its summary."""
    result = simulate(config)
    write_outputs(result, out_dir)
    return result.summary


def read_summary(path) -> RunSummary:
    """Load a summary.csv written by :func:`run_experiment`.

    Expects meta.json alongside it; values carry the CSV's 6-significant-
    digit rounding.
    """
    directory = os.path.dirname(os.path.abspath(path))
    meta_path = os.path.join(directory, META_JSON)
    if not os.path.exists(meta_path):
        raise ParseError("meta.json not found next to summary", location=meta_path)
    with open(meta_path) as fh:
        meta = json.load(fh)
    rows = []
    with open(path, newline="") as fh:
        header = fh.readline().strip().split(",")
        if tuple(header) != ("edc_id",) + SUMMARY_FIELDS:
            raise ParseError("bad header", location=f"{path}:1")
        for line_no, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != len(header):
                raise ParseError("wrong column count", location=f"{path}:{line_no}")
            values = dict(zip(SUMMARY_FIELDS, parts[1:]))
            rows.append(
                SummaryRow(
                    edc_id=parts[0],
                    **{
                        f: (int(values[f]) if f.startswith("sessions_") else float(values[f]))
                        for f in SUMMARY_FIELDS
                    },
                )
            )
    return RunSummary(
        rows=tuple(rows),
        policy=meta["policy"],
        seed=int(meta["seed"]),
        config_hash=meta["config_hash"],
    )


# ---------------------------------------------------------------------------
# Baseline-vs-candidate comparison


@dataclass(frozen=True)
class ComparisonReport:
    baseline_policy: str
    candidate_policy: str
    energy_saving: float  # 1 - candidate/baseline, fraction
    cost_saving: float
    mean_delay_delta_ms: float  # candidate - baseline
    blocked_delta: int

    def lines(self) -> list[str]:
        return [
            f"baseline_policy={self.baseline_policy}",
            f"candidate_policy={self.candidate_policy}",
            f"energy_saving_pct={100.0 * self.energy_saving:.4g}",
            f"cost_saving_pct={100.0 * self.cost_saving:.4g}",
            f"mean_delay_delta_ms={self.mean_delay_delta_ms:.4g}",
            f"blocked_delta={self.blocked_delta}",
        ]


def _saving(baseline: float, candidate: float) -> float:
    return 1.0 - candidate / baseline if baseline > 0 else 0.0


def compare(baseline: RunSummary, candidate: RunSummary) -> ComparisonReport:
    """Percentage deltas between two runs of the same scenario.

    Raises MismatchedScenarios unless the configs (policy aside) match.
    """
    if baseline.config_hash != candidate.config_hash:
        raise MismatchedScenarios(
            "summaries come from different scenarios (config hash mismatch)"
        )
    return ComparisonReport(
        baseline_policy=baseline.policy,
        candidate_policy=candidate.policy,
        energy_saving=_saving(baseline.total_energy_kwh, candidate.total_energy_kwh),
        cost_saving=_saving(baseline.federation.cost_eur, candidate.federation.cost_eur),
        mean_delay_delta_ms=candidate.federation.mean_delay_ms - baseline.federation.mean_delay_ms,
        blocked_delta=candidate.federation.sessions_blocked - baseline.federation.sessions_blocked,
    )
