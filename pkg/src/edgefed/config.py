"""Experiment and scenario configuration: strict-schema YAML documents.

Unknown keys are errors, not warnings, so a typo in an experiment
definition cannot silently fall back to a default. Every document starts
with ``config_version: 1``. All defaults applied here are artifact
choices documented in the README, not measured values.
"""

from __future__ import annotations

import hashlib
import json
import os
import warnings
from dataclasses import dataclass, fields, is_dataclass
from datetime import datetime

import yaml

from .alloc import POLICIES, DelayModel
from .demand import AccessPoint, DemandProfile
from .edc import (
    AirCoolingSpec,
    AmbientProfile,
    EdcSpec,
    ImmersionCoolingSpec,
    ItPowerModel,
)
from .errors import ParseError, UnknownKey, ValidationError
from .grid import BatterySpec, ConsumerSpec, PriceSchedule, PriceTier, SolarSpec
from .kernel import KernelConfig
from .scenario import AnomalySpec, DatasetSpec, GeneratorConfig

CONFIG_VERSION = 1

_REQUIRED = object()


class _Node:
    """Mapping wrapper that tracks its key path and consumed keys."""

    def __init__(self, data, path: str):
        if not isinstance(data, dict):
            raise ValidationError(f"{path}: expected a mapping")
        self._data = dict(data)
        self.path = path

    def child(self, key: str, required=True) -> "_Node | None":
        if required:
            value = self.take(key)
        else:
            value = self.take(key, None)
            if value is None:
                return None
        return _Node(value, f"{self.path}.{key}")

    def take(self, key: str, default=_REQUIRED):
        if key in self._data:
            return self._data.pop(key)
        if default is _REQUIRED:
            raise ValidationError(f"{self.path}.{key} is required")
        return default

    def take_float(self, key: str, default=_REQUIRED) -> float | None:
        value = self.take(key, default)
        if value is None:
            return None
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ValidationError(f"{self.path}.{key}: expected a number")
        return float(value)

    def take_int(self, key: str, default=_REQUIRED) -> int | None:
        value = self.take(key, default)
        if value is None:
            return None
        if isinstance(value, bool) or not isinstance(value, int):
            raise ValidationError(f"{self.path}.{key}: expected an integer")
        return value

    def take_str(self, key: str, default=_REQUIRED) -> str | None:
        value = self.take(key, default)
        if value is not None and not isinstance(value, str):
            raise ValidationError(f"{self.path}.{key}: expected a string")
        return value

    def take_list(self, key: str, default=_REQUIRED) -> list | None:
        value = self.take(key, default)
        if value is not None and not isinstance(value, list):
            raise ValidationError(f"{self.path}.{key}: expected a list")
        return value

    def finish(self) -> None:
        if self._data:
            raise UnknownKey(f"{self.path}.{sorted(self._data)[0]}")


def _build(node: _Node | None, cls, field_map: dict, required: tuple = ()):
    """Construct a dataclass from a node: field -> take_* method name."""
    kwargs = {}
    for field_name, kind in field_map.items():
        take = getattr(node, f"take_{kind}")
        default = _REQUIRED if field_name in required else _dataclass_default(cls, field_name)
        value = take(field_name, default)
        if value is not None:
            kwargs[field_name] = value
    node.finish()
    try:
        return cls(**kwargs)
    except ValidationError as exc:
        raise ValidationError(f"{node.path}: {exc}") from exc


def _dataclass_default(cls, field_name):
    for f in fields(cls):
        if f.name == field_name:
            return f.default
    raise KeyError(field_name)


@dataclass(frozen=True)
class EdcSite:
    """One EDC plus its smart-grid consumer installation."""

    spec: EdcSpec
    consumer: ConsumerSpec


@dataclass(frozen=True)
class DemandSection:
    """Synthetic profile or a replayable trace directory, never both."""

    profile: DemandProfile | None
    trace_dir: str | None
    session_duration_s: float = 600.0
    session_demand_units: float = 1.0

    def __post_init__(self):
        if (self.profile is None) == (self.trace_dir is None):
            raise ValidationError("exactly one of demand.profile and demand.trace_dir")


@dataclass(frozen=True)
class ExperimentConfig:
    kernel: KernelConfig
    access_points: tuple[AccessPoint, ...]
    edcs: tuple[EdcSite, ...]
    demand: DemandSection
    policy: str
    delay_model: DelayModel
    max_delay_ms: float

    def __post_init__(self):
        if not self.access_points:
            raise ValidationError("at least one access point")
        if not self.edcs:
            raise ValidationError("at least one EDC")
        if self.policy not in POLICIES:
            raise ValidationError(f"policy in {POLICIES}")
        if not (self.max_delay_ms > 0):
            raise ValidationError("max_delay_ms > 0")
        ids = [site.spec.id for site in self.edcs]
        if len(set(ids)) != len(ids):
            raise ValidationError("EDC ids unique")
        ap_ids = [ap.id for ap in self.access_points]
        if len(set(ap_ids)) != len(ap_ids):
            raise ValidationError("access point ids unique")


def _to_plain(value):
    if is_dataclass(value) and not isinstance(value, type):
        return {f.name: _to_plain(getattr(value, f.name)) for f in fields(value)}
    if isinstance(value, dict):
        return {k: _to_plain(v) for k, v in sorted(value.items())}
    if isinstance(value, (list, tuple)):
        return [_to_plain(v) for v in value]
    return value


def config_hash(config: ExperimentConfig) -> str:
    """Digest of the normalized config with the policy field removed.

    Two runs are comparable (baseline vs candidate) exactly when their
    hashes match: same scenario, same seed, different policy allowed.
    """
    plain = _to_plain(config)
    plain.pop("policy")
    payload = json.dumps(plain, sort_keys=True)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def _load_yaml(path):
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        location = f"{path}:{mark.line + 1}" if mark is not None else path
        raise ParseError(str(exc.args[0] if exc.args else exc), location=location) from exc
    if not isinstance(data, dict):
        raise ParseError("top level must be a mapping", location=path)
    return data


def _check_version(root: _Node) -> None:
    version = root.take_int("config_version")
    if version != CONFIG_VERSION:
        raise ValidationError(f"config_version == {CONFIG_VERSION}, got {version}")


def _parse_cooling(node: _Node):
    kind = node.take_str("type")
    if kind == "immersion":
        return _build(
            node,
            ImmersionCoolingSpec,
            {
                "pump_power_w": "float",
                "standby_power_w": "float",
                "capacity_w": "float",
                "dt1_max_c": "float",
                "dt2_max_c": "float",
                "boiling_point_c": "float",
            },
        )
    if kind == "air":
        return _build(
            node,
            AirCoolingSpec,
            {"kappa0": "float", "alpha_per_c": "float", "t_ref_c": "float"},
        )
    raise ValidationError(f"{node.path}.type: 'immersion' or 'air', got {kind!r}")


def _parse_price_schedule(items, path: str) -> PriceSchedule:
    if not isinstance(items, list) or not items:
        raise ValidationError(f"{path}: expected a non-empty list of tiers")
    tiers = []
    for i, item in enumerate(items):
        node = _Node(item, f"{path}[{i}]")
        tiers.append(
            _build(
                node,
                PriceTier,
                {"start_hour": "float", "end_hour": "float", "price_eur_kwh": "float"},
                required=("start_hour", "end_hour", "price_eur_kwh"),
            )
        )
    try:
        return PriceSchedule(tiers=tuple(tiers))
    except ValidationError as exc:
        raise ValidationError(f"{path}: {exc}") from exc


def _parse_consumer(node: _Node) -> ConsumerSpec:
    schedule = _parse_price_schedule(node.take_list("price_schedule"), f"{node.path}.price_schedule")
    solar_node = node.child("solar", required=False)
    solar = None
    if solar_node is not None:
        solar = _build(
            solar_node,
            SolarSpec,
            {"peak_power_w": "float", "sunrise_hour": "float", "sunset_hour": "float"},
            required=("peak_power_w",),
        )
    battery_node = node.child("battery", required=False)
    battery = None
    if battery_node is not None:
        battery = _build(
            battery_node,
            BatterySpec,
            {
                "capacity_wh": "float",
                "max_charge_w": "float",
                "max_discharge_w": "float",
                "round_trip_efficiency": "float",
            },
            required=("capacity_wh", "max_charge_w", "max_discharge_w"),
        )
    node.finish()
    return ConsumerSpec(schedule=schedule, solar=solar, battery=battery)


def _parse_edc(item, path: str) -> EdcSite:
    node = _Node(item, path)
    edc_id = node.take_str("id")
    x_m = node.take_float("x_m")
    y_m = node.take_float("y_m")
    slots = node.take_int("slots")
    it_model = _build(
        node.child("it_model"),
        ItPowerModel,
        {"p_max_w": "float", "idle_fraction": "float"},
        required=("p_max_w",),
    )
    cooling = _parse_cooling(node.child("cooling"))
    ambient = _build(
        node.child("ambient"),
        AmbientProfile,
        {"mean_c": "float", "amplitude_c": "float", "peak_hour": "float"},
        required=("mean_c",),
    )
    consumer = _parse_consumer(node.child("grid"))
    node.finish()
    try:
        spec = EdcSpec(
            id=edc_id, x_m=x_m, y_m=y_m, slots=slots,
            it_model=it_model, cooling=cooling, ambient=ambient,
        )
    except ValidationError as exc:
        raise ValidationError(f"{path}: {exc}") from exc
    return EdcSite(spec=spec, consumer=consumer)


def _parse_demand(node: _Node, base_dir: str) -> DemandSection:
    profile = None
    profile_node = node.child("profile", required=False)
    if profile_node is not None:
        weekly = profile_node.take_list("weekly_factor", None)
        kwargs = {}
        if weekly is not None:
            if any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in weekly):
                raise ValidationError(f"{profile_node.path}.weekly_factor: expected numbers")
            kwargs["weekly_factor"] = tuple(float(v) for v in weekly)
        base = profile_node.take_float("base_rate_per_hour")
        amplitude = profile_node.take_float("diurnal_amplitude", None)
        peak = profile_node.take_float("peak_hour", None)
        if amplitude is not None:
            kwargs["diurnal_amplitude"] = amplitude
        if peak is not None:
            kwargs["peak_hour"] = peak
        profile_node.finish()
        try:
            profile = DemandProfile(base_rate_per_hour=base, **kwargs)
        except ValidationError as exc:
            raise ValidationError(f"{profile_node.path}: {exc}") from exc
    trace_dir = node.take_str("trace_dir", None)
    if trace_dir is not None and not os.path.isabs(trace_dir):
        trace_dir = os.path.normpath(os.path.join(base_dir, trace_dir))
    duration = node.take_float("session_duration_s", 600.0)
    units = node.take_float("session_demand_units", 1.0)
    node.finish()
    try:
        return DemandSection(
            profile=profile,
            trace_dir=trace_dir,
            session_duration_s=duration,
            session_demand_units=units,
        )
    except ValidationError as exc:
        raise ValidationError(f"{node.path}: {exc}") from exc


def load_config(path) -> ExperimentConfig:
    """Load, default-fill and validate an experiment config document."""
    base_dir = os.path.dirname(os.path.abspath(path))
    root = _Node(_load_yaml(path), "config")
    _check_version(root)

    kernel = _build(
        root.child("kernel"),
        KernelConfig,
        {"horizon_s": "float", "sample_step_s": "float", "seed": "int"},
        required=("horizon_s",),
    )

    ap_items = root.take_list("access_points")
    aps = []
    for i, item in enumerate(ap_items):
        node = _Node(item, f"config.access_points[{i}]")
        aps.append(
            _build(
                node,
                AccessPoint,
                {"id": "str", "x_m": "float", "y_m": "float", "coverage_radius_m": "float"},
                required=("id", "x_m", "y_m", "coverage_radius_m"),
            )
        )

    edc_items = root.take_list("edcs")
    sites = [_parse_edc(item, f"config.edcs[{i}]") for i, item in enumerate(edc_items)]

    demand = _parse_demand(root.child("demand"), base_dir)
    policy = root.take_str("policy", "nearest")
    delay_node = root.child("delay_model", required=False)
    if delay_node is not None:
        delay_model = _build(
            delay_node,
            DelayModel,
            {"base_latency_ms": "float", "per_meter_latency_ms": "float"},
        )
    else:
        delay_model = DelayModel()
    max_delay_ms = root.take_float("max_delay_ms", 100.0)
    root.finish()

    config = ExperimentConfig(
        kernel=kernel,
        access_points=tuple(aps),
        edcs=tuple(sites),
        demand=demand,
        policy=policy,
        delay_model=delay_model,
        max_delay_ms=max_delay_ms,
    )
    _warn_unreachable(config)
    return config


def _warn_unreachable(config: ExperimentConfig) -> None:
    for site in config.edcs:
        best = min(
            config.delay_model.delay_ms(
                ((ap.x_m - site.spec.x_m) ** 2 + (ap.y_m - site.spec.y_m) ** 2) ** 0.5
            )
            for ap in config.access_points
        )
        if best > config.max_delay_ms:
            warnings.warn(
                f"EDC {site.spec.id!r} is not reachable from any access point "
                f"within max_delay_ms ({best:.3g} > {config.max_delay_ms:.3g})",
                stacklevel=2,
            )


# ---------------------------------------------------------------------------
# Scenario-generation config (used by `edgefed scenario generate`)


@dataclass(frozen=True)
class ScenarioConfig:
    seed: int
    n_windows: int
    anomaly_fraction: float
    generator: GeneratorConfig
    anomaly: AnomalySpec
    dataset: DatasetSpec
    start_time: datetime

    def __post_init__(self):
        if self.n_windows < 1:
            raise ValidationError("n_windows >= 1")
        if not (0.0 <= self.anomaly_fraction <= 1.0):
            raise ValidationError("anomaly_fraction in [0, 1]")


def load_scenario_config(path) -> ScenarioConfig:
    """Load a scenario-generation config document."""
    root = _Node(_load_yaml(path), "config")
    _check_version(root)
    node = root.child("scenario")
    root.finish()

    seed = node.take_int("seed", 0)
    n_windows = node.take_int("n_windows", 620)
    anomaly_fraction = node.take_float("anomaly_fraction", 0.05)
    start_raw = node.take_str("start_time", None)
    try:
        start_time = (
            datetime.fromisoformat(start_raw) if start_raw is not None else datetime(2026, 1, 1)
        )
    except ValueError as exc:
        raise ValidationError(f"{node.path}.start_time: {exc}") from exc

    gen_node = node.child("generator", required=False)
    generator = (
        GeneratorConfig()
        if gen_node is None
        else _build(
            gen_node,
            GeneratorConfig,
            {
                "n_sensors": "int",
                "temp_mean_c": "float",
                "temp_std_c": "float",
                "hum_mean_pct": "float",
                "hum_std_pct": "float",
                "ar_coeff": "float",
                "th_correlation": "float",
                "window_len": "int",
                "step_s": "float",
            },
        )
    )
    anom_node = node.child("anomaly", required=False)
    anomaly = (
        AnomalySpec()
        if anom_node is None
        else _build(
            anom_node,
            AnomalySpec,
            {
                "step_index": "int",
                "temp_spike_c": "float",
                "hum_drop_pct": "float",
                "decay": "float",
            },
        )
    )
    ds_node = node.child("dataset", required=False)
    dataset = (
        DatasetSpec()
        if ds_node is None
        else _build(
            ds_node,
            DatasetSpec,
            {
                "n_real_windows": "int",
                "synthetic_ratio": "int",
                "anomaly_fraction": "float",
            },
        )
    )
    node.finish()
    return ScenarioConfig(
        seed=seed,
        n_windows=n_windows,
        anomaly_fraction=anomaly_fraction,
        generator=generator,
        anomaly=anomaly,
        dataset=dataset,
        start_time=start_time,
    )
