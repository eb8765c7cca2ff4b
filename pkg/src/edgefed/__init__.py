"""edgefed: deterministic simulator for energy- and cost-aware Edge
data center federations, with a synthetic thermal/humidity scenario
generator for fault-tolerant model training."""

from .alloc import (
    AllocationDecision,
    DelayModel,
    EdcSnapshot,
    FederationView,
    allocate_cost_aware,
    allocate_energy_aware,
    allocate_nearest,
)
from .config import ExperimentConfig, config_hash, load_config, load_scenario_config
from .demand import (
    AccessPoint,
    DemandProfile,
    SessionRequest,
    VehicleTrace,
    generate_workload,
    load_workload_trace,
    save_workload_trace,
    serving_ap,
)
from .edc import (
    AirCoolingSpec,
    AmbientProfile,
    CoolingState,
    EdcSpec,
    ImmersionCoolingSpec,
    ItPowerModel,
    PowerBreakdown,
    admit,
    cooling_power,
    edc_power,
    immersion_thermal_state,
    it_power,
    pue,
)
from .grid import (
    BatterySpec,
    BatteryState,
    ConsumerSpec,
    GridStep,
    PriceSchedule,
    PriceTier,
    SolarSpec,
    controller_step,
    price_at,
    solar_power,
    step_cost,
)
from .kernel import Component, Event, Kernel, KernelConfig, RunTrace, run, substream
from .runner import (
    ComparisonReport,
    RunSummary,
    SimulationResult,
    compare,
    read_summary,
    run_experiment,
    simulate,
)
from .scenario import (
    AnomalySpec,
    DatasetSpec,
    GeneratorConfig,
    Predictor,
    SensorWindow,
    augmentation_experiment,
    build_augmented_dataset,
    evaluate,
    generate_clean,
    generate_dataset,
    inject_anomaly,
    train_predictor,
)

__version__ = "0.1.0"
