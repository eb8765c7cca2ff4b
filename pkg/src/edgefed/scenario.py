"""Synthetic thermal/humidity scenario generation with anomaly injection.

Windows are bivariate AR(1) series (temperature, relative humidity) with
negatively correlated innovations, mimicking a data-room sensor sampled
every 10 minutes. Anomalies are injected on demand at a chosen step: a
temperature spike with a coincident humidity drop that relaxes
geometrically afterwards, so the post-event frames stay consistent with
the event. A ridge-regularized linear autoregressor serves as the
predictive model whose robustness the augmented datasets improve.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass, replace
from datetime import datetime, timedelta

import numpy as np

from .errors import InvalidConfig, ParseError, SingularSystem, ValidationError
from .kernel import substream

TEMP_RANGE_C = (10.0, 60.0)
HUM_RANGE_PCT = (5.0, 95.0)
DEFAULT_START = datetime(2026, 1, 1, 0, 0, 0)

WINDOWS_CSV = "windows.csv"
MANIFEST_JSON = "manifest.json"


@dataclass(frozen=True)
class GeneratorConfig:
    """Clean-scenario generator parameters.

    ``temp_std_c`` and ``hum_std_pct`` are innovation (per-step noise)
    standard deviations; the stationary spread is std / sqrt(1 - ar^2).
    """

    n_sensors: int = 35
    temp_mean_c: float = 24.0
    temp_std_c: float = 0.4
    hum_mean_pct: float = 45.0
    hum_std_pct: float = 1.2
    ar_coeff: float = 0.9
    th_correlation: float = -0.7
    window_len: int = 24
    step_s: float = 600.0

    def __post_init__(self):
        if self.n_sensors < 1:
            raise InvalidConfig("n_sensors >= 1")
        if self.temp_std_c < 0 or self.hum_std_pct < 0:
            raise InvalidConfig("noise standard deviations >= 0")
        if not (0.0 < self.ar_coeff < 1.0):
            raise InvalidConfig("ar_coeff in (0, 1)")
        if not (-1.0 <= self.th_correlation < 0.0):
            raise InvalidConfig("th_correlation in [-1, 0)")
        if self.window_len < 2:
            raise InvalidConfig("window_len >= 2")
        if not (self.step_s > 0):
            raise InvalidConfig("step_s > 0")

    def innovation_transform(self) -> np.ndarray:
        """Lower-triangular L with L @ L.T equal to the innovation covariance."""
        st, sh, rho = self.temp_std_c, self.hum_std_pct, self.th_correlation
        return np.array([[st, 0.0], [rho * sh, sh * math.sqrt(1.0 - rho * rho)]])


@dataclass(frozen=True)
class AnomalySpec:
    """On-demand fault signature: spike up in T, drop in H, geometric relaxation."""

    step_index: int = 10
    temp_spike_c: float = 12.0
    hum_drop_pct: float = 20.0
    decay: float = 0.6

    def __post_init__(self):
        if self.step_index < 0:
            raise ValidationError("step_index >= 0")
        if not (self.temp_spike_c > 0 and self.hum_drop_pct > 0):
            raise ValidationError("anomaly magnitudes > 0")
        if not (0.0 < self.decay <= 1.0):
            raise ValidationError("decay in (0, 1]")


@dataclass(eq=False)
class SensorWindow:
    """Fixed-length bivariate series for one sensor.

    ``frames`` has shape (window_len, 2) with columns (temperature degC,
    humidity %RH). ``clamp_count`` tallies values saturated at the
    physical ranges during generation or injection.
    """

    sensor_id: int
    start: datetime
    step_s: float
    frames: np.ndarray
    anomaly: AnomalySpec | None = None
    clamp_count: int = 0

    def __len__(self) -> int:
        return len(self.frames)

    def frame_time(self, k: int) -> datetime:
        return self.start + timedelta(seconds=k * self.step_s)


def _clamp_frames(frames: np.ndarray) -> tuple[np.ndarray, int]:
    clamped = np.empty_like(frames)
    clamped[:, 0] = np.clip(frames[:, 0], *TEMP_RANGE_C)
    clamped[:, 1] = np.clip(frames[:, 1], *HUM_RANGE_PCT)
    return clamped, int(np.count_nonzero(clamped != frames))


def generate_clean(
    config: GeneratorConfig,
    n_windows: int,
    seed: int,
    start_time: datetime = DEFAULT_START,
    stream: str = "scenario",
) -> list[SensorWindow]:
    """Draw clean windows; deterministic per seed.

    Each window gets its own derived substream, so generation order (or
    parallel generation) cannot change any window's content. Windows start
    from the stationary distribution and are clamped to physical ranges.
    """
    if n_windows < 0:
        raise InvalidConfig("n_windows >= 0")
    mu = np.array([config.temp_mean_c, config.hum_mean_pct])
    lt = config.innovation_transform()
    lt0 = lt / math.sqrt(1.0 - config.ar_coeff**2)
    span = timedelta(seconds=config.window_len * config.step_s)
    windows = []
    for i in range(n_windows):
        rng = substream(seed, f"{stream}.window.{i}")
        frames = np.empty((config.window_len, 2))
        frames[0] = mu + lt0 @ rng.standard_normal(2)
        noise = rng.standard_normal((config.window_len - 1, 2)) @ lt.T
        for k in range(1, config.window_len):
            frames[k] = mu + config.ar_coeff * (frames[k - 1] - mu) + noise[k - 1]
        frames, n_clamped = _clamp_frames(frames)
        windows.append(
            SensorWindow(
                sensor_id=i % config.n_sensors,
                start=start_time + i * span,
                step_s=config.step_s,
                frames=frames,
                clamp_count=n_clamped,
            )
        )
    return windows


def inject_anomaly(window: SensorWindow, spec: AnomalySpec) -> SensorWindow:
    """Return a copy of the window with the fault signature injected.

    Frames before ``step_index`` are untouched. From ``step_index`` on,
    the perturbation decays by a factor (1 - decay) per step, keeping the
    opposite-sign temperature/humidity coupling of the event.
    """
    if not (0 <= spec.step_index < len(window)):
        raise ValidationError("step_index < window length")
    frames = window.frames.copy()
    steps = np.arange(len(window) - spec.step_index)
    relax = (1.0 - spec.decay) ** steps
    frames[spec.step_index :, 0] += spec.temp_spike_c * relax
    frames[spec.step_index :, 1] -= spec.hum_drop_pct * relax
    frames, n_clamped = _clamp_frames(frames)
    return replace(
        window,
        frames=frames,
        anomaly=spec,
        clamp_count=window.clamp_count + n_clamped,
    )


# ---------------------------------------------------------------------------
# Prediction


@dataclass(frozen=True)
class Predictor:
    """One-step-ahead linear autoregressor over the last ``lag`` frames."""

    lag: int
    ridge: float
    coef: np.ndarray  # shape (2 * lag, 2)

    def predict(self, history: np.ndarray) -> np.ndarray:
        """Next (T, H) from the trailing ``lag`` frames."""
        return np.asarray(history)[-self.lag :].ravel() @ self.coef


def _training_pairs(windows, lag: int):
    xs, ys = [], []
    for w in windows:
        if len(w) <= lag:
            raise ValidationError(f"window length > lag ({len(w)} <= {lag})")
        frames = w.frames
        for t in range(lag, len(frames)):
            xs.append(frames[t - lag : t].ravel())
            ys.append(frames[t])
    return np.asarray(xs), np.asarray(ys)


def train_predictor(windows, lag: int = 6, ridge: float = 1e-3) -> Predictor:
    """Fit the autoregressor by the closed-form normal equations.

    Minimizes sum ||y - W x||^2 + ridge ||W||^2 over all sliding
    (history, next-frame) pairs pooled across windows.
    """
    if lag < 1:
        raise ValidationError("lag >= 1")
    if ridge < 0:
        raise ValidationError("ridge >= 0")
    x, y = _training_pairs(windows, lag)
    if len(x) < 2 * lag + 2:
        raise ValidationError(f"at least {2 * lag + 2} training pairs, got {len(x)}")
    gram = x.T @ x + ridge * np.eye(2 * lag)
    try:
        coef = np.linalg.solve(gram, x.T @ y)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem("normal matrix not invertible; use ridge > 0") from exc
    return Predictor(lag=lag, ridge=ridge, coef=coef)


def evaluate(predictor: Predictor, windows) -> tuple[float, float]:
    """Mean squared one-step-ahead error (temperature, humidity)."""
    x, y = _training_pairs(windows, predictor.lag)
    err = y - x @ predictor.coef
    return float(np.mean(err[:, 0] ** 2)), float(np.mean(err[:, 1] ** 2))


# ---------------------------------------------------------------------------
# Dataset recipe and augmentation experiment


@dataclass(frozen=True)
class DatasetSpec:
    """Desk-scale version of the 15k real / 150k synthetic training recipe.

    62 windows of 24 frames stand in for the real samples; synthetic
    windows keep the 1:10 ratio and the 5 percent anomaly share exactly.
    """

    n_real_windows: int = 62
    synthetic_ratio: int = 10
    anomaly_fraction: float = 0.05

    def __post_init__(self):
        if self.n_real_windows < 1:
            raise ValidationError("n_real_windows >= 1")
        if self.synthetic_ratio < 1:
            raise ValidationError("synthetic_ratio >= 1")
        if not (0.0 <= self.anomaly_fraction <= 1.0):
            raise ValidationError("anomaly_fraction in [0, 1]")

    @property
    def n_synthetic_windows(self) -> int:
        return self.n_real_windows * self.synthetic_ratio

    @property
    def n_anomalous_windows(self) -> int:
        return round(self.n_synthetic_windows * self.anomaly_fraction)


@dataclass
class AugmentedDataset:
    real: list
    synthetic: list  # anomaly-injected members carry window.anomaly

    @property
    def all_windows(self) -> list:
        return self.real + self.synthetic

    @property
    def n_anomalous(self) -> int:
        return sum(1 for w in self.synthetic if w.anomaly is not None)


def build_augmented_dataset(
    config: GeneratorConfig,
    anomaly: AnomalySpec,
    seed: int,
    dataset: DatasetSpec = DatasetSpec(),
) -> AugmentedDataset:
    """Generate the training corpus per the augmentation recipe.

    A stand-in "real" set is generated from the same process (measured
    data is not part of this artifact); the synthetic set is 10x larger
    with anomalies injected into a deterministic random subset.
    """
    real = generate_clean(config, dataset.n_real_windows, seed, stream="scenario.real")
    synthetic = generate_clean(
        config, dataset.n_synthetic_windows, seed, stream="scenario.synthetic"
    )
    rng = substream(seed, "scenario.anomaly-subset")
    chosen = rng.choice(
        dataset.n_synthetic_windows, size=dataset.n_anomalous_windows, replace=False
    )
    for idx in sorted(chosen):
        synthetic[idx] = inject_anomaly(synthetic[idx], anomaly)
    return AugmentedDataset(real=real, synthetic=synthetic)


def generate_dataset(
    config: GeneratorConfig,
    n_windows: int,
    seed: int,
    anomaly: AnomalySpec,
    anomaly_fraction: float,
    start_time: datetime = DEFAULT_START,
) -> list[SensorWindow]:
    """Clean windows with anomalies injected into a random fraction.

    The anomalous subset is drawn from a dedicated substream, so the
    clean content of every window is unaffected by the fraction.
    """
    if not (0.0 <= anomaly_fraction <= 1.0):
        raise InvalidConfig("anomaly_fraction in [0, 1]")
    windows = generate_clean(config, n_windows, seed, start_time=start_time)
    n_anom = round(n_windows * anomaly_fraction)
    rng = substream(seed, "scenario.anomaly-subset")
    chosen = rng.choice(n_windows, size=n_anom, replace=False)
    for idx in sorted(chosen):
        windows[idx] = inject_anomaly(windows[idx], anomaly)
    return windows


@dataclass(frozen=True)
class AugmentationResult:
    seed: int
    clean_temp_mse: float
    clean_hum_mse: float
    augmented_temp_mse: float
    augmented_hum_mse: float

    @property
    def temp_improvement(self) -> float:
        return 1.0 - self.augmented_temp_mse / self.clean_temp_mse


def augmentation_experiment(
    config: GeneratorConfig = GeneratorConfig(),
    anomaly: AnomalySpec = AnomalySpec(),
    seed: int = 0,
    dataset: DatasetSpec = DatasetSpec(),
    n_test_windows: int = 100,
    lag: int = 6,
    ridge: float = 1e-3,
) -> AugmentationResult:
    """Compare clean-only training against anomaly-augmented training.

    Both models see the same windows; the augmented corpus differs only
    in the anomalies injected into 5 percent of its synthetic windows.
    Both are evaluated on unseen windows that all contain the anomaly.
    """
    augmented = build_augmented_dataset(config, anomaly, seed, dataset)
    clean_synthetic = generate_clean(
        config, dataset.n_synthetic_windows, seed, stream="scenario.synthetic"
    )
    test = [
        inject_anomaly(w, anomaly)
        for w in generate_clean(config, n_test_windows, seed, stream="scenario.test")
    ]
    clean_model = train_predictor(augmented.real + clean_synthetic, lag, ridge)
    aug_model = train_predictor(augmented.all_windows, lag, ridge)
    clean_mse = evaluate(clean_model, test)
    aug_mse = evaluate(aug_model, test)
    return AugmentationResult(
        seed=seed,
        clean_temp_mse=clean_mse[0],
        clean_hum_mse=clean_mse[1],
        augmented_temp_mse=aug_mse[0],
        augmented_hum_mse=aug_mse[1],
    )


# ---------------------------------------------------------------------------
# Serialization


def generator_config_hash(config: GeneratorConfig) -> str:
    payload = json.dumps(config.__dict__, sort_keys=True)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def write_windows_csv(
    directory,
    windows,
    config: GeneratorConfig,
    seed: int | None = None,
    anomaly: AnomalySpec | None = None,
) -> None:
    """Write windows.csv plus a manifest with seed, config hash and counts."""
    os.makedirs(directory, exist_ok=True)
    with open(os.path.join(directory, WINDOWS_CSV), "w", newline="") as fh:
        fh.write("sensor_id,t_iso8601,temperature_c,humidity_pct,is_anomalous\n")
        for w in windows:
            onset = w.anomaly.step_index if w.anomaly is not None else None
            for k, (temp, hum) in enumerate(w.frames):
                flag = int(onset is not None and k >= onset)
                fh.write(
                    f"{w.sensor_id},{w.frame_time(k).isoformat()},"
                    f"{float(temp)!r},{float(hum)!r},{flag}\n"
                )
    manifest = {
        "window_len": config.window_len,
        "step_s": config.step_s,
        "n_windows": len(windows),
        "n_anomalous": sum(1 for w in windows if w.anomaly is not None),
        "clamped_values": sum(w.clamp_count for w in windows),
        "seed": seed,
        "config_hash": generator_config_hash(config),
        "anomaly": None if anomaly is None else anomaly.__dict__,
    }
    with open(os.path.join(directory, MANIFEST_JSON), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_windows_csv(directory) -> list[SensorWindow]:
    """Load a dataset written by :func:`write_windows_csv`."""
    mpath = os.path.join(directory, MANIFEST_JSON)
    try:
        with open(mpath) as fh:
            manifest = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(str(exc), location=mpath) from exc
    window_len = int(manifest["window_len"])
    step_s = float(manifest["step_s"])
    spec = manifest.get("anomaly")
    anomaly = None if spec is None else AnomalySpec(**spec)

    windows = []
    rows: list[tuple[int, datetime, float, float, int]] = []

    def flush():
        if not rows:
            return
        frames = np.array([[r[2], r[3]] for r in rows])
        flagged = any(r[4] for r in rows)
        windows.append(
            SensorWindow(
                sensor_id=rows[0][0],
                start=rows[0][1],
                step_s=step_s,
                frames=frames,
                anomaly=anomaly if flagged else None,
            )
        )
        rows.clear()

    path = os.path.join(directory, WINDOWS_CSV)
    with open(path, newline="") as fh:
        header = fh.readline().strip()
        if header != "sensor_id,t_iso8601,temperature_c,humidity_pct,is_anomalous":
            raise ParseError("bad header", location=f"{WINDOWS_CSV}:1")
        for line_no, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            try:
                row = (
                    int(parts[0]),
                    datetime.fromisoformat(parts[1]),
                    float(parts[2]),
                    float(parts[3]),
                    int(parts[4]),
                )
            except (ValueError, IndexError) as exc:
                raise ParseError(str(exc), location=f"{WINDOWS_CSV}:{line_no}") from exc
            rows.append(row)
            if len(rows) == window_len:
                flush()
    if rows:
        raise ParseError(
            f"trailing {len(rows)} rows do not form a full {window_len}-frame window",
            location=WINDOWS_CSV,
        )
    return windows
