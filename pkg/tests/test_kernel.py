import numpy as np
import pytest

from edgefed.errors import ComponentFault, SchedulingInPast, ValidationError
from edgefed.kernel import (
    Component,
    Kernel,
    KernelConfig,
    integrate_energy_kwh,
    run,
    substream,
)


class Recorder(Component):
    """Collects every delivered payload in order."""

    def __init__(self, component_id="rec"):
        super().__init__(component_id)
        self.seen = []

    def handle(self, kernel, event):
        self.seen.append((event.time, event.seq, event.payload))


class ConstantPower(Component):
    continuous = True

    def __init__(self, component_id, p_w):
        super().__init__(component_id)
        self.p_w = p_w

    def sample(self, kernel, t):
        return {"p_w": self.p_w}


class Faulty(Component):
    def handle(self, kernel, event):
        raise RuntimeError("boom")


def test_earlier_event_delivered_first():
    kernel = Kernel(KernelConfig(horizon_s=60.0, sample_step_s=60.0))
    rec = Recorder()
    kernel.register(rec)
    kernel.schedule(10.0, "rec", "x")
    kernel.schedule(5.0, "rec", "y")
    kernel.run()
    assert [p for _, _, p in rec.seen] == ["y", "x"]


def test_equal_time_tie_breaks_by_insertion_order():
    kernel = Kernel(KernelConfig(horizon_s=60.0, sample_step_s=60.0))
    rec = Recorder()
    kernel.register(rec)
    kernel.schedule(5.0, "rec", "a")
    kernel.schedule(5.0, "rec", "b")
    kernel.run()
    assert [p for _, _, p in rec.seen] == ["a", "b"]


def test_scheduling_in_past_rejected():
    kernel = Kernel(KernelConfig(horizon_s=120.0, sample_step_s=60.0))

    class Rescheduler(Component):
        def handle(self, kernel, event):
            kernel.schedule(kernel.now - 1.0, self.id, "late")

    comp = Rescheduler("r")
    kernel.register(comp)
    kernel.schedule(30.0, "r", "go")
    with pytest.raises(ComponentFault) as err:
        kernel.run()
    assert isinstance(err.value.__cause__, SchedulingInPast)


def test_schedule_unknown_target_rejected():
    kernel = Kernel(KernelConfig(horizon_s=60.0, sample_step_s=60.0))
    with pytest.raises(ValidationError):
        kernel.schedule(1.0, "ghost", None)


def test_tick_count_per_continuous_component():
    trace = run(
        KernelConfig(horizon_s=3600.0, sample_step_s=60.0),
        [ConstantPower("edc", 100.0), ConstantPower("grid", 1.0), Recorder()],
    )
    assert trace.tick_count("edc") == 60
    assert trace.tick_count("grid") == 60
    assert trace.tick_count("rec") == 0


def test_constant_power_integrates_exactly():
    trace = run(
        KernelConfig(horizon_s=3600.0, sample_step_s=60.0),
        [ConstantPower("edc", 100.0)],
    )
    powers = [s.values["p_w"] for s in trace.ticks if s.component == "edc"]
    assert integrate_energy_kwh(powers, 60.0) == pytest.approx(0.1, rel=0, abs=0)


def test_piecewise_constant_integration_matches_sum():
    rng = np.random.default_rng(3)
    powers = rng.uniform(0.0, 5e4, size=120)

    class Stepped(Component):
        continuous = True

        def sample(self, kernel, t):
            return {"p_w": powers[int(t // 30.0)]}

    trace = run(KernelConfig(horizon_s=3600.0, sample_step_s=30.0), [Stepped("s")])
    sampled = [s.values["p_w"] for s in trace.ticks]
    assert sampled == list(powers)
    assert integrate_energy_kwh(sampled, 30.0) == float(sum(sampled)) * 30.0 / 3.6e6


def test_trace_serialization_is_reproducible():
    def one_run():
        kernel = Kernel(KernelConfig(horizon_s=600.0, sample_step_s=60.0, seed=9))
        rec = Recorder()
        kernel.register(rec)
        kernel.register(ConstantPower("edc", 42.0))
        rng = kernel.substream("workload")
        for t in sorted(rng.uniform(0.0, 600.0, size=20)):
            kernel.schedule(float(t), "rec", round(float(t), 3))
        return kernel.run().to_csv()

    assert one_run() == one_run()


def test_delivery_order_equals_sorted_time_seq():
    rng = np.random.default_rng(17)
    for _ in range(25):
        kernel = Kernel(KernelConfig(horizon_s=1000.0, sample_step_s=100.0))
        rec = Recorder()
        kernel.register(rec)
        times = rng.uniform(0.0, 999.0, size=50)
        scheduled = [(float(t), kernel.schedule(float(t), "rec", i)) for i, t in enumerate(times)]
        kernel.run()
        delivered = [(t, seq) for t, seq, _ in rec.seen]
        assert delivered == sorted(scheduled)


def test_events_at_boundary_delivered_before_tick():
    order = []

    class Noter(Component):
        continuous = True

        def handle(self, kernel, event):
            order.append(("event", kernel.now))

        def sample(self, kernel, t):
            order.append(("tick", t))
            return None

    kernel = Kernel(KernelConfig(horizon_s=120.0, sample_step_s=60.0))
    kernel.register(Noter("n"))
    kernel.schedule(60.0, "n", "x")
    kernel.run()
    assert order == [("tick", 0.0), ("event", 60.0), ("tick", 60.0)]


def test_events_at_or_after_horizon_not_delivered():
    kernel = Kernel(KernelConfig(horizon_s=100.0, sample_step_s=50.0))
    rec = Recorder()
    kernel.register(rec)
    kernel.schedule(99.999, "rec", "in")
    kernel.schedule(100.0, "rec", "at")
    kernel.schedule(150.0, "rec", "out")
    kernel.run()
    assert [p for _, _, p in rec.seen] == ["in"]


def test_component_fault_carries_id_and_time():
    kernel = Kernel(KernelConfig(horizon_s=60.0, sample_step_s=60.0))
    kernel.register(Faulty("bad"))
    kernel.schedule(7.0, "bad", None)
    with pytest.raises(ComponentFault) as err:
        kernel.run()
    assert err.value.component_id == "bad"
    assert err.value.time_s == 7.0


def test_config_requires_divisible_horizon():
    with pytest.raises(ValidationError):
        KernelConfig(horizon_s=100.0, sample_step_s=33.0)
    with pytest.raises(ValidationError):
        KernelConfig(horizon_s=100.0, sample_step_s=0.0)


def test_substreams_are_independent_of_other_components():
    a1 = substream(5, "demand").uniform(size=4)
    a2 = substream(5, "demand").uniform(size=4)
    b = substream(5, "other").uniform(size=4)
    assert np.array_equal(a1, a2)
    assert not np.array_equal(a1, b)
