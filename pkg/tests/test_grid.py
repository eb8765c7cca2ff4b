import math

import numpy as np
import pytest

from edgefed.errors import DomainError, ValidationError
from edgefed.grid import (
    BatterySpec,
    BatteryState,
    ConsumerSpec,
    PriceSchedule,
    PriceTier,
    SolarSpec,
    controller_step,
    price_at,
    solar_power,
    step_cost,
)

TWO_TIER = PriceSchedule(
    tiers=(PriceTier(0.0, 8.0, 0.10), PriceTier(8.0, 24.0, 0.30))
)


def balance_error(step):
    lhs = step.p_solar_w + step.p_cons_w + max(0.0, -step.p_charge_w)
    rhs = step.p_edc_w + max(0.0, step.p_charge_w) + step.p_surplus_w
    scale = max(abs(lhs), abs(rhs), 1.0)
    return abs(lhs - rhs) / scale


class TestPriceSchedule:
    def test_price_before_boundary(self):
        assert price_at((7 * 60 + 59) * 60.0, TWO_TIER) == 0.10

    def test_boundary_belongs_to_starting_tier(self):
        assert price_at(8 * 3600.0, TWO_TIER) == 0.30

    def test_wraps_to_next_day(self):
        assert price_at(25 * 3600.0, TWO_TIER) == 0.10

    def test_off_peak_is_minimum_price_tier(self):
        assert TWO_TIER.is_off_peak(0.0)
        assert not TWO_TIER.is_off_peak(12 * 3600.0)

    def test_rejects_gaps_overlaps_and_partial_days(self):
        with pytest.raises(ValidationError):
            PriceSchedule(tiers=(PriceTier(0.0, 8.0, 0.1),))
        with pytest.raises(ValidationError):
            PriceSchedule(
                tiers=(PriceTier(0.0, 9.0, 0.1), PriceTier(8.0, 24.0, 0.3))
            )
        with pytest.raises(ValidationError):
            PriceSchedule(
                tiers=(PriceTier(0.0, 7.0, 0.1), PriceTier(8.0, 24.0, 0.3))
            )

    def test_tiers_sorted_regardless_of_input_order(self):
        schedule = PriceSchedule(
            tiers=(PriceTier(8.0, 24.0, 0.3), PriceTier(0.0, 8.0, 0.1))
        )
        assert price_at(0.0, schedule) == 0.1


class TestSolar:
    SPEC = SolarSpec(peak_power_w=2000.0, sunrise_hour=6.0, sunset_hour=18.0)

    def test_zero_at_midnight(self):
        assert solar_power(0.0, self.SPEC) == 0.0

    def test_peak_at_solar_noon(self):
        assert solar_power(12 * 3600.0, self.SPEC) == pytest.approx(2000.0)

    def test_zero_at_sunrise_instant(self):
        assert solar_power(6 * 3600.0, self.SPEC) == pytest.approx(0.0, abs=1e-9)

    def test_nonnegative_all_day(self):
        for h in np.linspace(0.0, 24.0, 97):
            assert solar_power(float(h) * 3600.0, self.SPEC) >= 0.0

    def test_none_means_no_panels(self):
        assert solar_power(12 * 3600.0, None) == 0.0


class TestStepCost:
    def test_example(self):
        assert step_cost(10000.0, 3600.0, 0.20) == pytest.approx(2.00)

    def test_zero_power(self):
        assert step_cost(0.0, 3600.0, 0.30) == 0.0

    def test_subhour_step(self):
        assert step_cost(1500.0, 60.0, 0.30) == pytest.approx(0.0075)

    def test_rejects_negative(self):
        with pytest.raises(DomainError):
            step_cost(-1.0, 60.0, 0.1)


class TestControllerRules:
    def test_surplus_curtailed_when_battery_full(self):
        spec = ConsumerSpec(
            schedule=TWO_TIER,
            solar=SolarSpec(peak_power_w=5000.0, sunrise_hour=6.0, sunset_hour=18.0),
            battery=BatterySpec(20000.0, 5000.0, 5000.0, 1.0),
        )
        step, battery = controller_step(
            12 * 3600.0, 3000.0, BatteryState(soc_wh=20000.0), spec, 60.0
        )
        assert step.p_solar_w == pytest.approx(5000.0)
        assert step.p_surplus_w == pytest.approx(2000.0)
        assert step.p_cons_w == 0.0
        assert step.p_charge_w == 0.0
        assert battery.soc_wh == 20000.0

    def test_off_peak_grid_charging(self):
        spec = ConsumerSpec(
            schedule=TWO_TIER,
            solar=None,
            battery=BatterySpec(100000.0, 5000.0, 5000.0, 1.0),
        )
        step, battery = controller_step(0.0, 10000.0, BatteryState(0.0), spec, 3600.0)
        assert step.p_cons_w == pytest.approx(15000.0)
        assert step.p_charge_w == pytest.approx(5000.0)
        assert battery.soc_wh == pytest.approx(5000.0)
        assert step.cost_eur == pytest.approx(1.50)

    def test_peak_discharge_covers_deficit(self):
        spec = ConsumerSpec(
            schedule=TWO_TIER,
            solar=SolarSpec(peak_power_w=2000.0, sunrise_hour=6.0, sunset_hour=18.0),
            battery=BatterySpec(40000.0, 8000.0, 8000.0, 1.0),
        )
        step, battery = controller_step(
            12 * 3600.0, 10000.0, BatteryState(20000.0), spec, 3600.0
        )
        assert step.p_charge_w == pytest.approx(-8000.0)
        assert step.p_cons_w == pytest.approx(0.0)
        assert battery.soc_wh == pytest.approx(12000.0)
        assert step.cost_eur == 0.0

    def test_charge_efficiency_applied_on_charge_only(self):
        spec = ConsumerSpec(
            schedule=TWO_TIER,
            solar=None,
            battery=BatterySpec(100000.0, 4000.0, 4000.0, 0.9),
        )
        step, battery = controller_step(0.0, 0.0, BatteryState(0.0), spec, 3600.0)
        assert step.p_cons_w == pytest.approx(4000.0)  # grid sees the full draw
        assert battery.soc_wh == pytest.approx(3600.0)  # battery keeps 90%
        step2, battery2 = controller_step(9 * 3600.0, 3600.0, battery, spec, 3600.0)
        assert step2.p_charge_w == pytest.approx(-3600.0)
        assert battery2.soc_wh == pytest.approx(0.0)

    def test_degenerate_pass_through_cost(self):
        spec = ConsumerSpec(schedule=TWO_TIER, solar=None, battery=None)
        rng = np.random.default_rng(5)
        battery = BatteryState(0.0)
        total = 0.0
        expected = 0.0
        for k in range(48):
            t = k * 1800.0
            p = float(rng.uniform(0, 30000))
            step, battery = controller_step(t, p, battery, spec, 1800.0)
            total += step.cost_eur
            expected += p * 1800.0 / 3.6e6 * price_at(t, TWO_TIER)
            assert step.p_charge_w == 0.0 and step.p_surplus_w == 0.0
        assert total == pytest.approx(expected, rel=1e-12)

    def test_discharge_limited_by_soc(self):
        spec = ConsumerSpec(
            schedule=TWO_TIER, solar=None,
            battery=BatterySpec(50000.0, 9000.0, 9000.0, 1.0),
        )
        step, battery = controller_step(10 * 3600.0, 10000.0, BatteryState(500.0), spec, 3600.0)
        assert step.p_charge_w == pytest.approx(-500.0)
        assert battery.soc_wh == pytest.approx(0.0)
        assert step.p_cons_w == pytest.approx(9500.0)


def random_consumer(rng):
    cut = float(rng.uniform(4.0, 12.0))
    low, high = sorted(rng.uniform(0.05, 0.6, size=2))
    schedule = PriceSchedule(
        tiers=(PriceTier(0.0, cut, float(low)), PriceTier(cut, 24.0, float(high + 1e-3)))
    )
    solar = None
    if rng.uniform() < 0.7:
        sunrise = float(rng.uniform(4.0, 10.0))
        solar = SolarSpec(
            peak_power_w=float(rng.uniform(0, 30000)),
            sunrise_hour=sunrise,
            sunset_hour=sunrise + float(rng.uniform(4.0, 12.0)),
        )
    battery = None
    if rng.uniform() < 0.7:
        battery = BatterySpec(
            capacity_wh=float(rng.uniform(1000, 80000)),
            max_charge_w=float(rng.uniform(500, 15000)),
            max_discharge_w=float(rng.uniform(500, 15000)),
            round_trip_efficiency=float(rng.uniform(0.7, 1.0)),
        )
    return ConsumerSpec(schedule=schedule, solar=solar, battery=battery)


class TestControllerProperties:
    def test_power_balance_and_soc_bounds_fuzz(self):
        rng = np.random.default_rng(11)
        for _ in range(300):
            spec = random_consumer(rng)
            battery = BatteryState(
                0.0 if spec.battery is None
                else float(rng.uniform(0, spec.battery.capacity_wh))
            )
            dt = float(rng.choice([30.0, 60.0, 300.0, 3600.0]))
            for k in range(40):
                t = float(rng.uniform(0, 2 * 86400))
                p_edc = float(rng.uniform(0, 60000))
                step, battery = controller_step(t, p_edc, battery, spec, dt)
                assert balance_error(step) < 1e-9
                assert step.p_cons_w >= 0.0
                assert step.p_surplus_w >= 0.0
                if spec.battery is not None:
                    assert -1e-9 <= battery.soc_wh <= spec.battery.capacity_wh + 1e-9
                    assert max(0.0, step.p_charge_w) <= spec.battery.max_charge_w + 1e-9
                    assert max(0.0, -step.p_charge_w) <= spec.battery.max_discharge_w + 1e-9
                else:
                    assert step.p_charge_w == 0.0

    def test_grid_charging_only_during_off_peak(self):
        rng = np.random.default_rng(13)
        for _ in range(200):
            spec = random_consumer(rng)
            battery = BatteryState(0.0)
            for k in range(60):
                t = k * 1200.0
                step, battery = controller_step(
                    t, float(rng.uniform(0, 40000)), battery, spec, 1200.0
                )
                if not spec.schedule.is_off_peak(t):
                    # charging on peak can only come from solar surplus
                    assert step.p_charge_w <= 0.0 or step.p_cons_w == 0.0

    def test_more_solar_never_draws_more_grid_energy(self):
        rng = np.random.default_rng(19)
        for _ in range(40):
            base = random_consumer(rng)
            small = SolarSpec(5000.0, 6.0, 20.0)
            big = SolarSpec(12000.0, 6.0, 20.0)
            loads = rng.uniform(0, 40000, size=96)
            totals = []
            for solar in (small, big):
                spec = ConsumerSpec(schedule=base.schedule, solar=solar, battery=base.battery)
                battery = BatteryState(0.0)
                grid_j = 0.0
                for k, p in enumerate(loads):
                    step, battery = controller_step(k * 900.0, float(p), battery, spec, 900.0)
                    grid_j += step.p_cons_w * 900.0
                totals.append(grid_j)
            assert totals[1] <= totals[0] + 1e-6


def test_battery_spec_validation():
    with pytest.raises(ValidationError):
        BatterySpec(0.0, 100.0, 100.0)
    with pytest.raises(ValidationError):
        BatterySpec(1000.0, 100.0, 100.0, round_trip_efficiency=0.0)
    with pytest.raises(ValidationError):
        SolarSpec(peak_power_w=100.0, sunrise_hour=19.0, sunset_hour=7.0)
