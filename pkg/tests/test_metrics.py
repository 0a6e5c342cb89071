import time

import numpy as np
import pytest

from emberlab import losses, metrics
from emberlab.errors import DimensionError
from emberlab.fireca import IgnitionKind, ScenarioConfig, build_ignition_pattern, simulate


RNG = np.random.default_rng(19)


class TestMseSuite:
    def test_identity_all_zero(self):
        y = RNG.uniform(0, 0.7, size=(3, 4, 4))
        s = metrics.mse_suite(y, y.copy())
        assert s.mse == s.burned_mse == s.unburned_mse == s.fire_metrics_mse == 0.0

    def test_hand_case_masks(self):
        y = np.array([0.05, 0.7]).reshape(1, 1, 2)
        yhat = np.array([0.25, 0.5]).reshape(1, 1, 2)
        s = metrics.mse_suite(y, yhat)
        assert s.burned_mse == pytest.approx(0.04)
        assert s.unburned_mse == pytest.approx(0.04)

    def test_fire_metrics_matches_loss_terms(self):
        y = RNG.uniform(0, 0.7, size=(4, 5, 5))
        yhat = RNG.uniform(0, 0.7, size=(4, 5, 5))
        s = metrics.mse_suite(y, yhat)
        expected = (losses.loss_ros(y, yhat, 0.1).item()
                    + losses.loss_ba(y, yhat, 0.1).item())
        assert s.fire_metrics_mse == pytest.approx(expected)

    def test_empty_mask_flagged(self):
        y = np.full((2, 2, 2), 0.4)  # neither burned nor unburned
        s = metrics.mse_suite(y, y + 0.01)
        assert s.burned_mse == 0.0 and s.empty_burned_mask
        assert s.unburned_mse == 0.0 and s.empty_unburned_mask

    def test_full_masks_equal_plain_mse(self):
        y = np.full((2, 3, 3), 0.05)  # everything burned
        yhat = RNG.uniform(0, 0.7, size=(2, 3, 3))
        s = metrics.mse_suite(y, yhat)
        assert s.burned_mse == pytest.approx(s.mse)


class TestDmse:
    def test_identity_zero(self):
        y = RNG.uniform(0, 0.7, size=(3, 3, 3))
        value, degenerate = metrics.dmse(y, y.copy())
        assert value == 0.0 and not degenerate

    def test_constant_truth_degenerate(self):
        y = np.full((3, 2, 2), 0.7)
        value, degenerate = metrics.dmse(y, y + RNG.normal(size=y.shape) * 0.01)
        assert value == 0.0 and degenerate

    def test_hand_value(self):
        y = np.array([0.5, 0.3]).reshape(2, 1, 1)
        yhat = np.array([0.5, 0.4]).reshape(2, 1, 1)
        value, _ = metrics.dmse(y, yhat)
        assert value == pytest.approx(0.01)

    def test_single_frame_rejected(self):
        with pytest.raises(DimensionError):
            metrics.dmse(np.zeros((1, 2, 2)), np.zeros((1, 2, 2)))


class TestConsistencyMetrics:
    def test_identity_non_increasing(self):
        y = np.linspace(0.7, 0.3, 4).reshape(4, 1, 1) * np.ones((4, 3, 3))
        c = metrics.consistency_metrics(y, y.copy())
        assert c.metric_ft == 0.0
        assert c.metric_burned == 0.0
        assert c.metric_fp == 0.0 and c.metric_fn == 0.0

    def test_single_frame_ft_zero(self):
        y = RNG.uniform(0, 0.7, size=(1, 3, 3))
        c = metrics.consistency_metrics(y, y.copy())
        assert c.metric_ft == 0.0

    def test_hand_counts(self):
        y = np.array([0.7, 0.7]).reshape(1, 1, 2)
        yhat = np.array([0.05, 0.69]).reshape(1, 1, 2)
        c = metrics.consistency_metrics(y, yhat)
        assert c.metric_burned == pytest.approx(50.0)
        assert c.metric_unburned == pytest.approx(100.0)

    def test_permutation_invariance(self):
        y = RNG.uniform(0, 0.7, size=(2, 4, 4))
        yhat = RNG.uniform(0, 0.7, size=(2, 4, 4))
        c1 = metrics.consistency_metrics(y, yhat)
        perm = RNG.permutation(16)
        y2 = y.reshape(2, -1)[:, perm].reshape(2, 4, 4)
        yhat2 = yhat.reshape(2, -1)[:, perm].reshape(2, 4, 4)
        c2 = metrics.consistency_metrics(y2, yhat2)
        for name in ("metric_burned", "metric_unburned", "metric_fp", "metric_fn"):
            assert getattr(c1, name) == pytest.approx(getattr(c2, name))

    def test_simulator_truth_never_violates_transport(self):
        cfg = ScenarioConfig(
            rows=16, cols=16, steps=10, wind_speed=5.0, wind_direction=270.0,
            ignition=build_ignition_pattern(IgnitionKind.STRIP_SOUTH, 16, 16, 3),
            seed=3)
        y = simulate(cfg).values
        c = metrics.consistency_metrics(y, y.copy())
        assert c.metric_ft == 0.0

    def test_percentages_bounded(self):
        y = RNG.uniform(0, 0.7, size=(3, 5, 5))
        yhat = RNG.uniform(0, 0.7, size=(3, 5, 5))
        c = metrics.consistency_metrics(y, yhat)
        for name in ("metric_ft", "metric_burned", "metric_unburned",
                     "metric_fp", "metric_fn"):
            assert 0.0 <= getattr(c, name) <= 100.0


class TestTimingReport:
    def test_constant_stub(self):
        t = metrics.timing_report(lambda: None, repetitions=5)
        assert t.min_s <= t.mean_s <= t.max_s
        assert t.repetitions == 5

    def test_sleep_ordering(self):
        # sleeps can only overshoot, so assert floors and ordering rather
        # than a tight ratio that scheduler jitter would break
        fast = metrics.timing_report(lambda: time.sleep(0.01), repetitions=4)
        slow = metrics.timing_report(lambda: time.sleep(0.03), repetitions=4)
        assert fast.min_s >= 0.01
        assert slow.min_s >= 0.03
        assert slow.min_s > fast.min_s
        assert slow.mean_s > fast.mean_s

    def test_default_repetitions(self):
        import inspect
        sig = inspect.signature(metrics.timing_report)
        assert sig.parameters["repetitions"].default == 10


class TestFullReport:
    def test_kv_serialization(self):
        y = RNG.uniform(0, 0.7, size=(3, 4, 4))
        report = metrics.full_report(y, y.copy())
        kv = report.to_kv(prefix="agg_")
        assert kv["agg_mse"] == 0.0
        assert "agg_flags" not in kv
