"""Evaluation suite: MSE family, change-weighted MSE, physical-consistency
percentages, and inference-time summaries."""

from __future__ import annotations

import time
from dataclasses import dataclass, field, asdict
from typing import Callable

import numpy as np

from . import losses
from .errors import DimensionError


@dataclass
class MseSuite:
    mse: float
    burned_mse: float
    unburned_mse: float
    fire_metrics_mse: float
    empty_burned_mask: bool = False
    empty_unburned_mask: bool = False


@dataclass
class ConsistencySuite:
    metric_ft: float
    metric_burned: float
    metric_unburned: float
    metric_fp: float
    metric_fn: float
    empty_classes: tuple[str, ...] = ()


@dataclass
class TimingSummary:
    min_s: float
    mean_s: float
    max_s: float
    repetitions: int


@dataclass
class MetricsReport:
    mse: float
    burned_mse: float
    unburned_mse: float
    fire_metrics_mse: float
    dmse: float
    metric_ft: float
    metric_burned: float
    metric_unburned: float
    metric_fp: float
    metric_fn: float
    flags: tuple[str, ...] = ()

    def to_kv(self, prefix: str = "") -> dict[str, float]:
        out = {}
        for key, value in asdict(self).items():
            if key == "flags":
                continue
            out[prefix + key] = value
        return out


def _check(y: np.ndarray, yhat: np.ndarray) -> None:
    if y.shape != yhat.shape or y.ndim != 3:
        raise DimensionError(
            f"metrics expect matching (T, M, P) arrays, got {y.shape} vs {yhat.shape}")


def mse_suite(y: np.ndarray, yhat: np.ndarray, eps_b: float = 0.1,
              eps_u: float = 0.65) -> MseSuite:
    _check(y, yhat)
    sq = (y - yhat) ** 2
    burned = y < eps_b
    unburned = y > eps_u

    burned_mse, empty_b = (float(sq[burned].mean()), False) if burned.any() else (0.0, True)
    unburned_mse, empty_u = (float(sq[unburned].mean()), False) if unburned.any() else (0.0, True)
    fire = losses.loss_ros(y, yhat, eps_b).item() + losses.loss_ba(y, yhat, eps_b).item()
    return MseSuite(mse=float(sq.mean()), burned_mse=burned_mse,
                    unburned_mse=unburned_mse, fire_metrics_mse=fire,
                    empty_burned_mask=empty_b, empty_unburned_mask=empty_u)


def dmse(y: np.ndarray, yhat: np.ndarray) -> tuple[float, bool]:
    """Squared error weighted by the magnitude of ground-truth frame change.

    Returns (value, degenerate): a constant-in-time truth has zero total
    weight and reports 0 with the degenerate flag set.
    """
    _check(y, yhat)
    if y.shape[0] < 2:
        raise DimensionError("dmse needs at least 2 frames")
    w = np.abs(y[1:] - y[:-1])
    total_w = w.sum()
    if total_w == 0.0:
        return 0.0, True
    sq = (yhat[1:] - y[1:]) ** 2
    return float((w * sq).sum() / total_w), False


def consistency_metrics(y: np.ndarray, yhat: np.ndarray, eps: float = 0.001,
                        eps_b: float = 0.1, eps_u: float = 0.65) -> ConsistencySuite:
    """Five physical-consistency percentages, classes taken from ground truth.

    burned: Y < eps_b; unburned: Y > eps_u; burning: the band in between.
    """
    _check(y, yhat)
    t_steps = y.shape[0]
    empty: list[str] = []

    if t_steps >= 2:
        increases = (yhat[1:] - yhat[:-1]) > eps
        metric_ft = 100.0 * increases.sum() / (y[0].size * (t_steps - 1))
    else:
        metric_ft = 0.0  # no transitions to violate

    unburned = y > eps_u
    burning = (~unburned) & ~(y < eps_b)

    def pct(mask_class: np.ndarray, cond: np.ndarray, name: str) -> float:
        denom = mask_class.sum()
        if denom == 0:
            empty.append(name)
            return 0.0
        return 100.0 * (mask_class & cond).sum() / denom

    metric_burned = pct(unburned, yhat < eps_b, "unburned")
    metric_unburned = pct(unburned, yhat < y, "unburned")
    metric_fp = pct(burning, yhat < eps_b, "burning")
    metric_fn = pct(burning, yhat > eps_u, "burning")

    return ConsistencySuite(metric_ft=float(metric_ft),
                            metric_burned=float(metric_burned),
                            metric_unburned=float(metric_unburned),
                            metric_fp=float(metric_fp),
                            metric_fn=float(metric_fn),
                            empty_classes=tuple(dict.fromkeys(empty)))


def full_report(y: np.ndarray, yhat: np.ndarray, eps: float = 0.001,
                eps_b: float = 0.1, eps_u: float = 0.65) -> MetricsReport:
    suite = mse_suite(y, yhat, eps_b, eps_u)
    d, degenerate = dmse(y, yhat)
    cons = consistency_metrics(y, yhat, eps, eps_b, eps_u)
    flags = []
    if suite.empty_burned_mask:
        flags.append("empty_burned_mask")
    if suite.empty_unburned_mask:
        flags.append("empty_unburned_mask")
    if degenerate:
        flags.append("degenerate_dmse")
    flags.extend(f"empty_class_{c}" for c in cons.empty_classes)
    return MetricsReport(mse=suite.mse, burned_mse=suite.burned_mse,
                         unburned_mse=suite.unburned_mse,
                         fire_metrics_mse=suite.fire_metrics_mse, dmse=d,
                         metric_ft=cons.metric_ft,
                         metric_burned=cons.metric_burned,
                         metric_unburned=cons.metric_unburned,
                         metric_fp=cons.metric_fp, metric_fn=cons.metric_fn,
                         flags=tuple(flags))


def timing_report(run: Callable[[], object], repetitions: int = 10) -> TimingSummary:
    """Wall-clock stats of repeated calls to a prediction closure."""
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    samples = []
    for _ in range(repetitions):
        t0 = time.perf_counter()
        run()
        samples.append(time.perf_counter() - t0)
    return TimingSummary(min_s=min(samples),
                         mean_s=sum(samples) / len(samples),
                         max_s=max(samples), repetitions=repetitions)
