"""Physics-guided loss terms and their weighted combination.

Ground truth enters as plain numpy; predictions enter as autodiff tensors so
gradients flow back into the emulator. Indicator masks are always computed
outside the graph and treated as constants: differentiating through a step
function is meaningless, and masked-loss practice holds them fixed.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ConfigError, DimensionError

BASE_MSE = "mse"
BASE_MDN_NLL = "mdn_nll"


@dataclass
class LossWeights:
    lambda_ft: float = 0.001
    lambda_ros: float = 0.0001
    lambda_ba: float = 0.0001
    lambda_burned: float = 0.001
    lambda_unburned: float = 0.0001
    eps: float = 0.001       # fuel-increase tolerance
    eps_b: float = 0.1       # burned threshold
    eps_u: float = 0.65      # unburned threshold
    enable_ft: bool = True
    enable_ros: bool = True
    enable_ba: bool = True
    enable_burned: bool = True
    enable_unburned: bool = True
    base: str = BASE_MSE
    squared_error: bool = True  # elementwise squared error; False -> absolute

    def __post_init__(self):
        for name in ("lambda_ft", "lambda_ros", "lambda_ba",
                     "lambda_burned", "lambda_unburned"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        if self.eps < 0:
            raise ConfigError("eps must be >= 0")
        if not (0.0 < self.eps_b < self.eps_u <= 0.7):
            raise ConfigError("thresholds must satisfy 0 < eps_b < eps_u <= 0.7")
        if self.base not in (BASE_MSE, BASE_MDN_NLL):
            raise ConfigError(f"unknown base loss {self.base!r}")

    def to_dict(self) -> dict:
        return asdict(self)


def _as_pred_tensor(yhat) -> Tensor:
    return yhat if isinstance(yhat, Tensor) else Tensor(np.asarray(yhat, float))


def _elementwise_error(y: np.ndarray, yhat: Tensor, squared: bool) -> Tensor:
    d = ad.sub(Tensor(y), yhat)
    return ad.square(d) if squared else ad.absval(d)


def _check_sequence_shapes(y: np.ndarray, yhat: Tensor) -> None:
    if y.ndim != 3:
        raise DimensionError(f"expected (T, M, P) ground truth, got {y.shape}")
    if yhat.shape != y.shape:
        raise DimensionError(
            f"prediction shape {yhat.shape} does not match truth {y.shape}")


# -- fuel transport ----------------------------------------------------------

def loss_ft(y: np.ndarray, yhat, eps: float, squared: bool = True) -> Tensor:
    """Penalize predicted fuel increases above tolerance between frames."""
    yhat = _as_pred_tensor(yhat)
    _check_sequence_shapes(y, yhat)
    t_steps = y.shape[0]
    if t_steps < 2:
        raise DimensionError("fuel-transport loss needs at least 2 frames")

    mask = np.zeros_like(y)
    mask[1:] = (yhat.data[1:] - yhat.data[:-1]) > eps
    err = _elementwise_error(y, yhat, squared)
    return ad.mul(ad.tsum(ad.mul(err, Tensor(mask))), 1.0 / t_steps)


# -- spread consistency ------------------------------------------------------

def burned_columns(frame: np.ndarray, eps_b: float) -> int:
    """Number of distinct columns containing at least one burned cell."""
    return int(np.count_nonzero(np.any(frame < eps_b, axis=0)))


def ros(frame: np.ndarray, frame0: np.ndarray, t: int, t0: int,
        eps_b: float) -> float:
    """Columns newly reached by fire per elapsed step."""
    if t == t0:
        raise ZeroDivisionError("rate of spread undefined for t == t0")
    return (burned_columns(frame, eps_b) - burned_columns(frame0, eps_b)) / (t - t0)


def ros_curve(seq: np.ndarray, eps_b: float) -> np.ndarray:
    """Per-frame rate of spread relative to frame 0 (frame 0 itself reads 0)."""
    out = np.zeros(seq.shape[0])
    for t in range(1, seq.shape[0]):
        out[t] = ros(seq[t], seq[0], t, 0, eps_b)
    return out


def loss_ros(y: np.ndarray, yhat_values: np.ndarray, eps_b: float) -> Tensor:
    """Mean squared rate-of-spread error over t >= 1. Piecewise constant in
    the prediction, so it enters the graph as a constant."""
    t_steps = y.shape[0]
    if t_steps < 2:
        return Tensor(0.0)
    diffs = ros_curve(y, eps_b)[1:] - ros_curve(yhat_values, eps_b)[1:]
    return Tensor(float(np.mean(diffs ** 2)))


def ba(frame: np.ndarray, eps_b: float) -> float:
    """Percentage of grid cells burned below the threshold."""
    return 100.0 * float(np.count_nonzero(frame < eps_b)) / frame.size


def ba_curve(seq: np.ndarray, eps_b: float) -> np.ndarray:
    return np.array([ba(frame, eps_b) for frame in seq])


def loss_ba(y: np.ndarray, yhat_values: np.ndarray, eps_b: float) -> Tensor:
    diffs = ba_curve(y, eps_b) - ba_curve(yhat_values, eps_b)
    return Tensor(float(np.mean(diffs ** 2)))


# -- burn regularization -----------------------------------------------------

def loss_burned(y: np.ndarray, yhat, eps_b: float,
                squared: bool = True) -> Tensor:
    """Error on ground-truth burned cells (counters under-burning)."""
    yhat = _as_pred_tensor(yhat)
    _check_sequence_shapes(y, yhat)
    mask = (y < eps_b).astype(float)
    err = _elementwise_error(y, yhat, squared)
    return ad.mul(ad.tsum(ad.mul(err, Tensor(mask))), 1.0 / y.shape[0])


def loss_unburned(y: np.ndarray, yhat, eps_u: float,
                  squared: bool = True) -> Tensor:
    """Error on ground-truth unburned cells (counters over-burning)."""
    yhat = _as_pred_tensor(yhat)
    _check_sequence_shapes(y, yhat)
    mask = (y > eps_u).astype(float)
    err = _elementwise_error(y, yhat, squared)
    return ad.mul(ad.tsum(ad.mul(err, Tensor(mask))), 1.0 / y.shape[0])


# -- Gram statistics ---------------------------------------------------------

def loss_gram(y: np.ndarray, yhat) -> Tensor:
    """Mean squared difference of frame-by-frame Gram matrices.

    Each frame flattens to a vector; Gram entries are inner products scaled
    by the cell count.
    """
    yhat = _as_pred_tensor(yhat)
    _check_sequence_shapes(y, yhat)
    t_steps, rows, cols = y.shape
    n = rows * cols
    yf = y.reshape(t_steps, n)
    gram_y = (yf @ yf.T) / n

    flat = ad.reshape(yhat, (t_steps, n))
    pred_frames = [ad.take_index(flat, t, axis=0) for t in range(t_steps)]

    total = Tensor(0.0)
    for s in range(t_steps):
        for t in range(s, t_steps):
            dot = ad.mul(ad.tsum(ad.mul(pred_frames[s], pred_frames[t])), 1.0 / n)
            diff = ad.square(ad.sub(dot, Tensor(gram_y[s, t])))
            weight = 1.0 if s == t else 2.0  # symmetric off-diagonal pairs
            total = ad.add(total, ad.mul(diff, weight))
    return ad.mul(total, 1.0 / (t_steps * t_steps))


# -- combination -------------------------------------------------------------

def total_loss(y: np.ndarray, yhat, weights: LossWeights,
               base_loss: Tensor | None = None,
               poisson_loss: Tensor | None = None,
               gram_weight: float = 0.0) -> tuple[Tensor, dict[str, float]]:
    """Weighted physics-guided loss.

    With the MSE base, the base is computed here from the point prediction.
    With the MDN base, the caller supplies the negative log likelihood (and
    usually the Poisson term) while the mixture-mean point prediction still
    feeds the physics terms. Disabled or zero-weight terms are skipped
    entirely so ablation flags are exact no-ops.
    """
    yhat = _as_pred_tensor(yhat)
    _check_sequence_shapes(y, yhat)

    if weights.base == BASE_MSE:
        if base_loss is not None:
            raise ConfigError("MSE base is computed internally; do not pass base_loss")
        err = _elementwise_error(y, yhat, weights.squared_error)
        base = ad.tmean(err)
    else:
        if base_loss is None:
            raise ConfigError("MDN base requires the mixture NLL as base_loss")
        base = base_loss

    breakdown: dict[str, float] = {"base": base.item()}
    total = base

    def accumulate(name: str, enabled: bool, weight: float, make_term):
        if not enabled:
            breakdown[name] = 0.0
            return
        term = make_term()
        breakdown[name] = term.item()
        if weight != 0.0:
            nonlocal total
            total = ad.add(total, ad.mul(term, weight))

    accumulate("ft", weights.enable_ft, weights.lambda_ft,
               lambda: loss_ft(y, yhat, weights.eps, weights.squared_error))
    accumulate("ros", weights.enable_ros, weights.lambda_ros,
               lambda: loss_ros(y, yhat.data, weights.eps_b))
    accumulate("ba", weights.enable_ba, weights.lambda_ba,
               lambda: loss_ba(y, yhat.data, weights.eps_b))
    accumulate("burned", weights.enable_burned, weights.lambda_burned,
               lambda: loss_burned(y, yhat, weights.eps_b, weights.squared_error))
    accumulate("unburned", weights.enable_unburned, weights.lambda_unburned,
               lambda: loss_unburned(y, yhat, weights.eps_u, weights.squared_error))
    accumulate("gram", gram_weight != 0.0, gram_weight,
               lambda: loss_gram(y, yhat))

    if poisson_loss is not None:
        breakdown["poisson"] = poisson_loss.item()
        total = ad.add(total, poisson_loss)

    return total, breakdown
