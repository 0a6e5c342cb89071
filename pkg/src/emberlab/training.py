"""Training, evaluation, and ablation orchestration.

The training loop follows the batch-size-1 recipe: a seeded shuffle of the
training runs each epoch, one forward/backward/Adam step per run, and a
NaN abort that rolls back to the last completed epoch. Checkpoints are
tensor-container bundles carrying every parameter, the batch-norm running
statistics, and a config echo sufficient to rebuild the model.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from . import baselines as bl
from . import container, metrics
from .autodiff import Adam
from .dataset import DatasetManifest, assemble_channels
from .emulator import (MODE_CL, MODE_PGCL, MODE_PGCL_PLUS, MODES,
                       EmulatorModel, InferenceEngine, mdn_nll, poisson_head)
from .errors import ConfigError
from .fireca import FuelFieldSequence
from .losses import BASE_MDN_NLL, BASE_MSE, LossWeights, total_loss
from .metrics import MetricsReport

log = logging.getLogger(__name__)

DESK_EPOCHS = 40
DESK_HIDDEN = 4  # desk-scale width; keeps one CPU core within the time budget


@dataclass
class TrainConfig:
    mode: str = MODE_CL
    epochs: int = DESK_EPOCHS
    lr: float = 0.001
    seed: int = 0
    hidden_channels: int = DESK_HIDDEN
    gram_weight: float = 0.0
    lr_decay: bool = True  # flat-then-cosine decay of lr across epochs
    mdn_head_lr_scale: float = 8.0  # lr multiplier for the MDN parameter head
    weights: LossWeights | None = None  # None -> mode defaults

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")


def weights_for_mode(mode: str, enabled: set[str] | None = None) -> LossWeights:
    """Default loss weights per mode.

    `enabled` restricts the physics terms for ablation rows; None keeps the
    mode's full set (all terms for pgcl/pgcl+, none for cl).
    """
    if mode == MODE_CL:
        active: set[str] = set()
    elif enabled is None:
        active = {"ft", "ros", "ba", "burned", "unburned"}
    else:
        unknown = enabled - {"ft", "ros", "ba", "burned", "unburned"}
        if unknown:
            raise ConfigError(f"unknown loss terms {sorted(unknown)}")
        active = enabled
    return LossWeights(
        base=BASE_MDN_NLL if mode == MODE_PGCL_PLUS else BASE_MSE,
        enable_ft="ft" in active, enable_ros="ros" in active,
        enable_ba="ba" in active, enable_burned="burned" in active,
        enable_unburned="unburned" in active)


@dataclass
class TrainResult:
    model: EmulatorModel
    epoch_losses: list[float]
    prior_rate: float
    config: TrainConfig
    aborted: bool = False
    sampled_counts: list[int] = field(default_factory=list)


def _load_split(manifest: DatasetManifest, base_dir, ids):
    pairs = []
    for run_id in ids:
        run = manifest.record(run_id)
        config = manifest.config_for(run)
        x = assemble_channels(config, manifest, base_dir)
        y = manifest.sequence_for(run, base_dir)
        pairs.append((run_id, x, y))
    return pairs


def _snapshot(model: EmulatorModel) -> dict[str, np.ndarray]:
    state = {name: p.data.copy() for name, p in model.named_params().items()}
    state.update({k: v.copy() for k, v in model.buffers().items()})
    return state


def _restore(model: EmulatorModel, state: dict[str, np.ndarray]) -> None:
    for name, p in model.named_params().items():
        p.data = state[name].copy()
    model.load_buffers(state)


def train(manifest: DatasetManifest, base_dir, config: TrainConfig
          ) -> TrainResult:
    """Fit one emulator on the manifest's training split."""
    if not manifest.train_ids:
        raise ConfigError("manifest has no training runs")
    weights = config.weights or weights_for_mode(config.mode)
    data = _load_split(manifest, base_dir, manifest.train_ids)

    model = EmulatorModel(in_channels=4,
                          hidden_channels=config.hidden_channels,
                          mode=config.mode, seed=config.seed)
    # the six-channel MDN parameter head trails the recurrent trunk under a
    # shared step size (the mixing logits see only responsibility gaps), so
    # it trains as a faster optimizer group; the single-channel regression
    # head of the other modes does not need one and degrades with it
    named = model.named_params()
    scales: list = [1.0] * len(named)
    if config.mode == MODE_PGCL_PLUS:
        names = list(named)
        scales[names.index("w_out")] = config.mdn_head_lr_scale
        scales[names.index("b_out")] = config.mdn_head_lr_scale
    optimizer = Adam(list(named.values()), lr=config.lr, lr_scales=scales)
    shuffle_rng = np.random.default_rng(config.seed)
    sample_rng = np.random.default_rng(config.seed + 1)

    # count prior for the Poisson head: mean ignited cells per training frame
    prior_rate = 1.0
    if config.mode == MODE_PGCL_PLUS:
        counts = [np.count_nonzero(frame < weights.eps_b)
                  for _, _, y in data for frame in y]
        prior_rate = max(float(np.mean(counts)), 1.0)

    result = TrainResult(model=model, epoch_losses=[], prior_rate=prior_rate,
                         config=config)
    last_good = _snapshot(model)

    for epoch in range(config.epochs):
        # flat-then-cosine schedule: with batch-1 updates on a small model
        # the final test error varies a lot with the shuffling seed unless
        # the step size anneals to zero; the flat first half leaves the
        # slower NLL base enough full-rate epochs to converge
        if config.lr_decay:
            frac = epoch / config.epochs
            if frac < 0.5:
                optimizer.lr = config.lr
            else:
                optimizer.lr = config.lr * 0.5 * (
                    1.0 + math.cos(math.pi * (frac - 0.5) / 0.5))
        order = shuffle_rng.permutation(len(data))
        epoch_total = 0.0
        for i in order:
            run_id, x, y = data[i]
            point, mixture = model.forward(x, train=True)
            if config.mode == MODE_PGCL_PLUS:
                base = mdn_nll(mixture, y)
                pois, sampled = poisson_head(mixture, y, prior_rate,
                                             weights.eps_b, rng=sample_rng)
                # per-cell normalization: the count free energy is O(cells)
                # while every other term is a per-cell mean; unnormalized it
                # dominates the shared features and destabilizes training
                pois = ad.mul(pois, 1.0 / (y.shape[1] * y.shape[2]))
                result.sampled_counts.extend(sampled)
                loss, _ = total_loss(y, point, weights, base_loss=base,
                                     poisson_loss=pois,
                                     gram_weight=config.gram_weight)
            else:
                loss, _ = total_loss(y, point, weights,
                                     gram_weight=config.gram_weight)

            value = loss.item()
            if not np.isfinite(value):
                log.error("non-finite loss on run %s (epoch %d); rolling back "
                          "to epoch %d", run_id, epoch, epoch - 1)
                _restore(model, last_good)
                result.aborted = True
                return result
            optimizer.zero_grad()
            try:
                loss.backward()
                optimizer.step()
            except FloatingPointError as exc:
                log.error("aborting on %s (epoch %d): %s; rolling back",
                          run_id, epoch, exc)
                _restore(model, last_good)
                result.aborted = True
                return result
            epoch_total += value

        mean_loss = epoch_total / len(data)
        result.epoch_losses.append(mean_loss)
        last_good = _snapshot(model)
        log.info("epoch %d/%d mean loss %.6f", epoch + 1, config.epochs,
                 mean_loss)
    return result


# -- checkpoints --------------------------------------------------------------

def save_checkpoint(directory, result: TrainResult,
                    extra_meta: dict[str, str] | None = None) -> None:
    model = result.model
    tensors = {name: p.data for name, p in model.named_params().items()}
    tensors.update(model.buffers())
    tensors["epoch_losses"] = np.asarray(result.epoch_losses)
    weights = result.config.weights or weights_for_mode(result.config.mode)
    meta = {
        "mode": model.mode,
        "in_channels": str(model.in_channels),
        "hidden_channels": str(model.hidden),
        "seed": str(result.config.seed),
        "epochs": str(result.config.epochs),
        "lr": repr(result.config.lr),
        "prior_rate": repr(result.prior_rate),
        "gram_weight": repr(result.config.gram_weight),
        "aborted": str(result.aborted),
        "weights": ",".join(f"{k}:{v}" for k, v in
                            sorted(weights.to_dict().items())),
    }
    meta.update(extra_meta or {})
    container.save_bundle(directory, tensors, meta)


def load_checkpoint(directory) -> tuple[EmulatorModel, dict[str, str]]:
    tensors, meta = container.load_bundle(directory)
    model = EmulatorModel(in_channels=int(meta["in_channels"]),
                          hidden_channels=int(meta["hidden_channels"]),
                          mode=meta["mode"], seed=int(meta.get("seed", "0")))
    for name, p in model.named_params().items():
        if name not in tensors:
            raise ConfigError(f"checkpoint missing tensor {name!r}")
        if tensors[name].shape != p.data.shape:
            raise ConfigError(
                f"checkpoint tensor {name!r} shaped {tensors[name].shape}, "
                f"model expects {p.data.shape}")
        p.data = tensors[name].copy()
    model.load_buffers(tensors)
    return model, meta


# -- evaluation ---------------------------------------------------------------

@dataclass
class BaselineRow:
    name: str
    mse: float
    burned_mse: float
    unburned_mse: float
    fire_metrics_mse: float


@dataclass
class EvaluationResult:
    per_run: dict[str, MetricsReport]
    aggregate: dict[str, float]
    baselines: list[BaselineRow]
    subgroups: dict[str, dict[str, float]]

    def to_kv(self) -> dict[str, float]:
        """Flat, deterministic key=value view (no wall-clock fields)."""
        out: dict[str, float] = {}
        for key in sorted(self.aggregate):
            out[f"mean.{key}"] = self.aggregate[key]
        for run_id in sorted(self.per_run):
            out.update(self.per_run[run_id].to_kv(f"run.{run_id}."))
        for row in self.baselines:
            out[f"baseline.{row.name}.mse"] = row.mse
            out[f"baseline.{row.name}.burned_mse"] = row.burned_mse
            out[f"baseline.{row.name}.unburned_mse"] = row.unburned_mse
            out[f"baseline.{row.name}.fire_metrics_mse"] = row.fire_metrics_mse
        for group in sorted(self.subgroups):
            for key in sorted(self.subgroups[group]):
                out[f"group.{group}.{key}"] = self.subgroups[group][key]
        return out


def _group_label(kind: str, value) -> str:
    return f"{kind}={value:g}" if isinstance(value, float) else f"{kind}={value}"


def evaluate(model: EmulatorModel, manifest: DatasetManifest, base_dir,
             split_ids=None, weights: LossWeights | None = None
             ) -> EvaluationResult:
    """Per-run metrics, means, match baselines, and subgroup MSE tables."""
    ids = list(split_ids if split_ids is not None else manifest.test_ids)
    if not ids:
        raise ConfigError("evaluation split is empty")
    weights = weights or LossWeights()
    engine = InferenceEngine(model)

    library = bl.HistoricalLibrary()
    for run_id in manifest.train_ids:
        run = manifest.record(run_id)
        library.add(manifest.config_for(run),
                    FuelFieldSequence(manifest.sequence_for(run, base_dir)))

    per_run: dict[str, MetricsReport] = {}
    group_sq: dict[str, list[float]] = {}
    base_sq = {"match_ignition": [], "match_wind": []}
    base_rows: dict[str, list] = {"match_ignition": [], "match_wind": []}

    for run_id in ids:
        run = manifest.record(run_id)
        config = manifest.config_for(run)
        x = assemble_channels(config, manifest, base_dir)
        y = manifest.sequence_for(run, base_dir)
        yhat = np.asarray(engine.predict(x), dtype=np.float64)
        report = metrics.full_report(y, yhat, weights.eps,
                                     weights.eps_b, weights.eps_u)
        per_run[run_id] = report
        for label in (_group_label("speed", run.wind_speed),
                      _group_label("direction", run.wind_direction),
                      _group_label("pattern", run.kind)):
            group_sq.setdefault(label, []).append(report.mse)

        if library.entries:
            for name, matcher in (("match_ignition", bl.match_ignition),
                                  ("match_wind", bl.match_wind)):
                retrieved = matcher(config, library).sequence.values
                suite = metrics.mse_suite(y, retrieved, weights.eps_b,
                                          weights.eps_u)
                base_rows[name].append(suite)

    fields = ("mse", "burned_mse", "unburned_mse", "fire_metrics_mse", "dmse",
              "metric_ft", "metric_burned", "metric_unburned", "metric_fp",
              "metric_fn")
    aggregate = {f: float(np.mean([getattr(r, f) for r in per_run.values()]))
                 for f in fields}

    baseline_rows = []
    for name in ("match_ignition", "match_wind"):
        suites = base_rows[name]
        if suites:
            baseline_rows.append(BaselineRow(
                name=name,
                mse=float(np.mean([s.mse for s in suites])),
                burned_mse=float(np.mean([s.burned_mse for s in suites])),
                unburned_mse=float(np.mean([s.unburned_mse for s in suites])),
                fire_metrics_mse=float(np.mean([s.fire_metrics_mse
                                                for s in suites]))))

    subgroups = {label: {"mse": float(np.mean(vals)), "runs": float(len(vals))}
                 for label, vals in group_sq.items()}
    return EvaluationResult(per_run=per_run, aggregate=aggregate,
                            baselines=baseline_rows, subgroups=subgroups)


# -- ablation -----------------------------------------------------------------

ABLATION_ROWS = (("none", frozenset()),
                 ("FT", frozenset({"ft"})),
                 ("B", frozenset({"burned"})),
                 ("U", frozenset({"unburned"})),
                 ("FM", frozenset({"ros", "ba"})))  # spread-consistency pair


@dataclass
class AblationRow:
    label: str
    terms: tuple[str, ...]
    mse: float
    metric_ft: float
    final_loss: float


def ablate(manifest: DatasetManifest, base_dir, epochs: int = DESK_EPOCHS,
           seed: int = 0, hidden_channels: int = DESK_HIDDEN,
           rows=ABLATION_ROWS) -> list[AblationRow]:
    """One-at-a-time constraint ablation on the MSE base, shared seed."""
    table: list[AblationRow] = []
    for label, terms in rows:
        config = TrainConfig(mode=MODE_PGCL, epochs=epochs, seed=seed,
                             hidden_channels=hidden_channels,
                             weights=weights_for_mode(MODE_PGCL, set(terms)))
        result = train(manifest, base_dir, config)
        outcome = evaluate(result.model, manifest, base_dir)
        table.append(AblationRow(label=label, terms=tuple(sorted(terms)),
                                 mse=outcome.aggregate["mse"],
                                 metric_ft=outcome.aggregate["metric_ft"],
                                 final_loss=result.epoch_losses[-1]))
    return table
