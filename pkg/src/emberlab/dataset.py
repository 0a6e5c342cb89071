"""Desk dataset: sweep generation, persistence, splitting, channel assembly.

A dataset directory holds one EMBR container per CA run plus a plain-text
manifest. Inputs to the emulator are assembled as four channels: scaled
wind speed, scaled wind direction (both static), a cumulative ignition
indicator, and the unscaled source-domain fuel sequence for the run's
ignition pattern.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import container, fireca
from .errors import ConfigError
from .fireca import IgnitionKind, ScenarioConfig, build_ignition_pattern

log = logging.getLogger(__name__)

SOURCE_SETTING = (1.0, 230.0)  # wind speed m/s, meteorological degrees

DESK_ROWS = 32
DESK_COLS = 32
DESK_STEPS = 20
DESK_SPEEDS = (1.0, 4.0, 8.0)
DESK_DIRECTIONS = (230.0, 270.0, 310.0, 330.0)
DESK_PATTERNS = tuple(kind.value for kind in IgnitionKind)


@dataclass(frozen=True)
class SweepSpec:
    """What to generate: the cartesian sweep plus grid dims and master seed."""
    rows: int = DESK_ROWS
    cols: int = DESK_COLS
    steps: int = DESK_STEPS
    patterns: tuple[str, ...] = DESK_PATTERNS
    speeds: tuple[float, ...] = DESK_SPEEDS
    directions: tuple[float, ...] = DESK_DIRECTIONS
    seed: int = 0


@dataclass(frozen=True)
class RunRecord:
    run_id: str
    kind: str
    wind_speed: float
    wind_direction: float
    seed: int
    path: str  # relative to the dataset directory
    role: str  # "sweep" or "source"


@dataclass
class WindScaling:
    """Train-split min/max for the two wind channels."""
    speed_min: float = 0.0
    speed_max: float = 0.0
    direction_min: float = 0.0
    direction_max: float = 0.0

    def scale(self, value: float, lo: float, hi: float, name: str) -> float:
        if hi <= lo:
            return 0.0
        scaled = (value - lo) / (hi - lo)
        if scaled < 0.0 or scaled > 1.0:
            log.warning("%s %.3f outside training range [%.3f, %.3f]; clamped",
                        name, value, lo, hi)
        return min(1.0, max(0.0, scaled))

    def speed(self, value: float) -> float:
        return self.scale(value, self.speed_min, self.speed_max, "wind speed")

    def direction(self, value: float) -> float:
        return self.scale(value, self.direction_min, self.direction_max,
                          "wind direction")


@dataclass
class DatasetManifest:
    rows: int
    cols: int
    steps: int
    runs: list[RunRecord] = field(default_factory=list)
    train_ids: list[str] = field(default_factory=list)
    test_ids: list[str] = field(default_factory=list)
    scaling: WindScaling = field(default_factory=WindScaling)
    source_setting: tuple[float, float] = SOURCE_SETTING

    def record(self, run_id: str) -> RunRecord:
        for run in self.runs:
            if run.run_id == run_id:
                return run
        raise ConfigError(f"run id {run_id!r} not in manifest")

    def config_for(self, run: RunRecord) -> ScenarioConfig:
        ignition = build_ignition_pattern(run.kind, self.rows, self.cols,
                                          run.seed)
        return ScenarioConfig(rows=self.rows, cols=self.cols, steps=self.steps,
                              wind_speed=run.wind_speed,
                              wind_direction=run.wind_direction,
                              ignition=ignition, seed=run.seed)

    def sequence_for(self, run: RunRecord, base_dir: str | Path) -> np.ndarray:
        return container.load_tensor(Path(base_dir) / run.path)

    def source_run(self, kind: str) -> RunRecord:
        for run in self.runs:
            if run.role == "source" and run.kind == kind:
                return run
        raise ConfigError(f"no source-domain run for pattern {kind!r}")

    # -- persistence ----------------------------------------------------------
    def save(self, path: str | Path) -> None:
        lines = [f"rows={self.rows}", f"cols={self.cols}", f"steps={self.steps}",
                 f"source_speed={self.source_setting[0]!r}",
                 f"source_direction={self.source_setting[1]!r}",
                 f"speed_min={self.scaling.speed_min!r}",
                 f"speed_max={self.scaling.speed_max!r}",
                 f"direction_min={self.scaling.direction_min!r}",
                 f"direction_max={self.scaling.direction_max!r}",
                 f"train={','.join(self.train_ids)}",
                 f"test={','.join(self.test_ids)}"]
        for run in self.runs:
            lines.append(
                "run="
                f"{run.run_id};{run.kind};{run.wind_speed!r};"
                f"{run.wind_direction!r};{run.seed};{run.path};{run.role}")
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "DatasetManifest":
        fields: dict[str, str] = {}
        runs: list[RunRecord] = []
        for line in Path(path).read_text().splitlines():
            if not line.strip():
                continue
            key, _, value = line.partition("=")
            if key == "run":
                run_id, kind, speed, direction, seed, rel, role = \
                    value.split(";")
                runs.append(RunRecord(run_id=run_id, kind=kind,
                                      wind_speed=float(speed),
                                      wind_direction=float(direction),
                                      seed=int(seed), path=rel, role=role))
            else:
                fields[key] = value
        manifest = cls(rows=int(fields["rows"]), cols=int(fields["cols"]),
                       steps=int(fields["steps"]), runs=runs)
        manifest.source_setting = (float(fields["source_speed"]),
                                   float(fields["source_direction"]))
        manifest.scaling = WindScaling(
            speed_min=float(fields["speed_min"]),
            speed_max=float(fields["speed_max"]),
            direction_min=float(fields["direction_min"]),
            direction_max=float(fields["direction_max"]))
        manifest.train_ids = [s for s in fields["train"].split(",") if s]
        manifest.test_ids = [s for s in fields["test"].split(",") if s]
        return manifest


def _run_seed(master: int, index: int) -> int:
    return int(np.random.SeedSequence(entropy=[master, index])
               .generate_state(1)[0])


def generate_dataset(spec: SweepSpec, out_dir: str | Path) -> DatasetManifest:
    """Run the sweep plus one source-domain run per pattern; persist all.

    Fixed spec => byte-identical files: every CA seed derives from the
    master seed and the run index, and the train/test split is a seeded
    shuffle of the sweep runs.
    """
    out_dir = Path(out_dir)
    manifest = DatasetManifest(rows=spec.rows, cols=spec.cols,
                               steps=spec.steps)
    sweep = [(kind, speed, direction)
             for kind in spec.patterns
             for speed in spec.speeds
             for direction in spec.directions]
    if not sweep:
        return manifest

    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "runs").mkdir(exist_ok=True)

    def run_one(run_id, kind, speed, direction, seed, role):
        ignition = build_ignition_pattern(kind, spec.rows, spec.cols, seed)
        config = ScenarioConfig(rows=spec.rows, cols=spec.cols,
                                steps=spec.steps, wind_speed=speed,
                                wind_direction=direction, ignition=ignition,
                                seed=seed)
        rel = f"runs/{run_id}.embr"
        container.save_tensor(out_dir / rel, fireca.simulate(config).values)
        manifest.runs.append(RunRecord(run_id=run_id, kind=kind,
                                       wind_speed=speed,
                                       wind_direction=direction, seed=seed,
                                       path=rel, role=role))

    for index, (kind, speed, direction) in enumerate(sweep):
        run_one(f"run_{index:03d}", kind, speed, direction,
                _run_seed(spec.seed, index), "sweep")
    for offset, kind in enumerate(spec.patterns):
        run_one(f"source_{kind}", kind, SOURCE_SETTING[0], SOURCE_SETTING[1],
                _run_seed(spec.seed, len(sweep) + offset), "source")

    # 50/50 split of the sweep runs; scaling from the train half only
    ids = [run.run_id for run in manifest.runs if run.role == "sweep"]
    order = np.random.default_rng(spec.seed).permutation(len(ids))
    half = len(ids) // 2
    manifest.train_ids = sorted(ids[i] for i in order[:half])
    manifest.test_ids = sorted(ids[i] for i in order[half:])

    train_runs = [manifest.record(i) for i in manifest.train_ids]
    manifest.scaling = WindScaling(
        speed_min=min(r.wind_speed for r in train_runs),
        speed_max=max(r.wind_speed for r in train_runs),
        direction_min=min(r.wind_direction for r in train_runs),
        direction_max=max(r.wind_direction for r in train_runs))

    manifest.save(out_dir / "manifest.txt")
    return manifest


def ignition_indicator(config: ScenarioConfig) -> np.ndarray:
    """Frame t has 1 at every cell scheduled at or before step t."""
    frames = np.zeros((config.steps, config.rows, config.cols))
    for t, r, c in config.ignition.events:
        frames[t:, r, c] = 1.0
    return frames


def assemble_channels(config: ScenarioConfig, manifest: DatasetManifest,
                      base_dir: str | Path) -> np.ndarray:
    """Build the (T, M, P, 4) input tensor for one scenario."""
    if (config.rows, config.cols, config.steps) != (manifest.rows,
                                                    manifest.cols,
                                                    manifest.steps):
        raise ConfigError(
            f"scenario dims {(config.rows, config.cols, config.steps)} do not "
            f"match dataset dims "
            f"{(manifest.rows, manifest.cols, manifest.steps)}")
    source = manifest.source_run(config.ignition.kind.value)
    source_seq = manifest.sequence_for(source, base_dir)

    channels = np.empty((config.steps, config.rows, config.cols, 4))
    channels[..., 0] = manifest.scaling.speed(config.wind_speed)
    channels[..., 1] = manifest.scaling.direction(config.wind_direction)
    channels[..., 2] = ignition_indicator(config)
    channels[..., 3] = source_seq  # fuel density is not scaled
    return channels
