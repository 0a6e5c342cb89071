"""Seeded cellular-automata fire spread on a homogeneous grass grid.

Plays the role of the process-based ground-truth simulator at desk scale:
moisture must dry before a cell burns, burning cells consume fuel to
completion, and spread probability grows downwind. All stochastic choices are
drawn from one seeded generator in row-major cell order, so a fixed seed gives
a bit-identical run.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError

FUEL_MAX = 0.7

# Cell status codes. Transitions only move forward.
UNIGNITED, IGNITING, BURNING, BURNED_OUT = 0, 1, 2, 3

_NEIGHBORS = [(-1, -1), (-1, 0), (-1, 1),
              (0, -1), (0, 1),
              (1, -1), (1, 0), (1, 1)]


class IgnitionKind(str, enum.Enum):
    AERIAL = "aerial"
    INWARD = "inward"
    OUTWARD = "outward"
    STRIP_NORTH = "strip_north"
    STRIP_SOUTH = "strip_south"


@dataclass(frozen=True)
class IgnitionPattern:
    kind: IgnitionKind
    events: tuple[tuple[int, int, int], ...]  # (step, row, col)

    def validate(self, rows: int, cols: int, steps: int) -> None:
        for t, r, c in self.events:
            if not (0 <= t < steps and 0 <= r < rows and 0 <= c < cols):
                raise ConfigError(
                    f"ignition event (t={t}, r={r}, c={c}) outside "
                    f"{steps}x{rows}x{cols} run")

    def mask(self, rows: int, cols: int) -> np.ndarray:
        """Binary map of every cell the schedule ever lights."""
        m = np.zeros((rows, cols), dtype=bool)
        for _, r, c in self.events:
            m[r, c] = True
        return m


@dataclass(frozen=True)
class CARules:
    """Spread/drying/burn constants. Calibration knobs, not physics claims."""
    base_prob: float = 0.25       # ignition probability with no wind help
    wind_gain: float = 0.3        # per m/s boost along the wind travel vector
    dry_rate: float = 0.34        # moisture lost per step while fire is close
    burn_rate: float = 0.14       # fuel consumed per step while burning


@dataclass(frozen=True)
class ScenarioConfig:
    rows: int
    cols: int
    steps: int
    wind_speed: float
    wind_direction: float  # meteorological degrees: direction wind comes FROM
    ignition: IgnitionPattern
    seed: int
    cell_size_m: float = 2.0
    dt_s: float = 1.0
    initial_fuel: float = FUEL_MAX
    initial_moisture: float = 1.0
    rules: CARules = field(default_factory=CARules)

    def __post_init__(self):
        if min(self.rows, self.cols, self.steps) < 1:
            raise ConfigError("rows, cols and steps must all be >= 1")
        if self.wind_speed < 0:
            raise ConfigError("wind_speed must be >= 0")
        if not (0.0 <= self.wind_direction < 360.0):
            raise ConfigError("wind_direction must lie in [0, 360)")
        if not (0.0 < self.initial_fuel <= FUEL_MAX):
            raise ConfigError(f"initial_fuel must lie in (0, {FUEL_MAX}]")
        if not (0.0 <= self.initial_moisture <= 1.0):
            raise ConfigError("initial_moisture must lie in [0, 1]")
        self.ignition.validate(self.rows, self.cols, self.steps)

    def with_overrides(self, **kw) -> "ScenarioConfig":
        return replace(self, **kw)


@dataclass
class FuelFieldSequence:
    """T x M x P fuel density frames, monotone non-increasing per cell."""
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 3:
            raise ConfigError(f"expected (T, M, P) frames, got {self.values.shape}")

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.values.shape  # type: ignore[return-value]


def build_ignition_pattern(kind: IgnitionKind | str, rows: int, cols: int,
                           seed: int) -> IgnitionPattern:
    """Deterministic ignition schedules for the five prescribed-burn styles."""
    kind = IgnitionKind(kind)
    events: list[tuple[int, int, int]] = []

    if kind is IgnitionKind.STRIP_SOUTH:
        row = int(0.85 * rows)
        events = [(0, row, c) for c in range(cols)]
    elif kind is IgnitionKind.STRIP_NORTH:
        row = int(0.15 * rows)
        events = [(0, row, c) for c in range(cols)]
    elif kind is IgnitionKind.INWARD:
        if rows < 8 or cols < 8:
            raise ConfigError("inward ring needs a grid of at least 8x8")
        r0, r1 = int(0.15 * rows), rows - 1 - int(0.15 * rows)
        c0, c1 = int(0.15 * cols), cols - 1 - int(0.15 * cols)
        ring = set()
        for c in range(c0, c1 + 1):
            ring.add((r0, c))
            ring.add((r1, c))
        for r in range(r0, r1 + 1):
            ring.add((r, c0))
            ring.add((r, c1))
        events = [(0, r, c) for r, c in sorted(ring)]
    elif kind is IgnitionKind.OUTWARD:
        if rows < 8 or cols < 8:
            raise ConfigError("outward cluster needs a grid of at least 8x8")
        rc, cc = rows // 2, cols // 2
        plus = [(rc, cc), (rc - 1, cc), (rc + 1, cc), (rc, cc - 1), (rc, cc + 1)]
        events = [(0, r, c) for r, c in sorted(plus)]
    elif kind is IgnitionKind.AERIAL:
        n = math.ceil(rows * cols / 400)
        rng = np.random.default_rng(seed)
        flat = rng.choice(rows * cols, size=n, replace=False)
        waves = (0, 2, 4, 6)
        for i, idx in enumerate(sorted(int(v) for v in flat)):
            t = waves[min(3, i * 4 // n)]
            events.append((t, idx // cols, idx % cols))
        events.sort()
    return IgnitionPattern(kind=kind, events=tuple(events))


@dataclass
class GridState:
    fuel: np.ndarray
    moisture: np.ndarray
    status: np.ndarray  # int8 codes above

    @classmethod
    def initial(cls, config: ScenarioConfig) -> "GridState":
        shape = (config.rows, config.cols)
        return cls(fuel=np.full(shape, config.initial_fuel),
                   moisture=np.full(shape, config.initial_moisture),
                   status=np.zeros(shape, dtype=np.int8))


def wind_travel_vector(wind_direction: float) -> tuple[float, float]:
    """Unit (east, north) vector of where the wind travels TO."""
    travel = (wind_direction + 180.0) % 360.0
    rad = math.radians(travel)
    return math.sin(rad), math.cos(rad)


def _spread_probs(wind_speed: float, wind_direction: float,
                  rules: CARules) -> dict[tuple[int, int], float]:
    """Ignition probability contributed by a burning neighbor at offset (dr, dc).

    The offset is the neighbor-to-cell direction; cos of its angle to the wind
    travel vector decides the wind boost (downwind only).
    """
    we, wn = wind_travel_vector(wind_direction)
    probs = {}
    for dr, dc in _NEIGHBORS:
        east, north = float(dc), float(-dr)  # row axis points south
        norm = math.hypot(east, north)
        cos_theta = (we * east + wn * north) / norm
        p = rules.base_prob * (1.0 + rules.wind_gain * wind_speed * max(0.0, cos_theta))
        probs[(dr, dc)] = min(1.0, max(0.0, p))
    return probs


def step(state: GridState, wind_speed: float, wind_direction: float,
         rng: np.random.Generator, rules: CARules = CARules()) -> GridState:
    """One synchronous CA update.

    Every rule reads the entry state, and the grid is walked cell by cell in
    row-major order; ignition draws consume the generator in exactly that
    order, which is the determinism contract.
    """
    status0 = state.status
    moisture0 = state.moisture
    rows, cols = status0.shape

    status = status0.copy()
    moisture = moisture0.copy()
    fuel = state.fuel.copy()

    if not np.any((status0 == BURNING) | (status0 == IGNITING)):
        return GridState(fuel=fuel, moisture=moisture, status=status)

    probs = _spread_probs(wind_speed, wind_direction, rules)

    for r in range(rows):
        for c in range(cols):
            s = status0[r, c]
            if s == BURNED_OUT:
                continue

            burning_offsets = []
            for dr, dc in _NEIGHBORS:
                nr, nc = r + dr, c + dc
                if 0 <= nr < rows and 0 <= nc < cols and status0[nr, nc] == BURNING:
                    # offset of this cell as seen from the burning neighbor
                    burning_offsets.append((-dr, -dc))

            if s == IGNITING:
                # moisture gate: dry at entry means the cell starts burning
                if moisture0[r, c] <= 0.0:
                    status[r, c] = BURNING
                moisture[r, c] = max(0.0, moisture0[r, c] - rules.dry_rate)
            elif s == BURNING:
                fuel[r, c] = max(0.0, fuel[r, c] - rules.burn_rate)
                if fuel[r, c] <= 0.0:
                    status[r, c] = BURNED_OUT
            elif burning_offsets:  # unignited next to fire
                moisture[r, c] = max(0.0, moisture0[r, c] - rules.dry_rate)
                p_not = 1.0
                for off in burning_offsets:
                    p_not *= 1.0 - probs[off]
                if rng.random() < 1.0 - p_not:
                    status[r, c] = IGNITING

    return GridState(fuel=fuel, moisture=moisture, status=status)


def simulate(config: ScenarioConfig) -> FuelFieldSequence:
    """Run the scenario; frame t is recorded after step t's update."""
    state = GridState.initial(config)
    rng = np.random.default_rng(config.seed)

    schedule: dict[int, list[tuple[int, int]]] = {}
    for t, r, c in config.ignition.events:
        schedule.setdefault(t, []).append((r, c))

    frames = np.empty((config.steps, config.rows, config.cols))
    for t in range(config.steps):
        for r, c in schedule.get(t, ()):
            if state.status[r, c] == UNIGNITED:
                state.status[r, c] = IGNITING
        state = step(state, config.wind_speed, config.wind_direction, rng,
                     config.rules)
        frames[t] = state.fuel
    return FuelFieldSequence(values=frames)
