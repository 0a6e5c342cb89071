"""Match retrieval baselines: predict a run by copying the nearest
historical run.

Two notions of "nearest": closest ignition pattern (mask IoU, wind free to
differ) and closest wind conditions (normalized speed/direction distance,
pattern free to differ). Both are deterministic with ties broken by lowest
library index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import RetrievalError
from .fireca import FuelFieldSequence, ScenarioConfig


@dataclass
class MatchResult:
    """Retrieval outcome: the copied sequence plus provenance for reports."""
    sequence: FuelFieldSequence
    index: int
    distance: float
    speed_term_dropped: bool = False


@dataclass
class HistoricalLibrary:
    """Training-split runs in stable insertion order."""
    entries: list[tuple[ScenarioConfig, FuelFieldSequence]] = field(
        default_factory=list)

    def add(self, config: ScenarioConfig, sequence: FuelFieldSequence) -> None:
        if self.entries:
            dims = self.entries[0][1].dims
            if sequence.dims != dims:
                raise RetrievalError(
                    f"library sequences must share dims; have {dims}, "
                    f"adding {sequence.dims}")
        self.entries.append((config, sequence))

    def __len__(self) -> int:
        return len(self.entries)

    def _require_nonempty(self) -> None:
        if not self.entries:
            raise RetrievalError("match baseline queried against an empty library")

    @property
    def speed_range(self) -> float:
        self._require_nonempty()
        speeds = [cfg.wind_speed for cfg, _ in self.entries]
        return max(speeds) - min(speeds)


def ignition_iou(a: ScenarioConfig, b: ScenarioConfig) -> float:
    """IoU of the binary masks of every cell each schedule ever lights."""
    ma = a.ignition.mask(a.rows, a.cols)
    mb = b.ignition.mask(b.rows, b.cols)
    union = (ma | mb).sum()
    if union == 0:
        return 1.0
    return float((ma & mb).sum()) / float(union)


def angular_diff(a_deg: float, b_deg: float) -> float:
    """Minimal circular difference in degrees, in [0, 180]."""
    d = abs(a_deg - b_deg) % 360.0
    return 360.0 - d if d > 180.0 else d


def match_ignition(query: ScenarioConfig,
                   library: HistoricalLibrary) -> MatchResult:
    """Nearest historical run by ignition-mask IoU; wind may vary."""
    library._require_nonempty()
    best: MatchResult | None = None
    for idx, (cfg, seq) in enumerate(library.entries):
        dist = 1.0 - ignition_iou(query, cfg)
        if best is None or dist < best.distance:
            best = MatchResult(sequence=seq, index=idx, distance=dist)
    assert best is not None
    return best


def wind_distance(query: ScenarioConfig, entry: ScenarioConfig,
                  speed_range: float) -> tuple[float, bool]:
    """Normalized wind distance and whether the speed term was dropped."""
    direction_term = (angular_diff(query.wind_direction,
                                   entry.wind_direction) / 180.0) ** 2
    if speed_range <= 0.0:
        # all historical speeds identical: the speed axis carries no signal
        return math.sqrt(direction_term), True
    speed_term = ((query.wind_speed - entry.wind_speed) / speed_range) ** 2
    return math.sqrt(speed_term + direction_term), False


def match_wind(query: ScenarioConfig,
               library: HistoricalLibrary) -> MatchResult:
    """Nearest historical run by wind conditions; pattern may vary."""
    library._require_nonempty()
    speed_range = library.speed_range
    best: MatchResult | None = None
    for idx, (cfg, seq) in enumerate(library.entries):
        dist, dropped = wind_distance(query, cfg, speed_range)
        if best is None or dist < best.distance:
            best = MatchResult(sequence=seq, index=idx, distance=dist,
                               speed_term_dropped=dropped)
    assert best is not None
    return best
