"""HTTP serve mode: a read-only what-if API over one trained emulator.

The app is built once around a dataset manifest and a model; a single
InferenceEngine snapshot serves every /predict call. /simulate runs the CA
simulator fresh per request, so it is deterministic in the request seed.
"""

from __future__ import annotations

import time
from pathlib import Path

import numpy as np
from fastapi import FastAPI
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import fireca, losses
from .dataset import DatasetManifest, assemble_channels
from .emulator import EmulatorModel, InferenceEngine
from .fireca import IgnitionKind, ScenarioConfig, build_ignition_pattern

EPS_B = 0.1


class ScenarioRequest(BaseModel):
    wind_speed: float = Field(ge=0.0)
    wind_direction: float = Field(ge=0.0, lt=360.0)
    pattern: str
    seed: int = 0


def _scenario_echo(config: ScenarioConfig, pattern: str) -> dict:
    return {"wind_speed": config.wind_speed,
            "wind_direction": config.wind_direction,
            "pattern": pattern, "seed": config.seed,
            "rows": config.rows, "cols": config.cols, "steps": config.steps}


def _sequence_payload(config: ScenarioConfig, pattern: str,
                      frames: np.ndarray, elapsed_ms: float) -> dict:
    return {"frames": frames.tolist(),
            "ba_percent": losses.ba_curve(frames, EPS_B).tolist(),
            "ros": losses.ros_curve(frames, EPS_B).tolist(),
            "inference_ms": elapsed_ms,
            "scenario": _scenario_echo(config, pattern)}


def create_app(manifest: DatasetManifest, base_dir: str | Path,
               model: EmulatorModel) -> FastAPI:
    app = FastAPI(title="emberlab")
    base_dir = Path(base_dir)
    engine = InferenceEngine(model)
    kinds = [kind.value for kind in IgnitionKind]

    def build_config(req: ScenarioRequest) -> ScenarioConfig:
        ignition = build_ignition_pattern(req.pattern, manifest.rows,
                                          manifest.cols, req.seed)
        return ScenarioConfig(rows=manifest.rows, cols=manifest.cols,
                              steps=manifest.steps, wind_speed=req.wind_speed,
                              wind_direction=req.wind_direction,
                              ignition=ignition, seed=req.seed)

    @app.get("/patterns")
    def patterns():
        return {"patterns": kinds, "rows": manifest.rows,
                "cols": manifest.cols, "steps": manifest.steps}

    @app.get("/runs")
    def runs():
        return {"runs": [{"run_id": r.run_id, "pattern": r.kind,
                          "wind_speed": r.wind_speed,
                          "wind_direction": r.wind_direction,
                          "role": r.role} for r in manifest.runs],
                "train": manifest.train_ids, "test": manifest.test_ids}

    @app.post("/predict")
    def predict(req: ScenarioRequest):
        if req.pattern not in kinds:
            return JSONResponse(status_code=404,
                                content={"error": "unknown_pattern"})
        config = build_config(req)
        x = assemble_channels(config, manifest, base_dir)
        t0 = time.perf_counter()
        frames = np.asarray(engine.predict(x), dtype=np.float64)
        elapsed_ms = 1000.0 * (time.perf_counter() - t0)
        return _sequence_payload(config, req.pattern, frames, elapsed_ms)

    @app.post("/simulate")
    def simulate(req: ScenarioRequest):
        if req.pattern not in kinds:
            return JSONResponse(status_code=404,
                                content={"error": "unknown_pattern"})
        config = build_config(req)
        t0 = time.perf_counter()
        frames = fireca.simulate(config).values
        elapsed_ms = 1000.0 * (time.perf_counter() - t0)
        return _sequence_payload(config, req.pattern, frames, elapsed_ms)

    return app
