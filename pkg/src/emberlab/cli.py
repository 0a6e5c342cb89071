"""Command-line entry point: generate / train / evaluate / ablate / serve /
baseline.

Every verb reads an optional plain key=value config file; command-line
options override file values, which override desk defaults. Metric outputs
are written twice: a human-readable .txt and a machine-readable .kv
(key=value per line, sorted, no wall-clock fields).
"""

from __future__ import annotations

import logging
from pathlib import Path

import click
import numpy as np

from . import dataset as ds
from . import metrics as em
from .baselines import HistoricalLibrary, match_ignition, match_wind
from .dataset import DatasetManifest, SweepSpec, generate_dataset
from .emulator import MODE_CL, MODE_PGCL, MODE_PGCL_PLUS
from .errors import ConfigError, EmberError
from .fireca import FuelFieldSequence
from .training import (TrainConfig, ablate, evaluate, load_checkpoint,
                       save_checkpoint, train)

log = logging.getLogger(__name__)

MODE_ALIASES = {"cl": MODE_CL, "pgcl": MODE_PGCL, "pgcl+": MODE_PGCL_PLUS}


def load_config_file(path: str | None) -> dict[str, str]:
    if path is None:
        return {}
    cfg: dict[str, str] = {}
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{path}: malformed line {line!r}")
        cfg[key.strip()] = value.strip()
    return cfg


def resolve(cfg: dict[str, str], key: str, override, default):
    """CLI option > config file > default."""
    if override is not None:
        return override
    if key in cfg:
        return cfg[key]
    return default


def parse_grid(text: str) -> tuple[int, int]:
    try:
        rows, cols = text.lower().split("x")
        return int(rows), int(cols)
    except ValueError as exc:
        raise ConfigError(f"grid must look like 32x32, got {text!r}") from exc


def write_kv(path: Path, kv: dict[str, float]) -> None:
    lines = [f"{key}={kv[key]!r}" for key in sorted(kv)]
    path.write_text("\n".join(lines) + "\n")


def common_options(fn):
    for opt in (
        click.option("--config", "config_path", type=click.Path(exists=True),
                     default=None, help="key=value config file"),
        click.option("--seed", type=int, default=None),
        click.option("--out", type=click.Path(), default=None),
        click.option("--mode", type=click.Choice(list(MODE_ALIASES)),
                     default=None),
        click.option("--grid", default=None, help="MxP, e.g. 32x32"),
        click.option("--steps", type=int, default=None),
        click.option("--epochs", type=int, default=None),
        click.option("--port", type=int, default=None),
        click.option("--data", "data_dir", type=click.Path(), default=None,
                     help="dataset directory (generate output)"),
        click.option("--checkpoint", type=click.Path(), default=None),
    ):
        fn = opt(fn)
    return fn


def gather(cfg_path, seed, out, mode, grid, steps, epochs, port, data_dir,
           checkpoint) -> dict:
    cfg = load_config_file(cfg_path)
    rows, cols = parse_grid(str(resolve(cfg, "grid", grid,
                                        f"{ds.DESK_ROWS}x{ds.DESK_COLS}")))
    mode_key = str(resolve(cfg, "mode", mode, "cl"))
    if mode_key not in MODE_ALIASES:
        raise ConfigError(f"mode must be one of {sorted(MODE_ALIASES)}")
    patterns = str(resolve(cfg, "patterns", None,
                           ",".join(ds.DESK_PATTERNS))).split(",")
    speeds = [float(s) for s in
              str(resolve(cfg, "speeds", None,
                          ",".join(map(str, ds.DESK_SPEEDS)))).split(",")]
    directions = [float(s) for s in
                  str(resolve(cfg, "directions", None,
                              ",".join(map(str, ds.DESK_DIRECTIONS)))).split(",")]
    return {
        "rows": rows, "cols": cols,
        "steps": int(resolve(cfg, "steps", steps, ds.DESK_STEPS)),
        "seed": int(resolve(cfg, "seed", seed, 0)),
        "epochs": int(resolve(cfg, "epochs", epochs, 40)),
        "mode": MODE_ALIASES[mode_key],
        "hidden_channels": int(resolve(cfg, "hidden_channels", None, 4)),
        "lr": float(resolve(cfg, "lr", None, 0.001)),
        "port": int(resolve(cfg, "port", port, 8000)),
        "out": resolve(cfg, "out", out, None),
        "data": resolve(cfg, "data", data_dir, None),
        "checkpoint": resolve(cfg, "checkpoint", checkpoint, None),
        "patterns": tuple(p.strip() for p in patterns if p.strip()),
        "speeds": tuple(speeds), "directions": tuple(directions),
    }


def require(settings: dict, key: str) -> str:
    if not settings[key]:
        raise ConfigError(f"--{key} (or config key '{key}') is required")
    return settings[key]


def load_data(settings: dict) -> tuple[DatasetManifest, Path]:
    base = Path(require(settings, "data"))
    return DatasetManifest.load(base / "manifest.txt"), base


@click.group()
@click.option("-v", "--verbose", is_flag=True)
def main(verbose):
    """Desk-scale prescribed-fire emulation lab."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s")


def run_verb(fn):
    """Translate domain errors into clean CLI failures."""
    def wrapper(**kw):
        try:
            fn(**kw)
        except EmberError as exc:
            raise click.ClickException(str(exc))
    wrapper.__name__ = fn.__name__
    return wrapper


@main.command()
@common_options
@run_verb
def generate(config_path, seed, out, mode, grid, steps, epochs, port,
             data_dir, checkpoint):
    """Run the CA sweep and persist the dataset."""
    s = gather(config_path, seed, out, mode, grid, steps, epochs, port,
               data_dir, checkpoint)
    target = require(s, "out")
    spec = SweepSpec(rows=s["rows"], cols=s["cols"], steps=s["steps"],
                     patterns=s["patterns"], speeds=s["speeds"],
                     directions=s["directions"], seed=s["seed"])
    manifest = generate_dataset(spec, target)
    sweep = sum(1 for r in manifest.runs if r.role == "sweep")
    click.echo(f"generated {sweep} sweep runs + "
               f"{len(manifest.runs) - sweep} source runs in {target}")


@main.command(name="train")
@common_options
@run_verb
def train_cmd(config_path, seed, out, mode, grid, steps, epochs, port,
              data_dir, checkpoint):
    """Train one emulator and write a checkpoint bundle."""
    s = gather(config_path, seed, out, mode, grid, steps, epochs, port,
               data_dir, checkpoint)
    manifest, base = load_data(s)
    target = Path(require(s, "out"))
    config = TrainConfig(mode=s["mode"], epochs=s["epochs"], lr=s["lr"],
                         seed=s["seed"], hidden_channels=s["hidden_channels"])
    result = train(manifest, base, config)
    save_checkpoint(target, result, {"data": str(base)})
    write_kv(target / "train_log.kv",
             {f"epoch.{i:04d}.loss": v
              for i, v in enumerate(result.epoch_losses)})
    status = "aborted (rolled back)" if result.aborted else "done"
    final = result.epoch_losses[-1] if result.epoch_losses else float("nan")
    click.echo(f"training {status}: {len(result.epoch_losses)} epochs, "
               f"final loss {final:.6f}, checkpoint in {target}")


def emit_evaluation(outcome, target: Path, stem: str) -> None:
    target.mkdir(parents=True, exist_ok=True)
    write_kv(target / f"{stem}.kv", outcome.to_kv())
    lines = ["aggregate metrics (test split)", "-" * 32]
    lines += [f"  {k:<18} {v:.6f}" for k, v in sorted(outcome.aggregate.items())]
    if outcome.baselines:
        lines += ["", "match baselines", "-" * 32]
        for row in outcome.baselines:
            lines.append(f"  {row.name:<16} mse={row.mse:.6f} "
                         f"burned={row.burned_mse:.6f} "
                         f"unburned={row.unburned_mse:.6f} "
                         f"fire={row.fire_metrics_mse:.6f}")
    lines += ["", "subgroups (mean mse)", "-" * 32]
    for group in sorted(outcome.subgroups):
        lines.append(f"  {group:<22} {outcome.subgroups[group]['mse']:.6f}")
    text = "\n".join(lines) + "\n"
    (target / f"{stem}.txt").write_text(text)
    click.echo(text)


@main.command(name="evaluate")
@common_options
@run_verb
def evaluate_cmd(config_path, seed, out, mode, grid, steps, epochs, port,
                 data_dir, checkpoint):
    """Evaluate a checkpoint on the test split; includes baseline rows."""
    s = gather(config_path, seed, out, mode, grid, steps, epochs, port,
               data_dir, checkpoint)
    manifest, base = load_data(s)
    model, _ = load_checkpoint(require(s, "checkpoint"))
    outcome = evaluate(model, manifest, base)
    emit_evaluation(outcome, Path(require(s, "out")), "metrics")


@main.command(name="ablate")
@common_options
@run_verb
def ablate_cmd(config_path, seed, out, mode, grid, steps, epochs, port,
               data_dir, checkpoint):
    """One-at-a-time loss-term ablation table."""
    s = gather(config_path, seed, out, mode, grid, steps, epochs, port,
               data_dir, checkpoint)
    manifest, base = load_data(s)
    target = Path(require(s, "out"))
    target.mkdir(parents=True, exist_ok=True)
    table = ablate(manifest, base, epochs=s["epochs"], seed=s["seed"],
                   hidden_channels=s["hidden_channels"])
    kv = {}
    lines = [f"{'row':<6} {'terms':<12} {'mse':>10} {'metric_ft':>10}",
             "-" * 42]
    for row in table:
        lines.append(f"{row.label:<6} {','.join(row.terms) or '-':<12} "
                     f"{row.mse:>10.6f} {row.metric_ft:>10.4f}")
        kv[f"ablation.{row.label}.mse"] = row.mse
        kv[f"ablation.{row.label}.metric_ft"] = row.metric_ft
        kv[f"ablation.{row.label}.final_loss"] = row.final_loss
    text = "\n".join(lines) + "\n"
    (target / "ablation.txt").write_text(text)
    write_kv(target / "ablation.kv", kv)
    click.echo(text)


@main.command(name="baseline")
@common_options
@run_verb
def baseline_cmd(config_path, seed, out, mode, grid, steps, epochs, port,
                 data_dir, checkpoint):
    """Match-ignition / match-wind retrieval MSEs on the test split."""
    s = gather(config_path, seed, out, mode, grid, steps, epochs, port,
               data_dir, checkpoint)
    manifest, base = load_data(s)
    target = Path(require(s, "out"))
    target.mkdir(parents=True, exist_ok=True)

    library = HistoricalLibrary()
    for run_id in manifest.train_ids:
        run = manifest.record(run_id)
        library.add(manifest.config_for(run),
                    FuelFieldSequence(manifest.sequence_for(run, base)))
    kv: dict[str, float] = {}
    lines = []
    for name, matcher in (("match_ignition", match_ignition),
                          ("match_wind", match_wind)):
        errors = []
        for run_id in manifest.test_ids:
            run = manifest.record(run_id)
            y = manifest.sequence_for(run, base)
            retrieved = matcher(manifest.config_for(run), library)
            errors.append(em.mse_suite(y, retrieved.sequence.values).mse)
        kv[f"baseline.{name}.mse"] = float(np.mean(errors))
        lines.append(f"{name:<16} mse={kv[f'baseline.{name}.mse']:.6f} "
                     f"over {len(errors)} test runs")
    text = "\n".join(lines) + "\n"
    (target / "baseline.txt").write_text(text)
    write_kv(target / "baseline.kv", kv)
    click.echo(text)


@main.command(name="serve")
@common_options
@run_verb
def serve_cmd(config_path, seed, out, mode, grid, steps, epochs, port,
              data_dir, checkpoint):
    """Serve the what-if HTTP API on loopback."""
    import uvicorn

    from .service import create_app
    s = gather(config_path, seed, out, mode, grid, steps, epochs, port,
               data_dir, checkpoint)
    manifest, base = load_data(s)
    model, _ = load_checkpoint(require(s, "checkpoint"))
    app = create_app(manifest, base, model)
    click.echo(f"serving on http://127.0.0.1:{s['port']}")
    uvicorn.run(app, host="127.0.0.1", port=s["port"], log_level="warning")


if __name__ == "__main__":
    main()
