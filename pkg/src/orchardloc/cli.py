"""Command-line entry point: map generation, log simulation, evaluation
suites, drift analysis, and the interactive session server.

Artifacts land in a fixed layout under the output directory (maps/,
logs/, results/, manifests/) so downstream tooling can discover them. A
manifest recording command, inputs and seed is written before any
results, making every run reproducible from the manifest alone.
"""

from __future__ import annotations

import datetime
import json
import os
import sys
from pathlib import Path

import click

from . import __version__
from .config import Params, fingerprint, load_params
from .evaluate import (MODE_ORDER, PROTOCOLS, gnss_offset_series, run_suite,
                       summarize_tables, write_results, write_summaries)
from .orchard import generate_map, load_map, save_map
from .sensing import SensorConfig
from .simulate import Campaign, build_campaign, load_campaign

DEFAULT_MAP_NAME = "orchard.json"


def _out_dir(out: str | None) -> Path:
    if out is None:
        out = os.environ.get("SEETREE_OUT", "out")
    return Path(out)


def _ensure_layout(out: Path) -> dict:
    dirs = {name: out / name for name in ("maps", "logs", "results", "manifests")}
    for d in dirs.values():
        d.mkdir(parents=True, exist_ok=True)
    return dirs


def _write_manifest(out: Path, command: str, **fields) -> Path:
    dirs = _ensure_layout(out)
    stamp = datetime.datetime.now(datetime.timezone.utc)
    doc = {"command": command, "out": str(out),
           "created": stamp.isoformat(timespec="seconds"),
           "version": __version__, "argv": sys.argv[1:]}
    doc.update(fields)
    path = dirs["manifests"] / f"{command}-{stamp.strftime('%Y%m%dT%H%M%SZ')}.json"
    with open(path, "w") as f:
        json.dump(doc, f, indent=2)
        f.write("\n")
    return path


def _load_params_opt(params_path: str | None) -> Params:
    return load_params(params_path) if params_path else Params()


def _sensor_config(sensor_path: str | None) -> SensorConfig:
    if not sensor_path:
        return SensorConfig()
    with open(sensor_path) as f:
        doc = json.load(f)
    from dataclasses import fields as dc_fields, replace
    allowed = {f.name for f in dc_fields(SensorConfig)}
    unknown = set(doc) - allowed
    if unknown:
        raise click.ClickException(f"unknown sensor fields: {sorted(unknown)}")
    if "gnss_bias_init" in doc and doc["gnss_bias_init"] is not None:
        doc["gnss_bias_init"] = tuple(doc["gnss_bias_init"])
    return replace(SensorConfig(), **doc)


@click.group()
@click.version_option(__version__)
def main():
    """Orchard Monte Carlo localization: simulate, evaluate, serve."""


@main.command("genmap")
@click.option("--out", default=None, help="Output directory (or $SEETREE_OUT).")
@click.option("--seed", default=0, type=int, show_default=True)
@click.option("--rows", default=20, type=int, show_default=True)
@click.option("--trees", default=50, type=int, show_default=True)
@click.option("--name", default=DEFAULT_MAP_NAME, show_default=True)
def cmd_genmap(out, seed, rows, trees, name):
    """Write a synthetic orchard map."""
    out = _out_dir(out)
    dirs = _ensure_layout(out)
    omap = generate_map(seed=seed, rows=rows, trees_per_row=trees)
    path = dirs["maps"] / name
    _write_manifest(out, "genmap", seed=seed, rows=rows, trees=trees,
                    map=str(path))
    save_map(omap, path)
    click.echo(f"wrote {path} ({len(omap)} landmarks, {len(omap.rows)} rows)")


@main.command("simulate")
@click.option("--map", "map_path", default=None, help="Map file (default: "
              "maps/orchard.json under the output directory).")
@click.option("--out", default=None)
@click.option("--seed", default=0, type=int, show_default=True)
@click.option("--only", type=click.Choice(["straight", "turns"]), default=None,
              help="Emit only straight-row or only turn logs.")
@click.option("--sensor", default=None,
              help="JSON file overriding sensor-model fields.")
def cmd_simulate(map_path, out, seed, only, sensor):
    """Simulate the log campaign: 12 straight-row runs and 43 turns."""
    out = _out_dir(out)
    dirs = _ensure_layout(out)
    map_path = Path(map_path) if map_path else dirs["maps"] / DEFAULT_MAP_NAME
    if not map_path.exists():
        raise click.ClickException(f"map not found: {map_path} (run genmap first)")
    omap = load_map(map_path)
    cfg = _sensor_config(sensor)
    _write_manifest(out, "simulate", map=str(map_path), seed=seed, only=only)
    campaign = build_campaign(omap, cfg, seed, map_label=str(map_path))
    if only == "straight":
        campaign = Campaign(campaign.straight, [])
    elif only == "turns":
        campaign = Campaign([], campaign.turns)
    written = campaign.write(dirs["logs"])
    click.echo(f"wrote {len(written)} logs to {dirs['logs']}")


@main.command("evaluate")
@click.option("--map", "map_path", default=None)
@click.option("--params", "params_path", default=None,
              help="Parameter file (JSON).")
@click.option("--out", default=None)
@click.option("--seed", default=0, type=int, show_default=True)
@click.option("--protocol", type=click.Choice(list(PROTOCOLS)), required=True)
@click.option("--mode", type=click.Choice(list(MODE_ORDER) + ["all"]),
              default="all", show_default=True)
@click.option("--starts", default=40, type=int, show_default=True)
@click.option("--trials", default=20, type=int, show_default=True)
@click.option("--jobs", default=1, type=int, show_default=True)
def cmd_evaluate(map_path, params_path, out, seed, protocol, mode, starts,
                 trials, jobs):
    """Run an evaluation suite over the simulated campaign."""
    out = _out_dir(out)
    dirs = _ensure_layout(out)
    map_path = Path(map_path) if map_path else dirs["maps"] / DEFAULT_MAP_NAME
    if not map_path.exists():
        raise click.ClickException(f"map not found: {map_path}")
    omap = load_map(map_path)
    try:
        campaign = load_campaign(dirs["logs"])
    except FileNotFoundError as e:
        raise click.ClickException(str(e))
    params = _load_params_opt(params_path)
    cfg = SensorConfig()
    modes = list(MODE_ORDER) if mode == "all" else [mode]
    _write_manifest(out, "evaluate", map=str(map_path),
                    params=params_path, seed=seed, protocol=protocol,
                    mode=mode, starts=starts, trials=trials)
    summaries = []
    for md in modes:
        fp = fingerprint(params, md, {"protocol": protocol, "seed": seed})
        summary, results = run_suite(campaign, omap, cfg, params, md, protocol,
                                     starts=starts, trials_per_start=trials,
                                     seed=seed, jobs=jobs)
        write_results(dirs["results"] / f"trials-{protocol}-{md}.jsonl",
                      results, fp)
        summaries.append((summary, fp))
        click.echo(f"{md}: accuracy {summary.accuracy:.3f} over "
                   f"{summary.trial_count} trials")
    write_summaries(dirs["results"] / f"summary-{protocol}.jsonl",
                    [s for s, _ in summaries], summaries[0][1])
    _, table = summarize_tables([s for s, _ in summaries])
    click.echo(table)


@main.command("drift")
@click.option("--out", default=None)
@click.option("--mounting-offset", nargs=2, type=float, default=(0.0, 0.0),
              show_default=True, help="Receiver offset in the vehicle frame.")
def cmd_drift(out, mounting_offset):
    """Per-run offset statistics between the biased and reference fixes."""
    out = _out_dir(out)
    dirs = _ensure_layout(out)
    try:
        campaign = load_campaign(dirs["logs"])
    except FileNotFoundError as e:
        raise click.ClickException(str(e))
    if not campaign.straight:
        raise click.ClickException("no straight-row logs found")
    _write_manifest(out, "drift", mounting_offset=list(mounting_offset))
    path = dirs["results"] / "drift.jsonl"
    with open(path, "w") as f:
        for name, log in campaign.straight:
            stats = gnss_offset_series(log, mounting_offset)
            rec = {"log": name}
            rec.update(stats.to_dict())
            f.write(json.dumps(rec, separators=(",", ":")) + "\n")
            q = stats.quartiles()
            click.echo(f"{name}: euclidean median {q['euclidean']['median']:.3f} m, "
                       f"rate median {q['rate']['median']:.4f} m/s")
    click.echo(f"wrote {path}")


@main.command("serve")
@click.option("--map", "map_path", default=None)
@click.option("--params", "params_path", default=None)
@click.option("--out", default=None)
@click.option("--port", default=8713, type=int, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
def cmd_serve(map_path, params_path, out, port, host):
    """Serve live replay sessions for the tuning client."""
    out = _out_dir(out)
    dirs = _ensure_layout(out)
    map_path = Path(map_path) if map_path else dirs["maps"] / DEFAULT_MAP_NAME
    if not map_path.exists():
        raise click.ClickException(f"map not found: {map_path}")
    if not any(dirs["logs"].glob("*.jsonl")):
        raise click.ClickException(f"no logs in {dirs['logs']} (run simulate)")
    import uvicorn

    from .server import create_app
    params = _load_params_opt(params_path)
    ui_dir = Path("frontend")
    ui_dir = ui_dir if (ui_dir / "index.html").exists() else None
    app = create_app(map_path, dirs["logs"], params, ui_dir=ui_dir)
    _write_manifest(out, "serve", map=str(map_path), params=params_path,
                    port=port)
    uvicorn.run(app, host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
