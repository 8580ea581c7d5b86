"""Command-line interface: serve the service, manage worksheets, and
run the headless section simulator."""

from __future__ import annotations

import json
import sys
from importlib import resources
from pathlib import Path

import click

from . import fixtures as fixtures_mod
from . import sim as sim_mod
from .cms import WorksheetNotFound, WorksheetStore, export_worksheet, import_worksheet
from .report import write_report

BUILTIN_SCENARIOS = {
    "default": "scenario_default.yaml",
    "question-volume": "scenario_question_volume.yaml",
}


@click.group()
def main():
    """Small-group tutoring service and tooling."""


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True, path_type=Path))
def serve(config_path: Path):
    """Run the HTTP/WebSocket service described by a config file."""
    import uvicorn

    from .config import load_config
    from .web import build_service

    cfg = load_config(config_path)
    app, core, _ = build_service(cfg)
    click.echo(f"serving on {cfg.host}:{cfg.port} with {len(core.rooms)} recovered room(s)")
    uvicorn.run(app, host=cfg.host, port=cfg.port, log_level="info")


@main.group()
def worksheet():
    """Import, export, and list stored worksheets."""


@worksheet.command("import")
@click.argument("source", type=click.Path(exists=True, path_type=Path))
@click.option("--content-dir", default="./content", type=click.Path(path_type=Path))
def worksheet_import(source: Path, content_dir: Path):
    result = import_worksheet(source.read_text(encoding="utf-8"))
    if isinstance(result, list):
        for err in result:
            click.echo(f"error: {err}", err=True)
        sys.exit(1)
    path = WorksheetStore(content_dir).store(result)
    click.echo(f"stored {result.worksheet_id!r} ({len(result.problems)} problems) at {path}")


@worksheet.command("export")
@click.argument("worksheet_id")
@click.option("--content-dir", default="./content", type=click.Path(path_type=Path))
def worksheet_export(worksheet_id: str, content_dir: Path):
    try:
        w = WorksheetStore(content_dir).load(worksheet_id)
    except WorksheetNotFound:
        click.echo(f"error: no worksheet {worksheet_id!r}", err=True)
        sys.exit(1)
    click.echo(export_worksheet(w), nl=False)


@worksheet.command("list")
@click.option("--content-dir", default="./content", type=click.Path(path_type=Path))
def worksheet_list(content_dir: Path):
    for wid in WorksheetStore(content_dir).list_ids():
        click.echo(wid)


def _resolve_scenario(name_or_path: str) -> sim_mod.ScenarioConfig:
    if name_or_path in BUILTIN_SCENARIOS:
        ref = resources.files("grouptutor.data").joinpath(BUILTIN_SCENARIOS[name_or_path])
        with resources.as_file(ref) as p:
            return sim_mod.ScenarioConfig.from_file(p)
    return sim_mod.ScenarioConfig.from_file(Path(name_or_path))


@click.group()
def sim():
    """Deterministic headless section simulator."""


@sim.command("run")
@click.option("--scenario", required=True, help="scenario file, or builtin: default, question-volume")
@click.option("--seed", default=1, show_default=True, type=int)
@click.option("--virtual-time/--real-time", "virtual_time", default=True, show_default=True,
              help="virtual time makes reports byte-reproducible")
@click.option("--out-dir", default="./sim-out", show_default=True, type=click.Path(path_type=Path))
def sim_run(scenario: str, seed: int, virtual_time: bool, out_dir: Path):
    """Run a scenario; exit nonzero if any check fails."""
    cfg = _resolve_scenario(scenario)
    report = sim_mod.run_scenario(cfg, seed, virtual_time=virtual_time)
    written = write_report(report, out_dir)
    click.echo(
        f"scenario {report['scenario']!r} seed {seed}: "
        f"{report['groups']} groups, mean questions/group "
        f"{report['questions']['mean']:.2f}, "
        f"edit RTT p50 {report['latency_ms']['p50']:.0f} ms"
    )
    click.echo(f"convergence: {'ok' if report['convergence']['ok'] else 'FAILED'}")
    for path in written:
        click.echo(f"wrote {path}")
    if not report["ok"]:
        sys.exit(1)


@sim.command("replay")
@click.option("--fixture", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--out-dir", default=None, type=click.Path(path_type=Path))
def sim_replay(fixture: Path, out_dir: Path | None):
    """Replay a fixture through real dispatch; exit nonzero on mismatch."""
    report = fixtures_mod.replay_fixture(fixture)
    if out_dir:
        for path in write_report(report, out_dir):
            click.echo(f"wrote {path}")
    if report["ok"]:
        click.echo(f"replay ok: {report['commands']} commands, metrics match expectations")
    else:
        click.echo("replay MISMATCH:", err=True)
        click.echo(json.dumps(report["mismatches"], indent=2, sort_keys=True), err=True)
        if report["error_count"]:
            click.echo(f"{report['error_count']} error frame(s), first shown:", err=True)
            click.echo(json.dumps(report["error_frames"][:3], indent=2), err=True)
        sys.exit(1)


@sim.command("make-fixture")
@click.option("--out", required=True, type=click.Path(path_type=Path))
@click.option("--seed", default=20240501, show_default=True, type=int)
def sim_make_fixture(out: Path, seed: int):
    """Write the deployment-shaped fixture (exact label/review tallies)."""
    fixture = fixtures_mod.make_deployment_fixture(seed=seed)
    fixtures_mod.write_fixture(fixture, out)
    click.echo(f"wrote {out} ({len(fixture['commands'])} commands)")


main.add_command(sim)


if __name__ == "__main__":
    main()
