"""softhand-wrist command line.

Exit codes: 0 success, 2 usage or configuration error, 3 partial task
success, 4 aborted task.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from . import _svg
from .config import ConfigError, load_config
from .hand import PalmWorkspace, write_workspace_svg
from .ik import write_events_jsonl, write_trajectory_csv
from .servo import ScriptError, SimBus, SimServo, run_script
from .tasks import FORMATS, TaskError, TaskReport, compare_conditions, export_report, run_task

EXIT_OK, EXIT_USAGE, EXIT_PARTIAL, EXIT_ABORT = 0, 2, 3, 4
STATUS_EXIT = {"success": EXIT_OK, "partial": EXIT_PARTIAL, "aborted": EXIT_ABORT}
TASK_KINDS = {"rotate": "rotation", "stack": "stacking"}


def _f6(v) -> str:
    if v is None:
        return "n/a"
    s = f"{v:.6f}"
    return "0.000000" if s == "-0.000000" else s


def _fail(msg: str, code: int = EXIT_USAGE):
    click.echo(f"error: {msg}", err=True)
    sys.exit(code)


def _load(config_path, seed):
    try:
        return load_config(config_path, seed)
    except ConfigError as exc:
        _fail(str(exc))


def _outdir(out) -> Path:
    p = Path(out)
    p.mkdir(parents=True, exist_ok=True)
    return p


config_option = click.option(
    "--config", "config_path", type=click.Path(dir_okay=False), default=None,
    help="Top-level JSON config (defaults to the shipped configuration).",
)
seed_option = click.option("--seed", type=int, default=None, help="Random seed for IK restarts (overrides the config).")


def out_option(default: str):
    return click.option("--out", type=click.Path(file_okay=False), default=default, show_default=True,
                        help="Output directory (created if missing).")


def format_option(default: str, choices=FORMATS):
    return click.option("--format", "fmt", type=click.Choice(choices), default=default, show_default=True,
                        help="Output file format.")


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.version_option(package_name="artifact")
def main():
    """Wrist kinematics, task simulation and servo-bus tools."""


@main.command()
@click.option("--step-deg", type=click.FloatRange(0, 10, min_open=True), default=5.0, show_default=True,
              help="Grid step for both wrist joints, in (0, 10] degrees.")
@out_option("workspace_out")
@format_option("csv")
def workspace(step_deg, out, fmt):
    """Sample the palm-centre workspace over the wrist range of motion.

    Always writes workspace.csv; --format svg adds xy/xz projections and
    --format json adds the extremes as workspace.json.
    """
    ws = PalmWorkspace(step_deg=step_deg).fit()
    d = _outdir(out)
    ws.to_csv(d / "workspace.csv")
    ext = ws.extremes()
    if fmt == "svg":
        write_workspace_svg(d / "workspace.svg", ws.points_)
    elif fmt == "json":
        payload = {k: round(v, 6) + 0.0 for k, v in ext.items()}
        payload["step_deg"] = step_deg
        payload["points"] = len(ws.points_)
        (d / "workspace.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    click.echo(f"points: {len(ws.points_)}")
    click.echo(f"max reach: {_f6(ext['max_reach_mm'])} mm")
    click.echo(f"z extent: {_f6(ext['z_min_mm'])} .. {_f6(ext['z_max_mm'])} mm")


def _write_task_outputs(report: TaskReport, d: Path, fmt: str) -> None:
    export_report(report, d / f"report.{fmt}", fmt)
    write_trajectory_csv(d / "trajectory.csv", report.path)
    with open(d / "events.jsonl", "w", encoding="utf-8") as fh:
        for ev, row in zip(report.events, report.event_rows):
            fh.write(json.dumps(dict(ev.to_dict(), row=row), sort_keys=True) + "\n")


@main.command()
@click.argument("kind", type=click.Choice(sorted(TASK_KINDS)))
@click.option("--wrist", type=click.Choice(["on", "off"]), required=True, help="Actuate the wrist or lock it at neutral.")
@config_option
@out_option("task_out")
@format_option("json")
@seed_option
def task(kind, wrist, config_path, out, fmt, seed):
    """Run the rotate or stack scenario under one wrist condition.

    Writes report.<format>, trajectory.csv and events.jsonl. Exit 3 when only
    some sub-goals succeed, 4 when the run aborts.
    """
    cfg = _load(config_path, seed)
    try:
        report = run_task(TASK_KINDS[kind], wrist == "on", cfg)
    except (TaskError, ValueError) as exc:
        _fail(str(exc))
    _write_task_outputs(report, _outdir(out), fmt)
    click.echo(f"task: {report.kind}  wrist: {wrist}  status: {report.status}")
    click.echo(f"config changes: {report.config_change_count}")
    click.echo(f"time proxy: {_f6(report.time_proxy_s)} s")
    if report.cubes:
        c = report.counts()
        click.echo(f"reoriented: {c['reoriented']}/{c['total']}  stacked: {c['stacked']}/{c['total']}")
    else:
        click.echo(f"rotation achieved: {_f6(report.rotation_achieved_deg)} deg")
    sys.exit(STATUS_EXIT[report.status])


def _read_report(path) -> TaskReport:
    try:
        with open(path, encoding="utf-8") as fh:
            return TaskReport.from_dict(json.load(fh))
    except (OSError, ValueError) as exc:
        _fail(f"{path}: {exc}")


def _comparison_svg(cmp) -> str:
    diff = np.degrees(cmp.travel_max_diff)
    pts = np.column_stack([np.arange(1, len(diff) + 1), diff])
    return _svg.projections([("joint vs max-travel diff off-on (deg)", pts)], title=f"{cmp.kind} comparison")


@main.command()
@click.argument("report_a", required=False, type=click.Path(exists=True, dir_okay=False))
@click.argument("report_b", required=False, type=click.Path(exists=True, dir_okay=False))
@click.option("--task", "kind", type=click.Choice(sorted(TASK_KINDS)), default=None,
              help="Run both wrist conditions of this task instead of reading two reports.")
@config_option
@out_option("compare_out")
@format_option("json")
@seed_option
def compare(report_a, report_b, kind, config_path, out, fmt, seed):
    """Compare wrist-on against wrist-off.

    Give two JSON task reports, or --task to run both conditions. A wrist-on
    and a wrist-off report are matched by their flag; otherwise REPORT_A is
    taken as the wrist-on side. Differences are off minus on; ratios are on
    over off.
    """
    if kind is not None:
        if report_a or report_b:
            _fail("give either two reports or --task, not both")
        cfg = _load(config_path, seed)
        try:
            on = run_task(TASK_KINDS[kind], True, cfg)
            off = run_task(TASK_KINDS[kind], False, cfg)
        except (TaskError, ValueError) as exc:
            _fail(str(exc))
    else:
        if not (report_a and report_b):
            _fail("compare needs two report files or --task")
        on, off = _read_report(report_a), _read_report(report_b)
        if not on.wrist_enabled and off.wrist_enabled:
            on, off = off, on
    try:
        cmp = compare_conditions(on, off)
    except ValueError as exc:
        _fail(f"incompatible reports: {exc}")
    d = _outdir(out)
    target = d / f"comparison.{fmt}"
    if fmt == "json":
        target.write_text(json.dumps(cmp.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    elif fmt == "csv":
        cum = np.degrees(cmp.travel_cumulative_diff)
        lines = ["joint,travel_max_diff_deg,travel_cumulative_diff_deg"]
        lines += [f"{i + 1},{_f6(a)},{_f6(b)}" for i, (a, b) in enumerate(zip(np.degrees(cmp.travel_max_diff), cum))]
        target.write_text("\n".join(lines) + "\n", encoding="utf-8")
    else:
        target.write_text(_comparison_svg(cmp), encoding="utf-8")
    click.echo(f"config changes: on {on.config_change_count}, off {off.config_change_count} (off - on = {cmp.event_diff})")
    click.echo(f"joint-4 max-travel ratio (on/off): {_f6(cmp.joint4_max_ratio)}")
    click.echo(f"time-proxy ratio (on/off): {_f6(cmp.time_ratio)}")


@main.command("servo-sim")
@click.argument("script", type=click.File("r", encoding="utf-8"))
@config_option
@out_option("servo_out")
def servo_sim(script, config_path, out):
    """Replay a bus script against the simulated four-servo bus.

    SCRIPT ('-' for stdin) holds hex frames or the commands ping ID, read ID,
    write ID TICK, wrist DEV_DEG FLEX_DEG and wait SECONDS. The transcript
    goes to transcript.txt. A malformed line exits 2 naming the line.
    """
    cfg = _load(config_path, None)
    bus = SimBus(
        [SimServo(c.servo_id, c.role, c.center_ticks, c.center_ticks, cfg.servo_speed_ticks_s) for c in cfg.calibrations]
    )
    try:
        lines = run_script(script, bus, cfg.calibrations)
    except ScriptError as exc:
        _fail(str(exc))
    d = _outdir(out)
    (d / "transcript.txt").write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    replies = sum(1 for line in lines if line.startswith("<"))
    click.echo(f"requests: {sum(1 for line in lines if line.startswith('>'))}  replies: {replies}")
    click.echo("positions: " + " ".join(f"{i}={p}" for i, p in bus.positions().items()))


if __name__ == "__main__":  # pragma: no cover
    main()
