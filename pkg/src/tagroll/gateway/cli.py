"""Command line entry points.

Verbs: serve, simulate, enroll, report, bench. Serve configuration merges
flags > environment (TAGROLL_*) > JSON config file.
"""

from __future__ import annotations

import socket
import sys
import time
from pathlib import Path

import click
import uvicorn

from ..protocol import TagId
from ..reporting import run_benchmark
from ..simulator import ReaderConfig, ReaderField, parse_scenario, scenario_events
from ..store import Actor, RegistryStore, Role, StoreError
from .app import build_app
from .config import ConfigError, load_config


@click.group()
def main() -> None:
    """tagroll: tag-reader attendance service and tooling."""


@main.command()
@click.option("--config", "config_file", type=click.Path(exists=True, dir_okay=False), default=None, help="JSON config file.")
@click.option("--listen", default=None, help="host:port to bind (default 127.0.0.1:8000).")
@click.option("--store", "store_dir", default=None, help="Store directory.")
@click.option("--reader", default=None, help="Reader source: scenario:<path> | tcp:<host>:<port> | device:<path>.")
@click.option("--debounce", "debounce_s", type=float, default=None, help="Repeat-read debounce window in seconds.")
@click.option("--per-read", "per_read_seconds", type=float, default=None, help="Simulated cost per read in seconds.")
@click.option("--anti-collision/--no-anti-collision", "anti_collision", default=None, help="Reader anti-collision polling.")
@click.option("--sim-speed", type=float, default=None, help="Scenario pacing: 0 = fast, 1 = real time.")
@click.option("--static-dir", default=None, help="Operator console assets directory.")
def serve(config_file, listen, store_dir, reader, debounce_s, per_read_seconds, anti_collision, sim_speed, static_dir) -> None:
    """Run the attendance service (reader bridge + HTTP API + event stream)."""
    overrides = {
        "listen": listen,
        "store_dir": store_dir,
        "reader": reader,
        "debounce_s": debounce_s,
        "per_read_seconds": per_read_seconds,
        "anti_collision": anti_collision,
        "sim_speed": sim_speed,
        "static_dir": static_dir,
    }
    try:
        cfg = load_config(config_file, overrides=overrides)
        if cfg.reader is None:
            raise ConfigError(
                "exactly one reader source is required (--reader scenario:<path> | "
                "tcp:<host>:<port> | device:<path>)"
            )
        if cfg.reader.startswith("scenario:"):
            scenario_path = Path(cfg.reader.split(":", 1)[1])
            if not scenario_path.is_file():
                raise ConfigError(f"scenario file not found: {scenario_path}")
        store = RegistryStore(cfg.store_dir)  # fail fast if unwritable or locked
    except (ConfigError, StoreError, OSError) as exc:
        raise click.ClickException(f"startup failed: {exc}") from None
    try:
        app = build_app(cfg, store=store)
        uvicorn.run(app, host=cfg.listen_host, port=cfg.listen_port, log_level="info")
    finally:
        store.close()


@main.command()
@click.argument("scenario", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", default=None, help="Write raw frame bytes to a file ('-' for stdout).")
@click.option("--listen", default=None, help="Serve the byte stream on host:port to one client.")
@click.option("--per-read", "per_read_seconds", type=float, default=0.2)
@click.option("--anti-collision/--no-anti-collision", default=True)
@click.option("--beacon-interval", type=float, default=1.0)
@click.option("--speed", type=float, default=0.0, help="Pace output against the sim clock: 0 = fast, 1 = real time.")
def simulate(scenario, out_path, listen, per_read_seconds, anti_collision, beacon_interval, speed) -> None:
    """Run a scenario through the virtual reader and emit its byte stream."""
    if out_path is None and listen is None:
        out_path = "-"
    cfg = ReaderConfig(
        per_read_seconds=per_read_seconds,
        anti_collision=anti_collision,
        beacon_interval_s=beacon_interval,
    )
    reader = ReaderField(cfg)
    script = Path(scenario).read_text("utf-8")
    frames = list(scenario_events(parse_scenario(script), reader))

    def paced(emit):
        last_s = 0.0
        for frame, sim_s in frames:
            if speed > 0:
                time.sleep((sim_s - last_s) / speed)
            last_s = sim_s
            emit(frame)

    if listen is not None:
        host, _, port_text = listen.rpartition(":")
        with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as server:
            server.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
            server.bind((host or "127.0.0.1", int(port_text)))
            server.listen(1)
            click.echo(f"listening on {server.getsockname()[0]}:{server.getsockname()[1]}", err=True)
            conn, peer = server.accept()
            click.echo(f"client {peer[0]}:{peer[1]} connected", err=True)
            with conn:
                paced(conn.sendall)
    else:
        if out_path == "-":
            paced(sys.stdout.buffer.write)
            sys.stdout.buffer.flush()
        else:
            with open(out_path, "wb") as fh:
                paced(fh.write)
    click.echo(
        f"{len(frames)} frames, {reader.clock.now_s:g} s simulated", err=True
    )


@main.command()
@click.option("--store", "store_dir", required=True, help="Store directory.")
@click.option("--name", required=True)
@click.option("--tag", required=True, help="Tag id (10 uppercase hex chars).")
@click.option("--course", default="")
@click.option("--stream", default="")
@click.option("--trimester", default="")
@click.option("--photo", "photo_ref", default=None)
@click.option("--as-role", type=click.Choice(["operator", "admin"]), default="operator")
def enroll(store_dir, name, tag, course, stream, trimester, photo_ref, as_role) -> None:
    """Register a student directly in the store (offline enrollment)."""
    try:
        tag_id = TagId.parse(tag)
    except ValueError as exc:
        raise click.ClickException(str(exc)) from None
    actor = Actor(f"cli-{as_role}", Role(as_role))
    try:
        with RegistryStore(store_dir) as store:
            student = store.put_student(
                actor,
                name=name,
                course=course,
                stream=stream,
                trimester=trimester,
                tag_id=tag_id,
                now=time.time(),
                photo_ref=photo_ref,
            )
    except StoreError as exc:
        raise click.ClickException(str(exc)) from None
    click.echo(f"{student.id} {student.tag_id} {student.name}")


@main.command()
@click.argument("session_id")
@click.option("--store", "store_dir", required=True, help="Store directory.")
@click.option("--out", "out_path", default=None, help="Write CSV to a file instead of stdout.")
def report(session_id, store_dir, out_path) -> None:
    """Export a session's attendance as CSV."""
    from ..reporting import export_report_csv

    try:
        store = RegistryStore(store_dir, read_only=True)
        data = export_report_csv(store, session_id, time.time())
    except StoreError as exc:
        raise click.ClickException(str(exc)) from None
    if out_path:
        Path(out_path).write_bytes(data)
        click.echo(f"wrote {out_path}", err=True)
    else:
        sys.stdout.buffer.write(data)
        sys.stdout.buffer.flush()


@main.command()
@click.argument("n_students", type=int)
@click.option("--per-read", "per_read_seconds", type=float, default=0.2, help="Simulated seconds per tag read.")
@click.option("--series", "series_path", default=None, help="Write method,n,seconds triples to a file.")
def bench(n_students, per_read_seconds, series_path) -> None:
    """Compare manual, barcode, and tag-reader entry throughput."""
    started = time.monotonic()
    result = run_benchmark(
        n_students, rates={"rfid": per_read_seconds} if per_read_seconds else None
    )
    elapsed = time.monotonic() - started
    click.echo(result.table())
    click.echo(f"(tag-reader rows measured by simulation in {elapsed:.3f}s wall time)", err=True)
    if series_path:
        Path(series_path).write_text("\n".join(result.series_lines()) + "\n", "utf-8")
        click.echo(f"wrote {series_path}", err=True)


if __name__ == "__main__":
    main()
