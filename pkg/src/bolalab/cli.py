"""Command-line front end: ``bolalab simulate | oracle | sweep | compare | gen-profile | gen-manifest``."""

from __future__ import annotations

import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import click

from . import metrics, traces
from .errors import BolaLabError, ParameterError
from .model import PlayerConfig, Variant, load_manifest, save_manifest
from .oracle import offline_optimal
from .simulator import simulate

OUTPUT_ENV = "BOLALAB_OUTPUT_DIR"
EXIT_USAGE = 1


@dataclass(frozen=True)
class RunSpec:
    manifest: Optional[str]
    trace: Optional[str]
    profile: Optional[int]
    variant: str
    gamma_p: float
    buffer_s: Optional[float]
    v: Optional[float]
    minutes: Optional[float]
    seed: int
    delta: float = 0.1
    b_max: Optional[float] = None

    def __post_init__(self):
        if (self.trace is None) == (self.profile is None):
            raise click.UsageError("give exactly one of --trace and --profile")
        if (self.buffer_s is None) == (self.v is None):
            raise click.UsageError("give exactly one of --buffer-s and --v")

    def load_manifest(self):
        if self.manifest is not None:
            man = load_manifest(self.manifest)
        else:
            man = traces.reference_manifest(seed=self.seed)
        if self.minutes is not None:
            man = man.repeat_to(max(1, math.ceil(self.minutes * 60 / man.chunk_duration - 1e-9)))
        return man

    def load_trace(self, manifest):
        if self.profile is not None:
            return traces.gen_profile(self.profile)
        return traces.load_trace(self.trace, min_bitrate=min(manifest.bitrates))

    def config(self, manifest):
        return PlayerConfig(
            gamma_p=self.gamma_p,
            V=self.v,
            buffer_chunks=None if self.buffer_s is None else self.buffer_s / manifest.chunk_duration,
            variant=Variant.parse(self.variant),
        )

    def oracle_b_max(self, manifest):
        if self.b_max is not None:
            return self.b_max
        if self.buffer_s is not None:
            return self.buffer_s
        _, qmax = self.config(manifest).resolve(manifest.utilities[0])
        return round(qmax * manifest.chunk_duration / self.delta) * self.delta

    def header(self, command):
        h = {"command": command, "seed": self.seed}
        for key in ("manifest", "trace", "profile", "variant", "gamma_p", "buffer_s", "v", "minutes"):
            value = getattr(self, key)
            if value is not None:
                h[key] = value
        return h


def _out_dir(out):
    path = Path(out or os.environ.get(OUTPUT_ENV) or ".")
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write(path: Path, text: str):
    with open(path, "w", newline="") as fh:
        fh.write(text)
    click.echo(str(path))


def _load_config(ctx, _param, value):
    if value is None:
        return None
    try:
        data = json.loads(Path(value).read_text())
    except (OSError, ValueError) as exc:
        raise ParameterError(f"config file {value}: {exc}") from None
    if not isinstance(data, dict):
        raise ParameterError("config file must hold a JSON object")
    # same keys for every subcommand; explicit flags still win
    flat = {k.replace("-", "_"): v for k, v in data.items()}
    ctx.default_map = {name: flat for name in ctx.command.commands}
    return value


def _parse_list(text, cast):
    return [cast(x) for x in str(text).split(",") if x.strip()]


def _parse_ids(text):
    ids = []
    for part in str(text).split(","):
        if "-" in part:
            lo, hi = part.split("-")
            ids.extend(range(int(lo), int(hi) + 1))
        elif part.strip():
            ids.append(int(part))
    return ids


def run_options(f):
    opts = [
        click.option("--manifest", type=click.Path(dir_okay=False), help="Manifest JSON (default: seeded reference ladder)."),
        click.option("--trace", type=click.Path(dir_okay=False), help="Trace file duration_s,bandwidth_kbps[,latency_ms]."),
        click.option("--profile", type=click.IntRange(1, 12), help="Built-in network profile id."),
        click.option("--variant", default="bola-u", show_default=True, help="basic|finite|o|u|throughput."),
        click.option("--gamma-p", type=float, default=5.0, show_default=True),
        click.option("--buffer-s", type=float, help="Buffer size in seconds."),
        click.option("--v", "v", type=float, help="Control parameter V (instead of --buffer-s)."),
        click.option("--minutes", type=float, help="Video length; the manifest is repeated to reach it."),
        click.option("--seed", type=int, default=42, show_default=True),
        click.option("--out", type=click.Path(file_okay=False), help=f"Output directory (default ${OUTPUT_ENV} or .)."),
        click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv", show_default=True),
    ]
    for opt in reversed(opts):
        f = opt(f)
    return f


def oracle_options(f):
    f = click.option("--b-max", type=float, help="Oracle buffer cap in seconds (default: the player's buffer).")(f)
    f = click.option("--delta", type=float, default=0.1, show_default=True, help="Oracle time grid, seconds.")(f)
    return f


def _spec(kw, **override):
    fields = {k: kw.get(k) for k in RunSpec.__dataclass_fields__}
    fields.update(override)
    if fields.get("delta") is None:
        fields["delta"] = 0.1
    return RunSpec(**fields)


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.option("--config", type=click.Path(dir_okay=False), callback=_load_config, expose_value=False,
              is_eager=True, help="JSON file of option defaults; flags override it.")
@click.version_option(package_name="bolalab")
def cli():
    """BOLA bitrate-adaptation lab."""


@cli.command("simulate")
@run_options
def simulate_cmd(fmt, out, **kw):
    """Play one session and write its log and metrics."""
    spec = _spec(kw)
    man = spec.load_manifest()
    trace = spec.load_trace(man)
    log = simulate(man, trace, spec.config(man))
    for w in log.warnings:
        click.echo(f"warning: {w}", err=True)
    m = metrics.compute(log, man, spec.gamma_p)
    d = _out_dir(out)
    _write(d / "session_log.csv", log.to_csv())
    row = metrics.metrics_row(m, variant=Variant.parse(spec.variant).value)
    _write(d / f"simulate_report.{fmt}", metrics.emit([row], fmt, keys=["variant"], header=spec.header("simulate")))


def _oracle_run(spec: RunSpec):
    man = spec.load_manifest()
    trace = spec.load_trace(man)
    return man, offline_optimal(man, trace, spec.gamma_p, delta=spec.delta, b_max=spec.oracle_b_max(man))


@cli.command("oracle")
@run_options
@oracle_options
def oracle_cmd(fmt, out, **kw):
    """Compute the offline upper bound r* for one instance."""
    spec = _spec(kw)
    man, res = _oracle_run(spec)
    d = _out_dir(out)
    header = dict(spec.header("oracle"), delta=spec.delta, b_max=res.b_max)
    rows = [{"n": n, "m": m, "finish_s": t, "buffer_s": b}
            for n, (m, t, b) in enumerate(zip(res.levels, res.times, res.buffers), start=1)]
    cols = ["n", "m", "finish_s", "buffer_s"]
    if fmt == "csv":
        text = "".join(f"# {k}={v}\n" for k, v in header.items()) + f"# r_star={res.value!r}\n"
        text += metrics.rows_to_csv(rows, cols)
    else:
        text = json.dumps({"schema": metrics.REPORT_SCHEMA, "header": header, "r_star": res.value,
                           "columns": cols, "rows": rows}, indent=2) + "\n"
    _write(d / f"oracle_report.{fmt}", text)


def _sweep_point(args):
    spec, key = args
    man = spec.load_manifest()
    trace = spec.load_trace(man)
    log = simulate(man, trace, spec.config(man))
    return metrics.metrics_row(metrics.compute(log, man, spec.gamma_p), **key)


def _run_points(points, jobs):
    if jobs <= 1:
        return [_sweep_point(p) for p in points]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_sweep_point, points))  # map keeps submission order


@cli.command("sweep")
@run_options
@click.option("--profiles", default=None, help="Profile ids, e.g. 1-12 or 1,3,5 (overrides --profile).")
@click.option("--variants", default=None, help="Comma list (overrides --variant).")
@click.option("--buffers", default=None, help="Comma list of buffer sizes in seconds (overrides --buffer-s).")
@click.option("--gammas", default=None, help="Comma list of gamma_p values (overrides --gamma-p).")
@click.option("--jobs", type=click.IntRange(1), default=1, show_default=True)
def sweep_cmd(fmt, out, profiles, variants, buffers, gammas, jobs, **kw):
    """Simulate every grid point; one report row per point."""
    prof_list = _parse_ids(profiles) if profiles else [kw.get("profile")]
    var_list = _parse_list(variants, str) if variants else [kw["variant"]]
    buf_list = _parse_list(buffers, float) if buffers else [kw.get("buffer_s")]
    gam_list = _parse_list(gammas, float) if gammas else [kw["gamma_p"]]
    if buffers:
        kw["v"] = None
    points = []
    for prof in prof_list:
        for var in var_list:
            for buf in buf_list:
                for g in gam_list:
                    spec = _spec(kw, profile=prof, trace=None if prof is not None else kw.get("trace"),
                                 variant=var, buffer_s=buf, gamma_p=g)
                    key = {"profile": "" if prof is None else prof, "variant": Variant.parse(var).value,
                           "buffer_s": "" if buf is None else buf, "gamma_p": g}
                    points.append((spec, key))
    rows = _run_points(points, jobs)
    header = {"command": "sweep", "seed": kw["seed"], "points": len(rows)}
    _write(_out_dir(out) / f"sweep_report.{fmt}",
           metrics.emit(rows, fmt, keys=["profile", "variant", "buffer_s", "gamma_p"], header=header))


@cli.command("compare")
@run_options
@oracle_options
@click.option("--profiles", default=None, help="Profile ids, e.g. 1-12 (overrides --profile).")
@click.option("--variants", default=None, help="Comma list (overrides --variant).")
def compare_cmd(fmt, out, profiles, variants, **kw):
    """Simulate and divide oracle_form by r* on each trace."""
    prof_list = _parse_ids(profiles) if profiles else [kw.get("profile")]
    var_list = _parse_list(variants, str) if variants else [kw["variant"]]
    rows = []
    for prof in prof_list:
        base = _spec(kw, profile=prof, trace=None if prof is not None else kw.get("trace"))
        man, res = _oracle_run(base)
        for var in var_list:
            spec = _spec(kw, profile=prof, trace=base.trace, variant=var)
            row = _sweep_point((spec, {"profile": "" if prof is None else prof,
                                       "variant": Variant.parse(var).value}))
            row["r_star"] = res.value
            row["ratio"] = row["oracle_form"] / res.value
            rows.append(row)
    header = {"command": "compare", "seed": kw["seed"], "delta": kw["delta"]}
    _write(_out_dir(out) / f"compare_report.{fmt}",
           metrics.emit(rows, fmt, keys=["profile", "variant"], header=header, extra=["r_star", "ratio"]))


@cli.command("gen-profile")
@click.option("--profile", type=click.IntRange(1, 12), required=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True, help="Trace file to write.")
def gen_profile_cmd(profile, out):
    """Write a built-in network profile as a trace file."""
    traces.save_trace(traces.gen_profile(profile), out)
    click.echo(out)


@cli.command("gen-manifest")
@click.option("--chunks", type=click.IntRange(1), default=200, show_default=True)
@click.option("--chunk-duration", type=float, default=3.0, show_default=True)
@click.option("--seed", type=int, default=42, show_default=True)
@click.option("--cbr", is_flag=True, help="Constant chunk sizes (zero deviation).")
@click.option("--out", type=click.Path(dir_okay=False), required=True, help="Manifest JSON to write.")
def gen_manifest_cmd(chunks, chunk_duration, seed, cbr, out):
    """Write a seeded VBR manifest built from the reference ladder statistics."""
    stats = [(m * 1e6, 0.0 if cbr else s * 1e6) for m, s in traces.LADDER_STATS]
    save_manifest(traces.gen_vbr_manifest(chunks, chunk_duration, stats, seed), out)
    click.echo(out)


def main(argv=None):
    try:
        cli.main(args=argv, prog_name="bolalab", standalone_mode=False)
    except click.UsageError as exc:
        exc.show()
        return EXIT_USAGE
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return EXIT_USAGE
    except click.ClickException as exc:
        exc.show()
        return EXIT_USAGE
    except BolaLabError as exc:
        click.echo(f"error: {exc}", err=True)
        return exc.exit_code
    except OSError as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
