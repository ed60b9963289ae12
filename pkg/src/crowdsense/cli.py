"""Command-line front end."""

from __future__ import annotations

import os
import random
import sys
import time
from pathlib import Path

import click

from . import bench as bench_mod
from . import bgn, trust
from .protocol import setup as setup_mod
from .protocol.sizes import BACKEND, KINDS, REFERENCE, symbolic_size
from .scenario import BUNDLED, ConfigError, ScenarioConfig, bundled, run_scenario, trace_demo

OUT_DIR_ENV = "CROWDSENSE_OUT_DIR"

PROFILES = {
    # V: largest provable P - Q; grid None means the full default frame
    "default": {"V": setup_mod.DEFAULT_V, "grid": None, "circle_bits": 512},
    "test": {"V": 64, "grid": (8, 8), "circle_bits": 32},
}


@click.group()
def main():
    """Privacy-preserving crowdsensing with credit-based report selection."""


@main.command()
@click.option("--profile", type=click.Choice(sorted(PROFILES)), default="test", show_default=True)
@click.option("--out-dir", type=click.Path(file_okay=False), default=None,
              help="Output directory (default: $%s or ./params)." % OUT_DIR_ENV)
@click.option("--seed", type=int, default=None, help="Seed for reproducible parameters (insecure).")
def setup(profile, out_dir, seed):
    """Generate and persist system parameters, then reload and check them."""
    out = Path(out_dir or os.environ.get(OUT_DIR_ENV) or "params")
    prof = PROFILES[profile]
    rng = random.Random(seed) if seed is not None else None
    t0 = time.perf_counter()
    st = setup_mod.service_setup(rng, V=prof["V"], grid=prof["grid"])
    circle = bgn.bgn_setup(prof["circle_bits"], 2 ** 10, rng)
    try:
        paths = setup_mod.save_setup(st, out)
        paths.update(setup_mod.save_circle(circle, out))
    except OSError as exc:
        raise click.ClickException(str(exc))
    setup_mod.load_setup(out)
    setup_mod.load_circle(out)
    click.echo("profile %s: V=%d grid=%dx%d circle primes %d bits (%.2f s)" % (
        profile, st.public.range.V, *st.public.grid, prof["circle_bits"], time.perf_counter() - t0))
    for name, path in sorted(paths.items()):
        click.echo("  %s: %s" % (name, path))


def _load_config(target: str) -> ScenarioConfig:
    path = Path(target)
    try:
        return ScenarioConfig.load(path if path.exists() else bundled(target))
    except ConfigError as exc:
        raise click.BadParameter(str(exc), param_hint="SCENARIO")


@main.command()
@click.argument("scenario")
@click.option("--csv", "csv_path", type=click.Path(dir_okay=False), default=None, help="Also write the report as CSV.")
@click.option("--timings", is_flag=True, help="Include per-phase wall times (not deterministic).")
def run(scenario, csv_path, timings):
    """Run SCENARIO (a YAML file or the name of a bundled scenario)."""
    report = run_scenario(_load_config(scenario))
    click.echo(report.to_text(include_timings=timings), nl=False)
    if csv_path:
        Path(csv_path).write_text(report.to_csv())
    if not report.ok:
        sys.exit(1)


@main.command("list-scenarios")
def list_scenarios():
    """Names of the bundled scenarios."""
    for path in sorted(BUNDLED.glob("*.yaml")):
        click.echo(path.stem)


@main.command()
@click.option("--phase", "phases", multiple=True, type=click.Choice(bench_mod.PHASES),
              help="Restrict to a phase; repeatable.")
@click.option("--repetitions", type=int, default=5, show_default=True)
@click.option("--params", "params_dir", type=click.Path(file_okay=False, exists=True), default=None,
              help="Use parameters written by setup instead of fresh test parameters.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--strict", is_flag=True, help="Exit nonzero when a count differs from the reference.")
def bench(phases, repetitions, params_dir, seed, strict):
    """Operation counts and timings per phase and entity."""
    if repetitions < 1:
        raise click.BadParameter("must be at least 1", param_hint="--repetitions")
    st = setup_mod.load_setup(params_dir) if params_dir else None
    rows = bench_mod.run_bench(repetitions, phases or None, seed, st)
    click.echo(bench_mod.format_table(rows), nl=False)
    if strict and not all(r.matches for r in rows):
        sys.exit(1)


def _points(text: str):
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise click.BadParameter("expected comma-separated integers", param_hint="--points")


@main.command("credit-sim")
@click.option("--mode", type=click.Choice(["w-sweep", "n-sweep"]), default="w-sweep", show_default=True,
              help="w-sweep fixes N (default 1000); n-sweep fixes w (default 100).")
@click.option("--points", default=None, help="Comma-separated sweep values.")
@click.option("--fixed", type=int, default=None, help="Override the fixed N or w.")
@click.option("--strategy", "strategies", multiple=True, type=click.Choice(trust.STRATEGIES))
@click.option("--trials", type=int, default=200, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="CSV path (default: stdout).")
def credit_sim(mode, points, fixed, strategies, trials, seed, out):
    """Monte Carlo estimate of the accuracy and privacy rates per strategy."""
    if points is None:
        pts = list(range(50, 501, 50)) if mode == "w-sweep" else list(range(200, 2001, 200))
    else:
        pts = _points(points)
    strategies = strategies or tuple(s for s in trust.STRATEGIES if s != "truthful")
    try:
        rows = trust.sweep(mode, pts, strategies, trials, seed, fixed)
    except ValueError as exc:
        raise click.BadParameter(str(exc))
    text = trust.rows_to_csv(rows)
    if out:
        Path(out).write_text(text)
    else:
        click.echo(text, nl=False)


@main.command("trace-demo")
@click.option("--users", type=int, default=20, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
def trace_demo_cmd(users, seed):
    """One user reports twice in a slot; the authority recovers who."""
    try:
        res = trace_demo(users, seed)
    except ValueError as exc:
        raise click.BadParameter(str(exc), param_hint="--users")
    click.echo("users %d, cheater %s, traced %s, honest collisions %d" % (
        res.users, res.cheater, res.traced, res.honest_collisions))
    if not res.ok:
        sys.exit(1)


@main.command("size-report")
@click.option("--widths", type=click.Choice(["reference", "backend"]), default="reference", show_default=True)
@click.option("--measure", is_flag=True, help="Also run the bundled scenarios and compare encoded lengths.")
def size_report(widths, measure):
    """Message sizes in bits, as formulas over the variable-width fields."""
    w = REFERENCE if widths == "reference" else BACKEND
    for kind in KINDS:
        click.echo("%-22s %s" % (kind, symbolic_size(kind, w)))
    if measure:
        bad = 0
        click.echo("measured at backend widths:")
        for name in ("happy_path", "double_report", "circle"):
            rep = run_scenario(ScenarioConfig.load(bundled(name)))
            for kind, (bits, ok, formula) in sorted(rep.sizes.items()):
                bad += not ok
                click.echo("  %-13s %-22s %6d %s" % (name, kind, bits, "ok" if ok else "MISMATCH"))
        if bad:
            sys.exit(1)


if __name__ == "__main__":
    main()
