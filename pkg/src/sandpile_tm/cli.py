"""Command-line front end.

Exit codes: 0 success or Stable, 1 bad input, 2 budget exhausted,
3 a pipeline stage disagreed with the one before it.
"""

from __future__ import annotations

import os
import sys
from pathlib import Path

import click

from .core import UnsupportedGraphError, decide_finite_halting, parse_finite
from .gadgets import ATLAS, GadgetDefect, GadgetError, read_fixture, verify_gadget
from .lattice import LatticeSim
from .periodic import decide_periodic, parse_pf
from .textio import ParseError, slice_grid, write_csv
from .turing import parse_machine

OK, BAD_INPUT, EXHAUSTED, MISMATCH = 0, 1, 2, 3
FALLBACK_BUDGET = 10_000_000


def default_budget() -> int:
    raw = os.environ.get("SANDPILE_BUDGET_DEFAULT")
    if raw is None:
        return FALLBACK_BUDGET
    try:
        return int(raw)
    except ValueError:
        raise click.UsageError(f"SANDPILE_BUDGET_DEFAULT must be an integer, got {raw!r}")


def _budget(b: int | None) -> int:
    return default_budget() if b is None else b


def _read(path: str, parse):
    try:
        return parse(Path(path).read_text(), path)
    except ParseError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(BAD_INPUT)


def _bounds(sites, z: int):
    pts = [s for s in sites if s[2] == z] or [(0, 0, z)]
    xs = [p[0] for p in pts]
    ys = [p[1] for p in pts]
    return range(min(xs) - 1, max(xs) + 2), range(min(ys) - 1, max(ys) + 2)


def _snapshot(sim: LatticeSim, out: Path, stem: str, z: int, sites) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / f"{stem}_odometer.csv").write_text(write_csv(sorted(sim.odometer().items()), "x,y,z,topplings"))
    xs, ys = _bounds(sites, z)
    (out / f"{stem}_z{z}.txt").write_text(slice_grid(sim.chips_at, z, xs, ys))


def _load_sim(config: str, window):
    cfg = _read(config, parse_pf)
    if not cfg.background.is_stable():
        click.echo("error: the background is unstable everywhere; use decide-periodic", err=True)
        sys.exit(BAD_INPUT)
    return cfg, LatticeSim(cfg.background.pattern, cfg.delta, window=window)


def _window(text: str | None):
    if text is None:
        return None
    try:
        v = [int(t) for t in text.split(",")]
    except ValueError:
        raise click.BadParameter("expected six integers x0,y0,z0,x1,y1,z1")
    if len(v) != 6:
        raise click.BadParameter("expected six integers x0,y0,z0,x1,y1,z1")
    return tuple(v[:3]), tuple(v[3:])


class _Group(click.Group):
    """Usage errors exit with 1 like every other bad input; 2 means budget exhausted."""

    def main(self, *args, **kwargs):
        kwargs["standalone_mode"] = False
        try:
            return super().main(*args, **kwargs)
        except click.ClickException as e:
            e.show()
            sys.exit(BAD_INPUT)
        except click.Abort:
            click.echo("aborted", err=True)
            sys.exit(BAD_INPUT)


@click.group(cls=_Group)
def main():
    """Sandpiles on Z^3 that simulate Turing machines."""


@main.command()
@click.argument("config", type=click.Path(exists=True, dir_okay=False))
@click.option("--budget", type=int, default=None, help="Toppling budget (default $SANDPILE_BUDGET_DEFAULT).")
@click.option("--snapshot-every", type=int, default=0, help="Write a snapshot every K topplings.")
@click.option("--out", type=click.Path(file_okay=False), default=None, help="Snapshot directory.")
@click.option("--z", "z", type=int, default=0, show_default=True, help="Slice written to the text grids.")
@click.option("--window", default=None, help="Clip toppling to x0,y0,z0,x1,y1,z1.")
def simulate(config, budget, snapshot_every, out, z, window):
    """Stabilize a periodic+finite configuration file."""
    budget = _budget(budget)
    cfg, sim = _load_sim(config, _window(window))
    outdir = Path(out) if out else None
    done, k = 0, 0
    while True:
        step = budget - done if snapshot_every <= 0 else min(snapshot_every, budget - done)
        res = sim.run(step)
        done = sim.topplings
        if res.outcome.value == "Stable" or done >= budget:
            break
        k += 1
        if outdir:
            _snapshot(sim, outdir, f"snap{k:05d}", z, list(cfg.delta) + list(sim.odometer()))
    odo = sim.odometer()
    if outdir:
        _snapshot(sim, outdir, "final", z, list(cfg.delta) + list(odo))
    click.echo(f"outcome: {res.outcome.value}")
    click.echo(f"topplings: {sim.topplings}")
    click.echo(f"sites toppled: {len(odo)}")
    click.echo(f"origin odometer: {odo.get((0, 0, 0), 0)}")
    sys.exit(OK if res.outcome.value == "Stable" else EXHAUSTED)


@main.command("decide-periodic")
@click.argument("background", type=click.Path(exists=True, dir_okay=False))
def decide_periodic_cmd(background):
    """Vertex, global and local halting for a purely periodic configuration."""
    cfg = _read(background, parse_pf)
    if cfg.delta:
        click.echo("error: decide-periodic takes a background without delta chips", err=True)
        sys.exit(BAD_INPUT)
    v = decide_periodic(cfg.background)
    click.echo(f"vertex global local: {v.line()}")
    click.echo(f"case: {v.row}")
    click.echo(f"witness: {v.steps} torus topplings" + (f", loop {v.loop[0]}..{v.loop[1]}" if v.loop else ""))


@main.command("decide-finite")
@click.argument("graph", type=click.Path(exists=True, dir_okay=False))
def decide_finite_cmd(graph):
    """Halting on a finite simple undirected graph, decided with a toppling cap."""
    cfg = _read(graph, parse_finite)
    try:
        v = decide_finite_halting(cfg.graph, cfg)
    except UnsupportedGraphError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(BAD_INPUT)
    click.echo(f"halts: {'yes' if v.halts else 'no'}")
    click.echo(f"cap: {v.cap}")
    if v.halts:
        click.echo(f"topplings: {v.odometer.total()}")


@main.command("verify-gadget")
@click.argument("name")
@click.option("--fire", "ports", multiple=True, help="Port receiving a chip (repeatable).")
@click.option("--fixture", type=click.Path(file_okay=False, exists=True), default=None,
              help="Read NAME.csv and NAME.ports from this directory instead of the built-in atlas.")
def verify_gadget_cmd(name, ports, fixture):
    """Fire ports of one gadget alone in empty space and report what toppled."""
    if fixture:
        g = read_fixture(Path(fixture), name)
    elif name in ATLAS:
        g = ATLAS[name]()
    else:
        click.echo(f"error: unknown gadget {name!r}; known: {', '.join(sorted(ATLAS))}", err=True)
        sys.exit(BAD_INPUT)
    try:
        rep = verify_gadget(g, ports)
    except GadgetError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(BAD_INPUT)
    except GadgetDefect as e:
        click.echo(f"defect: {e}", err=True)
        sys.exit(EXHAUSTED)
    click.echo(f"fired: {' '.join(sorted(rep.fired)) or '-'}")
    click.echo(f"outputs toppled: {' '.join(sorted(rep.fired_outputs)) or '-'}")
    click.echo(f"inputs back-fired: {' '.join(sorted(rep.backfired_inputs)) or '-'}")
    click.echo(f"max deposit: {rep.max_deposit}")
    click.echo(f"max odometer: {rep.max_odometer}")
    xs, ys = _bounds(list(g.footprint), 0)
    click.echo(slice_grid(rep.chips, 0, xs, ys), nl=False)


@main.command("compile")
@click.argument("plan", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(dir_okay=False), required=True, help="Output .pf file; ports go next to it.")
def compile_cmd(plan, out):
    """Compile a plan file into a periodic+finite configuration and port map."""
    from .layout.compile import compile_plan, export_design, load_plan

    try:
        p = load_plan(plan)
        d = compile_plan(p)
    except (ParseError, ValueError) as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(BAD_INPUT)
    pf, ports = export_design(d, out)
    click.echo(f"target: {p.target}")
    click.echo(f"cube side: {d.n}")
    click.echo(f"gates per cube: {d.logic.counts()}")
    click.echo(f"delta chips: {sum(d.config.delta.values())}")
    click.echo(f"wrote {pf} and {ports}")


def _parse_xt(text: str) -> tuple[int, int]:
    try:
        x, t = (int(v) for v in text.split(","))
    except ValueError:
        raise click.BadParameter("expected X,T")
    return x, t


@main.command("run-pipeline")
@click.argument("machine", type=click.Path(exists=True, dir_okay=False))
@click.option("--target", type=click.Choice(["vertex", "global", "local"]), default="vertex", show_default=True)
@click.option("--window", "window", default="4,4", show_default=True, help="X,T: squares -X..X, times 0..T.")
@click.option("--budget", type=int, default=None, help="Toppling budget (default $SANDPILE_BUDGET_DEFAULT).")
@click.option("--tape", default=None, help="Initial tape, overriding the machine file.")
def run_pipeline(machine, target, window, budget, tape):
    """Compile a machine, simulate the sandpile and check every stage against the last."""
    from .layout.compile import CompilePlan, DesignRun, compile_plan, local_halting_run
    from .layout.pipeline import stage_check

    budget = _budget(budget)
    m, file_tape = _read(machine, parse_machine)
    X, T = _parse_xt(window)
    try:
        plan = CompilePlan(target, m, file_tape if tape is None else tape, (X, T))
        d = compile_plan(plan)
    except ValueError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(BAD_INPUT)
    click.echo(f"target: {plan.target}  window: x in [-{X}, {X}], t in [0, {T}]  cube side: {d.n}")
    click.echo("all verdicts below hold for this finite window and budget only")
    if target == "local":
        rep = local_halting_run(d, budget)
        if rep.origin_step is None:
            click.echo("no origin toppling within budget")
            sys.exit(EXHAUSTED)
        click.echo(f"origin toppled at sandpile step {rep.origin_step}")
        click.echo(f"bomb: origin odometer {rep.origin_odometers[0]} -> {rep.origin_odometers[1]} after doubling, "
                   f"{rep.ball - rep.untoppled}/{rep.ball} sites of the ball toppled")
        sys.exit(OK)
    r = stage_check(plan, budget, d)
    for label, ok in (("TM trace = automaton rows", r.tm_rows), ("automaton rows = circuit closure", r.closure_rows),
                      ("circuit closure = sandpile odometers", r.sandpile_rows)):
        click.echo(f"{label}: {'ok' if ok else 'MISMATCH'}")
    click.echo(f"window run: {r.outcome}, {r.topplings} topplings, max odometer {r.max_odometer}, "
               f"fired gates {r.fired_gates}")
    if not r.ok:
        click.echo(f"pipeline bug: {r.mismatch}", err=True)
        sys.exit(MISMATCH)
    if target == "vertex":
        if r.origin_step is not None:
            click.echo(f"origin toppled at sandpile step {r.origin_step} (odometer {r.origin_odometer})")
        else:
            click.echo("no origin toppling within budget")
        sys.exit(OK if r.outcome == "Stable" else EXHAUSTED)
    # global: the whole of Z^3, counting fired gates in every cube at each quarter of the budget
    sim = LatticeSim(d.config.background.pattern, d.config.delta)
    for q in range(1, 5):
        res = sim.run(budget * q // 4 - sim.topplings)
        run = DesignRun(d, sim, res.outcome.value, sim.topplings, None)
        click.echo(f"after {sim.topplings} topplings: fired gates {run.fired_gates_anywhere()}")
        if res.outcome.value == "Stable":
            break
    if res.outcome.value == "Stable":
        click.echo(f"Stable after {sim.topplings} topplings")
        sys.exit(OK)
    click.echo(f"BudgetExhausted: still toppling after {sim.topplings} topplings")
    sys.exit(EXHAUSTED)


@main.command("export-snapshot")
@click.argument("config", type=click.Path(exists=True, dir_okay=False))
@click.option("--budget", type=int, default=None, help="Toppling budget (default $SANDPILE_BUDGET_DEFAULT).")
@click.option("--format", "fmt", type=click.Choice(["grid", "csv", "odometer"]), default="grid", show_default=True)
@click.option("--z", "z", type=int, default=0, show_default=True)
def export_snapshot(config, budget, fmt, z):
    """Stabilize and print the final state as a z-slice grid or a CSV."""
    cfg, sim = _load_sim(config, None)
    res = sim.run(_budget(budget))
    if fmt == "odometer":
        click.echo(write_csv(sorted(sim.odometer().items()), "x,y,z,topplings"), nl=False)
    elif fmt == "csv":
        sites = sorted(set(cfg.delta) | set(sim.odometer()))
        click.echo(write_csv([(s, sim.chips_at(s)) for s in sites]), nl=False)
    else:
        xs, ys = _bounds(list(cfg.delta) + list(sim.odometer()), z)
        click.echo(slice_grid(sim.chips_at, z, xs, ys), nl=False)
    sys.exit(OK if res.outcome.value == "Stable" else EXHAUSTED)


if __name__ == "__main__":
    main()
