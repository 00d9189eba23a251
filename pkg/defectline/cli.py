"""
defectline command line.

    defectline simulate --n 10 --xi 10 --t 0
    defectline track --builtin bubble --t0 -1.5 --t1 1.5 --dt 0.001 --window=-2,2,-2,2
    defectline lifetimes --sigmas 2,4,6 --trials 200
    defectline algebra --multiplet 3 --check "v -> v+v+v*+s+s"

Every subcommand accepts --config run.json; flags override the file.
Exit codes: 0 clean, 1 conservation violations, an illegal --check reaction or
(with --strict) suspect roots, 2 bad input or I/O failure.
"""

import argparse
import logging
import sys
from collections import Counter
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from defectline.config import Settings, get_settings
from defectline.errors import DefectlineError, InvalidArgumentError
from defectline.schemas.algebra import MultipletRow
from defectline.schemas.defect import DefectRow
from defectline.schemas.ensemble import SweepConfig
from defectline.schemas.run_config import Mode, RunConfig, WindowSpec
from defectline.services import export
from defectline.services.algebra import check_reaction, enumerate_multiplet, format_legs
from defectline.services.ensemble import run_sweep, scaling_ratio, uncertainty_check
from defectline.services.factory import build_field, build_window, window_spec
from defectline.services.rootfind import SearchWindow
from defectline.services.topology import totals
from defectline.services.tracker import snapshot, track
from defectline.services.wavefield import phase_grid

logger = logging.getLogger("defectline")

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_ERROR = 2


def _floats(text: str) -> list[float]:
    try:
        return [float(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="run configuration JSON")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int)
    common.add_argument("--strict", action="store_true", default=None, help="suspect roots fail the run")
    common.add_argument("--log-level", help="override DEFECTLINE_LOG_LEVEL")

    field = argparse.ArgumentParser(add_help=False)
    field.add_argument("--n", type=int, help="matrix size N")
    field.add_argument("--xi", type=int, help="number of lambda slots")
    field.add_argument("--sigma", type=float, help="Ginibre scale (default 1/sqrt(2N))")
    field.add_argument("--s-re", type=float, dest="s_re")
    field.add_argument("--s-im", type=float, dest="s_im")
    field.add_argument("--builtin", help="bubble, appendix-c or appendix-d")
    field.add_argument("--T", type=float, dest="T", help="bubble half-life")
    field.add_argument("--epsilon", type=float, help="fixed control parameter (default: follows t)")
    field.add_argument("--window", help="xmin,xmax,ymin,ymax")

    parser = argparse.ArgumentParser(prog="defectline", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", parents=[common, field], help="phase grid and defects at snapshot times")
    sim.add_argument("--t", type=float, action="append", dest="snapshots", help="snapshot time (repeatable)")
    sim.add_argument("--resolution", type=int, help="phase-grid points per axis")

    trk = sub.add_parser("track", parents=[common, field], help="defect lines and events over [t0, t1]")
    trk.add_argument("--t0", type=float)
    trk.add_argument("--t1", type=float)
    trk.add_argument("--dt", type=float)

    life = sub.add_parser("lifetimes", parents=[common], help="quaternionic-transient lifetime sweep")
    life.add_argument("--sigmas", type=_floats, help="comma-separated, ascending")
    life.add_argument("--trials", type=int)
    life.add_argument("--paper-scale", action="store_true", default=None, dest="paper_scale")
    life.add_argument("--dt", type=float, help="scan step in units of sigma")
    life.add_argument("--s-re", type=float, dest="s_re")
    life.add_argument("--s-im", type=float, dest="s_im")
    life.add_argument("--workers", type=int)
    life.add_argument("--scaling-check", action="store_true", default=None, dest="scaling_check")

    alg = sub.add_parser("algebra", parents=[common], help="multiplet tables and reaction checks")
    alg.add_argument("--multiplet", type=int, help="print complexes of P generators for P <= this")
    alg.add_argument("--check", action="append", dest="checks", help='reaction such as "v+v* -> e+e"')
    return parser


def _set(model, name: str, value) -> None:
    if value is not None:
        setattr(model, name, value)


def merge_config(args: argparse.Namespace) -> RunConfig:
    """RunConfig from --config (or defaults) with command-line flags on top."""
    config = RunConfig.load(args.config) if args.config else RunConfig()
    config.mode = Mode(args.command)
    _set(config, "out", args.out)
    _set(config, "seed", args.seed)
    _set(config, "strict", args.strict)

    spec = config.wavefield
    for name in ("n", "xi", "sigma", "s_re", "s_im", "builtin", "T", "epsilon"):
        _set(spec, name, getattr(args, name, None))
    if getattr(args, "window", None):
        w = SearchWindow.parse(args.window)
        config.window = WindowSpec(x_min=w.x_min, x_max=w.x_max, y_min=w.y_min, y_max=w.y_max)

    grid = config.time
    _set(grid, "snapshots", getattr(args, "snapshots", None))
    _set(grid, "resolution", getattr(args, "resolution", None))
    _set(grid, "t0", getattr(args, "t0", None))
    _set(grid, "t1", getattr(args, "t1", None))
    if args.command == "track":
        _set(grid, "dt", args.dt)

    if args.command == "lifetimes":
        sweep = config.sweep
        _set(sweep, "sigmas", args.sigmas)
        _set(sweep, "trials", args.trials)
        _set(sweep, "paper_scale", args.paper_scale)
        _set(sweep, "dt", args.dt)
        _set(sweep, "workers", args.workers)
        _set(sweep, "scaling_check", args.scaling_check)

    if args.command == "algebra":
        _set(config.algebra, "multiplet", args.multiplet)
        _set(config.algebra, "checks", args.checks)
    # re-validate after the overrides
    return RunConfig.model_validate(config.model_dump())


# Commands

def _join(symbols: Sequence[str]) -> str:
    return " + ".join(symbols) if symbols else "0"


def cmd_simulate(config: RunConfig, settings: Settings) -> int:
    field = build_field(config.wavefield, config.seed)
    times = config.time.snapshots or [config.time.t0]
    window = build_window(config.window, field, times, settings)
    out = Path(config.out)
    rows: list[DefectRow] = []
    suspects = 0
    res = config.time.resolution
    for k, t in enumerate(times):
        xs = np.linspace(window.x_min, window.x_max, res)
        ys = np.linspace(window.y_min, window.y_max, res)
        export.write_phase_grid(out / f"phase_{k:03d}.csv", *phase_grid(field, xs, ys, t))
        snap = snapshot(field, t, window, settings=settings)
        suspects += len(snap.suspects)
        rows.extend(export.defect_rows(snap.defects))
        counts = Counter(d.species.value for d in snap.defects)
        w, chi = totals(snap.defects)
        print(f"t={t:g}: {len(snap.defects)} defects {dict(sorted(counts.items()))} (w, chi)=({w}, {chi})")
    export.write_rows(out / "defects.csv", rows, DefectRow)
    export.write_json(out / "run.json", config)
    if suspects:
        print(f"{suspects} unconverged suspect root(s)")
    return EXIT_VIOLATION if config.strict and suspects else EXIT_OK


def cmd_track(config: RunConfig, settings: Settings) -> int:
    field = build_field(config.wavefield, config.seed)
    grid = config.time
    times = np.linspace(grid.t0, grid.t1, 5)
    window = build_window(config.window, field, times, settings)
    config.window = window_spec(window)
    result = track(field, grid.t0, grid.t1, grid.dt, window, settings=settings)
    out = Path(config.out)
    export.write_track(out, result)
    export.write_json(out / "run.json", config)

    report = result.report
    for t, w, chi, k in report.steps:
        logger.debug("t=%g (w, chi)=(%d, %d) defects=%d", t, w, chi, k)
    for ev in result.events:
        print(
            f"event {ev.id} t={ev.t:.6g} ({ev.x:.4g}, {ev.y:.4g}): "
            f"{_join(ev.incoming)} -> {_join(ev.outgoing)} [{ev.kind}, {'legal' if ev.legal else 'ILLEGAL'}]"
        )
    if report.steps:
        _, w, chi, _ = report.steps[-1]
        print(f"final (w, chi)=({w}, {chi}) over {len(report.steps)} steps")
    print(f"{len(result.lines)} lines, {len(result.events)} events, violations: {report.violations}")
    if report.suspects:
        print(f"{report.suspects} unconverged suspect root(s)")
    if report.violations or (config.strict and report.suspects):
        return EXIT_VIOLATION
    return EXIT_OK


def cmd_lifetimes(config: RunConfig, settings: Settings) -> int:
    spec = config.sweep
    trials = spec.trials or (settings.TRIALS_PAPER if spec.paper_scale else settings.TRIALS_DESK)
    sweep = SweepConfig(
        sigmas=spec.sigmas,
        trials_per_sigma=trials,
        s_re=config.wavefield.s_re,
        s_im=config.wavefield.s_im,
        dt=spec.dt,
        base_seed=config.seed,
        workers=spec.workers,
    )
    result = run_sweep(sweep, settings=settings)
    out = Path(config.out)
    export.write_sweep(out, result.per_sigma, result.fit)
    for row in result.per_sigma:
        mean = "-" if row.mean_t_max is None else f"{row.mean_t_max:.6g}"
        print(f"sigma={row.sigma:g}: mean t_max={mean} ({row.n_transients}/{row.n_trials} transients, {row.n_clipped} clipped)")
    if result.fit is not None:
        print(f"slope={result.fit.slope:.6g} intercept={result.fit.intercept:.6g} r2={result.fit.r2:.4f}")
    print(f"uncertainty check: {uncertainty_check(result):.4f}")
    if spec.scaling_check:
        ratio = scaling_ratio(spec.sigmas[0], trials, sweep.s, spec.dt, config.seed, settings=settings)
        print(f"scaling ratio t_max(2 sigma)/t_max(sigma) at sigma={spec.sigmas[0]:g}: {ratio:.4f}")
    return EXIT_OK


def cmd_algebra(config: RunConfig, settings: Settings) -> int:
    spec = config.algebra
    if spec.multiplet is None and not spec.checks:
        raise InvalidArgumentError("algebra needs --multiplet and/or --check")
    for p in range(1, (spec.multiplet or 0) + 1):
        table = enumerate_multiplet(p)
        print(f"P={p}: {len(table)} complexes")
        for c in table:
            row = MultipletRow(w=c.w, chi=c.chi, p=c.p, members=list(c.members), species_count=c.species_count)
            print(f"  (w, chi)=({row.w:+d}, {row.chi:+d})  {c.label}  [{row.species_count} species]")
    status = EXIT_OK
    for text in spec.checks:
        check = check_reaction(text)
        verdict = "legal" if check.legal else "illegal"
        print(f"{format_legs(check.incoming)} -> {format_legs(check.outgoing)}: {check.before} -> {check.after} {verdict}")
        if not check.legal:
            status = EXIT_VIOLATION
    return status


COMMANDS = {
    Mode.SIMULATE: cmd_simulate,
    Mode.TRACK: cmd_track,
    Mode.LIFETIMES: cmd_lifetimes,
    Mode.ALGEBRA: cmd_algebra,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    settings = get_settings()
    logging.basicConfig(
        level=(args.log_level or settings.LOG_LEVEL).upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        config = merge_config(args)
        return COMMANDS[config.mode](config, settings)
    except (DefectlineError, OSError) as exc:
        print(f"defectline: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except ValueError as exc:
        # pydantic validation of the merged run configuration
        print(f"defectline: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_ERROR


def run() -> None:
    sys.exit(main())
