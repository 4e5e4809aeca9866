"""``enginecool`` command line: simulate, tune, sweep, calibrate, range.

Exit status 0 on success, 1 on a runtime failure, 2 on a configuration error.
"""

import argparse
import csv
import json
import logging
import sys
from dataclasses import asdict, replace
from pathlib import Path

from .config import load_config
from .control import ControllerSpec, PidGains
from .exceptions import ConfigurationError, EngineCoolError
from .montecarlo import recommend_gains, run_sweep
from .simulator import (calibrate_mechanical_ratio, feasible_range_sweep, simulate_lap)
from .trace import default_lap, read_trace_csv
from .tuning import KesslerTuner

log = logging.getLogger("enginecool")

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_CONFIG)


def _common(default):
    common = argparse.ArgumentParser(add_help=False, argument_default=default)
    common.add_argument("--config", type=Path, help="INI config file")
    common.add_argument("--seed", type=int, help="random seed (sweeps in random mode)")
    common.add_argument("--jobs", type=int, help="parallel workers, -1 = all cores")
    common.add_argument("--output-dir", type=Path, help="directory for output files")
    common.add_argument("--trace", type=Path, help="lap trace CSV (time_s, speed_rpm, fired)")
    common.add_argument("-v", "--verbose", action="store_true", default=default or False)
    return common


def build_parser():
    """Global flags are accepted before or after the command name."""
    # sub-commands must not reset flags given before the command name
    common = _common(argparse.SUPPRESS)

    p = _Parser(prog="enginecool", description=__doc__.splitlines()[0], parents=[_common(None)])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sim = sub.add_parser("simulate", parents=[common], help="simulate one lap")
    sim.add_argument("--strategy", choices=("mechanical", "feedforward", "pid", "combined"))
    sim.add_argument("--target", type=float, help="target temperature while fired, K")
    sim.add_argument("--target-coasting", type=float, help="target while coasting, K")
    sim.add_argument("--k-p", type=float)
    sim.add_argument("--k-i", type=float)
    sim.add_argument("--k-d", type=float)
    sim.add_argument("--gains-json", type=Path, help="gains from `enginecool tune`")
    sim.add_argument("--decimation", type=int)
    sim.add_argument("--reference", choices=("none", "mechanical"))

    tune = sub.add_parser("tune", parents=[common], help="first-guess PID gains")
    tune.add_argument("--mdot-w0", type=float)
    tune.add_argument("--tau-c", type=float)

    sw = sub.add_parser("sweep", parents=[common], help="gain sweep")
    sw.add_argument("--mode", choices=("grid", "random"))
    sw.add_argument("--n-samples", type=int)

    cal = sub.add_parser("calibrate", parents=[common], help="mechanical pump ratio")
    cal.add_argument("--max-temperature", type=float)

    sub.add_parser("range", parents=[common], help="feasible target range")
    return p


def _resolve(args):
    cfg = load_config(args.config)
    cfg = cfg.with_overrides(trace=args.trace, output_dir=args.output_dir, jobs=args.jobs)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed, sweep=replace(cfg.sweep, seed=args.seed))
    return cfg.check_files()


def _trace(cfg):
    return default_lap() if cfg.trace is None else read_trace_csv(cfg.trace)


def _outdir(cfg):
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _controller(cfg, args):
    c = cfg.controller
    over = {"strategy": args.strategy, "target_fired": args.target,
            "target_coasting": args.target_coasting, "k_P": args.k_p, "k_I": args.k_i,
            "k_D": args.k_d, "reference": args.reference}
    if args.gains_json is not None:
        try:
            g = json.loads(Path(args.gains_json).read_text())
            over.update({k: over[k] if over[k] is not None else float(g[k])
                         for k in ("k_P", "k_I", "k_D")})
        except (OSError, ValueError, KeyError) as exc:
            raise ConfigurationError(f"cannot read gains from {args.gains_json}: {exc}") from None
    over = {k: v for k, v in over.items() if v is not None}
    return replace(c, **over)


def cmd_simulate(cfg, args):
    trace = _trace(cfg)
    c = _controller(cfg, args)
    sim_kw = cfg.simulation.kwargs()
    models = dict(plant=cfg.plant, pump=cfg.pump, heat=cfg.heat)
    ratio = c.mechanical_ratio
    if (c.strategy == "mechanical" and ratio is None) or c.reference == "mechanical":
        ratio = ratio or calibrate_mechanical_ratio(trace, max_temperature=c.max_temperature,
                                                    **models, **sim_kw)
    reference = None
    if c.reference == "mechanical":
        ref_spec = ControllerSpec("mechanical", mechanical_ratio=ratio)
        reference = simulate_lap(trace, ref_spec, **models, **sim_kw).metrics
    spec = ControllerSpec(c.strategy, gains=PidGains(c.k_P, c.k_I, c.k_D), schedule=c.schedule,
                          mechanical_ratio=ratio if c.strategy == "mechanical" else None,
                          base_flow=c.base_flow, derivative_filter=c.derivative_filter)
    result = simulate_lap(trace, spec, reference=reference, **models, **sim_kw)
    out = _outdir(cfg)
    decimation = args.decimation or cfg.simulation.decimation
    result.write_series_csv(out / "timeseries.csv", decimation)
    result.write_metrics_json(out / "metrics.json")
    log.info("energy residual %.2e over %d lap(s)", result.energy_residual, result.laps)
    print(json.dumps(result.metrics.to_dict(), indent=2))
    return EXIT_OK


def cmd_tune(cfg, args):
    t = cfg.tune
    tuner = KesslerTuner(T_w_0=t.T_w_0, T_cyl_0=t.T_cyl_0,
                         mdot_w_0=args.mdot_w0 if args.mdot_w0 is not None else t.mdot_w_0,
                         tau_c=args.tau_c if args.tau_c is not None else t.tau_c,
                         plant=cfg.plant, pump=cfg.pump).fit()
    text = json.dumps(tuner.summary(), indent=2)
    (_outdir(cfg) / "gains.json").write_text(text + "\n")
    print(text)
    return EXIT_OK


def cmd_sweep(cfg, args):
    spec = cfg.sweep
    over = {k: v for k, v in (("mode", args.mode), ("n_samples", args.n_samples)) if v is not None}
    try:
        spec = replace(spec, **over)
    except ValueError as exc:
        raise ConfigurationError(str(exc)) from None
    result = run_sweep(spec, _trace(cfg), cfg.plant, cfg.pump, cfg.heat, n_jobs=cfg.jobs,
                       **cfg.simulation.kwargs())
    out = _outdir(cfg)
    result.write_csv(out / "sweep.csv")
    result.write_summary_json(out / "sweep_summary.json", cfg.sweep_weights)
    g = recommend_gains(result, cfg.sweep_weights)
    print(json.dumps({"n_points": len(result), "n_stable": int(result.stable.sum()),
                      "recommended": dict(zip(("k_P", "k_I", "k_D"), g.as_tuple()))}, indent=2))
    return EXIT_OK


def cmd_calibrate(cfg, args):
    c = cfg.controller
    target = args.max_temperature if args.max_temperature is not None else c.max_temperature
    trace = _trace(cfg)
    sim_kw = cfg.simulation.kwargs()
    ratio = calibrate_mechanical_ratio(trace, cfg.plant, cfg.pump, cfg.heat,
                                       max_temperature=target, **sim_kw)
    m = simulate_lap(trace, ControllerSpec("mechanical", mechanical_ratio=ratio), cfg.plant,
                     cfg.pump, cfg.heat, **sim_kw).metrics
    out = {"mechanical_ratio": ratio, "max_T_cyl": m.max_T_cyl, "target_max_T": target,
           "metrics": m.to_dict()}
    text = json.dumps(out, indent=2)
    (_outdir(cfg) / "calibration.json").write_text(text + "\n")
    print(text)
    return EXIT_OK


def cmd_range(cfg, args):
    c = cfg.controller
    rows = feasible_range_sweep(cfg.range.targets(), _trace(cfg), cfg.plant, cfg.pump, cfg.heat,
                                gains=PidGains(c.k_P, c.k_I, c.k_D), **cfg.simulation.kwargs())
    path = _outdir(cfg) / "range.csv"
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        names = list(asdict(rows[0]))
        w.writerow(names)
        for r in rows:
            w.writerow([getattr(r, n) for n in names])
    for r in rows:
        print(f"{r.target:7.1f} K  mean {r.mean_T_cyl:7.2f} K  std {r.std_T_cyl:6.3f} K  "
              f"{r.saturation or '-'}")
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "tune": cmd_tune, "sweep": cmd_sweep,
            "calibrate": cmd_calibrate, "range": cmd_range}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        cfg = _resolve(args)
        return COMMANDS[args.command](cfg, args)
    except ConfigurationError as exc:
        print(f"enginecool: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (EngineCoolError, RuntimeError, ValueError, OSError) as exc:
        print(f"enginecool: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
