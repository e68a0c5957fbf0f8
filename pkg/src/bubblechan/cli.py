"""
Command-line front end.

    bubblechan simulate --config run.yaml [--seed N] [--trials N] [--out DIR] [--exact-geometry]
    bubblechan fit      --config run.yaml [--out DIR] [--simulation DIR]
    bubblechan analyze  --config run.yaml --snr-db 0:45:5 [--model FILE ...] [--out DIR]
    bubblechan table1   [--config-dir configs/table1] [--out DIR] [--trials N] [--seed N]

Results are deterministic given config and seed. Timestamps and run times
go to ``*.meta.json`` files next to the results they describe.
Exit codes: 0 success, 2 configuration or usage error, 3 numerical failure.
"""

import argparse
import csv
import json
import logging
import platform
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .channel import parse_snr_grid, sweep, write_sweep_csv
from .config import load_config
from .errors import BubbleChanError, FitError, ParameterError
from .modelfit import ObstructionModel, build_obstruction_model, mse_test, r2_test
from .simulator import EmpiricalDistribution, run_ensemble

log = logging.getLogger("bubblechan")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

TABLE1_RATES = (20, 40, 80, 160)
TABLE1_RADII_MM = (1.35, 1.50, 1.95, 2.99)
TABLE1_HEADER = ("rate_per_s", "mu_r_mm", "sim_c", "sim_b", "sim_a",
                 "c", "b", "a", "k", "lambda", "mse", "r2")

SAMPLES_FILE = "received_power.npy"


def table1_name(rate, mu_mm):
    return f"rate{rate:03d}_mu{mu_mm:.2f}mm.yaml"


def _write_json(path, rec):
    path.write_text(json.dumps(rec, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _write_meta(path, started, argv):
    _write_json(path, {
        "argv": list(argv),
        "finished_utc": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "python": platform.python_version(),
        "tool_version": __version__,
        "wall_clock_s": round(time.perf_counter() - started, 3),
    })


def _model_id(cfg):
    return cfg.source.stem if cfg.source is not None else "model"


def _out_dir(args, cfg):
    out = Path(args.out) if args.out else cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    return out


def _apply_overrides(cfg, args):
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "trials", None) is not None:
        if args.trials < 1:
            raise ParameterError("--trials must be at least 1")
        cfg.n_trials = args.trials
    return cfg


def _simulate(cfg, exact):
    return run_ensemble(cfg.env, cfg.n_trials, cfg.seed, exact=exact, bins=cfg.histogram_bins)


def _histogram_rows(dist):
    n = dist.n_trials
    edges = dist.hist_edges
    yield ("bin_lo", "bin_hi", "count", "probability")
    yield (0.0, 0.0, int(round(dist.mass_at_zero * n)), dist.mass_at_zero)
    for lo, hi, cnt in zip(edges[:-1], edges[1:], dist.hist_counts):
        yield (float(lo), float(hi), int(cnt), cnt / n)
    yield (dist.m, dist.m, int(round(dist.mass_at_m * n)), dist.mass_at_m)


def _write_csv(path, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])


def cmd_simulate(args):
    started = time.perf_counter()
    cfg = _apply_overrides(load_config(args.config), args)
    out = _out_dir(args, cfg)
    dist = _simulate(cfg, args.exact_geometry)
    np.save(out / SAMPLES_FILE, dist.samples)
    _write_csv(out / "histogram.csv", _histogram_rows(dist))
    _write_json(out / "simulation.json", {
        "config": cfg.to_record(),
        "exact_geometry": bool(args.exact_geometry),
        "summary": dist.summary(),
    })
    _write_meta(out / "simulation.meta.json", started, args.argv)
    s = dist.summary()
    print(f"simulated {s['n_trials']} trials: a_hat={s['a_hat']:.6g} c_hat={s['c_hat']:.6g} -> {out}")
    return EXIT_OK


def _load_samples(path, m, seed):
    samples = np.load(path)
    return EmpiricalDistribution(samples, m - samples, m, seed)


def _fit(cfg):
    try:
        return build_obstruction_model(cfg.env)
    except FitError as exc:
        log.error("fit failed: %s (b E[B^2]/E[B]^2 = %.6g)", exc, exc.moment_ratio)
        raise


def cmd_fit(args):
    started = time.perf_counter()
    cfg = load_config(args.config)
    out = _out_dir(args, cfg)
    build = _fit(cfg)
    model = build.model
    rec = {
        "config": cfg.to_record(),
        "model": model.to_record(),
        "model_id": _model_id(cfg),
        "moments": {"e_b": build.moments.e_b, "e_b2": build.moments.e_b2},
    }
    sim_dir = Path(args.simulation) if args.simulation else out
    if (sim_dir / SAMPLES_FILE).exists():
        dist = _load_samples(sim_dir / SAMPLES_FILE, model.m, cfg.seed)
        rec["fit_scores"] = {"mse": mse_test(dist, model), "r2": r2_test(dist, model),
                             "n_trials": dist.n_trials}
    elif args.simulation:
        raise ParameterError(f"no {SAMPLES_FILE} in {sim_dir}")
    _write_json(out / "model.json", rec)
    _write_meta(out / "model.meta.json", started, args.argv)
    print(f"a={model.a:.6g} b={model.b:.6g} c={model.c:.6g} k={model.k:.6g} lambda={model.lam:.6g} -> {out}")
    return EXIT_OK


def _read_model(path):
    try:
        rec = json.loads(Path(path).read_text(encoding="utf-8"))
        return rec.get("model_id", Path(path).stem), ObstructionModel.from_record(rec["model"])
    except (OSError, KeyError, json.JSONDecodeError) as exc:
        raise ParameterError(f"cannot read model file {path}: {exc}") from exc


def cmd_analyze(args):
    started = time.perf_counter()
    cfg = load_config(args.config)
    grid = parse_snr_grid(args.snr_db)
    out = _out_dir(args, cfg)
    if args.model:
        models = [_read_model(p) for p in args.model]
    elif (out / "model.json").exists():
        models = [_read_model(out / "model.json")]
    else:
        models = [(_model_id(cfg), _fit(cfg).model)]
    rows = sweep(models, cfg.channel, grid)
    write_sweep_csv(rows, out / "sweep.csv")
    _write_meta(out / "sweep.meta.json", started, args.argv)
    print(f"{len(rows)} rows -> {out / 'sweep.csv'}")
    return EXIT_OK


def cmd_table1(args):
    started = time.perf_counter()
    cfg_dir = Path(args.config_dir)
    expected = [(r, mu) for r in TABLE1_RATES for mu in TABLE1_RADII_MM]
    missing = [table1_name(r, mu) for r, mu in expected if not (cfg_dir / table1_name(r, mu)).exists()]
    if missing:
        raise ParameterError(f"missing configs in {cfg_dir}: {', '.join(missing)}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = [TABLE1_HEADER]
    for rate, mu in expected:
        cfg = _apply_overrides(load_config(cfg_dir / table1_name(rate, mu)), args)
        model = _fit(cfg).model
        dist = _simulate(cfg, args.exact_geometry)
        s = dist.summary()
        rows.append((rate, mu, s["c_hat"], s["b_hat"], s["a_hat"], model.c, model.b, model.a,
                     model.k, model.lam, mse_test(dist, model), r2_test(dist, model)))
        log.info("rate %d mu %.2f mm done", rate, mu)
    _write_csv(out / "table1.csv", rows)
    _write_meta(out / "table1.meta.json", started, args.argv)
    print(f"16 rows -> {out / 'table1.csv'}")
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser():
    p = _Parser(prog="bubblechan", description="Bubble-induced fading in underwater optical links.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="Monte Carlo received-power samples")
    s.add_argument("--config", required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--trials", type=int)
    s.add_argument("--out")
    s.add_argument("--exact-geometry", action="store_true", help="skip the interpolation cache")
    s.set_defaults(func=cmd_simulate)

    f = sub.add_parser("fit", help="analytical model and, if samples exist, fit scores")
    f.add_argument("--config", required=True)
    f.add_argument("--out")
    f.add_argument("--simulation", help="directory holding simulate output")
    f.set_defaults(func=cmd_fit)

    a = sub.add_parser("analyze", help="capacity and BER sweep")
    a.add_argument("--config", required=True)
    a.add_argument("--snr-db", required=True, metavar="LO:HI:STEP")
    a.add_argument("--model", action="append", help="model.json file (repeatable)")
    a.add_argument("--out")
    a.set_defaults(func=cmd_analyze)

    t = sub.add_parser("table1", help="all 16 rate/radius cells")
    t.add_argument("--config-dir", default="configs/table1")
    t.add_argument("--out", default="out/table1")
    t.add_argument("--seed", type=int)
    t.add_argument("--trials", type=int)
    t.add_argument("--exact-geometry", action="store_true")
    t.set_defaults(func=cmd_table1)
    return p


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    args.argv = argv
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ParameterError, OSError) as exc:
        print(f"bubblechan: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (BubbleChanError, ArithmeticError) as exc:
        print(f"bubblechan: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
