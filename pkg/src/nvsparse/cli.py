"""Command-line entry point: ``nvsparse <command> [options]``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure, 4 I/O error.
"""
import argparse
from concurrent.futures import ProcessPoolExecutor
import logging
import math
import os
import sys

import numpy as np
from scipy.linalg import LinAlgError

from . import __version__
from . import fields as fl
from . import io
from .magnetometry import SensitivityReport, default_b_grid, first_zero_field, ideal_curve, sensitivity
from .metrics import METRIC_KEYS
from .pipeline import (PRESETS_VERSION, ConfigError, ExperimentConfig, measurement_model,
                       optimization_grid, reconstruct, repetition_seed, run_once, sense, truth_map)
from .pulses import GateSpec, ensemble_objective, fidelities, optimize_pm

log = logging.getLogger("nvsparse")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4

# slopes per nT and the single-shot time used to quote sensitivities at N = 16
QUOTED_SLOPES = {"rect": 0.00012, "pm": 0.00025}
QUOTED_T_S = 128e-6
DEFAULT_N_VALUES = (25, 36, 64, 81, 100)


class Outputs:
    """Collects written files so the manifest can list their digests."""

    def __init__(self, root):
        self.root = io.ensure_dir(root)
        self.files = []

    def path(self, name):
        self.files.append(name)
        return os.path.join(self.root, name)

    def manifest(self, command, cfg):
        doc = {
            "command": command,
            "config": cfg.data,
            "config_hash": cfg.hash,
            "seed": cfg.seed,
            "presets_version": PRESETS_VERSION,
            "package_version": __version__,
            "files": {f: io.file_sha256(os.path.join(self.root, f)) for f in sorted(self.files)},
        }
        io.write_json(os.path.join(self.root, f"{command}.manifest.json"), doc)


# ------------------------------------------------------------------ commands


def cmd_optimize_pulse(cfg, out, args):
    opt = cfg.data["optimize"]
    budget = opt["budget"] if args.budget is None else args.budget
    grid = optimization_grid(cfg)
    initial = cfg.pm_params()
    res = optimize_pm(initial, grid, budget=budget, seed=cfg.seed, restarts=opt["restarts"],
                      jitter=opt["jitter"], dt=cfg.data["sequence"]["dt_ns"])
    rect = GateSpec("X", "rect", t_pulse=cfg.data["sequence"]["t_pulse_ns"])
    f_rect = ensemble_objective(rect, grid)
    deltas, weights = grid
    fr = fidelities(rect, deltas)
    fi = fidelities(GateSpec("X", initial), deltas)
    fo = fidelities(GateSpec("X", res.params), deltas)
    io.write_json(out.path("pm_params.json"), res.params.to_dict())
    io.write_csv(out.path("fidelity_table.csv"),
                 ["delta_rad_per_ns", "weight", "f_rect", "f_pm_initial", "f_pm_optimized"],
                 zip(deltas, weights, fr, fi, fo))
    io.write_json(out.path("objective_report.json"), {
        "objective_rect": f_rect,
        "objective_pm_initial": res.initial_objective,
        "objective_pm_optimized": res.objective,
        "improvement_over_rect": res.objective - f_rect,
        "improved": res.improved,
        "warning": None if res.improved else "no improvement over initial parameters",
        "n_evals": res.n_evals,
        "budget": budget,
        "history": [list(h) for h in res.history],
    })


def cmd_characterize(cfg, out, args):
    ch = cfg.data["characterize"]
    sigma = cfg.data["noise"]["readout_sigma"]
    report = {"per_blocks": {}, "quoted": {}}
    for n_blocks in ch["n_blocks"]:
        entry = {}
        for kind in ("rect", "pm"):
            sensor = cfg.sensor(kind, n_blocks)
            curve = sensor.response_curve(default_b_grid(sensor.t_total, ch["b_points"]))
            curve.to_csv(out.path(f"response_N{n_blocks}_{kind}.csv"))
            rep = SensitivityReport.from_curve(curve, sigma)
            entry[kind] = dict(rep.to_dict(), contrast=curve.contrast)
        entry["eta_ratio_rect_over_pm"] = entry["rect"]["eta_nT_per_sqrtHz"] / entry["pm"]["eta_nT_per_sqrtHz"]
        report["per_blocks"][str(n_blocks)] = entry
    for kind, k in QUOTED_SLOPES.items():
        report["quoted"][kind] = {"k_per_nT": k, "T_s": QUOTED_T_S,
                                  "eta_nT_per_sqrtHz": sensitivity(sigma, k, QUOTED_T_S)}
    # fringe: population against accumulated ideal phase at a long sequence
    nf = ch["fringe_blocks"]
    t_total = cfg.sequence("rect", nf).total_time
    b = np.linspace(0.0, 2.0 * first_zero_field(t_total), ch["fringe_points"])
    cols = {kind: cfg.sensor(kind, nf).mean_population(b) for kind in ("rect", "pm")}
    phase = math.pi * b / first_zero_field(t_total)
    io.write_csv(out.path(f"fringe_N{nf}.csv"), ["B_nT", "phase_rad", "P0_ideal", "P0_rect", "P0_pm"],
                 zip(b, phase, ideal_curve(b, t_total), cols["rect"], cols["pm"]))
    report["fringe"] = {"n_blocks": nf,
                        "contrast_rect": float(np.ptp(cols["rect"])),
                        "contrast_pm": float(np.ptp(cols["pm"]))}
    io.write_json(out.path("sensitivity.json"), report)


def cmd_sense(cfg, out, args):
    model = measurement_model(cfg)
    truth = truth_map(cfg)
    samples, refs = sense(cfg, model, truth)
    io.write_pgm(out.path("truth.pgm"), truth.values)
    io.write_csv(out.path("truth.csv"), ["x_index", "y_index", "value"],
                 ((j, i, truth.values[i, j]) for i in range(truth.height) for j in range(truth.width)))
    io.write_csv(out.path("samples.csv"), ["x", "y", "value", "true_value", "warning"],
                 ((c[0], c[1], v, t, "clamped" if k else "")
                  for c, v, t, k in zip(samples.coords, samples.values, samples.true_values, samples.clamped)))
    io.write_csv(out.path("references.csv"), ["x", "y", "nominal", "measured", "warning"],
                 ((c[0], c[1], n, m, "clamped" if k else "")
                  for c, n, m, k in zip(refs.coords, refs.nominal, refs.measured, refs.clamped)))
    io.write_json(out.path("measurement_model.json"), {
        "b_min_nT": model.b_min, "b_max_nT": model.b_max, "b_pi_nT": model.b_pi,
        "t_total_ns": model.t_total, "readout_sigma": model.readout_sigma,
        "strategy": samples.strategy, "n": len(samples.values),
        "n_clamped": int(np.sum(samples.clamped)) + int(np.sum(refs.clamped)),
    })


def _read_samples(folder):
    rows = io.read_csv(os.path.join(folder, "samples.csv"))
    ref_rows = io.read_csv(os.path.join(folder, "references.csv"))
    if len(rows) < 2:
        raise FloatingPointError("need at least two samples to reconstruct")
    coords = np.array([[float(r["x"]), float(r["y"])] for r in rows])
    samples = fl.SampleSet(coords, np.array([float(r["value"]) for r in rows]),
                           true_values=np.array([float(r["true_value"]) for r in rows]))
    refs = fl.ReferenceSet(np.array([[float(r["x"]), float(r["y"])] for r in ref_rows]),
                           np.array([float(r["nominal"]) for r in ref_rows]),
                           np.array([float(r["measured"]) for r in ref_rows]))
    return samples, refs


def cmd_reconstruct(cfg, out, args):
    samples, refs = _read_samples(args.input or out.root)
    truth = truth_map(cfg)
    rec = reconstruct(cfg, samples, refs, truth)
    io.write_pgm(out.path("reconstruction.pgm"), rec.prediction.values)
    io.write_json(out.path("model.json"), rec.model.to_dict())
    io.write_json(out.path("metrics.json"), {
        "calibration": cfg.data["calibration"],
        "mabe": rec.metrics.to_dict(),
        "nearest_neighbor": rec.baseline.to_dict(),
        "degenerate": rec.model.degenerate,
    })


def _sweep_job(job):
    cfg, model, setting, rep, seed, variable = job
    kw = {variable: setting}
    try:
        return setting, rep, seed, "ok", run_once(cfg, model, seed, **kw).as_row()
    except (ValueError, FloatingPointError, LinAlgError) as exc:
        return setting, rep, seed, f"error: {exc}", [math.nan] * len(METRIC_KEYS)


def cmd_sweep(cfg, out, args):
    sw = cfg.data["sweep"]
    variable = args.variable or sw["variable"]
    if variable == sw["variable"]:
        values = sw["values"]
    else:
        values = list(fl.STRATEGIES) if variable == "strategy" else list(DEFAULT_N_VALUES)
    if variable == "strategy":
        bad = [v for v in values if v not in fl.STRATEGIES]
        if bad:
            raise ConfigError(f"unknown strategies in sweep: {bad}")
    reps = args.repetitions or sw["repetitions"]
    model = measurement_model(cfg)
    jobs = [(cfg, model, v, r, repetition_seed(cfg.seed, i, r), variable)
            for i, v in enumerate(values) for r in range(reps)]
    workers = args.workers or sw["workers"]
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            results = list(ex.map(_sweep_job, jobs))
    else:
        results = [_sweep_job(j) for j in jobs]
    header = [variable, "repetition", "seed", "status", *METRIC_KEYS, *(k + "_std" for k in METRIC_KEYS)]
    rows = []
    for v in values:
        mine = [r for r in results if r[0] == v]
        rows += [[v, rep, seed, status, *vals, *[""] * len(METRIC_KEYS)] for v, rep, seed, status, vals in mine]
        ok = np.array([r[4] for r in mine if r[3] == "ok"], dtype=float)
        if ok.size:
            mean = [_agg(ok[:, k], np.mean) for k in range(ok.shape[1])]
            std = [_agg(ok[:, k], np.std) for k in range(ok.shape[1])]
        else:
            mean = std = [math.nan] * len(METRIC_KEYS)
        rows.append([v, "aggregate", "", f"ok {len(ok)}/{len(mine)}", *mean, *std])
    io.write_csv(out.path(f"sweep_{variable}.csv"), header, rows)


def _agg(col, fn):
    # PSNR can be +inf for a perfect reconstruction; keep it out of the mean
    finite = col[np.isfinite(col)]
    return float(fn(finite)) if finite.size else math.inf


COMMANDS = {
    "optimize-pulse": cmd_optimize_pulse,
    "characterize": cmd_characterize,
    "sense": cmd_sense,
    "reconstruct": cmd_reconstruct,
    "sweep": cmd_sweep,
}


# ------------------------------------------------------------------ parsing


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON experiment config")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--strategy", choices=fl.STRATEGIES)
    common.add_argument("--n", type=int, help="number of sampling points")
    common.add_argument("--calibration", choices=("none", "bias", "proportional"))
    common.add_argument("--field-preset", choices=sorted(fl.PRESETS))
    common.add_argument("--pulse", choices=("rect", "pm"))
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="nvsparse", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    op = sub.add_parser("optimize-pulse", parents=[common], help="optimize the PM pi pulse")
    op.add_argument("--budget", type=int, help="objective evaluations (0 returns the initial set)")
    sub.add_parser("characterize", parents=[common], help="response curves and sensitivity")
    sub.add_parser("sense", parents=[common], help="simulate measurements at sample points")
    rc = sub.add_parser("reconstruct", parents=[common], help="kriging reconstruction and metrics")
    rc.add_argument("--in", dest="input", help="folder with samples.csv (default: --out)")
    sw = sub.add_parser("sweep", parents=[common], help="repeated reconstructions over n or strategy")
    sw.add_argument("--variable", choices=("n", "strategy"))
    sw.add_argument("--repetitions", type=int)
    sw.add_argument("--workers", type=int)
    return p


def overrides_from_args(args):
    o = {}
    if args.seed is not None:
        o["seed"] = args.seed
    if args.strategy is not None or args.n is not None:
        o["sampling"] = {}
        if args.strategy is not None:
            o["sampling"]["strategy"] = args.strategy
        if args.n is not None:
            o["sampling"]["n"] = args.n
    if args.calibration is not None:
        o["calibration"] = args.calibration
    if args.field_preset is not None:
        o["field"] = {"preset": args.field_preset}
    if args.pulse is not None:
        o["sequence"] = {"pulse": args.pulse}
    return o


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="nvsparse: %(levelname)s: %(message)s")
    try:
        cfg = ExperimentConfig.load(args.config, overrides_from_args(args))
        out = Outputs(args.out)
        COMMANDS[args.command](cfg, out, args)
        out.manifest(args.command, cfg)
    except ConfigError as exc:
        print(f"nvsparse: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"nvsparse: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (FloatingPointError, LinAlgError, ValueError) as exc:
        print(f"nvsparse: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
