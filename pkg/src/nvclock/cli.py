"""Command-line interface: ``nvclock <subcommand> [options]``.

Exit codes: 0 success, 2 configuration error, 3 domain error, 4 non-convergence.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
import warnings
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from . import clock_composer as cc
from . import pulse_engine as pe
from .config import config_hash, load_config
from .errors import ConfigError, ConvergenceError, DomainError
from .io import now_iso, read_csv_columns, write_csv, write_json, write_table
from .noise_stats import allan_deviation, fit_fringe
from .scenario import scenario_from_dict, sensitivity_sweep, strategy_comparison, run_scenario
from .spin_model import SpinConstants, approx_frequencies, transition_frequencies

EXIT_OK, EXIT_CONFIG, EXIT_DOMAIN, EXIT_CONVERGENCE = 0, 2, 3, 4


class _Run:
    """Collects outputs of one command and writes the manifest."""

    def __init__(self, args, cfg):
        self.args = args
        self.cfg = cfg
        self.out = Path(args.out_dir)
        self.outputs = []
        self.start = now_iso()

    def table(self, stem, columns):
        p = write_table(self.out / stem, columns, self.args.format)
        self.outputs.append(p.name)
        return p

    def json(self, name, obj):
        p = write_json(self.out / name, obj)
        self.outputs.append(p.name)
        return p

    def finish(self):
        manifest = {
            "tool": "nvclock",
            "version": __version__,
            "command": self.args.command,
            "config_hash": config_hash(self.cfg),
            "seed": self.cfg.get("seed"),
            "start": self.start,
            "end": now_iso(),
            "outputs": sorted(self.outputs),
        }
        write_json(self.out / "run_manifest.json", manifest)


def _constants(cfg):
    return SpinConstants.from_dict(cfg.get("constants") or {})


def _grid(spec, name):
    if isinstance(spec, dict):
        try:
            return np.linspace(float(spec["start"]), float(spec["stop"]), int(spec["n"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"bad {name} grid: {exc}") from exc
    if isinstance(spec, (list, tuple)):
        return np.asarray(spec, dtype=float)
    raise ConfigError(f"bad {name} grid")


def cmd_frequencies(args, cfg, run):
    c = _constants(cfg)
    T = args.temp if args.temp is not None else float(cfg["temperature_K"])
    if args.sweep:
        fields = np.linspace(args.sweep[0], args.sweep[1], int(args.sweep[2]))
    else:
        fields = [args.field if args.field is not None else float(cfg["field_G"])]
    cols = {k: [] for k in ("Bz_G", "f_plus", "f_minus", "f1", "f2", "d_half_sum", "q_half_sum",
                            "approx_f_plus", "approx_f_minus", "approx_f1", "approx_f2",
                            "approx_d_half_sum", "approx_q_half_sum")}
    for B in fields:
        ex = transition_frequencies(c, float(B), T)
        try:
            ap = approx_frequencies(c, float(B), T)
            av = (ap.f_plus, ap.f_minus, ap.f1, ap.f2, ap.d_half_sum_closed, ap.q_half_sum_closed)
        except DomainError:
            av = (math.nan,) * 6
        for k, v in zip(cols, (B, ex.f_plus, ex.f_minus, ex.f1, ex.f2, ex.d_half_sum, ex.q_half_sum) + av):
            cols[k].append(float(v))
    run.table("frequencies", cols)
    for i in range(len(cols["Bz_G"])):
        print(f"Bz={cols['Bz_G'][i]:.6g} G  T={T:.6g} K")
        for k in ("f_plus", "f_minus", "f1", "f2", "d_half_sum", "q_half_sum"):
            a = cols[f"approx_{k}"][i]
            print(f"  {k:<11} exact {cols[k][i]:>20.6f} Hz   approx {a:>20.6f} Hz")


def cmd_constants(args, cfg, run):
    c = _constants(cfg)
    out = {
        "alpha": cc.alpha_from_lambdas(c),
        "one_minus_alpha": 1.0 - cc.alpha_from_lambdas(c),
        "normalization_per_K": cc.normalization_constant(c),
        "lambda_D_minus_lambda_Q_per_K": c.lambda_D - c.lambda_Q,
        "lambdaD_lambdaQ_over_difference_per_K": c.lambda_D * c.lambda_Q / (c.lambda_D - c.lambda_Q),
        "second_order_combination_per_K": c.second_order_combination,
        "dD_dT_Hz_per_K": c.lambda_D * c.D0,
        "dQ_dT_Hz_per_K": c.lambda_Q * c.Q0,
    }
    run.json("constants.json", out)
    for k, v in out.items():
        print(f"{k:<40} {v:.10g}")


def _pulse_setup(cfg, args):
    pc = cfg["pulses"]
    c = _constants(cfg)
    if pc.get("tones"):
        fp, fs = (float(x) for x in pc["tones"])
    else:
        fq = transition_frequencies(c, float(cfg["field_G"]), float(cfg["temperature_K"]))
        target = pc.get("target", "Q")
        if target == "Q":
            fp, fs = fq.f1, fq.f2
        elif target == "D":
            fp, fs = fq.f_plus, fq.f_minus
        else:
            raise ConfigError(f"pulses.target must be 'D' or 'Q', got {target!r}")
    areas = [float(a) * float(pc.get("area_scale", 1.0)) for a in pc["areas"]]
    seq = pe.TTZFSSequence.from_areas(fp, fs, areas, prep_fidelity=float(pc.get("prep_fidelity", 1.0)),
                                      contrast=float(pc.get("contrast", 1.0)))
    scheme = pe.TTZFS8 if pc.get("phase_cycle") is None else pe.PhaseCycleScheme.from_list(pc["phase_cycle"])
    g = pc["tau_grid"]
    try:
        taus = float(g["start"]) + float(g["step"]) * np.arange(int(g["n"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad pulses.tau_grid: {exc}") from exc
    fwhm = float(args.fwhm if getattr(args, "fwhm", None) is not None else pc.get("fwhm", 0.0))
    return seq, scheme, taus, fwhm, int(pc.get("n_nodes", 64)), bool(pc.get("perfect_2pi", False))


def _scan(cfg, args, cycled):
    seq, scheme, taus, fwhm, n_nodes, perfect = _pulse_setup(cfg, args)
    perfect = perfect or getattr(args, "perfect_2pi", False)
    sig = pe.scan_signal(seq, taus, scheme if cycled else pe.SINGLE, fwhm=fwhm, n_nodes=n_nodes,
                         perfect_echo=perfect, workers=args.threads)
    return seq, taus, sig


def cmd_fringes(args, cfg, run):
    cycled = not args.single_phase
    seq, taus, sig = _scan(cfg, args, cycled)
    run.table("fringes", {"tau_s": taus, "value": sig})
    print(f"{taus.size} points, {'TTZFS-8' if cycled else 'single phase'}")


def cmd_spectrum(args, cfg, run):
    cycled = not args.single_phase
    seq, taus, sig = _scan(cfg, args, cycled)
    pc = cfg["pulses"]
    # Cycle weights are +-1/8, so the cycled sum is already on the single-sequence
    # scale; this is the same comparison as an unnormalised sum against 8x single.
    spec = pe.amplitude_spectrum(taus, sig, pc.get("window", "hann"), int(pc.get("zero_pad", 1)))
    run.table("spectrum", {"freq_hz": spec.freqs, "amplitude": spec.amplitude})
    wanted = seq.wanted_frequency
    levels = pe.suppression_db(spec, wanted, pe.unwanted_frequencies(seq.freq_p, seq.freq_s))
    run.json("suppression.json", {"wanted_hz": wanted, "levels_db": levels, "cycled": cycled})
    print(f"wanted component {wanted:.6f} Hz, peak amplitude {spec.peak(wanted):.6g}")
    for k, v in levels.items():
        print(f"  {k:<10} {v:8.1f} dB")
    print(f"worst unwanted level: {max(levels.values()):.1f} dB")


def _sample_fringe_path():
    return resources.files("nvclock").joinpath("data/sample_fringe_D.csv")


def cmd_fit(args, cfg, run):
    path = args.input or _sample_fringe_path()
    cols = read_csv_columns(path)
    try:
        tau, val = cols["tau_s"], cols["value"]
    except KeyError as exc:
        raise ConfigError(f"fit input needs tau_s and value columns ({exc})") from exc
    f_prior = args.f_prior if args.f_prior is not None else (cfg.get("fit") or {}).get("f_prior")
    fit = fit_fringe((tau, val), f_prior=f_prior)
    run.json("fit.json", fit.as_dict())
    for k, v in fit.as_dict().items():
        print(f"{k:<16} {v:.8g}")


def cmd_allan(args, cfg, run):
    cols = read_csv_columns(args.input)
    name = args.column or ("value" if "value" in cols else list(cols)[-1])
    if name not in cols:
        raise ConfigError(f"column {name!r} not in {args.input}")
    dt = args.dt if args.dt is not None else float(cfg["allan"].get("dt", 1.0))
    taus = cfg["allan"].get("taus")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        curve = allan_deviation(cols[name], dt, taus)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    run.table("allan", {"tau_s": curve.taus, "sigma": curve.sigmas, "n": curve.n_samples})
    for t, s in zip(curve.taus, curve.sigmas):
        print(f"{t:>12.6g} s  {s:.6e}")


def cmd_clock_run(args, cfg, run):
    sc = scenario_from_dict(cfg, mode=args.mode, seed=args.seed)
    if args.n_cycles is not None:
        sc = sc.with_(n_cycles=args.n_cycles)
    taus = cfg["allan"].get("taus")
    if args.compare:
        cmp_cfg = cfg.get("compare") or {}
        from .scenario import noise_list

        therm = noise_list(cmp_cfg.get("thermometer_noise")) if cmp_cfg.get("thermometer_noise") is not None else None
        res = strategy_comparison(sc, float(cmp_cfg.get("stabilization_factor", 0.01)),
                                  float(cmp_cfg.get("cryo_factor", 15.0)), therm, taus, workers=args.threads)
        for name, (ts, curve) in res.items():
            run.table(f"allan_{name}", {"tau_s": curve.taus, "sigma": curve.sigmas, "n": curve.n_samples})
        first = next(iter(res.values()))[1]
        print("tau_s".rjust(12) + "".join(n.rjust(26) for n in res))
        for i, t in enumerate(first.taus):
            print(f"{t:12.6g}" + "".join(f"{res[n][1].sigmas[i]:26.6e}" for n in res))
        return
    ts = run_scenario(sc)
    curve = ts.allan(taus)
    run.table("timeseries", ts.columns())
    run.table("allan", {"tau_s": curve.taus, "sigma": curve.sigmas, "n": curve.n_samples})
    print(f"mode {sc.mode}, {sc.n_cycles} cycles, {int(ts.flagged.sum())} flagged")
    for t, s in zip(curve.taus, curve.sigmas):
        print(f"{t:>12.6g} s  {s:.6e}")


def cmd_budget(args, cfg, run):
    if args.input:
        import csv

        try:
            with open(args.input, newline="", encoding="utf-8") as fh:
                rows = cc.budget_rows_from_records(csv.DictReader(fh))
        except OSError as exc:
            raise ConfigError(f"cannot read {args.input}: {exc}") from exc
    elif (cfg.get("budget") or {}).get("rows"):
        rows = cc.budget_rows_from_records(cfg["budget"]["rows"])
    else:
        rows = cc.DEFAULT_BUDGET
    entries = cc.budget_table(rows)
    cols = {
        "parameter": [e.parameter for e in entries],
        "target": [e.target for e in entries],
        "instability": [float(e.instability) for e in entries],
        "unit": [e.unit for e in entries],
        "sensitivity_per_unit": [float(e.sensitivity) for e in entries],
        "contribution": [float(e.contribution) for e in entries],
        "upper_bound": [int(e.upper_bound) for e in entries],
    }
    run.table("budget", cols)
    for e in entries:
        mark = "<" if e.upper_bound else " "
        print(f"{e.parameter:<12} {e.target:<4} {float(e.instability):>8g} {e.unit:<3} x {float(e.sensitivity):.3g} "
              f"= {mark}{float(e.contribution):.3g}")
    for k, v in cc.budget_totals(entries).items():
        print(f"total {k:<4} {v:.3g}")


def cmd_sweep(args, cfg, run):
    sc = scenario_from_dict(cfg, seed=args.seed)
    sw = cfg.get("sweep") or {}
    parameter = args.parameter or sw.get("parameter", "temperature")
    grid = np.linspace(*args.grid[:2], int(args.grid[2])) if args.grid else _grid(sw.get("grid"), "sweep")
    res = sensitivity_sweep(sc, parameter, grid)
    run.table("sweep", res.columns())
    run.json("sweep_slopes.json", {"parameter": parameter, "slope": res.slope, "curvature": res.curvature,
                                   "method": res.method, "flags": res.flags})
    for k in ("D", "Q", "psi"):
        print(f"{k:<4} slope {res.slope[k]: .6e}  curvature {res.curvature[k]: .6e}  "
              f"method {res.method[k]}  flags {','.join(res.flags[k]) or '-'}")


def build_parser():
    p = argparse.ArgumentParser(prog="nvclock", description="NV-center composite clock simulator")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="scenario YAML file")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--out-dir", default=".", help="directory for output files")
    common.add_argument("--threads", type=int, default=1, help="maximum worker threads")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("frequencies", parents=[common], help="exact and perturbative transition frequencies")
    s.add_argument("--field", type=float, help="axial field (G)")
    s.add_argument("--temp", type=float, help="temperature (K)")
    s.add_argument("--sweep", type=float, nargs=3, metavar=("START", "STOP", "N"), help="field sweep")
    s.set_defaults(func=cmd_frequencies)

    s = sub.add_parser("constants", parents=[common], help="composite coefficients for audit")
    s.set_defaults(func=cmd_constants)

    for name, func, hlp in (("spectrum", cmd_spectrum, "amplitude spectrum of a tau scan"),
                            ("fringes", cmd_fringes, "tau-scan fringes")):
        s = sub.add_parser(name, parents=[common], help=hlp)
        g = s.add_mutually_exclusive_group()
        g.add_argument("--single-phase", action="store_true", help="one phase configuration")
        g.add_argument("--cycled", action="store_true", help="TTZFS-8 weighted sum (default)")
        s.add_argument("--perfect-2pi", action="store_true", help="keep the echo pulse at exactly 2pi")
        s.add_argument("--fwhm", type=float, help="relative FWHM of the Rabi distribution")
        s.set_defaults(func=func)

    s = sub.add_parser("fit", parents=[common], help="fit a fringe CSV (tau_s,value)")
    s.add_argument("input", nargs="?", help="fringe CSV; defaults to the shipped sample")
    s.add_argument("--f-prior", type=float, help="initial frequency (Hz)")
    s.set_defaults(func=cmd_fit)

    s = sub.add_parser("clock-run", parents=[common], help="run a clock scenario")
    s.add_argument("--mode", choices=("open_loop", "composite", "D_only", "Q_only", "thermometer_compensated"))
    s.add_argument("--compare", action="store_true", help="run the strategy comparison")
    s.add_argument("--n-cycles", type=int)
    s.set_defaults(func=cmd_clock_run)

    s = sub.add_parser("allan", parents=[common], help="overlapping Allan deviation of a CSV column")
    s.add_argument("input")
    s.add_argument("--column")
    s.add_argument("--dt", type=float)
    s.set_defaults(func=cmd_allan)

    s = sub.add_parser("budget", parents=[common], help="instability budget")
    s.add_argument("--input", help="CSV with parameter,instability,unit,sens_D,sens_Q,sens_psi")
    s.set_defaults(func=cmd_budget)

    s = sub.add_parser("sweep", parents=[common], help="sensitivity sweep")
    s.add_argument("--parameter", choices=("temperature", "Bz", "tau_D", "tau_Q", "prep_fidelity", "pulse_area_scale"))
    s.add_argument("--grid", type=float, nargs=3, metavar=("START", "STOP", "N"))
    s.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.threads is not None and args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        overrides = {"seed": args.seed} if args.seed is not None else None
        cfg = load_config(args.config, overrides)
        run = _Run(args, cfg)
        args.func(args, cfg, run)
        run.finish()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConvergenceError as exc:
        print(f"no convergence: {exc}", file=sys.stderr)
        if exc.diagnostics:
            print(json.dumps(exc.diagnostics, default=str), file=sys.stderr)
        return EXIT_CONVERGENCE
    except DomainError as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
