"""Command-line entry point: ``eitcorr {scan,point,oracle,fit}``.

Exit status: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import tempfile
from pathlib import Path

import numpy as np

from .bloch import DegenerateInputError, build_bloch_system, dc_transmission, steady_state
from .oracle import EstimatorConfig, estimate_spectra, max_step, simulate_ensemble, write_trajectories_csv
from .params import ParameterError, SystemParams, mhz
from .scan import (
    ConfigError,
    LinewidthError,
    central_peak_width,
    column,
    export,
    fit_linewidth,
    parse_config,
    read_config_file,
    read_records,
    run_scan,
)
from .spectra import g2_zero, noise_spectra

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

log = logging.getLogger("eitcorr")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _system_flags(p: argparse.ArgumentParser):
    g = p.add_argument_group("system")
    g.add_argument("--gamma-d-khz", type=float, help="ground decoherence rate (kHz)")
    g.add_argument("--gamma-bar-mhz", type=float, help="laser linewidth (MHz)")
    g.add_argument("--rabi1-gamma", type=float, help="Omega_1 in units of Gamma")
    g.add_argument("--rabi2-gamma", type=float, help="Omega_2 in units of Gamma")
    g.add_argument("--kappa", type=float, nargs=2, metavar=("K1", "K2"), help="thin-sample couplings")


def _system_entries(args) -> dict[str, str]:
    out = {}
    for key in ("gamma_d_khz", "gamma_bar_mhz", "rabi1_gamma", "rabi2_gamma"):
        v = getattr(args, key, None)
        if v is not None:
            out[key] = repr(v)
    if getattr(args, "kappa", None):
        out["kappa1"], out["kappa2"] = repr(args.kappa[0]), repr(args.kappa[1])
    return out


def _point_params(args) -> SystemParams:
    e = _system_entries(args)
    kw = {k: float(v) for k, v in e.items()}
    p = SystemParams.from_mhz(delta1_mhz=args.delta1_mhz, delta_mhz=args.delta_mhz, **kw)
    return p.with_power_scale(args.power_scale)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="eitcorr", description="Phase-noise to intensity-correlation spectra of an EIT Lambda system.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("scan", help="two-photon-detuning sweep to a table")
    s.add_argument("--config", help="key = value configuration file")
    s.add_argument("--delta1-mhz", type=float, nargs="+")
    s.add_argument("--delta-range-mhz", type=float, nargs=3, metavar=("START", "STOP", "COUNT"))
    s.add_argument("--analysis-mhz", type=float, nargs="+")
    s.add_argument("--power-scale", type=float, nargs="+")
    s.add_argument("--order", choices=("full", "lowest"))
    s.add_argument("--oracle", action="store_true", help="add Monte-Carlo C at every point")
    s.add_argument("--oracle-trajectories", type=int)
    s.add_argument("--oracle-duration-us", type=float)
    s.add_argument("--seed", type=int)
    s.add_argument("--out")
    s.add_argument("--format", choices=("csv", "json"))
    s.add_argument("--workers", type=int, default=1)
    _system_flags(s)

    for name, helptext in (("point", "full decomposition at one point"), ("oracle", "Monte-Carlo validation run")):
        q = sub.add_parser(name, help=helptext)
        q.add_argument("--delta1-mhz", type=float, default=0.2)
        q.add_argument("--delta-mhz", type=float, default=0.0, help="two-photon detuning (MHz)")
        q.add_argument("--analysis-mhz", type=float, default=2.0)
        q.add_argument("--power-scale", type=float, default=1.0)
        q.add_argument("--order", choices=("full", "lowest"), default="full")
        q.add_argument("--out")
        _system_flags(q)
        if name == "oracle":
            q.add_argument("--trajectories", type=int, default=200)
            q.add_argument("--duration-us", type=float, default=2000.0)
            q.add_argument("--sample-every", type=int, default=4)
            q.add_argument("--seed", type=int, default=0)
            q.add_argument("--dump", help="write raw (t, I1, I2) trajectories to this CSV")

    f = sub.add_parser("fit", help="linewidth of a curve in an exported table")
    f.add_argument("table")
    f.add_argument("--column", default="c_analytic")
    f.add_argument("--kind", choices=("peak", "dip"), default="peak")
    f.add_argument("--method", choices=("central", "global"), default="central",
                   help="central: peak near delta=0 cut at its flanking minima; global: whole curve")
    f.add_argument("--delta1-mhz", type=float)
    f.add_argument("--analysis-mhz", type=float)
    f.add_argument("--power-scale", type=float)
    return ap


def _emit(payload, out):
    text = json.dumps(payload, indent=1)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _cmd_scan(args) -> int:
    entries = {}
    if args.config:
        entries.update(read_config_file(args.config))
    entries.update(_system_entries(args))
    if args.delta1_mhz:
        entries["delta1_mhz"] = " ".join(map(repr, args.delta1_mhz))
    if args.delta_range_mhz:
        entries["delta_range_mhz"] = " ".join(map(repr, args.delta_range_mhz))
    if args.analysis_mhz:
        entries["analysis_mhz"] = " ".join(map(repr, args.analysis_mhz))
    if args.power_scale:
        entries["power_scale"] = " ".join(map(repr, args.power_scale))
    if args.order:
        entries["order"] = args.order
    if args.oracle:
        entries["oracle"] = "true"
    if args.oracle_trajectories is not None:
        entries["oracle_trajectories"] = str(args.oracle_trajectories)
    if args.oracle_duration_us is not None:
        entries["oracle_duration_us"] = repr(args.oracle_duration_us)
    if args.seed is not None:
        entries["seed"] = str(args.seed)
    if args.out:
        entries["out"] = args.out
    if args.format:
        entries["format"] = args.format
    cfg = parse_config(entries)
    records = run_scan(cfg, workers=args.workers)
    if cfg.out:
        export(records, cfg.out, cfg.fmt)
        log.info("wrote %d records to %s", len(records), cfg.out)
    else:
        with tempfile.TemporaryDirectory() as tmp:
            p = Path(tmp) / f"scan.{cfg.fmt}"
            export(records, p, cfg.fmt)
            sys.stdout.write(p.read_text())
    return EXIT_OK


def _jsonable(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def _cmd_point(args) -> int:
    params = _point_params(args)
    sys_ = build_bloch_system(params)
    ss = steady_state(sys_)
    dec = noise_spectra(sys_, ss, params, mhz(args.analysis_mhz), order=args.order)
    t1, t2 = dc_transmission(ss, params)
    try:
        g2 = g2_zero(ss)
    except ArithmeticError:
        g2 = None
    payload = {
        "delta1_mhz": args.delta1_mhz, "delta_mhz": args.delta_mhz, "analysis_mhz": args.analysis_mhz,
        "order": dec.order, "p1": [ss.p1.real, ss.p1.imag], "p2": [ss.p2.real, ss.p2.imag],
        "populations": list(ss.populations), "t1": t1, "t2": t2, "g2": g2,
        "s11": dec.s11, "s22": dec.s22, "s12": dec.s12, "c": dec.c,
        "pi": {"im": dec.pi_im, "re": dec.pi_re, "ri": dec.pi_ri, "ir": dec.pi_ir},
        "nu": {"im": dec.nu_im, "re": dec.nu_re, "ri": dec.nu_ri, "ir": dec.nu_ir},
        "c1": dec.extra_c1, "alpha_c": dec.alpha_c, "alpha_i2": dec.alpha_i2,
        "beta_c": dec.beta_c, "beta_i1": dec.beta_i1, "degenerate": dec.degenerate,
    }
    _emit({k: _jsonable(v) for k, v in payload.items()}, args.out)
    if dec.c is None and not dec.degenerate and params.gamma_bar > 0:
        log.error("correlation undefined at this point")
        return EXIT_NUMERIC
    return EXIT_OK


def _cmd_oracle(args) -> int:
    params = _point_params(args)
    omega = mhz(args.analysis_mhz)
    dt = max_step(params, omega)
    ens = simulate_ensemble(params, dt, args.duration_us, args.trajectories, base_seed=args.seed,
                            sample_every=args.sample_every, omega_max=omega)
    est = estimate_spectra(ens, EstimatorConfig.for_frequencies([omega], ens.sample_dt))
    sys_ = build_bloch_system(params)
    ss = steady_state(sys_)
    full = noise_spectra(sys_, ss, params, omega, "full")
    low = noise_spectra(sys_, ss, params, omega, "lowest")
    if args.dump:
        write_trajectories_csv(ens, args.dump)
    c = float(est.c[0])
    payload = {
        "delta1_mhz": args.delta1_mhz, "delta_mhz": args.delta_mhz, "analysis_mhz": args.analysis_mhz,
        "trajectories": ens.n_traj, "duration_us": ens.duration, "dt_us": ens.dt, "seed": args.seed,
        "segments": est.n_segments,
        "c_oracle": c, "c_oracle_se": float(est.c_se[0]),
        "s11": float(est.s11[0]), "s22": float(est.s22[0]), "s12": float(est.s12[0]),
        "s11_se": float(est.s11_se[0]), "s22_se": float(est.s22_se[0]), "s12_se": float(est.s12_se[0]),
        "c_full": full.c, "c_lowest": low.c,
    }
    _emit({k: _jsonable(v) for k, v in payload.items()}, args.out)
    return EXIT_OK if math.isfinite(c) else EXIT_NUMERIC


def _cmd_fit(args) -> int:
    records = read_records(args.table)
    if not records:
        raise ConfigError(f"{args.table} holds no records")
    sel = records
    for attr, want in (("delta1_mhz", args.delta1_mhz), ("analysis_mhz", args.analysis_mhz),
                       ("power_scale", args.power_scale)):
        if want is not None:
            sel = [r for r in sel if r.delta1_mhz is not None and math.isclose(getattr(r, attr), want)]
    keys = {(r.delta1_mhz, r.analysis_mhz, r.power_scale) for r in sel}
    if len(keys) != 1:
        raise ConfigError(f"table holds {len(keys)} curves; select one with --delta1-mhz/--analysis-mhz/--power-scale")
    if args.column not in {f for f in records[0].__dataclass_fields__}:
        raise ConfigError(f"unknown column {args.column!r}")
    x = column(sel, "delta_mhz")
    y = column(sel, args.column)
    if not np.all(np.isfinite(y)):
        raise LinewidthError("curve contains undefined cells")
    if args.method == "central":
        yy = y if args.kind == "peak" else -y
        width = central_peak_width(x, yy)
    else:
        width = fit_linewidth(x, y, args.kind)
    print(json.dumps({"column": args.column, "kind": args.kind, "method": args.method,
                      "fwhm_mhz": width, "fwhm_khz": 1e3 * width}))
    return EXIT_OK


_COMMANDS = {"scan": _cmd_scan, "point": _cmd_point, "oracle": _cmd_oracle, "fit": _cmd_fit}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, ParameterError, FileNotFoundError) as exc:
        print(f"eitcorr: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ArithmeticError, LinewidthError, DegenerateInputError, np.linalg.LinAlgError) as exc:
        print(f"eitcorr: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"eitcorr: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
