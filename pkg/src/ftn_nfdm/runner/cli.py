"""Command line: ``ftn-nfdm {run,figures,check}``."""

from __future__ import annotations

import argparse
import os
import sys

from ..errors import FtnNfdmError
from ..params import guard_interval, normalized_se
from ..rxdsp import ici_matrix
from .config import default_config, load_config
from .figures import emit_figure_data
from .pipeline import StageFailure, run_sweep, write_rows

FIGURE_KINDS = ("fig1", "fig2a", "fig4b")


def _load(args):
    cfg = load_config(args.config) if args.config else default_config()
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    if args.mode == "nfdm":
        cfg = cfg.nfdm_baseline()
    elif args.mode == "ftn" and cfg.signal.compression_alpha == 1:
        if not cfg.figure_alphas:
            raise SystemExit("--mode ftn needs alpha < 1 or sweep.figure_alphas")
        cfg = cfg.with_system(cfg.figure_alphas[-1])
    return cfg


def _progress(done, total):
    print(f"\r{done}/{total} chunks", end="" if done < total else "\n", file=sys.stderr)


def cmd_run(args):
    cfg = _load(args)
    os.makedirs(args.out, exist_ok=True)
    res = run_sweep(cfg, threads=args.threads, progress=None if args.quiet else _progress)
    path = os.path.join(args.out, f"results_{cfg.system_mode}_a{cfg.signal.compression_alpha:g}.csv")
    write_rows(path, res.rows)
    fails = [f for a in sorted(res.failures) for f in res.failures[a]]
    if fails:
        fpath = os.path.join(args.out, "failures.csv")
        write_rows(fpath, [f.__dict__ for f in fails], tuple(StageFailure.__dataclass_fields__))
    print(f"{'A':>6} {'P [dBm]':>8} {'BER':>10} {'Q [dB]':>7} {'Q est':>6} {'EVM %':>6} {'lost':>4}")
    for r in res:
        print(
            f"{r.amplitude:6.3f} {r.avg_power_dbm:8.2f} {r.ber:10.3e} "
            f"{r.q_db:7.2f} {r.q_est_db:6.2f} {r.evm_pct:6.2f} {r.n_failed:4d}"
        )
    print(f"wrote {path}")
    return 0


def cmd_figures(args):
    cfg = _load(args)
    kinds = FIGURE_KINDS if args.kind == "all" else (args.kind,)
    for kind in kinds:
        for p in emit_figure_data(kind, cfg, args.out, threads=args.threads):
            print(f"wrote {p}")
    return 0


def cmd_check(args):
    cfg = _load(args)
    s, f = cfg.signal, cfg.fiber
    gi = guard_interval(s.bandwidth_B, f.beta2, f.total_length_m, s.pdc_enabled)
    print(f"config digest       {cfg.digest()}")
    print(f"mode                {cfg.system_mode} (alpha {s.compression_alpha:g}, N {s.n_subcarriers_N})")
    print(f"layout SE           {s.se:.6g} symbol/s/Hz")
    print(f"net rate            {s.net_rate / 1e9:.6g} Gb/s")
    print(f"guard interval      {s.guard_TGI * 1e9:.6g} ns configured, {gi * 1e9:.4g} ns estimated")
    se_b = normalized_se(s.n_subcarriers_N, s.compression_alpha, s.bandwidth_B, f.beta2,
                         f.total_length_m, s.pdc_enabled)
    print(f"SE upper bound      {se_b:.4g} symbol/s/Hz")
    cond = ici_matrix(s.n_subcarriers_N, s.compression_alpha).condition_number()
    print(f"ICI condition       {cond:.4g}")
    print(f"link                {f.n_spans} x {f.span_length:g} km, beta2 {f.beta2:.4g} s^2/m")
    print("config OK")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="ftn-nfdm", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="configuration file (default: built-in paper setup)")
        sp.add_argument("--seed", type=int, help="override sweep.seed")
        sp.add_argument("--mode", choices=("nfdm", "ftn"),
                        help="nfdm: alpha=1 baseline with slicing; ftn: compressed system")
        sp.add_argument("--threads", type=int, default=1, help="worker processes")
        sp.add_argument("--out", default="results", help="output directory")

    r = sub.add_parser("run", help="Monte-Carlo power sweep")
    common(r)
    r.add_argument("--quiet", action="store_true")
    r.set_defaults(func=cmd_run)

    fg = sub.add_parser("figures", help="emit figure CSV data")
    common(fg)
    fg.add_argument("--kind", choices=FIGURE_KINDS + ("all",), default="all")
    fg.set_defaults(func=cmd_figures)

    c = sub.add_parser("check", help="validate config and report SE/GI")
    common(c)
    c.set_defaults(func=cmd_check)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FtnNfdmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
