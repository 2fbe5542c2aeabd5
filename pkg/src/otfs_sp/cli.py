"""Command-line entry point: ``otfs-sp <subcommand> [--config FILE] ...``."""
import argparse
import csv
import logging
import sys
from dataclasses import replace

import numpy as np

from .bem import gce_basis, residual_mse
from .channel import generate_channel
from .exceptions import InvalidConfigError, InvalidInputError
from .harness import SimConfig, sweep
from .pilots import make_pilots


def _load(args, **overrides):
    cfg = SimConfig.from_yaml(args.config) if args.config else SimConfig()
    changes = dict(overrides)
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.trials is not None:
        changes["n_trials"] = args.trials
    if args.out is not None:
        changes["out"] = args.out
    if getattr(args, "workers", None):
        changes["workers"] = args.workers
    return replace(cfg, **changes)


def _progress(done, total):
    if done == total or done % max(1, total // 20) == 0:
        print(f"  {done}/{total} trials", file=sys.stderr)


def _run_sweep(cfg, quiet):
    result = sweep(cfg, progress=None if quiet else _progress)
    if not cfg.out:
        writer = csv.writer(sys.stdout)
        names = list(result.rows[0].__dataclass_fields__) if result.rows else []
        writer.writerow(names)
        for row in result.rows:
            writer.writerow([getattr(row, n) for n in names])
    for key, n in result.failures.items():
        if n:
            print(f"failed trials at {key}: {n}", file=sys.stderr)
    return 0


def cmd_simulate(args):
    cfg = _load(args, mode="convergence")
    if len(cfg.snr_db) != 1:
        cfg = replace(cfg, snr_db=cfg.snr_db[:1])
    return _run_sweep(cfg, args.quiet)


def cmd_ber_sweep(args):
    overrides = {"mode": "final"}
    if args.snr:
        overrides["snr_db"] = tuple(args.snr)
    return _run_sweep(_load(args, **overrides), args.quiet)


def cmd_pilot_design(args):
    cfg = _load(args)
    scheme = args.scheme or cfg.schemes[0]
    beta = args.beta or cfg.betas[0]
    rho_f = args.rho_f or cfg.rho_f[0]
    p = make_pilots(scheme, cfg.modem.M, cfg.modem.N, beta=beta, seed=cfg.seed, rho_f=rho_f,
                    n_taps=cfg.receiver.n_taps, sequence=cfg.pilot_sequence)
    fh = open(cfg.out, "w", newline="", encoding="utf-8") if cfg.out else sys.stdout
    try:
        writer = csv.writer(fh)
        writer.writerow(["index", "domain", "re", "im"])
        for domain, vec in (("dd", p.x_p_dd), ("time", p.x_p2), ("freq", p.x_p3)):
            for i, v in enumerate(vec):
                writer.writerow([i, domain, repr(float(v.real)), repr(float(v.imag))])
    finally:
        if fh is not sys.stdout:
            fh.close()
    print(f"# scheme={p.scheme} beta={p.beta} P={p.P} rho={p.rho!r} rho_f={p.rho_f!r}")
    return 0


def cmd_bem_fit(args):
    cfg = _load(args)
    qs = args.q or [1, 3, 5, 9]
    n = args.trials or 20
    M, N = cfg.modem.M, cfg.modem.N
    rng = np.random.SeedSequence(cfg.seed).spawn(n)
    channels = [generate_channel(cfg.channel, M, N, seed=s) for s in rng]
    rows = []
    for q in qs:
        basis = gce_basis(M * N, q, args.k_os)
        rows.append((q, args.k_os, float(np.mean([residual_mse(h, basis) for h in channels]))))
    fh = open(cfg.out, "w", newline="", encoding="utf-8") if cfg.out else sys.stdout
    try:
        writer = csv.writer(fh)
        writer.writerow(["Q", "K_os", "residual_mse"])
        for q, k, r in rows:
            writer.writerow([q, k, repr(r)])
    finally:
        if fh is not sys.stdout:
            fh.close()
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="otfs-sp",
        description="OTFS superimposed-pilot link simulator with message-passing reception.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log warnings and progress details")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="YAML file whose keys mirror SimConfig fields")
        p.add_argument("--seed", type=int, help="root seed")
        p.add_argument("--trials", type=int, help="Monte-Carlo trials per point")
        p.add_argument("--out", help="output CSV path (default: stdout)")
        return p

    p = common(sub.add_parser("simulate", help="per-iteration BER/MSE for one configuration"))
    p.add_argument("--workers", type=int, help="parallel worker processes")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_simulate)

    p = common(sub.add_parser("ber-sweep", help="converged BER/MSE over an SNR grid"))
    p.add_argument("--snr", type=float, nargs="+", help="SNR values in dB")
    p.add_argument("--workers", type=int, help="parallel worker processes")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_ber_sweep)

    p = common(sub.add_parser("pilot-design", help="dump a pilot set in all domains"))
    p.add_argument("--scheme", choices=["sp-dd", "sp-dd-d"])
    p.add_argument("--beta", type=int)
    p.add_argument("--rho-f", type=float)
    p.set_defaults(func=cmd_pilot_design)

    p = common(sub.add_parser("bem-fit", help="BEM least-squares residual versus Q"))
    p.add_argument("--q", type=int, nargs="+", help="BEM orders (odd)")
    p.add_argument("--k-os", type=int, default=2, help="oversampling factor")
    p.set_defaults(func=cmd_bem_fit)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (InvalidConfigError, InvalidInputError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
