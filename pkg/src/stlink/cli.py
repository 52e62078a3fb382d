"""``stlink`` command line.

Exit codes: 0 on success, 1 for configuration errors, 2 for runtime,
identifiability and I/O errors.
"""

import argparse
import sys

import numpy as np

from . import config as cfgmod
from .channel import doppler_psd
from .errors import ConfigError
from .io import emit_results, format_csv
from .modem import constellation_table
from .sim import (
    BER_COLUMNS,
    CAPTURE_COLUMNS,
    TDE_SUMMARY_COLUMNS,
    constellation_capture,
    ber_sweep,
    tde_sweep,
    tde_trial_columns,
    _rng,
)
from .tde import estimate_delays, synthesize_received

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message, "argv")


def _parser():
    p = _Parser(prog="stlink", description="Link-level space-time coding and delay estimation experiments.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, out=True, seed=True, threads=False):
        sp.add_argument("--config", help="experiment TOML")
        if out:
            sp.add_argument("--out", help="CSV output path (stdout if omitted)")
        if seed:
            sp.add_argument("--seed", type=int, help="override the master seed")
        if threads:
            sp.add_argument("--threads", type=int, default=1)
        sp.add_argument("--quiet", action="store_true", help="suppress summaries and progress")

    common(sub.add_parser("ber-sweep", help="Monte Carlo BER versus Eb/N0"), threads=True)
    common(sub.add_parser("tde-run", help="single delay estimate for the configured scenario"))
    sp = sub.add_parser("tde-sweep", help="delay-estimation error statistics versus SNR")
    common(sp, threads=True)
    sp.add_argument("--summary", help="also write the per-SNR summary CSV here")
    sp = sub.add_parser("constellation", help="constellation table, or post-combining capture")
    common(sp)
    sp.add_argument("--capture", action="store_true", help="capture combined statistics over the channel")
    common(sub.add_parser("psd-dump", help="sample the Doppler power spectral density"), seed=False)
    sp = sub.add_parser("validate-config", help="check a config and optionally echo it normalized")
    common(sp, out=False, seed=False)
    sp.add_argument("--print-normalized", action="store_true")
    return p


def _load(args):
    if args.config:
        return cfgmod.load(args.config)
    return cfgmod.normalize({})


def _emit(records, columns, out):
    if out:
        emit_results(records, columns, out)
    else:
        sys.stdout.write(format_csv(records, columns))


def _say(args, msg):
    if not args.quiet:
        print(msg, file=sys.stderr)


def _ber_sweep(args, cfg):
    link = cfgmod.build_link(cfg)
    stop = cfgmod.build_stop(cfg)
    seed = cfg["sweep"]["seed"] if args.seed is None else args.seed
    if args.threads < 1:
        raise ConfigError("must be >= 1", "threads")
    done = [0]

    def progress(pt):
        done[0] += 1
        flag = " (upper bound)" if pt.censored else ""
        _say(args, f"[{done[0]}/{len(cfg['sweep']['ebn0_db'])}] Eb/N0 {pt.ebn0_db:g} dB: "
                   f"{pt.errors} errors / {pt.bits} bits, BER {pt.ber:.3e}{flag}")

    points = ber_sweep(link, cfg["sweep"]["ebn0_db"], stop, seed, args.threads, progress=progress)
    _emit([p.as_row() for p in points], BER_COLUMNS, args.out)


def _tde_run(args, cfg):
    scenario, search = cfgmod.build_tde(cfg)
    t = cfg["tde"]
    snr = cfgmod.snr_values(t["snr_db"][:1])[0] if t["snr_db"] else None
    sc = scenario.with_snr(snr)
    seed = t["seed"] if args.seed is None else args.seed
    r = synthesize_received(sc, _rng(seed))
    est = estimate_delays(r, sc.pulse, sc.n_paths, t["threshold_fraction"], search, sc.sample_interval)
    truth = np.sort(np.asarray(sc.delays, dtype=float))
    rows = []
    for k in range(sc.n_paths):
        a = complex(est.amplitudes[k])
        rows.append({
            "path": k + 1,
            "tau_true": float(truth[k]),
            "tau_hat": float(est.delays[k]),
            "abs_error": float(abs(est.delays[k] - truth[k])),
            "amp_re": a.real,
            "amp_im": a.imag,
        })
    if not args.quiet:
        label = "noiseless" if snr is None else f"SNR {snr:g} dB"
        print(f"{sc.n_paths}-path estimate ({label}), residual {est.residual:.3e}", file=sys.stderr)
        for row in rows:
            print(f"  path {row['path']}: tau_hat {row['tau_hat']:.6f}  true {row['tau_true']:.6f}"
                  f"  |err| {row['abs_error']:.2e}", file=sys.stderr)
    _emit(rows, ("path", "tau_true", "tau_hat", "abs_error", "amp_re", "amp_im"), args.out)


def _tde_sweep(args, cfg):
    scenario, search = cfgmod.build_tde(cfg)
    t = cfg["tde"]
    seed = t["seed"] if args.seed is None else args.seed
    if args.threads < 1:
        raise ConfigError("must be >= 1", "threads")
    res = tde_sweep(scenario, cfgmod.snr_values(t["snr_db"]), t["trials"], seed,
                    t["threshold_fraction"], search, args.threads)
    if not args.quiet:
        print("snr_db  path  rmse        median      failures", file=sys.stderr)
        for row in res.summary:
            print(f"{row['snr_db']:6g}  {row['path']:4d}  {row['rmse']:.4e}  "
                  f"{row['median_abs_error']:.4e}  {row['failure_rate']:.3f}", file=sys.stderr)
    _emit(res.trials, tde_trial_columns(res.n_paths), args.out)
    if args.summary:
        emit_results(res.summary, TDE_SUMMARY_COLUMNS, args.summary)


def _constellation(args, cfg):
    link = cfgmod.build_link(cfg)
    if not args.capture:
        _emit(constellation_table(link.constellation), ("re", "im", "label_bits"), args.out)
        return
    cp = cfg["capture"]
    seed = cp["seed"] if args.seed is None else args.seed
    rec = constellation_capture(link, cp["ebn0_db"], cp["n_symbols"], seed, cp["noiseless"])
    _emit(rec.rows(), CAPTURE_COLUMNS, args.out)


def _psd_dump(args, cfg):
    ps = cfg["psd"]
    f = np.linspace(ps["f_min"], ps["f_max"], ps["points"])
    s = doppler_psd(f, cfgmod.build_doppler(cfg))
    _emit([{"f": float(a), "psd": float(b)} for a, b in zip(f, np.atleast_1d(s))], ("f", "psd"), args.out)


def _validate(args, cfg):
    cfgmod.build_tde(cfg)
    if args.print_normalized:
        sys.stdout.write(cfgmod.dumps(cfg))
    elif not args.quiet:
        print(f"{args.config or '<defaults>'}: ok", file=sys.stderr)


_COMMANDS = {
    "ber-sweep": _ber_sweep,
    "tde-run": _tde_run,
    "tde-sweep": _tde_sweep,
    "constellation": _constellation,
    "psd-dump": _psd_dump,
    "validate-config": _validate,
}


def main(argv=None):
    try:
        args = _parser().parse_args(argv)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        cfg = _load(args)
        _COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (RuntimeError, ValueError, OSError, ArithmeticError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
