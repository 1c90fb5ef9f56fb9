"""Command-line experiment runner.

Subcommands: ``gen``, ``dist``, ``sweep``, ``epsset``, ``riesz``, ``haarcheck``.
Every command takes a mandatory ``--seed`` where randomness is involved, and
reports embed all parameters needed to re-run them.  Exit codes: 0 success,
1 estimation failure, 2 invalid configuration.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import estimators, fractal, geometry, haar

EXIT_RUNTIME = 1
EXIT_CONFIG = 2


class ConfigError(ValueError):
    pass


def _eps_list(text):
    try:
        vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"cannot parse epsilon list {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty epsilon list")
    return vals


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _emit(text, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _read_one_config(path):
    try:
        configs = geometry.read_configurations(path)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if len(configs) != 1:
        raise ConfigError(f"{path}: expected one configuration, found {len(configs)}")
    return configs[0]


def _load_samples(path):
    try:
        return fractal.read_samples(path)
    except (OSError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def cmd_gen(args):
    d = args.d
    k = args.k if args.k is not None else d + 1
    try:
        ifs = fractal.make_cantor_like(d, args.target_dim, args.n_per_axis)
    except fractal.InfeasibleSpecError as exc:
        lo, hi = exc.feasible_range
        raise ConfigError(f"{exc} (max feasible target_dim = {hi})") from None
    samples = fractal.chaos_game_sample(ifs, args.n, args.burn_in, haar.RngSeed(args.seed))
    if not args.out:
        raise ConfigError("gen needs --out")
    fractal.write_samples(args.out, samples, seed=args.seed)
    dim = fractal.similarity_dimension(ifs)
    line = f"similarity_dimension={dim:.12g} threshold(d={d}, k={k})="
    if d >= 2 and k >= 3:
        s = geometry.threshold(d, k)
        regime = "above" if dim > s else "not above"
        line += f"{s} ({float(s):.6g}); sample set is {regime} the threshold"
    else:
        line += "undefined"
    print(line)


def cmd_dist(args):
    x = _read_one_config(args.file_x)
    y = _read_one_config(args.file_y)
    if (x.k, x.d) != (y.k, y.d):
        raise ConfigError(f"{args.file_y}: shape (k={y.k}, d={y.d}) does not match "
                          f"{args.file_x} (k={x.k}, d={x.d})")
    motion, dist = geometry.optimal_alignment(x, y)
    report = {
        "file_x": str(args.file_x),
        "file_y": str(args.file_y),
        "distance": dist,
        "rotation": motion.rotation.entries.tolist(),
        "translation": motion.translation.tolist(),
    }
    print(f"distance={dist:.12g}")
    print("rotation=" + json.dumps(report["rotation"]))
    print("translation=" + json.dumps(report["translation"]))
    if args.out:
        Path(args.out).write_text(_dump_json(report))


def cmd_sweep(args):
    samples = _load_samples(args.samples)
    d = samples.d
    k = args.k
    if args.d is not None and args.d != d:
        raise ConfigError(f"--d {args.d} does not match sample dimension {d}")
    if k is None or k < d + 1:
        raise ConfigError(f"sweep needs --k >= d + 1 = {d + 1}")
    eps = np.array(args.eps)
    if np.any(eps <= 0) or np.any(np.diff(eps) >= 0):
        raise ConfigError("--eps must be positive and strictly decreasing")
    seed = haar.RngSeed(args.seed)
    report = estimators.energy_sweep(samples, k, eps, args.n_pairs, seed, workers=args.workers)
    report.meta.update({"samples": str(args.samples), "n_samples": samples.n})
    _emit(report.to_csv(), args.out)
    s = geometry.threshold(d, k) if d >= 2 else None
    if np.isfinite(report.slope):
        print(f"slope={report.slope:.4f} +- {report.slope_stderr:.4f}")
    else:
        print(f"slope=NA ({report.slope_note})")
    dim = samples.meta.get("similarity_dimension")
    if s is not None:
        if dim is None:
            print(f"threshold(d={d}, k={k})={s} ({float(s):.6g}); sample dimension unknown")
        else:
            rel = "above" if dim > s else "not above"
            print(f"threshold(d={d}, k={k})={s} ({float(s):.6g}); sample dimension {dim:.6g} is {rel}")


def cmd_epsset(args):
    z = _read_one_config(args.file_z)
    y = _read_one_config(args.file_y)
    if (z.k, z.d) != (y.k, y.d):
        raise ConfigError(f"{args.file_y}: shape does not match {args.file_z}")
    eps = args.eps[0]
    try:
        est = estimators.epsset_haar_measure(z, y, eps, args.c_m, args.n_rho, haar.RngSeed(args.seed),
                                             M=args.norm_bound, normalization=args.normalization)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    m = y.norm() if args.norm_bound is None else args.norm_bound
    dim_o = z.d * (z.d - 1) // 2
    report = {
        "command": "epsset",
        "file_z": str(args.file_z),
        "file_y": str(args.file_y),
        "epsilon": eps,
        "c_m": args.c_m if args.c_m is not None else estimators.default_c_m(m),
        "norm_bound": m,
        "n_rho": args.n_rho,
        "normalization": args.normalization,
        "distance": geometry.procrustes_distance(z, y),
        "lower_bound": eps**dim_o,
        "estimate": est.as_dict(),
    }
    _emit(_dump_json(report), args.out)


def cmd_riesz(args):
    samples = _load_samples(args.samples)
    try:
        est = estimators.riesz_energy(samples, args.s, args.n_pairs, args.cutoff, haar.RngSeed(args.seed),
                                      workers=args.workers)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    report = {
        "command": "riesz",
        "samples": str(args.samples),
        "n_samples": samples.n,
        "s": args.s,
        "n_pairs": args.n_pairs,
        "cutoff": args.cutoff,
        "estimate": est.as_dict(),
    }
    if args.bandwidth:
        k = args.k if args.k is not None else samples.d + 1
        try:
            trend = estimators.nu_rho_moment_trend(samples, k, args.n_rho, args.bandwidth, args.n_eval,
                                                   haar.RngSeed(args.seed, stream=1))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        report["nu_rho_moment"] = {
            "k": k,
            "n_rho": args.n_rho,
            "n_eval": args.n_eval,
            "bandwidths": trend["bandwidths"],
            "estimates": [e.as_dict() for e in trend["estimates"]],
            "ratios": [r if np.isfinite(r) else None for r in trend["ratios"]],
        }
    _emit(_dump_json(report), args.out)


def cmd_haarcheck(args):
    if args.d is None or args.d < 1:
        raise ConfigError("haarcheck needs --d >= 1")
    report = haar.haar_check(args.d, args.n, haar.RngSeed(args.seed))
    report["command"] = "haarcheck"
    _emit(_dump_json(report), args.out)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fracconf", description=__doc__.splitlines()[0])
    p.add_argument("--config", type=Path, help="JSON file of default flag values")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed=True):
        sp.add_argument("--out", help="output path (stdout when omitted)")
        if seed:
            sp.add_argument("--seed", type=int, required=True)

    g = sub.add_parser("gen", help="sample a product-Cantor measure")
    g.add_argument("--d", type=int, required=True)
    g.add_argument("--k", type=int, help="configuration size for the threshold line (default d + 1)")
    g.add_argument("--target-dim", type=float, required=True)
    g.add_argument("--n-per-axis", type=int, default=2)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--burn-in", type=int, default=64)
    common(g)
    g.set_defaults(func=cmd_gen)

    dd = sub.add_parser("dist", help="congruence distance between two configuration files")
    dd.add_argument("file_x")
    dd.add_argument("file_y")
    common(dd, seed=False)
    dd.set_defaults(func=cmd_dist)

    sw = sub.add_parser("sweep", help="configuration-energy sweep over epsilon")
    sw.add_argument("samples")
    sw.add_argument("--d", type=int)
    sw.add_argument("--k", type=int, required=True)
    sw.add_argument("--eps", type=_eps_list, required=True)
    sw.add_argument("--n-pairs", type=int, default=100_000)
    sw.add_argument("--workers", type=int, default=1)
    common(sw)
    sw.set_defaults(func=cmd_sweep)

    ep = sub.add_parser("epsset", help="Haar measure of the aligning rotation set")
    ep.add_argument("file_z")
    ep.add_argument("file_y")
    ep.add_argument("--eps", type=_eps_list, required=True)
    ep.add_argument("--c-m", type=float)
    ep.add_argument("--norm-bound", type=float)
    ep.add_argument("--n-rho", type=int, default=10_000)
    ep.add_argument("--normalization", choices=("probability", "frobenius"), default="probability")
    common(ep)
    ep.set_defaults(func=cmd_epsset)

    ri = sub.add_parser("riesz", help="Riesz energy of a sample set")
    ri.add_argument("samples")
    ri.add_argument("--s", type=float, required=True)
    ri.add_argument("--n-pairs", type=int, default=100_000)
    ri.add_argument("--cutoff", type=float)
    ri.add_argument("--workers", type=int, default=1)
    ri.add_argument("--bandwidth", type=_eps_list,
                    help="comma list of box-kernel bandwidths; adds a difference-measure moment trend")
    ri.add_argument("--k", type=int, help="configuration size for the moment (default d + 1)")
    ri.add_argument("--n-rho", type=int, default=10)
    ri.add_argument("--n-eval", type=int, default=1000)
    common(ri)
    ri.set_defaults(func=cmd_riesz)

    hc = sub.add_parser("haarcheck", help="statistical checks of the Haar sampler")
    hc.add_argument("--d", type=int, required=True)
    hc.add_argument("--n", type=int, default=10_000)
    common(hc)
    hc.set_defaults(func=cmd_haarcheck)

    return p


def _apply_config(parser, argv):
    """Parse ``argv``, filling unset flags from a ``--config`` JSON file.

    Keys use flag names with underscores (``n_pairs``); keys the chosen
    subcommand does not accept are ignored.
    """
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", type=Path)
    pre.add_argument("command", nargs="?")
    known, _ = pre.parse_known_args(argv)
    if known.config is None:
        return parser.parse_args(argv)
    try:
        values = json.loads(known.config.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"{known.config}: {exc}") from None
    subparsers = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    sp = subparsers.choices.get(known.command)
    if sp is None:
        return parser.parse_args(argv)
    extra = []
    for key, val in sorted(values.items()):
        flag = "--" + key.replace("_", "-")
        if flag not in sp._option_string_actions or flag in argv:
            continue
        if isinstance(val, list):
            val = ",".join(str(v) for v in val)
        extra += [flag, str(val)]
    return parser.parse_args(argv + extra)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        args.func(args)
    except SystemExit as exc:
        return int(exc.code or 0)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RuntimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return 0


if __name__ == "__main__":
    sys.exit(main())
