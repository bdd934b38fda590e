"""Command line interface: ``dqedmd {simulate,fit,sweep,recover,report}``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace

import numpy as np

from . import __version__
from .dictionary import identity_dictionary, make_tps_dictionary
from .dynamics import SYSTEMS, SimConfig, build_snapshot_pairs, get_system, simulate_trajectories
from .edmd import fit_dq_edmd, fit_edmd, save_model
from .harness.config import ConfigError, load_config
from .harness.experiments import (format_report, quantize_set, result_metadata,
                                  run_recovery, run_sweep)
from .harness.io import read_results, read_trajectories, write_results, write_trajectories
from .quantizer import auto_range_specs

log = logging.getLogger("dqedmd")


def parse_bits(text: str) -> list[int]:
    """``"8"``, ``"4,6,8"`` or ``"4-12"`` (inclusive) into a list of word lengths."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        lo, sep, hi = part.partition("-")
        try:
            if sep:
                out.extend(range(int(lo), int(hi) + 1))
            else:
                out.append(int(part))
        except ValueError:
            raise argparse.ArgumentTypeError(f"invalid --bits value {text!r}") from None
    if not out or min(out) < 1:
        raise argparse.ArgumentTypeError("--bits needs word lengths >= 1")
    return out


def _cmd_simulate(args):
    if args.config:
        cfg = load_config(args.config)
        model, sim = get_system(cfg.system), cfg.sim
    else:
        model = get_system(args.system)
        box = 1.0 if args.system == "pendulum" else 2.0
        sim = SimConfig(dt=args.dt, steps_per_trajectory=args.steps,
                        n_trajectories=args.trajectories,
                        init_box=((-box, box), (-box, box)))
    if args.seed is not None:
        sim = replace(sim, seed=args.seed)
    trajs = simulate_trajectories(model, sim)
    write_trajectories(trajs, args.output)
    print(f"wrote {trajs.n_trajectories} trajectories x {trajs.steps} steps to {args.output}")


def _cmd_fit(args):
    trajs = read_trajectories(args.input)
    n = trajs.n
    if args.n_centers == 0:
        dictionary = identity_dictionary(n)
    else:
        flat = trajs.states.reshape(-1, n)
        box = np.column_stack([flat.min(axis=0), flat.max(axis=0)])
        dictionary = make_tps_dictionary(n, args.n_centers, box, args.dict_seed)
    meta = {"source": str(args.input), "system": trajs.system, "dt": trajs.dt}
    if args.bits:
        if len(args.bits) != 1:
            raise ConfigError("fit takes a single word length in --bits")
        b = args.bits[0]
        specs = auto_range_specs(trajs.states.reshape(-1, n), b)
        seed = 0 if args.seed is None else args.seed
        decoded, n_sat = quantize_set(trajs, specs, seed, b, 0)
        X, X_next = build_snapshot_pairs(decoded)
        meta["quantizer"] = {"range_policy": "auto", "specs": [s.to_dict() for s in specs],
                             "master_seed": seed, "saturation_count": n_sat}
        est = fit_dq_edmd(X, X_next, dictionary, meta=meta)
    else:
        X, X_next = build_snapshot_pairs(trajs)
        est = fit_edmd(X, X_next, dictionary, meta=meta)
    save_model(est, args.output)
    print(f"wrote model N={dictionary.N} (rank {est.fit.gram_rank}, "
          f"residual {est.fit.residual:.3e}) to {args.output}")


def _experiment(args, runner):
    cfg = load_config(args.config).with_overrides(
        word_lengths=args.bits, master_seed=args.seed,
        output_path=args.output, threads=args.threads)
    records = runner(cfg)
    write_results(records, cfg.output_path, result_metadata(cfg))
    failed = sum(np.isnan(r.rel_K_error) for r in records)
    print(f"wrote {len(records)} records to {cfg.output_path}"
          + (f" ({failed} failed rows)" if failed else ""))
    print(format_report(records), end="")


def _cmd_report(args):
    print(format_report(read_results(args.input)), end="")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dqedmd", description="Koopman estimation from dither-quantized data")
    parser.add_argument("--version", action="version", version=f"dqedmd {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate trajectories to CSV")
    p.add_argument("--config", help="take system and sim settings from a config")
    p.add_argument("--system", choices=sorted(SYSTEMS), default="pendulum")
    p.add_argument("--trajectories", type=int, default=50)
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--dt", type=float, default=0.01)
    p.add_argument("--seed", type=int)
    p.add_argument("--output", default="trajectories.csv")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("fit", help="fit a model file from a trajectory CSV")
    p.add_argument("--input", required=True, help="trajectory CSV")
    p.add_argument("--n-centers", type=int, default=50,
                   help="thin plate spline centers (0 = plain DMD)")
    p.add_argument("--dict-seed", type=int, default=1)
    p.add_argument("--bits", type=parse_bits,
                   help="dither-quantize with this word length before fitting")
    p.add_argument("--seed", type=int, help="dither seed")
    p.add_argument("--output", default="model.json")
    p.set_defaults(func=_cmd_fit)

    for name, runner, helptext in (
            ("sweep", run_sweep, "word-length sweep to results CSV"),
            ("recover", run_recovery, "plain vs regularized DQ-DMD to results CSV")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", required=True,
                       help="YAML config path or bundled name (e.g. pendulum_desk)")
        p.add_argument("--bits", type=parse_bits, help="override word lengths, e.g. 4-12")
        p.add_argument("--seed", type=int, help="override master_seed")
        p.add_argument("--output", help="override output_path")
        p.add_argument("--threads", type=int, help="worker threads")
        p.set_defaults(func=lambda a, r=runner: _experiment(a, r))

    p = sub.add_parser("report", help="per word length medians and quartiles")
    p.add_argument("input", help="results CSV")
    p.set_defaults(func=_cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"dqedmd {args.command}: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
