"""Command-line entry point ``token-opt``.

Exit codes: 0 success, 2 configuration or input error, 3 numerical divergence.
"""

import argparse
import sys

from .chains import ChainError, chain_lazy_maxdeg, chain_metropolis_uniform, chain_simple_rw, chain_two_state, \
    ChainTimes
from .config import ConfigError, RunConfig
from .graphs import Graph, GraphError, build_complete, build_cycle, build_random_geometric, build_torus
from .optimizers import DivergenceError

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED = 0, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _int_list(text):
    try:
        vals = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty size list")
    return vals


def _graph_from_args(args):
    kind = args.graph
    if kind == "file" or args.graph_file:
        if not args.graph_file:
            raise ConfigError("--graph file requires --graph-file PATH", "graph_file")
        return Graph.load(args.graph_file)
    if args.n is None:
        raise ConfigError(f"--n is required for --graph {kind}", "n")
    if kind == "cycle":
        return build_cycle(args.n)
    if kind == "complete":
        return build_complete(args.n)
    if kind == "torus":
        # --n is the side length, n = side**dim nodes
        return build_torus(args.n, args.dim)
    return build_random_geometric(args.n, args.radius, args.seed)


def cmd_chain_times(args):
    from .experiments import chain_times_row

    if args.chain == "two-state":
        chain = chain_two_state(args.p)
    else:
        g = _graph_from_args(args)
        chain = {"srw": chain_simple_rw, "lazy": chain_lazy_maxdeg, "metropolis": chain_metropolis_uniform}[
            args.chain](g)
    if args.header:
        print(",".join(ChainTimes.CSV_HEADER))
    print(chain_times_row(chain, eps=args.eps, mc_reps=args.mc_reps, seed=args.seed))


def cmd_run(args):
    from .experiments import run_config

    cfg = RunConfig.load(args.config)
    out = args.out if args.out is not None else cfg.output
    if out is None:
        raise ConfigError("no output directory: set 'output' in the config or pass --out", "output")
    _, stats = run_config(cfg, out_dir=out)
    print(f"wrote {len(cfg.seeds)} seed traces and aggregate.csv to {out}")
    print(f"final mean f_gap {stats.f_gap_mean[-1]:.6g}, grad_norm_sq {stats.grad_mean[-1]:.6g}")


def cmd_reproduce_fig1(args):
    from .experiments import FIG1_ALGORITHMS, reproduce_fig1

    results = reproduce_fig1(args.variant, seeds=args.seeds, out_dir=args.out, budget=args.budget)
    print("algorithm,comms,f_gap_mean,f_gap_sd")
    for algo in FIG1_ALGORITHMS:
        st = results[algo]
        print(f"{algo},{st.comms[-1]},{st.f_gap_mean[-1]:.6g},{st.f_gap_sd[-1]:.6g}")


def cmd_scaling(args):
    from .experiments import scaling_table, write_scaling

    rows, slopes = scaling_table(args.family, args.sizes)
    path, slope_path = write_scaling(rows, slopes, args.out)
    print("quantity,slope,stderr,r2")
    for name, fit in slopes.items():
        print(f"{name},{fit.slope:.4f},{fit.stderr:.4f},{fit.r2:.5f}")
    print(f"wrote {path} and {slope_path}")


def build_parser():
    p = _Parser(prog="token-opt", description="Token (random-walk) optimisation experiments.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    ct = sub.add_parser("chain-times", help="exact and Monte-Carlo chain times as one CSV row")
    ct.add_argument("--graph", choices=["cycle", "torus", "complete", "geometric", "file"], default="cycle")
    ct.add_argument("--n", type=int, help="number of nodes (side length for --graph torus)")
    ct.add_argument("--dim", type=int, default=2, help="torus dimension")
    ct.add_argument("--radius", type=float, default=0.3, help="geometric graph radius")
    ct.add_argument("--graph-file", help="edge-list file: 'n m' then m lines 'u v'")
    ct.add_argument("--chain", choices=["srw", "lazy", "metropolis", "two-state"], default="srw")
    ct.add_argument("--p", type=float, default=0.1, help="switch probability of the two-state chain")
    ct.add_argument("--eps", type=float, default=None, help="precision of tau_mix (default pi_min/2)")
    ct.add_argument("--mc-reps", type=int, default=200)
    ct.add_argument("--seed", type=int, default=0)
    ct.add_argument("--header", action="store_true", help="print the column names first")
    ct.set_defaults(func=cmd_chain_times)

    rn = sub.add_parser("run", help="run a JSON config")
    rn.add_argument("--config", required=True)
    rn.add_argument("--out", help="output directory (overrides the config)")
    rn.set_defaults(func=cmd_run)

    fg = sub.add_parser("reproduce-fig1", help="token vs gossip comparison on the canned problems")
    fg.add_argument("--variant", choices=["homogeneous", "heterogeneous"], required=True)
    fg.add_argument("--seeds", type=int, default=10)
    fg.add_argument("--budget", type=int, default=200_000, help="communications per algorithm")
    fg.add_argument("--out", required=True)
    fg.set_defaults(func=cmd_reproduce_fig1)

    sc = sub.add_parser("scaling", help="exact hitting and mixing times over graph sizes")
    sc.add_argument("--family", choices=["cycle", "torus2d", "complete"], required=True)
    sc.add_argument("--sizes", type=_int_list, required=True, help="comma-separated sizes (torus: sides)")
    sc.add_argument("--out", required=True)
    sc.set_defaults(func=cmd_scaling)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except DivergenceError as exc:
        print(f"token-opt: diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (ConfigError, GraphError, ChainError, ValueError, OSError) as exc:
        print(f"token-opt: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
