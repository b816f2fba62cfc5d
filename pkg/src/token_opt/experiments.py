"""Seeded multi-replica runs, CSV output and canned experiments."""

import json
import os
import shutil
import tempfile
from pathlib import Path

import numpy as np

from .chains import chain_lazy_maxdeg, chain_simple_rw, chain_metropolis_uniform, chain_times, hitting_time, \
    mixing_time_exact
from .config import RunConfig
from .graphs import build_complete, build_cycle, build_random_geometric, build_torus
from .objectives import SigmoidLoss, estimate_f_star, sigmoid_loss
from .optimizers import TRACE_COLUMNS, make_estimator
from .stats import AGGREGATE_COLUMNS, aggregate, fit_loglog_slope

THREADS_ENV = "TOKEN_OPT_THREADS"


def worker_cap():
    """Upper bound on parallel workers from ``TOKEN_OPT_THREADS`` (default: CPU count)."""
    raw = os.environ.get(THREADS_ENV)
    if raw is None or raw.strip() == "":
        return os.cpu_count() or 1
    try:
        cap = int(raw)
    except ValueError:
        raise ValueError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    if cap < 1:
        raise ValueError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return cap


def parallel_map(fn, items, workers=None):
    """``[fn(x) for x in items]``, fanned out over at most ``worker_cap()`` processes.

    Results come back in input order, so the output never depends on
    scheduling.
    """
    items = list(items)
    n_jobs = min(worker_cap() if workers is None else min(workers, worker_cap()), len(items))
    if n_jobs <= 1:
        return [fn(x) for x in items]
    from joblib import Parallel, delayed

    return Parallel(n_jobs=n_jobs)(delayed(fn)(x) for x in items)


def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def trace_to_csv(trace, path):
    write_csv(path, TRACE_COLUMNS, trace.rows())


def read_csv(path):
    """Columns of a numeric CSV as a dict of float arrays."""
    data = np.genfromtxt(path, delimiter=",", names=True, dtype=float)
    return {name: np.atleast_1d(data[name]) for name in data.dtype.names}


# ---------------------------------------------------------------- runs

def prepare_objective(obj, x0=None, seed=0):
    """Attach an ``f_star`` estimate when the objective has no exact one."""
    if obj.f_star is None:
        estimate_f_star(obj, x0=x0, seed=seed, lower_bound=0.0 if isinstance(obj, SigmoidLoss) else None)
    return obj


def _run_seed(job):
    algorithm, obj, chain, T, seed, log_every, params = job
    est = make_estimator(algorithm, T, seed, log_every, **params)
    trace = est.fit(obj, chain).trace_
    trace.metadata["seed"] = seed
    return trace


def run_replicas(algorithm, obj, chain, T, seeds, log_every=1, workers=None, **params):
    """One trace per seed, in seed order."""
    if algorithm in ("mc_sag", "sag_iid") and params.get("tau_hit") is None \
            and params.get("gamma_policy", "adaptive_eq7") == "adaptive_eq7":
        params["tau_hit"] = hitting_time(chain)
    jobs = [(algorithm, obj, chain, T, s, log_every, params) for s in seeds]
    return parallel_map(_run_seed, jobs, workers)


def _atomic_output(out_dir, write):
    """Run ``write(tmp_dir)`` and move its files into ``out_dir`` only on success."""
    out = Path(out_dir)
    out.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=".partial-", dir=out.parent))
    try:
        write(tmp)
        out.mkdir(exist_ok=True)
        for f in sorted(tmp.iterdir()):
            os.replace(f, out / f.name)
    finally:
        shutil.rmtree(tmp, ignore_errors=True)
    return out


def run_config(cfg, out_dir=None, workers=None):
    """Execute a :class:`RunConfig`; write per-seed and aggregate CSVs when ``out_dir`` is set.

    Files: ``seed_<s>.csv`` (columns t, comms, f_gap, grad_norm_sq, node),
    ``aggregate.csv`` and ``run.json`` (config and f* provenance). Nothing is
    left behind if any run fails.

    Returns
    -------
    traces : list of Trace
    stats : AggregateStats
    """
    if not isinstance(cfg, RunConfig):
        cfg = RunConfig.from_dict(cfg)
    graph, chain, obj = cfg.build()
    x0 = cfg.algorithm.get("x0")
    prepare_objective(obj, x0=x0, seed=cfg.objective.get("seed", 0))
    traces = run_replicas(cfg.algorithm["name"], obj, chain, cfg.T, cfg.seeds, cfg.log_every, workers,
                          **cfg.estimator_params())
    stats = aggregate(traces, cfg.seeds)
    out_dir = out_dir if out_dir is not None else cfg.output
    if out_dir is not None:
        def write(tmp):
            for seed, tr in zip(cfg.seeds, traces):
                trace_to_csv(tr, tmp / f"seed_{seed}.csv")
            write_csv(tmp / "aggregate.csv", AGGREGATE_COLUMNS, stats.rows())
            meta = {"config": cfg.to_dict(), "objective": obj.name, "f_star": obj.f_star,
                    "f_star_source": obj.f_star_source, "graph": graph.name, "chain": chain.name,
                    "edges": graph.edge_count}
            (tmp / "run.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")

        _atomic_output(out_dir, write)
    return traces, stats


# ---------------------------------------------------------------- token vs gossip comparison

# Constant stepsizes as multiples of 1/L, frozen from ``tune_stepsize``: start
# at 1/(2L) and halve while any seed trips the divergence guard. No halving was
# needed for either variant.
FIG1_SETUPS = {
    "homogeneous": {
        "graph": {"family": "geometric", "n": 50, "radius": 0.3, "seed": 0},
        "chain": "metropolis",
        "objective": {"n": 50, "dim": 1, "data_mode": "homogeneous", "seed": 0},
        "gamma_times_L": {"mc_sgd": 0.5, "mc_sag": 0.5, "dsgd_fixed": 0.5, "dsgd_randomized": 0.5},
    },
    "heterogeneous": {
        "graph": {"family": "cycle", "n": 50},
        "chain": "srw",
        "objective": {"n": 50, "dim": 1, "data_mode": "two-hot-heterogeneous", "seed": 0},
        "gamma_times_L": {"mc_sgd": 0.5, "mc_sag": 0.5, "dsgd_fixed": 0.5, "dsgd_randomized": 0.5},
    },
}
FIG1_ALGORITHMS = ("mc_sgd", "mc_sag", "dsgd_fixed", "dsgd_randomized")
FIG1_BUDGET = 200_000
FIG1_POINTS = 200


def fig1_problem(variant):
    if variant not in FIG1_SETUPS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {sorted(FIG1_SETUPS)}")
    setup = FIG1_SETUPS[variant]
    gb = setup["graph"]
    if gb["family"] == "geometric":
        graph = build_random_geometric(gb["n"], gb["radius"], gb["seed"])
    else:
        graph = build_cycle(gb["n"])
    chain = {"srw": chain_simple_rw, "metropolis": chain_metropolis_uniform}[setup["chain"]](graph)
    ob = setup["objective"]
    obj = sigmoid_loss(ob["n"], dim=ob["dim"], data_mode=ob["data_mode"], seed=ob["seed"])
    prepare_objective(obj, seed=ob["seed"])
    return graph, chain, obj


def fig1_horizon(algorithm, graph, budget):
    """Steps or rounds that spend ``budget`` communications."""
    if algorithm == "dsgd_fixed":
        return max(1, budget // graph.edge_count)
    return budget


def fig1_params(variant, algorithm, obj, gamma_times_L=None):
    scale = FIG1_SETUPS[variant]["gamma_times_L"][algorithm] if gamma_times_L is None else gamma_times_L
    params = {"gamma": scale / obj.L}
    if algorithm == "mc_sag":
        params["gamma_policy"] = "constant"
    return params


def reproduce_fig1(variant, seeds=10, out_dir=None, budget=FIG1_BUDGET, workers=None):
    """Run the four comparison algorithms on a shared communication budget.

    Returns a dict ``algorithm -> AggregateStats``. With ``out_dir`` each
    algorithm gets ``<variant>_<algorithm>.csv`` (aggregate over seeds, x axis
    = comms) and the setup is written to ``<variant>_setup.json``.
    """
    graph, chain, obj = fig1_problem(variant)
    seed_list = list(range(seeds)) if isinstance(seeds, int) else list(seeds)
    results = {}
    for algo in FIG1_ALGORITHMS:
        T = fig1_horizon(algo, graph, budget)
        log_every = max(1, T // FIG1_POINTS)
        traces = run_replicas(algo, obj, chain, T, seed_list, log_every, workers,
                              **fig1_params(variant, algo, obj))
        results[algo] = aggregate(traces, seed_list)
    if out_dir is not None:
        def write(tmp):
            for algo, st in results.items():
                write_csv(tmp / f"{variant}_{algo}.csv", AGGREGATE_COLUMNS, st.rows())
            setup = dict(FIG1_SETUPS[variant], budget=budget, seeds=seed_list, L=obj.L,
                         f_star=obj.f_star, f_star_source=obj.f_star_source, edges=graph.edge_count)
            (tmp / f"{variant}_setup.json").write_text(json.dumps(setup, indent=2, sort_keys=True) + "\n")

        _atomic_output(out_dir, write)
    return results


def tune_stepsize(variant, algorithm, seeds, budget=FIG1_BUDGET, max_halvings=30):
    """Largest ``gamma * L`` in ``1/2, 1/4, ...`` with no diverging seed."""
    from .optimizers import DivergenceError

    graph, chain, obj = fig1_problem(variant)
    T = fig1_horizon(algorithm, graph, budget)
    scale = 0.5
    for _ in range(max_halvings):
        try:
            run_replicas(algorithm, obj, chain, T, seeds, T, **fig1_params(variant, algorithm, obj, scale))
            return scale
        except DivergenceError:
            scale /= 2
    raise DivergenceError(f"{algorithm} diverges even with gamma = {scale:g} / L")


# ---------------------------------------------------------------- scaling laws

SCALING_FAMILIES = ("cycle", "torus2d", "complete")
SCALING_COLUMNS = ("n", "tau_hit", "n_tau_mix")


def scaling_table(family, sizes):
    """Exact ``tau_hit`` (simple walk) and ``n * tau_mix`` (lazy walk) per size.

    For ``torus2d`` the sizes are side lengths and ``n = side**2``. The lazy
    walk is used for mixing because the simple walk on bipartite graphs is
    periodic.
    """
    rows = []
    for s in sizes:
        if family == "cycle":
            g = build_cycle(s)
        elif family == "torus2d":
            g = build_torus(s, 2)
        elif family == "complete":
            g = build_complete(s)
        else:
            raise ValueError(f"unknown family {family!r}; expected one of {SCALING_FAMILIES}")
        lazy = chain_lazy_maxdeg(g)
        rows.append((g.n, hitting_time(chain_simple_rw(g)), g.n * mixing_time_exact(lazy, lazy.pi_min / 2.0)))
    rows = np.array(rows, dtype=float)
    slopes = {"tau_hit": fit_loglog_slope(rows[:, 0], rows[:, 1]),
              "n_tau_mix": fit_loglog_slope(rows[:, 0], rows[:, 2])}
    return rows, slopes


def write_scaling(rows, slopes, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    write_csv(path, SCALING_COLUMNS, [(int(n), h, m) for n, h, m in rows])
    slope_path = path.with_name(path.stem + "_slopes" + (path.suffix or ".csv"))
    write_csv(slope_path, ("quantity", "slope", "stderr", "r2"), [])
    with open(slope_path, "a") as fh:
        for name, fit in slopes.items():
            fh.write(f"{name},{_fmt(fit.slope)},{_fmt(fit.stderr)},{_fmt(fit.r2)}\n")
    return path, slope_path


def chain_times_row(chain, eps=None, mc_reps=200, seed=0):
    ct = chain_times(chain, mc_reps=mc_reps, seed=seed, eps=eps)
    return ",".join(_fmt(v) for v in ct.as_row())
