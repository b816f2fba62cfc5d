"""Log-log regression and cross-seed aggregation of traces."""

from dataclasses import dataclass

import numpy as np
from scipy import stats as sps


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    stderr: float
    r2: float
    intercept: float

    def __iter__(self):
        # allows ``slope, stderr, r2 = fit_loglog_slope(...)``
        return iter((self.slope, self.stderr, self.r2))


def fit_loglog_slope(x, y=None):
    """Ordinary least squares of ``ln y`` on ``ln x``.

    Parameters
    ----------
    x : array-like
        Abscissae, or a sequence of ``(x, y)`` pairs when ``y`` is None.
    y : array-like, optional

    Returns
    -------
    SlopeFit
        Unpacks as ``(slope, stderr, r2)``. ``r2`` is 1 for an exact fit and
        also when ``y`` is constant.
    """
    if y is None:
        pts = np.asarray(x, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValueError("expected a sequence of (x, y) pairs")
        x, y = pts[:, 0], pts[:, 1]
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be 1-d arrays of equal length")
    if len(x) < 3:
        raise ValueError(f"need at least 3 points, got {len(x)}")
    if np.any(x <= 0) or np.any(y <= 0) or not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("log-log fit needs finite positive values")
    if np.ptp(np.log(x)) == 0:
        raise ValueError("x values must not all coincide")
    lx, ly = np.log(x), np.log(y)
    res = sps.linregress(lx, ly)
    ss_res = float(np.sum((ly - res.intercept - res.slope * lx) ** 2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 if ss_tot <= 1e-24 * len(ly) else 1.0 - ss_res / ss_tot
    return SlopeFit(float(res.slope), float(res.stderr), r2, float(res.intercept))


@dataclass
class AggregateStats:
    """Per-logged-step mean and standard deviation across seeds.

    Attributes
    ----------
    t, comms : ndarray
        Shared logging grid.
    f_gap_mean, f_gap_sd, grad_mean, grad_sd : ndarray
        Cross-seed moments (sd uses ``ddof=1``; NaN with a single seed).
    min_grad : ndarray
        ``min_t ||grad f(x_t)||^2`` of each seed, ordered by seed.
    seeds : tuple
    """

    t: np.ndarray
    comms: np.ndarray
    f_gap_mean: np.ndarray
    f_gap_sd: np.ndarray
    grad_mean: np.ndarray
    grad_sd: np.ndarray
    min_grad: np.ndarray
    seeds: tuple

    @property
    def n_seeds(self):
        return len(self.seeds)

    def rows(self):
        return zip(self.t, self.comms, self.f_gap_mean, self.f_gap_sd, self.grad_mean, self.grad_sd)


AGGREGATE_COLUMNS = ("t", "comms", "f_gap_mean", "f_gap_sd", "grad_norm_sq_mean", "grad_norm_sq_sd")


def aggregate(traces, seeds=None):
    """Aggregate traces that share a logging grid.

    Traces are sorted by seed first, so the result does not depend on the
    order in which runs finished.
    """
    traces = list(traces)
    if not traces:
        raise ValueError("nothing to aggregate")
    if seeds is None:
        seeds = [tr.metadata.get("seed", k) for k, tr in enumerate(traces)]
    order = sorted(range(len(traces)), key=lambda k: seeds[k])
    traces = [traces[k] for k in order]
    seeds = tuple(seeds[k] for k in order)
    t = traces[0].column("t")
    for tr in traces[1:]:
        if not np.array_equal(tr.column("t"), t):
            raise ValueError("traces are logged on different step grids")
    F = np.stack([tr.column("f_gap") for tr in traces])
    G = np.stack([tr.column("grad_norm_sq") for tr in traces])
    ddof = 1 if len(traces) >= 2 else 0
    sd = (lambda A: A.std(axis=0, ddof=1)) if ddof else (lambda A: np.full(A.shape[1], np.nan))
    return AggregateStats(t=t, comms=traces[0].column("comms"), f_gap_mean=F.mean(axis=0),
                          f_gap_sd=sd(F), grad_mean=G.mean(axis=0), grad_sd=sd(G),
                          min_grad=G.min(axis=1), seeds=seeds)


def running_min(a):
    return np.minimum.accumulate(np.asarray(a, dtype=float))
