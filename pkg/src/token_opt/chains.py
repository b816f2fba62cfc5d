"""Markov chains on finite graphs: kernels, stationary laws and chain times.

Exact routines work on dense matrices and are meant for ``n <= 2000``.
Trajectories are produced by inverse-CDF sampling from uniforms drawn on a
seeded Philox stream (see :mod:`token_opt._rng`), so a ``(chain, start, T,
seed)`` tuple always yields the same node sequence.
"""

from dataclasses import dataclass, field
import math

import numba
import numpy as np
from scipy import linalg, sparse
from scipy.sparse import csgraph

from ._rng import STREAM_MC, STREAM_SAMPLER, make_rng
from ._validation import check_int, check_real, check_stochastic_matrix

EXACT_MAX_STATES = 2000
MIXING_CAP = 10**7
_STOCHASTIC_ATOL = 1e-12


class ChainError(ValueError):
    """Raised for reducible, periodic or otherwise unusable chains."""


@dataclass(frozen=True, eq=False)
class MarkovChain:
    """Time-homogeneous chain with dense transition matrix ``P``.

    ``pi`` is the stationary distribution and ``reversible`` records whether
    detailed balance holds to 1e-10.
    """

    P: np.ndarray
    pi: np.ndarray
    reversible: bool
    name: str = "chain"
    graph: object = field(default=None, repr=False)

    @classmethod
    def from_matrix(cls, P, name="chain", graph=None):
        P = check_stochastic_matrix(P, atol=_STOCHASTIC_ATOL)
        n_comp, _ = csgraph.connected_components(sparse.csr_matrix(P > 0), directed=True, connection="strong")
        if n_comp != 1:
            raise ChainError("transition matrix is reducible")
        if graph is not None:
            allowed = graph.adjacency_matrix() + np.eye(graph.n)
            if P.shape[0] != graph.n or np.any((P > 0) & (allowed == 0)):
                raise ChainError("transition support is not contained in the graph edges")
        pi = stationary(P)
        flow = pi[:, None] * P
        reversible = bool(np.max(np.abs(flow - flow.T)) <= 1e-10)
        P.setflags(write=False)
        pi.setflags(write=False)
        return cls(P, pi, reversible, name=name, graph=graph)

    @property
    def n(self):
        return self.P.shape[0]

    @property
    def pi_min(self):
        return float(np.min(self.pi))

    def period(self):
        return chain_period(self.P)

    def is_aperiodic(self):
        return self.period() == 1


@dataclass(frozen=True)
class ChainTimes:
    """Mixing, relaxation, hitting and cover times of one chain.

    ``tau_mix`` is the mixing time at precision ``pi_min / 2``;
    ``tau_mix_quarter`` the one at precision 1/4. Both are ``inf`` for periodic
    chains. ``tau_rel`` is ``nan`` for non-reversible chains.
    """

    n: int
    tau_mix_quarter: float
    tau_mix: float
    tau_rel: float
    tau_hit: float
    tau_cov_mc: float
    tau_cov_half_width: float
    tau_cov_matthews: float
    pi_min: float

    def as_row(self):
        return [self.n, self.tau_mix_quarter, self.tau_mix, self.tau_rel, self.tau_hit,
                self.tau_cov_mc, self.tau_cov_half_width, self.tau_cov_matthews]

    CSV_HEADER = ("n", "tau_mix_quarter", "tau_mix", "tau_rel", "tau_hit",
                  "tau_cov_mc", "tau_cov_half_width", "tau_cov_matthews")


# ---------------------------------------------------------------- builders

def chain_simple_rw(g):
    """Simple random walk: uniform move to a neighbour."""
    P = np.zeros((g.n, g.n))
    for v, nbrs in enumerate(g.adjacency):
        P[v, list(nbrs)] = 1.0 / len(nbrs)
    return MarkovChain.from_matrix(P, name=f"srw[{g.name}]", graph=g)


def chain_lazy_maxdeg(g):
    """Stay or move, each option with probability ``1 / (deg(v) + 1)``."""
    P = np.zeros((g.n, g.n))
    for v, nbrs in enumerate(g.adjacency):
        p = 1.0 / (len(nbrs) + 1)
        P[v, v] = p
        P[v, list(nbrs)] = p
    return MarkovChain.from_matrix(P, name=f"lazy[{g.name}]", graph=g)


def chain_metropolis_uniform(g):
    """Metropolis-Hastings correction of the simple walk with uniform target."""
    deg = g.degrees
    P = np.zeros((g.n, g.n))
    for v, nbrs in enumerate(g.adjacency):
        for w in nbrs:
            P[v, w] = min(1.0 / deg[v], 1.0 / deg[w])
        P[v, v] = 1.0 - P[v].sum()
    P[P < 0] = 0.0
    return MarkovChain.from_matrix(P, name=f"metropolis[{g.name}]", graph=g)


def chain_two_state(p):
    """Two states that swap with probability ``p`` and stay with ``1 - p``.

    ``p = 1`` gives the deterministic (periodic) alternation.
    """
    p = check_real(p, "p", low=0.0, high=1.0, low_open=True)
    P = np.array([[1.0 - p, p], [p, 1.0 - p]])
    return MarkovChain.from_matrix(P, name=f"two_state[{p:g}]")


def chain_uniform(n):
    """Complete mixing in one step: every row is uniform (self-loops included)."""
    n = check_int(n, "n", minimum=1)
    return MarkovChain.from_matrix(np.full((n, n), 1.0 / n), name=f"uniform{n}")


CHAIN_BUILDERS = {
    "srw": chain_simple_rw,
    "lazy": chain_lazy_maxdeg,
    "metropolis": chain_metropolis_uniform,
}


# ---------------------------------------------------------------- stationary law

def stationary(P, tol=1e-12, max_iter=100_000):
    """Stationary distribution of an irreducible stochastic matrix.

    Solves ``pi (I - P) = 0`` with the normalisation replacing one equation,
    then polishes by power iteration. Raises :class:`ChainError` if the
    fixed-point residual stays above ``tol``.
    """
    P = np.asarray(P, dtype=float)
    n = P.shape[0]
    if n == 1:
        return np.ones(1)
    A = np.eye(n) - P.T
    A[-1, :] = 1.0
    rhs = np.zeros(n)
    rhs[-1] = 1.0
    try:
        pi = linalg.solve(A, rhs)
    except linalg.LinAlgError:
        pi = None
    if pi is None or not np.all(np.isfinite(pi)) or np.min(pi) < -1e-10:
        pi = _power_iteration(P, tol, max_iter)
    pi = np.clip(pi, 0.0, None)
    pi /= pi.sum()
    if np.max(np.abs(pi @ P - pi)) > max(tol, 1e-12):
        pi = _power_iteration(P, tol, max_iter, start=pi)
    if np.max(np.abs(pi @ P - pi)) > 1e-10:
        raise ChainError("stationary distribution did not converge (reducible chain?)")
    return pi


def _power_iteration(P, tol, max_iter, start=None):
    n = P.shape[0]
    # lazy version shares the fixed point and removes periodicity
    Q = 0.5 * (np.eye(n) + P)
    pi = np.full(n, 1.0 / n) if start is None else np.array(start, dtype=float)
    for _ in range(max_iter):
        nxt = pi @ Q
        nxt /= nxt.sum()
        if np.max(np.abs(nxt - pi)) < tol:
            return nxt
        pi = nxt
    raise ChainError(f"power iteration did not converge within {max_iter} iterations")


def chain_period(P):
    """Period of an irreducible chain (gcd of BFS level differences)."""
    n = P.shape[0]
    level = np.full(n, -1, dtype=np.int64)
    level[0] = 0
    frontier = [0]
    while frontier:
        nxt = []
        for u in frontier:
            for w in np.flatnonzero(P[u] > 0):
                if level[w] < 0:
                    level[w] = level[u] + 1
                    nxt.append(int(w))
        frontier = nxt
    if np.any(level < 0):
        raise ChainError("chain is not irreducible")
    period = 0
    us, ws = np.nonzero(P > 0)
    for u, w in zip(us, ws):
        period = math.gcd(period, int(abs(level[u] + 1 - level[w])))
        if period == 1:
            break
    return period


def spectral_gap(chain):
    """Absolute spectral gap ``1 - max |lambda|`` over non-unit eigenvalues.

    Uses the symmetrised kernel, so only meaningful for reversible chains.
    """
    if not chain.reversible:
        raise ChainError("spectral gap requires a reversible chain")
    s = np.sqrt(chain.pi)
    S = (s[:, None] * chain.P) / s[None, :]
    eig = np.sort(linalg.eigvalsh(0.5 * (S + S.T)))
    if chain.n == 1:
        return 1.0
    # drop the top eigenvalue (=1) once
    rest = np.abs(eig[:-1])
    return float(1.0 - np.max(rest))


def relaxation_time(chain):
    """``1 / spectral_gap``; ``inf`` when the gap is zero up to rounding (periodic chains)."""
    gap = spectral_gap(chain)
    return math.inf if gap <= 1e-12 else 1.0 / gap


# ---------------------------------------------------------------- mixing

def tv_profile(chain, t_max):
    """Worst-start total-variation distance ``max_v d_TV(P^t[v], pi)`` for ``t = 1..t_max``."""
    out = np.empty(t_max)
    M = chain.P.copy()
    for t in range(t_max):
        if t:
            M = M @ chain.P
        out[t] = 0.5 * np.max(np.abs(M - chain.pi).sum(axis=1))
    return out


def mixing_time_exact(chain, eps, cap=MIXING_CAP):
    """Smallest ``t >= 1`` such that every point-mass start is within ``eps`` of ``pi`` in TV.

    Point masses are the extreme starts since TV to ``pi`` is convex in the
    initial law. Raises :class:`ChainError` for periodic chains or when
    ``cap`` is reached.
    """
    eps = check_real(eps, "eps", low=0.0, low_open=True)
    if chain.n > EXACT_MAX_STATES:
        raise ChainError(f"exact mixing time limited to n <= {EXACT_MAX_STATES}")
    if chain.n > 1 and not chain.is_aperiodic():
        raise ChainError(f"chain {chain.name} is periodic; it never mixes")
    P, pi = chain.P, chain.pi
    M = P.copy()
    t = 1
    while True:
        if 0.5 * np.max(np.abs(M - pi).sum(axis=1)) <= eps:
            return t
        if t >= cap:
            raise ChainError(f"mixing time exceeds cap {cap}")
        # squaring would skip the first crossing, so step one at a time
        M = M @ P
        t += 1


def mixing_time_bound(chain, eps):
    """Upper bound ``ceil(tau_rel * ln(1 / (pi_min * eps)))`` valid for reversible chains."""
    return math.ceil(relaxation_time(chain) * math.log(1.0 / (chain.pi_min * eps)))


# ---------------------------------------------------------------- hitting

def hitting_times_exact(chain, method="auto"):
    """Matrix ``H[v, w] = E[tau_w | v_0 = v]`` with ``tau_w = inf{t >= 1 : v_t = w}``.

    The diagonal holds expected return times. ``method="solve"`` solves one
    linear system per target; ``"fundamental"`` uses the fundamental matrix
    ``Z = (I - P + 1 pi)^-1`` and ``H[v, w] = (Z[w, w] - Z[v, w]) / pi[w]``.
    ``"auto"`` picks the per-target solve up to 300 states.
    """
    n = chain.n
    if n > EXACT_MAX_STATES:
        raise ChainError(f"exact hitting times limited to n <= {EXACT_MAX_STATES}")
    if method == "auto":
        method = "solve" if n <= 300 else "fundamental"
    P = chain.P
    if method == "solve":
        H = np.zeros((n, n))
        for w in range(n):
            keep = np.arange(n) != w
            A = np.eye(n - 1) - P[np.ix_(keep, keep)]
            try:
                h = linalg.solve(A, np.ones(n - 1)) if n > 1 else np.zeros(0)
            except linalg.LinAlgError:
                raise ChainError("singular first-passage system (reducible chain)") from None
            H[keep, w] = h
            H[w, w] = 1.0 + P[w, keep] @ h
    elif method == "fundamental":
        pi = chain.pi
        Z = linalg.inv(np.eye(n) - P + np.outer(np.ones(n), pi))
        H = (np.diag(Z)[None, :] - Z) / pi[None, :]
        H[np.diag_indices(n)] = 1.0 / pi
    else:
        raise ValueError(f"unknown method {method!r}")
    if not np.all(np.isfinite(H)):
        raise ChainError("non-finite hitting times (reducible chain)")
    return H


def hitting_time(chain):
    """``tau_hit``: largest entry of :func:`hitting_times_exact` (return times included)."""
    return float(np.max(hitting_times_exact(chain)))


# ---------------------------------------------------------------- sampling kernels

def _cumulative(P):
    cum = np.cumsum(P, axis=1)
    cum[:, -1] = 1.0
    return np.ascontiguousarray(cum)


@numba.njit(cache=True)
def _next_state(cum, v, u):
    row = cum[v]
    lo, hi = 0, row.shape[0] - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if row[mid] > u:
            hi = mid
        else:
            lo = mid + 1
    return lo


@numba.njit(cache=True)
def _walk(cum, v0, u, out):
    v = v0
    out[0] = v
    for t in range(1, out.shape[0]):
        v = _next_state(cum, v, u[t - 1])
        out[t] = v


@numba.njit(cache=True)
def _cover_chunk(cum, v, u, seen, n_seen, steps):
    # advance until every state is seen; returns (v, n_seen, steps)
    n = seen.shape[0]
    for k in range(u.shape[0]):
        if n_seen == n:
            break
        v = _next_state(cum, v, u[k])
        steps += 1
        if not seen[v]:
            seen[v] = True
            n_seen += 1
    return v, n_seen, steps


@numba.njit(cache=True)
def _first_passage_chunk(cum, v, target, u, steps):
    for k in range(u.shape[0]):
        v = _next_state(cum, v, u[k])
        steps += 1
        if v == target:
            return v, steps, True
    return v, steps, False


TRAJECTORY_CHUNK = 1 << 20


def _start_state(chain, v0, rng):
    if isinstance(v0, str):
        if v0 != "stationary":
            raise ValueError(f"v0 must be a node id or 'stationary', got {v0!r}")
        return int(np.searchsorted(np.cumsum(chain.pi)[:-1], rng.random(), side="right"))
    start = check_int(v0, "v0", minimum=0)
    if start >= chain.n:
        raise ValueError(f"v0={start} out of range for n={chain.n}")
    return start


def iter_trajectory(chain, v0, T, seed, chunk=TRAJECTORY_CHUNK):
    """Yield ``v_0, ..., v_{T-1}`` in consecutive int64 blocks of at most ``chunk`` states.

    The concatenated blocks equal :func:`sample_trajectory` with the same
    arguments, so long runs never hold the whole path in memory.
    """
    T = check_int(T, "T", minimum=1)
    chunk = check_int(chunk, "chunk", minimum=1)
    rng = make_rng(seed, STREAM_SAMPLER)
    v = _start_state(chain, v0, rng)
    cum = _cumulative(chain.P)
    done = 0
    while done < T:
        m = min(chunk, T - done)
        out = np.empty(m, dtype=np.int64)
        if done == 0:
            _walk(cum, v, rng.random(m - 1), out)
        else:
            # first state of this block is one step after the previous block's last
            u = rng.random(m)
            _walk(cum, _next_state(cum, v, u[0]), u[1:], out)
        v = int(out[-1])
        done += m
        yield out


def sample_trajectory(chain, v0, T, seed):
    """Node sequence ``v_0, ..., v_{T-1}`` of the chain.

    ``v0`` is a node id or ``"stationary"`` (drawn from ``pi``).
    """
    T = check_int(T, "T", minimum=1)
    rng = make_rng(seed, STREAM_SAMPLER)
    start = _start_state(chain, v0, rng)
    u = rng.random(T - 1)
    out = np.empty(T, dtype=np.int64)
    _walk(_cumulative(chain.P), start, u, out)
    return out


def first_passage_mc(chain, v, w, reps, seed, cap=10**8):
    """Monte-Carlo samples of ``tau_w`` started at ``v`` (return time if ``v == w``)."""
    reps = check_int(reps, "reps", minimum=1)
    cum = _cumulative(chain.P)
    out = np.empty(reps)
    for r in range(reps):
        rng = make_rng(seed, STREAM_MC, v, w, r)
        cur, steps, done = v, 0, False
        chunk = 256
        while not done:
            cur, steps, done = _first_passage_chunk(cum, cur, w, rng.random(chunk), steps)
            if steps > cap:
                raise ChainError("first-passage trajectory exceeded the step cap")
            chunk = min(chunk * 2, 1 << 20)
        out[r] = steps
    return out


def _cover_time_samples(chain, v0, reps, seed, cap):
    cum = _cumulative(chain.P)
    n = chain.n
    out = np.empty(reps)
    for r in range(reps):
        rng = make_rng(seed, STREAM_MC, 1_000_003, v0, r)
        seen = np.zeros(n, dtype=np.bool_)
        v, steps = v0, 0
        n_seen = 0
        if n > 1:
            # tau_w >= 1: the start state still has to be (re)visited
            chunk = 4 * n
            while n_seen < n:
                v, n_seen, steps = _cover_chunk(cum, v, rng.random(chunk), seen, n_seen, steps)
                if steps > cap:
                    raise ChainError("cover trajectory exceeded the step cap")
                chunk = min(chunk * 2, 1 << 20)
        else:
            steps = 1
        out[r] = steps
    return out


def cover_time_mc(chain, start_policy="worst-start", reps=200, seed=0, cap=10**8):
    """Monte-Carlo cover time ``max_v E[max_w tau_w | v_0 = v]``.

    Parameters
    ----------
    start_policy : "worst-start" or int
        Maximise over every start, or use the given fixed start.
    reps : int
        Trajectories per start (at least 100).

    Returns
    -------
    mean, half_width : float
        Estimate for the maximising start and its 95% normal half-width.
    """
    reps = check_int(reps, "reps", minimum=100)
    starts = range(chain.n) if start_policy == "worst-start" else [check_int(start_policy, "start", minimum=0)]
    best = (-math.inf, 0.0)
    for v0 in starts:
        s = _cover_time_samples(chain, v0, reps, seed, cap)
        mean = float(np.mean(s))
        if mean > best[0]:
            half = 1.96 * float(np.std(s, ddof=1)) / math.sqrt(reps)
            best = (mean, half)
    return best


def cover_time_exact(chain, start):
    """Exact expected cover time from ``start`` (test oracle, ``n <= 12``).

    Solves the absorbing chain on (visited set, position); a state counts as
    visited only once hit at some ``t >= 1``.
    """
    n = chain.n
    if n > 12:
        raise ChainError("exact cover time is limited to n <= 12")
    if n == 1:
        return 1.0
    P = chain.P
    full = (1 << n) - 1
    E = {}
    # larger visited sets first; the position always lies inside a non-empty set
    for mask in sorted(range(1, full), key=lambda m: -bin(m).count("1")):
        members = [u for u in range(n) if mask >> u & 1]
        pos = {u: i for i, u in enumerate(members)}
        A = np.eye(len(members))
        rhs = np.ones(len(members))
        for i, v in enumerate(members):
            for u in np.flatnonzero(P[v]):
                if u in pos:
                    A[i, pos[u]] -= P[v, u]
                elif mask | (1 << u) != full:
                    rhs[i] += P[v, u] * E[mask | (1 << u)][u]
        E[mask] = dict(zip(members, linalg.solve(A, rhs)))
    return float(1.0 + sum(P[start, u] * E[1 << u][u] for u in np.flatnonzero(P[start])))


def harmonic(k):
    return float(sum(1.0 / j for j in range(1, k + 1)))


def matthews_bound(tau_hit, n):
    """Cover-time upper bound ``H_{n-1} * tau_hit``."""
    return harmonic(n - 1) * tau_hit


# ---------------------------------------------------------------- staleness

@numba.njit(cache=True)
def max_staleness(traj, n):
    """``A_t = max_v (t - d_v(t))`` along ``traj``, with ``d_v(t)`` the last visit at or before ``t``.

    Unvisited nodes count as last visited at time 0.
    """
    T = traj.shape[0]
    last = np.zeros(n, dtype=np.int64)
    out = np.empty(T, dtype=np.int64)
    for t in range(T):
        last[traj[t]] = t
        m = 0
        for v in range(n):
            d = t - last[v]
            if d > m:
                m = d
        out[t] = m
    return out


def alternation_count(traj, v, w):
    """Number of switches between ``v`` and ``w`` in the visit sequence.

    Visits to other nodes are ignored, so ``v x v w x w v`` has 2 switches.
    """
    traj = np.asarray(traj)
    seq = traj[(traj == v) | (traj == w)]
    if seq.size < 2:
        return 0
    return int(np.count_nonzero(seq[1:] != seq[:-1]))


def expected_alternations(chain, v, w, T, start=None):
    """Exact ``E[alternation_count(v_0..v_{T-1}, v, w)]`` by forward recursion.

    The state is (position, last carrier seen), with ``start`` the law of
    ``v_0`` (``pi`` by default). Costs ``O(T n^2)``.
    """
    n = chain.n
    P = chain.P
    mu = np.array(chain.pi if start is None else start, dtype=float)
    # columns: last seen none, v, w
    D = np.zeros((n, 3))
    D[:, 0] = mu
    D[v] = [0.0, mu[v], 0.0]
    D[w] = [0.0, 0.0, mu[w]]
    total = 0.0
    for _ in range(T - 1):
        D = P.T @ D
        total += D[v, 2] + D[w, 1]
        D[v] = [0.0, D[v].sum(), 0.0]
        D[w] = [0.0, 0.0, D[w].sum()]
    return float(total)


# ---------------------------------------------------------------- aggregate

def chain_times(chain, mc_reps=200, seed=0, eps=None, eps_quarter=0.25):
    """Fill every :class:`ChainTimes` field for ``chain``.

    ``tau_mix`` uses ``eps`` (``pi_min / 2`` by default) and
    ``tau_mix_quarter`` uses ``eps_quarter``. Periodic chains never mix and
    get ``inf`` for both; ``tau_rel`` is NaN for non-reversible chains.
    """
    eps = chain.pi_min / 2.0 if eps is None else eps
    H = hitting_times_exact(chain)
    tau_hit = float(np.max(H))
    if chain.n == 1 or chain.is_aperiodic():
        tau_mix_q = float(mixing_time_exact(chain, eps_quarter))
        tau_mix = float(mixing_time_exact(chain, eps))
    else:
        tau_mix_q = tau_mix = math.inf
    tau_rel = relaxation_time(chain) if chain.reversible else math.nan
    cov, half = cover_time_mc(chain, "worst-start", mc_reps, seed)
    return ChainTimes(
        n=chain.n,
        tau_mix_quarter=tau_mix_q,
        tau_mix=tau_mix,
        tau_rel=tau_rel,
        tau_hit=tau_hit,
        tau_cov_mc=cov,
        tau_cov_half_width=half,
        tau_cov_matthews=matthews_bound(tau_hit, chain.n),
        pi_min=chain.pi_min,
    )
