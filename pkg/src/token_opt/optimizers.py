"""Markov-chain sampled gradient methods and gossip baselines.

The single-step functions (``mc_sgd_step``, ``mc_sag_step``,
``dsgd_gossip_round`` ...) are pure building blocks. The estimator classes
wrap them in a scikit-learn style interface: hyper-parameters go to
``__init__`` (so ``get_params`` / ``set_params`` / ``clone`` work), and
``fit(objective, chain)`` runs the method and stores ``x_``, ``trace_`` and
``n_comms_``.
"""

from dataclasses import dataclass, field
import math

import numba
import numpy as np
from sklearn.base import BaseEstimator

from ._rng import STREAM_INIT, STREAM_NOISE, STREAM_SAMPLER, make_rng
from ._validation import check_int, check_real, check_vector
from .chains import EXACT_MAX_STATES, hitting_times_exact, mixing_time_exact
from .objectives import QuadraticObjective, dissimilarity_stats, estimate_f_star
from .samplers import SamplerStream

DIVERGENCE_NORM = 1e12


class DivergenceError(FloatingPointError):
    """Iterate norm exceeded the divergence guard or became non-finite."""

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


def _guard(x, t):
    sq = float(np.dot(x.ravel(), x.ravel()))
    if not sq <= DIVERGENCE_NORM**2:
        raise DivergenceError(f"iterate diverged at step {t} (||x||^2 = {sq:.3e})", t=t)


# ---------------------------------------------------------------- noise models

@dataclass(frozen=True)
class GaussianNoise:
    """Additive isotropic Gaussian perturbation of standard deviation ``sd``."""

    sd: float

    def perturb(self, g, obj, v, x, rng):
        if self.sd == 0:
            return g
        return g + self.sd * rng.standard_normal(g.shape)


@dataclass(frozen=True)
class MinibatchNoise:
    """Mean gradient of ``batch_size`` local samples drawn without replacement."""

    batch_size: int

    def perturb(self, g, obj, v, x, rng):
        m = obj.n_subcomponents
        if m is None:
            raise TypeError(f"objective {obj.name} has no local sub-components for minibatching")
        if self.batch_size >= m:
            return g
        idx = rng.choice(m, size=self.batch_size, replace=False)
        return obj.sub_grads(v, idx, x).mean(axis=0)


def make_noise(spec):
    """Build a noise model from ``None``, a model instance or a config dict."""
    if spec is None or isinstance(spec, (GaussianNoise, MinibatchNoise)):
        return spec
    kind = spec.get("kind")
    if kind == "gaussian":
        return GaussianNoise(check_real(spec.get("sd", 0.0), "noise.sd", low=0.0))
    if kind == "minibatch":
        return MinibatchNoise(check_int(spec.get("batch_size"), "noise.batch_size", minimum=1))
    raise ValueError(f"unknown noise kind {kind!r}")


# ---------------------------------------------------------------- traces

TRACE_COLUMNS = ("t", "comms", "f_gap", "grad_norm_sq", "node")


@dataclass
class Trace:
    """Logged optimisation run: one record per logged step."""

    metadata: dict = field(default_factory=dict)
    t: list = field(default_factory=list)
    comms: list = field(default_factory=list)
    node: list = field(default_factory=list)
    f_gap: list = field(default_factory=list)
    grad_norm_sq: list = field(default_factory=list)

    def record(self, t, comms, node, x, obj):
        val, g = obj.value_and_grad(x)
        f_star = obj.f_star if obj.f_star is not None else 0.0
        if not np.isfinite(val):
            raise DivergenceError(f"non-finite objective value at step {t}", t=t)
        self.t.append(int(t))
        self.comms.append(int(comms))
        self.node.append(int(node))
        self.f_gap.append(float(val - f_star))
        self.grad_norm_sq.append(float(g @ g))

    def __len__(self):
        return len(self.t)

    def column(self, name):
        dtype = np.int64 if name in ("t", "comms", "node") else float
        return np.asarray(getattr(self, name), dtype=dtype)

    def rows(self):
        return zip(self.t, self.comms, self.f_gap, self.grad_norm_sq, self.node)


def _log_steps(T, log_every):
    return lambda t: t % log_every == 0 or t == T


# ---------------------------------------------------------------- MC-SGD

def mc_sgd_step(x, v, gamma, obj):
    """One token step ``x - gamma * grad f_v(x)``."""
    g = obj.component_grad(v, x)
    if not np.all(np.isfinite(g)):
        raise DivergenceError(f"non-finite gradient at node {v}")
    return x - gamma * g


def mc_sgd_noisy_step(x, v, gamma, obj, noise, rng):
    """Token step with a locally perturbed gradient (Gaussian or minibatch)."""
    g = obj.component_grad(v, x)
    if noise is not None:
        g = noise.perturb(g, obj, v, x, rng)
    if not np.all(np.isfinite(g)):
        raise DivergenceError(f"non-finite gradient at node {v}")
    return x - gamma * g


def theorem51_stepsize(L, tau, F0, sigma_bar_sq, T):
    """Horizon-dependent constant step ``min(1/(48 L tau), sqrt(F0 / (T L tau sigma^2)))``.

    ``tau`` is the mixing time times ``ln T``.
    """
    L = check_real(L, "L", low=0.0, low_open=True)
    tau = check_real(tau, "tau", low=0.0, low_open=True)
    cap = 1.0 / (48.0 * L * tau)
    if sigma_bar_sq <= 0:
        return cap
    return min(cap, math.sqrt(F0 / (T * L * tau * sigma_bar_sq)))


# ---------------------------------------------------------------- MC-SAG

class McSagState:
    """Iterate and memory of the Markov-chain SAG method.

    Holds ``x``, the stored gradient table ``h`` (one row per node), the
    running average ``g_bar``, the last-visit table ``d_last`` (0 for unvisited
    nodes), the staleness ``tau_t = max_v (t - d_last[v])``, the step counter
    ``t`` and the communication counter ``comms``.

    Staleness is tracked in O(1) per visit with a recency-ordered doubly
    linked list: the least recently visited node sits at the tail.
    """

    def __init__(self, x0, h, g_bar=None):
        self.x = np.array(x0, dtype=float)
        self.h = np.array(h, dtype=float)
        n = self.h.shape[0]
        self.g_bar = self.h.mean(axis=0) if g_bar is None else np.array(g_bar, dtype=float)
        self.d_last = np.zeros(n, dtype=np.int64)
        self.t = 0
        self.comms = 0
        self.tau_t = 0
        # recency list: _prev/_next over node ids, _head most recent
        self._next = np.arange(1, n + 1, dtype=np.int64)
        self._next[-1] = -1
        self._prev = np.arange(-1, n - 1, dtype=np.int64)
        self._head, self._tail = 0, n - 1

    @classmethod
    def perfect_init(cls, obj, x0):
        """``h_v = grad f_v(x0)`` and ``g_bar`` the plain average of the table."""
        return cls(x0, obj.component_grads(np.asarray(x0, dtype=float)))

    @classmethod
    def arbitrary_init(cls, x0, h):
        """Any table ``h``; ``g_bar`` is set to its average."""
        return cls(x0, h)

    @property
    def n(self):
        return self.h.shape[0]

    def visit(self, v):
        """Mark node ``v`` as visited at the current step and refresh ``tau_t``."""
        self.d_last[v] = self.t
        if v != self._head:
            p, q = self._prev[v], self._next[v]
            if p >= 0:
                self._next[p] = q
            if q >= 0:
                self._prev[q] = p
            else:
                self._tail = p
            self._prev[v] = -1
            self._next[v] = self._head
            self._prev[self._head] = v
            self._head = v
        self.tau_t = int(self.t - self.d_last[self._tail])

    def staleness_bruteforce(self, t=None):
        """``max_v (t - d_last[v])`` straight from the definition."""
        t = self.t if t is None else t
        return int(np.max(t - self.d_last))

    def average_drift(self):
        """``||g_bar - mean(h)|| / (1 + ||g_bar||)``."""
        return float(np.linalg.norm(self.g_bar - self.h.mean(axis=0)) / (1.0 + np.linalg.norm(self.g_bar)))


def adaptive_stepsize(state, tau_hit, L, factor=2.0):
    """Staleness-aware step ``1 / (factor * L * (tau_hit + tau_t))``; ``factor=2`` by default."""
    return 1.0 / (factor * L * (tau_hit + state.tau_t))


def mc_sag_step(state, v, obj, stepsize):
    """Advance ``state`` by one visit of node ``v``.

    ``stepsize`` is a float or a callable ``state -> gamma`` evaluated after the
    visit is registered. Update order: gradient at the current iterate, running
    average, iterate, table entry.
    """
    state.visit(v)
    gamma = stepsize(state) if callable(stepsize) else stepsize
    g_new = obj.component_grad(v, state.x)
    if not np.all(np.isfinite(g_new)):
        raise DivergenceError(f"non-finite gradient at node {v}", t=state.t)
    state.g_bar += (g_new - state.h[v]) / state.n
    state.x -= gamma * state.g_bar
    state.h[v] = g_new
    state.t += 1
    state.comms += 1
    return gamma


# ---------------------------------------------------------------- gossip

def dsgd_gossip_round(X, W, gamma, obj, noise=None, rng=None, momentum=None, beta=0.0):
    """One synchronous round ``X <- W (X - gamma * G)``.

    Row ``v`` of ``G`` is ``grad f_v(X[v])`` (optionally perturbed). With
    ``beta > 0`` the heavy-ball buffer ``momentum`` is updated in place and
    replaces ``G``.
    """
    X = np.asarray(X, dtype=float)
    W = np.asarray(W, dtype=float)
    if W.shape != (X.shape[0], X.shape[0]):
        raise ValueError(f"gossip matrix shape {W.shape} does not match {X.shape[0]} nodes")
    G = obj.node_grads(X)
    if noise is not None:
        G = np.stack([noise.perturb(G[v], obj, v, X[v], rng) for v in range(X.shape[0])])
    if beta:
        momentum *= beta
        momentum += G
        G = momentum
    return W @ (X - gamma * G)


def randomized_gossip_step(X, edge, stepper, gamma, obj, noise=None, rng=None):
    """Pairwise average along ``edge`` then a local gradient step at ``stepper``."""
    u, w = edge
    avg = 0.5 * (X[u] + X[w])
    X[u] = avg
    X[w] = avg
    g = obj.component_grad(stepper, X[stepper])
    if noise is not None:
        g = noise.perturb(g, obj, stepper, X[stepper], rng)
    X[stepper] = X[stepper] - gamma * g
    return X



# ---------------------------------------------------------------- compiled quadratic loop

@numba.njit(cache=True)
def _quad_full(Hbar, bbar, cbar, diag, x):
    d = x.shape[0]
    f = cbar
    g2 = 0.0
    for i in range(d):
        if diag:
            hx = Hbar[i, i] * x[i]
        else:
            hx = 0.0
            for j in range(d):
                hx += Hbar[i, j] * x[j]
        f += 0.5 * x[i] * hx - bbar[i] * x[i]
        gi = hx - bbar[i]
        g2 += gi * gi
    return f, g2


@numba.njit(cache=True)
def _quad_sgd_chunk(H, b, Hbar, bbar, cbar, diag, nodes, s, stop, T, x, gamma, log_every, track_min,
                    best, rec_t, rec_f, rec_g):
    d = x.shape[0]
    gv = np.empty(d)
    n_rec = 0
    for t in range(s, stop):
        if track_min:
            f, g2 = _quad_full(Hbar, bbar, cbar, diag, x)
            if g2 < best:
                best = g2
        v = nodes[t - s]
        nrm = 0.0
        for i in range(d):
            if diag:
                gv[i] = H[v, i, i] * x[i] - b[v, i]
            else:
                acc = 0.0
                for j in range(d):
                    acc += H[v, i, j] * x[j]
                gv[i] = acc - b[v, i]
        for i in range(d):
            x[i] = x[i] - gamma * gv[i]
            nrm += x[i] * x[i]
        if not nrm <= 1e24:
            return n_rec, best, t + 1
        if (t + 1) % log_every == 0 or t + 1 == T:
            f, g2 = _quad_full(Hbar, bbar, cbar, diag, x)
            rec_t[n_rec] = t + 1
            rec_f[n_rec] = f
            rec_g[n_rec] = g2
            n_rec += 1
    return n_rec, best, -1


class _QuadKernel:
    """Compiled MC-SGD loop for :class:`QuadraticObjective` (no local noise)."""

    def __init__(self, obj, T, log_every):
        self.H = np.ascontiguousarray(obj.H)
        self.b = np.ascontiguousarray(obj.b)
        w = obj.weights
        self.Hbar = np.ascontiguousarray(np.einsum("v,vij->ij", w, obj.H))
        self.bbar = w @ obj.b
        self.cbar = float(w @ obj.c)
        off = obj.H - np.einsum("vii->vi", obj.H)[:, :, None] * np.eye(obj.dim)[None]
        self.diag = bool(not np.any(off))
        self.T, self.log_every = T, log_every
        self.f_star = obj.f_star if obj.f_star is not None else 0.0

    def run(self, chunk, s, stop, x, gamma, track_min, best, trace, cps):
        m = len(chunk)
        cap = (stop - s) // self.log_every + 2
        rec_t = np.empty(cap, dtype=np.int64)
        rec_f = np.empty(cap)
        rec_g = np.empty(cap)
        n_rec, best, bad = _quad_sgd_chunk(self.H, self.b, self.Hbar, self.bbar, self.cbar, self.diag, chunk,
                                           s, stop, self.T, x, float(gamma), self.log_every, bool(track_min),
                                           float(best), rec_t, rec_f, rec_g)
        if bad >= 0:
            raise DivergenceError(f"iterate diverged at step {bad}", t=bad)
        for k in range(n_rec):
            t = int(rec_t[k])
            trace.t.append(t)
            trace.comms.append(t * cps)
            trace.node.append(int(chunk[t - s]) if t < s + m else -1)
            trace.f_gap.append(float(rec_f[k] - self.f_star))
            trace.grad_norm_sq.append(float(rec_g[k]))
        return best


# ---------------------------------------------------------------- estimators

def _initial_point(x0, obj):
    if x0 is None:
        return np.zeros(obj.dim)
    return check_vector(x0, obj.dim, "x0").copy()


def _exact_tau_hit(chain):
    if chain.n > EXACT_MAX_STATES:
        raise ValueError(f"tau_hit must be supplied for chains with more than {EXACT_MAX_STATES} states")
    return float(np.max(hitting_times_exact(chain)))


class _TokenMethod(BaseEstimator):

    def _sampler(self, chain, n):
        return SamplerStream(self.sampler, chain, seed=self.random_state, k=self.wait_k,
                             v0=self.v0, n=n)

    def _start_trace(self, obj, **extra):
        meta = {"estimator": type(self).__name__, "params": self.get_params(),
                "objective": obj.name, "f_star": obj.f_star, "f_star_source": obj.f_star_source}
        meta.update(extra)
        return Trace(metadata=meta)


class MarkovSGD(_TokenMethod):
    """Stochastic gradient descent along a node stream (token algorithm).

    Parameters
    ----------
    gamma : float
        Constant stepsize (``gamma_policy="constant"``).
    gamma_policy : {"constant", "theorem51"}
        ``"theorem51"`` uses :func:`theorem51_stepsize` with the chain's exact
        mixing time and the horizon ``n_steps``.
    n_steps : int
        Number of gradient steps ``T``.
    sampler : {"markov", "iid", "reshuffle", "wait_for_mix"}
    wait_k : int or None
        Stride for ``"wait_for_mix"`` (defaults to the mixing time).
    noise : dict, GaussianNoise, MinibatchNoise or None
        Local noise model.
    sigma_bar_sq : float or None
        Dissimilarity level for ``"theorem51"``; estimated when ``None``.
    tau_mix : int or None
        Mixing time for ``"theorem51"``; computed exactly when ``None``.
    x0 : array-like or None
        Starting point, zeros by default.
    log_every : int
        Trace granularity (``t = 0``, multiples of ``log_every`` and ``T``).
    random_state : int
        Seed of every random stream of the run.
    track_min : bool
        Evaluate ``||grad f(x_t)||^2`` at every step ``t < T`` and store the
        minimum in ``min_grad_norm_sq_``.
    backend : {"auto", "python", "numba"}
        ``"auto"`` runs quadratic objectives without local noise through a
        compiled loop (same recursion and trace, up to rounding) and everything else in
        Python.
    """

    def __init__(self, gamma=0.01, gamma_policy="constant", n_steps=1000, sampler="markov",
                 wait_k=None, noise=None, sigma_bar_sq=None, tau_mix=None, x0=None, v0="stationary",
                 log_every=1, random_state=0, track_min=False, backend="auto"):
        self.gamma = gamma
        self.gamma_policy = gamma_policy
        self.n_steps = n_steps
        self.sampler = sampler
        self.wait_k = wait_k
        self.noise = noise
        self.sigma_bar_sq = sigma_bar_sq
        self.tau_mix = tau_mix
        self.x0 = x0
        self.v0 = v0
        self.log_every = log_every
        self.random_state = random_state
        self.track_min = track_min
        self.backend = backend

    def _resolve_gamma(self, obj, chain, x0, T):
        if self.gamma_policy == "constant":
            return check_real(self.gamma, "gamma", low=0.0, low_open=True)
        if self.gamma_policy == "theorem51":
            if obj.f_star is None:
                estimate_f_star(obj, x0=x0, seed=self.random_state)
            tau_mix = self.tau_mix if self.tau_mix is not None else mixing_time_exact(chain, chain.pi_min / 2.0)
            tau = tau_mix * max(1.0, math.log(max(T, 2)))
            sig = self.sigma_bar_sq
            if sig is None:
                ref = obj.x_star if obj.x_star is not None else x0
                sig = dissimilarity_stats(obj, ref, seed=self.random_state).sigma_bar_sq
            F0 = max(obj.value(x0) - obj.f_star, 1e-300)
            return theorem51_stepsize(obj.L, tau, F0, sig, T)
        raise ValueError(f"gamma_policy {self.gamma_policy!r} is not available for MarkovSGD")

    def _use_kernel(self, obj, noise):
        if self.backend == "python":
            return False
        eligible = isinstance(obj, QuadraticObjective) and noise is None
        if self.backend == "numba" and not eligible:
            raise ValueError("the numba backend needs a QuadraticObjective and no local noise")
        return eligible

    def fit(self, objective, chain=None):
        obj = objective
        T = check_int(self.n_steps, "n_steps", minimum=0)
        log_every = check_int(self.log_every, "log_every", minimum=1)
        if self.backend not in ("auto", "python", "numba"):
            raise ValueError(f"unknown backend {self.backend!r}")
        x = _initial_point(self.x0, obj)
        stream = self._sampler(chain, obj.n_components)
        cps = stream.comms_per_sample
        gamma = self._resolve_gamma(obj, chain, x, T)
        noise = make_noise(self.noise)
        rng = make_rng(self.random_state, STREAM_NOISE)
        logged = _log_steps(T, log_every)
        trace = self._start_trace(obj, gamma=gamma, comms_per_sample=cps)
        kernel = _QuadKernel(obj, T, log_every) if self._use_kernel(obj, noise) else None
        best = math.inf
        grad = obj.component_grad
        pending = False
        s = 0
        for chunk in stream.iter_nodes(T + 1):
            m = len(chunk)
            if pending:
                trace.node[-1] = int(chunk[0])
                pending = False
            if s == 0:
                trace.record(0, 0, chunk[0], x, obj)
            stop = min(s + m, T)
            if kernel is not None:
                n_before = len(trace)
                best = kernel.run(chunk, s, stop, x, gamma, self.track_min, best, trace, cps)
                if len(trace) > n_before and trace.t[-1] >= s + m:
                    pending = True
            else:
                for t in range(s, stop):
                    v = int(chunk[t - s])
                    if self.track_min:
                        gf = obj.grad(x)
                        best = min(best, float(gf @ gf))
                    g = grad(v, x)
                    if noise is not None:
                        g = noise.perturb(g, obj, v, x, rng)
                    x = x - gamma * g
                    _guard(x, t + 1)
                    if logged(t + 1):
                        if t + 1 < s + m:
                            trace.record(t + 1, (t + 1) * cps, chunk[t + 1 - s], x, obj)
                        else:
                            trace.record(t + 1, (t + 1) * cps, -1, x, obj)
                            pending = True
            s += m
        self.x_ = x
        self.gamma_ = gamma
        self.trace_ = trace
        self.n_comms_ = T * cps
        if self.track_min:
            self.min_grad_norm_sq_ = best if T > 0 else trace.grad_norm_sq[0]
        return self


class MarkovSAG(_TokenMethod):
    """Stochastic averaged gradient along a node stream (token algorithm).

    Parameters
    ----------
    gamma_policy : {"adaptive_eq7", "constant"}
        ``"adaptive_eq7"``: ``1 / (step_factor * L * (tau_hit + tau_t))``.
    gamma : float
        Constant stepsize when ``gamma_policy="constant"``.
    init : {"perfect", "zero"} or array of shape (n, dim)
        Gradient table at start. ``"perfect"`` stores ``grad f_v(x0)``.
    step_factor : float
        2 for the perfect initialisation, 4 for arbitrary tables.
    tau_hit : float or None
        Hitting time used by the adaptive policy; computed exactly when
        ``None``.
    check_staleness : bool
        Compare the tracked staleness with its definition at every step.
    """

    def __init__(self, gamma=None, gamma_policy="adaptive_eq7", n_steps=1000, sampler="markov",
                 wait_k=None, init="perfect", step_factor=2.0, tau_hit=None, x0=None,
                 v0="stationary", log_every=1, random_state=0, check_staleness=False):
        self.gamma = gamma
        self.gamma_policy = gamma_policy
        self.n_steps = n_steps
        self.sampler = sampler
        self.wait_k = wait_k
        self.init = init
        self.step_factor = step_factor
        self.tau_hit = tau_hit
        self.x0 = x0
        self.v0 = v0
        self.log_every = log_every
        self.random_state = random_state
        self.check_staleness = check_staleness

    def _init_state(self, obj, x0):
        if isinstance(self.init, str):
            if self.init == "perfect":
                return McSagState.perfect_init(obj, x0)
            if self.init == "zero":
                return McSagState.arbitrary_init(x0, np.zeros((obj.n_components, obj.dim)))
            if self.init == "random":
                rng = make_rng(self.random_state, STREAM_INIT)
                return McSagState.arbitrary_init(x0, rng.standard_normal((obj.n_components, obj.dim)))
            raise ValueError(f"unknown init {self.init!r}")
        return McSagState.arbitrary_init(x0, np.asarray(self.init, dtype=float))

    def fit(self, objective, chain=None):
        obj = objective
        T = check_int(self.n_steps, "n_steps", minimum=0)
        log_every = check_int(self.log_every, "log_every", minimum=1)
        x0 = _initial_point(self.x0, obj)
        stream = self._sampler(chain, obj.n_components)
        nodes = stream.nodes(T + 1)
        cps = stream.comms_per_sample
        state = self._init_state(obj, x0)
        if self.gamma_policy == "adaptive_eq7":
            tau_hit = self.tau_hit if self.tau_hit is not None else _exact_tau_hit(chain)
            factor, L = float(self.step_factor), obj.L

            def policy(s):
                return 1.0 / (factor * L * (tau_hit + s.tau_t))
        elif self.gamma_policy == "constant":
            tau_hit = self.tau_hit
            policy = check_real(self.gamma, "gamma", low=0.0, low_open=True)
        else:
            raise ValueError(f"gamma_policy {self.gamma_policy!r} is not available for MarkovSAG")
        logged = _log_steps(T, log_every)
        trace = self._start_trace(obj, tau_hit=tau_hit, comms_per_sample=cps)
        trace.record(0, 0, nodes[0], state.x, obj)
        gammas = np.empty(T)
        for t in range(T):
            gammas[t] = mc_sag_step(state, int(nodes[t]), obj, policy)
            if self.check_staleness and state.tau_t != state.staleness_bruteforce(state.t - 1):
                raise AssertionError(f"staleness tracking mismatch at step {t}")
            _guard(state.x, t + 1)
            if logged(t + 1):
                trace.record(t + 1, (t + 1) * cps, nodes[t + 1], state.x, obj)
        self.x_ = state.x
        self.state_ = state
        self.gammas_ = gammas
        self.trace_ = trace
        self.n_comms_ = T * cps
        return self


class GossipSGD(BaseEstimator):
    """Decentralised SGD with gossip averaging (consensus baseline).

    Parameters
    ----------
    gamma : float
        Local stepsize.
    n_rounds : int
        Synchronous rounds (``mode="fixed"``) or pairwise exchanges
        (``mode="randomized"``).
    mode : {"fixed", "randomized"}
        ``"fixed"`` applies ``W = P`` every round and pays ``|E|``
        communications; ``"randomized"`` averages one uniform random edge and
        lets one endpoint take a gradient step, paying 1.
    momentum : float
        Heavy-ball coefficient for ``"fixed"`` (extension, 0 disables).
    """

    def __init__(self, gamma=0.01, n_rounds=100, mode="fixed", momentum=0.0, noise=None,
                 x0=None, log_every=1, random_state=0):
        self.gamma = gamma
        self.n_rounds = n_rounds
        self.mode = mode
        self.momentum = momentum
        self.noise = noise
        self.x0 = x0
        self.log_every = log_every
        self.random_state = random_state

    def fit(self, objective, chain):
        obj = objective
        T = check_int(self.n_rounds, "n_rounds", minimum=0)
        log_every = check_int(self.log_every, "log_every", minimum=1)
        gamma = check_real(self.gamma, "gamma", low=0.0, low_open=True)
        graph = chain.graph
        if graph is None:
            raise ValueError("gossip needs a chain built on a graph")
        n_edges = graph.edge_count
        X = np.tile(_initial_point(self.x0, obj), (obj.n_components, 1))
        noise = make_noise(self.noise)
        rng = make_rng(self.random_state, STREAM_NOISE)
        logged = _log_steps(T, log_every)
        trace = Trace(metadata={"estimator": type(self).__name__, "params": self.get_params(),
                                "objective": obj.name, "f_star": obj.f_star,
                                "f_star_source": obj.f_star_source, "edges": n_edges})
        trace.record(0, 0, -1, X.mean(axis=0), obj)
        if self.mode == "fixed":
            W = chain.P
            buf = np.zeros_like(X)
            cost = n_edges
            for r in range(T):
                X = dsgd_gossip_round(X, W, gamma, obj, noise, rng, buf, self.momentum)
                _guard(X, r + 1)
                if logged(r + 1):
                    trace.record(r + 1, (r + 1) * cost, -1, X.mean(axis=0), obj)
        elif self.mode == "randomized":
            edges = np.array(graph.edges(), dtype=np.int64)
            srng = make_rng(self.random_state, STREAM_SAMPLER, 5)
            picks = srng.integers(0, len(edges), size=T)
            sides = srng.integers(0, 2, size=T)
            cost = 1
            for r in range(T):
                u, w = edges[picks[r]]
                stepper = int(u if sides[r] == 0 else w)
                randomized_gossip_step(X, (int(u), int(w)), stepper, gamma, obj, noise, rng)
                _guard(X[stepper], r + 1)
                if logged(r + 1):
                    trace.record(r + 1, r + 1, stepper, X.mean(axis=0), obj)
        else:
            raise ValueError(f"unknown gossip mode {self.mode!r}")
        self.X_ = X
        self.x_ = X.mean(axis=0)
        self.trace_ = trace
        self.n_comms_ = T * cost
        return self


# ---------------------------------------------------------------- dispatch

ALGORITHMS = {
    "mc_sgd": (MarkovSGD, {"sampler": "markov"}),
    "mc_sgd_noisy": (MarkovSGD, {"sampler": "markov"}),
    "sgd_iid": (MarkovSGD, {"sampler": "iid"}),
    "sgd_reshuffle": (MarkovSGD, {"sampler": "reshuffle"}),
    "mc_sgd_wait_mix": (MarkovSGD, {"sampler": "wait_for_mix"}),
    "mc_sag": (MarkovSAG, {"sampler": "markov"}),
    "sag_iid": (MarkovSAG, {"sampler": "iid"}),
    "dsgd_fixed": (GossipSGD, {"mode": "fixed"}),
    "dsgd_randomized": (GossipSGD, {"mode": "randomized"}),
}


def make_estimator(algorithm, T, seed, log_every=1, **params):
    """Estimator for an algorithm name; ``T`` maps to ``n_steps`` / ``n_rounds``."""
    if algorithm not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algorithm!r}; expected one of {sorted(ALGORITHMS)}")
    cls, fixed = ALGORITHMS[algorithm]
    horizon = "n_rounds" if cls is GossipSGD else "n_steps"
    kwargs = dict(fixed, log_every=log_every, random_state=seed, **{horizon: T})
    kwargs.update({k: v for k, v in params.items() if v is not None})
    return cls(**kwargs)


def run(algorithm, obj, chain, T, seed, log_every=1, **params):
    """Run one algorithm and return its :class:`Trace`."""
    est = make_estimator(algorithm, T, seed, log_every, **params)
    return est.fit(obj, chain).trace_
