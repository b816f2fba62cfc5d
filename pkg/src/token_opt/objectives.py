"""Node-indexed objectives ``f(x) = sum_v w_v f_v(x)``.

Every family exposes component values and gradients, a smoothness constant
``L`` valid for every component, a strong-convexity constant ``mu`` (0 when
there is none) and, when known, the minimiser ``x_star`` and ``f_star``.
"""

from dataclasses import dataclass
import math

import numpy as np
from scipy import linalg, optimize

from ._rng import STREAM_OBJECTIVE, make_rng
from ._validation import check_int, check_real, check_vector


class Objective:
    """Base class. Subclasses implement ``component_value`` and ``component_grad``;
    the vectorised methods below have loop fallbacks and may be overridden."""

    n_components: int
    dim: int
    weights: np.ndarray
    L: float
    mu: float = 0.0
    x_star = None
    f_star = None
    f_star_source = None
    name = "objective"

    # -- per component
    def component_value(self, v, x):
        raise NotImplementedError

    def component_grad(self, v, x):
        raise NotImplementedError

    # -- all components at once, shapes (n,) and (n, dim)
    def component_values(self, x):
        return np.array([self.component_value(v, x) for v in range(self.n_components)])

    def component_grads(self, x):
        return np.stack([self.component_grad(v, x) for v in range(self.n_components)])

    # -- aggregate
    def value(self, x):
        return float(self.weights @ self.component_values(x))

    def grad(self, x):
        return self.weights @ self.component_grads(x)

    def value_and_grad(self, x):
        return self.value(x), self.grad(x)

    def node_grads(self, X):
        """Row ``v`` is ``grad f_v(X[v])``: one iterate per node (gossip methods)."""
        return np.stack([self.component_grad(v, X[v]) for v in range(self.n_components)])

    # -- optional local sub-samples (minibatch noise)
    n_subcomponents = None

    def sub_grads(self, v, idx, x):
        raise TypeError(f"{self.name} does not expose local sub-components")

    def with_f_star(self, f_star, source):
        self.f_star = float(f_star)
        self.f_star_source = source
        return self


# ---------------------------------------------------------------- quadratics

class QuadraticObjective(Objective):
    """Components ``f_v(x) = 1/2 x^T H_v x - b_v^T x + c_v``.

    ``L`` is the largest spectral norm over the ``H_v`` and ``mu`` the
    smallest eigenvalue over all ``H_v`` (clipped at 0). The minimiser of the
    weighted sum is computed when its Hessian is positive definite.
    """

    def __init__(self, H, b, c=None, weights=None, name="quadratic"):
        H = np.asarray(H, dtype=float)
        b = np.asarray(b, dtype=float)
        n, d = b.shape
        if H.shape != (n, d, d):
            raise ValueError(f"H must have shape {(n, d, d)}, got {H.shape}")
        if not np.allclose(H, np.transpose(H, (0, 2, 1))):
            raise ValueError("component Hessians must be symmetric")
        self.H, self.b = H, b
        self.c = np.zeros(n) if c is None else np.asarray(c, dtype=float)
        self.n_components, self.dim = n, d
        self.weights = np.full(n, 1.0 / n) if weights is None else np.asarray(weights, dtype=float)
        self.name = name
        eig = np.linalg.eigvalsh(H)
        self.L = float(np.max(np.abs(eig)))
        self.mu = max(0.0, float(np.min(eig)))
        Hf = np.einsum("v,vij->ij", self.weights, H)
        bf = self.weights @ b
        if np.min(np.linalg.eigvalsh(Hf)) > 1e-12 * max(1.0, self.L):
            self.x_star = linalg.solve(Hf, bf, assume_a="pos")
            self.f_star = self.value(self.x_star)
            self.f_star_source = "exact"

    def component_value(self, v, x):
        return float(0.5 * x @ self.H[v] @ x - self.b[v] @ x + self.c[v])

    def component_grad(self, v, x):
        return self.H[v] @ x - self.b[v]

    def component_values(self, x):
        return 0.5 * np.einsum("i,vij,j->v", x, self.H, x) - self.b @ x + self.c

    def component_grads(self, x):
        return self.H @ x - self.b

    def value_and_grad(self, x):
        Hx = np.einsum("v,vij,j->i", self.weights, self.H, x)
        bw = self.weights @ self.b
        val = 0.5 * x @ Hx - bw @ x + self.weights @ self.c
        return float(val), Hx - bw

    def node_grads(self, X):
        return np.einsum("vij,vj->vi", self.H, X) - self.b


def quadratic_interpolation(n, dim, seed, condition=10.0):
    """Components ``1/2 (x - x*)^T A_v (x - x*)`` sharing the minimiser ``x*``.

    Each ``A_v`` is a random rotation of a diagonal whose eigenvalues span
    ``[1, condition]`` (both endpoints included when ``dim >= 2``).
    """
    n = check_int(n, "n", minimum=1)
    dim = check_int(dim, "dim", minimum=1)
    condition = check_real(condition, "condition", low=1.0)
    rng = make_rng(seed, STREAM_OBJECTIVE)
    x_star = rng.standard_normal(dim)
    H = np.empty((n, dim, dim))
    for v in range(n):
        if dim == 1:
            eig = np.array([1.0 if v % 2 == 0 else condition])
        else:
            eig = np.concatenate([[1.0, condition], rng.uniform(1.0, condition, dim - 2)])
        Q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
        H[v] = (Q * eig) @ Q.T
        H[v] = 0.5 * (H[v] + H[v].T)
    b = np.einsum("vij,j->vi", H, x_star)
    c = 0.5 * np.einsum("vi,i->v", b, x_star)
    obj = QuadraticObjective(H, b, c, name=f"quad_interp(n={n},d={dim},k={condition:g})")
    obj.x_star = x_star
    obj.f_star = 0.0
    obj.f_star_source = "exact"
    return obj


def identity_quadratic(n, dim, x_star):
    """Every component equal to ``1/2 ||x - x*||^2``."""
    x_star = np.asarray(x_star, dtype=float)
    H = np.broadcast_to(np.eye(dim), (n, dim, dim)).copy()
    b = np.tile(x_star, (n, 1))
    c = np.full(n, 0.5 * x_star @ x_star)
    obj = QuadraticObjective(H, b, c, name="identity_quadratic")
    obj.f_star = 0.0
    return obj


def two_point_disagreement():
    """``f_0(x) = (x - 1)^2 / 2`` and ``f_1(x) = (x + 1)^2 / 2``; minimiser 0."""
    H = np.ones((2, 1, 1))
    b = np.array([[1.0], [-1.0]])
    c = np.array([0.5, 0.5])
    return QuadraticObjective(H, b, c, name="two_point")


def shared_hessian_quadratic(n, dim, seed, spread=1e-3, dissimilarity=1.0, L=1.0):
    """Heterogeneous quadratics ``1/2 (x - c_v)^T A (x - c_v)`` with one shared Hessian.

    ``A`` is diagonal with eigenvalues log-spaced on ``[spread * L, L]``; the
    centres ``c_v`` are ``x* + dissimilarity * z_v`` with ``z_v`` standard
    normal and re-centred so that their mean is exactly ``x*``. The gradient
    dissimilarity ``grad f_v - grad f = A (x* - c_v)`` is then bounded and
    constant in ``x``.
    """
    n = check_int(n, "n", minimum=1)
    dim = check_int(dim, "dim", minimum=1)
    rng = make_rng(seed, STREAM_OBJECTIVE)
    eig = L * np.logspace(np.log10(spread), 0.0, dim)
    x_star = rng.standard_normal(dim)
    z = rng.standard_normal((n, dim))
    z -= z.mean(axis=0)
    centres = x_star + dissimilarity * z
    A = np.diag(eig)
    H = np.broadcast_to(A, (n, dim, dim)).copy()
    b = centres * eig
    c = 0.5 * np.einsum("vi,vi->v", b, centres)
    obj = QuadraticObjective(H, b, c, name=f"shared_hessian(n={n},d={dim})")
    obj.eigenvalues = eig
    return obj


def worst_case_chain(K, alpha=0.1, b=1.0, assign=(0, 1), n=None, weights=None):
    """Chain-like quadratic split between two nodes.

    On ``dim = 2K + 1`` coordinates, the weighted component of node ``v``
    couples coordinates ``(2k - 1, 2k)`` and carries the linear term on
    coordinate 0; node ``w`` couples ``(2k, 2k + 1)``. Starting from 0, odd
    coordinates can only be discovered at ``w`` and even ones at ``v``.
    All other nodes carry the zero function.
    """
    K = check_int(K, "K", minimum=1)
    alpha = check_real(alpha, "alpha", low=0.0, low_open=True)
    b = check_real(b, "b", low=0.0, low_open=True)
    v, w = (int(a) for a in assign)
    if v == w:
        raise ValueError("the two carrier nodes must differ")
    if n is None:
        n = max(v, w) + 1
    weights = np.full(n, 1.0 / n) if weights is None else np.asarray(weights, dtype=float)
    d = 2 * K + 1
    Hv = np.zeros((d, d))
    Hw = np.zeros((d, d))
    Hv[0, 0] = alpha
    for k in range(1, K + 1):
        i, j = 2 * k - 1, 2 * k
        Hv[j, j] += 2.0
        Hv[i, j] -= 1.0
        Hv[j, i] -= 1.0
    for k in range(K):
        i, j = 2 * k + 1, 2 * k
        Hw[i, i] += 2.0
        Hw[i, j] -= 1.0
        Hw[j, i] -= 1.0
    H = np.zeros((n, d, d))
    bb = np.zeros((n, d))
    c = np.zeros(n)
    # the formulas define weight * f; divide by the weight to get f itself
    H[v], H[w] = Hv / weights[v], Hw / weights[w]
    bb[v, 0] = b / weights[v]
    c[v] = 0.5 * alpha / weights[v]
    obj = QuadraticObjective(H, bb, c, weights=weights, name=f"worst_case(K={K})")
    obj.carriers = (v, w)
    return obj


# ---------------------------------------------------------------- sigmoid loss

def _sigmoid(t):
    return 0.5 * (1.0 + np.tanh(0.5 * t))


SIGMOID_CURVATURE_BOUND = 0.5


class SigmoidLoss(Objective):
    """Components ``f_v(x) = s_v / m * sum_i (sigmoid(x . a_vi) - b_vi)^2 / 2``.

    ``a`` has shape ``(n, m, dim)``; ``m`` local samples per node are exposed as
    sub-components for minibatch gradients. ``scale`` re-weights components
    (used by the two-hot layout).
    """

    def __init__(self, a, b, scale=None, name="sigmoid"):
        a = np.asarray(a, dtype=float)
        if a.ndim == 2:
            a = a[:, None, :]
        b = np.asarray(b, dtype=float).reshape(a.shape[:2])
        self.a, self.b = a, b
        n, m, d = a.shape
        self.n_components, self.dim, self.n_subcomponents = n, d, m
        self.scale = np.ones(n) if scale is None else np.asarray(scale, dtype=float)
        self.weights = np.full(n, 1.0 / n)
        self.name = name
        self._active = np.flatnonzero(self.scale != 0)
        # |l''| <= 0.5 |a|^2 for l(t) = (sigmoid(t) - b)^2 / 2 with b in [0, 1]
        sq = (a**2).sum(axis=-1).max(axis=1)
        self.L = float(np.max(SIGMOID_CURVATURE_BOUND * self.scale * sq))
        self.mu = 0.0

    def _residuals(self, v, x):
        z = self.a[v] @ x
        s = _sigmoid(z)
        return s, s - self.b[v]

    def component_value(self, v, x):
        _, r = self._residuals(v, x)
        return float(self.scale[v] * 0.5 * np.mean(r**2))

    def component_grad(self, v, x):
        s, r = self._residuals(v, x)
        coef = r * s * (1.0 - s)
        return (self.scale[v] / self.n_subcomponents) * (coef @ self.a[v])

    def sub_grads(self, v, idx, x):
        """Gradients of the selected local samples of node ``v``, shape ``(len(idx), dim)``."""
        a = self.a[v, idx]
        s = _sigmoid(a @ x)
        coef = (s - self.b[v, idx]) * s * (1.0 - s)
        return self.scale[v] * coef[:, None] * a

    def component_values(self, x):
        s = _sigmoid(self.a @ x)
        return self.scale * 0.5 * np.mean((s - self.b) ** 2, axis=1)

    def component_grads(self, x):
        s = _sigmoid(self.a @ x)
        coef = (s - self.b) * s * (1.0 - s)
        return (self.scale / self.n_subcomponents)[:, None] * np.einsum("vm,vmd->vd", coef, self.a)

    def value_and_grad(self, x):
        act = self._active
        a, b = self.a[act], self.b[act]
        s = _sigmoid(a @ x)
        r = s - b
        w = self.weights[act] * self.scale[act] / self.n_subcomponents
        val = 0.5 * float(w @ (r**2).sum(axis=1))
        g = np.einsum("v,vm,vmd->d", w, r * s * (1.0 - s), a)
        return val, g

    def value(self, x):
        return self.value_and_grad(x)[0]

    def grad(self, x):
        return self.value_and_grad(x)[1]

    def node_grads(self, X):
        s = _sigmoid(np.einsum("vmd,vd->vm", self.a, X))
        coef = (s - self.b) * s * (1.0 - s)
        return (self.scale / self.n_subcomponents)[:, None] * np.einsum("vm,vmd->vd", coef, self.a)


def sigmoid_loss(n, dim=10, data_mode="homogeneous", seed=0, samples_per_node=1):
    """Sigmoid least-squares loss with Gaussian features and uniform targets.

    ``"homogeneous"``: every node gets i.i.d. ``a ~ N(0, I)``, ``b ~ U[0, 1]``.
    ``"two-hot-heterogeneous"``: only nodes ``0`` and ``n // 2`` carry data,
    scaled by ``n / 2`` so that the network average equals the mean of the
    two active losses; the rest of the network holds the zero function.
    """
    n = check_int(n, "n", minimum=2)
    dim = check_int(dim, "dim", minimum=1)
    m = check_int(samples_per_node, "samples_per_node", minimum=1)
    rng = make_rng(seed, STREAM_OBJECTIVE)
    a = rng.standard_normal((n, m, dim))
    b = rng.uniform(0.0, 1.0, (n, m))
    if data_mode == "homogeneous":
        scale = np.ones(n)
    elif data_mode in ("two-hot-heterogeneous", "two-hot", "heterogeneous"):
        active = [0, n // 2]
        mask = np.zeros(n, dtype=bool)
        mask[active] = True
        a[~mask] = 0.0
        b[~mask] = 0.0
        scale = np.where(mask, n / 2.0, 0.0)
        data_mode = "two-hot-heterogeneous"
    else:
        raise ValueError(f"unknown data_mode {data_mode!r}")
    return SigmoidLoss(a, b, scale, name=f"sigmoid[{data_mode}](n={n},d={dim})")


def estimate_f_star(obj, x0=None, restarts=10, seed=0, lower_bound=None):
    """Best value found by L-BFGS from ``x0`` and ``restarts`` random starts.

    Non-convex objectives have no certified minimum; the result is recorded on
    the objective with ``f_star_source = "estimated"``. ``lower_bound`` (e.g. 0
    for non-negative losses) stops the search early once reached.
    """
    rng = make_rng(seed, STREAM_OBJECTIVE, 77)
    starts = [np.zeros(obj.dim) if x0 is None else np.asarray(x0, dtype=float)]
    starts += [rng.standard_normal(obj.dim) for _ in range(restarts)]
    best = math.inf
    for s in starts:
        res = optimize.minimize(obj.value, s, jac=obj.grad, method="L-BFGS-B",
                                options={"maxiter": 20_000, "ftol": 1e-15, "gtol": 1e-12})
        best = min(best, float(res.fun), obj.value(s))
        if lower_bound is not None and best <= lower_bound + 1e-15:
            break
    return obj.with_f_star(best, "estimated")


# ---------------------------------------------------------------- diagnostics

@dataclass(frozen=True)
class DissimilarityStats:
    """Gradient-dissimilarity summary.

    ``sigma_bar_sq`` and ``sigma_max_sq`` are empirical lower estimates of
    the true suprema: maxima over sampled points only.
    """

    sigma_bar_sq: float
    sigma_max_sq: float
    sigma_star_sq: float


def dissimilarity_stats(obj, x_ref=None, sample_points=64, seed=0, radius=1.0):
    """Estimate ``sigma_v^2 = sup_x ||grad f_v(x) - grad f(x)||^2`` around ``x_ref``.

    ``sigma_star_sq`` is exact at ``x_ref`` (``x_star`` when known). The other
    two fields take the maximum over ``x_ref`` and ``sample_points`` points
    drawn uniformly in the ball of the given radius.
    """
    if x_ref is None:
        if obj.x_star is None:
            raise ValueError("x_ref is required when the minimiser is unknown")
        x_ref = obj.x_star
    x_ref = check_vector(x_ref, obj.dim, "x_ref")
    rng = make_rng(seed, STREAM_OBJECTIVE, 91)
    G = obj.component_grads(x_ref)
    sigma_star_sq = float(np.max((G**2).sum(axis=1)))
    pts = [x_ref]
    for _ in range(sample_points):
        z = rng.standard_normal(obj.dim)
        r = radius * rng.random() ** (1.0 / obj.dim)
        pts.append(x_ref + r * z / np.linalg.norm(z))
    sig_v = np.zeros(obj.n_components)
    for x in pts:
        G = obj.component_grads(x)
        dev = ((G - obj.weights @ G) ** 2).sum(axis=1)
        sig_v = np.maximum(sig_v, dev)
    return DissimilarityStats(float(obj.weights @ sig_v), float(np.max(sig_v)), sigma_star_sq)


def finite_difference_grad(fun, x, h=None):
    """Central differences with step ``1e-5 * (1 + ||x||)`` per coordinate."""
    x = np.asarray(x, dtype=float)
    if h is None:
        h = 1e-5 * (1.0 + np.linalg.norm(x))
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (fun(x + e) - fun(x - e)) / (2.0 * h)
    return g
