import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from token_opt.objectives import (QuadraticObjective, SigmoidLoss, dissimilarity_stats, estimate_f_star,
                                  finite_difference_grad, identity_quadratic, quadratic_interpolation,
                                  shared_hessian_quadratic, sigmoid_loss, two_point_disagreement, worst_case_chain)


def _families():
    n, dim = 8, 6
    return {
        "quadratic_interpolation": quadratic_interpolation(n, dim, seed=1),
        "identity_quadratic": identity_quadratic(n, dim, np.linspace(-1, 1, dim)),
        "two_point_disagreement": two_point_disagreement(),
        "shared_hessian_quadratic": shared_hessian_quadratic(n, dim, seed=1),
        "worst_case_chain": worst_case_chain(3, assign=(0, 4), n=n),
        "sigmoid_homogeneous": sigmoid_loss(n, dim=dim, seed=1, samples_per_node=3),
        "sigmoid_two_hot": sigmoid_loss(n, dim=dim, data_mode="two-hot-heterogeneous", seed=1),
    }


FAMILIES = _families()


@pytest.mark.parametrize("name", sorted(FAMILIES))
def test_component_gradients_are_lipschitz(name):
    obj = FAMILIES[name]
    rng = np.random.default_rng(0)
    for _ in range(20):
        x, y = rng.standard_normal((2, obj.dim)) * 2
        for v in range(obj.n_components):
            diff = np.linalg.norm(obj.component_grad(v, x) - obj.component_grad(v, y))
            assert diff <= obj.L * np.linalg.norm(x - y) * (1 + 1e-8)


@pytest.mark.parametrize("name", sorted(FAMILIES))
def test_vectorised_paths_match_loops(name):
    obj = FAMILIES[name]
    x = np.random.default_rng(1).standard_normal(obj.dim)
    vals = np.array([obj.component_value(v, x) for v in range(obj.n_components)])
    grads = np.stack([obj.component_grad(v, x) for v in range(obj.n_components)])
    assert np.allclose(obj.component_values(x), vals, rtol=1e-12, atol=1e-14)
    assert np.allclose(obj.component_grads(x), grads, rtol=1e-12, atol=1e-14)
    f, g = obj.value_and_grad(x)
    assert f == pytest.approx(obj.weights @ vals, rel=1e-12, abs=1e-14)
    assert np.allclose(g, obj.weights @ grads, rtol=1e-12, atol=1e-14)
    X = np.random.default_rng(2).standard_normal((obj.n_components, obj.dim))
    assert np.allclose(obj.node_grads(X), [obj.component_grad(v, X[v]) for v in range(obj.n_components)])


@pytest.mark.parametrize("name", sorted(FAMILIES))
def test_full_gradient_matches_finite_differences(name):
    obj = FAMILIES[name]
    x = np.random.default_rng(3).standard_normal(obj.dim)
    fd = finite_difference_grad(obj.value, x)
    g = obj.grad(x)
    assert np.linalg.norm(g - fd) <= 1e-5 * max(np.linalg.norm(g), 1e-8)


@pytest.mark.parametrize("name", [k for k, o in FAMILIES.items() if o.x_star is not None])
def test_known_minimiser_is_stationary(name):
    obj = FAMILIES[name]
    assert np.linalg.norm(obj.grad(obj.x_star)) <= 1e-8


def test_quadratic_interpolation_identity_case():
    obj = quadratic_interpolation(5, 4, seed=0, condition=1.0)
    assert np.allclose(obj.H, np.eye(4))
    assert obj.L == pytest.approx(1.0) and obj.mu == pytest.approx(1.0)
    x = np.ones(4)
    assert obj.value(x) == pytest.approx(0.5 * np.sum((x - obj.x_star) ** 2))


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 6), st.integers(1, 5), st.floats(1.0, 50.0), st.integers(0, 1000))
def test_quadratic_interpolation_sandwich(n, dim, kappa, seed):
    obj = quadratic_interpolation(n, dim, seed=seed, condition=kappa)
    x = np.random.default_rng(seed).standard_normal(dim) * 3
    e2 = np.sum((x - obj.x_star) ** 2)
    gap = obj.value(x) - obj.f_star
    assert 0.5 * obj.mu * e2 * (1 - 1e-9) - 1e-12 <= gap <= 0.5 * obj.L * e2 * (1 + 1e-9) + 1e-12
    # every component is minimised at x*
    assert dissimilarity_stats(obj, sample_points=0).sigma_star_sq <= 1e-20


def test_two_point_examples():
    obj = two_point_disagreement()
    assert obj.component_grad(0, np.zeros(1))[0] == -1.0
    assert obj.component_grad(1, np.zeros(1))[0] == 1.0
    assert obj.x_star[0] == pytest.approx(0.0)
    st_ = dissimilarity_stats(obj, np.zeros(1), sample_points=0)
    assert st_.sigma_star_sq == pytest.approx(1.0)
    assert st_.sigma_bar_sq == pytest.approx(1.0)


def test_shared_hessian_dissimilarity_is_constant():
    obj = shared_hessian_quadratic(10, 4, seed=0, dissimilarity=0.7)
    assert np.allclose(obj.weights @ (obj.b / obj.eigenvalues), obj.x_star)
    s1 = dissimilarity_stats(obj, sample_points=0)
    s2 = dissimilarity_stats(obj, sample_points=20, radius=5.0)
    assert s1.sigma_bar_sq == pytest.approx(s2.sigma_bar_sq, rel=1e-10)


def test_worst_case_examples():
    n = 10
    obj = worst_case_chain(4, alpha=0.1, b=1.0, assign=(0, 5), n=n)
    assert obj.dim == 9
    x = np.zeros(obj.dim)
    e0 = np.zeros(obj.dim)
    e0[0] = 1.0
    assert np.allclose(obj.weights[0] * obj.component_grad(0, x), -e0)
    assert np.allclose(obj.component_grad(5, x), 0.0)
    for v in set(range(n)) - {0, 5}:
        assert obj.component_value(v, x) == 0.0
    # the weighted sum is the tridiagonal chain: diagonal (alpha, 2, ..., 2), off-diagonal -1
    Hf = np.einsum("v,vij->ij", obj.weights, obj.H)
    expected = 2 * np.eye(9) - np.eye(9, k=1) - np.eye(9, k=-1)
    expected[0, 0] = 0.1
    assert np.allclose(Hf, expected)
    with pytest.raises(ValueError):
        worst_case_chain(3, assign=(2, 2))


def test_worst_case_discovery_order():
    # one coordinate per alternation: v reveals even indices, w odd ones
    obj = worst_case_chain(3, assign=(0, 1), n=2)
    x = np.zeros(obj.dim)
    seen = []
    for v in [0, 0, 1, 1, 0, 1, 0, 1]:
        x = x - 0.05 * obj.component_grad(v, x)
        seen.append(int(np.flatnonzero(x).max()))
    assert seen == [0, 0, 1, 1, 2, 3, 4, 5]


def test_sigmoid_stationary_point():
    obj = SigmoidLoss(np.random.default_rng(0).standard_normal((4, 3)), np.full(4, 0.5))
    assert obj.value(np.zeros(3)) == 0.0
    assert np.all(obj.component_grads(np.zeros(3)) == 0.0)


def test_sigmoid_two_hot_layout():
    n = 10
    obj = sigmoid_loss(n, dim=3, data_mode="two-hot-heterogeneous", seed=0)
    x = np.ones(3)
    active = [0, n // 2]
    vals = obj.component_values(x)
    assert np.all(vals[[v for v in range(n) if v not in active]] == 0.0)
    assert obj.value(x) == pytest.approx(vals[active].sum() / n)
    with pytest.raises(ValueError):
        sigmoid_loss(n, data_mode="bogus")


def test_sigmoid_is_reproducible_per_seed():
    a = sigmoid_loss(50, dim=4, seed=7)
    b = sigmoid_loss(50, dim=4, seed=7)
    assert np.array_equal(a.a, b.a) and np.array_equal(a.b, b.b)
    s = dissimilarity_stats(a, np.zeros(4), sample_points=8, seed=1)
    assert np.isfinite([s.sigma_bar_sq, s.sigma_max_sq, s.sigma_star_sq]).all()
    assert s == dissimilarity_stats(b, np.zeros(4), sample_points=8, seed=1)


def test_sigmoid_sub_grads_average_to_component():
    obj = sigmoid_loss(4, dim=3, seed=2, samples_per_node=5)
    x = np.array([0.3, -0.2, 1.0])
    for v in range(4):
        assert np.allclose(obj.sub_grads(v, np.arange(5), x).mean(axis=0), obj.component_grad(v, x))


def test_quadratic_has_no_subcomponents():
    with pytest.raises(TypeError):
        two_point_disagreement().sub_grads(0, [0], np.zeros(1))


def test_quadratic_rejects_bad_shapes():
    with pytest.raises(ValueError):
        QuadraticObjective(np.ones((2, 2, 3)), np.ones((2, 2)))
    with pytest.raises(ValueError):
        QuadraticObjective(np.array([[[0.0, 1.0], [0.0, 0.0]]]), np.zeros((1, 2)))


def test_estimate_f_star():
    obj = sigmoid_loss(6, dim=2, seed=3)
    estimate_f_star(obj, seed=0, lower_bound=0.0)
    assert obj.f_star_source == "estimated"
    # no sampled point does better than the estimate
    rng = np.random.default_rng(0)
    assert all(obj.value(x) >= obj.f_star - 1e-12 for x in rng.standard_normal((200, 2)) * 3)
    quad = quadratic_interpolation(4, 3, seed=0)
    assert estimate_f_star(quad).f_star == pytest.approx(0.0, abs=1e-12)


def test_finite_difference_helper_on_cubic():
    fun = lambda z: float(np.sum(z ** 3))
    x = np.array([1.0, -2.0, 0.5])
    assert np.allclose(finite_difference_grad(fun, x), 3 * x ** 2, rtol=1e-8)
