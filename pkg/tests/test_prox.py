import math

import numpy as np
import pytest

from oracles import dual_oracle
from proxlearn.errors import DataError, NumericalError
from proxlearn.prox import (ProxInputs, cost_matrix, gibbs_kernel, prox_weights,
                            sinkhorn_fixed_point, xi_vector)


def random_inputs(rng, n, beta=1.0, eps=1.0, h=0.1, p=2, spread=1.0):
    prev = rng.normal(size=(n, p)) * spread
    cur = prev + 0.3 * rng.normal(size=(n, p))
    Gamma = gibbs_kernel(cost_matrix(cur, prev), eps)
    v = rng.normal(size=n)
    u = rng.random(n)
    rho_prev = rng.uniform(0.2, 2.0, n)
    xi = xi_vector(v, u, rho_prev, beta)
    return Gamma, xi, rho_prev, v, u


def test_cost_matrix_examples():
    theta = np.random.default_rng(0).normal(size=(4, 3))
    np.testing.assert_array_equal(np.diag(cost_matrix(theta, theta)), 0.0)
    C = cost_matrix(np.array([[0.0], [1.0]]), np.array([[0.0], [3.0]]))
    np.testing.assert_allclose(C, [[0, 9], [1, 4]], atol=1e-12)


def test_cost_matrix_loop_oracle():
    rng = np.random.default_rng(1)
    A, B = rng.normal(size=(5, 3)), rng.normal(size=(5, 3))
    C = cost_matrix(A, B)
    for i in range(5):
        for j in range(5):
            assert C[i, j] == pytest.approx(sum((A[i, k] - B[j, k]) ** 2 for k in range(3)), abs=1e-12)


def test_cost_matrix_dimension_mismatch():
    with pytest.raises(DataError):
        cost_matrix(np.ones((2, 3)), np.ones((2, 4)))


@pytest.mark.parametrize("eps", [1e-3, 0.5, 10.0])
def test_gibbs_kernel_closed_forms(eps):
    np.testing.assert_array_equal(gibbs_kernel(np.zeros((2, 3)), eps), 1.0)
    assert gibbs_kernel(np.array([[2 * eps]]), eps)[0, 0] == pytest.approx(0.36787944, abs=1e-8)


def test_gibbs_kernel_loop_oracle():
    rng = np.random.default_rng(2)
    C = rng.random((4, 4)) * 5
    G = gibbs_kernel(C, 0.7)
    for i in range(4):
        for j in range(4):
            assert G[i, j] == pytest.approx(math.exp(-C[i, j] / 1.4), rel=1e-15)
    assert np.all((G > 0) & (G <= 1))


def test_gibbs_kernel_stays_positive_far_away():
    assert gibbs_kernel(np.array([[1e6]]), 1e-3)[0, 0] > 0


@pytest.mark.parametrize("eps", [0.0, -1.0])
def test_gibbs_kernel_rejects_bad_eps(eps):
    with pytest.raises(DataError):
        gibbs_kernel(np.ones((2, 2)), eps)


def test_xi_closed_forms():
    np.testing.assert_allclose(xi_vector(np.zeros(3), np.zeros((3, 3)), np.ones(3), 2.0), np.exp(-1.0))
    rng = np.random.default_rng(3)
    xi = xi_vector(rng.normal(size=4), rng.random((4, 4)), rng.random(4), 1e-12)
    np.testing.assert_allclose(xi, np.exp(-1.0), rtol=1e-10)


def test_xi_loop_oracle():
    rng = np.random.default_rng(4)
    v, U, rho, beta = rng.normal(size=6), rng.random((6, 6)), rng.random(6), 0.8
    xi = xi_vector(v, U, rho, beta)
    for i in range(6):
        e = -beta * v[i] - beta * sum(U[i, j] * rho[j] for j in range(6)) - 1
        assert xi[i] == pytest.approx(math.exp(e), rel=1e-14)


def test_xi_overflow_is_reported():
    with pytest.raises(NumericalError, match="beta"):
        xi_vector(np.array([-1e4, 0.0]), np.zeros(2), np.ones(2), 1.0)


def test_xi_stabilized_shift_leaves_weights_unchanged():
    rng = np.random.default_rng(5)
    Gamma, _, rho_prev, v, u = random_inputs(rng, 5)
    out = []
    for stabilize in (False, True):
        xi = xi_vector(v, u, rho_prev, 1.0, stabilize=stabilize)
        inputs = ProxInputs.build(Gamma, xi, rho_prev, 1.0, 1.0, 0.1)
        out.append(sinkhorn_fixed_point(inputs, 1e-14, 5000, z0=np.ones(5))[0])
    np.testing.assert_allclose(out[0], out[1], rtol=1e-10)


@pytest.mark.parametrize("seed", range(5))
def test_single_atom_keeps_weight(seed):
    rng = np.random.default_rng(seed)
    rho0 = np.array([rng.uniform(0.1, 10)])
    inputs = ProxInputs.build(np.array([[rng.random()]]), np.array([rng.random() * 5]), rho0,
                              rng.uniform(0.1, 2), rng.uniform(0.1, 2), rng.uniform(0.01, 1))
    rho, diag = sinkhorn_fixed_point(inputs, 1e-12, 1000, rng=rng)
    assert rho[0] == pytest.approx(rho0[0], rel=1e-12)


def test_symmetric_inputs_give_constant_weights():
    n = 6
    Gamma = np.full((n, n), 0.2) + 0.5 * np.eye(n)
    inputs = ProxInputs.build(Gamma, np.full(n, 0.3), np.full(n, 1.7), 1.0, 1.0, 0.1)
    rho, _ = sinkhorn_fixed_point(inputs, 1e-13, 1000, rng=np.random.default_rng(0))
    np.testing.assert_allclose(rho, 1.7, rtol=1e-10)


def test_matches_dual_oracle():
    rng = np.random.default_rng(6)
    beta, eps, h = 1.0, 1.0, 0.1
    worst = 0.0
    for _ in range(50):
        Gamma, xi, rho_prev, v, u = random_inputs(rng, 3, beta, eps, h)
        inputs = ProxInputs.build(Gamma, xi, rho_prev, beta, eps, h)
        rho, diag = sinkhorn_fixed_point(inputs, 1e-14, 10000, rng=rng)
        ref = dual_oracle(Gamma, v, u, rho_prev, beta, eps, h)
        worst = max(worst, np.max(np.abs(rho - ref) / np.abs(ref)))
    assert worst <= 1e-6


def test_thompson_metric_nonincreasing():
    rng = np.random.default_rng(7)
    for _ in range(100):
        n = int(rng.integers(2, 17))
        Gamma, xi, rho_prev, _, _ = random_inputs(rng, n, beta=rng.uniform(0.2, 2), h=rng.uniform(0.05, 1))
        inputs = ProxInputs.build(Gamma, xi, rho_prev, 1.0, 1.0, 0.1)
        _, diag = sinkhorn_fixed_point(inputs, 1e-300, 40, rng=rng, track=True)
        d = np.array(diag.thompson)
        assert np.all(d[2:] <= d[1:-1] * (1 + 1e-9) + 1e-13)


def test_mass_positivity_and_marginal():
    rng = np.random.default_rng(8)
    for _ in range(20):
        Gamma, xi, rho_prev, _, _ = random_inputs(rng, 12)
        inputs = ProxInputs.build(Gamma, xi, rho_prev, 1.0, 1.0, 0.1)
        rho, diag = sinkhorn_fixed_point(inputs, 1e-10, 2000, rng=rng)
        assert diag.converged
        assert np.all(rho > 0)
        assert abs(rho.sum() - rho_prev.sum()) <= 1e-10 * rho_prev.sum()
        assert diag.marginal_residual <= 1e-12 * rho_prev.max()


def test_independent_starts_agree():
    rng = np.random.default_rng(9)
    Gamma, xi, rho_prev, _, _ = random_inputs(rng, 10)
    inputs = ProxInputs.build(Gamma, xi, rho_prev, 1.0, 1.0, 0.1)
    r1, _ = sinkhorn_fixed_point(inputs, 1e-13, 5000, rng=np.random.default_rng(1))
    r2, _ = sinkhorn_fixed_point(inputs, 1e-13, 5000, rng=np.random.default_rng(2))
    assert np.max(np.abs(r1 - r2) / r1) <= 1e-8


def test_sweep_cap_reports_not_converged():
    rng = np.random.default_rng(10)
    Gamma, xi, rho_prev, _, _ = random_inputs(rng, 8)
    inputs = ProxInputs.build(Gamma, xi, rho_prev, 1.0, 1.0, 0.1)
    _, diag = sinkhorn_fixed_point(inputs, 1e-300, 3, rng=rng)
    assert diag.iterations == 3 and not diag.converged


def test_rejects_nonpositive_start():
    inputs = ProxInputs.build(np.eye(2), np.ones(2), np.ones(2), 1.0, 1.0, 0.1)
    with pytest.raises(DataError):
        sinkhorn_fixed_point(inputs, z0=np.array([1.0, 0.0]))


def test_prox_weights_pipeline():
    rng = np.random.default_rng(11)
    prev = rng.normal(size=(7, 3))
    cur = prev + 0.01 * rng.normal(size=(7, 3))
    rho_prev = rng.uniform(0.5, 1.5, 7)
    rho, diag = prox_weights(cur, prev, rho_prev, rng.normal(size=7), rng.random(7),
                             0.5, 0.1, 0.01, 1e-10, 500, rng=rng)
    assert diag.converged
    assert rho.sum() == pytest.approx(rho_prev.sum(), rel=1e-10)
