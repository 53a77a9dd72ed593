"""Independent reference computations shared by several test files."""

import numpy as np
from scipy.optimize import minimize


def dual_oracle(Gamma, v, u, rho_prev, beta, eps, h):
    """Maximize the concave dual of the weight prox directly and read the new weights off the coupling."""
    n = rho_prev.size
    k = h / eps

    def coupling(lam):
        l0, l1 = lam[:n], lam[n:]
        return np.exp(l0 * k)[:, None] * Gamma * np.exp(l1 * k)[None, :]

    def conj_terms(l1):
        return np.exp(beta * (-l1 - v - u) - 1.0)

    def neg_dual(lam):
        l0, l1 = lam[:n], lam[n:]
        return -(l0 @ rho_prev - conj_terms(l1).sum() / beta - coupling(lam).sum() / k)

    def neg_grad(lam):
        M = coupling(lam)
        g0 = rho_prev - M.sum(axis=1)
        g1 = conj_terms(lam[n:]) - M.sum(axis=0)
        return -np.concatenate([g0, g1])

    res = minimize(neg_dual, np.zeros(2 * n), jac=neg_grad, method="BFGS",
                   options={"gtol": 1e-13, "maxiter": 10000})
    return coupling(res.x).sum(axis=0)
