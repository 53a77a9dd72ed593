"""Closed-form drift for the Euler-Maruyama location update.

The drift of particle ``i`` is the gradient, with respect to that particle's
parameters, of ``sum_k (v_k + u_k)`` where ``v = -(2/n) P t`` and
``u = (1/n) P P^T rho`` (rho held fixed). Both heads reduce to a coefficient
matrix ``G = d(sum_k v_k + u_k) / dP`` pushed through the Jacobian of the
feature map.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .model import ModelSpec, class_probabilities, one_hot, targets_for

# below this exp() returns subnormals, which are slow and lose precision
_EXP_FLOOR = -700.0


@dataclass
class TanhCaches:
    T: np.ndarray
    S: np.ndarray

    @classmethod
    def compute(cls, b, W, X):
        z = W @ X.T
        z += b[:, None]
        T = np.tanh(z)
        # sech^2 = 4e / (1 + e)^2 with e = exp(-2|z|); unlike 1 - tanh^2 this
        # keeps full relative accuracy and stays positive for saturated units
        e = np.abs(z)
        e *= -2.0
        np.maximum(e, _EXP_FLOOR, out=e)
        np.exp(e, out=e)
        d = e + 1.0
        d *= d
        S = np.divide(e, d, out=e)
        S *= 4.0
        return cls(T=T, S=S)


@dataclass
class GradBlocks:
    d_a: np.ndarray | None = None
    d_b: np.ndarray | None = None
    d_W: np.ndarray | None = None
    d_Theta: np.ndarray | None = None

    def flat(self) -> np.ndarray:
        """Per-particle gradient rows in the cloud's parameter layout."""
        if self.d_Theta is not None:
            return self.d_Theta.reshape(self.d_Theta.shape[0], -1)
        return np.column_stack([self.d_a, self.d_b, self.d_W])

    def __add__(self, other: "GradBlocks") -> "GradBlocks":
        if self.d_Theta is not None:
            return GradBlocks(d_Theta=self.d_Theta + other.d_Theta)
        return GradBlocks(self.d_a + other.d_a, self.d_b + other.d_b, self.d_W + other.d_W)


def _check(a, b, W, X, n_other):
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[0] == 0:
        raise DataError("gradient requested with zero data points")
    if W.shape[1] != X.shape[1]:
        raise DataError(f"W has {W.shape[1]} columns but X has {X.shape[1]} features")
    if not (a.shape[0] == b.shape[0] == W.shape[0]):
        raise DataError("a, b, W disagree on the number of particles")
    if n_other is not None and n_other != X.shape[0]:
        raise DataError(f"{n_other} labels for {X.shape[0]} data points")
    return X


def grad_v_binary(a, b, W, X, y, caches: TanhCaches | None = None) -> GradBlocks:
    a, b, W = (np.asarray(t, dtype=np.float64) for t in (a, b, W))
    y = np.asarray(y, dtype=np.float64)
    X = _check(a, b, W, X, y.shape[0])
    n = X.shape[0]
    c = caches or TanhCaches.compute(b, W, X)
    d_a = -(2.0 / n) * (c.T @ y)
    Sy = c.S @ y
    d_b = -(2.0 / n) * a * Sy
    d_W = -(2.0 / n) * a[:, None] * (c.S @ (X * y[:, None]))
    return GradBlocks(d_a, d_b, d_W)


def interaction_coefficients(P, rho):
    """``R[i, m] = d(sum_k u_k)/dP[i, m] = (g_m + rho_i s_m) / n``.

    ``g = P^T rho`` is the weighted estimate and ``s = P^T 1`` the plain sum;
    the ``rho_i s_m`` part is the cross term from particle i appearing inside
    every other particle's u.
    """
    n = P.shape[1]
    g = P.T @ rho
    s = P.sum(axis=0)
    return (g[None, :] + rho[:, None] * s[None, :]) / n


def grad_u_binary(a, b, W, X, rho, caches: TanhCaches | None = None) -> GradBlocks:
    a, b, W = (np.asarray(t, dtype=np.float64) for t in (a, b, W))
    rho = np.asarray(rho, dtype=np.float64)
    X = _check(a, b, W, X, None)
    if rho.shape[0] != a.shape[0]:
        raise DataError("rho length differs from number of particles")
    c = caches or TanhCaches.compute(b, W, X)
    P = a[:, None] * c.T
    R = interaction_coefficients(P, rho)
    d_a = np.einsum("im,im->i", R, c.T)
    RS = R * c.S
    d_b = a * RS.sum(axis=1)
    d_W = a[:, None] * (RS @ X)
    return GradBlocks(d_a, d_b, d_W)


def grad_binary(theta, X, y, rho) -> GradBlocks:
    """Total drift ``grad(sum v + sum u)`` for the tanh head, one tanh pass."""
    theta = np.atleast_2d(np.asarray(theta, dtype=np.float64))
    a, b, W = theta[:, 0], theta[:, 1], theta[:, 2:]
    X = _check(a, b, W, X, len(y))
    caches = TanhCaches.compute(b, W, X)
    return grad_v_binary(a, b, W, X, y, caches) + grad_u_binary(a, b, W, X, rho, caches)


def drift_binary_fused(theta, X, t, rho):
    """Same total as :func:`grad_binary`, reassociated to avoid ``N x n`` temporaries.

    Returns ``(P, drift_rows)`` so callers can reuse the feature matrix.
    """
    theta = np.atleast_2d(np.asarray(theta, dtype=np.float64))
    a, b, W = theta[:, 0], theta[:, 1], theta[:, 2:]
    X = _check(a, b, W, X, len(t))
    n = X.shape[0]
    c = TanhCaches.compute(b, W, X)
    P = a[:, None] * c.T
    g = P.T @ rho
    s = P.sum(axis=0)
    # per-datum coefficients: own-row part (g - 2t)/n and cross part s/n scaled by rho_i
    own = (g - 2.0 * np.asarray(t, dtype=np.float64)) / n
    cross = s / n
    TC = c.T @ np.column_stack([own, cross])
    rhs = np.column_stack([own, cross, own[:, None] * X, cross[:, None] * X])
    SC = c.S @ rhs
    n_x = X.shape[1]
    d_a = TC[:, 0] + rho * TC[:, 1]
    d_b = a * (SC[:, 0] + rho * SC[:, 1])
    d_W = a[:, None] * (SC[:, 2:2 + n_x] + rho[:, None] * SC[:, 2 + n_x:])
    return P, np.column_stack([d_a, d_b, d_W])


def grad_multiclass(Theta, X, labels, rho, m: int | None = None) -> GradBlocks:
    """Drift for the softmax head.

    ``Theta`` is ``[N, m, n_x]`` (or flat ``[N, m*n_x]`` with ``m`` given);
    ``labels`` are class indices or a one-hot matrix. Uses
    ``dPhi/dTheta_i = s_y (e_y - s) x^T`` with ``s`` the softmax vector.
    """
    Theta = np.asarray(Theta, dtype=np.float64)
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    rho = np.asarray(rho, dtype=np.float64)
    if Theta.ndim == 2:
        if m is None:
            raise DataError("flat Theta needs the class count m")
        Theta = Theta.reshape(Theta.shape[0], m, -1)
    n_par, m, n_x = Theta.shape
    labels = np.asarray(labels)
    Y = labels if labels.ndim == 2 else one_hot(labels, m)
    if X.shape[0] == 0:
        raise DataError("gradient requested with zero data points")
    if X.shape[1] != n_x or Y.shape != (X.shape[0], m) or rho.shape[0] != n_par:
        raise DataError("shape mismatch in multi-class gradient inputs")
    n = X.shape[0]
    probs = class_probabilities(Theta.reshape(n_par, -1), X, m)
    P = np.einsum("idc,dc->id", probs, Y)
    G = interaction_coefficients(P, rho) - 2.0 / n
    A = G * P
    d_Theta = np.einsum("id,dc,dj->icj", A, Y, X) - np.einsum("id,idc,dj->icj", A, probs, X)
    return GradBlocks(d_Theta=d_Theta)


def drift(theta, X, y, rho, spec: ModelSpec) -> np.ndarray:
    """Per-particle drift rows, same shape as ``theta``."""
    if spec.is_binary:
        return grad_binary(theta, X, targets_for(y, spec), rho).flat()
    return grad_multiclass(theta, X, y, rho, m=spec.m).flat()


def fd_oracle(fn, point, step=1e-6) -> np.ndarray:
    """Central-difference gradient of a scalar function, one coordinate at a time."""
    if step <= 0:
        raise ValueError("step must be positive")
    x = np.array(point, dtype=np.float64)
    grad = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        orig = x[idx]
        x[idx] = orig + step
        f_plus = fn(x)
        x[idx] = orig - step
        f_minus = fn(x)
        x[idx] = orig
        grad[idx] = (f_plus - f_minus) / (2.0 * step)
    return grad
