"""Entropic Wasserstein proximal update of the particle weights.

Given the moved particles, the weights solve a Sinkhorn-type pair of scaling
equations

    z * (Gamma^T q) = xi * z**(-beta*eps/h)
    q * (Gamma z)   = rho_prev

and the new weights are ``z * (Gamma^T q)``. The z-map is a strict
contraction in the Thompson part metric, so the iteration converges to a
unique positive pair from any positive start.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, NumericalError

logger = logging.getLogger(__name__)

# exp() overflows past ~709.78 and underflows to zero below ~-745
_EXP_MAX = 700.0


@dataclass
class ProxInputs:
    Gamma: np.ndarray
    xi: np.ndarray
    rho_prev: np.ndarray
    exponent: float

    @classmethod
    def build(cls, Gamma, xi, rho_prev, beta, epsilon, h):
        return cls(Gamma, xi, rho_prev, 1.0 / (1.0 + beta * epsilon / h))


@dataclass
class ProxDiagnostics:
    iterations: int
    dq: float
    dz: float
    marginal_residual: float
    converged: bool
    thompson: list = field(default_factory=list)


def cost_matrix(theta_k, theta_prev) -> np.ndarray:
    """``C[i, j] = ||theta_k[i] - theta_prev[j]||^2``.

    Flattened multi-class blocks give the same value as summing the per-class
    distance matrices.
    """
    A = np.atleast_2d(np.asarray(theta_k, dtype=np.float64))
    B = np.atleast_2d(np.asarray(theta_prev, dtype=np.float64))
    if A.shape[1] != B.shape[1]:
        raise DataError(f"dimension mismatch: {A.shape[1]} vs {B.shape[1]}")
    sq_a = np.einsum("ij,ij->i", A, A)
    sq_b = np.einsum("ij,ij->i", B, B)
    # |a|^2 + |b|^2 - 2 a.b as a single product of augmented factors
    ones_a, ones_b = np.ones((A.shape[0], 1)), np.ones((B.shape[0], 1))
    C = np.hstack([-2.0 * A, sq_a[:, None], ones_a]) @ np.hstack([B, ones_b, sq_b[:, None]]).T
    # the expansion cancels badly for nearby points; redo the diagonal directly
    if A.shape == B.shape:
        diag = np.einsum("ij,ij->i", A - B, A - B)
        C[np.diag_indices_from(C)] = diag
    np.maximum(C, 0.0, out=C)
    return C


# exp() is slow on inputs whose result is subnormal and those subnormals then
# slow every product with the kernel; flooring the exponent keeps entries
# normal and positive (smallest entry ~1e-304)
_KERNEL_EXP_FLOOR = -700.0


def gibbs_kernel(C, epsilon) -> np.ndarray:
    """``exp(-C / 2 eps)`` with the exponent floored at -700."""
    if not epsilon > 0:
        raise DataError(f"epsilon must be positive, got {epsilon}")
    out = np.multiply(np.asarray(C, dtype=np.float64), -0.5 / epsilon)
    np.maximum(out, _KERNEL_EXP_FLOOR, out=out)
    return np.exp(out, out=out)


def xi_exponent(v, u, beta):
    return -beta * np.asarray(v) - beta * np.asarray(u) - 1.0


def xi_vector(v, U, rho_prev, beta, stabilize: bool = False) -> np.ndarray:
    """``exp(-beta v - beta U rho_prev - 1)``.

    ``U`` may be the kernel matrix or the precomputed product ``u = U rho``.
    With ``stabilize`` the exponent is shifted so its maximum is zero; the
    resulting weights are unchanged because a constant factor on xi is absorbed
    by rescaling z and q in opposite directions.
    """
    if not beta > 0:
        raise DataError(f"beta must be positive, got {beta}")
    U = np.asarray(U, dtype=np.float64)
    u = U @ rho_prev if U.ndim == 2 else U
    expo = xi_exponent(v, u, beta)
    if not np.all(np.isfinite(expo)):
        raise NumericalError("non-finite xi exponent; lower beta or rescale the data")
    if stabilize:
        expo = expo - expo.max()
    if expo.max() > _EXP_MAX or expo.min() < -_EXP_MAX:
        raise NumericalError(
            f"xi exponent range [{expo.min():.3g}, {expo.max():.3g}] overflows double precision; "
            "lower beta or rescale the data"
        )
    return np.exp(expo)


def sinkhorn_fixed_point(inputs: ProxInputs, delta=1e-3, L=300, z0=None, rng=None,
                         track: bool = False):
    """Run the z/q recursion and return ``(rho_next, diagnostics)``.

    Stops when the sup-norm change of both q and z drops below ``delta`` or
    after ``L`` sweeps. ``z0`` defaults to a uniform draw on (0, 1].
    """
    Gamma, xi, rho_prev, alpha = inputs.Gamma, inputs.xi, inputs.rho_prev, inputs.exponent
    n = rho_prev.shape[0]
    if Gamma.shape != (n, n) or xi.shape != (n,):
        raise DataError("Gamma / xi / rho_prev shapes disagree")
    if L < 1:
        raise DataError("L must be >= 1")
    if z0 is None:
        rng = rng if rng is not None else np.random.default_rng()
        z0 = 1.0 - rng.random(n)
    z = np.asarray(z0, dtype=np.float64)
    if np.any(z <= 0):
        raise DataError("z0 must be strictly positive")
    GT = Gamma.T
    q = rho_prev / (Gamma @ z)
    thompson = []
    converged = False
    dq = dz = np.inf
    it = 0
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        for it in range(1, L + 1):
            z_new = (xi / (GT @ q)) ** alpha
            q_new = rho_prev / (Gamma @ z_new)
            if not (np.all(np.isfinite(z_new)) and np.all(np.isfinite(q_new))
                    and np.all(z_new > 0) and np.all(q_new > 0)):
                raise NumericalError(f"non-finite or zero scaling vector at sweep {it}")
            dq = float(np.max(np.abs(q_new - q)))
            dz = float(np.max(np.abs(z_new - z)))
            if track:
                thompson.append(float(np.max(np.abs(np.log(z_new) - np.log(z)))))
            z, q = z_new, q_new
            if dq < delta and dz < delta:
                converged = True
                break
    rho_next = z * (GT @ q)
    if not (np.all(np.isfinite(rho_next)) and np.all(rho_next > 0)):
        raise NumericalError("proximal update produced non-positive weights")
    residual = float(np.max(np.abs(q * (Gamma @ z) - rho_prev)))
    diag = ProxDiagnostics(it, dq, dz, residual, converged, thompson)
    return rho_next, diag


def prox_weights(theta_k, theta_prev, rho_prev, v, u, beta, epsilon, h, delta, L, rng=None, z0=None):
    """Full weight update from moved particles: cost, kernel, xi, fixed point."""
    C = cost_matrix(theta_k, theta_prev)
    Gamma = gibbs_kernel(C, epsilon)
    xi = xi_vector(v, u, rho_prev, beta, stabilize=True)
    inputs = ProxInputs.build(Gamma, xi, rho_prev, beta, epsilon, h)
    return sinkhorn_fixed_point(inputs, delta, L, z0=z0, rng=rng)
