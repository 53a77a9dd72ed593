"""Feature maps, drift/interaction potentials, risk estimates and prediction.

Two heads are supported. ``binary_tanh`` stores each particle as
``(a, b, w_1..w_nx)`` and evaluates ``a * tanh(<w, x> + b)``.
``multi_softmax`` stores a row-major ``m x n_x`` weight block per particle and
evaluates the softmax probability assigned to the true class.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import softmax

from .errors import ConfigError, DataError

BINARY = "binary_tanh"
MULTI = "multi_softmax"


@dataclass(frozen=True)
class ModelSpec:
    variant: str
    n_x: int
    m: int = 2

    def __post_init__(self):
        if self.variant not in (BINARY, MULTI):
            raise ConfigError(f"unknown model variant {self.variant!r}")
        if self.n_x < 1:
            raise ConfigError("n_x must be >= 1")
        if self.variant == MULTI and self.m < 2:
            raise ConfigError("multi-class head needs m >= 2")

    @property
    def p(self) -> int:
        return self.n_x + 2 if self.variant == BINARY else self.m * self.n_x

    @property
    def is_binary(self) -> bool:
        return self.variant == BINARY

    def to_dict(self):
        return {"variant": self.variant, "n_x": self.n_x, "m": self.m}


@dataclass
class PotentialEval:
    P: np.ndarray
    v: np.ndarray
    U: np.ndarray | None
    u: np.ndarray


def phi_binary(theta_i, x) -> float:
    theta_i = np.asarray(theta_i, dtype=np.float64)
    a, b, w = theta_i[0], theta_i[1], theta_i[2:]
    return float(a * np.tanh(np.dot(w, x) + b))


def phi_multiclass(theta_i, x, y_onehot) -> float:
    y_onehot = np.asarray(y_onehot)
    if y_onehot.ndim != 1 or np.count_nonzero(y_onehot) != 1 or y_onehot.sum() != 1:
        raise DataError("label vector must be one-hot")
    theta_i = np.asarray(theta_i, dtype=np.float64)
    s = softmax(theta_i @ np.asarray(x, dtype=np.float64))
    return float(s @ y_onehot)


def unpack_binary(theta):
    return theta[:, 0], theta[:, 1], theta[:, 2:]


def tanh_preactivation(theta, X):
    a, b, W = unpack_binary(theta)
    return a, W @ X.T + b[:, None]


def class_probabilities(theta, X, m):
    """Softmax class probabilities, shape ``[N, n_data, m]``."""
    n_par = theta.shape[0]
    blocks = theta.reshape(n_par, m, -1)
    logits = np.einsum("icj,dj->idc", blocks, X)
    return softmax(logits, axis=2)


def one_hot(labels, m):
    labels = np.asarray(labels, dtype=int)
    if labels.size and (labels.min() < 0 or labels.max() >= m):
        raise DataError(f"class labels must lie in [0, {m})")
    Y = np.zeros((labels.size, m))
    Y[np.arange(labels.size), labels] = 1.0
    return Y


def feature_matrix(theta, X, spec: ModelSpec, labels=None):
    """Matrix ``P[i, j] = Phi(x_j, theta_i)``.

    For the multi-class head ``labels`` are class indices and the entry is the
    probability particle ``i`` puts on the true class of ``x_j``.
    """
    theta = np.atleast_2d(np.asarray(theta, dtype=np.float64))
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != spec.n_x or theta.shape[1] != spec.p:
        raise DataError(
            f"shape mismatch: theta {theta.shape}, X {X.shape} for p={spec.p}, n_x={spec.n_x}"
        )
    if spec.is_binary:
        a, z = tanh_preactivation(theta, X)
        return a[:, None] * np.tanh(z)
    if labels is None:
        raise DataError("multi-class feature matrix needs labels")
    probs = class_probabilities(theta, X, spec.m)
    labels = np.asarray(labels, dtype=int)
    return probs[:, np.arange(X.shape[0]), labels]


def targets_for(y, spec: ModelSpec):
    """Regression target of the mean-field estimate: labels (binary) or ones."""
    if spec.is_binary:
        return np.asarray(y, dtype=np.float64)
    return np.ones(len(y))


def build_potentials(theta, rho, X, y, spec: ModelSpec, with_U: bool = True) -> PotentialEval:
    """Evaluate P, drift potential v, interaction kernel U and u = U rho.

    ``with_U=False`` skips forming the ``N x N`` kernel; u is then computed as
    ``P (P^T rho) / n`` which is the same product reassociated.
    """
    rho = np.asarray(rho, dtype=np.float64)
    P = feature_matrix(theta, X, spec, None if spec.is_binary else y)
    n_data = P.shape[1]
    if n_data == 0:
        raise DataError("no data points")
    if rho.shape[0] != P.shape[0]:
        raise DataError(f"rho has {rho.shape[0]} entries, expected {P.shape[0]}")
    t = targets_for(y, spec)
    if t.shape[0] != n_data:
        raise DataError(f"{t.shape[0]} labels for {n_data} data points")
    v = -(2.0 / n_data) * (P @ t)
    if with_U:
        U = (P @ P.T) / n_data
        u = U @ rho
    else:
        U = None
        u = P @ (P.T @ rho) / n_data
    return PotentialEval(P=P, v=v, U=U, u=u)


def _weights(rho, normalize):
    rho = np.asarray(rho, dtype=np.float64)
    return rho / rho.sum() if normalize else rho


def mean_field_estimate(P, rho=None, normalize=True):
    """Weighted (``rho`` given) or uniform average of the columns of ``P``."""
    if rho is None:
        return P.mean(axis=0)
    return P.T @ _weights(rho, normalize)


def risk_weighted(P_test, rho, targets, normalize: bool = True) -> float:
    est = mean_field_estimate(P_test, rho, normalize)
    r = np.asarray(targets, dtype=np.float64) - est
    return float(r @ r / r.shape[0])


def risk_unweighted(P_test, targets) -> float:
    r = np.asarray(targets, dtype=np.float64) - P_test.mean(axis=0)
    return float(r @ r / r.shape[0])


@dataclass
class Prediction:
    labels: np.ndarray
    confusion: np.ndarray
    accuracy: float
    classes: np.ndarray


def confusion_matrix(true, pred, classes):
    index = {c: k for k, c in enumerate(classes)}
    cm = np.zeros((len(classes), len(classes)), dtype=int)
    for t, p in zip(true, pred):
        cm[index[t], index[p]] += 1
    return cm


def predict_labels(theta, rho, X, spec: ModelSpec, mode="weighted", normalize=True):
    """Predicted labels: sign for the binary head, argmax class for multi-class.

    The multi-class score of class c averages the logits ``theta_i[c] . x`` over
    particles (weighted by rho in weighted mode); argmax ties go to the lowest
    index.
    """
    if mode not in ("weighted", "unweighted"):
        raise ConfigError(f"unknown mode {mode!r}")
    theta = np.atleast_2d(np.asarray(theta, dtype=np.float64))
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[0] == 0:
        raise DataError("empty test set")
    w = _weights(rho, normalize) if mode == "weighted" else np.full(theta.shape[0], 1.0 / theta.shape[0])
    if spec.is_binary:
        P = feature_matrix(theta, X, spec)
        f = P.T @ w
        return np.where(f < 0, -1, 1)
    if X.shape[1] != spec.n_x or theta.shape[1] != spec.p:
        raise DataError("shape mismatch between particles and features")
    blocks = theta.reshape(theta.shape[0], spec.m, spec.n_x)
    mean_block = np.einsum("i,icj->cj", w, blocks)
    return np.argmax(X @ mean_block.T, axis=1)


def predict(theta, rho, X, y, spec: ModelSpec, mode="weighted", normalize=True) -> Prediction:
    labels = predict_labels(theta, rho, X, spec, mode, normalize)
    y = np.asarray(y)
    if spec.is_binary:
        classes = np.array([-1, 1])
        truth = np.where(y < 0, -1, 1)
    else:
        classes = np.arange(spec.m)
        truth = y.astype(int)
    cm = confusion_matrix(truth, labels, classes)
    return Prediction(labels=labels, confusion=cm, accuracy=float(np.mean(labels == truth)), classes=classes)
