"""Nonlocal Euler-Maruyama location update.

Normal variates come from numpy's ``Generator`` over ``PCG64`` using its
ziggurat ``standard_normal``; one ``(N, p)`` block is drawn per step in C
(row-major) order, so a given seed reproduces the same path on any machine
running the same numpy major version.
"""

from dataclasses import dataclass

import numpy as np

from .cloud import ParticleCloud
from .errors import ConfigError, NumericalError


@dataclass(frozen=True)
class EMConfig:
    h: float
    beta: float
    noise_scale: float = 1.0

    def __post_init__(self):
        if not self.h > 0 or not self.beta > 0 or self.noise_scale < 0:
            raise ConfigError("need h > 0, beta > 0, noise_scale >= 0")

    @property
    def noise_std(self) -> float:
        return self.noise_scale * np.sqrt(2.0 * self.h / self.beta)


def em_update(cloud: ParticleCloud, drift, cfg: EMConfig, rng: np.random.Generator) -> ParticleCloud:
    drift = np.asarray(drift, dtype=np.float64)
    if drift.shape != cloud.theta.shape:
        raise NumericalError(f"drift shape {drift.shape} != theta shape {cloud.theta.shape}")
    if not np.all(np.isfinite(drift)):
        raise NumericalError("non-finite drift")
    # the draw happens even with noise off so the stream position does not depend on noise_scale
    g = rng.standard_normal(cloud.theta.shape)
    theta = cloud.theta - cfg.h * drift
    if cfg.noise_scale > 0:
        theta = theta + cfg.noise_std * g
    if not np.all(np.isfinite(theta)):
        raise NumericalError("particle locations overflowed")
    return ParticleCloud(theta, cloud.rho.copy(), cloud.step_index)
