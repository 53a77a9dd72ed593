"""Weighted point cloud: parameter samples plus the density value carried by each."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError

THETA_FILE = "theta.csv"
RHO_FILE = "rho.csv"
META_FILE = "meta.json"
FLOAT_FMT = "%.17g"


@dataclass
class ParticleCloud:
    theta: np.ndarray
    rho: np.ndarray
    step_index: int = 0

    def __post_init__(self):
        self.theta = np.atleast_2d(np.asarray(self.theta, dtype=np.float64))
        self.rho = np.asarray(self.rho, dtype=np.float64).reshape(-1)
        validate_cloud(self)

    @property
    def n_particles(self) -> int:
        return self.theta.shape[0]

    @property
    def dim(self) -> int:
        return self.theta.shape[1]

    @property
    def mass(self) -> float:
        return float(self.rho.sum())

    def copy(self) -> "ParticleCloud":
        return ParticleCloud(self.theta.copy(), self.rho.copy(), self.step_index)


def validate_cloud(cloud: ParticleCloud) -> None:
    if cloud.theta.ndim != 2:
        raise DataError(f"theta must be 2-D, got shape {cloud.theta.shape}")
    if cloud.rho.shape[0] != cloud.theta.shape[0]:
        raise DataError(
            f"rho has {cloud.rho.shape[0]} entries but theta has {cloud.theta.shape[0]} rows"
        )
    if not np.all(np.isfinite(cloud.theta)):
        raise DataError("theta contains non-finite entries")
    if not np.all(np.isfinite(cloud.rho)) or np.any(cloud.rho <= 0):
        raise DataError("rho must be finite and strictly positive")
    if cloud.step_index < 0:
        raise DataError("step_index must be nonnegative")


@dataclass
class InitSpec:
    """Sampling box for the initial cloud.

    ``intervals`` is a list of ``(low, high)`` pairs, one per coordinate.
    ``weight_mode`` is ``"uniform_density"`` (every weight equals 1/volume of
    the box), ``"uniform_random"`` (weights drawn i.i.d. from
    ``(weight_low, weight_high]``) or ``"constant"`` (every weight equals
    ``weight_value``).
    """

    intervals: list
    weight_mode: str = "uniform_density"
    weight_low: float = 0.0
    weight_high: float = 1.0
    weight_value: float = 1.0
    seed: int = 0

    def __post_init__(self):
        self.intervals = [(float(lo), float(hi)) for lo, hi in self.intervals]
        for lo, hi in self.intervals:
            if not (np.isfinite(lo) and np.isfinite(hi)) or lo >= hi:
                raise ConfigError(f"empty or invalid interval [{lo}, {hi}]")
        if self.weight_mode not in ("uniform_density", "uniform_random", "constant"):
            raise ConfigError(f"unknown weight_mode {self.weight_mode!r}")
        if self.weight_mode == "uniform_random":
            if self.weight_low < 0 or self.weight_high <= self.weight_low:
                raise ConfigError("uniform_random weights need 0 <= weight_low < weight_high")
        if self.weight_mode == "constant" and not (np.isfinite(self.weight_value) and self.weight_value > 0):
            raise ConfigError("constant weight must be positive and finite")

    @classmethod
    def from_blocks(cls, blocks, p, **kwargs) -> "InitSpec":
        """Expand ``[{"low", "high", "size"}]`` blocks into per-coordinate intervals.

        A block with ``size`` None fills whatever coordinates remain.
        """
        fixed = sum(int(b["size"]) for b in blocks if b.get("size") is not None)
        n_fill = sum(1 for b in blocks if b.get("size") is None)
        if n_fill > 1:
            raise ConfigError("at most one init block may omit 'size'")
        rest = p - fixed
        if rest < 0 or (n_fill == 0 and rest != 0) or (n_fill == 1 and rest < 1):
            raise ConfigError(f"init blocks do not cover p={p} coordinates")
        intervals = []
        for b in blocks:
            size = rest if b.get("size") is None else int(b["size"])
            intervals.extend([(b["low"], b["high"])] * size)
        return cls(intervals=intervals, **kwargs)

    @property
    def volume(self) -> float:
        return float(np.prod([hi - lo for lo, hi in self.intervals]))


def init_cloud(spec: InitSpec, n: int, p: int, rng: np.random.Generator | None = None) -> ParticleCloud:
    """Draw ``n`` samples uniformly from the box and assign initial weights.

    If ``rng`` is given it is consumed (theta first, then weights); otherwise a
    fresh generator is seeded from ``spec.seed``.
    """
    if n < 1 or p < 1:
        raise ConfigError(f"need N >= 1 and p >= 1, got N={n}, p={p}")
    if len(spec.intervals) != p:
        raise ConfigError(f"init spec has {len(spec.intervals)} intervals, expected p={p}")
    if rng is None:
        rng = np.random.default_rng(spec.seed)
    lo = np.array([iv[0] for iv in spec.intervals])
    hi = np.array([iv[1] for iv in spec.intervals])
    theta = lo + (hi - lo) * rng.random((n, p))
    if spec.weight_mode == "uniform_density":
        vol = np.prod(hi - lo)
        if not (np.isfinite(vol) and vol > 0 and np.isfinite(1.0 / vol)):
            # very high-dimensional boxes: go through logs
            vol = np.exp(np.sum(np.log(hi - lo)))
        rho = np.full(n, 1.0 / vol)
    elif spec.weight_mode == "constant":
        rho = np.full(n, float(spec.weight_value))
    else:
        # 1 - U(0,1] keeps draws in (low, high]
        u = 1.0 - rng.random(n)
        rho = spec.weight_low + (spec.weight_high - spec.weight_low) * u
    return ParticleCloud(theta, rho, 0)


def save_cloud(cloud: ParticleCloud, path, meta: dict | None = None) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    np.savetxt(path / THETA_FILE, cloud.theta, fmt=FLOAT_FMT, delimiter=",")
    np.savetxt(path / RHO_FILE, cloud.rho.reshape(-1, 1), fmt=FLOAT_FMT, delimiter=",")
    record = {"N": cloud.n_particles, "p": cloud.dim, "step_index": int(cloud.step_index)}
    record.update(meta or {})
    with open(path / META_FILE, "w") as fh:
        json.dump(record, fh, indent=2, sort_keys=True)
    return path


def read_meta(path) -> dict:
    try:
        with open(Path(path) / META_FILE) as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise DataError(f"no {META_FILE} in {path}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"malformed {META_FILE}: {exc}") from exc


def _read_matrix(fname, ncols):
    try:
        with open(fname) as fh:
            rows = [line.strip() for line in fh if line.strip()]
    except FileNotFoundError as exc:
        raise DataError(f"missing checkpoint file {fname}") from exc
    try:
        mat = np.array([[float(v) for v in r.split(",")] for r in rows], dtype=np.float64)
    except ValueError as exc:
        raise DataError(f"malformed numeric entry in {fname}: {exc}") from exc
    if mat.size == 0:
        mat = mat.reshape(0, ncols)
    if mat.ndim != 2 or mat.shape[1] != ncols:
        raise DataError(f"{fname}: expected {ncols} columns per row")
    return mat


def load_cloud(path) -> ParticleCloud:
    path = Path(path)
    meta = read_meta(path)
    n, p = int(meta["N"]), int(meta["p"])
    theta = _read_matrix(path / THETA_FILE, p)
    rho = _read_matrix(path / RHO_FILE, 1).reshape(-1)
    if theta.shape[0] != n or rho.shape[0] != n:
        raise DataError(
            f"dimension mismatch: meta says N={n}, theta has {theta.shape[0]} rows, "
            f"rho has {rho.shape[0]} rows"
        )
    return ParticleCloud(theta, rho, int(meta.get("step_index", 0)))
