"""Training loop: location move, weight prox, metrics, checkpoints.

A run consumes a single ``PCG64`` stream seeded from ``cfg.seed`` in this
order: initial locations, initial weights (random-weight mode only), then per
step one ``(N, p)`` normal block for the location update followed by one
length-N uniform block for the Sinkhorn starting point.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .cloud import InitSpec, ParticleCloud, init_cloud, load_cloud, read_meta, save_cloud
from .config import ProxConfig
from .data import (Dataset, SplitSpec, gen_sinusoid, load_semeion, load_tabular, load_wdbc,
                   split)
from .dynamics import EMConfig, em_update
from .errors import ConfigError, DataError, NumericalError
from .grad import drift_binary_fused, grad_multiclass
from .model import (ModelSpec, build_potentials, feature_matrix, predict, risk_unweighted,
                    risk_weighted, targets_for)
from .prox import ProxInputs, cost_matrix, gibbs_kernel, sinkhorn_fixed_point, xi_vector

logger = logging.getLogger(__name__)

METRICS_FILE = "metrics.csv"
METRICS_HEADER = ["iter", "risk_weighted", "risk_unweighted", "sinkhorn_iters",
                  "marginal_residual", "wall_ms"]
CHECKPOINT_DIR = "checkpoint"


@dataclass
class MetricsRow:
    iter: int
    risk_weighted: float
    risk_unweighted: float
    sinkhorn_iters: int
    marginal_residual: float
    wall_ms: float | None = None

    def as_fields(self):
        wall = "" if self.wall_ms is None else f"{self.wall_ms:.3f}"
        return [str(self.iter), repr(self.risk_weighted), repr(self.risk_unweighted),
                str(self.sinkhorn_iters), repr(self.marginal_residual), wall]


@dataclass
class Problem:
    """Everything a run needs besides the cloud: model, data splits, step settings."""

    cfg: ProxConfig
    spec: ModelSpec
    train: Dataset
    test: Dataset

    @property
    def em(self) -> EMConfig:
        return EMConfig(self.cfg.h, self.cfg.beta, self.cfg.noise_scale)


# ---------------------------------------------------------------- setup

def load_dataset(desc: dict, cfg: ProxConfig | None = None, path_override=None) -> Dataset:
    kind = desc["kind"]
    if kind == "sinusoid":
        lo, hi = desc.get("x_range", (-np.pi, np.pi))
        return gen_sinusoid(desc.get("n_points", 100), (lo, hi), desc.get("data_seed", 0))
    raw = path_override or desc.get("path")
    if raw is None:
        raise ConfigError(f"dataset {kind!r} needs a path")
    path = cfg.resolve(raw) if (cfg is not None and path_override is None) else Path(raw)
    if not path.exists():
        raise DataError(f"dataset file not found: {path}")
    if kind == "wdbc":
        return load_wdbc(path)
    if kind == "semeion":
        return load_semeion(path)
    return load_tabular(path, kind)


def make_splits(ds: Dataset, cfg: ProxConfig):
    desc = cfg.dataset
    if desc["kind"] == "sinusoid":
        # held-out points are an independent draw over the same range
        lo, hi = desc.get("x_range", (-np.pi, np.pi))
        test = gen_sinusoid(desc.get("n_test", 100), (lo, hi), desc.get("data_seed", 0) + 1)
        return ds, test
    if cfg.split is None:
        return ds, ds
    return split(ds, SplitSpec(**cfg.split))


def make_model(cfg: ProxConfig, ds: Dataset) -> ModelSpec:
    m = cfg.model
    n_x = m.get("n_x", ds.n_x)
    if n_x != ds.n_x:
        raise ConfigError(f"model n_x={n_x} but data has {ds.n_x} features")
    return ModelSpec(m["variant"], n_x, m.get("m", ds.n_classes or 2))


def build_problem(cfg: ProxConfig, data_path=None) -> Problem:
    ds = load_dataset(cfg.dataset, cfg, data_path)
    spec = make_model(cfg, ds)
    train_ds, test_ds = make_splits(ds, cfg)
    return Problem(cfg, spec, train_ds, test_ds)


def initial_cloud(problem: Problem, rng: np.random.Generator) -> ParticleCloud:
    init = problem.cfg.init
    spec = InitSpec.from_blocks(
        init["blocks"], problem.spec.p,
        weight_mode=init.get("weight_mode", "uniform_density"),
        weight_low=init.get("weight_low", 0.0),
        weight_high=init.get("weight_high", 1.0),
        weight_value=init.get("weight_value", 1.0),
    )
    return init_cloud(spec, problem.cfg.N, problem.spec.p, rng)


# ---------------------------------------------------------------- one step

def potentials_and_drift(theta, rho, X, y, spec: ModelSpec):
    """``(v, u, drift)`` at the current locations."""
    n = X.shape[0]
    if n == 0:
        raise DataError("no training points")
    if spec.is_binary:
        t = targets_for(y, spec)
        P, d = drift_binary_fused(theta, X, t, rho)
        v = -(2.0 / n) * (P @ t)
        u = P @ (P.T @ rho) / n
        return v, u, d
    pot = build_potentials(theta, rho, X, y, spec, with_U=False)
    return pot.v, pot.u, grad_multiclass(theta, X, y, rho, m=spec.m).flat()


def step_inputs(cloud: ParticleCloud, problem: Problem, rng: np.random.Generator):
    """Location move plus the weight-prox inputs it induces; returns ``(moved_cloud, ProxInputs)``."""
    cfg = problem.cfg
    v, u, d = potentials_and_drift(cloud.theta, cloud.rho, problem.train.X,
                                   problem.train.y, problem.spec)
    moved = em_update(cloud, d, problem.em, rng)
    Gamma = gibbs_kernel(cost_matrix(moved.theta, cloud.theta), cfg.epsilon)
    xi = xi_vector(v, u, cloud.rho, cfg.beta, stabilize=True)
    return moved, ProxInputs.build(Gamma, xi, cloud.rho, cfg.beta, cfg.epsilon, cfg.h)


def prox_learn_step(cloud: ParticleCloud, problem: Problem, rng: np.random.Generator):
    """Advance one step; returns ``(new_cloud, ProxDiagnostics)``."""
    k = cloud.step_index + 1
    try:
        moved, inputs = step_inputs(cloud, problem, rng)
        rho, diag = sinkhorn_fixed_point(inputs, problem.cfg.delta, problem.cfg.L, rng=rng)
    except NumericalError as exc:
        if exc.step is not None:
            raise
        raise NumericalError(str(exc), step=k) from exc
    return ParticleCloud(moved.theta, rho, k), diag


# ---------------------------------------------------------------- metrics

def risks(cloud: ParticleCloud, problem: Problem, ds: Dataset | None = None):
    ds = problem.test if ds is None else ds
    P = feature_matrix(cloud.theta, ds.X, problem.spec, None if problem.spec.is_binary else ds.y)
    t = targets_for(ds.y, problem.spec)
    return (risk_weighted(P, cloud.rho, t, normalize=problem.cfg.normalize_weights),
            risk_unweighted(P, t))


def _read_metrics_rows(path: Path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != METRICS_HEADER:
        raise DataError(f"{path} does not look like a metrics file")
    return rows[1:]


def _write_metrics(path: Path, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(METRICS_HEADER)
    writer.writerows(rows)
    path.write_text(buf.getvalue())


def read_metrics(path) -> dict:
    """Metrics file as a dict of numpy columns."""
    rows = _read_metrics_rows(Path(path))
    cols = list(zip(*rows)) if rows else [()] * len(METRICS_HEADER)
    out = {}
    for name, col in zip(METRICS_HEADER, cols):
        out[name] = np.array([float(c) if c != "" else np.nan for c in col])
    return out


# ---------------------------------------------------------------- train

def _checkpoint_meta(problem: Problem, rng: np.random.Generator, extra=None):
    meta = {
        "model": problem.spec.to_dict(),
        "config_hash": problem.cfg.hash(),
        "seed": problem.cfg.seed,
        "config": problem.cfg.to_dict(),
        "rng_state": rng.bit_generator.state,
    }
    meta.update(extra or {})
    return meta


def _manifest(problem: Problem) -> dict:
    out = {"train": problem.train.manifest(), "test": problem.test.manifest(),
           "split": problem.cfg.split}
    if problem.cfg.dataset["kind"] == "sinusoid":
        out["sinusoid"] = problem.cfg.dataset
    return out


def train(cfg: ProxConfig, out_dir, resume: bool = False, data_path=None) -> Path:
    """Run ``cfg.iterations`` steps, writing metrics, checkpoints and a summary to ``out_dir``.

    With ``resume`` the run continues from ``out_dir/checkpoint`` and metrics
    rows past the checkpoint are discarded, so the result matches an
    uninterrupted run.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    problem = build_problem(cfg, data_path)
    ck_dir = out / CHECKPOINT_DIR
    metrics_path = out / METRICS_FILE

    if resume:
        meta = read_meta(ck_dir)
        if meta.get("config_hash") != cfg.hash():
            raise ConfigError("checkpoint was written with a different configuration")
        cloud = load_cloud(ck_dir)
        rng = np.random.Generator(np.random.PCG64())
        rng.bit_generator.state = meta["rng_state"]
        rows = [r for r in _read_metrics_rows(metrics_path) if int(r[0]) <= cloud.step_index]
    else:
        rng = np.random.default_rng(cfg.seed)
        cloud = initial_cloud(problem, rng)
        rows = []
        (out / "config.json").write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")
        (out / "dataset.json").write_text(json.dumps(_manifest(problem), indent=2, sort_keys=True) + "\n")

    unconverged = 0
    t_start = time.perf_counter()
    t_last = t_start
    try:
        while cloud.step_index < cfg.iterations:
            prev_cloud, prev_state = cloud, rng.bit_generator.state
            try:
                cloud, diag = prox_learn_step(cloud, problem, rng)
            except NumericalError:
                save_cloud(prev_cloud, ck_dir, _checkpoint_meta(problem, _rng_from(prev_state),
                                                                {"aborted": True}))
                raise
            k = cloud.step_index
            if not diag.converged:
                unconverged += 1
                logger.debug("step %d: fixed point not converged after %d sweeps", k, diag.iterations)
            if k % cfg.log_every == 0 or k == cfg.iterations:
                rw, ru = risks(cloud, problem)
                wall = None
                if cfg.record_timing:
                    now = time.perf_counter()
                    wall, t_last = 1e3 * (now - t_last), now
                rows.append(MetricsRow(k, rw, ru, diag.iterations, diag.marginal_residual, wall).as_fields())
                if unconverged:
                    logger.warning("%d of the last steps hit the sweep cap L=%d before tolerance %g",
                                   unconverged, cfg.L, cfg.delta)
                    unconverged = 0
                logger.info("step %d risk_weighted=%.6g risk_unweighted=%.6g", k, rw, ru)
            if cfg.checkpoint_every and k % cfg.checkpoint_every == 0 and k < cfg.iterations:
                _write_metrics(metrics_path, rows)
                save_cloud(cloud, ck_dir, _checkpoint_meta(problem, rng))
    finally:
        _write_metrics(metrics_path, rows)

    save_cloud(cloud, ck_dir, _checkpoint_meta(problem, rng))
    summary = summarize(cloud, problem)
    summary["runtime_s"] = time.perf_counter() - t_start
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return out


def _rng_from(state) -> np.random.Generator:
    rng = np.random.Generator(np.random.PCG64())
    rng.bit_generator.state = state
    return rng


# ---------------------------------------------------------------- evaluation

def summarize(cloud: ParticleCloud, problem: Problem) -> dict:
    out = {"iterations": cloud.step_index, "mass": cloud.mass}
    for name, ds in (("train", problem.train), ("test", problem.test)):
        rw, ru = risks(cloud, problem, ds)
        out[f"{name}_risk_weighted"] = rw
        out[f"{name}_risk_unweighted"] = ru
        if problem.cfg.dataset["kind"] != "sinusoid":
            for mode in ("weighted", "unweighted"):
                pred = predict(cloud.theta, cloud.rho, ds.X, ds.y, problem.spec, mode,
                               problem.cfg.normalize_weights)
                out[f"{name}_accuracy_{mode}"] = pred.accuracy
    return out


def evaluate(checkpoint, data_path=None, mode="weighted", subset="test") -> dict:
    """Accuracy report for a saved cloud on the train/test/all part of a dataset."""
    meta = read_meta(checkpoint)
    if "config" not in meta:
        raise DataError(f"{checkpoint} has no stored configuration")
    cfg = ProxConfig.from_dict(meta["config"])
    cloud = load_cloud(checkpoint)
    problem = build_problem(cfg, data_path)
    if cloud.dim != problem.spec.p:
        raise DataError(f"dimension mismatch: checkpoint p={cloud.dim}, data implies p={problem.spec.p}")
    if subset == "train":
        ds = problem.train
    elif subset == "test":
        ds = problem.test
    elif subset == "all":
        ds = load_dataset(cfg.dataset, cfg, data_path)
    else:
        raise ConfigError(f"unknown subset {subset!r}")
    rw, ru = risks(cloud, problem, ds)
    report = {"mode": mode, "subset": subset, "n_data": len(ds), "step_index": cloud.step_index,
              "risk_weighted": rw, "risk_unweighted": ru}
    if cfg.dataset["kind"] != "sinusoid":
        pred = predict(cloud.theta, cloud.rho, ds.X, ds.y, problem.spec, mode, cfg.normalize_weights)
        classes = ds.display_labels(pred.classes) if problem.spec.is_binary else pred.classes
        report.update(accuracy=pred.accuracy, classes=[int(c) for c in classes],
                      confusion=pred.confusion.tolist())
    return report


def format_report(report: dict) -> str:
    lines = [f"{k:>16}: {report[k]}" for k in
             ("mode", "subset", "n_data", "step_index", "risk_weighted", "risk_unweighted", "accuracy")
             if k in report]
    if "confusion" in report:
        classes = report["classes"]
        width = max(6, *(len(str(c)) + 2 for c in classes))
        lines.append("confusion (rows true, cols predicted)")
        lines.append(" " * width + "".join(f"{c:>{width}}" for c in classes))
        for c, row in zip(classes, report["confusion"]):
            lines.append(f"{c:>{width}}" + "".join(f"{x:>{width}}" for x in row))
    return "\n".join(lines)


# ---------------------------------------------------------------- sweep

SWEEP_PARAMS = {"epsilon": float, "beta": float, "N": int}
SWEEP_HEADER = ["param", "value", "seed", "final_risk_weighted", "final_risk_unweighted",
                "train_accuracy", "test_accuracy", "runtime_s"]


def sweep(cfg: ProxConfig, param: str, values, out_dir, seeds=None) -> Path:
    if param not in SWEEP_PARAMS:
        raise ConfigError(f"sweep parameter must be one of {sorted(SWEEP_PARAMS)}")
    if not values:
        raise ConfigError("sweep needs at least one value")
    values = [SWEEP_PARAMS[param](v) for v in values]
    seeds = [cfg.seed] if seeds is None else list(seeds)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for value in values:
        for seed in seeds:
            run_cfg = cfg.replace(**{param: value, "seed": seed})
            run_dir = train(run_cfg, out / f"{param}={value}" / f"seed={seed}")
            summary = json.loads((run_dir / "summary.json").read_text())
            rows.append([param, value, seed, summary["test_risk_weighted"],
                         summary["test_risk_unweighted"],
                         summary.get("train_accuracy_weighted", ""),
                         summary.get("test_accuracy_weighted", ""),
                         f"{summary['runtime_s']:.3f}"])
    with open(out / "summary.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SWEEP_HEADER)
        writer.writerows(rows)
    return out / "summary.csv"
