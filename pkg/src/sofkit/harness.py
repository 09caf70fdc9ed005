"""Experiment harness: four desk-scale experiments around the semantic
objective functions, with deterministic seeding and CSV/JSON reports.

exp1  constraint learning with the Walsh perceptron (all 15 satisfiable
      two-variable formulas x 5 canonical initial distributions).
exp2  image classification with MSE plus a one-hot-constraint regularizer.
exp3  knowledge distillation from an exp2 teacher checkpoint.
exp4  continuous quarter-disc constraint, learnable normal mean.
"""

from __future__ import annotations

import csv
import json
import os
import time
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from . import __version__
from . import autodiff as ad
from . import continuous as co
from . import datasets as ds
from . import models
from . import optim
from . import prop_logic as pl
from . import simplex

REPORT_VERSION = 1

PROFILES = {
    "desk": {
        "train_subset": 10_000,
        "test_subset": 2_000,
        "teacher_sizes": [784, 128, 128, 10],
        "student_sizes": [784, 64, 64, 10],
        "epochs": 3,
        "batch_size": 128,
        "mlp_lr": 1e-3,
        "exp1_steps": 2000,
        "exp1_lr": 0.01,
        "exp4_steps": 2000,
        "exp4_train_grid": (64, 64),
        "exp4_eval_grid": (256, 256),
        "exp4_n_seeds": 10,
    },
    "paper": {
        "train_subset": None,
        "test_subset": None,
        "teacher_sizes": [784, 512, 512, 10],
        "student_sizes": [784, 256, 256, 10],
        "epochs": 10,
        "batch_size": 128,
        "mlp_lr": 1e-3,
        "exp1_steps": 2000,
        "exp1_lr": 0.01,
        "exp4_steps": 2000,
        "exp4_train_grid": (128, 128),
        "exp4_eval_grid": (512, 512),
        "exp4_n_seeds": 10,
    },
}

# Table-1 initial distributions ("approx": zero entries get floored).
CANONICAL_INITS = {
    "[1 0 0 0]": np.array([1.0, 0.0, 0.0, 0.0]),
    "[0 1 0 0]": np.array([0.0, 1.0, 0.0, 0.0]),
    "[.5 0 0 .5]": np.array([0.5, 0.0, 0.0, 0.5]),
    "[.33 .33 .33 0]": np.array([1 / 3, 1 / 3, 1 / 3, 0.0]),
    "[.25 .25 .25 .25]": np.array([0.25, 0.25, 0.25, 0.25]),
}

SIMPLEX_LOSSES = ("fisher", "kl", "l2", "wmc", "sloss")
CONTINUOUS_LOSSES = ("w", "logw", "kldiv")

# Best learning rate per (optimizer, loss) from the reference grid search;
# W/logW deliberately stay at 1e-4, which is part of why they plateau.
EXP4_DEFAULT_LR = {
    ("adam", "w"): 1e-4,
    ("adam", "logw"): 1e-4,
    ("adam", "kldiv"): 0.01,
    ("sgd", "w"): 1e-4,
    ("sgd", "logw"): 1e-4,
    ("sgd", "kldiv"): 0.001,
}

LAMBDA_GRID = (1.0, 0.1, 0.01, 0.001, 0.0001)


@dataclass
class ExperimentConfig:
    experiment: str = "exp1"
    losses: Optional[Sequence[str]] = None
    formula: Optional[str] = None  # exp1: formula text; None = all 15 two-var
    lambda_grid: Optional[Sequence[float]] = None
    learning_rate: Optional[float] = None
    steps: Optional[int] = None
    epochs: Optional[int] = None
    seed: int = 0
    seeds: Optional[Sequence[int]] = None
    profile: str = "desk"
    data_dir: Optional[str] = None
    dataset: str = "mnist"
    sigma: float = 0.35
    optimizers: Sequence[str] = ("adam", "sgd")
    teacher_checkpoint: Optional[str] = None
    checkpoint_out: Optional[str] = None
    out: Optional[str] = None
    format: str = "csv"

    def __post_init__(self):
        if self.experiment not in ("exp1", "exp2", "exp3", "exp4"):
            raise ValueError(f"unknown experiment {self.experiment!r}")
        if self.profile not in PROFILES:
            raise ValueError(f"unknown profile {self.profile!r}")
        if self.lambda_grid is not None and any(l < 0 for l in self.lambda_grid):
            raise ValueError("lambda values must be >= 0")

    @property
    def prof(self):
        return PROFILES[self.profile]


@dataclass
class ResultTable:
    rows: List[dict] = field(default_factory=list)
    version: int = REPORT_VERSION
    meta: dict = field(default_factory=dict)

    def add(self, **row):
        self.rows.append(row)


def report(table: ResultTable, path, format="csv"):
    """Write the table; CSV carries meta as commented header lines."""
    meta = dict(table.meta)
    meta.setdefault("version", table.version)
    meta.setdefault("sofkit_version", __version__)
    meta["timestamp"] = time.strftime("%Y-%m-%dT%H:%M:%S")
    if format == "json":
        with open(path, "w") as fh:
            json.dump({"meta": meta, "rows": table.rows}, fh, indent=1)
        return path
    if format != "csv":
        raise ValueError(f"unknown report format {format!r}")
    keys: List[str] = []
    for row in table.rows:
        for k in row:
            if k not in keys:
                keys.append(k)
    with open(path, "w", newline="") as fh:
        for k, v in meta.items():
            fh.write(f"# {k}={v}\n")
        writer = csv.DictWriter(fh, fieldnames=keys)
        writer.writeheader()
        for row in table.rows:
            writer.writerow(row)
    return path


def load_report(path):
    """Round-trip reader for JSON reports."""
    with open(path) as fh:
        payload = json.load(fh)
    table = ResultTable(rows=payload["rows"], meta=payload["meta"])
    return table


# ---------------------------------------------------------------------------
# experiment 1: constraint learning


def _exp1_formulas(cfg: ExperimentConfig):
    if cfg.formula:
        f = pl.parse_formula(cfg.formula, 2)
        ms = pl.enumerate_models(f)
        if len(ms) == 0:
            raise pl.UnsatisfiableConstraintError(f"{cfg.formula!r} has no models")
        return [(str(ms.truth_table()), ms)]
    return [(str(label), ms) for label, ms in pl.enumerate_two_var_formulas()]


def train_fsp(mset: pl.ModelSet, init_dist, loss: str, steps: int, lr: float):
    """Full-batch SGD on a single constraint; returns the final distribution."""
    if np.any(init_dist < 0) or abs(float(np.sum(init_dist)) - 1.0) > 1e-9:
        raise ValueError("initial distribution must be a valid distribution")
    fsp = models.init_from_target(init_dist)

    def loss_fn(params, _batch):
        dist = models.fsp_distribution_from(params[0], fsp.n)
        return simplex.regularizer(loss, mset, dist)

    cfg = optim.OptimizerConfig(kind="sgd", learning_rate=lr, steps=steps)
    trace = optim.train([fsp.coefficients], loss_fn, cfg)
    return models.fsp_distribution(models.FSPModel(fsp.n, trace.final_params[0]))


def run_exp1(cfg: ExperimentConfig) -> ResultTable:
    prof = cfg.prof
    steps = cfg.steps if cfg.steps is not None else prof["exp1_steps"]
    lr = cfg.learning_rate if cfg.learning_rate is not None else prof["exp1_lr"]
    losses = tuple(cfg.losses) if cfg.losses else SIMPLEX_LOSSES
    table = ResultTable(meta={"experiment": "exp1", "steps": steps, "lr": lr,
                              "seed": cfg.seed, "profile": cfg.profile})
    for label, mset in _exp1_formulas(cfg):
        rho = pl.constraint_distribution(mset)
        for init_label, init in CANONICAL_INITS.items():
            for loss in losses:
                final = train_fsp(mset, init, loss, steps, lr)
                table.add(
                    formula=label,
                    init=init_label,
                    loss=loss,
                    seed=cfg.seed,
                    final_kl=simplex.kl_divergence(rho, final),
                    final_fisher=simplex.fisher_rao(rho, final),
                    final_l2=simplex.l2_distance(rho, final),
                )
    return table


# ---------------------------------------------------------------------------
# experiments 2 and 3: classification


def _load_classification_data(cfg: ExperimentConfig):
    prof = cfg.prof
    train = test = None
    if cfg.data_dir:
        base = os.path.join(cfg.data_dir, cfg.dataset)
        paths = {
            "train_images": "train-images-idx3-ubyte",
            "train_labels": "train-labels-idx1-ubyte",
            "test_images": "t10k-images-idx3-ubyte",
            "test_labels": "t10k-labels-idx1-ubyte",
        }
        found = {}
        for key, name in paths.items():
            for candidate in (os.path.join(base, name), os.path.join(base, name + ".gz")):
                if os.path.exists(candidate):
                    found[key] = candidate
                    break
        if len(found) == 4:
            train = ds.load_dataset(found["train_images"], found["train_labels"],
                                    cfg.dataset, "train")
            test = ds.load_dataset(found["test_images"], found["test_labels"],
                                   cfg.dataset, "test")
    synthetic = train is None
    if synthetic:
        n_train = prof["train_subset"] or 10_000
        n_test = prof["test_subset"] or 2_000
        pool = ds.synthetic_onehot_dataset(n_train + n_test, 10, seed=cfg.seed)
        train = ds.ImageDataset(pool.images[:n_train], pool.labels[:n_train],
                                pool.name, "train")
        test = ds.ImageDataset(pool.images[n_train:], pool.labels[n_train:],
                               pool.name, "test")
    if prof["train_subset"]:
        train = train.subset(prof["train_subset"])
    if prof["test_subset"]:
        test = test.subset(prof["test_subset"])
    return train, test, synthetic


def _split_validation(train: ds.ImageDataset, frac=0.1):
    n_val = max(1, int(len(train) * frac))
    val = ds.ImageDataset(train.images[-n_val:], train.labels[-n_val:],
                          train.name, "val")
    fit = ds.ImageDataset(train.images[:-n_val], train.labels[:-n_val],
                          train.name, "train")
    return fit, val


_ONE_HOT_MODELS = pl.enumerate_models(pl.one_hot_formula(10))


def onehot_sof(kind: str, p):
    """Mean semantic objective of a (batch, 10) per-class probability Node
    against the 10-class one-hot constraint."""
    if kind == "l2":
        omega = models.bernoulli_weights_on(p, models.assignment_bits(10))
        return ad.mean(simplex.regularizer(kind, _ONE_HOT_MODELS, omega))
    # the other objectives only touch the model indices, so the weights are
    # evaluated on the 10 one-hot assignments directly
    bits = models.assignment_bits(10)[_ONE_HOT_MODELS.indices]
    omega_models = models.bernoulli_weights_on(p, bits)
    k = len(_ONE_HOT_MODELS)
    if kind == "fisher":
        bc = ad.div(ad.sum(ad.sqrt(omega_models), axis=-1), np.sqrt(k))
        return ad.mean(ad.arccos(bc))
    if kind == "kl":
        return ad.mean(
            ad.sub(-np.log(k), ad.div(ad.sum(ad.log(omega_models), axis=-1), k))
        )
    if kind == "wmc":
        return ad.neg(ad.mean(ad.sum(omega_models, axis=-1)))
    if kind == "sloss":
        return ad.neg(ad.mean(ad.log(ad.sum(omega_models, axis=-1))))
    raise ValueError(f"unknown loss selector {kind!r}")


def train_mlp(train_set, layer_sizes, epochs, batch_size, lr, seed,
              sof_kind=None, lam=0.0, teacher=None, kd_only=False):
    """Shared exp2/exp3 loop: MSE task loss plus an optional semantic or
    distillation term; kd_only drops the labels entirely."""
    model = models.MLPModel.init(layer_sizes, seed=seed)
    n_batches = epochs * int(np.ceil(len(train_set) / batch_size))
    cfg = optim.OptimizerConfig(kind="adam", learning_rate=lr,
                                steps=n_batches, batch_size=batch_size, seed=seed)
    k = len(model.weights)

    def loss_fn(params, batch):
        x, y = batch
        weights = [params[2 * i] for i in range(k)]
        biases = [params[2 * i + 1] for i in range(k)]
        p = models.mlp_forward(weights, biases, x)
        if teacher is not None:
            p_teacher = teacher.forward(x)
            sof = kd_sof(sof_kind, p_teacher, p)
        elif sof_kind is not None and lam > 0:
            sof = onehot_sof(sof_kind, p)
        else:
            sof = 0.0
        if kd_only:
            return sof
        task = models.mse_loss(p, ds.one_hot_labels(y))
        return simplex.combined_loss(task, sof, 1.0, lam) if lam > 0 else task

    stream = ds.epoch_stream(train_set, batch_size, seed, epochs)
    trace = optim.train(model.params(), loss_fn, cfg, batches=stream)
    model.set_params(trace.final_params)
    return model, trace


def kd_sof(kind: str, p_teacher, p_student):
    """Mean distillation objective between Bernoulli-product heads,
    using the factorized closed forms (teacher distribution first)."""
    batch = np.asarray(p_teacher).shape[0]
    p_t = np.clip(np.asarray(p_teacher), 1e-7, 1 - 1e-7)
    if kind == "kl":
        return ad.div(models.factorized_kl(p_t, p_student), batch)
    if kind == "fisher":
        return ad.mean(ad.arccos(models.factorized_bc(p_t, p_student)))
    if kind == "l2":
        return ad.mean(models.factorized_l2(p_t, p_student))
    raise ValueError(f"unknown KD loss selector {kind!r}")


def evaluate_accuracy(model: models.MLPModel, dataset: ds.ImageDataset) -> float:
    outputs = model.forward(dataset.images)
    return models.accuracy(outputs, dataset.labels)


def wilson_interval(acc: float, n: int, z: float = 1.96):
    """95% Wilson score interval half-width for a test accuracy."""
    denom = 1 + z * z / n
    center = (acc + z * z / (2 * n)) / denom
    half = z * np.sqrt(acc * (1 - acc) / n + z * z / (4 * n * n)) / denom
    return center, half


def run_exp2(cfg: ExperimentConfig) -> ResultTable:
    prof = cfg.prof
    train_set, test_set, synthetic = _load_classification_data(cfg)
    fit_set, val_set = _split_validation(train_set)
    epochs = cfg.epochs if cfg.epochs is not None else prof["epochs"]
    lr = cfg.learning_rate if cfg.learning_rate is not None else prof["mlp_lr"]
    losses = tuple(cfg.losses) if cfg.losses else SIMPLEX_LOSSES
    lams = tuple(cfg.lambda_grid) if cfg.lambda_grid else LAMBDA_GRID
    table = ResultTable(meta={"experiment": "exp2", "dataset": train_set.name,
                              "synthetic": synthetic, "epochs": epochs, "lr": lr,
                              "seed": cfg.seed, "profile": cfg.profile})

    def fit(sof_kind, lam):
        model, _ = train_mlp(fit_set, prof["teacher_sizes"], epochs,
                             prof["batch_size"], lr, cfg.seed,
                             sof_kind=sof_kind, lam=lam)
        return model

    baseline = fit(None, 0.0)
    base_acc = evaluate_accuracy(baseline, test_set)
    _, base_half = wilson_interval(base_acc, len(test_set))
    table.add(loss="noreg", lam=0.0, seed=cfg.seed,
              val_acc=evaluate_accuracy(baseline, val_set),
              test_acc=base_acc, test_acc_pm=base_half)

    best = (base_acc, baseline, "noreg", 0.0)
    for loss in losses:
        for lam in lams:
            model = fit(loss, lam)
            val_acc = evaluate_accuracy(model, val_set)
            test_acc = evaluate_accuracy(model, test_set)
            _, half = wilson_interval(test_acc, len(test_set))
            table.add(loss=loss, lam=lam, seed=cfg.seed, val_acc=val_acc,
                      test_acc=test_acc, test_acc_pm=half)
            if val_acc > best[0]:
                best = (val_acc, model, loss, lam)
    table.meta["best_loss"] = best[2]
    table.meta["best_lambda"] = best[3]
    if cfg.checkpoint_out:
        models.save_checkpoint(cfg.checkpoint_out, best[1], sigma=cfg.sigma)
        table.meta["checkpoint"] = cfg.checkpoint_out
    return table


def run_exp3(cfg: ExperimentConfig) -> ResultTable:
    prof = cfg.prof
    if not cfg.teacher_checkpoint:
        raise ValueError("exp3 requires a teacher checkpoint from exp2")
    teacher = models.load_checkpoint(cfg.teacher_checkpoint)
    train_set, test_set, synthetic = _load_classification_data(cfg)
    epochs = cfg.epochs if cfg.epochs is not None else prof["epochs"]
    lr = cfg.learning_rate if cfg.learning_rate is not None else prof["mlp_lr"]
    losses = tuple(cfg.losses) if cfg.losses else ("kl", "l2", "fisher")
    lams = tuple(cfg.lambda_grid) if cfg.lambda_grid else (0.0001, 0.001, 0.01, 0.1, 1.0)
    teacher_acc = evaluate_accuracy(teacher, test_set)
    table = ResultTable(meta={"experiment": "exp3", "dataset": train_set.name,
                              "synthetic": synthetic, "epochs": epochs, "lr": lr,
                              "seed": cfg.seed, "profile": cfg.profile,
                              "teacher_params": teacher.param_count(),
                              "teacher_acc": teacher_acc})

    for loss in losses:
        for lam in lams:
            student, _ = train_mlp(train_set, prof["student_sizes"], epochs,
                                   prof["batch_size"], lr, cfg.seed,
                                   sof_kind=loss, lam=lam, teacher=teacher)
            table.add(mode="regularizer", loss=loss, lam=lam, seed=cfg.seed,
                      test_acc=evaluate_accuracy(student, test_set),
                      student_params=student.param_count(),
                      teacher_acc=teacher_acc)
        student, _ = train_mlp(train_set, prof["student_sizes"], epochs,
                               prof["batch_size"], lr, cfg.seed,
                               sof_kind=loss, teacher=teacher, kd_only=True)
        table.add(mode="kd", loss=loss, lam="", seed=cfg.seed,
                  test_acc=evaluate_accuracy(student, test_set),
                  student_params=student.param_count(),
                  teacher_acc=teacher_acc)
    return table


# ---------------------------------------------------------------------------
# experiment 4: continuous constraint


def train_normal_mean(loss: str, optimizer: str, lr: float, steps: int,
                      seed: int, sigma: float, train_grid, region):
    rng = np.random.default_rng(seed)
    mu0 = rng.uniform(-1.0, 1.0, size=2)

    def loss_fn(params, _batch):
        density = lambda pts: models.normal_density_at(pts, params[0], sigma)
        if loss == "kldiv":
            return co.kl_continuous(region, density, train_grid)
        w = co.w_integral(density, train_grid)
        return ad.neg(w) if loss == "w" else ad.neg(ad.log(w))

    cfg = optim.OptimizerConfig(kind=optimizer, learning_rate=lr, steps=steps, seed=seed)
    trace = optim.train([mu0], loss_fn, cfg)
    return trace.final_params[0]


def run_exp4(cfg: ExperimentConfig) -> ResultTable:
    prof = cfg.prof
    region = co.quarter_disc_region()
    train_grid = co.polar_quadrature(*prof["exp4_train_grid"])
    eval_grid = co.polar_quadrature(*prof["exp4_eval_grid"])
    steps = cfg.steps if cfg.steps is not None else prof["exp4_steps"]
    seeds = list(cfg.seeds) if cfg.seeds else list(range(prof["exp4_n_seeds"]))
    losses = tuple(cfg.losses) if cfg.losses else CONTINUOUS_LOSSES
    table = ResultTable(meta={"experiment": "exp4", "steps": steps,
                              "sigma": cfg.sigma, "profile": cfg.profile,
                              "seeds": seeds})
    for optimizer in cfg.optimizers:
        for loss in losses:
            lr = (cfg.learning_rate if cfg.learning_rate is not None
                  else EXP4_DEFAULT_LR[(optimizer, loss)])
            tvs, mus = [], []
            for seed in seeds:
                mu = train_normal_mean(loss, optimizer, lr, steps, seed,
                                       cfg.sigma, train_grid, region)
                density = lambda pts: models.normal_density_at(pts, mu, cfg.sigma)
                tvs.append(co.tv_continuous(region, density, eval_grid))
                mus.append(mu)
            mu_mean = np.mean(mus, axis=0)
            table.add(optimizer=optimizer, loss=loss, lr=lr,
                      tv_mean=float(np.mean(tvs)), tv_std=float(np.std(tvs)),
                      mu_x=float(mu_mean[0]), mu_y=float(mu_mean[1]),
                      n_seeds=len(seeds))
    return table


RUNNERS = {"exp1": run_exp1, "exp2": run_exp2, "exp3": run_exp3, "exp4": run_exp4}


def run_experiment(cfg: ExperimentConfig) -> ResultTable:
    return RUNNERS[cfg.experiment](cfg)
