"""Leave-one-patient-out cross-validation, grid search and masking sweeps.

Each fold completes the tensor of the training patients only, tunes
hyperparameters on those patients, and scores the held-out patient time point
by time point. In-treatment prediction feeds back the held-out patient's true
past labels. Forecast mode (:func:`forecast_cv`) sees only the first profile
and feeds back its own predictions.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np

from .. import rng as rngmod
from ..baselines import knn_fit, knn_predict, knn_score, svm_train
from ..completion import CompletionConfig, complete_tensor
from ..errors import ConfigError, DimensionError
from ..predictor import (
    ResponseMatrix,
    build_feedback,
    complete_new_vector,
    forecast_course,
    predict_course,
    train,
)
from ..tensor import MaskedTensor
from .metrics import ConfusionCounts, RocCurve, accuracy, roc_auc

logger = logging.getLogger(__name__)

PROTOCOLS = ("validation-record", "5-fold")
METHODS = ("rep", "svm", "knn")


@dataclass(frozen=True)
class Grids:
    rank: tuple = (2, 3, 4, 5)
    lam: tuple = (0.01, 0.1, 1.0, 10.0)
    rho: tuple = (0.5, 1.0, 2.0, 5.0)
    svm_lam: tuple = (0.01, 0.1, 1.0, 10.0)
    knn_k: tuple = (3, 5, 8, 10)

    def __post_init__(self):
        for name in ("rank", "lam", "rho", "svm_lam", "knn_k"):
            if len(getattr(self, name)) == 0:
                raise ConfigError(f"grid '{name}' is empty")


@dataclass(frozen=True)
class TrainSettings:
    """Fixed solver settings used for every fit inside the harness."""

    epochs: int = 300
    eta0: float = 0.5
    standardize: bool = True
    completion_lambda: float = 1e-3
    completion_tol: float = 1e-4
    completion_max_iters: int = 300


@dataclass(eq=False)
class FoldResult:
    patient_id: str
    y_true: np.ndarray
    y_pred: np.ndarray
    scores: np.ndarray
    params: dict
    model: object = None

    @property
    def acc(self) -> float:
        return float(np.mean(self.y_true == self.y_pred))


@dataclass(eq=False)
class MethodReport:
    method: str
    folds: list

    def __post_init__(self):
        if not self.folds:
            raise ConfigError("report has no folds")

    @property
    def y_true(self):
        return np.concatenate([f.y_true for f in self.folds])

    @property
    def y_pred(self):
        return np.concatenate([f.y_pred for f in self.folds])

    @property
    def scores(self):
        return np.concatenate([f.scores for f in self.folds])

    @property
    def confusion(self) -> ConfusionCounts:
        return ConfusionCounts.from_labels(self.y_true, self.y_pred)

    @property
    def acc(self) -> float:
        return accuracy(self.confusion)

    @property
    def roc(self) -> RocCurve:
        return roc_auc(self.scores, self.y_true)

    @property
    def auc(self) -> float:
        return self.roc.auc


@dataclass(eq=False)
class CvReport:
    methods: dict
    protocol: str
    seed: int
    settings: dict = field(default_factory=dict)

    def __getitem__(self, method) -> MethodReport:
        return self.methods[method]


def _pairs(Z, labels):
    I, J, K = Z.shape
    return Z.transpose(0, 2, 1).reshape(I * K, J), labels.reshape(-1)


def _inner_folds(n, n_folds, gen):
    perm = gen.permutation(n)
    return [np.sort(f) for f in np.array_split(perm, min(n_folds, n))]


def _rank_key(acc, loss):
    # higher accuracy first, then lower mean hinge loss; grid order breaks ties
    return (-acc, loss)


def _val_metrics(labels, scores):
    acc = float(np.mean(np.where(scores >= 0, 1, -1) == labels))
    loss = float(np.mean(np.maximum(0.0, 1.0 - labels * scores)))
    return acc, loss


def _rep_scores(model, Z, labels):
    """In-treatment scores for completed patients Z (n x J x K) with true feedback."""
    n, J, K = Z.shape
    ytil = build_feedback(labels).values
    return model.score(Z.transpose(0, 2, 1).reshape(n * K, J), ytil.reshape(-1)).reshape(n, K)


def _tune_rep(Zs, labels, grids, settings, protocol, gen, seed):
    """Pick (rank, lam, rho) on completed training tensors keyed by rank."""
    n = labels.shape[0]
    if protocol == "validation-record":
        val = int(gen.integers(n))
        splits = [(np.setdiff1d(np.arange(n), [val]), np.array([val]))]
    else:
        folds = _inner_folds(n, 5, gen)
        splits = [(np.setdiff1d(np.arange(n), f), f) for f in folds]

    best = None
    for F in grids.rank:
        Z = Zs[F]
        for lam, rho in itertools.product(grids.lam, grids.rho):
            labs, scs = [], []
            for tr, va in splits:
                model, _ = train(Z[tr], labels[tr], rho=rho, lam=lam, epochs=settings.epochs,
                                 eta0=settings.eta0, seed=seed, standardize=settings.standardize)
                scs.append(_rep_scores(model, Z[va], labels[va]).ravel())
                labs.append(labels[va].ravel())
            key = _rank_key(*_val_metrics(np.concatenate(labs), np.concatenate(scs)))
            if best is None or key < best[0]:
                best = (key, {"rank": F, "lam": lam, "rho": rho})
    return best[1]


def _tune_baseline(Z, labels, grid, fit_score, gen):
    n = labels.shape[0]
    folds = _inner_folds(n, 5, gen)
    best = None
    for value in grid:
        labs, scs = [], []
        for f in folds:
            tr = np.setdiff1d(np.arange(n), f)
            score = fit_score(Z[tr], labels[tr], value)
            Zv, yv = _pairs(Z[f], labels[f])
            scs.append(np.array([score(row) for row in Zv]))
            labs.append(yv)
        key = _rank_key(*_val_metrics(np.concatenate(labs), np.concatenate(scs)))
        if best is None or key < best[0]:
            best = (key, value)
    return best[1]


def _complete_test(x_test, mask_test, cp):
    """Complete the held-out patient's J x K profiles from training factors."""
    J, K = x_test.shape
    out = np.empty((J, K))
    for t in range(K):
        out[:, t] = complete_new_vector(x_test[:, t], mask_test[:, t], cp.B, cp.C, t)
    return out


def _check_inputs(data, y, protocol, methods):
    if protocol not in PROTOCOLS:
        raise ConfigError(f"unknown protocol {protocol!r}; choose from {PROTOCOLS}")
    unknown = set(methods) - set(METHODS)
    if unknown or not methods:
        raise ConfigError(f"unknown methods {sorted(unknown)}; choose from {METHODS}")
    I, J, K = data.shape
    if y.shape != (I, K):
        raise DimensionError(f"labels shape {y.shape} != ({I}, {K})")
    if I < 3:
        raise ConfigError("leave-one-out CV needs at least 3 patients")


def run_fold(data: MaskedTensor, y: ResponseMatrix, test: int, *, grids: Grids,
             settings: TrainSettings, protocol: str, methods, seed: int) -> dict:
    """One leave-one-patient-out fold; returns ``{method: FoldResult}``.

    Nothing from patient ``test`` is read before its own prediction step.
    """
    I = data.shape[0]
    train_idx = np.setdiff1d(np.arange(I), [test])
    x_train = data.subset(train_idx)
    labels = y.labels[train_idx]

    comps = {}
    for F in grids.rank:
        comps[F] = complete_tensor(
            x_train,
            CompletionConfig(rank=F, lam=settings.completion_lambda,
                             rel_tol=settings.completion_tol,
                             max_iters=settings.completion_max_iters, seed=seed),
        )
    Zs = {F: c.completed for F, c in comps.items()}

    if "rep" in methods:
        gen = rngmod.stream(seed, "split", test)
        if len(grids.rank) * len(grids.lam) * len(grids.rho) == 1:
            params = {"rank": grids.rank[0], "lam": grids.lam[0], "rho": grids.rho[0]}
        else:
            params = _tune_rep(Zs, labels, grids, settings, protocol, gen, seed)
        rank = params["rank"]
    else:
        params, rank = {}, grids.rank[0]

    cp = comps[rank].model
    Z = Zs[rank]
    x_test = data.values[test]
    z_test = _complete_test(x_test, data.mask[test], cp)
    y_test = y.labels[test]
    pid = y.patient_ids[test]
    out = {}

    if "rep" in methods:
        model, _ = train(Z, labels, rho=params["rho"], lam=params["lam"], epochs=settings.epochs,
                         eta0=settings.eta0, seed=seed, standardize=settings.standardize,
                         B=cp.B, C=cp.C)
        course = predict_course(model, z_test, np.ones_like(z_test, dtype=bool), past_labels=y_test)
        out["rep"] = FoldResult(pid, y_test.copy(), np.array([c[0] for c in course]),
                                np.array([c[1] for c in course]), dict(params), model)

    if "svm" in methods:
        def fit_svm(Ztr, ytr, lam):
            m, _ = svm_train(Ztr, ytr, lam=lam, epochs=settings.epochs, seed=seed,
                             eta0=settings.eta0, standardize=settings.standardize)
            return lambda row: float(m.score(row[None, :])[0])

        gen = rngmod.stream(seed, "split", test, 1)
        lam = grids.svm_lam[0] if len(grids.svm_lam) == 1 else _tune_baseline(
            Z, labels, grids.svm_lam, fit_svm, gen)
        m, _ = svm_train(Z, labels, lam=lam, epochs=settings.epochs, seed=seed,
                         eta0=settings.eta0, standardize=settings.standardize)
        sc = m.score(z_test.T)
        out["svm"] = FoldResult(pid, y_test.copy(), np.where(sc >= 0, 1, -1), sc,
                                {"rank": rank, "lam": lam}, m)

    if "knn" in methods:
        def fit_knn(Ztr, ytr, k):
            # small cohorts: never ask for more neighbours than training rows
            m = knn_fit(Ztr, ytr, min(k, ytr.size), standardize=settings.standardize)
            return lambda row: knn_score(m, row) - 0.5

        gen = rngmod.stream(seed, "split", test, 2)
        k = grids.knn_k[0] if len(grids.knn_k) == 1 else _tune_baseline(
            Z, labels, grids.knn_k, fit_knn, gen)
        k = min(k, labels.size)
        m = knn_fit(Z, labels, k, standardize=settings.standardize)
        sc = np.array([knn_score(m, z_test[:, t]) for t in range(z_test.shape[1])])
        pred = np.array([knn_predict(m, z_test[:, t]) for t in range(z_test.shape[1])])
        out["knn"] = FoldResult(pid, y_test.copy(), pred, sc, {"rank": rank, "k": k}, m)
    return out


def loo_cv(
    data: MaskedTensor,
    y: ResponseMatrix,
    grids: Grids | None = None,
    protocol: str = "validation-record",
    *,
    methods=METHODS,
    seed: int = 0,
    settings: TrainSettings | None = None,
) -> CvReport:
    """Leave-one-patient-out cross-validation of REP and the baselines.

    REP hyperparameters are tuned per fold either on one held-out training
    patient (``"validation-record"``) or by 5-fold CV over the training
    patients (``"5-fold"``). Baselines are always tuned by 5-fold CV on the
    completion at the rank REP selected.
    """
    grids = grids or Grids()
    settings = settings or TrainSettings()
    methods = tuple(methods)
    _check_inputs(data, y, protocol, methods)
    per_method = {m: [] for m in methods}
    for test in range(data.shape[0]):
        fold = run_fold(data, y, test, grids=grids, settings=settings, protocol=protocol,
                        methods=methods, seed=seed)
        for m, res in fold.items():
            per_method[m].append(res)
        logger.debug("fold %d done: %s", test, {m: r.acc for m, r in fold.items()})
    return CvReport(
        methods={m: MethodReport(m, folds) for m, folds in per_method.items()},
        protocol=protocol,
        seed=seed,
        settings={"grids": grids.__dict__, "train": settings.__dict__},
    )


def hide_fraction(data: MaskedTensor, rate: float, seed: int) -> MaskedTensor:
    """Hide ``round(rate * n_observed)`` observed entries, uniformly at random.

    For one seed the hidden sets are nested: a larger rate hides a superset.
    """
    if not 0 <= rate < 1:
        raise ConfigError(f"masking rate {rate} outside [0, 1)")
    obs = np.flatnonzero(data.mask.ravel())
    order = rngmod.stream(seed, "masking").permutation(obs.size)
    n_hide = int(round(rate * obs.size))
    hidden = np.zeros(data.mask.size, dtype=bool)
    hidden[obs[order[:n_hide]]] = True
    return data.hide(hidden.reshape(data.shape))


@dataclass(frozen=True)
class SweepRow:
    seed: int
    rate: float
    method: str
    acc: float
    auc: float


def masking_experiment(data: MaskedTensor, y: ResponseMatrix, rates, seeds, **cv_kwargs):
    """Rerun :func:`loo_cv` after hiding each fraction of entries.

    The whole tensor is masked before any split. Returns a list of
    :class:`SweepRow`, ordered by seed, rate, then method.
    """
    rates = [float(r) for r in rates]
    for r in rates:
        if not 0 <= r < 1:
            raise ConfigError(f"masking rate {r} outside [0, 1)")
    rows = []
    for seed in seeds:
        for rate in rates:
            report = loo_cv(hide_fraction(data, rate, seed), y, seed=seed, **cv_kwargs)
            for name, mr in report.methods.items():
                rows.append(SweepRow(int(seed), rate, name, mr.acc, mr.auc))
    return rows


def forecast_cv(
    data: MaskedTensor,
    y: ResponseMatrix,
    *,
    rank: int,
    lam: float,
    rho: float,
    seed: int = 0,
    settings: TrainSettings | None = None,
) -> MethodReport:
    """Leave-one-patient-out forecast of whole response courses.

    Each held-out patient contributes only its first profile; later profiles
    are forecast from the training factors and feedback uses predicted labels.
    """
    settings = settings or TrainSettings()
    I = data.shape[0]
    if y.shape != (I, data.shape[2]):
        raise DimensionError("labels do not match tensor")
    folds = []
    for test in range(I):
        tr = np.setdiff1d(np.arange(I), [test])
        comp = complete_tensor(
            data.subset(tr),
            CompletionConfig(rank=rank, lam=settings.completion_lambda,
                             rel_tol=settings.completion_tol,
                             max_iters=settings.completion_max_iters, seed=seed),
        )
        model, _ = train(comp.completed, y.labels[tr], rho=rho, lam=lam, epochs=settings.epochs,
                         eta0=settings.eta0, seed=seed, standardize=settings.standardize,
                         B=comp.model.B, C=comp.model.C)
        course = forecast_course(model, data.values[test, :, 0], data.mask[test, :, 0])
        folds.append(FoldResult(y.patient_ids[test], y.labels[test].copy(),
                                np.array([c[0] for c in course]),
                                np.array([c[1] for c in course]),
                                {"rank": rank, "lam": lam, "rho": rho}, model))
    return MethodReport("rep-forecast", folds)
