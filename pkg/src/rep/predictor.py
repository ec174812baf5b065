"""Recursive drug-response classification with cumulative response feedback.

The classifier scores a (patient, time) pair as

    score = u' z + rho * v * y_tilde + b

where ``z`` is the completed gene profile and ``y_tilde`` the running sum of
that patient's earlier responses. Labels are +1 when ``score >= 0``.
Time indices in this module are 0-based.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .completion import CompletionConfig, complete_tensor, nls_solve
from .errors import ConfigError, DimensionError, NumericError, UnderObservedError
from .linear import Standardizer, hinge_objective, subgradient_fit
from .tensor import MaskedTensor, khatri_rao

DEFAULT_LATENT_RIDGE = 1e-8


@dataclass(frozen=True, eq=False)
class ResponseMatrix:
    """I x K response labels in {-1, +1}."""

    labels: np.ndarray
    patient_ids: tuple = ()

    def __post_init__(self):
        lab = np.asarray(self.labels)
        if lab.ndim != 2:
            raise DimensionError(f"labels must be I x K, got shape {lab.shape}")
        if not np.all((lab == 1) | (lab == -1)):
            raise ConfigError("labels must be -1 or +1")
        lab = lab.astype(np.int64)
        lab.flags.writeable = False
        object.__setattr__(self, "labels", lab)
        ids = tuple(self.patient_ids) or tuple(str(i) for i in range(lab.shape[0]))
        if len(ids) != lab.shape[0]:
            raise DimensionError("patient_ids length does not match label rows")
        object.__setattr__(self, "patient_ids", ids)

    @property
    def shape(self):
        return self.labels.shape

    def subset(self, patients) -> "ResponseMatrix":
        idx = np.asarray(patients, dtype=int)
        return ResponseMatrix(self.labels[idx], tuple(self.patient_ids[i] for i in idx))


@dataclass(frozen=True, eq=False)
class FeedbackMatrix:
    values: np.ndarray


def build_feedback(y) -> FeedbackMatrix:
    """Cumulative past responses, with an unknown (zero) response before t = 0.

    ``values[:, 0] == 0`` and ``values[:, t] == values[:, t-1] + y[:, t-1]``.
    """
    labels = y.labels if isinstance(y, ResponseMatrix) else np.asarray(y)
    labels = np.atleast_2d(labels).astype(float)
    out = np.zeros_like(labels)
    out[:, 1:] = np.cumsum(labels[:, :-1], axis=1)
    out.flags.writeable = False
    return FeedbackMatrix(out)


@dataclass(frozen=True, eq=False)
class RepModel:
    u: np.ndarray
    v: float
    b: float
    rho: float
    lam: float
    l1_radius: float | None = None
    B: np.ndarray | None = None
    C: np.ndarray | None = None
    standardizer: Standardizer | None = None
    latent_ridge: float = DEFAULT_LATENT_RIDGE

    @property
    def rank(self) -> int | None:
        return None if self.B is None else self.B.shape[1]

    def score(self, Z, y_tilde) -> np.ndarray:
        """Vectorized scores for rows of ``Z`` (raw, unstandardized features)."""
        Z = np.asarray(Z, dtype=float)
        if self.standardizer is not None:
            Z = self.standardizer.transform(Z)
        return Z @ self.u + self.rho * self.v * np.asarray(y_tilde, dtype=float) + self.b


@dataclass
class TrainReport:
    objective_trace: list
    final_objective: float
    epochs: int


def _design(Z, ytil, rho):
    return np.column_stack([Z, rho * ytil])


def rep_objective(u, v, b, z, y, rho, lam) -> float:
    """Training objective: mean hinge loss over all (patient, time) pairs
    plus ``lam/2 * (||u||^2 + v^2)``. ``z`` is I x J x K, ``y`` I x K."""
    labels = y.labels if isinstance(y, ResponseMatrix) else np.asarray(y)
    z = np.asarray(z, dtype=float)
    I, J, K = z.shape
    Z = z.transpose(0, 2, 1).reshape(I * K, J)
    ytil = build_feedback(labels).values.reshape(-1)
    scores = Z @ u + rho * v * ytil + b
    margins = labels.reshape(-1) * scores
    return float(np.mean(np.maximum(0.0, 1.0 - margins)) + 0.5 * lam * (u @ u + v * v))


def flatten_pairs(z, y):
    """Rows ordered patient-major, time-minor: (I*K, J) features, labels, feedback."""
    labels = y.labels if isinstance(y, ResponseMatrix) else np.asarray(y)
    z = np.asarray(z, dtype=float)
    if z.ndim != 3:
        raise DimensionError(f"features must be I x J x K, got shape {z.shape}")
    I, J, K = z.shape
    if K < 1:
        raise DimensionError("need at least one time point")
    if labels.shape != (I, K):
        raise DimensionError(f"labels shape {labels.shape} != ({I}, {K})")
    Z = z.transpose(0, 2, 1).reshape(I * K, J)
    ytil = build_feedback(labels).values.reshape(-1)
    return Z, labels.reshape(-1).astype(float), ytil


def train(
    z,
    y,
    *,
    rho: float = 1.0,
    lam: float = 0.1,
    l1_radius: float | None = None,
    epochs: int = 500,
    eta0: float = 0.5,
    seed: int = 0,
    standardize: bool = True,
    freeze_v: bool = False,
    batch_size: int | None = None,
    B=None,
    C=None,
):
    """Fit the feedback classifier on completed features ``z`` (I x J x K).

    Feedback is built from the true past labels. ``B`` and ``C`` are carried
    into the returned model so it can complete and forecast new patients.

    Returns
    -------
    (RepModel, TrainReport)
    """
    if rho < 0:
        raise ConfigError("rho must be nonnegative")
    Z, labels, ytil = flatten_pairs(z, y)
    if not np.all(np.isfinite(Z)):
        raise NumericError("features must be finite (complete them first)")
    std = Standardizer.fit(Z) if standardize else None
    Zs = std.transform(Z) if std is not None else Z
    X = _design(Zs, ytil, rho)
    frozen = np.zeros(X.shape[1], dtype=bool)
    frozen[-1] = freeze_v
    fit = subgradient_fit(
        X, labels, lam, epochs=epochs, eta0=eta0, seed=seed, frozen=frozen,
        l1_radius=l1_radius, batch_size=batch_size,
    )
    model = RepModel(
        u=fit.w[:-1].copy(), v=float(fit.w[-1]), b=fit.b, rho=float(rho), lam=float(lam),
        l1_radius=l1_radius,
        B=None if B is None else np.asarray(B, dtype=float),
        C=None if C is None else np.asarray(C, dtype=float),
        standardizer=std,
    )
    return model, TrainReport(fit.objective_trace, fit.final_objective, fit.epochs)


def training_objective(model: RepModel, z, y) -> float:
    """Objective of ``model`` on (z, y) in the model's (standardized) feature space."""
    Z, labels, ytil = flatten_pairs(z, y)
    if model.standardizer is not None:
        Z = model.standardizer.transform(Z)
    w = np.append(model.u, model.v)
    return hinge_objective(w, model.b, _design(Z, ytil, model.rho), labels, model.lam)


def fit_pipeline(
    x: MaskedTensor,
    y,
    *,
    rank: int,
    completion_lambda: float = 1e-3,
    completion_tol: float = 1e-5,
    completion_max_iters: int = 500,
    seed: int = 0,
    **train_kwargs,
):
    """Complete ``x`` then train on the completed tensor. Returns (model, report, completion)."""
    comp = complete_tensor(
        x,
        CompletionConfig(rank=rank, lam=completion_lambda, rel_tol=completion_tol,
                         max_iters=completion_max_iters, seed=seed),
    )
    model, report = train(comp.completed, y, seed=seed, B=comp.model.B, C=comp.model.C,
                          **train_kwargs)
    return model, report, comp


def predict_step(model: RepModel, z_t, y_tilde: float):
    """Label and score for one completed gene profile. Score 0 maps to +1."""
    z_t = np.asarray(z_t, dtype=float)
    if z_t.shape != model.u.shape:
        raise DimensionError(f"profile length {z_t.shape} != {model.u.shape}")
    if not (np.all(np.isfinite(z_t)) and np.isfinite(y_tilde)):
        raise NumericError("non-finite input to predict_step")
    score = float(model.score(z_t[None, :], [y_tilde])[0])
    return (1 if score >= 0 else -1), score


def _observed(x, observed):
    x = np.asarray(x, dtype=float)
    if observed is None:
        observed = np.isfinite(x)
    observed = np.asarray(observed, dtype=bool)
    if observed.shape != x.shape:
        raise DimensionError("mask shape does not match vector")
    return x, observed


def estimate_patient_latent(x_t, observed, B, C, t: int, ridge: float = DEFAULT_LATENT_RIDGE):
    """Nonnegative latent vector of a new patient from one (partially observed) profile.

    Parameters
    ----------
    x_t : (J,) array_like
        Gene profile at time ``t``; unobserved entries are ignored.
    observed : (J,) bool array_like or None
        Observation mask. ``None`` treats non-finite entries as missing.
    B, C : ndarray
        Gene (J x F) and time (K x F) factors from a fitted CP model.
    t : int
        0-based time index.
    ridge : float
        Numerical guard added to the least-squares problem.
    """
    x_t, observed = _observed(x_t, observed)
    B = np.asarray(B, dtype=float)
    C = np.asarray(C, dtype=float)
    if x_t.shape != (B.shape[0],):
        raise DimensionError(f"profile length {x_t.shape} != gene count {B.shape[0]}")
    if not 0 <= t < C.shape[0]:
        raise IndexError(f"time index {t} out of range for K={C.shape[0]}")
    F = B.shape[1]
    n_obs = int(observed.sum())
    if n_obs < F:
        raise UnderObservedError(f"{n_obs} observed genes at time {t}, need at least {F}")
    design = khatri_rao(C[t:t + 1], B)
    return nls_solve(design[observed], x_t[observed], ridge)


def complete_new_vector(x_t, observed, B, C, t: int, ridge: float = DEFAULT_LATENT_RIDGE):
    """Fill the unobserved genes of one profile from the fitted gene/time factors."""
    x_t, observed = _observed(x_t, observed)
    if observed.all():
        return x_t.copy()
    a = estimate_patient_latent(x_t, observed, B, C, t, ridge)
    g = khatri_rao(np.asarray(C, dtype=float)[t:t + 1], np.asarray(B, dtype=float)) @ a
    return np.where(observed, x_t, g)


def forecast_gels(x_1, observed, B, C, ridge: float = DEFAULT_LATENT_RIDGE) -> np.ndarray:
    """Predict the J x K gene course of a patient from its first-time-point profile.

    The latent vector is fitted at time 0 only; observed values at time 0
    are kept as measured.
    """
    x_1, observed = _observed(x_1, observed)
    B = np.asarray(B, dtype=float)
    C = np.asarray(C, dtype=float)
    a = estimate_patient_latent(x_1, observed, B, C, 0, ridge)
    out = B @ (C * a).T
    out[:, 0] = np.where(observed, x_1, out[:, 0])
    return out


def _require_factors(model):
    if model.B is None or model.C is None:
        raise ConfigError("model carries no gene/time factors; train it with B and C")


def forecast_course(model: RepModel, x_1, observed=None, initial_feedback: float = 0.0):
    """Label/score course over all K time points from the first profile only.

    Feedback starts at ``initial_feedback`` (0: response unknown) and then
    accumulates the model's own predicted labels.
    """
    _require_factors(model)
    course = forecast_gels(x_1, observed, model.B, model.C, model.latent_ridge)
    out = []
    y_tilde = float(initial_feedback)
    for t in range(course.shape[1]):
        label, score = predict_step(model, course[:, t], y_tilde)
        out.append((label, score))
        y_tilde += label
    return out


def predict_course(model: RepModel, x, observed=None, past_labels=None):
    """In-treatment prediction for one patient with profiles at every time point.

    Parameters
    ----------
    x : (J, K) array_like
        Gene profiles; missing genes are completed per time point.
    observed : (J, K) bool array_like or None
    past_labels : (K,) array_like or None
        True labels. When given, the feedback at time t is the sum of the true
        labels before t. Without them, or where an entry is NaN, the predicted
        label is accumulated instead.
    """
    x, observed = _observed(x, observed)
    out = []
    y_tilde = 0.0
    for t in range(x.shape[1]):
        if observed[:, t].all():
            z_t = x[:, t]
        else:
            _require_factors(model)
            z_t = complete_new_vector(x[:, t], observed[:, t], model.B, model.C, t,
                                      model.latent_ridge)
        label, score = predict_step(model, z_t, y_tilde)
        out.append((label, score))
        known = past_labels is not None and not np.isnan(past_labels[t])
        y_tilde += float(past_labels[t]) if known else label
    return out
