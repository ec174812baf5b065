"""Nonnegative CP tensor completion and the NLS kernel it is built on."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import rng as rngmod
from .errors import (
    ConfigError,
    DimensionError,
    EmptySystemError,
    NumericError,
    RankError,
    UnidentifiableError,
)
from .tensor import CpModel, MaskedTensor, reconstruct

logger = logging.getLogger(__name__)

_EPS = np.finfo(float).eps


def _solve_passive(G, h, P):
    idx = np.flatnonzero(P)
    s = np.zeros_like(h)
    if idx.size == 0:
        return s
    Gp = G[np.ix_(idx, idx)]
    try:
        s[idx] = np.linalg.solve(Gp, h[idx])
    except np.linalg.LinAlgError:
        s[idx] = np.linalg.lstsq(Gp, h[idx], rcond=None)[0]
    return s


def _active_set(G, h, passive=None, maxiter=None):
    """Lawson-Hanson active set on the normal equations.

    Minimizes ``x' G x - 2 h' x`` over ``x >= 0`` for symmetric positive
    semidefinite ``G``. Pivot ties go to the smallest index.

    ``passive`` is an optional warm-start support: if the unconstrained
    solution on it is feasible and satisfies the KKT conditions it is returned
    directly, otherwise the cold-start iteration runs.
    """
    n = h.shape[0]
    tol = 10 * _EPS * n * max(1.0, np.abs(h).max(), np.abs(G).max())

    if passive is not None and passive.any():
        s = _solve_passive(G, h, passive)
        if np.all(s[passive] > 0):
            w = h - G @ s
            if not np.any(w[~passive] > tol):
                return s

    if maxiter is None:
        maxiter = 3 * n + 10
    x = np.zeros(n)
    P = np.zeros(n, dtype=bool)
    w = h.copy()
    it = 0
    while np.any(~P & (w > tol)):
        if it >= maxiter:
            logger.debug("active set hit maxiter=%d", maxiter)
            break
        it += 1
        cand = np.where(P, -np.inf, w)
        P[int(np.argmax(cand))] = True
        s = _solve_passive(G, h, P)
        while np.any(s[P] <= 0):
            it += 1
            bad = P & (s <= 0)
            ratios = np.full(n, np.inf)
            ratios[bad] = x[bad] / (x[bad] - s[bad])
            alpha = ratios[int(np.argmin(ratios))]
            x = x + alpha * (s - x)
            P &= x > tol
            x[~P] = 0.0
            s = _solve_passive(G, h, P)
            if it >= maxiter:
                break
        x = s
        x[~P] = 0.0
        w = h - G @ x
    return np.maximum(x, 0.0)


def nls_solve(M, y, ridge: float = 0.0) -> np.ndarray:
    """Ridge-regularized nonnegative least squares.

    Solves ``argmin_{a >= 0} ||y - M a||^2 + ridge * ||a||^2`` exactly with an
    active-set method. The ridge term is equivalent to stacking
    ``sqrt(ridge) * I`` under ``M``.

    Parameters
    ----------
    M : (m, n) array_like
    y : (m,) array_like
    ridge : float, optional
        Nonnegative Tikhonov weight.

    Returns
    -------
    a : (n,) ndarray
    """
    M = np.asarray(M, dtype=float)
    y = np.asarray(y, dtype=float)
    if M.ndim != 2:
        raise DimensionError(f"design must be 2-D, got shape {M.shape}")
    m, n = M.shape
    if m == 0:
        raise EmptySystemError("system has no rows")
    if n == 0:
        raise EmptySystemError("system has no unknowns")
    if y.shape != (m,):
        raise DimensionError(f"rhs shape {y.shape} does not match design rows {m}")
    if ridge < 0:
        raise ConfigError("ridge must be nonnegative")
    if not (np.all(np.isfinite(M)) and np.all(np.isfinite(y)) and np.isfinite(ridge)):
        raise NumericError("non-finite input to nls_solve")
    G = M.T @ M
    if ridge:
        G = G + ridge * np.eye(n)
    return _active_set(G, M.T @ y)


def nls_objective(M, y, a, ridge: float = 0.0) -> float:
    r = np.asarray(y, dtype=float) - np.asarray(M, dtype=float) @ a
    return float(r @ r + ridge * (a @ a))


def _nls_rows(G, H, previous=None):
    """Solve one NLS problem per row of ``H`` sharing the Gram matrix ``G``."""
    try:
        X = np.linalg.solve(G, H.T).T
    except np.linalg.LinAlgError:
        X = np.linalg.lstsq(G, H.T, rcond=None)[0].T
    bad = np.flatnonzero(np.any(X <= 0, axis=1))
    for r in bad:
        passive = None if previous is None else previous[r] > 0
        X[r] = _active_set(G, H[r], passive)
    return X


@dataclass(frozen=True)
class CompletionConfig:
    rank: int
    lam: float = 1e-3
    max_iters: int = 500
    rel_tol: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if self.rank < 1:
            raise ConfigError("rank must be a positive integer")
        if self.lam < 0:
            raise ConfigError("lam must be nonnegative")
        if self.max_iters < 1:
            raise ConfigError("max_iters must be >= 1")
        if not self.rel_tol > 0:
            raise ConfigError("rel_tol must be > 0")


@dataclass(frozen=True, eq=False)
class CompletionResult:
    model: CpModel
    completed: np.ndarray
    objective_trace: list = field(default_factory=list)
    converged: bool = False
    iterations: int = 0


def impute(x: MaskedTensor, model: CpModel) -> np.ndarray:
    """Observed entries from ``x``, everything else from the model."""
    if x.shape != model.shape:
        raise DimensionError(f"tensor shape {x.shape} != model shape {model.shape}")
    return np.where(x.mask, x.values, reconstruct(model))


def completion_objective(x: MaskedTensor, A, B, C, lam: float) -> float:
    """Data fit on observed entries plus ``lam`` times the squared factor norms."""
    G = np.einsum("if,jf,kf->ijk", A, B, C)
    r = np.where(x.mask, x.values - G, 0.0)
    reg = np.sum(A * A) + np.sum(B * B) + np.sum(C * C)
    return float(np.sum(r * r) + lam * reg)


def check_identifiable(x: MaskedTensor, rank: int) -> None:
    I, J, K = x.shape
    if rank > min(I * K, J * K, I * J):
        raise RankError(f"rank {rank} exceeds min(IK, JK, IJ) for shape {x.shape}")
    for axis, name in ((0, "patient"), (1, "gene"), (2, "time")):
        other = tuple(a for a in range(3) if a != axis)
        empty = np.flatnonzero(~x.mask.any(axis=other))
        if empty.size:
            raise UnidentifiableError(
                f"{name} slab {int(empty[0])} has no observed entries"
            )


def complete_tensor(x: MaskedTensor, cfg: CompletionConfig) -> CompletionResult:
    """Fit a nonnegative rank-F CP model to the observed entries and impute the rest.

    Alternates over the three factors. Before each factor update the missing
    entries are filled with the current model, and every row of the factor is
    then the exact ridge-NLS solution against the matching unfolding of the
    filled tensor. Because the filled tensor majorizes the masked objective at
    the current point, the objective never increases.
    """
    check_identifiable(x, cfg.rank)
    I, J, K = x.shape
    F = cfg.rank
    gen = rngmod.stream(cfg.seed, "init")
    A = gen.uniform(size=(I, F))
    B = gen.uniform(size=(J, F))
    C = gen.uniform(size=(K, F))
    # Uniform(0,1) factors can sit far from the data scale; one global rescale
    # keeps the first sweep from wasting its progress on magnitude.
    model0 = np.einsum("if,jf,kf->ijk", A, B, C)
    num = float(np.sum(np.where(x.mask, x.values * model0, 0.0)))
    den = float(np.sum(np.where(x.mask, model0 * model0, 0.0)))
    if num > 0 and den > 0:
        scale = (num / den) ** (1.0 / 3.0)
        A, B, C = A * scale, B * scale, C * scale

    eye = cfg.lam * np.eye(F)
    obs = x.mask
    vals = x.values
    trace = [completion_objective(x, A, B, C, cfg.lam)]
    converged = False
    it = 0
    for it in range(1, cfg.max_iters + 1):
        Z = np.where(obs, vals, np.einsum("if,jf,kf->ijk", A, B, C))
        G = (B.T @ B) * (C.T @ C) + eye
        A = _nls_rows(G, np.einsum("ijk,jf,kf->if", Z, B, C), A)

        Z = np.where(obs, vals, np.einsum("if,jf,kf->ijk", A, B, C))
        G = (A.T @ A) * (C.T @ C) + eye
        B = _nls_rows(G, np.einsum("ijk,if,kf->jf", Z, A, C), B)

        Z = np.where(obs, vals, np.einsum("if,jf,kf->ijk", A, B, C))
        G = (A.T @ A) * (B.T @ B) + eye
        C = _nls_rows(G, np.einsum("ijk,if,jf->kf", Z, A, B), C)

        obj = completion_objective(x, A, B, C, cfg.lam)
        prev = trace[-1]
        trace.append(obj)
        if abs(prev - obj) / max(prev, 1e-12) < cfg.rel_tol:
            converged = True
            break

    model = CpModel(A, B, C)
    return CompletionResult(
        model=model,
        completed=impute(x, model),
        objective_trace=trace,
        converged=converged,
        iterations=it,
    )
