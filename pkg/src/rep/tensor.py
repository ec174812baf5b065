"""Dense three-way tensors, observation masks and CP factor models.

Axis order is fixed to (patient, gene, time) and arrays are stored
C-contiguous, so the last (time) index runs fastest. Every unfolding used by
the solvers derives from this layout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, DomainError, NumericError


def _frozen(arr, dtype=float):
    out = np.array(arr, dtype=dtype, order="C", copy=True)
    out.flags.writeable = False
    return out


@dataclass(frozen=True, eq=False)
class MaskedTensor:
    """Nonnegative I x J x K observations together with an observation mask.

    ``mask[i, j, k]`` is True where a value was measured. Unobserved positions
    are stored as 0, but only the mask decides what is observed, since 0 is a
    legal expression level.
    """

    values: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        mask = np.asarray(self.mask, dtype=bool)
        if values.ndim != 3:
            raise DimensionError(f"expected a 3-way array, got shape {values.shape}")
        if mask.shape != values.shape:
            raise DimensionError(
                f"mask shape {mask.shape} does not match values shape {values.shape}"
            )
        if min(values.shape) < 1:
            raise DimensionError(f"all dimensions must be >= 1, got {values.shape}")
        observed = values[mask]
        if not np.all(np.isfinite(observed)):
            raise NumericError("observed values must be finite")
        if np.any(observed < 0):
            raise DomainError("observed values must be nonnegative")
        object.__setattr__(self, "values", _frozen(np.where(mask, values, 0.0)))
        object.__setattr__(self, "mask", _frozen(mask, dtype=bool))

    @classmethod
    def full(cls, values) -> "MaskedTensor":
        values = np.asarray(values, dtype=float)
        return cls(values, np.ones(values.shape, dtype=bool))

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.values.shape

    @property
    def n_observed(self) -> int:
        return int(self.mask.sum())

    def subset(self, patients) -> "MaskedTensor":
        """Restrict to the given patient indices (in the given order)."""
        idx = np.asarray(patients, dtype=int)
        return MaskedTensor(self.values[idx], self.mask[idx])

    def hide(self, hidden) -> "MaskedTensor":
        """Return a copy with the positions in boolean array ``hidden`` unobserved."""
        hidden = np.asarray(hidden, dtype=bool)
        if hidden.shape != self.shape:
            raise DimensionError(f"hide mask shape {hidden.shape} != {self.shape}")
        return MaskedTensor(self.values, self.mask & ~hidden)


@dataclass(frozen=True, eq=False)
class CpModel:
    """Nonnegative rank-F CP model with factors A (I x F), B (J x F), C (K x F)."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        factors = []
        for name in ("A", "B", "C"):
            m = np.asarray(getattr(self, name), dtype=float)
            if m.ndim != 2:
                raise DimensionError(f"factor {name} must be 2-D, got shape {m.shape}")
            if not np.all(np.isfinite(m)):
                raise NumericError(f"factor {name} has non-finite entries")
            if np.any(m < 0):
                raise DomainError(f"factor {name} has negative entries")
            factors.append(m)
        ranks = {m.shape[1] for m in factors}
        if len(ranks) != 1:
            raise DimensionError(f"factor column counts differ: {[m.shape for m in factors]}")
        if factors[0].shape[1] < 1:
            raise DimensionError("rank must be >= 1")
        for name, m in zip("ABC", factors):
            object.__setattr__(self, name, _frozen(m))

    @property
    def rank(self) -> int:
        return self.A.shape[1]

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.A.shape[0], self.B.shape[0], self.C.shape[0])


def khatri_rao(M, N) -> np.ndarray:
    """Column-wise Kronecker product.

    Row ``p * Q + q`` of the result is ``M[p] * N[q]``, i.e. the index of the
    second factor runs fastest.

    Parameters
    ----------
    M : (P, F) array_like
    N : (Q, F) array_like

    Returns
    -------
    (P * Q, F) ndarray
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    N = np.atleast_2d(np.asarray(N, dtype=float))
    if M.ndim != 2 or N.ndim != 2:
        raise DimensionError("khatri_rao expects 2-D inputs")
    if M.shape[1] != N.shape[1]:
        raise DimensionError(
            f"column counts differ: {M.shape[1]} vs {N.shape[1]}"
        )
    F = M.shape[1]
    return (M[:, None, :] * N[None, :, :]).reshape(-1, F)


def reconstruct(model: CpModel) -> np.ndarray:
    """Full I x J x K tensor ``sum_f a_f o b_f o c_f`` (no mask applied)."""
    return np.einsum("if,jf,kf->ijk", model.A, model.B, model.C)


def reconstruct_slice(model: CpModel, patient_latent, t: int) -> np.ndarray:
    """Gene profile at time index ``t`` (0-based) for a patient latent vector.

    Entry j equals ``sum_f patient_latent[f] * B[j, f] * C[t, f]``.
    """
    return _slice(model.B, model.C, patient_latent, t)


def _slice(B, C, latent, t):
    K = C.shape[0]
    if not 0 <= t < K:
        raise IndexError(f"time index {t} out of range for K={K}")
    latent = np.asarray(latent, dtype=float)
    if latent.shape != (B.shape[1],):
        raise DimensionError(f"latent must have length {B.shape[1]}, got {latent.shape}")
    return B @ (C[t] * latent)


def masked_residual_sq(x: MaskedTensor, model: CpModel) -> float:
    """Sum of squared residuals over observed entries only."""
    if x.shape != model.shape:
        raise DimensionError(f"tensor shape {x.shape} != model shape {model.shape}")
    r = np.where(x.mask, x.values - reconstruct(model), 0.0)
    return float(np.sum(r * r))


def unfold(T, mode: int) -> np.ndarray:
    """Mode-n matricization consistent with :func:`khatri_rao` ordering.

    ``unfold(reconstruct(m), 0) == A @ khatri_rao(B, C).T`` and likewise
    ``mode=1`` pairs with ``khatri_rao(A, C)`` and ``mode=2`` with
    ``khatri_rao(A, B)``.
    """
    T = np.asarray(T)
    order = {0: (0, 1, 2), 1: (1, 0, 2), 2: (2, 0, 1)}[mode]
    return np.ascontiguousarray(T.transpose(order)).reshape(T.shape[mode], -1)
