"""PCA with population and sample covariance matrices.

The eigen-decomposition is a cyclic Jacobi iteration that works on a single
symmetric matrix or on a stack of them at once; the stacked form is what makes
Monte Carlo over many small data matrices cheap.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .dist import GaussianVec, SampleBatch
from .loss import LossValue, Status

log = logging.getLogger(__name__)

SYM_TOL = 1e-10
OFF_TOL = 1e-12
MAX_SWEEPS = 100
SIGN_TIE_TOL = 1e-12
SPHERE_TOL = 1e-12


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class PcaModel:
    rotation: np.ndarray
    eigenvalues: np.ndarray
    source: str = "population"

    @property
    def dims(self) -> int:
        return self.eigenvalues.size

    def to_dict(self) -> dict:
        return {
            "rotation": self.rotation.tolist(),
            "eigenvalues": self.eigenvalues.tolist(),
            "source": self.source,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "PcaModel":
        return cls(np.asarray(obj["rotation"], float), np.asarray(obj["eigenvalues"], float), obj["source"])


# --------------------------------------------------------------------------
# eigen-decomposition
# --------------------------------------------------------------------------

def _off_norm(A: np.ndarray) -> np.ndarray:
    off = A * (1.0 - np.eye(A.shape[-1]))
    return np.sqrt(np.sum(off**2, axis=(-2, -1)))


def _fix_signs(V: np.ndarray) -> np.ndarray:
    # largest-magnitude entry positive; near-ties go to the lowest index
    mag = np.abs(V)
    top = mag.max(axis=-2, keepdims=True)
    lead = np.argmax(mag >= top - SIGN_TIE_TOL, axis=-2)
    lead_val = np.take_along_axis(V, lead[..., None, :], axis=-2)
    return V * np.where(lead_val < 0, -1.0, 1.0)


def evd_symmetric(matrix: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (descending) and orthonormal eigenvectors (columns).

    Accepts one ``N x N`` matrix or a stack ``(..., N, N)``.
    """
    A = np.array(matrix, dtype=float)
    if A.ndim < 2 or A.shape[-1] != A.shape[-2]:
        raise ValueError(f"expected square matrices, got shape {A.shape}")
    if np.any(np.abs(A - np.swapaxes(A, -1, -2)) > SYM_TOL):
        raise ValueError("matrix is not symmetric")
    A = 0.5 * (A + np.swapaxes(A, -1, -2))
    lead_shape, N = A.shape[:-2], A.shape[-1]
    A = A.reshape(-1, N, N)
    V = np.broadcast_to(np.eye(N), A.shape).copy()
    scale = np.sqrt(np.sum(A**2, axis=(-2, -1)))
    target = np.maximum(OFF_TOL, 1e-15 * scale)

    pairs = [(p, q) for p in range(N - 1) for q in range(p + 1, N)]
    for sweep in range(MAX_SWEEPS + 1):
        off = _off_norm(A)
        if np.all(off < target):
            break
        if sweep == MAX_SWEEPS:
            raise ConvergenceError(f"Jacobi did not converge in {MAX_SWEEPS} sweeps (off-norm {off.max():.3g})")
        for p, q in pairs:
            apq = A[:, p, q]
            live = apq != 0
            if not live.any():
                continue
            with np.errstate(over="ignore", divide="ignore"):
                tau = np.where(live, (A[:, q, q] - A[:, p, p]) / (2 * np.where(live, apq, 1.0)), 0.0)
                sgn = np.where(tau >= 0, 1.0, -1.0)
                t = np.where(live, sgn / (np.abs(tau) + np.hypot(1.0, tau)), 0.0)
            c = 1 / np.sqrt(1 + t**2)
            s = t * c
            cc, ss = c[:, None], s[:, None]

            Ap, Aq = A[:, :, p].copy(), A[:, :, q].copy()
            A[:, :, p] = cc * Ap - ss * Aq
            A[:, :, q] = ss * Ap + cc * Aq
            Ap, Aq = A[:, p, :].copy(), A[:, q, :].copy()
            A[:, p, :] = cc * Ap - ss * Aq
            A[:, q, :] = ss * Ap + cc * Aq
            A[:, p, q] = np.where(live, 0.0, A[:, p, q])
            A[:, q, p] = A[:, p, q]

            Vp, Vq = V[:, :, p].copy(), V[:, :, q].copy()
            V[:, :, p] = cc * Vp - ss * Vq
            V[:, :, q] = ss * Vp + cc * Vq

    eig = np.einsum("...ii->...i", A).copy()
    order = np.argsort(-eig, axis=-1, kind="stable")
    eig = np.take_along_axis(eig, order, axis=-1)
    V = np.take_along_axis(V, order[:, None, :], axis=-1)
    V = _fix_signs(V)
    return eig.reshape(*lead_shape, N), V.reshape(*lead_shape, N, N)


# --------------------------------------------------------------------------
# covariance and pipelines
# --------------------------------------------------------------------------

def _values(batch) -> np.ndarray:
    return batch.values if isinstance(batch, SampleBatch) else np.asarray(batch, dtype=float)


def sample_covariance(data, center: bool = False) -> np.ndarray:
    """``(1/n) X X^T`` of an ``N x n`` data matrix (uncentered by default)."""
    X = _values(data)
    if center:
        X = X - X.mean(axis=-1, keepdims=True)
    n = X.shape[-1]
    C = X @ np.swapaxes(X, -1, -2) / n
    C = 0.5 * (C + np.swapaxes(C, -1, -2))
    if C.ndim == 2:
        log.debug("sample covariance rank %d (N=%d, n=%d)", np.linalg.matrix_rank(C), C.shape[0], n)
    return C


def population_pca(covariance) -> PcaModel:
    """Model from a known covariance matrix (or a Gaussian spec)."""
    if isinstance(covariance, GaussianVec):
        covariance = covariance.covariance
    eig, W = evd_symmetric(covariance)
    return PcaModel(W, eig, "population")


def _check_dims(model: PcaModel, X: np.ndarray, dims: int | None = None) -> None:
    want = model.dims if dims is None else dims
    if X.shape[0] != want:
        raise ValueError(f"expected {want}-dimensional samples, got {X.shape[0]}")


def pca_transform(model: PcaModel, batch) -> SampleBatch:
    X = _values(batch)
    _check_dims(model, X)
    return SampleBatch(model.rotation.T @ X)


def inverse_rotate(model: PcaModel, batch) -> SampleBatch:
    Y = _values(batch)
    _check_dims(model, Y)
    return SampleBatch(model.rotation @ Y)


def truncate(batch, M: int) -> SampleBatch:
    """Keep the first ``M`` coordinates."""
    Y = _values(batch)
    if not 1 <= M <= Y.shape[0]:
        raise ValueError(f"M must lie in [1, {Y.shape[0]}], got {M}")
    return SampleBatch(Y[:M])


def reconstruct(model: PcaModel, truncated) -> SampleBatch:
    """Zero-pad ``M`` retained coordinates to ``N`` and rotate back."""
    Y = _values(truncated)
    M = Y.shape[0]
    if M > model.dims:
        raise ValueError(f"cannot lift {M} coordinates into {model.dims} dimensions")
    return SampleBatch(model.rotation[:, :M] @ Y)


def truncation_loss(N: int, M: int) -> LossValue:
    if not 1 <= M <= N:
        raise ValueError(f"M must lie in [1, {N}]")
    return LossValue(float(Fraction(N - M, N)), Status.PROVED)


def sample_pca_stack(X: np.ndarray, center: bool = False):
    """Sample-covariance PCA of a stack of data matrices ``(..., N, n)``.

    Returns ``(Y, eigenvalues, W)`` with ``Y = W^T X``.
    """
    X = np.asarray(X, dtype=float)
    if center:
        X = X - X.mean(axis=-1, keepdims=True)
    C = sample_covariance(X)
    eig, W = evd_symmetric(C)
    Y = np.swapaxes(W, -1, -2) @ X
    return Y, eig, W


def sample_pca(data, center: bool = False) -> tuple[SampleBatch, PcaModel]:
    """Rotate the data matrix onto the eigenvectors of its own sample covariance."""
    X = _values(data)
    Y, eig, W = sample_pca_stack(X, center)
    return SampleBatch(Y), PcaModel(W, eig, f"sample({X.shape[1]})")


def sphere(Ymat, model: PcaModel) -> SampleBatch:
    """Scale rotated data to identity sample covariance."""
    if np.any(model.eigenvalues <= SPHERE_TOL):
        raise ValueError("sample covariance is singular (n < N?); cannot sphere")
    Y = _values(Ymat)
    _check_dims(model, Y)
    return SampleBatch(Y / np.sqrt(model.eigenvalues)[:, None])


def unsphere(Ytilde, model: PcaModel) -> SampleBatch:
    Y = _values(Ytilde)
    _check_dims(model, Y)
    return SampleBatch(Y * np.sqrt(model.eigenvalues)[:, None])


def sample_pca_loss(N: int, n: int) -> LossValue:
    """Relative loss of the data matrix when only the rotated data is kept.

    ``(N-1)/(2n)`` for ``n >= N`` (proved); ``(2N-n-1)/(2N)`` for ``n < N``,
    where the sample covariance is singular (conjectured).
    """
    if N < 1 or n < 1:
        raise ValueError("N and n must be positive")
    if n >= N:
        return LossValue(float(Fraction(N - 1, 2 * n)), Status.PROVED)
    return LossValue(float(Fraction(2 * N - n - 1, 2 * N)), Status.CONJECTURED)


def sample_pca_output_dim(N: int, n: int) -> int:
    """Dimension of the manifold the flattened rotated data lives on."""
    if n >= N:
        return n * N - N * (N - 1) // 2
    return n * (n + 1) // 2
