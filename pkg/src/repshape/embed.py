"""Classical (Torgerson) MDS of a shape distance matrix, followed by PCA."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist, squareform

from ._linalg import centered_pca, orient_columns
from .errors import ValidationError
from .shapecore import DistanceMatrix

DEFAULT_MDS_DIM = 200


@dataclass(frozen=True)
class EmbeddingResult:
    coords: np.ndarray
    d: int
    eigenvalues: np.ndarray
    stress: float
    negative_mass: float
    ids: tuple[str, ...] = ()


def _as_array(D):
    if isinstance(D, DistanceMatrix):
        return D.values, tuple(D.ids)
    D = np.asarray(D, dtype=float)
    return D, tuple(str(i) for i in range(D.shape[0]))


def stress(D: np.ndarray, coords: np.ndarray) -> float:
    """Kruskal stress-1 of ``coords`` against the target distances ``D``."""
    target = squareform(D, checks=False)
    denom = np.sum(target**2)
    if denom == 0.0:
        return 0.0
    got = pdist(coords) if coords.shape[1] else np.zeros_like(target)
    return float(np.sqrt(np.sum((target - got) ** 2) / denom))


def classical_mds(D, d: int = DEFAULT_MDS_DIM, tol: float = 1e-9) -> EmbeddingResult:
    """Embed a distance matrix in ``d`` Euclidean dimensions.

    ``B = -1/2 J D^2 J`` is eigendecomposed; coordinates are the top-``d``
    eigenvectors scaled by ``sqrt(eigenvalue)``. Negative eigenvalues are
    clamped to zero (their columns are zero) and their share of the total
    absolute spectrum is reported as ``negative_mass``. ``d`` is capped at
    ``K - 1`` with a warning.
    """
    D, ids = _as_array(D)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise ValidationError(f"distance matrix must be square, got {D.shape}")
    K = D.shape[0]
    if K < 2:
        raise ValidationError("need at least 2 points")
    if not np.all(np.isfinite(D)):
        raise ValidationError("distance matrix has non-finite entries")
    if np.max(np.abs(D - D.T)) > tol:
        raise ValidationError("distance matrix is not symmetric")
    if np.min(D) < 0:
        raise ValidationError("distance matrix has negative entries")
    if np.max(np.abs(np.diag(D))) > tol:
        raise ValidationError("distance matrix has a nonzero diagonal")
    if d < 1:
        raise ValidationError(f"embedding dimension must be >= 1, got {d}")
    if d > K - 1:
        warnings.warn(f"embedding dimension {d} capped at K - 1 = {K - 1}", stacklevel=2)
        d = K - 1

    D = 0.5 * (D + D.T)
    J = np.eye(K) - np.full((K, K), 1.0 / K)
    B = -0.5 * J @ (D**2) @ J
    w, V = np.linalg.eigh(0.5 * (B + B.T))
    order = np.argsort(w)[::-1]
    w, V = w[order], V[:, order]

    scale = np.max(np.abs(w), initial=0.0)
    neg = -w[w < 0].sum()
    negative_mass = float(neg / np.abs(w).sum()) if scale > 0 else 0.0

    lam = w[:d].copy()
    lam[lam <= 1e-12 * scale] = 0.0
    vecs = orient_columns(V[:, :d])
    coords = vecs * np.sqrt(lam)
    coords = coords - coords.mean(axis=0)
    return EmbeddingResult(coords, d, lam, stress(D, coords), negative_mass, ids)


def pca_axes(emb: EmbeddingResult, k: int) -> np.ndarray:
    """Project embedding coordinates onto their top-``k`` principal axes."""
    if k < 1 or k > emb.d:
        raise ValidationError(f"k must satisfy 1 <= k <= d = {emb.d}, got {k}")
    _, scores, _ = centered_pca(emb.coords, k)
    if scores.shape[1] < k:
        scores = np.hstack([scores, np.zeros((scores.shape[0], k - scores.shape[1]))])
    return scores
