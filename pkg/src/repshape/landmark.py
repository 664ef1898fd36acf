"""Per-landmark displacement between a reference and an aligned comparison shape."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from ._linalg import centered_pca
from .errors import NumericalError, TieWarning, ValidationError
from .shapecore import PreShape, align

CONTRACTED = "contracted"
EXPANDED = "expanded"


@dataclass(frozen=True)
class DisplacementField:
    """Rows of ``delta`` are landmark displacements ``Z_ref - Z_cmp O*``."""

    delta: np.ndarray
    ref_id: str
    cmp_id: str
    rho: float
    cmp_aligned: np.ndarray

    @property
    def magnitudes(self) -> np.ndarray:
        return np.linalg.norm(self.delta, axis=1)


@dataclass(frozen=True)
class LandmarkRanking:
    order: np.ndarray
    magnitudes: np.ndarray


@dataclass(frozen=True)
class DisplacementPCA:
    components: np.ndarray  # (2, N)
    scores: np.ndarray  # (len(row_indices), 2)
    explained_variance: np.ndarray  # fractions, length 2
    row_indices: np.ndarray  # landmarks kept (zero rows dropped)
    rank_deficient: bool


def displacement_field(Z_a: PreShape, Z_b: PreShape, ref_id: str = "ref",
                       cmp_id: str = "cmp") -> DisplacementField:
    """Displacement of each landmark from ``Z_a`` (reference) to ``Z_b`` aligned onto it."""
    al = align(Z_b, Z_a)
    b_star = Z_b.data @ al.o_star
    return DisplacementField(Z_a.data - b_star, ref_id, cmp_id, al.rho, b_star)


def rank_landmarks(field: DisplacementField, k: int):
    """Indices of the ``k`` most and least displaced landmarks.

    Ties are broken by ascending landmark index in both lists.

    Returns
    -------
    (top, bottom, LandmarkRanking)
    """
    mags = field.magnitudes
    M = mags.shape[0]
    if k < 1 or 2 * k > M:
        raise ValidationError(f"k must satisfy 1 <= k <= M/2 = {M / 2}, got {k}")
    idx = np.arange(M)
    order = np.lexsort((idx, -mags))
    ascending = np.lexsort((idx, mags))
    return order[:k].copy(), ascending[:k].copy(), LandmarkRanking(order, mags[order])


def classify_contract_expand(Z_a, Z_b_aligned, indices, tol: float = 1e-12):
    """Label landmarks by whether their distance from the centroid shrank.

    A landmark is ``"contracted"`` when its row norm in the aligned comparison
    is smaller than in the reference; otherwise ``"expanded"``. Norm changes
    within ``tol`` count as ties: labelled expanded and flagged.

    Returns
    -------
    labels : list of str
    ties : bool ndarray
    """
    a = np.asarray(getattr(Z_a, "data", Z_a), dtype=float)
    b = np.asarray(getattr(Z_b_aligned, "data", Z_b_aligned), dtype=float)
    idx = np.asarray(indices, dtype=int)
    na = np.linalg.norm(a[idx], axis=1)
    nb = np.linalg.norm(b[idx], axis=1)
    ties = np.abs(nb - na) <= tol
    labels = [CONTRACTED if (n_b < n_a and not t) else EXPANDED
              for n_a, n_b, t in zip(na, nb, ties)]
    if ties.any():
        warnings.warn(f"{int(ties.sum())} landmark(s) with unchanged norm labelled "
                      f"{EXPANDED!r}", TieWarning, stacklevel=2)
    return labels, ties


def displacement_pca(field: DisplacementField, row_normalize: bool = True,
                     zero_tol: float = 1e-14) -> DisplacementPCA:
    """Top-2 PCA of the (optionally row-normalized) displacement matrix."""
    delta = field.delta
    norms = np.linalg.norm(delta, axis=1)
    if row_normalize:
        keep = np.flatnonzero(norms > zero_tol)
        rows = delta[keep] / norms[keep, None]
    else:
        keep = np.arange(delta.shape[0])
        rows = delta
    if rows.shape[0] < 2:
        raise NumericalError(f"displacement PCA needs at least 2 usable rows, got {rows.shape[0]}")

    axes, scores, sq = centered_pca(rows, 2)
    total = sq.sum()
    if total <= zero_tol**2 * rows.shape[0]:
        # every row identical after normalization: one direction carries everything
        explained = np.array([1.0, 0.0])
        rank_def = True
    else:
        explained = np.zeros(2)
        explained[: len(sq[:2])] = sq[:2] / total
        rank_def = bool(len(sq) < 2 or sq[1] <= 1e-12 * total)
    if axes.shape[1] < 2:
        axes = np.hstack([axes, np.zeros((axes.shape[0], 2 - axes.shape[1]))])
        scores = np.hstack([scores, np.zeros((scores.shape[0], 2 - scores.shape[1]))])
    return DisplacementPCA(axes.T, scores, explained, keep, rank_def)


def magnitude_histogram(field: DisplacementField, bins=None):
    """Histogram of landmark displacement magnitudes.

    ``bins=None`` uses the Freedman-Diaconis rule.
    """
    mags = field.magnitudes
    counts, edges = np.histogram(mags, bins="fd" if bins is None else bins)
    return counts, edges
