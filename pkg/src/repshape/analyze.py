"""Statistics over shapes: hyperparameter regression, seed scales, ensembles."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg
from scipy import stats

from .errors import NumericalError, ValidationError
from .shapecore import PreShape, align, preshape, shape_distance

DEFAULT_RIDGE_SCALE = 1e-3


@dataclass(frozen=True)
class AlignedDesign:
    features: np.ndarray  # (S, M*N)
    targets: np.ndarray  # (S,)
    ref_id: str
    shape: tuple[int, int]


@dataclass(frozen=True)
class RidgeLOOResult:
    predictions: np.ndarray
    r2: float
    lam: float
    zero_variance: bool


@dataclass(frozen=True)
class ProbabilityBlock:
    """Class probabilities of ``E`` models on ``M_eval`` labelled inputs."""

    probs: np.ndarray  # (E, M_eval, C)
    labels: np.ndarray  # (M_eval,)

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=np.float64)
        if p.ndim == 2:
            p = p[None]
        y = np.asarray(self.labels)
        if p.ndim != 3:
            raise ValidationError(f"probabilities must be E x M_eval x C, got {p.shape}")
        if y.ndim != 1 or y.shape[0] != p.shape[1]:
            raise ValidationError(f"labels shape {y.shape} does not match {p.shape[1]} inputs")
        if y.size and (not np.all(y == np.round(y)) or y.min() < 0 or y.max() >= p.shape[2]):
            raise ValidationError("labels must be class indices in [0, C)")
        if p.size:
            if not np.all(np.isfinite(p)) or p.min() < 0:
                raise ValidationError("probabilities must be finite and non-negative")
            if np.max(np.abs(p.sum(axis=2) - 1.0)) > 1e-6:
                raise ValidationError("probabilities must sum to 1 over classes")
        object.__setattr__(self, "probs", p)
        object.__setattr__(self, "labels", y.astype(np.int64))

    @property
    def n_models(self) -> int:
        return self.probs.shape[0]

    @classmethod
    def concat(cls, blocks: Sequence["ProbabilityBlock"]) -> "ProbabilityBlock":
        labels = blocks[0].labels
        for b in blocks[1:]:
            if not np.array_equal(b.labels, labels):
                raise ValidationError("label mismatch between probability blocks")
        return cls(np.concatenate([b.probs for b in blocks], axis=0), labels)


@dataclass(frozen=True)
class ScalePair:
    d_aug: float
    d_seed: float
    hyperparam: float
    seed_pair: tuple[int, int]


def build_aligned_design(shapes: Sequence[PreShape], ref: PreShape, targets=None,
                         ref_id: str = "ref") -> AlignedDesign:
    """Flatten every shape after aligning it onto ``ref``."""
    rows = []
    for i, Z in enumerate(shapes):
        Z = preshape(Z)
        if Z.shape != ref.shape:
            raise ValidationError(f"shape {i}: dimension mismatch {Z.shape} vs {ref.shape}")
        rows.append((Z.data @ align(Z, ref).o_star).ravel())
    y = np.zeros(len(rows)) if targets is None else np.asarray(targets, dtype=float)
    if y.shape != (len(rows),):
        raise ValidationError("targets must have one value per shape")
    return AlignedDesign(np.array(rows), y, ref_id, ref.shape)


def default_lambda(features: np.ndarray) -> float:
    gram_diag = np.einsum("ij,ij->i", features, features)
    return DEFAULT_RIDGE_SCALE * float(gram_diag.mean())


def _ridge_dual_predict(X_train, y_train, x_test, lam):
    x_mean = X_train.mean(axis=0)
    y_mean = y_train.mean()
    Xc = X_train - x_mean
    G = Xc @ Xc.T
    G[np.diag_indices_from(G)] += lam
    alpha = scipy.linalg.solve(G, y_train - y_mean, assume_a="pos")
    return y_mean + ((x_test - x_mean) @ Xc.T) @ alpha


def ridge_loo(design: AlignedDesign, lam: float | None = None) -> RidgeLOOResult:
    """Leave-one-shape-out ridge predictions of the targets.

    Each fold is solved in the dual (an ``(S-1) x (S-1)`` Gram system), with
    an unpenalized intercept obtained by centering features and targets on
    the training rows. ``lam`` defaults to ``1e-3`` times the mean squared
    row norm of the design.

    Returns predictions and R^2; R^2 is 0 (with ``zero_variance`` set) when
    all targets are equal.
    """
    X, y = design.features, design.targets
    S = X.shape[0]
    if S < 3:
        raise ValidationError(f"ridge LOO needs at least 3 shapes, got {S}")
    lam = default_lambda(X) if lam is None else float(lam)
    if not lam > 0:
        raise ValidationError(f"lambda must be > 0, got {lam}")
    preds = np.empty(S)
    for s in range(S):
        mask = np.arange(S) != s
        try:
            preds[s] = _ridge_dual_predict(X[mask], y[mask], X[s], lam)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"fold {s}: {exc}") from exc
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        return RidgeLOOResult(preds, 0.0, lam, True)
    r2 = 1.0 - float(np.sum((y - preds) ** 2)) / ss_tot
    return RidgeLOOResult(preds, r2, lam, False)


def aug_seed_scales(x0_i, xp_i, x0_j, xp_j, hyperparam: float,
                    seed_pair: tuple[int, int] = (0, 1), zero_pad: bool = False) -> ScalePair:
    """Augmentation vs. seed distance scales for one pair of seeds."""
    rho = lambda a, b: shape_distance(a, b, zero_pad=zero_pad)
    d_aug = 0.5 * (rho(x0_i, xp_i) + rho(x0_j, xp_j))
    d_seed = 0.5 * (rho(x0_i, x0_j) + rho(xp_i, xp_j))
    return ScalePair(d_aug, d_seed, float(hyperparam), tuple(seed_pair))


def summarize_scales(pairs: Sequence[ScalePair]) -> list[dict]:
    """Per-hyperparam mean and population std of both scales over seed pairs."""
    levels: dict[float, list[ScalePair]] = {}
    for p in pairs:
        levels.setdefault(p.hyperparam, []).append(p)
    out = []
    for h in sorted(levels):
        group = levels[h]
        aug = np.array([p.d_aug for p in group])
        seed = np.array([p.d_seed for p in group])
        out.append({"hyperparam": h, "n_pairs": len(group),
                    "d_aug_mean": float(aug.mean()), "d_aug_std": float(aug.std()),
                    "d_seed_mean": float(seed.mean()), "d_seed_std": float(seed.std())})
    return out


def _argmax_lowest(p: np.ndarray) -> np.ndarray:
    # np.argmax returns the first maximum, i.e. the lowest class index on ties
    return np.argmax(p, axis=-1)


def _correct_counts(block: ProbabilityBlock) -> np.ndarray:
    return (_argmax_lowest(block.probs) == block.labels[None, :]).sum(axis=1)


def ensemble_soft_vote(block: ProbabilityBlock):
    """Average class probabilities over models and take the argmax.

    Returns ``(predicted_classes, accuracy)``.
    """
    if block.n_models == 0:
        raise ValidationError("empty ensemble")
    p_ens = block.probs.mean(axis=0)
    pred = _argmax_lowest(p_ens)
    n = block.labels.shape[0]
    acc = float(np.sum(pred == block.labels)) / n if n else 0.0
    return pred, acc


def ensemble_gain(block_a: ProbabilityBlock, block_b: ProbabilityBlock | None = None) -> float:
    """Soft-vote accuracy of the union minus the mean constituent accuracy.

    Computed from integer correct counts so identical models give exactly 0.
    With ``block_b=None`` the gain of ``block_a`` alone is returned.
    """
    blocks = [block_a] if block_b is None else [block_a, block_b]
    if any(b.n_models == 0 for b in blocks):
        raise ValidationError("empty ensemble side")
    union = ProbabilityBlock.concat(blocks)
    n = union.labels.shape[0]
    if n == 0:
        raise ValidationError("no evaluation inputs")
    E = union.n_models
    pred, _ = ensemble_soft_vote(union)
    ens_correct = int(np.sum(pred == union.labels))
    member_correct = int(_correct_counts(union).sum())
    return (E * ens_correct - member_correct) / (E * n)


def angle_gain_correlation(angles, gains=None):
    """Pearson and Spearman (average ranks for ties) correlations.

    Accepts two equal-length sequences, or a single sequence of
    ``{"angle": ..., "gain": ...}`` records.
    """
    if gains is None:
        recs = list(angles)
        angles = [r["angle"] for r in recs]
        gains = [r["gain"] for r in recs]
    x = np.asarray(angles, dtype=float)
    y = np.asarray(gains, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValidationError("angles and gains must be 1-D of equal length")
    if x.size < 3:
        raise ValidationError(f"need at least 3 pairs, got {x.size}")
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        raise NumericalError("zero variance in angles or gains")
    pearson = float(stats.pearsonr(x, y).statistic)
    spearman = float(stats.spearmanr(x, y).statistic)
    return pearson, spearman
