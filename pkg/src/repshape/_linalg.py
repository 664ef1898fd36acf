import numpy as np


def orient_columns(axes):
    """Flip each column so its largest-magnitude entry is positive."""
    axes = np.array(axes, dtype=float, copy=True)
    if axes.size == 0:
        return axes
    rows = np.argmax(np.abs(axes), axis=0)
    signs = np.sign(axes[rows, np.arange(axes.shape[1])])
    signs[signs == 0] = 1.0
    return axes * signs


def centered_pca(X, k):
    """PCA of the rows of ``X`` after column centering.

    Returns ``(axes, scores, sq_singular)`` where ``axes`` is ``(N, k)`` with
    deterministic signs, ``scores`` is ``(M, k)`` and ``sq_singular`` holds all
    squared singular values of the centered matrix in descending order.
    """
    X = np.asarray(X, dtype=float)
    Xc = X - X.mean(axis=0)
    _, s, Vt = np.linalg.svd(Xc, full_matrices=False)
    k = min(k, Vt.shape[0])
    axes = orient_columns(Vt[:k].T)
    return axes, Xc @ axes, s**2
