"""Independent oracles shared by the test modules."""
import numpy as np

from repshape.synthgen import random_orthogonal


def random_similarity(X, rng):
    """Apply a random translation, orthogonal map and positive scale."""
    N = X.shape[1]
    R = random_orthogonal(N, rng)
    return rng.uniform(0.2, 5.0) * X @ R + rng.standard_normal(N) * 3.0


def hand_preshape(X):
    X = np.asarray(X, dtype=float)
    Xc = X - X.mean(axis=0)
    return Xc / np.sqrt(np.sum(Xc**2))


def brute_force_rho_2d(X_i, X_j, n_angles=100_000):
    """Minimal great-circle angle over a grid of planar rotations, with and without reflection."""
    a, b = hand_preshape(X_i), hand_preshape(X_j)
    th = np.linspace(0.0, 2 * np.pi, n_angles, endpoint=False)
    c, s = np.cos(th), np.sin(th)
    best = -np.inf
    for flip in (1.0, -1.0):
        a2 = a * np.array([1.0, flip])
        # trace(b^T a R) for R = [[c, -s], [s, c]]
        p = a2.T @ b
        tr = c * (p[0, 0] + p[1, 1]) + s * (p[1, 0] - p[0, 1])
        best = max(best, tr.max())
    return float(np.arccos(np.clip(best, -1.0, 1.0)))
