"""Synthetic shape trajectories and probability blocks with planted structure.

Trajectories are exact geodesics on the preshape sphere leaving a random base
along horizontal tangent directions (orthogonal to the orbit of the
orthogonal group), so the planted step sizes and angles are what the
shape-space tools should recover. Nuisance transforms are applied afterwards
and never change the shape.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import scipy.linalg

from .analyze import ProbabilityBlock
from .errors import ValidationError
from .repstore import Manifest, ManifestEntry, RepresentationMatrix, save_manifest, save_matrix
from .shapecore import preshape, shape_space_dim

NUISANCES = ("rotate", "reflect", "translate", "scale")


@dataclass(frozen=True)
class SynthSpec:
    m_landmarks: int = 30
    n_units: int = 5
    n_steps: int = 9
    deform_scale: float = 0.1
    nuisance: frozenset = frozenset(NUISANCES)
    rng_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "nuisance", frozenset(self.nuisance))
        unknown = self.nuisance - set(NUISANCES)
        if unknown:
            raise ValidationError(f"unknown nuisance flag(s): {sorted(unknown)}")
        if self.n_steps < 2:
            raise ValidationError("n_steps must be >= 2")
        if not self.deform_scale > 0:
            raise ValidationError("deform_scale must be > 0")
        if self.m_landmarks < 2 or self.n_units < 1:
            raise ValidationError("need m_landmarks >= 2 and n_units >= 1")


def random_orthogonal(n: int, rng: np.random.Generator, proper: bool = False) -> np.ndarray:
    """Haar-distributed orthogonal matrix (QR with sign-fixed diagonal)."""
    Q, R = np.linalg.qr(rng.standard_normal((n, n)))
    Q = Q * np.sign(np.diag(R))
    if proper and np.linalg.det(Q) < 0:
        Q[:, 0] = -Q[:, 0]
    return Q


def horizontal_projection(Z0: np.ndarray, W: np.ndarray) -> np.ndarray:
    """Project ``W`` onto the horizontal tangent space of the preshape sphere at ``Z0``.

    The result is centered, orthogonal to ``Z0``, and satisfies
    ``Z0^T W`` symmetric, i.e. it has no component along ``Z0 A`` for skew
    ``A``.
    """
    W = W - W.mean(axis=0)
    W = W - np.sum(W * Z0) * Z0
    G = Z0.T @ Z0
    rhs = Z0.T @ W - W.T @ Z0
    A = scipy.linalg.solve_sylvester(G, G, rhs)
    A = 0.5 * (A - A.T)
    W = W - Z0 @ A
    return W - np.sum(W * Z0) * Z0


def _unit_direction(Z0, rng, against=()):
    W = horizontal_projection(Z0, rng.standard_normal(Z0.shape))
    for U in against:
        W = W - np.sum(W * U) * U
    n = np.linalg.norm(W)
    if n < 1e-10:
        raise ValidationError("could not draw an independent tangent direction")
    return W / n


def _exp(Z0, W, tau):
    return np.cos(tau) * Z0 + np.sin(tau) * W


def _apply_nuisance(Z: np.ndarray, flags, rng) -> np.ndarray:
    # draws happen unconditionally so outputs stay aligned across flag sets
    M, N = Z.shape
    R = random_orthogonal(N, rng, proper=True)
    ref = np.ones(N)
    ref[int(rng.integers(N))] = -1.0
    c = rng.standard_normal(N) * 3.0
    s = float(np.exp(rng.uniform(-1.0, 2.0)))
    X = Z
    if "rotate" in flags:
        X = X @ R
    if "reflect" in flags:
        X = X * ref
    if "scale" in flags:
        X = s * X
    if "translate" in flags:
        X = X + c
    return X


def _base(spec: SynthSpec, rng) -> np.ndarray:
    if shape_space_dim(spec.m_landmarks, spec.n_units) < 1:
        raise ValidationError(
            f"shape space of M={spec.m_landmarks}, N={spec.n_units} has no room for a trajectory")
    return preshape(rng.standard_normal((spec.m_landmarks, spec.n_units))).data


def _steps(spec, Z0, W, rng):
    out = []
    for t in range(spec.n_steps):
        Z = _exp(Z0, W, t * spec.deform_scale)
        out.append(RepresentationMatrix(_apply_nuisance(Z, spec.nuisance, rng)))
    return out


def gen_trajectory(spec: SynthSpec) -> list[RepresentationMatrix]:
    """``n_steps`` matrices; step ``t`` lies ``t * deform_scale`` radians from step 0."""
    rng = np.random.default_rng(spec.rng_seed)
    Z0 = _base(spec, rng)
    W = _unit_direction(Z0, rng)
    return _steps(spec, Z0, W, rng)


def _shared_base_steps(spec, Z0, directions, rng):
    # identical nuisance draws per trajectory so step 0 (the base) is bit-identical
    state = rng.bit_generator.state
    out = []
    for W in directions:
        rng.bit_generator.state = state
        out.append(_steps(spec, Z0, W, rng))
    return out


def gen_two_direction_trajectories(spec: SynthSpec, angle_target: float):
    """Two trajectories from a shared base whose directions subtend ``angle_target`` degrees.

    Step 0 of both trajectories is the (identically transformed) base.
    """
    if not 0.0 <= angle_target <= 90.0:
        raise ValidationError(f"angle_target must lie in [0, 90], got {angle_target}")
    if shape_space_dim(spec.m_landmarks, spec.n_units) < 2:
        raise ValidationError("infeasible dims: shape space must have dimension >= 2")
    rng = np.random.default_rng(spec.rng_seed)
    Z0 = _base(spec, rng)
    W1 = _unit_direction(Z0, rng)
    U = _unit_direction(Z0, rng, against=(W1,))
    th = np.radians(angle_target)
    W2 = np.cos(th) * W1 + np.sin(th) * U
    traj_a, traj_b = _shared_base_steps(spec, Z0, (W1, W2), rng)
    return traj_a, traj_b


def gen_multi_direction(spec: SynthSpec, n_methods: int, mixing: float = 0.5):
    """``n_methods`` trajectories from one base along random correlated directions.

    Each direction adds a random multiple (uniform in ``[0, 2 * mixing]``) of
    one shared direction to an independent one, so pairwise angles spread
    below 90 degrees instead of concentrating there.
    """
    if n_methods < 1:
        raise ValidationError("n_methods must be >= 1")
    rng = np.random.default_rng(spec.rng_seed)
    Z0 = _base(spec, rng)
    common = _unit_direction(Z0, rng)
    dirs = []
    for _ in range(n_methods):
        own = _unit_direction(Z0, rng)
        w = rng.uniform(0.0, 2.0 * mixing) * common + own
        dirs.append(w / np.linalg.norm(w))
    return _shared_base_steps(spec, Z0, dirs, rng)


def gen_seed_family(spec: SynthSpec, n_seeds: int, seed_scale: float = 0.3):
    """Per-seed trajectories that share one method direction.

    Each "seed" starts from the common base moved ``seed_scale`` radians in a
    random horizontal direction; the method direction is transported by
    re-projecting it onto the horizontal space at that seed's base.

    Returns a list (one per seed) of step lists.
    """
    if n_seeds < 1:
        raise ValidationError("n_seeds must be >= 1")
    rng = np.random.default_rng(spec.rng_seed)
    Z0 = _base(spec, rng)
    W = _unit_direction(Z0, rng)
    family = []
    for _ in range(n_seeds):
        D = _unit_direction(Z0, rng, against=(W,))
        Zs = _exp(Z0, D, seed_scale)
        Ws = horizontal_projection(Zs, W)
        Ws /= np.linalg.norm(Ws)
        family.append(_steps(spec, Zs, Ws, rng))
    return family


def gen_probability_block(n_models: int, labels, n_classes: int, accuracy: float = 0.7,
                          confidence: float = 0.8, rng_seed: int = 0) -> ProbabilityBlock:
    """Random softmax-like outputs with a target per-model accuracy."""
    rng = np.random.default_rng(rng_seed)
    y = np.asarray(labels, dtype=int)
    n = y.shape[0]
    probs = np.empty((n_models, n, n_classes))
    for e in range(n_models):
        correct = rng.random(n) < accuracy
        wrong = (y + rng.integers(1, n_classes, n)) % n_classes
        top = np.where(correct, y, wrong)
        noise = rng.dirichlet(np.ones(n_classes), n)
        p = (1.0 - confidence) * noise
        p[np.arange(n), top] += confidence
        probs[e] = p / p.sum(axis=1, keepdims=True)
    return ProbabilityBlock(probs, y)


def write_dataset(out_dir, spec: SynthSpec, methods: dict[str, list[RepresentationMatrix]],
                  seed: int = 0, layer: str = "synthetic", base_method: str = "none",
                  entries: list | None = None) -> list[ManifestEntry]:
    """Write step 0 as the base and later steps per method as ``.npy`` files.

    Returns the manifest entries (appended to ``entries`` when given).
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = [] if entries is None else entries
    first = next(iter(methods.values()))
    base_id = f"base_s{seed}"
    entries.append(ManifestEntry(base_id, save_matrix(out_dir / f"{base_id}.npy", first[0]),
                                 "representation", base_method, 0.0, seed, layer))
    for method, steps in methods.items():
        for t, X in enumerate(steps[1:], start=1):
            sid = f"{method}_t{t}_s{seed}"
            entries.append(ManifestEntry(sid, save_matrix(out_dir / f"{sid}.npy", X),
                                         "representation", method,
                                         round(t * spec.deform_scale, 12), seed, layer))
    return entries


def write_manifest(out_dir, entries) -> Path:
    return save_manifest(Manifest(tuple(entries), Path(out_dir)), Path(out_dir) / "manifest.json")


def with_seed(spec: SynthSpec, rng_seed: int) -> SynthSpec:
    return replace(spec, rng_seed=rng_seed)
