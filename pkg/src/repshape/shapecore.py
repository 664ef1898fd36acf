"""Preshapes, Procrustes alignment and the Riemannian shape distance.

Two representations have the same shape when their point clouds coincide
after translation, positive rescaling and an orthogonal transform (rotations
and reflections). Distances are angles on the preshape sphere, in radians.
"""
from __future__ import annotations

import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DegenerateShapeError, NumericalError, ValidationError
from .repstore import as_matrix, pad_columns

_CENTER_TOL = 1e-8
_NORM_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class PreShape:
    """Column-centered, unit Frobenius norm ``M x N`` matrix."""

    data: np.ndarray

    def __post_init__(self):
        z = np.array(self.data, dtype=np.float64, copy=True)
        if z.ndim != 2 or z.shape[0] < 2 or z.shape[1] < 1:
            raise ValidationError(f"preshape must be M x N with M >= 2, got {z.shape}")
        if not np.all(np.isfinite(z)):
            raise ValidationError("preshape has non-finite entries")
        if np.max(np.abs(z.sum(axis=0))) > _CENTER_TOL:
            raise ValidationError("preshape columns are not centered")
        if abs(np.linalg.norm(z) - 1.0) > _NORM_TOL:
            raise ValidationError("preshape does not have unit Frobenius norm")
        z.setflags(write=False)
        object.__setattr__(self, "data", z)

    @property
    def m_landmarks(self) -> int:
        return self.data.shape[0]

    @property
    def n_units(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self):
        return self.data.shape


@dataclass(frozen=True)
class Alignment:
    """Optimal orthogonal map taking ``Z_i`` onto ``Z_j``.

    ``Z_i @ o_star`` is the copy of ``Z_i`` closest to ``Z_j``;
    ``trace_value`` is the attained ``Tr[Z_j^T Z_i O*]`` (sum of singular
    values) and ``rho = arccos(trace_value)``.
    """

    o_star: np.ndarray
    trace_value: float
    rho: float


@dataclass
class DistanceMatrix:
    ids: list[str]
    values: np.ndarray
    units: str = "radians"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.ids = [str(i) for i in self.ids]
        K = len(self.ids)
        if self.values.shape != (K, K):
            raise ValidationError(f"values shape {self.values.shape} does not match {K} ids")

    def to_json(self) -> str:
        doc = {"ids": self.ids, "units": self.units,
               "values": self.values.tolist()}
        if self.meta:
            doc["meta"] = self.meta
        return json.dumps(doc, indent=1, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "DistanceMatrix":
        doc = json.loads(text)
        return cls(doc["ids"], np.array(doc["values"], dtype=float),
                   doc.get("units", "radians"), doc.get("meta", {}))

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("id," + ",".join(self.ids) + "\n")
        for rid, row in zip(self.ids, self.values):
            buf.write(rid + "," + ",".join(format(v, ".17g") for v in row) + "\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, units: str = "radians") -> "DistanceMatrix":
        lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
        ids = lines[0].split(",")[1:]
        rows = [ln.split(",") for ln in lines[1:]]
        if [r[0] for r in rows] != ids:
            raise ValidationError("row ids do not match header ids")
        return cls(ids, np.array([[float(v) for v in r[1:]] for r in rows]), units)

    def save(self, path) -> Path:
        path = Path(path)
        text = self.to_csv() if path.suffix.lower() == ".csv" else self.to_json()
        path.write_text(text, encoding="utf-8")
        return path

    @classmethod
    def load(cls, path) -> "DistanceMatrix":
        path = Path(path)
        text = path.read_text(encoding="utf-8")
        return cls.from_csv(text) if path.suffix.lower() == ".csv" else cls.from_json(text)


def preshape(X) -> PreShape:
    """Center the landmarks and scale to unit Frobenius norm."""
    if isinstance(X, PreShape):
        return X
    arr = as_matrix(X).data
    Xc = arr - arr.mean(axis=0)
    norm = np.linalg.norm(Xc)
    scale = np.linalg.norm(arr)
    if norm == 0.0 or norm <= 1e-12 * scale:
        raise DegenerateShapeError("degenerate shape: all landmarks coincide after centering")
    return PreShape(Xc / norm)


def _check_same_dims(Z_i: PreShape, Z_j: PreShape):
    if Z_i.shape != Z_j.shape:
        raise ValidationError(f"dimension mismatch: {Z_i.shape} vs {Z_j.shape}")


def _arc(a: np.ndarray, b: np.ndarray) -> float:
    # angle between unit vectors; stable near 0 and pi unlike arccos(<a, b>)
    return float(2.0 * np.arctan2(np.linalg.norm(a - b), np.linalg.norm(a + b)))


def align(Z_i: PreShape, Z_j: PreShape) -> Alignment:
    """Closed-form orthogonal Procrustes alignment of ``Z_i`` onto ``Z_j``.

    With ``Z_j^T Z_i = U S V^T`` the maximiser of ``Tr[Z_j^T Z_i O]`` over
    the full orthogonal group is ``O* = V U^T`` and the maximum is
    ``sum(S)``.
    """
    _check_same_dims(Z_i, Z_j)
    a, b = Z_i.data, Z_j.data
    N = a.shape[1]
    if np.array_equal(a, b):
        return Alignment(np.eye(N), 1.0, 0.0)
    try:
        U, s, Vt = np.linalg.svd(b.T @ a)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD did not converge: {exc}") from exc
    o_star = Vt.T @ U.T
    trace = float(s.sum())
    rho = _arc(a @ o_star, b)
    return Alignment(o_star, trace, rho)


def shape_distance(X_i, X_j, zero_pad: bool = False) -> float:
    """Riemannian shape distance between two representations (radians)."""
    if isinstance(X_i, PreShape) and isinstance(X_j, PreShape) and X_i.shape == X_j.shape:
        return align(X_i, X_j).rho
    A, B = (as_matrix(X.data if isinstance(X, PreShape) else X) for X in (X_i, X_j))
    if A.m_landmarks != B.m_landmarks:
        raise ValidationError(
            f"dimension mismatch: M={A.m_landmarks} vs M={B.m_landmarks}")
    if A.n_units != B.n_units:
        if not zero_pad:
            raise ValidationError(
                f"dimension mismatch: N={A.n_units} vs N={B.n_units} (use zero_pad)")
        A, B = pad_columns([A, B])
    return align(preshape(A), preshape(B)).rho


def unaligned_distance(Z_i: PreShape, Z_j: PreShape) -> float:
    """Great-circle angle between preshapes with no orthogonal alignment."""
    _check_same_dims(Z_i, Z_j)
    return _arc(Z_i.data, Z_j.data)


def _pair_distance(shapes, ids, aligned, i, j):
    try:
        if aligned:
            return align(shapes[i], shapes[j]).rho
        return unaligned_distance(shapes[i], shapes[j])
    except (ValidationError, NumericalError) as exc:
        raise type(exc)(f"pair ({i}, {j}) = ({ids[i]!r}, {ids[j]!r}): {exc}") from exc


def distance_matrix(shapes: Sequence[PreShape], aligned: bool = True,
                    ids: Sequence[str] | None = None, threads: int = 1) -> DistanceMatrix:
    """Pairwise aligned (or unaligned) distances between preshapes.

    Pairs from the upper triangle may be evaluated on ``threads`` worker
    threads; every pair writes only its own two cells so the result does not
    depend on scheduling.
    """
    shapes = list(shapes)
    K = len(shapes)
    if K < 2:
        raise ValidationError("distance_matrix needs at least 2 shapes")
    ids = [str(i) for i in ids] if ids is not None else [str(i) for i in range(K)]
    if len(ids) != K:
        raise ValidationError("ids and shapes differ in length")
    for i in range(1, K):
        if shapes[i].shape != shapes[0].shape:
            raise ValidationError(
                f"pair (0, {i}) = ({ids[0]!r}, {ids[i]!r}): dimension mismatch "
                f"{shapes[0].shape} vs {shapes[i].shape}")

    pairs = [(i, j) for i in range(K) for j in range(i + 1, K)]
    out = np.zeros((K, K))

    def work(p):
        i, j = p
        d = _pair_distance(shapes, ids, aligned, i, j)
        out[i, j] = out[j, i] = d

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(work, pairs))
    else:
        for p in pairs:
            work(p)
    return DistanceMatrix(ids, out, "radians", {"aligned": bool(aligned)})


def kernel(X) -> np.ndarray:
    """Centered linear kernel ``C X X^T C`` (``M x M``)."""
    arr = as_matrix(X).data
    Xc = arr - arr.mean(axis=0)
    K = Xc @ Xc.T
    return 0.5 * (K + K.T)


def _psd_sqrt(A: np.ndarray, name: str):
    w, V = np.linalg.eigh(A)
    tr = float(np.trace(A))
    tol = 1e-10 * max(tr, 0.0)
    if w.min() < -tol:
        raise ValidationError(f"{name} is indefinite: eigenvalue {w.min():.3e}")
    w = np.clip(w, 0.0, None)
    return (V * np.sqrt(w)) @ V.T


def fidelity(A: np.ndarray, B: np.ndarray) -> float:
    """``Tr[(A^1/2 B A^1/2)^1/2]`` for PSD matrices."""
    A = 0.5 * (A + A.T)
    B = 0.5 * (B + B.T)
    _psd_sqrt(B, "second matrix")  # validates B
    rA = _psd_sqrt(A, "first matrix")
    P = rA @ B @ rA
    w = np.linalg.eigvalsh(0.5 * (P + P.T))
    # eigenvalues at roundoff level belong to the null space
    cutoff = P.shape[0] * np.finfo(float).eps * max(w.max(initial=0.0), 0.0)
    w = np.where(w > cutoff, w, 0.0)
    return float(np.sqrt(w).sum())


def nbs(K_i, K_j) -> float:
    """Normalized Bures similarity ``F(K_i, K_j) / sqrt(Tr K_i Tr K_j)``."""
    A = np.asarray(K_i, dtype=float)
    B = np.asarray(K_j, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape != B.shape:
        raise ValidationError(f"size mismatch: {A.shape} vs {B.shape}")
    ta, tb = np.trace(A), np.trace(B)
    if ta <= 0 or tb <= 0:
        raise NumericalError("kernel with zero trace has no normalized similarity")
    return min(max(fidelity(A, B) / float(np.sqrt(ta * tb)), 0.0), 1.0)


def shape_space_dim(M: int, N: int) -> int:
    """Dimension ``N(M-1) - 1 - N(N-1)/2`` of Kendall shape space."""
    if M < 2 or N < 1:
        raise ValidationError(f"need M >= 2 and N >= 1, got M={M}, N={N}")
    return N * (M - 1) - 1 - N * (N - 1) // 2
