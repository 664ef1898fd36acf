"""Loading, validating, saving and PCA-reducing representation matrices.

A representation matrix stacks one row per probe input (landmark) and one
column per unit. Arrays of rank > 2 (e.g. ``M x C x H x W`` conv activations)
are flattened to ``M x (C*H*W)``.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ._linalg import centered_pca
from .errors import LowVarianceWarning, ValidationError

DEFAULT_REDUCE_K = 1000
VARIANCE_WARN_LEVEL = 0.75

ROLES = ("representation", "class-probabilities", "labels")


@dataclass(frozen=True, eq=False)
class RepresentationMatrix:
    """Finite ``M x N`` activation matrix (landmarks x units)."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.array(self.data, dtype=np.float64, copy=True)
        if arr.ndim != 2:
            raise ValidationError(f"representation must be 2-D, got rank {arr.ndim}")
        if arr.shape[0] < 2:
            raise ValidationError(f"need at least 2 landmarks, got {arr.shape[0]}")
        if arr.shape[1] < 1:
            raise ValidationError("need at least 1 unit")
        _check_finite(arr)
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

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
class ReductionReport:
    kept_components: int
    variance_fraction: float


def as_matrix(X) -> RepresentationMatrix:
    if isinstance(X, RepresentationMatrix):
        return X
    return RepresentationMatrix(np.asarray(X))


def _check_finite(arr):
    bad = ~np.isfinite(arr)
    if bad.any():
        r, c = np.argwhere(bad)[0]
        raise ValidationError(f"non-finite entry at ({r}, {c})")


def _flatten(arr: np.ndarray) -> np.ndarray:
    if arr.ndim < 2:
        raise ValidationError(f"expected an array of rank >= 2, got rank {arr.ndim}")
    if arr.ndim > 2:
        arr = arr.reshape(arr.shape[0], -1)
    return arr


def _infer_format(path: Path) -> str:
    suffix = path.suffix.lower()
    if suffix == ".npy":
        return "npy"
    if suffix in (".csv", ".txt"):
        return "csv"
    raise ValidationError(f"cannot infer format from extension {suffix!r} of {path}")


def load_array(path, format: str | None = None, skip_header: bool = False) -> np.ndarray:
    """Read a raw real array from ``.npy`` or CSV without reshaping."""
    path = Path(path)
    fmt = format or _infer_format(path)
    if not path.is_file():
        raise ValidationError(f"file not found: {path}")
    if fmt == "npy":
        try:
            arr = np.load(path, allow_pickle=False)
        except (ValueError, OSError, EOFError) as exc:
            raise ValidationError(f"malformed npy file {path}: {exc}") from exc
    elif fmt == "csv":
        try:
            arr = np.loadtxt(path, delimiter=",", skiprows=1 if skip_header else 0,
                             ndmin=2, dtype=np.float64)
        except ValueError as exc:
            raise ValidationError(f"malformed CSV {path}: {exc}") from exc
    else:
        raise ValidationError(f"unknown format {fmt!r}")
    if arr.dtype.kind not in "fiu":
        raise ValidationError(f"{path}: unsupported dtype {arr.dtype}")
    return arr


def load_matrix(path, format: str | None = None, skip_header: bool = False) -> RepresentationMatrix:
    """Load a representation matrix from ``.npy`` or headerless CSV.

    Parameters
    ----------
    path : path-like
        File to read.
    format : {"npy", "csv"}, optional
        Inferred from the extension when omitted.
    skip_header : bool
        Skip the first CSV row.

    Raises
    ------
    ValidationError
        Malformed file, rank < 2, or any NaN/Inf entry.
    """
    arr = _flatten(load_array(path, format, skip_header))
    return RepresentationMatrix(arr.astype(np.float64, copy=False))


def save_matrix(path, X, format: str | None = None) -> Path:
    path = Path(path)
    fmt = format or _infer_format(path)
    data = as_matrix(X).data
    if fmt == "npy":
        np.save(path, data, allow_pickle=False)
    else:
        np.savetxt(path, data, delimiter=",", fmt="%.17g")
    return path


def reduce_dims(X, k: int = DEFAULT_REDUCE_K, warn_below: float = VARIANCE_WARN_LEVEL):
    """Project ``X`` onto its top-``k`` principal axes.

    Columns are centered before the SVD. When ``N <= k`` the matrix is
    returned unchanged with ``variance_fraction == 1``. Otherwise the output
    holds the centered scores on ``min(k, M - 1)`` axes; components beyond
    ``M - 1`` carry no variance and are not materialised.

    Returns
    -------
    (RepresentationMatrix, ReductionReport)
    """
    if int(k) != k or k < 1:
        raise ValidationError(f"k must be a positive integer, got {k}")
    X = as_matrix(X)
    M, N = X.shape
    if N <= k:
        return X, ReductionReport(min(N, M - 1), 1.0)

    kept = min(k, M - 1)
    _, scores, sq = centered_pca(X.data, kept)
    total = sq.sum()
    frac = float(sq[:kept].sum() / total) if total > 0 else 1.0
    frac = min(max(frac, 0.0), 1.0)
    if frac < warn_below:
        warnings.warn(
            f"top-{kept} components keep {frac:.3f} of the variance "
            f"(< {warn_below:.2f})", LowVarianceWarning, stacklevel=2)
    return RepresentationMatrix(scores), ReductionReport(kept, frac)


def pad_columns(mats: Sequence, width: int | None = None) -> list[RepresentationMatrix]:
    """Zero-pad every matrix to a common column count."""
    mats = [as_matrix(m) for m in mats]
    width = width or max(m.n_units for m in mats)
    out = []
    for m in mats:
        if m.n_units > width:
            raise ValidationError(f"cannot pad {m.n_units} columns down to {width}")
        if m.n_units == width:
            out.append(m)
        else:
            out.append(RepresentationMatrix(
                np.hstack([m.data, np.zeros((m.m_landmarks, width - m.n_units))])))
    return out


# --- manifest ---------------------------------------------------------------

@dataclass(frozen=True)
class ManifestEntry:
    id: str
    path: Path
    role: str = "representation"
    method: str = ""
    hyperparam: float | None = None
    seed: int = 0
    layer: str = ""

    def to_record(self, base_dir: Path | None = None) -> dict:
        path = self.path
        if base_dir is not None:
            try:
                path = path.resolve().relative_to(base_dir)
            except ValueError:
                pass
        return {"id": self.id, "path": str(path), "role": self.role,
                "method": self.method, "hyperparam": self.hyperparam,
                "seed": self.seed, "layer": self.layer}


@dataclass(frozen=True)
class Manifest:
    entries: tuple[ManifestEntry, ...]
    base_dir: Path = field(default_factory=Path.cwd)

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @property
    def ids(self) -> list[str]:
        return [e.id for e in self.entries]

    def get(self, entry_id: str) -> ManifestEntry:
        for e in self.entries:
            if e.id == entry_id:
                return e
        raise ValidationError(f"unknown manifest id {entry_id!r}")

    def select(self, role: str | None = None, layer: str | None = None,
               seed: int | None = None, method: str | None = None) -> list[ManifestEntry]:
        out = []
        for e in self.entries:
            if role is not None and e.role != role:
                continue
            if layer is not None and e.layer != layer:
                continue
            if seed is not None and e.seed != seed:
                continue
            if method is not None and e.method != method:
                continue
            out.append(e)
        return out

    def representations(self, **kw) -> list[ManifestEntry]:
        return self.select(role="representation", **kw)


def _coerce_entry(raw: dict, base_dir: Path, where: str) -> ManifestEntry:
    unknown = set(raw) - {"id", "path", "role", "method", "hyperparam", "seed", "layer"}
    if unknown:
        raise ValidationError(f"{where}: unknown field(s) {sorted(unknown)}")
    for key in ("id", "path"):
        if raw.get(key) in (None, ""):
            raise ValidationError(f"{where}: missing required field {key!r}")
    role = str(raw.get("role") or "representation")
    if role not in ROLES:
        raise ValidationError(f"{where}: role must be one of {ROLES}, got {role!r}")
    hp = raw.get("hyperparam")
    try:
        hp = None if hp in (None, "") else float(hp)
        seed = int(raw.get("seed") or 0)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{where}: {exc}") from exc
    path = Path(str(raw["path"]))
    if not path.is_absolute():
        path = base_dir / path
    return ManifestEntry(id=str(raw["id"]), path=path, role=role,
                         method=str(raw.get("method") or ""), hyperparam=hp,
                         seed=seed, layer=str(raw.get("layer") or ""))


def _parse_keyvalue(text: str) -> list[dict]:
    records, current = [], {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if line.startswith("#"):
            continue
        if not line:
            if current:
                records.append(current)
                current = {}
            continue
        if "=" not in line:
            raise ValidationError(f"manifest line {lineno}: expected key=value")
        key, value = line.split("=", 1)
        key = key.strip()
        if key in current:
            # a repeated key starts a new record when no blank line separates them
            records.append(current)
            current = {}
        current[key] = value.strip()
    if current:
        records.append(current)
    return records


def _landmark_count(entry: ManifestEntry) -> int:
    if entry.path.suffix.lower() == ".npy":
        try:
            arr = np.load(entry.path, mmap_mode="r", allow_pickle=False)
        except (ValueError, OSError) as exc:
            raise ValidationError(f"entry {entry.id!r}: malformed npy: {exc}") from exc
        if arr.ndim < 2:
            raise ValidationError(f"entry {entry.id!r}: representation has rank {arr.ndim}")
        return arr.shape[0]
    return load_matrix(entry.path).m_landmarks


def load_manifest(path, check_landmarks: bool = True) -> Manifest:
    """Parse and validate a manifest (JSON ``{"entries": [...]}`` or key=value).

    Relative paths resolve against the manifest's directory. All
    representation entries must share one landmark count.
    """
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"manifest not found: {path}")
    text = path.read_text(encoding="utf-8")
    base_dir = path.resolve().parent
    if text.lstrip().startswith("{"):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"manifest JSON: {exc}") from exc
        raw = doc.get("entries")
        if not isinstance(raw, list):
            raise ValidationError("manifest JSON must hold an 'entries' array")
    else:
        raw = _parse_keyvalue(text)

    entries, seen = [], set()
    for i, rec in enumerate(raw):
        if not isinstance(rec, dict):
            raise ValidationError(f"manifest entry {i}: expected an object")
        entry = _coerce_entry(rec, base_dir, f"manifest entry {i}")
        if entry.id in seen:
            raise ValidationError(f"duplicate id {entry.id!r}")
        seen.add(entry.id)
        if not entry.path.is_file():
            raise ValidationError(f"entry {entry.id!r}: unresolvable path {entry.path}")
        entries.append(entry)

    manifest = Manifest(tuple(entries), base_dir)
    if check_landmarks:
        check_landmark_counts(manifest.representations())
    return manifest


def check_landmark_counts(entries: Iterable[ManifestEntry]) -> int | None:
    first = None
    for e in entries:
        m = _landmark_count(e)
        if first is None:
            first = (e.id, m)
        elif m != first[1]:
            raise ValidationError(
                f"landmark count mismatch: {first[0]!r} has M={first[1]}, "
                f"{e.id!r} has M={m}")
    return None if first is None else first[1]


def save_manifest(manifest: Manifest | Iterable[ManifestEntry], path) -> Path:
    path = Path(path)
    entries = manifest.entries if isinstance(manifest, Manifest) else tuple(manifest)
    base = path.resolve().parent
    doc = {"entries": [e.to_record(base) for e in entries]}
    path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    return path
