"""Geodesics on the preshape sphere, tangent vectors and trajectory angles."""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import (DegenerateDirectionError, DegenerateStepWarning,
                     NumericalError, ValidationError)
from .repstore import Manifest
from .shapecore import PreShape, _arc, align

IDENTICAL_RHO = 1e-8
LIMIT_FORM_RHO = 1e-6


@dataclass(frozen=True)
class GeodesicSpec:
    z_from: PreShape
    z_to_aligned: PreShape
    rho: float


@dataclass(frozen=True)
class TangentVector:
    """Initial velocity at ``base`` of the geodesic towards a comparison shape.

    ``norm(data) == rho``; ``degenerate`` marks a comparison shape in the
    same class as ``base`` (zero tangent).
    """

    data: np.ndarray
    base: PreShape
    rho: float
    degenerate: bool = False


@dataclass(frozen=True)
class TrajectoryPoint:
    hyperparam: float
    shape_id: str


@dataclass(frozen=True)
class Trajectory:
    method: str
    points: tuple[TrajectoryPoint, ...]
    base_id: str

    def __post_init__(self):
        pts = tuple(p if isinstance(p, TrajectoryPoint) else TrajectoryPoint(*p)
                    for p in self.points)
        hp = [p.hyperparam for p in pts]
        if any(b <= a for a, b in zip(hp, hp[1:])):
            raise ValidationError(
                f"trajectory {self.method!r}: hyperparams must be strictly increasing, got {hp}")
        object.__setattr__(self, "points", pts)

    @property
    def shape_ids(self) -> list[str]:
        return [p.shape_id for p in self.points]

    def __len__(self):
        return len(self.points)


def geodesic_spec(z_from: PreShape, z_to: PreShape) -> GeodesicSpec:
    """Geodesic from ``z_from`` to the shape of ``z_to`` (aligned onto ``z_from``)."""
    al = align(z_to, z_from)
    aligned = PreShape(z_to.data @ al.o_star)
    return GeodesicSpec(z_from, aligned, al.rho)


def geodesic_point(spec: GeodesicSpec, t: float) -> PreShape:
    if not 0.0 <= t <= 1.0:
        raise ValidationError(f"t must lie in [0, 1], got {t}")
    a, b, rho = spec.z_from.data, spec.z_to_aligned.data, spec.rho
    if rho < IDENTICAL_RHO:
        z = (1.0 - t) * a + t * b
        return PreShape(z / np.linalg.norm(z))
    s = np.sin(rho)
    return PreShape((np.sin((1.0 - t) * rho) / s) * a + (np.sin(t * rho) / s) * b)


def tangent_at_reference(Z_0: PreShape, Z_i: PreShape) -> TangentVector:
    """Log map of the shape of ``Z_i`` at the preshape ``Z_0``.

    ``V = rho / sin(rho) * (Z_i* - cos(rho) Z_0)`` where ``Z_i*`` is ``Z_i``
    optimally aligned to ``Z_0``. Below ``LIMIT_FORM_RHO`` the first-order
    form ``Z_i* - Z_0`` is used.
    """
    al = align(Z_i, Z_0)
    rho = al.rho
    if rho < IDENTICAL_RHO:
        return TangentVector(np.zeros_like(Z_0.data), Z_0, rho, degenerate=True)
    z_star = Z_i.data @ al.o_star
    if rho < LIMIT_FORM_RHO:
        V = z_star - Z_0.data
    else:
        V = (rho / np.sin(rho)) * (z_star - np.cos(rho) * Z_0.data)
    return TangentVector(V, Z_0, rho)


def _angle_between(V1: np.ndarray, V2: np.ndarray) -> float:
    u = V1 / np.linalg.norm(V1)
    v = V2 / np.linalg.norm(V2)
    return _arc(u, v)


def geodesic_angle(Z_0: PreShape, Z_1: PreShape, Z_2: PreShape, degrees: bool = True) -> float:
    """Angle at ``Z_0`` between the geodesics to ``Z_1`` and ``Z_2``."""
    V1 = tangent_at_reference(Z_0, Z_1)
    V2 = tangent_at_reference(Z_0, Z_2)
    if V1.degenerate or V2.degenerate:
        raise DegenerateDirectionError(
            "degenerate direction: comparison shape equivalent to the reference")
    theta = _angle_between(V1.data, V2.data)
    return float(np.degrees(theta)) if degrees else theta


def trajectory_mean_angle(traj_a: Trajectory, traj_b: Trajectory, base: PreShape,
                          shapes: Mapping[str, PreShape], pairing: str = "matched",
                          degrees: bool = True) -> float:
    """Mean geodesic angle at ``base`` between steps of two trajectories.

    ``pairing="matched"`` averages over step pairs ``(i, i)`` and requires
    equal lengths (otherwise falls back to ``"cartesian"`` with a warning);
    ``pairing="cartesian"`` averages over all ``(i, j)``. Steps whose shape is
    equivalent to ``base`` are skipped with a warning.
    """
    if not len(traj_a) or not len(traj_b):
        raise ValidationError("trajectories must be non-empty")
    if pairing not in ("matched", "cartesian"):
        raise ValidationError(f"unknown pairing {pairing!r}")
    if pairing == "matched" and len(traj_a) != len(traj_b):
        warnings.warn(
            f"trajectories {traj_a.method!r} and {traj_b.method!r} differ in length; "
            "using the cartesian pairing", stacklevel=2)
        pairing = "cartesian"

    cache: dict[str, TangentVector] = {}

    def tangent(sid):
        if sid not in cache:
            try:
                cache[sid] = tangent_at_reference(base, shapes[sid])
            except KeyError:
                raise ValidationError(f"unknown shape id {sid!r}") from None
        return cache[sid]

    ids_a, ids_b = traj_a.shape_ids, traj_b.shape_ids
    if pairing == "matched":
        pairs = list(zip(ids_a, ids_b))
    else:
        pairs = [(a, b) for a in ids_a for b in ids_b]

    angles = []
    for a, b in pairs:
        Va, Vb = tangent(a), tangent(b)
        if Va.degenerate or Vb.degenerate:
            bad = a if Va.degenerate else b
            warnings.warn(f"step {bad!r} is equivalent to the base shape; skipped",
                          DegenerateStepWarning, stacklevel=2)
            continue
        angles.append(_angle_between(Va.data, Vb.data))
    if not angles:
        raise NumericalError(
            f"all steps of {traj_a.method!r} / {traj_b.method!r} are degenerate")
    mean = float(np.sum(angles) / len(angles))
    return float(np.degrees(mean)) if degrees else mean


def trajectories_from_manifest(manifest: Manifest, base_id: str,
                               methods: Sequence[str] | None = None,
                               **select) -> dict[str, Trajectory]:
    """Group representation entries by method, ordered by hyperparam.

    The base entry is excluded from every trajectory. Extra keyword filters
    (``layer``, ``seed``) are passed to :meth:`Manifest.select`.
    """
    manifest.get(base_id)
    groups: dict[str, list] = {}
    for e in manifest.representations(**select):
        if e.id == base_id:
            continue
        if methods is not None and e.method not in methods:
            continue
        if e.hyperparam is None:
            raise ValidationError(f"entry {e.id!r} has no hyperparam")
        groups.setdefault(e.method, []).append((e.hyperparam, e.id))
    out = {}
    for method in sorted(groups):
        pts = sorted(groups[method])
        out[method] = Trajectory(method, tuple(TrajectoryPoint(h, i) for h, i in pts), base_id)
    return out
