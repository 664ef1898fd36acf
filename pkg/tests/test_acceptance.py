"""Acceptance suite: one or more tests per numbered criterion.

A pass/fail line per criterion is printed in the terminal summary.
"""
import json
import time
import warnings
from itertools import combinations
from pathlib import Path

import numpy as np
import pytest
from scipy.stats import spearmanr

from helpers import brute_force_rho_2d, random_similarity
from repshape.analyze import (ProbabilityBlock, angle_gain_correlation, aug_seed_scales,
                              build_aligned_design, ensemble_gain, ridge_loo)
from repshape.cli import main
from repshape.embed import classical_mds
from repshape.errors import LowVarianceWarning
from repshape.geodesy import (Trajectory, TrajectoryPoint, geodesic_angle, geodesic_point,
                              geodesic_spec, tangent_at_reference, trajectory_mean_angle)
from repshape.landmark import displacement_field
from repshape.repstore import reduce_dims
from repshape.shapecore import align, distance_matrix, kernel, nbs, preshape, shape_distance
from repshape.synthgen import (SynthSpec, gen_seed_family, gen_trajectory,
                               gen_two_direction_trajectories)

criterion = pytest.mark.criterion


@criterion(1, "metric axioms on 50 random shapes (M=30, N=5), runtime < 30 s")
def test_metric_axioms():
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    X = [rng.standard_normal((30, 5)) for _ in range(50)]
    D = distance_matrix([preshape(x) for x in X]).values
    assert np.max(np.abs(D - D.T)) <= 1e-9
    assert np.all(np.diag(D) == 0.0)
    worst = -np.inf
    for a, b, c in combinations(range(50), 3):
        worst = max(worst,
                    D[a, c] - D[a, b] - D[b, c],
                    D[a, b] - D[a, c] - D[c, b],
                    D[b, c] - D[b, a] - D[a, c])
    assert worst <= 1e-8
    for x in X:
        assert shape_distance(x, random_similarity(x, rng)) < 1e-7
    assert time.perf_counter() - t0 < 30.0


@criterion(2, "SVD distance matches rotation-grid x reflection brute force at N=2 within 1e-4")
def test_brute_force_n2():
    rng = np.random.default_rng(2)
    for _ in range(20):
        Xi, Xj = rng.standard_normal((20, 2)), rng.standard_normal((20, 2))
        assert abs(shape_distance(Xi, Xj) - brute_force_rho_2d(Xi, Xj, 100_000)) < 1e-4


@criterion(3, "normalized Bures similarity equals cos rho within 1e-6")
def test_bures_equivalence():
    rng = np.random.default_rng(3)
    for _ in range(20):
        M, N = int(rng.integers(3, 51)), int(rng.integers(1, 8))
        Xi, Xj = rng.standard_normal((M, N)), rng.standard_normal((M, N))
        assert abs(nbs(kernel(Xi), kernel(Xj)) - np.cos(shape_distance(Xi, Xj))) < 1e-6


@criterion(4, "geodesic endpoints, arc length and tangent finite difference")
def test_geodesic_identities():
    rng = np.random.default_rng(4)
    for _ in range(10):
        a, b = preshape(rng.standard_normal((10, 3))), preshape(rng.standard_normal((10, 3)))
        spec = geodesic_spec(a, b)
        assert np.max(np.abs(geodesic_point(spec, 0.0).data - a.data)) <= 1e-12
        assert np.max(np.abs(geodesic_point(spec, 1.0).data - spec.z_to_aligned.data)) <= 1e-12
        for t in (0.25, 0.5, 0.75):
            assert abs(align(a, geodesic_point(spec, t)).rho - t * spec.rho) <= 1e-8
        V = tangent_at_reference(a, b).data
        eps = 1e-5
        fd = (geodesic_point(spec, eps).data - a.data) / eps
        cos = np.sum(fd * V) / (np.linalg.norm(fd) * np.linalg.norm(V))
        assert np.arccos(min(cos, 1.0)) < 1e-3


@criterion(5, "chordal identity |dZ|^2 = 2 - 2 cos rho within 1e-8")
def test_chordal_identity():
    rng = np.random.default_rng(5)
    for _ in range(20):
        a, b = preshape(rng.standard_normal((25, 4))), preshape(rng.standard_normal((25, 4)))
        f = displacement_field(a, b)
        assert abs(np.sum(f.delta**2) - (2 - 2 * np.cos(f.rho))) < 1e-8


@criterion(6, "mean geodesic angle of random directions at M=200, N=50 in [85, 95] degrees")
def test_angle_concentration():
    rng = np.random.default_rng(6)
    angles = []
    for _ in range(100):
        X0 = rng.standard_normal((200, 50))
        Z0 = preshape(X0)
        Z1 = preshape(X0 + 0.1 * rng.standard_normal((200, 50)))
        Z2 = preshape(X0 + 0.1 * rng.standard_normal((200, 50)))
        angles.append(geodesic_angle(Z0, Z1, Z2))
    mean = float(np.mean(angles))
    print(f"mean angle over 100 draws: {mean:.3f} deg")
    assert 85.0 <= mean <= 95.0


@criterion(7, "planted 9-step trajectory: distance and MDS Spearman > 0.95, ridge R^2 > 0.9, < 60 s")
def test_synthetic_trajectory_pipeline():
    t0 = time.perf_counter()
    spec = SynthSpec(m_landmarks=100, n_units=10, n_steps=9, deform_scale=0.1, rng_seed=7)
    steps = gen_trajectory(spec)
    hyper = spec.deform_scale * np.arange(spec.n_steps)
    shapes = [preshape(X) for X in steps]

    D = distance_matrix(shapes, aligned=True).values
    rho_dist = spearmanr(D[0], np.arange(9)).statistic
    emb = classical_mds(D, d=8)
    rho_mds = abs(spearmanr(emb.coords[:, 0], np.arange(9)).statistic)
    design = build_aligned_design(shapes, shapes[0], hyper)
    r2 = ridge_loo(design).r2

    Du = distance_matrix(shapes, aligned=False).values
    rho_unaligned = spearmanr(Du[0], np.arange(9)).statistic
    print(f"aligned Spearman {rho_dist:.4f}, MDS axis-1 Spearman {rho_mds:.4f}, "
          f"ridge R^2 {r2:.4f}, unaligned Spearman {rho_unaligned:.4f}")
    assert rho_dist > 0.95
    assert rho_mds > 0.95
    assert r2 > 0.9
    assert np.isfinite(rho_unaligned)
    assert time.perf_counter() - t0 < 60.0


@criterion(8, "planted angles {0, 60, 90} recovered within 3 degrees")
@pytest.mark.parametrize("target", [0.0, 60.0, 90.0])
def test_planted_angle_recovery(target):
    spec = SynthSpec(m_landmarks=30, n_units=5, n_steps=5, rng_seed=8)
    ta, tb = gen_two_direction_trajectories(spec, target)
    shapes = {f"a{t}": preshape(X) for t, X in enumerate(ta)}
    shapes.update({f"b{t}": preshape(X) for t, X in enumerate(tb)})
    mk = lambda tag: Trajectory(tag, tuple(TrajectoryPoint(0.1 * t, f"{tag}{t}")
                                           for t in range(1, spec.n_steps)), "a0")
    got = trajectory_mean_angle(mk("a"), mk("b"), shapes["a0"], shapes)
    print(f"target {target:.0f} deg -> recovered {got:.4f} deg")
    assert abs(got - target) <= 3.0


@criterion(9, "scale limits: p=0 gives d_aug = 0 and d_seed = rho exactly; i=j gives d_seed = 0")
def test_scale_limits(tmp_path):
    fam = gen_seed_family(SynthSpec(n_steps=3, rng_seed=9), 3)
    x0_i, x0_j = fam[0][0], fam[1][0]
    p0 = aug_seed_scales(x0_i, x0_i, x0_j, x0_j, 0.0)
    assert p0.d_aug == 0.0
    assert p0.d_seed == shape_distance(x0_i, x0_j)
    same = aug_seed_scales(x0_i, fam[0][2], x0_i, fam[0][2], 0.2)
    assert same.d_seed == 0.0

    data, out = tmp_path / "d", tmp_path / "o"
    assert main(["synth", "--output-dir", str(data), "--n-seeds", "3", "--steps", "3"]) == 0
    assert main(["seedscale", "--manifest", str(data / "manifest.json"), "--method", "m0",
                 "--output-dir", str(out)]) == 0
    doc = json.loads((out / "seedscale_m0.json").read_text())
    level0 = [p for p in doc["pairs"] if p["hyperparam"] == 0.0]
    assert level0 and all(p["d_aug"] == 0.0 for p in level0)


@criterion(10, "ensemble algebra: identical models give exactly 0, enumeration, +/-1 correlations")
def test_ensemble_algebra():
    rng = np.random.default_rng(10)
    p = rng.dirichlet(np.ones(4), 50)
    y = rng.integers(0, 4, 50)
    blk = ProbabilityBlock(np.stack([p, p]), y)
    assert ensemble_gain(blk, ProbabilityBlock(p, y)) == 0.0

    # two models, three inputs, two classes
    m1 = np.array([[0.9, 0.1], [0.3, 0.7], [0.45, 0.55]])
    m2 = np.array([[0.2, 0.8], [0.6, 0.4], [0.65, 0.35]])
    y = np.array([0, 1, 0])
    # members: m1 right on inputs 0 and 1, m2 right on input 2 -> mean accuracy 3/6
    # average: [0.55,0.45] -> 0 ok, [0.45,0.55] -> 1 ok, [0.55,0.45] -> 0 ok -> 3/3
    gain = ensemble_gain(ProbabilityBlock(m1, y), ProbabilityBlock(m2, y))
    assert gain == pytest.approx(1.0 - 0.5, abs=1e-15)

    x = np.array([12.0, 47.0, 88.0, 63.0, 30.0])
    pe, sp = angle_gain_correlation(x, x)
    assert pe == pytest.approx(1.0, abs=1e-12) and sp == pytest.approx(1.0, abs=1e-12)
    pe, sp = angle_gain_correlation(x, -x)
    assert pe == pytest.approx(-1.0, abs=1e-12) and sp == pytest.approx(-1.0, abs=1e-12)


def _planted_spectrum(rng, M, N, k, frac):
    """Centered M x N matrix whose top-k squared singular values carry ``frac`` of the total."""
    C = np.eye(M) - 1.0 / M
    U, _ = np.linalg.qr(C @ rng.standard_normal((M, M - 1)))
    V, _ = np.linalg.qr(rng.standard_normal((N, M - 1)))
    top = np.linspace(2.0, 1.0, k)
    top *= frac / top.sum()
    rest = np.full(M - 1 - k, (1.0 - frac) / (M - 1 - k))
    s = np.sqrt(np.concatenate([top, rest]))
    return (U * s) @ V.T


def _low_rank_plus_noise(rng, M, N, k, frac):
    C = np.eye(M) - 1.0 / M
    signal = C @ rng.standard_normal((M, k)) @ rng.standard_normal((k, N))
    noise = C @ rng.standard_normal((M, N))
    signal *= np.sqrt(frac / np.sum(signal**2))
    noise *= np.sqrt((1.0 - frac) / np.sum(noise**2))
    return signal + noise


@criterion(11, "reduction reports planted top-k variance within 0.02 and warns below 0.75")
@pytest.mark.parametrize("builder", [_planted_spectrum, _low_rank_plus_noise])
def test_reduction_fidelity(builder):
    rng = np.random.default_rng(11)
    M, N, k = 300, 1200, 8
    X = builder(rng, M, N, k, 0.8)
    with warnings.catch_warnings():
        warnings.simplefilter("error", LowVarianceWarning)
        _, rep = reduce_dims(X, k=k)
    print(f"{builder.__name__}: planted 0.80 -> reported {rep.variance_fraction:.4f}")
    assert abs(rep.variance_fraction - 0.8) <= 0.02

    X = builder(rng, M, N, k, 0.6)
    with pytest.warns(LowVarianceWarning):
        _, rep = reduce_dims(X, k=k)
    assert abs(rep.variance_fraction - 0.6) <= 0.02


def _snapshot(d: Path) -> dict:
    return {p.relative_to(d).as_posix(): p.read_bytes() for p in sorted(d.rglob("*")) if p.is_file()}


_COMMANDS = [
    ("distmat", ["--aligned", "both"]),
    ("embed", ["--aligned", "both", "--mds-dim", "5"]),
    ("angles", ["--base-id", "base_s0"]),
    ("landmarks", ["--ref-id", "base_s0", "--cmp-id", "m0_t3_s0", "-k", "5",
                   "--labels-id", "labels"]),
    ("predict", ["--method", "m1", "--base-id", "base_s0"]),
    ("ensemble", ["--base-id", "base_s0", "--pairing", "cartesian"]),
    ("seedscale", ["--method", "m0"]),
]


@criterion(12, "every CLI command gives byte-identical outputs at 1 and 8 threads")
def test_cli_determinism(tmp_path):
    synth = {"multi": ["--n-methods", "3", "--probs", "--steps", "5", "--m", "40", "--n", "6"],
             "seeds": ["--n-seeds", "3", "--steps", "4", "--m", "40", "--n", "6"]}
    for name, flags in synth.items():
        runs = []
        for threads in ("1", "8"):
            d = tmp_path / f"synth_{name}_{threads}"
            assert main(["synth", "--output-dir", str(d), "--threads", threads, *flags]) == 0
            runs.append(_snapshot(d))
        assert runs[0] == runs[1], f"synth {name} differs across thread counts"

    for cmd, flags in _COMMANDS:
        data = tmp_path / ("synth_seeds_1" if cmd == "seedscale" else "synth_multi_1")
        runs = []
        for i, threads in enumerate(("1", "8", "8")):
            out = tmp_path / f"{cmd}_{i}"
            rc = main([cmd, "--manifest", str(data / "manifest.json"), "--output-dir", str(out),
                       "--threads", threads, *flags])
            assert rc == 0, cmd
            runs.append(_snapshot(out))
        assert runs[0], f"{cmd} wrote nothing"
        assert runs[0] == runs[1] == runs[2], f"{cmd} outputs differ across runs"
