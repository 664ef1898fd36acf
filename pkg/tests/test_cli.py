import json

import numpy as np
import pytest

from repshape.cli import main
from repshape.repstore import Manifest, ManifestEntry, save_manifest


def _manifest(tmp_path, mats, **meta):
    entries = []
    for sid, X in mats.items():
        p = tmp_path / f"{sid}.npy"
        np.save(p, X)
        entries.append(ManifestEntry(sid, p, **meta.get(sid, {})))
    return save_manifest(Manifest(tuple(entries), tmp_path), tmp_path / "manifest.json")


def _json(path):
    return json.loads(path.read_text())


@pytest.fixture
def synth(tmp_path):
    data = tmp_path / "data"
    rc = main(["synth", "--output-dir", str(data), "--m", "30", "--n", "5", "--steps", "5",
               "--n-methods", "3", "--probs", "--n-classes", "4"])
    assert rc == 0
    return data / "manifest.json"


def test_distmat_two_entries(tmp_path, rng):
    man = _manifest(tmp_path, {"a": rng.standard_normal((6, 3)), "b": rng.standard_normal((6, 3))})
    assert main(["distmat", "--manifest", str(man), "--output-dir", str(tmp_path / "o")]) == 0
    doc = _json(tmp_path / "o" / "distmat_aligned.json")
    D = np.array(doc["values"])
    assert doc["ids"] == ["a", "b"]
    assert D.shape == (2, 2) and D[0, 0] == D[1, 1] == 0.0 and D[0, 1] == D[1, 0] > 0
    assert set(doc["provenance"]["inputs"]) == {"a", "b"}
    assert "config_sha256" in doc["provenance"]


def test_distmat_monotone_first_row(tmp_path):
    data = tmp_path / "d"
    assert main(["synth", "--output-dir", str(data), "--steps", "9"]) == 0
    assert main(["distmat", "--manifest", str(data / "manifest.json"),
                 "--output-dir", str(tmp_path / "o"), "--aligned", "both"]) == 0
    doc = _json(tmp_path / "o" / "distmat_aligned.json")
    assert doc["ids"][0] == "base_s0"
    row = doc["values"][0]
    assert all(b > a for a, b in zip(row, row[1:]))
    assert (tmp_path / "o" / "distmat_unaligned.csv").is_file()


def test_mismatched_landmarks_exit_2(tmp_path, rng, capsys):
    man = _manifest(tmp_path, {"left": rng.standard_normal((6, 3)),
                               "right": rng.standard_normal((7, 3))})
    assert main(["distmat", "--manifest", str(man), "--output-dir", str(tmp_path / "o")]) == 2
    err = capsys.readouterr().err
    assert "'left'" in err and "'right'" in err


def test_mismatched_units_exit_2_unless_padded(tmp_path, rng, capsys):
    man = _manifest(tmp_path, {"a": rng.standard_normal((6, 2)), "b": rng.standard_normal((6, 3))})
    out = str(tmp_path / "o")
    assert main(["distmat", "--manifest", str(man), "--output-dir", out]) == 2
    assert "'a'" in capsys.readouterr().err
    assert main(["distmat", "--manifest", str(man), "--output-dir", out, "--zero-pad"]) == 0


def test_degenerate_shape_exit_3(tmp_path, rng, capsys):
    man = _manifest(tmp_path, {"ok": rng.standard_normal((6, 3)), "flat": np.ones((6, 3))})
    assert main(["distmat", "--manifest", str(man), "--output-dir", str(tmp_path / "o")]) == 3
    assert "'flat'" in capsys.readouterr().err


def test_missing_manifest_exit_2(tmp_path):
    assert main(["distmat", "--manifest", str(tmp_path / "nope.json"),
                 "--output-dir", str(tmp_path / "o")]) == 2


def test_config_file_and_override(tmp_path, rng):
    man = _manifest(tmp_path, {"a": rng.standard_normal((6, 3)), "b": rng.standard_normal((6, 3))})
    cfg = tmp_path / "run.cfg"
    cfg.write_text(f"# shared settings\nmanifest = {man}\naligned = off\nformat = json\n")
    out = tmp_path / "o"
    assert main(["distmat", "--config", str(cfg), "--output-dir", str(out)]) == 0
    assert (out / "distmat_unaligned.json").is_file()
    assert not (out / "distmat_aligned.json").exists()
    assert not (out / "distmat_unaligned.csv").exists()
    assert main(["distmat", "--config", str(cfg), "--output-dir", str(out), "--aligned", "on"]) == 0
    assert (out / "distmat_aligned.json").is_file()


def test_config_unknown_key(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("colour = blue\n")
    assert main(["distmat", "--config", str(cfg)]) == 2


def test_embed(tmp_path, synth, caplog):
    out = tmp_path / "o"
    assert main(["embed", "--manifest", str(synth), "--output-dir", str(out)]) == 0
    assert "capped" in caplog.text
    doc = _json(out / "embedding_aligned.json")
    assert doc["report"]["d"] == len(doc["points"]) - 1
    assert doc["report"]["stress"] >= 0.0


def test_embed_first_axis_follows_steps(tmp_path):
    data = tmp_path / "d"
    assert main(["synth", "--output-dir", str(data), "--steps", "9"]) == 0
    out = tmp_path / "o"
    assert main(["embed", "--manifest", str(data / "manifest.json"), "--mds-dim", "5",
                 "--output-dir", str(out)]) == 0
    pts = sorted(_json(out / "embedding_aligned.json")["points"], key=lambda p: p["hyperparam"])
    x = np.array([p["coords"][0] for p in pts])
    assert np.all(np.diff(x) > 0) or np.all(np.diff(x) < 0)


def test_embed_precomputed_euclidean(tmp_path, rng):
    P = rng.standard_normal((6, 2))
    D = np.sqrt(((P[:, None] - P[None]) ** 2).sum(-1))
    src = tmp_path / "d.csv"
    src.write_text("id," + ",".join(f"p{i}" for i in range(6)) + "\n"
                   + "\n".join(f"p{i}," + ",".join(repr(float(v)) for v in row) for i, row in enumerate(D)))
    out = tmp_path / "o"
    assert main(["embed", "--distmat", str(src), "--mds-dim", "2", "--output-dir", str(out)]) == 0
    assert _json(out / "embedding_aligned.json")["report"]["stress"] < 1e-8


def test_angles(tmp_path):
    data = tmp_path / "d"
    assert main(["synth", "--output-dir", str(data), "--angle", "60", "--m", "60", "--n", "8",
                 "--steps", "4"]) == 0
    out = tmp_path / "o"
    assert main(["angles", "--manifest", str(data / "manifest.json"), "--base-id", "base_s0",
                 "--output-dir", str(out)]) == 0
    doc = _json(out / "angles.json")
    A = np.array(doc["values"])
    assert doc["ids"] == ["m0", "m1"]
    assert A[0, 1] == pytest.approx(60.0, abs=3.0)
    assert main(["angles", "--manifest", str(data / "manifest.json"), "--base-id", "base_s0",
                 "--output-dir", str(out), "--angle-units", "radians"]) == 0
    assert np.array(_json(out / "angles.json")["values"])[0, 1] == pytest.approx(np.radians(A[0, 1]))


def test_landmarks(tmp_path, synth):
    out = tmp_path / "o"
    assert main(["landmarks", "--manifest", str(synth), "--ref-id", "base_s0", "--cmp-id",
                 "m0_t3_s0", "-k", "5", "--labels-id", "labels", "--output-dir", str(out)]) == 0
    doc = _json(out / "landmarks.json")
    assert len(doc["top_k"]) == len(doc["bottom_k"]) == 5
    mags = np.array(doc["ranking"]["magnitudes"])
    assert np.sum(mags**2) == pytest.approx(2 - 2 * np.cos(doc["rho"]), abs=1e-10)
    assert (out / "landmark_pca.csv").read_text().splitlines()[1].startswith("landmark_index")


def test_landmarks_missing_id(tmp_path, synth, capsys):
    assert main(["landmarks", "--manifest", str(synth), "--ref-id", "base_s0",
                 "--cmp-id", "ghost", "--output-dir", str(tmp_path / "o")]) == 2
    assert "ghost" in capsys.readouterr().err


def test_predict(tmp_path, synth):
    out = tmp_path / "o"
    assert main(["predict", "--manifest", str(synth), "--method", "m1", "--base-id", "base_s0",
                 "--output-dir", str(out)]) == 0
    doc = _json(out / "predict_m1.json")
    assert doc["r2"] > 0.9
    assert [r["true"] for r in doc["predictions"]] == pytest.approx([0.0, 0.1, 0.2, 0.3, 0.4])


def test_seedscale(tmp_path):
    data = tmp_path / "d"
    assert main(["synth", "--output-dir", str(data), "--n-seeds", "3", "--steps", "4"]) == 0
    out = tmp_path / "o"
    assert main(["seedscale", "--manifest", str(data / "manifest.json"), "--method", "m0",
                 "--output-dir", str(out)]) == 0
    rows = _json(out / "seedscale_m0.json")["levels"]
    assert rows[0]["hyperparam"] == 0.0 and rows[0]["d_aug_mean"] == 0.0
    assert all(r["n_pairs"] == 3 for r in rows)
    assert rows[2]["d_aug_mean"] == pytest.approx(0.2, abs=1e-9)


def test_seedscale_single_seed_exit_2(tmp_path, synth, capsys):
    assert main(["seedscale", "--manifest", str(synth), "--method", "m0",
                 "--output-dir", str(tmp_path / "o")]) == 2
    assert "seed" in capsys.readouterr().err


def test_ensemble(tmp_path, synth):
    out = tmp_path / "o"
    assert main(["ensemble", "--manifest", str(synth), "--base-id", "base_s0",
                 "--output-dir", str(out)]) == 0
    doc = _json(out / "ensemble_gain.json")
    assert doc["ids"] == ["m0", "m1", "m2"]
    assert len(doc["pairs"]) == 3
    assert doc["correlation"]["n_pairs"] == 3


def test_ensemble_identical_models_zero_gain(tmp_path, rng):
    y = rng.integers(0, 3, 20)
    p = rng.dirichlet(np.ones(3), 20)
    np.save(tmp_path / "y.npy", y)
    np.save(tmp_path / "pa.npy", np.stack([p, p]))
    np.save(tmp_path / "pb.npy", np.stack([p]))
    entries = (ManifestEntry("y", tmp_path / "y.npy", "labels"),
               ManifestEntry("pa", tmp_path / "pa.npy", "class-probabilities", "a"),
               ManifestEntry("pb", tmp_path / "pb.npy", "class-probabilities", "b"))
    man = save_manifest(Manifest(entries, tmp_path), tmp_path / "m.json")
    out = tmp_path / "o"
    assert main(["ensemble", "--manifest", str(man), "--output-dir", str(out)]) == 0
    doc = _json(out / "ensemble_gain.json")
    assert np.all(np.array(doc["values"]) == 0.0)
