"""Command-line front end.

Every subcommand reads a manifest, runs one analysis and writes its outputs
under ``--output-dir`` with fixed file names:

  distmat    distmat_{aligned,unaligned}.{json,csv}
  embed      embedding_{aligned,unaligned}.{json,csv}
  angles     angles.{json,csv}
  landmarks  landmarks.{json,csv}, landmark_pca.csv
  predict    predict_<method>.{json,csv}
  seedscale  seedscale_<method>.{json,csv}
  ensemble   ensemble_gain.{json,csv}, ensemble_pairs.csv
  synth      *.npy, manifest.json

Exit status: 0 success, 2 invalid input, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import hashlib
import io
import json
import logging
import os
import sys
import warnings
from itertools import combinations
from pathlib import Path

import numpy as np

from . import __version__
from .analyze import (ProbabilityBlock, aug_seed_scales, angle_gain_correlation,
                      build_aligned_design, ensemble_gain, ridge_loo, summarize_scales)
from .embed import DEFAULT_MDS_DIM, classical_mds, pca_axes
from .errors import NumericalError, ValidationError
from .geodesy import trajectories_from_manifest, trajectory_mean_angle
from .landmark import (classify_contract_expand, displacement_field, displacement_pca,
                       magnitude_histogram, rank_landmarks)
from .repstore import (DEFAULT_REDUCE_K, load_array, load_manifest, load_matrix,
                       pad_columns, reduce_dims)
from .shapecore import DistanceMatrix, PreShape, distance_matrix, preshape
from . import synthgen

log = logging.getLogger("repshape")

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3

# options that do not change numerical results; excluded from the config hash
_NON_SEMANTIC = {"threads", "output_dir", "config", "log_level", "func", "command"}


# --- output helpers ---------------------------------------------------------

def _sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class Run:
    """Per-invocation state: resolved config, inputs read, provenance."""

    def __init__(self, args):
        self.args = args
        self.out = Path(args.output_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        self.inputs: dict[str, str] = {}
        self.reduction: dict[str, dict] = {}
        self._manifest = None

    @property
    def threads(self) -> int:
        t = self.args.threads
        return (os.cpu_count() or 1) if t == "auto" else int(t)

    @property
    def manifest(self):
        if self._manifest is None:
            if not self.args.manifest:
                raise ValidationError("--manifest is required for this command")
            self._manifest = load_manifest(self.args.manifest)
        return self._manifest

    def provenance(self) -> dict:
        cfg = {k: (str(v) if isinstance(v, Path) else v)
               for k, v in sorted(vars(self.args).items()) if k not in _NON_SEMANTIC}
        blob = json.dumps(cfg, sort_keys=True, default=str).encode()
        prov = {"tool": "repshape", "version": __version__, "command": self.args.command,
                "config": cfg, "config_sha256": hashlib.sha256(blob).hexdigest(),
                "inputs": dict(sorted(self.inputs.items()))}
        if self.reduction:
            prov["reduction"] = dict(sorted(self.reduction.items()))
        return prov

    def want(self, kind: str) -> bool:
        return self.args.format in (kind, "both")

    def write_json(self, name: str, payload: dict):
        doc = {"provenance": self.provenance(), **payload}
        (self.out / name).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n",
                                     encoding="utf-8")

    def write_csv(self, name: str, header, rows):
        buf = io.StringIO()
        buf.write("# provenance: " + json.dumps(self.provenance(), sort_keys=True) + "\n")
        buf.write(",".join(header) + "\n")
        for row in rows:
            buf.write(",".join(_fmt(v) for v in row) + "\n")
        (self.out / name).write_text(buf.getvalue(), encoding="utf-8")

    def write_matrix(self, stem: str, dm: DistanceMatrix, extra: dict | None = None):
        if self.want("json"):
            self.write_json(stem + ".json", {"ids": dm.ids, "units": dm.units,
                                             "values": dm.values.tolist(), **(extra or {})})
        if self.want("csv"):
            self.write_csv(stem + ".csv", ["id"] + dm.ids,
                           [[rid, *row] for rid, row in zip(dm.ids, dm.values)])

    # --- loading ---

    def load_shapes(self, entries) -> dict[str, PreShape]:
        mats = {}
        for e in entries:
            try:
                X = load_matrix(e.path)
                X, rep = reduce_dims(X, self.args.reduce_k)
            except ValidationError as exc:
                raise ValidationError(f"entry {e.id!r}: {exc}") from exc
            self.inputs[e.id] = _sha256_file(e.path)
            self.reduction[e.id] = {"kept_components": rep.kept_components,
                                    "variance_fraction": rep.variance_fraction}
            mats[e.id] = X
        widths = {X.n_units for X in mats.values()}
        if len(widths) > 1:
            if not self.args.zero_pad:
                by_width = {X.n_units: i for i, X in mats.items()}
                raise ValidationError(
                    "unit count mismatch between entries "
                    + ", ".join(f"{i!r} (N={n})" for n, i in sorted(by_width.items()))
                    + "; pass --zero-pad to pad")
            mats = dict(zip(mats, pad_columns(list(mats.values()))))
        shapes = {}
        for sid, X in mats.items():
            try:
                shapes[sid] = preshape(X)
            except NumericalError as exc:
                raise type(exc)(f"entry {sid!r}: {exc}") from exc
        return shapes

    def filters(self) -> dict:
        f = {}
        if self.args.layer is not None:
            f["layer"] = self.args.layer
        if self.args.seed is not None:
            f["seed"] = self.args.seed
        return f


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    if v is None:
        return ""
    return str(v)


def _aligned_modes(arg: str) -> list[bool]:
    return {"on": [True], "off": [False], "both": [True, False]}[arg]


# --- commands ---------------------------------------------------------------

def cmd_distmat(run: Run):
    entries = run.manifest.representations(**run.filters())
    if len(entries) < 2:
        raise ValidationError("distmat needs at least 2 representation entries")
    shapes = run.load_shapes(entries)
    ids = list(shapes)
    for aligned in _aligned_modes(run.args.aligned):
        dm = distance_matrix([shapes[i] for i in ids], aligned=aligned, ids=ids,
                             threads=run.threads)
        run.write_matrix(f"distmat_{'aligned' if aligned else 'unaligned'}", dm)


def cmd_embed(run: Run):
    meta = {}
    if run.args.distmat:
        path = Path(run.args.distmat)
        if not path.is_file():
            raise ValidationError(f"distance matrix file not found: {path}")
        run.inputs["distmat"] = _sha256_file(path)
        dms = {"aligned" if run.args.aligned != "off" else "unaligned": DistanceMatrix.load(path)}
        if run.args.manifest:
            meta = {e.id: e for e in run.manifest}
    else:
        entries = run.manifest.representations(**run.filters())
        if len(entries) < 2:
            raise ValidationError("embed needs at least 2 representation entries")
        shapes = run.load_shapes(entries)
        ids = list(shapes)
        meta = {e.id: e for e in entries}
        dms = {}
        for aligned in _aligned_modes(run.args.aligned):
            dms["aligned" if aligned else "unaligned"] = distance_matrix(
                [shapes[i] for i in ids], aligned=aligned, ids=ids, threads=run.threads)

    for tag, dm in dms.items():
        K = len(dm.ids)
        d = run.args.mds_dim
        if d > K - 1:
            log.warning("mds dimension %d capped at K - 1 = %d", d, K - 1)
            d = K - 1
        emb = classical_mds(dm, d)
        k = min(run.args.pca_k, emb.d)
        coords = pca_axes(emb, k)
        cols = [f"x{c + 1}" for c in range(k)]
        records = []
        for sid, row in zip(dm.ids, coords):
            e = meta.get(sid)
            records.append({"id": sid,
                            "method": e.method if e else None,
                            "hyperparam": e.hyperparam if e else None,
                            "seed": e.seed if e else None,
                            "coords": row.tolist()})
        report = {"d": emb.d, "eigenvalues": emb.eigenvalues.tolist(), "stress": emb.stress,
                  "negative_mass": emb.negative_mass, "pca_k": k}
        if run.want("json"):
            run.write_json(f"embedding_{tag}.json", {"report": report, "points": records})
        if run.want("csv"):
            run.write_csv(f"embedding_{tag}.csv", ["id", "method", "hyperparam", "seed", *cols],
                          [[r["id"], r["method"], r["hyperparam"], r["seed"], *r["coords"]]
                           for r in records])


def _require(value, flag):
    if value in (None, ""):
        raise ValidationError(f"{flag} is required")
    return value


def _trajectory_angles(run: Run, base_id: str, methods=None):
    man = run.manifest
    base_entry = man.get(base_id)
    trajs = trajectories_from_manifest(man, base_id, methods=methods, **run.filters())
    if not trajs:
        raise ValidationError("no trajectories found besides the base entry")
    entries = [base_entry] + [man.get(i) for t in trajs.values() for i in t.shape_ids]
    shapes = run.load_shapes(entries)
    base = shapes[base_id]
    names = list(trajs)
    K = len(names)
    vals = np.zeros((K, K))
    for a in range(K):
        for b in range(a, K):
            try:
                theta = trajectory_mean_angle(trajs[names[a]], trajs[names[b]], base, shapes,
                                              pairing=run.args.pairing)
            except NumericalError as exc:
                raise type(exc)(f"base {base_id!r}: {exc}") from exc
            vals[a, b] = vals[b, a] = theta
    return names, vals


def cmd_angles(run: Run):
    base_id = _require(run.args.base_id, "--base-id")
    names, vals = _trajectory_angles(run, base_id)
    units = run.args.angle_units
    conv = vals if units == "degrees" else np.radians(vals)
    dm = DistanceMatrix(names, conv, units, {"base_id": base_id, "pairing": run.args.pairing})
    run.write_matrix("angles", dm, {"base_id": base_id, "pairing": run.args.pairing})


def cmd_landmarks(run: Run):
    ref_id = _require(run.args.ref_id, "--ref-id")
    cmp_id = _require(run.args.cmp_id, "--cmp-id")
    man = run.manifest
    shapes = run.load_shapes([man.get(ref_id), man.get(cmp_id)])
    field = displacement_field(shapes[ref_id], shapes[cmp_id], ref_id, cmp_id)
    top, bottom, ranking = rank_landmarks(field, run.args.k)
    M = field.delta.shape[0]
    labels, ties = classify_contract_expand(shapes[ref_id], field.cmp_aligned, np.arange(M))
    pca = displacement_pca(field, row_normalize=not run.args.no_row_normalize)
    counts, edges = magnitude_histogram(field, run.args.bins)

    class_labels = None
    if run.args.labels_id:
        le = man.get(run.args.labels_id)
        class_labels = load_array(le.path).ravel()
        run.inputs[le.id] = _sha256_file(le.path)
        if class_labels.shape[0] != M:
            raise ValidationError(
                f"labels entry {le.id!r} has {class_labels.shape[0]} rows, expected {M}")

    group = np.full(M, "", dtype=object)
    group[bottom] = "bottom"
    group[top] = "top"
    mags = field.magnitudes
    top_set = set(int(i) for i in top)
    summary = {
        "ref_id": ref_id, "cmp_id": cmp_id, "rho": field.rho, "k": run.args.k,
        "top_k": [int(i) for i in top], "bottom_k": [int(i) for i in bottom],
        "top_contracted": [int(i) for i in top if labels[i] == "contracted"],
        "top_expanded": [int(i) for i in top if labels[i] == "expanded"],
        "ties": [int(i) for i in np.flatnonzero(ties) if int(i) in top_set],
        "histogram": {"counts": counts.tolist(), "edges": edges.tolist()},
        "pca": {"explained_variance": pca.explained_variance.tolist(),
                "rank_deficient": pca.rank_deficient,
                "components": pca.components.tolist()},
        "ranking": {"order": ranking.order.tolist(), "magnitudes": ranking.magnitudes.tolist()},
    }
    if run.want("json"):
        run.write_json("landmarks.json", summary)
    if run.want("csv"):
        run.write_csv("landmarks.csv", ["landmark_index", "magnitude", "label", "group"],
                      [[i, mags[i], labels[i], group[i]] for i in range(M)])
    header = ["landmark_index", "pc1", "pc2"] + (["class_label"] if class_labels is not None else [])
    rows = []
    for idx, sc in zip(pca.row_indices, pca.scores):
        row = [int(idx), sc[0], sc[1]]
        if class_labels is not None:
            row.append(class_labels[idx].item())
        rows.append(row)
    run.write_csv("landmark_pca.csv", header, rows)


def cmd_predict(run: Run):
    method = _require(run.args.method, "--method")
    base_id = _require(run.args.base_id, "--base-id")
    man = run.manifest
    base = man.get(base_id)
    entries = [e for e in man.representations(method=method, **run.filters()) if e.id != base_id]
    entries = [base] + entries
    if len(entries) < 3:
        raise ValidationError(f"method {method!r} needs at least 2 shapes plus the base")
    shapes = run.load_shapes(entries)
    ids = list(shapes)
    targets = [man.get(i).hyperparam if man.get(i).hyperparam is not None else 0.0 for i in ids]
    design = build_aligned_design([shapes[i] for i in ids], shapes[base_id], targets, base_id)
    res = ridge_loo(design, run.args.ridge_lambda)
    pairs = [{"id": i, "true": t, "predicted": float(p)}
             for i, t, p in zip(ids, targets, res.predictions)]
    if run.want("json"):
        run.write_json(f"predict_{method}.json",
                       {"method": method, "base_id": base_id, "r2": res.r2, "lambda": res.lam,
                        "zero_variance_targets": res.zero_variance, "predictions": pairs})
    if run.want("csv"):
        run.write_csv(f"predict_{method}.csv", ["id", "true", "predicted"],
                      [[p["id"], p["true"], p["predicted"]] for p in pairs])


def cmd_seedscale(run: Run):
    method = _require(run.args.method, "--method")
    man = run.manifest
    flt = {k: v for k, v in run.filters().items() if k != "seed"}
    bases = {}
    for e in man.representations(method=run.args.base_method, **flt):
        if e.seed in bases:
            raise ValidationError(f"seed {e.seed} has two base entries: "
                                  f"{bases[e.seed].id!r}, {e.id!r}")
        bases[e.seed] = e
    levels: dict[float, dict[int, object]] = {}
    for e in man.representations(method=method, **flt):
        if e.hyperparam is None:
            raise ValidationError(f"entry {e.id!r} has no hyperparam")
        levels.setdefault(e.hyperparam, {})
        if e.seed in levels[e.hyperparam]:
            raise ValidationError(f"duplicate entries for {method!r} at hyperparam "
                                  f"{e.hyperparam} seed {e.seed}")
        levels[e.hyperparam][e.seed] = e
    if not levels:
        raise ValidationError(f"no entries for method {method!r}")
    # the un-augmented level: each seed's base stands in for X_p
    base_level = min(e.hyperparam or 0.0 for e in bases.values()) if bases else 0.0
    levels.setdefault(base_level, {})
    for s, e in bases.items():
        levels[base_level].setdefault(s, e)

    needed = list(bases.values()) + [e for lv in levels.values() for e in lv.values()]
    shapes = run.load_shapes(list({e.id: e for e in needed}.values()))

    pairs = []
    for h in sorted(levels):
        seeds = sorted(s for s in levels[h] if s in bases)
        if len(seeds) < 2:
            raise ValidationError(
                f"missing seed coverage: method {method!r} hyperparam {h} has seeds {seeds}, "
                "need >= 2 with a base entry")
        for i, j in combinations(seeds, 2):
            pairs.append(aug_seed_scales(shapes[bases[i].id], shapes[levels[h][i].id],
                                         shapes[bases[j].id], shapes[levels[h][j].id],
                                         h, (i, j)))
    summary = summarize_scales(pairs)
    raw = [{"hyperparam": p.hyperparam, "seed_pair": list(p.seed_pair),
            "d_aug": p.d_aug, "d_seed": p.d_seed} for p in pairs]
    if run.want("json"):
        run.write_json(f"seedscale_{method}.json",
                       {"method": method, "levels": summary, "pairs": raw})
    if run.want("csv"):
        cols = ["hyperparam", "n_pairs", "d_aug_mean", "d_aug_std", "d_seed_mean", "d_seed_std"]
        run.write_csv(f"seedscale_{method}.csv", cols, [[r[c] for c in cols] for r in summary])


def _load_blocks(run: Run):
    man = run.manifest
    if run.args.labels_id:
        label_entry = man.get(run.args.labels_id)
    else:
        cands = man.select(role="labels")
        if len(cands) != 1:
            raise ValidationError(
                f"expected exactly one labels entry, found {len(cands)}; use --labels-id")
        label_entry = cands[0]
    labels = load_array(label_entry.path).ravel()
    run.inputs[label_entry.id] = _sha256_file(label_entry.path)
    groups: dict[str, list] = {}
    flt = run.filters()
    flt.pop("seed", None)
    for e in man.select(role="class-probabilities", **flt):
        try:
            block = ProbabilityBlock(load_array(e.path), labels)
        except ValidationError as exc:
            raise ValidationError(f"entry {e.id!r}: {exc}") from exc
        run.inputs[e.id] = _sha256_file(e.path)
        groups.setdefault(e.method, []).append(block)
    return {m: ProbabilityBlock.concat(groups[m]) for m in sorted(groups)}


def cmd_ensemble(run: Run):
    blocks = _load_blocks(run)
    names = list(blocks)
    if len(names) < 2:
        raise ValidationError("ensemble needs probability blocks for at least 2 methods")
    K = len(names)
    gains = np.zeros((K, K))
    for a in range(K):
        gains[a, a] = ensemble_gain(blocks[names[a]])
        for b in range(a + 1, K):
            gains[a, b] = gains[b, a] = ensemble_gain(blocks[names[a]], blocks[names[b]])

    angles = None
    if run.args.base_id:
        anames, avals = _trajectory_angles(run, run.args.base_id, methods=names)
        missing = sorted(set(names) - set(anames))
        if missing:
            raise ValidationError(f"no representation trajectory for method(s) {missing}")
        pos = {m: i for i, m in enumerate(anames)}
        angles = {(a, b): avals[pos[a], pos[b]] for a in names for b in names}

    records = []
    for a, b in combinations(range(K), 2):
        rec = {"pair": [names[a], names[b]], "delta_acc": gains[a, b]}
        if angles is not None:
            rec["angle_deg"] = angles[(names[a], names[b])]
        records.append(rec)

    corr = None
    if angles is not None:
        try:
            pe, sp = angle_gain_correlation([r["angle_deg"] for r in records],
                                            [r["delta_acc"] for r in records])
            corr = {"pearson": pe, "spearman": sp, "n_pairs": len(records)}
        except (ValidationError, NumericalError) as exc:
            log.warning("correlation not reported: %s", exc)

    dm = DistanceMatrix(names, gains, "accuracy")
    run.write_matrix("ensemble_gain", dm, {"pairs": records, "correlation": corr})
    if run.want("csv"):
        run.write_csv("ensemble_pairs.csv", ["method_a", "method_b", "angle_deg", "delta_acc"],
                      [[r["pair"][0], r["pair"][1], r.get("angle_deg"), r["delta_acc"]]
                       for r in records])


def cmd_synth(run: Run):
    a = run.args
    nuisance = [] if a.nuisance in ("", "none") else [s.strip() for s in a.nuisance.split(",")]
    spec = synthgen.SynthSpec(a.m, a.n, a.steps, a.deform_scale, frozenset(nuisance), a.rng_seed)
    out = run.out
    entries = []
    if a.n_seeds > 1:
        if a.n_methods != 1 or a.angle is not None:
            raise ValidationError("--n-seeds > 1 supports a single method only")
        for s, steps in enumerate(synthgen.gen_seed_family(spec, a.n_seeds, a.seed_scale)):
            synthgen.write_dataset(out, spec, {"m0": steps}, seed=s, entries=entries)
        methods = ["m0"]
    else:
        if a.angle is not None:
            trajs = synthgen.gen_two_direction_trajectories(spec, a.angle)
        elif a.n_methods == 1:
            trajs = [synthgen.gen_trajectory(spec)]
        else:
            trajs = synthgen.gen_multi_direction(spec, a.n_methods)
        methods = [f"m{i}" for i in range(len(trajs))]
        synthgen.write_dataset(out, spec, dict(zip(methods, trajs)), seed=0, entries=entries)

    if a.probs:
        rng = np.random.default_rng(a.rng_seed + 1)
        labels = rng.integers(0, a.n_classes, a.m)
        lpath = out / "labels.npy"
        np.save(lpath, labels)
        entries.append(synthgen.ManifestEntry("labels", lpath, "labels"))
        for i, m in enumerate(methods):
            block = synthgen.gen_probability_block(a.models_per_method, labels, a.n_classes,
                                                   accuracy=0.55 + 0.05 * (i % 5),
                                                   rng_seed=a.rng_seed + 100 + i)
            p = out / f"probs_{m}.npy"
            np.save(p, block.probs)
            entries.append(synthgen.ManifestEntry(f"probs_{m}", p, "class-probabilities", m))
    synthgen.write_manifest(out, entries)
    log.info("wrote %d entries to %s", len(entries), out / "manifest.json")


# --- argument parsing -------------------------------------------------------

def _threads(v: str):
    if v == "auto":
        return v
    try:
        n = int(v)
    except ValueError:
        raise argparse.ArgumentTypeError("threads must be a positive integer or 'auto'")
    if n < 1:
        raise argparse.ArgumentTypeError("threads must be >= 1")
    return n


def _positive_int(v: str) -> int:
    n = int(v)
    if n < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return n


def _common_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("run configuration")
    g.add_argument("--manifest", help="manifest file (JSON or key=value)")
    g.add_argument("--config", help="key=value config file; command-line flags take precedence")
    g.add_argument("--output-dir", default="repshape_out")
    g.add_argument("--reduce-k", type=_positive_int, default=DEFAULT_REDUCE_K,
                   help="keep this many principal components per representation (default 1000)")
    g.add_argument("--aligned", choices=("on", "off", "both"), default="on")
    g.add_argument("--format", choices=("json", "csv", "both"), default="both")
    g.add_argument("--angle-units", choices=("degrees", "radians"), default="degrees")
    g.add_argument("--ridge-lambda", type=float, default=None,
                   help="ridge penalty (default: 1e-3 x mean squared row norm)")
    g.add_argument("--mds-dim", type=_positive_int, default=DEFAULT_MDS_DIM)
    g.add_argument("--threads", type=_threads, default=1)
    g.add_argument("--zero-pad", action="store_true",
                   help="zero-pad representations with fewer units")
    g.add_argument("--layer", default=None, help="only use entries of this layer")
    g.add_argument("--seed", type=int, default=None, help="only use entries of this seed")
    g.add_argument("--log-level", default="WARNING")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(
        prog="repshape", description=__doc__,
        formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"repshape {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("distmat", parents=[common], help="pairwise shape distance matrices")
    p.set_defaults(func=cmd_distmat)

    p = sub.add_parser("embed", parents=[common], help="MDS-PCA coordinates")
    p.add_argument("--distmat", help="precomputed distance matrix (JSON or CSV)")
    p.add_argument("--pca-k", type=_positive_int, default=2)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("angles", parents=[common], help="mean geodesic angles between trajectories")
    p.add_argument("--base-id")
    p.add_argument("--pairing", choices=("matched", "cartesian"), default="matched")
    p.set_defaults(func=cmd_angles)

    p = sub.add_parser("landmarks", parents=[common], help="landmark displacement analysis")
    p.add_argument("--ref-id")
    p.add_argument("--cmp-id")
    p.add_argument("-k", type=_positive_int, default=25)
    p.add_argument("--bins", type=_positive_int, default=None,
                   help="histogram bins (default: Freedman-Diaconis)")
    p.add_argument("--labels-id", help="labels entry joined onto the PCA scores")
    p.add_argument("--no-row-normalize", action="store_true")
    p.set_defaults(func=cmd_landmarks)

    p = sub.add_parser("predict", parents=[common], help="leave-one-out ridge prediction")
    p.add_argument("--method")
    p.add_argument("--base-id")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("seedscale", parents=[common], help="D_aug / D_seed curves")
    p.add_argument("--method")
    p.add_argument("--base-method", default="none")
    p.set_defaults(func=cmd_seedscale)

    p = sub.add_parser("ensemble", parents=[common], help="ensemble gains and angle correlation")
    p.add_argument("--base-id", help="base shape for trajectory angles (enables correlation)")
    p.add_argument("--labels-id")
    p.add_argument("--pairing", choices=("matched", "cartesian"), default="matched")
    p.set_defaults(func=cmd_ensemble)

    p = sub.add_parser("synth", parents=[common], help="write a synthetic dataset + manifest")
    p.add_argument("--m", type=_positive_int, default=30)
    p.add_argument("--n", type=_positive_int, default=5)
    p.add_argument("--steps", type=_positive_int, default=9)
    p.add_argument("--deform-scale", type=float, default=0.1)
    p.add_argument("--nuisance", default="rotate,reflect,translate,scale")
    p.add_argument("--rng-seed", type=int, default=0)
    p.add_argument("--angle", type=float, default=None,
                   help="two methods whose directions subtend this angle (degrees)")
    p.add_argument("--n-methods", type=_positive_int, default=1)
    p.add_argument("--n-seeds", type=_positive_int, default=1)
    p.add_argument("--seed-scale", type=float, default=0.3)
    p.add_argument("--probs", action="store_true", help="also write probability blocks")
    p.add_argument("--n-classes", type=_positive_int, default=10)
    p.add_argument("--models-per-method", type=_positive_int, default=2)
    p.set_defaults(func=cmd_synth)
    return parser


def _read_config(path: str) -> dict:
    p = Path(path)
    if not p.is_file():
        raise ValidationError(f"config file not found: {p}")
    out = {}
    for lineno, line in enumerate(p.read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValidationError(f"{p}:{lineno}: expected key=value")
        k, v = line.split("=", 1)
        out[k.strip().lstrip("-").replace("-", "_")] = v.strip()
    return out


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if not args.config:
        return args
    cfg = _read_config(args.config)
    subparsers = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    sub = subparsers.choices[args.command]
    actions = {a.dest: a for a in sub._actions}
    defaults = {}
    for key, raw in cfg.items():
        act = actions.get(key)
        if act is None or key in ("config", "help"):
            raise ValidationError(f"unknown config key {key!r}")
        if act.nargs == 0:  # store_true
            defaults[key] = raw.lower() in ("1", "true", "yes", "on")
        else:
            try:
                defaults[key] = act.type(raw) if act.type else raw
            except (ValueError, argparse.ArgumentTypeError) as exc:
                raise ValidationError(f"config key {key!r}: {exc}") from exc
            if act.choices and defaults[key] not in act.choices:
                raise ValidationError(f"config key {key!r} must be one of {act.choices}")
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = _apply_config(parser, argv)
    except ValidationError as exc:
        print(f"repshape: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    logging.captureWarnings(True)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            args.func(Run(args))
    except ValidationError as exc:
        print(f"repshape: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (NumericalError, np.linalg.LinAlgError) as exc:
        print(f"repshape: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
