"""Command-line pipeline: synth -> extract -> analyze -> classify -> report.

All outputs are plain CSV/JSON plus a human-readable summary; every report
bundle embeds the fully resolved config so it can be reproduced exactly.
Writes are atomic (temp file + rename).
"""

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from itertools import combinations

from . import classify as clf
from . import dataset, stats, synthkit
from .audio_io import EMOTIONS, decode_wav, load_manifest
from .config import PipelineConfig, config_as_dict, load_config, save_config
from .errors import ExpressaError
from .features import extract_features

EXIT_OK = 0
EXIT_PARTIAL = 1
EXIT_CONFIG = 2


def _write_atomic(path, data):
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _load_cfg(args):
    if args.config:
        return load_config(args.config)
    return PipelineConfig().validate()


def _extract_one(job):
    path, cfg_dict = job
    cfg = PipelineConfig(**cfg_dict)
    clip = decode_wav(path)
    return extract_features(clip, cfg)


def cmd_synth(args):
    cfg = _load_cfg(args)
    os.makedirs(args.out, exist_ok=True)
    manifest, truth = synthkit.synth_corpus(
        args.out, n_performers=args.performers, master_seed=args.seed,
        n_notes=args.notes)
    save_config(cfg, os.path.join(args.out, "config.txt"))
    print(f"wrote corpus: {manifest}")
    print(f"truth table: {truth}")
    return EXIT_OK


def cmd_extract(args):
    cfg = _load_cfg(args)
    records = load_manifest(args.manifest)
    if not records:
        print("no recordings in manifest", file=sys.stderr)
        return EXIT_PARTIAL
    base = os.path.dirname(os.path.abspath(args.manifest))
    jobs = [(os.path.join(base, r.path), config_as_dict(cfg)) for r in records]

    entries = []
    failures = []
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            futures = list(pool.map(_extract_one_safe, jobs))
        for r, result in zip(records, futures):
            _collect(r, result, entries, failures)
    else:
        for r, job in zip(records, jobs):
            _collect(r, _extract_one_safe(job), entries, failures)

    for r, _ in entries:
        print(f"extracted {r.path}")
    for path, err in failures:
        print(f"FAILED {path}: {err}", file=sys.stderr)
    if not entries:
        return EXIT_PARTIAL

    matrix = dataset.assemble_matrix(entries)
    os.makedirs(args.out, exist_ok=True)
    out_csv = os.path.join(args.out, "features.csv")
    buf = io.StringIO()
    _matrix_to_csv(matrix, buf)
    _write_atomic(out_csv, buf.getvalue())
    save_config(cfg, os.path.join(args.out, "config.txt"))
    print(f"{len(matrix)} rows x {len(matrix.feature_names)} features -> {out_csv}")
    return EXIT_OK if not failures else EXIT_PARTIAL


def _extract_one_safe(job):
    try:
        return ("ok", _extract_one(job))
    except ExpressaError as exc:
        return ("err", f"{type(exc).__name__}: {exc}")


def _collect(record, result, entries, failures):
    kind, payload = result
    if kind == "ok":
        entries.append((record, payload))
    else:
        failures.append((record.path, payload))


def _matrix_to_csv(matrix, fh):
    writer = csv.writer(fh)
    writer.writerow(["performer", "emotion", *matrix.feature_names])
    for i in range(len(matrix)):
        writer.writerow([matrix.performers[i], matrix.emotions[i],
                         *(f"{v:.9g}" for v in matrix.values[i])])


def _analysis_chain(matrix_path, cfg):
    matrix = dataset.load_matrix_csv(matrix_path)
    norm = dataset.normalize(matrix)
    kept, anova = stats.gate_features(norm, alpha=cfg.alpha)
    return matrix, norm, kept, anova


def cmd_analyze(args):
    cfg = _load_cfg(args)
    matrix, norm, kept, anova = _analysis_chain(args.matrix, cfg)
    separation = stats.pairwise_separation(norm, alpha=cfg.alpha,
                                           method=cfg.posthoc)
    pca = stats.pca_fit(norm, kept)
    os.makedirs(args.out, exist_ok=True)

    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["feature", "F", "p", "kept"])
    for r in anova:
        w.writerow([r.feature, f"{r.F:.9g}", f"{r.p:.9g}",
                    int(r.feature in kept)])
    _write_atomic(os.path.join(args.out, "anova.csv"), buf.getvalue())

    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["feature", "pair", "flag"])
    emotions = [e for e in EMOTIONS if e in set(norm.emotions)]
    for name in norm.feature_names:
        for ea, eb in combinations(emotions, 2):
            w.writerow([name, f"{ea}-{eb}",
                        int((ea, eb) in separation[name])])
    _write_atomic(os.path.join(args.out, "separation.csv"), buf.getvalue())

    pca_doc = {
        "feature_names": list(pca.feature_names),
        "loadings": pca.loadings.tolist(),
        "eigenvalues": pca.eigenvalues.tolist(),
        "explained": pca.explained.tolist(),
        "n_kaiser": pca.n_kaiser,
    }
    _write_atomic(os.path.join(args.out, "pca.json"),
                  json.dumps(pca_doc, indent=2, sort_keys=True) + "\n")

    dataset.save_matrix_csv(norm, os.path.join(args.out, "normalized.csv"))
    dataset.save_matrix_json(norm, os.path.join(args.out, "normalized.json"))
    save_config(cfg, os.path.join(args.out, "config.txt"))

    discarded = [r.feature for r in anova if r.feature not in kept]
    lines = [
        f"recordings: {len(matrix)}",
        f"features: {len(matrix.feature_names)}",
        f"alpha: {cfg.alpha}",
        f"kept: {len(kept)}",
        f"discarded: {', '.join(discarded) if discarded else '(none)'}",
        f"n_kaiser: {pca.n_kaiser}",
        f"variance explained by {pca.n_kaiser} PCs: "
        f"{pca.explained[pca.n_kaiser - 1] * 100:.1f}%" if pca.n_kaiser else
        "variance explained: n/a",
    ]
    covered = set()
    for flags in separation.values():
        covered |= flags
    lines.append(f"emotion pairs separated by at least one feature: "
                 f"{len(covered)} of {len(list(combinations(emotions, 2)))}")
    _write_atomic(os.path.join(args.out, "summary.txt"),
                  "\n".join(lines) + "\n")
    print("\n".join(lines))
    return EXIT_OK


def _parse_extra_sets(specs):
    extra = {}
    for s in specs or []:
        if ":" not in s:
            raise SystemExit(f"bad --set {s!r}, expected NAME:FEAT1,FEAT2")
        name, feats = s.split(":", 1)
        extra[name.strip()] = tuple(f.strip() for f in feats.split(",") if f.strip())
    return extra


def cmd_classify(args):
    cfg = _load_cfg(args)
    _, norm, kept, _ = _analysis_chain(args.matrix, cfg)
    gated = dataset.NormalizedMatrix(
        list(norm.performers), list(norm.emotions), tuple(kept),
        norm.values[:, [norm.feature_names.index(f) for f in kept]], norm.audit)
    pca = stats.pca_fit(gated, kept)
    results = clf.run_comparison(
        gated, pca, C=cfg.svm_c, kernel=cfg.kernel, gamma=cfg.rbf_gamma,
        pca_refit=cfg.pca_refit, use_bpm_nn=cfg.subset_use_bpm_nn,
        extra_sets=_parse_extra_sets(args.set))

    os.makedirs(args.out, exist_ok=True)
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["set", "class", "precision", "recall", "f1"])
    doc = {}
    for name, (cm, report) in results.items():
        for c in report.classes:
            w.writerow([name, c, f"{report.precision[c]:.9g}",
                        f"{report.recall[c]:.9g}", f"{report.f1[c]:.9g}"])
        w.writerow([name, "macro", "", "", f"{report.macro_f1:.9g}"])
        doc[name] = {
            "confusion": cm.counts.tolist(),
            "classes": list(cm.classes),
            "precision": report.precision,
            "recall": report.recall,
            "f1": report.f1,
            "macro_f1": report.macro_f1,
            "accuracy": cm.accuracy(),
        }
    _write_atomic(os.path.join(args.out, "comparison.csv"), buf.getvalue())
    _write_atomic(os.path.join(args.out, "comparison.json"),
                  json.dumps(doc, indent=2, sort_keys=True) + "\n")
    save_config(cfg, os.path.join(args.out, "config.txt"))
    for name, (cm, report) in results.items():
        print(f"{name}: macro-F1 {report.macro_f1:.3f}, "
              f"accuracy {cm.accuracy():.3f}")
    return EXIT_OK


def cmd_report(args):
    from . import report
    made = report.render_all(args.analysis, args.classification, args.out)
    for path in made:
        print(f"wrote {path}")
    return EXIT_OK


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="expressa",
        description="Expressiveness feature extraction and emotion analysis")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic ground-truth corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.add_argument("--seed", type=int, default=20160111)
    p.add_argument("--performers", type=int, default=10)
    p.add_argument("--notes", type=int, default=10)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("extract", help="extract the feature matrix from a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("analyze", help="normalize, ANOVA-gate, separate, and PCA")
    p.add_argument("--matrix", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("classify", help="leave-one-out SVM comparison table")
    p.add_argument("--matrix", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.add_argument("--set", action="append",
                   help="extra feature set as NAME:FEAT1,FEAT2 (repeatable)")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("report", help="render figures from analysis outputs")
    p.add_argument("--analysis", help="directory written by `analyze`")
    p.add_argument("--classification", help="directory written by `classify`")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ExpressaError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
