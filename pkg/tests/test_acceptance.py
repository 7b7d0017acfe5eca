"""Acceptance criteria, one test per criterion.

Run with -v for one PASS/FAIL line per criterion.  The full synthetic
pipeline (synth -> extract -> analyze -> classify) runs once in a session
fixture and its artifacts back criteria 3-5; criteria 1-2 re-run the oracle
test files in a subprocess under their stated runtime budgets.
"""

import csv
import json
import subprocess
import sys
import time
from itertools import combinations
from pathlib import Path

import numpy as np
import pytest

from expressa.audio_io import EMOTIONS
from expressa.classify import leave_one_out
from expressa.cli import EXIT_OK, main
from expressa.dataset import LabeledMatrix, load_matrix_csv
from expressa.features import FEATURE_NAMES

SEED = 20160111
CHAIN_BUDGET_S = 300.0
_REPO = Path(__file__).resolve().parent.parent


def _announce(n, ok, detail):
    print(f"ACCEPTANCE CRITERION {n}: {'PASS' if ok else 'FAIL'} - {detail}")


def _run_oracle_files(files, budget_s):
    t0 = time.perf_counter()
    proc = subprocess.run(
        [sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider", *files],
        cwd=_REPO, capture_output=True, text=True)
    elapsed = time.perf_counter() - t0
    return proc, elapsed


@pytest.fixture(scope="session")
def pipeline(tmp_path_factory):
    """One full chain on the default synthetic corpus, with stage timings."""
    root = tmp_path_factory.mktemp("pipeline")
    corpus = root / "corpus"
    feat = root / "feat"
    analysis = root / "analysis"
    cls = root / "cls"
    timings = {}

    t0 = time.perf_counter()
    assert main(["synth", "--out", str(corpus), "--seed", str(SEED),
                 "--performers", "10"]) == EXIT_OK
    timings["synth"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    assert main(["extract", "--manifest", str(corpus / "manifest.csv"),
                 "--out", str(feat), "--jobs", "1"]) == EXIT_OK
    timings["extract"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    assert main(["analyze", "--matrix", str(feat / "features.csv"),
                 "--out", str(analysis)]) == EXIT_OK
    timings["analyze"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    assert main(["classify", "--matrix", str(feat / "features.csv"),
                 "--out", str(cls)]) == EXIT_OK
    timings["classify"] = time.perf_counter() - t0

    return {"corpus": corpus, "feat": feat, "analysis": analysis,
            "cls": cls, "timings": timings}


def test_criterion_1_feature_and_dsp_oracles():
    """Every feature/dsp oracle example passes at its tolerance in < 30 s."""
    proc, elapsed = _run_oracle_files(
        ["tests/test_dsp.py", "tests/test_features.py"], 30.0)
    ok = proc.returncode == 0 and elapsed < 30.0
    _announce(1, ok, f"feature+dsp oracle suite, {elapsed:.1f}s (budget 30s)")
    assert proc.returncode == 0, proc.stdout + proc.stderr
    assert elapsed < 30.0


def test_criterion_2_statistics_oracles():
    """ANOVA/permutation/PCA/SVM-dual oracle checks pass in < 5 min."""
    proc, elapsed = _run_oracle_files(
        ["tests/test_stats.py",
         "tests/test_classify.py::test_dual_solution_matches_projected_gradient_oracle"],
        300.0)
    ok = proc.returncode == 0 and elapsed < 300.0
    _announce(2, ok, f"statistics oracle suite, {elapsed:.1f}s (budget 300s)")
    assert proc.returncode == 0, proc.stdout + proc.stderr
    assert elapsed < 300.0


def test_criterion_3_pipeline_shape(pipeline):
    """Default corpus: 70x26 matrix, the 2 planted nulls discarded, all 21
    pairs covered, LOO row sums 10, exactly the 7 comparison sets."""
    matrix = load_matrix_csv(pipeline["feat"] / "features.csv")
    assert matrix.values.shape == (70, 26)
    assert matrix.feature_names == FEATURE_NAMES

    discarded = set()
    with open(pipeline["analysis"] / "anova.csv", newline="") as fh:
        for row in csv.DictReader(fh):
            if row["kept"] == "0":
                discarded.add(row["feature"])
    assert discarded == {"ATK_IQR", "HRD_IQR"}

    covered = set()
    with open(pipeline["analysis"] / "separation.csv", newline="") as fh:
        for row in csv.DictReader(fh):
            if row["flag"] == "1":
                covered.add(row["pair"])
    n_pairs = len(list(combinations(EMOTIONS, 2)))
    assert len(covered) == n_pairs == 21

    doc = json.loads((pipeline["cls"] / "comparison.json").read_text())
    assert set(doc) == {"24F", "7PC", "4PC", "3PC", "7F", "4F", "3F"}
    for block in doc.values():
        assert [int(s) for s in np.sum(block["confusion"], axis=1)] == [10] * 7

    total = sum(pipeline["timings"].values())
    ok = total < CHAIN_BUDGET_S
    _announce(3, ok, f"70x26 matrix, nulls {{ATK_IQR, HRD_IQR}} discarded, "
                     f"21/21 pairs, 7 sets, chain {total:.1f}s (budget 300s)")
    assert total < CHAIN_BUDGET_S, pipeline["timings"]


def _gated_normalized(pipeline):
    norm = load_matrix_csv(pipeline["analysis"] / "normalized.csv")
    kept = []
    with open(pipeline["analysis"] / "anova.csv", newline="") as fh:
        for row in csv.DictReader(fh):
            if row["kept"] == "1":
                kept.append(row["feature"])
    cols = [norm.feature_names.index(f) for f in kept]
    return LabeledMatrix(norm.performers, norm.emotions, tuple(kept),
                         norm.values[:, cols])


def test_criterion_4_classification_sanity(pipeline):
    """24F macro-F1 >= 0.95; shuffled labels land at chance (+-3 sd, 50 reps)."""
    doc = json.loads((pipeline["cls"] / "comparison.json").read_text())
    macro = doc["24F"]["macro_f1"]
    assert macro >= 0.95

    gated = _gated_normalized(pipeline)
    rng = np.random.default_rng(SEED)
    accs = []
    for _ in range(50):
        perm = rng.permutation(len(gated.emotions))
        shuffled = LabeledMatrix(gated.performers,
                                 [gated.emotions[i] for i in perm],
                                 gated.feature_names, gated.values)
        cm = leave_one_out(shuffled, gated.feature_names)
        accs.append(cm.accuracy())
    mean, sd = float(np.mean(accs)), float(np.std(accs, ddof=1))
    ok = abs(mean - 1.0 / 7.0) <= 3.0 * sd
    _announce(4, ok and macro >= 0.95,
              f"24F macro-F1 {macro:.3f} (>= 0.95); shuffled accuracy "
              f"{mean:.3f} vs chance {1 / 7:.3f}, sd {sd:.3f}")
    assert ok, (mean, sd)


def test_criterion_5_determinism(pipeline, tmp_path):
    """Byte-identical chain across reruns and across --jobs 1 vs 8."""
    corpus2 = tmp_path / "corpus2"
    assert main(["synth", "--out", str(corpus2), "--seed", str(SEED),
                 "--performers", "10"]) == EXIT_OK
    for name in sorted(p.name for p in pipeline["corpus"].iterdir()
                       if p.suffix in (".wav", ".csv", ".json")):
        assert (corpus2 / name).read_bytes() == \
            (pipeline["corpus"] / name).read_bytes(), name

    feat8 = tmp_path / "feat8"
    assert main(["extract", "--manifest",
                 str(pipeline["corpus"] / "manifest.csv"),
                 "--out", str(feat8), "--jobs", "8"]) == EXIT_OK
    assert (feat8 / "features.csv").read_bytes() == \
        (pipeline["feat"] / "features.csv").read_bytes()

    an2, cls2 = tmp_path / "an2", tmp_path / "cls2"
    assert main(["analyze", "--matrix", str(feat8 / "features.csv"),
                 "--out", str(an2)]) == EXIT_OK
    assert main(["classify", "--matrix", str(feat8 / "features.csv"),
                 "--out", str(cls2)]) == EXIT_OK
    for name in ("anova.csv", "separation.csv", "pca.json", "normalized.csv"):
        assert (an2 / name).read_bytes() == \
            (pipeline["analysis"] / name).read_bytes(), name
    for name in ("comparison.csv", "comparison.json"):
        assert (cls2 / name).read_bytes() == \
            (pipeline["cls"] / name).read_bytes(), name
    _announce(5, True, "synth/extract/analyze/classify byte-identical "
                       "across runs and across --jobs 1 vs 8")
