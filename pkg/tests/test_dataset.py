"""Track collapsing, matrix assembly, normalization, and serialization tests."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from expressa.audio_io import EMOTIONS, RecordingMeta
from expressa.dataset import (
    LabeledMatrix,
    assemble_matrix,
    load_matrix_csv,
    normalize,
    save_matrix_csv,
    save_matrix_json,
    summarize_track,
)
from expressa.errors import (
    FeatureUndefinedError,
    InsufficientDataError,
    SchemaError,
)


# ---------------------------------------------------------------- summarize

def test_summarize_odd():
    assert summarize_track([1, 2, 3, 4, 5]) == (3.0, 2.0)


def test_summarize_singleton():
    assert summarize_track([7]) == (7.0, 0.0)


def test_summarize_even():
    m, iqr = summarize_track([1, 2, 3, 4])
    assert m == 2.5
    assert iqr == pytest.approx(1.5)


def test_summarize_empty_raises():
    with pytest.raises(FeatureUndefinedError):
        summarize_track([])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(min_value=-100, max_value=100), min_size=1, max_size=30),
       st.floats(min_value=-5, max_value=5),
       st.floats(min_value=-10, max_value=10))
def test_summarize_affine_equivariant(values, a, b):
    m, iqr = summarize_track(values)
    m2, iqr2 = summarize_track([a * v + b for v in values])
    assert m2 == pytest.approx(a * m + b, abs=1e-9 + 1e-9 * abs(a * m + b))
    assert iqr2 == pytest.approx(abs(a) * iqr, abs=1e-9 + 1e-9 * abs(a) * iqr)


# ---------------------------------------------------------------- assembly

def _entries(n_perf=2, features=("X", "Y")):
    entries = []
    val = 0.0
    for p in range(1, n_perf + 1):
        for e in EMOTIONS:
            meta = RecordingMeta(path=f"p{p}_{e}.wav", performer_id=f"P{p:02d}",
                                 emotion=e)
            entries.append((meta, {f: (val := val + 1.0) for f in features}))
    return entries


def test_assemble_shape_and_order():
    entries = _entries()
    m = assemble_matrix(entries)
    assert m.values.shape == (14, 2)
    assert m.performers == sorted(m.performers)
    assert m.emotions[:7] == list(EMOTIONS)


def test_assemble_order_invariant_under_permutation():
    entries = _entries()
    rng = np.random.default_rng(0)
    shuffled = [entries[i] for i in rng.permutation(len(entries))]
    a, b = assemble_matrix(entries), assemble_matrix(shuffled)
    assert a.performers == b.performers
    assert a.emotions == b.emotions
    assert np.array_equal(a.values, b.values)


def test_assemble_single_row():
    meta = RecordingMeta(path="x.wav", performer_id="P01", emotion="Anger")
    m = assemble_matrix([(meta, {"X": 1.0})])
    assert m.values.shape == (1, 1)


def test_assemble_mismatched_names():
    e1 = (RecordingMeta("a", "P01", "Anger"), {"X": 1.0})
    e2 = (RecordingMeta("b", "P01", "Fear"), {"Y": 1.0})
    with pytest.raises(SchemaError):
        assemble_matrix([e1, e2])


def test_assemble_empty():
    with pytest.raises(SchemaError):
        assemble_matrix([])


# ---------------------------------------------------------------- normalize

def _matrix(values, feature_names=("X",), performers=None, emotions=None):
    values = np.atleast_2d(np.asarray(values, dtype=np.float64))
    n = values.shape[0]
    performers = performers or ["P01"] * n
    emotions = emotions or [EMOTIONS[i % 7] for i in range(n)]
    return LabeledMatrix(list(performers), list(emotions),
                         tuple(feature_names), values)


def test_normalize_z_scores_within_performer():
    m = _matrix([[1.0], [2.0], [3.0]])
    out = normalize(m)
    assert np.allclose(out.values[:, 0], [-1.0, 0.0, 1.0])


def test_normalize_constant_feature_zeros_with_audit():
    m = _matrix([[5.0], [5.0], [5.0]])
    out = normalize(m)
    assert np.all(out.values == 0.0)
    assert any(sd == 0.0 for _, _, _, sd in out.audit)


def test_normalize_bpm_nn_global():
    m = _matrix([[60.0], [120.0], [90.0], [90.0]], feature_names=("BPM_nn",),
                performers=["P01", "P01", "P02", "P02"])
    out = normalize(m)
    assert np.allclose(out.values[:, 0], [-1.2247, 1.2247, 0.0, 0.0], atol=1e-4)
    assert ("BPM_nn", "global", 90.0, pytest.approx(np.sqrt(600.0))) in [
        (f, s, mu, sd) for f, s, mu, sd in out.audit]


def test_normalize_rejects_single_row_performer():
    m = _matrix([[1.0], [2.0], [3.0]], performers=["P01", "P01", "P02"])
    with pytest.raises(InsufficientDataError):
        normalize(m)


def test_normalize_fixed_point():
    rng = np.random.default_rng(1)
    m = _matrix(rng.normal(size=(8, 3)), feature_names=("X", "Y", "Z"),
                performers=["P01"] * 4 + ["P02"] * 4)
    once = normalize(m)
    twice = normalize(once)
    assert np.allclose(once.values, twice.values, atol=1e-9)
    for p in ("P01", "P02"):
        sel = np.array(once.performers) == p
        assert np.allclose(once.values[sel].mean(axis=0), 0.0, atol=1e-9)
        assert np.allclose(once.values[sel].std(axis=0, ddof=1), 1.0, atol=1e-9)


# ---------------------------------------------------------------- serialization

def test_csv_round_trip(tmp_path):
    rng = np.random.default_rng(2)
    m = _matrix(rng.normal(size=(4, 3)), feature_names=("X", "Y", "Z"),
                performers=["P01", "P01", "P02", "P02"])
    path = tmp_path / "m.csv"
    save_matrix_csv(m, path)
    out = load_matrix_csv(path)
    assert out.performers == m.performers
    assert out.emotions == m.emotions
    assert out.feature_names == m.feature_names
    assert np.allclose(out.values, m.values, rtol=1e-8)


def test_load_matrix_rejects_bad_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("foo,bar,X\na,b,1\n")
    with pytest.raises(SchemaError):
        load_matrix_csv(path)


def test_load_matrix_rejects_ragged_rows(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("performer,emotion,X\nP01,Anger,1,2\n")
    with pytest.raises(SchemaError):
        load_matrix_csv(path)


def test_json_export_includes_audit(tmp_path):
    import json
    m = _matrix([[1.0], [2.0]], performers=["P01", "P01"])
    out = normalize(m)
    path = tmp_path / "m.json"
    save_matrix_json(out, path)
    doc = json.loads(path.read_text())
    assert "normalization_audit" in doc
    assert len(doc["rows"]) == 2
