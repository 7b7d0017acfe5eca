"""One-vs-one SVM, dual-solver oracle, F-scores, and LOO protocol tests."""

import math

import numpy as np
import pytest

from expressa.audio_io import EMOTIONS
from expressa.classify import (
    DEFAULT_SETS,
    BinarySvm,
    ConfusionMatrix,
    SvmModel,
    _dual_coordinate_descent,
    _kernel_matrix,
    _resolve_subset,
    f_scores,
    leave_one_out,
    predict,
    run_comparison,
    svm_dual_objective,
    train_svm,
)
from expressa.dataset import NormalizedMatrix
from expressa.errors import DomainError, MissingClassError, SubsetError
from expressa.features import FEATURE_NAMES
from expressa.stats import pca_fit


def _clusters(seed=1, n_per=4, scale=0.2):
    rng = np.random.default_rng(seed)
    centers = {"Anger": (0.0, 0.0), "Fear": (5.0, 5.0), "Sadness": (-5.0, 5.0)}
    xs, labels = [], []
    for c, (cx, cy) in centers.items():
        xs.append(rng.normal(loc=(cx, cy), scale=scale, size=(n_per, 2)))
        labels += [c] * n_per
    return np.vstack(xs), labels, tuple(centers)


def _norm_matrix(values, emotions, feature_names=None):
    values = np.asarray(values, dtype=np.float64)
    feature_names = tuple(feature_names or
                          [f"F{j}" for j in range(values.shape[1])])
    performers = [f"P{i:02d}" for i in range(values.shape[0])]
    return NormalizedMatrix(performers, list(emotions), feature_names,
                            values, [])


# ---------------------------------------------------------------- training

def test_separable_clusters_classified_correctly():
    x, labels, classes = _clusters()
    model = train_svm(x, labels, classes)
    assert predict(model, x) == labels
    assert model.converged


def test_single_point_per_class_self_prediction():
    x = np.array([[0.0, 0.0], [4.0, 0.0], [0.0, 4.0]])
    labels = ["Anger", "Fear", "Sadness"]
    model = train_svm(x, labels, ("Anger", "Fear", "Sadness"), C=10.0)
    assert predict(model, x) == labels


def test_missing_class_rejected():
    x, labels, _ = _clusters()
    with pytest.raises(MissingClassError):
        train_svm(x, labels, ("Anger", "Fear", "Sadness", "Disgust"))


def test_bad_hyperparameters_rejected():
    x, labels, classes = _clusters()
    with pytest.raises(DomainError):
        train_svm(x, labels, classes, C=0.0)
    with pytest.raises(DomainError):
        train_svm(x, labels, classes, kernel="poly")


def test_rbf_kernel_separable():
    x, labels, classes = _clusters()
    model = train_svm(x, labels, classes, kernel="rbf", gamma=0.5)
    assert predict(model, x) == labels


def test_scaling_homogeneity_keeps_labels():
    # scaling features by c and C by 1/c^2 leaves a separable fit's labels alone
    x, labels, classes = _clusters(seed=2)
    a = predict(train_svm(x, labels, classes, C=1.0), x)
    b = predict(train_svm(2.0 * x, labels, classes, C=0.25), 2.0 * x)
    assert a == b == labels


# ---------------------------------------------------------------- dual oracle

def _projected_gradient_oracle(K, y, C, restarts=5, iters=30_000, seed=0):
    """Independent dual solver: projected gradient with random restarts."""
    n = len(y)
    Q = np.outer(y, y) * K
    lip = float(np.linalg.eigvalsh(Q).max())
    step = 1.0 / max(lip, 1e-12)
    rng = np.random.default_rng(seed)
    best = math.inf
    for r in range(restarts):
        a = np.zeros(n) if r == 0 else rng.uniform(0.0, C, size=n)
        for _ in range(iters):
            a = np.clip(a - step * (Q @ a - 1.0), 0.0, C)
        best = min(best, float(0.5 * a @ Q @ a - a.sum()))
    return best


@pytest.mark.parametrize("kernel,gamma", [("linear", 0.0), ("rbf", 0.3)])
def test_dual_solution_matches_projected_gradient_oracle(kernel, gamma):
    rng = np.random.default_rng(23)
    for trial in range(4):
        x = rng.normal(size=(20, 3))
        y = np.where(rng.random(20) < 0.5, 1.0, -1.0)
        if abs(y.sum()) == 20:
            y[0] = -y[0]
        xa = np.concatenate([x, np.ones((20, 1))], axis=1)
        K = _kernel_matrix(xa, xa, kernel, gamma)
        C = float(rng.uniform(0.5, 3.0))
        alpha, converged = _dual_coordinate_descent(K, y, C)
        assert converged
        obj = svm_dual_objective(K, y, alpha)
        oracle = _projected_gradient_oracle(K, y, C, seed=trial)
        assert obj == pytest.approx(oracle, abs=1e-4)
        assert np.all(alpha >= -1e-12) and np.all(alpha <= C + 1e-12)


def test_dual_solver_deterministic():
    rng = np.random.default_rng(3)
    x = rng.normal(size=(16, 4))
    y = np.where(np.arange(16) % 2 == 0, 1.0, -1.0)
    K = _kernel_matrix(x, x, "linear", 0.0)
    a1, _ = _dual_coordinate_descent(K, y, 1.0)
    a2, _ = _dual_coordinate_descent(K, y, 1.0)
    assert np.array_equal(a1, a2)


# ---------------------------------------------------------------- F-scores

def test_f_scores_identity_matrix():
    cm = ConfusionMatrix(("A", "B", "C"), np.diag([5, 5, 5]))
    rep = f_scores(cm)
    assert all(rep.f1[c] == 1.0 for c in cm.classes)
    assert rep.macro_f1 == 1.0


def test_f_scores_hand_case():
    cm = ConfusionMatrix(("A", "B"), np.array([[8, 2], [4, 6]]))
    rep = f_scores(cm)
    assert rep.precision["A"] == pytest.approx(8 / 12)
    assert rep.recall["A"] == pytest.approx(0.8)
    assert rep.f1["A"] == pytest.approx(0.7273, abs=1e-4)
    assert rep.f1["B"] == pytest.approx(2 * 0.75 * 0.6 / 1.35, abs=1e-12)
    assert rep.macro_f1 == pytest.approx((rep.f1["A"] + rep.f1["B"]) / 2,
                                         abs=1e-12)


def test_f_scores_zero_column_gives_zero_f1():
    cm = ConfusionMatrix(("A", "B"), np.array([[0, 2], [0, 2]]))
    rep = f_scores(cm)
    assert rep.precision["A"] == 0.0
    assert rep.f1["A"] == 0.0


def test_f_scores_zero_row_rejected():
    cm = ConfusionMatrix(("A", "B"), np.array([[0, 0], [1, 1]]))
    with pytest.raises(DomainError):
        f_scores(cm)


# ---------------------------------------------------------------- voting

def test_vote_tie_goes_to_lowest_canonical_class():
    classes = ("Anger", "Fear", "Sadness")
    dim = 2

    def _machine(pos, neg, bias):
        w = np.zeros(dim + 1)
        w[-1] = bias
        return BinarySvm(pos=pos, neg=neg, sv_x=np.zeros((1, dim + 1)),
                         sv_coef=np.zeros(1), kernel="linear", gamma=0.0,
                         weights=w)

    # cyclic outcomes: Anger > Fear, Fear > Sadness, Sadness > Anger
    model = SvmModel(classes=classes, machines=[
        _machine("Anger", "Fear", +1.0),
        _machine("Anger", "Sadness", -1.0),
        _machine("Fear", "Sadness", +1.0),
    ], feature_subset=(), C=1.0)
    assert predict(model, np.zeros((1, dim))) == ["Anger"]


# ---------------------------------------------------------------- subsets

def test_resolve_subset_unknown_feature():
    m = _norm_matrix(np.zeros((2, 2)), ["Anger", "Fear"], ("X", "Y"))
    with pytest.raises(SubsetError):
        _resolve_subset(m, ("X", "Z"))


def test_resolve_subset_duplicate_warns_and_dedups():
    m = _norm_matrix(np.zeros((2, 2)), ["Anger", "Fear"], ("X", "Y"))
    with pytest.warns(UserWarning):
        out = _resolve_subset(m, ("X", "Y", "X"))
    assert out == ("X", "Y")


def test_resolve_subset_passes_pc_spec():
    m = _norm_matrix(np.zeros((2, 2)), ["Anger", "Fear"], ("X", "Y"))
    assert _resolve_subset(m, ("pc", 3)) == ("pc", 3)


# ---------------------------------------------------------------- LOO

def _loo_fixture(seed=4):
    x, labels, _ = _clusters(seed=seed, n_per=4, scale=0.2)
    return _norm_matrix(x, labels)


def test_loo_diagonal_on_separable_fixture():
    m = _loo_fixture()
    cm = leave_one_out(m, ("F0", "F1"))
    assert cm.classes == ("Anger", "Fear", "Sadness")
    assert np.array_equal(cm.counts, np.diag([4, 4, 4]))
    assert cm.accuracy() == 1.0


def test_loo_pc_subset_diagonal():
    m = _loo_fixture()
    cm = leave_one_out(m, ("pc", 2))
    assert np.array_equal(cm.counts, np.diag([4, 4, 4]))


def test_loo_fixed_pca_requires_model():
    m = _loo_fixture()
    with pytest.raises(DomainError):
        leave_one_out(m, ("pc", 2), pca_refit=False, full_pca=None)
    cm = leave_one_out(m, ("pc", 2), pca_refit=False, full_pca=pca_fit(m))
    assert np.array_equal(cm.counts, np.diag([4, 4, 4]))


def test_loo_rejects_singleton_class():
    x = np.vstack([np.zeros((1, 2)), np.ones((4, 2))])
    m = _norm_matrix(x, ["Anger"] + ["Fear"] * 4)
    with pytest.raises(MissingClassError):
        leave_one_out(m, ("F0", "F1"))


# ---------------------------------------------------------------- comparison

def _comparison_fixture(seed=5):
    rng = np.random.default_rng(seed)
    emotions = [e for _ in range(2) for e in EMOTIONS]
    values = rng.normal(scale=0.3, size=(14, len(FEATURE_NAMES)))
    for i, e in enumerate(emotions):
        values[i, :6] += 3.0 * EMOTIONS.index(e)  # class-dependent means
    return _norm_matrix(values, emotions, FEATURE_NAMES)


def test_run_comparison_default_sets():
    m = _comparison_fixture()
    results = run_comparison(m, pca_fit(m))
    assert tuple(results) == DEFAULT_SETS
    for cm, rep in results.values():
        assert cm.counts.sum() == 14
        assert np.all(cm.counts.sum(axis=1) == 2)
        assert 0.0 <= rep.macro_f1 <= 1.0


def test_run_comparison_extra_sets():
    m = _comparison_fixture()
    results = run_comparison(m, pca_fit(m),
                             extra_sets={"MY": ("BPM", "RMS")})
    assert tuple(results) == DEFAULT_SETS + ("MY",)
    with pytest.raises(SubsetError):
        run_comparison(m, pca_fit(m), extra_sets={"BAD": ("NOPE",)})
