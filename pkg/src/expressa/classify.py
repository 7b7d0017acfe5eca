"""One-vs-one soft-margin SVM with leave-one-out evaluation and the
24F/7PC/4PC/3PC/7F/4F/3F comparison protocol.

Each binary machine is trained by deterministic dual coordinate descent
(fixed sweep order), so identical inputs always give identical models.
"""

import warnings
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .audio_io import EMOTIONS
from .dataset import NormalizedMatrix
from .errors import DomainError, MissingClassError, SubsetError
from .stats import pca_fit, pca_project

NAMED_SUBSETS = {
    "7F": ("BPM", "LOW", "RMS", "ROH_M", "ROH_IQR", "HAE_M", "OER_M"),
    "4F": ("BPM", "EBF_IQR", "EBF_M", "HRD_M"),
    "3F": ("NSN_IQR", "NOE_M", "T3_M"),
}

DEFAULT_SETS = ("24F", "7PC", "4PC", "3PC", "7F", "4F", "3F")

_KKT_TOL = 1e-6
_MAX_STEPS = 10 ** 5


class ConvergenceWarning(UserWarning):
    pass


def _dcd_python(K, y, C, tol, max_steps):
    n = len(y)
    alpha = np.zeros(n)
    qa = np.zeros(n)          # (Q alpha)_i, maintained incrementally
    qdiag = np.diag(K).copy()
    steps = 0
    while steps < max_steps:
        worst = 0.0
        for i in range(n):
            g = qa[i] - 1.0
            if alpha[i] <= 0.0:
                pg = min(g, 0.0)
            elif alpha[i] >= C:
                pg = max(g, 0.0)
            else:
                pg = g
            steps += 1
            if pg == 0.0 or qdiag[i] <= 0.0:
                continue
            worst = max(worst, abs(pg))
            new = min(max(alpha[i] - g / qdiag[i], 0.0), C)
            delta = new - alpha[i]
            if delta != 0.0:
                qa += delta * y[i] * y * K[:, i]
                alpha[i] = new
        if worst < tol:
            return alpha, True
    return alpha, False


try:
    from numba import njit as _njit

    @_njit(cache=True)
    def _dcd_compiled(K, y, C, tol, max_steps):  # pragma: no cover
        n = len(y)
        alpha = np.zeros(n)
        qa = np.zeros(n)
        qdiag = np.empty(n)
        for i in range(n):
            qdiag[i] = K[i, i]
        steps = 0
        while steps < max_steps:
            worst = 0.0
            for i in range(n):
                g = qa[i] - 1.0
                if alpha[i] <= 0.0:
                    pg = min(g, 0.0)
                elif alpha[i] >= C:
                    pg = max(g, 0.0)
                else:
                    pg = g
                steps += 1
                if pg == 0.0 or qdiag[i] <= 0.0:
                    continue
                worst = max(worst, abs(pg))
                new = min(max(alpha[i] - g / qdiag[i], 0.0), C)
                delta = new - alpha[i]
                if delta != 0.0:
                    s = delta * y[i]
                    for j in range(n):
                        qa[j] = qa[j] + s * y[j] * K[j, i]
                    alpha[i] = new
            if worst < tol:
                return alpha, True
        return alpha, False
except ImportError:  # pragma: no cover
    _dcd_compiled = None


def _dual_coordinate_descent(K, y, C, tol=_KKT_TOL, max_steps=_MAX_STEPS):
    """Solve the L1-SVM dual min 0.5 aᵀQa - eᵀa, 0 <= a <= C, Q = yyᵀ∘K.

    Fixed 0..n-1 sweep order; stops when the largest projected gradient
    violation in a sweep drops below tol. Returns (alpha, converged).
    The compiled path replays the reference arithmetic operation-for-
    operation, so both paths produce bit-identical solutions.
    """
    if _dcd_compiled is not None:
        K = np.ascontiguousarray(K, dtype=np.float64)
        y = np.ascontiguousarray(y, dtype=np.float64)
        return _dcd_compiled(K, y, float(C), float(tol), int(max_steps))
    return _dcd_python(K, y, C, tol, max_steps)


def svm_dual_objective(K, y, alpha):
    """Dual objective 0.5 aᵀQa - eᵀa for a given alpha."""
    qy = alpha * y
    return 0.5 * qy @ K @ qy - alpha.sum()


@dataclass
class BinarySvm:
    pos: str
    neg: str
    sv_x: np.ndarray
    sv_coef: np.ndarray     # alpha_i * y_i
    kernel: str
    gamma: float
    weights: np.ndarray | None = None  # linear kernel shortcut (incl. bias)

    def decision(self, x):
        xa = np.concatenate([x, np.ones((x.shape[0], 1))], axis=1)
        if self.weights is not None:
            return xa @ self.weights
        k = _kernel_matrix(xa, self.sv_x, self.kernel, self.gamma)
        return k @ self.sv_coef


@dataclass
class SvmModel:
    classes: tuple
    machines: list
    feature_subset: tuple
    C: float
    converged: bool = True
    warnings: list = field(default_factory=list)


def _kernel_matrix(a, b, kernel, gamma):
    if kernel == "linear":
        return a @ b.T
    if kernel == "rbf":
        sq = (np.sum(a ** 2, axis=1)[:, None] + np.sum(b ** 2, axis=1)[None, :]
              - 2.0 * a @ b.T)
        return np.exp(-gamma * np.maximum(sq, 0.0))
    raise DomainError(f"unknown kernel {kernel!r}")


def train_svm(values, labels, classes, C=1.0, kernel="linear", gamma=0.1,
              feature_subset=()):
    """Train one-vs-one binary machines for every unordered class pair."""
    if C <= 0:
        raise DomainError("C must be positive")
    labels = np.asarray(labels)
    present = set(labels.tolist())
    for c in classes:
        if c not in present:
            raise MissingClassError(f"class {c!r} absent from training rows")
    xa = np.concatenate([values, np.ones((values.shape[0], 1))], axis=1)

    machines = []
    converged_all = True
    warn_list = []
    for pos, neg in combinations(classes, 2):
        sel = (labels == pos) | (labels == neg)
        x = xa[sel]
        y = np.where(labels[sel] == pos, 1.0, -1.0)
        K = _kernel_matrix(x, x, kernel, gamma)
        alpha, converged = _dual_coordinate_descent(K, y, C)
        if not converged:
            converged_all = False
            msg = f"SVM {pos} vs {neg} hit the iteration cap"
            warn_list.append(msg)
            warnings.warn(msg, ConvergenceWarning)
        coef = alpha * y
        weights = x.T @ coef if kernel == "linear" else None
        machines.append(BinarySvm(pos=pos, neg=neg, sv_x=x, sv_coef=coef,
                                  kernel=kernel, gamma=gamma, weights=weights))
    return SvmModel(classes=tuple(classes), machines=machines,
                    feature_subset=tuple(feature_subset), C=C,
                    converged=converged_all, warnings=warn_list)


def predict(model, values):
    """Pairwise voting; ties go to the lowest canonical class index."""
    values = np.atleast_2d(values)
    votes = np.zeros((values.shape[0], len(model.classes)), dtype=int)
    index = {c: i for i, c in enumerate(model.classes)}
    for m in model.machines:
        d = m.decision(values)
        votes[d >= 0, index[m.pos]] += 1
        votes[d < 0, index[m.neg]] += 1
    winners = np.argmax(votes, axis=1)  # argmax takes the first (lowest) on ties
    return [model.classes[i] for i in winners]


@dataclass
class ConfusionMatrix:
    classes: tuple
    counts: np.ndarray  # rows true, columns predicted

    def accuracy(self):
        return float(np.trace(self.counts) / self.counts.sum())


@dataclass
class FScoreReport:
    classes: tuple
    precision: dict
    recall: dict
    f1: dict
    macro_f1: float


def _resolve_subset(matrix, subset):
    """subset is either an iterable of feature names or ('pc', k)."""
    if isinstance(subset, tuple) and len(subset) == 2 and subset[0] == "pc":
        return subset
    names = []
    for f in subset:
        if f not in matrix.feature_names:
            raise SubsetError(f"feature {f!r} not in the matrix")
        if f in names:
            warnings.warn(f"duplicate feature {f!r} in subset, ignoring")
            continue
        names.append(f)
    return tuple(names)


def leave_one_out(matrix, subset, C=1.0, kernel="linear", gamma=0.1,
                  pca_refit=True, full_pca=None):
    """Leave-one-out confusion matrix over all rows.

    PC subsets refit the PCA on each fold's training rows unless
    pca_refit=False, in which case `full_pca` projects both sides.
    """
    classes = tuple(e for e in EMOTIONS if e in set(matrix.emotions))
    labels = np.array(matrix.emotions)
    for c in classes:
        if np.sum(labels == c) < 2:
            raise MissingClassError(f"class {c!r} needs >= 2 rows for LOO")
    subset = _resolve_subset(matrix, subset)
    is_pc = isinstance(subset, tuple) and len(subset) == 2 and subset[0] == "pc"

    n = len(matrix)
    index = {c: i for i, c in enumerate(classes)}
    counts = np.zeros((len(classes), len(classes)), dtype=int)
    if not is_pc:
        cols = [matrix.feature_names.index(f) for f in subset]
        base = matrix.values[:, cols]

    for i in range(n):
        train = np.arange(n) != i
        if is_pc:
            k = subset[1]
            if pca_refit:
                fold = NormalizedMatrix(
                    [matrix.performers[j] for j in range(n) if train[j]],
                    [matrix.emotions[j] for j in range(n) if train[j]],
                    matrix.feature_names, matrix.values[train], [])
                model_pca = pca_fit(fold)
            else:
                if full_pca is None:
                    raise DomainError("pca_refit=False requires full_pca")
                model_pca = full_pca
            x_train = pca_project(model_pca, _rows_view(matrix, train), k)
            x_test = pca_project(model_pca, _rows_view(matrix, ~train), k)
        else:
            x_train, x_test = base[train], base[~train]
        model = train_svm(x_train, labels[train], classes, C=C,
                          kernel=kernel, gamma=gamma, feature_subset=())
        pred = predict(model, x_test)[0]
        counts[index[labels[i]], index[pred]] += 1
    return ConfusionMatrix(classes=classes, counts=counts)


def _rows_view(matrix, mask):
    return NormalizedMatrix(
        [p for p, m in zip(matrix.performers, mask) if m],
        [e for e, m in zip(matrix.emotions, mask) if m],
        matrix.feature_names, matrix.values[mask], [])


def f_scores(cm):
    """Per-class precision/recall/F1 plus the macro average."""
    counts = cm.counts
    if np.any(counts.sum(axis=1) == 0):
        raise DomainError("every class needs at least one true row")
    precision, recall, f1 = {}, {}, {}
    for i, c in enumerate(cm.classes):
        col = counts[:, i].sum()
        p = counts[i, i] / col if col > 0 else 0.0
        r = counts[i, i] / counts[i, :].sum()
        precision[c] = float(p)
        recall[c] = float(r)
        f1[c] = float(2.0 * p * r / (p + r)) if p + r > 0 else 0.0
    macro = float(np.mean([f1[c] for c in cm.classes]))
    return FScoreReport(cm.classes, precision, recall, f1, macro)


def run_comparison(matrix, pca_model, C=1.0, kernel="linear", gamma=0.1,
                   pca_refit=True, use_bpm_nn=False, extra_sets=None):
    """Leave-one-out F-scores for each configured feature/PC set.

    `matrix` should already be gated to the kept features; PC sets project
    onto `pca_model` components (or per-fold refits).
    """
    sets = {"24F": tuple(matrix.feature_names),
            "7PC": ("pc", 7), "4PC": ("pc", 4), "3PC": ("pc", 3)}
    for name, feats in NAMED_SUBSETS.items():
        if use_bpm_nn:
            feats = tuple("BPM_nn" if f == "BPM" else f for f in feats)
        sets[name] = feats
    if extra_sets:
        sets.update(extra_sets)

    results = {}
    for name in list(DEFAULT_SETS) + [s for s in sets if s not in DEFAULT_SETS]:
        cm = leave_one_out(matrix, sets[name], C=C, kernel=kernel, gamma=gamma,
                           pca_refit=pca_refit, full_pca=pca_model)
        results[name] = (cm, f_scores(cm))
    return results
