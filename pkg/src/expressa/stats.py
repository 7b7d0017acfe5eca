"""ANOVA feature gating, pairwise emotion separation, and correlation-matrix
PCA with the Kaiser criterion.

The F/t tail probabilities go through a local regularized incomplete beta
(continued-fraction evaluation), and the eigendecomposition is a cyclic
Jacobi sweep; both keep the statistics chain free of external solvers.
"""

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .audio_io import EMOTIONS
from .dataset import emotion_groups
from .errors import (
    DegenerateGroupsError,
    DomainError,
    InsufficientDataError,
)

_BETA_EPS = 1e-14
_BETA_MAX_ITER = 500
_TINY = 1e-300


def _betacf(a, b, x):
    """Continued fraction for the incomplete beta (Lentz's method)."""
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, _BETA_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _BETA_EPS:
            return h
    raise DomainError("incomplete beta continued fraction did not converge")


def betainc_reg(a, b, x):
    """Regularized incomplete beta I_x(a, b), relative error ~1e-14."""
    if a <= 0 or b <= 0:
        raise DomainError("beta parameters must be positive")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(ln_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def f_sf(f, df1, df2):
    """Upper tail P(F(df1, df2) > f)."""
    if f <= 0.0:
        return 1.0
    return betainc_reg(df2 / 2.0, df1 / 2.0, df2 / (df2 + df1 * f))


def t_sf_two_sided(t, df):
    """Two-sided P(|T(df)| > |t|)."""
    t = abs(t)
    if t == 0.0:
        return 1.0
    return betainc_reg(df / 2.0, 0.5, df / (df + t * t))


@dataclass
class AnovaResult:
    feature: str
    F: float
    p: float
    df_between: int
    df_within: int


def one_way_anova(groups):
    """Classic one-way F test; returns (F, p)."""
    if len(groups) < 2:
        raise InsufficientDataError("need at least 2 groups")
    groups = [np.asarray(g, dtype=np.float64) for g in groups]
    for g in groups:
        if len(g) < 2:
            raise InsufficientDataError("each group needs at least 2 values")
    n = sum(len(g) for g in groups)
    grand = sum(g.sum() for g in groups) / n
    ssb = sum(len(g) * (g.mean() - grand) ** 2 for g in groups)
    ssw = sum(((g - g.mean()) ** 2).sum() for g in groups)
    df_b = len(groups) - 1
    df_w = n - len(groups)
    if ssw <= 0.0:
        if ssb <= 0.0:
            raise DegenerateGroupsError("all values identical")
        raise DegenerateGroupsError("zero within-group variance: F is infinite")
    f = (ssb / df_b) / (ssw / df_w)
    return float(f), float(f_sf(f, df_b, df_w))


def welch_t_test(a, b):
    """Welch two-sample t-test; returns (t, df, p two-sided)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if len(a) < 2 or len(b) < 2:
        raise InsufficientDataError("each sample needs at least 2 values")
    va, vb = a.var(ddof=1), b.var(ddof=1)
    na, nb = len(a), len(b)
    se2 = va / na + vb / nb
    if se2 <= 0.0:
        return math.inf, float(na + nb - 2), 0.0
    t = (a.mean() - b.mean()) / math.sqrt(se2)
    df = se2 ** 2 / ((va / na) ** 2 / (na - 1) + (vb / nb) ** 2 / (nb - 1))
    return float(t), float(df), float(t_sf_two_sided(t, df))


def gate_features(matrix, alpha=0.05):
    """ANOVA each feature over emotion groups; keep those with p < alpha.

    Returns (kept feature names in canonical order, full AnovaResult list).
    """
    kept, results = [], []
    for name in matrix.feature_names:
        groups = emotion_groups(matrix, name)
        f, p = one_way_anova(groups)
        results.append(AnovaResult(name, f, p,
                                   df_between=len(groups) - 1,
                                   df_within=sum(len(g) for g in groups) - len(groups)))
        if p < alpha:
            kept.append(name)
    return kept, results


def pairwise_separation(matrix, alpha=0.05, method="welch"):
    """Per feature, which emotion pairs a Welch t-test separates at alpha.

    Returns {feature: set of (emotion_a, emotion_b)} with pairs in canonical
    order.  'welch-bonferroni' divides alpha by the number of pairs.
    """
    emotions = [e for e in EMOTIONS if e in set(matrix.emotions)]
    pairs = list(combinations(emotions, 2))
    if method == "welch-bonferroni":
        alpha = alpha / len(pairs)
    elif method != "welch":
        raise DomainError(f"unknown post-hoc method {method!r}")

    labels = np.array(matrix.emotions)
    out = {}
    for name in matrix.feature_names:
        col = matrix.column(name)
        flagged = set()
        for ea, eb in pairs:
            a, b = col[labels == ea], col[labels == eb]
            if a.var(ddof=1) == 0.0 and b.var(ddof=1) == 0.0:
                if a.mean() != b.mean():
                    flagged.add((ea, eb))
                continue
            _, _, p = welch_t_test(a, b)
            if p < alpha:
                flagged.add((ea, eb))
        out[name] = flagged
    return out


def jacobi_eigh(a, tol=1e-12, max_sweeps=100):
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns (eigenvalues, eigenvectors-as-columns), unsorted.
    """
    a = np.array(a, dtype=np.float64)
    n = a.shape[0]
    v = np.eye(n)
    for _ in range(max_sweeps):
        off = math.sqrt(np.sum(np.tril(a, -1) ** 2) * 2.0)
        if off < tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) < tol / (n * n):
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                rot_p, rot_q = a[:, p].copy(), a[:, q].copy()
                a[:, p] = c * rot_p - s * rot_q
                a[:, q] = s * rot_p + c * rot_q
                rot_p, rot_q = a[p, :].copy(), a[q, :].copy()
                a[p, :] = c * rot_p - s * rot_q
                a[q, :] = s * rot_p + c * rot_q
                rot_p, rot_q = v[:, p].copy(), v[:, q].copy()
                v[:, p] = c * rot_p - s * rot_q
                v[:, q] = s * rot_p + c * rot_q
    return np.diag(a).copy(), v


@dataclass
class PcaModel:
    feature_names: tuple
    means: np.ndarray       # global standardization used before decomposition
    sds: np.ndarray
    loadings: np.ndarray    # columns are components, orthonormal
    eigenvalues: np.ndarray # descending
    explained: np.ndarray   # cumulative variance fractions
    n_kaiser: int


def _standardize(values):
    means = values.mean(axis=0)
    sds = values.std(axis=0, ddof=1)
    safe = np.where(sds > 0, sds, 1.0)
    return (values - means) / safe, means, safe


def pca_fit(matrix, features=None):
    """Correlation-matrix PCA of the selected feature columns."""
    if features is None:
        features = list(matrix.feature_names)
    idx = [matrix.feature_names.index(f) for f in features]
    values = matrix.values[:, idx]
    if values.shape[0] < 2:
        raise InsufficientDataError("PCA needs at least 2 rows")
    if values.shape[1] < 2:
        raise InsufficientDataError("PCA needs at least 2 features")
    z, means, sds = _standardize(values)
    corr = z.T @ z / (z.shape[0] - 1)
    eigvals, eigvecs = jacobi_eigh(corr)
    order = np.argsort(-eigvals, kind="stable")
    eigvals = np.maximum(eigvals[order], 0.0)
    eigvecs = eigvecs[:, order]
    # sign convention: the largest-magnitude loading of each component is positive
    for j in range(eigvecs.shape[1]):
        k = int(np.argmax(np.abs(eigvecs[:, j])))
        if eigvecs[k, j] < 0:
            eigvecs[:, j] = -eigvecs[:, j]
    total = eigvals.sum()
    explained = np.cumsum(eigvals) / total if total > 0 else np.ones_like(eigvals)
    return PcaModel(tuple(features), means, sds, eigvecs, eigvals,
                    explained, int(np.sum(eigvals > 1.0)))


def pca_project(model, matrix, k):
    """Scores of the first k components for the given rows."""
    if not 1 <= k <= model.loadings.shape[1]:
        raise DomainError(f"k={k} outside [1, {model.loadings.shape[1]}]")
    idx = [matrix.feature_names.index(f) for f in model.feature_names]
    z = (matrix.values[:, idx] - model.means) / model.sds
    return z @ model.loadings[:, :k]
