"""Track collapsing, corpus matrix assembly, and the two normalization
schemes (per-performer for everything, global for BPM_nn)."""

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .audio_io import EMOTIONS
from .errors import FeatureUndefinedError, InsufficientDataError, SchemaError

_EMOTION_RANK = {e: i for i, e in enumerate(EMOTIONS)}


def summarize_track(values):
    """(median, interquartile range) of a feature track.

    Quartiles use linear interpolation of order statistics at p·(n-1),
    matching the numpy default.
    """
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise FeatureUndefinedError("cannot summarize an empty track")
    m = float(np.median(v))
    q1, q3 = np.quantile(v, [0.25, 0.75])
    return m, float(q3 - q1)


@dataclass
class LabeledMatrix:
    performers: list
    emotions: list
    feature_names: tuple
    values: np.ndarray  # shape (n_rows, n_features)

    def __len__(self):
        return len(self.performers)

    def column(self, name):
        return self.values[:, self.feature_names.index(name)]


@dataclass
class NormalizedMatrix(LabeledMatrix):
    audit: list = field(default_factory=list)  # (feature, scope, mean, sd)


def assemble_matrix(entries):
    """Build a LabeledMatrix from (RecordingMeta, feature dict) pairs.

    Row order is deterministic: performer_id, then canonical emotion order;
    permuting the input never changes the result.
    """
    if not entries:
        raise SchemaError("no feature vectors to assemble")
    names = tuple(entries[0][1].keys())
    for meta, vec in entries:
        if tuple(vec.keys()) != names:
            raise SchemaError(
                f"{meta.path}: feature names differ from the first recording")
    order = sorted(range(len(entries)),
                   key=lambda i: (entries[i][0].performer_id,
                                  _EMOTION_RANK[entries[i][0].emotion]))
    performers = [entries[i][0].performer_id for i in order]
    emotions = [entries[i][0].emotion for i in order]
    values = np.array([[entries[i][1][n] for n in names] for i in order])
    return LabeledMatrix(performers, emotions, names, values)


def normalize(matrix):
    """Z-score each feature within each performer; BPM_nn is z-scored over
    all rows jointly. Constant scopes map to zeros (audited with sd = 0)."""
    performers = np.array(matrix.performers)
    counts = {p: int(np.sum(performers == p)) for p in dict.fromkeys(matrix.performers)}
    for p, c in counts.items():
        if c < 2:
            raise InsufficientDataError(f"performer {p!r} has only {c} recording")

    out = np.empty_like(matrix.values)
    audit = []
    for j, name in enumerate(matrix.feature_names):
        col = matrix.values[:, j]
        if name == "BPM_nn":
            mean, sd = float(col.mean()), float(col.std(ddof=1))
            out[:, j] = (col - mean) / sd if sd > 0 else 0.0
            audit.append((name, "global", mean, sd))
            continue
        for p in dict.fromkeys(matrix.performers):
            sel = performers == p
            mean, sd = float(col[sel].mean()), float(col[sel].std(ddof=1))
            out[sel, j] = (col[sel] - mean) / sd if sd > 0 else 0.0
            audit.append((name, p, mean, sd))
    return NormalizedMatrix(list(matrix.performers), list(matrix.emotions),
                            matrix.feature_names, out, audit)


def emotion_groups(matrix, feature):
    """Column values grouped by emotion, in canonical emotion order."""
    col = matrix.column(feature)
    emotions = np.array(matrix.emotions)
    return [col[emotions == e] for e in EMOTIONS if np.any(emotions == e)]


def save_matrix_csv(matrix, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["performer", "emotion", *matrix.feature_names])
        for i in range(len(matrix)):
            writer.writerow([matrix.performers[i], matrix.emotions[i],
                             *(f"{v:.9g}" for v in matrix.values[i])])


def load_matrix_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[:2] != ["performer", "emotion"]:
            raise SchemaError(f"{path}: expected header performer,emotion,...")
        names = tuple(header[2:])
        performers, emotions, rows = [], [], []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise SchemaError(f"{path}:{lineno}: expected {len(header)} columns")
            performers.append(row[0])
            emotions.append(row[1])
            rows.append([float(x) for x in row[2:]])
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    return LabeledMatrix(performers, emotions, names, np.array(rows))


def save_matrix_json(matrix, path):
    doc = {
        "feature_names": list(matrix.feature_names),
        "rows": [
            {"performer": matrix.performers[i], "emotion": matrix.emotions[i],
             "features": {n: matrix.values[i, j]
                          for j, n in enumerate(matrix.feature_names)}}
            for i in range(len(matrix))
        ],
    }
    if isinstance(matrix, NormalizedMatrix):
        doc["normalization_audit"] = [
            {"feature": f, "scope": s, "mean": m, "sd": sd}
            for f, s, m, sd in matrix.audit
        ]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
