"""Evaluation of generated tables against the real ones.

Three views: a nearest-neighbor coverage score (diversity), per-column
histogram distances (marginal fidelity), and a train-on-synthetic /
test-on-real check with a small built-in logistic regression (downstream
usefulness). All distances live in the encoded space, where min-max scaling
and one-hot blocks put columns on comparable scales.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import expit

from .codec import ColumnScaler, encode, fit_scaler
from .errors import InputError, NonBinaryTarget, TooFewRealRows, WidthMismatch
from .schema import Table, TableSchema


@dataclass(frozen=True)
class CoverageConfig:
    k: int = 5  # neighbor count defining each real record's radius

    def __post_init__(self):
        if self.k < 1:
            raise InputError("k must be >= 1")


@dataclass
class EvalReport:
    coverage: float
    column_tv: dict[str, float] = field(default_factory=dict)
    tstr_f1: float | None = None
    identity_f1: float | None = None

    def to_json_dict(self) -> dict:
        return {
            "coverage": self.coverage,
            "column_tv": dict(self.column_tv),
            "tstr_f1": self.tstr_f1,
            "identity_f1": self.identity_f1,
        }

    def to_text_table(self) -> str:
        lines = [f"{'metric':<28}{'value':>12}"]
        lines.append(f"{'coverage':<28}{self.coverage:>12.4f}")
        for name, tv in self.column_tv.items():
            lines.append(f"{'tv[' + name + ']':<28}{tv:>12.4f}")
        if self.tstr_f1 is not None:
            lines.append(f"{'tstr_f1':<28}{self.tstr_f1:>12.4f}")
        if self.identity_f1 is not None:
            lines.append(f"{'identity_f1':<28}{self.identity_f1:>12.4f}")
        return "\n".join(lines)


def _block_min_dists(real: np.ndarray, fake: np.ndarray, workers: int) -> np.ndarray:
    """Per real row, the distance to the closest fake row."""
    blocks = max(workers, 1)
    splits = np.array_split(np.arange(real.shape[0]), blocks)

    def one(idx):
        return cdist(real[idx], fake).min(axis=1)

    if blocks == 1:
        return one(np.arange(real.shape[0]))
    with ThreadPoolExecutor(max_workers=blocks) as pool:
        parts = list(pool.map(one, splits))
    return np.concatenate(parts)


def coverage(real: np.ndarray, fake: np.ndarray,
             config: CoverageConfig | None = None, workers: int = 1) -> float:
    """Fraction of real records with a fake record inside their k-NN radius.

    The radius of a real record is its distance to the k-th nearest *other*
    real record (the query point itself is excluded, so duplicate-free data
    never gets a zero radius); a fake record exactly on the boundary counts
    as inside.
    """
    config = config or CoverageConfig()
    real = np.asarray(real, dtype=np.float64)
    fake = np.asarray(fake, dtype=np.float64)
    if real.ndim != 2 or fake.ndim != 2 or real.shape[1] != fake.shape[1]:
        raise WidthMismatch(real.shape[1] if real.ndim == 2 else -1,
                            fake.shape[1] if fake.ndim == 2 else -1)
    n = real.shape[0]
    if n <= config.k:
        raise TooFewRealRows(f"coverage needs more than k={config.k} real rows, got {n}")
    rr = cdist(real, real)
    np.fill_diagonal(rr, np.inf)
    radii = np.partition(rr, config.k - 1, axis=1)[:, config.k - 1]
    if fake.shape[0] == 0:
        return 0.0
    nearest_fake = _block_min_dists(real, fake, workers)
    return float(np.mean(nearest_fake <= radii))


def histogram_distance(real_col: np.ndarray, fake_col: np.ndarray, bins: int = 50) -> float:
    """Total-variation distance between histograms on shared bin edges."""
    if bins < 2:
        raise InputError("bins must be >= 2")
    real_col = np.asarray(real_col, dtype=np.float64)
    fake_col = np.asarray(fake_col, dtype=np.float64)
    lo = min(real_col.min(), fake_col.min())
    hi = max(real_col.max(), fake_col.max())
    if hi == lo:
        return 0.0  # all mass in both columns sits on one point
    edges = np.linspace(lo, hi, bins + 1)
    p, _ = np.histogram(real_col, bins=edges)
    q, _ = np.histogram(fake_col, bins=edges)
    p = p / p.sum()
    q = q / q.sum()
    return float(0.5 * np.abs(p - q).sum())


def category_frequency_distance(real_col, fake_col, categories) -> float:
    """Total-variation distance between category frequencies."""
    def freqs(col):
        col = list(col)
        total = len(col)
        return np.array([col.count(c) / total for c in categories])

    return float(0.5 * np.abs(freqs(real_col) - freqs(fake_col)).sum())


def column_distances(real: Table, fake: Table, bins: int = 50) -> dict[str, float]:
    """Per-column divergence map: histogram TV for numerical columns,
    frequency TV for categorical ones."""
    out = {}
    for col in real.schema.columns:
        if col.kind == "numerical":
            out[col.name] = histogram_distance(real.columns[col.name],
                                               fake.columns[col.name], bins)
        else:
            out[col.name] = category_frequency_distance(
                real.columns[col.name], fake.columns[col.name], col.categories
            )
    return out


def export_histogram(real_col, fake_col, bins: int = 50):
    """Shared-edge histogram masses as rows (bin_left, bin_right, real_mass,
    fake_mass), for external plotting."""
    real_col = np.asarray(real_col, dtype=np.float64)
    fake_col = np.asarray(fake_col, dtype=np.float64)
    lo = min(real_col.min(), fake_col.min())
    hi = max(real_col.max(), fake_col.max())
    if hi == lo:
        lo, hi = lo - 0.5, hi + 0.5
    edges = np.linspace(lo, hi, bins + 1)
    p, _ = np.histogram(real_col, bins=edges)
    q, _ = np.histogram(fake_col, bins=edges)
    p = p / max(p.sum(), 1)
    q = q / max(q.sum(), 1)
    return [(edges[i], edges[i + 1], p[i], q[i]) for i in range(bins)]


# --- built-in TSTR smoke check ---

_LOGREG_ITERS = 500
_LOGREG_L2 = 1e-3
_LOGREG_LR = 2.0


def _features_and_labels(table: Table, schema: TableSchema, scaler: ColumnScaler):
    target = schema.column(schema.target_column)
    feature_schema = TableSchema(
        columns=tuple(c for c in schema.columns if c.name != target.name)
    )
    feat_table = Table(feature_schema, {c.name: table.columns[c.name]
                                        for c in feature_schema.columns})
    X = encode(feat_table, scaler).data
    labels = np.array([target.categories.index(v) for v in table.columns[target.name]],
                      dtype=np.float64)
    return X, labels


def _fit_logistic(X: np.ndarray, y: np.ndarray):
    """Plain gradient descent on mean log-loss with L2 on the weights."""
    n, d = X.shape
    w = np.zeros(d)
    b = 0.0
    for _ in range(_LOGREG_ITERS):
        p = expit(X @ w + b)
        err = p - y
        gw = X.T @ err / n + _LOGREG_L2 * w
        gb = float(err.mean())
        w -= _LOGREG_LR * gw
        b -= _LOGREG_LR * gb
    return w, b


def binary_f1(y_true: np.ndarray, y_pred: np.ndarray) -> float:
    """F1 = 2 P R / (P + R) with the usual zero-division convention."""
    tp = float(np.sum((y_pred == 1) & (y_true == 1)))
    fp = float(np.sum((y_pred == 1) & (y_true == 0)))
    fn = float(np.sum((y_pred == 0) & (y_true == 1)))
    if 2 * tp + fp + fn == 0:
        return 0.0
    return 2 * tp / (2 * tp + fp + fn)


@dataclass
class TstrResult:
    tstr_f1: float
    identity_f1: float


def tstr_smoke(real_train: Table, real_test: Table, fake: Table,
               schema: TableSchema) -> TstrResult:
    """Fit the built-in classifier on fake data, score binary F1 on real
    test rows; the same fit on real training rows gives the reference.

    The positive class is the second vocabulary entry of the target column.
    """
    if schema.task != "binary" or schema.target_column is None:
        raise NonBinaryTarget("the built-in TSTR check needs a binary target")
    target = schema.column(schema.target_column)
    if len(target.categories) != 2:
        raise NonBinaryTarget(f"target {target.name!r} has {len(target.categories)} categories")
    if real_train.n_rows == 0 or real_test.n_rows == 0 or fake.n_rows == 0:
        raise InputError("TSTR needs nonempty train, test, and fake tables")

    def fit_and_score(train_table: Table) -> float:
        feature_cols = [c for c in schema.columns if c.name != target.name]
        scaler = fit_scaler(Table(
            TableSchema(columns=tuple(feature_cols)),
            {c.name: train_table.columns[c.name] for c in feature_cols},
        ))
        X_tr, y_tr = _features_and_labels(train_table, schema, scaler)
        X_te, y_te = _features_and_labels(real_test, schema, scaler)
        w, b = _fit_logistic(X_tr, y_tr)
        pred = (expit(X_te @ w + b) >= 0.5).astype(np.float64)
        return binary_f1(y_te, pred)

    return TstrResult(tstr_f1=fit_and_score(fake), identity_f1=fit_and_score(real_train))
