"""Distribution-factor predictors behind one interface.

Four updating strategies: CONST (uniform over members), MER (most recent
realized factors), KNN (mean of the nearest historical operating points),
and the graph network.  Every predictor returns factors on the unit
simplex per DERA, whatever its raw output looked like.
"""

from __future__ import annotations

import hashlib
import logging
from collections import deque
from dataclasses import dataclass

import numpy as np

from . import stgcn
from .caseio import CaseError, SystemCase
from .rted import DfVector

log = logging.getLogger(__name__)

DEFAULT_KNN_K = 5


@dataclass
class HistoryRecord:
    """What one settled interval leaves behind for the predictors."""

    realized_df: DfVector
    loads: np.ndarray                   # bus demand vector served that interval
    dera_dispatch: dict[str, float]     # instructed aggregate per DERA
    tder_output: dict[str, float]       # realized member outputs


class DfHistory:
    """Chronological ring buffer of settled intervals."""

    def __init__(self, capacity: int = 288):
        if capacity < 1:
            raise CaseError("history capacity must be positive")
        self._buf: deque[HistoryRecord] = deque(maxlen=capacity)

    def append(self, record: HistoryRecord) -> None:
        self._buf.append(record)

    def __len__(self) -> int:
        return len(self._buf)

    def __getitem__(self, i):
        return self._buf[i]

    def __iter__(self):
        return iter(self._buf)

    @property
    def capacity(self) -> int:
        return self._buf.maxlen


@dataclass
class DfPrediction:
    dfs: DfVector
    strategy: str
    features_digest: str = ""

    def __post_init__(self):
        for a, v in self.dfs.values.items():
            if abs(v.sum() - 1.0) > 1e-9 or (v < 0).any():
                raise CaseError(f"prediction for {a} leaves the simplex")


def _digest(*arrays) -> str:
    h = hashlib.sha256()
    for arr in arrays:
        h.update(np.ascontiguousarray(arr, dtype=float).tobytes())
    return h.hexdigest()[:16]


def project_simplex(raw: np.ndarray) -> np.ndarray:
    """Clamp negatives to zero and renormalize; all-zero goes uniform.

    Keeps exact zeros a predictor emits (a softmax would not).
    """
    v = np.maximum(np.asarray(raw, dtype=float), 0.0)
    s = v.sum()
    if s <= 0.0 or not np.isfinite(s):
        return np.full(v.shape, 1.0 / v.size)
    v = v / s
    # float roundoff: pin the sum to exactly one via the largest entry
    v[np.argmax(v)] += 1.0 - v.sum()
    return v


def predict_const(case: SystemCase) -> DfPrediction:
    """Fixed factors: every member gets 1/|members|."""
    return DfPrediction(DfVector.uniform(case), "const")


def predict_mer(case: SystemCase, history: DfHistory) -> DfPrediction:
    """Most recent realized factors; CONST fallback on an empty history."""
    if len(history) == 0:
        log.warning("mer: empty history, falling back to const")
        return DfPrediction(DfVector.uniform(case), "mer")
    last = history[-1].realized_df
    vals = {a.id: last.phi(a.id).copy() for a in case.deras}
    return DfPrediction(DfVector(vals), "mer",
                        _digest(*(vals[a.id] for a in case.deras)))


def _knn_features(case: SystemCase, history: DfHistory, current_loads: np.ndarray):
    """Feature rows: (bus loads at tau, DERA dispatch at tau-1) per record.

    The oldest record has no predecessor in the buffer; its previous
    dispatch is taken as zero so every record contributes a row.
    """
    dera_ids = [a.id for a in case.deras]
    rows, targets = [], []
    for i in range(len(history)):
        rec = history[i]
        if i > 0:
            prev_disp = [history[i - 1].dera_dispatch.get(a, 0.0) for a in dera_ids]
        else:
            prev_disp = [0.0] * len(dera_ids)
        rows.append(np.concatenate([rec.loads, np.array(prev_disp)]))
        targets.append(rec.realized_df)
    query = np.concatenate([
        np.asarray(current_loads, dtype=float),
        np.array([history[-1].dera_dispatch.get(a, 0.0) for a in dera_ids]),
    ])
    return np.array(rows), targets, query


def predict_knn(case: SystemCase, history: DfHistory, current_loads: np.ndarray,
                k: int = DEFAULT_KNN_K) -> DfPrediction:
    """Mean realized factors of the k nearest historical operating points.

    Distances are Euclidean over z-scored (load vector, previous DERA
    dispatch) features; zero-variance dimensions are dropped.
    """
    if k < 1:
        raise CaseError("k must be positive")
    if len(history) < k:
        raise CaseError(f"knn needs at least {k} history records")
    rows, targets, query = _knn_features(case, history, current_loads)
    mean = rows.mean(axis=0)
    std = rows.std(axis=0)
    keep = std > 1e-12
    if not keep.any():  # all-degenerate history: every record equidistant
        keep = np.zeros_like(keep)
        keep[0] = True
        std[0] = 1.0
    z_rows = (rows[:, keep] - mean[keep]) / std[keep]
    z_query = (query[keep] - mean[keep]) / std[keep]
    d2 = ((z_rows - z_query) ** 2).sum(axis=1)
    order = np.lexsort((np.arange(len(d2)), d2))[:k]
    vals = {}
    for a in case.deras:
        avg = np.mean([targets[i].phi(a.id) for i in order], axis=0)
        vals[a.id] = project_simplex(avg)
    return DfPrediction(DfVector(vals), "knn", _digest(query))


def predict_stgcn(model: stgcn.StgcnModel, window: stgcn.GraphSampleWindow,
                  case: SystemCase) -> DfPrediction:
    """Forward pass plus per-DERA simplex projection of the raw scores."""
    scores = stgcn.forward(model, window)
    vals = {}
    pos = 0
    for a in case.deras:
        vals[a.id] = project_simplex(scores[pos:pos + len(a.tders)])
        pos += len(a.tders)
    return DfPrediction(DfVector(vals), "stgcn",
                        _digest(window.load_der, window.gen_feat))


def df_accuracy(predicted: DfVector, oracle: DfVector) -> float:
    """100 * (1 - mean total-variation distance) across DERAs, in [0, 100]."""
    ids = sorted(predicted.values)
    if sorted(oracle.values) != ids:
        raise CaseError("accuracy needs identical DERA structures")
    if not ids:
        return 100.0
    tv = [0.5 * np.abs(predicted.phi(a) - oracle.phi(a)).sum() for a in ids]
    return 100.0 * (1.0 - float(np.mean(tv)))
