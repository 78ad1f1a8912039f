"""Robust scaling, one-class classifiers and EER threshold selection.

All classifiers report anomaly scores oriented so that larger means more
anomalous. Fitting uses scikit-learn; scoring runs from the extracted
state (location/precision, support vectors, tree arrays) so that a model
restored from JSON scores exactly like the freshly fitted one.
"""

from __future__ import annotations

import enum
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np
from sklearn.covariance import MinCovDet
from sklearn.ensemble import IsolationForest
from sklearn.neighbors import LocalOutlierFactor
from sklearn.svm import OneClassSVM

from planktonad.dataset import SampleLabel
from planktonad.errors import CapacityError, DomainError, ShapeError

DEFAULT_CONTAMINATION = 0.01
LOF_NEIGHBORS = 20
IF_TREES = 100
IF_SUBSAMPLE = 256
SHRINKAGE = 1e-3


class Classifier(str, enum.Enum):
    RobustCovariance = "RobustCovariance"
    OCSVM = "OCSVM"
    IsolationForest = "IsolationForest"
    LOF = "LOF"


ALL_CLASSIFIERS = tuple(Classifier)

_ALIASES = {"rc": "RobustCovariance", "ocsvm": "OCSVM", "oc-svm": "OCSVM", "if": "IsolationForest",
            "lof": "LOF"}


def classifier_kind(kind: Classifier | str) -> Classifier:
    if isinstance(kind, Classifier):
        return kind
    try:
        return Classifier(_ALIASES.get(str(kind).lower(), kind))
    except ValueError:
        raise DomainError(f"unknown classifier {kind!r}; expected one of "
                          f"{[c.value for c in Classifier]}") from None


# --------------------------------------------------------------------------
# robust scaling


@dataclass(frozen=True)
class RobustScaler:
    median: np.ndarray
    iqr: np.ndarray

    def to_json(self) -> dict:
        return {"median": self.median.tolist(), "iqr": self.iqr.tolist()}

    @classmethod
    def from_json(cls, doc: dict) -> RobustScaler:
        return cls(np.asarray(doc["median"], float), np.asarray(doc["iqr"], float))


def fit_scaler(features: np.ndarray) -> RobustScaler:
    """Per-column median and interquartile range (linear-interpolation quantiles).

    A zero IQR is replaced by 1 so that constant columns are only centred.
    """
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0 or x.shape[1] == 0:
        raise DomainError(f"need a non-empty 2-D feature matrix, got shape {x.shape}")
    if x.shape[0] < 2:
        raise DomainError("robust scaling needs at least two rows")
    q1, med, q3 = np.percentile(x, [25, 50, 75], axis=0, method="linear")
    iqr = q3 - q1
    iqr = np.where(iqr > 0, iqr, 1.0)
    return RobustScaler(med, iqr)


def apply_scaler(scaler: RobustScaler, features: np.ndarray) -> np.ndarray:
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != scaler.median.shape[0]:
        raise ShapeError(f"expected {scaler.median.shape[0]} feature columns, got shape {x.shape}")
    return (x - scaler.median) / scaler.iqr


# --------------------------------------------------------------------------
# classifiers


def _avg_path_length(n: np.ndarray) -> np.ndarray:
    n = np.asarray(n, dtype=np.float64)
    out = np.zeros_like(n)
    out[n == 2] = 1.0
    big = n > 2
    out[big] = 2.0 * (np.log(n[big] - 1.0) + np.euler_gamma) - 2.0 * (n[big] - 1.0) / n[big]
    return out


def _tree_depths(tree: dict, x: np.ndarray) -> np.ndarray:
    left, right = tree["children_left"], tree["children_right"]
    feature, threshold = tree["feature"], tree["threshold"]
    node = np.zeros(len(x), dtype=np.int64)
    depth = np.zeros(len(x))
    active = left[node] != -1
    while active.any():
        idx = np.nonzero(active)[0]
        cur = node[idx]
        go_left = x[idx, feature[cur]] <= threshold[cur]
        node[idx] = np.where(go_left, left[cur], right[cur])
        depth[idx] += 1.0
        active = left[node] != -1
    return depth + _avg_path_length(tree["n_node_samples"][node])


@dataclass
class OneClassModel:
    """A fitted one-class classifier; ``scores`` larger = more anomalous."""

    kind: Classifier
    n_features: int
    contamination: float = DEFAULT_CONTAMINATION
    params: dict[str, Any] = field(default_factory=dict)
    state: dict[str, Any] = field(default_factory=dict)
    _lof: LocalOutlierFactor | None = field(default=None, repr=False)

    def scores(self, features: np.ndarray) -> np.ndarray:
        x = np.asarray(features, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.n_features:
            raise ShapeError(f"expected {self.n_features} feature columns, got shape {x.shape}")
        kind, st = self.kind, self.state
        if kind is Classifier.RobustCovariance:
            centred = x - st["location"]
            d2 = np.einsum("ij,jk,ik->i", centred, st["precision"], centred)
            return np.sqrt(np.maximum(d2, 0.0))
        if kind is Classifier.OCSVM:
            sv = st["support_vectors"]
            sq = (x * x).sum(1)[:, None] - 2.0 * x @ sv.T + (sv * sv).sum(1)[None, :]
            decision = np.exp(-st["gamma"] * np.maximum(sq, 0.0)) @ st["dual_coef"] + st["intercept"]
            return -decision
        if kind is Classifier.IsolationForest:
            x32 = x.astype(np.float32)
            depths = np.zeros(len(x))
            for tree, feats in zip(st["trees"], st["features"]):
                depths += _tree_depths(tree, x32[:, feats])
            denom = len(st["trees"]) * _avg_path_length(np.array([st["max_samples"]]))[0]
            if denom == 0:
                return np.ones(len(x))
            return 2.0 ** (-depths / denom)
        if self._lof is None:
            self._lof = _fit_lof(st["reference"], st["n_neighbors"], self.contamination)
        return -self._lof.score_samples(x)

    # JSON persistence -----------------------------------------------------

    def to_json(self) -> dict:
        def enc(v):
            if isinstance(v, np.ndarray):
                return {"__array__": v.tolist(), "dtype": str(v.dtype)}
            if isinstance(v, list):
                return [enc(i) for i in v]
            if isinstance(v, dict):
                return {k: enc(i) for k, i in v.items()}
            return v

        return {"kind": self.kind.value, "n_features": self.n_features, "contamination": self.contamination,
                "params": self.params, "state": enc(self.state)}

    @classmethod
    def from_json(cls, doc: dict) -> OneClassModel:
        def dec(v):
            if isinstance(v, dict) and "__array__" in v:
                return np.asarray(v["__array__"], dtype=v["dtype"])
            if isinstance(v, list):
                return [dec(i) for i in v]
            if isinstance(v, dict):
                return {k: dec(i) for k, i in v.items()}
            return v

        return cls(Classifier(doc["kind"]), int(doc["n_features"]), float(doc["contamination"]),
                   dict(doc["params"]), dec(doc["state"]))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json()), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> OneClassModel:
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def _fit_lof(reference: np.ndarray, k: int, contamination: float) -> LocalOutlierFactor:
    return LocalOutlierFactor(n_neighbors=k, novelty=True, contamination=contamination).fit(reference)


def _shrink(cov: np.ndarray) -> np.ndarray:
    d = cov.shape[0]
    return (1.0 - SHRINKAGE) * cov + SHRINKAGE * (np.trace(cov) / d if np.trace(cov) > 0 else 1.0) * np.eye(d)


def _robust_covariance(x: np.ndarray, seed: int) -> dict[str, Any]:
    n, d = x.shape
    location = cov = support = None
    if n > d + 1:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            try:
                mcd = MinCovDet(random_state=seed).fit(x)
                location, cov, support = mcd.location_, mcd.covariance_, mcd.support_
            except (ValueError, np.linalg.LinAlgError):
                pass
    if location is None:
        location = x.mean(0)
        cov = np.cov(x, rowvar=False, bias=True).reshape(d, d)
        support = np.ones(n, dtype=bool)
    shrunk = False
    if np.linalg.cond(cov) > 1e10:
        cov, shrunk = _shrink(cov), True
    return {"location": location, "covariance": cov, "precision": np.linalg.pinv(cov, hermitian=True),
            "support": support, "shrunk": shrunk}


def fit_one_class(kind: Classifier | str, features: np.ndarray, contamination: float = DEFAULT_CONTAMINATION,
                  seed: int = 0, n_neighbors: int = LOF_NEIGHBORS, n_trees: int = IF_TREES) -> OneClassModel:
    """Fit a one-class classifier on (scaled) OK features only."""
    kind = classifier_kind(kind)
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise CapacityError(f"need a non-empty 2-D feature matrix, got shape {x.shape}")
    if not 0.0 < contamination <= 0.5:
        raise DomainError(f"contamination must lie in (0, 0.5], got {contamination}")
    n, d = x.shape
    if kind is Classifier.RobustCovariance:
        if n < 2:
            raise CapacityError("robust covariance needs at least two samples")
        return OneClassModel(kind, d, contamination, {"seed": seed}, _robust_covariance(x, seed))
    if kind is Classifier.OCSVM:
        if n < 2:
            raise CapacityError("one-class SVM needs at least two samples")
        svm = OneClassSVM(kernel="rbf", gamma="scale", nu=contamination).fit(x)
        state = {"support_vectors": svm.support_vectors_.astype(np.float64),
                 "dual_coef": svm.dual_coef_[0].astype(np.float64),
                 "intercept": float(svm.intercept_[0]), "gamma": float(svm._gamma)}
        return OneClassModel(kind, d, contamination, {"kernel": "rbf", "nu": contamination}, state)
    if kind is Classifier.IsolationForest:
        forest = IsolationForest(n_estimators=n_trees, max_samples=min(IF_SUBSAMPLE, n),
                                 contamination=contamination, random_state=seed).fit(x)
        trees = [{"children_left": t.tree_.children_left.astype(np.int64),
                  "children_right": t.tree_.children_right.astype(np.int64),
                  "feature": t.tree_.feature.astype(np.int64),
                  "threshold": t.tree_.threshold.astype(np.float64),
                  "n_node_samples": t.tree_.n_node_samples.astype(np.int64)} for t in forest.estimators_]
        state = {"trees": trees, "features": [np.asarray(f, dtype=np.int64) for f in forest.estimators_features_],
                 "max_samples": int(forest.max_samples_)}
        return OneClassModel(kind, d, contamination, {"n_trees": n_trees, "seed": seed}, state)
    if n <= n_neighbors:
        raise CapacityError(f"LOF with k={n_neighbors} needs more than {n_neighbors} samples, got {n}")
    lof = _fit_lof(x, n_neighbors, contamination)
    return OneClassModel(kind, d, contamination, {"n_neighbors": n_neighbors},
                         {"reference": x.copy(), "n_neighbors": n_neighbors}, lof)


def anomaly_scores(model: OneClassModel, features: np.ndarray) -> np.ndarray:
    scores = model.scores(features)
    if not np.all(np.isfinite(scores)):
        raise DomainError("classifier produced non-finite scores")
    return scores


# --------------------------------------------------------------------------
# threshold selection


@dataclass(frozen=True)
class DecisionThreshold:
    value: float
    fpr: float
    fnr: float
    source: str = "validation"


def nok_mask(labels: Sequence) -> np.ndarray:
    """Boolean NOK indicator from SampleLabel / 'OK'/'NOK' / bool labels."""
    out = []
    for lab in labels:
        if isinstance(lab, (bool, np.bool_)):
            out.append(bool(lab))
        else:
            out.append(SampleLabel(lab.value if isinstance(lab, SampleLabel) else str(lab)) is SampleLabel.NOK)
    return np.asarray(out, dtype=bool)


def error_rates(scores: np.ndarray, nok: np.ndarray, threshold: float) -> tuple[float, float]:
    """(FPR, FNR) at a threshold: OK samples flagged NOK, NOK samples passed as OK."""
    flagged = scores > threshold
    fpr = float(np.mean(flagged[~nok]))
    fnr = float(np.mean(~flagged[nok]))
    return fpr, fnr


def candidate_thresholds(scores: np.ndarray) -> np.ndarray:
    u = np.unique(np.asarray(scores, dtype=np.float64))
    return np.concatenate([[-math.inf], (u[:-1] + u[1:]) / 2.0, [math.inf]])


def select_threshold_eer(scores: Sequence[float], labels: Sequence, source: str = "validation"
                         ) -> DecisionThreshold:
    """Equal-error-rate threshold: minimise |FPR - FNR| over all midpoints of
    adjacent distinct scores and +-inf; ties go to lower FPR, then lower
    threshold. A sample is flagged NOK when its score exceeds the threshold."""
    s = np.asarray(scores, dtype=np.float64)
    nok = nok_mask(labels)
    if len(s) != len(nok):
        raise ShapeError(f"{len(s)} scores but {len(nok)} labels")
    if nok.all() or not nok.any():
        raise DomainError("threshold selection needs both OK and NOK samples")
    cands = candidate_thresholds(s)
    flagged = s[None, :] > cands[:, None]
    fpr = flagged[:, ~nok].mean(1)
    fnr = (~flagged[:, nok]).mean(1)
    gap = np.abs(fpr - fnr)
    best = np.lexsort((cands, fpr, gap))[0]
    return DecisionThreshold(float(cands[best]), float(fpr[best]), float(fnr[best]), source)


def classify(scores: Sequence[float], threshold: DecisionThreshold | float) -> list[SampleLabel]:
    """score > threshold -> NOK, otherwise OK (ties are OK)."""
    t = threshold.value if isinstance(threshold, DecisionThreshold) else float(threshold)
    return [SampleLabel.NOK if s > t else SampleLabel.OK for s in np.asarray(scores, dtype=np.float64)]
