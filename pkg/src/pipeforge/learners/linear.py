"""Logistic regression (full-batch gradient descent) and Gaussian naive Bayes.

Both kinds binarize labels at strictly greater than 0.5 and score with
the positive-class probability. When all binarized labels agree the
model degrades to a Laplace-smoothed constant prior; that is reported as
a warning, not a failure.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np

from pipeforge.learners.base import (
    DegenerateLabelsWarning,
    MinMaxScaler,
    ModelKind,
    Predictor,
    TrainingSet,
    binarize_labels,
    check_hyper,
    smoothed_prior,
)

LOGISTIC_DEFAULTS = {
    "learning_rate": 0.1,
    "l2": 1e-3,
    "max_iter": 2000,
    "tol": 1e-6,
}

GNB_DEFAULTS = {"var_smoothing": 1e-9}


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def logistic_loss_and_grad(
    w: np.ndarray, X: np.ndarray, y: np.ndarray, l2: float
) -> tuple[float, np.ndarray]:
    """Mean cross-entropy with L2 penalty on the non-bias weights.

    ``X`` must already carry the bias column (last). Exposed so the
    analytic gradient can be checked against finite differences.
    """
    n = X.shape[0]
    z = X @ w
    p = _sigmoid(z)
    eps = 1e-12
    ce = -np.mean(y * np.log(p + eps) + (1.0 - y) * np.log(1.0 - p + eps))
    penalty = 0.5 * l2 * float(np.dot(w[:-1], w[:-1]))
    grad = X.T @ (p - y) / n
    grad[:-1] += l2 * w[:-1]
    return ce + penalty, grad


@dataclass
class LogisticRegressionPredictor(Predictor):
    weights: np.ndarray = field(default_factory=lambda: np.zeros(0))
    constant: Optional[float] = None

    def fit(self, training: TrainingSet) -> "LogisticRegressionPredictor":
        self.scaler = MinMaxScaler.fit(training.X)
        X = self.scaler.transform(training.X)
        y = binarize_labels(training.y)
        if y.min() == y.max():
            warnings.warn(
                "all binarized labels identical; logistic regression reduced "
                "to the class prior",
                DegenerateLabelsWarning,
            )
            self.constant = smoothed_prior(y)
            self.weights = np.zeros(X.shape[1] + 1)
            return self
        Xb = np.hstack([X, np.ones((X.shape[0], 1))])
        w = np.zeros(Xb.shape[1])
        lr = float(self.hyper["learning_rate"])
        l2 = float(self.hyper["l2"])
        tol = float(self.hyper["tol"])
        for _ in range(int(self.hyper["max_iter"])):
            _, grad = logistic_loss_and_grad(w, Xb, y, l2)
            if float(np.linalg.norm(grad)) < tol:
                break
            w = w - lr * grad
        self.weights = w
        return self

    def coefficients(self) -> np.ndarray:
        """Feature weights without the bias term."""
        return self.weights[:-1]

    def _score_scaled(self, X: np.ndarray) -> np.ndarray:
        if self.constant is not None:
            return np.full(X.shape[0], self.constant)
        Xb = np.hstack([X, np.ones((X.shape[0], 1))])
        return _sigmoid(Xb @ self.weights)

    def params_dict(self) -> dict:
        return {"weights": self.weights.tolist(), "constant": self.constant}

    def load_params(self, doc: Mapping) -> None:
        self.weights = np.asarray(doc["weights"], dtype=np.float64)
        self.constant = doc.get("constant")


@dataclass
class GaussianNaiveBayesPredictor(Predictor):
    class_prior: np.ndarray = field(default_factory=lambda: np.zeros(2))
    theta: np.ndarray = field(default_factory=lambda: np.zeros((2, 0)))
    var: np.ndarray = field(default_factory=lambda: np.zeros((2, 0)))
    constant: Optional[float] = None

    def fit(self, training: TrainingSet) -> "GaussianNaiveBayesPredictor":
        self.scaler = MinMaxScaler.fit(training.X)
        X = self.scaler.transform(training.X)
        y = binarize_labels(training.y)
        if y.min() == y.max():
            warnings.warn(
                "all binarized labels identical; naive Bayes reduced to the "
                "class prior",
                DegenerateLabelsWarning,
            )
            self.constant = smoothed_prior(y)
            return self
        smoothing = float(self.hyper["var_smoothing"]) * float(
            np.max(X.var(axis=0)) if X.shape[1] else 1.0
        )
        smoothing = max(smoothing, 1e-12)
        d = X.shape[1]
        self.theta = np.zeros((2, d))
        self.var = np.zeros((2, d))
        self.class_prior = np.zeros(2)
        for cls in (0, 1):
            rows = X[y == cls]
            self.class_prior[cls] = rows.shape[0] / X.shape[0]
            self.theta[cls] = rows.mean(axis=0)
            self.var[cls] = rows.var(axis=0) + smoothing
        return self

    def _log_likelihood(self, X: np.ndarray, cls: int) -> np.ndarray:
        diff = X - self.theta[cls]
        return -0.5 * np.sum(
            np.log(2.0 * np.pi * self.var[cls]) + diff * diff / self.var[cls],
            axis=1,
        )

    def _score_scaled(self, X: np.ndarray) -> np.ndarray:
        if self.constant is not None:
            return np.full(X.shape[0], self.constant)
        log0 = self._log_likelihood(X, 0) + np.log(self.class_prior[0])
        log1 = self._log_likelihood(X, 1) + np.log(self.class_prior[1])
        return _sigmoid(log1 - log0)

    def params_dict(self) -> dict:
        return {
            "class_prior": self.class_prior.tolist(),
            "theta": self.theta.tolist(),
            "var": self.var.tolist(),
            "constant": self.constant,
        }

    def load_params(self, doc: Mapping) -> None:
        self.constant = doc.get("constant")
        self.class_prior = np.asarray(doc["class_prior"], dtype=np.float64)
        self.theta = np.asarray(doc["theta"], dtype=np.float64)
        self.var = np.asarray(doc["var"], dtype=np.float64)


def train_linear_kind(
    kind: ModelKind,
    training: TrainingSet,
    hyper: Optional[Mapping],
    seed: int,
):
    if kind is ModelKind.LOGISTIC_REGRESSION:
        resolved = check_hyper(hyper, LOGISTIC_DEFAULTS, kind)
        predictor = LogisticRegressionPredictor(
            kind=kind,
            feature_names=training.feature_names,
            seed=seed,
            hyper=resolved,
        )
    else:
        resolved = check_hyper(hyper, GNB_DEFAULTS, kind)
        predictor = GaussianNaiveBayesPredictor(
            kind=kind,
            feature_names=training.feature_names,
            seed=seed,
            hyper=resolved,
        )
    return predictor.fit(training)
