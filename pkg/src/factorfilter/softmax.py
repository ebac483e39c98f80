"""Multinomial logistic regression trained by full-batch gradient descent.

This is the standalone probe classifier used to audit filtered outputs
and to judge downstream task accuracy.  Zero initialization plus a
convex loss makes every fit bit-reproducible without any seed.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .validation import check_feature_matrix, check_label_vector


def softmax(z: np.ndarray) -> np.ndarray:
    """Row-wise softmax, shifted for numerical stability."""
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def one_hot(y: np.ndarray, k: int) -> np.ndarray:
    y = np.asarray(y, dtype=np.int64).ravel()
    out = np.zeros((y.shape[0], k))
    out[np.arange(y.shape[0]), y] = 1.0
    return out


class SoftmaxRegression(BaseEstimator):
    """Linear softmax classifier with monotone step-halving descent.

    The learning rate only ever shrinks: any proposed step that would
    increase the regularized loss is rejected and the rate halved, so
    the recorded loss history is non-increasing.
    """

    def __init__(
        self,
        n_classes: int,
        lr: float = 1.0,
        epochs: int = 300,
        l2: float = 1e-4,
        tol: float = 1e-10,
    ):
        self.n_classes = n_classes
        self.lr = lr
        self.epochs = epochs
        self.l2 = l2
        self.tol = tol

    def _loss(self, X, Y, W, b):
        p = softmax(X @ W + b)
        ce = -np.mean(np.sum(Y * np.log(np.clip(p, 1e-300, None)), axis=1))
        return ce + 0.5 * self.l2 * float((W * W).sum()), p

    def fit(self, X, y) -> "SoftmaxRegression":
        X = check_feature_matrix(X, name="X")
        y = check_label_vector(y, self.n_classes, name="y")
        n, d = X.shape
        Y = one_hot(y, self.n_classes)
        W = np.zeros((d, self.n_classes))
        b = np.zeros(self.n_classes)
        lr = float(self.lr)
        loss, p = self._loss(X, Y, W, b)
        history = [loss]
        for _ in range(self.epochs):
            grad_w = X.T @ (p - Y) / n + self.l2 * W
            grad_b = (p - Y).sum(axis=0) / n
            while True:
                w_new = W - lr * grad_w
                b_new = b - lr * grad_b
                new_loss, new_p = self._loss(X, Y, w_new, b_new)
                if new_loss <= loss + 1e-12:
                    break
                lr *= 0.5
                if lr < 1e-12:
                    w_new, b_new, new_loss, new_p = W, b, loss, p
                    break
            improved = loss - new_loss
            W, b, loss, p = w_new, b_new, new_loss, new_p
            history.append(loss)
            if improved < self.tol:
                break
        self.coef_ = W
        self.intercept_ = b
        self.loss_history_ = history
        return self

    def _check_fitted(self):
        if not hasattr(self, "coef_"):
            raise NotFittedError(
                "this SoftmaxRegression instance is not fitted yet; "
                "call fit() first"
            )

    def predict_proba(self, X) -> np.ndarray:
        self._check_fitted()
        X = check_feature_matrix(X, feature_dim=self.coef_.shape[0], name="X")
        return softmax(X @ self.coef_ + self.intercept_)

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.predict_proba(X), axis=1)

    def score(self, X, y) -> float:
        y = check_label_vector(y, self.n_classes, name="y")
        return float(np.mean(self.predict(X) == y))
