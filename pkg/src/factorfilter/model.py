"""Jointly trained factor model: classifiers, codebooks, residual channel.

The model maps a feature vector to (a) one softmax classifier head per
schema attribute, (b) a per-class codebook entry for every attribute in
the disentangle set, and (c) a low-dimensional residual that captures
whatever the codebooks do not.  A linear decoder reconstructs the input
from codebook entries plus residual, so editing the factor codes or the
residual and decoding again yields a manipulated version of the sample.

Training minimizes

    sum_a CE_a  +  MSE(decoded, x)  +  beta * overlap(residual, labels)

by full-batch gradient descent with persistent step halving: a step that
would increase the loss is rejected and the rate halved, which makes the
recorded loss history non-increasing.  The overlap term is the mean
squared Pearson correlation between residual coordinates and the one-hot
labels of the disentangled attributes; it pushes label information out
of the residual and into the codebook path.  During training the
codebook path is teacher forced with true labels; at inference it uses
the heads' predictions.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .fileio import atomic_write_text
from .rng import stream
from .schema import AttributeSchema, Dataset
from .softmax import one_hot, softmax
from .validation import check_feature_matrix, check_label_matrix

_MODEL_FORMAT = "factor-model-v1"


class TrainingError(RuntimeError):
    """Raised when a loss term degenerates during training."""


@dataclass(frozen=True)
class EncodedBatch:
    """Predicted labels for every schema attribute plus the residual."""

    labels: np.ndarray
    residual: np.ndarray

    @property
    def n_samples(self) -> int:
        return self.labels.shape[0]


def _overlap_penalty(Z: np.ndarray, H: np.ndarray, with_grad: bool):
    """Mean squared correlation between residual coords and one-hot columns.

    Pairs where either side is constant in the batch carry no correlation
    and contribute zero, but still count toward the pair total so the
    penalty stays in [0, 1].
    """
    n, q = Z.shape
    k = H.shape[1]
    Zc = Z - Z.mean(axis=0)
    Hc = H - H.mean(axis=0)
    sz = np.sqrt((Zc * Zc).mean(axis=0))
    sh = np.sqrt((Hc * Hc).mean(axis=0))
    valid = np.outer(sz > 1e-12, sh > 1e-12)
    denom = np.outer(sz, sh)
    denom[~valid] = 1.0
    rho = np.where(valid, (Zc.T @ Hc) / (n * denom), 0.0)
    pairs = q * k
    penalty = float((rho * rho).sum() / pairs)
    if not with_grad:
        return penalty, None
    a = np.where(valid, rho / denom, 0.0)
    s = (rho * rho).sum(axis=1)
    inv_var = np.where(sz > 1e-12, 1.0 / np.maximum(sz, 1e-300) ** 2, 0.0)
    dZ = (2.0 / (pairs * n)) * (Hc @ a.T - Zc * (s * inv_var)[None, :])
    return penalty, dZ


class FactorModel(BaseEstimator):
    """Linear disentangled factor model over a fixed attribute schema.

    Parameters
    ----------
    schema : the attribute universe; a classifier head is trained for
        every attribute in it.
    disentangle : names of the attributes that get codebooks and whose
        labels the residual is penalized for carrying.
    factor_dim : codebook entry width per attribute.
    residual_dim : residual channel width.
    beta : weight of the residual/label overlap penalty.
    lr, epochs, tol : gradient-descent controls; lr only ever shrinks.
    init_scale, seed : Gaussian init scale and its stream seed.
    """

    def __init__(
        self,
        schema: AttributeSchema,
        disentangle: tuple[str, ...],
        factor_dim: int = 8,
        residual_dim: int = 16,
        beta: float = 1.0,
        lr: float = 4.0,
        epochs: int = 200,
        tol: float = 1e-10,
        init_scale: float = 0.01,
        seed: int = 0,
    ):
        self.schema = schema
        self.disentangle = tuple(disentangle)
        self.factor_dim = factor_dim
        self.residual_dim = residual_dim
        self.beta = beta
        self.lr = lr
        self.epochs = epochs
        self.tol = tol
        self.init_scale = init_scale
        self.seed = seed
        if not self.disentangle:
            raise ValueError("disentangle set must not be empty")
        seen = set()
        for name in self.disentangle:
            schema.index(name)  # raises KeyError for unknown names
            if name in seen:
                raise ValueError(f"duplicate attribute in disentangle set: {name!r}")
            seen.add(name)
        # canonical order: schema order, regardless of how names were given.
        # Keep the caller's tuple when it is already canonical so clone()
        # sees constructor arguments stored unmodified.
        canon = tuple(n for n in schema.names if n in seen)
        if canon != self.disentangle:
            self.disentangle = canon

    # -- parameter handling -------------------------------------------------

    @property
    def _dis_indices(self) -> tuple[int, ...]:
        return tuple(self.schema.index(n) for n in self.disentangle)

    def initialize(self, feature_dim: int) -> None:
        """Draw fresh Gaussian parameters without training."""
        cards = self.schema.cardinalities
        n_codes = len(self.disentangle) * self.factor_dim
        params: dict[str, np.ndarray] = {}

        def init(name, shape):
            g = stream(self.seed, "init", name)
            params[name] = self.init_scale * g.standard_normal(shape)

        for a, attr in enumerate(self.schema.attributes):
            init(f"head_W_{attr.name}", (feature_dim, cards[a]))
            init(f"head_b_{attr.name}", (cards[a],))
        for name in self.disentangle:
            k = cards[self.schema.index(name)]
            init(f"codebook_{name}", (k, self.factor_dim))
        init("enc_W", (feature_dim, self.residual_dim))
        init("enc_b", (self.residual_dim,))
        init("dec_W", (n_codes + self.residual_dim, feature_dim))
        init("dec_b", (feature_dim,))
        self.params_ = params
        self.n_features_in_ = feature_dim

    def _require_params(self):
        if not hasattr(self, "params_"):
            raise NotFittedError(
                "this FactorModel has no parameters yet; call fit() or "
                "initialize() first"
            )

    # -- loss and gradients --------------------------------------------------

    def _loss(self, params, X, Y, with_grad: bool):
        n, d = X.shape
        cards = self.schema.cardinalities
        grads: dict[str, np.ndarray] = {}

        ce = 0.0
        dlogits: dict[str, np.ndarray] = {}
        for a, attr in enumerate(self.schema.attributes):
            logits = X @ params[f"head_W_{attr.name}"] + params[f"head_b_{attr.name}"]
            p = softmax(logits)
            ya = one_hot(Y[:, a], cards[a])
            ce += -float(np.mean(np.sum(ya * np.log(np.clip(p, 1e-300, None)), axis=1)))
            if with_grad:
                dlogits[attr.name] = (p - ya) / n

        dis_idx = self._dis_indices
        codes = [
            params[f"codebook_{name}"][Y[:, idx]]
            for name, idx in zip(self.disentangle, dis_idx)
        ]
        f = np.hstack(codes)
        z = X @ params["enc_W"] + params["enc_b"]
        g = np.hstack([f, z])
        xhat = g @ params["dec_W"] + params["dec_b"]
        resid = xhat - X
        mse = float(np.mean(resid * resid))

        h = np.hstack([one_hot(Y[:, idx], cards[idx]) for idx in dis_idx])
        overlap, dz_pen = _overlap_penalty(z, h, with_grad)

        terms = {"ce": ce, "mse": mse, "overlap": overlap}
        total = ce + mse + self.beta * overlap
        if not with_grad:
            return terms, total, None

        dxhat = (2.0 / (n * d)) * resid
        grads["dec_W"] = g.T @ dxhat
        grads["dec_b"] = dxhat.sum(axis=0)
        dg = dxhat @ params["dec_W"].T
        n_code_cols = f.shape[1]
        df = dg[:, :n_code_cols]
        dz = dg[:, n_code_cols:] + self.beta * dz_pen
        col = 0
        for name, idx in zip(self.disentangle, dis_idx):
            gc = np.zeros_like(params[f"codebook_{name}"])
            np.add.at(gc, Y[:, idx], df[:, col : col + self.factor_dim])
            grads[f"codebook_{name}"] = gc
            col += self.factor_dim
        grads["enc_W"] = X.T @ dz
        grads["enc_b"] = dz.sum(axis=0)
        for attr in self.schema.attributes:
            dl = dlogits[attr.name]
            grads[f"head_W_{attr.name}"] = X.T @ dl
            grads[f"head_b_{attr.name}"] = dl.sum(axis=0)
        return terms, total, grads

    # -- training ------------------------------------------------------------

    def fit(self, X, Y) -> "FactorModel":
        X = check_feature_matrix(X, name="X")
        Y = check_label_matrix(Y, self.schema.cardinalities, "Y")
        if Y.shape[0] != X.shape[0]:
            raise ValueError(
                f"sample mismatch: X has {X.shape[0]} rows, Y has {Y.shape[0]}"
            )
        self.initialize(X.shape[1])
        params = self.params_
        lr = float(self.lr)
        terms, total, grads = self._loss(params, X, Y, with_grad=True)
        history = [total]
        self._check_terms(terms, epoch=0)
        for epoch in range(1, self.epochs + 1):
            while True:
                cand = {k: v - lr * grads[k] for k, v in params.items()}
                cand_terms, cand_total, _ = self._loss(cand, X, Y, with_grad=False)
                if cand_total <= total + 1e-12:
                    break
                lr *= 0.5
                if lr < 1e-12:
                    cand, cand_terms, cand_total = params, terms, total
                    break
            improved = total - cand_total
            params = cand
            terms, total = cand_terms, cand_total
            self._check_terms(terms, epoch)
            history.append(total)
            if lr < 1e-12 or improved < self.tol:
                break
            terms, total, grads = self._loss(params, X, Y, with_grad=True)
        self.params_ = params
        self.loss_history_ = history
        self.terms_ = terms
        self.final_lr_ = lr
        return self

    @staticmethod
    def _check_terms(terms: dict[str, float], epoch: int):
        for name, value in terms.items():
            if not math.isfinite(value):
                raise TrainingError(
                    f"epoch {epoch}: loss term {name!r} is non-finite ({value})"
                )

    # -- inference -----------------------------------------------------------

    def predict(self, X) -> np.ndarray:
        """Predicted labels for every schema attribute, shape (n, m)."""
        self._require_params()
        X = check_feature_matrix(X, feature_dim=self.n_features_in_, name="X")
        out = np.zeros((X.shape[0], len(self.schema)), dtype=np.int64)
        for a, attr in enumerate(self.schema.attributes):
            logits = X @ self.params_[f"head_W_{attr.name}"]
            logits += self.params_[f"head_b_{attr.name}"]
            out[:, a] = np.argmax(logits, axis=1)
        return out

    def classify(self, X, attribute: str) -> tuple[np.ndarray, np.ndarray]:
        """Class predictions and softmax probabilities for one attribute.

        Ties on the logits resolve to the lowest class index (argmax
        convention).  Probabilities sum to 1 per sample.
        """
        self._require_params()
        if attribute not in self.schema.names:
            raise KeyError(f"unknown attribute {attribute!r}")
        X = check_feature_matrix(X, feature_dim=self.n_features_in_, name="X")
        logits = X @ self.params_[f"head_W_{attribute}"]
        logits += self.params_[f"head_b_{attribute}"]
        probs = softmax(logits)
        return np.argmax(logits, axis=1), probs

    def encode(self, X) -> EncodedBatch:
        """Predicted labels plus residual channel for a feature batch."""
        self._require_params()
        X = check_feature_matrix(X, feature_dim=self.n_features_in_, name="X")
        labels = self.predict(X)
        residual = X @ self.params_["enc_W"] + self.params_["enc_b"]
        return EncodedBatch(labels=labels, residual=residual)

    def decode(self, labels, residual) -> np.ndarray:
        """Reconstruct features from labels (all attrs) and a residual."""
        self._require_params()
        labels = check_label_matrix(labels, self.schema.cardinalities, "labels")
        residual = check_feature_matrix(residual, feature_dim=self.residual_dim, name="residual")
        if labels.shape[0] != residual.shape[0]:
            raise ValueError(
                f"sample mismatch: labels has {labels.shape[0]} rows, "
                f"residual has {residual.shape[0]}"
            )
        codes = [
            self.params_[f"codebook_{name}"][labels[:, idx]]
            for name, idx in zip(self.disentangle, self._dis_indices)
        ]
        g = np.hstack(codes + [residual])
        return g @ self.params_["dec_W"] + self.params_["dec_b"]

    def reconstruct(self, X) -> np.ndarray:
        """Round trip through the factor representation: decode(encode(x))."""
        enc = self.encode(X)
        return self.decode(enc.labels, enc.residual)

    def accuracy_by_attribute(self, X, Y) -> dict[str, float]:
        Y = check_label_matrix(Y, self.schema.cardinalities, "Y")
        pred = self.predict(X)
        return {
            attr.name: float(np.mean(pred[:, a] == Y[:, a]))
            for a, attr in enumerate(self.schema.attributes)
        }

    # -- serialization -------------------------------------------------------

    def to_json_dict(self) -> dict:
        self._require_params()
        d = {
            "format": _MODEL_FORMAT,
            "schema": self.schema.to_json_dict(),
            "disentangle": list(self.disentangle),
            "hyper": {
                "factor_dim": self.factor_dim,
                "residual_dim": self.residual_dim,
                "beta": self.beta,
                "lr": self.lr,
                "epochs": self.epochs,
                "tol": self.tol,
                "init_scale": self.init_scale,
                "seed": self.seed,
            },
            "feature_dim": self.n_features_in_,
            "params": {k: v.tolist() for k, v in self.params_.items()},
        }
        for attr in ("loss_history_", "terms_", "train_accuracy_", "val_accuracy_",
                     "reconstruction_error_"):
            if hasattr(self, attr):
                d[attr.rstrip("_")] = getattr(self, attr)
        return d

    @classmethod
    def from_json_dict(cls, d: dict) -> "FactorModel":
        if d.get("format") != _MODEL_FORMAT:
            raise ValueError(f"unsupported model format: {d.get('format')!r}")
        schema = AttributeSchema.from_json_dict(d["schema"])
        model = cls(schema, tuple(d["disentangle"]), **d["hyper"])
        model.params_ = {k: np.asarray(v, dtype=np.float64) for k, v in d["params"].items()}
        model.n_features_in_ = int(d["feature_dim"])
        for key in ("loss_history", "terms", "train_accuracy", "val_accuracy",
                    "reconstruction_error"):
            if key in d:
                setattr(model, key + "_", d[key])
        return model


def save_model(model: FactorModel, path: str | Path) -> None:
    atomic_write_text(path, json.dumps(model.to_json_dict(), sort_keys=True) + "\n")


def load_model(path: str | Path) -> FactorModel:
    with open(path, "r", encoding="utf-8") as fh:
        return FactorModel.from_json_dict(json.load(fh))


# ---------------------------------------------------------------------------
# Dataset-level training with a deterministic holdout
# ---------------------------------------------------------------------------

_HASH_MULT = np.uint64(0x9E3779B97F4A7C15)


def validation_mask(ids) -> np.ndarray:
    """Deterministic 20% holdout keyed by sample id.

    ids are hashed by multiplication with a 64-bit odd constant (wrapping)
    so membership depends only on the id, never on dataset order or size.
    """
    ids = np.asarray(ids, dtype=np.int64)
    with np.errstate(over="ignore"):
        h = ids.astype(np.uint64) * _HASH_MULT
    return (h % np.uint64(5)) == np.uint64(4)


def train(dataset: Dataset, disentangle: tuple[str, ...], **hyper) -> FactorModel:
    """Fit a FactorModel on the dataset's training split and score it.

    The 80/20 split comes from validation_mask over sample ids.  The
    fitted model carries train/val per-attribute accuracies and the
    relative reconstruction error on the holdout.
    """
    model = FactorModel(dataset.schema, disentangle, **hyper)
    val = validation_mask(dataset.ids)
    if val.all() or not val.any():
        raise ValueError("id-hash split left one side empty; need more samples")
    x_tr, y_tr = dataset.features[~val], dataset.labels[~val]
    x_va, y_va = dataset.features[val], dataset.labels[val]
    model.fit(x_tr, y_tr)
    model.train_accuracy_ = model.accuracy_by_attribute(x_tr, y_tr)
    model.val_accuracy_ = model.accuracy_by_attribute(x_va, y_va)
    recon = model.reconstruct(x_va)
    denom = float(np.linalg.norm(x_va))
    model.reconstruction_error_ = (
        float(np.linalg.norm(recon - x_va)) / denom if denom > 0 else 0.0
    )
    model.validation_fraction_ = float(val.mean())
    return model


# ---------------------------------------------------------------------------
# Gradient verification
# ---------------------------------------------------------------------------


def gradient_check(
    model: FactorModel,
    X,
    Y,
    n_coords: int = 60,
    h: float = 1e-5,
    seed: int = 0,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    Probes n_coords randomly chosen parameter coordinates.  The relative
    error uses a 1e-6 floor in the denominator so near-zero gradients do
    not blow the ratio up.
    """
    model._require_params()
    X = check_feature_matrix(X, feature_dim=model.n_features_in_, name="X")
    Y = check_label_matrix(Y, model.schema.cardinalities, "Y")
    params = model.params_
    keys = list(params.keys())
    sizes = [params[k].size for k in keys]
    total_size = int(sum(sizes))
    flat = np.concatenate([params[k].ravel() for k in keys])

    def unflatten(vec):
        out, pos = {}, 0
        for k, s in zip(keys, sizes):
            out[k] = vec[pos : pos + s].reshape(params[k].shape)
            pos += s
        return out

    _, _, grads = model._loss(params, X, Y, with_grad=True)
    flat_grad = np.concatenate([grads[k].ravel() for k in keys])

    rng = stream(seed, "gradient-check")
    n_coords = min(n_coords, total_size)
    coords = rng.choice(total_size, size=n_coords, replace=False)
    worst = 0.0
    for c in coords:
        for sign in (+1.0, -1.0):
            bumped = flat.copy()
            bumped[c] += sign * h
            _, t, _ = model._loss(unflatten(bumped), X, Y, with_grad=False)
            if sign > 0:
                f_plus = t
            else:
                f_minus = t
        numeric = (f_plus - f_minus) / (2.0 * h)
        analytic = flat_grad[c]
        rel = abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-6)
        worst = max(worst, rel)
    return worst
