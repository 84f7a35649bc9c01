import logging
import math
from typing import List, Optional, Tuple, Union

import numpy as np
from scipy.special import expit

from app.controllers.datasetController import apply_scaler
from app.models.dataset_model import Dataset, FeatureVector, Scaler
from app.models.learner_model import ModelKind, ModelSpec, NnParams, TrainConfig, TrainedModel
from app.utils.exceptions import DimensionMismatchError, TrainingDivergenceError
from app.utils.seeding import derive_seed, make_rng

logger = logging.getLogger(__name__)

CE_CLIP = 1e-12

Features = Union[Dataset, FeatureVector, np.ndarray]


def init_params(spec: ModelSpec, n_inputs: int) -> NnParams:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases; linear models start at zero."""
    sizes = [n_inputs, *spec.hidden_layout, 1]
    rng = make_rng(derive_seed(spec.seed, "init"))
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        if spec.kind == ModelKind.linear:
            weights.append(np.zeros((fan_in, fan_out)))
        else:
            bound = 1.0 / math.sqrt(fan_in)
            weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return NnParams(weights=weights, biases=biases)


def _forward(params: NnParams, x: np.ndarray) -> Tuple[List[np.ndarray], np.ndarray]:
    activations = [x]
    a = x
    for w, b in zip(params.weights[:-1], params.biases[:-1]):
        a = np.tanh(a @ w + b)
        activations.append(a)
    z = (a @ params.weights[-1] + params.biases[-1]).ravel()
    return activations, z


def _output(kind: ModelKind, z: np.ndarray) -> np.ndarray:
    if kind == ModelKind.linear:
        return np.clip(z, 0.0, 1.0)
    return expit(z)


def _as_matrix(model: TrainedModel, features: Features) -> np.ndarray:
    if isinstance(features, FeatureVector):
        fields = {n: getattr(features, n) for n in features.present()}
        features = Dataset(features=tuple(fields), values=[list(fields.values())], labels=[0])
    if isinstance(features, Dataset):
        if model.scaler is not None and not features.standardized:
            features = apply_scaler(model.scaler, features)
        x = features.values
    else:
        x = np.atleast_2d(np.asarray(features, dtype=np.float64))
    if x.shape[1] != model.params.n_inputs:
        raise DimensionMismatchError(f"model expects {model.params.n_inputs} features, got {x.shape[1]}")
    return x


def predict_soft(model: TrainedModel, features: Features) -> Union[float, np.ndarray]:
    """Soft decision in [0, 1]; a single FeatureVector gives a float, anything else one value per row."""
    _, z = _forward(model.params, _as_matrix(model, features))
    soft = _output(model.spec.kind, z)
    return float(soft[0]) if isinstance(features, FeatureVector) else soft


def harden(soft, gamma_l: float):
    """Decision 1 (mmWave) iff soft > gamma_l, strictly."""
    out = (np.asarray(soft) > gamma_l).astype(np.int8)
    return int(out) if np.ndim(soft) == 0 else out


def cross_entropy(labels, softs) -> float:
    y = np.asarray(labels, dtype=np.float64)
    p = np.asarray(softs, dtype=np.float64)
    if y.shape != p.shape:
        raise DimensionMismatchError(f"{y.size} labels vs {p.size} soft decisions")
    p = np.clip(p, CE_CLIP, 1.0 - CE_CLIP)
    return float(np.mean(-y * np.log(p) - (1.0 - y) * np.log1p(-p)))


def error_metric(labels, decisions) -> float:
    y = np.asarray(labels, dtype=np.float64)
    d = np.asarray(decisions, dtype=np.float64)
    if y.shape != d.shape:
        raise DimensionMismatchError(f"{y.size} labels vs {d.size} decisions")
    return float(np.mean(np.abs(d - y)))


def _penalty(params: NnParams, alpha: float) -> float:
    return 0.5 * alpha * sum(float(np.sum(w * w)) for w in params.weights)


def _loss_and_gradient(params: NnParams, x: np.ndarray, y: np.ndarray, alpha: float) -> Tuple[float, NnParams]:
    activations, z = _forward(params, x)
    n = x.shape[0]
    # mean CE written on the logit: log(1 + e^z) - y z
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z)) + _penalty(params, alpha)
    delta = ((expit(z) - y) / n).reshape(-1, 1)
    grad_w: List[np.ndarray] = [None] * len(params.weights)
    grad_b: List[np.ndarray] = [None] * len(params.biases)
    for l in range(len(params.weights) - 1, -1, -1):
        grad_w[l] = activations[l].T @ delta + alpha * params.weights[l]
        grad_b[l] = delta.sum(axis=0)
        if l:
            delta = (delta @ params.weights[l].T) * (1.0 - activations[l] ** 2)
    return loss, NnParams(weights=grad_w, biases=grad_b)


def regularized_loss(params: NnParams, x: np.ndarray, y: np.ndarray, alpha: float) -> float:
    """Mean cross entropy plus (alpha/2)*||weights||^2; biases are not penalized."""
    _, z = _forward(params, x)
    return float(np.mean(np.logaddexp(0.0, z) - np.asarray(y) * z)) + _penalty(params, alpha)


def loss_gradient(params: NnParams, x: np.ndarray, y: np.ndarray, alpha: float) -> NnParams:
    """Analytic gradient of regularized_loss (tanh hidden units, sigmoid output)."""
    return _loss_and_gradient(params, np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64), alpha)[1]


def _weight_shrink(params: NnParams, factor: float) -> np.ndarray:
    """Per-entry divisor in flatten() order: `factor` on weight matrices, 1 on biases."""
    return np.concatenate([np.concatenate([np.full(w.size, factor), np.ones(b.size)])
                           for w, b in zip(params.weights, params.biases)])


def _fit_ridge(x: np.ndarray, y: np.ndarray, alpha: float) -> NnParams:
    xa = np.hstack([x, np.ones((x.shape[0], 1))])
    penalty = alpha * np.eye(xa.shape[1])
    penalty[-1, -1] = 0.0
    try:
        beta = np.linalg.solve(xa.T @ xa + penalty, xa.T @ y)
    except np.linalg.LinAlgError:
        beta = np.linalg.lstsq(xa.T @ xa + penalty, xa.T @ y, rcond=None)[0]
    return NnParams(weights=[beta[:-1].reshape(-1, 1)], biases=[beta[-1:]])


def _check_inputs(ds: Dataset, n_inputs: Optional[int] = None) -> np.ndarray:
    x = ds.values
    if np.any(np.isnan(x)):
        raise DimensionMismatchError("training data has absent features; select a feature combination first")
    if n_inputs is not None and x.shape[1] != n_inputs:
        raise DimensionMismatchError(f"expected {n_inputs} features, got {x.shape[1]}")
    return x


def train(spec: ModelSpec, cfg: TrainConfig, train_set: Dataset, validation: Dataset,
          scaler: Optional[Scaler] = None) -> TrainedModel:
    """Fit a model on standardized data. gamma_l is left at the 0.5 placeholder."""
    x = _check_inputs(train_set)
    y = train_set.labels.astype(np.float64)
    x_val = _check_inputs(validation, x.shape[1])
    y_val = validation.labels.astype(np.float64)

    if spec.kind == ModelKind.linear:
        params = _fit_ridge(x, y, spec.alpha)
        mse = float(np.mean((_forward(params, x)[1] - y) ** 2))
        return TrainedModel(spec=spec, params=params, scaler=scaler, loss_history=(mse,))

    params = init_params(spec, x.shape[1])
    flat = params.flatten()
    rng = make_rng(derive_seed(cfg.seed, "batches"))
    n = x.shape[0]
    batch = min(cfg.batch_size, n)
    shrink = _weight_shrink(params, 1.0 + cfg.learning_rate * spec.alpha)
    best_flat, best_val, waited = flat.copy(), math.inf, 0
    history: List[float] = []

    for epoch in range(1, cfg.max_epochs + 1):
        order = rng.permutation(n) if cfg.shuffle else np.arange(n)
        for start in range(0, n, batch):
            idx = order[start:start + batch]
            # CE step, then the L2 penalty as a proximal shrink of the weights
            _, grad = _loss_and_gradient(params.unflatten(flat), x[idx], y[idx], 0.0)
            flat = (flat - cfg.learning_rate * grad.flatten()) / shrink
        params = params.unflatten(flat)
        loss = regularized_loss(params, x, y, spec.alpha)
        if not math.isfinite(loss) or not np.all(np.isfinite(flat)):
            raise TrainingDivergenceError(epoch)
        history.append(loss)

        val_ce = cross_entropy(y_val, expit(_forward(params, x_val)[1]))
        if val_ce < best_val - 1e-12:
            best_flat, best_val, waited = flat.copy(), val_ce, 0
        else:
            waited += 1
            if waited >= cfg.patience:
                logger.debug("early stop at epoch %d (best validation CE %.5f)", epoch, best_val)
                break

    return TrainedModel(spec=spec, params=params.unflatten(best_flat), scaler=scaler, loss_history=tuple(history))
