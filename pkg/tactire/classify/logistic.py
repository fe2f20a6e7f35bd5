import logging
import struct as binary
from typing import Callable, Optional, Sequence, Tuple

from flax import struct
import jax
import jax.numpy as jnp
import numpy as np
import optax
from scipy import special

from tactire.classify.dataset import Dataset, DegenerateDataError, TRAIN
from tactire.utils.typing import Params

jax.config.update("jax_enable_x64", True)

MODEL_MAGIC = b"AWLR"
MODEL_VERSION = 1
_MODEL_HEADER = binary.Struct("<4sHIIdd")
_NAME_LENGTH = binary.Struct("<H")

ARMIJO_C = 1e-4
STEP_SHRINK = 0.5
MIN_STEP = 1e-20
LOG_EVERY = 100


class ModelFormatError(ValueError):
    pass


@struct.dataclass
class LRModel:
    """Multinomial logistic regression over flattened windows.

    Usage:

        >>> model = train_lr(dataset, C=0.5)
        >>> labels = model.predict(dataset.features("test"))
        >>> model.save("model.awlr")
        >>> model = LRModel.load("model.awlr")

    `feature_scale` multiplies raw features before the linear map; it is
    part of the model so saved models score raw windows directly.
    """

    weights: np.ndarray  # (K, D)
    bias: np.ndarray  # (K,)
    classes: Tuple[str, ...] = struct.field(pytree_node=False)
    inverse_reg_C: float = struct.field(pytree_node=False, default=0.5)
    feature_scale: float = struct.field(pytree_node=False, default=1.0)

    @property
    def num_classes(self) -> int:
        return len(self.classes)

    @property
    def feature_dim(self) -> int:
        return self.weights.shape[1]

    def logits(self, features: np.ndarray) -> np.ndarray:
        features = np.atleast_2d(np.asarray(features, dtype=np.float64))
        if features.shape[1] != self.feature_dim:
            raise ValueError(
                f"model expects {self.feature_dim} features, got {features.shape[1]}"
            )
        return self.feature_scale * features @ self.weights.T + self.bias

    def predict_proba(self, features: np.ndarray) -> np.ndarray:
        return special.softmax(self.logits(features), axis=1)

    def predict(self, features: np.ndarray) -> np.ndarray:
        return np.array(self.classes)[np.argmax(self.logits(features), axis=1)]

    def save(self, path: str):
        with open(path, "wb") as f:
            f.write(encode_model(self))

    @classmethod
    def load(cls, path: str) -> "LRModel":
        with open(path, "rb") as f:
            return decode_model(f.read())


def encode_model(model: LRModel) -> bytes:
    """Flat little-endian encoding, see docs/formats.md."""
    k, d = model.weights.shape
    parts = [
        _MODEL_HEADER.pack(
            MODEL_MAGIC, MODEL_VERSION, k, d, model.inverse_reg_C, model.feature_scale
        )
    ]
    for name in model.classes:
        raw = name.encode("utf-8")
        parts.append(_NAME_LENGTH.pack(len(raw)) + raw)
    parts.append(np.asarray(model.weights, dtype="<f8").tobytes())
    parts.append(np.asarray(model.bias, dtype="<f8").tobytes())
    return b"".join(parts)


def decode_model(data: bytes) -> LRModel:
    if len(data) < _MODEL_HEADER.size:
        raise ModelFormatError(
            f"model file is {len(data)} bytes, the header alone needs more"
        )
    magic, version, k, d, C, scale = _MODEL_HEADER.unpack_from(data)
    if magic != MODEL_MAGIC:
        raise ModelFormatError(f"bad magic {magic!r}")
    if version != MODEL_VERSION:
        raise ModelFormatError(f"unsupported model version {version}")
    offset = _MODEL_HEADER.size
    classes = []
    try:
        for _ in range(k):
            (n,) = _NAME_LENGTH.unpack_from(data, offset)
            offset += _NAME_LENGTH.size
            classes.append(data[offset : offset + n].decode("utf-8"))
            offset += n
    except (binary.error, UnicodeDecodeError) as e:
        raise ModelFormatError(f"corrupt class names: {e}") from e
    expected = offset + 8 * (k * d + k)
    if len(data) != expected:
        raise ModelFormatError(f"model file is {len(data)} bytes, expected {expected}")
    values = np.frombuffer(data, dtype="<f8", offset=offset).astype(np.float64)
    weights = values[: k * d].reshape(k, d)
    bias = values[k * d :]
    if not (np.all(np.isfinite(weights)) and np.all(np.isfinite(bias))):
        raise ModelFormatError("model holds non-finite parameters")
    return LRModel(
        weights=weights,
        bias=bias,
        classes=tuple(classes),
        inverse_reg_C=C,
        feature_scale=scale,
    )


def lr_objective(params: Params, features, onehot, C) -> jax.Array:
    """Summed cross-entropy plus ||weights||^2 / (2C). The bias is not penalized."""
    logits = features @ params["weights"].T + params["bias"]
    nll = jnp.sum(optax.softmax_cross_entropy(logits, onehot))
    return nll + jnp.sum(params["weights"] ** 2) / (2.0 * C)


_objective = jax.jit(lr_objective)
_value_and_grad = jax.jit(jax.value_and_grad(lr_objective))


def lr_gradient(params: Params, features, onehot, C) -> Params:
    return jax.grad(lr_objective)(params, features, onehot, C)


def _sup_norm(tree) -> float:
    return max(float(jnp.max(jnp.abs(x))) for x in jax.tree_util.tree_leaves(tree))


def _sq_norm(tree) -> float:
    return float(optax.global_norm(tree)) ** 2


def fit_lr(
    features: np.ndarray,
    labels: Sequence[str],
    classes: Sequence[str],
    C: float = 0.5,
    max_iters: int = 2000,
    tol: float = 1e-5,
    feature_scale: float = 1.0,
    callback: Optional[Callable[[int, float, float], None]] = None,
) -> LRModel:
    """Full-batch gradient descent from zero with Armijo backtracking.

    Stops when the gradient's sup-norm drops below `tol`, after `max_iters`
    iterations, or when no step satisfies the sufficient-decrease condition.
    `callback(iteration, loss, grad_norm)` sees every accepted iterate.
    """
    classes = tuple(classes)
    labels = np.asarray(labels)
    if len(set(labels.tolist())) < 2:
        raise DegenerateDataError(
            f"training needs at least 2 classes, got {sorted(set(labels.tolist()))}"
        )
    if C <= 0:
        raise ValueError(f"C must be positive, got {C}")
    index = {c: i for i, c in enumerate(classes)}
    onehot = np.zeros((len(labels), len(classes)))
    onehot[np.arange(len(labels)), [index[l] for l in labels]] = 1.0
    X = jnp.asarray(features, dtype=jnp.float64) * feature_scale
    Y = jnp.asarray(onehot)

    params = {
        "weights": jnp.zeros((len(classes), X.shape[1])),
        "bias": jnp.zeros(len(classes)),
    }
    loss, grad = _value_and_grad(params, X, Y, C)
    step = 1.0
    for it in range(max_iters):
        grad_norm = _sup_norm(grad)
        if callback is not None:
            callback(it, float(loss), grad_norm)
        if it % LOG_EVERY == 0:
            logging.info(
                f"iter {it}: loss={float(loss):.6f} |grad|={grad_norm:.3e} "
                f"step={step:.3e}"
            )
        if grad_norm < tol:
            logging.info(f"converged after {it} iterations")
            break
        decrease = ARMIJO_C * _sq_norm(grad)
        while step >= MIN_STEP:
            updates = jax.tree_util.tree_map(lambda g: -step * g, grad)
            candidate = optax.apply_updates(params, updates)
            new_loss = _objective(candidate, X, Y, C)
            if new_loss <= loss - step * decrease:
                break
            step *= STEP_SHRINK
        else:
            logging.warning(f"line search stalled at iteration {it}")
            break
        params = candidate
        loss, grad = _value_and_grad(params, X, Y, C)
        step = min(step / STEP_SHRINK, 1e6)
    else:
        logging.info(f"stopped at max_iters={max_iters}, |grad|={_sup_norm(grad):.3e}")

    return LRModel(
        weights=np.asarray(params["weights"]),
        bias=np.asarray(params["bias"]),
        classes=classes,
        inverse_reg_C=C,
        feature_scale=feature_scale,
    )


def train_lr(
    data: Dataset,
    C: float = 0.5,
    max_iters: int = 2000,
    tol: float = 1e-5,
    feature_scale: float = 1.0,
    callback: Optional[Callable[[int, float, float], None]] = None,
) -> LRModel:
    train_labels = data.labels(TRAIN)
    classes = tuple(c for c in data.classes if c in set(train_labels.tolist()))
    return fit_lr(
        data.features(TRAIN),
        train_labels,
        classes,
        C=C,
        max_iters=max_iters,
        tol=tol,
        feature_scale=feature_scale,
        callback=callback,
    )
