"""Per-speaker two-class feed-forward network.

Sigmoid hidden layers, a 2-unit softmax output, mean cross-entropy loss,
and minibatch gradient descent with momentum and weight decay.  Scores
are emitted as a log likelihood ratio log(o1) - log(o2), which for a
softmax output equals the difference of the two output pre-activations.
"""

from __future__ import annotations

import numpy as np
from dataclasses import dataclass
from scipy.special import expit

from .balance import MinibatchPlan
from .embeddings import ParseError, _fmt
from .rbm import NumericalError
from .udbn import DbnParams


@dataclass
class DnnModel:
    """Weights/biases per layer; the last layer maps to the 2 softmax units."""

    weights: list[np.ndarray]  # weights[i] is (n_in, n_out)
    biases: list[np.ndarray]

    def __post_init__(self):
        if len(self.weights) < 2 or len(self.weights) != len(self.biases):
            raise ValueError("model needs at least one hidden layer plus the output layer")
        for W, b in zip(self.weights, self.biases):
            if W.shape[1] != b.size:
                raise ValueError("weight/bias shape mismatch")
        for Wa, Wb in zip(self.weights, self.weights[1:]):
            if Wa.shape[1] != Wb.shape[0]:
                raise ValueError("layer dimensions do not chain")
        if self.weights[-1].shape[1] != 2:
            raise ValueError("output layer must have exactly 2 units")

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[0]

    @property
    def layer_sizes(self) -> list[int]:
        return [self.input_dim] + [W.shape[1] for W in self.weights]

    def copy(self) -> "DnnModel":
        return DnnModel([W.copy() for W in self.weights], [b.copy() for b in self.biases])


@dataclass(frozen=True)
class FineTuneConfig:
    learning_rate: float
    epochs: int
    momentum: float = 0.9
    weight_decay: float = 0.0012
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must be in [0, 1)")


@dataclass
class DnnVelocity:
    dW: list[np.ndarray]
    db: list[np.ndarray]

    @classmethod
    def zeros_like(cls, model: DnnModel) -> "DnnVelocity":
        return cls([np.zeros_like(W) for W in model.weights], [np.zeros_like(b) for b in model.biases])


def init_random(layer_sizes, seed: int) -> DnnModel:
    """All weights i.i.d. uniform on [0, 0.01), biases zero."""
    sizes = list(layer_sizes)
    if len(sizes) < 3:
        raise ValueError("need input, >=1 hidden and output sizes")
    if sizes[-1] != 2:
        raise ValueError("output layer must have 2 units")
    rng = np.random.default_rng(seed)
    weights = [rng.uniform(0.0, 0.01, size=(a, b)) for a, b in zip(sizes, sizes[1:])]
    biases = [np.zeros(b) for b in sizes[1:]]
    return DnnModel(weights, biases)


def init_from_dbn(adapted: DbnParams, seed: int) -> DnnModel:
    """Hidden layers copy the DBN weights and hidden biases; the output
    layer is drawn uniform on [0, 0.01) with zero biases."""
    rng = np.random.default_rng(seed)
    weights = [layer.W.copy() for layer in adapted.layers]
    biases = [layer.b_hid.copy() for layer in adapted.layers]
    n_top = adapted.layers[-1].n_hidden
    weights.append(rng.uniform(0.0, 0.01, size=(n_top, 2)))
    biases.append(np.zeros(2))
    return DnnModel(weights, biases)


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _forward_full(model: DnnModel, X: np.ndarray):
    """Returns (hidden activations per layer, output pre-activations, probs)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != model.input_dim:
        raise ValueError(f"input dimension {X.shape[1]} != {model.input_dim}")
    acts = []
    a = X
    for W, b in zip(model.weights[:-1], model.biases[:-1]):
        a = expit(a @ W + b)
        acts.append(a)
    z = a @ model.weights[-1] + model.biases[-1]
    return acts, z, _softmax(z)


def forward(model: DnnModel, v: np.ndarray):
    """Hidden activations and softmax output for one vector or a batch."""
    v = np.asarray(v, dtype=float)
    single = v.ndim == 1
    acts, _, probs = _forward_full(model, v)
    if single:
        return [a[0] for a in acts], probs[0]
    return acts, probs


def mean_cross_entropy(model: DnnModel, X: np.ndarray, Y: np.ndarray) -> float:
    """Mean cross-entropy of one-hot labels Y under the model."""
    _, z, _ = _forward_full(model, np.atleast_2d(X))
    logp = z - z.max(axis=1, keepdims=True)
    logp = logp - np.log(np.exp(logp).sum(axis=1, keepdims=True))
    return float(-(np.atleast_2d(Y) * logp).sum(axis=1).mean())


def backprop_minibatch(
    model: DnnModel,
    X: np.ndarray,
    Y: np.ndarray,
    cfg: FineTuneConfig,
    velocity: DnnVelocity,
) -> float:
    """One momentum SGD step on the mean cross-entropy of a minibatch.

    Updates model and velocity in place; weight decay applies to weights
    only.  Returns the pre-update loss.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if X.shape[0] != Y.shape[0] or Y.shape[1] != 2:
        raise ValueError("labels must be one-hot rows matching the minibatch")
    m = X.shape[0]
    acts, z, probs = _forward_full(model, X)
    logp = z - z.max(axis=1, keepdims=True)
    logp = logp - np.log(np.exp(logp).sum(axis=1, keepdims=True))
    loss = float(-(Y * logp).sum(axis=1).mean())

    layer_inputs = [X] + acts
    delta = (probs - Y) / m
    grads_W = [None] * len(model.weights)
    grads_b = [None] * len(model.biases)
    for i in range(len(model.weights) - 1, -1, -1):
        grads_W[i] = layer_inputs[i].T @ delta
        grads_b[i] = delta.sum(axis=0)
        if i > 0:
            a = acts[i - 1]
            delta = (delta @ model.weights[i].T) * a * (1.0 - a)

    for i, (gW, gb) in enumerate(zip(grads_W, grads_b)):
        velocity.dW[i] = cfg.momentum * velocity.dW[i] - cfg.learning_rate * (
            gW + cfg.weight_decay * model.weights[i]
        )
        velocity.db[i] = cfg.momentum * velocity.db[i] - cfg.learning_rate * gb
        model.weights[i] += velocity.dW[i]
        model.biases[i] += velocity.db[i]
        if not (np.all(np.isfinite(model.weights[i])) and np.all(np.isfinite(model.biases[i]))):
            raise NumericalError("non-finite DNN parameters after update")
    if not np.isfinite(loss):
        raise NumericalError("non-finite training loss")
    return loss


def train_speaker_dnn(init: DnnModel, plan: MinibatchPlan, cfg: FineTuneConfig) -> DnnModel:
    """Fine-tune a model over the balanced plan's minibatches, in order,
    for cfg.epochs passes.  The input model is left untouched."""
    if not plan.minibatches:
        raise ValueError("empty minibatch plan")
    model = init.copy()
    velocity = DnnVelocity.zeros_like(model)
    batches = plan.labeled_arrays()
    for _ in range(cfg.epochs):
        for X, Y in batches:
            backprop_minibatch(model, X, Y, cfg, velocity)
    return model


def score_llr(model: DnnModel, test: np.ndarray) -> float:
    """log(o1) - log(o2); for a softmax this is exactly z1 - z2."""
    _, z, _ = _forward_full(model, test)
    return float(z[0, 0] - z[0, 1])


def score_llr_batch(model: DnnModel, X: np.ndarray) -> np.ndarray:
    _, z, _ = _forward_full(model, X)
    return z[:, 0] - z[:, 1]


def save_dnn(model: DnnModel, path) -> None:
    """Model file: `DNN v1`, layer sizes, activation tags, weight/bias blocks."""
    sizes = model.layer_sizes
    acts = ["sigmoid"] * (len(model.weights) - 1) + ["softmax"]
    with open(path, "w") as fh:
        fh.write("DNN v1\n")
        fh.write("sizes " + " ".join(str(s) for s in sizes) + "\n")
        fh.write("activations " + " ".join(acts) + "\n")
        for W, b in zip(model.weights, model.biases):
            fh.write(" ".join(_fmt(x) for x in b) + "\n")
            for row in W:
                fh.write(" ".join(_fmt(x) for x in row) + "\n")


def load_dnn(path) -> DnnModel:
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    try:
        if lines[0] != "DNN v1":
            raise ParseError(f"{path}: expected 'DNN v1' header")
        sizes = [int(x) for x in lines[1].split()[1:]]
        weights, biases = [], []
        pos = 3
        for n_in, n_out in zip(sizes, sizes[1:]):
            biases.append(np.array([float(x) for x in lines[pos].split()]))
            weights.append(
                np.stack(
                    [np.array([float(x) for x in lines[pos + 1 + i].split()]) for i in range(n_in)]
                )
            )
            pos += 1 + n_in
    except (IndexError, ValueError) as exc:
        raise ParseError(f"{path}: malformed DNN file ({exc})") from None
    return DnnModel(weights, biases)
