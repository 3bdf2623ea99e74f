"""Restricted Boltzmann Machine with one-step contrastive divergence.

Supports Gaussian (real-valued, unit-variance) and Bernoulli visible
units with Bernoulli hidden units.  Training follows the standard CD-1
recipe: hidden probabilities on the data, one binary hidden sample, a
mean-field reconstruction, recomputed hidden probabilities, then a
momentum/weight-decay update of (data - reconstruction) statistics
averaged over the minibatch.
"""

from __future__ import annotations

import numpy as np
from dataclasses import dataclass
from scipy.special import expit

from .embeddings import Dataset, ParseError, _fmt

VISIBLE_KINDS = ("gaussian", "bernoulli")


class NumericalError(ArithmeticError):
    """Training produced a non-finite update."""


@dataclass
class RbmParams:
    """Weights and biases of one RBM."""

    visible_kind: str
    W: np.ndarray       # (n_visible, n_hidden)
    b_vis: np.ndarray   # (n_visible,)
    b_hid: np.ndarray   # (n_hidden,)

    def __post_init__(self):
        if self.visible_kind not in VISIBLE_KINDS:
            raise ValueError(f"unknown visible kind {self.visible_kind!r}")
        if self.W.shape != (self.b_vis.size, self.b_hid.size):
            raise ValueError("inconsistent RBM parameter shapes")

    @property
    def n_visible(self) -> int:
        return self.b_vis.size

    @property
    def n_hidden(self) -> int:
        return self.b_hid.size

    def copy(self) -> "RbmParams":
        return RbmParams(self.visible_kind, self.W.copy(), self.b_vis.copy(), self.b_hid.copy())


@dataclass(frozen=True)
class RbmTrainConfig:
    learning_rate: float
    epochs: int
    momentum: float = 0.9
    weight_decay: float = 0.0002
    minibatch_size: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must be in [0, 1)")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be >= 0")
        if self.minibatch_size < 1:
            raise ValueError("minibatch_size must be >= 1")


@dataclass
class RbmVelocity:
    """Momentum buffers, one per parameter tensor."""

    dW: np.ndarray
    db_vis: np.ndarray
    db_hid: np.ndarray

    @classmethod
    def zeros_like(cls, rbm: RbmParams) -> "RbmVelocity":
        return cls(np.zeros_like(rbm.W), np.zeros_like(rbm.b_vis), np.zeros_like(rbm.b_hid))


def init_rbm(n_visible: int, n_hidden: int, kind: str, seed: int) -> RbmParams:
    """Weights i.i.d. uniform on [0, 0.01), biases zero."""
    if n_visible < 1 or n_hidden < 1:
        raise ValueError("layer sizes must be >= 1")
    rng = np.random.default_rng(seed)
    W = rng.uniform(0.0, 0.01, size=(n_visible, n_hidden))
    return RbmParams(kind, W, np.zeros(n_visible), np.zeros(n_hidden))


def hidden_probs(rbm: RbmParams, v: np.ndarray) -> np.ndarray:
    """p(h_j = 1 | v) = sigmoid(b_hid_j + sum_i v_i w_ij); accepts (d,) or (n, d)."""
    v = np.asarray(v, dtype=float)
    if v.shape[-1] != rbm.n_visible:
        raise ValueError(f"visible dimension {v.shape[-1]} != {rbm.n_visible}")
    return expit(v @ rbm.W + rbm.b_hid)


def sample_bernoulli(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Independent 0/1 samples with the given activation probabilities."""
    probs = np.asarray(probs, dtype=float)
    return (rng.random(probs.shape) < probs).astype(float)


def reconstruct_visible(rbm: RbmParams, h: np.ndarray) -> np.ndarray:
    """Mean-field visible reconstruction given hidden values.

    Bernoulli visibles give sigmoid activations; Gaussian visibles give
    the mean b_vis + W h (unit variance assumed, no sampling).
    """
    h = np.asarray(h, dtype=float)
    if h.shape[-1] != rbm.n_hidden:
        raise ValueError(f"hidden dimension {h.shape[-1]} != {rbm.n_hidden}")
    pre = h @ rbm.W.T + rbm.b_vis
    if rbm.visible_kind == "gaussian":
        return pre
    return expit(pre)


def cd1_step(
    rbm: RbmParams,
    minibatch: np.ndarray,
    cfg: RbmTrainConfig,
    velocity: RbmVelocity,
    rng: np.random.Generator,
    epoch: int = 0,
) -> float:
    """One CD-1 parameter update on a minibatch, in place.

    Returns the mean squared reconstruction error of the minibatch.
    Gradients are averaged over the minibatch; weight decay applies to
    weights only.
    """
    v = np.atleast_2d(np.asarray(minibatch, dtype=float))
    if v.shape[0] == 0:
        raise ValueError("empty minibatch")
    m = v.shape[0]

    ph_data = hidden_probs(rbm, v)
    h = sample_bernoulli(ph_data, rng)
    v_rec = reconstruct_visible(rbm, h)
    ph_rec = hidden_probs(rbm, v_rec)

    gW = (v.T @ ph_data - v_rec.T @ ph_rec) / m
    gbv = (v - v_rec).mean(axis=0)
    gbh = (ph_data - ph_rec).mean(axis=0)

    velocity.dW = cfg.momentum * velocity.dW + cfg.learning_rate * (gW - cfg.weight_decay * rbm.W)
    velocity.db_vis = cfg.momentum * velocity.db_vis + cfg.learning_rate * gbv
    velocity.db_hid = cfg.momentum * velocity.db_hid + cfg.learning_rate * gbh

    rbm.W += velocity.dW
    rbm.b_vis += velocity.db_vis
    rbm.b_hid += velocity.db_hid
    if not (np.all(np.isfinite(rbm.W)) and np.all(np.isfinite(rbm.b_vis)) and np.all(np.isfinite(rbm.b_hid))):
        raise NumericalError(f"non-finite RBM parameters after update (epoch {epoch})")
    return float(((v - v_rec) ** 2).sum(axis=1).mean())


def _as_matrix(data) -> np.ndarray:
    if isinstance(data, Dataset):
        return data.matrix()
    return np.atleast_2d(np.asarray(data, dtype=float))


def train_rbm(data, cfg: RbmTrainConfig, kind: str, n_hidden: int):
    """Train one RBM with CD-1 over fixed-order minibatches.

    Returns (params, errors) where errors[e] is the mean squared
    reconstruction error of epoch e.  Fully deterministic given
    (data order, cfg).
    """
    X = _as_matrix(data)
    n, d = X.shape
    if n == 0:
        raise ValueError("empty training data")
    rbm = init_rbm(d, n_hidden, kind, cfg.seed)
    velocity = RbmVelocity.zeros_like(rbm)
    rng = np.random.default_rng([cfg.seed, 1])
    batches = [X[i : i + cfg.minibatch_size] for i in range(0, n, cfg.minibatch_size)]
    errors = []
    for epoch in range(cfg.epochs):
        err_sum = 0.0
        for batch in batches:
            err = cd1_step(rbm, batch, cfg, velocity, rng, epoch=epoch)
            err_sum += err * batch.shape[0]
        errors.append(err_sum / n)
    return rbm, errors


def write_rbm_block(fh, rbm: RbmParams) -> None:
    fh.write("RBM v1\n")
    fh.write(f"{rbm.visible_kind}\n")
    fh.write(f"{rbm.n_visible} {rbm.n_hidden}\n")
    fh.write(" ".join(_fmt(x) for x in rbm.b_vis) + "\n")
    fh.write(" ".join(_fmt(x) for x in rbm.b_hid) + "\n")
    for row in rbm.W:
        fh.write(" ".join(_fmt(x) for x in row) + "\n")


def read_rbm_block(lines, pos: int):
    """Parse one RBM block starting at lines[pos]; returns (RbmParams, next_pos)."""
    try:
        if lines[pos] != "RBM v1":
            raise ParseError(f"expected 'RBM v1' header at line {pos + 1}")
        kind = lines[pos + 1]
        n_vis, n_hid = (int(x) for x in lines[pos + 2].split())
        b_vis = np.array([float(x) for x in lines[pos + 3].split()])
        b_hid = np.array([float(x) for x in lines[pos + 4].split()])
        W = np.stack(
            [np.array([float(x) for x in lines[pos + 5 + i].split()]) for i in range(n_vis)]
        )
    except (IndexError, ValueError) as exc:
        raise ParseError(f"malformed RBM block at line {pos + 1}: {exc}") from None
    if b_vis.size != n_vis or b_hid.size != n_hid or W.shape != (n_vis, n_hid):
        raise ParseError(f"RBM block at line {pos + 1}: inconsistent dimensions")
    return RbmParams(kind, W, b_vis, b_hid), pos + 5 + n_vis


def save_rbm(rbm: RbmParams, path) -> None:
    with open(path, "w") as fh:
        write_rbm_block(fh, rbm)


def load_rbm(path) -> RbmParams:
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    rbm, _ = read_rbm_block(lines, 0)
    return rbm
