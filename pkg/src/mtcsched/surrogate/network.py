"""Dense feed-forward regressor in plain numpy, with Adam training.

Parameters are a list of ``(W, b)`` pairs. ``forward`` can return a cache that
``backward`` consumes, which is all the gradient check and the training loop
need. Dropout uses inverted scaling, so inference runs the same weights
without rescaling.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

N_OUTPUTS = 13


class ShapeError(ValueError):
    pass


class DegenerateError(ValueError):
    pass


@dataclass(frozen=True)
class RegressorSpec:
    n_inputs: int = 52
    widths: tuple[int, ...] = (1024, 1024, 512, 256, 128, 64, N_OUTPUTS)
    activations: tuple[str, ...] = ("elu", "elu", "elu", "relu", "relu", "relu", "relu")
    dropout: tuple[float, ...] = (0.7, 0.7, 0.0, 0.0, 0.0, 0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))
        object.__setattr__(self, "activations", tuple(self.activations))
        object.__setattr__(self, "dropout", tuple(float(d) for d in self.dropout))
        if not (len(self.widths) == len(self.activations) == len(self.dropout)):
            raise ShapeError("widths, activations and dropout must have equal length")
        for a in self.activations:
            if a not in _ACT:
                raise ValueError(f"unknown activation {a!r}")
        if any(not 0 <= d < 1 for d in self.dropout):
            raise ValueError("dropout rates must lie in [0, 1)")

    @property
    def n_outputs(self) -> int:
        return self.widths[-1]

    def to_dict(self) -> dict:
        return {"n_inputs": self.n_inputs, "widths": list(self.widths),
                "activations": list(self.activations), "dropout": list(self.dropout)}


def _elu(z):
    return np.where(z > 0, z, np.expm1(np.minimum(z, 0)))


def _elu_grad(z, a):
    return np.where(z > 0, 1.0, a + 1.0)


def _relu(z):
    return np.maximum(z, 0)


def _relu_grad(z, a):
    return (z > 0).astype(z.dtype)


def _linear(z):
    return z


def _linear_grad(z, a):
    return np.ones_like(z)


_ACT = {
    "elu": (_elu, _elu_grad),
    "relu": (_relu, _relu_grad),
    "linear": (_linear, _linear_grad),
}

Params = list  # list[tuple[np.ndarray, np.ndarray]]


def init_params(spec: RegressorSpec, seed: int = 0, dtype=np.float64) -> Params:
    """Glorot-uniform init, limit sqrt(6 / (fan_in + fan_out)); zero biases.

    The fan-in-only He limit is too wide for this relu stack: the first Adam
    steps push every output unit negative and the net never recovers.
    """
    rng = np.random.default_rng(seed)
    params = []
    fan_in = spec.n_inputs
    for w in spec.widths:
        lim = np.sqrt(6.0 / (fan_in + w))
        params.append((rng.uniform(-lim, lim, (fan_in, w)).astype(dtype), np.zeros(w, dtype=dtype)))
        fan_in = w
    return params


def forward(spec: RegressorSpec, params: Params, x: np.ndarray, training: bool = False,
            rng: np.random.Generator | None = None, return_cache: bool = False):
    x = np.asarray(x)
    if x.ndim == 1:
        x = x[None, :]
    if x.shape[1] != params[0][0].shape[0]:
        raise ShapeError(f"input width {x.shape[1]} != {params[0][0].shape[0]}")
    if training and rng is None:
        raise ValueError("training mode needs a dropout rng")
    cache = []
    h = x.astype(params[0][0].dtype, copy=False)
    for (W, b), act, rate in zip(params, spec.activations, spec.dropout):
        z = h @ W + b
        fn, _ = _ACT[act]
        a = fn(z)
        mask = None
        if training and rate > 0:
            mask = (rng.random(a.shape) >= rate).astype(a.dtype) / (1.0 - rate)
            out = a * mask
        else:
            out = a
        if return_cache:
            cache.append((h, z, a, mask))
        h = out
    return (h, cache) if return_cache else h


def backward(spec: RegressorSpec, params: Params, cache, grad_out: np.ndarray) -> Params:
    grads = [None] * len(params)
    g = grad_out
    for k in range(len(params) - 1, -1, -1):
        h_in, z, a, mask = cache[k]
        if mask is not None:
            g = g * mask
        g = g * _ACT[spec.activations[k]][1](z, a)
        W = params[k][0]
        grads[k] = (h_in.T @ g, g.sum(axis=0))
        if k:
            g = g @ W.T
    return grads


def mse(pred: np.ndarray, y: np.ndarray) -> float:
    return float(np.mean((pred - y) ** 2))


def loss_and_grad(spec, params, x, y, training=False, rng=None):
    pred, cache = forward(spec, params, x, training, rng, return_cache=True)
    diff = pred - y
    loss = float(np.mean(diff ** 2))
    grads = backward(spec, params, cache, 2.0 * diff / diff.size)
    return loss, grads


def gradient_check(spec: RegressorSpec, params: Params, x, y, eps: float = 1e-6) -> float:
    """Max relative error between backprop and central differences (dropout off)."""
    _, grads = loss_and_grad(spec, params, x, y)
    worst = 0.0
    for (W, b), (gW, gb) in zip(params, grads):
        for arr, g in ((W, gW), (b, gb)):
            it = np.nditer(arr, flags=["multi_index"])
            for _ in it:
                i = it.multi_index
                old = arr[i]
                arr[i] = old + eps
                lp = mse(forward(spec, params, x), y)
                arr[i] = old - eps
                lm = mse(forward(spec, params, x), y)
                arr[i] = old
                num = (lp - lm) / (2 * eps)
                denom = max(abs(num), abs(g[i]), 1e-8)
                worst = max(worst, abs(num - g[i]) / denom)
    return worst


@dataclass
class Adam:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-7
    t: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    def step(self, params: Params, grads: Params) -> None:
        if not self.m:
            self.m = [(np.zeros_like(W), np.zeros_like(b)) for W, b in params]
            self.v = [(np.zeros_like(W), np.zeros_like(b)) for W, b in params]
        self.t += 1
        c1 = 1 - self.beta1 ** self.t
        c2 = 1 - self.beta2 ** self.t
        for k, ((W, b), (gW, gb)) in enumerate(zip(params, grads)):
            for j, (p, g) in enumerate(((W, gW), (b, gb))):
                m = self.m[k][j]
                v = self.v[k][j]
                m *= self.beta1
                m += (1 - self.beta1) * g
                v *= self.beta2
                v += (1 - self.beta2) * g * g
                p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


@dataclass
class ZScore:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, x: np.ndarray) -> "ZScore":
        x = np.asarray(x, dtype=float)
        if x.shape[0] < 2:
            raise ValueError("need at least two rows to fit a normalizer")
        return cls(x.mean(axis=0), x.std(axis=0))

    def apply(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        safe = np.where(self.std > 0, self.std, 1.0)
        return np.where(self.std > 0, (x - self.mean) / safe, 0.0)


def zscore_fit_apply(x: np.ndarray) -> tuple[ZScore, np.ndarray]:
    z = ZScore.fit(x)
    return z, z.apply(x)


@dataclass
class MinMax:
    lo: np.ndarray
    hi: np.ndarray

    @classmethod
    def fit(cls, y: np.ndarray) -> "MinMax":
        y = np.asarray(y, dtype=float)
        return cls(y.min(axis=0), y.max(axis=0))

    @property
    def span(self) -> np.ndarray:
        return np.where(self.hi > self.lo, self.hi - self.lo, 1.0)

    def apply(self, y: np.ndarray) -> np.ndarray:
        return (np.asarray(y, dtype=float) - self.lo) / self.span

    def invert(self, y: np.ndarray) -> np.ndarray:
        return np.asarray(y, dtype=float) * self.span + self.lo


def _as2d(a):
    a = np.asarray(a, dtype=float)
    return a[:, None] if a.ndim == 1 else a


def r_squared(pred, y) -> float:
    """Explained-variance ratio sum((pred-ybar)^2)/sum((y-ybar)^2), averaged over outputs."""
    pred, y = _as2d(pred), _as2d(y)
    if y.shape[0] < 2:
        raise DegenerateError("need at least two labels")
    ybar = y.mean(axis=0)
    sst = ((y - ybar) ** 2).sum(axis=0)
    if np.any(sst == 0):
        raise DegenerateError("label column with zero variance")
    return float(np.mean(((pred - ybar) ** 2).sum(axis=0) / sst))


def r_squared_conventional(pred, y) -> float:
    """1 - SS_res/SS_tot, averaged over outputs."""
    pred, y = _as2d(pred), _as2d(y)
    if y.shape[0] < 2:
        raise DegenerateError("need at least two labels")
    ybar = y.mean(axis=0)
    sst = ((y - ybar) ** 2).sum(axis=0)
    if np.any(sst == 0):
        raise DegenerateError("label column with zero variance")
    return float(np.mean(1.0 - ((pred - y) ** 2).sum(axis=0) / sst))


def varying_columns(y: np.ndarray) -> np.ndarray:
    y = _as2d(y)
    return np.flatnonzero(y.std(axis=0) > 0)


@dataclass
class History:
    train_loss: list[float] = field(default_factory=list)
    train_loss_dropout: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    val_r2: list[float] = field(default_factory=list)


@dataclass
class Model:
    spec: RegressorSpec
    params: Params
    normalizer: ZScore
    scaler: MinMax
    history: History = field(default_factory=History)
    manifest: dict = field(default_factory=dict)

    def predict_scaled(self, features: np.ndarray, batch: int = 4096) -> np.ndarray:
        x = self.normalizer.apply(_as2d_rows(features))
        out = [forward(self.spec, self.params, x[i:i + batch]) for i in range(0, len(x), batch)]
        return np.concatenate(out).astype(float)

    def predict(self, features: np.ndarray) -> np.ndarray:
        """Labels in physical units (seconds, probabilities, bit)."""
        return self.scaler.invert(self.predict_scaled(features))


def _as2d_rows(a):
    a = np.asarray(a, dtype=float)
    return a[None, :] if a.ndim == 1 else a


def split_indices(n: int, seed: int, fractions: Sequence[float] = (0.8, 0.1, 0.1)):
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError("split fractions must sum to 1")
    perm = np.random.default_rng([seed, 1]).permutation(n)
    a = int(round(fractions[0] * n))
    b = a + int(round(fractions[1] * n))
    return perm[:a], perm[a:b], perm[b:]


@dataclass
class TrainResult:
    model: Model
    history: History
    splits: tuple[np.ndarray, np.ndarray, np.ndarray]
    test_r2: float
    test_r2_conventional: float
    bit_accuracy: float
    test_loss: float


def train(features: np.ndarray, labels: np.ndarray, spec: RegressorSpec | None = None,
          epochs: int = 50, batch: int = 128, lr: float = 1e-3, beta1: float = 0.9,
          beta2: float = 0.999, seed: int = 0, split=(0.8, 0.1, 0.1),
          dtype=np.float32, log=None) -> TrainResult:
    """Fit on the training split, track validation, report on the test split."""
    X = np.asarray(features, dtype=float)
    Y = np.asarray(labels, dtype=float)
    if spec is None:
        spec = RegressorSpec(n_inputs=X.shape[1])
    if X.shape[1] != spec.n_inputs or Y.shape[1] != spec.n_outputs:
        raise ShapeError(f"data {X.shape[1]}->{Y.shape[1]} does not fit spec "
                         f"{spec.n_inputs}->{spec.n_outputs}")
    tr, va, te = split_indices(len(X), seed, split)
    if len(tr) < batch:
        raise ValueError("training split smaller than one batch")
    norm = ZScore.fit(X[tr])
    scaler = MinMax.fit(Y[tr])
    Xn = norm.apply(X).astype(dtype)
    Yn = scaler.apply(Y).astype(dtype)
    params = init_params(spec, seed, dtype)
    opt = Adam(lr, beta1, beta2)
    rng = np.random.default_rng([seed, 2])
    hist = History()

    def evaluate(idx):
        pred = np.concatenate([forward(spec, params, Xn[idx[i:i + 4096]])
                               for i in range(0, len(idx), 4096)])
        return pred, mse(pred, Yn[idx])

    for epoch in range(epochs):
        order = rng.permutation(tr)
        running = 0.0
        for i in range(0, len(order), batch):
            idx = order[i:i + batch]
            loss, grads = loss_and_grad(spec, params, Xn[idx], Yn[idx], True, rng)
            opt.step(params, grads)
            running += loss * len(idx)
        hist.train_loss_dropout.append(running / len(order))
        hist.train_loss.append(evaluate(tr)[1])
        vpred, vloss = evaluate(va)
        hist.val_loss.append(vloss)
        cols = varying_columns(Yn[va])
        hist.val_r2.append(r_squared(vpred[:, cols], Yn[va][:, cols]) if cols.size else float("nan"))
        if log:
            log(f"epoch {epoch + 1}: train {hist.train_loss[-1]:.5f} "
                f"val {vloss:.5f} r2 {hist.val_r2[-1]:.4f}")

    model = Model(spec, params, norm, scaler, hist, {
        "seed": seed, "epochs": epochs, "batch": batch,
        "adam": [lr, beta1, beta2], "split": list(split), "dtype": np.dtype(dtype).name,
    })
    tpred, tloss = evaluate(te)
    cols = varying_columns(Yn[te])
    r2 = r_squared(tpred[:, cols], Yn[te][:, cols])
    r2c = r_squared_conventional(tpred[:, cols], Yn[te][:, cols])
    bit_pred = scaler.invert(tpred)[:, -1] >= 0.5
    bit_true = Y[te, -1] >= 0.5
    acc = float(np.mean(bit_pred == bit_true))
    return TrainResult(model, hist, (tr, va, te), r2, r2c, acc, tloss)
