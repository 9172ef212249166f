"""Binary twin neural network and the regularized feed-forward baseline.

Two independent one-hidden-layer tanh networks are trained, one per
class.  Each network drives its own class onto the output hyperplane
(pre-activation 0) while pushing the other class to a tanh output of -1
(through the positive-class network) or +1 (through the negative-class
network), the least-squares analogue of the twin SVM's unit-margin
constraints.  Prediction assigns the class whose hyperplane is closer in
normalized absolute distance |w.phi(x)+b| / ||w||.

Both networks draw the same initial parameters from the model seed; the
output head is oriented by the side's margin target, which makes the two
side losses exact mirror images.  Swapping class labels together with
(c_plus, c_minus) therefore flips every prediction bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numcore import DivergenceError, Rng, ShapeError
from .data import Dataset, DataError

__all__ = [
    "TwinHyper",
    "HiddenLayer",
    "HeadParams",
    "SideNet",
    "SideGradients",
    "TwinNNModel",
    "loss_plus",
    "loss_minus",
    "gradients_plus",
    "gradients_minus",
    "margin_loss",
    "proximal_loss",
    "margin_gradients",
    "proximal_gradients",
    "train",
    "predict",
    "decision_values",
    "RfnnModel",
    "train_rfnn_baseline",
    "rfnn_decision",
    "rfnn_predict",
    "rfnn_loss",
    "rfnn_gradients",
]


@dataclass(frozen=True)
class TwinHyper:
    """Training hyperparameters for the binary twin network."""

    c_plus: float = 1.0
    c_minus: float = 1.0
    hidden: int = 10
    lr: float = 0.05
    epochs: int = 2000
    tol: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if self.c_plus < 0 or self.c_minus < 0:
            raise ValueError("c_plus and c_minus must be non-negative")
        if self.hidden < 1:
            raise ValueError(f"hidden width must be >= 1, got {self.hidden}")
        if self.lr <= 0:
            raise ValueError(f"learning rate must be positive, got {self.lr}")
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        if self.tol < 0:
            raise ValueError(f"tol must be >= 0, got {self.tol}")


@dataclass(frozen=True, eq=False)
class HiddenLayer:
    """tanh feature map: x -> tanh(W x + c) with W of shape (h, M)."""

    weights: np.ndarray
    biases: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        b = np.asarray(self.biases, dtype=np.float64)
        if w.ndim != 2 or b.ndim != 1 or b.shape[0] != w.shape[0]:
            raise ShapeError("hidden layer needs (h, M) weights and (h,) biases")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise ValueError("hidden layer parameters must be finite")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "biases", b)

    @property
    def width(self) -> int:
        return self.weights.shape[0]

    @property
    def n_features(self) -> int:
        return self.weights.shape[1]

    def map(self, x: np.ndarray) -> np.ndarray:
        """Feature map of one sample (M,) or a batch (N, M)."""
        return np.tanh(x @ self.weights.T + self.biases)


@dataclass(frozen=True, eq=False)
class HeadParams:
    """Output hyperplane in the hidden feature space."""

    w: np.ndarray
    b: float

    def __post_init__(self):
        w = np.asarray(self.w, dtype=np.float64)
        if w.ndim != 1:
            raise ShapeError("head weight must be 1-D")
        if not (np.all(np.isfinite(w)) and np.isfinite(self.b)):
            raise ValueError("head parameters must be finite")
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "b", float(self.b))

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.w))


@dataclass(frozen=True, eq=False)
class SideNet:
    """One class's network: feature map plus output hyperplane."""

    hidden: HiddenLayer
    head: HeadParams
    final_loss: float | None = None

    def preactivation(self, x: np.ndarray) -> np.ndarray | float:
        z = self.hidden.map(x) @ self.head.w + self.head.b
        return float(z) if np.ndim(x) == 1 else z


@dataclass(frozen=True, eq=False)
class SideGradients:
    """Gradient of a side loss w.r.t. every parameter of that side."""

    hidden_weights: np.ndarray
    hidden_biases: np.ndarray
    w: np.ndarray
    b: float

    def __add__(self, other: "SideGradients") -> "SideGradients":
        return SideGradients(
            self.hidden_weights + other.hidden_weights,
            self.hidden_biases + other.hidden_biases,
            self.w + other.w,
            self.b + other.b,
        )

    def max_abs(self) -> float:
        return max(
            float(np.max(np.abs(self.hidden_weights))),
            float(np.max(np.abs(self.hidden_biases))),
            float(np.max(np.abs(self.w))),
            abs(self.b),
        )


@dataclass(frozen=True, eq=False)
class TwinNNModel:
    """Trained pair of class networks; immutable and safe to share."""

    plus: SideNet
    minus: SideNet
    hyper: TwinHyper
    n_features: int


def _check_rows(rows: np.ndarray, name: str) -> np.ndarray:
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[0] < 1:
        raise ShapeError(f"{name} must be a non-empty (N, M) array")
    return rows


def margin_loss(side: SideNet, other_rows: np.ndarray, target: float) -> float:
    """Mean squared gap between tanh outputs on other-class rows and target."""
    other_rows = _check_rows(other_rows, "other_rows")
    y = np.tanh(side.preactivation(other_rows))
    r = y - target
    return float(r @ r) / (2.0 * other_rows.shape[0])


def proximal_loss(side: SideNet, own_rows: np.ndarray, c: float) -> float:
    """Weighted mean squared pre-activation on the side's own rows."""
    own_rows = _check_rows(own_rows, "own_rows")
    z = side.preactivation(own_rows)
    return c * float(z @ z) / (2.0 * own_rows.shape[0])


def margin_gradients(side: SideNet, other_rows: np.ndarray, target: float) -> SideGradients:
    """Analytic gradient of the margin term, including the tanh factor."""
    other_rows = _check_rows(other_rows, "other_rows")
    n = other_rows.shape[0]
    phi = side.hidden.map(other_rows)
    z = phi @ side.head.w + side.head.b
    y = np.tanh(z)
    delta = (y - target) * (1.0 - y * y) / n
    return _backprop(side, other_rows, phi, delta)


def proximal_gradients(side: SideNet, own_rows: np.ndarray, c: float) -> SideGradients:
    """Analytic gradient of the proximal term; exactly linear in ``c``."""
    own_rows = _check_rows(own_rows, "own_rows")
    n = own_rows.shape[0]
    phi = side.hidden.map(own_rows)
    z = phi @ side.head.w + side.head.b
    delta = (c / n) * z
    return _backprop(side, own_rows, phi, delta)


def _backprop(side: SideNet, rows: np.ndarray, phi: np.ndarray,
              delta: np.ndarray) -> SideGradients:
    """Push per-sample output gradients ``delta`` back through the side."""
    dw = phi.T @ delta
    db = float(delta.sum())
    dphi = delta[:, None] * side.head.w[None, :]
    dpre = dphi * (1.0 - phi * phi)
    dhw = dpre.T @ rows
    dhb = dpre.sum(axis=0)
    return SideGradients(dhw, dhb, dw, db)


def loss_plus(side: SideNet, a_rows, b_rows, c_plus: float) -> float:
    """Positive-class loss: margin over B rows (target -1) + proximal over A."""
    return margin_loss(side, b_rows, -1.0) + proximal_loss(side, a_rows, c_plus)


def loss_minus(side: SideNet, a_rows, b_rows, c_minus: float) -> float:
    """Negative-class loss: margin over A rows (target +1) + proximal over B."""
    return margin_loss(side, a_rows, 1.0) + proximal_loss(side, b_rows, c_minus)


def gradients_plus(side: SideNet, a_rows, b_rows, c_plus: float) -> SideGradients:
    return margin_gradients(side, b_rows, -1.0) + proximal_gradients(side, a_rows, c_plus)


def gradients_minus(side: SideNet, a_rows, b_rows, c_minus: float) -> SideGradients:
    return margin_gradients(side, a_rows, 1.0) + proximal_gradients(side, b_rows, c_minus)


def _uniform_init(rng: Rng, shape: tuple[int, ...], fan_in: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    n = int(np.prod(shape))
    return rng.uniform(-bound, bound, n).reshape(shape)


def _draw_initial_params(rng: Rng, hidden: int, n_features: int):
    """One shared parameter draw used to initialize both sides."""
    hw = _uniform_init(rng, (hidden, n_features), n_features)
    hb = _uniform_init(rng, (hidden,), n_features)
    while True:
        w = _uniform_init(rng, (hidden,), hidden)
        if np.linalg.norm(w) > 0:
            break
    b = float(rng.uniform(-1.0 / np.sqrt(hidden), 1.0 / np.sqrt(hidden)))
    return hw, hb, w, b


def _train_side(own: np.ndarray, other: np.ndarray, c: float, target: float,
                init, lr: float, epochs: int, tol: float, side_name: str) -> SideNet:
    hw, hb, w, b = (arr.copy() if isinstance(arr, np.ndarray) else arr for arr in init)
    side = SideNet(HiddenLayer(hw, hb), HeadParams(w, b))
    # overflow past float range is caught by the finiteness checks below
    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(epochs):
            loss = margin_loss(side, other, target) + proximal_loss(side, own, c)
            if not np.isfinite(loss):
                raise DivergenceError(
                    f"{side_name} side diverged at epoch {epoch}: loss is non-finite",
                    side=side_name, epoch=epoch,
                )
            grads = margin_gradients(side, other, target) + proximal_gradients(side, own, c)
            side = SideNet(
                HiddenLayer(side.hidden.weights - lr * grads.hidden_weights,
                            side.hidden.biases - lr * grads.hidden_biases),
                HeadParams(side.head.w - lr * grads.w, side.head.b - lr * grads.b),
            )
            if lr * grads.max_abs() < tol:
                break
        final = margin_loss(side, other, target) + proximal_loss(side, own, c)
    if not np.isfinite(final):
        raise DivergenceError(
            f"{side_name} side diverged at epoch {epochs}: loss is non-finite",
            side=side_name, epoch=epochs,
        )
    return SideNet(side.hidden, side.head, final_loss=final)


def class_rows(data: Dataset) -> tuple[np.ndarray, np.ndarray]:
    """Split a {+1,-1}-labeled dataset into (A, B) feature blocks."""
    ids = set(data.class_ids.tolist())
    if not ids <= {-1, 1}:
        raise DataError(
            f"twin training needs labels in {{+1,-1}}, got {sorted(ids)}; "
            "relabel with make_imbalanced first"
        )
    if ids != {-1, 1}:
        raise DataError(f"both classes must be present, got only {sorted(ids)}")
    if data.missing is not None:
        raise DataError("dataset has missing values; impute before training")
    a = data.features[data.labels == 1]
    b = data.features[data.labels == -1]
    return a, b


def train(data: Dataset, hyper: TwinHyper) -> TwinNNModel:
    """Full-batch gradient descent of both side losses, independently.

    Deterministic in ``hyper.seed``: both sides share one initial draw,
    with the head sign oriented by the side's margin target.  Stops early
    when the applied parameter update falls below ``hyper.tol`` in
    infinity norm.
    """
    a, b = class_rows(data)
    rng = Rng(hyper.seed)
    hw, hb, w, head_b = _draw_initial_params(rng, hyper.hidden, data.n_features)
    plus = _train_side(a, b, hyper.c_plus, -1.0, (hw, hb, w, head_b),
                       hyper.lr, hyper.epochs, hyper.tol, "plus")
    minus = _train_side(b, a, hyper.c_minus, 1.0, (hw, hb, -w, -head_b),
                        hyper.lr, hyper.epochs, hyper.tol, "minus")
    return TwinNNModel(plus, minus, hyper, data.n_features)


def _side_distance(side: SideNet, x: np.ndarray, signed: bool):
    norm = side.head.norm
    if norm == 0.0:
        raise ValueError("head weight vector has zero norm; distance undefined")
    z = side.preactivation(x)
    return z / norm if signed else np.abs(z) / norm


def decision_values(model: TwinNNModel, x, signed: bool = False):
    """Per-side plane distances for one sample (M,) or a batch (N, M).

    Default is the absolute normalized distance |w.phi(x)+b| / ||w||;
    ``signed=True`` keeps the raw sign for callers that want the
    literal signed comparison instead of geometric distances.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != model.n_features:
        raise ShapeError(f"expected {model.n_features} features, got {x.shape[-1]}")
    return (_side_distance(model.plus, x, signed),
            _side_distance(model.minus, x, signed))


def predict(model: TwinNNModel, x, signed: bool = False):
    """Label +1 where the positive plane is at least as close, else -1."""
    d_plus, d_minus = decision_values(model, x, signed=signed)
    labels = np.where(d_plus <= d_minus, 1, -1)
    return int(labels) if np.ndim(x) == 1 else labels.astype(np.int64)


@dataclass(frozen=True, eq=False)
class RfnnModel:
    """One-hidden-layer tanh network with a linear output, L2-regularized."""

    hidden: HiddenLayer
    w: np.ndarray
    b: float
    l2: float
    lr: float
    epochs: int
    seed: int
    final_loss: float | None = None

    @property
    def n_features(self) -> int:
        return self.hidden.n_features


def rfnn_decision(model: RfnnModel, x) -> np.ndarray | float:
    """Raw network output for one sample or a batch."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != model.n_features:
        raise ShapeError(f"expected {model.n_features} features, got {x.shape[-1]}")
    z = model.hidden.map(x) @ model.w + model.b
    return float(z) if x.ndim == 1 else z


def rfnn_predict(model: RfnnModel, x):
    """Sign of the output; ties at exactly zero go to +1."""
    z = rfnn_decision(model, x)
    labels = np.where(np.asarray(z) >= 0, 1, -1)
    return int(labels) if np.ndim(x) == 1 else labels.astype(np.int64)


def rfnn_loss(hidden: HiddenLayer, w: np.ndarray, b: float,
              rows: np.ndarray, targets: np.ndarray, l2: float) -> float:
    """Mean squared error to targets plus l2/2 times squared weight norms.

    Biases are not penalized, so under extreme l2 the output collapses to
    the target mean.
    """
    phi = hidden.map(rows)
    y = phi @ w + b
    r = y - targets
    penalty = 0.5 * l2 * (float(np.sum(hidden.weights**2)) + float(w @ w))
    return float(r @ r) / (2.0 * rows.shape[0]) + penalty


def rfnn_gradients(hidden: HiddenLayer, w: np.ndarray, b: float,
                   rows: np.ndarray, targets: np.ndarray, l2: float) -> SideGradients:
    phi = hidden.map(rows)
    y = phi @ w + b
    delta = (y - targets) / rows.shape[0]
    dw = phi.T @ delta + l2 * w
    db = float(delta.sum())
    dphi = delta[:, None] * w[None, :]
    dpre = dphi * (1.0 - phi * phi)
    dhw = dpre.T @ rows + l2 * hidden.weights
    dhb = dpre.sum(axis=0)
    return SideGradients(dhw, dhb, dw, db)


def train_rfnn_baseline(data: Dataset, hidden: int = 10, lr: float = 0.05,
                        epochs: int = 2000, l2: float = 1e-4,
                        seed: int = 0) -> RfnnModel:
    """Train the regularized feed-forward baseline on {+1,-1} labels."""
    class_rows(data)  # validates binary +-1 labels and completeness
    if hidden < 1:
        raise ValueError(f"hidden width must be >= 1, got {hidden}")
    if lr <= 0:
        raise ValueError(f"learning rate must be positive, got {lr}")
    if l2 < 0:
        raise ValueError(f"l2 must be non-negative, got {l2}")
    rows = data.features
    targets = data.labels.astype(np.float64)
    rng = Rng(seed)
    hw, hb, w, b = _draw_initial_params(rng, hidden, data.n_features)
    layer = HiddenLayer(hw, hb)
    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(epochs):
            loss = rfnn_loss(layer, w, b, rows, targets, l2)
            if not np.isfinite(loss):
                raise DivergenceError(
                    f"rfnn diverged at epoch {epoch}: loss is non-finite",
                    side="rfnn", epoch=epoch,
                )
            grads = rfnn_gradients(layer, w, b, rows, targets, l2)
            layer = HiddenLayer(layer.weights - lr * grads.hidden_weights,
                                layer.biases - lr * grads.hidden_biases)
            w = w - lr * grads.w
            b = b - lr * grads.b
        final = rfnn_loss(layer, w, b, rows, targets, l2)
    if not np.isfinite(final):
        raise DivergenceError(
            f"rfnn diverged at epoch {epochs}: loss is non-finite",
            side="rfnn", epoch=epochs,
        )
    return RfnnModel(layer, w, b, l2, lr, epochs, seed, final_loss=final)
