"""Small fully connected networks trained from scratch with Adam.

The regression targets are local coarse-operator increments, so the default
architecture is input 2*n_c, three tanh hidden layers of 16 units, and a
linear output of n_c.  Everything is plain numpy in float64; training is
deterministic given the seed.
"""

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Mlp",
    "AdamState",
    "TrainingConfig",
    "TrainingHistory",
    "Dataset",
    "forward",
    "gradient",
    "adam_step",
    "train",
    "relative_errors",
    "ErrorSummary",
    "model_jacobian",
    "flatten_params",
    "set_params",
]

DEFAULT_LAYERS = (8, 16, 16, 16, 4)


@dataclass
class Mlp:
    """Weights and biases of a tanh network with a linear output layer.

    weights[l] has shape (fan_in, fan_out); forward maps a batch (m, n_in)
    to (m, n_out).
    """

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @classmethod
    def initialize(cls, layers=DEFAULT_LAYERS, seed: int | np.random.SeedSequence = 0) -> "Mlp":
        """Glorot-uniform weights, zero biases, seeded."""
        rng = np.random.default_rng(seed)
        weights, biases = [], []
        for n_in, n_out in zip(layers[:-1], layers[1:]):
            limit = np.sqrt(6.0 / (n_in + n_out))
            weights.append(rng.uniform(-limit, limit, size=(n_in, n_out)))
            biases.append(np.zeros(n_out))
        return cls(weights, biases)

    @property
    def layer_sizes(self) -> tuple[int, ...]:
        return tuple([self.weights[0].shape[0]] + [w.shape[1] for w in self.weights])

    @property
    def n_in(self) -> int:
        return self.weights[0].shape[0]

    @property
    def n_out(self) -> int:
        return self.weights[-1].shape[1]

    def copy(self) -> "Mlp":
        return Mlp([w.copy() for w in self.weights], [b.copy() for b in self.biases])


def forward(net: Mlp, x: np.ndarray) -> np.ndarray:
    """Network output; accepts a single vector or a batch of rows."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    a = np.atleast_2d(x)
    if a.shape[1] != net.n_in:
        raise ValueError(f"expected input width {net.n_in}, got {a.shape[1]}")
    if not np.all(np.isfinite(a)):
        raise ValueError("input contains NaN or Inf")
    last = len(net.weights) - 1
    for l, (W, b) in enumerate(zip(net.weights, net.biases)):
        a = a @ W + b
        if l < last:
            a = np.tanh(a)
    return a[0] if single else a


def _forward_trace(net: Mlp, x: np.ndarray):
    """Forward pass keeping post-activation values of every layer."""
    activations = [x]
    a = x
    last = len(net.weights) - 1
    for l, (W, b) in enumerate(zip(net.weights, net.biases)):
        a = a @ W + b
        if l < last:
            a = np.tanh(a)
        activations.append(a)
    return activations


def model_jacobian(net: Mlp, x: np.ndarray):
    """Predictions and their derivatives w.r.t. every parameter.

    Returns (pred, J) with pred of shape (m, n_out) and J of shape
    (m*n_out, n_params); parameter order is all weights layer by layer
    (row-major), then all biases.  Used by the Gauss-Newton refinement.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    acts = _forward_trace(net, x)
    m = x.shape[0]
    no = net.n_out
    L = len(net.weights)
    delta = np.broadcast_to(np.eye(no), (m, no, no)).copy()
    w_parts = [None] * L
    b_parts = [None] * L
    for l in range(L - 1, -1, -1):
        w_parts[l] = np.einsum("ni,nkj->nkij", acts[l], delta)
        b_parts[l] = delta.copy()
        if l > 0:
            delta = np.einsum("nkj,ij->nki", delta, net.weights[l])
            delta = delta * (1.0 - acts[l] * acts[l])[:, None, :]
    J = np.concatenate(
        [p.reshape(m * no, -1) for p in w_parts]
        + [p.reshape(m * no, -1) for p in b_parts], axis=1)
    return acts[-1], J


def flatten_params(net: Mlp) -> np.ndarray:
    """Parameters as one vector, in model_jacobian's column order."""
    return np.concatenate([w.ravel() for w in net.weights]
                          + [b.ravel() for b in net.biases])


def set_params(net: Mlp, vec: np.ndarray) -> None:
    pos = 0
    for arr in net.weights + net.biases:
        arr.flat[:] = vec[pos:pos + arr.size]
        pos += arr.size


def mse_loss(net: Mlp, inputs: np.ndarray, targets: np.ndarray) -> float:
    """Mean squared error over all batch entries and output coordinates."""
    diff = forward(net, inputs) - targets
    return float(np.mean(diff * diff))


def gradient(net: Mlp, inputs: np.ndarray, targets: np.ndarray):
    """Backprop gradients of the mean squared error for one batch.

    Returns (weight_grads, bias_grads) shaped like the parameters.
    """
    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    m = inputs.shape[0]
    if m == 0:
        raise ValueError("empty batch")
    acts = _forward_trace(net, inputs)
    # d(loss)/d(output) for loss averaged over batch and coordinates
    delta = 2.0 * (acts[-1] - targets) / (m * net.n_out)
    w_grads = [np.empty_like(w) for w in net.weights]
    b_grads = [np.empty_like(b) for b in net.biases]
    for l in range(len(net.weights) - 1, -1, -1):
        a_prev = acts[l]
        w_grads[l] = a_prev.T @ delta
        b_grads[l] = delta.sum(axis=0)
        if l > 0:
            delta = (delta @ net.weights[l].T) * (1.0 - acts[l] * acts[l])
    return w_grads, b_grads


@dataclass
class AdamState:
    """First/second moment accumulators and step counter."""

    m_w: list[np.ndarray]
    v_w: list[np.ndarray]
    m_b: list[np.ndarray]
    v_b: list[np.ndarray]
    t: int = 0
    alpha: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_net(cls, net: Mlp, alpha: float = 0.001, beta1: float = 0.9,
                beta2: float = 0.999, eps: float = 1e-8) -> "AdamState":
        return cls(
            [np.zeros_like(w) for w in net.weights],
            [np.zeros_like(w) for w in net.weights],
            [np.zeros_like(b) for b in net.biases],
            [np.zeros_like(b) for b in net.biases],
            0, alpha, beta1, beta2, eps,
        )


def adam_step(state: AdamState, net: Mlp, w_grads, b_grads) -> None:
    """One bias-corrected Adam update, in place on net and state."""
    state.t += 1
    c1 = 1.0 - state.beta1**state.t
    c2 = 1.0 - state.beta2**state.t
    for params, grads, ms, vs in (
        (net.weights, w_grads, state.m_w, state.v_w),
        (net.biases, b_grads, state.m_b, state.v_b),
    ):
        for p, g, m, v in zip(params, grads, ms, vs):
            if p.shape != g.shape:
                raise ValueError("gradient shape does not match parameter shape")
            m *= state.beta1
            m += (1.0 - state.beta1) * g
            v *= state.beta2
            v += (1.0 - state.beta2) * (g * g)
            p -= state.alpha * (m / c1) / (np.sqrt(v / c2) + state.eps)


@dataclass(frozen=True)
class Dataset:
    """Paired inputs (m, 2*n_c) and targets (m, n_c)."""

    inputs: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        if self.inputs.shape[0] != self.targets.shape[0]:
            raise ValueError("inputs and targets must have the same row count")
        if self.inputs.shape[1] != 2 * self.targets.shape[1]:
            raise ValueError("input width must be twice the target width")

    def __len__(self) -> int:
        return self.inputs.shape[0]


@dataclass(frozen=True)
class TrainingConfig:
    epochs: int = 500
    batch_size: int = 10
    train_fraction: float = 0.8
    seed: int | np.random.SeedSequence = 0
    eval_every: int = 50

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train fraction must lie in (0, 1)")


@dataclass
class TrainingHistory:
    train_loss: list[float] = field(default_factory=list)   # per epoch
    test_loss: list[tuple[int, float]] = field(default_factory=list)  # every eval_every
    final_test_loss: float = float("nan")


def train(net: Mlp, data: Dataset, cfg: TrainingConfig) -> tuple[Mlp, TrainingHistory]:
    """Mini-batch Adam training with a seeded shuffle each epoch.

    The held-out fraction is split off with the same seed before training;
    the last partial batch of every epoch is kept.  Returns the trained net
    (the argument, modified in place) and the loss history.
    """
    if len(data) == 0:
        raise ValueError("empty dataset")
    if len(data) < cfg.batch_size:
        raise ValueError("dataset smaller than one batch")
    rng = np.random.default_rng(cfg.seed)
    perm = rng.permutation(len(data))
    n_train = max(1, int(round(cfg.train_fraction * len(data))))
    train_idx, test_idx = perm[:n_train], perm[n_train:]
    x_train, y_train = data.inputs[train_idx], data.targets[train_idx]
    x_test, y_test = data.inputs[test_idx], data.targets[test_idx]
    have_test = len(test_idx) > 0

    state = AdamState.for_net(net)
    history = TrainingHistory()
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n_train)
        for start in range(0, n_train, cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            w_grads, b_grads = gradient(net, x_train[batch], y_train[batch])
            adam_step(state, net, w_grads, b_grads)
        history.train_loss.append(mse_loss(net, x_train, y_train))
        if have_test and (epoch % cfg.eval_every == 0 or epoch == cfg.epochs):
            history.test_loss.append((epoch, mse_loss(net, x_test, y_test)))
    if have_test:
        history.final_test_loss = history.test_loss[-1][1]
    return net, history


@dataclass(frozen=True)
class ErrorSummary:
    rel_l2: float
    rel_linf: float
    skipped_rows: int = 0


def relative_errors(net: Mlp, data: Dataset) -> ErrorSummary:
    """Mean per-row relative l2 and l-infinity prediction errors.

    Rows whose target norm is zero cannot be normalized; they are skipped
    and counted.
    """
    pred = forward(net, data.inputs)
    diff = pred - data.targets
    l2_t = np.linalg.norm(data.targets, axis=1)
    linf_t = np.max(np.abs(data.targets), axis=1)
    keep = l2_t > 0.0
    if not np.any(keep):
        raise ValueError("every target row has zero norm")
    rel_l2 = float(np.mean(np.linalg.norm(diff[keep], axis=1) / l2_t[keep]))
    rel_linf = float(np.mean(np.max(np.abs(diff[keep]), axis=1) / linf_t[keep]))
    return ErrorSummary(rel_l2, rel_linf, int(np.sum(~keep)))
