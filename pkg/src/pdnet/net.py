"""Dense feedforward network with batch normalization, backprop and Adam.

Each layer computes ``act(BN(x @ W + b))``; batch normalization is optional
per layer and sits between the affine map and the activation. Inputs are
row-major batches of shape (n, input_dim).
"""

from dataclasses import dataclass, field

import numpy as np

from . import store
from .errors import DomainError, TrainingError

ACTIVATIONS = ("relu", "relu6", "linear")
BN_EPS = 1e-7
BN_MOMENTUM = 0.9


@dataclass(frozen=True)
class LayerSpec:
    input_dim: int
    output_dim: int
    activation: str = "relu"
    batch_norm: bool = False

    def __post_init__(self):
        if self.input_dim < 1 or self.output_dim < 1:
            raise DomainError("layer dimensions must be >= 1")
        if self.activation not in ACTIVATIONS:
            raise DomainError(f"unknown activation {self.activation!r}")


@dataclass
class Layer:
    spec: LayerSpec
    W: np.ndarray
    b: np.ndarray
    gamma: np.ndarray = None
    beta: np.ndarray = None
    running_mean: np.ndarray = None
    running_var: np.ndarray = None

    def parameters(self):
        if self.spec.batch_norm:
            return [self.W, self.b, self.gamma, self.beta]
        return [self.W, self.b]

    def buffers(self):
        if self.spec.batch_norm:
            return [self.running_mean, self.running_var]
        return []


@dataclass
class NetworkWeights:
    layers: list = field(default_factory=list)

    @property
    def specs(self):
        return [layer.spec for layer in self.layers]

    @property
    def input_dim(self):
        return self.layers[0].spec.input_dim

    @property
    def output_dim(self):
        return self.layers[-1].spec.output_dim

    def parameters(self):
        """Trainable arrays in a fixed order (per layer: W, b[, gamma, beta])."""
        return [p for layer in self.layers for p in layer.parameters()]

    def owners(self):
        """Layer index of each entry of :meth:`parameters`."""
        return [i for i, layer in enumerate(self.layers) for _ in layer.parameters()]

    def arrays(self):
        return [a for layer in self.layers for a in layer.parameters() + layer.buffers()]

    def copy(self):
        return NetworkWeights([
            Layer(l.spec, *[None if a is None else a.copy() for a in
                            (l.W, l.b, l.gamma, l.beta, l.running_mean, l.running_var)])
            for l in self.layers
        ])

    def __eq__(self, other):
        if not isinstance(other, NetworkWeights):
            return NotImplemented
        return self.specs == other.specs and all(
            np.array_equal(a, b) for a, b in zip(self.arrays(), other.arrays()))


def dense_specs(input_dim, hidden, output_dim=None, activation="relu", batch_norm=True):
    """Hidden layers with activation (+BN), optionally a final linear layer."""
    specs, prev = [], input_dim
    for width in hidden:
        specs.append(LayerSpec(prev, width, activation, batch_norm))
        prev = width
    if output_dim is not None:
        specs.append(LayerSpec(prev, output_dim, "linear", False))
    return specs


def init_weights(specs, seed) -> NetworkWeights:
    """He-uniform fan-in weights, zero biases, unit BN scale."""
    for a, b in zip(specs, specs[1:]):
        if a.output_dim != b.input_dim:
            raise DomainError("layer specs do not chain")
    rng = np.random.default_rng(seed)
    layers = []
    for spec in specs:
        limit = np.sqrt(6.0 / spec.input_dim)
        layer = Layer(spec, rng.uniform(-limit, limit, (spec.input_dim, spec.output_dim)),
                      np.zeros(spec.output_dim))
        if spec.batch_norm:
            layer.gamma = np.ones(spec.output_dim)
            layer.beta = np.zeros(spec.output_dim)
            layer.running_mean = np.zeros(spec.output_dim)
            layer.running_var = np.ones(spec.output_dim)
        layers.append(layer)
    return NetworkWeights(layers)


def _activate(kind, h):
    if kind == "relu":
        return np.maximum(h, 0.0)
    if kind == "relu6":
        return np.minimum(np.maximum(h, 0.0), 6.0)
    return h


def _activation_grad(kind, h):
    if kind == "relu":
        return (h > 0).astype(h.dtype)
    if kind == "relu6":
        return ((h > 0) & (h < 6)).astype(h.dtype)
    return np.ones_like(h)


def forward(weights: NetworkWeights, x, mode="train", update_stats=True):
    """Run the network; returns (output, cache) where cache feeds :func:`backward`.

    In ``train`` mode batch norm uses batch statistics (and, if
    ``update_stats``, folds them into the running averages); ``infer`` mode
    uses the running statistics.
    """
    if mode not in ("train", "infer"):
        raise DomainError(f"mode must be 'train' or 'infer', got {mode!r}")
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != weights.input_dim:
        raise DomainError(f"expected input of shape (n, {weights.input_dim}), got {x.shape}")
    cache = {"mode": mode, "layers": []}
    z = x
    for layer in weights.layers:
        spec = layer.spec
        entry = {"input": z}
        h = z @ layer.W + layer.b
        if spec.batch_norm:
            if mode == "train":
                if h.shape[0] < 2:
                    raise DomainError("batch norm needs at least 2 samples in train mode")
                mean = h.mean(axis=0)
                var = h.var(axis=0)
                if update_stats:
                    layer.running_mean *= BN_MOMENTUM
                    layer.running_mean += (1 - BN_MOMENTUM) * mean
                    layer.running_var *= BN_MOMENTUM
                    layer.running_var += (1 - BN_MOMENTUM) * var
            else:
                mean, var = layer.running_mean, layer.running_var
            inv_std = 1.0 / np.sqrt(var + BN_EPS)
            xhat = (h - mean) * inv_std
            entry.update(xhat=xhat, inv_std=inv_std)
            h = layer.gamma * xhat + layer.beta
        entry["pre"] = h
        z = _activate(spec.activation, h)
        cache["layers"].append(entry)
    cache["output"] = z
    return z, cache


def backward(weights: NetworkWeights, cache, output_gradient):
    """Reverse-mode gradients.

    Returns ``(grads, input_gradient)`` with ``grads`` aligned to
    ``weights.parameters()``. Infer-mode caches are accepted too; batch norm
    then acts as a fixed affine map.
    """
    entries = cache["layers"]
    if len(entries) != len(weights.layers):
        raise DomainError("cache does not match network depth")
    dz = np.asarray(output_gradient, dtype=np.float64)
    if dz.shape != cache["output"].shape:
        raise DomainError(f"output gradient shape {dz.shape} != {cache['output'].shape}")
    per_layer = []
    for layer, entry in zip(reversed(weights.layers), reversed(entries)):
        if entry["input"].shape[1] != layer.spec.input_dim:
            raise DomainError("stale cache: layer input width mismatch")
        dh = dz * _activation_grad(layer.spec.activation, entry["pre"])
        grads = []
        if layer.spec.batch_norm:
            xhat, inv_std = entry["xhat"], entry["inv_std"]
            dgamma = (dh * xhat).sum(axis=0)
            dbeta = dh.sum(axis=0)
            dxhat = dh * layer.gamma
            if cache["mode"] == "train":
                n = dh.shape[0]
                dh = inv_std / n * (n * dxhat - dxhat.sum(axis=0)
                                    - xhat * (dxhat * xhat).sum(axis=0))
            else:
                dh = dxhat * inv_std
            bn_grads = [dgamma, dbeta]
        else:
            bn_grads = []
        grads = [entry["input"].T @ dh, dh.sum(axis=0)] + bn_grads
        per_layer.append(grads)
        dz = dh @ layer.W.T
    flat = [g for grads in reversed(per_layer) for g in grads]
    return flat, dz


@dataclass
class AdamState:
    learning_rate: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    first: list = field(default_factory=list)
    second: list = field(default_factory=list)
    owners: list = field(default_factory=list)

    @classmethod
    def create(cls, params, learning_rate=1e-4, owners=None, **kwargs):
        return cls(learning_rate=learning_rate,
                   first=[np.zeros_like(p) for p in params],
                   second=[np.zeros_like(p) for p in params],
                   owners=list(owners) if owners is not None else list(range(len(params))),
                   **kwargs)


def adam_step(params, grads, state: AdamState, weight_decay=0.0):
    """Bias-corrected Adam update applied in place; returns ``(params, state)``."""
    if len(params) != len(grads) or len(params) != len(state.first):
        raise DomainError("parameter, gradient and state lists differ in length")
    for i, (p, g) in enumerate(zip(params, grads)):
        if p.shape != g.shape:
            raise DomainError(f"gradient shape {g.shape} != parameter shape {p.shape}")
        if not np.all(np.isfinite(g)):
            raise TrainingError("non-finite gradient", layer=state.owners[i])
    state.step += 1
    t = state.step
    c1 = 1 - state.beta1 ** t
    c2 = 1 - state.beta2 ** t
    for p, g, m, v in zip(params, grads, state.first, state.second):
        if weight_decay:
            g = g + weight_decay * p
        m *= state.beta1
        m += (1 - state.beta1) * g
        v *= state.beta2
        v += (1 - state.beta2) * g * g
        p -= state.learning_rate * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params, state


def minibatches(n, batch_size, seed, epoch):
    """Seeded shuffle re-derived from (seed, epoch); a 1-sample tail joins the previous batch."""
    order = np.random.default_rng([seed, epoch]).permutation(n)
    batches = [order[i:i + batch_size] for i in range(0, n, batch_size)]
    if len(batches) > 1 and batches[-1].size == 1:
        batches[-2] = np.concatenate(batches[-2:])
        batches.pop()
    return batches


def network_record(weights: NetworkWeights):
    """JSON-able layer specs plus the array list for the weights container."""
    specs = [
        {"input_dim": s.input_dim, "output_dim": s.output_dim,
         "activation": s.activation, "batch_norm": s.batch_norm}
        for s in weights.specs
    ]
    return specs, weights.arrays()


def network_from_record(specs, arrays) -> NetworkWeights:
    arrays = list(arrays)
    layers = []
    for raw in specs:
        spec = LayerSpec(**raw)
        W, b = arrays.pop(0), arrays.pop(0)
        if W.shape != (spec.input_dim, spec.output_dim) or b.shape != (spec.output_dim,):
            raise DomainError("weight shapes do not match layer spec")
        layer = Layer(spec, W, b)
        if spec.batch_norm:
            layer.gamma, layer.beta, layer.running_mean, layer.running_var = (
                arrays.pop(0) for _ in range(4))
        layers.append(layer)
    if arrays:
        raise DomainError("extra arrays after the last layer")
    return NetworkWeights(layers)


def save_weights(weights: NetworkWeights, path, meta=None):
    specs, arrays = network_record(weights)
    store.write(path, {"kind": "network", "networks": {"net": specs}, "meta": meta or {}},
                arrays)


def load_weights(path) -> NetworkWeights:
    header, arrays = store.read(path)
    try:
        return network_from_record(header["networks"]["net"], arrays)
    except (KeyError, TypeError, DomainError) as exc:
        raise store.FormatError(f"weights file does not hold a single network: {exc}") from exc
