"""Dense feed-forward networks with hand-derived backpropagation.

Networks are plain parameter containers; the forward/backward math lives
in module-level functions on top of the kernel backend. Weights use the
(out_dim, in_dim) layout, activations are LeakyReLU in the hidden layers
and one of logistic / softmax / leaky_relu / identity at the output.
Everything is float64: the finite-difference gradient checks and the
divergence tolerances in the test-suite need the headroom.
"""

from dataclasses import dataclass, field

import numpy as np

from ._kernels import kernels as K

HIDDEN_ALPHA = 0.2  # conventional GAN LeakyReLU slope

OUTPUT_ACTIVATIONS = ("identity", "logistic", "softmax", "leaky_relu")


class ShapeError(ValueError):
    """Array dimensions incompatible with the network architecture."""


class DivergenceError(RuntimeError):
    """Non-finite value produced during training."""

    def __init__(self, message, layer_index=None):
        super().__init__(message)
        self.layer_index = layer_index


def geometric_dims(d_in, d_out, n_layers):
    """Layer widths interpolated geometrically from d_in to d_out.

    Returns n_layers + 1 dims (input included), each at least 1.
    """
    if n_layers < 1:
        raise ValueError("n_layers must be >= 1")
    ratio = (d_out / d_in) ** (1.0 / n_layers)
    dims = [d_in]
    for i in range(1, n_layers):
        dims.append(max(1, round(d_in * ratio**i)))
    dims.append(d_out)
    return dims


class DenseNet:
    """A fully connected network: affine layers + fixed activation plan."""

    def __init__(self, layer_dims, output_activation="identity",
                 hidden_alpha=HIDDEN_ALPHA, rng=None):
        if len(layer_dims) < 2 or any(d < 1 for d in layer_dims):
            raise ShapeError(f"bad layer dims {layer_dims}")
        if output_activation not in OUTPUT_ACTIVATIONS:
            raise ValueError(f"unknown output activation {output_activation!r}")
        self.layer_dims = list(layer_dims)
        self.output_activation = output_activation
        self.hidden_alpha = float(hidden_alpha)
        self.weights = []
        self.biases = []
        for din, dout in zip(layer_dims[:-1], layer_dims[1:]):
            if rng is None:
                w = np.zeros((dout, din))
            else:
                # Glorot-style uniform init keeps early activations in range.
                limit = np.sqrt(6.0 / (din + dout))
                w = rng.uniform(-limit, limit, size=(dout, din))
            self.weights.append(w)
            self.biases.append(np.zeros(dout))

    @property
    def n_layers(self):
        return len(self.weights)

    @property
    def input_dim(self):
        return self.layer_dims[0]

    @property
    def output_dim(self):
        return self.layer_dims[-1]

    def parameters(self):
        """All parameter arrays, weights and biases interleaved per layer."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def set_parameters(self, arrays):
        """Copy values from a parameters()-ordered list into this net."""
        if len(arrays) != 2 * self.n_layers:
            raise ShapeError("parameter count mismatch")
        for dst, src in zip(self.parameters(), arrays):
            if dst.shape != src.shape:
                raise ShapeError(f"parameter shape mismatch {dst.shape} vs {src.shape}")
            np.copyto(dst, src)

    def copy(self):
        clone = DenseNet(self.layer_dims, self.output_activation, self.hidden_alpha)
        clone.set_parameters(self.parameters())
        return clone

    def _activation_kind(self, layer):
        return self.output_activation if layer == self.n_layers - 1 else "leaky_relu"


@dataclass
class ForwardTrace:
    """Per-layer values recorded by mlp_forward for the backward pass."""

    inputs: list   # activation entering each layer (inputs[0] is the batch)
    pre: list      # affine outputs per layer
    post: list     # activation outputs per layer

    @property
    def output(self):
        return self.post[-1]


def _apply_activation(kind, z, alpha):
    if kind == "identity":
        return z
    if kind == "leaky_relu":
        return K.leaky_relu(z, alpha)
    if kind == "logistic":
        return K.logistic(z)
    return K.softmax(z)


def _activation_backward(kind, z, a, g, alpha):
    if kind == "identity":
        return g
    if kind == "leaky_relu":
        return K.leaky_relu_backward(z, g, alpha)
    if kind == "logistic":
        return K.logistic_backward(a, g)
    return K.softmax_backward(a, g)


def as_batch(values):
    """Validate and convert to a C-contiguous float64 (B, dim) matrix."""
    x = np.ascontiguousarray(values, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 1:
        raise ShapeError(f"batch must be a non-empty 2-D matrix, got shape {x.shape}")
    return x

def mlp_forward(net, batch):
    """Run the network on a batch, keeping every intermediate activation."""
    x = as_batch(batch)
    if x.shape[1] != net.input_dim:
        raise ShapeError(
            f"batch has {x.shape[1]} columns, network expects {net.input_dim}")
    inputs, pre, post = [], [], []
    a = x
    for layer in range(net.n_layers):
        inputs.append(a)
        z = K.affine(a, net.weights[layer], net.biases[layer])
        a = _apply_activation(net._activation_kind(layer), z, net.hidden_alpha)
        pre.append(z)
        post.append(a)
    return ForwardTrace(inputs, pre, post)


def mlp_backward(net, trace, output_gradient):
    """Backpropagate d(loss)/d(output) through the recorded trace.

    Returns (weight_grads, bias_grads, input_gradient). Raises
    DivergenceError with the offending layer index if any gradient is
    non-finite.
    """
    g = np.ascontiguousarray(output_gradient, dtype=np.float64)
    if g.shape != trace.output.shape:
        raise ShapeError(
            f"output gradient shape {g.shape} != output shape {trace.output.shape}")
    weight_grads = [None] * net.n_layers
    bias_grads = [None] * net.n_layers
    for layer in range(net.n_layers - 1, -1, -1):
        gz = _activation_backward(net._activation_kind(layer), trace.pre[layer],
                                  trace.post[layer], g, net.hidden_alpha)
        g, gw, gb = K.affine_backward(trace.inputs[layer], net.weights[layer], gz)
        if not (np.isfinite(gw).all() and np.isfinite(gb).all()):
            raise DivergenceError(
                f"non-finite gradient in layer {layer}", layer_index=layer)
        weight_grads[layer] = gw
        bias_grads[layer] = gb
    if not np.isfinite(g).all():
        raise DivergenceError("non-finite input gradient", layer_index=0)
    return weight_grads, bias_grads, g


@dataclass
class AdamState:
    """Adam moments for one parameter group (a list of arrays)."""

    first_moment: list
    second_moment: list
    step_count: int = 0
    learning_rate: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.9
    epsilon: float = 1e-8

    @classmethod
    def for_params(cls, params, learning_rate=2e-4, beta1=0.5, beta2=0.9,
                   epsilon=1e-8):
        return cls(
            first_moment=[np.zeros_like(p) for p in params],
            second_moment=[np.zeros_like(p) for p in params],
            learning_rate=learning_rate,
            beta1=beta1,
            beta2=beta2,
            epsilon=epsilon,
        )

    def copy(self):
        return AdamState(
            first_moment=[m.copy() for m in self.first_moment],
            second_moment=[v.copy() for v in self.second_moment],
            step_count=self.step_count,
            learning_rate=self.learning_rate,
            beta1=self.beta1,
            beta2=self.beta2,
            epsilon=self.epsilon,
        )

    def reset(self):
        for m in self.first_moment:
            m.fill(0.0)
        for v in self.second_moment:
            v.fill(0.0)
        self.step_count = 0


def adam_step(params, grads, state):
    """Apply one bias-corrected Adam update in place.

    Returns (params, state); both are mutated. Parameters are left
    untouched when state.learning_rate is 0 (step_count still advances).
    """
    if len(params) != len(grads) or len(params) != len(state.first_moment):
        raise ShapeError("parameter/gradient/state group sizes differ")
    state.step_count += 1
    for p, g, m, v in zip(params, grads, state.first_moment, state.second_moment):
        if p.shape != g.shape:
            raise ShapeError(f"gradient shape {g.shape} != parameter shape {p.shape}")
        K.adam_update(p.reshape(-1), np.ascontiguousarray(g, dtype=np.float64).reshape(-1),
                      m.reshape(-1), v.reshape(-1), state.step_count,
                      state.learning_rate, state.beta1, state.beta2, state.epsilon)
    return params, state


def finite_diff_grad(net, loss_fn, batch, h=1e-5):
    """Central-difference gradient of loss_fn(net, batch) for every parameter.

    The oracle counterpart of mlp_backward; loss_fn must be deterministic.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    grads = []
    for p in net.parameters():
        g = np.zeros_like(p)
        flat_p = p.reshape(-1)
        flat_g = g.reshape(-1)
        for i in range(flat_p.size):
            orig = flat_p[i]
            flat_p[i] = orig + h
            hi = loss_fn(net, batch)
            flat_p[i] = orig - h
            lo = loss_fn(net, batch)
            flat_p[i] = orig
            flat_g[i] = (hi - lo) / (2.0 * h)
        grads.append(g)
    return grads
