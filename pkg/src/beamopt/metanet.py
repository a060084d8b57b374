"""The update network: a small leaky-ReLU MLP with manual backprop.

Architecture is fixed at two hidden layers of 50 nodes; input and output
are the flattened real view (real parts then imaginary parts, row-major)
of one user's gradient / beamformer update, so the width is 2*n_tx*d and
the network is shared across users regardless of K.  The output layer is
zero-initialized: the very first update it proposes is exactly zero, and
everything it learns comes from the online meta objective.
"""

import math
from dataclasses import dataclass

import numpy as np

from beamopt._backend import kernels as _kern
from beamopt.classic import AdamState, adam_direction, adam_init

HIDDEN_WIDTH = 50
LEAKY_SLOPE = 0.01
DEFAULT_META_LR = 5e-4


def dims_for(n_tx, n_streams):
    """(n_in, h1, h2, n_out) for one user's flattened complex block."""
    m = 2 * n_tx * n_streams
    return (m, HIDDEN_WIDTH, HIDDEN_WIDTH, m)


@dataclass(frozen=True)
class MetaNetParams:
    """Weights and biases; w1 maps input->h1, w3 maps h2->output."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    w3: np.ndarray
    b3: np.ndarray
    slope: float = LEAKY_SLOPE

    @property
    def dims(self):
        return (self.w1.shape[1], self.w1.shape[0], self.w2.shape[0], self.w3.shape[0])

    @property
    def n_params(self):
        return sum(
            a.size for a in (self.w1, self.b1, self.w2, self.b2, self.w3, self.b3)
        )


@dataclass
class ForwardTape:
    """Input and activations recorded by net_forward for the backward pass."""

    x: np.ndarray
    z1: np.ndarray
    a1: np.ndarray
    z2: np.ndarray
    a2: np.ndarray


@dataclass
class NetGradients:
    """Parameter gradients in the same shapes as MetaNetParams."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    w3: np.ndarray
    b3: np.ndarray

    def add_(self, other):
        self.w1 += other.w1
        self.b1 += other.b1
        self.w2 += other.w2
        self.b2 += other.b2
        self.w3 += other.w3
        self.b3 += other.b3
        return self


def zero_gradients(params):
    return NetGradients(
        np.zeros_like(params.w1),
        np.zeros_like(params.b1),
        np.zeros_like(params.w2),
        np.zeros_like(params.b2),
        np.zeros_like(params.w3),
        np.zeros_like(params.b3),
    )


def net_init(dims, init_seed):
    """Fresh parameters: uniform(+-sqrt(6/fan_in)) hidden weights, zero
    biases, and an all-zero output layer (first proposed update is 0).

    init_seed is an int or a numpy SeedSequence.
    """
    if len(dims) != 4:
        raise ValueError("dims must be (n_in, h1, h2, n_out)")
    n_in, h1, h2, n_out = (int(x) for x in dims)
    if h1 != HIDDEN_WIDTH or h2 != HIDDEN_WIDTH:
        raise ValueError("hidden widths are fixed at %d" % HIDDEN_WIDTH)
    if n_in < 1 or n_out < 1:
        raise ValueError("input/output widths must be positive")
    if not isinstance(init_seed, np.random.SeedSequence):
        init_seed = np.random.SeedSequence(init_seed)
    rng = np.random.Generator(np.random.Philox(init_seed))
    w1 = rng.uniform(-1.0, 1.0, (h1, n_in)) * math.sqrt(6.0 / n_in)
    w2 = rng.uniform(-1.0, 1.0, (h2, h1)) * math.sqrt(6.0 / h1)
    return MetaNetParams(
        w1=w1,
        b1=np.zeros(h1),
        w2=w2,
        b2=np.zeros(h2),
        w3=np.zeros((n_out, h2)),
        b3=np.zeros(n_out),
    )


def net_forward(params, x):
    """Apply the network to one real input vector; returns (y, tape)."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.shape != (params.w1.shape[1],):
        raise ValueError(
            "input length %d does not match network width %d"
            % (x.size, params.w1.shape[1])
        )
    y, z1, a1, z2, a2 = _kern.net_forward(
        params.w1, params.b1, params.w2, params.b2, params.w3, params.b3,
        params.slope, x,
    )
    return y, ForwardTape(x, z1, a1, z2, a2)


def net_backward(params, tape, dl_dy):
    """Backprop one output gradient through the taped forward pass.

    Returns (NetGradients, dL/dx).  dL/dx is not consumed by the default
    (detached-input) meta update but is exact and used by diagnostics.
    """
    dl_dy = np.ascontiguousarray(dl_dy, dtype=np.float64)
    if dl_dy.shape != (params.w3.shape[0],):
        raise ValueError("output gradient length does not match network")
    if tape.x.shape != (params.w1.shape[1],):
        raise ValueError("tape does not match network dimensions")
    dw1, db1, dw2, db2, dw3, db3, dx = _kern.net_backward(
        params.w1, params.w2, params.w3, params.slope,
        tape.x, tape.z1, tape.a1, tape.z2, tape.a2, dl_dy,
    )
    return NetGradients(dw1, db1, dw2, db2, dw3, db3), dx


def _flatten(parts):
    return np.concatenate([p.ravel() for p in parts])


def params_flatten(params):
    """Concatenate all parameters into one real vector (fixed order)."""
    return _flatten((params.w1, params.b1, params.w2, params.b2, params.w3, params.b3))


def params_unflatten(flat, like):
    """Rebuild MetaNetParams from a flat vector shaped like `like`."""
    parts = []
    off = 0
    for a in (like.w1, like.b1, like.w2, like.b2, like.w3, like.b3):
        parts.append(np.asarray(flat[off:off + a.size], dtype=np.float64).reshape(a.shape))
        off += a.size
    if off != flat.size:
        raise ValueError("flat vector length does not match parameter count")
    return MetaNetParams(*parts, slope=like.slope)


def net_adam_ascent(params, grads, state, lr=DEFAULT_META_LR):
    """One Adam ascent step on all parameters; returns (params, state)."""
    g = _flatten((grads.w1, grads.b1, grads.w2, grads.b2, grads.w3, grads.b3))
    direction, state = adam_direction(state, g)
    return params_unflatten(params_flatten(params) + lr * direction, params), state


def net_adam_init(params):
    """AdamState sized for this network's flat parameter vector."""
    return adam_init(params.n_params)


def save_params(params, path):
    """Write parameters to a small text format (dims, slope, values)."""
    n_in, h1, h2, n_out = params.dims
    with open(path, "w") as f:
        f.write("dims %d %d %d %d\n" % (n_in, h1, h2, n_out))
        f.write("slope %.17g\n" % params.slope)
        for val in params_flatten(params):
            f.write("%.17g\n" % val)


def load_params(path):
    """Inverse of save_params."""
    with open(path) as f:
        head = f.readline().split()
        if len(head) != 5 or head[0] != "dims":
            raise ValueError("not a parameter file: %s" % path)
        dims = tuple(int(x) for x in head[1:])
        srow = f.readline().split()
        if len(srow) != 2 or srow[0] != "slope":
            raise ValueError("missing slope line in %s" % path)
        slope = float(srow[1])
        values = np.array([float(line) for line in f], dtype=np.float64)
    n_in, h1, h2, n_out = dims
    like = MetaNetParams(
        w1=np.zeros((h1, n_in)), b1=np.zeros(h1),
        w2=np.zeros((h2, h1)), b2=np.zeros(h2),
        w3=np.zeros((n_out, h2)), b3=np.zeros(n_out),
        slope=slope,
    )
    if values.size != like.n_params:
        raise ValueError("parameter count mismatch in %s" % path)
    return params_unflatten(values, like)


__all__ = [
    "HIDDEN_WIDTH", "LEAKY_SLOPE", "DEFAULT_META_LR",
    "MetaNetParams", "ForwardTape", "NetGradients", "AdamState",
    "dims_for", "net_init", "net_forward", "net_backward",
    "net_adam_ascent", "net_adam_init", "zero_gradients",
    "params_flatten", "params_unflatten", "save_params", "load_params",
]
