"""Layer zoo built from the autodiff primitives.

Parameters live in a ParameterSet and are addressed by dotted names; every
layer function takes the set plus a name prefix. Linear weights use the
(in_features, out_features) layout so forward is a plain x @ w.
"""

from __future__ import annotations

import numpy as np

from . import tensor as T
from .tensor import Tensor


def linear(params, prefix: str, x: Tensor) -> Tensor:
    w = params[prefix + ".w"]
    b = params[prefix + ".b"]
    return T.add(T.matmul(x, w), b)


def conv_norm_relu(params, prefix: str, x: Tensor, stride: int = 1) -> Tensor:
    y = T.conv2d(x, params[prefix + ".w"], params[prefix + ".b"], stride=stride, pad=1)
    y = T.instance_norm2d(y, params[prefix + ".g"], params[prefix + ".s"])
    return T.relu(y)


def residual_block(params, prefix: str, x: Tensor) -> Tensor:
    y = conv_norm_relu(params, prefix + ".c1", x)
    y = conv_norm_relu(params, prefix + ".c2", y)
    return T.add(x, y)


def global_avg_pool(x: Tensor) -> Tensor:
    return T.mean(x, axis=(2, 3))


def gru_cell(params, prefix: str, x: Tensor, h: Tensor) -> Tensor:
    """Standard gated recurrent unit update (gate order: reset, update,
    candidate). Differentiable through time when chained over steps."""
    hid = h.shape[-1]
    gi = T.add(T.matmul(x, params[prefix + ".w_ih"]), params[prefix + ".b_ih"])
    gh = T.add(T.matmul(h, params[prefix + ".w_hh"]), params[prefix + ".b_hh"])
    r = T.sigmoid(T.add(gi[:, 0:hid], gh[:, 0:hid]))
    z = T.sigmoid(T.add(gi[:, hid:2 * hid], gh[:, hid:2 * hid]))
    n = T.tanh(T.add(gi[:, 2 * hid:3 * hid], T.mul(r, gh[:, 2 * hid:3 * hid])))
    one_minus_z = T.add(1.0, T.mul(z, -1.0))
    return T.add(T.mul(one_minus_z, n), T.mul(z, h))


def gru_stack(params, prefix: str, x: Tensor, hs: list[Tensor]) -> tuple[Tensor, list[Tensor]]:
    """Run a multi-layer GRU for one step. hs holds one hidden per layer."""
    out = x
    new_hs = []
    for li, h in enumerate(hs):
        out = gru_cell(params, f"{prefix}.l{li}", out, h)
        new_hs.append(out)
    return out, new_hs


def init_linear(params, prefix: str, rng, n_in: int, n_out: int, scale: float | None = None):
    a = np.sqrt(6.0 / n_in) if scale is None else scale
    params.add(prefix + ".w", rng.uniform(-a, a, size=(n_in, n_out)).astype(np.float32))
    params.add(prefix + ".b", np.zeros(n_out, dtype=np.float32))


def init_conv(params, prefix: str, rng, c_in: int, c_out: int, k: int = 3):
    fan_in = c_in * k * k
    a = np.sqrt(6.0 / fan_in)   # uniform with variance 2 / fan_in
    params.add(prefix + ".w", rng.uniform(-a, a, size=(c_out, c_in, k, k)).astype(np.float32))
    params.add(prefix + ".b", np.zeros(c_out, dtype=np.float32))
    params.add(prefix + ".g", np.ones(c_out, dtype=np.float32))
    params.add(prefix + ".s", np.zeros(c_out, dtype=np.float32))


def init_residual(params, prefix: str, rng, c: int):
    init_conv(params, prefix + ".c1", rng, c, c)
    init_conv(params, prefix + ".c2", rng, c, c)


def init_gru(params, prefix: str, rng, n_in: int, hidden: int, layers: int):
    for li in range(layers):
        d = n_in if li == 0 else hidden
        a_ih = np.sqrt(6.0 / d)
        a_hh = np.sqrt(6.0 / hidden)
        params.add(f"{prefix}.l{li}.w_ih",
                   rng.uniform(-a_ih, a_ih, size=(d, 3 * hidden)).astype(np.float32))
        params.add(f"{prefix}.l{li}.w_hh",
                   rng.uniform(-a_hh, a_hh, size=(hidden, 3 * hidden)).astype(np.float32))
        params.add(f"{prefix}.l{li}.b_ih", np.zeros(3 * hidden, dtype=np.float32))
        params.add(f"{prefix}.l{li}.b_hh", np.zeros(3 * hidden, dtype=np.float32))
