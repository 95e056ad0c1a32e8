"""One LSTM layer with coupled input and forget gates.

Per timestep, with x_t the input and h_{t-1}, c_{t-1} the previous hidden
and cell state:

    f_t = sigmoid(W_f x_t + U_f h_{t-1} + b_f)
    o_t = sigmoid(W_o x_t + U_o h_{t-1} + b_o)
    g_t = tanh   (W_c x_t + U_c h_{t-1} + b_c)      # candidate cell state
    c_t = f_t * c_{t-1} + (1 - f_t) * g_t           # input gate = 1 - f_t
    h_t = o_t * tanh(c_t)

The coupled variant has no separate input gate, so there are no W_i/U_i/b_i
parameters. All arrays are float64; shapes are (units, input_dim) for W,
(units, units) for U, (units,) for b.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import NumericError


def sigmoid(x: np.ndarray) -> np.ndarray:
    """Element-wise logistic function, stable for large |x|."""
    out = np.empty_like(x, dtype=float)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


@dataclass
class LstmLayerParams:
    """Weights of one coupled-gate layer, grouped per gate (f, o, candidate)."""

    W_f: np.ndarray
    U_f: np.ndarray
    b_f: np.ndarray
    W_o: np.ndarray
    U_o: np.ndarray
    b_o: np.ndarray
    W_c: np.ndarray
    U_c: np.ndarray
    b_c: np.ndarray

    @property
    def units(self) -> int:
        return self.W_f.shape[0]

    @property
    def input_dim(self) -> int:
        return self.W_f.shape[1]

    def tensors(self) -> list[np.ndarray]:
        """Parameters in the serialization/update order."""
        return [
            self.W_f, self.U_f, self.b_f,
            self.W_o, self.U_o, self.b_o,
            self.W_c, self.U_c, self.b_c,
        ]

    @staticmethod
    def tensor_names() -> list[str]:
        return ["W_f", "U_f", "b_f", "W_o", "U_o", "b_o", "W_c", "U_c", "b_c"]

    def zeros_like(self) -> "LstmLayerParams":
        return LstmLayerParams(*(np.zeros_like(t) for t in self.tensors()))

    def copy(self) -> "LstmLayerParams":
        return LstmLayerParams(*(t.copy() for t in self.tensors()))


def init_layer(
    rng: np.random.Generator, input_dim: int, units: int, forget_bias: float = 1.0
) -> LstmLayerParams:
    """Uniform fan-in-scaled weights; forget bias starts positive so cell
    state is preserved early in training."""

    def w(rows: int, cols: int) -> np.ndarray:
        limit = 1.0 / np.sqrt(cols)
        return rng.uniform(-limit, limit, size=(rows, cols))

    return LstmLayerParams(
        W_f=w(units, input_dim), U_f=w(units, units), b_f=np.full(units, forget_bias),
        W_o=w(units, input_dim), U_o=w(units, units), b_o=np.zeros(units),
        W_c=w(units, input_dim), U_c=w(units, units), b_c=np.zeros(units),
    )


@dataclass
class LayerCache:
    """Forward activations retained for backpropagation through time."""

    inputs: np.ndarray  # (T, B, input_dim)
    H: np.ndarray       # (T, B, units) hidden states
    C: np.ndarray       # (T, B, units) cell states
    F: np.ndarray       # (T, B, units) forget gate activations
    O: np.ndarray       # (T, B, units) output gate activations
    G: np.ndarray       # (T, B, units) candidate activations
    h0: np.ndarray      # (B, units)
    c0: np.ndarray      # (B, units)
    squeeze: bool       # input was a single (T, D) sequence


def lstm_layer_forward(
    params: LstmLayerParams,
    inputs: np.ndarray,
    h0: np.ndarray | None = None,
    c0: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray, LayerCache]:
    """Run the layer over a sequence.

    ``inputs`` is (T, B, input_dim) or (T, input_dim) for a single sequence;
    hidden and cell states default to zero. Returns (H, C, cache) where H and
    C hold all timesteps of hidden/cell states, matching the input's
    batching.
    """
    X = np.asarray(inputs, dtype=float)
    squeeze = X.ndim == 2
    if squeeze:
        X = X[:, None, :]
    if X.ndim != 3:
        raise ValueError(f"inputs must be (T, B, D) or (T, D), got shape {X.shape}")
    T, B, D = X.shape
    n = params.units
    if D != params.input_dim:
        raise ValueError(f"input width {D} != layer input_dim {params.input_dim}")

    h = np.zeros((B, n)) if h0 is None else np.asarray(h0, dtype=float).reshape(B, n)
    c = np.zeros((B, n)) if c0 is None else np.asarray(c0, dtype=float).reshape(B, n)
    h0_arr, c0_arr = h.copy(), c.copy()

    H = np.empty((T, B, n))
    C = np.empty((T, B, n))
    F = np.empty((T, B, n))
    O = np.empty((T, B, n))
    G = np.empty((T, B, n))

    for t in range(T):
        x = X[t]
        f = sigmoid(x @ params.W_f.T + h @ params.U_f.T + params.b_f)
        o = sigmoid(x @ params.W_o.T + h @ params.U_o.T + params.b_o)
        g = np.tanh(x @ params.W_c.T + h @ params.U_c.T + params.b_c)
        c = f * c + (1.0 - f) * g
        h = o * np.tanh(c)
        F[t], O[t], G[t], C[t], H[t] = f, o, g, c, h

    if not np.isfinite(H).all():
        bad_t = int(np.argwhere(~np.isfinite(H).all(axis=(1, 2)))[0, 0])
        raise NumericError(f"non-finite hidden state at timestep {bad_t}")

    cache = LayerCache(inputs=X, H=H, C=C, F=F, O=O, G=G, h0=h0_arr, c0=c0_arr, squeeze=squeeze)
    if squeeze:
        return H[:, 0, :], C[:, 0, :], cache
    return H, C, cache


def lstm_layer_backward(
    params: LstmLayerParams, cache: LayerCache, dH: np.ndarray
) -> tuple[LstmLayerParams, np.ndarray]:
    """Backpropagate through the unrolled layer.

    ``dH`` is the loss gradient w.r.t. every hidden state (same shape as the
    forward H). Returns (parameter gradients, gradient w.r.t. the inputs).
    The recurrence contributions flow backwards through both c_t and h_t:

        dc_{t-1} += dc_t * f_t
        dh_{t-1} += dz_f U_f + dz_o U_o + dz_c U_c
    """
    dH = np.asarray(dH, dtype=float)
    if cache.squeeze and dH.ndim == 2:
        dH = dH[:, None, :]
    T, B, n = cache.H.shape

    grads = params.zeros_like()
    dX = np.empty_like(cache.inputs)
    dh_next = np.zeros((B, n))
    dc_next = np.zeros((B, n))

    for t in range(T - 1, -1, -1):
        f, o, g = cache.F[t], cache.O[t], cache.G[t]
        a = np.tanh(cache.C[t])
        c_prev = cache.C[t - 1] if t > 0 else cache.c0
        h_prev = cache.H[t - 1] if t > 0 else cache.h0
        x = cache.inputs[t]

        dh = dH[t] + dh_next
        dzo = dh * a * o * (1.0 - o)
        dc = dc_next + dh * o * (1.0 - a * a)
        dzf = dc * (c_prev - g) * f * (1.0 - f)
        dzc = dc * (1.0 - f) * (1.0 - g * g)

        grads.W_f += dzf.T @ x
        grads.U_f += dzf.T @ h_prev
        grads.b_f += dzf.sum(axis=0)
        grads.W_o += dzo.T @ x
        grads.U_o += dzo.T @ h_prev
        grads.b_o += dzo.sum(axis=0)
        grads.W_c += dzc.T @ x
        grads.U_c += dzc.T @ h_prev
        grads.b_c += dzc.sum(axis=0)

        dX[t] = dzf @ params.W_f + dzo @ params.W_o + dzc @ params.W_c
        dh_next = dzf @ params.U_f + dzo @ params.U_o + dzc @ params.U_c
        dc_next = dc * f

    if cache.squeeze:
        return grads, dX[:, 0, :]
    return grads, dX
