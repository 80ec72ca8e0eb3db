"""Single-layer LSTM regressor with a ReLU fully-connected layer and a linear head.

Cell (no peepholes, zero initial state per window)::

    i = sigmoid(W_i x + U_i h + b_i)      f = sigmoid(W_f x + U_f h + b_f)
    g = tanh(W_g x + U_g h + b_g)         o = sigmoid(W_o x + U_o h + b_o)
    c = f * c_prev + i * g                h = o * tanh(c)

Only the last hidden state feeds the head::

    z = fc_weight @ h_T + fc_bias;  a = relu(z);  y = out_weight . a + out_bias

Everything is float64. ``forward`` accepts a single window or a batch of
windows; ``backward`` returns gradients summed over the batch.
"""

from dataclasses import dataclass, field, fields

import numpy as np

from rahl.errors import InvalidArgumentError

GATES = ("i", "f", "g", "o")


@dataclass(frozen=True)
class ModelConfig:
    input_size: int = 1
    hidden_size: int = 64
    fc_hidden: int = 64
    seed: int = 0

    def __post_init__(self):
        for name in ("input_size", "hidden_size", "fc_hidden"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or value < 1:
                raise InvalidArgumentError(f"{name} must be a positive integer, got {value!r}")
        if self.seed < 0:
            raise InvalidArgumentError(f"seed must be non-negative, got {self.seed!r}")


@dataclass
class LstmParams:
    W_i: np.ndarray
    W_f: np.ndarray
    W_g: np.ndarray
    W_o: np.ndarray
    U_i: np.ndarray
    U_f: np.ndarray
    U_g: np.ndarray
    U_o: np.ndarray
    b_i: np.ndarray
    b_f: np.ndarray
    b_g: np.ndarray
    b_o: np.ndarray
    fc_weight: np.ndarray
    fc_bias: np.ndarray
    out_weight: np.ndarray
    out_bias: np.ndarray  # 0-d array so it can be updated in place

    @property
    def hidden_size(self):
        return self.U_i.shape[0]

    @property
    def input_size(self):
        return self.W_i.shape[1]

    @property
    def fc_hidden(self):
        return self.fc_weight.shape[0]

    def as_dict(self):
        """Field name -> array. The arrays are the live storage, not copies."""
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def copy(self):
        return LstmParams(**{k: v.copy() for k, v in self.as_dict().items()})

    def shapes(self):
        return {k: v.shape for k, v in self.as_dict().items()}

    @classmethod
    def zeros(cls, input_size=1, hidden_size=64, fc_hidden=64):
        return cls(**{k: np.zeros(s) for k, s in param_shapes(input_size, hidden_size, fc_hidden).items()})

    def stacked(self):
        """Gate-stacked ``(W, U, b)`` with row blocks in i, f, g, o order."""
        W = np.concatenate([self.W_i, self.W_f, self.W_g, self.W_o])
        U = np.concatenate([self.U_i, self.U_f, self.U_g, self.U_o])
        b = np.concatenate([self.b_i, self.b_f, self.b_g, self.b_o])
        return W, U, b


def param_shapes(input_size, hidden_size, fc_hidden):
    shapes = {}
    for gate in GATES:
        shapes[f"W_{gate}"] = (hidden_size, input_size)
    for gate in GATES:
        shapes[f"U_{gate}"] = (hidden_size, hidden_size)
    for gate in GATES:
        shapes[f"b_{gate}"] = (hidden_size,)
    shapes["fc_weight"] = (fc_hidden, hidden_size)
    shapes["fc_bias"] = (fc_hidden,)
    shapes["out_weight"] = (fc_hidden,)
    shapes["out_bias"] = ()
    return shapes


def init_params(cfg):
    """Uniform(-k, k) weights with ``k = 1/sqrt(hidden_size)``; forget bias 1, other biases 0."""
    rng = np.random.default_rng(cfg.seed)
    k = 1.0 / np.sqrt(cfg.hidden_size)
    arrays = {}
    for name, shape in param_shapes(cfg.input_size, cfg.hidden_size, cfg.fc_hidden).items():
        if name.startswith("b_") or name in ("fc_bias", "out_bias"):
            arrays[name] = np.zeros(shape)
        else:
            arrays[name] = rng.uniform(-k, k, size=shape)
    arrays["b_f"][:] = 1.0
    return LstmParams(**arrays)


@dataclass
class ForwardTrace:
    """Activations kept for backpropagation; leading axes are (time, batch)."""

    x: np.ndarray        # (T, B, I)
    gates: np.ndarray    # (T, B, 4H) post-activation, internal blocks i, f, o, g
    c: np.ndarray        # (T, B, H)
    tanh_c: np.ndarray   # (T, B, H)
    h: np.ndarray        # (T, B, H)
    fc_pre: np.ndarray   # (B, F)
    fc_post: np.ndarray  # (B, F)
    prediction: np.ndarray = field(default=None)  # (B,)
    single: bool = False
    hx: np.ndarray = field(default=None, repr=False)  # (T+1, B, H+2) rows [h_{t-1}, x_t, 1]

    @property
    def steps(self):
        return self.x.shape[0]


def _internal(params):
    """Gate-stacked weights in the internal block order i, f, o, g.

    Sigmoid rows are pre-scaled by 0.5 so a single ``tanh`` evaluates every gate:
    ``sigmoid(z) = 0.5 + 0.5 * tanh(z / 2)``.
    """
    order = ("i", "f", "o", "g")
    scale = np.array([0.5, 0.5, 0.5, 1.0])
    W = np.concatenate([getattr(params, f"W_{k}")[:, 0] * s for k, s in zip(order, scale)])
    U = np.concatenate([getattr(params, f"U_{k}") * s for k, s in zip(order, scale)])
    b = np.concatenate([getattr(params, f"b_{k}") * s for k, s in zip(order, scale)])
    return W, U, b


class Workspace:
    """Reusable scratch buffers for :func:`forward` and :func:`backward`.

    Passing the same workspace to successive calls avoids re-allocating the
    large per-step arrays, which dominates the cost of small batches. A trace
    produced with a workspace is only valid until the next ``forward`` call
    that uses the same workspace.
    """

    def __init__(self):
        self._buffers = {}

    def get(self, name, shape):
        key = (name, shape)
        buf = self._buffers.get(key)
        if buf is None:
            buf = self._buffers[key] = np.empty(shape)
        return buf


def forward(params, window, workspace=None):
    """Run the network on one window ``(T,)`` or a batch ``(B, T)``.

    Returns ``(prediction, trace)``; prediction is a float for a single window
    and a ``(B,)`` array for a batch.
    """
    x = np.asarray(window, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] == 0 or x.shape[0] == 0:
        raise InvalidArgumentError(f"window must be non-empty (T,) or (B, T), got shape {np.shape(window)}")
    if not np.all(np.isfinite(x)):
        raise InvalidArgumentError("window contains non-finite values")
    if params.input_size != 1:
        raise InvalidArgumentError("forward expects scalar inputs; input_size must be 1")
    ws = Workspace() if workspace is None else workspace
    B, T = x.shape
    H = params.hidden_size
    W, U, b = _internal(params)
    # hx[t] = [h_{t-1}, x_t, 1], so one matmul with the stacked [U^T; W; b]
    # gives every gate pre-activation of step t
    A = np.empty((H + 2, 4 * H))
    A[:H] = U.T
    A[H] = W
    A[H + 1] = b
    hx = ws.get("hx", (T + 1, B, H + 2))
    hx[0, :, :H] = 0.0
    hx[:T, :, H] = x.T
    hx[:T, :, H + 1] = 1.0
    hx[T, :, H:] = 0.0
    h = hx[1:, :, :H]
    gates = ws.get("gates", (T, B, 4 * H))  # post-activation
    c = ws.get("c", (T, B, H))
    tanh_c = ws.get("tanh_c", (T, B, H))
    tmp = ws.get("tmp", (B, H))
    c_prev = np.zeros((B, H))
    for t in range(T):
        gt = gates[t]
        np.matmul(hx[t], A, out=gt)
        np.tanh(gt, out=gt)
        sig = gt[:, : 3 * H]
        sig *= 0.5
        sig += 0.5
        ct = c[t]
        np.multiply(gt[:, H : 2 * H], c_prev, out=ct)
        np.multiply(gt[:, :H], gt[:, 3 * H :], out=tmp)
        ct += tmp
        np.tanh(ct, out=tanh_c[t])
        np.multiply(tanh_c[t], gt[:, 2 * H : 3 * H], out=h[t])
        c_prev = ct

    fc_pre = h[-1] @ params.fc_weight.T + params.fc_bias
    fc_post = np.maximum(fc_pre, 0.0)
    pred = fc_post @ params.out_weight + params.out_bias
    trace = ForwardTrace(hx[:T, :, H : H + 1], gates, c, tanh_c, h, fc_pre, fc_post, pred, single, hx)
    return (float(pred[0]) if single else pred), trace


@dataclass
class LstmGrads(LstmParams):
    """Gradient container; same fields and shapes as :class:`LstmParams`."""


def backward(params, trace, d_prediction, workspace=None):
    """Backpropagation through time of ``d_prediction * prediction``.

    ``d_prediction`` is a scalar or one value per batch row; gradients are summed
    over the batch. The returned gradients never alias ``workspace``.
    """
    T, B, H = trace.h.shape
    if H != params.hidden_size or trace.fc_pre.shape != (B, params.fc_hidden) or trace.x.shape[2] != params.input_size:
        raise InvalidArgumentError("trace shapes do not match params")
    ws = Workspace() if workspace is None else workspace
    dy = np.broadcast_to(np.asarray(d_prediction, dtype=np.float64), (B,))

    g = {}
    g["out_bias"] = np.asarray(dy.sum())
    g["out_weight"] = dy @ trace.fc_post
    d_fc = np.outer(dy, params.out_weight) * (trace.fc_pre > 0)
    g["fc_bias"] = d_fc.sum(axis=0)
    g["fc_weight"] = d_fc.T @ trace.h[-1]

    # Local derivatives for all steps at once (bulk ops beat per-step ones).
    gates = trace.gates
    i = gates[..., :H]
    f = gates[..., H : 2 * H]
    gg = gates[..., 3 * H :]
    sig = gates[..., : 3 * H]
    ds = ws.get("ds", (T, B, 3 * H))  # sigmoid' of i, f, o
    np.subtract(1.0, sig, out=ds)
    ds *= sig
    tc = trace.tanh_c
    c_prev = ws.get("c_prev", (T, B, H))
    c_prev[0] = 0.0
    c_prev[1:] = trace.c[:-1]
    dc_from_h = ws.get("dc_from_h", (T, B, H))
    np.multiply(tc, tc, out=dc_from_h)
    np.subtract(1.0, dc_from_h, out=dc_from_h)
    dc_from_h *= gates[..., 2 * H : 3 * H]
    k_ifg = ws.get("k_ifg", (T, B, 3, H))
    np.multiply(gg, ds[..., :H], out=k_ifg[:, :, 0])
    np.multiply(c_prev, ds[..., H : 2 * H], out=k_ifg[:, :, 1])
    k_g = k_ifg[:, :, 2]
    np.multiply(gg, gg, out=k_g)
    np.subtract(1.0, k_g, out=k_g)
    k_g *= i
    k_o = ws.get("k_o", (T, B, H))
    np.multiply(tc, ds[..., 2 * H :], out=k_o)

    W, U, _ = _internal(params)
    # _internal pre-scales sigmoid rows by 0.5; undo it for the recurrent chain rule
    U = U.copy()
    U[: 3 * H] *= 2.0
    # d_pre is laid out (T, B, 4H) in block order i, f, g, o to match k_ifg
    d_pre = ws.get("d_pre", (T, B, 4 * H))
    U_ifgo = np.concatenate([U[: 2 * H], U[3 * H :], U[2 * H : 3 * H]])
    dh = d_fc @ params.fc_weight
    dc = np.zeros((B, H))
    tmp = ws.get("tmp", (B, H))
    for t in range(T - 1, -1, -1):
        np.multiply(dh, dc_from_h[t], out=tmp)
        dc += tmp
        dp = d_pre[t]
        np.multiply(dc[:, None, :], k_ifg[t], out=dp[:, : 3 * H].reshape(B, 3, H))
        np.multiply(dh, k_o[t], out=dp[:, 3 * H :])
        if t:
            dc *= f[t]
            dh = dp @ U_ifgo

    # one product against the [h_{t-1}, x_t, 1] rows yields dU, dW and db together;
    # the h_{-1} = 0 rows contribute nothing to dU
    flat = d_pre.reshape(T * B, 4 * H)
    dA = (trace.hx[:T].reshape(T * B, H + 2).T @ flat).T
    dU, dW, db = dA[:, :H], dA[:, H : H + 1], dA[:, H + 1]
    for k, gate in enumerate(("i", "f", "g", "o")):
        rows = slice(k * H, (k + 1) * H)
        g[f"W_{gate}"] = dW[rows]
        g[f"U_{gate}"] = dU[rows]
        g[f"b_{gate}"] = db[rows]
    return LstmGrads(**{f.name: g[f.name] for f in fields(LstmParams)})
