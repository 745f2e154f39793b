"""Deep LSTM with hand-written truncated backpropagation through time.

Layer ``l`` maps the concatenation ``[h^{l-1}_t, h^l_{t-1}]`` through one
biased linear map of shape ``2n -> 4n``, sliced into gates in the order
(i, f, o, g)::

    i, f, o = sigm(.), g = tanh(.)
    c^l_t = f * c^l_{t-1} + i * g
    h^l_t = o * tanh(c^l_t)

``h^0_t`` is a learned embedding of the input token and the logits are a
biased linear readout of ``h^L_t``.  The weight of layer ``l`` is stored as a
single ``(2n, 4n)`` matrix: rows ``[:n]`` act on the layer input, rows
``[n:]`` on the recurrent state.
"""

from dataclasses import dataclass, asdict
import json
import logging

import numpy as np

log = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b"PROGEVAL-LSTM\n"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class LstmConfig:
    depth: int
    width: int
    vocab_in: int
    vocab_out: int
    init_range: float = 0.08
    dtype: str = "float64"

    def __post_init__(self):
        if min(self.depth, self.width, self.vocab_in, self.vocab_out) < 1:
            raise ValueError("depth, width and vocabulary sizes must be positive")
        if self.init_range < 0:
            raise ValueError("init_range must be non-negative")
        if self.dtype not in ("float64", "float32"):
            raise ValueError(f"unsupported dtype {self.dtype!r}")


def param_shapes(config: LstmConfig):
    n = config.width
    shapes = {"embed": (config.vocab_in, n)}
    for layer in range(1, config.depth + 1):
        shapes[f"W{layer}"] = (2 * n, 4 * n)
        shapes[f"b{layer}"] = (4 * n,)
    shapes["readout_W"] = (n, config.vocab_out)
    shapes["readout_b"] = (config.vocab_out,)
    return shapes


def param_count(config: LstmConfig) -> int:
    return sum(int(np.prod(s)) for s in param_shapes(config).values())


def init_params(config: LstmConfig, rng):
    """Every entry i.i.d. uniform in ``[-init_range, init_range]``."""
    r = config.init_range
    return {
        name: rng.uniform(-r, r, size=shape).astype(config.dtype)
        for name, shape in param_shapes(config).items()
    }


def zeros_like_params(params):
    return {k: np.zeros_like(v) for k, v in params.items()}


def flatten(params):
    return np.concatenate([v.ravel() for v in params.values()])


def unflatten(flat, config: LstmConfig):
    out = {}
    offset = 0
    for name, shape in param_shapes(config).items():
        size = int(np.prod(shape))
        out[name] = np.asarray(flat[offset : offset + size], dtype=config.dtype).reshape(shape).copy()
        offset += size
    if offset != len(flat):
        raise ValueError(f"expected {offset} parameters, got {len(flat)}")
    return out


@dataclass
class LstmState:
    """Per-layer hidden and cell arrays, each ``(batch, width)``."""

    h: list
    c: list

    @classmethod
    def zeros(cls, config: LstmConfig, batch=1):
        shape = (batch, config.width)
        return cls(
            [np.zeros(shape, config.dtype) for _ in range(config.depth)],
            [np.zeros(shape, config.dtype) for _ in range(config.depth)],
        )

    def copy(self):
        return LstmState([h.copy() for h in self.h], [c.copy() for c in self.c])


def sigmoid(x):
    return 0.5 * (np.tanh(0.5 * x) + 1.0)


def _config_of(params):
    depth = sum(1 for k in params if k.startswith("W"))
    return depth, params["embed"].shape[1]


def _check_state(params, state, batch):
    depth, n = _config_of(params)
    if len(state.h) != depth or len(state.c) != depth:
        raise ValueError(f"state has {len(state.h)} layers, parameters have {depth}")
    for h, c in zip(state.h, state.c):
        if h.shape != (batch, n) or c.shape != (batch, n):
            raise ValueError(f"state arrays must be {(batch, n)}, got {h.shape} and {c.shape}")


def step(params, state: LstmState, token):
    """One timestep.  ``token`` is an int or a ``(batch,)`` array of input ids.

    Returns raw logits ``(batch, vocab_out)`` and the next state.
    """
    tokens = np.atleast_1d(np.asarray(token, dtype=np.int64))
    _check_state(params, state, len(tokens))
    depth, n = _config_of(params)
    x = params["embed"][tokens]
    hs, cs = [], []
    for layer in range(depth):
        W, b = params[f"W{layer + 1}"], params[f"b{layer + 1}"]
        z = x @ W[:n] + state.h[layer] @ W[n:] + b
        ifo = sigmoid(z[:, : 3 * n])
        g = np.tanh(z[:, 3 * n :])
        c = ifo[:, n : 2 * n] * state.c[layer] + ifo[:, :n] * g
        h = ifo[:, 2 * n :] * np.tanh(c)
        hs.append(h)
        cs.append(c)
        x = h
    logits = x @ params["readout_W"] + params["readout_b"]
    return logits, LstmState(hs, cs)


def forward(params, tokens, state: LstmState, keep_cache=False, resets=None):
    """Run ``tokens`` of shape ``(batch, T)`` from ``state``.

    ``resets`` (``(batch, T)`` booleans, optional) zeroes a lane's hidden and
    cell state just before the marked position is read.

    Returns ``(logits (batch, T, vocab_out), final_state, cache)``; the cache is
    ``None`` unless ``keep_cache`` is set.
    """
    tokens = np.asarray(tokens, dtype=np.int64)
    B, T = tokens.shape
    _check_state(params, state, B)
    depth, n = _config_of(params)
    keep = None
    if resets is not None and np.any(resets):
        keep = (~np.asarray(resets, dtype=bool)).astype(params["embed"].dtype)[..., None]
    x = params["embed"][tokens]
    dtype = x.dtype
    layers = []
    final_h, final_c = [], []
    for layer in range(depth):
        W, b = params[f"W{layer + 1}"], params[f"b{layer + 1}"]
        Wh = W[n:]
        zx = x @ W[:n] + b
        h, c = state.h[layer], state.c[layer]
        H = np.empty((B, T, n), dtype)
        C = np.empty((B, T, n), dtype)
        G = np.empty((B, T, 4 * n), dtype) if keep_cache else None
        for t in range(T):
            if keep is not None:
                h = h * keep[:, t]
                c = c * keep[:, t]
            z = zx[:, t] + h @ Wh
            ifo = sigmoid(z[:, : 3 * n])
            g = np.tanh(z[:, 3 * n :])
            c = ifo[:, n : 2 * n] * c + ifo[:, :n] * g
            h = ifo[:, 2 * n :] * np.tanh(c)
            H[:, t] = h
            C[:, t] = c
            if keep_cache:
                G[:, t, : 3 * n] = ifo
                G[:, t, 3 * n :] = g
        if keep_cache:
            layers.append((x, H, C, G, state.h[layer], state.c[layer]))
        final_h.append(h)
        final_c.append(c)
        x = H
    logits = x @ params["readout_W"] + params["readout_b"]
    cache = (tokens, layers, x, keep) if keep_cache else None
    return logits, LstmState(final_h, final_c), cache


def log_softmax(logits):
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def masked_cross_entropy(logits, labels, mask):
    """Summed negative log-likelihood over masked positions, and the position count."""
    logp = log_softmax(logits)
    picked = np.take_along_axis(logp, labels[..., None], axis=-1)[..., 0]
    return -(picked * mask).sum(), int(mask.sum())


def backward(params, window, state: LstmState, reduction="mean"):
    """Loss and exact gradients for one unroll window.

    ``window`` is a :class:`~progeval.encode.PackedStream`.  The loss is the
    cross-entropy over masked positions, averaged (``"mean"``) or summed
    (``"sum"``).  No gradient flows into ``state``; the returned final state is
    meant to seed the next window.
    """
    loss, grads, final, _ = loss_and_grads(params, window, state, reduction)
    return loss, grads, final


def loss_and_grads(params, window, state: LstmState, reduction="mean"):
    """:func:`backward` that also returns the window's logits."""
    if reduction not in ("mean", "sum"):
        raise ValueError(f"unknown reduction {reduction!r}")
    depth, n = _config_of(params)
    logits, final, cache = forward(params, window.token_ids, state, keep_cache=True, resets=window.resets)
    mask = np.asarray(window.loss_mask, dtype=bool)
    labels = np.asarray(window.labels, dtype=np.int64)
    total, count = masked_cross_entropy(logits, labels, mask)
    grads = zeros_like_params(params)
    if count == 0:
        log.warning("window has no scored positions; returning zero loss and gradients")
        return 0.0, grads, final, logits
    scale = 1.0 / count if reduction == "mean" else 1.0
    loss = float(total) * scale

    tokens, layers, top, keep = cache
    B, T = tokens.shape
    dlogits = np.exp(log_softmax(logits))
    np.put_along_axis(dlogits, labels[..., None], np.take_along_axis(dlogits, labels[..., None], -1) - 1.0, -1)
    dlogits *= (mask * scale)[..., None]

    V = dlogits.shape[-1]
    grads["readout_W"] = top.reshape(-1, n).T @ dlogits.reshape(-1, V)
    grads["readout_b"] = dlogits.sum(axis=(0, 1))
    dx = dlogits @ params["readout_W"].T

    for layer in reversed(range(depth)):
        x, H, C, G, h0, c0 = layers[layer]
        W = params[f"W{layer + 1}"]
        Wh_T = W[n:].T
        dz = np.empty_like(G)
        dh_next = np.zeros_like(h0)
        dc_next = np.zeros_like(c0)
        for t in reversed(range(T)):
            i = G[:, t, :n]
            f = G[:, t, n : 2 * n]
            o = G[:, t, 2 * n : 3 * n]
            g = G[:, t, 3 * n :]
            c_prev = C[:, t - 1] if t > 0 else c0
            if keep is not None:
                c_prev = c_prev * keep[:, t]
            tc = np.tanh(C[:, t])
            dh = dx[:, t] + dh_next
            dc = dc_next + dh * o * (1.0 - tc * tc)
            dz[:, t, :n] = dc * g * i * (1.0 - i)
            dz[:, t, n : 2 * n] = dc * c_prev * f * (1.0 - f)
            dz[:, t, 2 * n : 3 * n] = dh * tc * o * (1.0 - o)
            dz[:, t, 3 * n :] = dc * i * (1.0 - g * g)
            dc_next = dc * f
            dh_next = dz[:, t] @ Wh_T
            if keep is not None:
                dc_next *= keep[:, t]
                dh_next *= keep[:, t]
        h_prev = np.concatenate([h0[:, None, :], H[:, :-1]], axis=1)
        if keep is not None:
            h_prev = h_prev * keep
        dz2 = dz.reshape(-1, 4 * n)
        gW = grads[f"W{layer + 1}"]
        gW[:n] = x.reshape(-1, n).T @ dz2
        gW[n:] = h_prev.reshape(-1, n).T @ dz2
        grads[f"b{layer + 1}"] = dz2.sum(axis=0)
        dx = dz @ W[:n].T

    np.add.at(grads["embed"], tokens.ravel(), dx.reshape(-1, n))
    return loss, grads, final, logits


def logits_from_zero(params, tokens):
    """Logits for a ``(batch, T)`` token array, each row starting from a zero state."""
    tokens = np.asarray(tokens, dtype=np.int64)
    depth, n = _config_of(params)
    dtype = params["embed"].dtype
    state = LstmState(
        [np.zeros((tokens.shape[0], n), dtype) for _ in range(depth)],
        [np.zeros((tokens.shape[0], n), dtype) for _ in range(depth)],
    )
    return forward(params, tokens, state)[0]


class LstmModel:
    """Parameters bundled with their config; the evaluation interface used by ``train``."""

    def __init__(self, config: LstmConfig, params):
        self.config = config
        self.params = params

    def logits(self, tokens):
        return logits_from_zero(self.params, tokens)


def save_checkpoint(path, config: LstmConfig, params, extra=None):
    """Header line of JSON, then the flat parameters as little-endian float64."""
    header = {
        "version": CHECKPOINT_VERSION,
        "config": asdict(config),
        "layout": list(param_shapes(config)),
        "dtype": "<f8",
        "extra": extra or {},
    }
    flat = flatten(params).astype("<f8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8") + b"\n")
        fh.write(flat.tobytes())


def load_checkpoint(path):
    with open(path, "rb") as fh:
        magic = fh.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise ValueError(f"{path} is not a checkpoint file")
        header = json.loads(fh.readline())
        if header["version"] != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {header['version']}")
        flat = np.frombuffer(fh.read(), dtype="<f8")
    config = LstmConfig(**header["config"])
    return config, unflatten(flat, config), header.get("extra", {})
