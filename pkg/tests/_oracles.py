"""Independent reference computations shared by the unit and acceptance tests."""

import math

import numpy as np

from progeval import lstm
from progeval.encode import PackedStream
from progeval.seeding import make_rng


def gradient_check(depth=2, width=8, steps=20, batch=2, seed=3, eps=1e-5):
    """Worst relative error between backprop and central differences.

    The numeric side runs in extended precision so that rounding in the
    difference quotient stays well below the tolerance being tested.
    """
    rng = make_rng(seed)
    config = lstm.LstmConfig(depth, width, 10, 12, init_range=0.5)
    params = lstm.init_params(config, rng)
    tokens = rng.integers(0, 10, (batch, steps))
    labels = rng.integers(0, 12, (batch, steps))
    mask = rng.random((batch, steps)) < 0.6
    resets = rng.random((batch, steps)) < 0.15
    window = PackedStream(tokens, labels, mask, resets)
    state = lstm.LstmState(
        [rng.normal(size=(batch, width)) * 0.3 for _ in range(depth)],
        [rng.normal(size=(batch, width)) for _ in range(depth)],
    )
    _, grads, _ = lstm.backward(params, window, state)

    wide = {k: v.astype(np.longdouble) for k, v in params.items()}
    wide_state = lstm.LstmState(
        [h.astype(np.longdouble) for h in state.h], [c.astype(np.longdouble) for c in state.c]
    )

    def loss():
        logits, _, _ = lstm.forward(wide, tokens, wide_state, resets=resets)
        return lstm.masked_cross_entropy(logits, labels, mask)[0] / mask.sum()

    worst = 0.0
    for name, value in wide.items():
        for idx in np.ndindex(value.shape):
            old = value[idx]
            value[idx] = old + eps
            up = loss()
            value[idx] = old - eps
            down = loss()
            value[idx] = old
            numeric = float((up - down) / (2 * eps))
            analytic = float(grads[name][idx])
            scale = max(abs(numeric), abs(analytic), 1e-12)
            worst = max(worst, abs(numeric - analytic) / scale)
    return worst


def scalar_lstm_trace(w, inputs):
    """One-unit, one-layer LSTM written out with plain floats.

    ``w`` maps gate name to (input weight, recurrent weight, bias); the
    embedding is the identity on the scalar inputs.  Returns the h values.
    """
    sig = lambda x: 1.0 / (1.0 + math.exp(-x))
    h = c = 0.0
    out = []
    for x in inputs:
        pre = {gate: wx * x + wh * h + b for gate, (wx, wh, b) in w.items()}
        i, f, o = sig(pre["i"]), sig(pre["f"]), sig(pre["o"])
        g = math.tanh(pre["g"])
        c = f * c + i * g
        h = o * math.tanh(c)
        out.append(h)
    return out
