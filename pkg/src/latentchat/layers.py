"""Neural building blocks on top of the autodiff core: LN-LSTM cells,
the bidirectional-bottom encoder stack, the decoder stack, and MLPs."""

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor


def init_uniform(rng, shape, scale=0.08):
    return Tensor(rng.uniform(-scale, scale, size=shape), requires_grad=True)


def init_zeros(shape):
    return Tensor(np.zeros(shape), requires_grad=True)


def init_const(shape, value):
    return Tensor(np.full(shape, float(value)), requires_grad=True)


class LSTMCell:
    """One LSTM cell; gate pre-activations optionally layer-normalised
    per gate block. Forget-gate bias starts at +1."""

    def __init__(self, rng, d_in, d, layer_norm, prefix, params):
        self.d = d
        self.layer_norm = layer_norm
        self.Wx = init_uniform(rng, (d_in, 4 * d))
        self.Wh = init_uniform(rng, (d, 4 * d))
        params[f"{prefix}.Wx"] = self.Wx
        params[f"{prefix}.Wh"] = self.Wh
        if layer_norm:
            self.ln_gain = init_const((4 * d,), 1.0)
            bias = np.zeros(4 * d)
            bias[d : 2 * d] = 1.0
            self.ln_bias = Tensor(bias, requires_grad=True)
            params[f"{prefix}.ln_gain"] = self.ln_gain
            params[f"{prefix}.ln_bias"] = self.ln_bias
        else:
            bias = np.zeros(4 * d)
            bias[d : 2 * d] = 1.0
            self.b = Tensor(bias, requires_grad=True)
            params[f"{prefix}.b"] = self.b

    def step(self, x, h, c):
        d = self.d
        pre = ad.matmul(x, self.Wx) + ad.matmul(h, self.Wh)
        if self.layer_norm:
            blocks = []
            for gi in range(4):
                blocks.append(
                    ad.layer_norm(
                        ad.narrow(pre, 1, gi * d, d),
                        ad.narrow(self.ln_gain, 0, gi * d, d),
                        ad.narrow(self.ln_bias, 0, gi * d, d),
                    )
                )
            pre = ad.concat(blocks, axis=1)
        else:
            pre = pre + self.b
        return ad.lstm_gates(pre, c)


class MLP:
    """Single-hidden-layer perceptron with tanh hidden units.

    The output layer starts near zero so downstream Gaussians begin
    close to N(mean_bias, 1)."""

    def __init__(self, rng, d_in, d_hidden, d_out, prefix, params, out_scale=0.01):
        self.W1 = init_uniform(rng, (d_in, d_hidden))
        self.b1 = init_zeros((d_hidden,))
        self.W2 = init_uniform(rng, (d_hidden, d_out), scale=out_scale)
        self.b2 = init_zeros((d_out,))
        for n, t in (("W1", self.W1), ("b1", self.b1), ("W2", self.W2), ("b2", self.b2)):
            params[f"{prefix}.{n}"] = t

    def __call__(self, x):
        return ad.matmul(ad.tanh(ad.matmul(x, self.W1) + self.b1), self.W2) + self.b2


def _zeros_state(b, d):
    return Tensor(np.zeros((b, d))), Tensor(np.zeros((b, d)))


class EncoderStack:
    """Bidirectional first layer (d/2 per direction), unidirectional
    layers above, residual skips from `residual_start` upward."""

    def __init__(self, rng, cfg, params):
        d, half = cfg.d, cfg.d // 2
        self.cfg = cfg
        self.emb = init_uniform(rng, (cfg.vocab_size, cfg.d_emb))
        params["enc.emb"] = self.emb
        self.fwd = LSTMCell(rng, cfg.d_emb, half, cfg.layer_norm, "enc.l1f", params)
        self.bwd = LSTMCell(rng, cfg.d_emb, half, cfg.layer_norm, "enc.l1b", params)
        self.upper = [
            LSTMCell(rng, d, d, cfg.layer_norm, f"enc.l{i + 2}", params)
            for i in range(cfg.n_layers - 1)
        ]

    def forward(self, prompt, prompt_len, training=False, rng=None):
        """prompt [B,U] int ids -> (per-step top states, finals per layer)."""
        b, u_max = prompt.shape
        half = self.cfg.d // 2
        drop = self.cfg.dropout if training else 0.0

        embs = []
        for t in range(u_max):
            e = ad.embedding(self.emb, prompt[:, t])
            embs.append(ad.dropout(e, drop, training, rng) if drop else e)
        masks = [
            Tensor((t < prompt_len).astype(np.float64)[:, None]) for t in range(u_max)
        ]

        def run_dir(cell, order):
            h, c = _zeros_state(b, half)
            outs = {}
            for t in order:
                hn, cn = cell.step(embs[t], h, c)
                m = masks[t]
                h = hn * m + h * (1.0 - m)
                c = cn * m + c * (1.0 - m)
                outs[t] = h
            return outs, h, c

        f_outs, fh, fc = run_dir(self.fwd, range(u_max))
        b_outs, bh, bc = run_dir(self.bwd, range(u_max - 1, -1, -1))

        states = [ad.concat([f_outs[t], b_outs[t]], axis=1) for t in range(u_max)]
        finals = [(ad.concat([fh, bh], axis=1), ad.concat([fc, bc], axis=1))]

        for li, cell in enumerate(self.upper):
            layer_idx = li + 2
            h, c = _zeros_state(b, self.cfg.d)
            outs = []
            for t in range(u_max):
                x = states[t]
                if drop:
                    x = ad.dropout(x, drop, training, rng)
                hn, cn = cell.step(x, h, c)
                m = masks[t]
                h = hn * m + h * (1.0 - m)
                c = cn * m + c * (1.0 - m)
                out = h
                if layer_idx >= self.cfg.residual_start:
                    out = out + states[t]
                outs.append(out)
            states = outs
            finals.append((h, c))
        return states, finals


class DecoderStack:
    """Unidirectional stack; `extra_in` widens the bottom layer's input
    for a per-step latent slot."""

    def __init__(self, rng, cfg, params, extra_in=0):
        d = cfg.d
        self.cfg = cfg
        self.extra_in = extra_in
        self.emb = init_uniform(rng, (cfg.vocab_size, cfg.d_emb))
        params["dec.emb"] = self.emb
        self.cells = [
            LSTMCell(
                rng,
                cfg.d_emb + extra_in if i == 0 else d,
                d,
                cfg.layer_norm,
                f"dec.l{i + 1}",
                params,
            )
            for i in range(cfg.n_layers)
        ]
        # output projection: logits = h @ V_T, V rows are per-word vectors
        self.V_T = init_uniform(rng, (d, cfg.vocab_size))
        params["dec.V_T"] = self.V_T

    def init_states(self, enc_finals):
        return [(h, c) for h, c in enc_finals]

    def step(self, x, states, training=False, rng=None):
        """x [B, d_emb(+extra)] -> (h_top [B,d], new states)."""
        drop = self.cfg.dropout if training else 0.0
        new_states = []
        inp = x
        prev_out = None
        for i, cell in enumerate(self.cells):
            if drop and i > 0:
                inp = ad.dropout(inp, drop, training, rng)
            h, c = cell.step(inp, *states[i])
            new_states.append((h, c))
            out = h
            if i + 1 >= self.cfg.residual_start and prev_out is not None:
                out = out + prev_out
            prev_out = out
            inp = out
        return prev_out, new_states

    def embed_step(self, ids, training=False, rng=None):
        drop = self.cfg.dropout if training else 0.0
        e = ad.embedding(self.emb, ids)
        return ad.dropout(e, drop, training, rng) if drop else e

    def logits(self, h):
        return ad.matmul(h, self.V_T)
