"""Parameter containers and the small layers every model is built from."""
from __future__ import annotations

import zlib

import numpy as np

from .. import autodiff as ad
from ..autodiff import Parameter


def init_rng(seed, name):
    """Generator for one named component, independent of what else exists."""
    return np.random.default_rng([int(seed), zlib.crc32(name.encode("utf-8"))])


def fan_in_uniform(rng, fan_in, shape):
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


class Module:
    """Holds named parameters and child modules in registration order."""

    def __init__(self):
        self._params = {}
        self._children = {}

    def param(self, name, value):
        p = Parameter(value, name=name)
        self._params[name] = p
        return p

    def child(self, name, module):
        self._children[name] = module
        return module

    def named_parameters(self, prefix=""):
        out = []
        for name, p in self._params.items():
            out.append((prefix + name, p))
        for name, m in self._children.items():
            out.extend(m.named_parameters(f"{prefix}{name}."))
        return out

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def freeze(self, frozen=True):
        for p in self.parameters():
            p.frozen = frozen


class Linear(Module):
    def __init__(self, n_in, n_out, rng, bias=True):
        super().__init__()
        self.n_in, self.n_out = n_in, n_out
        self.W = self.param("W", fan_in_uniform(rng, n_in, (n_in, n_out)))
        self.b = self.param("b", np.zeros(n_out)) if bias else None

    def __call__(self, x):
        lead = x.shape[:-1]
        flat = x if x.ndim == 2 else ad.reshape(x, (-1, self.n_in))
        y = flat @ self.W
        if self.b is not None:
            y = y + self.b
        return y if x.ndim == 2 else ad.reshape(y, (*lead, self.n_out))


class LayerNorm(Module):
    def __init__(self, dim, eps=1e-5):
        super().__init__()
        self.eps = eps
        self.gamma = self.param("gamma", np.ones(dim))
        self.beta = self.param("beta", np.zeros(dim))

    def __call__(self, x):
        return ad.layer_norm(x, self.gamma, self.beta, self.eps)


class GRULayer(Module):
    """One direction of a GRU.

    r = sigmoid(x W_r + h U_r + b_r)
    z = sigmoid(x W_z + h U_z + b_z)
    n = tanh(x W_n + (r * h) U_n + b_n)
    h' = (1 - z) * n + z * h

    Steps where ``valid`` is false carry ``h`` through unchanged, so left
    padding is invisible to the recurrence.
    """

    def __init__(self, n_in, hidden, rng):
        super().__init__()
        self.hidden = hidden
        self.W = self.param("W", fan_in_uniform(rng, n_in, (n_in, 3 * hidden)))
        self.U_rz = self.param("U_rz", fan_in_uniform(rng, hidden, (hidden, 2 * hidden)))
        self.U_n = self.param("U_n", fan_in_uniform(rng, hidden, (hidden, hidden)))
        self.b = self.param("b", np.zeros(3 * hidden))

    def __call__(self, x, valid, reverse=False):
        """``x`` [B, T, n_in], ``valid`` bool [B, T] -> outputs [B, T, H], final h [B, H]."""
        b, t, _ = x.shape
        hdim = self.hidden
        proj = ad.reshape(ad.reshape(x, (-1, x.shape[-1])) @ self.W + self.b, (b, t, 3 * hdim))
        h = ad.Tensor(np.zeros((b, hdim)))
        outs = [None] * t
        steps = range(t - 1, -1, -1) if reverse else range(t)
        for s in steps:
            xs = proj[:, s, :]
            rz = ad.sigmoid(xs[:, : 2 * hdim] + h @ self.U_rz)
            r, z = rz[:, :hdim], rz[:, hdim:]
            n = ad.tanh(xs[:, 2 * hdim:] + (r * h) @ self.U_n)
            h_new = n + z * (h - n)
            m = valid[:, s]
            if m.all():
                h = h_new
            else:
                keep = m[:, None].astype(np.float64)
                h = h_new * keep + h * (1.0 - keep)
            outs[s] = h
        return ad.stack(outs, axis=1), h


class LSTMCell(Module):
    def __init__(self, n_in, hidden, rng):
        super().__init__()
        self.hidden = hidden
        self.W = self.param("W", fan_in_uniform(rng, n_in, (n_in, 4 * hidden)))
        self.U = self.param("U", fan_in_uniform(rng, hidden, (hidden, 4 * hidden)))
        self.b = self.param("b", np.zeros(4 * hidden))

    def __call__(self, x_proj, h, c):
        """``x_proj`` is the precomputed ``x W + b`` for this step."""
        hd = self.hidden
        gates = x_proj + h @ self.U
        sig = ad.sigmoid(gates[:, : 3 * hd])
        i, f, o = sig[:, :hd], sig[:, hd:2 * hd], sig[:, 2 * hd:]
        g = ad.tanh(gates[:, 3 * hd:])
        c = f * c + i * g
        h = o * ad.tanh(c)
        return h, c
