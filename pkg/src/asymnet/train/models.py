"""Batched recurrent language models and an LSTM encoder-decoder.

Weights are stored input-major (``x @ W``), with the gates of a cell fused
along the output axis in the order given by ``nets.GATES``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad

LM_INPUTS = "abc"
LM_OUTPUTS = "abc$"
SEQ_INPUTS = "01"
SEQ_OUTPUTS = "01$"
GO = 2  # decoder start symbol index, one past the binary inputs

N_GATES = {"SRN": 1, "GRU": 3, "LSTM": 4}


def inject_noise(state: np.ndarray, sd: float, rng: np.random.Generator | None) -> np.ndarray:
    """``state`` plus iid N(0, sd^2) noise; sd = 0 returns the state unchanged."""
    if sd < 0:
        raise ValueError("noise sd must be >= 0")
    if sd == 0:
        return state
    return state + rng.normal(0.0, sd, size=np.shape(state))


def _uniform(rng, shape, bound):
    return ad.param(rng.uniform(-bound, bound, size=shape))


def init_cell(arch: str, n_in: int, hidden: int, rng: np.random.Generator, prefix: str = "") -> dict:
    g = N_GATES[arch] * hidden
    bound = 1.0 / np.sqrt(hidden)
    return {prefix + "Wx": _uniform(rng, (n_in, g), bound),
            prefix + "Wh": _uniform(rng, (hidden, g), bound),
            prefix + "b": _uniform(rng, (g,), bound)}


def cell_step(arch: str, p: dict, xw: ad.Tensor, h: ad.Tensor, c: ad.Tensor | None,
              hidden: int, noise: np.ndarray | None = None, prefix: str = ""):
    """One step given the precomputed input projection ``xw = x @ Wx + b``.

    ``noise`` perturbs h_{t-1} for SRN/GRU and c_{t-1} for LSTM.
    """
    k = hidden
    Wh = p[prefix + "Wh"]
    if arch == "SRN":
        if noise is not None:
            h = h + noise
        return ad.tanh(xw + h @ Wh), None
    if arch == "GRU":
        if noise is not None:
            h = h + noise
        zr = ad.sigmoid(ad.cols(xw, 0, 2 * k) + h @ ad.cols(Wh, 0, 2 * k))
        z, r = ad.cols(zr, 0, k), ad.cols(zr, k, 2 * k)
        u = ad.tanh(ad.cols(xw, 2 * k, 3 * k) + (r * h) @ ad.cols(Wh, 2 * k, 3 * k))
        return z * h + ad.one_minus(z) * u, None
    if noise is not None:
        c = c + noise
    pre = xw + h @ Wh
    fio = ad.sigmoid(ad.cols(pre, 0, 3 * k))
    f, i, o = ad.cols(fio, 0, k), ad.cols(fio, k, 2 * k), ad.cols(fio, 2 * k, 3 * k)
    cand = ad.tanh(ad.cols(pre, 3 * k, 4 * k))
    c = f * c + i * cand
    return o * ad.tanh(c), c


def one_hot_batch(strings: list[str], symbols: str, length: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """(B, T, |symbols|) one-hot inputs and a (B, T) mask, right-padded."""
    T = length if length is not None else max((len(s) for s in strings), default=0)
    X = np.zeros((len(strings), T, len(symbols)))
    M = np.zeros((len(strings), T))
    for b, s in enumerate(strings):
        for t, ch in enumerate(s):
            X[b, t, symbols.index(ch)] = 1.0
            M[b, t] = 1.0
    return X, M


def index_batch(strings: list[str], symbols: str, length: int) -> np.ndarray:
    Y = np.zeros((len(strings), length), dtype=int)
    for b, s in enumerate(strings):
        for t, ch in enumerate(s):
            Y[b, t] = symbols.index(ch)
    return Y


@dataclass
class LanguageModel:
    arch: str
    hidden: int
    params: dict = field(repr=False)

    @classmethod
    def init(cls, arch: str, hidden: int, rng: np.random.Generator) -> "LanguageModel":
        if arch not in N_GATES:
            raise ValueError(f"unknown architecture {arch!r}")
        p = init_cell(arch, len(LM_INPUTS), hidden, rng)
        bound = 1.0 / np.sqrt(hidden)
        p["Wo"] = _uniform(rng, (hidden, len(LM_OUTPUTS)), bound)
        p["bo"] = _uniform(rng, (len(LM_OUTPUTS),), bound)
        return cls(arch, hidden, p)

    def logits(self, X: np.ndarray, noise_sd: float = 0.0, rng: np.random.Generator | None = None) -> ad.Tensor:
        B, T, _ = X.shape
        p = self.params
        xw = ad.affine(X, p["Wx"], p["b"])
        h = ad.Tensor(np.zeros((B, self.hidden)))
        c = ad.Tensor(np.zeros((B, self.hidden))) if self.arch == "LSTM" else None
        hs = []
        for t in range(T):
            noise = rng.normal(0.0, noise_sd, size=(B, self.hidden)) if noise_sd > 0 else None
            h, c = cell_step(self.arch, p, ad.step(xw, t), h, c, self.hidden, noise)
            hs.append(h)
        return ad.affine(ad.stack(hs, axis=1), p["Wo"], p["bo"])

    def loss(self, inputs: list[str], targets: list[str], noise_sd: float = 0.0,
             rng: np.random.Generator | None = None) -> ad.Tensor:
        X, M = one_hot_batch(inputs, LM_INPUTS)
        Y = index_batch(targets, LM_OUTPUTS, X.shape[1])
        return ad.softmax_cross_entropy(self.logits(X, noise_sd, rng), Y, M)

    def predict(self, inputs: list[str]) -> list[str]:
        X, _ = one_hot_batch(inputs, LM_INPUTS)
        best = self.logits(X).data.argmax(axis=-1)
        return ["".join(LM_OUTPUTS[j] for j in best[b, :len(s)]) for b, s in enumerate(inputs)]


@dataclass
class Seq2Seq:
    """LSTM encoder-decoder for binary transduction, optionally with attention.

    With attention the decoder state queries the encoder states through
    ``Wq`` and the output layer reads [h_t, context].
    """
    hidden: int
    attention: bool
    params: dict = field(repr=False)

    @classmethod
    def init(cls, hidden: int, attention: bool, rng: np.random.Generator) -> "Seq2Seq":
        p = init_cell("LSTM", len(SEQ_INPUTS), hidden, rng, "enc_")
        p.update(init_cell("LSTM", len(SEQ_INPUTS) + 1, hidden, rng, "dec_"))
        bound = 1.0 / np.sqrt(hidden)
        width = 2 * hidden if attention else hidden
        if attention:
            p["Wq"] = _uniform(rng, (hidden, hidden), bound)
        p["Wo"] = _uniform(rng, (width, len(SEQ_OUTPUTS)), bound)
        p["bo"] = _uniform(rng, (len(SEQ_OUTPUTS),), bound)
        return cls(hidden, attention, p)

    def encode(self, X: np.ndarray):
        B, T, _ = X.shape
        p = self.params
        xw = ad.affine(X, p["enc_Wx"], p["enc_b"])
        h = ad.Tensor(np.zeros((B, self.hidden)))
        c = ad.Tensor(np.zeros((B, self.hidden)))
        hs = []
        for t in range(T):
            h, c = cell_step("LSTM", p, ad.step(xw, t), h, c, self.hidden, prefix="enc_")
            hs.append(h)
        return ad.stack(hs, axis=1), h, c

    def _out(self, h, H):
        p = self.params
        if self.attention:
            ctx = ad.attend(h @ p["Wq"], H)
            h = ad.concat([h, ctx])
        return ad.affine(h, p["Wo"], p["bo"])

    def loss(self, inputs: list[str], outputs: list[str]) -> ad.Tensor:
        """Teacher-forced cross-entropy; every batch member must share a length."""
        X, _ = one_hot_batch(inputs, SEQ_INPUTS)
        H, h, c = self.encode(X)
        p = self.params
        targets = [o + "$" for o in outputs]
        T = len(targets[0])
        D = np.zeros((len(inputs), T, len(SEQ_INPUTS) + 1))
        D[:, 0, GO] = 1.0
        D[:, 1:, :2] = one_hot_batch([o[:-1] for o in targets], SEQ_INPUTS, T - 1)[0]
        dw = ad.affine(D, p["dec_Wx"], p["dec_b"])
        logits = []
        for t in range(T):
            h, c = cell_step("LSTM", p, ad.step(dw, t), h, c, self.hidden, prefix="dec_")
            logits.append(self._out(h, H))
        Y = index_batch(targets, SEQ_OUTPUTS, T)
        return ad.softmax_cross_entropy(ad.stack(logits, axis=1), Y)

    def decode(self, inputs: list[str], max_len: int) -> list[str]:
        """Greedy decoding fed with its own predictions, stopped at '$'."""
        X, _ = one_hot_batch(inputs, SEQ_INPUTS)
        H, h, c = self.encode(X)
        p = self.params
        B = len(inputs)
        prev = np.full(B, GO)
        out = [[] for _ in range(B)]
        done = np.zeros(B, dtype=bool)
        for _ in range(max_len):
            x = np.zeros((B, len(SEQ_INPUTS) + 1))
            x[np.arange(B), prev] = 1.0
            h, c = cell_step("LSTM", p, ad.affine(x, p["dec_Wx"], p["dec_b"]), h, c, self.hidden, prefix="dec_")
            best = self._out(h, H).data.argmax(axis=-1)
            for b in range(B):
                if not done[b]:
                    if SEQ_OUTPUTS[best[b]] == "$":
                        done[b] = True
                    else:
                        out[b].append(SEQ_OUTPUTS[best[b]])
            if done.all():
                break
            # '$' is never fed back; finished rows are ignored anyway
            prev = np.where(best == 2, GO, best)
        return ["".join(o) for o in out]
