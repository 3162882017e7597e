"""Real-valued acceptors: SRN, GRU, LSTM, CNN, attention encoder, counter cell.

All arithmetic is float64.  Weight-matrix conventions follow ``h = W x + U h + b``:
``W`` has shape (hidden, |alphabet|) and ``U`` has shape (hidden, hidden).
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping

import numpy as np

from .lang import Alphabet, encode_one_hot

ARCHS = ("SRN", "GRU", "LSTM", "CNN", "ATTN-ENC", "COUNTER-CELL")
ACTIVATIONS = ("sigmoid", "tanh", "relu", "linear")

GATES = {
    "SRN": ("",),
    "GRU": ("z", "r", "u"),
    "LSTM": ("f", "i", "o", "c"),
}


class ShapeError(ValueError):
    pass


class CheckpointError(ValueError):
    pass


def sigmoid(x):
    x = np.asarray(x, dtype=float)
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def activate(name: str, x):
    if name == "sigmoid":
        return sigmoid(x)
    if name == "tanh":
        return np.tanh(x)
    if name == "relu":
        return np.maximum(x, 0.0)
    if name == "linear":
        return np.asarray(x, dtype=float)
    raise ValueError(f"unknown activation {name!r}")


def expected_shapes(arch: str, hidden: int, n_sym: int, window: int = 0,
                    key_size: int | None = None) -> dict[str, tuple[int, ...]]:
    k, s = hidden, n_sym
    shapes: dict[str, tuple[int, ...]] = {}
    if arch in GATES:
        for g in GATES[arch]:
            shapes[f"W{g}"] = (k, s)
            shapes[f"U{g}"] = (k, k)
            shapes[f"b{g}"] = (k,)
    elif arch == "CNN":
        shapes["Wh"] = (k, (2 * window + 1) * s)
        shapes["bh"] = (k,)
    elif arch == "ATTN-ENC":
        shapes["Wv"] = (k, s)
        shapes["bv"] = (k,)
        if key_size is None:
            shapes["Wq"] = (k, k)
        else:
            shapes["Wk"] = (key_size, s)
            shapes["bk"] = (key_size,)
            shapes["Wq"] = (key_size, k)
    elif arch == "COUNTER-CELL":
        if k != 1:
            raise ShapeError("the counter cell has exactly one hidden unit")
        shapes["theta"] = (2,)
    else:
        raise ShapeError(f"unknown architecture {arch!r}")
    shapes["Wa"] = (k,)
    shapes["ba"] = (1,)
    return shapes


@dataclass(frozen=True)
class NetworkSpec:
    """Architecture tag plus named weight tensors.

    ``lstm_output`` selects the LSTM output squash (``identity`` or ``tanh``).
    ``encoder`` is the activation of the attention encoder's value and key
    layers.  Attention keys default to the values themselves; supplying
    ``Wk``/``bk`` gives a separate key layer.
    """

    arch: str
    alphabet: Alphabet
    hidden_size: int
    weights: Mapping[str, np.ndarray] = field(compare=False)
    window: int = 0
    lstm_output: str = "identity"
    encoder: str = "sigmoid"

    def __post_init__(self):
        if self.arch not in ARCHS:
            raise ShapeError(f"unknown architecture {self.arch!r}")
        if self.lstm_output not in ("identity", "tanh"):
            raise ShapeError(f"lstm_output must be identity or tanh, got {self.lstm_output!r}")
        if self.encoder not in ACTIVATIONS:
            raise ShapeError(f"unknown encoder activation {self.encoder!r}")
        if self.arch == "COUNTER-CELL" and self.alphabet.size != 2:
            raise ShapeError("the counter cell reads binary input; alphabet must have 2 symbols")
        ws = {name: np.array(w, dtype=float) for name, w in self.weights.items()}
        for w in ws.values():
            w.setflags(write=False)
        object.__setattr__(self, "weights", ws)
        key_size = ws["Wk"].shape[0] if "Wk" in ws and ws["Wk"].ndim == 2 else None
        shapes = expected_shapes(self.arch, self.hidden_size, self.alphabet.size, self.window, key_size)
        if set(ws) != set(shapes):
            raise ShapeError(f"{self.arch} expects tensors {sorted(shapes)}, got {sorted(ws)}")
        for name, shape in shapes.items():
            if ws[name].shape != shape:
                raise ShapeError(f"tensor {name} has shape {ws[name].shape}, expected {shape}")

    def __getitem__(self, name: str) -> np.ndarray:
        return self.weights[name]

    @property
    def separate_keys(self) -> bool:
        return "Wk" in self.weights

    def scaled(self, factor: float) -> "NetworkSpec":
        """The same network with every parameter multiplied by ``factor``."""
        return replace(self, weights={n: factor * w for n, w in self.weights.items()})

    def __eq__(self, other):
        if not isinstance(other, NetworkSpec):
            return NotImplemented
        return (self.arch, self.alphabet, self.hidden_size, self.window, self.lstm_output, self.encoder) == (
            other.arch, other.alphabet, other.hidden_size, other.window, other.lstm_output, other.encoder
        ) and self.weights.keys() == other.weights.keys() and all(
            np.array_equal(self.weights[n], other.weights[n]) for n in self.weights)

    __hash__ = None


def zero_network(arch: str, alphabet: Alphabet, hidden: int, window: int = 0, **kw) -> NetworkSpec:
    shapes = expected_shapes(arch, hidden, alphabet.size, window)
    return NetworkSpec(arch, alphabet, hidden, {n: np.zeros(s) for n, s in shapes.items()}, window=window, **kw)


def random_network(arch: str, alphabet: Alphabet, hidden: int, rng: np.random.Generator,
                   window: int = 0, scale: float = 1.0, **kw) -> NetworkSpec:
    shapes = expected_shapes(arch, hidden, alphabet.size, window)
    ws = {n: scale * rng.standard_normal(s) for n, s in shapes.items()}
    return NetworkSpec(arch, alphabet, hidden, ws, window=window, **kw)


# ---------------------------------------------------------------------------
# Single steps


def _check(vec, size, what):
    if np.shape(vec) != (size,):
        raise ShapeError(f"{what} has shape {np.shape(vec)}, expected ({size},)")


def srn_step(x_t, h_prev, W, U, b):
    _check(h_prev, U.shape[0], "h_prev")
    _check(x_t, W.shape[1], "x_t")
    return np.tanh(W @ x_t + U @ h_prev + b)


def gru_step(x_t, h_prev, p: Mapping[str, np.ndarray]):
    _check(h_prev, p["Uz"].shape[0], "h_prev")
    _check(x_t, p["Wz"].shape[1], "x_t")
    z = sigmoid(p["Wz"] @ x_t + p["Uz"] @ h_prev + p["bz"])
    r = sigmoid(p["Wr"] @ x_t + p["Ur"] @ h_prev + p["br"])
    u = np.tanh(p["Wu"] @ x_t + p["Uu"] @ (r * h_prev) + p["bu"])
    return z * h_prev + (1.0 - z) * u


def lstm_step(x_t, h_prev, c_prev, p: Mapping[str, np.ndarray], output: str = "identity"):
    _check(h_prev, p["Uf"].shape[0], "h_prev")
    _check(c_prev, p["Uf"].shape[0], "c_prev")
    _check(x_t, p["Wf"].shape[1], "x_t")

    def pre(g):
        return p[f"W{g}"] @ x_t + p[f"U{g}"] @ h_prev + p[f"b{g}"]

    f, i, o = sigmoid(pre("f")), sigmoid(pre("i")), sigmoid(pre("o"))
    c_tilde = np.tanh(pre("c"))
    c = f * c_prev + i * c_tilde
    h = o * (np.tanh(c) if output == "tanh" else c)
    return h, c


def counter_cell_step(x_t: int, h_prev: float, theta) -> float:
    """One step of the two-parameter counter cell.

    The forget gate reads a constant input and the input gate reads the bit
    in signed form (+1 for 1, -1 for 0), so that under large weights
    ``theta = (1, 1)`` accumulates the number of 1s and ``theta = (-1, 1)``
    copies the current bit.
    """
    if x_t not in (0, 1):
        raise ValueError(f"counter cell input must be a bit, got {x_t!r}")
    f = sigmoid(theta[0])
    i = sigmoid(theta[1] * (2 * x_t - 1))
    return float(f * h_prev + i)


def attention(q, K, V):
    """Unscaled dot-product attention ``softmax(q K^T) V``."""
    K = np.atleast_2d(np.asarray(K, dtype=float))
    V = np.atleast_2d(np.asarray(V, dtype=float))
    if K.shape[0] == 0 or V.shape[0] == 0:
        raise ValueError("attention over an empty sequence is undefined")
    if K.shape[0] != V.shape[0]:
        raise ShapeError("K and V must have the same number of rows")
    scores = K @ np.asarray(q, dtype=float)
    w = np.exp(scores - scores.max())
    w /= w.sum()
    return w @ V


def cnn_windows(X: np.ndarray, window: int) -> np.ndarray:
    """Rows ``x_{t-k} || .. || x_{t+k}`` with zero vectors outside the sentence."""
    n, s = X.shape
    padded = np.vstack([np.zeros((window, s)), X, np.zeros((window, s))])
    return np.array([padded[t:t + 2 * window + 1].reshape(-1) for t in range(n)]).reshape(n, (2 * window + 1) * s)


def cnn_forward(X, Wh, bh, Wa, ba, window: int):
    X = np.asarray(X, dtype=float)
    if X.shape[0] == 0:
        pooled = -np.ones(Wh.shape[0])
        H = np.zeros((0, Wh.shape[0]))
    else:
        H = np.tanh(cnn_windows(X, window) @ Wh.T + bh)
        pooled = H.max(axis=0) if Wh.shape[0] else np.zeros(0)
    p = float(sigmoid(Wa @ pooled + ba[0]))
    return H, pooled, p


# ---------------------------------------------------------------------------
# Whole-sequence acceptor


@dataclass
class HiddenTrace:
    h: np.ndarray
    p: float
    c: np.ndarray | None = None
    pooled: np.ndarray | None = None
    values: np.ndarray | None = None
    keys: np.ndarray | None = None

    def __len__(self):
        return self.h.shape[0]

    @property
    def final(self) -> np.ndarray:
        return self.h[-1] if len(self) else np.zeros(self.h.shape[1])


def acceptor_forward(net: NetworkSpec, X) -> HiddenTrace:
    """Run ``net`` over a sentence matrix (or a string) and read out at t = n."""
    if isinstance(X, str):
        X = encode_one_hot(X, net.alphabet)
    X = np.asarray(X, dtype=float).reshape(-1, net.alphabet.size)
    n, k = X.shape[0], net.hidden_size
    w = net.weights
    hs = np.zeros((n, k))
    trace = HiddenTrace(hs, 0.0)
    if net.arch == "SRN":
        h = np.zeros(k)
        for t in range(n):
            h = hs[t] = srn_step(X[t], h, w["W"], w["U"], w["b"])
    elif net.arch == "GRU":
        h = np.zeros(k)
        for t in range(n):
            h = hs[t] = gru_step(X[t], h, w)
    elif net.arch == "LSTM":
        h, c = np.zeros(k), np.zeros(k)
        cs = np.zeros((n, k))
        for t in range(n):
            h, c = lstm_step(X[t], h, c, w, net.lstm_output)
            hs[t], cs[t] = h, c
        trace.c = cs
    elif net.arch == "COUNTER-CELL":
        h = 0.0
        bits = X[:, 1]
        for t in range(n):
            h = hs[t, 0] = counter_cell_step(int(bits[t]), h, w["theta"])
    elif net.arch == "CNN":
        H, pooled, p = cnn_forward(X, w["Wh"], w["bh"], w["Wa"], w["ba"], net.window)
        trace.h, trace.pooled, trace.p = H, pooled, p
        return trace
    elif net.arch == "ATTN-ENC":
        V = activate(net.encoder, X @ w["Wv"].T + w["bv"])
        K = activate(net.encoder, X @ w["Wk"].T + w["bk"]) if net.separate_keys else V
        for t in range(n):
            hs[t] = attention(w["Wq"] @ V[t], K[:t + 1], V[:t + 1])
        trace.values, trace.keys = V, K
    final = hs[-1] if n else np.zeros(k)
    trace.p = float(sigmoid(w["Wa"] @ final + w["ba"][0]))
    return trace


# ---------------------------------------------------------------------------
# Checkpoints

_FORMAT = "asymnet-checkpoint"


def _payload(net: NetworkSpec) -> dict:
    return {
        "format": _FORMAT,
        "version": 1,
        "arch": net.arch,
        "alphabet": str(net.alphabet),
        "hidden_size": net.hidden_size,
        "window": net.window,
        "lstm_output": net.lstm_output,
        "encoder": net.encoder,
        "tensors": {
            name: {"shape": list(w.shape), "data": [repr(float(v)) for v in w.reshape(-1)]}
            for name, w in sorted(net.weights.items())
        },
    }


def _digest(payload: dict) -> str:
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()


def dumps_checkpoint(net: NetworkSpec) -> str:
    payload = _payload(net)
    payload["sha256"] = _digest(payload)
    return json.dumps(payload, indent=1) + "\n"


def loads_checkpoint(text: str) -> NetworkSpec:
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"checkpoint is not valid JSON: {exc}") from None
    if not isinstance(payload, dict) or payload.get("format") != _FORMAT:
        raise CheckpointError("not an asymnet checkpoint")
    digest = payload.pop("sha256", None)
    if digest != _digest(payload):
        raise CheckpointError("checkpoint checksum mismatch (file corrupted or edited)")
    try:
        weights = {}
        for name, t in payload["tensors"].items():
            data = np.array([float(v) for v in t["data"]], dtype=float)
            weights[name] = data.reshape(t["shape"])
        return NetworkSpec(payload["arch"], Alphabet.of(payload["alphabet"]), payload["hidden_size"], weights,
                           window=payload["window"], lstm_output=payload["lstm_output"],
                           encoder=payload["encoder"])
    except (KeyError, ValueError, TypeError) as exc:
        raise CheckpointError(f"malformed checkpoint: {exc}") from None


def save_checkpoint(net: NetworkSpec, path: str | Path) -> None:
    Path(path).write_text(dumps_checkpoint(net), encoding="utf-8")


def load_checkpoint(path: str | Path) -> NetworkSpec:
    return loads_checkpoint(Path(path).read_text(encoding="utf-8"))
