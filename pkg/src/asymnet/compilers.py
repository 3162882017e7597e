"""Exact weight constructions: DFA -> SRN/GRU, SL grammar -> CNN, counters, attention.

Threshold units use +-1 valued tanh literals, so every pre-activation of a
compiled network has magnitude at least 1 (1/2 for the CNN head) before
scaling.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable

import numpy as np

from .asym import LimitNet
from .lang import BINARY, PAD, Alphabet, Dfa, SlGrammar, _padding_shape
from .nets import NetworkSpec


class CompileError(ValueError):
    pass


@dataclass(frozen=True)
class DfaCompilation:
    net: NetworkSpec
    unit_map: dict
    margin: Fraction


@dataclass(frozen=True)
class CnnCompilation:
    net: NetworkSpec
    filter_map: dict
    K: int
    margin: Fraction


def probe_margin(net: NetworkSpec, strings: Iterable[str]) -> Fraction:
    """Minimum |pre-activation limit| over all units and steps on ``strings``."""
    ln = LimitNet(net)
    ln.track_margin = True
    for s in strings:
        ln.run(net.alphabet.index(ch) for ch in s)
    return ln.min_margin


def _eth_weights(dfa: Dfa):
    """SRN weights whose units track (previous state, current symbol) pairs."""
    sigma = dfa.alphabet.symbols
    ns = len(sigma)
    units = [(i, a) for i in range(dfa.num_states) for a in sigma]
    index = {u: n for n, u in enumerate(units)}
    k = len(units) + 1
    flag = k - 1
    W, U, b = np.zeros((k, ns)), np.zeros((k, k)), np.zeros(k)
    for (i, a), u in index.items():
        preds = dfa.inverse(i)
        is_start = int(i == dfa.start)
        W[u, sigma.index(a)] = 2.0
        for p in preds:
            U[u, index[p]] = 1.0
        U[u, flag] = len(preds) - 2 * is_start
        b[u] = -3.0 + 2 * is_start
    b[flag] = 2.0
    into_final = [index[(j, a)] for (j, a) in units if dfa.delta(j, a) in dfa.accepting]
    start_final = int(dfa.start in dfa.accepting)
    Wa = np.zeros(k)
    Wa[into_final] = 1.0
    Wa[flag] = len(into_final) - 2 * start_final
    ba = np.array([-1.0 + 2 * start_final])
    unit_map = {u: ("eth", i, a) for (i, a), u in index.items()}
    unit_map[flag] = ("flag",)
    return k, W, U, b, Wa, ba, unit_map


def _probe_strings(alphabet: Alphabet, max_len: int = 4):
    return list(alphabet.strings_upto(max_len))


def compile_dfa_to_srn(dfa: Dfa) -> DfaCompilation:
    k, W, U, b, Wa, ba, unit_map = _eth_weights(dfa)
    net = NetworkSpec("SRN", dfa.alphabet, k, {"W": W, "U": U, "b": b, "Wa": Wa, "ba": ba})
    return DfaCompilation(net, unit_map, probe_margin(net, _probe_strings(dfa.alphabet)))


def compile_dfa_to_gru(dfa: Dfa) -> DfaCompilation:
    """Same construction; z is pinned to 0 and r to 1 so the GRU always rewrites."""
    k, W, U, b, Wa, ba, unit_map = _eth_weights(dfa)
    ns = dfa.alphabet.size
    ws = {"Wu": W, "Uu": U, "bu": b, "Wa": Wa, "ba": ba,
          "Wz": np.zeros((k, ns)), "Uz": np.zeros((k, k)), "bz": np.full(k, -2.0),
          "Wr": np.zeros((k, ns)), "Ur": np.zeros((k, k)), "br": np.full(k, 2.0)}
    net = NetworkSpec("GRU", dfa.alphabet, k, ws)
    return DfaCompilation(net, unit_map, probe_margin(net, _probe_strings(dfa.alphabet)))


def _filter_center(gram: str, w: int) -> int:
    p, q = _padding_shape(gram)
    if p > w:
        return p
    if q > w:
        return 2 * w - q
    return w


def compile_sl_to_cnn(g: SlGrammar) -> CnnCompilation:
    """One tanh filter per forbidden gram, pooled, and a head that fires when none matched.

    Grams whose middle position is padding are re-anchored on their nearest
    real symbol; padding seen at offset -1 (or +1) pins the filter to the first
    (or last) position, which implies the padding beyond the window.  The
    all-padding gram only occurs in the empty string and gets no filter.
    """
    if g.k % 2 == 0:
        raise CompileError(f"gram width {g.k} is even; a symmetric window needs odd width")
    w = (g.k - 1) // 2
    sigma = g.alphabet.symbols
    ns = len(sigma)
    grams = [gram for gram in g.forbidden() if gram != PAD * g.k]
    K = len(grams)
    Wh = np.zeros((K, (2 * w + 1) * ns))
    bh = np.zeros(K)
    for f, gram in enumerate(grams):
        c = _filter_center(gram, w)
        literals = 0
        for j, ch in enumerate(gram):
            off = j - c
            if abs(off) > w:
                continue
            block = (off + w) * ns
            literals += 1
            if ch == PAD:
                Wh[f, block:block + ns] -= 2.0
                bh[f] += 2.0
            else:
                Wh[f, block + sigma.index(ch)] += 2.0
        bh[f] -= 2 * literals - 1
    Wa = -np.ones(K)
    ba = np.array([-K + 0.5])
    net = NetworkSpec("CNN", g.alphabet, K, {"Wh": Wh, "bh": bh, "Wa": Wa, "ba": ba}, window=w)
    margin = probe_margin(net, _probe_strings(g.alphabet, max(3, 2 * w + 2)))
    return CnnCompilation(net, dict(enumerate(grams)), K, margin)


def cnn_counterexample_pair(k: int) -> tuple[str, str]:
    """Strings with one and two b's whose sets of width-(2k+1) windows coincide.

    Both b's sit more than 2k+1 apart and every b is surrounded by at least
    2k+1 a's, so no window sees two b's or a b next to padding.  Any window-k
    CNN therefore pools both strings to the same vector, yet only the first
    is in a*ba*.
    """
    if k < 1:
        raise ValueError("window must be >= 1")
    m = 2 * k + 1
    one = "a" * m + "b" + "a" * m
    return one, one + "b" + "a" * m


def window_set(s: str, k: int) -> set[tuple]:
    """Contents of the convolution windows of ``s`` (None marks padding)."""
    padded = [None] * k + list(s) + [None] * k
    return {tuple(padded[t:t + 2 * k + 1]) for t in range(len(s))}


THETA_PLUS = (1.0, 1.0)
THETA_ID = (-1.0, 1.0)


def counter_params() -> tuple[tuple[float, float], tuple[float, float]]:
    return THETA_PLUS, THETA_ID


def counter_cell_network(theta=THETA_PLUS) -> NetworkSpec:
    """Counter cell with a head accepting once at least one 1 has been read."""
    return NetworkSpec("COUNTER-CELL", BINARY, 1,
                       {"theta": np.array(theta, dtype=float), "Wa": np.ones(1), "ba": np.array([-0.5])})


def attention_counting_encoder() -> NetworkSpec:
    """Values mark the 1s, every key is 1: the summary is the fraction of 1s.

    The head accepts strings with a strict majority of 1s.
    """
    return NetworkSpec("ATTN-ENC", BINARY, 1, {
        "Wv": np.array([[-1.0, 1.0]]), "bv": np.zeros(1),
        "Wk": np.zeros((1, 2)), "bk": np.ones(1),
        "Wq": np.ones((1, 1)),
        "Wa": np.ones(1), "ba": np.array([-0.5]),
    })


def identity_attention_encoder(alphabet: Alphabet = BINARY) -> NetworkSpec:
    """v_t is the one-hot x_t; keys are the values and the query is zero."""
    s = alphabet.size
    return NetworkSpec("ATTN-ENC", alphabet, s, {
        "Wv": 2.0 * np.eye(s), "bv": -np.ones(s), "Wq": np.zeros((s, s)),
        "Wa": np.zeros(s), "ba": np.array([1.0]),
    })


def last_symbol_retrieval_encoder(alphabet: Alphabet = BINARY) -> NetworkSpec:
    """Every maximizing step carries the current symbol, so the summary is one-hot x_n."""
    net = identity_attention_encoder(alphabet)
    ws = dict(net.weights)
    ws["Wq"] = 2.0 * np.eye(alphabet.size)
    return NetworkSpec("ATTN-ENC", alphabet, alphabet.size, ws)
