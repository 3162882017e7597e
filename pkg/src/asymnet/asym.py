"""Limit semantics of acceptors under ``theta -> N theta``, ``N -> infinity``.

Limit values are exact: ``Fraction`` for finite values and ``math.inf`` /
``-math.inf`` for divergent ones.  A scaled pre-activation ``N * z`` has a
limit fixed by the sign of ``z``; ``z`` itself is computed exactly from the
previous limit values.  Pre-activations whose limit is exactly zero are
recorded as instability witnesses rather than resolved.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import mpmath
import numpy as np

from .lang import Alphabet
from .nets import NetworkSpec, acceptor_forward

INF = math.inf
HALF = Fraction(1, 2)
ZERO = Fraction(0)
ONE = Fraction(1)

# |z| below this counts as an exact zero when z involves tanh of a cell value
_MP_DPS = 60
_MP_ZERO = mpmath.mpf("1e-40")


class AsymError(ArithmeticError):
    pass


class AsymUnsupported(AsymError):
    """An infinite state feeds a scaled affine map with nonzero weight."""

    def __init__(self, msg: str, unit: str | None = None):
        super().__init__(msg)
        self.unit = unit


class NoConvergence(RuntimeError):
    pass


def asym_value(x) -> Fraction | float:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float) and math.isinf(x):
        return x
    if isinstance(x, float) and math.isnan(x):
        raise AsymError("NaN is not a limit value")
    return Fraction(x)


def asym_add(a, b):
    if isinstance(a, float) and isinstance(b, float) and a == -b:
        raise AsymError("inf - inf has no limit value")
    return a + b


def asym_mul(a, b):
    if (isinstance(a, float) and b == 0) or (isinstance(b, float) and a == 0):
        raise AsymError("0 * inf has no limit value")
    return a * b


def _sign(z) -> int:
    if isinstance(z, mpmath.mpf):
        return 0 if abs(z) < _MP_ZERO else (1 if z > 0 else -1)
    return (z > 0) - (z < 0)


def asym_sigmoid(x):
    """``lim sigmoid(N x)``."""
    s = _sign(asym_value(x) if not isinstance(x, mpmath.mpf) else x)
    return ONE if s > 0 else ZERO if s < 0 else HALF


def asym_tanh(x):
    s = _sign(asym_value(x) if not isinstance(x, mpmath.mpf) else x)
    return Fraction(s)


def asym_relu(x):
    s = _sign(asym_value(x) if not isinstance(x, mpmath.mpf) else x)
    return INF if s > 0 else ZERO


def asym_linear(x):
    s = _sign(asym_value(x) if not isinstance(x, mpmath.mpf) else x)
    return INF if s > 0 else -INF if s < 0 else ZERO


_LIMIT_ACT = {"sigmoid": asym_sigmoid, "tanh": asym_tanh, "relu": asym_relu, "linear": asym_linear}


def asym_softmax(u: Sequence) -> list[Fraction]:
    """``lim softmax(N u)``: uniform mass on the maximizing coordinates."""
    if len(u) == 0:
        raise AsymError("softmax of an empty vector")
    vals = [asym_value(x) for x in u]
    top = max(vals)
    winners = [i for i, x in enumerate(vals) if x == top]
    w = Fraction(1, len(winners))
    return [w if i in winners else ZERO for i in range(len(vals))]


def _dot(a: Sequence, b: Sequence):
    acc = ZERO
    for x, y in zip(a, b):
        acc = asym_add(acc, asym_mul(x, y))
    return acc


def _weighted_rows(weights: Sequence[Fraction], V: Sequence[Sequence]) -> tuple:
    out = []
    for j in range(len(V[0])):
        acc = ZERO
        for w, row in zip(weights, V):
            if w:
                acc = asym_add(acc, asym_mul(w, row[j]))
        out.append(acc)
    return tuple(out)


def asym_attention(q: Sequence, K: Sequence[Sequence], V: Sequence[Sequence]) -> tuple:
    """``lim attn(N q, K, V)``: the mean of the value rows with maximal score."""
    if len(K) == 0 or len(K) != len(V):
        raise AsymError("attention needs equally many (>= 1) keys and values")
    q = [asym_value(x) for x in q]
    scores = [_dot(q, [asym_value(x) for x in k]) for k in K]
    return _weighted_rows(asym_softmax(scores), [[asym_value(x) for x in v] for v in V])


# ---------------------------------------------------------------------------
# Symbolic evaluation of whole networks


@dataclass(frozen=True)
class Squashed:
    """The irrational limit ``scale * tanh(arg)`` of a squashed LSTM output."""

    scale: Fraction
    arg: Fraction

    def mp(self):
        return mpmath.mpf(self.scale.numerator) / self.scale.denominator * mpmath.tanh(
            mpmath.mpf(self.arg.numerator) / self.arg.denominator)

    def __float__(self):
        return float(self.scale) * math.tanh(float(self.arg))


def _squashed(scale: Fraction, arg: Fraction):
    if scale == 0 or arg == 0:
        return ZERO
    return Squashed(scale, arg)


def _frac(w: np.ndarray):
    if w.ndim == 1:
        return tuple(Fraction(float(v)) for v in w)
    return tuple(_frac(row) for row in w)


def _affine(row, values, bias, unit: str):
    acc = bias
    approx = None
    for w, v in zip(row, values):
        if not w:
            continue
        if isinstance(v, Squashed):
            with mpmath.workdps(_MP_DPS):
                term = mpmath.mpf(w.numerator) / w.denominator * v.mp()
            approx = term if approx is None else approx + term
        elif isinstance(v, float):
            raise AsymUnsupported(f"infinite value feeds unit {unit} with nonzero weight", unit)
        else:
            acc += w * v
    if approx is None:
        return acc
    with mpmath.workdps(_MP_DPS):
        return mpmath.mpf(acc.numerator) / acc.denominator + approx


@dataclass(frozen=True)
class LimitState:
    t: int = 0
    h: tuple = ()
    c: tuple = ()
    syms: tuple = ()
    V: tuple = ()
    K: tuple = ()
    flags: tuple = ()


@dataclass
class LimitTrace:
    """Limit values of every selectable quantity at the end of a string."""

    h: tuple
    p: Fraction
    out: object
    flags: tuple
    c: tuple | None = None
    V: tuple | None = None
    K: tuple | None = None
    pooled: tuple | None = None

    @property
    def stable(self) -> bool:
        return not self.flags

    def select(self, selector: str):
        if selector in ("h", "summary"):
            return self.h
        if selector == "c":
            if self.c is None:
                raise ValueError("selector 'c' only applies to LSTMs")
            return self.c
        if selector == "V":
            if self.V is None:
                raise ValueError("selector 'V' only applies to attention encoders")
            return self.V
        if selector == "pooled":
            if self.pooled is None:
                raise ValueError("selector 'pooled' only applies to CNNs")
            return self.pooled
        raise ValueError(f"unknown selector {selector!r}")


class LimitNet:
    """Exact stepper for the limit network ``lim_N net(N theta)``.

    ``step`` is incremental so enumerations can share prefixes.
    """

    def __init__(self, net: NetworkSpec):
        self.net = net
        self.w = {name: _frac(t) for name, t in net.weights.items()}
        self.k = net.hidden_size
        self.track_margin = False
        self.min_margin = None

    def initial(self) -> LimitState:
        zeros = tuple(ZERO for _ in range(self.k))
        if self.net.arch == "COUNTER-CELL":
            return LimitState(h=(ZERO,))
        return LimitState(h=zeros, c=zeros if self.net.arch == "LSTM" else ())

    def _unit(self, act: str, z, unit: str, flags: list):
        if self.track_margin:
            mag = abs(z) if isinstance(z, Fraction) else Fraction(float(abs(z)))
            self.min_margin = mag if self.min_margin is None else min(self.min_margin, mag)
        if _sign(z) == 0:
            flags.append(unit)
        return _LIMIT_ACT[act](z)

    def _gate(self, g: str, a: int, hvals, act, t, flags):
        W, U, b = self.w[f"W{g}"], self.w[f"U{g}"], self.w[f"b{g}"]
        name = g or "h"
        out = []
        for u in range(self.k):
            z = _affine(U[u], hvals, W[u][a] + b[u], f"t{t}:{name}[{u}]")
            out.append(self._unit(act, z, f"t{t}:{name}[{u}]", flags))
        return out

    def step(self, s: LimitState, a: int) -> LimitState:
        arch, t = self.net.arch, s.t + 1
        flags = list(s.flags)
        if arch == "SRN":
            h = tuple(self._gate("", a, s.h, "tanh", t, flags))
            return LimitState(t, h=h, flags=tuple(flags))
        if arch == "GRU":
            z = self._gate("z", a, s.h, "sigmoid", t, flags)
            r = self._gate("r", a, s.h, "sigmoid", t, flags)
            rh = [ri * hi for ri, hi in zip(r, s.h)]
            u = self._gate("u", a, rh, "tanh", t, flags)
            h = tuple(zi * hi + (1 - zi) * ui for zi, hi, ui in zip(z, s.h, u))
            return LimitState(t, h=h, flags=tuple(flags))
        if arch == "LSTM":
            f = self._gate("f", a, s.h, "sigmoid", t, flags)
            i = self._gate("i", a, s.h, "sigmoid", t, flags)
            o = self._gate("o", a, s.h, "sigmoid", t, flags)
            ct = self._gate("c", a, s.h, "tanh", t, flags)
            c = tuple(fi * cp + ii * ci for fi, cp, ii, ci in zip(f, s.c, i, ct))
            if self.net.lstm_output == "tanh":
                h = tuple(_squashed(oi, ci) for oi, ci in zip(o, c))
            else:
                h = tuple(oi * ci for oi, ci in zip(o, c))
            return LimitState(t, h=h, c=c, flags=tuple(flags))
        if arch == "COUNTER-CELL":
            th1, th2 = self.w["theta"]
            fg = self._unit("sigmoid", th1, f"t{t}:f", flags)
            ig = self._unit("sigmoid", th2 * (2 * a - 1), f"t{t}:i", flags)
            return LimitState(t, h=(fg * s.h[0] + ig,), flags=tuple(flags))
        if arch == "CNN":
            return LimitState(t, syms=s.syms + (a,), flags=s.flags)
        if arch == "ATTN-ENC":
            act = self.net.encoder
            v = tuple(self._unit(act, self.w["Wv"][u][a] + self.w["bv"][u], f"t{t}:v[{u}]", flags)
                      for u in range(self.k))
            if self.net.separate_keys:
                k = tuple(self._unit(act, self.w["Wk"][u][a] + self.w["bk"][u], f"t{t}:k[{u}]", flags)
                          for u in range(len(self.w["Wk"])))
            else:
                k = v
            return LimitState(t, V=s.V + (v,), K=s.K + (k,), flags=tuple(flags))
        raise ValueError(f"unsupported architecture {arch!r}")

    def _cnn_pooled(self, syms: tuple, flags: list) -> tuple:
        Wh, bh, win = self.w["Wh"], self.w["bh"], self.net.window
        nsym, n = self.net.alphabet.size, len(syms)
        nf = len(bh)
        if n == 0:
            return tuple(-ONE for _ in range(nf))
        pooled = [None] * nf
        for t in range(n):
            for u in range(nf):
                z = bh[u]
                for off in range(-win, win + 1):
                    pos = t + off
                    if 0 <= pos < n:
                        z += Wh[u][(off + win) * nsym + syms[pos]]
                val = self._unit("tanh", z, f"t{t + 1}:h[{u}]", flags)
                pooled[u] = val if pooled[u] is None else max(pooled[u], val)
        return tuple(pooled)

    def _summary(self, s: LimitState, flags: list) -> tuple:
        if not s.V:
            return tuple(ZERO for _ in range(self.k))
        Wq = self.w["Wq"]
        q = tuple(_affine(row, s.V[-1], ZERO, f"t{s.t}:q[{u}]") for u, row in enumerate(Wq))
        for u, k in enumerate(zip(*s.K)):
            if any(isinstance(x, float) for x in k) and q[u] != 0:
                raise AsymUnsupported(f"infinite key coordinate {u} meets a nonzero query", f"k[{u}]")
        # a zero query coordinate ignores its key coordinate at every scale
        K = [tuple(x if q[u] != 0 else ZERO for u, x in enumerate(k)) for k in s.K]
        return asym_attention(q, K, s.V)

    def readout(self, s: LimitState) -> LimitTrace:
        flags = list(s.flags)
        arch = self.net.arch
        extra = {}
        if arch == "CNN":
            h = self._cnn_pooled(s.syms, flags)
            extra["pooled"] = h
        elif arch == "ATTN-ENC":
            h = self._summary(s, flags)
            extra["V"], extra["K"] = s.V, s.K
        else:
            h = s.h
            if arch == "LSTM":
                extra["c"] = s.c
        out = _affine(self.w["Wa"], h, self.w["ba"][0], "output")
        # a zero output limit shows up as p = 1/2; it says nothing about the hidden state
        p = self._unit("sigmoid", out, "output", [])
        return LimitTrace(h=h, p=p, out=out, flags=tuple(flags), **extra)

    def run(self, symbols: Iterable[int]) -> LimitTrace:
        s = self.initial()
        for a in symbols:
            s = self.step(s, a)
        return self.readout(s)


def _indices(net: NetworkSpec, X) -> list[int]:
    if isinstance(X, str):
        return [net.alphabet.index(ch) for ch in X]
    X = np.asarray(X).reshape(-1, net.alphabet.size)
    return [int(i) for i in X.argmax(axis=1)]


def limit_trace(net: NetworkSpec | LimitNet, X) -> LimitTrace:
    ln = net if isinstance(net, LimitNet) else LimitNet(net)
    return ln.run(_indices(ln.net, X))


@dataclass(frozen=True)
class AsymDecision:
    outcome: str  # "accept" | "reject" | "unstable"
    witness: str | None = None

    @property
    def stable(self) -> bool:
        return self.outcome != "unstable"

    def __bool__(self):
        return self.outcome == "accept"


def decide(trace: LimitTrace) -> AsymDecision:
    if trace.flags:
        return AsymDecision("unstable", trace.flags[0])
    if trace.p == 1:
        return AsymDecision("accept")
    if trace.p == 0:
        return AsymDecision("reject")
    return AsymDecision("unstable", "output")


def asym_accept(net: NetworkSpec | LimitNet, X) -> AsymDecision:
    return decide(limit_trace(net, X))


# ---------------------------------------------------------------------------
# Numeric cross-checks

DOUBLING = tuple(2 ** e for e in range(31))


@dataclass
class ScaleReport:
    N: int
    margins: dict[str, float]
    decisions: dict[str, bool]

    @property
    def min_margin(self) -> float:
        return min(self.margins.values()) if self.margins else math.inf


def find_scale(net: NetworkSpec, strings: Iterable[str] | None = None, m: int | None = None,
               schedule: Sequence[int] = DOUBLING) -> ScaleReport:
    """Smallest N on ``schedule`` where rounding the continuous output at N theta
    reproduces the asymptotic decision on every string.

    ``strings`` defaults to all strings shorter than ``m``.
    """
    if strings is None:
        if m is None:
            raise ValueError("give either strings or m")
        strings = list(net.alphabet.strings_upto(m - 1))
    strings = list(strings)
    ln = LimitNet(net)
    target = {}
    for s in strings:
        d = asym_accept(ln, s)
        if not d.stable:
            # no scale can round an output whose limit is not 0 or 1
            raise NoConvergence(f"asymptotic decision on {s!r} is unstable (witness {d.witness})")
        target[s] = d.outcome == "accept"
    for N in schedule:
        scaled = net.scaled(N)
        margins = {}
        for s in strings:
            p = acceptor_forward(scaled, s).p
            margin = (p - 0.5) if target[s] else (0.5 - p)
            if margin <= 0:
                break
            margins[s] = margin
        else:
            return ScaleReport(N, margins, target)
    raise NoConvergence(f"no scale up to {schedule[-1]} reproduces the asymptotic decisions")


@dataclass
class ConvergenceReport:
    points: list[tuple[int, float]]
    hidden: list[np.ndarray]
    verdict: str

    def hidden_converged_to(self, value, tol: float = 1e-3, window: int = 3) -> int | None:
        """Smallest scale from which the final hidden state stays within ``tol`` of ``value``."""
        target = np.asarray(value, dtype=float)
        ok = [bool(np.all(np.abs(h - target) <= tol)) for h in self.hidden]
        for i in range(len(ok)):
            if all(ok[i:]) and len(ok) - i >= window:
                return self.points[i][0]
        return None


def check_convergence(net: NetworkSpec, X, schedule: Sequence[int] = tuple(2 ** e for e in range(13)),
                      tol: float = 1e-3, window: int = 3) -> ConvergenceReport:
    points, hidden = [], []
    for N in schedule:
        tr = acceptor_forward(net.scaled(N), X)
        points.append((N, tr.p))
        hidden.append(tr.pooled if tr.pooled is not None else tr.final)
    tail = [p for _, p in points[-window:]]
    if len(tail) == window and all(abs(p - 1) <= tol for p in tail):
        verdict = "converged-to-1"
    elif len(tail) == window and all(abs(p) <= tol for p in tail):
        verdict = "converged-to-0"
    else:
        verdict = "oscillating-or-flat"
    return ConvergenceReport(points, hidden, verdict)


def verdict_matches(decision: AsymDecision, report: ConvergenceReport) -> bool:
    expected = {"accept": "converged-to-1", "reject": "converged-to-0",
                "unstable": "oscillating-or-flat"}[decision.outcome]
    return report.verdict == expected
