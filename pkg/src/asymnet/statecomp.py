"""Configuration sets and state-complexity curves by exhaustive enumeration."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .asym import LimitNet, LimitState
from .nets import NetworkSpec

DEFAULT_BUDGET = 2 ** 20

CLASSES = ("O(1)", "Θ(n)", "Θ(n²)", "2^Θ(n)", "inconclusive")


class BudgetExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class ConfigSet:
    n: int
    values: frozenset
    unstable: int
    total: int

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class ComplexityCurve:
    points: tuple[tuple[int, int], ...]
    unstable: tuple[int, ...]
    growth: str

    def counts(self) -> list[int]:
        return [c for _, c in self.points]


def _leaves(ln: LimitNet, n: int):
    """Yield (readout, 1) per stable input and (None, count) for unstable subtrees."""
    size = ln.net.alphabet.size
    stack: list[tuple[LimitState, int]] = [(ln.initial(), 0)]
    while stack:
        state, depth = stack.pop()
        if state.flags:
            yield None, size ** (n - depth)
            continue
        if depth == n:
            yield ln.readout(state), 1
            continue
        for a in reversed(range(size)):
            stack.append((ln.step(state, a), depth + 1))


def config_set(net: NetworkSpec | LimitNet, selector: str, n: int, budget: int = DEFAULT_BUDGET) -> ConfigSet:
    """Exact set of limit values of ``selector`` over every input of length ``n``.

    Inputs whose evaluation hits a zero pre-activation limit are counted as
    unstable and contribute no value.
    """
    ln = net if isinstance(net, LimitNet) else LimitNet(net)
    total = ln.net.alphabet.size ** n
    if total > budget:
        raise BudgetExceeded(f"|Σ|^n = {total} inputs exceeds the budget of {budget}")
    values = set()
    unstable = 0
    for trace, count in _leaves(ln, n):
        if trace is None or trace.flags:
            unstable += count
            continue
        values.add(trace.select(selector))
    return ConfigSet(n, frozenset(values), unstable, total)


def classify_growth(points: Sequence[tuple[int, int]]) -> str:
    """Growth class of a state-complexity curve.

    O(1) when the top half of the range shows no growth; 2^Θ(n) when every
    successive ratio is at least 1.8; otherwise a log-log slope fitted on the
    top half decides Θ(n) (slope 1 +- 0.25) or Θ(n²) (slope 2 +- 0.25).
    """
    if len(points) < 4:
        raise ValueError("need at least 4 points to classify growth")
    pts = sorted(points)
    ns = [n for n, _ in pts]
    cs = [c for _, c in pts]
    top = cs[len(cs) // 2:]
    if len(set(top)) == 1 or max(top) <= max(cs[:len(cs) // 2]):
        return "O(1)"
    if all(c > 0 for c in cs) and all(b / a >= 1.8 for a, b in zip(cs, cs[1:])):
        return "2^Θ(n)"
    half = [(n, c) for n, c in pts[len(pts) // 2:] if n > 0 and c > 0]
    if len(half) >= 2:
        slope = np.polyfit(np.log([n for n, _ in half]), np.log([c for _, c in half]), 1)[0]
        if abs(slope - 1) <= 0.25:
            return "Θ(n)"
        if abs(slope - 2) <= 0.25:
            return "Θ(n²)"
    return "inconclusive"


def complexity_curve(net: NetworkSpec, selector: str, n_range: Iterable[int],
                     budget: int = DEFAULT_BUDGET) -> ComplexityCurve:
    ln = LimitNet(net)
    points, unstable = [], []
    for n in n_range:
        cs = config_set(ln, selector, n, budget)
        points.append((n, len(cs)))
        unstable.append(cs.unstable)
    growth = classify_growth(points) if len(points) >= 4 else "inconclusive"
    return ComplexityCurve(tuple(points), tuple(unstable), growth)


def coordinate_sets(cs: ConfigSet) -> list[set]:
    """Per-coordinate projections of a configuration set of vectors."""
    if not cs.values:
        return []
    width = len(next(iter(cs.values)))
    return [{v[i] for v in cs.values} for i in range(width)]


def curve_csv(curve: ComplexityCurve) -> str:
    lines = ["n,count,unstable_count"]
    lines += [f"{n},{c},{u}" for (n, c), u in zip(curve.points, curve.unstable)]
    return "\n".join(lines) + "\n"
