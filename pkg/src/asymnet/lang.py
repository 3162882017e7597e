"""Formal languages: alphabets, DFAs, strictly local grammars, corpora.

Everything here is pure and deterministic.  The DFA, grammar and corpus
text formats are line oriented so fixtures stay diffable.
"""
from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

PAD = "#"
EOS = "$"


class LanguageError(ValueError):
    """Raised for malformed automata, grammars, or out-of-alphabet input."""


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Alphabet:
    symbols: tuple[str, ...]

    def __post_init__(self):
        syms = tuple(self.symbols)
        object.__setattr__(self, "symbols", syms)
        if not syms:
            raise LanguageError("alphabet must be nonempty")
        if len(set(syms)) != len(syms):
            raise LanguageError(f"duplicate symbols in alphabet {syms!r}")
        for s in syms:
            if len(s) != 1:
                raise LanguageError(f"symbol {s!r} is not a single character")
            if s == PAD:
                raise LanguageError("the padding symbol '#' cannot be part of an alphabet")

    @classmethod
    def of(cls, chars: str | Iterable[str]) -> "Alphabet":
        return cls(tuple(chars))

    @property
    def size(self) -> int:
        return len(self.symbols)

    def index(self, symbol: str) -> int:
        try:
            return self.symbols.index(symbol)
        except ValueError:
            raise LanguageError(f"symbol {symbol!r} not in alphabet {''.join(self.symbols)!r}") from None

    def check(self, s: str) -> None:
        for ch in s:
            self.index(ch)

    def strings(self, n: int) -> Iterator[str]:
        """All strings of length exactly ``n`` in lexicographic index order."""
        for tup in itertools.product(self.symbols, repeat=n):
            yield "".join(tup)

    def strings_upto(self, max_len: int, min_len: int = 0) -> Iterator[str]:
        for n in range(min_len, max_len + 1):
            yield from self.strings(n)

    def __str__(self) -> str:
        return "".join(self.symbols)


BINARY = Alphabet(("0", "1"))
AB = Alphabet(("a", "b"))


def encode_one_hot(s: str, alphabet: Alphabet) -> np.ndarray:
    """Sentence matrix of ``s``: one row per symbol, a single 1 per row."""
    X = np.zeros((len(s), alphabet.size))
    for t, ch in enumerate(s):
        X[t, alphabet.index(ch)] = 1.0
    return X


# ---------------------------------------------------------------------------
# DFAs


@dataclass(frozen=True)
class Dfa:
    alphabet: Alphabet
    num_states: int
    start: int
    accepting: frozenset[int]
    transitions: dict[tuple[int, str], int] = field(hash=False, compare=True)

    def __post_init__(self):
        object.__setattr__(self, "accepting", frozenset(self.accepting))
        if self.num_states < 1:
            raise LanguageError("a DFA needs at least one state")
        states = range(self.num_states)
        if self.start not in states:
            raise LanguageError(f"start state {self.start} out of range")
        if not self.accepting <= set(states):
            raise LanguageError("accepting states must be a subset of the states")
        for q in states:
            for a in self.alphabet.symbols:
                if (q, a) not in self.transitions:
                    raise LanguageError(f"transition from state {q} on {a!r} is missing")
                if self.transitions[(q, a)] not in states:
                    raise LanguageError(f"transition ({q}, {a!r}) leads out of range")
        for q, a in self.transitions:
            if q not in states or a not in self.alphabet.symbols:
                raise LanguageError(f"transition ({q}, {a!r}) is outside states x alphabet")

    def delta(self, q: int, a: str) -> int:
        return self.transitions[(q, a)]

    def inverse(self, q: int) -> list[tuple[int, str]]:
        """Pairs ``(j, a)`` with ``delta(j, a) == q``, in (state, symbol) order."""
        return [(j, a) for j in range(self.num_states) for a in self.alphabet.symbols
                if self.transitions[(j, a)] == q]

    def run(self, s: str) -> int:
        self.alphabet.check(s)
        q = self.start
        for ch in s:
            q = self.transitions[(q, ch)]
        return q


def dfa_accepts(dfa: Dfa, s: str) -> bool:
    return dfa.run(s) in dfa.accepting


def parity_dfa() -> Dfa:
    """Even number of 1s over {0,1}."""
    t = {(0, "0"): 0, (0, "1"): 1, (1, "0"): 1, (1, "1"): 0}
    return Dfa(BINARY, 2, 0, frozenset({0}), t)


def one_b_dfa() -> Dfa:
    """a*ba*: exactly one b.  State 2 is the sink."""
    t = {(0, "a"): 0, (0, "b"): 1, (1, "a"): 1, (1, "b"): 2, (2, "a"): 2, (2, "b"): 2}
    return Dfa(AB, 3, 0, frozenset({1}), t)


def contains_ab_dfa() -> Dfa:
    """Strings containing the substring ab.  State 2 absorbs."""
    t = {(0, "a"): 1, (0, "b"): 0, (1, "a"): 1, (1, "b"): 2, (2, "a"): 2, (2, "b"): 2}
    return Dfa(AB, 3, 0, frozenset({2}), t)


def universal_dfa(alphabet: Alphabet = BINARY) -> Dfa:
    t = {(0, a): 0 for a in alphabet.symbols}
    return Dfa(alphabet, 1, 0, frozenset({0}), t)


def write_dfa(dfa: Dfa) -> str:
    lines = [f"alphabet {dfa.alphabet}",
             " ".join(["dfa", str(dfa.num_states), str(dfa.start)] + [str(q) for q in sorted(dfa.accepting)])]
    for q in range(dfa.num_states):
        for a in dfa.alphabet.symbols:
            lines.append(f"{q} {a} {dfa.transitions[(q, a)]}")
    return "\n".join(lines) + "\n"


def read_dfa(text: str) -> Dfa:
    """Parse the DFA text format.

    An optional ``alphabet SYMBOLS`` line may precede the ``dfa Q start F...``
    header; without it the alphabet is the set of transition symbols in order
    of first appearance.
    """
    alphabet = None
    header = None
    trans: dict[tuple[int, str], int] = {}
    seen: list[str] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("//"):
            continue
        parts = line.split()
        try:
            if parts[0] == "alphabet":
                alphabet = Alphabet.of(parts[1])
            elif parts[0] == "dfa":
                header = (int(parts[1]), int(parts[2]), [int(p) for p in parts[3:]])
            else:
                q, a, r = parts
                if (int(q), a) in trans:
                    raise LanguageError(f"line {lineno}: duplicate transition")
                trans[(int(q), a)] = int(r)
                if a not in seen:
                    seen.append(a)
        except (IndexError, ValueError) as exc:
            if isinstance(exc, LanguageError):
                raise
            raise LanguageError(f"line {lineno}: cannot parse {raw!r}") from None
    if header is None:
        raise LanguageError("missing 'dfa Q start F...' header")
    if alphabet is None:
        alphabet = Alphabet.of(seen)
    nq, start, acc = header
    return Dfa(alphabet, nq, start, frozenset(acc), trans)


def load_dfa(path: str | Path) -> Dfa:
    return read_dfa(Path(path).read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# Strictly local grammars


def _padding_shape(gram: str) -> tuple[int, int] | None:
    """(leading, trailing) padding counts, or None if '#' is not at the edges."""
    p = len(gram) - len(gram.lstrip(PAD))
    if p == len(gram):
        return p, 0
    q = len(gram) - len(gram.rstrip(PAD))
    if PAD in gram[p:len(gram) - q]:
        return None
    return p, q


@dataclass(frozen=True)
class SlGrammar:
    alphabet: Alphabet
    k: int
    allowed: frozenset[str]

    def __post_init__(self):
        object.__setattr__(self, "allowed", frozenset(self.allowed))
        if self.k < 1:
            raise LanguageError("gram width must be positive")
        for g in self.allowed:
            if len(g) != self.k:
                raise LanguageError(f"gram {g!r} does not have width {self.k}")
            if _padding_shape(g) is None:
                raise LanguageError(f"gram {g!r} has padding in its interior")
            for ch in g:
                if ch != PAD:
                    self.alphabet.index(ch)

    def universe(self) -> list[str]:
        """Every well-formed k-gram: symbols with optional edge padding."""
        out = []
        for tup in itertools.product((PAD,) + self.alphabet.symbols, repeat=self.k):
            g = "".join(tup)
            if _padding_shape(g) is not None:
                out.append(g)
        return out

    def forbidden(self) -> list[str]:
        return [g for g in self.universe() if g not in self.allowed]

    def windows(self, s: str) -> list[str]:
        padded = PAD * (self.k - 1) + s + PAD * (self.k - 1)
        return [padded[i:i + self.k] for i in range(len(padded) - self.k + 1)]


def sl_accepts(g: SlGrammar, s: str) -> bool:
    g.alphabet.check(s)
    return all(w in g.allowed for w in g.windows(s))


def sl_from_forbidden(alphabet: Alphabet, k: int, forbidden: Iterable[str]) -> SlGrammar:
    bad = set(forbidden)
    probe = SlGrammar(alphabet, k, frozenset())
    return SlGrammar(alphabet, k, frozenset(g for g in probe.universe() if g not in bad))


def no_aa_grammar() -> SlGrammar:
    """Width 3 over {a,b}: forbids every gram containing "aa"."""
    probe = SlGrammar(AB, 3, frozenset())
    return SlGrammar(AB, 3, frozenset(g for g in probe.universe() if "aa" not in g))


def no_bab_edge_grammar() -> SlGrammar:
    """Width 5 over {a,b}: no "bab" anywhere, and strings may not start with b."""
    probe = SlGrammar(AB, 5, frozenset())
    allowed = [g for g in probe.universe() if "bab" not in g and "#b" not in g]
    return SlGrammar(AB, 5, frozenset(allowed))


def write_sl(g: SlGrammar) -> str:
    lines = [f"alphabet {g.alphabet}", f"sl {g.k}"] + sorted(g.allowed)
    return "\n".join(lines) + "\n"


def read_sl(text: str) -> SlGrammar:
    alphabet = None
    k = None
    grams = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("//"):
            continue
        parts = line.split()
        if parts[0] == "alphabet" and len(parts) == 2:
            alphabet = Alphabet.of(parts[1])
        elif parts[0] == "sl" and len(parts) == 2:
            try:
                k = int(parts[1])
            except ValueError:
                raise LanguageError(f"line {lineno}: bad width {parts[1]!r}") from None
        elif len(parts) == 1:
            grams.append(parts[0])
        else:
            raise LanguageError(f"line {lineno}: cannot parse {raw!r}")
    if k is None:
        raise LanguageError("missing 'sl k' header")
    if alphabet is None:
        alphabet = Alphabet.of(sorted({ch for g in grams for ch in g if ch != PAD}))
    return SlGrammar(alphabet, k, frozenset(grams))


def load_sl(path: str | Path) -> SlGrammar:
    return read_sl(Path(path).read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# Corpora


@dataclass(frozen=True)
class Corpus:
    items: tuple[tuple[str, str], ...]
    split: str
    seed: int
    alphabet: Alphabet

    def __len__(self):
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    def inputs(self) -> list[str]:
        return [x for x, _ in self.items]


def counting_string(n: int) -> str:
    return "a" * n + "b" * n + "c"


def lm_targets(s: str) -> str:
    """Next-symbol targets for every position of ``s``, closed by EOS."""
    return s[1:] + EOS


def gen_counting_corpus(n_lo: int, n_hi: int, count: int, seed: int, split: str = "train") -> Corpus:
    if count <= 0:
        raise ConfigError("count must be positive")
    if not 1 <= n_lo <= n_hi:
        raise ConfigError(f"need 1 <= n_lo <= n_hi, got {n_lo}, {n_hi}")
    rng = random.Random(seed)
    items = []
    for _ in range(count):
        s = counting_string(rng.randint(n_lo, n_hi))
        items.append((s, lm_targets(s)))
    return Corpus(tuple(items), split, seed, Alphabet.of("abc"))


def gen_reversal_corpus(count: int, len_mean: float, len_sd: float, seed: int, split: str = "train") -> Corpus:
    if count <= 0:
        raise ConfigError("count must be positive")
    if len_mean <= 0:
        raise ConfigError("len_mean must be positive")
    rng = random.Random(seed)
    items = []
    for _ in range(count):
        n = max(1, int(round(rng.gauss(len_mean, len_sd))))
        w = "".join(rng.choice("01") for _ in range(n))
        items.append((w, w[::-1]))
    return Corpus(tuple(items), split, seed, BINARY)


def write_corpus(corpus: Corpus) -> str:
    return "".join(f"{x}\t{y}\n" for x, y in corpus.items)


def read_corpus(text: str, alphabet: Alphabet, split: str = "train", seed: int = 0) -> Corpus:
    items = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise LanguageError(f"line {lineno}: expected input<TAB>target")
        alphabet.check(parts[0])
        items.append((parts[0], parts[1]))
    return Corpus(tuple(items), split, seed, alphabet)


def all_strings(alphabet: Alphabet, lengths: Sequence[int]) -> list[str]:
    return [s for n in lengths for s in alphabet.strings(n)]
