"""The acceptance suite: one function per criterion, each returning a Result.

``run_all`` is shared by ``asymnet verify`` and the pytest acceptance gate.
"""
from __future__ import annotations

import time
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Callable

import numpy as np

from . import asym, compilers, lang, nets, statecomp
from .asym import asym_accept, find_scale
from .train import gradcheck
from .train.experiments import counting_table, reversal_table


@dataclass
class Result:
    criterion: int
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        return f"[{mark}] {self.criterion}. {self.name}: {self.detail} ({self.seconds:.1f}s)"


def fixture_dir() -> Path:
    return Path(str(resources.files("asymnet") / "fixtures"))


def fixture_dfas(root: Path | None = None) -> dict[str, lang.Dfa]:
    root = root or fixture_dir()
    return {name: lang.load_dfa(root / f"{name}.dfa") for name in ("parity", "one_b", "contains_ab")}


def fixture_grammars(root: Path | None = None) -> dict[str, lang.SlGrammar]:
    root = root or fixture_dir()
    return {name: lang.load_sl(root / f"{name}.sl") for name in ("no_aa", "no_bab_edge")}


# ---------------------------------------------------------------------------


def limit_activations(n: int = 1000, N: float = 1e4, seed: int = 0) -> Result:
    """Limits agree with continuous evaluation at a large finite scale."""
    rng = np.random.default_rng(seed)
    bad = 0
    for _ in range(n):
        x = rng.uniform(0.1, 5.0) * rng.choice([-1, 1])
        if abs(nets.sigmoid(N * x) - float(asym.asym_sigmoid(x))) > 1e-3:
            bad += 1
        if abs(np.tanh(N * x) - float(asym.asym_tanh(x))) > 1e-3:
            bad += 1
        # scores with ties at the top and every other score >= 0.1 below
        width = int(rng.integers(2, 6))
        top = rng.uniform(-2, 2)
        u = top - rng.uniform(0.1, 3.0, size=width)
        u[rng.random(width) < 0.4] = top
        u[0] = top
        z = N * u
        e = np.exp(z - z.max())
        cont = e / e.sum()
        lim = np.array([float(v) for v in asym.asym_softmax(u.tolist())])
        if np.abs(cont - lim).max() > 1e-3:
            bad += 1
    return Result(1, "limit activations", bad == 0, f"{3 * n - bad}/{3 * n} agree at N={N:g}")


def dfa_compilation(root: Path | None = None, max_len: int = 9) -> Result:
    strings = list(lang.BINARY.strings_upto(max_len))
    problems, checked = [], 0
    for name, dfa in fixture_dfas(root).items():
        for kind, compile_fn in (("SRN", compilers.compile_dfa_to_srn), ("GRU", compilers.compile_dfa_to_gru)):
            comp = compile_fn(dfa)
            ss = [s.translate(str.maketrans("01", "".join(dfa.alphabet.symbols))) for s in strings]
            wrong = sum(bool(asym_accept(comp.net, s)) != lang.dfa_accepts(dfa, s) for s in ss)
            try:
                rep = find_scale(comp.net, ss)
                wrong += sum(rep.decisions[s] != lang.dfa_accepts(dfa, s) for s in ss)
            except (ValueError, asym.NoConvergence) as exc:
                problems.append(f"{name}/{kind}: {exc}")
            checked += len(ss)
            if wrong:
                problems.append(f"{name}/{kind}: {wrong} disagreements")
    detail = "; ".join(problems) if problems else f"{checked} strings x 2 evaluations agree"
    return Result(2, "DFA compilation", not problems, detail)


def sl_compilation(root: Path | None = None, max_len: int = 10) -> Result:
    g = fixture_grammars(root)["no_aa"]
    comp = compilers.compile_sl_to_cnn(g)
    strings = list(g.alphabet.strings_upto(max_len, 1))
    wrong = [s for s in strings if bool(asym_accept(comp.net, s)) != lang.sl_accepts(g, s)]
    return Result(3, "SL compilation", not wrong,
                  f"{len(strings) - len(wrong)}/{len(strings)} strings agree" + (f", first miss {wrong[0]!r}" if wrong else ""))


def cnn_counterexample(root: Path | None = None) -> Result:
    problems = []
    cnns = {name: compilers.compile_sl_to_cnn(g).net for name, g in fixture_grammars(root).items()}
    for k in (1, 2):
        s1, s2 = compilers.cnn_counterexample_pair(k)
        one_b = lang.one_b_dfa()
        if lang.dfa_accepts(one_b, s1) == lang.dfa_accepts(one_b, s2):
            problems.append(f"k={k}: pair is not split by a*ba*")
        if compilers.window_set(s1, k) != compilers.window_set(s2, k):
            problems.append(f"k={k}: window sets differ")
        for name, net in cnns.items():
            ln = asym.LimitNet(net)
            if ln.run([net.alphabet.index(c) for c in s1]).pooled != ln.run([net.alphabet.index(c) for c in s2]).pooled:
                problems.append(f"k={k}: pooled vectors differ on {name}")
    detail = "; ".join(problems) if problems else f"k=1,2: identical pooled limits on {len(cnns)} CNNs"
    return Result(4, "CNN counterexample", not problems, detail)


def state_complexity(seed: int = 0) -> Result:
    rng = np.random.default_rng(seed)
    problems = []
    for arch, bound in (("SRN", 4), ("GRU", 9)):
        for trial in range(5):
            net = nets.random_network(arch, lang.BINARY, 2, rng)
            for n in range(1, 11):
                c = len(statecomp.config_set(net, "h", n))
                if c > bound:
                    problems.append(f"(a/b) {arch} trial {trial}: {c} > {bound} at n={n}")
    plus = compilers.counter_cell_network(compilers.THETA_PLUS)
    for n in range(1, 13):
        c = len(statecomp.config_set(plus, "h", n))
        if c != n + 1:
            problems.append(f"(c) counter: {c} != {n + 1} at n={n}")
    ident = compilers.identity_attention_encoder()
    for n in range(1, 9):
        c = len(statecomp.config_set(ident, "V", n))
        if c != 2 ** n:
            problems.append(f"(d) identity encoder: {c} != {2 ** n} at n={n}")
    counting = compilers.attention_counting_encoder()
    for n in range(1, 11):
        c = len(statecomp.config_set(counting, "summary", n))
        if c != n:
            problems.append(f"(e) counting summary: {c} != {n} at n={n}")
    detail = "; ".join(problems[:4]) + (f" (+{len(problems) - 4} more)" if len(problems) > 4 else "")
    return Result(5, "state complexity", not problems, detail or "all counts exact")


def gradient_check(instances: int = 100, seed: int = 0) -> Result:
    worst = gradcheck.check_all(instances, seed)
    ok = all(err < 1e-4 for err in worst.values())
    return Result(6, "gradient check", ok, ", ".join(f"{a} max rel err {e:.1e}" for a, e in worst.items()))


def counting_experiment(seeds: int = 5, jobs: int = 1) -> Result:
    table = counting_table(seeds, jobs)
    clean = all(table[(a, False)]["acc_on_c"] >= 99.0 for a in ("SRN", "GRU", "LSTM"))
    lstm_noisy = table[("LSTM", True)]["acc_on_c"] >= 99.0
    collapsed = all(table[(a, True)]["accuracy"] < 70.0 for a in ("SRN", "GRU"))
    detail = "; ".join(f"{a}{' noise' if nz else ''}: acc {r['accuracy']:.1f} c {r['acc_on_c']:.1f}"
                       for (a, nz), r in table.items())
    return Result(7, "counting experiment", clean and lstm_noisy and collapsed, detail)


def reversal_experiment(trials: int = 10, jobs: int = 1) -> Result:
    table = reversal_table(trials, jobs)
    att, plain = table[True], table[False]
    ok = att["val_exact"] >= 99.0 and att["gen_exact"] <= 70.0 and plain["val_exact"] < att["val_exact"]
    detail = (f"attention val {att['val_exact']:.1f} gen {att['gen_exact']:.1f}; "
              f"plain val {plain['val_exact']:.1f} gen {plain['gen_exact']:.1f}")
    return Result(8, "reversal experiment", ok, detail)


def finite_realization(root: Path | None = None, m: int = 8) -> Result:
    problems = []
    nets_ = []
    for name, dfa in fixture_dfas(root).items():
        nets_.append((f"{name}/SRN", compilers.compile_dfa_to_srn(dfa).net, lambda s, d=dfa: lang.dfa_accepts(d, s)))
        nets_.append((f"{name}/GRU", compilers.compile_dfa_to_gru(dfa).net, lambda s, d=dfa: lang.dfa_accepts(d, s)))
    for name, g in fixture_grammars(root).items():
        nets_.append((f"{name}/CNN", compilers.compile_sl_to_cnn(g).net, lambda s, g=g: lang.sl_accepts(g, s)))
    for name, net, oracle in nets_:
        strings = list(net.alphabet.strings_upto(m - 1))
        try:
            rep = find_scale(net, strings)
        except (ValueError, asym.NoConvergence) as exc:
            problems.append(f"{name}: {exc}")
            continue
        scaled = net.scaled(rep.N)
        wrong = sum(round(nets.acceptor_forward(scaled, s).p) != oracle(s) for s in strings)
        if wrong:
            problems.append(f"{name}: {wrong} strings misclassified at N={rep.N}")
    return Result(9, "finite-scale realization", not problems,
                  "; ".join(problems) or f"{len(nets_)} networks realized with finite N")


def run_all(skip_training: bool = False, fixtures: Path | None = None, jobs: int = 1,
            report: Callable[[Result], None] | None = None) -> list[Result]:
    plan: list[tuple[int, str, Callable[[], Result]]] = [
        (1, "limit activations", limit_activations),
        (2, "DFA compilation", lambda: dfa_compilation(fixtures)),
        (3, "SL compilation", lambda: sl_compilation(fixtures)),
        (4, "CNN counterexample", lambda: cnn_counterexample(fixtures)),
        (5, "state complexity", state_complexity),
        (6, "gradient check", gradient_check),
    ]
    if not skip_training:
        plan += [(7, "counting experiment", lambda: counting_experiment(jobs=jobs)),
                 (8, "reversal experiment", lambda: reversal_experiment(jobs=jobs))]
    plan.append((9, "finite-scale realization", lambda: finite_realization(fixtures)))
    results = []
    for num, name, fn in plan:
        t0 = time.perf_counter()
        try:
            res = fn()
        except Exception as exc:  # a broken fixture fails its criterion, not the run
            res = Result(num, name, False, f"{type(exc).__name__}: {exc}")
        res.seconds = time.perf_counter() - t0
        results.append(res)
        if report:
            report(res)
    return results
