"""Training loops, metrics and the counting / reversal experiments."""
from __future__ import annotations

import math
import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from ..lang import Alphabet, Corpus, counting_string, gen_counting_corpus, gen_reversal_corpus, lm_targets
from . import autodiff as ad
from .models import LanguageModel, Seq2Seq


class DivergenceError(RuntimeError):
    def __init__(self, epoch: int):
        super().__init__(f"loss became NaN or infinite at epoch {epoch}")
        self.epoch = epoch


@dataclass
class TrainConfig:
    arch: str = "LSTM"
    hidden: int = 2
    lr: float = 0.1
    optimizer: str = "sgd"
    epochs: int = 300
    batch_size: int = 0  # 0: whole training set per update
    clip: float = 5.0
    plateau: int = 20  # epochs without improvement before halving the lr
    noise_sd: float = 0.0
    seed: int = 0
    train_range: tuple[int, int] = (2, 64)
    test_range: tuple[int, int] = (96, 128)
    train_count: int = 0  # 0: one string per n in the training range
    train_len: tuple[float, float] = (10.0, 2.0)
    gen_len: tuple[float, float] = (30.0, 3.0)
    val_count: int = 200
    gen_count: int = 200

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Metrics:
    accuracy: float | None = None
    acc_on_c: float | None = None
    val_exact: float | None = None
    gen_exact: float | None = None
    losses: list[float] = field(default_factory=list)
    lrs: list[float] = field(default_factory=list)
    epochs_run: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


class Sgd:
    """SGD with global-norm clipping; the lr halves when the loss plateaus."""

    def __init__(self, params: dict, lr: float, clip: float, patience: int):
        self.params, self.lr, self.clip, self.patience = params, lr, clip, patience
        self.best = math.inf
        self.stale = 0

    def step(self, grads: dict):
        norm = math.sqrt(sum(float((g * g).sum()) for g in grads.values()))
        scale = min(1.0, self.clip / norm) if norm > 0 else 1.0
        for name, p in self.params.items():
            p.data -= self.lr * scale * grads[name]

    def end_epoch(self, loss: float):
        if loss < self.best - 1e-4:
            self.best, self.stale = loss, 0
        else:
            self.stale += 1
            if self.stale >= self.patience:
                self.lr /= 2
                self.stale = 0


class Adam(Sgd):
    def __init__(self, params: dict, lr: float, clip: float, patience: int, betas=(0.9, 0.999), eps=1e-8):
        super().__init__(params, lr, clip, patience)
        self.betas, self.eps, self.t = betas, eps, 0
        self.m = {n: np.zeros_like(p.data) for n, p in params.items()}
        self.v = {n: np.zeros_like(p.data) for n, p in params.items()}

    def step(self, grads: dict):
        norm = math.sqrt(sum(float((g * g).sum()) for g in grads.values()))
        scale = min(1.0, self.clip / norm) if norm > 0 else 1.0
        b1, b2 = self.betas
        self.t += 1
        for name, p in self.params.items():
            g = grads[name] * scale
            self.m[name] = b1 * self.m[name] + (1 - b1) * g
            self.v[name] = b2 * self.v[name] + (1 - b2) * g * g
            mh = self.m[name] / (1 - b1 ** self.t)
            vh = self.v[name] / (1 - b2 ** self.t)
            p.data -= self.lr * mh / (np.sqrt(vh) + self.eps)


def make_optimizer(cfg: TrainConfig, params: dict):
    if cfg.optimizer == "sgd":
        return Sgd(params, cfg.lr, cfg.clip, cfg.plateau)
    if cfg.optimizer == "adam":
        return Adam(params, cfg.lr, cfg.clip, cfg.plateau)
    raise ValueError(f"unknown optimizer {cfg.optimizer!r}")


def _batches(items: list, size: int, rng: np.random.Generator) -> list[list]:
    order = rng.permutation(len(items))
    if size <= 0 or size >= len(items):
        return [[items[i] for i in order]]
    return [[items[i] for i in order[j:j + size]] for j in range(0, len(items), size)]


def counting_corpora(cfg: TrainConfig) -> tuple[Corpus, Corpus]:
    lo, hi = cfg.train_range
    if cfg.train_count:
        train = gen_counting_corpus(lo, hi, cfg.train_count, cfg.seed)
    else:
        train = _every_n(lo, hi, "train")
    test = _every_n(*cfg.test_range, "gen")
    return train, test


def _every_n(lo: int, hi: int, split: str) -> Corpus:
    items = tuple((counting_string(n), lm_targets(counting_string(n))) for n in range(lo, hi + 1))
    return Corpus(items, split, 0, Alphabet.of("abc"))


def score_counting(inputs: list[str], golds: list[str], preds: list[str]) -> tuple[float, float]:
    """Overall and c-position next-symbol accuracy, in percent, against the gold targets."""
    right = seen = c_right = c_seen = 0
    for gold, pred in zip(golds, preds):
        for g, p in zip(gold, pred):
            right += g == p
            seen += 1
            if g == "c":
                c_right += g == p
                c_seen += 1
    overall = 100.0 * right / seen if seen else 0.0
    on_c = 100.0 * c_right / c_seen if c_seen else 0.0
    return overall, on_c


def eval_counting(model: LanguageModel, corpus: Corpus) -> Metrics:
    inputs = [x for x, _ in corpus]
    golds = [y for _, y in corpus]
    overall, on_c = score_counting(inputs, golds, model.predict(inputs))
    return Metrics(accuracy=overall, acc_on_c=on_c)


def _finite(loss: float, epoch: int) -> float:
    if not math.isfinite(loss):
        raise DivergenceError(epoch)
    return loss


def train_lm(arch: str, corpus: Corpus, cfg: TrainConfig, test: Corpus | None = None) -> tuple[LanguageModel, Metrics]:
    """Next-symbol cross-entropy training with optional state noise."""
    rng = np.random.default_rng(cfg.seed)
    model = LanguageModel.init(arch, cfg.hidden, rng)
    opt = make_optimizer(cfg, model.params)
    noise_rng = np.random.default_rng([cfg.seed, 1])
    items = list(corpus)
    metrics = Metrics()
    for epoch in range(cfg.epochs):
        total = 0.0
        batches = _batches(items, cfg.batch_size, rng)
        for batch in batches:
            loss = model.loss([x for x, _ in batch], [y for _, y in batch], cfg.noise_sd, noise_rng)
            total += _finite(float(loss.data), epoch)
            opt.step(ad.grad(loss, model.params))
        total /= len(batches)
        metrics.losses.append(total)
        metrics.lrs.append(opt.lr)
        opt.end_epoch(total)
    metrics.epochs_run = cfg.epochs
    if test is not None:
        m = eval_counting(model, test)
        metrics.accuracy, metrics.acc_on_c = m.accuracy, m.acc_on_c
    return model, metrics


def _buckets(items: list[tuple[str, str]], size: int, rng: np.random.Generator) -> list[list]:
    """Shuffled batches in which every input has the same length."""
    by_len: dict[int, list] = {}
    for it in items:
        by_len.setdefault(len(it[0]), []).append(it)
    batches = []
    for n in sorted(by_len):
        group = by_len[n]
        order = rng.permutation(len(group))
        step = size if size > 0 else len(group)
        batches += [[group[i] for i in order[j:j + step]] for j in range(0, len(group), step)]
    return [batches[i] for i in rng.permutation(len(batches))]


def exact_match(model: Seq2Seq, corpus: Corpus) -> float:
    """Percentage of inputs whose greedy decoding equals the target exactly."""
    items = list(corpus)
    right = 0
    for batch in _buckets(items, 0, np.random.default_rng(0)):
        n = len(batch[0][0])
        outs = model.decode([x for x, _ in batch], 2 * n + 2)
        right += sum(o == y for o, (_, y) in zip(outs, batch))
    return 100.0 * right / len(items)


def reversal_corpora(cfg: TrainConfig) -> tuple[Corpus, Corpus, Corpus]:
    mean, sd = cfg.train_len
    train = gen_reversal_corpus(800, mean, sd, cfg.seed, "train")
    val = gen_reversal_corpus(cfg.val_count, mean, sd, cfg.seed + 10_000, "val")
    gen = gen_reversal_corpus(cfg.gen_count, *cfg.gen_len, cfg.seed + 20_000, "gen")
    return train, val, gen


def train_seq2seq_reversal(with_attention: bool, cfg: TrainConfig) -> tuple[Seq2Seq, Metrics]:
    """Teacher-forced training of the reversal transducer; exact match on val and gen."""
    rng = np.random.default_rng(cfg.seed)
    train, val, gen = reversal_corpora(cfg)
    model = Seq2Seq.init(cfg.hidden, with_attention, rng)
    opt = make_optimizer(cfg, model.params)
    items = list(train)
    metrics = Metrics()
    for epoch in range(cfg.epochs):
        total = 0.0
        batches = _buckets(items, cfg.batch_size, rng)
        for batch in batches:
            loss = model.loss([x for x, _ in batch], [y for _, y in batch])
            total += _finite(float(loss.data), epoch)
            opt.step(ad.grad(loss, model.params))
        total /= len(batches)
        metrics.losses.append(total)
        metrics.lrs.append(opt.lr)
        opt.end_epoch(total)
    metrics.epochs_run = cfg.epochs
    metrics.val_exact = exact_match(model, val)
    metrics.gen_exact = exact_match(model, gen)
    return model, metrics


# ---------------------------------------------------------------------------
# Desk-scale protocols

COUNTING_DEFAULTS = dict(hidden=2, optimizer="adam", lr=0.05, epochs=600, batch_size=0, plateau=10 ** 9)
REVERSAL_DEFAULTS = dict(hidden=10, optimizer="adam", lr=0.01, epochs=60, batch_size=32, plateau=10 ** 9)


def desk_config(task: str, arch: str = "LSTM", noise_sd: float = 0.0, seed: int = 0,
                full_scale: bool = False) -> TrainConfig:
    if task == "counting":
        cfg = TrainConfig(arch=arch, noise_sd=noise_sd, seed=seed, **COUNTING_DEFAULTS)
        if full_scale:
            cfg = replace(cfg, train_range=(5, 1000), test_range=(2000, 2200))
        return cfg
    if task == "reversal":
        cfg = TrainConfig(arch="LSTM", seed=seed, **REVERSAL_DEFAULTS)
        if full_scale:
            cfg = replace(cfg, gen_len=(50.0, 5.0))
        return cfg
    raise ValueError(f"unknown task {task!r}")


def with_value(cfg: TrainConfig, key: str, raw: str) -> TrainConfig:
    """``cfg`` with ``key`` parsed from text to the type of its current value."""
    current = getattr(cfg, key)
    if isinstance(current, tuple):
        value = tuple(type(c)(part) for c, part in zip(current, raw.split(",")))
    elif isinstance(current, bool):
        value = raw.lower() in ("1", "true", "yes")
    else:
        value = type(current)(raw)
    return replace(cfg, **{key: value})


def save_model(model: LanguageModel | Seq2Seq, path) -> None:
    kind = "lm" if isinstance(model, LanguageModel) else "seq2seq"
    meta = {"kind": kind, "hidden": model.hidden}
    if kind == "lm":
        meta["arch"] = model.arch
    else:
        meta["attention"] = model.attention
    meta["params"] = {n: {"shape": list(p.shape), "data": [repr(float(v)) for v in p.data.reshape(-1)]}
                      for n, p in model.params.items()}
    Path(path).write_text(json.dumps(meta) + "\n")


def load_model(path) -> LanguageModel | Seq2Seq:
    meta = json.loads(Path(path).read_text())
    params = {n: ad.param(np.array([float(v) for v in t["data"]]).reshape(t["shape"]))
              for n, t in meta["params"].items()}
    if meta["kind"] == "lm":
        return LanguageModel(meta["arch"], meta["hidden"], params)
    return Seq2Seq(meta["hidden"], meta["attention"], params)


def _counting_run(args) -> dict:
    arch, noise, seed = args
    cfg = desk_config("counting", arch, noise, seed)
    train, test = counting_corpora(cfg)
    _, m = train_lm(arch, train, cfg, test)
    return {"arch": arch, "noise_sd": noise, "seed": seed, "accuracy": m.accuracy, "acc_on_c": m.acc_on_c}


def _reversal_run(args) -> dict:
    attention, seed = args
    _, m = train_seq2seq_reversal(attention, desk_config("reversal", seed=seed))
    return {"attention": attention, "seed": seed, "val_exact": m.val_exact, "gen_exact": m.gen_exact}


def _map(fn, jobs: list, workers: int) -> list:
    if workers <= 1:
        return [fn(j) for j in jobs]
    from concurrent.futures import ProcessPoolExecutor
    with ProcessPoolExecutor(workers) as pool:
        return list(pool.map(fn, jobs))


def counting_runs(seeds: int = 5, workers: int = 1, noise_sd: float = 0.1) -> list[dict]:
    jobs = [(arch, nz, s) for arch in ("SRN", "GRU", "LSTM") for nz in (0.0, noise_sd) for s in range(seeds)]
    return _map(_counting_run, jobs, workers)


def best_of(runs: list[dict], key: str) -> dict:
    return max(runs, key=lambda r: (r[key], r["accuracy"] if key != "accuracy" else 0))


def counting_table(seeds: int = 5, workers: int = 1) -> dict[tuple[str, bool], dict]:
    """Best seed per (arch, noisy) cell, selected by Acc-on-c."""
    runs = counting_runs(seeds, workers)
    table = {}
    for arch in ("SRN", "GRU", "LSTM"):
        for noisy in (False, True):
            cell = [r for r in runs if r["arch"] == arch and (r["noise_sd"] > 0) == noisy]
            table[(arch, noisy)] = best_of(cell, "acc_on_c")
    return table


def reversal_table(trials: int = 10, workers: int = 1) -> dict[bool, dict]:
    """Max validation and max generalization exact match over trials, per model."""
    runs = _map(_reversal_run, [(att, s) for att in (False, True) for s in range(trials)], workers)
    table = {}
    for att in (False, True):
        cell = [r for r in runs if r["attention"] == att]
        table[att] = {"val_exact": max(r["val_exact"] for r in cell),
                      "gen_exact": max(r["gen_exact"] for r in cell), "runs": cell}
    return table
