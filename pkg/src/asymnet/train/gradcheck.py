"""Central finite-difference checks of the reverse-mode gradients."""
from __future__ import annotations

from typing import Callable

import numpy as np

from . import autodiff as ad
from .models import LM_INPUTS, LanguageModel, Seq2Seq

STEP = 1e-5
# below this magnitude both derivatives are compared absolutely; central
# differences at STEP cannot resolve much less than ~1e-10 anyway
FLOOR = 1e-6


def rel_error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), FLOOR)


def max_rel_error(params: dict[str, ad.Tensor], loss_fn: Callable[[], ad.Tensor], step: float = STEP) -> float:
    """Largest relative error over every coordinate of every parameter."""
    grads = ad.grad(loss_fn(), params)
    worst = 0.0
    for name, p in params.items():
        flat = p.data.reshape(-1)
        g = grads[name].reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + step
            up = float(loss_fn().data)
            flat[i] = old - step
            down = float(loss_fn().data)
            flat[i] = old
            worst = max(worst, rel_error(g[i], (up - down) / (2 * step)))
    return worst


def _random_lm_strings(rng: np.random.Generator, count: int, max_len: int) -> list[str]:
    return ["".join(rng.choice(list(LM_INPUTS), size=int(rng.integers(1, max_len + 1)))) for _ in range(count)]


def lm_instance(arch: str, rng: np.random.Generator, noise_sd: float = 0.0) -> float:
    model = LanguageModel.init(arch, 2, rng)
    for p in model.params.values():
        p.data *= rng.uniform(0.5, 2.0)
    xs = _random_lm_strings(rng, 2, 4)
    ys = ["".join(rng.choice(list("abc$"), size=len(x))) for x in xs]
    noise_seed = int(rng.integers(2 ** 31))
    # fresh generator per evaluation so every loss sees the same noise draw
    return max_rel_error(model.params, lambda: model.loss(xs, ys, noise_sd, np.random.default_rng(noise_seed)))


def seq2seq_instance(attention: bool, rng: np.random.Generator) -> float:
    model = Seq2Seq.init(2, attention, rng)
    n = int(rng.integers(1, 4))
    xs = ["".join(rng.choice(["0", "1"], size=n)) for _ in range(2)]
    return max_rel_error(model.params, lambda: model.loss(xs, [x[::-1] for x in xs]))


def check_all(instances: int = 100, seed: int = 0) -> dict[str, float]:
    """Worst relative error per architecture over ``instances`` random instances."""
    rng = np.random.default_rng(seed)
    worst = {}
    for arch in ("SRN", "GRU", "LSTM"):
        worst[arch] = max(lm_instance(arch, rng, noise_sd=0.1 * (i % 2)) for i in range(instances))
    worst["LSTM-encdec"] = max(seq2seq_instance(False, rng) for _ in range(instances))
    worst["LSTM-attn"] = max(seq2seq_instance(True, rng) for _ in range(instances))
    return worst
