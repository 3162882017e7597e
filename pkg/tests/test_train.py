import math
from dataclasses import replace

import numpy as np
import pytest

from asymnet.lang import counting_string, lm_targets
from asymnet.train import autodiff as ad
from asymnet.train import experiments as ex
from asymnet.train import gradcheck
from asymnet.train.models import LanguageModel, Seq2Seq, inject_noise


def test_sigmoid_and_tanh_derivatives_at_zero():
    x = ad.param(np.zeros(1))
    ad.total(ad.sigmoid(x)).backward()
    assert x.grad[0] == pytest.approx(0.25)
    y = ad.param(np.zeros(1))
    ad.total(ad.tanh(y)).backward()
    assert y.grad[0] == pytest.approx(1.0)


def test_backward_needs_scalar():
    with pytest.raises(ValueError):
        ad.tanh(ad.param(np.zeros(3))).backward()


def test_shared_parameter_gradients_accumulate():
    w = ad.param(np.array([3.0]))
    loss = ad.total(ad.mul(w, w) + w)
    assert ad.grad(loss, {"w": w})["w"][0] == pytest.approx(7.0)


def test_softmax_cross_entropy_uniform():
    loss = ad.softmax_cross_entropy(ad.param(np.zeros((1, 2, 4))), np.array([[0, 3]]))
    assert float(loss.data) == pytest.approx(math.log(4))


def test_attend_matches_numpy():
    rng = np.random.default_rng(0)
    q, H = rng.normal(size=(2, 3)), rng.normal(size=(2, 5, 3))
    out = ad.attend(ad.param(q), ad.param(H)).data
    s = np.einsum("bd,btd->bt", q, H)
    w = np.exp(s - s.max(1, keepdims=True))
    w /= w.sum(1, keepdims=True)
    assert np.allclose(out, np.einsum("bt,btd->bd", w, H))


@pytest.mark.parametrize("arch", ["SRN", "GRU", "LSTM"])
def test_gradients_match_finite_differences(arch):
    rng = np.random.default_rng(3)
    for _ in range(3):
        assert gradcheck.lm_instance(arch, rng) < 1e-4
    assert gradcheck.lm_instance(arch, rng, noise_sd=0.1) < 1e-4


@pytest.mark.parametrize("attention", [False, True])
def test_seq2seq_gradients(attention):
    rng = np.random.default_rng(4)
    for _ in range(3):
        assert gradcheck.seq2seq_instance(attention, rng) < 1e-4


def test_inject_noise():
    h = np.arange(4.0)
    assert inject_noise(h, 0.0, None) is h
    a = inject_noise(h, 0.1, np.random.default_rng(9))
    b = inject_noise(h, 0.1, np.random.default_rng(9))
    assert np.array_equal(a, b) and not np.array_equal(a, h)
    with pytest.raises(ValueError):
        inject_noise(h, -1.0, None)


def test_noise_moments():
    out = inject_noise(np.zeros(200_000), 0.1, np.random.default_rng(0))
    assert abs(out.mean()) < 1e-3 and out.std() == pytest.approx(0.1, rel=0.02)


def test_score_counting_oracle_and_always_b():
    inputs = [counting_string(n) for n in range(2, 12)]
    golds = [lm_targets(s) for s in inputs]
    assert ex.score_counting(inputs, golds, golds) == (100.0, 100.0)
    always_b = ["b" * len(s) for s in inputs]
    overall, on_c = ex.score_counting(inputs, golds, always_b)
    assert on_c == 0.0 and 0 < overall < 60


def test_score_counting_random_is_chance():
    rng = np.random.default_rng(1)
    inputs = [counting_string(n) for n in range(40, 140)]
    golds = [lm_targets(s) for s in inputs]
    preds = ["".join(rng.choice(list("abc$"), size=len(s))) for s in inputs]
    assert sum(map(len, golds)) >= 10_000
    overall, _ = ex.score_counting(inputs, golds, preds)
    assert overall == pytest.approx(25, abs=5)


def test_counting_targets():
    assert lm_targets(counting_string(2)) == "abbc$"


def _tiny(**kw):
    base = dict(arch="LSTM", hidden=2, optimizer="adam", lr=0.05, epochs=5, train_range=(2, 6), test_range=(8, 9))
    base.update(kw)
    return ex.TrainConfig(**base)


def test_training_is_deterministic():
    cfg = _tiny(noise_sd=0.1)
    train, test = ex.counting_corpora(cfg)
    _, a = ex.train_lm("GRU", train, cfg, test)
    _, b = ex.train_lm("GRU", train, cfg, test)
    assert a.losses == b.losses and a.accuracy == b.accuracy


def test_zero_noise_equals_noise_free_path():
    cfg = _tiny()
    train, _ = ex.counting_corpora(cfg)
    _, a = ex.train_lm("SRN", train, cfg)
    _, b = ex.train_lm("SRN", train, replace(cfg, noise_sd=0.0))
    assert np.array(a.losses).tobytes() == np.array(b.losses).tobytes()


def test_sgd_training_reduces_loss():
    cfg = _tiny(optimizer="sgd", lr=0.5, epochs=30)
    train, _ = ex.counting_corpora(cfg)
    _, m = ex.train_lm("LSTM", train, cfg)
    assert m.losses[-1] < m.losses[0] and m.epochs_run == 30


def test_plateau_halves_learning_rate():
    cfg = _tiny(optimizer="sgd", lr=1e-9, epochs=6, plateau=1)
    train, _ = ex.counting_corpora(cfg)
    _, m = ex.train_lm("SRN", train, cfg)
    assert m.lrs[-1] < m.lrs[0]


def test_divergence_is_reported():
    cfg = _tiny(optimizer="sgd", lr=float("nan"), clip=0.0)
    train, _ = ex.counting_corpora(cfg)
    with pytest.raises(ex.DivergenceError) as err:
        ex.train_lm("SRN", train, cfg)
    assert err.value.epoch == 1


def test_seq2seq_smoke_and_decode_shape():
    cfg = replace(ex.desk_config("reversal"), epochs=1, val_count=10, gen_count=5)
    model, m = ex.train_seq2seq_reversal(True, cfg)
    assert 0 <= m.val_exact <= 100 and 0 <= m.gen_exact <= 100
    outs = model.decode(["0110", "1000"], 10)
    assert all(set(o) <= set("01") and len(o) <= 10 for o in outs)


@pytest.mark.parametrize("make", [
    lambda rng: LanguageModel.init("GRU", 3, rng),
    lambda rng: Seq2Seq.init(4, True, rng),
])
def test_model_save_load(tmp_path, make):
    model = make(np.random.default_rng(2))
    ex.save_model(model, tmp_path / "m.json")
    back = ex.load_model(tmp_path / "m.json")
    for name, p in model.params.items():
        assert back.params[name].data.tobytes() == p.data.tobytes()


def test_with_value_parses_types():
    cfg = ex.TrainConfig()
    assert ex.with_value(cfg, "lr", "0.3").lr == 0.3
    assert ex.with_value(cfg, "train_range", "3,9").train_range == (3, 9)
    assert ex.with_value(cfg, "epochs", "7").epochs == 7
    with pytest.raises(AttributeError):
        ex.with_value(cfg, "nope", "1")


def test_desk_config_rejects_unknown_task():
    with pytest.raises(ValueError):
        ex.desk_config("parsing")
