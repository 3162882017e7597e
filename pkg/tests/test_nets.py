import math

import numpy as np
import pytest

from asymnet import compilers, lang, nets
from asymnet.lang import AB, BINARY
from asymnet.nets import NetworkSpec, ShapeError


def test_srn_step_examples():
    assert np.all(nets.srn_step(np.array([1.0, 0]), np.zeros(2), np.zeros((2, 2)), np.zeros((2, 2)), np.zeros(2)) == 0)
    h = nets.srn_step(np.array([1.0, 0]), np.zeros(1), np.array([[1.0, 0]]), np.zeros((1, 1)), np.zeros(1))
    assert h[0] == pytest.approx(math.tanh(1))
    h = nets.srn_step(np.array([1.0, 0]), np.zeros(1), np.array([[100.0, 0]]), np.zeros((1, 1)), np.zeros(1))
    assert h[0] == pytest.approx(1.0, abs=1e-6)


def test_srn_step_shape_error():
    with pytest.raises(ShapeError):
        nets.srn_step(np.zeros(3), np.zeros(1), np.zeros((1, 2)), np.zeros((1, 1)), np.zeros(1))


def _gru(k=1, s=2, bz=0.0):
    p = {f"{m}{g}": np.zeros((k, s) if m == "W" else (k, k) if m == "U" else k)
         for g in "zru" for m in "WUb"}
    p["bz"] = np.full(k, bz)
    p["Wu"] = np.ones((k, s))
    return p


def test_gru_step_examples():
    assert nets.gru_step(np.zeros(2), np.zeros(1), {k: v * 0 for k, v in _gru().items()})[0] == 0
    x = np.array([1.0, 0])
    assert nets.gru_step(x, np.array([0.3]), _gru(bz=50))[0] == pytest.approx(0.3, abs=1e-9)
    assert nets.gru_step(x, np.array([0.3]), _gru(bz=-50))[0] == pytest.approx(math.tanh(1), abs=1e-9)


def _lstm(bf, bi, bc, k=1, s=2):
    p = {f"{m}{g}": np.zeros((k, s) if m == "W" else (k, k) if m == "U" else k)
         for g in "fioc" for m in "WUb"}
    p["bf"], p["bi"], p["bc"], p["bo"] = np.full(k, bf), np.full(k, bi), np.full(k, bc), np.full(k, 50.0)
    return p


def test_lstm_step_examples():
    x, h = np.zeros(2), np.zeros(1)
    _, c = nets.lstm_step(x, h, np.array([2.0]), _lstm(50, -50, 50))
    assert c[0] == pytest.approx(2.0, abs=1e-9)
    _, c = nets.lstm_step(x, h, np.array([2.0]), _lstm(50, 50, 50))
    assert c[0] == pytest.approx(3.0, abs=1e-9)
    _, c = nets.lstm_step(x, h, np.zeros(1), _lstm(0, 0, 0))
    assert c[0] == 0


def test_counter_cell_scaled():
    h = 0.0
    for x in (1, 0, 1):
        h = nets.counter_cell_step(x, h, np.array(compilers.THETA_PLUS) * 50)
    assert h == pytest.approx(2.0, abs=1e-6)
    h = 0.0
    for x in (1, 0):
        h = nets.counter_cell_step(x, h, np.array(compilers.THETA_ID) * 50)
    assert h == pytest.approx(0.0, abs=1e-6)


def test_counter_cell_needs_binary_alphabet():
    with pytest.raises(ShapeError):
        NetworkSpec("COUNTER-CELL", lang.Alphabet.of("abc"), 1,
                    {"theta": np.ones(2), "Wa": np.ones(1), "ba": np.zeros(1)})


def test_attention_examples():
    V = np.array([[1.0, 2.0], [3.0, 4.0]])
    assert np.allclose(nets.attention(np.ones(2), V[:1], V[:1]), V[0])
    assert np.allclose(nets.attention(np.zeros(2), V, V), V.mean(axis=0))
    K = np.array([[0.0, 0.0], [100.0, 0.0]])
    assert np.allclose(nets.attention(np.array([1.0, 0]), K, V), V[1])
    with pytest.raises(ValueError):
        nets.attention(np.ones(2), np.zeros((0, 2)), np.zeros((0, 2)))


def test_cnn_zero_weights_and_empty_input():
    net = nets.zero_network("CNN", AB, 2, window=1)
    tr = nets.acceptor_forward(net, "ab")
    assert np.all(tr.pooled == 0)
    assert tr.p == pytest.approx(0.5)
    tr = nets.acceptor_forward(net, "")
    assert np.all(tr.pooled == -1)


def test_cnn_single_b_detector():
    Wh = np.zeros((1, 6))
    Wh[0, 3] = 2.0  # centre block, symbol b
    net = NetworkSpec("CNN", AB, 1, {"Wh": Wh * 20, "bh": np.array([-20.0]), "Wa": np.ones(1), "ba": np.zeros(1)},
                      window=1)
    assert nets.acceptor_forward(net, "aaba").pooled[0] == pytest.approx(1, abs=1e-6)
    assert nets.acceptor_forward(net, "aaaa").pooled[0] == pytest.approx(-1, abs=1e-6)


def test_compiled_sl_pooled_detectors_low_on_valid_string():
    comp = compilers.compile_sl_to_cnn(lang.no_aa_grammar())
    pooled = nets.acceptor_forward(comp.net.scaled(20), "abab").pooled
    assert np.all(pooled < -0.99)


def test_zero_srn_output_is_sigmoid_bias():
    net = nets.zero_network("SRN", BINARY, 3)
    ws = dict(net.weights)
    ws["ba"] = np.array([0.7])
    net = NetworkSpec("SRN", BINARY, 3, ws)
    assert nets.acceptor_forward(net, "0110").p == pytest.approx(nets.sigmoid(0.7))


def test_compiled_parity_numeric():
    net = compilers.compile_dfa_to_srn(lang.parity_dfa()).net.scaled(64)
    assert nets.acceptor_forward(net, "11").p > 0.99
    assert nets.acceptor_forward(net, "1").p < 0.01


def test_shape_validation():
    with pytest.raises(ShapeError):
        NetworkSpec("SRN", BINARY, 2, {"W": np.zeros((2, 2))})
    with pytest.raises(ShapeError):
        NetworkSpec("TRANSFORMER", BINARY, 2, {})
    net = nets.zero_network("LSTM", BINARY, 2)
    with pytest.raises(ValueError):
        net.weights["Wf"][0, 0] = 1.0


@pytest.mark.parametrize("arch", ["SRN", "GRU", "LSTM", "CNN", "ATTN-ENC"])
def test_checkpoint_round_trip(tmp_path, arch):
    rng = np.random.default_rng(1)
    net = nets.random_network(arch, AB, 3, rng, window=1 if arch == "CNN" else 0)
    path = tmp_path / "net.ckpt"
    nets.save_checkpoint(net, path)
    back = nets.load_checkpoint(path)
    assert back == net
    for name in net.weights:
        assert back[name].tobytes() == net[name].tobytes()


def test_corrupted_checkpoint_is_rejected(tmp_path):
    net = compilers.counter_cell_network()
    path = tmp_path / "c.ckpt"
    nets.save_checkpoint(net, path)
    text = path.read_text().replace("1.0", "1.5", 1)
    path.write_text(text)
    with pytest.raises(nets.CheckpointError):
        nets.load_checkpoint(path)
    path.write_text("{not json")
    with pytest.raises(nets.CheckpointError):
        nets.load_checkpoint(path)
