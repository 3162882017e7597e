import numpy as np
import pytest

from asymnet import asym, compilers, lang
from asymnet.asym import asym_accept
from asymnet.lang import AB, BINARY

DFAS = {
    "parity": lang.parity_dfa(),
    "one_b": lang.one_b_dfa(),
    "contains_ab": lang.contains_ab_dfa(),
    "universal": lang.universal_dfa(),
}


@pytest.mark.parametrize("name", sorted(DFAS))
@pytest.mark.parametrize("compile_fn", [compilers.compile_dfa_to_srn, compilers.compile_dfa_to_gru])
def test_dfa_compilers_agree_with_oracle(name, compile_fn):
    dfa = DFAS[name]
    comp = compile_fn(dfa)
    assert comp.net.hidden_size == dfa.num_states * dfa.alphabet.size + 1
    assert len(comp.unit_map) == comp.net.hidden_size
    assert comp.margin >= 1
    for s in dfa.alphabet.strings_upto(8):
        assert bool(asym_accept(comp.net, s)) == lang.dfa_accepts(dfa, s), s


def test_parity_srn_has_five_units():
    assert compilers.compile_dfa_to_srn(lang.parity_dfa()).net.hidden_size == 5


def test_gru_gates_are_pinned():
    net = compilers.compile_dfa_to_gru(lang.parity_dfa()).net
    assert np.all(net["bz"] == -2) and np.all(net["br"] == 2)


def test_universal_dfa_accepts_everything():
    net = compilers.compile_dfa_to_srn(lang.universal_dfa()).net
    assert all(asym_accept(net, s) for s in BINARY.strings_upto(6))


@pytest.mark.parametrize("grammar", [lang.no_aa_grammar(), lang.no_bab_edge_grammar()])
def test_sl_compiler_agrees_with_oracle(grammar):
    comp = compilers.compile_sl_to_cnn(grammar)
    assert comp.K == len([g for g in grammar.forbidden() if set(g) != {"#"}])
    assert comp.margin == pytest.approx(0.5)
    assert comp.net["ba"][0] == -comp.K + 0.5
    for s in grammar.alphabet.strings_upto(8):
        assert bool(asym_accept(comp.net, s)) == lang.sl_accepts(grammar, s), s


def test_sl_width_three_exhaustive_to_ten():
    g = lang.no_aa_grammar()
    net = compilers.compile_sl_to_cnn(g).net
    strings = list(AB.strings_upto(10, 1))
    assert len(strings) == 2046
    assert all(bool(asym_accept(net, s)) == lang.sl_accepts(g, s) for s in strings)


def test_permissive_and_empty_grammars():
    everything = lang.sl_from_forbidden(AB, 3, [])
    net = compilers.compile_sl_to_cnn(everything).net
    assert net.hidden_size == 0 or compilers.compile_sl_to_cnn(everything).K == 0
    assert all(asym_accept(net, s) for s in AB.strings_upto(5, 1))
    nothing = lang.SlGrammar(AB, 3, frozenset())
    net = compilers.compile_sl_to_cnn(nothing).net
    assert not any(asym_accept(net, s) for s in AB.strings_upto(5, 1))


def test_even_width_is_rejected():
    with pytest.raises(compilers.CompileError):
        compilers.compile_sl_to_cnn(lang.sl_from_forbidden(AB, 2, ["aa"]))


@pytest.mark.parametrize("k", [1, 2, 3])
def test_counterexample_pair(k):
    s1, s2 = compilers.cnn_counterexample_pair(k)
    one_b = lang.one_b_dfa()
    assert lang.dfa_accepts(one_b, s1) and not lang.dfa_accepts(one_b, s2)
    b1, b2 = [i for i, c in enumerate(s2) if c == "b"]
    assert b2 - b1 > 2 * k + 1
    assert compilers.window_set(s1, k) == compilers.window_set(s2, k)


def test_counterexample_pools_equally_on_compiled_cnns():
    for g in (lang.no_aa_grammar(), lang.no_bab_edge_grammar()):
        net = compilers.compile_sl_to_cnn(g).net
        s1, s2 = compilers.cnn_counterexample_pair(net.window)
        assert asym.limit_trace(net, s1).pooled == asym.limit_trace(net, s2).pooled


def test_counterexample_fools_random_cnns():
    rng = np.random.default_rng(0)
    from asymnet.nets import random_network
    for k in (1, 2):
        s1, s2 = compilers.cnn_counterexample_pair(k)
        for _ in range(5):
            net = random_network("CNN", AB, 4, rng, window=k)
            assert asym.limit_trace(net, s1).pooled == asym.limit_trace(net, s2).pooled


def test_counter_params():
    plus, ident = compilers.counter_params()
    assert plus == (1.0, 1.0) and ident == (-1.0, 1.0)
    net = compilers.counter_cell_network(plus)
    assert asym.limit_trace(net, "110").h[-1] == 2


def test_retrieval_encoder_summary_is_last_symbol():
    net = compilers.last_symbol_retrieval_encoder()
    for s in ("0", "01", "0110", "1111"):
        expected = (1, 0) if s[-1] == "0" else (0, 1)
        assert asym.limit_trace(net, s).select("summary") == expected
