import re

import numpy as np
import pytest

from asymnet import lang
from asymnet.lang import AB, BINARY, Alphabet, LanguageError


def test_alphabet_rejects_padding_and_duplicates():
    with pytest.raises(LanguageError):
        Alphabet.of("a#")
    with pytest.raises(LanguageError):
        Alphabet.of("aa")
    with pytest.raises(LanguageError):
        Alphabet.of("")


def test_strings_enumeration_counts():
    assert len(list(BINARY.strings_upto(8, 1))) == 510
    assert list(AB.strings(2)) == ["aa", "ab", "ba", "bb"]


@pytest.mark.parametrize("s, expected", [("11", True), ("", True), ("1", False), ("1010", True), ("100", False)])
def test_parity(s, expected):
    assert lang.dfa_accepts(lang.parity_dfa(), s) is expected


def test_one_b():
    d = lang.one_b_dfa()
    assert lang.dfa_accepts(d, "aabaa")
    assert not lang.dfa_accepts(d, "abab")


def test_dfa_unknown_symbol():
    with pytest.raises(LanguageError):
        lang.dfa_accepts(lang.parity_dfa(), "12")


@pytest.mark.parametrize("dfa, pattern", [
    (lang.parity_dfa(), r"0*(10*10*)*"),
    (lang.one_b_dfa(), r"a*ba*"),
    (lang.contains_ab_dfa(), r"[ab]*ab[ab]*"),
])
def test_dfa_matches_regex_oracle(dfa, pattern):
    rx = re.compile(pattern)
    for s in dfa.alphabet.strings_upto(8):
        assert lang.dfa_accepts(dfa, s) == bool(rx.fullmatch(s)), s


def test_dfa_must_be_total():
    with pytest.raises(LanguageError):
        lang.Dfa(BINARY, 2, 0, frozenset({0}), {(0, "0"): 0})


def test_dfa_text_round_trip():
    for dfa in (lang.parity_dfa(), lang.one_b_dfa(), lang.contains_ab_dfa()):
        back = lang.read_dfa(lang.write_dfa(dfa))
        assert all(lang.dfa_accepts(back, s) == lang.dfa_accepts(dfa, s) for s in dfa.alphabet.strings_upto(6))


def test_dfa_text_errors():
    with pytest.raises(LanguageError):
        lang.read_dfa("dfa 2 0 0\n0 0 0\n")


def _alternating():
    allowed = {"#a", "ab", "ba", "b#", "a#", "#b"}
    return lang.SlGrammar(AB, 2, frozenset(allowed))


def test_sl_accepts_examples():
    g = _alternating()
    assert lang.sl_accepts(g, "abab")
    assert not lang.sl_accepts(g, "aab")


def test_sl_full_grammar_accepts_everything():
    g = lang.SlGrammar(AB, 2, frozenset(lang.sl_from_forbidden(AB, 2, []).universe()))
    assert all(lang.sl_accepts(g, s) for s in AB.strings_upto(6))


def test_sl_windows_pad_both_sides():
    g = _alternating()
    assert g.windows("ab") == ["#a", "ab", "b#"]


def test_sl_text_round_trip():
    g = lang.no_bab_edge_grammar()
    back = lang.read_sl(lang.write_sl(g))
    assert back.allowed == g.allowed and back.k == g.k


def test_sl_rejects_interior_padding():
    with pytest.raises(LanguageError):
        lang.SlGrammar(AB, 3, frozenset({"a#a"}))


def test_counting_corpus():
    c = lang.gen_counting_corpus(2, 2, 1, seed=7)
    assert c.items == (("aabbc", "abbc$"),)
    a = lang.gen_counting_corpus(5, 1000, 50, seed=3)
    b = lang.gen_counting_corpus(5, 1000, 50, seed=3)
    assert a == b
    assert all(5 <= len(x) // 2 <= 1000 for x, _ in a)
    with pytest.raises(lang.ConfigError):
        lang.gen_counting_corpus(2, 4, 0, seed=0)
    with pytest.raises(lang.ConfigError):
        lang.gen_counting_corpus(0, 4, 1, seed=0)


def test_reversal_corpus():
    c = lang.gen_reversal_corpus(800, 10, 2, seed=1)
    assert len(c) == 800
    assert all(y == x[::-1] and len(x) >= 1 for x, y in c)
    assert abs(np.mean([len(x) for x, _ in c]) - 10) < 0.5
    one = lang.gen_reversal_corpus(1, 1, 0, seed=5)
    assert one.items in ((("0", "0"),), (("1", "1"),))


def test_corpus_file_round_trip():
    c = lang.gen_reversal_corpus(20, 5, 1, seed=2)
    back = lang.read_corpus(lang.write_corpus(c), BINARY)
    assert back.items == c.items


def test_one_hot():
    assert lang.encode_one_hot("ab", AB).tolist() == [[1, 0], [0, 1]]
    assert lang.encode_one_hot("", AB).shape == (0, 2)
    assert lang.encode_one_hot("110", BINARY).tolist() == [[0, 1], [0, 1], [1, 0]]
    with pytest.raises(LanguageError):
        lang.encode_one_hot("c", AB)


def test_bundled_fixture_files_load(tmp_path):
    from asymnet.acceptance import fixture_dfas, fixture_grammars
    assert set(fixture_dfas()) == {"parity", "one_b", "contains_ab"}
    assert fixture_grammars()["no_aa"].k == 3
