from fractions import Fraction

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from asymnet import asym, compilers, lang, nets
from asymnet.asym import asym_accept
from asymnet.lang import AB, BINARY
from asymnet.statecomp import config_set

seeds = st.integers(0, 2 ** 31)
scores = st.lists(st.integers(-4, 4).map(Fraction), min_size=1, max_size=6)
grams = st.text(alphabet="ab", min_size=1, max_size=3)


@given(st.lists(grams, max_size=4), grams, st.text(alphabet="ab", max_size=8))
def test_sl_monotone_in_forbidden_set(forbidden, extra, s):
    small = lang.sl_from_forbidden(AB, 3, forbidden)
    big = lang.sl_from_forbidden(AB, 3, forbidden + [extra])
    assert lang.sl_accepts(big, s) <= lang.sl_accepts(small, s)


@given(scores)
def test_asym_softmax_is_a_distribution(zs):
    p = asym.asym_softmax(zs)
    assert sum(p) == 1 and all(v >= 0 for v in p)
    top = max(zs)
    assert all((v > 0) == (z == top) for v, z in zip(p, zs))


@given(scores, st.data())
def test_attention_stays_in_convex_hull(zs, data):
    n = len(zs)
    vals = data.draw(st.lists(st.integers(-5, 5).map(Fraction), min_size=n, max_size=n))
    out = asym.asym_attention([Fraction(1)], [[z] for z in zs], [[v] for v in vals])
    assert min(vals) <= out[0] <= max(vals)


@settings(max_examples=30, deadline=None)
@given(seeds, st.sampled_from(["SRN", "GRU", "LSTM", "CNN"]), st.text(alphabet="ab", min_size=1, max_size=6),
       st.sampled_from([2.0, 7.5, 0.25]))
def test_asymptotic_decision_is_scale_invariant(seed, arch, s, c):
    net = nets.random_network(arch, AB, 2, np.random.default_rng(seed), window=1 if arch == "CNN" else 0)
    assert asym_accept(net, s).outcome == asym_accept(net.scaled(c), s).outcome


@settings(max_examples=15, deadline=None)
@given(seeds, st.integers(1, 3))
def test_saturated_srn_and_gru_state_bounds(seed, k):
    rng = np.random.default_rng(seed)
    srn, gru = nets.random_network("SRN", BINARY, k, rng), nets.random_network("GRU", BINARY, k, rng)
    for n in range(1, 7):
        assert len(config_set(srn, "h", n)) <= 2 ** k
        assert len(config_set(gru, "h", n)) <= 3 ** k


@settings(max_examples=15, deadline=None)
@given(seeds)
def test_saturated_lstm_grows_at_most_two_per_step(seed):
    net = nets.random_network("LSTM", BINARY, 1, np.random.default_rng(seed))
    prev = None
    for n in range(1, 8):
        cs = config_set(net, "c", n)
        if prev is not None:
            assert len(cs) <= prev + 2
        if cs.unstable == 0:
            assert all(v[0].denominator == 1 and abs(v[0]) <= n for v in cs.values)
        prev = len(cs)


@settings(max_examples=20, deadline=None)
@given(seeds, st.integers(1, 6))
def test_config_set_never_exceeds_input_count(seed, n):
    net = nets.random_network("LSTM", BINARY, 2, np.random.default_rng(seed))
    assert len(config_set(net, "h", n)) <= 2 ** n


@settings(max_examples=25, deadline=None)
@given(seeds, st.text(alphabet="01", min_size=1, max_size=6))
def test_doubling_preserves_stable_decisions(seed, s):
    net = nets.random_network("SRN", BINARY, 3, np.random.default_rng(seed))
    d = asym_accept(net, s)
    if d.stable:
        # random margins can be tiny, so full convergence is not guaranteed by any fixed schedule
        rep = asym.check_convergence(net, s, schedule=tuple(2 ** e for e in range(4, 21)))
        assert (rep.points[-1][1] > 0.5) == (d.outcome == "accept")
        if rep.verdict != "oscillating-or-flat":
            assert asym.verdict_matches(d, rep)


@given(st.text(alphabet="01", max_size=12))
def test_counter_cell_value_is_the_count_of_ones(s):
    net = compilers.counter_cell_network(compilers.THETA_PLUS)
    if s:
        assert asym.limit_trace(net, s).h[-1] == s.count("1")


@given(st.text(alphabet="01", max_size=9))
def test_compiled_parity_matches_dfa(s):
    net = compilers.compile_dfa_to_srn(lang.parity_dfa()).net
    assert bool(asym_accept(net, s)) == lang.dfa_accepts(lang.parity_dfa(), s)
