import numpy as np
import pytest

from freemoment import gibbs1d as G
from freemoment import sdmoments as sd
from freemoment.ncseries import NCSeries
from freemoment.errors import ConvergenceError, InvalidInputError

CATALAN = [1, 0, 1, 0, 2, 0, 5, 0, 14, 0, 42, 0, 132]


def test_catalan_moments():
    tab = sd.solve_sd(NCSeries.zero(1, 12), 12)
    got = [tab.value(tuple([0] * k)) for k in range(13)]
    assert max(abs(g - e) for g, e in zip(got, CATALAN)) < 1e-12


def test_free_family_low_moments():
    tab = sd.solve_sd(NCSeries.zero(2, 8), 8)
    assert tab.value((0, 1)) == 0.0
    assert tab.value((0, 1, 0, 1)) == 0.0
    assert abs(tab.value((0, 0, 1, 1)) - 1.0) < 1e-12


def test_pairing_oracle_cross_check():
    tab = sd.solve_sd(NCSeries.zero(2, 8), 8)
    for length in range(1, 9):
        for w in sd._enumerate_canonical(2, length):
            assert abs((tab.value(w) or 0.0) - sd.noncrossing_pair_count(w)) < 1e-12


def test_even_perturbation_matches_1d_oracle():
    W = NCSeries(1, 40, {(0,) * 4: 0.05})
    tab = sd.solve_sd(W, 40)
    oracle = G.free_gibbs_measure(G.EvenPotential([0.5, 0.05]))
    for k in (2, 4, 6, 8):
        assert abs(tab.value(tuple([0] * k)) - oracle.moment(k)) < 1e-6


def test_even_potential_kills_odd_moments():
    W = NCSeries(1, 20, {(0,) * 4: 0.04})
    tab = sd.solve_sd(W, 20)
    for k in range(1, 20, 2):
        assert tab.value(tuple([0] * k)) == 0.0


def test_cyclic_and_reversal_symmetry_structural():
    W = NCSeries(2, 10, {(0, 0, 0, 0): 0.02, (1, 1, 1, 1): 0.02})
    tab = sd.solve_sd(W, 10)
    rng = np.random.default_rng(0)
    for _ in range(100):
        k = int(rng.integers(1, 10))
        w = tuple(rng.integers(0, 2, size=k))
        v = tab.value(w)
        rot = w[3 % k:] + w[:3 % k]
        assert tab.value(rot) == v
        assert tab.value(w[::-1]) == v


def test_residual_solved_table_is_small():
    W = NCSeries(1, 24, {(0,) * 4: 0.05})
    tab = sd.solve_sd(W, 24)
    # convergence is controlled in the cutoff-weighted norm, so the absolute
    # residual grows with the degree window; both stay far below detection scale
    assert sd.sd_residual(tab, W, 12) < 1e-6
    assert sd.sd_residual(tab, W, 16) < 1e-5


def test_residual_detects_wrong_potential():
    tab = sd.solve_sd(NCSeries.zero(1, 12), 12)
    wrong = NCSeries(1, 12, {(0,) * 4: 0.3})
    assert sd.sd_residual(tab, wrong, 12) >= 0.1


def test_residual_detects_perturbed_table():
    tab = sd.solve_sd(NCSeries.zero(1, 12), 12)
    values = dict(tab.values)
    values[(0, 0)] += 0.1
    bad = sd.TraceTable(1, 12, 3.0, values, even_overall=True, flips=[True])
    assert sd.sd_residual(bad, NCSeries.zero(1, 12), 12) >= 0.1


def test_residual_continuity_in_potential():
    base = NCSeries(1, 16, {(0,) * 4: 0.05})
    tab = sd.solve_sd(base, 16)
    rng = np.random.default_rng(1)
    ratios = []
    for _ in range(5):
        delta = 10.0 ** rng.uniform(-4, -2)
        bumped = NCSeries(1, 16, {(0,) * 4: 0.05 + delta})
        ratios.append(sd.sd_residual(tab, bumped, 12) / delta)
    spread = max(ratios) / min(ratios)
    assert spread < 10.0  # residual is Lipschitz in the perturbed coefficient
    print(f"residual continuity constant C ~ {np.mean(ratios):.3f}")


def test_pushforward_identity_and_cubic():
    tab = sd.solve_sd(NCSeries.zero(1, 12), 12)
    ident = sd.pushforward_trace(tab, [NCSeries.variable(0, 1, 12)], 8)
    for k in range(1, 9):
        assert ident.value(tuple([0] * k)) == tab.value(tuple([0] * k))
    eps = 0.1
    f = [NCSeries(1, 12, {(0,): 1.0, (0, 0, 0): eps})]
    pushed = sd.pushforward_trace(tab, f, 4)
    assert abs(pushed.value((0, 0)) - (1 + 4 * eps + 5 * eps ** 2)) < 1e-12


def test_pushforward_parity():
    tab = sd.solve_sd(NCSeries.zero(1, 16), 16)
    f = [NCSeries(1, 16, {(0,): 1.0, (0, 0, 0): 0.2})]
    pushed = sd.pushforward_trace(tab, f, 6)
    for k in (1, 3, 5):
        assert pushed.value(tuple([0] * k)) == 0.0


def test_pushforward_validates_caps():
    tab = sd.solve_sd(NCSeries.zero(1, 8), 8)
    with pytest.raises(InvalidInputError):
        sd.pushforward_trace(tab, [NCSeries.constant(1.0, 1, 8)], 4)
    with pytest.raises(InvalidInputError):
        sd.pushforward_trace(tab, [NCSeries.variable(0, 1, 8)], 10)


def test_cutoff_guard():
    # a large perturbation drives the iteration into the cutoff clamp
    W = NCSeries(1, 10, {(0,) * 4: -0.4})
    with pytest.raises(ConvergenceError):
        sd.solve_sd(W, 10)


def test_canonical_word():
    assert sd.canonical_word((1, 0, 0)) == (0, 0, 1)
    assert sd.canonical_word((0, 1, 1, 0)) == (0, 0, 1, 1)
    assert sd.canonical_word(()) == ()
    # reversal included
    assert sd.canonical_word((0, 1, 2)) == sd.canonical_word((2, 1, 0))


def test_table_json_roundtrip():
    W = NCSeries(1, 10, {(0,) * 4: 0.05})
    tab = sd.solve_sd(W, 10)
    back = sd.TraceTable.from_json(tab.to_json())
    for w, v in tab.values.items():
        assert back.value(w) == v
    with pytest.raises(InvalidInputError):
        sd.TraceTable.from_dict({"n_vars": 2, "degree_cap": 4, "cutoff": 3.0,
                                 "values": [{"word": [2, 1], "value": 0.1}]})


def test_tail_estimate_reported():
    W = NCSeries(1, 8, {(0,) * 4: 0.05})
    tab = sd.solve_sd(W, 8)
    assert tab.tail_estimate > 0.0
