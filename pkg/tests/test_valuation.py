from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import monte_carlo_chain
from qmi.domain import MIRROR, N_STATES, STATE_TEAM, TAU_PERCENT, TEAM_A_STATES, RewardSpec, TeamLabel, reward_vector
from qmi.errors import SingularSystem, UnobservedPair
from qmi.transitions import TransitionModel
from qmi.valuation import (
    NextStateValueDist,
    QuantileSurface,
    build_surface,
    next_state_dist,
    policy_matrix,
    quantile,
    solve_chain,
    solve_value,
    surface_from_probs,
)


def test_toy_chain_closed_form(toy_chain):
    P, r = toy_chain
    w = solve_chain(P, r)
    assert np.allclose(w, r + P @ w, atol=1e-14)


def test_toy_chain_monte_carlo(toy_chain):
    P, r = toy_chain
    w = solve_chain(P, r)
    mean, se = monte_carlo_chain(P, r, 200_000, seed=1)
    assert np.all(np.abs(w - mean) <= 3 * se)


def test_zero_reward_gives_zero_values(small_events):
    vt = solve_value(small_events.counts(), RewardSpec(0.0, 0.0, 0.0))
    assert np.all(vt.v == 0.0) and np.all(vt.w == 0.0)


def test_singular_chain():
    with pytest.raises(SingularSystem):
        solve_chain(np.eye(2), np.array([1.0, 0.0]))


def test_full_solve_matches_direct_806_system(small_events):
    m = small_events.counts()
    vt = solve_value(m)
    P_a, _ = policy_matrix(m)
    P = np.zeros((N_STATES, N_STATES))
    P[TEAM_A_STATES] = P_a
    b = MIRROR[TEAM_A_STATES]
    P[b] = P_a[:, MIRROR]  # team-B rows are the mirrored team-A rows
    r = reward_vector()
    # the full chain never terminates, so I - P is singular along the constant
    # vector; the antisymmetric solution is the least-squares one with zero mean
    assert np.max(np.abs(vt.w - r - P @ vt.w)) < 1e-9
    w, *_ = np.linalg.lstsq(np.eye(N_STATES) - P, r, rcond=None)
    w -= w.mean()
    assert np.max(np.abs(w - vt.w)) < 1e-8
    a = STATE_TEAM == TeamLabel.A
    assert np.max(np.abs(vt.v[MIRROR[a]] + vt.v[a])) <= 1e-10


def test_unobserved_rows_filled_and_reported(small_events):
    m = small_events.counts()
    P, filled = policy_matrix(m)
    assert np.allclose(P.sum(axis=1), 1.0)
    assert len(filled) > 0
    vt = solve_value(m)
    assert set(vt.filled_states.tolist()) == set(filled.tolist())


def one_state_model(dests, counts, sigma=0, action=2):
    m = TransitionModel()
    for d, c in zip(dests, counts):
        m.action_counts[sigma, action, d] = c
    return m


def test_next_state_dist_atoms(small_events):
    vt = solve_value(small_events.counts())
    s1, s2 = 10, 20
    d = next_state_dist(one_state_model([s1], [3]), vt, 0, 2)
    assert d.values.tolist() == [vt.w[s1]] and d.probs.tolist() == [1.0]
    d = next_state_dist(one_state_model([s1, s2], [1, 1]), vt, 0, 2)
    assert sorted(d.probs.tolist()) == [0.5, 0.5]
    # merged duplicates: two states with identical value form one atom
    vt.w[s2] = vt.w[s1]
    d = next_state_dist(one_state_model([s1, s2], [1, 3]), vt, 0, 2)
    assert d.values.tolist() == [vt.w[s1]] and d.probs.tolist() == [1.0]
    with pytest.raises(UnobservedPair):
        next_state_dist(one_state_model([], []), vt, 0, 2)


def test_next_state_expectation(small_events):
    m = small_events.counts()
    vt = solve_value(m)
    probs = m.action_probs()
    for sig, a in zip(*np.nonzero(~m.unobserved_pairs)):
        d = next_state_dist(m, vt, sig, a)
        assert d.expectation() == pytest.approx(probs[sig, a] @ vt.w, abs=1e-12)


def test_quantile_examples():
    d = NextStateValueDist(np.array([1.0, 3.0]), np.array([0.5, 0.5]))
    assert quantile(d, 0.5) == 1.0
    assert quantile(d, 0.51) == 3.0
    single = NextStateValueDist(np.array([2.5]), np.array([1.0]))
    assert all(quantile(single, t) == 2.5 for t in (0.01, 0.2, 0.8, 1.0))


def brute_quantile(values, probs, tau):
    acc = 0.0
    for v, p in zip(values, probs):
        acc += p
        if acc >= tau:
            return v
    return values[-1]


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(1, 50), min_size=1, max_size=12), st.integers(0, 2**32 - 1))
def test_quantile_matches_scan_property(counts, seed):
    rng = np.random.default_rng(seed)
    values = np.sort(rng.choice(np.arange(-40, 40) / 4, size=len(counts), replace=False))
    probs = np.array(counts) / sum(counts)
    d = NextStateValueDist(values, probs)
    prev = -np.inf
    for pct in TAU_PERCENT:
        q = quantile(d, pct / 100)
        assert q == brute_quantile(values, probs, pct / 100)
        assert q in values and q >= prev
        prev = q


def fraction_surface(action_counts, w):
    """Exact rational oracle for the tau-quantile of every observed row."""
    n_sig, n_act, _ = action_counts.shape
    out = np.full((n_sig, n_act, len(TAU_PERCENT)), np.nan)
    for sig in range(n_sig):
        for a in range(n_act):
            row = action_counts[sig, a]
            total = int(row.sum())
            if total == 0:
                continue
            atoms = sorted((w[d], int(row[d])) for d in np.flatnonzero(row))
            for t, pct in enumerate(TAU_PERCENT):
                cum = 0
                for val, c in atoms:
                    cum += c
                    if Fraction(cum, total) >= Fraction(int(pct), 100):
                        out[sig, a, t] = val
                        break
    return out


def test_surface_matches_fraction_oracle(small_events):
    m = small_events.counts()
    vt = solve_value(m)
    surf = build_surface(m, vt)
    oracle = fraction_surface(m.action_counts, vt.w)
    assert np.array_equal(np.isnan(surf.q), np.isnan(oracle))
    ok = ~np.isnan(oracle)
    assert np.array_equal(surf.q[ok], oracle[ok])


def test_float_surface_agrees_with_counts(small_events):
    m = small_events.counts()
    vt = solve_value(m)
    a = build_surface(m, vt)
    b = surface_from_probs(m.action_probs(), vt.w)
    assert np.array_equal(np.isnan(a.q), np.isnan(b.q))
    ok = ~np.isnan(a.q)
    assert np.array_equal(a.q[ok], b.q[ok])


def test_surface_monotone_in_tau_and_roundtrip(small_events):
    m = small_events.counts()
    surf = build_surface(m, solve_value(m))
    ok = surf.observed
    assert np.all(np.diff(surf.q[ok], axis=-1) >= 0)
    back = QuantileSurface.from_json(surf.to_json())
    assert np.array_equal(back.observed, surf.observed)
    assert np.allclose(back.q[ok], surf.q[ok], rtol=0, atol=0)


def test_value_csv_has_constant_columns(small_events):
    text = solve_value(small_events.counts()).to_csv()
    widths = {len(line.split(",")) for line in text.splitlines()}
    assert widths == {9}
    assert len(text.splitlines()) == N_STATES + 1
