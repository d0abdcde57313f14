import io

import numpy as np
import pytest

from qmi.bootstrap import (
    BootstrapSpec,
    ReplicateResult,
    TauPosterior,
    bootstrap_tau,
    paired_difference,
    pool,
    replicate_multiplicity,
    weighted_kde,
    weighted_quantile,
)
from qmi.domain import TAU_GRID, TAU_PERCENT
from qmi.errors import ReplicateDegenerate, UnpairedInputs
from qmi.ingest import build_game_logs, parse_plays
from qmi.simulator import SyntheticLeague, simulate
from qmi.transitions import extract_events

_trapezoid = getattr(np, "trapezoid", None) or np.trapz


@pytest.fixture(scope="module")
def post(small_events):
    return bootstrap_tau(small_events, BootstrapSpec(B=8, seed=3))


def test_multiplicity_stream():
    a = replicate_multiplicity(50, 1, 4)
    assert a.sum() == 50 and np.array_equal(a, replicate_multiplicity(50, 1, 4))
    assert not np.array_equal(a, replicate_multiplicity(50, 1, 5))


def test_deterministic_bytes(small_events, post):
    again = bootstrap_tau(small_events, BootstrapSpec(B=8, seed=3))
    assert again.to_json() == post.to_json()
    assert again.to_long_csv() == post.to_long_csv()


def test_order_and_threads_do_not_matter(small_events, post):
    shuffled = bootstrap_tau(small_events, BootstrapSpec(B=8, seed=3), order=[5, 2, 7, 0, 1, 6, 4, 3])
    threaded = bootstrap_tau(small_events, BootstrapSpec(B=8, seed=3, threads=4))
    assert shuffled.to_json() == post.to_json() == threaded.to_json()


def test_weights_sum_to_one(post):
    for reg in post.regions.values():
        assert abs(reg.weights.sum() - 1.0) <= 1e-12
        lo, hi = reg.interval
        assert 0.2 <= lo <= reg.median <= hi <= 0.8


def test_single_replicate(small_events):
    p = bootstrap_tau(small_events, BootstrapSpec(B=1, seed=9))
    (rep,) = p.replicates
    for reg, members in rep.sets.items():
        w = p.regions[reg].weights
        on = np.isin(TAU_PERCENT, members)
        assert np.allclose(w[on], 1 / len(members)) and not w[~on].any()


def test_pool_boundary_flag():
    reps = [ReplicateResult(0, {"R": np.array([20, 21])}), ReplicateResult(1, {"R": np.array([50])})]
    out = pool(reps)["R"]
    assert out.boundary_flag
    assert out.weights[0] == pytest.approx(0.25)
    quiet = pool([ReplicateResult(0, {"R": np.array([50])})])["R"]
    assert not quiet.boundary_flag


def test_degenerate_data_aborts(small_events):
    opp = small_events.dec_sigma < 50
    only_opp = small_events.with_decisions(small_events.dec_sigma[opp], small_events.dec_action[opp],
                                           small_events.dec_game[opp])
    with pytest.raises(ReplicateDegenerate):
        bootstrap_tau(only_opp, BootstrapSpec(B=3, seed=0))


def test_kde_point_mass():
    dens, h = weighted_kde(np.array([0.4]), np.array([1.0]))
    assert TAU_GRID[np.argmax(dens)] == pytest.approx(0.4)
    assert abs(_trapezoid(dens, TAU_GRID) - 1) <= 1e-6
    assert h == 0.01


def test_kde_uniform_is_flat_inside():
    dens, _ = weighted_kde(TAU_GRID, np.full(61, 1 / 61))
    inner = dens[10:-10]
    # no boundary correction, so the edges sag a little
    assert inner.max() / inner.min() < 1.10
    assert np.allclose(dens, dens[::-1], rtol=1e-12)


def test_kde_integral_random():
    rng = np.random.default_rng(0)
    for _ in range(50):
        k = rng.integers(1, 20)
        vals = rng.choice(TAU_GRID, k, replace=False)
        dens, _ = weighted_kde(vals, rng.random(k) + 0.01)
        assert abs(_trapezoid(dens, TAU_GRID) - 1) <= 1e-6


def test_weighted_quantile_left_inverse():
    v = np.array([0.3, 0.5])
    w = np.array([0.5, 0.5])
    assert weighted_quantile(v, w, 0.5) == 0.3
    assert weighted_quantile(v, w, 0.51) == 0.5


def test_difference_with_itself(post):
    for reg in post.regions:
        d = paired_difference(post, reg, post, reg)
        assert d.estimate == 0 and d.interval == (0, 0) and d.paired


def test_difference_sign_and_unpaired(small_events, post):
    d = paired_difference(post, "OWN_HALF", post, "OPPONENT_HALF")
    gap = post.regions["OWN_HALF"].median - post.regions["OPPONENT_HALF"].median
    assert np.sign(d.estimate) == np.sign(gap) or gap == 0
    other = bootstrap_tau(small_events, BootstrapSpec(B=4, seed=4))
    u = paired_difference(post, "OWN_HALF", other, "OWN_HALF")
    assert not u.paired and u.warning and u.n == 8 * 4
    with pytest.raises(UnpairedInputs):
        paired_difference(post, "OWN_HALF", other, "OWN_HALF", strict=True)


def test_planted_difference():
    league = SyntheticLeague(games=1500, seed=31, tau_opponent_half=0.55, tau_own_half=0.35)
    buf = io.StringIO()
    simulate(league).to_csv(buf)
    ev = extract_events(build_game_logs(parse_plays(io.StringIO(buf.getvalue()))))
    p = bootstrap_tau(ev, BootstrapSpec(B=20, seed=2))
    d = paired_difference(p, "OPPONENT_HALF", p, "OWN_HALF")
    assert d.estimate == pytest.approx(0.20, abs=0.06)
