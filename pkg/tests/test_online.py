"""Group inverse, rank-one updates, and the streaming estimator."""

import numpy as np
import pytest

from krc.data import ComparisonDataset, ComparisonRecord
from krc.errors import RosterError, UpdateBreakdownError
from krc.estimator import ScoreVector, TransitionMatrix, fit_scores, stationary
from krc.kernels import BOXCAR, GAUSSIAN
from krc.online import (
    GroupInverse,
    OnlineState,
    apply_observation,
    group_inverse,
    group_inverse_residuals,
    rank_one_update,
    refresh,
)
from krc.simulate import SimConfig, generate, truth_probability


def random_chain(rng, n, sigma=0.15):
    M = rng.uniform(0.0, 1.0, size=(n, n))
    M /= M.sum(axis=1, keepdims=True)
    return TransitionMatrix((1 - sigma) * M + sigma / n, regularization=sigma)


def solve_state(P, tol=1e-13):
    pi = stationary(P, tol=tol)
    return pi, group_inverse(P, pi)


# -- group inverse ---------------------------------------------------------


def test_group_inverse_frozen_two_state():
    P = TransitionMatrix(np.array([[0.0, 1.0], [1.0, 0.0]]))
    pi = ScoreVector(np.array([0.5, 0.5]))
    G = group_inverse(P, pi).entries
    expect = np.array([[0.25, -0.25], [-0.25, 0.25]])
    assert np.max(np.abs(G - expect)) < 1e-15


def test_group_inverse_axioms_random_chains():
    rng = np.random.default_rng(17)
    for n in (2, 4, 9, 21):
        P = random_chain(rng, n)
        pi, G = solve_state(P)
        res = group_inverse_residuals(P, pi, G)
        assert res["axiom_AGA"] < 1e-11
        assert res["axiom_GAG"] < 1e-11
        assert res["axiom_commute"] < 1e-11
        assert res["right_null"] < 1e-11
        assert res["left_null"] < 1e-11


def test_group_inverse_null_spaces():
    rng = np.random.default_rng(23)
    P = random_chain(rng, 6)
    pi, G = solve_state(P)
    assert np.max(np.abs(G.entries @ np.ones(6))) < 1e-12
    assert np.max(np.abs(pi.scores @ G.entries)) < 1e-12


# -- rank-one updates ------------------------------------------------------


def test_rank_one_update_frozen_case():
    # uniform 2-state chain, row 0 becomes [0.8, 0.2]
    P = TransitionMatrix(np.array([[0.5, 0.5], [0.5, 0.5]]))
    pi, G = solve_state(P)
    delta = np.array([0.5 - 0.8, 0.5 - 0.2])
    pi_new, _ = rank_one_update(pi, G, delta, 0)
    assert np.max(np.abs(pi_new.scores - [5 / 7, 2 / 7])) < 1e-14


def test_rank_one_update_matches_direct_recompute():
    rng = np.random.default_rng(31)
    for trial in range(25):
        n = int(rng.integers(2, 12))
        P = random_chain(rng, n)
        pi, G = solve_state(P)
        i = int(rng.integers(n))
        new_row = rng.uniform(0.05, 1.0, size=n)
        new_row /= new_row.sum()
        delta = P.entries[i] - new_row

        pi_new, G_new = rank_one_update(pi, G, delta, i)

        M2 = P.entries.copy()
        M2[i] = new_row
        P2 = TransitionMatrix(M2)
        pi_direct, G_direct = solve_state(P2)
        assert np.max(np.abs(pi_new.scores - pi_direct.scores)) < 1e-10
        assert np.max(np.abs(G_new.entries - G_direct.entries)) < 1e-8
        res = group_inverse_residuals(P2, pi_new, G_new)
        assert max(res.values()) < 1e-9


def test_rank_one_update_identity_delta():
    rng = np.random.default_rng(5)
    P = random_chain(rng, 5)
    pi, G = solve_state(P)
    pi_new, G_new = rank_one_update(pi, G, np.zeros(5), 2)
    assert np.array_equal(pi_new.scores, pi.scores)
    assert np.array_equal(G_new.entries, G.entries)


def test_rank_one_update_breakdown_guard():
    P = TransitionMatrix(np.array([[0.0, 1.0], [1.0, 0.0]]))
    pi, G = solve_state(P)
    # delta'A#[:, 0] = -1 forces the denominator to zero
    delta = np.array([-2.0, 2.0])
    with pytest.raises(UpdateBreakdownError):
        rank_one_update(pi, G, delta, 0)


def test_rank_one_update_validation():
    P = TransitionMatrix(np.array([[0.5, 0.5], [0.5, 0.5]]))
    pi, G = solve_state(P)
    with pytest.raises(ValueError, match="shape"):
        rank_one_update(pi, G, np.zeros(3), 0)
    with pytest.raises(ValueError, match="sum to zero"):
        rank_one_update(pi, G, np.array([0.1, 0.2]), 0)
    with pytest.raises(ValueError, match="outside"):
        rank_one_update(pi, G, np.zeros(2), 5)


# -- streaming state -------------------------------------------------------


def stream_setup(seed=3, n=6, m=4):
    ds, truth = generate(SimConfig(n=n, m=m, seed=seed))
    state = OnlineState.from_dataset(
        ds, 0.5, 0.3, GAUSSIAN, refresh_every=10**9, tol=1e-12
    )
    return ds, truth, state


def test_cold_start_matches_batch_fit():
    ds, _, state = stream_setup()
    sv = fit_scores(ds, 0.5, 0.3, GAUSSIAN, tol=1e-12)
    assert np.max(np.abs(state.pi.scores - sv.scores)) < 1e-11


def test_stream_matches_batch_rebuild():
    rng = np.random.default_rng(77)
    ds, truth, state = stream_setup()
    n = state.n
    extra = []
    for _ in range(150):
        a, b = sorted(rng.choice(n, size=2, replace=False))
        tk = float(rng.uniform(0, 1))
        y = int(rng.random() < truth_probability(truth, int(a), int(b), tk))
        extra.append((int(a), int(b), tk, y))
        apply_observation(state, extra[-1])

    recs = ds.records() + [ComparisonRecord(*r) for r in extra]
    full = ComparisonDataset(
        n,
        np.array([r.item_i for r in recs]),
        np.array([r.item_j for r in recs]),
        np.array([r.time for r in recs]),
        np.array([r.outcome for r in recs]),
    )
    sv = fit_scores(full, 0.5, 0.3, GAUSSIAN, tol=1e-13)
    assert np.max(np.abs(state.pi.scores - sv.scores)) < 1e-9
    res = group_inverse_residuals(state.P, state.pi, state.Ainv)
    assert max(res.values()) < 1e-8


def test_stream_with_periodic_refresh_matches():
    rng = np.random.default_rng(78)
    ds, truth, _ = stream_setup()
    a_state = OnlineState.from_dataset(ds, 0.5, 0.3, GAUSSIAN, refresh_every=7)
    b_state = OnlineState.from_dataset(ds, 0.5, 0.3, GAUSSIAN, refresh_every=10**9)
    for _ in range(60):
        i, j = sorted(rng.choice(6, size=2, replace=False))
        rec = (int(i), int(j), float(rng.uniform(0, 1)), int(rng.integers(0, 2)))
        apply_observation(a_state, rec)
        apply_observation(b_state, rec)
    assert np.max(np.abs(a_state.pi.scores - b_state.pi.scores)) < 1e-8


def test_stream_preserves_chain_invariants():
    rng = np.random.default_rng(79)
    ds, _, state = stream_setup()
    n = state.n
    for _ in range(80):
        i, j = sorted(rng.choice(n, size=2, replace=False))
        rec = (int(i), int(j), float(rng.uniform(0, 1)), int(rng.integers(0, 2)))
        apply_observation(state, rec)
    P = state.P.entries
    assert np.allclose(P.sum(axis=1), 1.0, atol=1e-12)
    sigma = state.sigma_n
    floor = sigma / n
    for i in range(n):
        for j in range(i + 1, n):
            pair = P[i, j] + P[j, i]
            # regularized pair sum: (1 - sigma)/n + 2 sigma/n
            assert pair == pytest.approx((1 - sigma) / n + 2 * floor, abs=1e-13)


def test_zero_weight_record_is_noop():
    ds, _, _ = stream_setup()
    state = OnlineState.from_dataset(ds, 0.5, 0.05, BOXCAR)
    before_pi = state.pi.scores.copy()
    before_P = state.P.entries.copy()
    before_wm = state.win_mass.copy()
    apply_observation(state, (0, 1, 0.99, 1))
    assert np.array_equal(state.pi.scores, before_pi)
    assert np.array_equal(state.P.entries, before_P)
    assert np.array_equal(state.win_mass, before_wm)
    assert state.updates_since_refresh == 0


def test_refresh_counter_cycles():
    ds, _, _ = stream_setup()
    state = OnlineState.from_dataset(ds, 0.5, 0.3, GAUSSIAN, refresh_every=3)
    rng = np.random.default_rng(1)
    counts = []
    for _ in range(7):
        i, j = sorted(rng.choice(6, size=2, replace=False))
        apply_observation(
            state, (int(i), int(j), float(rng.uniform(0, 1)), 1)
        )
        counts.append(state.updates_since_refresh)
    assert counts == [1, 2, 0, 1, 2, 0, 1]


def test_refresh_is_idempotent_for_scores():
    ds, _, state = stream_setup()
    before = state.pi.scores.copy()
    refresh(state)
    assert np.max(np.abs(state.pi.scores - before)) < 1e-11


def test_from_empty_starts_uniform():
    state = OnlineState.from_empty(4, 0.5, 0.2, GAUSSIAN)
    assert np.max(np.abs(state.pi.scores - 0.25)) < 1e-12
    apply_observation(state, (0, 1, 0.5, 1))
    assert state.pi.scores[1] > state.pi.scores[0]


def test_stream_from_empty_matches_batch():
    # every pair passes through the first-mass transition
    rng = np.random.default_rng(44)
    n = 5
    state = OnlineState.from_empty(n, 0.5, 0.3, GAUSSIAN)
    rows = []
    for _ in range(120):
        i, j = sorted(rng.choice(n, size=2, replace=False))
        rec = (int(i), int(j), float(rng.uniform(0, 1)), int(rng.integers(0, 2)))
        rows.append(rec)
        apply_observation(state, rec)
    ds = ComparisonDataset(
        n,
        np.array([r[0] for r in rows]),
        np.array([r[1] for r in rows]),
        np.array([r[2] for r in rows]),
        np.array([r[3] for r in rows]),
    )
    sv = fit_scores(ds, 0.5, 0.3, GAUSSIAN, tol=1e-13)
    assert np.max(np.abs(state.pi.scores - sv.scores)) < 1e-8


def test_non_canonical_record_equivalence():
    s1 = OnlineState.from_empty(4, 0.5, 0.2, GAUSSIAN)
    s2 = OnlineState.from_empty(4, 0.5, 0.2, GAUSSIAN)
    apply_observation(s1, (2, 0, 0.5, 1))
    apply_observation(s2, ComparisonRecord(0, 2, 0.5, 0))
    assert np.array_equal(s1.pi.scores, s2.pi.scores)
    assert np.array_equal(s1.win_mass, s2.win_mass)


def test_record_outside_roster_rejected():
    state = OnlineState.from_empty(3, 0.5, 0.2, GAUSSIAN)
    with pytest.raises(RosterError):
        apply_observation(state, (0, 7, 0.5, 1))


def test_state_validation():
    with pytest.raises(ValueError):
        OnlineState(1, 0.5, 0.2, GAUSSIAN)
    with pytest.raises(ValueError):
        OnlineState(3, 0.5, -0.2, GAUSSIAN)
    with pytest.raises(ValueError):
        OnlineState(3, 0.5, 0.2, GAUSSIAN, refresh_every=0)


def test_group_inverse_column_accessor():
    rng = np.random.default_rng(2)
    P = random_chain(rng, 4)
    pi, G = solve_state(P)
    assert np.array_equal(G.column(2), G.entries[:, 2])
    assert isinstance(G, GroupInverse)
