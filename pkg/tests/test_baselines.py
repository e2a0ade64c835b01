"""Elo, pooled and weighted maximum likelihood, static spectral ranking."""

import numpy as np
import pytest

from krc.baselines import (
    EloConfig,
    MMConfig,
    bt_mle_mm,
    elo_expected,
    elo_fit,
    static_rank_centrality,
    wmle,
)
from krc.data import ComparisonDataset
from krc.errors import ConnectivityError, ConvergenceError
from krc.kernels import BOXCAR, GAUSSIAN
from krc.simulate import SimConfig, generate


def dataset_from_rows(n, rows):
    rows = list(rows)
    return ComparisonDataset(
        n,
        np.array([r[0] for r in rows]),
        np.array([r[1] for r in rows]),
        np.array([r[2] for r in rows]),
        np.array([r[3] for r in rows]),
    )


# -- Elo -------------------------------------------------------------------


def test_elo_expected_frozen():
    assert elo_expected(1500.0, 1500.0) == 0.5
    # 400-point favorite wins with probability 10/11
    assert elo_expected(1900.0, 1500.0) == pytest.approx(10 / 11, abs=1e-15)
    assert elo_expected(1500.0, 1900.0) == pytest.approx(1 / 11, abs=1e-15)


def test_elo_single_game_update():
    ds = dataset_from_rows(2, [(0, 1, 0.5, 1)])
    table = elo_fit(ds, EloConfig(k_factor=20.0))
    # winner takes +K/2 from an even matchup
    assert table.final[1] == pytest.approx(1510.0, abs=1e-12)
    assert table.final[0] == pytest.approx(1490.0, abs=1e-12)


def test_elo_rating_conservation():
    ds, _ = generate(SimConfig(n=6, m=8, seed=4))
    table = elo_fit(ds)
    assert table.final.sum() == pytest.approx(6 * 1500.0, abs=1e-8)
    assert table.times.size == 2 * ds.n_records


def test_elo_ratings_before_is_strict():
    ds = dataset_from_rows(2, [(0, 1, 0.2, 1), (0, 1, 0.6, 1)])
    table = elo_fit(ds)
    at_start = table.ratings_before(0.2)
    assert np.array_equal(at_start, [1500.0, 1500.0])
    mid = table.ratings_before(0.6)
    assert mid[1] == pytest.approx(1510.0)
    end = table.ratings_before(2.0)
    assert end[1] > mid[1]


def test_elo_export(tmp_path):
    ds = dataset_from_rows(2, [(0, 1, 0.5, 1)])
    table = elo_fit(ds)
    path = tmp_path / "elo.csv"
    table.export_csv(str(path))
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "time,item,rating"
    assert len(lines) == 3


# -- pooled MLE ------------------------------------------------------------


def test_mle_two_item_closed_form():
    # 3 wins to 1: p = (1/4, 3/4)
    ds = dataset_from_rows(
        2, [(0, 1, 0.1, 1), (0, 1, 0.2, 1), (0, 1, 0.3, 1), (0, 1, 0.4, 0)]
    )
    sv = bt_mle_mm(ds)
    assert np.max(np.abs(sv.scores - [0.25, 0.75])) < 1e-9
    assert sv.t is None


def test_mle_loglik_monotone():
    ds, _ = generate(SimConfig(n=5, m=6, seed=12))
    sv, info = bt_mle_mm(ds, return_info=True)
    lls = np.array(info.loglik)
    assert np.all(np.diff(lls) >= -1e-8 * (1 + np.abs(lls[:-1])))
    assert info.final_change <= 1e-10
    assert sv.scores.sum() == pytest.approx(1.0, abs=1e-12)


def test_mle_strict_requires_connectivity():
    # items 0 and 1 trade wins; item 2 loses to both and never wins
    ds = dataset_from_rows(
        3, [(0, 1, 0.1, 1), (0, 1, 0.2, 0), (0, 2, 0.3, 0), (1, 2, 0.4, 0)]
    )
    with pytest.raises(ConnectivityError, match="MLE does not exist"):
        bt_mle_mm(ds)
    sv = bt_mle_mm(ds, strict=False)
    assert sv.scores[2] == 0.0
    # games against the pinned item are uninformative on its face, so the
    # remaining mass splits by the 0-1 record alone
    assert np.max(np.abs(sv.scores[:2] - 0.5)) < 1e-9
    assert sv.scores.sum() == pytest.approx(1.0, abs=1e-12)


def test_mle_convergence_error_on_tiny_budget():
    ds, _ = generate(SimConfig(n=5, m=6, seed=12))
    with pytest.raises(ConvergenceError):
        bt_mle_mm(ds, MMConfig(tol=1e-14, max_iter=2))


def test_mle_init_validation():
    ds = dataset_from_rows(2, [(0, 1, 0.1, 1), (0, 1, 0.2, 0)])
    with pytest.raises(ValueError):
        bt_mle_mm(ds, init=np.array([-1.0, 2.0]))
    sv = bt_mle_mm(ds, init=np.array([0.9, 0.1]))
    assert np.max(np.abs(sv.scores - 0.5)) < 1e-9


# -- weighted MLE ----------------------------------------------------------


def test_wmle_flat_weights_match_pooled():
    # every pair has the same count, so unit-mass-per-pair rescaling
    # leaves the maximizer unchanged
    ds, _ = generate(SimConfig(n=5, m=10, seed=21))
    pooled = bt_mle_mm(ds)
    weighted = wmle(ds, 0.5, 50.0, BOXCAR)
    assert np.max(np.abs(weighted.scores - pooled.scores)) < 1e-8
    assert weighted.t == 0.5


def test_wmle_tracks_local_outcomes():
    # item 1 beats 0 early, 0 beats 1 late; 2 loses throughout
    rows = [(0, 1, t, 1) for t in np.linspace(0.0, 0.4, 8)]
    rows += [(0, 1, t, 0) for t in np.linspace(0.6, 1.0, 8)]
    rows += [(0, 2, t, 0) for t in np.linspace(0.0, 1.0, 8)]
    rows += [(1, 2, t, 0) for t in np.linspace(0.0, 1.0, 8)]
    ds = dataset_from_rows(3, rows)
    early = wmle(ds, 0.15, 0.15, GAUSSIAN, strict=False)
    late = wmle(ds, 0.85, 0.15, GAUSSIAN, strict=False)
    assert early.scores[1] > early.scores[0]
    assert late.scores[0] > late.scores[1]
    assert early.scores[2] == 0.0


def test_wmle_strict_connectivity_gate():
    rows = [(0, 1, 0.1, 1), (1, 2, 0.1, 0), (0, 2, 0.9, 0)]
    ds = dataset_from_rows(3, rows)
    with pytest.raises(ConnectivityError):
        wmle(ds, 0.1, 0.05, GAUSSIAN)


def test_wmle_bandwidth_validation():
    ds = dataset_from_rows(2, [(0, 1, 0.1, 1), (0, 1, 0.2, 0)])
    with pytest.raises(ValueError):
        wmle(ds, 0.5, 0.0, GAUSSIAN)


# -- static spectral ranking -----------------------------------------------


def test_static_rc_frozen_two_item():
    # 3 of 4 wins, no teleport: chain [[5/8, 3/8], [1/8, 7/8]]
    ds = dataset_from_rows(
        2, [(0, 1, 0.1, 1), (0, 1, 0.2, 1), (0, 1, 0.3, 1), (0, 1, 0.4, 0)]
    )
    sv = static_rank_centrality(ds, sigma_n=0.0, tol=1e-13)
    assert np.max(np.abs(sv.scores - [0.25, 0.75])) < 1e-12
    assert sv.t is None


def test_static_rc_agrees_with_mle_on_two_items():
    # with two items both estimators reduce to the win-odds ratio
    ds = dataset_from_rows(
        2, [(0, 1, t, y) for t, y in zip(np.linspace(0, 1, 10), [1, 1, 0, 1, 0, 1, 1, 1, 0, 1])]
    )
    rc = static_rank_centrality(ds, sigma_n=0.0, tol=1e-13)
    ml = bt_mle_mm(ds)
    assert np.max(np.abs(rc.scores - ml.scores)) < 1e-9


def test_static_rc_sigma_zero_needs_connectivity():
    ds = dataset_from_rows(3, [(0, 1, 0.1, 1), (1, 2, 0.2, 1)])
    with pytest.raises(ConnectivityError):
        static_rank_centrality(ds, sigma_n=0.0)
    sv = static_rank_centrality(ds)  # default teleport 1/n keeps it alive
    assert np.min(sv.scores) > 0.0


def test_static_rc_default_teleport_is_recorded():
    ds, _ = generate(SimConfig(n=4, m=6, seed=2))
    sv = static_rank_centrality(ds)
    assert sv.scores.sum() == pytest.approx(1.0, abs=1e-12)
