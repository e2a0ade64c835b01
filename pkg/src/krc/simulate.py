"""Synthetic comparison streams with known ground truth.

The default skill family is sinusoidal: item i has skill
``alpha_i + sin(5 alpha_i t)`` on t in [0, 1] with ``alpha_i ~ U(1, 3)``,
so skills stay strictly positive and each item oscillates at its own
frequency.  Every unordered pair receives ``m`` comparisons at uniform
random times with outcomes drawn from the preference model.

Generation is deterministic given the seed: each pair draws from its own
generator seeded by (seed, i, j), so the result does not depend on
iteration or thread order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import ComparisonDataset, TimeEncoding
from .estimator import ScoreVector
from .util import float_token, format_float_array, write_csv

_FAMILIES = ("sine", "constant", "custom")


@dataclass(frozen=True)
class SimConfig:
    n: int
    m: int
    seed: int = 0
    skill_family: str = "sine"
    alpha: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("need at least two items")
        if self.m < 1:
            raise ValueError("need at least one comparison per pair")
        if self.skill_family not in _FAMILIES:
            raise ValueError(
                f"unknown skill family {self.skill_family!r}; "
                f"expected one of {_FAMILIES}"
            )
        if self.skill_family == "custom" and self.alpha is None:
            raise ValueError("custom skill family needs explicit alpha coefficients")
        if self.skill_family != "custom" and self.alpha is not None:
            raise ValueError("alpha coefficients only apply to the custom family")


@dataclass(frozen=True)
class GroundTruth:
    """Latent skill curves; ``dynamic`` switches the sine term on."""

    alpha: np.ndarray
    dynamic: bool

    def skill(self, t: float) -> np.ndarray:
        if self.dynamic:
            return self.alpha + np.sin(5.0 * self.alpha * t)
        return self.alpha.copy()

    def normalized_skill(self, t: float) -> np.ndarray:
        s = self.skill(t)
        return s / s.sum()

    def score_vector(self, t: float) -> ScoreVector:
        return ScoreVector(self.normalized_skill(t), t=t)


def truth_probability(truth: GroundTruth, i: int, j: int, t: float) -> float:
    """P(item j preferred over item i at time t); scale-invariant."""
    s = truth.skill(t)
    return float(s[j] / (s[i] + s[j]))


def _draw_alpha(rng: np.random.Generator, n: int) -> np.ndarray:
    alpha = rng.uniform(1.0, 3.0, size=n)
    # alpha == 1 exactly would allow the sine dip to touch zero skill.
    while np.any(alpha == 1.0):
        redo = alpha == 1.0
        alpha[redo] = rng.uniform(1.0, 3.0, size=int(redo.sum()))
    return alpha


def _build_truth(config: SimConfig) -> GroundTruth:
    if config.skill_family == "custom":
        alpha = np.asarray(config.alpha, dtype=float)
        if alpha.shape != (config.n,):
            raise ValueError(f"alpha must have length n={config.n}")
        if np.min(alpha) <= 1.0:
            raise ValueError("custom alpha must exceed 1 so skills stay positive")
        return GroundTruth(alpha=alpha, dynamic=True)
    rng = np.random.default_rng((config.seed, 0, 0))
    alpha = _draw_alpha(rng, config.n)
    return GroundTruth(alpha=alpha, dynamic=(config.skill_family == "sine"))


def generate(config: SimConfig) -> tuple[ComparisonDataset, GroundTruth]:
    """Simulate the full comparison design: m outcomes for every pair."""
    truth = _build_truth(config)
    n, m = config.n, config.m
    n_pairs = n * (n - 1) // 2
    ii = np.empty(n_pairs * m, dtype=np.int64)
    jj = np.empty(n_pairs * m, dtype=np.int64)
    tt = np.empty(n_pairs * m)
    yy = np.empty(n_pairs * m, dtype=np.int64)
    pos = 0
    for i in range(n):
        a_i = truth.alpha[i]
        for j in range(i + 1, n):
            a_j = truth.alpha[j]
            rng = np.random.default_rng((config.seed, i, j))
            times = np.sort(rng.uniform(0.0, 1.0, size=m))
            if truth.dynamic:
                s_i = a_i + np.sin(5.0 * a_i * times)
                s_j = a_j + np.sin(5.0 * a_j * times)
            else:
                s_i = np.full(m, a_i)
                s_j = np.full(m, a_j)
            if s_i.min() <= 0 or s_j.min() <= 0:
                raise RuntimeError("non-positive skill in generator")
            p_j = s_j / (s_i + s_j)
            sl = slice(pos, pos + m)
            ii[sl] = i
            jj[sl] = j
            tt[sl] = times
            yy[sl] = rng.random(m) < p_j
            pos += m
    dataset = ComparisonDataset(
        n, ii, jj, tt, yy,
        encoding=TimeEncoding("unit-interval"),
        _presorted=True,
    )
    return dataset, truth


def export_truth_csv(
    truth: GroundTruth,
    grid,
    path: str,
    labels=None,
    normalized: bool = True,
) -> None:
    """Write the truth curve on a grid: ``t,item_0,...`` one row per point."""
    grid = np.asarray(grid, dtype=float).ravel()
    n = truth.alpha.shape[0]
    header = ["t"] + list(labels or (f"item_{k}" for k in range(n)))
    rows = []
    for t in grid:
        s = truth.normalized_skill(t) if normalized else truth.skill(t)
        rows.append([float_token(t)] + format_float_array(s))
    write_csv(path, header, rows)


def generate_season_dataset(
    n: int,
    n_seasons: int,
    days_per_season: int,
    games_per_day: int,
    seed: int = 0,
    drift: float = 0.5,
    spread: float = 1.0,
) -> tuple[ComparisonDataset, np.ndarray]:
    """Schedule-style data: seasons of game days with slowly drifting skills.

    Log-strengths start N(0, spread^2) and take a N(0, drift^2) random-walk
    step between seasons, constant within a season.  Each game day pairs up
    teams from a fresh shuffle (a team plays at most once per day), so
    ``2 * games_per_day <= n`` is required.  Returns the dataset (season-day
    time encoding) and the (n_seasons, n) strength matrix.
    """
    if 2 * games_per_day > n:
        raise ValueError("too many games per day for the roster")
    if n_seasons < 1 or days_per_season < 1 or games_per_day < 1:
        raise ValueError("season shape parameters must be positive")
    rng = np.random.default_rng((seed, 7, 101))
    log_s = rng.normal(0.0, spread, size=n)
    strengths = np.empty((n_seasons, n))
    ii, jj, yy, ss, dd = [], [], [], [], []
    for l in range(1, n_seasons + 1):
        strengths[l - 1] = np.exp(log_s)
        s = strengths[l - 1]
        for k in range(1, days_per_season + 1):
            perm = rng.permutation(n)
            for g in range(games_per_day):
                a, b = int(perm[2 * g]), int(perm[2 * g + 1])
                p_b = s[b] / (s[a] + s[b])
                ii.append(a)
                jj.append(b)
                yy.append(int(rng.random() < p_b))
                ss.append(l)
                dd.append(k)
        log_s = log_s + rng.normal(0.0, drift, size=n)
    enc = TimeEncoding("season-day", (days_per_season,) * n_seasons)
    tt = np.array([enc.encode(l, k) for l, k in zip(ss, dd)])
    dataset = ComparisonDataset(
        n, np.array(ii), np.array(jj), tt, np.array(yy),
        encoding=enc,
        season=np.array(ss),
        day=np.array(dd),
    )
    return dataset, strengths
