"""Asymptotic precision, bias, and confidence intervals for scores.

The estimated score vector is asymptotically normal coordinate-wise with a
diagonal covariance.  For item i the precision (inverse standard
deviation) is

    alpha_i = sqrt( (sum_{j != i} y*_ij)^2
                    / sum_{j != i} (1 / (M_ij h)) (pi_i + pi_j)^2
                      y*_ij (1 - y*_ij) int K^2 )

with y*_ij = pi_j / (pi_i + pi_j), and the smoothing bias is

    beta_i = sum_{k < l} (A#_{l,i} - A#_{k,i}) ((pi_k + pi_l) / n)
             d2/dt2 y*_kl(t)  int v^2 K.

In practice the plug-in alpha uses the estimated scores and raw pair
counts, and the bias term is ignored by under-smoothing (small h); beta is
available for simulations where the truth is known.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .data import ComparisonDataset
from .errors import InferenceError
from .estimator import (
    ScoreVector,
    TransitionMatrix,
    build_ideal_transition,
    stationary,
)
from .kernels import Kernel
from .online import GroupInverse, group_inverse

# -- normal quantile -------------------------------------------------------

# Rational approximation coefficients (central region and tails), polished
# below by Halley steps against the erfc-based CDF.
_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
      1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
      6.680131188771972e+01, -1.328068155288572e+01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
      -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
      3.754408661907416e+00)
_P_LOW = 0.02425


def _norm_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def _norm_pdf(x: float) -> float:
    return math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)


def normal_quantile(p: float) -> float:
    """Inverse standard normal CDF via a rational approximation plus two
    Halley refinement steps (near machine precision over the full range)."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"quantile argument must be in (0, 1), got {p}")
    # Work in the lower half only: cdf(x) - p cancels catastrophically when
    # p is close to 1, and 1 - p is exact for p >= 0.5.
    if p > 0.5:
        return -normal_quantile(1.0 - p)
    if p < _P_LOW:
        q = math.sqrt(-2.0 * math.log(p))
        x = ((((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q
              + _C[5])
             / ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0))
    else:
        q = p - 0.5
        r = q * q
        x = ((((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r
              + _A[5]) * q
             / (((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r
                + 1.0))
    for _ in range(2):
        err = _norm_cdf(x) - p
        u = err / _norm_pdf(x)
        x -= u / (1.0 + 0.5 * x * u)
    return x


# -- parameter containers --------------------------------------------------


@dataclass
class AsymptoticParams:
    """Per-item precision (alpha) and optional smoothing bias (beta)."""

    alpha: np.ndarray
    beta: np.ndarray | None
    h: float
    plug_in_source: str
    t: float | None = None


@dataclass(frozen=True)
class IntervalEstimate:
    point: float
    lower: float
    upper: float
    level: float

    def describe(self) -> str:
        return f"{self.point:.2f} ({self.lower:.2f}, {self.upper:.2f})"

    @property
    def width(self) -> float:
        return self.upper - self.lower


@dataclass
class DiagonalApproxGroupInverse:
    """Diagonal surrogate for A#: entry i is 1 / sum_{j!=i} (1/n) y*_ij."""

    diag: np.ndarray

    def as_matrix(self) -> np.ndarray:
        return np.diag(self.diag)


@dataclass
class ExpansionReport:
    e_norm: float
    ea_norm: float
    condition_holds: bool
    first_order_residual: float
    second_order_norm: float
    identity_gap: float


# -- alpha / beta ----------------------------------------------------------


def _win_prob_matrix(scores: np.ndarray) -> np.ndarray:
    """Y[i, j] = probability j is preferred over i; zero diagonal."""
    Y = scores[None, :] / (scores[:, None] + scores[None, :])
    np.fill_diagonal(Y, 0.0)
    return Y


def plug_in_alpha(
    pi_hat: ScoreVector,
    dataset: ComparisonDataset,
    t: float,
    h: float,
    kernel: Kernel,
    *,
    source: str = "estimated",
    effective_counts: bool = False,
) -> AsymptoticParams:
    """Per-item precision with scores plugged in for the truth.

    Sums run over opponents the item has actually been compared with.  By
    default M_ij h uses the raw per-pair observation count; with
    ``effective_counts`` the realized kernel mass sum_k K_h(t, t_k)
    replaces it, which is the same quantity up to the local density of
    observation times.  Items with no observed opponents have undefined
    precision and trigger an InferenceError naming them.
    """
    scores = pi_hat.scores
    n = dataset.n
    if scores.shape != (n,):
        raise ValueError("score vector length does not match dataset")
    if np.min(scores) <= 0:
        raise ValueError("scores must be strictly positive")
    weight_inv = np.zeros((n, n))
    if effective_counts:
        for (i, j), times, _ in dataset.pairs():
            mass = float(np.sum(kernel.weight(t, times, h)))
            if mass > 0:
                weight_inv[i, j] = weight_inv[j, i] = 1.0 / mass
    else:
        for (i, j), count in dataset.pair_counts().items():
            weight_inv[i, j] = weight_inv[j, i] = 1.0 / (count * h)
    observed = weight_inv > 0
    missing = np.flatnonzero(~observed.any(axis=1))
    if missing.size:
        names = ", ".join(dataset.item_labels[k] for k in missing)
        raise InferenceError(f"no observed opponents for item(s): {names}")

    Y = _win_prob_matrix(scores)
    S1 = np.where(observed, Y, 0.0).sum(axis=1)
    pair_sum = scores[:, None] + scores[None, :]
    terms = np.where(
        observed,
        weight_inv * pair_sum**2 * Y * (1.0 - Y) * kernel.squared_integral,
        0.0,
    )
    D = terms.sum(axis=1)
    alpha = S1 / np.sqrt(D)
    if not np.all(np.isfinite(alpha)) or np.min(alpha) <= 0:
        raise InferenceError("non-finite or non-positive precision computed")
    return AsymptoticParams(
        alpha=alpha, beta=None, h=h, plug_in_source=source, t=t
    )


def oracle_beta(
    truth_curve: Callable[[float], ScoreVector],
    t: float,
    h: float,
    kernel: Kernel,
    P_star: TransitionMatrix | None = None,
    Ainv_star: GroupInverse | None = None,
    fd_step: float = 1e-3,
    domain: tuple[float, float] = (0.0, 1.0),
) -> np.ndarray:
    """Smoothing-bias vector from a known (simplex-normalized) truth curve.

    The second time derivative of each pairwise win probability is taken by
    central differences with step ``fd_step``, so t must sit at least one
    step inside ``domain``.  A constant truth gives exactly zero bias.
    """
    lo, hi = domain
    if t - fd_step < lo or t + fd_step > hi:
        raise ValueError(
            f"t={t} within {fd_step} of the domain boundary {domain}"
        )

    def scores_at(s: float) -> np.ndarray:
        sv = truth_curve(s)
        return sv.scores if isinstance(sv, ScoreVector) else np.asarray(sv, float)

    pi_t = scores_at(t)
    n = pi_t.shape[0]
    if P_star is None:
        P_star = build_ideal_transition(pi_t)
    if Ainv_star is None:
        Ainv_star = group_inverse(P_star, ScoreVector(pi_t, t=t))
    Y_mid = _win_prob_matrix(pi_t)
    Y_hi = _win_prob_matrix(scores_at(t + fd_step))
    Y_lo = _win_prob_matrix(scores_at(t - fd_step))
    ydd = (Y_hi - 2.0 * Y_mid + Y_lo) / (fd_step * fd_step)
    C = ((pi_t[:, None] + pi_t[None, :]) / n) * ydd * kernel.second_moment
    np.fill_diagonal(C, 0.0)
    # Summing (A#_{l,i} - A#_{k,i}) C_kl over k < l collapses, via the
    # antisymmetry of ydd, to a weighted column sum of A#.
    w = C.sum(axis=0)
    return w @ Ainv_star.entries


# -- diagonal approximation ------------------------------------------------


def diagonal_group_inverse_approx(pi_hat: ScoreVector) -> DiagonalApproxGroupInverse:
    """Diagonal stand-in for the group inverse, O(n^2) to form.

    A_ii = sum_{j != i} (1/n) y*_ij is the exit rate of state i; its
    reciprocal approximates the dominant (diagonal) part of A#, with the
    off-diagonal part smaller by a factor of order 1/sqrt(n) per column.
    """
    scores = pi_hat.scores
    if np.min(scores) <= 0:
        raise ValueError("scores must be strictly positive")
    n = scores.shape[0]
    exit_rate = _win_prob_matrix(scores).sum(axis=1) / n
    return DiagonalApproxGroupInverse(1.0 / exit_rate)


def diagonal_approx_error(
    approx: DiagonalApproxGroupInverse, Ainv: GroupInverse
) -> float:
    """max_i || Atilde[:, i] - A#[:, i] ||_2."""
    diff = approx.as_matrix() - Ainv.entries
    return float(np.max(np.linalg.norm(diff, axis=0)))


# -- confidence intervals --------------------------------------------------


def score_ci(
    pi_hat: ScoreVector, params: AsymptoticParams, item: int, level: float = 0.95
) -> IntervalEstimate:
    """Two-sided interval pi_hat_i +/- z / alpha_i (bias ignored)."""
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must be in (0, 1), got {level}")
    point = float(pi_hat.scores[item])
    z = normal_quantile(0.5 * (1.0 + level))
    half = z / float(params.alpha[item])
    return IntervalEstimate(point, point - half, point + half, level)


def pairwise_win_ci(
    pi_hat: ScoreVector,
    params: AsymptoticParams,
    i: int,
    j: int,
    level: float = 0.95,
) -> IntervalEstimate:
    """Delta-method interval for the probability that j beats i.

    The gradient of s_j / (s_i + s_j) is (-p/(s_i+s_j), (1-p)/(s_i+s_j))
    scaled; coordinates are asymptotically independent so the variance is
    the weighted sum of squared gradient entries.  Bounds are clipped to
    [0, 1].
    """
    if i == j:
        raise ValueError("pairwise interval needs two distinct items")
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must be in (0, 1), got {level}")
    s = pi_hat.scores
    total = float(s[i] + s[j])
    point = float(s[j]) / total
    g_i = -float(s[j]) / total**2
    g_j = float(s[i]) / total**2
    var = (g_i / float(params.alpha[i])) ** 2 + (g_j / float(params.alpha[j])) ** 2
    z = normal_quantile(0.5 * (1.0 + level))
    half = z * math.sqrt(var)
    return IntervalEstimate(
        point, max(0.0, point - half), min(1.0, point + half), level
    )


# -- expansion diagnostic --------------------------------------------------


def expansion_diagnostic(
    P_hat: TransitionMatrix,
    P_star: TransitionMatrix,
    Ainv_star: GroupInverse,
    pi_hat: ScoreVector | None = None,
    pi_star: ScoreVector | None = None,
    tol: float = 1e-12,
) -> ExpansionReport:
    """Check the perturbation expansion of the stationary vector.

    With E = P_hat - P_star, the expansion pi_hat' - pi' = pi' E A# +
    pi_hat' E A# E A# is an exact identity whenever ||E A#|| < 1; the
    report carries the norms, whether the condition holds, the first-order
    truncation residual, and the gap of the full identity (rounding-level
    when both stationary vectors are accurate).
    """
    E = P_hat.entries - P_star.entries
    EA = E @ Ainv_star.entries
    ea_norm = float(np.linalg.norm(EA, 2))
    if pi_star is None:
        pi_star = stationary(P_star, tol=tol)
    if pi_hat is None:
        pi_hat = stationary(P_hat, tol=tol)
    p = pi_star.scores
    q = pi_hat.scores
    first_order = p @ EA
    second_order = (q @ EA) @ EA
    return ExpansionReport(
        e_norm=float(np.linalg.norm(E, 2)),
        ea_norm=ea_norm,
        condition_holds=bool(ea_norm < 1.0),
        first_order_residual=float(np.max(np.abs(q - p - first_order))),
        second_order_norm=float(np.max(np.abs(second_order))),
        identity_gap=float(np.max(np.abs(q - p - first_order - second_order))),
    )
