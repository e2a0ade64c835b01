"""Exact online maintenance of scores via group-inverse rank-one updates.

Let P be the comparison chain, pi its stationary vector, A = I - P, and
A# the group inverse of A (Meyer's framework for Markov chain sensitivity).
A# is the unique matrix with A A# A = A, A# A A# = A#, and A A# = A# A;
for an irreducible chain it can be computed as

    A# = (A + e pi')^{-1} - e pi'

because (A + e pi') A# = I - e pi'.

When one row i of P changes to ``row - delta'`` with ``delta' e = 0`` the
new stationary vector and group inverse follow in closed form:

    eps  = 1 + delta' A#[:, i]
    phi' = (pi_i / eps) * delta' A#
    pi_new = pi - phi
    A#_new = A# + e phi' (A# - (phi' A#[:, i] / pi_i) I) - A#[:, i] phi' / pi_i

Each new comparison touches two rows of P (the pair's), so one observation
costs two rank-one updates, O(n^2) instead of a fresh O(n^3) solve.  The
running state refreshes itself from scratch periodically to cap floating
point drift.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import ComparisonDataset, ComparisonRecord
from .errors import RosterError, UpdateBreakdownError
from .estimator import (
    ScoreVector,
    TransitionMatrix,
    default_teleport,
    regularize,
    stationary,
)
from .kernels import Kernel

# Denominators this small make the closed-form update numerically useless;
# the caller falls back to a full refresh.
_BREAKDOWN_EPS = 1e-12

# delta vectors built from a pair update cancel exactly; anything beyond
# rounding noise indicates corrupted state.
_MIRROR_SLACK = 1e-12


@dataclass
class GroupInverse:
    entries: np.ndarray

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def column(self, i: int) -> np.ndarray:
        return self.entries[:, i]


def group_inverse(P: TransitionMatrix, pi: ScoreVector) -> GroupInverse:
    """Group inverse of I - P for an irreducible chain with stationary pi."""
    scores = pi.scores if isinstance(pi, ScoreVector) else np.asarray(pi, dtype=float)
    n = P.n
    A = np.eye(n) - P.entries
    N = A + np.outer(np.ones(n), scores)
    try:
        Ninv = np.linalg.inv(N)
    except np.linalg.LinAlgError:
        raise UpdateBreakdownError(
            "A + e pi' is singular; pi is not the stationary vector of P"
        ) from None
    return GroupInverse(Ninv - np.outer(np.ones(n), scores))


def group_inverse_residuals(
    P: TransitionMatrix, pi: ScoreVector, Ainv: GroupInverse
) -> dict[str, float]:
    """Max-abs residuals of the defining axioms plus the null-space facts
    A# e = 0 and pi' A# = 0.  All should sit at rounding level."""
    scores = pi.scores if isinstance(pi, ScoreVector) else np.asarray(pi, dtype=float)
    A = np.eye(P.n) - P.entries
    G = Ainv.entries
    e = np.ones(P.n)
    return {
        "axiom_AGA": float(np.max(np.abs(A @ G @ A - A))),
        "axiom_GAG": float(np.max(np.abs(G @ A @ G - G))),
        "axiom_commute": float(np.max(np.abs(A @ G - G @ A))),
        "right_null": float(np.max(np.abs(G @ e))),
        "left_null": float(np.max(np.abs(scores @ G))),
    }


def rank_one_update(
    pi_old, Ainv_old, delta: np.ndarray, i: int
) -> tuple[ScoreVector, GroupInverse]:
    """Closed-form stationary vector and group inverse after replacing row
    ``i`` of the chain by ``row - delta'``.

    ``delta`` must sum to zero (row stochasticity is preserved) and the
    caller is responsible for the updated row staying a probability row.
    Raises UpdateBreakdownError when 1 + delta' A#[:, i] is numerically
    zero.
    """
    pi = pi_old.scores if isinstance(pi_old, ScoreVector) else np.asarray(pi_old, float)
    G = Ainv_old.entries if isinstance(Ainv_old, GroupInverse) else np.asarray(Ainv_old)
    delta = np.asarray(delta, dtype=float)
    n = pi.shape[0]
    if delta.shape != (n,):
        raise ValueError(f"delta must have shape ({n},)")
    if not 0 <= i < n:
        raise ValueError(f"row index {i} outside 0..{n - 1}")
    dsum = float(delta.sum())
    if abs(dsum) > 1e-9 * max(1.0, float(np.max(np.abs(delta)))):
        raise ValueError(f"delta must sum to zero, got {dsum}")
    pii = float(pi[i])
    if pii <= 0:
        raise ValueError(f"stationary entry pi[{i}] = {pii} must be positive")

    dG = delta @ G
    eps = 1.0 + dG[i]
    if abs(eps) <= _BREAKDOWN_EPS:
        raise UpdateBreakdownError(
            f"update denominator 1 + delta'A#[:,{i}] = {eps:.3e} too close to zero"
        )
    phi = (pii / eps) * dG
    pi_new = pi - phi
    phiG = phi @ G
    c = phiG[i] / pii
    G_new = (
        G
        + np.outer(np.ones(n), phiG - c * phi)
        - np.outer(G[:, i], phi) / pii
    )
    return ScoreVector(pi_new, t=getattr(pi_old, "t", None)), GroupInverse(G_new)


def _transition_from_mass(win_mass: np.ndarray) -> TransitionMatrix:
    """Raw (unregularized) chain from a matrix of kernel-weighted win masses.

    ``win_mass[a, b]`` is the weighted mass of events where a beat b.  Pairs
    with zero total mass keep zero off-diagonal entries.
    """
    n = win_mass.shape[0]
    den = win_mass + win_mass.T
    with np.errstate(divide="ignore", invalid="ignore"):
        frac = np.where(den > 0, win_mass.T / den, 0.0)
    P = frac / n
    np.fill_diagonal(P, 0.0)
    diag = 1.0 - P.sum(axis=1)
    np.fill_diagonal(P, np.clip(diag, 0.0, None))
    return TransitionMatrix(P)


class OnlineState:
    """Running estimate at a fixed evaluation time t.

    Holds the per-pair kernel-weighted win masses, the regularized chain,
    its stationary vector, and the group inverse.  ``apply_observation``
    folds one record in via two rank-one updates; every ``refresh_every``
    updates (or on numerical breakdown) everything is recomputed from the
    running masses.  Single-writer: mutate from one thread only.
    """

    def __init__(
        self,
        n: int,
        t: float,
        h: float,
        kernel: Kernel,
        sigma_n: float | None = None,
        refresh_every: int = 500,
        tol: float = 1e-10,
        max_iter: int = 100_000,
    ):
        if n < 2:
            raise ValueError("need at least two items")
        if not h > 0:
            raise ValueError(f"bandwidth must be positive, got {h}")
        if refresh_every < 1:
            raise ValueError("refresh_every must be >= 1")
        self.n = int(n)
        self.t = float(t)
        self.h = float(h)
        self.kernel = kernel
        self.sigma_n = default_teleport(n) if sigma_n is None else float(sigma_n)
        self.refresh_every = int(refresh_every)
        self.tol = float(tol)
        self.max_iter = int(max_iter)
        self.win_mass = np.zeros((n, n))
        self.updates_since_refresh = 0
        self.P: TransitionMatrix
        self.pi: ScoreVector
        self.Ainv: GroupInverse
        refresh(self)

    @classmethod
    def from_dataset(
        cls,
        dataset: ComparisonDataset,
        t: float,
        h: float,
        kernel: Kernel,
        sigma_n: float | None = None,
        refresh_every: int = 500,
        tol: float = 1e-10,
        max_iter: int = 100_000,
    ) -> "OnlineState":
        state = cls.__new__(cls)
        state.n = dataset.n
        state.t = float(t)
        state.h = float(h)
        state.kernel = kernel
        state.sigma_n = default_teleport(dataset.n) if sigma_n is None else float(sigma_n)
        state.refresh_every = int(refresh_every)
        state.tol = float(tol)
        state.max_iter = int(max_iter)
        wm = np.zeros((dataset.n, dataset.n))
        for (i, j), times, outs in dataset.pairs():
            w = kernel.weight(t, times, h)
            wm[j, i] += float(w[outs == 1].sum())
            wm[i, j] += float(w[outs == 0].sum())
        state.win_mass = wm
        state.updates_since_refresh = 0
        refresh(state)
        return state

    @classmethod
    def from_empty(
        cls,
        n: int,
        t: float,
        h: float,
        kernel: Kernel,
        sigma_n: float | None = None,
        refresh_every: int = 500,
    ) -> "OnlineState":
        """Cold start with no data; requires sigma_n > 0 for irreducibility."""
        return cls(n, t, h, kernel, sigma_n=sigma_n, refresh_every=refresh_every)


def refresh(state: OnlineState) -> OnlineState:
    """Recompute chain, stationary vector, and group inverse from scratch."""
    raw = _transition_from_mass(state.win_mass)
    state.P = regularize(raw, state.sigma_n)
    sv = stationary(state.P, tol=state.tol, max_iter=state.max_iter)
    state.pi = ScoreVector(sv.scores, t=state.t)
    state.Ainv = group_inverse(state.P, state.pi)
    state.updates_since_refresh = 0
    return state


def apply_observation(state: OnlineState, record) -> OnlineState:
    """Fold one comparison record into the running state.

    Records whose kernel weight at the state's evaluation time is zero
    leave the state untouched.  Otherwise rows i and j of P change in
    their diagonal and (i, j) / (j, i) entries and the stationary vector
    and group inverse are updated in closed form.  For a pair that already
    carries mass the two off-diagonal moves are equal and opposite; the
    first in-window record of a pair also lifts the pair sum from its
    teleport floor, so both deltas are computed directly.
    """
    if isinstance(record, tuple):
        record = ComparisonRecord(*record)
    rec = record.canonical()
    i, j, y = rec.item_i, rec.item_j, rec.outcome
    if not (0 <= i < state.n and 0 <= j < state.n):
        raise RosterError(
            f"record items ({i}, {j}) outside roster of size {state.n}"
        )
    w = float(state.kernel.weight(state.t, rec.time, state.h))
    if w == 0.0:
        return state

    n, sigma = state.n, state.sigma_n
    wm = state.win_mass
    had_mass = (wm[i, j] + wm[j, i]) > 0.0
    if y == 1:
        wm[j, i] += w
    else:
        wm[i, j] += w
    frac = wm[j, i] / (wm[i, j] + wm[j, i])
    p_new_ij = (1.0 - sigma) * (frac / n) + sigma / n
    p_new_ji = (1.0 - sigma) * ((1.0 - frac) / n) + sigma / n
    P = state.P.entries
    d_ij = P[i, j] - p_new_ij
    d_ji = P[j, i] - p_new_ji

    # With prior mass the pair's off-diagonal sum is pinned, so row j's
    # entry must move exactly opposite to row i's.
    if had_mass and abs(d_ji + d_ij) > _MIRROR_SLACK:
        raise RuntimeError(
            f"pair complement drift: {d_ji + d_ij:.3e} beyond slack"
        )
    delta_i = np.zeros(n)
    delta_i[j] = d_ij
    delta_i[i] = -d_ij
    delta_j = np.zeros(n)
    delta_j[i] = d_ji
    delta_j[j] = -d_ji

    try:
        pi_1, G_1 = rank_one_update(state.pi, state.Ainv, delta_i, i)
        pi_2, G_2 = rank_one_update(pi_1, G_1, delta_j, j)
    except UpdateBreakdownError:
        # The masses already include the new record; rebuilding from them
        # is always exact.
        return refresh(state)

    _apply_entries(P, i, j, p_new_ij, p_new_ji, d_ij, d_ji)
    state.pi = ScoreVector(pi_2.scores, t=state.t)
    state.Ainv = G_2
    state.updates_since_refresh += 1
    if state.updates_since_refresh >= state.refresh_every or np.min(pi_2.scores) <= 0:
        refresh(state)
    return state


def _apply_entries(
    P: np.ndarray,
    i: int,
    j: int,
    p_new_ij: float,
    p_new_ji: float,
    d_ij: float,
    d_ji: float,
) -> None:
    P[i, j] = p_new_ij
    P[i, i] += d_ij
    P[j, i] = p_new_ji
    P[j, j] += d_ji
