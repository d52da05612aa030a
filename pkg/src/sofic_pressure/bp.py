"""Scalar consistency equation for the homogeneous Ising chains, and the two
critical couplings.

A chain mu_t is a Gibbs state for the interaction exactly when t solves

    t = (2r - 1)/2 * log( cosh(t + J) / cosh(t - J) ).

t = 0 always solves this. Above the uniqueness threshold

    J_uniq(r) = arctanh(1 / (2r - 1))

a symmetric pair of nonzero solutions t_+, t_- = -t_+ appears. The second
threshold

    J_rec(r) = arctanh((2r - 1)^{-1/2})

marks where the t = 0 chain stops being tail-trivial. Rank r = 1 makes both
thresholds infinite (the tree is a line); the threshold functions return
+inf and emit `DegenerateRankWarning` in that case.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

_BRACKET_SEED = 1e-6
_BISECT_STEPS = 200


class DegenerateRankWarning(UserWarning):
    """Raised-as-warning marker for rank-1 threshold queries."""


@dataclass(frozen=True)
class FixedPointSet:
    """Roots of the consistency equation for one (J, r).

    t_plus and t_minus are both present or both absent, with
    t_minus = -t_plus. residuals maps each returned root to |t - rhs(t)|.
    """

    t_zero: float = 0.0
    t_plus: float | None = None
    t_minus: float | None = None
    residuals: dict = field(default_factory=dict)


def _log_cosh(x):
    # log cosh x = |x| + log1p(e^{-2|x|}) - log 2; safe for any |x|
    ax = abs(x)
    return ax + math.log1p(math.exp(-2.0 * ax)) - math.log(2.0)


def fixed_point_rhs(t, params):
    """Right-hand side (2r-1)/2 * log(cosh(t+J)/cosh(t-J)).

    Odd in t and bounded by (2r-1) J in absolute value.
    """
    J = params.J
    return (2 * params.r - 1) / 2.0 * (_log_cosh(t + J) - _log_cosh(t - J))


def uniqueness_threshold(r):
    """arctanh(1/(2r-1)); below it t = 0 is the only Gibbs chain."""
    _check_rank(r)
    if r == 1:
        warnings.warn("rank-1 uniqueness threshold is +inf", DegenerateRankWarning)
        return math.inf
    return math.atanh(1.0 / (2 * r - 1))


def reconstruction_threshold(r):
    """arctanh((2r-1)^{-1/2}); tail-triviality of the t = 0 chain ends here."""
    _check_rank(r)
    if r == 1:
        warnings.warn("rank-1 reconstruction threshold is +inf", DegenerateRankWarning)
        return math.inf
    return math.atanh((2 * r - 1) ** -0.5)


def _check_rank(r):
    if not (isinstance(r, (int, np.integer)) and r >= 1):
        raise ValueError(f"rank r must be an integer >= 1, got {r!r}")


def solve_fixed_points(params, tol=1e-12):
    """Find all roots of the consistency equation for the given parameters.

    t = 0 is always returned. The positive root is bracketed by a geometric
    scan of g(t) = rhs(t) - t on (0, (2r-1)J] and refined by bisection; the
    negative root is its mirror image. The scan is defensive: if more than
    one sign change shows up (not expected for this rhs) a RuntimeWarning
    reports it and the smallest root is kept.
    """
    if not tol > 0:
        raise ValueError(f"tol must be > 0, got {tol!r}")
    if params.r < 1:
        raise ValueError(f"rank r must be >= 1, got {params.r!r}")

    residuals = {0.0: abs(fixed_point_rhs(0.0, params))}
    if params.r == 1 or params.J <= uniqueness_threshold(params.r):
        return FixedPointSet(residuals=residuals)

    g = lambda t: fixed_point_rhs(t, params) - t
    t_max = (2 * params.r - 1) * params.J

    # g > 0 just above 0 (supercritical slope), g < 0 at t_max; walk the
    # geometric grid and note every + -> - crossing.
    grid = [_BRACKET_SEED]
    while grid[-1] < t_max:
        grid.append(min(grid[-1] * 2.0, t_max))
    values = [g(t) for t in grid]
    brackets = [
        (grid[i], grid[i + 1])
        for i in range(len(grid) - 1)
        if values[i] > 0.0 >= values[i + 1]
    ]
    if not brackets:
        # supercritical but the seed already sits past the root: widen down
        brackets = [(0.0, t_max)] if g(t_max) < 0 else []
    if len(brackets) > 1:
        warnings.warn(
            f"consistency equation shows {len(brackets)} sign changes on (0, {t_max:g}]",
            RuntimeWarning,
        )
    lo, hi = brackets[0]
    for _ in range(_BISECT_STEPS):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if g(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    t_plus = 0.5 * (lo + hi)
    residuals[t_plus] = abs(g(t_plus))
    residuals[-t_plus] = abs(fixed_point_rhs(-t_plus, params) + t_plus)
    return FixedPointSet(t_plus=t_plus, t_minus=-t_plus, residuals=residuals)


def gibbs_conditional_residual(chain):
    """Worst-case gap between the chain's star conditionals and the Boltzmann law.

    For every count k of +1 spins among the 2r neighbors of a site, compare
    P{center = +1 | neighbors} under the chain's joint star law with
    e^{JS} / (e^{JS} + e^{-JS}) where S = 2k - 2r is the neighbor spin sum.
    The maximum absolute difference is zero exactly at consistency roots.
    """
    p = chain.params
    deg = 2 * p.r
    # log-likelihood contributions of a single +1 / -1 neighbor to center = +1;
    # saturated chains (entries that rounded to 0 or 1) give infinite log odds,
    # which expit maps to the correct limits
    with np.errstate(divide="ignore", invalid="ignore"):
        lr_plus = float(np.log1p(-chain.beta_plus) - np.log(chain.beta_minus))
        lr_minus = float(np.log(chain.beta_plus) - np.log1p(-chain.beta_minus))
        base = float(np.log(1.0 - chain.alpha) - np.log(chain.alpha))
    worst = 0.0
    for k in range(deg + 1):
        log_odds = base
        if k:
            log_odds += k * lr_plus
        if k < deg:
            log_odds += (deg - k) * lr_minus
        p_chain = expit(log_odds)
        p_gibbs = expit(2.0 * p.J * (2 * k - deg))
        worst = max(worst, abs(float(p_chain) - float(p_gibbs)))
    return worst
