"""Edge-entropy pressure bound machinery for the zero-field Ising model.

Over any sofic approximation, the entropy of a shift-invariant measure is at
most its smallest conditional edge entropy, so

    P_edge(mu) = H_edge(mu) - u(mu)

bounds the pressure of mu from above while the all-plus point mass delta_+
always attains pressure exactly J r (zero entropy, energy -J r). Whenever

    2 J r > phi(1 + e^{2J}) - phi(e^{2J}),        phi(t) = t log t,

the free-boundary chain therefore has strictly smaller pressure than delta_+
no matter which sofic approximation is used. The simpler decreasing function

    rho(J) = 1 + (1 + e^{-2J}) / (2J)

gives the sufficient condition r > rho(J), which in turn holds whenever
J >= 2 J_uniq(r) or J >= J_rec(r) (r >= 2). This module evaluates the exact
condition, the rho shortcut, the inequality chain behind the two sufficient
conditions, and the minimal multiplier c(r) such that J >= c(r) J_uniq(r)
already implies the exact condition. It also produces the (r, J) region
classification and the pressure-comparison table consumed by the CLI.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import bp, ising

REGION_CLASSES = (
    "unique-Gibbs",
    "nonequilibrium-typical",
    "nonequilibrium-always",
    "undetermined",
)


def phi(t):
    """phi(t) = t log t for t > 0."""
    if not t > 0:
        raise ValueError(f"phi requires t > 0, got {t!r}")
    return t * math.log(t)


def rho(J):
    """rho(J) = 1 + (1 + e^{-2J}) / (2J); decreasing bijection (0,inf) -> (1,inf)."""
    if not J > 0:
        raise ValueError(f"rho requires J > 0, got {J!r}")
    return 1.0 + (1.0 + math.exp(-2.0 * J)) / (2.0 * J)


def phi_gap(J):
    """phi(1 + e^{2J}) - phi(e^{2J}), evaluated without forming e^{2J}.

    With x = e^{-2J} the difference equals 2J + log1p(x) + log1p(x)/x, which
    stays finite in double precision for every J > 0.
    """
    if not J > 0:
        raise ValueError(f"phi_gap requires J > 0, got {J!r}")
    x = math.exp(-2.0 * J)
    lx = math.log1p(x)
    ratio = 1.0 if x == 0.0 else lx / x
    return 2.0 * J + lx + ratio


def delta_plus_pressure(params):
    """Pressure J r of the all-plus point mass (entropy 0, energy -J r)."""
    return params.J * params.r


@dataclass(frozen=True)
class PhiCondition:
    """Outcome of the exact comparison of delta_+ against the t = 0 chain."""

    holds: bool
    margin: float


def delta_plus_beats_fb(params):
    """Exact condition for delta_+ to beat the free-boundary edge pressure.

    Returns the margin 2 J r - [phi(1+e^{2J}) - phi(e^{2J})]; its sign equals
    the sign of J r - P_edge(mu_0), and the condition holds iff it is > 0.
    """
    margin = 2.0 * params.J * params.r - phi_gap(params.J)
    return PhiCondition(holds=margin > 0.0, margin=margin)


@dataclass(frozen=True)
class InequalityCheck:
    """One verified inequality family: worst margin and any failing points."""

    name: str
    passed: bool
    n_points: int
    min_margin: float
    worst_point: float
    failures: tuple


@dataclass(frozen=True)
class InequalityReport:
    checks: tuple

    @property
    def passed(self):
        return all(c.passed for c in self.checks)


def _scan(name, points, lhs_fn, rhs_fn):
    margins = [(float(pt), lhs_fn(pt) - rhs_fn(pt)) for pt in points]
    worst_point, min_margin = min(margins, key=lambda pm: pm[1])
    failures = tuple(pt for pt, m in margins if m <= 0.0)
    return InequalityCheck(
        name=name,
        passed=not failures,
        n_points=len(margins),
        min_margin=min_margin,
        worst_point=worst_point,
        failures=failures,
    )


def verify_noneq_conditions(r_max, grid_points=10_000):
    """Verify the inequality chain behind the two sufficient conditions.

    Checks, for 2 <= r <= r_max and a J-grid on (0, J_rec(2)]:

    - ``rho-at-2juniq``:   r > rho(2 J_uniq(r))
    - ``rearranged``:      2 r (r-1) (r log(r/(r-1)) - 1) > 1
    - ``taylor``:          r log(r/(r-1)) > 1 + 1/(2r)
    - ``hyperbolic``:      4J + 2 > 2 cosh 2J + (e^{-2J} - 1)^2

    Every check is expected to pass; failures are reported with the points
    at which they occur.
    """
    if r_max < 2:
        raise ValueError(f"r_max must be >= 2, got {r_max!r}")
    ranks = range(2, r_max + 1)
    j_hi = bp.reconstruction_threshold(2)
    j_grid = np.linspace(j_hi / grid_points, j_hi, grid_points)
    checks = (
        _scan("rho-at-2juniq", ranks, float, lambda r: rho(2.0 * bp.uniqueness_threshold(r))),
        _scan(
            "rearranged",
            ranks,
            lambda r: 2.0 * r * (r - 1) * (r * math.log(r / (r - 1.0)) - 1.0),
            lambda r: 1.0,
        ),
        _scan(
            "taylor",
            ranks,
            lambda r: r * math.log(r / (r - 1.0)),
            lambda r: 1.0 + 1.0 / (2.0 * r),
        ),
        _scan(
            "hyperbolic",
            j_grid,
            lambda J: 4.0 * J + 2.0,
            lambda J: 2.0 * math.cosh(2.0 * J) + (math.exp(-2.0 * J) - 1.0) ** 2,
        ),
    )
    return InequalityReport(checks=checks)


@dataclass(frozen=True)
class ConstantSearchResult:
    """Minimal multipliers c(r) with J >= c(r) J_uniq(r) implying the exact condition."""

    c_by_r: dict
    sup_c: float
    sup_r: int
    nonincreasing: bool


def minimal_constant_search(r_set, tol=1e-4):
    """Bisect, for each rank, the smallest c with margin(c * J_uniq(r)) > 0.

    The margin of `delta_plus_beats_fb` is strictly increasing in J (its
    J-derivative is 2r - 2 e^{2J} log(1 + e^{-2J}) > 2r - 2), so a single
    sign change exists; that monotonicity is still spot-checked on a grid
    for each rank before the bisection is trusted.
    """
    if tol <= 0:
        raise ValueError(f"tol must be > 0, got {tol!r}")
    c_by_r = {}
    for r in sorted(set(int(r) for r in r_set)):
        if r < 2:
            raise ValueError(f"constant search requires r >= 2, got {r}")
        ju = bp.uniqueness_threshold(r)
        margins = [
            delta_plus_beats_fb(ising.IsingParams(J=c * ju, r=r)).margin
            for c in np.linspace(0.25, 2.5, 64)
        ]
        if any(b - a < -1e-9 for a, b in zip(margins, margins[1:])):
            raise RuntimeError(f"margin not monotone in J at r = {r}; search aborted")
        lo, hi = 1.0, 2.0
        if not delta_plus_beats_fb(ising.IsingParams(J=hi * ju, r=r)).holds:
            raise RuntimeError(f"margin still negative at 2 J_uniq for r = {r}")
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if delta_plus_beats_fb(ising.IsingParams(J=mid * ju, r=r)).holds:
                hi = mid
            else:
                lo = mid
        c_by_r[r] = hi
    sup_r = max(c_by_r, key=c_by_r.get)
    values = [c_by_r[r] for r in sorted(c_by_r)]
    return ConstantSearchResult(
        c_by_r=c_by_r,
        sup_c=c_by_r[sup_r],
        sup_r=sup_r,
        nonincreasing=all(b <= a + tol for a, b in zip(values, values[1:])),
    )


@dataclass(frozen=True)
class RegionPoint:
    """One classified (r, J) point of the region map."""

    r: int
    J: float
    classification: str


def classify_point(r, J):
    """Strongest established status of the free-boundary chain at (r, J).

    Rank 1 is the line, where the t = 0 chain is the unique Gibbs state at
    every coupling. For r >= 2 the order of precedence is: unique below the
    uniqueness threshold; "always" where the exact phi-condition or one of
    its provable relaxations (J >= 2 J_uniq or J >= J_rec) applies; "typical"
    on the remaining tail-trivial couplings; undetermined otherwise.
    """
    if not J > 0:
        raise ValueError(f"J must be > 0, got {J!r}")
    if r == 1:
        return "unique-Gibbs"
    ju = bp.uniqueness_threshold(r)
    if J <= ju:
        return "unique-Gibbs"
    jrec = bp.reconstruction_threshold(r)
    params = ising.IsingParams(J=J, r=r)
    if delta_plus_beats_fb(params).holds or J >= min(2.0 * ju, jrec):
        return "nonequilibrium-always"
    if J <= jrec:
        return "nonequilibrium-typical"
    return "undetermined"


def region_data(r_grid, J_grid):
    """Classify every (r, J) grid point; row order follows the input grids."""
    if len(r_grid) == 0 or len(J_grid) == 0:
        raise ValueError("r_grid and J_grid must be nonempty")
    return [
        RegionPoint(r=int(r), J=float(J), classification=classify_point(int(r), float(J)))
        for r in r_grid
        for J in J_grid
    ]


@dataclass(frozen=True)
class ComparisonRow:
    """Pressure comparison at one coupling: edge bound vs delta_+ vs plus chain."""

    J: float
    edge_pressure_fb: float
    delta_plus_pressure: float
    plus_pressure: float


def figure5_data(r, J_grid):
    """Rows (J, P_edge(mu_0), J r, P_f(mu_{t_+})) over a coupling grid.

    Below the uniqueness threshold the plus chain coincides with t = 0, so
    the last column falls back to the t = 0 pressure there.
    """
    if len(J_grid) == 0:
        raise ValueError("J_grid must be nonempty")
    rows = []
    for J in J_grid:
        if not J > 0:
            raise ValueError(f"J grid values must be > 0, got {J!r}")
        params = ising.IsingParams(J=float(J), r=r)
        report = ising.pressure_report(ising.build_mu_t(0.0, params))
        roots = bp.solve_fixed_points(params)
        t_star = roots.t_plus if roots.t_plus is not None else 0.0
        rows.append(
            ComparisonRow(
                J=float(J),
                edge_pressure_fb=report.edge_pressure,
                delta_plus_pressure=delta_plus_pressure(params),
                plus_pressure=ising.f_pressure(ising.build_mu_t(t_star, params)),
            )
        )
    return rows
