"""Closed-form observables for the one-parameter Ising chain family on a
free-group Cayley tree.

The tree is the Cayley graph of the rank-r free group, so every vertex has
degree 2r. The coupling J > 0 is ferromagnetic, the external field is zero,
and the inverse temperature is absorbed into J. States are ordered (-1, +1)
throughout and all entropies are in nats.

For a boundary-field parameter t, the chain mu_t has

    alpha(t) = P{spin = -1} = (e^{-2J} + e^{-2t}) / (2 e^{-2J} + 2 cosh 2t)
    beta(t)  = P{+1 -> -1}  = 1 / (e^{2(J+t)} + 1)

and transition matrix (rows: from -1, from +1)

    [ 1 - beta(-t)   beta(-t)   ]
    [ beta(t)        1 - beta(t) ]

The stationary distribution of that matrix is (alpha, 1-alpha); detailed
balance alpha * beta(-t) = (1-alpha) * beta(t) holds identically in t.

Per-chain quantities:

    energy        u      = -J r (1 + 2 alpha [beta(t) - beta(-t)] - 2 beta(t))
    f-invariant   f      = (1-r) H(alpha) + r [alpha H(beta(-t)) + (1-alpha) H(beta(t))]
    f-pressure    P_f    = f - u
    edge entropy  H_edge = alpha H(beta(-t)) + (1-alpha) H(beta(t))
    edge pressure P_edge = H_edge - u

where H is the binary entropy function. The second derivative of
t -> P_f(mu_t) at t = 0 has the closed form

    (tanh J + 1) ((2r - 1) tanh J - 1),

which changes sign exactly at the uniqueness threshold (see `bp`).

alpha and beta are evaluated through logistic/log-sum-exp forms so that
large |t| or J cannot overflow: e^{2(J+t)} itself overflows already near
J + t = 355 in double precision, and the consistency roots grow linearly
in J.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit, xlogy

_DETAILED_BALANCE_TOL = 1e-12


def binary_entropy(p):
    """Binary entropy -p log p - (1-p) log(1-p) in nats; H(0) = H(1) = 0."""
    return -xlogy(p, p) - xlogy(1.0 - p, 1.0 - p)


@dataclass(frozen=True)
class IsingParams:
    """Coupling strength J > 0 and free-group rank r >= 1 (tree degree 2r)."""

    J: float
    r: int

    def __post_init__(self):
        if not (isinstance(self.r, (int, np.integer)) and self.r >= 1):
            raise ValueError(f"rank r must be an integer >= 1, got {self.r!r}")
        if not (math.isfinite(self.J) and self.J > 0):
            raise ValueError(f"coupling J must be finite and > 0, got {self.J!r}")


@dataclass(frozen=True)
class IsingChain:
    """One member mu_t of the chain family, with its marginal and kernel data.

    beta_plus is beta(t) (flip probability out of +1) and beta_minus is
    beta(-t) (flip probability out of -1).
    """

    t: float
    alpha: float
    beta_plus: float
    beta_minus: float
    params: IsingParams

    def __post_init__(self):
        # the probabilities live in (0, 1) for finite t, but saturate to the
        # endpoints in double precision once |t| or J is large; the entropy
        # convention H(0) = H(1) = 0 keeps every observable well defined there
        for name in ("alpha", "beta_plus", "beta_minus"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"{name} = {v!r} outside [0, 1]")
        resid = abs(self.alpha * self.beta_minus - (1.0 - self.alpha) * self.beta_plus)
        if resid > _DETAILED_BALANCE_TOL:
            raise ValueError(f"detailed-balance residual {resid:.3e} exceeds 1e-12")

    @property
    def marginal(self):
        """Single-site marginal (P{-1}, P{+1})."""
        return np.array([self.alpha, 1.0 - self.alpha])

    @property
    def transition_matrix(self):
        """Row-stochastic kernel, rows and columns ordered (-1, +1)."""
        return np.array([
            [1.0 - self.beta_minus, self.beta_minus],
            [self.beta_plus, 1.0 - self.beta_plus],
        ])

    @property
    def edge_marginal(self):
        """Joint law of the two endpoints of one edge, entries (s, s')."""
        a = self.alpha
        return np.array([
            [a * (1.0 - self.beta_minus), a * self.beta_minus],
            [(1.0 - a) * self.beta_plus, (1.0 - a) * (1.0 - self.beta_plus)],
        ])


@dataclass(frozen=True)
class PressureReport:
    """Named scalar bundle for one chain.

    f_pressure = f_invariant - energy and edge_pressure = edge_entropy - energy,
    exactly as computed from the other fields.
    """

    energy: float
    f_invariant: float
    f_pressure: float
    edge_entropy: float
    edge_pressure: float


def _log_beta(t, J):
    # log beta(t) = -log(1 + e^{2(J+t)}), stable for any magnitude of J + t
    return -np.logaddexp(0.0, 2.0 * (J + t))


def beta(t, params):
    """Flip probability beta(t) = 1 / (e^{2(J+t)} + 1), monotone decreasing in t."""
    return float(expit(-2.0 * (params.J + t)))


def alpha(t, params):
    """Probability alpha(t) of spin -1 at a single site.

    Computed as the logistic of log beta(t) - log beta(-t), which equals the
    textbook ratio (e^{-2J} + e^{-2t}) / (2 e^{-2J} + 2 cosh 2t) but never
    overflows.
    """
    J = params.J
    return float(expit(_log_beta(t, J) - _log_beta(-t, J)))


def build_mu_t(t, params):
    """Construct the chain mu_t for the given boundary field t."""
    return IsingChain(
        t=float(t),
        alpha=alpha(t, params),
        beta_plus=beta(t, params),
        beta_minus=beta(-t, params),
        params=params,
    )


def energy_density(chain):
    """Specific energy u(mu_t), in [-Jr, Jr].

    The expected product of adjacent spins is
    1 + 2 alpha [beta(t) - beta(-t)] - 2 beta(t); each of the 2r edges at a
    site contributes half its energy -J * (spin product) to that site.
    """
    p = chain.params
    corr = (
        1.0
        + 2.0 * chain.alpha * (chain.beta_plus - chain.beta_minus)
        - 2.0 * chain.beta_plus
    )
    return -p.J * p.r * corr


def edge_entropy(chain):
    """Conditional entropy of one edge endpoint given the other (nats)."""
    return float(
        chain.alpha * binary_entropy(chain.beta_minus)
        + (1.0 - chain.alpha) * binary_entropy(chain.beta_plus)
    )


def f_invariant(chain):
    """f-invariant of the chain: (1-r) H(alpha) + r * (edge conditional entropy).

    This is the Markov-chain specialization of the general formula
    (1-r) H(site) + sum_i H(site | neighbor along generator i); all r
    generators share one kernel here.
    """
    r = chain.params.r
    return float((1 - r) * binary_entropy(chain.alpha) + r * edge_entropy(chain))


def f_pressure(chain):
    """f-pressure P_f = f_invariant - energy."""
    return f_invariant(chain) - energy_density(chain)


def pressure_report(chain):
    """All five scalar observables of one chain in a single bundle."""
    u = energy_density(chain)
    f = f_invariant(chain)
    h_edge = edge_entropy(chain)
    return PressureReport(
        energy=u,
        f_invariant=f,
        f_pressure=f - u,
        edge_entropy=h_edge,
        edge_pressure=h_edge - u,
    )


def d2_pressure_at_zero(params):
    """Closed-form second derivative of t -> P_f(mu_t) at t = 0.

    Equals (tanh J + 1)((2r-1) tanh J - 1): negative below the uniqueness
    threshold, zero at it, positive above it.
    """
    th = math.tanh(params.J)
    return (th + 1.0) * ((2 * params.r - 1) * th - 1.0)


def d1_pressure_fd(params, h=1e-4):
    """Central first difference of t -> P_f(mu_t) at t = 0 with step h."""
    _check_step(h)
    return (f_pressure(build_mu_t(h, params)) - f_pressure(build_mu_t(-h, params))) / (
        2.0 * h
    )


def d2_pressure_fd(params, h=1e-4):
    """Central second difference of t -> P_f(mu_t) at t = 0 with step h."""
    _check_step(h)
    p0 = f_pressure(build_mu_t(0.0, params))
    pp = f_pressure(build_mu_t(h, params))
    pm = f_pressure(build_mu_t(-h, params))
    return (pp - 2.0 * p0 + pm) / (h * h)


def _check_step(h):
    if not (0.0 < h <= 1e-2):
        raise ValueError(f"finite-difference step h must be in (0, 1e-2], got {h!r}")
