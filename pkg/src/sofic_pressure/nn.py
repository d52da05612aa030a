"""q-symbol homogeneous tree-indexed Markov chains under nearest-neighbor
interactions, their pressures, and a generic belief-propagation solver.

An interaction on the degree-2r tree is a single-site energy vector B and a
symmetric edge-energy matrix Jmat; the energy assigned to a site is
B(x_e) + sum_i Jmat(x_e, x_{s_i}) over the r forward generators. A chain is
a site marginal p together with one row-stochastic kernel per generator,
each preserving p. Its pressure splits into per-edge terms

    P_f = [(1 - 2r) H(X_e) - E B(X_e)] + sum_i [H(X_e, X_i) - E Jmat(X_e, X_i)]

which equals the conditional-entropy form
(1 - r) H(X_e) + sum_i H(X_i | X_e) - E[energy] by the chain rule. Because
the edge terms decouple, swapping every kernel for the one with the largest
edge term never lowers the pressure (`homogenize`).

Gibbs chains are parametrized by a log-message field h on the q symbols: the
iteration

    h(a) <- -B(a) + (2r - 1) * log sum_b exp(h(b) - Jmat(a, b))

has the Gibbs chains as its fixed points, and any field (fixed point or not)
induces a reversible chain through the symmetric edge law
pi(a, b) proportional to exp(h(a) - Jmat(a, b) + h(b)). The Ising chain
family corresponds to q = 2 with field difference h(+1) - h(-1) = 2t.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp, xlogy

_ROW_SUM_TOL = 1e-12
_STATIONARITY_TOL = 1e-9
_SUPPORT_EPS = 1e-15
_MAX_BP_ITER = 200_000


class BPDivergenceError(RuntimeError):
    """Belief-propagation iteration failed to reach a consistent chain."""

    def __init__(self, message, iterations, last_delta, residual=None):
        super().__init__(message)
        self.iterations = iterations
        self.last_delta = last_delta
        self.residual = residual


def _entropy(weights):
    """Shannon entropy in nats, zero cells contributing zero."""
    w = np.asarray(weights, dtype=float)
    return float(-xlogy(w, w).sum())


@dataclass(frozen=True, eq=False)
class NNInteraction:
    """Nearest-neighbor interaction: site energies B, edge energies Jmat.

    The optional {0,1} matrix M restricts the support to pairs with
    M[a, b] = 1 (a hard-constraint shift); it is validated against chains
    but does not change any pressure formula.
    """

    q: int
    B: np.ndarray
    Jmat: np.ndarray
    r: int
    M: np.ndarray | None = None

    def __post_init__(self):
        if self.q < 2:
            raise ValueError(f"alphabet size q must be >= 2, got {self.q!r}")
        if self.r < 1:
            raise ValueError(f"rank r must be >= 1, got {self.r!r}")
        B = np.asarray(self.B, dtype=float)
        Jmat = np.asarray(self.Jmat, dtype=float)
        if B.shape != (self.q,):
            raise ValueError(f"B must have shape ({self.q},), got {B.shape}")
        if Jmat.shape != (self.q, self.q):
            raise ValueError(f"Jmat must have shape ({self.q}, {self.q}), got {Jmat.shape}")
        if not np.allclose(Jmat, Jmat.T, rtol=0.0, atol=1e-12):
            raise ValueError("Jmat must be symmetric (undirected edges)")
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "Jmat", 0.5 * (Jmat + Jmat.T))
        if self.M is not None:
            M = np.asarray(self.M)
            if M.shape != (self.q, self.q):
                raise ValueError(f"M must have shape ({self.q}, {self.q}), got {M.shape}")
            if not np.isin(M, (0, 1)).all():
                raise ValueError("M entries must be 0 or 1")
            if not np.array_equal(M, M.T):
                raise ValueError("M must be symmetric")
            if not M.any(axis=1).all():
                raise ValueError("every row of M needs at least one allowed pair")
            object.__setattr__(self, "M", M.astype(np.int8))

    def check_support(self, chain):
        """Reject chains whose kernels put mass on pairs forbidden by M."""
        if self.M is None:
            return
        for i, K in enumerate(chain.K):
            if ((K > _SUPPORT_EPS) & (self.M == 0)).any():
                raise ValueError(f"kernel {i} puts mass on a pair forbidden by M")


@dataclass(frozen=True, eq=False)
class NNChain:
    """Site marginal p and one row-stochastic kernel per generator.

    Each kernel must preserve p (p @ K_i = p), so every directed edge law
    p(a) K_i(a, b) has both marginals equal to p.
    """

    p: np.ndarray
    K: tuple

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        if p.ndim != 1 or p.size < 2:
            raise ValueError("p must be a probability vector over >= 2 symbols")
        if (p < 0).any() or abs(p.sum() - 1.0) > _ROW_SUM_TOL:
            raise ValueError("p must be nonnegative and sum to 1")
        kernels = tuple(np.asarray(K, dtype=float) for K in self.K)
        if not kernels:
            raise ValueError("need at least one kernel")
        for i, K in enumerate(kernels):
            if K.shape != (p.size, p.size):
                raise ValueError(f"kernel {i} has shape {K.shape}, expected {(p.size, p.size)}")
            if (K < 0).any() or np.abs(K.sum(axis=1) - 1.0).max() > _ROW_SUM_TOL:
                raise ValueError(f"kernel {i} rows must be nonnegative and sum to 1")
            if np.abs(p @ K - p).max() > _STATIONARITY_TOL:
                raise ValueError(f"kernel {i} does not preserve the marginal p")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "K", kernels)

    @property
    def q(self):
        return self.p.size

    @property
    def r(self):
        return len(self.K)

    def edge_law(self, i):
        """Joint law p(a) K_i(a, b) of the directed edge along generator i."""
        return self.p[:, None] * self.K[i]

    def reverse_kernel(self, i):
        """Kernel of the edge traversed backwards: p(b) K_i(b, a) / p(a)."""
        pi = self.edge_law(i)
        with np.errstate(divide="ignore", invalid="ignore"):
            rk = np.where(self.p[:, None] > 0, pi.T / self.p[:, None], 0.0)
        # rows with p(a) = 0 never occur; keep them stochastic anyway
        dead = self.p <= 0
        if dead.any():
            rk[dead] = 1.0 / self.q
        return rk


def _check_dims(chain, inter):
    if chain.q != inter.q or chain.r != inter.r:
        raise ValueError(
            f"chain ({chain.q} symbols, {chain.r} kernels) does not match "
            f"interaction ({inter.q} symbols, rank {inter.r})"
        )
    inter.check_support(chain)


def mean_energy(chain, inter):
    """E B(X_e) + sum_i E Jmat(X_e, X_i) under the chain."""
    _check_dims(chain, inter)
    total = float(chain.p @ inter.B)
    for i in range(chain.r):
        total += float((chain.edge_law(i) * inter.Jmat).sum())
    return total


def f_pressure_nn(chain, inter):
    """Pressure in the per-edge decomposition.

    (1 - 2r) H(X_e) - E B(X_e) plus one term H(X_e, X_i) - E Jmat(X_e, X_i)
    per generator.
    """
    _check_dims(chain, inter)
    total = (1 - 2 * chain.r) * _entropy(chain.p) - float(chain.p @ inter.B)
    for term in _edge_terms(chain, inter):
        total += term
    return total


def f_pressure_nn_conditional(chain, inter):
    """Pressure in the conditional-entropy form (must agree with f_pressure_nn).

    (1 - r) H(X_e) + sum_i H(X_i | X_e) minus the mean energy.
    """
    _check_dims(chain, inter)
    cond = sum(
        float(np.dot(chain.p, [-xlogy(row, row).sum() for row in chain.K[i]]))
        for i in range(chain.r)
    )
    return (1 - chain.r) * _entropy(chain.p) + cond - mean_energy(chain, inter)


def _edge_terms(chain, inter):
    return [
        _entropy(chain.edge_law(i)) - float((chain.edge_law(i) * inter.Jmat).sum())
        for i in range(chain.r)
    ]


def homogenize(chain, inter):
    """Use the kernel with the largest edge term for every generator.

    Ties break toward the lowest generator index; the returned chain never
    has smaller pressure than the input.
    """
    _check_dims(chain, inter)
    best = int(np.argmax(_edge_terms(chain, inter)))
    return NNChain(p=chain.p, K=(chain.K[best],) * chain.r)


def chain_from_field(h, inter):
    """Reversible chain induced by a log-message field h.

    The symmetric edge law is pi(a, b) ~ exp(h(a) - Jmat(a, b) + h(b)); the
    marginal is its row sum and the kernel its row normalization. Constant
    shifts of h are gauge and do not change the chain.
    """
    h = np.asarray(h, dtype=float)
    if h.shape != (inter.q,):
        raise ValueError(f"field must have shape ({inter.q},), got {h.shape}")
    log_pi = h[:, None] + h[None, :] - inter.Jmat
    # row-wise normalization in log space keeps kernels stochastic even when
    # strongly suppressed symbols underflow in the global normalization
    log_rows = logsumexp(log_pi, axis=1)
    K = np.exp(log_pi - log_rows[:, None])
    K /= K.sum(axis=1, keepdims=True)
    p = np.exp(log_rows - logsumexp(log_rows))
    return NNChain(p=p / p.sum(), K=(K,) * inter.r)


def star_conditional_residual(chain, inter):
    """Worst-case gap between star conditionals of the chain and the Gibbs law.

    For every assignment of symbols to the 2r neighbor slots of a site
    (forward kernels on the first r slots, reverse kernels on the rest), the
    chain conditional of the center is compared with the Boltzmann
    conditional proportional to exp(-B(a) - sum_j Jmat(a, y_j)); returns the
    maximum absolute probability difference.
    """
    _check_dims(chain, inter)
    q, r = chain.q, chain.r
    with np.errstate(divide="ignore"):
        log_p = np.log(chain.p)
        slot_logk = [np.log(chain.K[i]) for i in range(r)]
        slot_logk += [np.log(chain.reverse_kernel(i)) for i in range(r)]
    worst = 0.0
    for pattern in itertools.product(range(q), repeat=2 * r):
        log_joint = log_p + sum(slot_logk[j][:, y] for j, y in enumerate(pattern))
        if not np.isfinite(log_joint).any():
            continue  # pattern has chain probability zero; nothing to compare
        chain_cond = np.exp(log_joint - logsumexp(log_joint))
        log_boltz = -inter.B - inter.Jmat[:, list(pattern)].sum(axis=1)
        boltz_cond = np.exp(log_boltz - logsumexp(log_boltz))
        worst = max(worst, float(np.abs(chain_cond - boltz_cond).max()))
    return worst


def _bp_step(h, inter):
    new = -inter.B + (2 * inter.r - 1) * logsumexp(h[None, :] - inter.Jmat, axis=1)
    return new - new.max()


def solve_bp_field(inter, init_field, tol=1e-12, max_iter=_MAX_BP_ITER):
    """Iterate the message map to a fixed field, damping if it oscillates.

    Returns the converged field (gauge-fixed to max 0). Raises
    BPDivergenceError when the field change has not dropped below the field
    tolerance within max_iter sweeps.
    """
    if not tol > 0:
        raise ValueError(f"tol must be > 0, got {tol!r}")
    h = np.asarray(init_field, dtype=float)
    if h.shape != (inter.q,):
        raise ValueError(f"init_field must have shape ({inter.q},), got {h.shape}")
    h = h - h.max()
    field_tol = min(1e-13, tol * 1e-2)
    damp = 0.0
    prev_delta = None
    size = math.inf
    for iteration in range(1, max_iter + 1):
        new = _bp_step(h, inter)
        delta = new - h
        size = float(np.abs(delta).max())
        if size <= field_tol:
            return new
        if prev_delta is not None and float(np.dot(delta, prev_delta)) < 0.0:
            damp = 0.5  # 2-cycle near criticality: switch to damped updates
        h = h + (1.0 - damp) * delta if damp else new
        h = h - h.max()
        prev_delta = delta
    raise BPDivergenceError(
        f"no fixed field after {max_iter} iterations (last change {size:.3e})",
        iterations=max_iter,
        last_delta=size,
    )


def solve_markov_gibbs(inter, init_field, tol=1e-10):
    """Converge the message iteration and certify the resulting chain.

    The returned homogeneous chain has star-conditional residual <= tol;
    otherwise BPDivergenceError carries the diagnostics.
    """
    h = solve_bp_field(inter, init_field, tol=tol)
    chain = chain_from_field(h, inter)
    residual = star_conditional_residual(chain, inter)
    if not residual <= tol:
        raise BPDivergenceError(
            f"converged field fails the star-conditional check ({residual:.3e} > {tol:.1e})",
            iterations=-1,
            last_delta=0.0,
            residual=residual,
        )
    return chain


def family_direction(q, family_index):
    """Field direction of family j: the top j symbols tilted against the rest."""
    if not 1 <= family_index <= q - 1:
        raise ValueError(f"family_index must be in [1, {q - 1}], got {family_index!r}")
    v = np.zeros(q)
    v[q - family_index:] = 1.0
    return v - family_index / q


def potts_family_curve(inter, t_grid, family_index, tol=1e-10):
    """Pressure along the one-parameter family of fields for one symbol tilt.

    The field h(t) = h_sym + 2 t * direction passes through the symmetric
    solution at t = 0, and for q = 2 it reproduces the Ising chain family
    (field difference 2t between the two symbols). The t = 0 anchor chain is
    certified against the star-conditional residual at tolerance tol.
    Returns (t, pressure) pairs in grid order.
    """
    direction = family_direction(inter.q, family_index)
    h_sym = solve_bp_field(inter, np.zeros(inter.q), tol=tol)
    anchor_residual = star_conditional_residual(chain_from_field(h_sym, inter), inter)
    if not anchor_residual <= tol:
        raise BPDivergenceError(
            f"symmetric anchor fails the star-conditional check "
            f"({anchor_residual:.3e} > {tol:.1e})",
            iterations=-1,
            last_delta=0.0,
            residual=anchor_residual,
        )
    curve = []
    for t in t_grid:
        chain = chain_from_field(h_sym + 2.0 * float(t) * direction, inter)
        curve.append((float(t), f_pressure_nn(chain, inter)))
    return curve


def potts_interaction(q, J, r):
    """Ferromagnetic Potts-type interaction in the symmetric +-J convention.

    Equal symbols on an edge carry energy -J, distinct ones +J; at q = 2 this
    is exactly the Ising edge energy -J * ab for spins a, b in {-1, +1}. It
    differs from the 0/-J convention only by the constant J per edge, which
    shifts every pressure by r J without changing any curve shape or
    fixed-point structure.
    """
    if not J > 0:
        raise ValueError(f"J must be > 0, got {J!r}")
    return NNInteraction(q=q, B=np.zeros(q), Jmat=J * (np.ones((q, q)) - 2.0 * np.eye(q)), r=r)


def ising_interaction(params):
    """The two-symbol interaction matching `ising`, states ordered (-1, +1)."""
    J = params.J
    return NNInteraction(
        q=2,
        B=np.zeros(2),
        Jmat=np.array([[-J, J], [J, -J]]),
        r=params.r,
    )


def nn_chain_from_ising(chain):
    """Translate an `ising.IsingChain` into an NNChain with r equal kernels."""
    return NNChain(
        p=chain.marginal,
        K=(chain.transition_matrix,) * chain.params.r,
    )


def ising_field(t):
    """Two-symbol field with difference 2t, matching the boundary parameter t."""
    return np.array([-float(t), float(t)])
