"""Permutation-model simulator: random homomorphisms into Sym(n), exact
small-n partition functions and good-model counts, the exact annealed count,
Monte Carlo second moments, Glauber dynamics, and the coexistence-weight
experiment.

A sofic map is r permutations of {0..n-1}; vertex v is joined to sigma_i(v)
for each generator i (self-loops are allowed and carry energy -J, matching
the per-site energy formula). A spin configuration x in {-1,+1}^n has total
energy

    U(x) = -J * sum_i sum_v x_v x_{sigma_i(v)}.

Good models of a chain are counted through depth-1 statistics: x is a good
model at tolerance eps if, for every generator, the empirical pair
distribution of (x_v, x_{sigma_i(v)}) is within total-variation distance eps
of the chain's edge marginal. For a permutation the (+,-) and (-,+) pair
counts coincide, so the per-generator profile is determined by the number of
plus spins m and the discordant-pair count k; the number of permutations
inducing a given (m, k) profile is C(m,k) C(n-m,k) m! (n-m)!, which makes
the expected count over uniformly random homomorphisms an exact
log-gamma-arithmetic sum (`annealed_count_exact`).

Exact enumerations refuse n > 28; Monte Carlo over sigma samples and Glauber
dynamics cover larger sizes. All randomness flows through counter-based
Philox streams keyed by (seed, index) so that runs are bit-reproducible and
parallel workers get disjoint streams; Monte Carlo aggregation always
reduces in sample-index order.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numba import njit
from scipy.special import expit, gammaln, logsumexp

ENUM_MAX_N = 28
EXHAUSTIVE_MAX_N = 5
_CHUNK_BITS = 20


def _check_enum(n, what="exact enumeration"):
    if n > ENUM_MAX_N:
        raise ValueError(
            f"{what} is limited to n <= {ENUM_MAX_N} (got n = {n}); "
            "use glauber_run for larger systems"
        )


def _rng(seed):
    """Philox generator from an int seed, a SeedSequence, or a Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    return np.random.Generator(np.random.Philox(seed))


def _stream(seed, *index):
    """Disjoint deterministic substream for one worker/sample index."""
    return _rng(np.random.SeedSequence((int(seed),) + tuple(int(i) for i in index)))


@dataclass(frozen=True, eq=False)
class SoficMap:
    """A homomorphism of the rank-r free group into Sym(n): r permutations."""

    n: int
    perms: tuple

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n!r}")
        perms = tuple(np.asarray(p, dtype=np.int64) for p in self.perms)
        if not perms:
            raise ValueError("need at least one permutation")
        ident = np.arange(self.n)
        for i, p in enumerate(perms):
            if p.shape != (self.n,) or not np.array_equal(np.sort(p), ident):
                raise ValueError(f"perms[{i}] is not a permutation of 0..{self.n - 1}")
        object.__setattr__(self, "perms", perms)

    @property
    def r(self):
        return len(self.perms)


def sample_hom(n, r, seed):
    """Uniformly random homomorphism: r independent uniform permutations."""
    if n < 1 or r < 1:
        raise ValueError(f"need n >= 1 and r >= 1, got n={n!r}, r={r!r}")
    rng = _rng(seed)
    return SoficMap(n=n, perms=tuple(rng.permutation(n) for _ in range(r)))


@dataclass(frozen=True)
class TypeProfile:
    """Per-generator pair counts (a_pp, a_pm, a_mp, a_mm) of one (sigma, x).

    Both orders of each pair count the directed edges v -> sigma_i(v); since
    sigma_i is a bijection the row and column sums both equal (n_plus,
    n - n_plus), forcing a_pm = a_mp.
    """

    n: int
    n_plus: int
    pair_counts: tuple

    def __post_init__(self):
        for i, (pp, pm, mp, mm) in enumerate(self.pair_counts):
            ok = (
                pp + pm == self.n_plus
                and mp + mm == self.n - self.n_plus
                and pp + mp == self.n_plus
                and pm + mm == self.n - self.n_plus
            )
            if not ok:
                raise ValueError(f"pair counts of generator {i} violate the sum rules")


def type_profile(sigma, x):
    """Empirical depth-1 profile of configuration x over sigma."""
    x = _as_spins(sigma.n, x)
    plus = x > 0
    counts = []
    for p in sigma.perms:
        to_plus = plus[p]
        pp = int(np.count_nonzero(plus & to_plus))
        pm = int(np.count_nonzero(plus & ~to_plus))
        mp = int(np.count_nonzero(~plus & to_plus))
        mm = int(np.count_nonzero(~plus & ~to_plus))
        counts.append((pp, pm, mp, mm))
    return TypeProfile(n=sigma.n, n_plus=int(np.count_nonzero(plus)), pair_counts=tuple(counts))


def _as_spins(n, x):
    x = np.asarray(x)
    if x.shape != (n,):
        raise ValueError(f"spin configuration must have length {n}, got shape {x.shape}")
    if not np.isin(x, (-1, 1)).all():
        raise ValueError("spins must be -1 or +1")
    return x.astype(np.int8)


def total_energy(sigma, x, J):
    """U(x) = -J * sum_i sum_v x_v x_{sigma_i(v)}; lies in [-Jrn, Jrn]."""
    x = _as_spins(sigma.n, x)
    s = sum(int(np.dot(x, x[p].astype(np.int64))) for p in sigma.perms)
    return -J * s


@lru_cache(maxsize=2)
def _spin_table(n):
    """All 2^n configurations as a read-only (2^n, n) array over {-1, +1}."""
    idx = np.arange(1 << n, dtype=np.uint32)
    bits = (idx[:, None] >> np.arange(n, dtype=np.uint32)[None, :]) & np.uint32(1)
    table = (2 * bits.astype(np.int8) - 1)
    table.flags.writeable = False
    return table


def _iter_spin_chunks(n):
    """Yield the configuration table in memory-bounded chunks."""
    if n <= _CHUNK_BITS:
        yield _spin_table(n)
        return
    low = _spin_table(_CHUNK_BITS)
    hi_n = n - _CHUNK_BITS
    for h in range(1 << hi_n):
        chunk = np.empty((low.shape[0], n), dtype=np.int8)
        chunk[:, :_CHUNK_BITS] = low
        for b in range(hi_n):
            chunk[:, _CHUNK_BITS + b] = 2 * ((h >> b) & 1) - 1
        yield chunk


def _pair_sum(sigma, X):
    """sum_i sum_v x_v x_{sigma_i(v)} for every row of X."""
    n = sigma.n
    d = np.zeros(X.shape[0], dtype=np.int64)
    for p in sigma.perms:
        d += (X != X[:, p]).sum(axis=1, dtype=np.int64)
    return sigma.r * n - 2 * d


def partition_function_exact(sigma, J):
    """log Z = log sum_x exp(-U(x)) by full enumeration (n <= 28)."""
    _check_enum(sigma.n)
    parts = [logsumexp(J * _pair_sum(sigma, X)) for X in _iter_spin_chunks(sigma.n)]
    return float(logsumexp(parts))


def _admissible_table(n, chain, eps):
    """Boolean table A[m, k]: is the (m, k) profile within TV eps of the chain?

    Profile (m, k) has pair frequencies ((m-k), k, k, (n-m-k)) / n against
    the chain edge marginal in state order (-1, +1). Entries with
    k > min(m, n-m) are not realizable and stay False.
    """
    q = chain.edge_marginal
    m = np.arange(n + 1, dtype=np.int64)[:, None]
    k = np.arange(n // 2 + 1, dtype=np.int64)[None, :]
    tv = 0.5 * (
        np.abs((m - k) / n - q[1, 1])
        + np.abs(k / n - q[1, 0])
        + np.abs(k / n - q[0, 1])
        + np.abs((n - m - k) / n - q[0, 0])
    )
    realizable = (k <= m) & (k <= n - m)
    return realizable & (tv <= eps)


def count_good_models(sigma, chain, eps):
    """Exact number of configurations whose depth-1 statistics are eps-close.

    Closeness is total-variation distance <= eps between the per-generator
    empirical pair frequencies and the chain's edge marginal, for every
    generator.
    """
    _check_enum(sigma.n)
    n = sigma.n
    table = _admissible_table(n, chain, eps)
    total = 0
    for X in _iter_spin_chunks(n):
        m = (X > 0).sum(axis=1, dtype=np.int64)
        ok = np.ones(X.shape[0], dtype=bool)
        for p in sigma.perms:
            k = (X != X[:, p]).sum(axis=1, dtype=np.int64) >> 1
            ok &= table[m, k]
        total += int(np.count_nonzero(ok))
    return total


def annealed_count_exact(n, r, chain, eps):
    """log of the expected good-model count over uniform homomorphisms.

    E|Omega| = sum_m C(n,m) * [sum_k C(m,k) C(n-m,k) m! (n-m)! / n!]^r with
    (m, k) restricted to the eps-ball; evaluated in log-gamma arithmetic so
    n in the thousands stays exact to double precision. Returns -inf when
    the ball contains no realizable profile.
    """
    if n < 1 or r < 1:
        raise ValueError(f"need n >= 1 and r >= 1, got n={n!r}, r={r!r}")
    q = chain.edge_marginal
    lgf = gammaln(np.arange(n + 2, dtype=np.float64))  # lgf[j] = log (j-1)!

    def log_comb(a, b):
        return lgf[a + 1] - lgf[b + 1] - lgf[a - b + 1]

    terms = []
    for m in range(n + 1):
        # admissible k for this m, row by row to keep memory linear in n
        k = np.arange(min(m, n - m) + 1, dtype=np.int64)
        tv = 0.5 * (
            np.abs((m - k) / n - q[1, 1])
            + np.abs(k / n - q[1, 0])
            + np.abs(k / n - q[0, 1])
            + np.abs((n - m - k) / n - q[0, 0])
        )
        ks = k[tv <= eps]
        if ks.size == 0:
            continue
        log_frac = (
            log_comb(m, ks)
            + log_comb(n - m, ks)
            + lgf[m + 1]
            + lgf[n - m + 1]
            - lgf[n + 1]
        )
        terms.append(log_comb(n, m) + r * float(logsumexp(log_frac)))
    if not terms:
        return -math.inf
    return float(logsumexp(terms))


def nearest_profile_eps(n, chain, pad=None):
    """TV radius of the smallest ball holding the nearest lattice profile.

    Returns min_(m,k) TV((m,k)-profile, chain edge marginal) plus a padding
    that defaults to 2/n, so the ball also contains the lattice profiles
    adjacent to the nearest one.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n!r}")
    q = chain.edge_marginal
    m_target = (1.0 - chain.alpha) * n
    k_target = q[1, 0] * n
    best = math.inf
    for m in range(max(0, int(m_target) - 5), min(n, int(m_target) + 5) + 1):
        k_hi = min(m, n - m)
        for k in range(max(0, int(k_target) - 5), min(k_hi, int(k_target) + 5) + 1):
            tv = 0.5 * (
                abs((m - k) / n - q[1, 1])
                + 2.0 * abs(k / n - q[1, 0])
                + abs((n - m - k) / n - q[0, 0])
            )
            best = min(best, tv)
    return best + (2.0 / n if pad is None else pad)


@dataclass(frozen=True)
class SecondMomentResult:
    """First and second moments of the good-model count over random maps."""

    mean_count: float
    mean_square: float
    pz_ratio: float
    se_mean: float
    se_square: float
    samples: int


def _moments(counts):
    counts = np.asarray(counts, dtype=np.float64)
    m = int(counts.size)
    mean = float(counts.mean())
    mean_sq = float((counts**2).mean())
    se_mean = float(counts.std(ddof=1) / math.sqrt(m)) if m > 1 else 0.0
    se_sq = float((counts**2).std(ddof=1) / math.sqrt(m)) if m > 1 else 0.0
    ratio = mean * mean / mean_sq if mean_sq > 0 else 0.0
    return SecondMomentResult(
        mean_count=mean,
        mean_square=mean_sq,
        pz_ratio=ratio,
        se_mean=se_mean,
        se_square=se_sq,
        samples=m,
    )


def _count_task(args):
    n, r, chain, eps, seed, index = args
    return count_good_models(sample_hom(n, r, _stream(seed, index)), chain, eps)


def _map_ordered(fn, tasks, threads):
    if threads <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, tasks))


def second_moment_mc(n, r, chain, eps, samples, seed, exhaustive=False, threads=1):
    """Moments of |Omega| over sigma: Monte Carlo, or exhaustive for n <= 5.

    Exhaustive mode averages over all (n!)^r homomorphisms exactly (the
    samples argument is ignored there). The Paley-Zygmund ratio
    mean^2 / mean-of-squares lower-bounds, up to the (1-theta)^2 factor, the
    probability that the count reaches a fraction theta of its mean.
    """
    if exhaustive:
        if n > EXHAUSTIVE_MAX_N:
            raise ValueError(f"exhaustive mode is limited to n <= {EXHAUSTIVE_MAX_N}")
        return _second_moment_exhaustive(n, r, chain, eps)
    _check_enum(n, "per-sigma counting")
    if samples < 1:
        raise ValueError(f"samples must be >= 1, got {samples!r}")
    tasks = [(n, r, chain, eps, seed, j) for j in range(samples)]
    counts = _map_ordered(_count_task, tasks, threads)
    return _moments(counts)


def _perm_array(n):
    import itertools

    return np.array(list(itertools.permutations(range(n))), dtype=np.int64)


def _second_moment_exhaustive(n, r, chain, eps):
    table = _admissible_table(n, chain, eps)
    X = _spin_table(n)
    perms = _perm_array(n)
    m = (X > 0).sum(axis=1, dtype=np.int64)
    # B[c, p] = profile of config c over permutation p is admissible
    k = (X[:, perms] != X[:, None, :]).sum(axis=2, dtype=np.int64) >> 1
    B = table[m[:, None], k]
    n_perm = float(perms.shape[0])
    per_config = B.sum(axis=1, dtype=np.int64)
    mean = float(((per_config / n_perm) ** r).sum())
    overlap = (B.astype(np.int64) @ B.T.astype(np.int64)) / n_perm
    mean_sq = float((overlap**r).sum())
    ratio = mean * mean / mean_sq if mean_sq > 0 else 0.0
    return SecondMomentResult(
        mean_count=mean,
        mean_square=mean_sq,
        pz_ratio=ratio,
        se_mean=0.0,
        se_square=0.0,
        samples=int(n_perm) ** r,
    )


@dataclass(frozen=True)
class GlauberTrajectory:
    """Recorded magnetization trace: steps[i] updates done, magnetization[i]."""

    steps: np.ndarray
    magnetization: np.ndarray


@njit(cache=True)
def _glauber_chunk(spins, nbr, prob_plus, sites, uniforms, spin_total, deg, step0, record_every, out, rec_pos):
    for i in range(sites.size):
        v = sites[i]
        s = 0
        for j in range(nbr.shape[1]):
            w = nbr[v, j]
            if w >= 0:
                s += spins[w]
        sp = 1 if uniforms[i] < prob_plus[s + deg] else -1
        if sp != spins[v]:
            spin_total += 2 * sp
            spins[v] = sp
        if (step0 + i + 1) % record_every == 0:
            out[rec_pos] = spin_total
            rec_pos += 1
    return spin_total, rec_pos


def heat_bath_prob_plus(J, spin_sum):
    """P{new spin = +1 | neighbor sum} = e^{J S} / (2 cosh(J S))."""
    return float(expit(2.0 * J * spin_sum))


def _neighbor_array(sigma):
    """(n, 2r) neighbor indices per site; self-loop slots are -1.

    Slot order: sigma_1(v)..sigma_r(v), then the inverse images. A 2-cycle
    partner appears in both slots of its generator, matching its doubled
    energy contribution.
    """
    n = sigma.n
    ident = np.arange(n)
    cols = []
    for p in sigma.perms:
        inv = np.argsort(p)
        cols.append(np.where(p == ident, -1, p))
        cols.append(np.where(inv == ident, -1, inv))
    return np.stack(cols, axis=1).astype(np.int64)


def glauber_run(sigma, J, steps, seed, record_every=1, init="plus"):
    """Single-site heat-bath dynamics, recording magnetization periodically.

    Each step picks a uniform site and resamples its spin from the Boltzmann
    conditional given its 2r neighbors (self-loops contribute constant
    energy and are excluded from the local field). The trace contains the
    initial magnetization and one entry per `record_every` completed steps;
    it is a deterministic function of (sigma, J, steps, seed, init).
    """
    if steps < 0:
        raise ValueError(f"steps must be >= 0, got {steps!r}")
    if record_every < 1:
        raise ValueError(f"record_every must be >= 1, got {record_every!r}")
    n = sigma.n
    rng = _rng(seed)
    if isinstance(init, str):
        if init == "plus":
            spins = np.ones(n, dtype=np.int8)
        elif init == "minus":
            spins = -np.ones(n, dtype=np.int8)
        elif init == "random":
            spins = (2 * rng.integers(0, 2, size=n) - 1).astype(np.int8)
        else:
            raise ValueError(f"unknown init {init!r}")
    else:
        spins = _as_spins(n, init).copy()
    nbr = _neighbor_array(sigma)
    deg = 2 * sigma.r
    prob_plus = np.array([heat_bath_prob_plus(J, s - deg) for s in range(2 * deg + 1)])

    n_records = steps // record_every
    totals = np.empty(n_records, dtype=np.int64)
    spin_total = int(spins.sum(dtype=np.int64))
    m0 = spin_total / n
    rec_pos = 0
    done = 0
    chunk = 1 << 20
    while done < steps:
        take = min(chunk, steps - done)
        sites = rng.integers(0, n, size=take, dtype=np.int64)
        uniforms = rng.random(take)
        spin_total, rec_pos = _glauber_chunk(
            spins, nbr, prob_plus, sites, uniforms, spin_total, deg, done, record_every, totals, rec_pos
        )
        done += take
    step_axis = np.concatenate(([0], (1 + np.arange(n_records)) * record_every))
    mags = np.concatenate(([m0], totals[:rec_pos] / n))
    return GlauberTrajectory(steps=step_axis, magnetization=mags)


@dataclass(frozen=True)
class CoexistenceRow:
    """Mean relative Boltzmann weight of the small-magnetization window."""

    n: int
    mean_weight: float
    std_error: float
    samples: int


def _window_weight(sigma, J, eps_m):
    """Boltzmann weight of {|magnetization| <= eps_m} divided by Z, exactly."""
    n = sigma.n
    log_all = []
    log_win = []
    for X in _iter_spin_chunks(n):
        s = J * _pair_sum(sigma, X)
        log_all.append(logsumexp(s))
        window = np.abs(2 * (X > 0).sum(axis=1, dtype=np.int64) - n) <= eps_m * n
        if window.any():
            log_win.append(logsumexp(s[window]))
    if not log_win:
        return 0.0
    return float(np.exp(logsumexp(log_win) - logsumexp(log_all)))


def _coexistence_task(args):
    n, r, J, eps_m, seed, index = args
    return _window_weight(sample_hom(n, r, _stream(seed, n, index)), J, eps_m)


def coexistence_weight(n_list, r, J, eps_m, samples, seed, threads=1):
    """Per-n mean (with standard error) of the restricted-to-total weight ratio.

    For each n, `samples` independent maps are drawn and the exact ratio
    Z(|m| <= eps_m) / Z is averaged; the decreasing trend in n at couplings
    between the two thresholds is the phase-coexistence signature.
    """
    if samples < 1:
        raise ValueError(f"samples must be >= 1, got {samples!r}")
    rows = []
    for n in n_list:
        _check_enum(n, "exact window weighting")
        tasks = [(n, r, J, eps_m, seed, j) for j in range(samples)]
        weights = np.array(_map_ordered(_coexistence_task, tasks, threads))
        se = float(weights.std(ddof=1) / math.sqrt(samples)) if samples > 1 else 0.0
        rows.append(
            CoexistenceRow(n=int(n), mean_weight=float(weights.mean()), std_error=se, samples=samples)
        )
    return rows
