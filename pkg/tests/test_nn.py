"""General nearest-neighbor chains: pressure forms, homogenization, BP."""

import math

import numpy as np
import pytest

from conftest import random_interaction, random_reversible_chain
from sofic_pressure import bp, ising, nn
from sofic_pressure.ising import IsingParams

P05 = IsingParams(J=0.5, r=2)


class TestValidation:
    def test_interaction_rejects_asymmetric_jmat(self):
        with pytest.raises(ValueError):
            nn.NNInteraction(q=2, B=np.zeros(2), Jmat=np.array([[0.0, 1.0], [0.5, 0.0]]), r=2)

    def test_interaction_rejects_bad_shapes(self):
        with pytest.raises(ValueError):
            nn.NNInteraction(q=3, B=np.zeros(2), Jmat=np.zeros((3, 3)), r=2)
        with pytest.raises(ValueError):
            nn.NNInteraction(q=1, B=np.zeros(1), Jmat=np.zeros((1, 1)), r=2)

    def test_constraint_matrix_validation(self):
        good = np.array([[1, 1], [1, 0]])
        nn.NNInteraction(q=2, B=np.zeros(2), Jmat=np.zeros((2, 2)), r=2, M=good)
        with pytest.raises(ValueError):
            nn.NNInteraction(
                q=2, B=np.zeros(2), Jmat=np.zeros((2, 2)), r=2, M=np.array([[0, 1], [0, 1]])
            )
        with pytest.raises(ValueError):
            nn.NNInteraction(
                q=2, B=np.zeros(2), Jmat=np.zeros((2, 2)), r=2, M=np.array([[1, 0], [0, 0]])
            )

    def test_support_check_rejects_forbidden_mass(self):
        hard = nn.NNInteraction(
            q=2, B=np.zeros(2), Jmat=np.zeros((2, 2)), r=2, M=np.array([[1, 1], [1, 0]])
        )
        chain = nn.nn_chain_from_ising(ising.build_mu_t(0.0, P05))
        with pytest.raises(ValueError):
            nn.f_pressure_nn(chain, hard)

    def test_chain_rejects_nonstationary_kernel(self):
        K = np.array([[0.9, 0.1], [0.5, 0.5]])  # stationary dist is (5/6, 1/6)
        with pytest.raises(ValueError):
            nn.NNChain(p=np.array([0.5, 0.5]), K=(K,))

    def test_dimension_mismatch(self):
        chain = nn.nn_chain_from_ising(ising.build_mu_t(0.0, P05))
        inter3 = nn.potts_interaction(3, 0.5, 2)
        with pytest.raises(ValueError):
            nn.f_pressure_nn(chain, inter3)


class TestPressureForms:
    def test_iid_uniform_chain_gives_log_q(self):
        for q, r in ((2, 2), (5, 3)):
            inter = nn.NNInteraction(q=q, B=np.zeros(q), Jmat=np.zeros((q, q)), r=r)
            chain = nn.NNChain(p=np.full(q, 1 / q), K=(np.full((q, q), 1 / q),) * r)
            assert nn.f_pressure_nn(chain, inter) == pytest.approx(math.log(q), rel=1e-14)
            assert nn.f_pressure_nn_conditional(chain, inter) == pytest.approx(
                math.log(q), rel=1e-14
            )

    def test_two_forms_agree_on_random_chains(self, rng):
        for _ in range(120):
            q = int(rng.choice([2, 3, 5]))
            r = int(rng.choice([2, 3]))
            chain = random_reversible_chain(q, r, rng)
            inter = random_interaction(q, r, rng)
            a = nn.f_pressure_nn(chain, inter)
            b = nn.f_pressure_nn_conditional(chain, inter)
            assert abs(a - b) <= 1e-12 * max(1.0, abs(a))

    def test_matches_ising_pressure(self):
        inter = nn.ising_interaction(P05)
        for t in (-1.1, 0.0, 0.45, 2.0):
            ch = ising.build_mu_t(t, P05)
            assert nn.f_pressure_nn(nn.nn_chain_from_ising(ch), inter) == pytest.approx(
                ising.f_pressure(ch), abs=1e-12
            )

    def test_permutation_equivariance(self, rng):
        for _ in range(25):
            q, r = 4, 2
            chain = random_reversible_chain(q, r, rng)
            inter = random_interaction(q, r, rng)
            perm = rng.permutation(q)
            chain_p = nn.NNChain(
                p=chain.p[perm], K=tuple(K[np.ix_(perm, perm)] for K in chain.K)
            )
            inter_p = nn.NNInteraction(
                q=q, B=inter.B[perm], Jmat=inter.Jmat[np.ix_(perm, perm)], r=r
            )
            assert nn.f_pressure_nn(chain_p, inter_p) == pytest.approx(
                nn.f_pressure_nn(chain, inter), abs=1e-12
            )


class TestHomogenize:
    def test_already_homogeneous_unchanged(self):
        chain = nn.nn_chain_from_ising(ising.build_mu_t(0.4, P05))
        result = nn.homogenize(chain, nn.ising_interaction(P05))
        for K in result.K:
            assert np.array_equal(K, chain.K[0])

    def test_never_decreases_pressure(self, rng):
        for _ in range(120):
            q = int(rng.choice([2, 3, 5]))
            r = int(rng.choice([2, 3]))
            chain = random_reversible_chain(q, r, rng)
            inter = random_interaction(q, r, rng)
            before = nn.f_pressure_nn(chain, inter)
            after = nn.f_pressure_nn(nn.homogenize(chain, inter), inter)
            assert after >= before - 1e-12

    def test_picks_larger_edge_term(self, rng):
        q, r = 2, 2
        chain = random_reversible_chain(q, r, rng)
        inter = random_interaction(q, r, rng)
        result = nn.homogenize(chain, inter)
        terms = nn._edge_terms(chain, inter)
        best = int(np.argmax(terms))
        assert np.array_equal(result.K[0], chain.K[best])

    def test_tie_breaks_to_first_kernel(self):
        # two distinct kernels with identical edge terms by symmetry
        chain0 = nn.nn_chain_from_ising(ising.build_mu_t(0.0, P05))
        K = chain0.K[0]
        flipped = K[::-1, ::-1]  # spin-flip image: same joint entropy and energy
        chain = nn.NNChain(p=chain0.p, K=(K, flipped))
        inter = nn.ising_interaction(P05)
        result = nn.homogenize(chain, inter)
        assert np.array_equal(result.K[0], K)


class TestChainFromField:
    def test_reproduces_ising_family(self):
        inter = nn.ising_interaction(P05)
        for t in (-2.0, -0.3, 0.0, 0.7, 1.9):
            built = nn.chain_from_field(nn.ising_field(t), inter)
            target = nn.nn_chain_from_ising(ising.build_mu_t(t, P05))
            assert np.abs(built.p - target.p).max() < 1e-13
            assert np.abs(built.K[0] - target.K[0]).max() < 1e-13

    def test_gauge_invariance(self):
        inter = nn.potts_interaction(3, 0.8, 2)
        h = np.array([0.2, -0.4, 1.0])
        a = nn.chain_from_field(h, inter)
        b = nn.chain_from_field(h + 7.5, inter)
        assert np.abs(a.p - b.p).max() < 1e-12
        assert np.abs(a.K[0] - b.K[0]).max() < 1e-12


class TestSolve:
    def test_ising_plus_state_reproduced(self):
        inter = nn.ising_interaction(P05)
        roots = bp.solve_fixed_points(P05)
        target = nn.nn_chain_from_ising(ising.build_mu_t(roots.t_plus, P05))
        solved = nn.solve_markov_gibbs(inter, np.array([-0.4, 0.4]), tol=1e-10)
        assert np.abs(solved.p - target.p).max() < 1e-8
        assert max(np.abs(K - target.K[0]).max() for K in solved.K) < 1e-8

    def test_symmetric_init_stays_paramagnetic(self):
        inter = nn.potts_interaction(4, 1.0, 2)
        solved = nn.solve_markov_gibbs(inter, np.zeros(4), tol=1e-10)
        assert np.abs(solved.p - 0.25).max() < 1e-12
        assert nn.star_conditional_residual(solved, inter) < 1e-10

    def test_potts_ferromagnetic_state(self):
        inter = nn.potts_interaction(5, 1.2, 2)
        solved = nn.solve_markov_gibbs(inter, nn.family_direction(5, 1), tol=1e-9)
        assert nn.star_conditional_residual(solved, inter) <= 1e-9
        assert solved.p[4] > 0.5  # tilted color dominates

    def test_divergence_reported(self):
        inter = nn.potts_interaction(3, 1.0, 2)
        with pytest.raises(nn.BPDivergenceError) as err:
            nn.solve_bp_field(inter, np.array([0.0, 0.0, 1.0]), tol=1e-10, max_iter=3)
        assert err.value.iterations == 3
        assert err.value.last_delta > 0

    def test_rejects_bad_tol(self):
        inter = nn.potts_interaction(3, 1.0, 2)
        with pytest.raises(ValueError):
            nn.solve_markov_gibbs(inter, np.zeros(3), tol=0.0)


class TestFamilyCurve:
    def test_q2_curve_matches_ising_pointwise(self):
        inter = nn.ising_interaction(P05)
        t_grid = np.linspace(-1.5, 1.5, 41)
        curve = nn.potts_family_curve(inter, t_grid, 1)
        for t, pressure in curve:
            expected = ising.f_pressure(ising.build_mu_t(t, P05))
            assert abs(pressure - expected) <= 1e-10

    def test_zero_point_is_symmetric_solution(self):
        inter = nn.potts_interaction(5, 1.0, 2)
        sym = nn.solve_markov_gibbs(inter, np.zeros(5), tol=1e-10)
        expected = nn.f_pressure_nn(sym, inter)
        for family in range(1, 5):
            (t0, p0), = nn.potts_family_curve(inter, [0.0], family)
            assert t0 == 0.0
            assert p0 == pytest.approx(expected, abs=1e-12)

    def test_critical_point_at_solver_root(self):
        # numerical derivative of the q=2 curve vanishes at t_+
        inter = nn.ising_interaction(P05)
        t_plus = bp.solve_fixed_points(P05).t_plus
        h = 1e-5
        (_, pm), (_, pp) = nn.potts_family_curve(inter, [t_plus - h, t_plus + h], 1)
        assert abs((pp - pm) / (2 * h)) < 1e-6

    def test_potts_critical_points_match_solver(self):
        J = 1.2
        inter = nn.potts_interaction(5, J, 2)
        solved = nn.solve_markov_gibbs(inter, nn.family_direction(5, 1), tol=1e-9)
        # recover the field coordinate along family 1 from the solved kernel:
        # K(4,4)/K(4,0) = e^{2J} m(4)/m(0) with m(4)/m(0) = e^{2t}
        K = solved.K[0]
        t_star = 0.5 * (math.log(K[4, 4] / K[4, 0]) - 2 * J)
        h = 1e-5
        (_, pm), (_, pp) = nn.potts_family_curve(inter, [t_star - h, t_star + h], 1)
        assert abs((pp - pm) / (2 * h)) < 1e-5

    def test_family_index_validation(self):
        inter = nn.potts_interaction(4, 1.0, 2)
        for bad in (0, 4, -1):
            with pytest.raises(ValueError):
                nn.potts_family_curve(inter, [0.0], bad)
