import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from privsense import metrology as mt
from privsense import qcore as qc
from privsense.errors import InvariantError, NoInformationError, SingularPointError


def kron_generator(n, mu, g=np.diag([0, 1])):
    """Full-space operator for a local generator, built with explicit Kronecker products."""
    ops = [np.eye(2)] * n
    ops[mu] = g
    out = np.array([[1.0]])
    for o in ops:
        out = np.kron(out, o)
    return out


def covariance_oracle(psi, n):
    gs = [kron_generator(n, mu) for mu in range(n)]
    mean = [np.vdot(psi, g @ psi).real for g in gs]
    q = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            q[i, j] = 4 * (np.vdot(psi, gs[i] @ gs[j] @ psi).real - mean[i] * mean[j])
    return q


class TestEncodingFamily:
    def test_rejects_non_unit_a(self):
        with pytest.raises(InvariantError):
            mt.phase_encoding(2, a=[1, 1])

    def test_rejects_zero_entry(self):
        with pytest.raises(InvariantError):
            mt.phase_encoding(2, a=[1, 0])

    def test_mean_mode_allows_non_unit(self):
        enc = mt.mean_encoding(3)
        np.testing.assert_allclose(enc.unit_a, np.ones(3) / math.sqrt(3))

    def test_g_must_use_every_bit(self):
        with pytest.raises(InvariantError):
            mt.EncodingFamily(n=2, a=np.ones(2) / math.sqrt(2), generators=(mt.PROJECTOR_ONE,) * 2,
                              g=lambda bits: bits[0])

    def test_channel_must_be_identity_at_zero(self):
        def bad(slot, theta):
            return qc.depolarizing_channel(0.5)

        with pytest.raises(InvariantError):
            mt.EncodingFamily(n=2, a=np.ones(2) / math.sqrt(2), channels=bad)


class TestEncodeState:
    def test_zero_is_identity(self, rng):
        rho = qc.random_density_matrix(8, rng)
        out = mt.encode_state(rho, mt.phase_encoding(3), np.zeros(3))
        np.testing.assert_allclose(out.matrix, rho.matrix, atol=1e-14)

    def test_ghz2_quarter_turns(self):
        out = mt.encode_state(qc.ghz_state(2), mt.phase_encoding(2), [math.pi / 2, math.pi / 2])
        # |00> + e^{-i pi}|11> (generator |1><1| with exp(-i theta H))
        psi = np.array([1, 0, 0, np.exp(-1j * math.pi)]) / math.sqrt(2)
        np.testing.assert_allclose(out.matrix, np.outer(psi, psi.conj()), atol=1e-12)
        assert out.matrix[0, 3] == pytest.approx(-0.5)

    def test_plus_plus_pi(self):
        out = mt.encode_state(qc.plus_state(2), mt.phase_encoding(2), [math.pi, math.pi])
        minus = np.array([1, -1]) / math.sqrt(2)
        np.testing.assert_allclose(out.matrix, np.outer(np.kron(minus, minus), np.kron(minus, minus)), atol=1e-12)


class TestStateDerivative:
    def test_commuting_case(self):
        rho = qc.DensityMatrix(np.diag([0.4, 0.3, 0.2, 0.1]))
        d = mt.state_derivative(rho, mt.phase_encoding(2), [0.3, 0.7], 1)
        np.testing.assert_allclose(d, 0, atol=1e-14)

    def test_plus_by_hand(self):
        enc = mt.EncodingFamily(n=1, a=[1.0], generators=(mt.PROJECTOR_ONE,))
        d = mt.state_derivative(qc.plus_state(1), enc, [0.0], 1)
        np.testing.assert_allclose(d, 0.5 * np.array([[0, 1j], [-1j, 0]]), atol=1e-14)

    def test_ghz_derivatives_coincide(self):
        rho, enc = qc.ghz_state(3), mt.phase_encoding(3)
        theta = [0.1, 0.5, 1.2]
        ders = [mt.state_derivative(rho, enc, theta, mu) for mu in (1, 2, 3)]
        for d in ders[1:]:
            assert qc.trace_norm(d - ders[0]) < 1e-12

    def test_matches_finite_difference(self, rng):
        enc = mt.phase_encoding(3)
        for _ in range(10):
            rho = qc.random_density_matrix(8, rng)
            theta = rng.uniform(0, 2 * math.pi, 3)
            for mu in (1, 2, 3):
                exact = mt.state_derivative(rho, enc, theta, mu)
                fd = mt.finite_difference_derivative(rho, enc, theta, mu, 1e-5)
                assert np.linalg.norm(exact - fd) <= 1e-3 * np.linalg.norm(exact)
                assert qc.is_hermitian(exact, 1e-12)
                assert abs(np.trace(exact)) < 1e-12

    def test_channel_without_fallback(self):
        def ch(slot, theta):
            return qc.unitary_channel(np.diag([1, np.exp(-1j * theta)]))

        enc = mt.EncodingFamily(n=2, a=np.ones(2) / math.sqrt(2), channels=ch)
        with pytest.raises(InvariantError):
            mt.state_derivative(qc.plus_state(2), enc, [0, 0], 1)
        d = mt.state_derivative(qc.plus_state(2), enc, [0, 0], 1, allow_finite_difference=True)
        exact = mt.state_derivative(qc.plus_state(2), mt.phase_encoding(2), [0, 0], 1)
        np.testing.assert_allclose(d, exact, atol=1e-8)


class TestQfim:
    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_ghz_all_ones(self, n):
        q = mt.qfim(qc.ghz_state(n), mt.phase_encoding(n), np.zeros(n))
        np.testing.assert_allclose(q, covariance_oracle(qc.ghz_ket(n), n), atol=1e-12)
        np.testing.assert_allclose(q, np.ones((n, n)), atol=1e-8)

    @pytest.mark.parametrize("n", [2, 3])
    def test_product_plus_identity(self, n):
        q = mt.qfim(qc.plus_state(n), mt.phase_encoding(n), np.zeros(n))
        np.testing.assert_allclose(q, np.eye(n), atol=1e-8)

    def test_maximally_mixed_zero(self):
        q = mt.qfim(qc.maximally_mixed(3), mt.phase_encoding(3), [0.2, 0.4, 0.6])
        np.testing.assert_allclose(q, 0, atol=1e-14)

    def test_covariance_formula_examples(self):
        np.testing.assert_allclose(mt.qfim_pure_covariance(qc.ghz_state(3), mt.phase_encoding(3), np.zeros(3)),
                                   np.ones((3, 3)), atol=1e-12)
        np.testing.assert_allclose(mt.qfim_pure_covariance(qc.basis_state([0, 0, 0]), mt.phase_encoding(3),
                                                           np.zeros(3)), 0, atol=1e-14)
        np.testing.assert_allclose(mt.qfim_pure_covariance(qc.plus_state(3), mt.phase_encoding(3), np.zeros(3)),
                                   np.eye(3), atol=1e-12)

    def test_covariance_rejects_mixed(self):
        with pytest.raises(InvariantError):
            mt.qfim_pure_covariance(qc.maximally_mixed(2), mt.phase_encoding(2), np.zeros(2))

    def test_oracle_equivalence_random_pure(self, rng):
        for n in (2, 3):
            for _ in range(25):
                psi = qc.random_pure_state(2**n, rng)
                theta = rng.uniform(0, 2 * math.pi, n)
                enc = mt.phase_encoding(n)
                q = mt.qfim(psi, enc, theta)
                np.testing.assert_allclose(q, mt.qfim_pure_covariance(psi, enc, theta), atol=1e-8)
                mt.check_qfim(q)

    def test_constant_under_unitary_encoding(self, rng):
        rho = qc.random_density_matrix(8, rng)
        enc = mt.phase_encoding(3)
        q0 = mt.qfim(rho, enc, np.zeros(3))
        for _ in range(5):
            np.testing.assert_allclose(mt.qfim(rho, enc, rng.uniform(0, 2 * math.pi, 3)), q0, atol=1e-8)

    def test_bures_metric_consistency(self, rng):
        enc = mt.phase_encoding(3)
        h = 1e-3
        for _ in range(20):
            psi = qc.random_pure_state(8, rng)
            theta = rng.uniform(0, 2 * math.pi, 3)
            u = rng.normal(size=3)
            u /= np.linalg.norm(u)
            q = mt.qfim(psi, enc, theta)
            db = qc.state_metrics(mt.encode_state(psi, enc, theta), mt.encode_state(psi, enc, theta + h * u)).D_B
            assert db**2 / (0.25 * u @ q @ u * h * h) == pytest.approx(1, abs=1e-2)


class TestClassicalFisher:
    def test_parity_law(self):
        n = 3

        def law(x):
            c = math.cos(n * x)
            return [(1 + c) / 2, (1 - c) / 2]

        assert mt.classical_fisher(law, math.pi / (2 * n)) == pytest.approx(n * n, abs=1e-6)

    def test_parity_law_from_simulated_distribution(self):
        n = 3
        rho, enc = qc.ghz_state(n), mt.mean_encoding(n)

        def law(x):
            p0 = mt.combined_bit_probability(rho, enc, np.full(n, x))
            return [p0, 1 - p0]

        assert mt.classical_fisher(law, math.pi / (2 * n)) == pytest.approx(9, abs=1e-6)

    def test_constant(self):
        assert mt.classical_fisher(lambda x: [0.3, 0.7], 1.0) == 0

    def test_toy_distribution(self):
        def toy(x):
            return [0.5 + 0.1 * math.cos(x), 0.5 - 0.1 * math.cos(x)]

        # sin^2 / 100 / (p0 p1) at theta = pi/2
        assert mt.classical_fisher(toy, math.pi / 2) == pytest.approx(0.04, abs=1e-8)

    def test_singular(self):
        with pytest.raises(SingularPointError):
            mt.classical_fisher(lambda x: [(1 + math.cos(x)) / 2, (1 - math.cos(x)) / 2], 0.0)


class TestPrivacyMeasure:
    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_ghz_fully_private(self, n):
        assert mt.privacy_measure(np.ones((n, n)), np.ones(n) / math.sqrt(n)) == pytest.approx(1)

    def test_identity(self, rng):
        a = rng.normal(size=4)
        assert mt.privacy_measure(np.eye(4), a / np.linalg.norm(a)) == pytest.approx(0.25)

    def test_aligned(self):
        a = np.array([0.6, 0.8])
        assert mt.privacy_measure(2.5 * np.outer(a, a), a) == pytest.approx(1)

    def test_sign_invariance_and_range(self, rng):
        for _ in range(20):
            g = rng.normal(size=(3, 3))
            q = g @ g.T
            a = rng.normal(size=3)
            a /= np.linalg.norm(a)
            p = mt.privacy_measure(q, a)
            assert 0 <= p <= 1
            assert mt.privacy_measure(q, -a) == pytest.approx(p)

    def test_no_information(self):
        with pytest.raises(NoInformationError):
            mt.privacy_measure(np.zeros((2, 2)), np.ones(2) / math.sqrt(2))

    def test_bugalho_epsilon(self):
        assert mt.bugalho_epsilon(1) == 0
        assert mt.bugalho_epsilon(0) == 1
        assert mt.bugalho_epsilon(0.5) == pytest.approx(0.86603, abs=1e-5)
        with pytest.raises(InvariantError):
            mt.bugalho_epsilon(1.2)


class TestHassani:
    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_ghz_zero(self, n):
        for mode in ("pairwise", "commutator"):
            e = mt.hassani_epsilon(qc.ghz_state(n), mt.mean_encoding(n), np.zeros(n), mode)
            np.testing.assert_allclose(e, 0, atol=1e-12)

    def test_diagonal_commuting(self):
        rho = qc.DensityMatrix(np.diag([0.4, 0.3, 0.2, 0.1]))
        e = mt.hassani_epsilon(rho, mt.phase_encoding(2), np.zeros(2), "commutator")
        np.testing.assert_allclose(e, 0, atol=1e-14)

    def test_modes_agree_on_plus_plus(self):
        rho, enc = qc.plus_state(2), mt.phase_encoding(2)
        pw = mt.hassani_epsilon(rho, enc, np.zeros(2), "pairwise")
        cm = mt.hassani_epsilon(rho, enc, np.zeros(2), "commutator")
        np.testing.assert_allclose(pw, cm, atol=1e-8)
        # oracle: d1 - d2 = -i[G1 - G2, rho], eigenvalue trace norm via explicit matrices
        g = kron_generator(2, 0) - kron_generator(2, 1)
        c = -1j * (g @ rho.matrix - rho.matrix @ g)
        assert pw[0, 1] == pytest.approx(np.sum(np.abs(np.linalg.eigvalsh(c))), abs=1e-12)

    def test_matrix_properties(self, rng):
        rho = qc.random_density_matrix(8, rng)
        e = mt.hassani_epsilon(rho, mt.phase_encoding(3), rng.uniform(0, 6, 3))
        np.testing.assert_allclose(e, e.T)
        np.testing.assert_allclose(np.diag(e), 0)
        assert np.all(e >= 0)

    def test_mode_mismatch(self):
        enc = mt.EncodingFamily(n=2, a=np.ones(2) / math.sqrt(2),
                                channels=lambda s, t: qc.unitary_channel(np.diag([1, np.exp(-1j * t)])))
        with pytest.raises(InvariantError):
            mt.hassani_epsilon(qc.plus_state(2), enc, np.zeros(2), "commutator")


def brute_force_fit(q, a, points=400001):
    """Dense scan; the optimum lies between the extreme entry ratios q_ij / (a_i a_j)."""
    ratios = q / np.outer(a, a)
    ks = np.linspace(ratios.min(), ratios.max(), points)
    res = np.max(np.abs(q[None] - ks[:, None, None] * np.outer(a, a)[None]), axis=(1, 2))
    i = int(np.argmin(res))
    return ks[i], res[i]


class TestAlignmentFit:
    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_ghz_exact(self, n):
        fit = mt.qfim_alignment_fit(np.ones((n, n)), np.ones(n) / math.sqrt(n))
        assert fit.k_star == pytest.approx(n, abs=1e-8)
        assert fit.eps_star == pytest.approx(0, abs=1e-8)

    def test_identity_two(self):
        fit = mt.qfim_alignment_fit(np.eye(2), np.ones(2) / math.sqrt(2))
        assert fit.k_star == pytest.approx(1, abs=1e-8)
        assert fit.eps_star == pytest.approx(0.5, abs=1e-8)

    def test_aligned(self):
        a = np.array([0.6, 0.8])
        fit = mt.qfim_alignment_fit(3.3 * np.outer(a, a), a)
        assert fit == pytest.approx((3.3, 0), abs=1e-8)

    def test_random_against_grid(self, rng):
        for _ in range(5):
            g = rng.normal(size=(3, 3))
            q = g @ g.T
            a = rng.normal(size=3)
            a /= np.linalg.norm(a)
            k_bf, e_bf = brute_force_fit(q, a)
            fit = mt.qfim_alignment_fit(q, a)
            assert fit.eps_star <= e_bf + 1e-12
            assert fit.eps_star == pytest.approx(e_bf, abs=1e-2)


class TestAlignmentBound:
    def test_zero(self):
        assert mt.alignment_bound(3, 0.0, 3.0).stated == 0

    def test_two_party(self):
        b = mt.alignment_bound(2, 0.5, 2.0)
        assert b.stated == pytest.approx(0.5)
        assert b.chain == pytest.approx(0.86603, abs=1e-5)

    def test_three_party(self):
        assert mt.alignment_bound(3, 0.1, 3.0).stated == pytest.approx(0.1)

    def test_chain_undefined_above_one(self):
        assert mt.alignment_bound(3, 2.0, 1.0).chain is None

    def test_trace_positive(self):
        with pytest.raises(NoInformationError):
            mt.alignment_bound(2, 0.1, 0.0)


class TestCompleteBasis:
    def test_e1(self):
        np.testing.assert_allclose(mt.complete_basis([1.0, 0, 0]), np.eye(3))

    def test_two_by_hand(self):
        A = mt.complete_basis(np.ones(2) / math.sqrt(2))
        np.testing.assert_allclose(A[:, 1], np.array([1, -1]) / math.sqrt(2))

    def test_random_orthogonal(self, rng):
        for _ in range(50):
            n = int(rng.integers(2, 6))
            a = rng.normal(size=n)
            a /= np.linalg.norm(a)
            A = mt.complete_basis(a)
            assert np.max(np.abs(A.T @ A - np.eye(n))) <= 1e-10
            assert np.max(np.abs(A[:, 0] - a)) <= 1e-12
            np.testing.assert_array_equal(A, mt.complete_basis(a))


class TestReparametrize:
    def test_identity(self, rng):
        q = rng.normal(size=(3, 3))
        np.testing.assert_allclose(mt.reparametrize_qfim(q, np.eye(3)), q)

    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_ghz_concentrates(self, n):
        A = mt.complete_basis(np.ones(n) / math.sqrt(n))
        out = mt.reparametrize_qfim(np.ones((n, n)), A)
        expected = np.zeros((n, n))
        expected[0, 0] = n
        np.testing.assert_allclose(out, expected, atol=1e-9)

    def test_trace_invariance(self, rng):
        for _ in range(20):
            g = rng.normal(size=(4, 4))
            q = g @ g.T
            b, _ = np.linalg.qr(rng.normal(size=(4, 4)))
            assert np.trace(mt.reparametrize_qfim(q, b)) == pytest.approx(np.trace(q), abs=1e-9)


class TestEquivalentClassDistance:
    @pytest.mark.parametrize("n", [2, 3])
    def test_ghz_zero(self, n):
        res = mt.equivalent_class_distance(qc.ghz_state(n), mt.mean_encoding(n), seed=1)
        assert res.value == pytest.approx(0, abs=1e-6)
        assert not res.exhausted

    def test_plus_plus_orthogonal(self):
        enc = mt.phase_encoding(2)
        res = mt.equivalent_class_distance(qc.plus_state(2), enc, seed=1)
        assert res.value == pytest.approx(1, abs=1e-6)
        theta, theta2 = res.argmax
        # displacement lies in the equivalence class
        d = np.mod(theta2 - theta + math.pi, 2 * math.pi) - math.pi
        assert enc.unit_a @ d == pytest.approx(0, abs=1e-9) or abs(enc.unit_a @ d) == pytest.approx(
            math.sqrt(2) * math.pi, abs=1e-6)
        t = qc.trace_distance(mt.encode_state(qc.plus_state(2), enc, theta),
                              mt.encode_state(qc.plus_state(2), enc, theta2))
        assert t == pytest.approx(res.value, abs=1e-12)

    def test_maximally_mixed(self):
        res = mt.equivalent_class_distance(qc.maximally_mixed(2), mt.phase_encoding(2), seed=1)
        assert res.value == pytest.approx(0, abs=1e-12)

    def test_deterministic(self, rng):
        rho = qc.random_density_matrix(8, rng)
        r1 = mt.equivalent_class_distance(rho, mt.phase_encoding(3), seed=5)
        r2 = mt.equivalent_class_distance(rho, mt.phase_encoding(3), seed=5)
        assert r1.value == r2.value
        np.testing.assert_array_equal(r1.argmax[1], r2.argmax[1])

    def test_budget_flag(self):
        res = mt.equivalent_class_distance(qc.plus_state(2), mt.phase_encoding(2),
                                           budget=mt.SearchBudget(max_evaluations=10), seed=1)
        assert res.exhausted and res.evaluations == 10
        assert 0 <= res.value <= 1


class TestMultiRound:
    def test_zero(self):
        assert all(mt.multi_round_bound(0, n) == 0 for n in (1, 5, 100))

    def test_one(self):
        assert mt.multi_round_bound(1, 7) == 1

    def test_value(self):
        # direct evaluation of sqrt(1 - 0.99**10)
        assert mt.multi_round_bound(0.1, 10) == pytest.approx(0.3092214821, abs=1e-9)

    @given(st.floats(0, 1), st.integers(1, 50))
    @settings(max_examples=200, deadline=None)
    def test_monotone_and_single_round(self, eps, n):
        assert mt.multi_round_bound(eps, 1) == pytest.approx(eps, abs=1e-15)
        assert mt.multi_round_bound(eps, n + 1) >= mt.multi_round_bound(eps, n)
        assert mt.multi_round_bound(min(eps + 0.01, 1), n) >= mt.multi_round_bound(eps, n)

    def test_range(self):
        with pytest.raises(InvariantError):
            mt.multi_round_bound(1.5, 2)
        with pytest.raises(InvariantError):
            mt.multi_round_bound(0.5, 0)


class TestSampling:
    def test_ghz_parity_law(self):
        n = 3
        rho, enc = qc.ghz_state(n), mt.mean_encoding(n)
        for x in np.linspace(0, math.pi, 7):
            p0 = mt.combined_bit_probability(rho, enc, np.full(n, x / n))
            assert p0 == pytest.approx(0.5 * (1 + math.cos(x)), abs=1e-12)

    def test_sampler_shape_and_frequency(self, rng):
        rho, enc = qc.ghz_state(3), mt.mean_encoding(3)
        bits = mt.sample_outcomes(rho, enc, np.zeros(3), 1000, rng)
        assert bits.shape == (1000, 3)
        assert np.all(bits.sum(axis=1) % 2 == 0)

    def test_estimator_inverts_law(self):
        for x in (0.1, 0.5, 1.0):
            assert mt.estimate_mean_phase(0.5 * (1 + math.cos(3 * x)), 3) == pytest.approx(x)
