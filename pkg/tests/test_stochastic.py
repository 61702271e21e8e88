import numpy as np
import pytest

from ncopt.finite_sum import (
    LinearLeastSquaresProblem,
    StochasticOracle,
    random_quadratic_finite_sum,
)
from ncopt.stochastic import (
    MomentBounds,
    SafeguardConfig,
    StochasticStepConfig,
    admissible_constant_step,
    apply_safeguards,
    constant_step_mean_square_bound,
    curvature_noise_step,
    dynamic_stochastic_solve,
    expected_descent_check,
    measure_moment_constants,
    two_step_stochastic_solve,
)


def half_x_squared():
    """f(x) = x^2/2 as a two-component finite sum with zero variance."""
    return LinearLeastSquaresProblem(np.array([[1.0], [1.0]]), np.zeros(2))


@pytest.fixture
def noisy_quadratic():
    return random_quadratic_finite_sum(n=10, components=20, seed=314)


class TestStepConfig:
    def test_constant_schedule(self):
        c = StochasticStepConfig(alpha_constant=0.1)
        assert c.alpha(1) == c.alpha(100) == 0.1
        assert c.beta(7) == 0.1

    def test_diminishing_schedule_sums(self):
        c = StochasticStepConfig(diminishing_a=2.0, diminishing_b=5.0, chi=0.5)
        alphas = np.array([c.alpha(k) for k in range(1, 20001)])
        # square-summable: partial sums settle; plain sums keep growing
        assert np.sum(alphas ** 2) <= 2.0 ** 2 * np.pi ** 2 / 6.0
        assert np.sum(alphas) > 10.0
        assert c.beta(9) == pytest.approx(0.5 * c.alpha(9))

    def test_exactly_one_schedule(self):
        with pytest.raises(ValueError):
            StochasticStepConfig()
        with pytest.raises(ValueError):
            StochasticStepConfig(alpha_constant=0.1, diminishing_a=1.0,
                                 diminishing_b=1.0)

    def test_admissibility_check(self):
        moments = MomentBounds(1.0, 1.5, 1.0, 1.5)
        cap = admissible_constant_step(moments, gradient_lipschitz=2.0, delta=1.0)
        assert cap == pytest.approx(1.0 / 6.0)
        StochasticStepConfig(alpha_constant=cap, moment_bounds=moments,
                             gradient_lipschitz=2.0)
        with pytest.raises(ValueError):
            StochasticStepConfig(alpha_constant=2.0 * cap, moment_bounds=moments,
                                 gradient_lipschitz=2.0)


class TestCurvatureNoiseStep:
    def test_spd_estimate_reduces_to_gradient_step(self):
        p = half_x_squared()
        oracle = StochasticOracle(p, batch_size=2, seed=0)
        x_next, record = curvature_noise_step(np.array([3.0]), oracle,
                                              alpha_k=1.0, beta_k=1.0)
        assert record.d_norm == 0.0
        assert record.sampled_lambda == pytest.approx(1.0)
        np.testing.assert_allclose(x_next, [0.0], atol=1e-15)

    def test_replay_with_same_seed_is_identical(self, noisy_quadratic):
        x = noisy_quadratic.default_start
        outs = []
        for _ in range(2):
            oracle = StochasticOracle(noisy_quadratic, batch_size=2, seed=11)
            seq = []
            for _ in range(6):
                x_next, record = curvature_noise_step(x, oracle, alpha_k=0.01,
                                                      beta_k=0.01)
                seq.append((x_next, record.s_norm, record.d_norm, record.omega))
            outs.append(seq)
        for (xa, sa, da, oa), (xb, sb, db, ob) in zip(*outs):
            np.testing.assert_array_equal(xa, xb)
            assert (sa, da, oa) == (sb, db, ob)

    def test_curvature_direction_norm_matches_step(self, noisy_quadratic):
        x = noisy_quadratic.default_start
        oracle = StochasticOracle(noisy_quadratic, batch_size=2, seed=5)
        seen = 0
        for _ in range(40):
            _, record = curvature_noise_step(x, oracle, alpha_k=0.01, beta_k=0.01)
            if record.d_norm > 0.0:
                assert record.d_norm == pytest.approx(record.s_norm, rel=1e-12)
                assert record.sampled_lambda < 0.0
                seen += 1
        assert seen > 0

    def test_omega_noise_has_zero_mean(self, noisy_quadratic):
        oracle = StochasticOracle(noisy_quadratic, batch_size=2, seed=9)
        draws = 100000
        omegas = np.array([oracle.next_omega() for _ in range(draws)])
        d = np.array([1.0, -2.0, 0.5])
        samples = omegas[:, None] * d
        mean_norm = np.linalg.norm(samples.mean(axis=0))
        std = np.linalg.norm(d) * omegas.std(ddof=1)
        assert mean_norm <= 4.0 * std / np.sqrt(draws)


class TestTwoStepStochastic:
    def test_noiseless_constant_step_decays_geometrically(self):
        p = half_x_squared()
        oracle = StochasticOracle(p, batch_size=2, seed=1)
        moments = MomentBounds(1e-12, 1.5, 1e-12, 1.5)
        alpha = admissible_constant_step(moments, gradient_lipschitz=1.0)
        config = StochasticStepConfig(alpha_constant=alpha, moment_bounds=moments,
                                      gradient_lipschitz=1.0)
        report = two_step_stochastic_solve(oracle, config, iterations=50,
                                           x0=np.array([3.0]))
        norms = report.exact_gradient_norms()
        ratio = 1.0 - alpha
        np.testing.assert_allclose(norms, 3.0 * ratio ** np.arange(50), rtol=1e-10)
        # the mean-square bound holds at every prefix length
        for K in (1, 5, 20, 50):
            bound = constant_step_mean_square_bound(
                moments, 1.0, 1.0, alpha, K, initial_gap=4.5
            )
            assert np.mean(norms[:K] ** 2) <= bound

    def test_noisy_mean_square_bound_across_seeds(self, noisy_quadratic):
        p = noisy_quadratic
        L = p.local_gradient_lipschitz
        x0 = p.default_start
        probe = StochasticOracle(p, batch_size=2, seed=7777)
        moments = measure_moment_constants(probe, x0, draws=2000)
        alpha = admissible_constant_step(moments, L)
        config = StochasticStepConfig(alpha_constant=alpha, moment_bounds=moments,
                                      gradient_lipschitz=L)
        K = 400
        gap = p.evaluate(x0) - p.lower_bound
        bound = constant_step_mean_square_bound(moments, L, 1.0, alpha, K, gap)
        means = []
        for seed in range(8):
            oracle = StochasticOracle(p, batch_size=2, seed=seed)
            report = two_step_stochastic_solve(oracle, config, iterations=K, x0=x0)
            means.append(report.mean_square_gradient())
        means = np.array(means)
        stderr = means.std(ddof=1) / np.sqrt(len(means))
        assert means.mean() <= bound + 3.0 * stderr

    def test_solver_replay_bitwise_identical(self, noisy_quadratic):
        config = StochasticStepConfig(alpha_constant=0.02)
        finals = []
        for _ in range(2):
            oracle = StochasticOracle(noisy_quadratic, batch_size=2, seed=3)
            report = two_step_stochastic_solve(oracle, config, iterations=40)
            finals.append(report.final_x)
        np.testing.assert_array_equal(finals[0], finals[1])


class TestSafeguards:
    def test_long_step_scaled_to_cap(self):
        config = SafeguardConfig()
        s, d = apply_safeguards(np.array([20.0, 0.0]), np.zeros(2), 1.0, 1.0, config)
        assert np.linalg.norm(s) == pytest.approx(10.0)

    def test_ratio_rule(self):
        # ||alpha s|| = 2, raw ||beta d|| = 1  ->  d rescaled to norm 0.4
        config = SafeguardConfig()
        s, d = apply_safeguards(np.array([2.0, 0.0]), np.array([0.0, 2.0]),
                                alpha=1.0, beta=0.5, config=config)
        np.testing.assert_allclose(s, [2.0, 0.0])
        assert 0.5 * np.linalg.norm(d) == pytest.approx(0.4)

    def test_idempotent(self):
        config = SafeguardConfig()
        rng = np.random.default_rng(2)
        for _ in range(20):
            s = rng.normal(size=4) * 30.0
            d = rng.normal(size=4) * 30.0
            alpha, beta = rng.uniform(0.01, 2.0, size=2)
            s1, d1 = apply_safeguards(s, d, alpha, beta, config)
            s2, d2 = apply_safeguards(s1, d1, alpha, beta, config)
            np.testing.assert_allclose(s1, s2, rtol=1e-14)
            np.testing.assert_allclose(d1, d2, rtol=1e-14)

    def test_validation(self):
        with pytest.raises(ValueError):
            SafeguardConfig(inflate_factor=1.0)
        with pytest.raises(ValueError):
            SafeguardConfig(max_s_norm=0.0)


class TestDynamicStochastic:
    def test_full_batch_convex_matches_descent_only_twin(self):
        p = half_x_squared()
        runs = []
        for use_curvature in (True, False):
            oracle = StochasticOracle(p, batch_size=2, seed=4)
            report = dynamic_stochastic_solve(
                oracle, SafeguardConfig(L_init=2.0, sigma_init=2.0),
                iterations=30, x0=np.array([5.0]), use_curvature=use_curvature,
            )
            runs.append(report)
        with_c, without_c = runs
        assert not with_c.used_negative_curvature
        np.testing.assert_array_equal(with_c.final_x, without_c.final_x)
        for a, b in zip(with_c.records, without_c.records):
            np.testing.assert_array_equal(a.x, b.x)

    def test_constants_monotone_and_inflate_by_exact_factor(self, noisy_quadratic):
        oracle = StochasticOracle(noisy_quadratic, batch_size=2, seed=8)
        # a single CG iteration leaves the sampled system unsolved, so value
        # estimates do predict increases and exercise both inflations
        report = dynamic_stochastic_solve(
            oracle, SafeguardConfig(L_init=0.05, sigma_init=1.0), iterations=150,
            cg_max_iterations=1,
        )
        Ls = [r.lipschitz_L for r in report.records]
        sigmas = [r.lipschitz_sigma for r in report.records]
        for seq in (Ls, sigmas):
            for a, b in zip(seq, seq[1:]):
                assert b == a or b == pytest.approx(1.2 * a, rel=1e-12)
                assert b >= a
        assert Ls[-1] > Ls[0]  # the noisy run must have triggered inflation

    def test_step_norm_safeguard_active_in_solver(self, noisy_quadratic):
        oracle = StochasticOracle(noisy_quadratic, batch_size=2, seed=21)
        report = dynamic_stochastic_solve(
            oracle, SafeguardConfig(L_init=0.01, sigma_init=0.01, max_s_norm=10.0),
            iterations=40,
        )
        for r in report.records:
            assert r.s_norm <= 10.0 + 1e-12
            assert r.beta * r.d_norm <= 0.2 * r.alpha * r.s_norm + 1e-12

    def test_reverted_steps_follow_value_estimates(self, noisy_quadratic):
        oracle = StochasticOracle(noisy_quadratic, batch_size=2, seed=13)
        report = dynamic_stochastic_solve(
            oracle, SafeguardConfig(L_init=1.0, sigma_init=1.0), iterations=200,
        )
        reverted = [r for r in report.records if r.reverted_curvature_step]
        for r in reverted:
            assert r.value_after_curvature > r.value_after_descent
        kept = [r for r in report.records
                if r.d_norm > 0.0 and not r.reverted_curvature_step]
        for r in kept:
            assert r.value_after_curvature <= r.value_after_descent

    def test_replay_bitwise_identical(self, noisy_quadratic):
        finals = []
        for _ in range(2):
            oracle = StochasticOracle(noisy_quadratic, batch_size=2, seed=99)
            report = dynamic_stochastic_solve(oracle, iterations=60)
            finals.append(report.final_x)
        np.testing.assert_array_equal(finals[0], finals[1])

    def test_cg_first_iteration_case_uses_negative_gradient(self):
        # an indefinite sampled Hessian with p0'Hp0 <= 0 must fall back to -g
        p = random_quadratic_finite_sum(n=4, components=4, seed=5,
                                        spectrum=np.array([0.5, 1.0, 2.0, 3.0]),
                                        perturbation=6.0)
        oracle = StochasticOracle(p, batch_size=1, seed=2)
        report = dynamic_stochastic_solve(oracle, SafeguardConfig(), iterations=50)
        statuses = {r.cg_status for r in report.records}
        assert statuses  # runs recorded a CG status every iteration
        assert all(r.cg_status is not None for r in report.records)


class TestMomentMeasurement:
    def test_envelope_holds_at_measured_point(self, noisy_quadratic):
        p = noisy_quadratic
        x = p.default_start
        oracle = StochasticOracle(p, batch_size=2, seed=55)
        moments = measure_moment_constants(oracle, x, draws=3000)
        g2 = float(p.gradient(x) @ p.gradient(x))
        check = StochasticOracle(p, batch_size=2, seed=56)
        s_sq = []
        for _ in range(3000):
            batch = check.next_gradient_batch()
            s = -p.batch_gradient(x, batch)
            s_sq.append(float(s @ s))
        assert np.mean(s_sq) <= moments.M_s1 + moments.M_s2 * g2
        assert moments.M_d1 == moments.M_s1


class TestExpectedDescentCheck:
    def test_zero_steps_trivial(self, noisy_quadratic):
        config = StochasticStepConfig(alpha_constant=0.0)
        result = expected_descent_check(noisy_quadratic,
                                        noisy_quadratic.default_start,
                                        config, replications=10)
        assert result.empirical_decrease == 0.0
        assert result.bound == 0.0

    def test_noiseless_case_matches_exact_decrease(self):
        p = half_x_squared()
        config = StochasticStepConfig(alpha_constant=0.25, gradient_lipschitz=1.0)
        x = np.array([2.0])
        result = expected_descent_check(p, x, config, replications=50,
                                        batch_size=2, measure_draws=50)
        # d = 0 and no noise: decrease is exactly -alpha*g^2 + 0.5*alpha^2*g^2
        exact = -0.25 * 4.0 + 0.5 * 0.25 ** 2 * 4.0
        assert result.empirical_decrease == pytest.approx(exact, rel=1e-12)
        assert result.empirical_decrease <= result.bound

    def test_noisy_quadratic_bound_holds(self, noisy_quadratic):
        p = noisy_quadratic
        config = StochasticStepConfig(alpha_constant=0.02,
                                      gradient_lipschitz=p.local_gradient_lipschitz)
        result = expected_descent_check(p, p.default_start, config,
                                        replications=3000, seed=77, batch_size=2,
                                        measure_draws=2000)
        assert result.empirical_decrease <= result.bound + 3.0 * result.standard_error
