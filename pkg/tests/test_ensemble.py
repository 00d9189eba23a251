import pytest
from pydantic import ValidationError

from defectline.errors import EmptyFitError
from defectline.schemas.ensemble import FitSummary, SweepConfig, SweepResult, SweepRow
from defectline.services.ensemble import fit_rows, run_sweep, scaling_ratio, trial_seed, uncertainty_check


def _result(rows):
    return SweepResult(per_sigma=[SweepRow(sigma=s, mean_t_max=m, n_transients=1) for s, m in rows])


class TestSweepConfig:
    def test_defaults_scale_the_range_with_sigma(self):
        config = SweepConfig(sigmas=[2.0])
        assert config.t_range_for(2.0) == (-12.0, 12.0)
        assert config.s == 1 + 0j

    @pytest.mark.parametrize("sigmas", [[], [2.0, 1.0], [0.0, 1.0]])
    def test_rejects_bad_sigmas(self, sigmas):
        with pytest.raises(ValidationError):
            SweepConfig(sigmas=sigmas)

    def test_rejects_zero_trials(self):
        with pytest.raises(ValidationError):
            SweepConfig(sigmas=[1.0], trials_per_sigma=0)


def test_trial_seeds_are_distinct_and_pairable():
    seeds = {trial_seed(7, i, j) for i in range(3) for j in range(50)}
    assert len(seeds) == 150
    assert trial_seed(7, 0, 4, paired=True) == trial_seed(7, 2, 4, paired=True)
    assert trial_seed(7, 0, 4) != trial_seed(7, 2, 4)


class TestUncertainty:
    def test_exact_line(self):
        assert uncertainty_check(_result([(1.0, 1.6), (2.0, 3.2), (5.0, 8.0)])) == pytest.approx(1.0)

    def test_single_sigma(self):
        assert uncertainty_check(_result([(4.0, 3.2)])) == pytest.approx(0.5)

    def test_empty(self):
        with pytest.raises(EmptyFitError):
            uncertainty_check(SweepResult(per_sigma=[SweepRow(sigma=1.0)]))


class TestFit:
    def test_ordinary_least_squares(self):
        fit = fit_rows(_result([(1.0, 2.0), (2.0, 3.5), (3.0, 5.0)]).per_sigma)
        assert isinstance(fit, FitSummary)
        assert fit.slope == pytest.approx(1.5)
        assert fit.intercept == pytest.approx(0.5)
        assert fit.r2 == pytest.approx(1.0)

    def test_single_point_has_no_line(self):
        assert fit_rows(_result([(1.0, 2.0)]).per_sigma) is None

    def test_no_data(self):
        with pytest.raises(EmptyFitError):
            fit_rows([SweepRow(sigma=1.0), SweepRow(sigma=2.0)])


class TestRunSweep:
    def test_reproducible(self):
        config = SweepConfig(sigmas=[1.0, 2.0], trials_per_sigma=40, dt=0.02, base_seed=3)
        a = run_sweep(config)
        b = run_sweep(config)
        assert a.model_dump() == b.model_dump()
        for row in a.per_sigma:
            assert row.n_trials == 40
            assert row.n_transients <= 40 * 2

    def test_paired_sweep_scales_exactly(self):
        config = SweepConfig(sigmas=[1.0, 2.0], trials_per_sigma=30, dt=0.03125, base_seed=5, paired=True, t_half_per_sigma=12.0)
        result = run_sweep(config)
        low, high = result.per_sigma
        assert low.mean_t_max is not None
        assert high.n_transients == low.n_transients
        assert high.mean_t_max == pytest.approx(2 * low.mean_t_max, rel=1e-6)

    def test_parallel_matches_serial(self):
        config = SweepConfig(sigmas=[1.0, 2.0], trials_per_sigma=10, dt=0.05, base_seed=11)
        serial = run_sweep(config)
        parallel = run_sweep(config.model_copy(update={"workers": 2}))
        assert serial.per_sigma == parallel.per_sigma

    def test_scaling_ratio(self):
        assert scaling_ratio(1.0, 30, dt=0.03125, base_seed=2) == pytest.approx(2.0, rel=1e-6)

    @pytest.mark.slow
    def test_lifetime_law(self):
        config = SweepConfig(sigmas=[2.0 * k for k in range(1, 11)], trials_per_sigma=1000, dt=0.01, base_seed=0, workers=4)
        result = run_sweep(config)
        assert 1.47 <= result.fit.slope <= 1.80
        assert abs(result.fit.intercept) < 0.15
        assert 0.9 <= uncertainty_check(result) <= 1.1


class TestVerification:
    def test_every_tenth_trial_is_checked_by_default(self):
        config = SweepConfig(sigmas=[1.0], trials_per_sigma=30, dt=0.05, base_seed=4)
        assert config.verify_every == 10
        row = run_sweep(config).per_sigma[0]
        assert row.n_failed_checks == 0
        assert row.n_verified <= 3 * 2

    def test_fully_verified_sweep(self):
        config = SweepConfig(sigmas=[1.0, 2.0], trials_per_sigma=30, dt=0.05, base_seed=5, verify_every=1)
        rows = run_sweep(config).per_sigma
        for row in rows:
            assert row.n_failed_checks == 0
            assert row.n_verified == row.n_transients + row.n_clipped
        assert sum(row.n_verified for row in rows) > 0

    def test_checks_can_be_switched_off(self):
        config = SweepConfig(sigmas=[1.0], trials_per_sigma=10, dt=0.05, base_seed=4, verify_every=0)
        row = run_sweep(config).per_sigma[0]
        assert row.n_verified == 0 and row.n_failed_checks == 0

    def test_negative_stride_rejected(self):
        with pytest.raises(ValidationError):
            SweepConfig(sigmas=[1.0], verify_every=-1)
