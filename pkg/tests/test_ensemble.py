import numpy as np
import pytest

from holehom.ensemble import (
    PROBE_STREAM,
    aggregate,
    aggregate_rows,
    bootstrap,
    build_tasks,
    decay_config,
    fit_decay,
    fit_variance_scaling,
    hazen_survival,
    percentile_interval,
    row_columns,
    rstar_tail_fit,
    run_ensemble,
    sample_seeds,
    split,
    stream_seed,
    variance_config,
    variance_scaling,
)
from holehom.ensemble import runner
from holehom.errors import DegenerateVariance, FailureBudgetExceeded, TooFewTailPoints
from holehom.io import load_config


def small_config(**ensemble):
    document = {
        "geometry": {"box_side": 4, "seed": 1},
        "field": {"cells_per_side": 16, "profile": {"kind": "iid_uniform", "a_minus": 0.5, "a_plus": 2.0}},
        "ensemble": {"schedule": [{"L": 4, "n": 16}], "sample_count": 4, "master_seed": 7, "bootstrap_resamples": 200},
    }
    document["ensemble"].update(ensemble)
    return load_config(document)


def test_splitmix_reference_values():
    assert split(0, 0) == 0xE220A8397B1DCDAF
    assert split(0, 1) == 0x6E789E6AA1B965F4


def test_sample_seeds_are_distinct_and_reproducible():
    seeds = sample_seeds(42, 1000)
    assert len(set(seeds)) == 1000
    assert seeds == sample_seeds(42, 1000)
    assert all(0 <= seed < 2 ** 64 for seed in seeds)


def test_stream_seeds_differ_from_sample_seed():
    seed = split(3, 5)
    streams = {stream_seed(seed, stream) for stream in range(3)}
    assert len(streams) == 3
    assert seed not in streams


def test_split_rejects_negative_index():
    with pytest.raises(ValueError):
        split(0, -1)


def test_bootstrap_of_constant_sample():
    interval = bootstrap([2.0] * 20, resamples=200)
    assert interval.estimate == interval.low == interval.high == 2.0
    assert not interval.excludes(2.0)
    with pytest.raises(ValueError):
        bootstrap([])


def test_empty_bootstrap_draws_raise_typed_errors():
    with pytest.raises(TooFewTailPoints):
        percentile_interval(1.0, [], 0.95, TooFewTailPoints("no draws"))
    with pytest.raises(ValueError, match="at least one resample"):
        bootstrap([1.0, 2.0], resamples=0)
    samples = {L: [1.0, 1.0 + 1.0 / L, 1.0 - 1.0 / L] for L in (2.0, 4.0, 8.0)}
    with pytest.raises(DegenerateVariance):
        fit_variance_scaling(samples, resamples=0)
    with pytest.raises(DegenerateVariance):
        fit_decay({T: [T ** -0.5, 2.0 * T ** -0.5] for T in (1.0, 4.0, 16.0)}, resamples=0)


def test_aggregate():
    summary = aggregate([1.0, 2.0, 3.0, 4.0, 5.0])
    assert summary["count"] == 5
    assert summary["mean"] == 3.0
    assert summary["var"] == 2.5
    assert summary["q50"] == 3.0
    assert aggregate([])["count"] == 0


def test_hazen_survival():
    distinct, survival = hazen_survival(np.array([4.0, 1.0, 3.0, 2.0]))
    assert list(distinct) == [1.0, 2.0, 3.0, 4.0]
    assert list(survival) == pytest.approx([0.875, 0.625, 0.375, 0.125])


def test_variance_scaling_recovers_clt_slope():
    rng = np.random.default_rng(0)
    samples = {L: rng.normal(1.0, 1.0 / L, 400) for L in (2.0, 4.0, 8.0, 16.0)}
    fit = fit_variance_scaling(samples, resamples=300, seed=1)
    assert fit.slope == pytest.approx(-2.0, abs=0.2)
    assert fit.interval.low <= fit.slope <= fit.interval.high


def test_variance_scaling_rejects_zero_variance():
    samples = {2.0: [1.0] * 10, 4.0: [1.0, 2.0] * 5, 8.0: [1.0, 3.0] * 5}
    with pytest.raises(DegenerateVariance):
        fit_variance_scaling(samples, resamples=200)


def test_variance_scaling_needs_three_sizes():
    with pytest.raises(ValueError):
        fit_variance_scaling({2.0: [1.0, 2.0], 4.0: [1.0, 2.0]})


def test_decay_fit_recovers_exponent():
    rng = np.random.default_rng(2)
    samples = {T: T ** -0.5 * (1.0 + 0.1 * rng.standard_normal(50)) for T in (1.0, 4.0, 16.0, 64.0)}
    fit = fit_decay(samples, resamples=300)
    assert fit.eps_hat == pytest.approx(0.5, abs=0.05)
    assert fit.monotone
    assert not fit.degenerate


def test_decay_fit_of_vanishing_quantity_is_degenerate():
    fit = fit_decay({1.0: [0.0] * 5, 2.0: [0.0] * 5, 4.0: [0.0] * 5})
    assert fit.degenerate
    assert fit.eps_hat is None


def test_decay_fit_flags_non_monotone_means(caplog):
    fit = fit_decay({1.0: [1.0, 1.0], 2.0: [2.0, 2.0], 4.0: [0.5, 0.5]}, resamples=200)
    assert not fit.monotone
    assert fit.eps_hat is not None
    assert "not monotone" in caplog.text


@pytest.mark.slow
def test_exponential_tail_has_unit_exponent():
    samples = np.random.default_rng(3).exponential(1.0, 4000)
    fit = rstar_tail_fit(samples, resamples=300)
    assert fit.gamma == pytest.approx(1.0, abs=0.15)
    assert fit.stretched_exponential


@pytest.mark.slow
def test_pareto_tail_is_flagged():
    samples = np.random.default_rng(4).pareto(1.5, 4000) + 1.0
    fit = rstar_tail_fit(samples, resamples=300)
    assert not fit.stretched_exponential


def test_tail_fit_counts_infinite_sentinels():
    samples = np.concatenate([np.random.default_rng(5).exponential(1.0, 300), [np.inf] * 7])
    fit = rstar_tail_fit(samples, resamples=200)
    assert fit.infinite_count == 7
    assert fit.finite_count == 300


def test_tail_fit_needs_enough_samples():
    with pytest.raises(ValueError):
        rstar_tail_fit(np.arange(1.0, 50.0))


def test_tasks_use_common_seeds_across_schedule():
    cfg = small_config(schedule=[{"L": 4, "n": 16}, {"L": 4, "n": 32}])
    tasks = build_tasks(cfg)
    assert [task.index for task in tasks] == list(range(8))
    assert [task.seed for task in tasks[:4]] == [task.seed for task in tasks[4:]]
    assert [task.seed for task in tasks[:4]] == sample_seeds(7, 4)


def test_row_columns_follow_diagnostics():
    cfg = small_config(diagnostics=["rstar", "decay"])
    columns = row_columns(cfg)
    assert columns[:3] == ("index", "sample", "L")
    assert ("a_11", "a_12", "a_21", "a_22") == columns[12:16]
    assert columns[-2:] == ("rstar", "decay_quantity")


def test_ensemble_rows_and_reaggregation():
    report = run_ensemble(small_config())
    assert len(report.rows) == 4
    assert report.failures == 0
    assert all(row["status"] == "ok" for row in report.rows)
    assert all(row["observable"] == row["a_11"] for row in report.rows)
    assert aggregate_rows(report.rows, report.columns) == report.aggregates


def test_ensemble_is_independent_of_worker_count():
    cfg = small_config()
    serial = run_ensemble(cfg, workers=1)
    pooled = run_ensemble(cfg, workers=2)
    assert serial.rows == pooled.rows
    assert serial.aggregates == pooled.aggregates


def test_probe_stream_is_distinct_from_profile_stream():
    cfg = small_config()
    task = build_tasks(cfg)[0]
    assert stream_seed(task.seed, PROBE_STREAM) != stream_seed(task.seed, 0)


def test_failure_budget_exceeded():
    cfg = small_config().model_copy(update={"solver": load_config({"solver": {"max_iterations": 1}}).solver})
    with pytest.raises(FailureBudgetExceeded) as info:
        run_ensemble(cfg)
    assert info.value.failures == 4


def test_diagnostic_errors_are_recorded_per_sample(monkeypatch):
    def flaky(task, field, bundle):
        if task.sample == 0:
            raise ZeroDivisionError("float division by zero")
        return {}

    monkeypatch.setattr(runner, "_diagnostics", flaky)
    report = run_ensemble(small_config(failure_budget=0.5))
    assert report.failures == 1
    failed = [row for row in report.rows if row["status"] == "failed"]
    assert [row["sample"] for row in failed] == [0]
    assert failed[0]["error"].startswith("ZeroDivisionError")


def test_diagnostic_errors_count_against_the_budget(monkeypatch):
    def broken(task, field, bundle):
        raise ValueError("Fewer than two dyadic radii")

    monkeypatch.setattr(runner, "_diagnostics", broken)
    with pytest.raises(FailureBudgetExceeded) as info:
        run_ensemble(small_config())
    assert info.value.failures == 4


def test_programming_errors_abort_the_ensemble(monkeypatch):
    def broken(task, field, bundle):
        raise KeyError("rstar")

    monkeypatch.setattr(runner, "_diagnostics", broken)
    with pytest.raises(KeyError):
        run_ensemble(small_config())


def test_extension_diagnostic_feeds_fits():
    report = run_ensemble(small_config(diagnostics=["extension"], extension_samples=5))
    assert "extension_gradient_norm" in report.columns
    assert all(row["extension_value_norm"] >= 0.0 for row in report.rows)
    (entry,) = report.fits["extension"].values()
    assert entry["samples"] == 4
    assert entry["gradient_norm"] == max(row["extension_gradient_norm"] for row in report.rows)


def test_decay_config_builds_T_schedule():
    cfg = decay_config(small_config(T_list=[16.0, 1.0, 4.0]))
    assert [entry.T for entry in cfg.ensemble.schedule] == [1.0, 4.0, 16.0]
    assert "decay" in cfg.ensemble.diagnostics
    with pytest.raises(ValueError):
        decay_config(small_config(T_list=[1.0, 4.0]))


def test_variance_config_needs_samples_and_sizes():
    with pytest.raises(ValueError):
        variance_config(small_config(), L_list=[2.0, 4.0, 8.0])
    with pytest.raises(ValueError):
        variance_config(small_config(sample_count=100), L_list=[2.0, 4.0])


@pytest.mark.slow
def test_cell_mean_variance_scales_like_clt():
    cfg = small_config(
        schedule=[{"L": 2, "n": 16}, {"L": 4, "n": 32}, {"L": 8, "n": 64}],
        sample_count=100,
        observable="cell_mean",
    )
    report = variance_scaling(cfg)
    fit = report.fits["variance_scaling"]
    assert fit["slope"] == pytest.approx(-2.0, abs=0.4)
    assert fit["interval"]["low"] <= fit["slope"] <= fit["interval"]["high"]
