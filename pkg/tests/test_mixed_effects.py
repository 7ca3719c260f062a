import math

import numpy as np
import pytest

from embaudit.mixed_effects import (MisclassDataset, MixedModelError, _GroupedDesign, build_dataset,
                                    compare_models, fit_random_intercept, reml_objective, result_row)

from oracles import gls_grid_oracle, synthetic_misclass


def dataset(y, x, group, category="c"):
    return MisclassDataset(np.asarray(y, float), np.asarray(group), np.asarray(x, float), category)


# -- build_dataset ---------------------------------------------------------------

def test_build_dataset_examples():
    ds = build_dataset([1], [-1], [1], ["自由"])
    np.testing.assert_array_equal(ds.y, [0, -2])
    np.testing.assert_array_equal(ds.x, [1, 0])
    assert ds.group.tolist() == ["自由", "自由"]

    ds = build_dataset([1, -1, 0], [1, 1, 1], [1, -1, 1], ["a", "b", "a"], "freedom")
    # a - human = (0, 0, -1); b - human = (0, 2, 0)
    np.testing.assert_array_equal(ds.y, [0, 0, -1, 0, 2, 0])
    np.testing.assert_array_equal(ds.x, [1, 1, 1, 0, 0, 0])
    assert ds.group.tolist() == ["a", "b", "a", "a", "b", "a"]
    assert ds.category == "freedom"


def test_build_dataset_first_half_zero_when_a_is_perfect():
    human = [1, -1, 0, 1]
    ds = build_dataset(human, [1, 1, 1, 1], human, list("wxyz"))
    assert not ds.y[:4].any()


def test_build_dataset_errors():
    with pytest.raises(MixedModelError, match="length"):
        build_dataset([1], [1, 1], [1], ["a"])
    with pytest.raises(MixedModelError, match="empty"):
        build_dataset([], [], [], [])
    with pytest.raises(MixedModelError, match="coded"):
        build_dataset([2], [1], [1], ["a"])


# -- fitting -----------------------------------------------------------------------

def noiseless(n_groups=4, per_half=3):
    group = np.repeat(np.arange(n_groups), 2 * per_half)
    x = np.tile(np.repeat([1.0, 0.0], per_half), n_groups)
    return dataset(0.2 * x, x, group)


def test_noiseless_example():
    fit = fit_random_intercept(noiseless())
    assert fit.beta == pytest.approx(0.2, abs=1e-12)
    assert fit.sigma_alpha2 == pytest.approx(1e-10, abs=1e-12)
    assert fit.intercept == pytest.approx(0.0, abs=1e-12)


def test_shift_invariance():
    y, x, g = synthetic_misclass(0, n_groups=10, rows_per_group=8)
    f0 = fit_random_intercept(dataset(y, x, g))
    f1 = fit_random_intercept(dataset(y + 3.5, x, g))
    assert f1.beta == pytest.approx(f0.beta, abs=1e-10)
    assert f1.intercept == pytest.approx(f0.intercept + 3.5, abs=1e-10)
    assert f1.se_beta == pytest.approx(f0.se_beta, rel=1e-8)


def test_scaling_leaves_wald_statistic_unchanged():
    y, x, g = synthetic_misclass(1, n_groups=10, rows_per_group=8, paired=False)
    f0 = fit_random_intercept(dataset(y, x, g))
    f1 = fit_random_intercept(dataset(4.0 * y, x, g))
    assert f1.beta == pytest.approx(4.0 * f0.beta, rel=1e-7)
    assert f1.se_beta == pytest.approx(4.0 * f0.se_beta, rel=1e-7)
    assert f1.p_value == pytest.approx(f0.p_value, abs=1e-9)


@pytest.mark.parametrize("seed", range(3))
def test_swapping_models_negates_beta(seed):
    rng = np.random.default_rng(seed)
    n = 40
    human = rng.integers(-1, 2, n)
    a = np.where(rng.random(n) < 0.7, human, rng.integers(-1, 2, n))
    b = np.where(rng.random(n) < 0.6, human, rng.integers(-1, 2, n))
    targets = [f"t{i}" for i in rng.integers(0, 6, n)]
    fab = fit_random_intercept(build_dataset(a, b, human, targets))
    fba = fit_random_intercept(build_dataset(b, a, human, targets))
    assert fba.beta == pytest.approx(-fab.beta, abs=1e-12)
    assert fba.se_beta == pytest.approx(fab.se_beta, rel=1e-9)
    assert fba.p_value == pytest.approx(fab.p_value, abs=1e-9)


def test_beta_equals_difference_in_means_when_alpha_at_floor():
    rng = np.random.default_rng(7)
    group = np.repeat(np.arange(6), 10)
    x = np.tile(np.repeat([1.0, 0.0], 5), 6)
    y = 0.4 * x + rng.normal(size=x.size)  # no group effect
    fit = fit_random_intercept(dataset(y, x, group))
    diff = y[x == 1].mean() - y[x == 0].mean()
    assert fit.beta == pytest.approx(diff, abs=1e-8)


@pytest.mark.parametrize("paired", [True, False])
def test_objective_at_optimum_beats_random_probes(paired):
    y, x, g = synthetic_misclass(3, n_groups=20, rows_per_group=10, paired=paired)
    fit = fit_random_intercept(dataset(y, x, g))
    design = _GroupedDesign(y, x, g)
    probes = np.random.default_rng(0).uniform(-12, 12, 1000)
    values = np.array([reml_objective(design, t) for t in probes])
    assert fit.objective <= values.min() + 1e-12
    assert fit.converged


def test_paired_layout_matches_grid_oracle():
    y, x, g = synthetic_misclass(0)
    fit = fit_random_intercept(dataset(y, x, g))
    beta_oracle, _ = gls_grid_oracle(y, x, g)
    assert abs(fit.beta - beta_oracle) < 1e-6
    assert abs(fit.beta - 0.10) < 3 * fit.se_beta


def test_unpaired_layout_close_to_grid_oracle():
    # with x varying inside groups beta depends on the variance ratio, so the
    # oracle's own grid spacing (24/9999 in log ratio) bounds the agreement
    y, x, g = synthetic_misclass(12, paired=False)
    fit = fit_random_intercept(dataset(y, x, g))
    beta_oracle, t_oracle = gls_grid_oracle(y, x, g)
    assert abs(fit.beta - beta_oracle) < 1e-5
    assert abs(math.log(fit.lam) - t_oracle) < 24 / 9999
    design = _GroupedDesign(y, x, g)
    assert fit.objective <= reml_objective(design, t_oracle) + 1e-12


def test_fit_errors():
    with pytest.raises(MixedModelError, match="4 rows"):
        fit_random_intercept(dataset([0, 1, 0], [1, 0, 1], [0, 0, 1]))
    with pytest.raises(MixedModelError, match="constant"):
        fit_random_intercept(dataset([0, 1, 0, 1], [1, 1, 1, 1], [0, 0, 1, 1]))
    with pytest.raises(MixedModelError, match="two groups"):
        fit_random_intercept(dataset([0, 1, 0, 1], [1, 0, 1, 0], [0, 0, 0, 0]))


def test_p_value_range_and_fields():
    y, x, g = synthetic_misclass(5, n_groups=8, rows_per_group=6)
    fit = fit_random_intercept(dataset(y, x, g))
    assert 0 < fit.p_value <= 1
    assert fit.se_beta > 0 and fit.sigma_eps2 > 0 and fit.sigma_alpha2 >= 1e-10
    assert fit.n_rows == 48 and fit.n_groups == 8
    assert isinstance(fit.objective, float)


# -- compare_models ------------------------------------------------------------------

def test_compare_models_rows_and_identity():
    rng = np.random.default_rng(0)
    datasets = []
    for j in range(10):
        human = rng.integers(-1, 2, 30)
        pred = np.where(rng.random(30) < 0.7, human, -human)
        datasets.append(build_dataset(pred, pred, human, [f"w{i % 5}" for i in range(30)], f"cat{j}"))
    rows = compare_models(datasets, "nb/a", "nb/b")
    assert len(rows) == 10
    for r in rows:
        assert r.fit is not None
        assert r.fit.beta == pytest.approx(0.0, abs=1e-12)
        assert r.fit.p_value == pytest.approx(1.0, abs=1e-9)


def test_compare_models_failure_row_keeps_table():
    good = build_dataset([1, -1, 1, 1], [1, 1, -1, 1], [1, -1, 1, -1], ["a", "b", "a", "b"], "ok")
    bad = build_dataset([1, 1], [1, -1], [1, 1], ["a", "a"], "one-group")
    rows = compare_models([good, bad])
    assert [r.category for r in rows] == ["ok", "one-group"]
    assert rows[0].fit is not None and rows[1].fit is None
    out = result_row(rows[1])
    assert out[3] == "" and "group" in out[-1]
