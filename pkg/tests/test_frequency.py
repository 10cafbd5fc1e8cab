"""Day-gap count distributions, per-year occurrence fits, arrival simulation."""

import warnings

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from granres import (
    ClaimRecord,
    NegativeBinomial,
    OccurrenceModel,
    Poisson,
    Portfolio,
    ZeroModified,
    date_differences,
    fit_count_mle,
    fit_occurrence,
    simulate_arrivals,
)
from granres.frequency import dist_from_dict


def test_poisson_pmf_closed_form():
    d = Poisson(1.0)
    assert_allclose(d.pmf(0), np.exp(-1.0), rtol=1e-14)
    assert_allclose(d.pmf(1), np.exp(-1.0), rtol=1e-14)
    assert_allclose(d.pmf(2), np.exp(-1.0) / 2.0, rtol=1e-14)
    assert d.mean() == 1.0 and d.var() == 1.0


def test_negbin_pmf_is_geometric_at_unit_size():
    d = NegativeBinomial(1.0, 0.5)
    assert_allclose(d.pmf([0, 1, 2, 3]), [0.5, 0.25, 0.125, 0.0625], rtol=1e-13)
    assert_allclose(d.mean(), 1.0)
    assert_allclose(d.var(), 2.0)


def test_count_validation_errors():
    with pytest.raises(ValueError):
        Poisson(0.0)
    with pytest.raises(ValueError):
        NegativeBinomial(0.0, 0.5)
    with pytest.raises(ValueError):
        NegativeBinomial(1.0, 0.0)
    with pytest.raises(ValueError):
        NegativeBinomial(1.0, 1.0)
    with pytest.raises(ValueError):
        ZeroModified(Poisson(1.0), 1.0)
    with pytest.raises(ValueError):
        ZeroModified(Poisson(1.0), -0.1)


def test_zero_modified_mass_and_normalization():
    zm = ZeroModified(Poisson(2.0), 0.5)
    assert zm.pmf(0) == 0.5
    k = np.arange(0, 80)
    assert_allclose(zm.pmf(k).sum(), 1.0, atol=1e-12)
    assert_allclose(zm.mean(), np.sum(k * zm.pmf(k)), atol=1e-10)
    assert_allclose(zm.var(), np.sum(k**2 * zm.pmf(k)) - zm.mean() ** 2, atol=1e-8)


def test_zero_modified_reduces_to_base_at_natural_mass():
    base = Poisson(2.0)
    zm = ZeroModified(base, float(base.pmf(0)))
    k = np.arange(0, 26)
    assert_allclose(zm.pmf(k), base.pmf(k), atol=1e-14)
    assert_allclose(zm.mean(), base.mean(), atol=1e-12)
    assert_allclose(zm.var(), base.var(), atol=1e-12)


def test_zero_modified_sampling_moments():
    zm = ZeroModified(Poisson(3.0), 0.4)
    rng = np.random.default_rng(7)
    x = zm.sample(rng, size=200_000)
    assert_allclose(np.mean(x == 0), 0.4, atol=4 * np.sqrt(0.4 * 0.6 / x.size))
    assert_allclose(np.mean(x), zm.mean(), atol=4 * np.sqrt(zm.var() / x.size))


def test_dist_dict_round_trips():
    dists = [
        Poisson(2.5),
        NegativeBinomial(1.7, 0.3),
        ZeroModified(Poisson(4.0), 0.2),
        ZeroModified(NegativeBinomial(2.0, 0.6), 0.35),
    ]
    for d in dists:
        assert dist_from_dict(d.to_dict()) == d
    with pytest.raises(ValueError, match="unknown count family"):
        dist_from_dict({"family": "binomial"})


def test_poisson_fit_closed_form():
    obs = np.array([0, 1, 2, 3, 4] * 4)
    fit = fit_count_mle(obs, "poisson")
    assert fit.dist.mu == 2.0
    assert_allclose(fit.se["mu"], np.sqrt(2.0 / 20.0), rtol=1e-14)
    assert_allclose(fit.loglik, float(np.sum(Poisson(2.0).logpmf(obs))), rtol=1e-13)


def test_fit_input_validation():
    with pytest.raises(ValueError, match="at least 10"):
        fit_count_mle([1] * 9, "poisson")
    with pytest.raises(ValueError, match="nonnegative"):
        fit_count_mle([-1] + [1] * 19, "poisson")
    with pytest.raises(ValueError, match="unknown count family"):
        fit_count_mle([1] * 20, "geometric")
    with pytest.raises(ValueError, match="degenerate"):
        fit_count_mle([0] * 12, "poisson")
    with pytest.raises(ValueError, match="too few positive"):
        fit_count_mle([0] * 18 + [1, 2], "zm_poisson")


def test_negbin_fit_recovers_truth():
    rng = np.random.default_rng(11)
    obs = NegativeBinomial(2.0, 0.4).sample(rng, size=20_000)
    fit = fit_count_mle(obs, "negbin")
    assert abs(fit.dist.r - 2.0) < 3 * fit.se["r"]
    assert abs(fit.dist.p - 0.4) < 3 * fit.se["p"]


def test_zm_poisson_fit_recovers_truth():
    rng = np.random.default_rng(5)
    obs = ZeroModified(Poisson(3.0), 0.55).sample(rng, size=20_000)
    fit = fit_count_mle(obs, "zm_poisson")
    assert abs(fit.dist.p0 - 0.55) < 3 * fit.se["p0"]
    assert abs(fit.dist.base.mu - 3.0) < 3 * fit.se["mu"]


def test_zm_negbin_fit_recovers_truth():
    rng = np.random.default_rng(9)
    obs = ZeroModified(NegativeBinomial(2.0, 0.5), 0.3).sample(rng, size=20_000)
    fit = fit_count_mle(obs, "zm_negbin")
    assert abs(fit.dist.p0 - 0.3) < 3 * fit.se["p0"]
    assert abs(fit.dist.base.r - 2.0) < 3 * fit.se["r"]
    assert abs(fit.dist.base.p - 0.5) < 3 * fit.se["p"]


def test_date_differences_anchors_first_gap_at_origin():
    claims = [
        ClaimRecord("a", "material_damage", 5, 5),
        ClaimRecord("b", "material_damage", 5, 6),
        ClaimRecord("c", "material_damage", 8, 8),
        ClaimRecord("d", "bodily_injury", 3, 4),
    ]
    diffs = date_differences(Portfolio(claims, 10))
    years, gaps = diffs["material_damage"]
    assert_array_equal(gaps, [5, 0, 3])
    assert_array_equal(years, [2000, 2000, 2000])
    years_b, gaps_b = diffs["bodily_injury"]
    assert_array_equal(gaps_b, [3])
    assert_array_equal(years_b, [2000])


def test_occurrence_year_lookup_clamps_and_backfills():
    om = OccurrenceModel("poisson", {2001: Poisson(1.0), 2003: Poisson(2.0)})
    assert om.dist_for(100) == Poisson(1.0)  # before the first fitted year
    assert om.dist_for(800) == Poisson(1.0)  # 2002 backfills from 2001
    assert om.dist_for(1900) == Poisson(2.0)  # after the last fitted year
    with pytest.raises(ValueError, match="at least one fitted year"):
        OccurrenceModel("poisson", {})
    rt = OccurrenceModel.from_dict(om.to_dict())
    assert rt.by_year == om.by_year and rt.family == om.family


class _ConstGap:
    """Degenerate day-gap law: every gap equals two days."""

    def mean(self):
        return 2.0

    def sample(self, rng, size=None):
        n = 1 if size is None else int(size)
        return np.full(n, 2, dtype=np.int64)


class _ZeroGap(_ConstGap):
    def mean(self):
        return 0.0


def test_arrivals_with_constant_gaps_are_a_lattice():
    om = OccurrenceModel("poisson", {2000: _ConstGap()})
    arr = simulate_arrivals(om, 0, 10, np.random.default_rng(0))
    assert_array_equal(arr, [2, 4, 6, 8, 10])
    assert simulate_arrivals(om, 5, 4, np.random.default_rng(0)).size == 0
    with pytest.raises(ValueError, match="zero mean gap"):
        simulate_arrivals(
            OccurrenceModel("poisson", {2000: _ZeroGap()}), 0, 10, np.random.default_rng(0)
        )


def test_arrivals_match_renewal_rate_for_geometric_gaps():
    # memoryless gaps: arrivals on 100 days total NegBin(100, 1/2), mean 100
    om = OccurrenceModel("negbin", {2000: NegativeBinomial(1.0, 0.5)})
    rng = np.random.default_rng(123)
    counts = np.array(
        [simulate_arrivals(om, 0, 99, rng).size for _ in range(400)], dtype=float
    )
    z = (counts.mean() - 100.0) / np.sqrt(200.0 / counts.size)
    assert abs(z) < 4.0


def test_arrivals_stay_in_window_and_are_deterministic():
    om = OccurrenceModel(
        "poisson", {2000: Poisson(5.0), 2001: Poisson(50.0)}
    )
    a = simulate_arrivals(om, 0, 730, np.random.default_rng(77))
    b = simulate_arrivals(om, 0, 730, np.random.default_rng(77))
    assert_array_equal(a, b)
    assert np.all(np.diff(a) >= 0)
    assert a.min() >= 0 and a.max() <= 730


def test_fit_occurrence_recovers_single_year_mean():
    rng = np.random.default_rng(21)
    gaps = rng.poisson(3.0, 60)
    days = np.cumsum(gaps) + 1
    claims = [
        ClaimRecord(f"c{i}", "bodily_injury", int(d), int(d))
        for i, d in enumerate(days)
    ]
    occ = fit_occurrence(Portfolio(claims, int(days[-1]) + 1), "poisson")
    mu = occ["bodily_injury"].by_year[2000].mu
    assert abs(mu - 3.0) < 4 * np.sqrt(3.0 / 59)


def test_fit_occurrence_merges_thin_trailing_year():
    claims = [
        ClaimRecord(f"m{i}", "material_damage", 10 * i, 10 * i)
        for i in range(1, 16)
    ]
    claims += [
        ClaimRecord("m16", "material_damage", 370, 370),
        ClaimRecord("m17", "material_damage", 380, 380),
    ]
    with pytest.warns(UserWarning, match="merged"):
        occ = fit_occurrence(Portfolio(claims, 400), "poisson")
    om = occ["material_damage"]
    assert sorted(om.by_year) == [2000, 2001]
    assert om.by_year[2001] is om.by_year[2000]
