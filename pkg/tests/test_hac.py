"""Nested two-level cross-type dependence: validity, sampling, estimation."""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import stats

from granres import (
    ClaimRecord,
    CopulaSpec,
    HacSpec,
    Portfolio,
    TimeVaryingParam,
    WeibullDelayModel,
    fit_hac_outer,
    hac_cdf,
    hac_from_dict,
    hac_sample,
    matched_delay_scores,
)
from granres.copulas.families import GUMBEL

CLAY2 = CopulaSpec("clayton", theta=2.0)
GUM2 = CopulaSpec("gumbel", theta=2.0)


def test_independence_outer_factorizes():
    spec = HacSpec("independence", None, CLAY2, GUM2)
    u = np.array([0.3, 0.6, 0.2, 0.8])
    prod = float(
        hac_cdf(HacSpec("independence", None, CLAY2, GUM2), u[0], u[1], 1.0, 1.0)
    ) * float(hac_cdf(spec, 1.0, 1.0, u[2], u[3]))
    assert_allclose(float(hac_cdf(spec, *u)), prod, rtol=1e-12)


def test_equal_parameters_collapse_to_exchangeable():
    th = 2.0
    eq = HacSpec("gumbel", th, CopulaSpec("gumbel", theta=th), CopulaSpec("gumbel", theta=th))
    for p in [(0.2, 0.5, 0.7, 0.9), (0.1, 0.1, 0.1, 0.1), (0.9, 0.4, 0.6, 0.3)]:
        direct = GUMBEL.gen_inv(sum(GUMBEL.gen(x, th) for x in p), th)
        assert_allclose(float(hac_cdf(eq, *p)), float(direct), atol=1e-12)


def test_cdf_is_symmetric_within_pairs():
    spec = HacSpec("gumbel", 1.2, CLAY2, GUM2)
    assert_allclose(
        float(hac_cdf(spec, 0.3, 0.7, 0.5, 0.9)),
        float(hac_cdf(spec, 0.7, 0.3, 0.5, 0.9)),
        rtol=1e-12,
    )
    assert_allclose(
        float(hac_cdf(spec, 0.3, 0.7, 0.5, 0.9)),
        float(hac_cdf(spec, 0.3, 0.7, 0.9, 0.5)),
        rtol=1e-12,
    )


def test_sample_pairwise_kendall_taus():
    spec = HacSpec("gumbel", 1.2, CLAY2, GUM2)
    rng = np.random.default_rng(33)
    u = hac_sample(spec, rng, size=4000)
    assert u.shape == (4000, 4)
    assert np.all((u > 0) & (u < 1))
    tau = lambda i, j: stats.kendalltau(u[:, i], u[:, j]).statistic
    assert abs(tau(0, 1) - 0.5) < 0.04  # inner pair A
    assert abs(tau(2, 3) - 0.5) < 0.04  # inner pair B
    for i in (0, 1):
        for j in (2, 3):
            assert abs(tau(i, j) - 1.0 / 6.0) < 0.04  # all cross pairs share the outer


def test_nesting_validity_enforced():
    with pytest.raises(ValueError, match="nesting violated"):
        HacSpec("gumbel", 2.0, CopulaSpec("clayton", theta=1.0), GUM2)
    # time-varying inner is judged by its long-run minimum, tau 1/3 here
    dyn = CopulaSpec(
        "clayton", dynamics=TimeVaryingParam(math.log(2.0), math.log(1.0), 0.5)
    )
    with pytest.raises(ValueError, match="nesting violated"):
        HacSpec("gumbel", 1.6, dyn, GUM2)  # outer tau 0.375 > 1/3
    HacSpec("gumbel", 1.4, dyn, GUM2)  # outer tau 0.286 <= 1/3 is fine


def test_hac_spec_validation_and_round_trip():
    with pytest.raises(ValueError, match="must be Archimedean"):
        HacSpec("gaussian", 0.5, CLAY2, GUM2)
    with pytest.raises(ValueError, match="takes no parameter"):
        HacSpec("independence", 1.5, CLAY2, GUM2)
    with pytest.raises(ValueError, match="needs a parameter"):
        HacSpec("gumbel", None, CLAY2, GUM2)
    spec = HacSpec("gumbel", 1.2, CLAY2, GUM2)
    assert hac_from_dict(spec.to_dict()) == spec
    indep = HacSpec("independence", None, CLAY2, GUM2)
    assert hac_from_dict(indep.to_dict()) == indep


def test_sample_with_parameter_callbacks():
    spec = HacSpec("gumbel", 1.2, CLAY2, GUM2)
    rng = np.random.default_rng(2)
    u = hac_sample(
        spec, rng, size=25, theta_a_fn=lambda u1: 2.0, theta_b_fn=lambda u3: 2.0
    )
    assert u.shape == (25, 4) and np.all((u > 0) & (u < 1))


def test_matched_delay_scores_hand_case():
    dm = WeibullDelayModel(1.0, math.log(10.0), 0.0)
    claims = [
        ClaimRecord("a1", "bodily_injury", 10, 15),
        ClaimRecord("a2", "bodily_injury", 100, 103),
        ClaimRecord("b1", "material_damage", 12, 20),
        ClaimRecord("b2", "material_damage", 300, 301),
    ]
    port = Portfolio(claims, 400)
    sa, sb = matched_delay_scores(
        port, {"bodily_injury": dm, "material_damage": dm}, max_gap_days=7
    )
    # only the (day 10, day 12) pair is close enough; scores at w + 0.5
    assert_allclose(sa, [1.0 - math.exp(-5.5 / 10.0)], rtol=1e-12)
    assert_allclose(sb, [1.0 - math.exp(-8.5 / 10.0)], rtol=1e-12)

    single = Portfolio([c for c in claims if c.claim_type == "bodily_injury"], 400)
    with pytest.raises(ValueError, match="two claim types"):
        matched_delay_scores(single, {"bodily_injury": dm})


def test_fit_hac_outer_recovers_tau():
    rng = np.random.default_rng(9)
    a, b = GUMBEL.sample(3000, 1.5, rng)
    fit = fit_hac_outer(a, b, CLAY2, CLAY2, "gumbel")
    assert fit.outer_family == "gumbel"
    assert abs(fit.outer_theta - 1.5) < 0.15


def test_fit_hac_outer_projections_and_errors():
    rng = np.random.default_rng(10)
    x = rng.random(500)
    fit0 = fit_hac_outer(x, 1.0 - x, CLAY2, CLAY2, "gumbel")
    assert fit0.outer_family == "independence"  # negative dependence floors at 0

    rng = np.random.default_rng(11)
    a, b = GUMBEL.sample(2000, 4.0, rng)  # tau 0.75, above the inner cap 0.5
    with pytest.warns(UserWarning, match="nesting boundary"):
        fitc = fit_hac_outer(a, b, CLAY2, CLAY2, "gumbel")
    assert_allclose(fitc.outer_tau(), 0.5, atol=1e-9)

    with pytest.raises(ValueError, match="at least 20 matched pairs"):
        fit_hac_outer(x[:10], x[:10], CLAY2, CLAY2, "gumbel")
    with pytest.raises(ValueError, match="must be Archimedean"):
        fit_hac_outer(a, b, CLAY2, CLAY2, "gaussian")
