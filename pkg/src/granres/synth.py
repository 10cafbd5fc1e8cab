"""Synthetic portfolio generation from a fully specified GranularModel.

The generator and the reserve engine are two views of the same claim law:
arrivals from the day-gap model, a delay score per claim, the total payment
count at the claim's observation horizon drawn through the copula
conditional, payment times as transformed order statistics, and amounts from
the severity model. Claims reporting after the cutoff are dropped: the file
represents what an insurer would hold in its systems on the cutoff date.
"""

from __future__ import annotations

import math

import numpy as np

from .claims import ClaimRecord, PaymentEvent, Portfolio
from .copulas import CopulaSpec, HacSpec, conditional_count_quantile, hac_sample
from .daycount import DAYS_PER_YEAR, parse_iso, year_of
from .delays import WeibullDelayModel, delay_quantile
from .frequency import OccurrenceModel, Poisson, simulate_arrivals
from .payments import CountProcess, ExponentialDecay, PowerDecay
from .reserving import GranularModel, TypeModel, _count_marginal_quantile, _match_days
from .severity import LogNormalSeverity, simulate_amounts


def default_model(
    n_claims: int,
    start_day: int,
    end_day: int,
    dependence: str = "independence",
) -> GranularModel:
    """A two-type generator scaled so the period yields about n_claims total.

    dependence="independence" gives exactly factorizing phases (the engine's
    analytic special cases hold); "archimedean" turns on within-claim copulas
    and the cross-type nesting.
    """
    if n_claims < 2:
        raise ValueError("need at least two claims")
    if end_day <= start_day:
        raise ValueError("need end after start")
    if dependence not in ("independence", "archimedean"):
        raise ValueError(f"unknown dependence preset: {dependence}")
    period = end_day - start_day
    shares = {"bodily_injury": 0.4, "material_damage": 0.6}
    years = range(year_of(start_day), year_of(end_day) + 1)
    dep = dependence == "archimedean"

    def occ(share):
        mean_gap = period / (n_claims * share)
        return OccurrenceModel(
            family="poisson", by_year={y: Poisson(mu=mean_gap) for y in years}
        )

    types = {
        "bodily_injury": TypeModel(
            occurrence=occ(shares["bodily_injury"]),
            delay=WeibullDelayModel(shape=1.3, c0=math.log(40.0), c1=-0.02),
            counts=CountProcess(ExponentialDecay(lam0=2.5, beta=1.1)),
            severity=LogNormalSeverity(mu=7.5, sigma=1.0),
            copula=CopulaSpec("clayton", theta=1.5)
            if dep
            else CopulaSpec("independence"),
        ),
        "material_damage": TypeModel(
            occurrence=occ(shares["material_damage"]),
            delay=WeibullDelayModel(shape=1.6, c0=math.log(12.0), c1=-0.01),
            counts=CountProcess(PowerDecay(lam0=3.0, beta=2.5)),
            severity=LogNormalSeverity(mu=6.5, sigma=0.8),
            copula=CopulaSpec("gumbel", theta=1.4)
            if dep
            else CopulaSpec("independence"),
        ),
    }
    hac = None
    if dep:
        hac = HacSpec(
            outer_family="gumbel",
            outer_theta=1.2,
            inner_a=types["bodily_injury"].copula,
            inner_b=types["material_damage"].copula,
        )
    return GranularModel(types=types, hac=hac)


def _theta_fn(tm, t_day: int, end_day: int):
    def fn(u1):
        w = math.floor(float(delay_quantile(tm.delay, t_day, u1)))
        h = max((end_day - t_day - w) / DAYS_PER_YEAR, 0.0)
        return float(tm.copula.theta_at(np.asarray(h, dtype=float)))

    return fn


def synthesize(
    model: GranularModel,
    start_day: int,
    end_day: int,
    rng,
    match_gap_days: int = 7,
    id_prefix: str = "syn",
) -> Portfolio:
    """Draw a complete observed portfolio on [start, end] with cutoff end."""
    names = model.type_names()
    arrivals = {
        t: simulate_arrivals(model.types[t].occurrence, start_day, end_day, rng)
        for t in names
    }
    coupled = (
        model.hac is not None
        and model.hac.outer_family != "independence"
        and len(names) >= 2
    )
    u1_of = {t: np.empty(0) for t in names}
    u2_of = {t: np.empty(0) for t in names}
    t_pair = {t: np.empty(0, dtype=np.int64) for t in names}
    if coupled:
        na, nb = names[0], names[1]
        ta, tb = arrivals[na], arrivals[nb]
        ia, ib, rest_a, rest_b = _match_days(ta, tb, match_gap_days)
        rows = np.empty((ia.size, 4))
        tm_a, tm_b = model.types[na], model.types[nb]
        for m in range(ia.size):
            rows[m] = hac_sample(
                model.hac,
                rng,
                size=1,
                theta_a_fn=_theta_fn(tm_a, int(ta[ia[m]]), end_day),
                theta_b_fn=_theta_fn(tm_b, int(tb[ib[m]]), end_day),
            )[0]
        t_pair[na], u1_of[na], u2_of[na] = ta[ia], rows[:, 0], rows[:, 1]
        t_pair[nb], u1_of[nb], u2_of[nb] = tb[ib], rows[:, 2], rows[:, 3]
        free = {na: ta[rest_a], nb: tb[rest_b]}
    else:
        free = dict(arrivals)

    claims = []
    for ctype in names:
        tm = model.types[ctype]
        t_free = free[ctype]
        u1 = np.concatenate([u1_of[ctype], rng.random(t_free.size)])
        t_all = np.concatenate([t_pair[ctype], t_free]).astype(np.int64)
        from_pair = np.concatenate(
            [
                np.ones(t_pair[ctype].size, dtype=bool),
                np.zeros(t_free.size, dtype=bool),
            ]
        )
        u2 = np.concatenate([u2_of[ctype], np.full(t_free.size, np.nan)])

        w = np.floor(np.asarray(delay_quantile(tm.delay, t_all, u1), dtype=float))
        r = t_all + w.astype(np.int64)
        keep = r <= end_day
        t_k, r_k, u1_k = t_all[keep], r[keep], u1[keep]
        pair_k, u2_k = from_pair[keep], u2[keep]
        horizon = np.maximum((end_day - r_k) / DAYS_PER_YEAR, 0.0)

        n = np.zeros(t_k.size, dtype=np.int64)
        if pair_k.any():
            n[pair_k] = _count_marginal_quantile(
                u2_k[pair_k], horizon[pair_k], tm.counts
            )
        if (~pair_k).any():
            v = rng.random(int((~pair_k).sum()))
            n[~pair_k] = conditional_count_quantile(
                u1_k[~pair_k], v, horizon[~pair_k], tm.counts, tm.copula
            )

        total = int(n.sum())
        idx = np.repeat(np.arange(t_k.size), n)
        uu = rng.random(total)
        order = np.lexsort((uu, idx))
        uu = uu[order]
        lam_top = np.asarray(tm.counts.intensity.cumulative(horizon), dtype=float)
        taus = tm.counts.intensity.cumulative_inv(uu * lam_top[idx])
        days = r_k[idx] + np.ceil(taus * DAYS_PER_YEAR).astype(np.int64)
        days = np.clip(days, r_k[idx] + 1, end_day)
        amounts = np.round(simulate_amounts(tm.severity, n, rng), 2)
        amounts = np.maximum(amounts, 0.01)

        ord_t = np.argsort(t_k, kind="stable")
        rank = np.empty(t_k.size, dtype=np.int64)
        rank[ord_t] = np.arange(t_k.size)
        splits = np.cumsum(n)[:-1]
        day_groups = np.split(days, splits)
        amt_groups = np.split(amounts, splits)
        for pos, i in enumerate(ord_t):
            payments = tuple(
                PaymentEvent(int(d), float(x))
                for d, x in zip(day_groups[i], amt_groups[i])
            )
            claims.append(
                ClaimRecord(
                    claim_id=f"{id_prefix}_{ctype}_{pos + 1:06d}",
                    claim_type=ctype,
                    accident_day=int(t_k[i]),
                    reporting_day=int(r_k[i]),
                    payments=payments,
                )
            )
    return Portfolio(tuple(claims), data_cutoff=int(end_day))


def synth_portfolio(config: dict, rng) -> tuple:
    """Portfolio plus its generator truth from a plain config dict.

    Keys: n_claims (default 5000), start/end (ISO dates), dependence preset,
    or a full "model" dict overriding the preset entirely.
    """
    n_claims = int(config.get("n_claims", 5000))
    start = parse_iso(config.get("start", "2016-01-01"))
    end = parse_iso(config.get("end", "2021-12-31"))
    if "model" in config:
        model = GranularModel.from_dict(config["model"])
    else:
        model = default_model(
            n_claims, start, end, config.get("dependence", "independence")
        )
    portfolio = synthesize(
        model, start, end, rng, match_gap_days=int(config.get("match_gap_days", 7))
    )
    return portfolio, model
