"""Payment amount models: iid severities and an order-autoregressive chain.

The iid variants draw every payment of a claim from one distribution. The
order-autoregressive variant draws the first payment from a base
distribution and each later payment as a damped multiple of its predecessor
plus additive noise on the original scale,

    X_j = alpha_j * X_{j-1} + eps_j,   eps_j ~ Normal(0, sigma_eps),

floored at a small positive amount. alpha_j is estimated separately per
payment order with sparse tail orders pooled; the last coefficient extends
to all deeper orders. With sigma_eps = 0 and all alpha_j = a the chain is a
deterministic geometric run-off, which is handy for calibration checks.
"""

from __future__ import annotations

import warnings
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
from scipy import special, stats
from scipy.stats import norm

from .fitutil import observed_info_se


@dataclass(frozen=True)
class LogNormalSeverity:
    mu: float
    sigma: float
    se: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")

    def mean(self) -> float:
        return float(np.exp(self.mu + 0.5 * self.sigma**2))

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            z = (np.log(x) - self.mu) / self.sigma
            out = -np.log(x * self.sigma * np.sqrt(2 * np.pi)) - 0.5 * z * z
        return np.where(x > 0, out, -np.inf)

    def sample(self, n, rng):
        return rng.lognormal(self.mu, self.sigma, n)

    def to_dict(self) -> dict:
        return {"family": "lognormal", "mu": float(self.mu), "sigma": float(self.sigma)}


@dataclass(frozen=True)
class GammaSeverity:
    shape: float
    scale: float
    se: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.shape <= 0 or self.scale <= 0:
            raise ValueError("shape and scale must be positive")

    def mean(self) -> float:
        return float(self.shape * self.scale)

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = (
                (self.shape - 1.0) * np.log(x)
                - x / self.scale
                - special.gammaln(self.shape)
                - self.shape * np.log(self.scale)
            )
        return np.where(x > 0, out, -np.inf)

    def sample(self, n, rng):
        return rng.gamma(self.shape, self.scale, n)

    def to_dict(self) -> dict:
        return {"family": "gamma", "shape": float(self.shape), "scale": float(self.scale)}


def fit_lognormal(amounts) -> LogNormalSeverity:
    x = _positive(amounts, "lognormal")
    logs = np.log(x)
    mu = float(np.mean(logs))
    sigma = float(np.std(logs))
    if sigma <= 0:
        raise ValueError("amounts are constant; lognormal fit is degenerate")
    n = x.size
    return LogNormalSeverity(
        mu, sigma, se={"mu": sigma / np.sqrt(n), "sigma": sigma / np.sqrt(2.0 * n)}
    )


def fit_gamma(amounts) -> GammaSeverity:
    x = _positive(amounts, "gamma")
    # Newton on the shape profile likelihood; moment start
    m, v = float(np.mean(x)), float(np.var(x))
    if v <= 0:
        raise ValueError("amounts are constant; gamma fit is degenerate")
    k = m * m / v
    s = float(np.log(m) - np.mean(np.log(x)))
    for _ in range(60):
        num = np.log(k) - special.digamma(k) - s
        den = 1.0 / k - special.polygamma(1, k)
        step = num / den
        k_new = k - step
        if k_new <= 0:
            k_new = k / 2.0
        if abs(k_new - k) < 1e-12 * max(1.0, k):
            k = k_new
            break
        k = k_new
    scale = m / k
    n = x.size

    def nll(p):
        return -float(np.sum(GammaSeverity(p[0], p[1]).logpdf(x)))

    se_vec = observed_info_se(nll, np.array([k, scale]))
    return GammaSeverity(
        float(k), float(scale), se={"shape": float(se_vec[0]), "scale": float(se_vec[1])}
    )


def _positive(amounts, label):
    x = np.asarray(amounts, dtype=float)
    bad = ~(x > 0)
    if bad.any():
        warnings.warn(
            f"dropping {int(bad.sum())} non-positive amounts from the {label} fit"
        )
        x = x[~bad]
    if x.size < 50:
        raise ValueError("need at least 50 positive amounts")
    return x


_IID_FITTERS = {"lognormal": fit_lognormal, "gamma": fit_gamma}


@dataclass(frozen=True)
class OrderARSeverity:
    """First payment from ``base``; later payments damped plus additive noise.

    With innovation="base" the additive term is drawn from the first-payment
    law instead of a centered normal; all-zero coefficients then reproduce
    the iid model exactly.
    """

    base: LogNormalSeverity | GammaSeverity
    alphas: tuple
    sigma_eps: float
    floor: float = 0.01
    innovation: str = "normal"
    se: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if len(self.alphas) == 0:
            raise ValueError("need at least one autoregressive coefficient")
        if self.sigma_eps < 0:
            raise ValueError("sigma_eps must be >= 0")
        if self.floor <= 0:
            raise ValueError("floor must be positive")
        if self.innovation not in ("normal", "base"):
            raise ValueError("innovation must be 'normal' or 'base'")

    def alpha_for(self, order: int) -> float:
        """Coefficient applied to payment ``order`` to produce order + 1."""
        if order < 1:
            raise ValueError("order starts at 1")
        return float(self.alphas[min(order, len(self.alphas)) - 1])

    def _innov(self, k: int, rng) -> np.ndarray:
        if self.innovation == "base":
            return self.base.sample(k, rng)
        if self.sigma_eps > 0:
            return rng.normal(0.0, self.sigma_eps, k)
        return np.zeros(k)

    def simulate_chain(self, n_payments: int, rng) -> np.ndarray:
        out = np.empty(n_payments)
        if n_payments == 0:
            return out
        out[0] = self.base.sample(1, rng)[0]
        for j in range(1, n_payments):
            eps = self._innov(1, rng)[0]
            out[j] = max(self.alpha_for(j) * out[j - 1] + eps, self.floor)
        return out

    def simulate_flat(self, counts, rng) -> np.ndarray:
        """Amounts for many claims at once, claim-major order.

        counts[i] payments for claim i; the returned flat array lists claim
        0's payments first, then claim 1's, and so on. Vectorized over claims
        by payment order, so runtime scales with the deepest chain, not the
        number of claims.
        """
        counts = np.asarray(counts, dtype=np.int64)
        total = int(counts.sum())
        flat = np.empty(total)
        if total == 0:
            return flat
        offsets = np.cumsum(counts) - counts
        active = counts >= 1
        cur = np.zeros(counts.size)
        cur[active] = self.base.sample(int(active.sum()), rng)
        flat[offsets[active]] = cur[active]
        max_n = int(counts.max())
        for j in range(2, max_n + 1):
            active = counts >= j
            k = int(active.sum())
            nxt = self.alpha_for(j - 1) * cur[active] + self._innov(k, rng)
            nxt = np.maximum(nxt, self.floor)
            flat[offsets[active] + (j - 1)] = nxt
            cur[active] = nxt
        return flat

    def continue_flat(self, counts, k_obs, last_obs, rng) -> np.ndarray:
        """Future amounts for claims with observed payment history.

        counts[i] future payments for claim i; k_obs[i] payments already
        made; last_obs[i] the most recent observed amount (ignored when
        k_obs[i] = 0, where the chain starts fresh from the base
        distribution). Flat claim-major output like simulate_flat.
        """
        counts = np.asarray(counts, dtype=np.int64)
        k_obs = np.asarray(k_obs, dtype=np.int64)
        last_obs = np.asarray(last_obs, dtype=float)
        total = int(counts.sum())
        flat = np.empty(total)
        if total == 0:
            return flat
        offsets = np.cumsum(counts) - counts
        cur = np.where(k_obs > 0, last_obs, 0.0)
        alpha_arr = np.asarray(self.alphas)
        max_n = int(counts.max())
        for j in range(1, max_n + 1):
            active = counts >= j
            fresh = active & (k_obs == 0) & (j == 1)
            if fresh.any():
                cur[fresh] = self.base.sample(int(fresh.sum()), rng)
            cont = active & ~fresh
            if cont.any():
                order = k_obs[cont] + j - 1  # global order of the predecessor
                a = alpha_arr[np.minimum(order, alpha_arr.size) - 1]
                nxt = a * cur[cont] + self._innov(int(cont.sum()), rng)
                cur[cont] = np.maximum(nxt, self.floor)
            flat[offsets[active] + (j - 1)] = cur[active]
        return flat

    def to_dict(self) -> dict:
        return {
            "family": "order_ar",
            "base": self.base.to_dict(),
            "alphas": [float(a) for a in self.alphas],
            "sigma_eps": float(self.sigma_eps),
            "floor": float(self.floor),
            "innovation": self.innovation,
        }


def iid_simulate_flat(model, counts, rng) -> np.ndarray:
    counts = np.asarray(counts, dtype=np.int64)
    return model.sample(int(counts.sum()), rng)


def simulate_amounts(model, counts, rng) -> np.ndarray:
    """Flat claim-major amounts for either severity structure."""
    if isinstance(model, OrderARSeverity):
        return model.simulate_flat(counts, rng)
    return iid_simulate_flat(model, counts, rng)


def amount_sequences(portfolio, claim_type=None) -> list:
    """Per-claim payment amount vectors in payment-time order."""
    claims = portfolio.claims if claim_type is None else portfolio.by_type(claim_type)
    return [
        np.array([p.amount for p in c.payments], dtype=float)
        for c in claims
        if c.payments
    ]


def fit_order_ar(
    sequences,
    base_family: str = "lognormal",
    max_order: int = 5,
    min_obs: int = 50,
    floor: float = 0.01,
) -> OrderARSeverity:
    """Least-squares coefficients per payment order, pooled noise scale.

    Transitions at order j (payment j to j+1) with fewer than min_obs
    observations are pooled into the previous coefficient; max_order caps the
    number of distinct coefficients regardless.
    """
    firsts = np.array([s[0] for s in sequences if s.size >= 1], dtype=float)
    base = _IID_FITTERS[base_family](firsts)
    prev, nxt, order = [], [], []
    for s in sequences:
        for j in range(1, s.size):
            prev.append(s[j - 1])
            nxt.append(s[j])
            order.append(j)
    if not prev:
        raise ValueError("no multi-payment claims; cannot fit the chain")
    prev = np.asarray(prev)
    nxt = np.asarray(nxt)
    order = np.asarray(order)

    deepest = int(order.max())
    buckets = []  # list of boolean masks, one per fitted coefficient
    pending = np.zeros(order.size, dtype=bool)
    for j in range(1, deepest + 1):
        mask = pending | (order == j)
        if j < deepest and (j >= max_order or int(mask.sum()) < min_obs):
            pending = mask
            continue
        buckets.append(mask)
        pending = np.zeros(order.size, dtype=bool)
    if pending.any():
        if buckets:
            buckets[-1] = buckets[-1] | pending
        else:
            buckets.append(pending)

    coefs, denoms, resid = [], [], []
    for mask in buckets:
        xp, xn = prev[mask], nxt[mask]
        denom = float(np.sum(xp * xp))
        a = float(np.sum(xp * xn) / denom)
        coefs.append(a)
        denoms.append(denom)
        resid.append(xn - a * xp)
    resid = np.concatenate(resid)
    dof = max(resid.size - len(coefs), 1)
    sigma_eps = float(np.sqrt(np.sum(resid**2) / dof))

    # expand bucket coefficients to one alpha per order, so pooling of a
    # sparse interior order can never shift deeper orders' coefficients
    per_order = np.empty(min(deepest, max_order), dtype=float)
    per_order_den = np.empty(per_order.size, dtype=float)
    for i, mask in enumerate(buckets):
        covered = np.unique(order[mask])
        for j in covered:
            if j <= per_order.size:
                per_order[j - 1] = coefs[i]
                per_order_den[j - 1] = denoms[i]
    se = {
        f"alpha_{j + 1}": (
            sigma_eps / np.sqrt(per_order_den[j]) if per_order_den[j] > 0 else np.nan
        )
        for j in range(per_order.size)
    }
    se["sigma_eps"] = sigma_eps / np.sqrt(2.0 * dof)
    return OrderARSeverity(
        base, tuple(float(a) for a in per_order), sigma_eps, floor=floor, se=se
    )


def fit_severity(
    portfolio,
    claim_type,
    family: str = "lognormal",
    structure: str = "iid",
    **kwargs,
):
    """Fit one claim type's severity model from a portfolio."""
    if structure == "iid":
        amounts = np.concatenate(
            amount_sequences(portfolio, claim_type) or [np.empty(0)]
        )
        return _IID_FITTERS[family](amounts)
    if structure == "order_ar":
        return fit_order_ar(
            amount_sequences(portfolio, claim_type), base_family=family, **kwargs
        )
    raise ValueError(f"unknown severity structure {structure!r}")


def severity_from_dict(d: dict):
    fam = d["family"]
    if fam == "lognormal":
        return LogNormalSeverity(d["mu"], d["sigma"])
    if fam == "gamma":
        return GammaSeverity(d["shape"], d["scale"])
    if fam == "order_ar":
        return OrderARSeverity(
            base=severity_from_dict(d["base"]),
            alphas=tuple(d["alphas"]),
            sigma_eps=d["sigma_eps"],
            floor=d.get("floor", 0.01),
            innovation=d.get("innovation", "normal"),
        )
    raise ValueError(f"unknown severity family {fam!r}")


def normal_scores(amounts) -> np.ndarray:
    """Rank-based normal scores, rank / (n + 1), for dependence diagnostics."""
    x = np.asarray(amounts, dtype=float)
    ranks = stats.rankdata(x, method="average")
    return norm.ppf(ranks / (x.size + 1.0))


def order_pairs(sequences, j: int, k: int):
    """Amount pairs (payment j, payment k) across claims deep enough for both."""
    if j < 1 or k < 1:
        raise ValueError("payment orders start at 1")
    need = max(j, k)
    rows = [(s[j - 1], s[k - 1]) for s in sequences if s.size >= need]
    if not rows:
        return np.empty(0), np.empty(0)
    arr = np.asarray(rows, dtype=float)
    return arr[:, 0], arr[:, 1]


def normal_score_pairs(x, y):
    """Each margin rank-transformed then probit-mapped; plot-ready pairs."""
    return normal_scores(x), normal_scores(y)


def repeated_amounts(portfolio, min_count: int = 21, claim_type=None) -> list:
    """Exact-duplicate amount report, largest multiplicities first.

    Benefit-scale or tariff payments repeat legitimately, but a heavy spike
    of one amount usually signals data mangling; this surfaces candidates
    for review without judging them.
    """
    claims = portfolio.claims if claim_type is None else portfolio.by_type(claim_type)
    counter = Counter(
        round(p.amount, 2) for c in claims for p in c.payments
    )
    hits = [(amt, cnt) for amt, cnt in counter.items() if cnt >= min_count]
    hits.sort(key=lambda t: (-t[1], t[0]))
    return hits
