"""Within-claim payment counts: an inhomogeneous Poisson process in claim time.

Claim time tau is measured in years since the reporting date. Both intensity
families decay monotonically, payments thin out as the claim ages:

* exponential: rate(tau) = lam0 * exp(-beta * tau)
* power:       rate(tau) = lam0 * (1 + tau)^(-beta), beta > 1

Both have closed-form cumulative intensities with closed-form inverses, which
the simulation engine uses to place payment times given a count.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, special, stats

from .fitutil import observed_info_cov


@dataclass(frozen=True)
class ExponentialDecay:
    lam0: float
    beta: float

    def __post_init__(self):
        if not (self.lam0 > 0 and self.beta > 0):
            raise ValueError("exponential decay needs lam0 > 0 and beta > 0")

    def rate(self, tau):
        tau = np.asarray(tau, dtype=float)
        return self.lam0 * np.exp(-self.beta * tau)

    def cumulative(self, tau):
        tau = np.asarray(tau, dtype=float)
        return self.lam0 * -np.expm1(-self.beta * tau) / self.beta

    def cumulative_inv(self, x):
        x = np.asarray(x, dtype=float)
        return -np.log1p(-self.beta * x / self.lam0) / self.beta

    def total(self):
        return self.lam0 / self.beta

    def to_dict(self):
        return {"family": "exponential", "lam0": self.lam0, "beta": self.beta}


@dataclass(frozen=True)
class PowerDecay:
    lam0: float
    beta: float

    def __post_init__(self):
        if not (self.lam0 > 0 and self.beta > 1):
            raise ValueError("power decay needs lam0 > 0 and beta > 1 (finite total)")

    def rate(self, tau):
        tau = np.asarray(tau, dtype=float)
        return self.lam0 * np.power(1.0 + tau, -self.beta)

    def cumulative(self, tau):
        tau = np.asarray(tau, dtype=float)
        return self.lam0 * (np.power(1.0 + tau, 1.0 - self.beta) - 1.0) / (1.0 - self.beta)

    def cumulative_inv(self, x):
        x = np.asarray(x, dtype=float)
        return np.power(1.0 - x * (self.beta - 1.0) / self.lam0, 1.0 / (1.0 - self.beta)) - 1.0

    def total(self):
        return self.lam0 / (self.beta - 1.0)

    def to_dict(self):
        return {"family": "power", "lam0": self.lam0, "beta": self.beta}


INTENSITY_FAMILIES = {"exponential": ExponentialDecay, "power": PowerDecay}


def intensity_from_dict(d):
    cls = INTENSITY_FAMILIES.get(d["family"])
    if cls is None:
        raise ValueError(f"unknown intensity family {d['family']!r}")
    return cls(d["lam0"], d["beta"])


@dataclass(frozen=True)
class CountProcess:
    """Poisson payment-count law N(tau) with mean Lambda(tau)."""

    intensity: object
    se: dict = field(default_factory=dict)
    cov: tuple = ()  # (lam0, beta) covariance rows from the observed information

    def count_logpmf(self, tau, n):
        lam = self.intensity.cumulative(tau)
        n = np.asarray(n)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(
                n < 0,
                -np.inf,
                np.where(
                    lam > 0,
                    n * np.log(np.maximum(lam, 1e-300)) - lam - special.gammaln(n + 1.0),
                    np.where(n == 0, 0.0, -np.inf),
                ),
            )
        return out

    def count_pmf(self, tau, n):
        return np.exp(self.count_logpmf(tau, n))

    def count_cdf(self, tau, n):
        """Q_tau(n) = P[N(tau) <= n]; n = -1 gives 0."""
        n = np.asarray(n, dtype=float)
        lam = self.intensity.cumulative(tau)
        out = stats.poisson.cdf(np.where(n < 0, -1.0, n), np.maximum(lam, 0.0))
        return np.where(n < 0, 0.0, out)

    def increment_logpmf(self, tau1, tau2, n):
        if np.any(np.asarray(tau2) < np.asarray(tau1)):
            raise ValueError("increment needs tau1 <= tau2")
        lam = self.intensity.cumulative(tau2) - self.intensity.cumulative(tau1)
        n = np.asarray(n)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(
                n < 0,
                -np.inf,
                np.where(
                    lam > 0,
                    n * np.log(np.maximum(lam, 1e-300)) - lam - special.gammaln(n + 1.0),
                    np.where(n == 0, 0.0, -np.inf),
                ),
            )

    def increment_pmf(self, tau1, tau2, n):
        return np.exp(self.increment_logpmf(tau1, tau2, n))

    def dq_dtau(self, tau, n):
        """d/dtau of the count cdf Q_tau(n).

        Q_tau(n) is non-increasing in tau (mass escapes upward as the mean
        grows), so the derivative is the negative Poisson pmf at n scaled by
        the rate: -rate(tau) * Lambda(tau)^n exp(-Lambda(tau)) / n!.
        """
        n = np.asarray(n, dtype=float)
        lam = self.intensity.cumulative(tau)
        rate = self.intensity.rate(tau)
        with np.errstate(divide="ignore", invalid="ignore"):
            logpmf = n * np.log(np.maximum(lam, 1e-300)) - lam - special.gammaln(n + 1.0)
        pmf = np.where(lam > 0, np.exp(logpmf), np.where(n == 0, 1.0, 0.0))
        return np.where(n < 0, 0.0, -rate * pmf)

    def simulate(self, tau_max, rng):
        """Payment times on (0, tau_max] by thinning against the rate(0) envelope."""
        return simulate_payment_times(self.intensity, 0.0, float(tau_max), rng)

    def simulate_increment(self, tau1, tau2, rng):
        """Payment times on (tau1, tau2] by thinning against the rate(tau1) envelope."""
        return simulate_payment_times(self.intensity, float(tau1), float(tau2), rng)

    def to_dict(self):
        return {
            "intensity": self.intensity.to_dict(),
            "se": dict(self.se),
            "cov": [list(row) for row in self.cov],
        }

    @classmethod
    def from_dict(cls, d):
        cov = tuple(tuple(row) for row in d.get("cov", []))
        return cls(intensity_from_dict(d["intensity"]), d.get("se", {}), cov)


def simulate_payment_times(intensity, tau1, tau2, rng) -> np.ndarray:
    """Thinning on (tau1, tau2]: homogeneous candidates at the left-edge rate,
    kept with probability rate(tau)/rate(tau1). Valid because both families
    decay monotonically."""
    if tau2 < tau1:
        raise ValueError("need tau1 <= tau2")
    if tau2 == tau1:
        return np.array([])
    envelope = float(intensity.rate(tau1))
    n_cand = rng.poisson(envelope * (tau2 - tau1))
    if n_cand == 0:
        return np.array([])
    cand = np.sort(rng.uniform(tau1, tau2, size=n_cand))
    keep = rng.random(n_cand) < intensity.rate(cand) / envelope
    return cand[keep]


def fit_intensity(payment_taus, horizons, family: str = "exponential"):
    """ML fit of a decaying payment intensity.

    Parameters
    ----------
    payment_taus : sequence of arrays
        Per-claim payment times in years since reporting.
    horizons : array
        Per-claim observation horizons (years from reporting to the cutoff).
    family : "exponential" or "power"

    The log-likelihood is sum(log rate(tau_event)) - sum(Lambda(horizon)).
    Returns a CountProcess with observed-information standard errors; a
    boundary solution flags the fit with se NaN and a warning.
    """
    horizons = np.asarray(horizons, dtype=float)
    if np.any(horizons < 0):
        raise ValueError("horizons must be nonnegative")
    if len(payment_taus) != horizons.size:
        raise ValueError("one horizon per claim required")
    events = (
        np.concatenate([np.asarray(ts, dtype=float) for ts in payment_taus])
        if len(payment_taus)
        else np.array([])
    )
    if events.size == 0:
        raise ValueError("no payment events: intensity not identifiable")
    if horizons.sum() <= 0:
        raise ValueError("zero total exposure: intensity not identifiable")
    cls = INTENSITY_FAMILIES.get(family)
    if cls is None:
        raise ValueError(f"unknown intensity family {family!r}")

    lam0_hint = max(events.size / horizons.sum(), 1e-6)
    if family == "exponential":
        bounds = [(1e-8, 1e4), (1e-6, 60.0)]
        x0 = [lam0_hint * 2.0, 1.0]
    else:
        bounds = [(1e-8, 1e4), (1.0 + 1e-6, 60.0)]
        x0 = [lam0_hint * 2.0, 2.0]

    def nll(x):
        inten = cls(x[0], x[1])
        return -float(
            np.sum(np.log(np.maximum(inten.rate(events), 1e-300)))
            - np.sum(inten.cumulative(horizons))
        )

    res = optimize.minimize(nll, x0=x0, method="L-BFGS-B", bounds=bounds)
    x = res.x
    at_bound = any(
        np.isclose(xi, lo) or np.isclose(xi, hi) for xi, (lo, hi) in zip(x, bounds)
    )
    if at_bound:
        import warnings

        warnings.warn(
            f"intensity fit at parameter bound (lam0={x[0]:.4g}, beta={x[1]:.4g}); "
            "estimates flagged, standard errors unreliable",
            stacklevel=2,
        )
        return CountProcess(
            cls(float(x[0]), float(x[1])), {"lam0": float("nan"), "beta": float("nan")}
        )
    cov = observed_info_cov(nll, x)
    if cov is None:
        se = {"lam0": float("nan"), "beta": float("nan")}
        cov_t = ()
    else:
        se = {"lam0": float(np.sqrt(cov[0, 0])), "beta": float(np.sqrt(cov[1, 1]))}
        cov_t = tuple(tuple(float(v) for v in row) for row in cov)
    return CountProcess(cls(float(x[0]), float(x[1])), se, cov_t)


def total_se(process: CountProcess) -> float:
    """Delta-method standard error of the expected total count Lambda(inf)."""
    inten = process.intensity
    if not process.cov:
        return float("nan")
    cov = np.asarray(process.cov, dtype=float)
    lam0, beta = inten.lam0, inten.beta
    if isinstance(inten, ExponentialDecay):
        grad = np.array([1.0 / beta, -lam0 / beta**2])
    else:
        grad = np.array([1.0 / (beta - 1.0), -lam0 / (beta - 1.0) ** 2])
    return float(np.sqrt(grad @ cov @ grad))
