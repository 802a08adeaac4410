"""Posterior-predictive curves, event-time sampling, and outcome probabilities.

All predictive quantities average over the kept posterior draws: the
predictive reliability at t is the draw-average of exp(-Lambda(t)) and
the predictive density is the draw-average of hazard times survival.
Event times are sampled by inverting the predictive reliability with
bracketed bisection in log-time, which is monotone-safe and converges to
relative tolerance well below 1e-8 in the fixed iteration budget.  Draws
falling beyond the configured horizon come back flagged as censored.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special as sps

from .mcmc import PosteriorSamples
from .model import CovariatePath, RiskKind

__all__ = [
    "RiskCurves",
    "EventTimeDraw",
    "ClassificationResult",
    "predictive_reliability",
    "predictive_density",
    "sample_event_time",
    "classify",
]

DEFAULT_HORIZON_FACTOR = 10.0
_BISECT_ITERS = 60
_BRACKET_SHRINK = 1e-12
_CHUNK = 4096


class RiskCurves:
    """Posterior-predictive evaluator for one loan profile and one risk.

    Precomputes per-draw linear predictors for every covariate interval,
    then evaluates survival and density on arbitrary time grids as
    (draws x times) arrays.  Instances are immutable and reusable across
    grids.
    """

    def __init__(self, path: CovariatePath, samples: PosteriorSamples, risk: RiskKind):
        if samples.n_draws == 0:
            raise ValueError("need at least one posterior draw")
        if path.p != samples.p:
            raise ValueError(
                f"path has {path.p} covariates but draws carry {samples.p}"
            )
        if risk is RiskKind.DEFAULT:
            mu, sigma2, theta = samples.mu_default, samples.sigma2_default, samples.theta_default
        else:
            mu, sigma2, theta = samples.mu_prepay, samples.sigma2_prepay, samples.theta_prepay
        self.path = path
        self.risk = risk
        self._mu = mu[:, None]  # (G, 1)
        self._sigma = np.sqrt(sigma2)[:, None]
        self._etas = theta @ path.values.T  # (G, m)
        self._bounds = path.boundaries

    @property
    def n_draws(self) -> int:
        return self._mu.shape[0]

    @property
    def location_draws(self) -> np.ndarray:
        """Per-draw log-time locations, shape (G,)."""
        return self._mu.ravel()

    def _h0(self, t: np.ndarray) -> np.ndarray:
        """Integrated baseline rate at positive times, per draw: (G, k)."""
        z = (np.log(t)[None, :] - self._mu) / self._sigma
        return -sps.log_ndtr(-z)

    def _log_survival(self, times: np.ndarray) -> np.ndarray:
        """-Lambda(t) per draw on a positive time grid: (G, k)."""
        bounds = self._bounds
        lam = np.zeros((self.n_draws, times.size))
        for j in range(self.path.m):
            lo, hi = bounds[j], bounds[j + 1]
            clipped = np.clip(times, lo, hi)  # stays positive: times > 0
            piece = self._h0(clipped)
            if lo > 0.0:
                piece = piece - self._h0(np.full(1, lo))
            np.maximum(piece, 0.0, out=piece)
            with np.errstate(invalid="ignore", over="ignore"):
                contrib = np.exp(self._etas[:, j])[:, None] * piece
            lam += np.where(np.isnan(contrib), 0.0, contrib)
        return -lam

    def reliability(self, times) -> np.ndarray:
        """Draw-averaged survival on a grid of positive times."""
        times = _check_times(times)
        return np.exp(self._log_survival(times)).mean(axis=0)

    def density(self, times) -> np.ndarray:
        """Draw-averaged event-time density on a grid of positive times."""
        times = _check_times(times)
        logt = np.log(times)[None, :]
        z = (logt - self._mu) / self._sigma
        log_pdf = -0.5 * np.log(2.0 * math.pi * self._sigma**2) - logt - 0.5 * z * z
        log_r = log_pdf - sps.log_ndtr(-z)
        j = np.searchsorted(self._bounds, times, side="left") - 1
        eta_at_t = self._etas[:, j]
        with np.errstate(over="ignore"):
            out = np.exp(log_r + eta_at_t + self._log_survival(times)).mean(axis=0)
        return out


def _check_times(times) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(times, dtype=float))
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("times must be a nonempty one-dimensional array")
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0.0):
        raise ValueError("times must be positive and finite")
    return arr


def predictive_reliability(
    path: CovariatePath, samples: PosteriorSamples, risk: RiskKind, times
) -> np.ndarray:
    """Posterior-mean survival curve of one risk on a time grid."""
    return RiskCurves(path, samples, risk).reliability(times)


def predictive_density(
    path: CovariatePath, samples: PosteriorSamples, risk: RiskKind, times
) -> np.ndarray:
    """Posterior-mean event-time density of one risk on a time grid."""
    return RiskCurves(path, samples, risk).density(times)


def _invert_curve(curves: RiskCurves, u: np.ndarray, horizon: float) -> tuple[np.ndarray, np.ndarray]:
    """Times where the predictive reliability crosses each u, capped at horizon.

    Returns (times, censored).  Censored entries sit exactly at the
    horizon.  Bisection runs on log-time over [horizon * 1e-12, horizon].
    """
    r_horizon = float(curves.reliability(np.array([horizon]))[0])
    censored = u < r_horizon
    times = np.full(u.shape, float(horizon))
    idx = np.flatnonzero(~censored)
    for start in range(0, idx.size, _CHUNK):
        sel = idx[start : start + _CHUNK]
        target = u[sel]
        lo = np.full(sel.size, math.log(horizon * _BRACKET_SHRINK))
        hi = np.full(sel.size, math.log(horizon))
        for _ in range(_BISECT_ITERS):
            mid = 0.5 * (lo + hi)
            above = curves.reliability(np.exp(mid)) > target
            lo = np.where(above, mid, lo)
            hi = np.where(above, hi, mid)
        times[sel] = np.exp(0.5 * (lo + hi))
    return times, censored


@dataclass(frozen=True)
class EventTimeDraw:
    """One sampled event time; censored means it hit the horizon cap."""

    time: float
    censored: bool


def sample_event_time(
    path: CovariatePath,
    samples: PosteriorSamples,
    risk: RiskKind,
    rng: np.random.Generator,
    horizon: float = 300.0,
) -> EventTimeDraw:
    """Draw one event time from the posterior-predictive law of a risk.

    Inverse-CDF sampling: u ~ Uniform(0,1) mapped through the predictive
    reliability.  Events landing beyond ``horizon`` return the horizon
    itself with ``censored=True``.
    """
    if not (horizon > 0.0 and math.isfinite(horizon)):
        raise ValueError(f"horizon must be positive and finite, got {horizon}")
    curves = RiskCurves(path, samples, risk)
    u = np.array([rng.uniform()])
    times, censored = _invert_curve(curves, u, horizon)
    return EventTimeDraw(time=float(times[0]), censored=bool(censored[0]))


@dataclass(frozen=True)
class ClassificationResult:
    """Monte Carlo outcome probabilities for one loan profile.

    The three probabilities sum to exactly 1.0 when added in the order
    p_default + p_prepay + p_mature.  Counts are the raw simulation
    tallies; ``n_horizon_capped`` says how many latent draws (across both
    risks) hit the simulation horizon, all of which imply maturation.
    """

    p_default: float
    p_prepay: float
    p_mature: float
    n_sims: int
    n_default: int
    n_prepay: int
    n_mature: int
    horizon: float
    n_horizon_capped: int


def _exact_partition(n_default: int, n_prepay: int, n_sims: int) -> tuple[float, float, float]:
    """Probabilities from counts such that p_d + p_p + p_m == 1.0 exactly."""
    n_mature = n_sims - n_default - n_prepay
    if n_mature == n_sims:
        return 0.0, 0.0, 1.0
    p_default = n_default / n_sims
    if n_mature == 0:
        return p_default, 1.0 - p_default, 0.0
    p_prepay = n_prepay / n_sims
    return p_default, p_prepay, 1.0 - (p_default + p_prepay)


def classify(
    path: CovariatePath,
    samples: PosteriorSamples,
    maturity: float,
    n_sims: int,
    rng: np.random.Generator,
) -> ClassificationResult:
    """Simulate the competing risks to outcome probabilities for one loan.

    Draws ``n_sims`` latent pairs (default time, prepay time) from the
    two predictive laws (default uniforms first, then prepay), then
    partitions: mature if both times reach ``maturity``, else default if
    the default time is soonest (ties to default), else prepay.  The
    horizon is ``DEFAULT_HORIZON_FACTOR * maturity``; capped draws land
    beyond maturity and therefore count toward maturation.
    """
    if not (maturity > 0.0 and math.isfinite(maturity)):
        raise ValueError(f"maturity must be positive and finite, got {maturity}")
    if n_sims < 1:
        raise ValueError("n_sims must be at least 1")
    horizon = DEFAULT_HORIZON_FACTOR * maturity
    u_default = rng.uniform(size=n_sims)
    u_prepay = rng.uniform(size=n_sims)
    t_default, cap_d = _invert_curve(RiskCurves(path, samples, RiskKind.DEFAULT), u_default, horizon)
    t_prepay, cap_p = _invert_curve(RiskCurves(path, samples, RiskKind.PREPAY), u_prepay, horizon)

    mature = (t_default >= maturity) & (t_prepay >= maturity)
    default = ~mature & (t_default <= t_prepay)
    n_mature = int(np.count_nonzero(mature))
    n_default = int(np.count_nonzero(default))
    n_prepay = n_sims - n_mature - n_default
    p_default, p_prepay, p_mature = _exact_partition(n_default, n_prepay, n_sims)
    return ClassificationResult(
        p_default=p_default,
        p_prepay=p_prepay,
        p_mature=p_mature,
        n_sims=n_sims,
        n_default=n_default,
        n_prepay=n_prepay,
        n_mature=n_mature,
        horizon=horizon,
        n_horizon_capped=int(np.count_nonzero(cap_d) + np.count_nonzero(cap_p)),
    )
