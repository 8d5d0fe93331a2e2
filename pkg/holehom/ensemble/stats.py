import logging
from dataclasses import asdict, dataclass
from typing import Callable, Dict, Mapping, Optional, Sequence

import numpy as np

from holehom.errors import DegenerateVariance, TooFewTailPoints
from holehom.quantify.fits import loglog_slope

logger = logging.getLogger(__name__)

QUANTILES = (0.05, 0.5, 0.95)


@dataclass(frozen=True)
class ConfidenceInterval:
    estimate: float
    low: float
    high: float
    level: float
    resamples: int

    def excludes(self, value: float) -> bool:
        return not self.low <= value <= self.high

    def to_dict(self) -> dict:
        return asdict(self)


def percentile_interval(estimate: float, draws: Sequence[float], level: float, empty: Exception) -> ConfidenceInterval:
    """Percentile interval of the bootstrap draws around estimate; raises empty when no draw survived"""
    if len(draws) == 0:
        raise empty
    alpha = 1.0 - level
    return ConfidenceInterval(
        estimate=float(estimate),
        low=float(np.percentile(draws, 100 * alpha / 2)),
        high=float(np.percentile(draws, 100 * (1 - alpha / 2))),
        level=level,
        resamples=len(draws),
    )


def bootstrap(values: Sequence[float],
              statistic: Callable[[np.ndarray], float] = np.mean,
              resamples: int = 1000,
              level: float = 0.95,
              seed: int = 0,
              ) -> ConfidenceInterval:
    """Percentile bootstrap interval for statistic(values)"""
    values = np.asarray(values, dtype=float)
    if len(values) == 0:
        raise ValueError("Cannot bootstrap an empty sample")
    rng = np.random.default_rng(seed)
    draws = [statistic(values[rng.integers(0, len(values), len(values))]) for _ in range(resamples)]
    return percentile_interval(statistic(values), draws, level, ValueError(f"Bootstrap needs at least one resample, got {resamples}"))


def aggregate(values: Sequence[float]) -> Dict[str, float]:
    """Mean, sample variance and the 5/50/95% quantiles"""
    values = np.asarray(values, dtype=float)
    if len(values) == 0:
        return {"count": 0, "mean": float("nan"), "var": float("nan"), "q05": float("nan"), "q50": float("nan"), "q95": float("nan")}
    q05, q50, q95 = np.quantile(values, QUANTILES)
    return {
        "count": int(len(values)),
        "mean": float(values.mean()),
        "var": float(values.var(ddof=1)) if len(values) > 1 else 0.0,
        "q05": float(q05),
        "q50": float(q50),
        "q95": float(q95),
    }


@dataclass(frozen=True)
class ScalingFit:
    slope: float
    interval: ConfidenceInterval
    points: Dict[float, float]

    def to_dict(self) -> dict:
        return {"slope": self.slope, "interval": self.interval.to_dict(), "points": {str(k): v for k, v in self.points.items()}}


def fit_variance_scaling(samples: Mapping[float, Sequence[float]], resamples: int = 1000, seed: int = 0, level: float = 0.95) -> ScalingFit:
    """Slope of log Var[A_L] against log L, bootstrapped within each L

    Raises:
        DegenerateVariance: some L has zero sample variance, or every resample does
    """
    sizes = sorted(samples)
    if len(sizes) < 3:
        raise ValueError(f"Variance scaling needs at least three box sizes, got {len(sizes)}")
    arrays = {L: np.asarray(samples[L], dtype=float) for L in sizes}
    variances = {L: float(arrays[L].var(ddof=1)) for L in sizes}
    for L, variance in variances.items():
        if not variance > 0:
            raise DegenerateVariance(f"Variance of the averaged observable is zero at L={L}")
    slope = loglog_slope(sizes, [variances[L] for L in sizes]).slope

    rng = np.random.default_rng(seed)
    draws = []
    for _ in range(resamples):
        resampled = []
        for L in sizes:
            values = arrays[L][rng.integers(0, len(arrays[L]), len(arrays[L]))]
            resampled.append(values.var(ddof=1))
        if min(resampled) > 0:
            draws.append(loglog_slope(sizes, resampled).slope)
    interval = percentile_interval(slope, draws, level, DegenerateVariance("Every bootstrap resample has a zero variance at some L"))
    return ScalingFit(slope=slope, interval=interval, points=variances)


@dataclass(frozen=True)
class DecayFit:
    eps_hat: Optional[float]
    interval: Optional[ConfidenceInterval]
    means: Dict[float, float]
    monotone: bool
    degenerate: bool = False

    def to_dict(self) -> dict:
        return {
            "eps_hat": self.eps_hat,
            "interval": self.interval.to_dict() if self.interval else None,
            "means": {str(k): v for k, v in self.means.items()},
            "monotone": self.monotone,
            "degenerate": self.degenerate,
        }


def fit_decay(samples: Mapping[float, Sequence[float]], resamples: int = 1000, seed: int = 0, level: float = 0.95) -> DecayFit:
    """eps_hat = -slope of the per-T ensemble mean against T on log-log axes

    All-zero means (homogeneous medium) are excluded and flagged degenerate;
    non-monotone means still yield a fit, flagged.

    Raises:
        DegenerateVariance: no bootstrap resample keeps every mean positive
    """
    times = sorted(samples)
    if len(times) < 3:
        raise ValueError(f"T-decay fit needs at least three values of T, got {len(times)}")
    arrays = {T: np.asarray(samples[T], dtype=float) for T in times}
    means = {T: float(arrays[T].mean()) for T in times}
    if all(abs(mean) <= 1e-300 for mean in means.values()):
        logger.info("T-decay quantity vanishes identically; excluded from the fit")
        return DecayFit(eps_hat=None, interval=None, means=means, monotone=True, degenerate=True)
    positive = [T for T in times if means[T] > 0]
    if len(positive) < 2:
        return DecayFit(eps_hat=None, interval=None, means=means, monotone=False, degenerate=True)
    sequence = [means[T] for T in times]
    monotone = all(b <= a for a, b in zip(sequence, sequence[1:]))
    if not monotone:
        logger.warning("T-decay means are not monotone; fit flagged")
    eps_hat = -loglog_slope(positive, [means[T] for T in positive]).slope

    rng = np.random.default_rng(seed)
    draws = []
    for _ in range(resamples):
        resampled = [arrays[T][rng.integers(0, len(arrays[T]), len(arrays[T]))].mean() for T in positive]
        if min(resampled) > 0:
            draws.append(-loglog_slope(positive, resampled).slope)
    interval = percentile_interval(eps_hat, draws, level, DegenerateVariance("Every bootstrap resample has a vanishing T-decay mean"))
    return DecayFit(eps_hat=eps_hat, interval=interval, means=means, monotone=monotone)


@dataclass(frozen=True)
class TailFit:
    gamma: float
    interval: ConfidenceInterval
    infinite_count: int
    finite_count: int
    stretched_exponential: bool
    power_law_residual: float
    stretched_residual: float

    def to_dict(self) -> dict:
        data = asdict(self)
        data["interval"] = self.interval.to_dict()
        return data


def hazen_survival(values: np.ndarray):
    """Distinct sorted values and their survival S = 1 - (mid rank - 0.5) / n"""
    values = np.sort(np.asarray(values, dtype=float))
    n = len(values)
    distinct, first, counts = np.unique(values, return_index=True, return_counts=True)
    mid_rank = first + 0.5 * (counts + 1)
    return distinct, 1.0 - (mid_rank - 0.5) / n


def _tail_points(values: np.ndarray):
    distinct, survival = hazen_survival(values)
    keep = (distinct >= np.median(values)) & (distinct > 0) & (survival > 0) & (survival < 1)
    return distinct[keep], survival[keep]


def _stretched_fit(values: np.ndarray):
    r, survival = _tail_points(values)
    if len(r) < 3:
        raise TooFewTailPoints(f"Only {len(r)} distinct upper-tail points")
    fit = loglog_slope(r, -np.log(survival))
    return fit, r, survival


def rstar_tail_fit(samples: Sequence[float],
                   resamples: int = 1000,
                   seed: int = 0,
                   level: float = 0.95,
                   min_samples: int = 200,
                   exponent_floor: float = 0.1,
                   ) -> TailFit:
    """Fit P(r* > r) ~ exp(-c r^gamma) on the upper half of the support

    Regression of log(-log S) on log r with Hazen plotting positions. Infinite
    sentinels are counted and left out. The tail is flagged as not stretched
    exponential when the interval reaches below exponent_floor or when a pure
    power law log S = a - b log r fits the tail better.

    Raises:
        TooFewTailPoints: the sample or every resample has fewer than three upper-tail points
    """
    values = np.asarray(samples, dtype=float)
    finite = values[np.isfinite(values)]
    infinite_count = int(len(values) - len(finite))
    if len(finite) < min_samples:
        raise ValueError(f"Tail fit needs at least {min_samples} finite samples, got {len(finite)}")

    fit, r, survival = _stretched_fit(finite)
    gamma = fit.slope
    predicted = -np.exp(fit.intercept) * r ** gamma
    stretched_residual = float(np.sum((np.log(survival) - predicted) ** 2))
    power = np.polyfit(np.log(r), np.log(survival), 1)
    power_residual = float(np.sum((np.log(survival) - np.polyval(power, np.log(r))) ** 2))

    rng = np.random.default_rng(seed)
    draws = []
    for _ in range(resamples):
        try:
            draws.append(_stretched_fit(finite[rng.integers(0, len(finite), len(finite))])[0].slope)
        except TooFewTailPoints:
            continue
    interval = percentile_interval(gamma, draws, level, TooFewTailPoints("No bootstrap resample has three distinct upper-tail points"))
    stretched = interval.low > exponent_floor and stretched_residual <= power_residual
    if not stretched:
        logger.info(f"r* tail flagged as not stretched exponential (gamma {gamma:.3f}, CI low {interval.low:.3f})")
    return TailFit(
        gamma=gamma,
        interval=interval,
        infinite_count=infinite_count,
        finite_count=int(len(finite)),
        stretched_exponential=stretched,
        power_law_residual=power_residual,
        stretched_residual=stretched_residual,
    )
