"""Equilibrium-distribution analysis for wealth-exchange simulations.

Covers the stationary predictions of the homogeneous and heterogeneous
exchange models: the Gamma-shaped bulk f_n(x) with effective shape n(lambda),
Pareto upper tails of heterogeneous populations, relaxation-time estimation,
the wealth cutoff of the richest agent, and the decomposition of the global
distribution into per-agent Gamma mixtures.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special, stats


class DegenerateSampleError(ValueError):
    """All samples identical: point mass, nothing to fit."""


class NoTailDetectedError(ValueError):
    """No region of the sample passes the power-law quality gates."""


class TransientNotCompletedError(ValueError):
    """Trajectory has not reached its stationary plateau."""


class UndersampledError(ValueError):
    def __init__(self, agent_indices):
        self.agent_indices = list(agent_indices)
        super().__init__(f"undersampled agents: {self.agent_indices}")


@dataclass
class WealthSnapshot:
    """Timestamped copy of all wealths, sorted ascending for analysis.

    ``agent_wealths``/``agent_savings`` preserve the per-agent ordering so
    snapshots can be serialized one row per agent.
    """

    trade_count: int
    wealths: np.ndarray
    mean_wealth: float
    agent_wealths: np.ndarray | None = None
    agent_savings: np.ndarray | None = None

    @classmethod
    def from_agent_wealths(cls, trade_count, wealths, savings=None):
        w = np.asarray(wealths, dtype=float)
        return cls(
            trade_count=int(trade_count),
            wealths=np.sort(w),
            mean_wealth=float(w.mean()),
            agent_wealths=w.copy(),
            agent_savings=None if savings is None else np.asarray(savings, float).copy(),
        )


@dataclass
class GammaFit:
    shape_n: float
    scale: float
    ks_stat: float
    n_samples: int


@dataclass
class ParetoTailFit:
    exponent: float
    x_min: float
    ks_stat: float
    n_tail: int
    decades: float
    r_squared: float


@dataclass
class RelaxationEstimate:
    lam: float
    tau_relax: float  # trades per agent
    fit_r2: float


@dataclass
class MixtureResult:
    fits: list
    grid: np.ndarray
    empirical_density: np.ndarray
    mixture_density: np.ndarray
    l1_error: float


def equilibrium_pdf(x, n: float, mean_wealth: float):
    """Stationary density f_n(x) = (n/<x>) * xi^(n-1) e^(-xi) / Gamma(n).

    xi = n x / <x>.  Normalized over [0, inf) for every n > 0.
    """
    if n <= 0:
        raise ValueError("shape n must be positive")
    if mean_wealth <= 0:
        raise ValueError("mean_wealth must be positive")
    x = np.asarray(x, dtype=float)
    xi = n * x / mean_wealth
    with np.errstate(divide="ignore", invalid="ignore"):
        logpdf = (n - 1.0) * np.log(xi) - xi - special.gammaln(n)
        out = (n / mean_wealth) * np.exp(logpdf)
    if n == 1:
        out = np.where(xi == 0, n / mean_wealth, out)
    elif n > 1:
        out = np.where(xi == 0, 0.0, out)
    return out if out.ndim else float(out)


def effective_shape(lam: float) -> float:
    """Effective Gamma shape n(lambda) = 1 + 3 lambda / (1 - lambda).

    n(0) = 1 (pure exponential) and n -> inf as lambda -> 1, where the
    distribution sharpens toward the egalitarian point mass at <x>.
    """
    if not (0 <= lam < 1):
        raise ValueError("lambda must lie in [0, 1)")
    return 1.0 + 3.0 * lam / (1.0 - lam)


def _gamma_mle(samples: np.ndarray) -> tuple[float, float]:
    """Fixed-location gamma MLE: moment start + Newton on the shape."""
    mean = samples.mean()
    s = np.log(mean) - np.log(samples).mean()
    if s <= 0:  # numerically degenerate (near-constant sample)
        raise DegenerateSampleError("degenerate: point mass")
    shape = (3.0 - s + np.sqrt((s - 3.0) ** 2 + 24.0 * s)) / (12.0 * s)
    for _ in range(50):
        num = np.log(shape) - special.digamma(shape) - s
        den = 1.0 / shape - special.polygamma(1, shape)
        step = num / den
        new = shape - step
        if new <= 0:
            new = shape / 2.0
        if abs(new - shape) < 1e-12 * shape:
            shape = new
            break
        shape = new
    return float(shape), float(mean / shape)


def fit_gamma(snapshot: WealthSnapshot | np.ndarray) -> GammaFit:
    """Maximum-likelihood Gamma fit of a wealth sample, with a KS quality stat."""
    samples = snapshot.wealths if isinstance(snapshot, WealthSnapshot) else np.asarray(snapshot, float)
    samples = samples[samples > 0]
    if samples.size < 100:
        raise ValueError("need at least 100 positive samples")
    if np.ptp(samples) == 0 or samples.std() < 1e-12 * samples.mean():
        raise DegenerateSampleError("degenerate: point mass")
    shape, scale = _gamma_mle(samples)
    ks = stats.kstest(samples, "gamma", args=(shape, 0.0, scale)).statistic
    return GammaFit(shape_n=shape, scale=scale, ks_stat=float(ks), n_samples=samples.size)


def _loglog_r2(x: np.ndarray, y: np.ndarray) -> float:
    lx, ly = np.log(x), np.log(y)
    if lx.size < 3 or np.ptp(lx) == 0:
        return 0.0
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    tot = ly - ly.mean()
    denom = float(tot @ tot)
    return 1.0 - float(resid @ resid) / denom if denom > 0 else 0.0


def fit_pareto_tail(
    snapshot: WealthSnapshot | np.ndarray,
    min_tail: int = 100,
    min_decades: float = 1.5,
    r2_threshold: float = 0.98,
    n_candidates: int = 60,
) -> ParetoTailFit:
    """Power-law tail of the complementary CDF above a KS-selected x_min.

    x_min candidates are scanned log-uniformly; for each, the exponent is the
    Hill MLE and the quality is the KS distance to the implied Pareto CDF.
    The winner must span ``min_decades`` and fit log-log linearly with
    r^2 >= ``r2_threshold``; otherwise no tail is detected (the expected
    outcome for homogeneous populations, whose tails are exponential).
    """
    samples = snapshot.wealths if isinstance(snapshot, WealthSnapshot) else np.asarray(snapshot, float)
    samples = np.sort(samples[samples > 0])
    if samples.size < 2 * min_tail:
        raise ValueError("sample too small for tail analysis")
    x_max = samples[-1]
    lo = np.median(samples)
    hi = samples[-min_tail]
    if not (0 < lo < hi):
        raise NoTailDetectedError("no tail detected")
    candidates = np.unique(np.geomspace(lo, hi, n_candidates))
    best = None
    for xm in candidates:
        if np.log10(x_max / xm) < min_decades:
            continue
        tail = samples[samples >= xm]
        m = tail.size
        if m < min_tail:
            continue
        alpha = m / np.sum(np.log(tail / xm))
        # KS distance between empirical tail CDF and Pareto(alpha, xm)
        model = 1.0 - (xm / tail) ** alpha
        emp_hi = np.arange(1, m + 1) / m
        emp_lo = np.arange(0, m) / m
        ks = max(np.max(np.abs(emp_hi - model)), np.max(np.abs(emp_lo - model)))
        if best is None or ks < best[0]:
            best = (ks, xm, alpha, m)
    if best is None:
        raise NoTailDetectedError("no tail detected")
    ks, xm, alpha, m = best
    tail = samples[samples >= xm]
    ccdf = 1.0 - np.arange(tail.size) / tail.size  # P(X >= x_i)
    r2 = _loglog_r2(tail[:-1], ccdf[:-1])
    decades = float(np.log10(x_max / xm))
    if r2 < r2_threshold:
        raise NoTailDetectedError(
            f"no tail detected: log-log r^2 {r2:.4f} below {r2_threshold}")
    return ParetoTailFit(exponent=float(alpha), x_min=float(xm), ks_stat=float(ks),
                         n_tail=int(m), decades=decades, r_squared=float(r2))


def measure_relaxation(trajectory: list[WealthSnapshot], lam: float) -> RelaxationEstimate:
    """Relaxation time of the wealth standard deviation toward its plateau.

    Expects a trajectory started from the equal-wealth state.  Fits the
    exponential decay of the variance gap v_inf - v(t); the time constant is
    reported in trades per agent (2 * trades / N).
    """
    if len(trajectory) < 8:
        raise ValueError("trajectory too short")
    n_agents = trajectory[0].wealths.size
    t = np.array([s.trade_count for s in trajectory], dtype=float) * 2.0 / n_agents
    var = np.array([s.wealths.var() for s in trajectory])
    tail = var[-max(2, len(var) // 4):]
    v_inf = tail.mean()
    if v_inf <= 0:
        raise TransientNotCompletedError("transient not completed")
    # plateau check: the last eighth must not still be rising vs the previous one
    eighth = max(2, len(var) // 8)
    if var[-2 * eighth:-eighth].mean() < 0.9 * var[-eighth:].mean():
        raise TransientNotCompletedError("transient not completed")
    # fit only the transient prefix: past the first crossing of 0.9 v_inf the
    # gap is plateau noise and its log would flatten the slope
    crossed = np.nonzero(var >= 0.9 * v_inf)[0]
    if crossed.size == 0 or crossed[0] > 0.6 * len(var):
        # the plateau must occupy a sizeable suffix; otherwise the trailing
        # average misreads a still-rising trajectory as the equilibrium level
        raise TransientNotCompletedError("transient not completed")
    cut = crossed[0]
    gap = v_inf - var
    mask = np.zeros(len(var), dtype=bool)
    mask[:cut] = (gap[:cut] > 0.1 * v_inf) & (t[:cut] > 0)
    if mask.sum() < 4:
        raise TransientNotCompletedError("transient not completed")
    y = np.log(gap[mask])
    slope, intercept = np.polyfit(t[mask], y, 1)
    if slope >= 0:
        raise TransientNotCompletedError("transient not completed")
    resid = y - (slope * t[mask] + intercept)
    tot = y - y.mean()
    r2 = 1.0 - float(resid @ resid) / float(tot @ tot) if tot @ tot > 0 else 0.0
    return RelaxationEstimate(lam=lam, tau_relax=float(-1.0 / slope), fit_r2=r2)


def wealth_cutoff(snapshot: WealthSnapshot | np.ndarray) -> float:
    """Wealth of the richest agent, X = max x_i."""
    samples = snapshot.wealths if isinstance(snapshot, WealthSnapshot) else np.asarray(snapshot, float)
    if samples.size == 0:
        raise ValueError("empty snapshot")
    return float(samples.max())


def gini(wealths: np.ndarray) -> float:
    """Gini coefficient; 0.5 for an exponential distribution."""
    x = np.sort(np.asarray(wealths, dtype=float))
    n = x.size
    total = x.sum()
    if total <= 0:
        raise ValueError("total wealth must be positive")
    ranks = np.arange(1, n + 1)
    return float(2.0 * (ranks @ x) / (n * total) - (n + 1.0) / n)


def mixture_decomposition(
    per_agent_histories: list[np.ndarray],
    min_samples: int = 100,
    n_bins: int = 80,
) -> MixtureResult:
    """Per-agent Gamma fits plus the reconstructed global density.

    The global density is approximated by the sample-weighted sum of the
    fitted per-agent densities and compared with the pooled histogram via an
    L1 distance over [0, 99.9th percentile].
    """
    histories = [np.asarray(h, dtype=float) for h in per_agent_histories]
    undersampled = [i for i, h in enumerate(histories) if h[h > 0].size < min_samples]
    if undersampled:
        raise UndersampledError(undersampled)
    fits = []
    for h in histories:
        h = h[h > 0]
        shape, scale = _gamma_mle(h)
        fits.append(GammaFit(shape_n=shape, scale=scale, ks_stat=float("nan"),
                             n_samples=h.size))
    pooled = np.concatenate(histories)
    pooled = pooled[pooled > 0]
    hi = np.quantile(pooled, 0.999)
    edges = np.linspace(0.0, hi, n_bins + 1)
    width = edges[1] - edges[0]
    counts, _ = np.histogram(pooled, bins=edges)
    emp = counts / (pooled.size * width)
    centers = 0.5 * (edges[:-1] + edges[1:])
    weights = np.array([f.n_samples for f in fits], dtype=float)
    weights /= weights.sum()
    # bin-averaged mixture density via CDF differences; pointwise evaluation
    # would be biased where the pooled density is steep (near zero)
    mass = np.zeros_like(centers)
    for w, f in zip(weights, fits):
        cdf = stats.gamma.cdf(edges, f.shape_n, scale=f.scale)
        mass += w * np.diff(cdf)
    mix = mass / width
    l1 = float(np.sum(np.abs(mix - emp)) * width)
    return MixtureResult(fits=fits, grid=centers, empirical_density=emp,
                         mixture_density=mix, l1_error=l1)


def per_agent_histories(snapshots: list[WealthSnapshot]) -> list[np.ndarray]:
    """Transpose agent-ordered snapshots into one sample array per agent."""
    mats = [s.agent_wealths for s in snapshots]
    if any(m is None for m in mats):
        raise ValueError("snapshots lack agent-ordered wealths")
    stacked = np.stack(mats)  # (n_snapshots, n_agents)
    return [stacked[:, i] for i in range(stacked.shape[1])]
