"""Multiscaling of low-variability periods.

A low-variability period is a maximal run of samples staying within a
threshold ``delta`` of the trailing sliding average over ``window`` samples
(optionally normalized to that average).  The survival curve R(n) of period
lengths follows a power law R(n) = R0 * n^-alpha(delta, tau) on multiscaling
series; plotting alpha against u = log(delta) / log(tau_physical) collapses
the two-parameter family onto one curve exactly when the series is
multifractal, in which case the curve is the spectrum f(h).  The hazard of
breaking an ongoing quiet period decays as 1/length on such series.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator

from .series import TimeSeries, sliding_mean


class GridTooSmallError(ValueError):
    """Collapse testing needs at least a 3 x 3 (delta, window) grid."""


@dataclass
class MlvpConfig:
    delta: float
    window: int
    mode: str = "absolute"  # or "relative"

    def __post_init__(self):
        if self.delta <= 0:
            raise ValueError("delta must be positive")
        if self.window < 1:
            raise ValueError("window must be >= 1")
        if self.mode not in ("absolute", "relative"):
            raise ValueError("mode must be 'absolute' or 'relative'")


@dataclass
class Period:
    start: int
    length: int
    censored: bool  # truncated by the series end

    @property
    def end(self) -> int:
        """Index one past the last sample of the period."""
        return self.start + self.length


@dataclass
class LowVarPeriods:
    periods: list[Period]
    series_length: int
    config: MlvpConfig

    def lengths(self, censoring: str = "exclude") -> np.ndarray:
        if censoring not in ("include", "exclude"):
            raise ValueError("censoring must be 'include' or 'exclude'")
        ps = self.periods if censoring == "include" else [
            p for p in self.periods if not p.censored]
        return np.array([p.length for p in ps], dtype=int)


@dataclass
class SurvivalCurve:
    n_values: np.ndarray  # increasing integers
    counts: np.ndarray    # R(n), non-increasing


@dataclass
class ScalingFit:
    alpha: float
    r0: float
    fit_range: tuple[int, int]
    r_squared: float
    n_points: int


@dataclass
class HazardCurve:
    lengths: np.ndarray   # representative length per bin
    hazards: np.ndarray   # P(break at length | reached length)
    events: np.ndarray
    at_risk: np.ndarray
    merged_bins: int = 0


@dataclass
class CollapseCell:
    delta: float
    window: int
    u: float
    alpha: float
    r_squared: float
    n_periods: int


@dataclass
class CollapseResult:
    cells: list[CollapseCell]
    quality: float
    dropped: list[dict] = field(default_factory=list)

    def passes(self, quality_threshold: float = 0.9, min_cells: int = 6) -> bool:
        """Multifractality gate: enough scaling cells landing on one curve."""
        return len(self.cells) >= min_cells and self.quality > quality_threshold


def deviations(series: TimeSeries, config: MlvpConfig) -> np.ndarray:
    """|x - <x>_tau| (absolute) or its ratio to <x>_tau (relative); NaN where unusable."""
    mean = sliding_mean(series.values, config.window)
    dev = np.abs(series.values - mean)
    if config.mode == "relative":
        usable = ~np.isnan(mean)
        bad = np.nonzero(usable & (mean <= 0))[0]
        if bad.size:
            raise ValueError(
                f"relative mode requires positive sliding mean; "
                f"first violation at index {bad[0]}")
        dev = dev / mean
    return dev


def _runs_from_mask(quiet: np.ndarray, first_usable: int, length: int) -> list[Period]:
    """Maximal runs of True inside the usable range [first_usable, length)."""
    idx = np.nonzero(quiet)[0]
    periods: list[Period] = []
    if idx.size == 0:
        return periods
    breaks = np.nonzero(np.diff(idx) > 1)[0]
    starts = np.concatenate(([0], breaks + 1))
    ends = np.concatenate((breaks, [idx.size - 1]))
    for s, e in zip(starts, ends):
        start = int(idx[s])
        stop = int(idx[e])
        periods.append(Period(start=start, length=stop - start + 1,
                              censored=(stop == length - 1)))
    return periods


def extract_periods(series: TimeSeries, config: MlvpConfig) -> LowVarPeriods:
    """Maximal low-variability periods in a single left-to-right scan.

    Runs truncated by the series end are flagged right-censored.  The first
    window-1 samples have no sliding average and are excluded.
    """
    if len(series) <= config.window:
        raise ValueError("series must be longer than the window")
    dev = deviations(series, config)
    quiet = dev <= config.delta  # NaN compares False: unusable prefix excluded
    return LowVarPeriods(
        periods=_runs_from_mask(quiet, config.window - 1, len(series)),
        series_length=len(series),
        config=config,
    )


def multivariate_periods(
    series: TimeSeries,
    delta_price: float,
    delta_volume: float,
    window: int,
    combine: str = "both_quiet",
    mode: str = "absolute",
) -> LowVarPeriods:
    """Joint price+volume quiet periods: intersection or union of channel masks.

    ``both_quiet`` requires neither channel to exceed its threshold;
    ``either_quiet`` requires at least one channel to stay quiet.  Maximality
    and censoring semantics match :func:`extract_periods`.
    """
    if combine not in ("both_quiet", "either_quiet"):
        raise ValueError("combine must be 'both_quiet' or 'either_quiet'")
    if series.volume is None:
        raise ValueError("series has no volume channel")
    price_cfg = MlvpConfig(delta=delta_price, window=window, mode=mode)
    volume_cfg = MlvpConfig(delta=delta_volume, window=window, mode=mode)
    if len(series) <= window:
        raise ValueError("series must be longer than the window")
    vol_series = TimeSeries(series.volume, sample_interval=series.sample_interval)
    dev_p = deviations(series, price_cfg)
    dev_v = deviations(vol_series, volume_cfg)
    quiet_p = dev_p <= delta_price
    quiet_v = dev_v <= delta_volume
    usable = ~np.isnan(dev_p)
    if combine == "both_quiet":
        quiet = quiet_p & quiet_v
    else:
        quiet = (quiet_p | quiet_v) & usable
    return LowVarPeriods(
        periods=_runs_from_mask(quiet, window - 1, len(series)),
        series_length=len(series),
        config=price_cfg,
    )


def survival_curve(periods: LowVarPeriods, censoring: str = "exclude") -> SurvivalCurve:
    """R(n) = number of periods with length >= n, for n = 1 .. max_length + 1."""
    lengths = periods.lengths(censoring)
    if lengths.size == 0:
        raise ValueError("no periods to summarize")
    max_len = int(lengths.max())
    n_values = np.arange(1, max_len + 2)
    # R(n) via reversed cumulative histogram of lengths
    counts_at = np.bincount(lengths, minlength=max_len + 2)[1:max_len + 2]
    r = np.cumsum(counts_at[::-1])[::-1]
    return SurvivalCurve(n_values=n_values, counts=r)


def fit_scaling(curve: SurvivalCurve, n_min: int | None = None,
                n_max: int | None = None, n_points: int = 25) -> ScalingFit:
    """Least-squares power law log R = log R0 - alpha log n.

    Fitted over logarithmically spaced representative n in [n_min, n_max]
    with positive counts.  Defaults: n_min = 2, n_max = length of the
    5th-longest period (the largest n with R(n) >= 5).
    """
    if n_min is None:
        n_min = 2
    if n_max is None:
        big_enough = curve.n_values[curve.counts >= 5]
        n_max = int(big_enough.max()) if big_enough.size else int(curve.n_values.max())
    if n_max <= n_min:
        raise ValueError("fit range is empty")
    grid = np.unique(np.round(np.geomspace(n_min, n_max, n_points)).astype(int))
    grid = grid[(grid >= curve.n_values[0]) & (grid <= curve.n_values[-1])]
    r = curve.counts[grid - curve.n_values[0]]
    keep = r > 0
    grid, r = grid[keep], r[keep]
    if grid.size < 5:
        raise ValueError("need at least 5 positive points in the fit range")
    ln_n = np.log(grid.astype(float))
    ln_r = np.log(r.astype(float))
    slope, intercept = np.polyfit(ln_n, ln_r, 1)
    resid = ln_r - (slope * ln_n + intercept)
    tot = ln_r - ln_r.mean()
    denom = float(tot @ tot)
    r2 = 1.0 - float(resid @ resid) / denom if denom > 0 else 1.0
    return ScalingFit(alpha=float(-slope), r0=float(np.exp(intercept)),
                      fit_range=(int(n_min), int(n_max)), r_squared=r2,
                      n_points=int(grid.size))


def default_delta_grid(series: TimeSeries, window: int, n_deltas: int,
                       mode: str = "absolute",
                       q_lo: float = 0.10, q_hi: float = 0.90) -> np.ndarray:
    """Log-spaced thresholds between deviation percentiles at this window."""
    dev = deviations(series, MlvpConfig(delta=1.0, window=window, mode=mode))
    dev = dev[~np.isnan(dev)]
    dev = dev[dev > 0]
    lo, hi = np.quantile(dev, [q_lo, q_hi])
    if not (0 < lo < hi):
        raise ValueError("deviation percentiles are degenerate")
    return np.geomspace(lo, hi, n_deltas)


def collapse_test(
    series: TimeSeries,
    deltas,
    windows,
    mode: str = "absolute",
    min_periods: int = 30,
    r2_gate: float = 0.95,
) -> CollapseResult:
    """Multifractality test: does alpha(delta, tau) collapse onto one curve?

    For every grid cell the scaling exponent alpha is fitted and plotted
    against u = log(delta) / log(window * sample_interval).  The collapse
    quality is 1 minus the ratio of residual variance around a monotone
    spline through binned cell means to the total variance of alpha; values
    near 1 indicate multifractality.  Undersampled or non-scaling cells
    (fit r^2 below ``r2_gate``) are dropped and reported.
    """
    deltas = np.asarray(list(deltas), dtype=float)
    windows = [int(w) for w in windows]
    if deltas.size < 3 or len(windows) < 3:
        raise GridTooSmallError("need at least 3 deltas and 3 windows")
    cells: list[CollapseCell] = []
    dropped: list[dict] = []
    for w in windows:
        tau_phys = w * series.sample_interval
        if tau_phys == 1.0:
            raise ValueError("window * sample_interval must differ from 1 "
                             "(abscissa log(delta)/log(tau) undefined)")
        cfg_dev = deviations(series, MlvpConfig(delta=1.0, window=w, mode=mode))
        for d in deltas:
            quiet = cfg_dev <= d
            periods = LowVarPeriods(
                periods=_runs_from_mask(quiet, w - 1, len(series)),
                series_length=len(series),
                config=MlvpConfig(delta=d, window=w, mode=mode))
            lengths = periods.lengths("exclude")
            cell_id = {"delta": float(d), "window": w}
            if lengths.size < min_periods:
                dropped.append({**cell_id, "reason": f"only {lengths.size} periods"})
                continue
            try:
                fit = fit_scaling(survival_curve(periods, "exclude"))
            except ValueError as exc:
                dropped.append({**cell_id, "reason": str(exc)})
                continue
            if fit.r_squared < r2_gate:
                dropped.append({**cell_id,
                                "reason": f"scaling fit r^2 {fit.r_squared:.4f} < {r2_gate}"})
                continue
            u = float(np.log(d) / np.log(tau_phys))
            cells.append(CollapseCell(delta=float(d), window=w, u=u,
                                      alpha=fit.alpha, r_squared=fit.r_squared,
                                      n_periods=int(lengths.size)))
    quality = _collapse_quality(cells)
    return CollapseResult(cells=cells, quality=quality, dropped=dropped)


def _collapse_quality(cells: list[CollapseCell]) -> float:
    if len(cells) < 4:
        return float("nan")
    u = np.array([c.u for c in cells])
    alpha = np.array([c.alpha for c in cells])
    order = np.argsort(u)
    u, alpha = u[order], alpha[order]
    total = float(np.var(alpha))
    if total == 0:
        return 1.0
    n_bins = min(8, max(3, len(cells) // 3))
    # equal-count bins -> mean (u, alpha) per bin -> monotone (PCHIP) spline
    splits = np.array_split(np.arange(len(u)), n_bins)
    bu = np.array([u[s].mean() for s in splits if s.size])
    ba = np.array([alpha[s].mean() for s in splits if s.size])
    bu, idx = np.unique(bu, return_index=True)
    ba = ba[idx]
    if bu.size < 2:
        return 1.0
    spline = PchipInterpolator(bu, ba, extrapolate=True)
    resid = alpha - spline(u)
    return 1.0 - float(np.var(resid)) / total


def hazard_curve(periods: LowVarPeriods, log_bins: bool = True,
                 min_at_risk: int = 20, bins_per_decade: float = 6.0) -> HazardCurve:
    """Silence-breaking hazard: P(period ends at length l | it reached l).

    Censored periods contribute to the at-risk counts up to their observed
    length but never to the events.  With ``log_bins`` the raw per-length
    hazards are aggregated over logarithmic length bins (events / exposure);
    bins with fewer than ``min_at_risk`` at-risk observations are merged into
    their left neighbour, and the merge count is reported.
    """
    all_lengths = np.array([p.length for p in periods.periods], dtype=int)
    events_mask = np.array([not p.censored for p in periods.periods])
    if all_lengths.size == 0:
        raise ValueError("no periods")
    max_len = int(all_lengths.max())
    # at_risk[l] = number of periods observed to reach length l
    reach = np.bincount(all_lengths, minlength=max_len + 2)[1:max_len + 1]
    at_risk = np.cumsum(reach[::-1])[::-1]
    ended = np.bincount(all_lengths[events_mask], minlength=max_len + 2)[1:max_len + 1]
    ls = np.arange(1, max_len + 1)
    if not log_bins:
        keep = at_risk > 0
        with np.errstate(invalid="ignore"):
            h = np.where(keep, ended / np.maximum(at_risk, 1), np.nan)
        return HazardCurve(lengths=ls[keep].astype(float), hazards=h[keep],
                           events=ended[keep], at_risk=at_risk[keep])
    edges = np.unique(np.round(
        np.geomspace(1, max_len + 1, int(np.log10(max_len + 1) * bins_per_decade) + 2)
    ).astype(int))
    if edges[0] != 1:
        edges = np.concatenate(([1], edges))
    if edges[-1] <= max_len:
        edges = np.concatenate((edges, [max_len + 1]))
    bins = []  # (lo, hi, events, exposure)
    merged = 0
    for lo, hi in zip(edges[:-1], edges[1:]):
        ev = int(ended[lo - 1:hi - 1].sum())
        ex = int(at_risk[lo - 1:hi - 1].sum())
        risk_here = int(at_risk[lo - 1]) if lo - 1 < at_risk.size else 0
        if bins and risk_here < min_at_risk:
            plo, phi, pev, pex = bins[-1]
            bins[-1] = (plo, hi, pev + ev, pex + ex)
            merged += 1
        else:
            bins.append((lo, hi, ev, ex))
    reps, hs, evs, exs = [], [], [], []
    for lo, hi, ev, ex in bins:
        if ex == 0:
            continue
        reps.append(float(np.sqrt(lo * (hi - 1))))  # geometric-mean length
        hs.append(ev / ex)
        evs.append(ev)
        exs.append(ex)
    return HazardCurve(lengths=np.array(reps), hazards=np.array(hs),
                       events=np.array(evs), at_risk=np.array(exs),
                       merged_bins=merged)


def silence_breaking_hazard(series: TimeSeries, config: MlvpConfig,
                            min_at_risk: int = 20) -> HazardCurve:
    """Hazard curve of the series' low-variability periods (log-binned)."""
    return hazard_curve(extract_periods(series, config), log_bins=True,
                        min_at_risk=min_at_risk)


def hazard_loglog_slope(curve: HazardCurve, min_length: float = 1.0,
                        weighted: bool = True) -> float:
    """Slope of log hazard vs log length; about -1 on multiscaling series.

    With ``weighted`` each bin is weighted by its event count, the inverse
    of the approximate variance of the log hazard, so sparsely populated
    tail bins do not dominate the fit.
    """
    keep = (curve.hazards > 0) & (curve.lengths >= min_length)
    if keep.sum() < 3:
        raise ValueError("too few hazard points for a slope")
    w = np.sqrt(curve.events[keep].astype(float)) if weighted else None
    slope, _ = np.polyfit(np.log(curve.lengths[keep]),
                          np.log(curve.hazards[keep]), 1, w=w)
    return float(slope)
