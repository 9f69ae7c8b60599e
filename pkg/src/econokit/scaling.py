"""Self-affinity and multifractal-spectrum tools.

Hurst exponents are estimated with first-order detrended fluctuation
analysis; the analytic spectrum of the binomial multiplicative cascade
serves as the oracle for the data-collapse test in :mod:`econokit.mlvp`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .series import TimeSeries


class DegenerateSeriesError(ValueError):
    """Linear detrending removed all fluctuation: nothing to scale."""


@dataclass
class HurstEstimate:
    h: float
    stderr: float
    scale_range: tuple[int, int]
    scales: np.ndarray
    fluctuations: np.ndarray


@dataclass
class SpectrumCurve:
    h_values: np.ndarray
    f_values: np.ndarray

    def interp(self, h) -> np.ndarray:
        """f(h) on the spectrum's support (NaN outside)."""
        order = np.argsort(self.h_values)
        hs = self.h_values[order]
        fs = self.f_values[order]
        out = np.interp(h, hs, fs, left=np.nan, right=np.nan)
        return out

    @property
    def h_support(self) -> tuple[float, float]:
        return float(self.h_values.min()), float(self.h_values.max())


def _dfa_fluctuation(profile: np.ndarray, scale: int) -> float:
    n = profile.size // scale
    segs = profile[: n * scale].reshape(n, scale)
    t = np.arange(scale, dtype=float)
    t_mean = t.mean()
    t_c = t - t_mean
    denom = float(t_c @ t_c)
    seg_means = segs.mean(axis=1, keepdims=True)
    slopes = (segs @ t_c) / denom
    resid = segs - seg_means - slopes[:, None] * t_c
    return float(np.sqrt(np.mean(resid ** 2)))


def hurst_dfa(series: TimeSeries, scale_range: tuple[int, int] | None = None,
              n_scales: int = 20) -> HurstEstimate:
    """First-order DFA of a self-affine path.

    The path's increments are mean-centered and re-integrated into a profile;
    the profile is linearly detrended in non-overlapping windows of each
    scale and the RMS fluctuation F(s) regressed on the scale in log-log.
    The slope is the Hurst exponent of the path's increments.
    """
    x = series.values
    if x.size < 2 ** 10:
        raise ValueError("series too short for DFA (need >= 1024 samples)")
    if scale_range is None:
        scale_range = (8, x.size // 8)
    s_min, s_max = int(scale_range[0]), int(scale_range[1])
    if s_min < 4 or s_max > x.size // 2:
        raise ValueError("scale range outside [4, length/2]")
    if s_max < 10 * s_min:
        raise ValueError("scale range must span at least one decade")
    incr = np.diff(x)
    profile = np.cumsum(incr - incr.mean())
    scales = np.unique(np.round(np.geomspace(s_min, s_max, n_scales)).astype(int))
    fl = np.array([_dfa_fluctuation(profile, s) for s in scales])
    keep = fl > 0
    if keep.sum() < 3 or np.max(fl) < 1e-12 * (np.abs(x).max() + 1.0):
        raise DegenerateSeriesError("degenerate: zero fluctuation after detrending")
    ls = np.log(scales[keep].astype(float))
    lf = np.log(fl[keep])
    coef, cov = np.polyfit(ls, lf, 1, cov=True)
    return HurstEstimate(h=float(coef[0]), stderr=float(np.sqrt(cov[0, 0])),
                         scale_range=(s_min, s_max),
                         scales=scales[keep], fluctuations=fl[keep])


def cascade_spectrum(p: float, q_max: float = 10.0, q_step: float = 0.05) -> SpectrumCurve:
    """Analytic multifractal spectrum f(h) of the binomial cascade.

    Legendre transform of the partition exponent
    tau(q) = -log2(p^q + (1-p)^q): h(q) = tau'(q), f = q h - tau(q).
    Support is [-log2 max(p, 1-p), -log2 min(p, 1-p)] with max f = 1 at q=0.
    p = 0.5 degenerates to the single point (h, f) = (1, 1).
    """
    if not (0 < p < 1):
        raise ValueError("p must lie in (0, 1)")
    if p == 0.5:
        return SpectrumCurve(h_values=np.array([1.0]), f_values=np.array([1.0]))
    q = np.arange(-q_max, q_max + q_step / 2, q_step)
    a, b = p, 1.0 - p
    z = a ** q + b ** q
    tau = -np.log2(z)
    h = -(a ** q * np.log(a) + b ** q * np.log(b)) / (z * np.log(2.0))
    f = q * h - tau
    return SpectrumCurve(h_values=h, f_values=f)
