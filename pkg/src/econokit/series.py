"""Time-series container, CSV ingestion, and synthetic oracle generators.

The generators double as test oracles: the binomial multiplicative cascade
has a known analytic multifractal spectrum, and the fractional-Gaussian-noise
path has a prescribed Hurst exponent.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np


@dataclass
class TimeSeries:
    """Uniformly sampled scalar signal, optionally with a volume channel.

    ``sample_interval`` is the cut-off scale tau_0 in the series' physical
    time units; window widths in samples convert to physical scales by
    multiplication with it.
    """

    values: np.ndarray
    sample_interval: float = 1.0
    volume: np.ndarray | None = None
    warnings: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.size < 2:
            raise ValueError("series needs at least 2 samples")
        if self.sample_interval <= 0:
            raise ValueError("sample_interval must be positive")
        if self.volume is not None:
            self.volume = np.asarray(self.volume, dtype=float)
            if self.volume.size != self.values.size:
                raise ValueError("volume channel length mismatch")
            if np.any(self.volume < 0):
                raise ValueError("volume must be non-negative")

    def __len__(self) -> int:
        return self.values.size


@dataclass
class CascadeSpec:
    p: float
    depth: int
    seed: int

    def __post_init__(self):
        if not (0 < self.p < 1):
            raise ValueError("p must lie in (0, 1)")
        if self.depth < 1:
            raise ValueError("depth must be >= 1")


def load_csv(path) -> TimeSeries:
    """Read ``t,value[,volume]`` CSV; ``#`` comment lines are ignored.

    ``sample_interval`` can be forced with a ``# sample_interval=X`` comment;
    otherwise it is the median timestamp spacing (1.0 if degenerate).
    Gaps wider than 1.5x the median spacing are recorded as warnings.
    """
    times, values, volumes = [], [], []
    interval_override = None
    has_volume = None
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header_seen = False
        for lineno, row in enumerate(reader, start=1):
            if not row or row[0].lstrip().startswith("#"):
                text = ",".join(row).lstrip().lstrip("#").strip()
                if text.startswith("sample_interval"):
                    interval_override = float(text.split("=", 1)[1])
                continue
            if not header_seen:
                cols = [c.strip().lower() for c in row]
                if cols[:2] != ["t", "value"]:
                    raise ValueError(f"line {lineno}: expected header 't,value[,volume]'")
                has_volume = len(cols) >= 3 and cols[2] == "volume"
                header_seen = True
                continue
            try:
                times.append(float(row[0]))
                values.append(float(row[1]))
                if has_volume:
                    volumes.append(float(row[2]))
            except (ValueError, IndexError) as exc:
                raise ValueError(f"line {lineno}: malformed row {row!r}") from exc
    if len(values) < 2:
        raise ValueError("file contains fewer than 2 data rows")
    t = np.asarray(times)
    dt = np.diff(t)
    median_dt = float(np.median(dt))
    warnings = []
    if median_dt > 0:
        gaps = np.nonzero(dt > 1.5 * median_dt)[0]
        for g in gaps[:20]:
            warnings.append(f"gap of {dt[g]:g} after t={t[g]:g} "
                            f"(> 1.5x median spacing {median_dt:g})")
        if gaps.size > 20:
            warnings.append(f"... {gaps.size - 20} more gaps")
    interval = interval_override if interval_override is not None else (
        median_dt if median_dt > 0 else 1.0)
    return TimeSeries(np.asarray(values), sample_interval=interval,
                      volume=np.asarray(volumes) if has_volume else None,
                      warnings=warnings)


def write_csv(path, series: TimeSeries) -> None:
    """Inverse of :func:`load_csv`; full-precision floats for reproducibility."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# sample_interval={float(series.sample_interval)!r}\n")
        if series.volume is not None:
            fh.write("t,value,volume\n")
            for i, (v, vol) in enumerate(zip(series.values, series.volume)):
                fh.write(f"{i},{float(v)!r},{float(vol)!r}\n")
        else:
            fh.write("t,value\n")
            for i, v in enumerate(series.values):
                fh.write(f"{i},{float(v)!r}\n")


def sliding_mean(values: np.ndarray, window: int) -> np.ndarray:
    """Trailing mean over the last ``window`` samples; NaN where undefined.

    Position i holds mean(values[i-window+1 : i+1]); the first window-1
    positions are NaN and must be excluded from downstream period extraction.
    """
    values = np.asarray(values, dtype=float)
    if window < 1:
        raise ValueError("window must be >= 1")
    if window > values.size:
        raise ValueError("window exceeds series length")
    csum = np.concatenate(([0.0], np.cumsum(values)))
    out = np.full(values.size, np.nan)
    out[window - 1:] = (csum[window:] - csum[:-window]) / window
    return out


def sliding_average(series: TimeSeries, window: int) -> TimeSeries:
    """Trailing-mean series; unusable leading positions are NaN-marked."""
    return TimeSeries(sliding_mean(series.values, window),
                      sample_interval=series.sample_interval)


def generate_binomial_cascade(spec: CascadeSpec) -> TimeSeries:
    """Cumulative path of a random binomial multiplicative measure.

    Unit mass splits recursively into fractions {p, 1-p} assigned to the two
    child halves in random order, down to 2^depth cells.  The returned path
    is the running integral of the cell masses: non-decreasing, from 0 to 1,
    with sample_interval 2^-depth so the path lives on physical time [0, 1].
    """
    rng = np.random.default_rng(np.random.PCG64(spec.seed))
    masses = np.array([1.0])
    for _ in range(spec.depth):
        flips = rng.random(masses.size) < 0.5
        left = np.where(flips, spec.p, 1.0 - spec.p)
        children = np.empty(masses.size * 2)
        children[0::2] = masses * left
        children[1::2] = masses * (1.0 - left)
        masses = children
    path = np.concatenate(([0.0], np.cumsum(masses)))
    return TimeSeries(path, sample_interval=2.0 ** -spec.depth)


def generate_fgn_path(hurst: float, length: int, seed: int) -> TimeSeries:
    """Cumulative sum of fractional Gaussian noise with the given Hurst exponent.

    Uses Davies-Harte circulant embedding, exact for all H in (0, 1);
    H = 0.5 reduces to a Brownian path.
    """
    if not (0 < hurst < 1):
        raise ValueError("hurst must lie in (0, 1)")
    if length < 2:
        raise ValueError("length must be >= 2")
    rng = np.random.default_rng(np.random.PCG64(seed))
    n = length
    k = np.arange(n + 1, dtype=float)
    gamma = 0.5 * (np.abs(k + 1) ** (2 * hurst) - 2 * k ** (2 * hurst)
                   + np.abs(k - 1) ** (2 * hurst))
    circ = np.concatenate([gamma, gamma[-2:0:-1]])
    lam = np.fft.fft(circ).real
    lam = np.clip(lam, 0.0, None)  # tiny negative eigenvalues from roundoff
    g = circ.size
    z0, zn = rng.standard_normal(2)
    a = rng.standard_normal(n - 1)
    b = rng.standard_normal(n - 1)
    w = np.zeros(g, dtype=complex)
    w[0] = np.sqrt(lam[0] / g) * z0
    w[n] = np.sqrt(lam[n] / g) * zn
    w[1:n] = np.sqrt(lam[1:n] / (2 * g)) * (a + 1j * b)
    w[n + 1:] = np.conj(w[1:n][::-1])
    noise = np.fft.fft(w).real[:n]
    return TimeSeries(np.cumsum(noise), sample_interval=1.0)
