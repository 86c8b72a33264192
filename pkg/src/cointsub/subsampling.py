"""Subsampling reference distributions over regressor-reset blocks.

Block ``i`` (1-based) holds ``(x_{i+j-1} - x_{i-1}, u_{i+j-1})`` for
``j = 1..b`` with ``x_0 = 0``. Kernel weights depend on regressor
differences only, so the SNU sums, and the MHM sums away from the weight
window edges, are assembled per lag ``m`` from windowed sums of the
lag-``m`` products. This costs ``O(N b)`` per block length instead of
``O(M b^2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .errors import DebiasError, DistributionError, LengthError, UsageError
from .kernel import BandwidthRule, gaussian_kernel
from .processes import scaling_dn
from .teststats import (
    WeightWindow,
    gauss_overlap,
    mhm_normalize,
    mhm_statistic,
    snu_from_sums,
    snu_statistic,
)

MAX_SKIP_FRACTION = 0.10
# sqrt(2) * margin / h >= 9 makes the window mass round to exactly 1.0
_EDGE_Z = 9.0
_DIRECT_WINDOW = 32


class BlockView(NamedTuple):
    start: int
    b: int
    x: np.ndarray
    u: np.ndarray


@dataclass
class SubsampleDistribution:
    values: np.ndarray
    b: int
    M: int
    h_b: float
    skipped: int = 0
    raw: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def attempted(self) -> int:
        return self.M + self.skipped

    def cdf(self, t: float) -> float:
        """Empirical CDF ``#{v <= t} / M``."""
        return float(np.searchsorted(self.values, t, side="right")) / self.M

    def mean(self) -> float:
        return float(np.mean(self.values))


@dataclass
class DebiasReport:
    b1: int
    b2: int
    bias_b1: float
    bias_b2: float
    slope: float
    intercept: float
    bias_n: float
    statistic: float
    debiased_statistic: float
    pvalues: dict = field(default_factory=dict)

    def predict_log_bias(self, b: float) -> float:
        return self.intercept + self.slope * math.log(b)


def _prepare(x, u):
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    if x.shape != u.shape or x.ndim != 1:
        raise LengthError("x and residuals must be 1-d of equal length")
    return x, u


def _check_bm(n, b, M):
    if not 1 <= b <= n:
        raise UsageError(f"block length must satisfy 1 <= b <= N={n}, got {b}")
    max_m = n - b + 1
    if M is None:
        return max_m
    if not 1 <= M <= max_m:
        raise UsageError(f"need 1 <= M <= N-b+1={max_m}, got M={M}")
    return int(M)


def block_origins(x) -> np.ndarray:
    """``x_{i-1}`` for ``i = 1..N`` with ``x_0 = 0``."""
    return np.concatenate(([0.0], np.asarray(x, dtype=float)[:-1]))


def build_blocks(x, u, b: int, M: Optional[int] = None) -> list:
    x, u = _prepare(x, u)
    M = _check_bm(x.size, b, M)
    origin = block_origins(x)
    return [
        BlockView(i + 1, b, x[i:i + b] - origin[i], u[i:i + b]) for i in range(M)
    ]


def _window_sums(v, length, count):
    """``sum(v[i:i+length])`` for ``i = 0..count-1``."""
    if length <= _DIRECT_WINDOW:
        # prefix differences lose digits when a short window is small
        return np.lib.stride_tricks.sliding_window_view(v, length)[:count].sum(axis=1)
    c = np.concatenate(([0.0], np.cumsum(v)))
    return c[length:length + count] - c[:count]


def block_snu_sums(x, u, b: int, M: int, h: float):
    """Per-block ``S`` and ``V^2`` for the first ``M`` blocks of length ``b``."""
    s = np.zeros(M)
    v2 = np.zeros(M)
    u2 = u * u
    n = x.size
    for m in range(1, b):
        k = gaussian_kernel((x[:n - m] - x[m:]) / h)
        s += _window_sums(u[:n - m] * u[m:] * k, b - m, M)
        v2 += _window_sums(u2[:n - m] * u2[m:] * (k * k), b - m, M)
    return 2.0 * s, 2.0 * v2


def block_mhm_values(x, u, b: int, M: int, h: float, window: WeightWindow):
    """Raw (unnormalised) MHM statistic on each block, exact integration."""
    n = x.size
    c0 = h / (2.0 * math.sqrt(math.pi))
    t = c0 * _window_sums(u * u, b, M)
    for m in range(1, b):
        dx = x[:n - m] - x[m:]
        r = u[:n - m] * u[m:] * np.exp(-dx * dx / (4.0 * h * h))
        t += 2.0 * c0 * _window_sums(r, b - m, M)
    # blocks reaching the window edges need the truncated overlap
    origin = block_origins(x)[:M]
    view = np.lib.stride_tricks.sliding_window_view(x, b)[:M]
    margin = _EDGE_Z * h / math.sqrt(2.0)
    lo = view.min(axis=1) - origin
    hi = view.max(axis=1) - origin
    edge = np.flatnonzero((lo < window.lo + margin) | (hi > window.hi - margin))
    for i in edge:
        xb = x[i:i + b] - origin[i]
        ub = u[i:i + b]
        t[i] = float(ub @ gauss_overlap(xb[:, None], xb[None, :], h, window) @ ub)
    return np.maximum(t, 0.0)


def _finish(raw, b, h_b, ok):
    attempted = raw.size
    skipped = int(attempted - ok.sum())
    if skipped > MAX_SKIP_FRACTION * attempted:
        raise DistributionError(
            f"{skipped} of {attempted} blocks of length {b} are degenerate"
        )
    vals = np.sort(raw[ok])
    return SubsampleDistribution(vals, b, int(ok.sum()), float(h_b), skipped, raw)


def subsample_snu(x, u, b: int, M: Optional[int] = None,
                  h_rule: BandwidthRule = BandwidthRule()) -> SubsampleDistribution:
    """Distribution of the length-``b`` SNU statistic ``Z_{i,b}``.

    Blocks with ``V = 0`` are skipped; more than 10% skipped raises
    :class:`DistributionError`.
    """
    x, u = _prepare(x, u)
    M = _check_bm(x.size, b, M)
    if b < 2:
        raise UsageError("SNU blocks need b >= 2")
    h_b = h_rule(b)
    s, v2 = block_snu_sums(x, u, b, M, h_b)
    ok = v2 > 0.0
    with np.errstate(invalid="ignore", divide="ignore"):
        z = np.where(ok, s / (math.sqrt(2.0) * np.sqrt(np.where(ok, v2, 1.0))), np.nan)
    return _finish(z, b, h_b, ok)


def subsample_snu_bruteforce(x, u, b, M=None, h_rule=BandwidthRule()):
    """Per-block recomputation through :func:`snu_statistic` (reference)."""
    h_b = h_rule(b)
    return np.array([snu_statistic(blk.u, blk.x, h_b).z for blk in build_blocks(x, u, b, M)])


def subsample_mhm(x, u, b: int, M: Optional[int] = None,
                  h_rule: BandwidthRule = BandwidthRule(),
                  kind: str = "LM", d: float = 0.1, lam: float = 0.0,
                  window: WeightWindow = WeightWindow(), grid_points: int = 4001,
                  method: str = "exact") -> SubsampleDistribution:
    """Distribution of ``tau_b^{-1} T_{i,b} = d_b / (b h_b) T_{i,b}``."""
    x, u = _prepare(x, u)
    M = _check_bm(x.size, b, M)
    h_b = h_rule(b)
    if method == "exact":
        t = block_mhm_values(x, u, b, M, h_b, window)
    else:
        t = np.array([
            mhm_statistic(blk.u, blk.x, h_b, window, grid_points, method)
            for blk in build_blocks(x, u, b, M)
        ])
    scale = scaling_dn(kind, b, d, lam) / (b * h_b)
    vals = t * scale
    return _finish(vals, b, h_b, np.isfinite(vals))


def pvalue_snu(z_n: float, dist: SubsampleDistribution) -> float:
    """Share of subsample statistics with ``|Z_{i,b}| > |Z_N|``."""
    if dist.M < 1:
        raise UsageError("empty subsample distribution")
    return float(np.count_nonzero(np.abs(dist.values) > abs(z_n))) / dist.M


def pvalue_mhm(stat: float, dist: SubsampleDistribution) -> float:
    """Share of subsample statistics strictly above ``stat``."""
    if dist.M < 1:
        raise UsageError("empty subsample distribution")
    return 1.0 - dist.cdf(stat)


def debias_blocks(n: int):
    """Calibration lengths ``floor(3 sqrt N)`` and ``floor(4 sqrt N)``."""
    return int(math.floor(3.0 * math.sqrt(n))), int(math.floor(4.0 * math.sqrt(n)))


def loglog_line(b1, bias1, b2, bias2):
    """Slope and intercept of the line through ``(log b_i, log B_i)``."""
    if not (bias1 > 0 and bias2 > 0):
        raise DebiasError(f"subsample means must be positive, got {bias1}, {bias2}")
    l1, l2 = math.log(b1), math.log(b2)
    slope = (math.log(bias2) - math.log(bias1)) / (l2 - l1)
    return slope, math.log(bias1) - slope * l1


def debias_mhm(x, u, kind: str, d: float, lam: float = 0.0,
               h_rule: BandwidthRule = BandwidthRule(),
               window: WeightWindow = WeightWindow(),
               blocks: Sequence[int] = (),
               statistic: Optional[float] = None,
               u_full=None, M: Optional[int] = None,
               grid_points: int = 4001, method: str = "exact") -> DebiasReport:
    """De-biased MHM test.

    Subsample means at ``b1 = floor(3 sqrt N)`` and ``b2 = floor(4 sqrt N)``
    define a log-log line; its value at ``log N`` gives the bias ``B_N``
    removed from the full statistic. For each length in ``blocks`` the
    p-value is the share of centred subsample statistics
    ``tau_b^{-1} T_{i,b} - mean_b`` exceeding ``tau_N^{-1} T_N - B_N``.

    ``u`` feeds the subsamples; ``u_full`` (default ``u``) feeds the
    full-sample statistic unless ``statistic`` is given.
    """
    x, u = _prepare(x, u)
    n = x.size
    b1, b2 = debias_blocks(n)
    if not 1 <= b1 < b2 <= n:
        raise UsageError(f"N={n} too small for calibration blocks ({b1}, {b2})")
    opts = dict(h_rule=h_rule, kind=kind, d=d, lam=lam, window=window,
                grid_points=grid_points, method=method)
    if statistic is None:
        h = h_rule(n)
        u_full = u if u_full is None else np.asarray(u_full, dtype=float)
        t_n = mhm_statistic(u_full, x, h, window, grid_points, method)
        statistic = mhm_normalize(t_n, n, h, kind, d, lam)
    dists = {}

    def dist_for(b):
        if b not in dists:
            dists[b] = subsample_mhm(x, u, b, M if M is None else min(M, n - b + 1), **opts)
        return dists[b]

    bias1, bias2 = dist_for(b1).mean(), dist_for(b2).mean()
    slope, intercept = loglog_line(b1, bias1, b2, bias2)
    bias_n = math.exp(intercept + slope * math.log(n))
    debiased = statistic - bias_n
    pvalues = {}
    for b in blocks:
        dist = dist_for(int(b))
        centred = dist.values - dist.mean()
        pvalues[int(b)] = float(np.count_nonzero(centred > debiased)) / dist.M
    return DebiasReport(b1, b2, bias1, bias2, slope, intercept, bias_n,
                        float(statistic), float(debiased), pvalues)


def block_scan(x, u_full, u_sub, stat_kind: str, b_range: Sequence[int],
               h_rule: BandwidthRule = BandwidthRule(), M: Optional[int] = None,
               kind: str = "LM", d: float = 0.1, lam: float = 0.0,
               window: WeightWindow = WeightWindow()):
    """P-value at each block length; failures leave NaN gaps.

    Returns
    -------
    b : ndarray of int
    p : ndarray of float
    """
    x, u_full = _prepare(x, u_full)
    u_sub = np.asarray(u_sub, dtype=float)
    n = x.size
    bs = np.asarray(list(b_range), dtype=int)
    if bs.size == 0 or bs.min() < 2 or bs.max() > n - 1:
        raise UsageError(f"block lengths must lie in [2, N-1] = [2, {n - 1}]")
    h = h_rule(n)
    stat_kind = stat_kind.lower()
    if stat_kind == "snu":
        full = snu_statistic(u_full, x, h)
        if full.degenerate:
            raise DistributionError("full-sample SNU statistic is degenerate")
        stat = full.z
    elif stat_kind == "mhm":
        stat = mhm_normalize(mhm_statistic(u_full, x, h, window, method="exact"),
                             n, h, kind, d, lam)
    else:
        raise UsageError(f"unknown statistic {stat_kind!r}")
    ps = np.full(bs.size, np.nan)
    for j, b in enumerate(bs):
        m = None if M is None else min(M, n - b + 1)
        try:
            if stat_kind == "snu":
                ps[j] = pvalue_snu(stat, subsample_snu(x, u_sub, int(b), m, h_rule))
            else:
                dist = subsample_mhm(x, u_sub, int(b), m, h_rule, kind, d, lam, window)
                ps[j] = pvalue_mhm(stat, dist)
        except (DistributionError, UsageError):
            continue
    return bs, ps


def minimal_volatility(b, p, window: int = 5) -> int:
    """Centre of the sliding window with the smallest p-value spread.

    Windows touching a NaN gap are ignored; ties go to the smallest ``b``.
    """
    b = np.asarray(b)
    p = np.asarray(p, dtype=float)
    if window < 3 or b.size < window:
        raise UsageError(f"need curve length >= window >= 3, got {b.size} and {window}")
    wins = np.lib.stride_tricks.sliding_window_view(p, window)
    sd = wins.std(axis=1)
    sd = np.where(np.isfinite(sd), sd, np.inf)
    if not np.isfinite(sd).any():
        raise UsageError("no gap-free window in the p-value curve")
    best = int(np.argmin(sd))  # first minimum = smallest centre
    return int(b[best + window // 2])
