"""Gaussian kernel smoothing and leave-one-out bandwidth selection."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DomainError, UsageError

_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)
_ROW_CHUNK = 2048


def gaussian_kernel(x):
    """Standard normal density."""
    x = np.asarray(x, dtype=float)
    return _INV_SQRT_2PI * np.exp(-0.5 * x * x)


@dataclass(frozen=True)
class BandwidthRule:
    """Bandwidth as a function of sample size.

    ``power`` gives ``n ** exponent`` (default ``n ** (-1/3)``); ``fixed``
    returns ``value`` whatever the sample size.
    """

    kind: str = "power"
    value: float = -1.0 / 3.0

    def __post_init__(self):
        if self.kind not in ("power", "fixed"):
            raise UsageError(f"unknown bandwidth rule {self.kind!r}")
        if self.kind == "fixed" and not self.value > 0:
            raise DomainError(f"fixed bandwidth must be positive, got {self.value}")

    def __call__(self, n: int) -> float:
        if self.kind == "fixed":
            return float(self.value)
        return float(n) ** self.value

    @classmethod
    def fixed(cls, h: float) -> "BandwidthRule":
        return cls("fixed", float(h))

    @classmethod
    def parse(cls, text: str) -> "BandwidthRule":
        """Parse ``power``, ``power:<exponent>`` or ``fixed:<h>``."""
        head, _, tail = str(text).strip().partition(":")
        head = head.lower()
        if head == "power":
            return cls("power", float(tail) if tail else -1.0 / 3.0)
        if head == "fixed" and tail:
            return cls.fixed(float(tail))
        raise UsageError(f"cannot parse bandwidth rule {text!r}")

    def __str__(self):
        return f"{self.kind}:{self.value!r}"


def _check_h(h):
    if not h > 0:
        raise DomainError(f"bandwidth must be positive, got {h}")


def nw_fit(x_data, y_data, x_eval, h: float) -> np.ndarray:
    """Nadaraya-Watson estimates at each point of ``x_eval``.

    Points where every kernel weight underflows are returned as NaN.
    """
    _check_h(h)
    x_data = np.asarray(x_data, dtype=float)
    y_data = np.asarray(y_data, dtype=float)
    if x_data.size == 0:
        raise UsageError("empty data")
    x_eval = np.atleast_1d(np.asarray(x_eval, dtype=float))
    out = np.empty(x_eval.shape)
    for s in range(0, x_eval.size, _ROW_CHUNK):
        w = gaussian_kernel((x_data[None, :] - x_eval[s:s + _ROW_CHUNK, None]) / h)
        tot = w.sum(axis=1)
        num = w @ y_data
        with np.errstate(invalid="ignore", divide="ignore"):
            out[s:s + _ROW_CHUNK] = np.where(tot > 0, num / tot, np.nan)
    return out


def nw_estimate(x_data, y_data, x0: float, h: float) -> float:
    return float(nw_fit(x_data, y_data, [x0], h)[0])


class LCVScore(NamedTuple):
    score: float
    excluded: int


def loo_predictions(x_data, y_data, h: float) -> np.ndarray:
    """Leave-one-out NW predictions at each ``x_k``; NaN where undefined."""
    _check_h(h)
    x = np.asarray(x_data, dtype=float)
    y = np.asarray(y_data, dtype=float)
    n = x.size
    out = np.empty(n)
    for s in range(0, n, _ROW_CHUNK):
        rows = np.arange(s, min(n, s + _ROW_CHUNK))
        w = gaussian_kernel((x[None, :] - x[rows, None]) / h)
        w[np.arange(rows.size), rows] = 0.0
        tot = w.sum(axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            out[rows] = np.where(tot > 0, (w @ y) / tot, np.nan)
    return out


def lcv_score(x_data, y_data, h: float) -> LCVScore:
    """Least-squares leave-one-out cross-validation criterion.

    Observations whose leave-one-out weights all vanish are dropped from the
    mean and counted in ``excluded``.
    """
    y = np.asarray(y_data, dtype=float)
    if y.size < 2:
        raise UsageError("LCV needs at least two observations")
    pred = loo_predictions(x_data, y, h)
    ok = np.isfinite(pred)
    excluded = int(y.size - ok.sum())
    if not ok.any():
        return LCVScore(np.nan, excluded)
    resid = y[ok] - pred[ok]
    return LCVScore(float(np.mean(resid * resid)), excluded)


def lcv_curve(x_data, y_data, h_grid):
    h_grid = np.asarray(h_grid, dtype=float)
    scores = np.empty(h_grid.size)
    excluded = np.empty(h_grid.size, dtype=int)
    for i, h in enumerate(h_grid):
        scores[i], excluded[i] = lcv_score(x_data, y_data, h)
    return scores, excluded


def select_bandwidth(x_data, y_data, h_grid):
    """Grid minimiser of :func:`lcv_score`; ties go to the smallest ``h``.

    Returns
    -------
    (h_opt, score)
    """
    h_grid = np.atleast_1d(np.asarray(h_grid, dtype=float))
    if h_grid.size == 0:
        raise UsageError("bandwidth grid is empty")
    if np.any(h_grid <= 0):
        raise DomainError("bandwidth grid must be positive")
    scores, _ = lcv_curve(x_data, y_data, h_grid)
    if not np.isfinite(scores).any():
        raise UsageError("no grid bandwidth yields a defined LCV score")
    masked = np.where(np.isfinite(scores), scores, np.inf)
    best = masked.min()
    candidates = np.flatnonzero(masked == best)
    i = candidates[np.argmin(h_grid[candidates])]
    return float(h_grid[i]), float(scores[i])


def default_bandwidth_grid(x_data, n_points: int = 200) -> np.ndarray:
    """Log-spaced grid over ``[0.01, 1] * range(x)``."""
    x = np.asarray(x_data, dtype=float)
    span = float(np.ptp(x))
    if not span > 0:
        raise UsageError("regressor has zero range")
    return np.geomspace(0.01 * span, span, n_points)


def parse_grid(text: str) -> np.ndarray:
    """``start:step:stop`` (inclusive) or a comma separated list."""
    text = str(text).strip()
    if ":" in text:
        try:
            start, step, stop = (float(t) for t in text.split(":"))
        except ValueError as exc:
            raise UsageError(f"bad grid spec {text!r}") from exc
        if not step > 0 or stop < start:
            raise UsageError(f"bad grid spec {text!r}")
        count = int(np.floor((stop - start) / step + 1e-9)) + 1
        # round away the accumulation noise so grid points print exactly
        return np.round(start + step * np.arange(count), 12)
    try:
        vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise UsageError(f"bad grid spec {text!r}") from exc
    if not vals:
        raise UsageError("bandwidth grid is empty")
    return np.asarray(vals)
