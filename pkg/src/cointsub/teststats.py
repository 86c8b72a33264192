"""SNU, MHM and portmanteau specification-test statistics."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np
from scipy import special

from .errors import DegenerateStatistic, DomainError, LengthError, RankError, UsageError
from .kernel import gaussian_kernel
from .processes import scaling_dn

_CHUNK = 1024


@dataclass(frozen=True)
class WeightWindow:
    """Support ``[lo, hi]`` of the indicator weight function."""

    lo: float = -100.0
    hi: float = 100.0

    def __post_init__(self):
        if not (np.isfinite(self.lo) and np.isfinite(self.hi) and self.lo < self.hi):
            raise DomainError(f"weight window needs finite lo < hi, got [{self.lo}, {self.hi}]")

    @classmethod
    def parse(cls, text: str) -> "WeightWindow":
        try:
            lo, hi = (float(t) for t in str(text).split(","))
        except ValueError as exc:
            raise UsageError(f"window must be 'lo,hi', got {text!r}") from exc
        return cls(lo, hi)


@dataclass
class TestOutcome:
    test: str
    statistic: float
    normalized: float
    pvalue: Optional[float] = None
    meta: dict = field(default_factory=dict)

    __test__ = False  # keep pytest from collecting this class

    def __post_init__(self):
        if self.pvalue is not None and not 0.0 <= self.pvalue <= 1.0:
            raise DomainError(f"p-value outside [0, 1]: {self.pvalue}")

    def to_dict(self) -> dict:
        return asdict(self)


class SNUResult(NamedTuple):
    s: float
    v2: float
    z: float

    @property
    def degenerate(self) -> bool:
        return not self.v2 > 0.0


def _as_pair(u, x):
    u = np.asarray(u, dtype=float)
    x = np.asarray(x, dtype=float)
    if u.shape != x.shape or u.ndim != 1:
        raise LengthError("residuals and regressors must be 1-d of equal length")
    return u, x


def snu_from_sums(s: float, v2: float) -> SNUResult:
    z = s / (np.sqrt(2.0) * np.sqrt(v2)) if v2 > 0.0 else np.nan
    return SNUResult(float(s), float(v2), float(z))


def snu_statistic(u, x, h: float) -> SNUResult:
    """Self-normalised U statistic.

    ``S = sum_{k != j} u_k u_j K((x_k - x_j)/h)``,
    ``V^2 = sum_{k != j} u_k^2 u_j^2 K^2((x_k - x_j)/h)`` and
    ``Z = S / (sqrt(2) V)``. ``Z`` is NaN when ``V = 0``; check
    :attr:`SNUResult.degenerate`.
    """
    u, x = _as_pair(u, x)
    if u.size < 2:
        raise LengthError("SNU needs at least two observations")
    if not h > 0:
        raise DomainError(f"bandwidth must be positive, got {h}")
    u2 = u * u
    s = v2 = 0.0
    for a in range(0, u.size, _CHUNK):
        rows = slice(a, a + _CHUNK)
        k = gaussian_kernel((x[rows, None] - x[None, :]) / h)
        idx = np.arange(k.shape[0])
        k[idx, idx + a] = 0.0
        s += float(u[rows] @ (k @ u))
        v2 += float(u2[rows] @ ((k * k) @ u2))
    return snu_from_sums(s, v2)


def snu_bruteforce(u, x, h: float) -> SNUResult:
    """Plain double loop; reference for tests."""
    n = len(u)
    s = v2 = 0.0
    for k in range(n):
        for j in range(n):
            if k != j:
                kk = float(gaussian_kernel((x[k] - x[j]) / h))
                s += u[k] * u[j] * kk
                v2 += u[k] ** 2 * u[j] ** 2 * kk * kk
    return snu_from_sums(s, v2)


def _window_mass(mid, h, window: WeightWindow):
    """``Phi(sqrt2 (hi-m)/h) - Phi(sqrt2 (lo-m)/h)`` without cancellation."""
    a = np.sqrt(2.0) * (window.lo - mid) / h
    b = np.sqrt(2.0) * (window.hi - mid) / h
    upper = a > 0
    return np.where(upper, special.ndtr(-a) - special.ndtr(-b), special.ndtr(b) - special.ndtr(a))


def gauss_overlap(a, c, h: float, window: WeightWindow):
    """``int_lo^hi K((a-t)/h) K((c-t)/h) dt`` in closed form."""
    diff = np.asarray(a) - np.asarray(c)
    mid = 0.5 * (np.asarray(a) + np.asarray(c))
    return (h / (2.0 * np.sqrt(np.pi))) * np.exp(-diff * diff / (4.0 * h * h)) * _window_mass(mid, h, window)


def _mhm_exact(u, x, h, window):
    t = 0.0
    for a in range(0, u.size, _CHUNK):
        rows = slice(a, a + _CHUNK)
        c = gauss_overlap(x[rows, None], x[None, :], h, window)
        t += float(u[rows] @ (c @ u))
    return max(t, 0.0)


def _mhm_quadrature(u, x, h, window, grid_points):
    grid = np.linspace(window.lo, window.hi, grid_points)
    vals = np.empty(grid_points)
    for a in range(0, grid_points, _CHUNK):
        g = grid[a:a + _CHUNK]
        vals[a:a + _CHUNK] = gaussian_kernel((x[None, :] - g[:, None]) / h) @ u
    return float(np.trapezoid(vals * vals, grid))


def mhm_statistic(
    u, x, h: float,
    window: WeightWindow = WeightWindow(),
    grid_points: int = 4001,
    method: str = "quadrature",
) -> float:
    """L2-type statistic ``int {sum_k K((x_k - t)/h) u_k}^2 pi(t) dt``.

    ``method="quadrature"`` uses the composite trapezoid rule on
    ``grid_points`` uniform nodes over the window; ``method="exact"``
    integrates each kernel product in closed form (normal CDFs), which is
    what the subsampling engine uses.
    """
    u, x = _as_pair(u, x)
    if u.size < 1:
        raise LengthError("MHM needs at least one observation")
    if not h > 0:
        raise DomainError(f"bandwidth must be positive, got {h}")
    if method == "exact":
        return _mhm_exact(u, x, h, window)
    if method != "quadrature":
        raise UsageError(f"unknown MHM integration method {method!r}")
    if grid_points < 3:
        raise DomainError(f"grid_points must be >= 3, got {grid_points}")
    return _mhm_quadrature(u, x, h, window, grid_points)


def tau_n(n: int, h: float, kind: str, d: float, lam: float = 0.0) -> float:
    """MHM normaliser ``N h / d_N``."""
    return n * h / scaling_dn(kind, n, d, lam)


def mhm_normalize(t_n: float, n: int, h: float, kind: str, d: float, lam: float = 0.0) -> float:
    return t_n / tau_n(n, h, kind, d, lam)


def fit_ar_residuals(u, p: int):
    """Intercept-free least-squares AR(p) on ``u``.

    Returns
    -------
    psi : ndarray, shape (p,)
    eps : ndarray, shape (N - p,)
        Filtered residuals for ``k = p+1..N``.
    """
    u = np.asarray(u, dtype=float)
    n = u.size
    if not 1 <= p < n:
        raise UsageError(f"need 1 <= p < N, got p={p}, N={n}")
    target = u[p:]
    lags = np.column_stack([u[p - j:n - j] for j in range(1, p + 1)])
    psi, _, rank, _ = np.linalg.lstsq(lags, target, rcond=None)
    if rank < p:
        raise RankError(f"lag matrix has rank {rank} < {p}")
    return psi, target - lags @ psi


def autocorrelations(eps, max_lag: int) -> np.ndarray:
    """``a_k = sum_{t>k} e_t e_{t-k} / sum_t e_t^2`` for ``k = 1..max_lag``."""
    eps = np.asarray(eps, dtype=float)
    denom = float(eps @ eps)
    if not denom > 0:
        raise DegenerateStatistic("filtered residuals are identically zero")
    return np.array([float(eps[k:] @ eps[:-k]) for k in range(1, max_lag + 1)]) / denom


def ljung_box(acf, n: int) -> float:
    k = np.arange(1, len(acf) + 1)
    return float(n * (n + 2.0) * np.sum(np.asarray(acf) ** 2 / (n - k)))


def portmanteau_many(u, p: int, lags: Sequence[int]) -> list:
    """Portmanteau outcomes for several ``L`` from one AR(p) filter."""
    lags = [int(L) for L in lags]
    u = np.asarray(u, dtype=float)
    for L in lags:
        if not L > p:
            raise UsageError(f"need L > p, got L={L}, p={p}")
        if not u.size > L:
            raise UsageError(f"need N > L, got N={u.size}, L={L}")
    psi, eps = fit_ar_residuals(u, p)
    n = eps.size
    if max(lags) >= n:
        raise UsageError(f"L={max(lags)} leaves no terms for {n} filtered residuals")
    acf = autocorrelations(eps, max(lags))
    out = []
    for L in lags:
        stat = ljung_box(acf[:L], n)
        out.append(TestOutcome(
            test="P", statistic=stat, normalized=stat,
            pvalue=chi2_sf(stat, L - p),
            meta={"p": p, "L": L, "dof": L - p, "n_eff": n, "psi": psi.tolist()},
        ))
    return out


def portmanteau(u, p: int, L: int) -> TestOutcome:
    return portmanteau_many(u, p, [L])[0]


def chi2_sf(x: float, dof: int) -> float:
    """Upper tail ``Q(dof/2, x/2)`` of the chi-squared distribution."""
    if dof < 1:
        raise DomainError(f"dof must be >= 1, got {dof}")
    if x < 0:
        raise DomainError(f"chi-squared argument must be >= 0, got {x}")
    return float(special.gammaincc(0.5 * dof, 0.5 * x))


def chi2_cdf(x: float, dof: int) -> float:
    if dof < 1:
        raise DomainError(f"dof must be >= 1, got {dof}")
    if x < 0:
        raise DomainError(f"chi-squared argument must be >= 0, got {x}")
    return float(special.gammainc(0.5 * dof, 0.5 * x))
