"""Long-memory and semi-long-memory regressors with endogenous errors.

Shocks are truncated moving averages of i.i.d. normal noise with
hyperbolically decaying weights, optionally tempered by ``exp(-lambda k)``.
The default weights are the pure power law ``k**(d-1)`` (``phi_0 = 1``), whose
slowly varying factor is exactly one, matching the ``d_N`` scaling used for
the MHM normaliser. ``coeffs="binomial"`` selects the ARFIMA weights
``Gamma(k+d) / (Gamma(d) Gamma(k+1))`` instead, which are smaller by about
``1 / Gamma(d)`` in the tail.
Regressors are their partial sums, and the regression errors are AR(1) or
MA(1) processes driven by noise correlated with the shock noise.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy import integrate
from scipy.signal import lfilter

from .errors import DomainError, LengthError

SeedLike = Union[int, Sequence[int], np.random.SeedSequence]

LM = "LM"
SLM = "SLM"

COEFF_SCHEMES = ("power", "binomial")


def normalize_kind(kind: str) -> str:
    k = str(kind).upper()
    if k not in (LM, SLM):
        raise DomainError(f"memory kind must be LM or SLM, got {kind!r}")
    return k


@dataclass(frozen=True)
class AR1:
    """``u_k = psi u_{k-1} + eps(k)``."""

    psi: float = 0.25


@dataclass(frozen=True)
class MA1:
    """``u_k = mu + eps(k) + theta eps(k-1)``."""

    mu: float = 0.0
    theta: float = 0.8


ErrorSpec = Union[AR1, MA1]


@dataclass(frozen=True)
class ProcessConfig:
    kind: str = LM
    d: float = 0.1
    lam: float = 0.0
    r: float = 0.5
    error_spec: ErrorSpec = field(default_factory=AR1)
    sigma: float = 0.2
    n: int = 500
    trunc: int = 1000
    seed: SeedLike = 0
    coeffs: str = "power"

    def __post_init__(self):
        object.__setattr__(self, "kind", normalize_kind(self.kind))
        if self.kind == LM and not 0.0 < self.d < 0.5:
            raise DomainError(f"LM requires 0 < d < 1/2, got d={self.d}")
        if self.kind == SLM and not (self.d > 0.0 and self.lam > 0.0):
            raise DomainError(
                f"SLM requires d > 0 and lambda > 0, got d={self.d}, lambda={self.lam}"
            )
        if abs(self.r) > 1.0:
            raise DomainError(f"|r| must not exceed 1, got {self.r}")
        if not self.sigma > 0.0:
            raise DomainError(f"sigma must be positive, got {self.sigma}")
        if self.trunc < 1:
            raise DomainError(f"trunc must be >= 1, got {self.trunc}")
        if self.n < 1:
            raise DomainError(f"n must be >= 1, got {self.n}")
        if self.coeffs not in COEFF_SCHEMES:
            raise DomainError(f"coeffs must be one of {COEFF_SCHEMES}, got {self.coeffs!r}")
        if isinstance(self.error_spec, AR1) and abs(self.error_spec.psi) >= 1.0:
            raise DomainError(f"AR(1) requires |psi| < 1, got {self.error_spec.psi}")

    @property
    def tempering(self) -> float:
        return self.lam if self.kind == SLM else 0.0


@dataclass(frozen=True)
class InnovationPair:
    xi: np.ndarray
    eps: np.ndarray
    r: float

    def __len__(self):
        return len(self.xi)


@dataclass(frozen=True)
class SeriesPair:
    x: np.ndarray
    y: np.ndarray
    u: Optional[np.ndarray] = None

    def __post_init__(self):
        if len(self.x) != len(self.y) or (self.u is not None and len(self.u) != len(self.x)):
            raise LengthError("x, y and u must have equal length")

    @property
    def n(self) -> int:
        return len(self.x)

    @property
    def shocks(self) -> np.ndarray:
        return np.diff(self.x, prepend=0.0)


def frac_coeffs(d: float, n_terms: int) -> np.ndarray:
    """Fractional-binomial weights ``Gamma(k+d) / (Gamma(d) Gamma(k+1))``.

    Computed by the recursion ``phi_k = phi_{k-1} (k - 1 + d) / k`` with
    ``phi_0 = 1``; the weights decay like ``k**(d-1) / Gamma(d)``.
    """
    if not d > 0:
        raise DomainError(f"d must be positive, got {d}")
    if n_terms < 1:
        raise DomainError(f"n_terms must be >= 1, got {n_terms}")
    k = np.arange(1, n_terms, dtype=float)
    return np.concatenate(([1.0], np.cumprod((k - 1.0 + d) / k)))


def power_coeffs(d: float, n_terms: int) -> np.ndarray:
    """Pure power weights: ``phi_0 = 1`` and ``phi_k = k**(d-1)``."""
    if not d > 0:
        raise DomainError(f"d must be positive, got {d}")
    if n_terms < 1:
        raise DomainError(f"n_terms must be >= 1, got {n_terms}")
    k = np.arange(1, n_terms, dtype=float)
    return np.concatenate(([1.0], k ** (d - 1.0)))


def make_rng(seed: SeedLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def replication_seed(base_seed: int, rep: int) -> tuple:
    """Entropy for replication ``rep``; streams are disjoint across reps."""
    return (int(base_seed), int(rep))


def gen_innovations(n: int, trunc: int, r: float, seed: SeedLike) -> InnovationPair:
    """Draw ``n + trunc`` bivariate normal pairs with correlation ``r``.

    The first ``trunc`` entries are presample values.
    """
    if abs(r) > 1.0:
        raise DomainError(f"|r| must not exceed 1, got {r}")
    rng = make_rng(seed)
    m = n + trunc
    xi = rng.standard_normal(m)
    w = rng.standard_normal(m)
    eps = r * xi + np.sqrt(1.0 - r * r) * w
    return InnovationPair(xi=xi, eps=eps, r=float(r))


def shock_coeffs(cfg: ProcessConfig) -> np.ndarray:
    weights = power_coeffs if cfg.coeffs == "power" else frac_coeffs
    phi = weights(cfg.d, cfg.trunc + 1)
    lam = cfg.tempering
    if lam > 0.0:
        phi = phi * np.exp(-lam * np.arange(cfg.trunc + 1))
    return phi


def gen_shocks(cfg: ProcessConfig, innov: InnovationPair) -> np.ndarray:
    """``X(j) = sum_{k=0}^{trunc} c_k phi(d, k) xi(j - k)`` for ``j = 1..n``."""
    if len(innov) < cfg.n + cfg.trunc:
        raise LengthError(
            f"need {cfg.n + cfg.trunc} innovations, got {len(innov)}"
        )
    xi = innov.xi[: cfg.n + cfg.trunc]
    return np.convolve(xi, shock_coeffs(cfg), mode="valid")


def gen_errors(cfg: ProcessConfig, innov: InnovationPair) -> np.ndarray:
    if len(innov) < cfg.n + cfg.trunc:
        raise LengthError(
            f"need {cfg.n + cfg.trunc} innovations, got {len(innov)}"
        )
    eps = innov.eps[: cfg.n + cfg.trunc]
    spec = cfg.error_spec
    if isinstance(spec, AR1):
        if abs(spec.psi) >= 1.0:
            raise DomainError(f"AR(1) requires |psi| < 1, got {spec.psi}")
        # run through the presample as burn-in, then keep the last n values
        u = lfilter([1.0], [1.0, -spec.psi], eps)
        return u[cfg.trunc:]
    if isinstance(spec, MA1):
        t = cfg.trunc
        return spec.mu + eps[t:] + spec.theta * eps[t - 1:-1]
    raise DomainError(f"unknown error specification {spec!r}")


def build_series(
    cfg: ProcessConfig,
    f: Callable[[np.ndarray], np.ndarray],
    innov: Optional[InnovationPair] = None,
) -> SeriesPair:
    """Simulate ``y_k = f(x_k) + sigma u_k`` with partial-sum regressors."""
    if innov is None:
        innov = gen_innovations(cfg.n, cfg.trunc, cfg.r, cfg.seed)
    x = np.cumsum(gen_shocks(cfg, innov))
    u = gen_errors(cfg, innov)
    y = np.asarray(f(x), dtype=float) + cfg.sigma * u
    return SeriesPair(x=x, y=y, u=u)


def _cd_integral_parts(d: float) -> tuple:
    """The integral of ``{x(x+1)}^(d-1)`` split at 1.

    Both pieces carry an algebraic endpoint singularity at 0 (the tail after
    ``x -> 1/x``), integrated with QUADPACK's algebraic weight.
    """
    head, _ = integrate.quad(
        lambda x: (1.0 + x) ** (d - 1.0), 0.0, 1.0,
        weight="alg", wvar=(d - 1.0, 0.0), epsabs=0.0, epsrel=1e-13, limit=200,
    )
    tail, _ = integrate.quad(
        lambda s: (1.0 + s) ** (d - 1.0), 0.0, 1.0,
        weight="alg", wvar=(-2.0 * d, 0.0), epsabs=0.0, epsrel=1e-13, limit=200,
    )
    return head, tail


def c_d_constant(d: float) -> float:
    """Variance constant of the LM partial-sum scaling."""
    if not 0.0 < d < 0.5:
        raise DomainError(f"c_d requires 0 < d < 1/2, got {d}")
    head, tail = _cd_integral_parts(d)
    return (head + tail) / (d * (1.0 + 2.0 * d))


def scaling_dn(kind: str, n: float, d: float, lam: float = 0.0) -> float:
    """Scale ``d_N`` of the regressor partial sums.

    ``N**(d+1/2) * sqrt(c_d)`` under LM and ``sqrt(N) / lam**d`` under SLM.
    """
    kind = normalize_kind(kind)
    if kind == LM:
        return float(n) ** (d + 0.5) * np.sqrt(c_d_constant(d))
    if not lam > 0.0:
        raise DomainError(f"SLM scaling requires lambda > 0, got {lam}")
    if not d > 0.0:
        raise DomainError(f"d must be positive, got {d}")
    return np.sqrt(float(n)) / lam ** d
