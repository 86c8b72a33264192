"""Hypothesised regression families and their least-squares fits."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import optimize

from .errors import OptimizationError, RankError, UsageError
from .kernel import nw_fit

LINEAR = "linear"
QUADRATIC = "quadratic"
EXP_INTEGRABLE = "exp"

FAMILIES = {LINEAR: 2, QUADRATIC: 3, EXP_INTEGRABLE: 1}

_EXP_BOUNDS = (1e-3, 1e3)
_EXP_SCAN = 241


def normalize_family(family: str) -> str:
    f = str(family).lower()
    aliases = {"line": LINEAR, "quad": QUADRATIC, "expintegrable": EXP_INTEGRABLE,
               "exp_integrable": EXP_INTEGRABLE}
    f = aliases.get(f, f)
    if f not in FAMILIES:
        raise UsageError(f"unknown model family {family!r}; expected one of {sorted(FAMILIES)}")
    return f


@dataclass(frozen=True)
class ModelSpec:
    family: str
    params: np.ndarray
    q: float = np.nan  # residual sum of squares at ``params``

    def __post_init__(self):
        fam = normalize_family(self.family)
        object.__setattr__(self, "family", fam)
        params = np.asarray(self.params, dtype=float)
        if params.shape != (FAMILIES[fam],):
            raise UsageError(f"{fam} takes {FAMILIES[fam]} parameters, got {params.shape}")
        object.__setattr__(self, "params", params)

    def __call__(self, x) -> np.ndarray:
        return evaluate(self.family, self.params, x)


def evaluate(family: str, params, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    p = np.asarray(params, dtype=float)
    family = normalize_family(family)
    if family == LINEAR:
        return p[0] + p[1] * x
    if family == QUADRATIC:
        return p[0] + p[1] * x + p[2] * x * x
    return np.exp(-p[0] * np.abs(x))


def design_matrix(family: str, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    family = normalize_family(family)
    if family == LINEAR:
        return np.column_stack((np.ones_like(x), x))
    if family == QUADRATIC:
        return np.column_stack((np.ones_like(x), x, x * x))
    raise UsageError(f"{family} is not linear in its parameters")


def _sse(family, params, x, y):
    r = y - evaluate(family, params, x)
    return float(r @ r)


def _fit_polynomial(family, x, y):
    X = design_matrix(family, x)
    beta, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
    if rank < X.shape[1]:
        raise RankError(f"{family} design has rank {rank} < {X.shape[1]}")
    return beta


def _fit_exp(x, y, init):
    ax = np.abs(x)

    def q_log(t):
        r = y - np.exp(-np.exp(t) * ax)
        return float(r @ r)

    grid = np.linspace(np.log(_EXP_BOUNDS[0]), np.log(_EXP_BOUNDS[1]), _EXP_SCAN)
    vals = np.array([q_log(t) for t in grid])
    i = int(np.argmin(vals))
    if i == 0 or i == grid.size - 1:
        raise OptimizationError(
            "no interior minimum of Q over theta in [1e-3, 1e3]",
            {"argmin_theta": float(np.exp(grid[i])), "q": float(vals[i])},
        )
    try:
        res = optimize.minimize_scalar(
            q_log, bracket=(grid[i - 1], grid[i], grid[i + 1]), method="golden",
            options={"xtol": 1e-10},
        )
    except ValueError:
        # flat neighbourhood: not a strict bracket
        res = optimize.minimize_scalar(
            q_log, bounds=(grid[i - 1], grid[i + 1]), method="bounded",
            options={"xatol": 1e-10},
        )
    theta = float(np.exp(res.x))
    q = _sse(EXP_INTEGRABLE, [theta], x, y)
    # damped Newton polish on theta itself
    for _ in range(20):
        g = np.exp(-theta * ax)
        r = y - g
        grad = 2.0 * np.sum(r * ax * g)
        hess = 2.0 * np.sum(ax * ax * g * (g - r))
        if not hess > 0 or grad == 0.0:
            break
        step = grad / hess
        t_new = theta - step
        for _ in range(30):
            if t_new > 0:
                q_new = _sse(EXP_INTEGRABLE, [t_new], x, y)
                if q_new <= q:
                    break
            step *= 0.5
            t_new = theta - step
        else:
            break
        converged = abs(t_new - theta) <= 1e-14 * max(1.0, theta)
        theta, q = t_new, q_new
        if converged:
            break
    if init is not None:
        q_init = _sse(EXP_INTEGRABLE, init, x, y)
        if q_init < q:
            theta, q = float(np.asarray(init, dtype=float)[0]), q_init
    return np.array([theta])


def fit(family: str, x_data, y_data, init: Optional[np.ndarray] = None) -> ModelSpec:
    """Least-squares fit of ``family`` to ``(x, y)``.

    Linear and quadratic families are solved directly; the integrable
    ``exp(-theta |x|)`` family is located by a log-scale scan and golden
    section over ``theta`` in ``[1e-3, 1e3]``, then polished with damped
    Newton steps.
    """
    family = normalize_family(family)
    x = np.asarray(x_data, dtype=float)
    y = np.asarray(y_data, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise UsageError("x and y must be 1-d arrays of equal length")
    if x.size < FAMILIES[family]:
        raise RankError(f"{family} needs at least {FAMILIES[family]} observations")
    if family == EXP_INTEGRABLE:
        params = _fit_exp(x, y, init)
    else:
        params = _fit_polynomial(family, x, y)
    return ModelSpec(family, params, _sse(family, params, x, y))


def residuals(model: ModelSpec, x_data, y_data) -> np.ndarray:
    return np.asarray(y_data, dtype=float) - model(x_data)


def nonparametric_residuals(x_data, y_data, h: float) -> np.ndarray:
    """``y_k - fhat(x_k)`` with the full-data NW smoother (point k included)."""
    y = np.asarray(y_data, dtype=float)
    return y - nw_fit(x_data, y, x_data, h)
