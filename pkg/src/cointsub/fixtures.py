"""Bundled synthetic data sets and loaders for user-supplied CKC data.

``nonlinear_white`` is a deterministic-regressor example where a quadratic
fit leaves smooth residuals that an AR(2) filter absorbs. ``ckc_standin``
mimics the shape of the 59-year log(GDP)/log(CO2) series without being real
data. The real carbon-curve data are never bundled; point ``COINTSUB_CKC_DIR``
at a directory holding ``spain.csv`` and ``france.csv`` to use them.
"""

from __future__ import annotations

import os
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

from .processes import SLM, ProcessConfig, SeriesPair, build_series

NONLINEAR_PARAMS = (0.55, 0.60, 5.0)  # (alpha, beta, gamma)
NONLINEAR_N = 80
NONLINEAR_SIGMA = 0.025
NONLINEAR_RANGE = (0.0, 3.0)
NONLINEAR_SEED = 2024

CKC_ENV = "COINTSUB_CKC_DIR"
CKC_COUNTRIES = ("spain", "france")


def nonlinear_trend(x, alpha=0.55, beta=0.60, gamma=5.0):
    """``gamma + (alpha x - beta) exp(-alpha x)``."""
    x = np.asarray(x, dtype=float)
    return gamma + (alpha * x - beta) * np.exp(-alpha * x)


def make_nonlinear_white(n: int = NONLINEAR_N, seed: int = NONLINEAR_SEED,
                         sigma: float = NONLINEAR_SIGMA,
                         x_range=NONLINEAR_RANGE) -> SeriesPair:
    """Equally spaced ``x`` on ``x_range`` plus white normal noise."""
    x = np.linspace(x_range[0], x_range[1], n)
    u = np.random.default_rng(seed).normal(0.0, 1.0, n)
    return SeriesPair(x=x, y=nonlinear_trend(x, *NONLINEAR_PARAMS) + sigma * u, u=u)


def make_ckc_standin(seed: int = 1950) -> SeriesPair:
    """59 annual points: an SLM regressor around log GDP levels and a
    straight-line response with AR(1) errors."""
    cfg = ProcessConfig(kind=SLM, d=0.4, lam=0.138, r=0.5, sigma=0.05, n=59, seed=seed)
    pair = build_series(cfg, lambda x: x)
    x = 8.0 + 0.05 * pair.x
    y = -9.0 + 1.1 * x + cfg.sigma * pair.u
    return SeriesPair(x=x, y=y, u=pair.u)


def _data_file(name: str) -> Path:
    return Path(str(resources.files("cointsub") / "data" / name))


def nonlinear_white_path() -> Path:
    return _data_file("nonlinear_white.csv")


def ckc_standin_path() -> Path:
    return _data_file("ckc_standin.csv")


def load_nonlinear_white():
    from .io import read_dataset
    return read_dataset(nonlinear_white_path())


def load_ckc_standin():
    from .io import read_dataset
    return read_dataset(ckc_standin_path())


def ckc_path(country: str) -> Optional[Path]:
    """Path to user-supplied CKC data for ``country``, or None when absent."""
    root = os.environ.get(CKC_ENV)
    if not root:
        return None
    path = Path(root) / f"{country.lower()}.csv"
    return path if path.is_file() else None


def load_ckc(country: str):
    """Dataset for ``country`` or None when the user has not supplied it."""
    from .io import read_dataset
    path = ckc_path(country)
    return None if path is None else read_dataset(path)


__all__ = [
    "nonlinear_trend", "make_nonlinear_white", "make_ckc_standin",
    "load_nonlinear_white", "load_ckc_standin", "load_ckc", "ckc_path",
]
