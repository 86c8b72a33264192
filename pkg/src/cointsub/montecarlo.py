"""Size and power experiments for the specification tests.

A cell fixes the process, the generating model, the hypothesised family and
the tests; each replication draws its own RNG stream from
``(base_seed, rep)`` so results do not depend on execution order.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .errors import CellError, CointsubError, UsageError
from .kernel import BandwidthRule
from .models import fit, nonparametric_residuals, residuals
from .processes import (
    ProcessConfig,
    gen_errors,
    gen_innovations,
    gen_shocks,
    make_rng,
    replication_seed,
)
from .subsampling import debias_mhm, pvalue_snu, subsample_snu
from .teststats import WeightWindow, mhm_normalize, mhm_statistic, portmanteau_many, snu_statistic

WARN_FAIL_FRACTION = 0.01
MAX_FAIL_FRACTION = 0.05

BLOCK_MULTIPLIERS = (0.5, 1.0, 2.0, 4.0)

LINEAR_MODELS = ("NULL_LINEAR", "LOCAL_ALT", "B2", "B3", "B4", "B5")
EXP_MODELS = ("B6", "NULL_EXP", "B7", "B8", "B9", "B10")


def default_blocks(n: int, multipliers: Sequence[float] = BLOCK_MULTIPLIERS) -> list:
    """``floor(c sqrt N)``; 11, 22, 44, 89 at ``N = 500``."""
    return [int(math.floor(c * math.sqrt(n))) for c in multipliers]


def local_alt_rate(n: int, h: float, nu: float) -> float:
    """``rho_N = 1 / (N^{1/4 + nu/3} h^{1/4})``."""
    return 1.0 / (n ** (0.25 + nu / 3.0) * h ** 0.25)


def _extra_term(model_id: str, x):
    ax = np.abs(x)
    tag = {"B2": 2, "B7": 2, "B3": 3, "B8": 3, "B4": 4, "B9": 4, "B5": 5, "B10": 5}[model_id]
    if tag == 2:
        return 0.5 * ax ** 2 * (ax <= 10.0)
    if tag == 3:
        return 20.0 * np.exp(-ax ** 2)
    if tag == 4:
        return 0.1 * ax
    return 0.1 * ax ** 2


def gen_response(model_id: str, x, u, sigma: float, params: Optional[dict] = None) -> np.ndarray:
    """Responses ``y_k`` for a catalogue model.

    ``params`` may set ``theta0``/``theta1`` (defaults 0 and 1), ``nu`` for
    the local alternative (default 3) and ``h`` (default ``N^{-1/3}``).
    """
    params = dict(params or {})
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    mid = model_id.upper()
    theta0 = params.get("theta0", 0.0)
    theta1 = params.get("theta1", 1.0)
    if mid in ("NULL_LINEAR", "B1"):
        f = theta0 + theta1 * x
    elif mid == "LOCAL_ALT":
        n = x.size
        nu = params.get("nu", 3.0)
        h = params.get("h", n ** (-1.0 / 3.0))
        f = theta0 + theta1 * x + local_alt_rate(n, h, nu) * np.abs(x) ** nu
    elif mid in ("B2", "B3", "B4", "B5"):
        f = theta0 + theta1 * x + _extra_term(mid, x)
    elif mid in ("B6", "NULL_EXP"):
        f = np.exp(-theta1 * np.abs(x))
    elif mid in ("B7", "B8", "B9", "B10"):
        f = np.exp(-theta1 * np.abs(x)) + _extra_term(mid, x)
    else:
        raise UsageError(f"unknown generating model {model_id!r}")
    return f + sigma * u


@dataclass(frozen=True)
class SNUTest:
    residuals: str = "parametric"

    @property
    def name(self):
        return f"SNU[{self.residuals}]"


@dataclass(frozen=True)
class MHMDebiasedTest:
    residuals: str = "parametric"

    @property
    def name(self):
        return f"MHM-debiased[{self.residuals}]"


@dataclass(frozen=True)
class PortmanteauTest:
    p: int = 1
    lags: tuple = (6, 12, 18)

    @property
    def name(self):
        return f"P[p={self.p}]"


@dataclass(frozen=True)
class UniformStubTest:
    """Emits Uniform(0, 1) p-values; calibrates the harness itself."""

    @property
    def name(self):
        return "UNIFORM-STUB"


TestSpec = Union[SNUTest, MHMDebiasedTest, PortmanteauTest, UniformStubTest]


@dataclass(frozen=True)
class ExperimentConfig:
    process: ProcessConfig = field(default_factory=ProcessConfig)
    gen_model: str = "NULL_LINEAR"
    gen_params: dict = field(default_factory=dict)
    hypothesis: str = "linear"
    tests: tuple = (SNUTest(),)
    blocks: Optional[tuple] = None
    reps: int = 500
    alpha: float = 0.05
    base_seed: int = 12345
    h_rule: BandwidthRule = BandwidthRule()
    M: Optional[int] = None
    window: WeightWindow = WeightWindow()
    label: str = ""

    __test__ = False

    def __post_init__(self):
        if self.reps < 1:
            raise UsageError("reps must be >= 1")
        if not 0.0 < self.alpha < 1.0:
            raise UsageError("alpha must lie in (0, 1)")
        n = self.process.n
        for b in self.block_list:
            if not 2 <= b <= n - 1:
                raise UsageError(f"block length {b} outside [2, N-1] for N={n}")
        if isinstance(self.tests, (SNUTest, MHMDebiasedTest, PortmanteauTest, UniformStubTest)):
            object.__setattr__(self, "tests", (self.tests,))

    @property
    def block_list(self) -> list:
        if self.blocks is None:
            return default_blocks(self.process.n)
        return [int(b) for b in self.blocks]


@dataclass
class RejectionRow:
    label: str
    test: str
    setting: str
    value: int
    memory: str
    d: float
    lam: float
    r: float
    n: int
    gen_model: str
    reps: int
    failed: int
    rejections: int
    rate: float


@dataclass
class RejectionTable:
    rows: list = field(default_factory=list)

    COLUMNS = ("label", "test", "setting", "value", "memory", "d", "lam", "r", "n",
               "gen_model", "reps", "failed", "rejections", "rate")

    def __add__(self, other):
        return RejectionTable(self.rows + other.rows)

    def __len__(self):
        return len(self.rows)

    def rates(self, test: Optional[str] = None) -> list:
        return [row.rate for row in self.rows if test is None or row.test == test]

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.COLUMNS)
        for row in self.rows:
            w.writerow([getattr(row, c) for c in self.COLUMNS])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        return text

    def to_text(self) -> str:
        """One line per test, memory kind, d and r; rates in {blocks} or (lags)."""
        groups = {}
        for row in self.rows:
            key = (row.label, row.test, row.memory, row.d, row.lam, row.r, row.n, row.gen_model)
            groups.setdefault(key, []).append(row)
        lines = []
        header = f"{'test':<24} {'model':<11} {'mem':<4} {'d':>5} {'lambda':>8} {'r':>5} {'N':>5}  rates"
        lines.append(header)
        lines.append("-" * len(header))
        for (label, test, mem, d, lam, r, n, gm), rows in groups.items():
            open_, close = ("(", ")") if rows[0].setting == "L" else ("{", "}")
            rates = ", ".join(f"{row.rate:.3f}" for row in rows)
            settings = ",".join(str(row.value) for row in rows)
            lam_s = f"{lam:.4f}" if mem == "SLM" else "-"
            lines.append(
                f"{test:<24} {gm:<11} {mem:<4} {d:>5.2f} {lam_s:>8} {r:>5.2f} {n:>5}  "
                f"{open_}{rates}{close}  {rows[0].setting}=({settings})"
            )
        return "\n".join(lines) + "\n"


def simulate_replication(cfg: ExperimentConfig, rep: int):
    """Generate one data set; returns ``(x, y, u)``."""
    proc = cfg.process
    seed = replication_seed(cfg.base_seed, rep)
    innov = gen_innovations(proc.n, proc.trunc, proc.r, seed)
    x = np.cumsum(gen_shocks(proc, innov))
    u = gen_errors(proc, innov)
    y = gen_response(cfg.gen_model, x, u, proc.sigma, cfg.gen_params)
    return x, y, u


def _run_tests(cfg: ExperimentConfig, x, y, rep: int) -> dict:
    """P-values keyed by ``(test name, setting, value)``; failures map to None."""
    out = {}
    proc = cfg.process
    n = x.size
    h = cfg.h_rule(n)
    blocks = cfg.block_list
    try:
        model = fit(cfg.hypothesis, x, y)
        u_hat = residuals(model, x, y)
    except (CointsubError, np.linalg.LinAlgError):
        model = u_hat = None
    u_np = None
    for test in cfg.tests:
        name = test.name
        if isinstance(test, UniformStubTest):
            rng = make_rng((cfg.base_seed, rep, 0x5EED))
            out[(name, "-", 0)] = float(rng.uniform())
            continue
        if isinstance(test, PortmanteauTest):
            keys = [(name, "L", int(L)) for L in test.lags]
            try:
                res = portmanteau_many(u_hat, test.p, test.lags)
                out.update({k: o.pvalue for k, o in zip(keys, res)})
            except (CointsubError, TypeError, np.linalg.LinAlgError):
                out.update({k: None for k in keys})
            continue
        keys = [(name, "b", int(b)) for b in blocks]
        if u_hat is None:
            out.update({k: None for k in keys})
            continue
        if test.residuals == "nonparametric":
            if u_np is None:
                u_np = nonparametric_residuals(x, y, h)
            u_sub = u_np
        elif test.residuals == "parametric":
            u_sub = u_hat
        else:
            raise UsageError(f"unknown residual source {test.residuals!r}")
        if isinstance(test, SNUTest):
            z = snu_statistic(u_hat, x, h)
            for k, b in zip(keys, blocks):
                if z.degenerate:
                    out[k] = None
                    continue
                m = None if cfg.M is None else min(cfg.M, n - b + 1)
                try:
                    out[k] = pvalue_snu(z.z, subsample_snu(x, u_sub, b, m, cfg.h_rule))
                except CointsubError:
                    out[k] = None
        elif isinstance(test, MHMDebiasedTest):
            try:
                stat = mhm_normalize(mhm_statistic(u_hat, x, h, cfg.window, method="exact"),
                                     n, h, proc.kind, proc.d, proc.tempering)
                rep_ = debias_mhm(x, u_sub, proc.kind, proc.d, proc.tempering,
                                  h_rule=cfg.h_rule, window=cfg.window, blocks=blocks,
                                  statistic=stat, M=cfg.M)
                out.update({k: rep_.pvalues[b] for k, b in zip(keys, blocks)})
            except CointsubError:
                out.update({k: None for k in keys})
        else:
            raise UsageError(f"unknown test {test!r}")
    return out


def run_replication(cfg: ExperimentConfig, rep: int) -> dict:
    x, y, _ = simulate_replication(cfg, rep)
    return _run_tests(cfg, x, y, rep)


def _run_chunk(args):
    cfg, reps = args
    return [run_replication(cfg, r) for r in reps]


def collect_pvalues(cfg: ExperimentConfig, workers: int = 1) -> list:
    """Per-replication p-value dicts in replication order."""
    reps = list(range(cfg.reps))
    if workers <= 1:
        return [run_replication(cfg, r) for r in reps]
    chunks = [reps[i::workers] for i in range(workers)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(_run_chunk, [(cfg, c) for c in chunks]))
    results = [None] * cfg.reps
    for chunk, part in zip(chunks, parts):
        for r, res in zip(chunk, part):
            results[r] = res
    return results


def aggregate(cfg: ExperimentConfig, results: Sequence[dict]) -> RejectionTable:
    proc = cfg.process
    keys = list(results[0].keys()) if results else []
    rows = []
    for key in keys:
        name, setting, value = key
        ps = [res.get(key) for res in results]
        good = np.array([p for p in ps if p is not None], dtype=float)
        failed = len(ps) - good.size
        frac = failed / len(ps)
        if frac > MAX_FAIL_FRACTION:
            raise CellError(f"{name} {setting}={value}: {failed}/{len(ps)} replications failed")
        if frac > WARN_FAIL_FRACTION:
            warnings.warn(f"{name} {setting}={value}: excluded {failed}/{len(ps)} failed replications")
        rejections = int(np.count_nonzero(good <= cfg.alpha))
        rows.append(RejectionRow(
            label=cfg.label, test=name, setting=setting, value=value,
            memory=proc.kind, d=proc.d, lam=proc.tempering, r=proc.r, n=proc.n,
            gen_model=cfg.gen_model, reps=len(ps), failed=failed,
            rejections=rejections, rate=rejections / good.size if good.size else float("nan"),
        ))
    return RejectionTable(rows)


def run_cell(cfg: ExperimentConfig, workers: int = 1) -> RejectionTable:
    return aggregate(cfg, collect_pvalues(cfg, workers))


def run_suite(cfgs: Sequence[ExperimentConfig], workers: int = 1) -> RejectionTable:
    table = RejectionTable()
    for cfg in cfgs:
        table = table + run_cell(cfg, workers)
    return table


def statistic_samples(cfg: ExperimentConfig) -> dict:
    """Raw full-sample ``Z_N`` and ``tau_N^{-1} T_N`` across replications.

    Both are computed from parametric residuals of the hypothesised family,
    for external density plots.
    """
    proc = cfg.process
    z = np.full(cfg.reps, np.nan)
    mhm = np.full(cfg.reps, np.nan)
    for rep in range(cfg.reps):
        x, y, _ = simulate_replication(cfg, rep)
        n = x.size
        h = cfg.h_rule(n)
        u_hat = residuals(fit(cfg.hypothesis, x, y), x, y)
        z[rep] = snu_statistic(u_hat, x, h).z
        t = mhm_statistic(u_hat, x, h, cfg.window, method="exact")
        mhm[rep] = mhm_normalize(t, n, h, proc.kind, proc.d, proc.tempering)
    return {"snu": z, "mhm": mhm}


def desk_preset(reps: int = 500, n: int = 500, base_seed: int = 20240101,
                tests: Optional[tuple] = None) -> list:
    """Null linear cells over ``d in {0.1, 0.4}``, ``r in {0.5, 1}`` and
    LM / SLM with ``lambda = N^{-1/3}`` and ``N^{-1/6}``."""
    if tests is None:
        tests = (SNUTest("parametric"), SNUTest("nonparametric"), PortmanteauTest())
    cells = []
    for r in (0.5, 1.0):
        for d in (0.1, 0.4):
            for kind, lam, tag in (("LM", 0.0, "LM"),
                                   ("SLM", n ** (-1.0 / 3.0), "SLM(N^-1/3)"),
                                   ("SLM", n ** (-1.0 / 6.0), "SLM(N^-1/6)")):
                proc = ProcessConfig(kind=kind, d=d, lam=lam, r=r, n=n)
                cells.append(ExperimentConfig(
                    process=proc, tests=tests, reps=reps, base_seed=base_seed,
                    label=f"size {tag} d={d} r={r}",
                ))
    return cells


def config_to_dict(cfg: ExperimentConfig) -> dict:
    d = asdict(cfg)
    d["tests"] = [{"type": type(t).__name__, **asdict(t)} for t in cfg.tests]
    d["process"]["error_spec"] = {"type": type(cfg.process.error_spec).__name__,
                                  **asdict(cfg.process.error_spec)}
    d["h_rule"] = str(cfg.h_rule)
    d["blocks"] = cfg.block_list
    return d
