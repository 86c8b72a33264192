"""Datasets, configuration files and run manifests.

CSV files are UTF-8 with a header row and LF line endings; floats are
written with 17 significant digits so a write/read cycle is lossless.
Configuration files are INI-style (``configparser``) and every key is checked
against a schema so errors name the offending ``section.key``.
"""

from __future__ import annotations

import configparser
import csv
import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ConfigError, CointsubError, DataError
from .kernel import BandwidthRule
from .montecarlo import (
    ExperimentConfig,
    MHMDebiasedTest,
    PortmanteauTest,
    SNUTest,
    UniformStubTest,
    desk_preset,
)
from .processes import AR1, MA1, COEFF_SCHEMES, ProcessConfig, SeriesPair
from .teststats import WeightWindow

FLOAT_FMT = "{:.17g}"


def fmt_float(v) -> str:
    return FLOAT_FMT.format(float(v))


# ---------------------------------------------------------------- datasets

@dataclass
class Dataset:
    """Aligned ``(index, x, y)`` rows, optionally with a true-error column."""

    index: np.ndarray
    x: np.ndarray
    y: np.ndarray
    u: Optional[np.ndarray] = None
    source: str = ""

    @property
    def n(self) -> int:
        return self.x.size

    def pair(self) -> SeriesPair:
        return SeriesPair(self.x, self.y, self.u)


def _parse_float(text, where):
    if not str(text).strip():
        raise DataError(f"{where}: missing value")
    try:
        v = float(text)
    except (TypeError, ValueError):
        raise DataError(f"{where}: not a number: {text!r}") from None
    if not math.isfinite(v):
        raise DataError(f"{where}: missing or non-finite value {text!r}")
    return v


def read_dataset(path, x_col: str = "x", y_col: str = "y", index_col: Optional[str] = None,
                 log_x: bool = False, log_y: bool = False, min_n: int = 2) -> Dataset:
    """Read a headed CSV.

    The index column defaults to the first column. It must be strictly
    increasing. ``log_x``/``log_y`` take natural logs after reading.
    """
    path = Path(path)
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from exc
    rows = [r for r in rows if any(c.strip() for c in r)]
    if not rows:
        raise DataError(f"{path}: empty file")
    header = [c.strip() for c in rows[0]]
    lower = [c.lower() for c in header]
    if all(_is_number(c) for c in header):
        raise DataError(f"{path}: header row required")
    index_col = header[0] if index_col is None else index_col

    def col(name, required=True):
        try:
            return lower.index(name.lower())
        except ValueError:
            if required:
                raise DataError(f"{path}: no column named {name!r} (have {header})") from None
            return None

    ii, xi, yi = col(index_col), col(x_col), col(y_col)
    ui = col("u", required=False)
    idx, xs, ys, us = [], [], [], []
    for line, r in enumerate(rows[1:], start=2):
        if len(r) != len(header):
            raise DataError(f"{path}:{line}: expected {len(header)} fields, got {len(r)}")
        idx.append(_parse_float(r[ii], f"{path}:{line}:{header[ii]}"))
        xs.append(_parse_float(r[xi], f"{path}:{line}:{header[xi]}"))
        ys.append(_parse_float(r[yi], f"{path}:{line}:{header[yi]}"))
        if ui is not None:
            us.append(_parse_float(r[ui], f"{path}:{line}:u"))
    index = np.asarray(idx)
    if index.size and np.any(np.diff(index) <= 0):
        raise DataError(f"{path}: index column {header[ii]!r} must be strictly increasing")
    if index.size < min_n:
        raise DataError(f"{path}: need at least {min_n} rows, got {index.size}")
    x, y = np.asarray(xs), np.asarray(ys)
    for flag, arr, name in ((log_x, x, "x"), (log_y, y, "y")):
        if flag and np.any(arr <= 0):
            raise DataError(f"{path}: log of non-positive {name}")
    if log_x:
        x = np.log(x)
    if log_y:
        y = np.log(y)
    return Dataset(index, x, y, np.asarray(us) if ui is not None else None, str(path))


def _is_number(text):
    try:
        float(text)
        return True
    except ValueError:
        return False


def write_csv(path, header, columns) -> None:
    """Write equal-length columns; floats with 17 significant digits."""
    columns = [np.asarray(c) for c in columns]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in zip(*columns):
            w.writerow([_cell(v) for v in row])


def _cell(v):
    if isinstance(v, (np.integer, int)) and not isinstance(v, bool):
        return str(int(v))
    return fmt_float(v)


def write_series(path, pair: SeriesPair, index=None, residual=None) -> None:
    """``k, x, y, u`` plus an optional ``y - f(x)`` column."""
    n = pair.n
    index = np.arange(1, n + 1) if index is None else np.asarray(index)
    header = ["k", "x", "y"]
    cols = [index, pair.x, pair.y]
    if pair.u is not None:
        header.append("u")
        cols.append(pair.u)
    if residual is not None:
        header.append("y_minus_f")
        cols.append(residual)
    write_csv(path, header, cols)


def write_jsonl(path, outcomes) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for o in outcomes:
            fh.write(json.dumps(o.to_dict() if hasattr(o, "to_dict") else o, sort_keys=True))
            fh.write("\n")


# ---------------------------------------------------------------- manifest

@dataclass
class RunManifest:
    command: str
    config: dict
    seed: Optional[int]
    version: str
    started: str = ""
    finished: str = ""
    argv: list = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "RunManifest":
        return cls(**json.loads(text))

    def write(self, path) -> Path:
        path = Path(path)
        path.write_text(self.to_json() + "\n", encoding="utf-8")
        return path

    @classmethod
    def read(cls, path) -> "RunManifest":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


def timestamp() -> str:
    return time.strftime("%Y-%m-%dT%H:%M:%S%z")


def manifest_path(out) -> Path:
    out = Path(out)
    return out.with_name(out.name + ".manifest.json")


# ------------------------------------------------------------------ config

def _as_bool(text):
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _int_list(text):
    return tuple(int(t) for t in str(text).replace(" ", "").split(",") if t)


def _str_list(text):
    return tuple(t.strip().lower() for t in str(text).split(",") if t.strip())


def _opt_int(text):
    t = str(text).strip().lower()
    return None if t in ("", "none", "all") else int(t)


PROCESS_KEYS: dict = {
    "memory": str, "d": float, "lambda": float, "r": float, "errors": str,
    "psi": float, "mu": float, "theta": float, "sigma": float, "n": int,
    "trunc": int, "seed": int, "coeffs": str,
}
MODEL_KEYS: dict = {"gen_model": str, "theta0": float, "theta1": float, "nu": float, "h": float}
CELL_KEYS: dict = {
    **PROCESS_KEYS, **MODEL_KEYS,
    "hypothesis": str, "tests": _str_list, "p": int, "lags": _int_list,
    "blocks": _int_list, "reps": int, "alpha": float, "base_seed": int,
    "bandwidth_rule": BandwidthRule.parse, "m": _opt_int, "window": WeightWindow.parse,
    "label": str,
}
SUITE_KEYS: dict = {**CELL_KEYS, "preset": str, "full": _as_bool}

TEST_NAMES = ("snu-parametric", "snu-nonparametric", "mhm-debiased", "portmanteau", "uniform-stub")


def _convert(section: str, key: str, raw, schema: dict):
    if key not in schema:
        raise ConfigError(f"unknown key (allowed: {', '.join(sorted(schema))})", f"{section}.{key}")
    try:
        return schema[key](raw)
    except (ValueError, TypeError, CointsubError) as exc:
        raise ConfigError(f"invalid value {raw!r}: {exc}", f"{section}.{key}") from None


def read_config(path) -> configparser.ConfigParser:
    cp = configparser.ConfigParser(interpolation=None)
    try:
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", str(path)) from exc
    except configparser.Error as exc:
        raise ConfigError(str(exc).splitlines()[0], str(path)) from exc
    return cp


def parse_section(cp, section: str, schema: dict) -> dict:
    if not cp.has_section(section):
        return {}
    return {k: _convert(section, k, v, schema) for k, v in cp.items(section)}


def process_from_values(vals: dict, where: str = "process") -> ProcessConfig:
    """Build a ProcessConfig; validation failures name the field."""
    err = str(vals.get("errors", "ar1")).lower()
    if err == "ar1":
        spec = AR1(vals.get("psi", 0.25))
    elif err == "ma1":
        spec = MA1(vals.get("mu", 0.0), vals.get("theta", 0.8))
    else:
        raise ConfigError(f"must be ar1 or ma1, got {err!r}", f"{where}.errors")
    coeffs = str(vals.get("coeffs", "power")).lower()
    if coeffs not in COEFF_SCHEMES:
        raise ConfigError(f"must be one of {COEFF_SCHEMES}", f"{where}.coeffs")
    kind = str(vals.get("memory", "lm")).upper()
    if kind not in ("LM", "SLM"):
        raise ConfigError(f"must be lm or slm, got {kind.lower()!r}", f"{where}.memory")
    kw = dict(kind=kind, d=vals.get("d", 0.1), lam=vals.get("lambda", 0.0),
              r=vals.get("r", 0.5), error_spec=spec, sigma=vals.get("sigma", 0.2),
              n=vals.get("n", 500), trunc=vals.get("trunc", 1000), seed=vals.get("seed", 0),
              coeffs=coeffs)
    checks = (
        ("d", kw["d"] > 0 and (kind == "SLM" or kw["d"] < 0.5),
         "needs 0 < d < 1/2 under LM and d > 0 under SLM"),
        ("lambda", kw["lam"] > 0 or kind == "LM", "must be positive under SLM"),
        ("r", abs(kw["r"]) <= 1, "must lie in [-1, 1]"),
        ("sigma", kw["sigma"] > 0, "must be positive"),
        ("n", kw["n"] >= 1, "must be >= 1"),
        ("trunc", kw["trunc"] >= 1, "must be >= 1"),
        ("psi", not isinstance(spec, AR1) or abs(spec.psi) < 1, "needs |psi| < 1"),
    )
    for key, ok, msg in checks:
        if not ok:
            raise ConfigError(msg, f"{where}.{key}")
    try:
        return ProcessConfig(**kw)
    except CointsubError as exc:
        raise ConfigError(str(exc), where) from None


def model_params(vals: dict) -> dict:
    return {k: vals[k] for k in ("theta0", "theta1", "nu", "h") if k in vals}


def tests_from_values(vals: dict, where: str) -> tuple:
    names = vals.get("tests", ("snu-parametric",))
    out = []
    for name in names:
        if name == "snu-parametric":
            out.append(SNUTest("parametric"))
        elif name == "snu-nonparametric":
            out.append(SNUTest("nonparametric"))
        elif name == "mhm-debiased":
            out.append(MHMDebiasedTest())
        elif name == "portmanteau":
            out.append(PortmanteauTest(vals.get("p", 1), vals.get("lags", (6, 12, 18))))
        elif name == "uniform-stub":
            out.append(UniformStubTest())
        else:
            raise ConfigError(f"unknown test {name!r} (allowed: {', '.join(TEST_NAMES)})",
                              f"{where}.tests")
    return tuple(out)


def experiment_from_values(vals: dict, where: str) -> ExperimentConfig:
    proc = process_from_values(vals, where)
    try:
        return ExperimentConfig(
            process=proc,
            gen_model=str(vals.get("gen_model", "NULL_LINEAR")).upper(),
            gen_params=model_params(vals),
            hypothesis=vals.get("hypothesis", "linear"),
            tests=tests_from_values(vals, where),
            blocks=vals.get("blocks"),
            reps=vals.get("reps", 500),
            alpha=vals.get("alpha", 0.05),
            base_seed=vals.get("base_seed", 12345),
            h_rule=vals.get("bandwidth_rule", BandwidthRule()),
            M=vals.get("m"),
            window=vals.get("window", WeightWindow()),
            label=vals.get("label", where),
        )
    except ConfigError:
        raise
    except CointsubError as exc:
        raise ConfigError(str(exc), where) from None


def suite_from_config(cp) -> list:
    """Cells from ``[cell:<name>]`` sections, each inheriting ``[suite]``.

    ``preset = desk`` in ``[suite]`` prepends the desk-scale preset cells.
    """
    defaults = parse_section(cp, "suite", SUITE_KEYS)
    for s in cp.sections():
        if s != "suite" and not s.startswith("cell:"):
            raise ConfigError("unknown section (use [suite] or [cell:<name>])", s)
    cells = []
    preset = str(defaults.pop("preset", "")).lower()
    full = defaults.pop("full", False)
    if preset:
        if preset != "desk":
            raise ConfigError(f"unknown preset {preset!r}", "suite.preset")
        reps = defaults.get("reps", 2000 if full else 500)
        cells.extend(desk_preset(reps=reps, n=defaults.get("n", 500),
                                 base_seed=defaults.get("base_seed", 20240101)))
    for s in cp.sections():
        if s.startswith("cell:"):
            vals = dict(defaults)
            vals.update(parse_section(cp, s, CELL_KEYS))
            vals.setdefault("label", s[5:])
            cells.append(experiment_from_values(vals, s))
    return cells


def simulate_from_config(cp) -> tuple:
    """``(ProcessConfig, gen_model, params)`` from ``[process]`` and ``[model]``."""
    for s in cp.sections():
        if s not in ("process", "model"):
            raise ConfigError("unknown section (use [process] and [model])", s)
    proc_vals = parse_section(cp, "process", PROCESS_KEYS)
    model_vals = parse_section(cp, "model", MODEL_KEYS)
    return proc_vals, str(model_vals.get("gen_model", "NULL_LINEAR")).upper(), model_params(model_vals)

