"""Configuration-driven Monte Carlo runner.

A scenario is a TOML file with the tables ``[scenario]``, ``[propagation]``,
``[rectifier]``, ``[algorithm]`` and ``[sweep]`` (plus optional
``[[reference]]`` and ``[[ratio]]`` arrays). Every combination of the sweep
axes is a *point*; every point is run for ``trials`` channel realizations
and every listed algorithm. Channels depend only on ``(seed, trial, M, N,
K, distance)``, so all algorithms and budgets at a point see the same
realizations and comparisons are paired.

Outputs (see ``README.md`` for the column reference):

``results.csv``
    One row per (point, trial, algorithm, candidate count), floats with 17
    significant digits, preceded by a ``# mswpt-results <version>`` line.
    The bytes depend only on the configuration, never on the worker count.
``summary.json``
    Per point and algorithm: means with 95% bootstrap intervals, the 10th,
    50th and 90th percentiles of the minimum voltage, reference numbers and
    requested ratios.
``timing.csv``, ``timing.json``
    Wall-clock seconds per algorithm call and their means per point (not
    reproducible by nature, hence kept apart from the other two files).
"""

from __future__ import annotations

import copy
import csv
import io
import itertools
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
from scipy import stats

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .algorithms import (
    AlgorithmConfig,
    Budget,
    PrecoderResult,
    baseline_ass,
    baseline_mu_up,
    baseline_up_mrt,
    che_max_min_randomized,
    che_max_min_rr,
    che_wsum,
    fairness_weights,
    max_min_rand_sweep,
    max_min_rr,
    su_wpt,
    tdma_compose,
    wsum,
    wsum_s,
)
from .channel import PropagationConfig, gen_realization, load_pdp
from .rectenna import RectifierParams, beta_coefficients

SCHEMA_VERSION = 1
WORKERS_ENV = "MSWPT_WORKERS"

COLUMNS = [
    "point",
    "trial",
    "algorithm",
    "M",
    "N",
    "K",
    "distance_m",
    "budget_kind",
    "budget_w",
    "power_w",
    "t_rand",
    "weights",
    "seed",
    "status",
    "iterations",
    "vout_min",
    "vout_sum",
    "vout_wsum",
    "vout_asym_min",
    "vout",
]

METRICS = ("vout_min", "vout_sum", "vout_wsum", "efficiency", "iterations")


class ConfigError(ValueError):
    """Invalid scenario; ``errors`` lists every problem found."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("invalid configuration:\n" + "\n".join(f"  - {e}" for e in self.errors))


# --------------------------------------------------------------------------- algorithms


@dataclass(frozen=True)
class AlgorithmSpec:
    max_k: int | None = None
    uses_weights: bool = False
    uses_t_rand: bool = False
    single_user: bool = False


ALGORITHMS = {
    "su_wpt": AlgorithmSpec(single_user=True),
    "ass": AlgorithmSpec(),
    "up_mrt": AlgorithmSpec(),
    "mu_up": AlgorithmSpec(),
    "wsum": AlgorithmSpec(uses_weights=True),
    "fa_wsum": AlgorithmSpec(),
    "wsum_s": AlgorithmSpec(uses_weights=True),
    "tdma_wsum": AlgorithmSpec(uses_weights=True),
    "tdma_che_wsum": AlgorithmSpec(uses_weights=True),
    "max_min_rr": AlgorithmSpec(max_k=3),
    "max_min_rand": AlgorithmSpec(uses_t_rand=True),
    "che_wsum": AlgorithmSpec(uses_weights=True),
    "che_max_min_rr": AlgorithmSpec(),
    "che_max_min_rand": AlgorithmSpec(),
}


def _tdma(ch, beta, cfg, weights, designer):
    shares = np.asarray(weights, dtype=float) / np.sum(weights)
    singles = []
    for q in range(ch.k):
        sub = ch.subset([q])
        singles.append(designer(sub).vout[0])
    v = tdma_compose(singles, shares)
    return PrecoderResult(s=None, vout=v, extra={"shares": shares})


def run_algorithm(name: str, ch, beta, cfg: AlgorithmConfig, weights=None, t_values=(None,)) -> list:
    """Run one named algorithm; returns one result per candidate count."""
    power = cfg.budget.total_power(ch.m)
    w = np.ones(ch.k) if weights is None else np.asarray(weights, dtype=float)
    lam = ch.path_gain
    if name == "su_wpt":
        out = su_wpt(ch, beta, cfg)
    elif name == "ass":
        out = baseline_ass(ch, power, beta)
    elif name == "up_mrt":
        out = baseline_up_mrt(ch, power, beta)
    elif name == "mu_up":
        out = baseline_mu_up(ch, power, beta)
    elif name == "wsum":
        out = wsum(ch, w, beta, cfg)
    elif name == "fa_wsum":
        fw = fairness_weights(ch, power, beta)
        out = wsum(ch, fw, beta, cfg)
    elif name == "wsum_s":
        out = wsum_s(ch, w, beta, cfg)
    elif name == "tdma_wsum":
        out = _tdma(ch, beta, cfg, w, lambda sub: wsum(sub, [1.0], beta, cfg))
    elif name == "tdma_che_wsum":
        out = _tdma(ch, beta, cfg, w, lambda sub: che_wsum(sub.path_gain, [1.0], beta, cfg, channels=sub))
    elif name == "max_min_rr":
        out = max_min_rr(ch, beta, cfg)
    elif name == "max_min_rand":
        ts = [cfg.t_rand if t is None else t for t in t_values]
        return max_min_rand_sweep(ch, beta, cfg, ts)
    elif name == "che_wsum":
        out = che_wsum(lam, w, beta, cfg, channels=ch)
    elif name == "che_max_min_rr":
        out = che_max_min_rr(lam, beta, cfg, channels=ch)
    elif name == "che_max_min_rand":
        out = che_max_min_randomized(lam, beta, cfg, channels=ch)
    else:
        raise KeyError(f"unknown algorithm {name!r}")
    return [out]


# --------------------------------------------------------------------------- configuration


_TABLE_KEYS = {
    "scenario": {"name", "description", "trials", "seed", "output"},
    "propagation": {"f_c", "bandwidth", "pdp", "normalize_pdp", "tx_gain_db", "rx_gain_db"},
    "rectifier": {"r_ant", "n_i", "v_t", "i_s"},
    "algorithm": {"epsilon", "max_iter", "init", "stop_rule", "t_rand", "sdp_tol"},
    "sweep": {"algorithms", "M", "N", "K", "distance_m", "power_w", "eirp_dbm", "t_rand", "weights"},
}
_ARRAYS = {"reference", "ratio"}


@dataclass
class ScenarioConfig:
    """Parsed and validated scenario."""

    name: str
    trials: int
    seed: int
    algorithms: list
    m: list
    n: list
    k: list
    distance_m: list
    budgets: list
    t_rand: list = field(default_factory=lambda: [None])
    weights: list = field(default_factory=lambda: [None])
    description: str = ""
    output: str | None = None
    propagation: dict = field(default_factory=dict)
    rectifier: dict = field(default_factory=dict)
    algorithm: dict = field(default_factory=dict)
    reference: list = field(default_factory=list)
    ratio: list = field(default_factory=list)
    raw: dict = field(default_factory=dict, repr=False)

    def with_overrides(self, trials=None, seed=None) -> "ScenarioConfig":
        raw = copy.deepcopy(self.raw)
        if trials is not None:
            raw.setdefault("scenario", {})["trials"] = trials
        if seed is not None:
            raw.setdefault("scenario", {})["seed"] = seed
        return parse_config(raw)


def _int_list(value, key, errors, minimum=1):
    if not isinstance(value, list):
        value = [value]
    if not value:
        errors.append(f"sweep.{key} must not be empty")
        return []
    out = []
    for v in value:
        if isinstance(v, bool) or not isinstance(v, int) or v < minimum:
            errors.append(f"sweep.{key} entries must be integers >= {minimum}, got {v!r}")
        else:
            out.append(v)
    return out


def _float_list(value, key, errors, positive=True):
    if not isinstance(value, list):
        value = [value]
    if not value:
        errors.append(f"sweep.{key} must not be empty")
        return []
    out = []
    for v in value:
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not np.isfinite(v) or (positive and v <= 0):
            errors.append(f"sweep.{key} entries must be {'positive ' if positive else ''}numbers, got {v!r}")
        else:
            out.append(float(v))
    return out


def parse_config(raw: dict) -> ScenarioConfig:
    """Validate a scenario dictionary; raise :class:`ConfigError` listing all problems."""
    errors = []
    if not isinstance(raw, dict):
        raise ConfigError(["configuration must be a table"])
    for key in raw:
        if key not in _TABLE_KEYS and key not in _ARRAYS:
            errors.append(f"unknown table [{key}]")
    for table, allowed in _TABLE_KEYS.items():
        sub = raw.get(table, {})
        if not isinstance(sub, dict):
            errors.append(f"[{table}] must be a table")
            continue
        for key in sub:
            if key not in allowed:
                errors.append(f"unknown key {table}.{key}")
    scen = raw.get("scenario", {}) if isinstance(raw.get("scenario", {}), dict) else {}
    sweep = raw.get("sweep", {}) if isinstance(raw.get("sweep", {}), dict) else {}

    trials = scen.get("trials", 1)
    if isinstance(trials, bool) or not isinstance(trials, int) or trials < 1:
        errors.append(f"scenario.trials must be an integer >= 1, got {trials!r}")
    seed = scen.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**63:
        errors.append(f"scenario.seed must be a nonnegative integer, got {seed!r}")

    algos = sweep.get("algorithms")
    if not isinstance(algos, list) or not algos:
        errors.append("sweep.algorithms must be a non-empty list")
        algos = []
    for a in algos:
        if a not in ALGORITHMS:
            errors.append(f"unknown algorithm {a!r}; choose from {', '.join(sorted(ALGORITHMS))}")
    if len(set(map(str, algos))) != len(algos):
        errors.append("sweep.algorithms contains duplicates")

    ms = _int_list(sweep.get("M", [1]), "M", errors)
    ns = _int_list(sweep.get("N", [1]), "N", errors)
    ks = _int_list(sweep.get("K", [1]), "K", errors)
    ds = _float_list(sweep.get("distance_m", [10.0]), "distance_m", errors)

    if "power_w" in sweep and "eirp_dbm" in sweep:
        errors.append("give either sweep.power_w or sweep.eirp_dbm, not both")
        budgets = []
    elif "eirp_dbm" in sweep:
        budgets = [("eirp", v) for v in _float_list(sweep["eirp_dbm"], "eirp_dbm", errors, positive=False)]
    else:
        budgets = [("power", v) for v in _float_list(sweep.get("power_w", [1.0]), "power_w", errors)]

    t_rand = [None]
    if "t_rand" in sweep:
        t_rand = _int_list(sweep["t_rand"], "t_rand", errors)
        if not any(ALGORITHMS.get(a, AlgorithmSpec()).uses_t_rand for a in algos):
            errors.append("sweep.t_rand is only meaningful with max_min_rand")

    weights = [None]
    if "weights" in sweep:
        weights = sweep["weights"]
        if not isinstance(weights, list) or not weights:
            errors.append("sweep.weights must be a non-empty list of weight vectors")
            weights = [None]
        else:
            for w in weights:
                if (
                    not isinstance(w, list)
                    or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in w)
                    or any(x < 0 for x in w)
                    or not any(x > 0 for x in w)
                ):
                    errors.append(f"weight vector {w!r} must be nonnegative numbers, not all zero")
                elif any(len(w) != k for k in ks):
                    errors.append(f"weight vector {w!r} does not match every K in {ks}")
            weights = [list(map(float, w)) if isinstance(w, list) else None for w in weights]

    for a in algos:
        spec = ALGORITHMS.get(a)
        if spec is None:
            continue
        if spec.max_k is not None and any(k > spec.max_k for k in ks):
            errors.append(f"{a} supports K <= {spec.max_k}, but the sweep includes K = {max(ks)}")
        if spec.single_user and any(k != 1 for k in ks):
            errors.append(f"{a} needs K = 1")

    alg = raw.get("algorithm", {}) if isinstance(raw.get("algorithm", {}), dict) else {}
    try:
        _algorithm_config(alg, Budget(), 0)
    except (ValueError, TypeError) as exc:
        errors.append(f"[algorithm]: {exc}")
    prop = raw.get("propagation", {}) if isinstance(raw.get("propagation", {}), dict) else {}
    try:
        for n in ns or [1]:
            _propagation(prop, 1, n, 1, 10.0, 0)
    except (ValueError, TypeError, OSError) as exc:
        errors.append(f"[propagation]: {exc}")
    rect = raw.get("rectifier", {}) if isinstance(raw.get("rectifier", {}), dict) else {}
    try:
        params = RectifierParams(**rect)
        if min(params.r_ant, params.n_i, params.v_t) <= 0:
            raise ValueError("rectifier parameters must be positive")
    except (ValueError, TypeError) as exc:
        errors.append(f"[rectifier]: {exc}")

    refs = raw.get("reference", [])
    ratios = raw.get("ratio", [])
    if not isinstance(refs, list) or not all(isinstance(r, dict) and "value" in r for r in refs):
        errors.append("[[reference]] entries must be tables with a value")
        refs = []
    if not isinstance(ratios, list):
        errors.append("[[ratio]] must be an array of tables")
        ratios = []
    for r in ratios:
        if not isinstance(r, dict) or r.get("numerator") not in algos or r.get("denominator") not in algos:
            errors.append(f"ratio {r!r} must name two algorithms of the sweep")
        elif r.get("metric", "vout_min") not in METRICS:
            errors.append(f"ratio metric {r.get('metric')!r} unknown")

    if errors:
        raise ConfigError(errors)
    return ScenarioConfig(
        name=str(scen.get("name", "scenario")),
        description=str(scen.get("description", "")),
        trials=trials,
        seed=seed,
        output=scen.get("output"),
        algorithms=list(algos),
        m=ms,
        n=ns,
        k=ks,
        distance_m=ds,
        budgets=budgets,
        t_rand=t_rand,
        weights=weights,
        propagation=dict(prop),
        rectifier=dict(rect),
        algorithm=dict(alg),
        reference=list(refs),
        ratio=list(ratios),
        raw=copy.deepcopy(raw),
    )


def load_config(path) -> ScenarioConfig:
    """Read and validate a TOML scenario file."""
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError([f"{path}: {exc}"]) from None
    return parse_config(raw)


def _algorithm_config(alg: dict, budget: Budget, seed: int) -> AlgorithmConfig:
    return AlgorithmConfig(
        epsilon=float(alg.get("epsilon", 1e-3)),
        max_iter=int(alg.get("max_iter", 200)),
        init=alg.get("init", "up_mrt"),
        stop_rule=alg.get("stop_rule", "frobenius"),
        t_rand=int(alg.get("t_rand", 50)),
        sdp_tol=float(alg.get("sdp_tol", 1e-10)),
        budget=budget,
        seed=seed,
    )


def _propagation(prop: dict, m, n, k, d, seed) -> PropagationConfig:
    cfg = PropagationConfig(
        n_tones=n,
        n_antennas=m,
        n_users=k,
        f_c=float(prop.get("f_c", 2.4e9)),
        bandwidth=float(prop.get("bandwidth", 10e6)),
        distance_m=(d,),
        tx_gain_db=float(prop.get("tx_gain_db", 0.0)),
        rx_gain_db=float(prop.get("rx_gain_db", 0.0)),
        pdp_id=str(prop.get("pdp", "tgn_e")),
        normalize_pdp=bool(prop.get("normalize_pdp", False)),
        seed=seed,
    )
    load_pdp(cfg.pdp_id)
    return cfg


# --------------------------------------------------------------------------- presets


def preset_names() -> list:
    root = resources.files("mswpt") / "data" / "presets"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".toml"))


def load_preset(name: str) -> ScenarioConfig:
    names = preset_names()
    if name not in names:
        raise KeyError(f"unknown preset {name!r}; available: {', '.join(names)}")
    text = (resources.files("mswpt") / "data" / "presets" / f"{name}.toml").read_text()
    return parse_config(tomllib.loads(text))


# --------------------------------------------------------------------------- execution


@dataclass(frozen=True)
class SweepPoint:
    index: int
    m: int
    n: int
    k: int
    distance_m: float
    budget_kind: str
    budget_value: float
    weights: tuple | None

    @property
    def budget(self) -> Budget:
        if self.budget_kind == "eirp":
            return Budget.eirp_dbm(self.budget_value)
        return Budget.power(self.budget_value)


def expand_points(cfg: ScenarioConfig) -> list:
    """Cartesian product of the sweep axes in a fixed order."""
    pts = []
    for i, (m, n, k, d, (kind, val), w) in enumerate(
        itertools.product(cfg.m, cfg.n, cfg.k, cfg.distance_m, cfg.budgets, cfg.weights)
    ):
        pts.append(SweepPoint(i, m, n, k, d, kind, val, None if w is None else tuple(w)))
    return pts


def _trial_seed(seed: int, trial: int) -> int:
    return int(np.random.SeedSequence(seed, spawn_key=(trial, 0xA1)).generate_state(1, dtype=np.uint64)[0] >> 1)


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    return format(float(x), ".17g")


def run_task(cfg: ScenarioConfig, point: SweepPoint, trial: int):
    """All algorithm rows of one (point, trial) pair plus their timings."""
    beta = beta_coefficients(RectifierParams(**cfg.rectifier))
    prop = _propagation(cfg.propagation, point.m, point.n, point.k, point.distance_m, cfg.seed)
    ch = gen_realization(prop, trial)
    acfg = _algorithm_config(cfg.algorithm, point.budget, _trial_seed(cfg.seed, trial))
    power = point.budget.total_power(point.m)
    rows, timings = [], []
    for name in cfg.algorithms:
        spec = ALGORITHMS[name]
        ts = cfg.t_rand if spec.uses_t_rand else [None]
        w = np.ones(point.k) if point.weights is None else np.array(point.weights)
        start = time.perf_counter()
        results = run_algorithm(name, ch, beta, acfg, w, ts)
        elapsed = time.perf_counter() - start
        for t, res in zip(ts, results):
            v = np.asarray(res.vout, dtype=float)
            va = res.vout_asymptotic
            rows.append(
                {
                    "point": point.index,
                    "trial": trial,
                    "algorithm": name,
                    "M": point.m,
                    "N": point.n,
                    "K": point.k,
                    "distance_m": point.distance_m,
                    "budget_kind": point.budget_kind,
                    "budget_w": point.budget.watts,
                    "power_w": power,
                    "t_rand": t if t is not None else (acfg.t_rand if spec.uses_t_rand else None),
                    "weights": ";".join(_fmt(x) for x in w) if spec.uses_weights else "",
                    "seed": cfg.seed,
                    "status": res.status,
                    "iterations": res.trace.iterations if res.trace is not None else 0,
                    "vout_min": float(v.min()),
                    "vout_sum": float(v.sum()),
                    "vout_wsum": float(w @ v) if spec.uses_weights else float(v.sum()),
                    "vout_asym_min": None if va is None else float(np.min(va)),
                    "vout": ";".join(_fmt(x) for x in v),
                }
            )
        timings.append((point.index, trial, name, elapsed))
    return rows, timings


def _run_star(args):
    return run_task(*args)


def worker_count(default: int = 1) -> int:
    raw = os.environ.get(WORKERS_ENV, "")
    if not raw:
        return default
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"{WORKERS_ENV} must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ValueError(f"{WORKERS_ENV} must be a positive integer, got {raw!r}")
    return n


@dataclass
class RunOutput:
    rows: list
    timings: list
    summary: dict
    paths: dict = field(default_factory=dict)


def execute(cfg: ScenarioConfig, workers: int | None = None) -> tuple:
    """Run every (point, trial) task; rows come back in canonical order."""
    workers = worker_count() if workers is None else workers
    tasks = [(cfg, p, t) for p in expand_points(cfg) for t in range(cfg.trials)]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_star, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    else:
        parts = [run_task(*t) for t in tasks]
    rows = [r for part in parts for r in part[0]]
    timings = [t for part in parts for t in part[1]]
    order = {a: i for i, a in enumerate(cfg.algorithms)}
    rows.sort(key=lambda r: (r["point"], r["trial"], order[r["algorithm"]], r["t_rand"] or 0))
    timings.sort(key=lambda r: (r[0], r[1], order[r[2]]))
    return rows, timings


def rows_to_csv(rows: list) -> str:
    buf = io.StringIO()
    buf.write(f"# mswpt-results {SCHEMA_VERSION}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COLUMNS)
    for r in rows:
        writer.writerow([_fmt(r[c]) for c in COLUMNS])
    return buf.getvalue()


def read_results_csv(path) -> list:
    """Parse a results file back into rows of strings."""
    with open(path, newline="") as fh:
        first = fh.readline().strip()
        if not first.startswith("# mswpt-results"):
            raise ValueError(f"{path} is not an mswpt results file")
        return list(csv.DictReader(fh))


def bootstrap_ci(values, seed: int = 0, level: float = 0.95, resamples: int = 2000):
    """Percentile bootstrap interval of the mean; degenerate for fewer than two values."""
    x = np.asarray(values, dtype=float)
    if x.size < 2 or np.ptp(x) == 0:
        m = float(x.mean())
        return m, m
    res = stats.bootstrap(
        (x,), np.mean, confidence_level=level, n_resamples=resamples, method="percentile",
        random_state=np.random.default_rng(seed),
    )
    return float(res.confidence_interval.low), float(res.confidence_interval.high)


def _ratio_ci(num, den, seed, level=0.95, resamples=2000):
    num, den = np.asarray(num, dtype=float), np.asarray(den, dtype=float)
    est = float(num.mean() / den.mean())
    if num.size < 2:
        return est, est, est
    res = stats.bootstrap(
        (num, den), lambda a, b: np.mean(a) / np.mean(b), paired=True, vectorized=False,
        confidence_level=level, n_resamples=resamples, method="percentile",
        random_state=np.random.default_rng(seed),
    )
    return est, float(res.confidence_interval.low), float(res.confidence_interval.high)


def _metric(rows, key):
    if key == "efficiency":
        return np.array([r["vout_min"] / r["power_w"] for r in rows])
    return np.array([float(r[key]) for r in rows])


def _matches(ref: dict, entry: dict) -> bool:
    for key, val in ref.items():
        if key in ("value", "metric", "note", "source"):
            continue
        if key not in entry or entry[key] != val:
            if not (isinstance(val, float) and isinstance(entry.get(key), float) and np.isclose(val, entry[key])):
                return False
    return True


def summarize(cfg: ScenarioConfig, rows: list) -> dict:
    """Means, bootstrap intervals, percentiles, references and ratios per group."""
    groups = {}
    for r in rows:
        key = (r["point"], r["algorithm"], r["t_rand"])
        groups.setdefault(key, []).append(r)
    points = {p.index: p for p in expand_points(cfg)}
    entries = []
    for (pi, alg, t), grp in sorted(groups.items(), key=lambda kv: (kv[0][0], cfg.algorithms.index(kv[0][1]), kv[0][2] or 0)):
        p = points[pi]
        entry = {
            "point": pi,
            "algorithm": alg,
            "M": p.m,
            "N": p.n,
            "K": p.k,
            "distance_m": p.distance_m,
            "budget_kind": p.budget_kind,
            "budget": p.budget_value,
            "power_w": grp[0]["power_w"],
            "t_rand": t,
            "weights": list(p.weights) if p.weights is not None else None,
            "trials": len(grp),
            "statuses": sorted({g["status"] for g in grp}),
        }
        for mi, metric in enumerate(METRICS):
            vals = _metric(grp, metric)
            lo, hi = bootstrap_ci(vals, seed=cfg.seed + 7919 * pi + 31 * mi)
            entry[metric] = {"mean": float(vals.mean()), "ci95": [lo, hi]}
        vmins = _metric(grp, "vout_min")
        entry["vout_min"]["percentiles"] = {
            str(q): float(np.percentile(vmins, q)) for q in (10, 50, 90)
        }
        per_user = np.array([[float(x) for x in g["vout"].split(";")] for g in grp])
        entry["vout_user_mean"] = per_user.mean(axis=0).tolist()
        refs = [
            {"metric": ref.get("metric", "vout_min"), "value": ref["value"], "note": ref.get("note", "")}
            for ref in cfg.reference
            if ref.get("metric", "vout_min") != "seconds" and _matches(ref, entry)
        ]
        if refs:
            entry["reference"] = refs
        entries.append(entry)
    ratios = []
    for ri, spec in enumerate(cfg.ratio):
        metric = spec.get("metric", "vout_min")
        for pi in sorted(points):
            num = sorted((r for r in rows if r["point"] == pi and r["algorithm"] == spec["numerator"]), key=lambda r: r["trial"])
            den = sorted((r for r in rows if r["point"] == pi and r["algorithm"] == spec["denominator"]), key=lambda r: r["trial"])
            if not num or not den:
                continue
            est, lo, hi = _ratio_ci(_metric(num, metric), _metric(den, metric), seed=cfg.seed + 104729 * ri + pi)
            p = points[pi]
            ratios.append(
                {
                    "point": pi,
                    "numerator": spec["numerator"],
                    "denominator": spec["denominator"],
                    "metric": metric,
                    "M": p.m,
                    "N": p.n,
                    "K": p.k,
                    "ratio": est,
                    "ci95": [lo, hi],
                }
            )
    return {
        "schema": SCHEMA_VERSION,
        "scenario": cfg.name,
        "description": cfg.description,
        "trials": cfg.trials,
        "seed": cfg.seed,
        "entries": entries,
        "ratios": ratios,
    }


def summarize_timing(cfg: ScenarioConfig, timings: list) -> dict:
    """Mean wall-clock seconds per point and algorithm, with timing references."""
    groups = {}
    for p, _, a, sec in timings:
        groups.setdefault((p, a), []).append(sec)
    points = {p.index: p for p in expand_points(cfg)}
    entries = []
    for (pi, alg), secs in sorted(groups.items(), key=lambda kv: (kv[0][0], cfg.algorithms.index(kv[0][1]))):
        p = points[pi]
        entry = {"point": pi, "algorithm": alg, "M": p.m, "N": p.n, "K": p.k, "calls": len(secs),
                 "mean_seconds": float(np.mean(secs)), "max_seconds": float(np.max(secs))}
        refs = [
            {"value": r["value"], "note": r.get("note", "")}
            for r in cfg.reference
            if r.get("metric") == "seconds" and _matches(r, entry)
        ]
        if refs:
            entry["reference"] = refs
        entries.append(entry)
    return {"scenario": cfg.name, "entries": entries}


def run(cfg: ScenarioConfig, out_dir=None, workers: int | None = None) -> RunOutput:
    """Run a scenario and, if ``out_dir`` is given, write the three output files."""
    rows, timings = execute(cfg, workers)
    summary = summarize(cfg, rows)
    out = RunOutput(rows, timings, summary)
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        paths = {
            "results": out_dir / "results.csv",
            "summary": out_dir / "summary.json",
            "timing": out_dir / "timing.csv",
            "timing_summary": out_dir / "timing.json",
        }
        paths["results"].write_text(rows_to_csv(rows))
        paths["summary"].write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
        with open(paths["timing"], "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["point", "trial", "algorithm", "seconds"])
            for p, t, a, s in timings:
                writer.writerow([p, t, a, _fmt(s)])
        paths["timing_summary"].write_text(json.dumps(summarize_timing(cfg, timings), indent=2) + "\n")
        out.paths = paths
    return out
