"""Repeated-run experiments: config parsing, execution, summaries and reports."""
import csv
import dataclasses
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .discrete import sample
from .engine import EngineConfig, run
from .networks import NAMES, EnumerationRefused, builtin, enumerate_pf, load

log = logging.getLogger(__name__)

SCHEMA = "bicecm-experiment/1"
CSV_COLUMNS = ("rep", "seed", "pf_hat", "levels", "g_evals", "k_per_level", "converged", "error")
METHODS = ("bice", "mcs")

_ENGINE_KEYS = {
    "N": int, "delta_tar": float, "delta_eps": float, "C": float, "epsilon": float,
    "kmax": int, "k": int, "t_max": int,
}
_MODEL_KEYS = {"builtin", "file", "p0", "thr"}
_TOP_KEYS = {"schema", "model", "method", "engine", "seed", "repetitions", "workers",
             "reference", "output"}


class ConfigError(ValueError):
    """Invalid experiment configuration; ``problems`` lists every violation."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.problems))


@dataclass(frozen=True)
class ModelSource:
    builtin: str | None = None
    file: str | None = None
    p0: float = 1e-3
    thr: float = 0.0

    def load(self):
        if self.file is not None:
            return load(self.file)
        return builtin(self.builtin, self.p0, self.thr)


@dataclass(frozen=True)
class ExperimentSpec:
    model: ModelSource
    engine: EngineConfig
    method: str = "bice"
    repetitions: int = 1
    workers: int = 1
    reference: str | float | None = None  # "enumerate", a literal value, or None
    output: str | None = None

    @property
    def seed(self) -> int:
        return self.engine.seed


@dataclass(frozen=True)
class RepRecord:
    rep: int
    seed: int
    pf_hat: float | None
    levels: int
    g_evals: int
    k_per_level: tuple = ()
    converged: bool = False
    error: str = ""


@dataclass(frozen=True)
class Summary:
    mean: float | None
    cov: float | None
    cost: float | None
    mse: float | None
    rel_eff: float | None
    reference_pf: float | None
    self_referenced: bool
    failures: int
    records: tuple = field(repr=False)

    def to_json_dict(self) -> dict:
        return {
            "mean": self.mean,
            "cov": self.cov,
            "cost": self.cost,
            "mse": self.mse,
            "relEff": self.rel_eff,
            "reference_pf": self.reference_pf,
            "self_referenced": self.self_referenced,
            "failures": self.failures,
            "repetitions": len(self.records),
        }


# --------------------------------------------------------------------------- config

def _line_map(node, path=(), out=None):
    """Map key paths to 1-based source lines of a composed YAML document."""
    out = {} if out is None else out
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            key = path + (k.value,)
            out[key] = k.start_mark.line + 1
            _line_map(v, key, out)
    return out


def _where(lines, *path):
    line = lines.get(tuple(path))
    name = ".".join(path)
    return f"line {line}: {name}" if line else name


def _number(value, kind, problems, where):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        problems.append(f"{where}: expected a number, got {value!r}")
        return None
    if kind is int:
        if isinstance(value, float) and not value.is_integer():
            problems.append(f"{where}: expected an integer, got {value!r}")
            return None
        return int(value)
    return float(value)


def spec_from_dict(doc, lines=None) -> ExperimentSpec:
    """Validate a config mapping; every violation is collected before raising."""
    lines = lines or {}
    problems = []
    if not isinstance(doc, dict):
        raise ConfigError(["top level must be a mapping"])
    for key in sorted(set(doc) - _TOP_KEYS, key=str):
        problems.append(f"{_where(lines, key)}: unknown key")
    if doc.get("schema", SCHEMA) != SCHEMA:
        problems.append(f"{_where(lines, 'schema')}: expected {SCHEMA!r}")

    model_doc = doc.get("model")
    model = None
    if not isinstance(model_doc, dict):
        problems.append(f"{_where(lines, 'model')}: required mapping with 'builtin' or 'file'")
    else:
        for key in sorted(set(model_doc) - _MODEL_KEYS, key=str):
            problems.append(f"{_where(lines, 'model', key)}: unknown key")
        name, path = model_doc.get("builtin"), model_doc.get("file")
        if (name is None) == (path is None):
            problems.append(f"{_where(lines, 'model')}: give exactly one of 'builtin' or 'file'")
        if name is not None and name not in NAMES:
            problems.append(f"{_where(lines, 'model', 'builtin')}: unknown network {name!r}")
        p0 = _number(model_doc.get("p0", 1e-3), float, problems, _where(lines, "model", "p0"))
        if p0 is not None and not 0 < p0 < 1:
            problems.append(f"{_where(lines, 'model', 'p0')}: must lie in (0, 1)")
        thr = _number(model_doc.get("thr", 0.0), float, problems, _where(lines, "model", "thr"))
        model = ModelSource(name, None if path is None else str(path), p0 or 1e-3, thr or 0.0)

    method = doc.get("method", "bice")
    if method not in METHODS:
        problems.append(f"{_where(lines, 'method')}: must be one of {METHODS}")

    engine_doc = doc.get("engine", {}) or {}
    engine_kw = {}
    if not isinstance(engine_doc, dict):
        problems.append(f"{_where(lines, 'engine')}: expected a mapping")
        engine_doc = {}
    for key in sorted(set(engine_doc) - set(_ENGINE_KEYS), key=str):
        problems.append(f"{_where(lines, 'engine', key)}: unknown key")
    for key, kind in _ENGINE_KEYS.items():
        if key in engine_doc:
            v = _number(engine_doc[key], kind, problems, _where(lines, "engine", key))
            if v is not None:
                engine_kw[key] = v
    checks = {
        "N": lambda v: v >= 2, "delta_tar": lambda v: v > 0, "delta_eps": lambda v: v > 0,
        "C": lambda v: v >= 0, "epsilon": lambda v: v > 0, "kmax": lambda v: v >= 0,
        "k": lambda v: v >= 1, "t_max": lambda v: v >= 1,
    }
    for key, ok in checks.items():
        if key in engine_kw and not ok(engine_kw[key]):
            problems.append(f"{_where(lines, 'engine', key)}: invalid value {engine_kw[key]!r}")
            del engine_kw[key]

    seed = _number(doc.get("seed", 0), int, problems, _where(lines, "seed"))
    if seed is not None and seed < 0:
        problems.append(f"{_where(lines, 'seed')}: must be >= 0")
    reps = _number(doc.get("repetitions", 1), int, problems, _where(lines, "repetitions"))
    if reps is not None and reps < 1:
        problems.append(f"{_where(lines, 'repetitions')}: must be >= 1")
    workers = _number(doc.get("workers", 1), int, problems, _where(lines, "workers"))
    if workers is not None and workers < 1:
        problems.append(f"{_where(lines, 'workers')}: must be >= 1")

    reference = doc.get("reference")
    if reference is not None and reference != "enumerate":
        reference = _number(reference, float, problems, _where(lines, "reference"))
        if reference is not None and not 0 <= reference <= 1:
            problems.append(f"{_where(lines, 'reference')}: must be 'enumerate' or a probability")
    output = doc.get("output")

    if problems:
        raise ConfigError(problems)
    try:
        engine = EngineConfig(seed=seed, **engine_kw)
    except ValueError as exc:
        raise ConfigError([f"engine: {exc}"]) from exc
    return ExperimentSpec(model, engine, method, reps, workers, reference,
                          None if output is None else str(output))


def spec_to_dict(spec: ExperimentSpec) -> dict:
    """Normalised mapping; ``spec_from_dict(spec_to_dict(s)) == s``."""
    m = spec.model
    model = {"builtin": m.builtin} if m.file is None else {"file": m.file}
    model.update(p0=m.p0, thr=m.thr)
    e = spec.engine
    return {
        "schema": SCHEMA,
        "model": model,
        "method": spec.method,
        "engine": {k: getattr(e, k) for k in _ENGINE_KEYS},
        "seed": e.seed,
        "repetitions": spec.repetitions,
        "workers": spec.workers,
        "reference": spec.reference,
        "output": spec.output,
    }


def load_config_dict(path):
    """Read a YAML config, returning ``(mapping, line_map)``."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError([f"{path}: {exc}"]) from exc
    return (doc if doc is not None else {}), (_line_map(node) if node is not None else {})


def parse_config(path) -> ExperimentSpec:
    doc, lines = load_config_dict(path)
    return spec_from_dict(doc, lines)


def dump_config(spec: ExperimentSpec) -> str:
    return yaml.safe_dump(spec_to_dict(spec), sort_keys=False)


# --------------------------------------------------------------------------- running

def mcs_baseline(model, N: int, seed: int, chunk: int = 100_000):
    """Crude Monte Carlo: ``(estimate, cost)`` from ``N`` draws of the input distribution."""
    if N < 1:
        raise ValueError("N must be >= 1")
    rng = np.random.default_rng(seed)
    fails = 0
    for start in range(0, N, chunk):
        n = min(chunk, N - start)
        x = sample(model.input_params, model.space, rng, n)
        uniq, inv = np.unique(x, axis=0, return_inverse=True)
        fails += int(np.count_nonzero((model.evaluate(uniq) <= 0)[inv.reshape(-1)]))
    return fails / N, N


def _one_rep(args):
    model, spec, r = args
    seed = spec.engine.seed + r
    try:
        if spec.method == "mcs":
            pf, cost = mcs_baseline(model, spec.engine.N, seed)
            return RepRecord(r, seed, pf, 1, cost, (), True)
        res = run(model, dataclasses.replace(spec.engine, seed=seed))
        return RepRecord(r, seed, res.pf_hat, len(res.levels), res.total_g_evaluations,
                         tuple(res.selected_ks), res.converged)
    except Exception as exc:  # recorded, the experiment continues
        log.warning("repetition %d failed: %s", r, exc)
        return RepRecord(r, seed, None, 0, 0, (), False, f"{type(exc).__name__}: {exc}")


def summarize(records, reference_pf=None) -> Summary:
    """Statistics over the successful repetitions.

    Without a reference the MSE is taken about the repetition mean and the
    summary is flagged as self-referenced.
    """
    ok = [r for r in records if r.pf_hat is not None]
    failures = len(records) - len(ok)
    if not ok:
        return Summary(None, None, None, None, None, reference_pf, reference_pf is None,
                       failures, tuple(records))
    est = np.array([r.pf_hat for r in ok])
    mean = float(est.mean())
    cov = float(est.std(ddof=1) / mean) if len(ok) > 1 and mean != 0 else None
    cost = float(np.mean([r.g_evals for r in ok]))
    self_ref = reference_pf is None
    ref = mean if self_ref else reference_pf
    mse = float(np.mean((est - ref) ** 2))
    rel_eff = ref * (1.0 - ref) / (mse * cost) if mse > 0 and cost > 0 else None
    return Summary(mean, cov, cost, mse, rel_eff, None if self_ref else float(reference_pf),
                   self_ref, failures, tuple(records))


def resolve_reference(spec: ExperimentSpec, model):
    if spec.reference == "enumerate":
        try:
            return enumerate_pf(model)
        except EnumerationRefused as exc:
            log.warning("%s; summary will be self-referenced", exc)
            return None
    return spec.reference


def run_experiment(spec: ExperimentSpec, write: bool = True) -> Summary:
    """Run ``spec.repetitions`` independent estimations; repetition r uses seed base + r."""
    model = spec.model.load()
    jobs = [(model, spec, r) for r in range(spec.repetitions)]
    if spec.workers > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            records = list(pool.map(_one_rep, jobs))
    else:
        records = [_one_rep(j) for j in jobs]
    summary = summarize(records, resolve_reference(spec, model))
    if write and spec.output:
        write_outputs(summary, spec.output)
    return summary


# --------------------------------------------------------------------------- reports

def records_to_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in records:
        w.writerow([
            r.rep, r.seed, "" if r.pf_hat is None else repr(float(r.pf_hat)), r.levels, r.g_evals,
            ";".join(str(k) for k in r.k_per_level), "true" if r.converged else "false", r.error,
        ])
    return buf.getvalue()


def records_from_csv(text: str) -> list:
    rows = csv.DictReader(io.StringIO(text))
    out = []
    for row in rows:
        out.append(RepRecord(
            rep=int(row["rep"]),
            seed=int(row["seed"]),
            pf_hat=float(row["pf_hat"]) if row["pf_hat"] else None,
            levels=int(row["levels"]),
            g_evals=int(row["g_evals"]),
            k_per_level=tuple(int(k) for k in row["k_per_level"].split(";") if k),
            converged=row["converged"] == "true",
            error=row["error"],
        ))
    return out


def _json_safe(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def write_outputs(summary: Summary, out_dir) -> tuple:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path, json_path = out / "repetitions.csv", out / "summary.json"
    csv_path.write_text(records_to_csv(summary.records), encoding="utf-8")
    doc = {k: _json_safe(v) for k, v in summary.to_json_dict().items()}
    json_path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    return csv_path, json_path
