"""Command line experiment runner.

``bifree-lab run --config cfg.json [--seed N] [--out DIR]`` runs one experiment
and appends a record to ``DIR/ledger.jsonl``.  ``bifree-lab export --run ID``
turns a record into CSV.  ``bifree-lab validate-gram --N 3`` checks the Gram
constant by brute force and records the result; pair experiments of kind
``mc-entropy`` refuse to run until such a record exists in ``DIR``.

Exit codes: 0 success, 2 configuration error, 3 failed numerical
precondition, 4 zero hits in every estimate.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
import time
from dataclasses import asdict, dataclass, fields
from typing import Any

import numpy as np

from . import __version__
from .errors import ConfigurationError, PreconditionError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PRECONDITION = 3
EXIT_ZERO_HITS = 4

EXPERIMENTS = ("oracle", "mc-entropy", "orbital", "freeness", "dimension", "moments", "validate-gram")
LEDGER = "ledger.jsonl"

CSV_COLUMNS = {
    "mc-entropy": ["d", "log_volume", "std_error", "normalized_chi"],
    "orbital": ["d", "hit_probability", "std_error", "normalized"],
    "dimension": ["epsilon", "chi", "fitted_delta"],
}


@dataclass
class ExperimentConfig:
    """One experiment; unknown keys are rejected, every field is echoed into the record."""

    experiment: str
    n: int | None = None
    m: int | None = None
    ell: int | None = None
    layout: list | None = None
    covariance: list | None = None
    moment_file: str | None = None
    M: int = 2
    epsilon: float | None = None
    R: Any = "inf"
    d_list: list | None = None
    samples: int = 10_000
    seed: int = 0
    output: str | None = None
    mode: str = "bifree-reduced"
    words: list | None = None
    sampler: Any = None
    method: str = "auto"
    eps_grid: list | None = None
    split: list | None = None
    Q: list | None = None
    Rm: list | None = None
    N: int | None = None
    ranks: list | None = None
    report: str = "sequence"
    budgets: dict | None = None
    allow_large_degree: bool = False

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigurationError("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        extra = sorted(set(raw) - known)
        if extra:
            raise ConfigurationError(f"unknown config keys: {', '.join(extra)}")
        if "experiment" not in raw:
            raise ConfigurationError("config needs an 'experiment' field")
        cfg = cls(**raw)
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        return asdict(self)

    def serialize(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def parse(cls, text: str) -> "ExperimentConfig":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"config is not valid JSON: {exc}") from exc
        return cls.from_dict(raw)

    def r_value(self) -> float:
        if self.R in ("inf", "Infinity", None):
            return math.inf
        return float(self.R)

    def validate(self) -> None:
        def need(name, cond, msg):
            if not cond:
                raise ConfigurationError(f"{name}: {msg}")

        need("experiment", self.experiment in EXPERIMENTS, f"must be one of {EXPERIMENTS}")
        for name in ("n", "m", "ell", "N"):
            v = getattr(self, name)
            need(name, v is None or (isinstance(v, int) and v >= 0), "must be a non-negative integer")
        need("M", isinstance(self.M, int) and self.M >= 1, "must be a positive integer")
        need("samples", isinstance(self.samples, int) and self.samples >= 1, "must be a positive integer")
        need("seed", isinstance(self.seed, int), "must be an integer")
        need("epsilon", self.epsilon is None or (isinstance(self.epsilon, (int, float)) and self.epsilon > 0),
             "must be positive")
        try:
            r = self.r_value()
        except (TypeError, ValueError):
            raise ConfigurationError("R: must be a number or 'inf'") from None
        need("R", r > 0, "must be positive")
        if self.d_list is not None:
            need("d_list", all(isinstance(d, int) and d >= 1 for d in self.d_list), "must list positive integers")
        if self.covariance is not None:
            A = np.asarray(self.covariance, dtype=float)
            need("covariance", A.ndim == 2 and A.shape[0] == A.shape[1], "must be a square matrix")
        need("covariance/moment_file", not (self.covariance is not None and self.moment_file is not None),
             "give one target source, not both")
        exp = self.experiment
        if exp in ("oracle", "dimension"):
            need("covariance", self.covariance is not None, f"required for {exp}")
        if exp == "dimension":
            need("eps_grid", bool(self.eps_grid), "required for dimension")
        if exp in ("mc-entropy", "orbital"):
            need("target", self.covariance is not None or self.moment_file is not None,
                 "mc-entropy and orbital need a covariance or a moment_file")
            need("epsilon", self.epsilon is not None, f"required for {exp}")
            need("d_list", bool(self.d_list), f"required for {exp}")
        if exp == "orbital":
            need("layout", bool(self.layout), "orbital needs a layout [[n_k, m_k], ...]")
        if exp == "freeness":
            need("epsilon", self.epsilon is not None, "required for freeness")
            need("d_list", bool(self.d_list), "required for freeness")
        if exp == "moments":
            need("covariance", self.covariance is not None, "required for moments")
            need("output", self.output is not None, "moments writes a moment file to 'output'")
        if exp == "validate-gram":
            need("N", self.N is not None and self.N >= 2, "validate-gram needs N >= 2")


def config_hash(cfg: ExperimentConfig) -> str:
    return hashlib.sha256(cfg.serialize().encode()).hexdigest()


# -- ledger -------------------------------------------------------------------

def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def read_ledger(out_dir: str) -> list[dict]:
    path = os.path.join(out_dir, LEDGER)
    if not os.path.exists(path):
        return []
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


def append_record(out_dir: str, record: dict) -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, LEDGER), "a") as fh:
        fh.write(json.dumps(record, sort_keys=True) + "\n")


GRAM_GATE_N = (3, 4)


def _gram_validated(out_dir: str) -> bool:
    """True when the ledger holds passing validate-gram runs for every N in ``GRAM_GATE_N``."""
    passed = {r["config"].get("N") for r in read_ledger(out_dir)
              if r.get("config", {}).get("experiment") == "validate-gram" and r.get("status") == "ok"
              and r.get("rows") and all(row.get("passed") for row in r["rows"])}
    return all(N in passed for N in GRAM_GATE_N)


# -- experiments ----------------------------------------------------------------

def _cov(cfg: ExperimentConfig):
    from .moments import CovarianceSpec

    A = np.asarray(cfg.covariance, dtype=float)
    n = cfg.n if cfg.n is not None else A.shape[0] - (cfg.m or 0)
    m = cfg.m if cfg.m is not None else A.shape[0] - n
    return CovarianceSpec(n, m, A)


def _target(cfg: ExperimentConfig):
    from .moments import build_target

    source = _cov(cfg) if cfg.covariance is not None else cfg.moment_file
    return build_target(source, cfg.M, allow_large_degree=cfg.allow_large_degree)


def _exp_oracle(cfg):
    from .entropy import chi_upper_bound, gaussian_chi, gaussian_delta
    from .gram import cone_upper_bound, pair_constraint_log_volume_oracle

    cov = _cov(cfg)
    chi = gaussian_chi(cov)
    rows = [{"chi": str(chi) if chi.is_neg_infinity else chi.value,
             "upper_bound": chi_upper_bound(np.diag(cov.A)), "rank": gaussian_delta(cov)}]
    if cfg.d_list and cov.size == 2 and cfg.epsilon is not None:
        a, b = cov.A[0, 0], cov.A[1, 1]
        if not (np.isclose(a, 1) and np.isclose(b, 1)):
            raise ConfigurationError("the pair volume oracle needs unit variances")
        c = float(cov.A[0, 1])
        for d in cfg.d_list:
            lv = pair_constraint_log_volume_oracle(d, cfg.epsilon, c)
            row = {"d": d, "oracle_log_volume": lv, "normalized": lv / d ** 2 + math.log(d)}
            if abs(c) < 1:
                row["cone_upper_bound"] = cone_upper_bound(d, cfg.epsilon, c)
            rows.append(row)
    return rows


def _exp_mc_entropy(cfg, out_dir):
    from .microstates import MicrostateSpec
    from .volume import chi_sequence

    target = _target(cfg)
    if target.n + target.m == 2 and not _gram_validated(out_dir):
        raise PreconditionError("pair experiments need a passing validate-gram record in this output directory; "
                                "run 'bifree-lab validate-gram --N 3' and '--N 4' first")
    spec = MicrostateSpec(target, cfg.M, cfg.epsilon, cfg.d_list[0], cfg.r_value(), cfg.mode,
                          tuple(cfg.words or ()))
    seq = chi_sequence(spec, cfg.d_list, cfg.sampler, cfg.samples, cfg.seed)
    return [est.row() for _, est in seq]


def _exp_orbital(cfg):
    from .microstates import MicrostateSpec
    from .orbital import chi_orb_sequence, orbital_subadditivity_gap, semicircle_families

    target = _target(cfg)
    layout = [tuple(x) for x in cfg.layout]
    b = cfg.budgets or {}
    if cfg.report == "gap":
        rows = []
        for d in cfg.d_list:
            spec = MicrostateSpec(target, cfg.M, cfg.epsilon, d, cfg.r_value())
            rows.append(orbital_subadditivity_gap(spec, layout, b, cfg.seed).row())
        return rows
    if cfg.report != "sequence":
        raise ConfigurationError("report must be 'sequence' or 'gap'")
    gen = lambda d: semicircle_families(d, layout)
    seq = chi_orb_sequence(gen, target, cfg.M, cfg.epsilon, cfg.d_list, cfg.samples, cfg.seed, cfg.method,
                           b.get("particles", 1000), b.get("replicates", 4))
    return [est.row() for _, est in seq]


def _exp_freeness(cfg):
    from .orbital import asymptotic_freeness_fraction

    ranks = cfg.ranks or [0.5, 0.5]
    rows = []
    for d in cfg.d_list:
        fams = []
        for r in ranks:
            k = int(round(r * d))
            fams.append([np.diag(np.r_[np.ones(k), np.zeros(d - k)]).astype(complex)])
        frac = asymptotic_freeness_fraction(fams, cfg.M, cfg.epsilon, cfg.samples, cfg.seed)
        rows.append({"d": d, "fraction": frac, "trials": cfg.samples})
    return rows


def _exp_dimension(cfg):
    from .entropy import gaussian_delta, numeric_delta

    cov = _cov(cfg)
    fit = numeric_delta(cov, cfg.eps_grid)
    rank = gaussian_delta(cov)
    return [{"epsilon": e, "chi": c, "fitted_delta": fit.delta, "rank": rank} for e, c in zip(fit.eps_grid, fit.chi)]


def _exp_moments(cfg):
    from .words import reduced_words

    target = _target(cfg)
    target.to_file(cfg.output)
    return [{"word": str(w), "value": float(np.real(target.table[w]))}
            for w in reduced_words(target.n, target.m, target.degree_cap)]


def _exp_validate_gram(cfg):
    from .gram import validate_gram_constant

    return [validate_gram_constant(cfg.N, cfg.samples, cfg.seed).row()]


def _zero_hits(experiment: str, rows: list[dict]) -> bool:
    if experiment == "mc-entropy":
        return bool(rows) and all(r.get("hits") == 0 for r in rows)
    if experiment == "orbital":
        return bool(rows) and all(r.get("hit_probability") == 0 for r in rows)
    return False


def execute(cfg: ExperimentConfig, out_dir: str) -> tuple[dict, int]:
    """Run the experiment, append the record and return ``(record, exit_code)``."""
    start = time.time()
    status, code, message, rows = "ok", EXIT_OK, None, []
    try:
        exp = cfg.experiment
        if exp == "oracle":
            rows = _exp_oracle(cfg)
        elif exp == "mc-entropy":
            rows = _exp_mc_entropy(cfg, out_dir)
        elif exp == "orbital":
            rows = _exp_orbital(cfg)
        elif exp == "freeness":
            rows = _exp_freeness(cfg)
        elif exp == "dimension":
            rows = _exp_dimension(cfg)
        elif exp == "moments":
            rows = _exp_moments(cfg)
        else:
            rows = _exp_validate_gram(cfg)
            if not rows[0]["passed"]:
                status, code, message = "failed", EXIT_PRECONDITION, "Gram constant validation failed"
        if code == EXIT_OK and _zero_hits(exp, rows):
            status, code, message = "zero-hits", EXIT_ZERO_HITS, "no estimate recorded a hit"
    except PreconditionError as exc:
        status, code, message = "precondition-failed", EXIT_PRECONDITION, str(exc)
    except (ValueError, OSError) as exc:
        status, code, message = "config-error", EXIT_CONFIG, str(exc)
    h = config_hash(cfg)
    runs = read_ledger(out_dir)
    record = {
        "run_id": f"{h[:12]}-{len(runs)}",
        "config_hash": h,
        "config": cfg.to_dict(),
        "tool_version": __version__,
        "wall_clock_seconds": round(time.time() - start, 3),
        "seed": {"root": cfg.seed, "streams": "philox(seed, [d,] chunk)"},
        "status": status,
        "message": message,
        "rows": _jsonable(rows),
    }
    append_record(out_dir, record)
    return record, code


# -- export ---------------------------------------------------------------------

def export_csv(record: dict, selector: dict | None = None) -> str:
    """CSV text of a record's rows; ``selector`` keeps rows whose fields match."""
    exp = record["config"]["experiment"]
    rows = record.get("rows", [])
    if selector:
        rows = [r for r in rows if all(str(r.get(k)) == str(v) for k, v in selector.items())]
    cols = CSV_COLUMNS.get(exp)
    if cols is None:
        cols = []
        for r in record.get("rows", []):
            cols += [k for k in r if k not in cols]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(cols)
    for r in rows:
        writer.writerow([r.get(c, "") for c in cols])
    return buf.getvalue()


def _find_run(out_dir: str, run_id: str) -> dict:
    matches = [r for r in read_ledger(out_dir) if r["run_id"] == run_id or r["run_id"].startswith(run_id)]
    if not matches:
        raise ConfigurationError(f"no run {run_id!r} in {os.path.join(out_dir, LEDGER)}")
    if len(matches) > 1:
        raise ConfigurationError(f"run id {run_id!r} is ambiguous")
    return matches[0]


# -- entry point ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bifree-lab", description="Microstate entropy experiments.")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run one experiment from a JSON config")
    r.add_argument("--config", required=True)
    r.add_argument("--seed", type=int)
    r.add_argument("--out", default="runs")
    e = sub.add_parser("export", help="export a recorded run as CSV")
    e.add_argument("--run", required=True)
    e.add_argument("--format", default="csv", choices=["csv"])
    e.add_argument("--out", default="runs")
    e.add_argument("--output", help="file to write (default: stdout)")
    e.add_argument("--where", action="append", default=[], metavar="KEY=VALUE", help="keep matching rows only")
    g = sub.add_parser("validate-gram", help="brute-force check of the Gram-Jacobian constant")
    g.add_argument("--N", type=int, required=True)
    g.add_argument("--samples", type=int, default=10_000_000)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", default="runs")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            with open(args.config) as fh:
                raw = json.load(fh)
            if args.seed is not None:
                raw["seed"] = args.seed
            cfg = ExperimentConfig.from_dict(raw)
            record, code = execute(cfg, args.out)
        elif args.command == "validate-gram":
            cfg = ExperimentConfig.from_dict({"experiment": "validate-gram", "N": args.N,
                                              "samples": args.samples, "seed": args.seed})
            record, code = execute(cfg, args.out)
        else:
            record = _find_run(args.out, args.run)
            selector = dict(w.split("=", 1) for w in args.where)
            text = export_csv(record, selector)
            if args.output:
                with open(args.output, "w") as fh:
                    fh.write(text)
            else:
                sys.stdout.write(text)
            return EXIT_OK
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(json.dumps({"run_id": record["run_id"], "status": record["status"], "message": record["message"],
                      "rows": record["rows"]}, indent=1))
    return code


if __name__ == "__main__":
    sys.exit(main())
