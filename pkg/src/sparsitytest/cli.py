"""Command-line entry point and experiment runner.

Subcommands: ``simulate``, ``estimate``, ``test``, ``lowerbound`` and
``cumulants``. Exit codes: 0 on success, 2 on validation errors, 3 on
numerical errors. Per-trial rows are JSON lines; summaries are CSV.

Trial ``i`` of a run with master seed ``s`` uses seed
``sparsitytest.rng.derive_seed(s, i)``.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import dataclasses
import hashlib
import io
import json
import math
import os
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from fractions import Fraction
from typing import Any, Sequence

import numpy as np
from scipy import stats

from .cumulant_algebra import cumulant_upper_bound, symmetrized_cumulants
from .distributions import Distribution, SampleBatch, sample_dataset, sample_labels
from .errors import ConfigError, NumericalError, SparsityTestError, ValidationError
from .estimation import empirical_cumulants
from .lowerbounds import CONSTRUCTIONS, distinguisher_advantage
from .rng import derive_seed
from .testers import (
    build_schedule,
    dist_to_k_sparse,
    general_tester,
    noiseless_recover,
    sym_poly_tester,
)

COMMANDS = ("simulate", "estimate", "test", "lowerbound", "cumulants")
TESTERS = ("general", "sympoly", "noiseless")
OUTPUT_DIR_ENV = "SPARSITYTEST_OUTPUT_DIR"
SCHEDULE_ALIASES = {"paper": "worst_case"}


def parse_weights(text: str) -> tuple[float, ...]:
    """Weights as ``a,b,c``, ``uniform:N`` or ``sparse:N:K`` (K equal leading entries)."""
    text = text.strip()
    try:
        if text.startswith("uniform:"):
            n = int(text.split(":")[1])
            if n < 1:
                raise ConfigError("uniform:N needs N >= 1")
            return tuple([1 / math.sqrt(n)] * n)
        if text.startswith("sparse:"):
            _, n, k = text.split(":")
            n, k = int(n), int(k)
            if not 0 < k <= n:
                raise ConfigError("sparse:N:K needs 0 < K <= N")
            return tuple([1 / math.sqrt(k)] * k + [0.0] * (n - k))
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise ConfigError(f"cannot parse weights {text!r}") from None


def parse_model(text: str) -> Distribution:
    """Distribution from a compact string or from a ``key = value`` file."""
    if os.path.isfile(text):
        parser = configparser.ConfigParser(interpolation=None)
        with open(text) as fh:
            parser.read_string("[model]\n" + fh.read())
        return _distribution_from_section(dict(parser["model"]))
    return Distribution.parse(text)


def _distribution_from_section(items: dict) -> Distribution:
    pieces = [f"{k}={v}" for k, v in items.items() if k != "kind"]
    if "kind" not in items:
        raise ConfigError("model section needs a 'kind' key")
    return Distribution.parse(items["kind"] + (":" + ",".join(pieces) if pieces else ""))


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to replay one run."""

    command: str
    seed: int = 0
    trials: int = 1
    output: str | None = None
    model: Distribution = field(default_factory=Distribution.rademacher)
    noise: Distribution = field(default_factory=Distribution.zero)
    w: tuple | None = None
    samples: int = 100_000
    k: int = 1
    eps: float | None = None
    c: float = 0.1
    s: float = 0.9
    C: float = 1.0
    tester: str = "general"
    schedule: str = "practical"
    construction: str = "gaussian_hidden"
    n: int | None = None
    t: int | None = None
    r: int = 2
    max_order: int = 8
    data: str | None = None

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.command not in COMMANDS:
            raise ConfigError(f"command must be one of {COMMANDS}")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.samples < 1:
            raise ConfigError("samples must be >= 1")
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        if not 0 <= self.c < self.s <= 1:
            raise ConfigError(f"need 0 <= c < s <= 1, got c={self.c}, s={self.s}")
        if self.eps is not None and not 0 < self.eps <= 1:
            raise ConfigError("eps must lie in (0, 1]")
        if not self.C > 0:
            raise ConfigError("C must be positive")
        if self.tester not in TESTERS:
            raise ConfigError(f"tester must be one of {TESTERS}")
        if self.construction not in CONSTRUCTIONS:
            raise ConfigError(f"construction must be one of {CONSTRUCTIONS}")
        if self.max_order < 1:
            raise ConfigError("max_order must be >= 1")
        self.schedule_orders()
        if self.command in ("simulate",) and self.w is None:
            raise ConfigError(f"{self.command} needs a weight vector (w)")
        if self.command == "test" and self.w is None and self.data is None:
            raise ConfigError("test needs a weight vector (w) or a data file")

    def schedule_orders(self) -> tuple[str, tuple[int, ...] | None]:
        mode, _, rest = self.schedule.partition(":")
        mode = SCHEDULE_ALIASES.get(mode, mode)
        if mode not in ("worst_case", "practical"):
            raise ConfigError("schedule must be 'worst_case' (alias 'paper'), 'practical' "
                              "or 'practical:<orders>'")
        if not rest:
            return mode, None
        try:
            orders = tuple(int(v) for v in rest.split(","))
        except ValueError:
            raise ConfigError(f"cannot parse schedule orders {rest!r}") from None
        for o in orders:
            if o < 2 or o % 2:
                raise ConfigError(f"schedule order {o} violates the invariant: orders must be "
                                  "even and >= 2")
        if any(a <= b for a, b in zip(orders, orders[1:])):
            raise ConfigError("schedule orders violate the invariant: strictly decreasing")
        if len(orders) != self.k:
            raise ConfigError(f"schedule lists {len(orders)} orders but k = {self.k}")
        return mode, orders

    def bounds(self) -> tuple[float, float]:
        """(c, s) used for classification; a plain eps-test means (0, eps)."""
        if self.eps is not None:
            return 0.0, self.eps
        return self.c, self.s

    # serialization ------------------------------------------------------
    def to_dict(self) -> dict[str, Any]:
        out = {}
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if isinstance(value, Distribution):
                value = value.to_dict()
                value = {k: (str(v) if isinstance(v, Fraction) else v) for k, v in value.items()}
            elif isinstance(value, tuple):
                value = list(value)
            out[f.name] = value
        return out

    def config_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()

    def serialize(self) -> str:
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        exp = {}
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if f.name in ("model", "noise") or value is None:
                continue
            if isinstance(value, tuple):
                value = ",".join(repr(float(v)) for v in value)
            exp[f.name] = str(value)
        parser["experiment"] = exp
        for name in ("model", "noise"):
            dist: Distribution = getattr(self, name)
            section = {}
            for key, value in dist.to_dict().items():
                if isinstance(value, list):
                    value = ";".join(str(v) for v in value)
                section[key] = str(value).lower() if isinstance(value, bool) else str(value)
            parser[name] = section
        buf = io.StringIO()
        parser.write(buf)
        return buf.getvalue()

    @classmethod
    def parse(cls, text: str) -> "ExperimentConfig":
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        parser.read_string(text)
        unknown_sections = set(parser.sections()) - {"experiment", "model", "noise"}
        if unknown_sections:
            raise ConfigError(f"unknown config sections {sorted(unknown_sections)}")
        if "experiment" not in parser:
            raise ConfigError("config needs an [experiment] section")
        types = {f.name: f for f in dataclasses.fields(cls)}
        kwargs: dict[str, Any] = {}
        for key, raw in parser["experiment"].items():
            if key not in types or key in ("model", "noise"):
                raise ConfigError(f"unknown config key {key!r}")
            kwargs[key] = _coerce(key, raw)
        for name in ("model", "noise"):
            if name in parser:
                kwargs[name] = _distribution_from_section(dict(parser[name]))
        return cls(**kwargs)


_INT_KEYS = {"seed", "trials", "samples", "k", "n", "t", "r", "max_order"}
_FLOAT_KEYS = {"eps", "c", "s", "C"}


def _coerce(key: str, raw: str):
    try:
        if key in _INT_KEYS:
            return int(raw)
        if key in _FLOAT_KEYS:
            return float(raw)
    except ValueError:
        raise ConfigError(f"config key {key!r} has a malformed value {raw!r}") from None
    if key == "w":
        return parse_weights(raw)
    return raw


@dataclass
class ExperimentRecord:
    timestamp: str
    config_hash: str
    rows: list
    summary: dict
    text: str = ""
    paths: tuple = ()


def _jsonable(value):
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, Fraction):
        return float(value)
    if isinstance(value, tuple):
        return [_jsonable(v) for v in value]
    if isinstance(value, list):
        return [_jsonable(v) for v in value]
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    return value


def _jsonl(rows) -> str:
    return "".join(json.dumps(_jsonable(r), sort_keys=False) + "\n" for r in rows)


def _csv(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for r in rows:
        writer.writerow(r)
    return buf.getvalue()


def _clopper_pearson(successes: int, total: int) -> tuple[float, float]:
    if total == 0:
        return (math.nan, math.nan)
    ci = stats.binomtest(successes, total).proportion_ci(confidence_level=0.95, method="exact")
    return float(ci.low), float(ci.high)


def _load_batch(config: ExperimentConfig) -> SampleBatch:
    return SampleBatch.from_csv(config.data, str(config.model), str(config.noise))


def _run_test_trial(config: ExperimentConfig, trial_seed: int, batch=None) -> dict:
    model, noise = config.model, config.noise
    w = np.array(config.w) if config.w is not None else None
    true_distance = dist_to_k_sparse(w, config.k) if w is not None and np.any(w) else None
    if config.tester == "noiseless":
        if batch is None:
            batch = sample_dataset(model, noise, w, config.samples, trial_seed)
        rec = noiseless_recover(batch, config.k)
        if rec is None:
            weights: list = []
            row = {"decision": "far", "statistic": 1.0, "threshold": 0.5, "w_tilde": [],
                   "s2": None, "support": None}
        else:
            weights = sorted((abs(float(v)) for v in rec.weights), reverse=True)
            row = {"decision": "sparse", "statistic": 0.0, "threshold": 0.5,
                   "w_tilde": weights, "s2": float(np.sum(np.square(weights))),
                   "support": list(rec.support)}
        row.update(true_distance=true_distance, seed=trial_seed)
        return row
    labels = batch.y if batch is not None else sample_labels(model, noise, w, config.samples,
                                                            trial_seed)
    if config.tester == "sympoly":
        eps = config.eps if config.eps is not None else config.s
        verdict = sym_poly_tester(labels, config.k, eps, config.C, model, noise)
    else:
        c, s = config.bounds()
        mode, orders = config.schedule_orders()
        schedule = build_schedule(config.k, s, config.C, model, mode, orders)
        verdict = general_tester(labels, config.k, c, s, config.C, model, noise, schedule)
    row = verdict.to_record(trial_seed, true_distance)
    row["flags"] = sorted(verdict.flags)
    return row


def _test_summary(config: ExperimentConfig, rows: list) -> dict:
    c, s = config.bounds()
    if config.tester == "sympoly":
        c, s = 0.0, config.eps if config.eps is not None else config.s
    if config.tester == "noiseless":
        c, s = 0.0, 1e-12
    judged = [r for r in rows if r.get("true_distance") is not None
              and (r["true_distance"] <= c or r["true_distance"] >= s)]
    correct = sum(
        (r["decision"] == "sparse") == (r["true_distance"] <= c) for r in judged
    )
    stats_ = [r["statistic"] for r in rows if r.get("statistic") is not None]
    low, high = _clopper_pearson(correct, len(judged))
    return {
        "trials": len(rows),
        "judged": len(judged),
        "success_rate": correct / len(judged) if judged else math.nan,
        "mean_statistic": float(np.mean(stats_)) if stats_ else math.nan,
        "ci_low": low,
        "ci_high": high,
    }


def _execute(config: ExperimentConfig, rows: list) -> tuple[dict, str]:
    """Fill ``rows`` in trial order; returns (summary, printable text)."""
    cmd = config.command
    if cmd == "cumulants":
        L = config.max_order
        moments = config.model.exact_moments(L)
        kappa = config.model.exact_cumulants(L)
        table = []
        for ell in range(1, L + 1):
            bound = cumulant_upper_bound(ell, moments[ell - 1]) if ell % 2 == 0 else ""
            row = {"order": ell, "moment": float(moments[ell - 1]),
                   "cumulant": float(kappa[ell - 1]), "bound": bound}
            rows.append(row)
            table.append([ell, repr(row["moment"]), repr(row["cumulant"]),
                          repr(bound) if bound != "" else ""])
        return {"orders": L}, _csv(["order", "moment", "cumulant", "bound"], table)

    if cmd == "simulate":
        batch = sample_dataset(config.model, config.noise, np.array(config.w), config.samples,
                               config.seed)
        rows.append({"n": batch.n, "m": batch.m, "seed": config.seed})
        return {"rows": batch.m}, batch.to_csv()

    if cmd == "estimate":
        if config.data is not None:
            y = _load_batch(config).y
        elif config.w is not None:
            y = sample_labels(config.model, config.noise, np.array(config.w), config.samples,
                              config.seed)
        else:
            raise ConfigError("estimate needs a data file or a weight vector")
        sym = (y[0 : 2 * (y.size // 2) : 2] - y[1 : 2 * (y.size // 2) : 2]) / math.sqrt(2)
        L = config.max_order - config.max_order % 2
        if L < 2:
            raise ConfigError("estimate needs max_order >= 2")
        kx = symmetrized_cumulants(config.model.exact_cumulants(L))
        ke = symmetrized_cumulants(config.noise.known_cumulants(L))
        ky = empirical_cumulants(sym, L, symmetric=True)
        s2 = max(0.0, float(ky[1]) - float(ke[1]))
        table = []
        for ell in range(2, L + 1, 2):
            if kx[ell - 1] == 0:
                continue
            value = (float(ky[ell - 1]) - float(ke[ell - 1])) / float(kx[ell - 1])
            rows.append({"order": ell, "power_sum": value, "s2": s2})
            table.append([ell, repr(value), repr(s2)])
        return {"orders": len(table)}, _csv(["order", "power_sum", "s2"], table)

    if cmd == "lowerbound":
        params: dict[str, Any] = {"n": config.n if config.n is not None else 1000}
        rows_per = config.t if config.t is not None else 2
        if config.construction == "gaussian_hidden":
            params.update(t=rows_per, c=config.c, k=config.k)
        else:
            params.update(m=rows_per, r=config.r)
        result = distinguisher_advantage(config.construction, params, config.trials,
                                         config.seed)
        row = {"construction": config.construction, "params": params,
               "advantage": result["advantage"], "stderr": result["stderr"],
               "trials": config.trials}
        rows.append(row)
        return {"advantage": result["advantage"], "stderr": result["stderr"]}, _jsonl([row])

    # test
    if config.data is not None:
        rows.append(_run_test_trial(config, config.seed, _load_batch(config)))
    else:
        for i in range(config.trials):
            row = _run_test_trial(config, derive_seed(config.seed, i))
            rows.append({"trial": i, **row})
    return _test_summary(config, rows), _jsonl(rows)


def _output_root(config: ExperimentConfig) -> str | None:
    base = config.output
    if base is None and os.environ.get(OUTPUT_DIR_ENV):
        base = os.path.join(os.environ[OUTPUT_DIR_ENV],
                            f"{config.command}-{config.config_hash()[:12]}")
    if base is None:
        return None
    for suffix in (".jsonl", ".csv"):
        if base.endswith(suffix):
            return base[: -len(suffix)]
    return base


def _write(path: str, text: str) -> str:
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w") as fh:
        fh.write(text)
    return path


def _write_outputs(config: ExperimentConfig, record: ExperimentRecord) -> tuple:
    root = _output_root(config)
    if root is None:
        return ()
    if config.command == "simulate" and not record.summary.get("truncated"):
        return (_write(root + ".csv", record.text),)
    paths = [_write(root + ".jsonl", _jsonl(record.rows))]
    keys = ["config_hash", "timestamp"] + list(record.summary)
    values = [record.config_hash, record.timestamp] + [
        _jsonable(v) for v in record.summary.values()]
    paths.append(_write(root + "_summary.csv", _csv(keys, [values])))
    return tuple(paths)


def run_experiment(config: ExperimentConfig) -> ExperimentRecord:
    """Run ``config`` and persist rows and summary when an output is configured.

    On a numerical failure the rows produced so far are written with a final
    ``{"truncated": true, ...}`` marker before the error propagates.
    """
    config.validate()
    stamp = datetime.now(timezone.utc).isoformat()
    rows: list = []
    record = ExperimentRecord(stamp, config.config_hash(), rows, {})
    try:
        summary, text = _execute(config, rows)
    except NumericalError as exc:
        rows.append({"truncated": True, "error": str(exc)})
        record.summary = {"truncated": True}
        record.text = _jsonl(rows)
        record.paths = _write_outputs(config, record)
        raise
    record.summary = summary
    record.text = text
    record.paths = _write_outputs(config, record)
    return record


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="INI file with [experiment], [model] and [noise] sections")
    p.add_argument("--seed", type=int, help="master seed (default 0)")
    p.add_argument("--output", help="output path prefix (JSONL rows + _summary.csv)")


def _add_models(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model", help="coordinate law, e.g. 'rademacher' or "
                   "'uniform:a=-1,b=1,standardized=true', or a key=value file")
    p.add_argument("--noise", help="noise law, e.g. 'zero' or 'gaussian:var=0.01'")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sparsitytest", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write a sample batch as CSV (x1,...,xn,y)")
    _add_common(p)
    _add_models(p)
    p.add_argument("--w", help="weights: 'a,b,c', 'uniform:N' or 'sparse:N:K'")
    p.add_argument("--samples", type=int, help="number of rows")

    p = sub.add_parser("estimate", help="print power-sum estimates (order, power_sum, s2)")
    _add_common(p)
    _add_models(p)
    p.add_argument("--data", help="sample batch CSV")
    p.add_argument("--w", help="simulate labels with these weights instead of --data")
    p.add_argument("--samples", type=int, help="rows to simulate with --w")
    p.add_argument("--max-order", dest="max_order", type=int, help="largest order (default 8)")

    p = sub.add_parser("test", help="run a sparsity tester; one JSON line per trial")
    _add_common(p)
    _add_models(p)
    p.add_argument("--k", type=int, help="sparsity level (default 1)")
    p.add_argument("--eps", type=float, help="far-ness parameter; implies c=0, s=eps")
    p.add_argument("--c", type=float, help="close threshold of the tolerant tester")
    p.add_argument("--s", type=float, help="far threshold of the tolerant tester")
    p.add_argument("--C", type=float, help="norm promise 1/C <= ||w|| <= C (default 1)")
    p.add_argument("--tester", choices=TESTERS, help="tester (default general)")
    p.add_argument("--schedule", help="'worst_case' (alias 'paper'), 'practical' or 'practical:6,4'")
    p.add_argument("--samples", type=int, help="labels per trial")
    p.add_argument("--trials", type=int, help="number of seeded trials")
    p.add_argument("--w", help="true weights: 'a,b,c', 'uniform:N' or 'sparse:N:K'")
    p.add_argument("--data", help="run once on this sample batch CSV")

    p = sub.add_parser("lowerbound", help="Bayes-classifier advantage on a construction")
    _add_common(p)
    p.add_argument("--construction", choices=CONSTRUCTIONS)
    p.add_argument("--n", type=int, help="dimension")
    p.add_argument("--t", "--m", dest="t", type=int, help="rows per instance")
    p.add_argument("--c", type=float, help="Gaussian noise level")
    p.add_argument("--k", type=int, help="hidden block size (gaussian_hidden)")
    p.add_argument("--r", type=int, help="spread of the Poisson constructions (default 2)")
    p.add_argument("--trials", type=int, help="instances per label")

    p = sub.add_parser("cumulants", help="print order,moment,cumulant,bound as CSV")
    _add_common(p)
    _add_models(p)
    p.add_argument("--max-order", dest="max_order", type=int, help="largest order (default 8)")
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    base: dict[str, Any] = {}
    if getattr(args, "config", None):
        with open(args.config) as fh:
            base = ExperimentConfig.parse(fh.read()).__dict__.copy()
    base["command"] = args.command
    for key, value in vars(args).items():
        if key in ("config", "command") or value is None:
            continue
        if key in ("model", "noise"):
            value = parse_model(value)
        elif key == "w":
            value = parse_weights(value)
        base[key] = value
    if args.command == "test" and base.get("eps") is not None and args.c is None and args.s is None:
        base["c"], base["s"] = 0.0, base["eps"]
    return ExperimentConfig(**base)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = config_from_args(args)
        record = run_experiment(config)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3
    except (OSError, SparsityTestError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if not record.paths or config.command in ("cumulants", "estimate"):
        sys.stdout.write(record.text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
