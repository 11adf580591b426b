"""Command-line harness: config parsing, dispatch, and record emission.

Every command prints a one-line summary to stdout and optionally writes
the full record stream to CSV or JSON.  All randomness flows from the
single ``--seed`` flag (default 42, never wall clock), so re-running a
command reproduces its output byte for byte, regardless of ``--jobs``.

Exit codes: 0 success, 1 invalid configuration, 2 numerical failure or
unwritable output.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from dataclasses import dataclass

from .bases import (
    FamilyKind,
    christoffel_bound,
    christoffel_bound_numeric,
    family_from_token,
)
from .errors import QuadratureError
from .estimator import add_noise, fit_least_squares, l2_error, QuadratureSpec
from .experiments import (
    DEFAULT_SEED,
    _NOISE_SEED_SALT,
    ExperimentRecord,
    deterministic_stability_table,
    error_vs_m_curve,
    instability_onset,
    noiseless_bound_experiment,
    noisy_bound_experiment,
    optimal_m_curve,
    scaling_exponent,
    target_function,
)
from .measures import chebyshev_measure, uniform_measure
from .sampling import draw_iid
from .stability import (
    TailBoundInputs,
    chernoff_tail_bound,
    mc_tail_probability,
    stability_budget,
)

COMMANDS = (
    "kofm",
    "budget",
    "tailbound",
    "mc-tail",
    "fit",
    "error-vs-m",
    "optimal-m",
    "noiseless-bound",
    "noisy-bound",
    "det-stability",
)

CSV_HEADER = "experiment,family,measure,f,n,m,seed,trial,error,gap,bounds"

_RECORD_COMMANDS = {
    "error-vs-m",
    "optimal-m",
    "noiseless-bound",
    "noisy-bound",
    "det-stability",
}


class ConfigError(ValueError):
    """Invalid or incomplete run configuration."""


@dataclass(frozen=True)
class RunConfig:
    """One CLI invocation, fully resolved."""

    command: str
    family: str | None = None
    measure: str | None = None
    f: str | None = None
    n: int | None = None
    n_values: tuple[int, ...] | None = None
    m: int | None = None
    m_values: tuple[int, ...] | None = None
    delta: float = 0.5
    r: float = 1.0
    sigma: float = 0.0
    trials: int = 100
    seed: int = DEFAULT_SEED
    grid: int = 100001
    K: float | None = None
    epsilon: float | None = None
    cells: int | None = None
    out: str | None = None
    format: str = "csv"
    jobs: int | None = None

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        data = json.loads(text)
        unknown = set(data) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        for key in ("n_values", "m_values"):
            if data.get(key) is not None:
                data[key] = tuple(int(v) for v in data[key])
        return cls(**data)


def _format_float(v: float) -> str:
    return f"{v:.17g}"


def _bounds_to_text(bounds: dict[str, float]) -> str:
    return ";".join(f"{k}={_format_float(v)}" for k, v in sorted(bounds.items()))


def _bounds_from_text(text: str) -> dict[str, float]:
    if not text:
        return {}
    out = {}
    for item in text.split(";"):
        key, _, val = item.partition("=")
        out[key] = float(val)
    return out


def emit_records(records, fmt: str, path: str) -> None:
    """Write the record stream as CSV (fixed header) or a JSON array.

    Floating point fields round-trip exactly: 17 significant digits in
    CSV, shortest-exact representation in JSON.
    """
    records = list(records)
    if not records:
        raise ConfigError("no records to write")
    if fmt == "csv":
        lines = [CSV_HEADER]
        for rec in records:
            lines.append(
                ",".join(
                    [
                        rec.experiment,
                        rec.family,
                        rec.measure,
                        rec.f,
                        str(rec.n),
                        str(rec.m),
                        str(rec.seed),
                        str(rec.trial),
                        _format_float(rec.error),
                        _format_float(rec.gap),
                        _bounds_to_text(rec.bounds),
                    ]
                )
            )
        text = "\n".join(lines) + "\n"
    elif fmt == "json":
        payload = [
            {
                "experiment": rec.experiment,
                "family": rec.family,
                "measure": rec.measure,
                "f": rec.f,
                "n": rec.n,
                "m": rec.m,
                "seed": rec.seed,
                "trial": rec.trial,
                "error": rec.error,
                "gap": rec.gap,
                "bounds": dict(sorted(rec.bounds.items())),
            }
            for rec in records
        ]
        text = json.dumps(payload, indent=1) + "\n"
    else:
        raise ConfigError(f"unknown output format {fmt!r} (expected csv or json)")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def read_records(path: str, fmt: str | None = None):
    """Parse a record file back into ExperimentRecord objects."""
    if fmt is None:
        fmt = "json" if path.endswith(".json") else "csv"
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    records = []
    if fmt == "csv":
        lines = [ln for ln in text.splitlines() if ln]
        if lines[0] != CSV_HEADER:
            raise ValueError("unexpected CSV header")
        for ln in lines[1:]:
            parts = ln.split(",")
            records.append(
                ExperimentRecord(
                    experiment=parts[0],
                    family=parts[1],
                    measure=parts[2],
                    f=parts[3],
                    n=int(parts[4]),
                    m=int(parts[5]),
                    seed=int(parts[6]),
                    trial=int(parts[7]),
                    error=float(parts[8]),
                    gap=float(parts[9]),
                    bounds=_bounds_from_text(parts[10]),
                )
            )
    else:
        for item in json.loads(text):
            records.append(ExperimentRecord(**item))
    return records


# ---------------------------------------------------------------------------
# argument parsing

class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse default exits with code 2
        raise ConfigError(message)


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise ConfigError(f"expected comma-separated integers, got {text!r}") from None


def _build_parser() -> _Parser:
    p = _Parser(prog="randlsq", description=__doc__, add_help=True)
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="JSON config file; explicit flags override it")
    p.add_argument("--family", choices=[k.value for k in FamilyKind])
    p.add_argument("--measure", choices=["uniform", "chebyshev"],
                   help="cell measure for piecewise families")
    p.add_argument("--f", dest="f", help="target function label (runge, abs, zero)")
    p.add_argument("--n", type=int)
    p.add_argument("--n-values", type=_int_list)
    p.add_argument("--m", type=int)
    p.add_argument("--m-values", type=_int_list)
    p.add_argument("--delta", type=float)
    p.add_argument("--r", type=float)
    p.add_argument("--sigma", type=float)
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--grid", type=int)
    p.add_argument("--K", type=float, dest="K")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--cells", type=int)
    p.add_argument("--out")
    p.add_argument("--format", choices=["csv", "json"])
    p.add_argument("--jobs", type=int)
    return p


def parse_config(argv) -> RunConfig:
    ns = _build_parser().parse_args(argv)
    base = {}
    if ns.config:
        try:
            with open(ns.config, "r", encoding="utf-8") as fh:
                base = json.loads(fh.read())
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from None
        unknown = set(base) - {f.name for f in dataclasses.fields(RunConfig)}
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
    merged = dict(base)
    merged["command"] = ns.command
    for f_ in dataclasses.fields(RunConfig):
        if f_.name in ("command",):
            continue
        val = getattr(ns, f_.name, None)
        if val is not None:
            merged[f_.name] = val
    for key in ("n_values", "m_values"):
        if merged.get(key) is not None:
            merged[key] = tuple(int(v) for v in merged[key])
    return RunConfig(**merged)


def _require(cfg: RunConfig, *names: str):
    for name in names:
        if getattr(cfg, name) is None:
            raise ConfigError(f"command {cfg.command!r} requires --{name.replace('_', '-')}")


def _resolve_family(cfg: RunConfig):
    _require(cfg, "family")
    kwargs = {}
    if cfg.family == FamilyKind.PIECEWISE_CONSTANT.value:
        if cfg.cells is None:
            raise ConfigError("piecewise family requires --cells")
        kwargs["num_cells"] = cfg.cells
        if cfg.measure == "chebyshev":
            kwargs["measure"] = chebyshev_measure()
        else:
            kwargs["measure"] = uniform_measure(-1.0, 1.0)
    if cfg.family == FamilyKind.SHRUNK_UNIFORM_LINEAR.value:
        if cfg.epsilon is None:
            raise ConfigError("shrunk family requires --epsilon")
        kwargs["epsilon"] = cfg.epsilon
    return family_from_token(cfg.family, **kwargs)


def _jobs(cfg: RunConfig) -> int:
    return cfg.jobs if cfg.jobs is not None else (os.cpu_count() or 1)


# ---------------------------------------------------------------------------
# command implementations

def _cmd_kofm(cfg: RunConfig) -> list[ExperimentRecord]:
    _require(cfg, "m")
    family = _resolve_family(cfg)
    analytic = christoffel_bound(family, cfg.m)
    numeric = christoffel_bound_numeric(family, cfg.m, cfg.grid)
    print(f"K({cfg.m}) = {analytic:g} (analytic), {numeric:.6f} (numeric)")
    return []


def _cmd_budget(cfg: RunConfig) -> list[ExperimentRecord]:
    _require(cfg, "n")
    family = _resolve_family(cfg)
    m_max = stability_budget(family, cfg.n, cfg.r)
    print(f"m_max = {m_max}")
    return []


def _cmd_tailbound(cfg: RunConfig) -> list[ExperimentRecord]:
    _require(cfg, "m", "n")
    if cfg.K is not None:
        K = cfg.K
    else:
        family = _resolve_family(cfg)
        K = christoffel_bound(family, cfg.m)
    bound = chernoff_tail_bound(
        TailBoundInputs(m=cfg.m, n=cfg.n, K=K, delta=cfg.delta, r=cfg.r)
    )
    print(
        f"tail bound = {bound:.6g} (m={cfg.m}, n={cfg.n}, K={K:g}, delta={cfg.delta:g})"
    )
    return []


def _cmd_mc_tail(cfg: RunConfig) -> list[ExperimentRecord]:
    _require(cfg, "m", "n")
    family = _resolve_family(cfg)
    est = mc_tail_probability(family, cfg.m, cfg.n, cfg.delta, cfg.trials, cfg.seed)
    K = christoffel_bound(family, cfg.m)
    bound = chernoff_tail_bound(
        TailBoundInputs(m=cfg.m, n=cfg.n, K=K, delta=cfg.delta, r=cfg.r)
    )
    dominated = est.probability - est.ci_halfwidth <= bound
    verdict = "PASS" if dominated else "FAIL"
    print(
        f"tail estimate = {est.probability:.6g} "
        f"[{est.ci_low:.6g}, {est.ci_high:.6g}] vs bound {bound:.6g}: {verdict}"
    )
    return []


def _cmd_fit(cfg: RunConfig) -> list[ExperimentRecord]:
    _require(cfg, "m", "n", "f")
    family = _resolve_family(cfg)
    target = target_function(cfg.f)
    samples = draw_iid(family.measure, cfg.n, cfg.seed)
    y = target.fn(samples.points)
    if cfg.sigma > 0.0:
        y = add_noise(y, cfg.sigma, cfg.seed ^ _NOISE_SEED_SALT)
    fit = fit_least_squares(family, cfg.m, samples, y).truncated(target.sup_bound)
    err = l2_error(target.fn, fit, QuadratureSpec(family.measure))
    print(
        f"fit m={cfg.m} n={cfg.n} f={target.label}: gap={fit.gap:.6g} "
        f"singular={fit.singular} coeff_norm={fit.coeffs.norm():.6g} error={err:.6g}"
    )
    return []


def _cmd_error_vs_m(cfg: RunConfig) -> list[ExperimentRecord]:
    _require(cfg, "n", "f")
    family = _resolve_family(cfg)
    target = target_function(cfg.f)
    records = error_vs_m_curve(
        target, family, cfg.n, m_values=cfg.m_values, seed=cfg.seed
    )
    best = min(records, key=lambda r: r.error)
    onset = instability_onset(records)
    onset_text = f", instability onset at m={onset}" if onset is not None else ""
    print(
        f"min error = {best.error:.6g} at m={best.m} (n={cfg.n}{onset_text})"
    )
    return records


def _default_n_values(f_label: str) -> tuple[int, ...]:
    if f_label == "runge":
        return (25, 50, 75, 100, 140, 200)
    return (50, 100, 200, 400, 700, 1000)


def _cmd_optimal_m(cfg: RunConfig) -> list[ExperimentRecord]:
    _require(cfg, "f")
    family = _resolve_family(cfg)
    target = target_function(cfg.f)
    n_values = cfg.n_values if cfg.n_values is not None else _default_n_values(cfg.f)
    trials = cfg.trials if cfg.trials else 50
    table, records = optimal_m_curve(
        target, family, n_values, trials=trials, seed=cfg.seed, jobs=_jobs(cfg)
    )
    try:
        est = scaling_exponent(table)
        print(
            f"slope = {est.slope:.4f} [{est.ci_low:.4f}, {est.ci_high:.4f}] "
            f"over n in {est.n_used}"
        )
    except ValueError:
        means = ", ".join(
            f"{n}:{m:.2f}" for n, m in zip(table.n_values, table.mean_m)
        )
        print(f"mean m(n): {means}")
    return records


def _cmd_noiseless_bound(cfg: RunConfig) -> list[ExperimentRecord]:
    _require(cfg, "n", "f")
    family = _resolve_family(cfg)
    target = target_function(cfg.f)
    report = noiseless_bound_experiment(
        target, family, cfg.n, r=cfg.r, trials=cfg.trials, seed=cfg.seed,
        jobs=_jobs(cfg),
    )
    if not report.applicable:
        print(f"inapplicable: stability budget is 0 at n={cfg.n}, r={cfg.r:g}")
        return []
    verdict = "PASS" if report.passed else "FAIL"
    print(
        f"mean sq error = {report.mean_sq_error:.6g} (ci {report.ci_halfwidth:.2g}) "
        f"vs bound {report.bound:.6g} at m={report.m}: {verdict}"
    )
    return list(report.records)


def _cmd_noisy_bound(cfg: RunConfig) -> list[ExperimentRecord]:
    _require(cfg, "n", "f")
    family = _resolve_family(cfg)
    target = target_function(cfg.f)
    reports = noisy_bound_experiment(
        target, family, cfg.n, sigma=cfg.sigma, r=cfg.r, trials=cfg.trials,
        seed=cfg.seed, jobs=_jobs(cfg),
        m_values=list(cfg.m_values) if cfg.m_values is not None else None,
    )
    if not reports[0].applicable:
        print(f"inapplicable: stability budget is 0 at n={cfg.n}, r={cfg.r:g}")
        return []
    ok = all(rep.passed for rep in reports)
    verdict = "PASS" if ok else "FAIL"
    swept = ", ".join(str(rep.m) for rep in reports)
    print(
        f"noisy bound at sigma={cfg.sigma:g}, n={cfg.n}, m in {{{swept}}}: {verdict}"
    )
    records = []
    for rep in reports:
        records.extend(rep.records)
    return records


def _cmd_det_stability(cfg: RunConfig) -> list[ExperimentRecord]:
    family = _resolve_family(cfg)
    n_values = cfg.n_values if cfg.n_values is not None else (
        (cfg.n,) if cfg.n is not None else None
    )
    m_values = cfg.m_values if cfg.m_values is not None else (
        (cfg.m,) if cfg.m is not None else None
    )
    if n_values is None or m_values is None:
        raise ConfigError("det-stability requires --n/--n-values and --m/--m-values")
    records = deterministic_stability_table(family, n_values, m_values)
    if not records:
        raise ConfigError("no valid (n, m) pairs for this family")
    worst = max(records, key=lambda r: r.gap / r.bounds["stability_bound"])
    ratio = worst.gap / worst.bounds["stability_bound"]
    ok = all(r.gap <= r.bounds["stability_bound"] for r in records)
    verdict = "PASS" if ok else "FAIL"
    print(
        f"max gap = {worst.gap:.3g} vs bound {worst.bounds['stability_bound']:.3g} "
        f"(ratio {ratio:.3g}) over {len(records)} cases: {verdict}"
    )
    return records


_DISPATCH = {
    "kofm": _cmd_kofm,
    "budget": _cmd_budget,
    "tailbound": _cmd_tailbound,
    "mc-tail": _cmd_mc_tail,
    "fit": _cmd_fit,
    "error-vs-m": _cmd_error_vs_m,
    "optimal-m": _cmd_optimal_m,
    "noiseless-bound": _cmd_noiseless_bound,
    "noisy-bound": _cmd_noisy_bound,
    "det-stability": _cmd_det_stability,
}


def run(cfg: RunConfig) -> int:
    """Dispatch one resolved configuration; returns the exit status."""
    try:
        records = _DISPATCH[cfg.command](cfg)
    except ConfigError:
        raise
    except QuadratureError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    if cfg.out is not None:
        if cfg.command not in _RECORD_COMMANDS:
            raise ConfigError(f"command {cfg.command!r} does not write records")
        try:
            emit_records(records, cfg.format, cfg.out)
        except OSError as exc:
            print(f"cannot write output: {exc}", file=sys.stderr)
            return 2
    return 0


def main(argv=None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    try:
        cfg = parse_config(argv)
        return run(cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
