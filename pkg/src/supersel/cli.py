"""Command-line experiment runner.

Every subcommand runs one sweep, writes a CSV (``--out``, default stdout) and
prints a summary line ``slope=<v> stderr=<v> expected=<v> pass=<bool>``.
Settings come from built-in defaults, then ``--config`` (``key = value``
lines, ``#`` comments), then command-line flags.

Exit codes: 0 success, 1 runtime or capacity error, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from . import measurement as meas
from .branch import BranchState, CapacityError, DegenerateStateError, ShapeError, label_matrix
from .grammar import OperatorSyntaxError, format_operator, parse_operator
from .operators import ProbeSpec, commutator_scaling
from .overlap import FerromagnetSpec, overlap_curve
from .parallel import default_threads, ordered_map
from .series import ScalingSeries, safe_log

SUBCOMMANDS = ("overlap", "commutator", "measure", "split", "cat", "scale")
REQUIRED = object()


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"{key}: {message}")


# ---------------------------------------------------------------------------
# value parsers


def _int(text: str) -> int:
    try:
        return int(text)
    except ValueError:
        value = float(text)
        if not value.is_integer():
            raise ValueError(f"{text!r} is not an integer")
        return int(value)


def _int_list(text: str) -> list[int]:
    items = [s for s in text.replace(" ", "").split(",") if s]
    if not items:
        raise ValueError("empty list")
    return [_int(s) for s in items]


def _complex_list(text: str) -> list[complex]:
    items = [s for s in text.replace(" ", "").split(",") if s]
    if not items:
        raise ValueError("empty list")
    return [complex(s) for s in items]


def _choice(*options):
    def parse(text: str) -> str:
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return text
    return parse


def _in_range(lo, hi, lo_open=False, hi_open=False):
    def check(v):
        if (v < lo or (lo_open and v == lo)) or (v > hi or (hi_open and v == hi)):
            lb = "(" if lo_open else "["
            rb = ")" if hi_open else "]"
            raise ValueError(f"{v} outside {lb}{lo}, {hi}{rb}")
    return check


def _positive(v):
    values = v if isinstance(v, list) else [v]
    if any(x <= 0 for x in values):
        raise ValueError("must be positive")


def _non_negative(v):
    values = v if isinstance(v, list) else [v]
    if any(x < 0 for x in values):
        raise ValueError("must be non-negative")


@dataclass(frozen=True)
class Key:
    parse: Callable[[str], Any]
    default: Any = REQUIRED
    check: Callable[[Any], None] | None = None
    help: str = ""


COMMON = {
    "seed": Key(_int, 42, help="random seed"),
    "out": Key(str, "-", help="CSV output path ('-' for stdout)"),
    "threads": Key(_int, None, _positive, "worker threads (default: $SUPERSEL_THREADS or 1)"),
    "tolerance": Key(float, 1e-6, _positive, "allowed |slope - expected|"),
}

SCHEMAS: dict[str, dict[str, Key]] = {
    "overlap": {
        "eta": Key(float, REQUIRED, _in_range(0.0, 1.0), "per-site ground overlap"),
        "m": Key(_int, 0, _non_negative, "number of excited sites"),
        "n_list": Key(_int_list, REQUIRED, _positive, "comma-separated site counts"),
        "excited_overlaps": Key(_complex_list, None, help="overlaps of the m excited sites"),
    },
    "commutator": {
        "expr": Key(str, REQUIRED, help="operator polynomial, e.g. 'p1^2*x2'"),
        "d": Key(_int, 16, _in_range(2, 64), "oscillator truncation"),
        "n_list": Key(_int_list, REQUIRED, _positive, "comma-separated particle counts"),
        "probes": Key(_int, 4, _positive, "number of random probe vectors"),
        "probe_kind": Key(_choice("random", "basis"), "random", help="random or basis"),
    },
    "measure": {
        "amplitudes": Key(_complex_list, REQUIRED, help="outcome amplitudes c_k"),
        "apparatus_sites": Key(_int, 1, _non_negative, "pointer sites N_A"),
        "pointer_overlap": Key(float, 0.0, _in_range(0.0, 1.0), "per-site pointer overlap"),
        "object_dim": Key(_int, None, _positive, "object dimension (default: outcomes)"),
        "kappa": Key(float, REQUIRED, _in_range(0.0, 1.0), "per-site environment overlap"),
        "env_list": Key(_int_list, REQUIRED, _non_negative, "environment sizes N_E"),
        "gamma": Key(float, 0.0, _non_negative, "infrared dephasing rate"),
        "t": Key(float, 0.0, _non_negative, "dephasing time"),
        "mode": Key(_choice("analytic", "sampled"), "analytic", help="analytic or sampled"),
        "samples": Key(_int, 100_000, _positive, "Monte-Carlo draws per site"),
        "keep_apparatus": Key(_int, 1, _non_negative, "pointer sites kept with the object"),
    },
    "split": {
        "n_sites": Key(_int, REQUIRED, _positive, "body size N"),
        "k_list": Key(_int_list, REQUIRED, _positive, "splitter localities"),
        "gamma": Key(float, 1.0, _non_negative, "dephasing rate on split sites"),
        "t": Key(float, 0.01, _non_negative, "dephasing time"),
        "epsilon": Key(float, 1e-6, _in_range(0.0, 1.0, True, True), "distinguishability threshold"),
    },
    "cat": {
        "gamma": Key(float, REQUIRED, _positive, "per-site dephasing rate"),
        "n_list": Key(_int_list, REQUIRED, _positive, "cat sizes N"),
    },
    "scale": {
        "atoms": Key(float, REQUIRED, _positive, "number of atoms"),
        "atom_mass": Key(float, REQUIRED, _positive, "mass per atom in kg"),
    },
}

COLUMNS = {
    "overlap": "N,abs_overlap,log_abs_overlap",
    "commutator": "N,max_matrix_element,log_max_matrix_element",
    "measure": "env_sites,distance_to_mixture,log_distance,coherence,purity,closed_form",
    "split": "locality,coherence,log_coherence,distinguishable_sites",
    "cat": "N,t_half,log_t_half,t_half_times_N,coherence_at_t_half",
    "scale": "n_atoms,atom_mass_kg,mass_kg",
}


@dataclass
class ExperimentConfig:
    subcommand: str
    parameters: dict[str, Any]
    seed: int = 42
    output_path: str = "-"
    threads: int = 1
    tolerance: float = 1e-6


def read_config_file(path: str) -> dict[str, str]:
    """``key = value`` lines; blank lines and ``#`` comments are ignored."""
    out: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}", "expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            out[key.replace("-", "_")] = value
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="supersel", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="subcommand", required=True, metavar="SUBCOMMAND")
    for name in SUBCOMMANDS:
        epilog = f"CSV columns: {COLUMNS[name]}"
        p = sub.add_parser(name, help=f"run the {name} experiment", epilog=epilog)
        p.add_argument("--config", help="file of 'key = value' lines")
        for key, spec in {**SCHEMAS[name], **COMMON}.items():
            default = "" if spec.default in (REQUIRED, None) else f" (default: {spec.default})"
            p.add_argument("--" + key.replace("_", "-"), dest=key, default=None,
                           help=spec.help + default)
    return parser


def parse_config(argv: list[str] | None = None) -> ExperimentConfig:
    """Merge defaults, the optional config file and flags into a validated config.

    Raises :class:`ConfigError` naming the offending key; argparse itself
    exits with status 2 on unknown flags.
    """
    args = build_parser().parse_args(argv)
    name = args.subcommand
    schema = {**SCHEMAS[name], **COMMON}
    raw: dict[str, str] = {}
    if args.config:
        try:
            raw.update(read_config_file(args.config))
        except OSError as exc:
            raise ConfigError("config", str(exc))
        for key in raw:
            if key not in schema:
                raise ConfigError(key, f"unknown key for '{name}'")
    for key in schema:
        flag = getattr(args, key, None)
        if flag is not None:
            raw[key] = flag
    values: dict[str, Any] = {}
    for key, spec in schema.items():
        if key in raw:
            try:
                value = spec.parse(raw[key])
            except (TypeError, ValueError) as exc:
                raise ConfigError(key, f"cannot parse {raw[key]!r}: {exc}")
            if spec.check is not None:
                try:
                    spec.check(value)
                except ValueError as exc:
                    raise ConfigError(key, f"out of range: {exc}")
        elif spec.default is REQUIRED:
            raise ConfigError(key, "missing required key")
        else:
            value = spec.default
        values[key] = value
    if name == "commutator":
        try:
            values["operator"] = parse_operator(values["expr"])
        except OperatorSyntaxError as exc:
            raise ConfigError("expr", str(exc))
    threads = values.pop("threads")
    return ExperimentConfig(
        subcommand=name,
        parameters={k: v for k, v in values.items() if k not in COMMON},
        seed=values["seed"],
        output_path=values["out"],
        threads=default_threads() if threads is None else threads,
        tolerance=values["tolerance"],
    )


# ---------------------------------------------------------------------------
# runners: each returns (csv rows, axis note, summary dict)


def fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, complex):
        return repr(value)
    return repr(float(value))


@dataclass
class Result:
    rows: list[list]
    axis: str
    slope: float | None
    stderr: float | None
    expected: float | None
    passed: bool
    notes: dict[str, Any] = field(default_factory=dict)


def _slope_verdict(series: ScalingSeries, expected, tol) -> bool:
    if series.exact_zero:
        return expected is None
    if series.slope is None or expected is None:
        return False
    return abs(series.slope - expected) <= tol


def run_overlap(cfg: ExperimentConfig) -> Result:
    p = cfg.parameters
    m = p["m"]
    bad = [n for n in p["n_list"] if n <= m]
    if bad:
        raise ValueError(f"every N must exceed m={m}, got {bad}")
    exc = tuple(p["excited_overlaps"]) if p["excited_overlaps"] is not None else None
    template = FerromagnetSpec(max(p["n_list"]), m, p["eta"], exc, cfg.seed)
    series = overlap_curve(template, p["n_list"], cfg.threads)
    expected = math.log(p["eta"]) if p["eta"] > 0 else None
    rows = [[int(n), v, lv] for n, v, lv in series.points]
    return Result(rows, "semilog x=N y=log_abs_overlap", series.slope, series.slope_stderr,
                  expected, _slope_verdict(series, expected, cfg.tolerance))


def run_commutator(cfg: ExperimentConfig) -> Result:
    p = cfg.parameters
    probe = ProbeSpec(kind=p["probe_kind"], count=p["probes"], seed=cfg.seed)
    series = commutator_scaling(p["operator"], p["d"], p["n_list"], probe, cfg.threads)
    expected = None if series.exact_zero else -1.0
    rows = [[int(n), v, lv] for n, v, lv in series.points]
    return Result(rows, "loglog x=log(N) y=log_max_matrix_element", series.slope,
                  series.slope_stderr, expected, _slope_verdict(series, expected, cfg.tolerance),
                  {"expr": format_operator(p["operator"])})


def run_measure(cfg: ExperimentConfig) -> Result:
    p = cfg.parameters
    spec = meas.MeasurementSpec(tuple(p["amplitudes"]), p["apparatus_sites"],
                                p["pointer_overlap"], p["object_dim"])
    base = meas.premeasure(spec)
    deph = meas.DephasingSpec(p["gamma"], p["t"], p["mode"], cfg.seed, p["samples"])
    base, report = meas.infrared_dephase(base, deph, sites=spec.apparatus)
    kept_a = min(p["keep_apparatus"], spec.apparatus_sites)
    keep = (0,) + spec.apparatus[:kept_a]
    traced_a = spec.apparatus_sites - kept_a
    c = np.abs(np.asarray(spec.outcome_amplitudes))
    two = len(c) == 2

    def point(n_env):
        state = meas.environment_scatter(base, meas.EnvironmentSpec(n_env, p["kappa"]))
        rep = meas.decoherence_report(state, keep, spec)
        coh = max(rep.coherences.values(), default=0.0)
        closed = (c[0] * c[1] * p["kappa"] ** n_env * spec.pointer_overlap ** traced_a
                  * abs(report.total_factor)) if two else float("nan")
        return [n_env, rep.distance_to_mixture, safe_log(rep.distance_to_mixture), coh,
                rep.purity, closed]

    rows = ordered_map(point, sorted(p["env_list"]), cfg.threads)
    series = ScalingSeries.build([(r[0], r[1], r[2]) for r in rows])
    expected = math.log(p["kappa"]) if p["kappa"] > 0 else None
    if two and all(r[5] == 0 for r in rows):
        # fully decohered by orthogonal pointers: only rounding noise is left to fit
        expected = None
        passed = all(r[1] <= cfg.tolerance for r in rows)
        series = ScalingSeries.build([(r[0], 0.0, -math.inf) for r in rows])
    else:
        passed = _slope_verdict(series, expected, cfg.tolerance)
        if len(series.points) < 2 and not series.exact_zero:
            passed = False
    notes = {}
    if p["mode"] == "sampled" and report.site_stderr is not None and len(report.sites):
        mean = float(np.mean(report.site_factors.real))
        se = float(np.sqrt(np.mean(report.site_stderr ** 2) / len(report.sites)))
        notes = {"dephasing_mean": mean, "dephasing_analytic": report.analytic_factor,
                 "dephasing_stderr": se}
        passed = passed and abs(mean - report.analytic_factor) <= 3 * se
    return Result(rows, "semilog x=env_sites y=log_distance", series.slope, series.slope_stderr,
                  expected, passed, notes)


def run_split(cfg: ExperimentConfig) -> Result:
    p = cfg.parameters
    N = p["n_sites"]
    bad = [k for k in p["k_list"] if k > N]
    if bad:
        raise ValueError(f"locality cannot exceed n_sites={N}, got {bad}")
    body = BranchState.from_sites([(1.0, [np.array([1.0, 0.0])] * N)])
    deph = meas.DephasingSpec(p["gamma"], p["t"])

    def point(k):
        state = meas.split(body, meas.SplitterSpec(k))
        dist = max(meas.branch_distinguishability(state, p["epsilon"]).values())
        out, _ = meas.infrared_dephase(state, deph)
        r, _ = label_matrix(out, range(N))
        coh = float(abs(r[0, 1]))
        return [k, coh, safe_log(coh), dist]

    rows = ordered_map(point, sorted(set(p["k_list"])), cfg.threads)
    series = ScalingSeries.build([(r[0], r[1], r[2]) for r in rows])
    expected = -p["gamma"] * p["t"]
    local = all(r[3] <= r[0] for r in rows)
    passed = local and (_slope_verdict(series, expected, cfg.tolerance) if len(rows) > 1 else True)
    return Result(rows, "semilog x=locality y=log_coherence", series.slope, series.slope_stderr,
                  expected, passed, {"locality_bound": local})


def run_cat(cfg: ExperimentConfig) -> Result:
    p = cfg.parameters
    gamma = p["gamma"]
    series = meas.cat_lifetime(p["n_list"], gamma, cfg.threads)

    def check(row):
        N, t, _ = row
        return meas.cat_coherence(int(N), gamma, t)

    coh = ordered_map(check, list(series.points), cfg.threads)
    rows = [[int(n), t, lt, t * n, c] for (n, t, lt), c in zip(series.points, coh)]
    halved = all(abs(c - 0.25) <= 1e-9 for c in coh)
    passed = halved and (_slope_verdict(series, -1.0, cfg.tolerance) if len(rows) > 1 else True)
    return Result(rows, "loglog x=log(N) y=log_t_half", series.slope, series.slope_stderr,
                  -1.0, passed)


def run_scale(cfg: ExperimentConfig) -> Result:
    p = cfg.parameters
    mass = meas.estimate_scale(p["atoms"], p["atom_mass"])
    return Result([[p["atoms"], p["atom_mass"], mass]], "none", None, None, None, True,
                  {"mass_kg": mass})


RUNNERS = {
    "overlap": run_overlap,
    "commutator": run_commutator,
    "measure": run_measure,
    "split": run_split,
    "cat": run_cat,
    "scale": run_scale,
}


def render_csv(cfg: ExperimentConfig, result: Result) -> str:
    buf = io.StringIO()
    buf.write(f"# supersel {cfg.subcommand} axis={result.axis} seed={cfg.seed}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COLUMNS[cfg.subcommand].split(","))
    for row in result.rows:
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def summary_line(cfg: ExperimentConfig, result: Result) -> str:
    if cfg.subcommand == "scale":
        return f"mass={result.notes['mass_kg']!r} kg"
    parts = [f"slope={'none' if result.slope is None else repr(result.slope)}",
             f"stderr={'none' if result.stderr is None else repr(result.stderr)}",
             f"expected={'none' if result.expected is None else repr(result.expected)}",
             f"pass={fmt(result.passed)}"]
    return " ".join(parts)


def run(cfg: ExperimentConfig, stdout=None) -> Result:
    """Execute the sweep, write the CSV and print the summary line."""
    stdout = sys.stdout if stdout is None else stdout
    result = RUNNERS[cfg.subcommand](cfg)
    text = render_csv(cfg, result)
    if cfg.output_path == "-":
        stdout.write(text)
    else:
        with open(cfg.output_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    print(summary_line(cfg, result), file=stdout)
    return result


def main(argv: list[str] | None = None) -> int:
    try:
        cfg = parse_config(argv)
    except ConfigError as exc:
        print(f"supersel: error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:  # argparse usage errors and --help
        return int(exc.code or 0)
    try:
        run(cfg)
    except (CapacityError, DegenerateStateError, ShapeError, ValueError, OSError) as exc:
        print(f"supersel: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
