"""Command line front end: plan, update, test, sweep, simulate."""

import argparse
from dataclasses import replace
import csv
import io
import json
import logging
import math
import os
import sys
from importlib import resources

import jsonschema
import numpy as np

from .closed_test import AnalysisData, closed_test, plan, update
from .correlation import InformationTable
from .design import DesignSpec, design_report, log_rank_scale, prevalence_sweep, SWEEP_COLUMNS
from .exceptions import CCSError, InputError, NumericalError
from .simulation import MIN_REPS, SimConfig, estimate_fwer, estimate_power
from .spending import SpendingSpec

__all__ = ["main", "load_config", "spec_from_config", "write_csv", "EXIT_OK", "EXIT_INPUT", "EXIT_NUMERICAL"]

log = logging.getLogger(__name__)

EXIT_OK, EXIT_INPUT, EXIT_NUMERICAL = 0, 2, 3


class ConfigError(InputError):
    pass


def _schema():
    text = resources.files("ccsgsd").joinpath("data/config.schema.json").read_text(encoding="utf-8")
    return json.loads(text)


def _read_json(path, what):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {what} {path}: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


def load_config(path):
    """Read and schema-validate a design configuration."""
    cfg = _read_json(path, "config")
    validator = jsonschema.Draft202012Validator(_schema())
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        lines = []
        for e in errors[:10]:
            where = "/".join(str(x) for x in e.absolute_path) or "<root>"
            lines.append(f"{path}: field {where}: {e.message}")
        raise ConfigError("\n".join(lines))
    return cfg


def _spending(cfg, m):
    raw = cfg["spending"]
    items = raw if isinstance(raw, list) else [raw] * m
    if len(items) != m:
        raise ConfigError(f"field spending: need {m} entries, got {len(items)}")
    return tuple(SpendingSpec(s["family"], cfg["alpha"], s.get("parameter")) for s in items)


def spec_from_config(cfg, algorithm=None):
    """Build a ``DesignSpec`` from a validated configuration dictionary."""
    pops = cfg["populations"]
    m = len(pops)
    prevalence = tuple(p["prevalence"] for p in pops)
    names = tuple(p.get("name", f"population {i + 1}") for i, p in enumerate(pops))
    graph = cfg.get("graph")
    if graph is None:
        weights = (1.0 / m,) * m
        transitions = tuple(tuple(0.0 if i == j else 1.0 / (m - 1) for j in range(m)) for i in range(m))
    else:
        weights, transitions = tuple(graph["weights"]), tuple(tuple(r) for r in graph["transitions"])
    ep = cfg["endpoint"]
    kwargs = {}
    if ep["type"] == "survival":
        kwargs.update(
            endpoint="survival",
            hazard_ratios=tuple(ep["hazard_ratios"]),
            control_median=ep.get("control_median"),
            dropout_rate=ep.get("dropout_rate", 0.0),
            randomization_ratio=ep.get("randomization_ratio", 1.0),
            accrual_months=ep.get("accrual_months"),
            study_months=ep.get("study_months"),
            event_model=ep.get("event_model", "schoenfeld"),
        )
    else:
        effects = ep.get("effects")
        if effects is None:
            if "subgroup_effect" not in ep:
                raise ConfigError("field endpoint: give either effects or subgroup_effect")
            base = ep["subgroup_effect"]
            effects = tuple(base * math.sqrt(prevalence[0] / p) for p in prevalence)
        kwargs.update(endpoint="normal", effects=tuple(effects))
    return DesignSpec(
        prevalence=prevalence, timings=tuple(cfg["timings"]), weights=weights, transitions=transitions,
        spending=_spending(cfg, m), alpha=cfg["alpha"], target_power=cfg.get("target_power", 0.9),
        algorithm=algorithm or cfg.get("algorithm", 1), names=names, **kwargs,
    )


def _planned_information(cfg, spec, report=None):
    if "planned_information" in cfg:
        return InformationTable(cfg["planned_information"])
    total = cfg.get("total_information")
    if total is None:
        if report is None:
            report = design_report(spec)
        total = report.methods["ccs"]["required"][-1]
    return spec.information(total)


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return f"{x:.6g}"
    return str(x)


def write_csv(rows, columns, path=None):
    """RFC 4180 CSV with LF line endings and 6 significant digits."""
    buf = io.StringIO(newline="")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in columns])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text


def _write_json(obj, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=2, allow_nan=True)
        fh.write("\n")


def _out_dir(args, cfg):
    d = args.out or cfg.get("outputs", {}).get("directory")
    if d:
        os.makedirs(d, exist_ok=True)
    return d


_BOUND_COLUMNS = ("subset", "population", "analysis", "bound", "nominal_alpha", "weight", "alpha_star", "finalized")


def _print_report(report, out):
    spec = report.spec
    m = spec.n_populations
    single = m == 1
    methods = ("ccs",) if single else ("bonferroni", "ccs")
    labels = [f"IA{k + 1}" for k in range(len(spec.timings) - 1)] + ["FA"]
    print(f"populations: {', '.join(spec.names)}", file=out)
    for name in methods:
        e = report.methods[name]
        title = "group sequential" if single else name.upper() if name == "ccs" else "Bonferroni"
        print(f"\n[{title}]", file=out)
        for i in range(m):
            print(f"  {spec.names[i]}:", file=out)
            print(f"    nominal alpha level   {100 * e['nominal_alpha'][i]:.2f}%", file=out)
            print(f"    Z bounds              " + "  ".join(f"{lab} {b:.2f}" for lab, b in zip(labels, e["bounds"][i])), file=out)
            if "hr_bounds" in e:
                print(f"    HR bounds             " + "  ".join(f"{lab} {b:.2f}" for lab, b in zip(labels, e["hr_bounds"][i])), file=out)
            req = e["required"][i]
            unit = "events" if spec.endpoint == "survival" else "information"
            print(f"    required {unit:<12} {req:.0f}" if spec.endpoint == "survival" else f"    required {unit:<12} {req:.1f}", file=out)
            if not single:
                print(f"    power at Bonferroni n {100 * e['power'][i]:.2f}%", file=out)
        if "patients" in e:
            print(f"  patients (overall)      {e['patients']}", file=out)


def cmd_plan(args, out):
    cfg = load_config(args.config)
    spec = spec_from_config(cfg, args.algorithm)
    table = plan(spec.information(), spec.graph(), spec.spending, spec.alpha,
                 algorithm=spec.algorithm, n_jobs=args.threads)
    report = design_report(spec, table)
    info = _planned_information(cfg, spec, report)
    # bounds depend on information only through its ratios
    table = replace(table, information=info, planned=info)
    _print_report(report, out)
    d = _out_dir(args, cfg)
    if d:
        _write_json(report.as_dict(), os.path.join(d, "report.json"))
        write_csv(table.records(), _BOUND_COLUMNS, os.path.join(d, "bounds.csv"))
    return EXIT_OK


def _read_data(path):
    raw = _read_json(path, "analysis data")
    items = raw.get("analyses") if isinstance(raw, dict) else raw
    if not isinstance(items, list) or not items:
        raise ConfigError(f"{path}: expected a list of analyses or an object with an 'analyses' list")
    out = []
    allowed = {"analysis", "information", "statistics", "skipped", "future_information"}
    for n, item in enumerate(items):
        if not isinstance(item, dict) or "analysis" not in item:
            raise ConfigError(f"{path}: entry {n}: each analysis needs an 'analysis' index")
        extra = set(item) - allowed
        if extra:
            raise ConfigError(f"{path}: entry {n}: unknown keys {sorted(extra)}")
        try:
            out.append(AnalysisData(**item))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{path}: entry {n}: {exc}") from None
    return sorted(out, key=lambda d: d.analysis)


def _updated_table(args):
    cfg = load_config(args.config)
    spec = spec_from_config(cfg, args.algorithm)
    info = _planned_information(cfg, spec)
    table = plan(info, spec.graph(), spec.spending, spec.alpha, algorithm=spec.algorithm, n_jobs=args.threads)
    data = _read_data(args.data)
    for d in data:
        if d.information is None and not d.skipped:
            d = AnalysisData(d.analysis, table.information.n[:, d.analysis - 1], d.statistics,
                             d.skipped, d.future_information)
        table = update(table, d, n_jobs=args.threads)
    return cfg, spec, table, data


def cmd_update(args, out):
    cfg, spec, table, _ = _updated_table(args)
    text = write_csv(table.records(), _BOUND_COLUMNS)
    out.write(text)
    d = _out_dir(args, cfg)
    if d:
        write_csv(table.records(), _BOUND_COLUMNS, os.path.join(d, "bounds.csv"))
        _write_json({
            "finalized": table.finalized,
            "information": table.information.n.tolist(),
            "alpha_star": {"+".join(str(i + 1) for i in J): [list(x) for x in sb.alpha_star]
                           for J, sb in table.subsets.items()},
        }, os.path.join(d, "update.json"))
    return EXIT_OK


def cmd_test(args, out):
    cfg, spec, table, data = _updated_table(args)
    outcome = closed_test(table, data)
    res = outcome.as_dict()
    res["rejected_names"] = [spec.names[i - 1] for i in res["rejected"]]
    json.dump(res, out, indent=2)
    out.write("\n")
    d = _out_dir(args, cfg)
    if d:
        _write_json(res, os.path.join(d, "outcome.json"))
    return EXIT_OK


def _grid(lo, hi, step):
    if step <= 0 or lo > hi:
        raise ConfigError("sweep range needs p-min <= p-max and a positive step")
    n = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return [round(lo + i * step, 10) for i in range(n)]


def cmd_sweep(args, out):
    cfg = load_config(args.config)
    sw = cfg.get("sweep", {})
    lo = args.p_min if args.p_min is not None else sw.get("p_min", 0.3)
    hi = args.p_max if args.p_max is not None else sw.get("p_max", 0.8)
    step = args.p_step if args.p_step is not None else sw.get("p_step", 0.1)
    effect = sw.get("subgroup_effect", cfg["endpoint"].get("subgroup_effect", 0.15))
    if len(cfg["populations"]) != 2:
        raise ConfigError("field populations: the sweep needs exactly a subgroup and the overall population")
    if cfg["endpoint"]["type"] != "normal":
        cfg = dict(cfg, endpoint={"type": "normal", "subgroup_effect": effect})
    spec = spec_from_config(cfg, args.algorithm)
    rows = prevalence_sweep(spec, _grid(lo, hi, step), effect=effect, n_jobs=args.threads)
    d = _out_dir(args, cfg)
    text = write_csv(rows, SWEEP_COLUMNS, os.path.join(d, "sweep.csv") if d else None)
    out.write(text)
    return EXIT_OK


def _scenario_drift(name, spec, info):
    n = info.n
    if spec.endpoint == "survival":
        theta = np.array([log_rank_scale(h, spec.randomization_ratio, spec.event_model) for h in spec.hazard_ratios])
    else:
        theta = np.asarray(spec.effects, dtype=float)
    alt = np.sqrt(n) * theta[:, None]
    if name == "null":
        return np.zeros_like(alt)
    if name == "alternative":
        return alt
    if name.startswith("null:"):
        try:
            idx = [int(x) - 1 for x in name[5:].split(",")]
        except ValueError:
            raise ConfigError(f"scenario {name!r}: expected null:<population list>") from None
        if any(not 0 <= i < len(theta) for i in idx):
            raise ConfigError(f"scenario {name!r}: population out of range")
        alt[idx] = 0.0
        return alt
    raise ConfigError(f"unknown scenario {name!r}; use null, alternative or null:<populations>")


def cmd_simulate(args, out):
    cfg = load_config(args.config)
    spec = spec_from_config(cfg, args.algorithm)
    info = _planned_information(cfg, spec)
    sim = cfg.get("simulation", {})
    reps = args.reps or sim.get("reps", 100_000)
    seed = args.seed if args.seed is not None else cfg.get("seed", 0)
    threads = args.threads or sim.get("threads", 1)
    scenario = args.scenario or sim.get("scenario", "null")
    drift = _scenario_drift(scenario, spec, info)
    if int(reps) < MIN_REPS:
        raise ConfigError(f"--reps must be at least {MIN_REPS}")
    table = plan(info, spec.graph(), spec.spending, spec.alpha, algorithm=spec.algorithm, n_jobs=threads)
    config = SimConfig(table, drift, reps=reps, seed=seed, threads=threads)
    fw = estimate_fwer(config)
    pw = estimate_power(config)
    res = {
        "scenario": scenario,
        "algorithm": spec.algorithm,
        "reps": reps,
        "seed": seed,
        "true_nulls": [i + 1 for i in config.true_nulls],
        "fwer": float(fw.estimate),
        "fwer_se": float(fw.se),
        "rejection_rate": [float(x) for x in pw.estimate],
        "rejection_se": [float(x) for x in pw.se],
    }
    json.dump(res, out, indent=2)
    out.write("\n")
    d = _out_dir(args, cfg)
    if d:
        _write_json(res, os.path.join(d, "simulation.json"))
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="ccsgsd", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="design configuration (JSON)")
        p.add_argument("--out", help="output directory")
        p.add_argument("--algorithm", type=int, choices=(1, 2, 3))
        p.add_argument("--threads", type=int, default=None, help="worker threads")
        return p

    common(sub.add_parser("plan", help="plan bounds and compare with Bonferroni"))
    p = common(sub.add_parser("update", help="re-plan bounds from observed information"))
    p.add_argument("--data", required=True, help="analysis data (JSON)")
    p = common(sub.add_parser("test", help="closed test on observed statistics"))
    p.add_argument("--data", required=True, help="analysis data (JSON)")
    p = common(sub.add_parser("sweep", help="prevalence sweep (CSV)"))
    p.add_argument("--p-min", type=float)
    p.add_argument("--p-max", type=float)
    p.add_argument("--p-step", type=float)
    p = common(sub.add_parser("simulate", help="Monte Carlo error rate and power"))
    p.add_argument("--reps", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--scenario", help="null, alternative or null:<populations>")
    return parser


_COMMANDS = {
    "plan": cmd_plan,
    "update": cmd_update,
    "test": cmd_test,
    "sweep": cmd_sweep,
    "simulate": cmd_simulate,
}


def main(argv=None, out=None):
    out = sys.stdout if out is None else out
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return _COMMANDS[args.command](args, out)
    except (InputError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (NumericalError, CCSError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
