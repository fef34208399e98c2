"""Design calculations: drift, power, event counts and prevalence sweeps."""

from dataclasses import dataclass, field
import math
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq

from .closed_test import IntersectionBoundsTable, plan
from .correlation import InformationTable
from .exceptions import InputError, NestingError, NumericalError
from .graph import MultiplicityGraph
from .gs import GsBounds, bounds_from_spending, crossing_prob, drift_from_fractions
from .spending import SpendingSpec

__all__ = [
    "drift",
    "log_rank_scale",
    "population_power",
    "power_at_events",
    "required_drift",
    "required_events",
    "required_information",
    "hr_bound",
    "expected_events",
    "enrollment_for_events",
    "DesignSpec",
    "DesignReport",
    "design_report",
    "prevalence_sweep",
    "SWEEP_COLUMNS",
]

EVENT_MODELS = ("schoenfeld", "freedman")
_D_MIN, _D_MAX = 8, 10 ** 6
SWEEP_COLUMNS = ("p", "pop", "method", "nominal_alpha", "power", "n_required")


def log_rank_scale(hr, ratio=1.0, model="schoenfeld"):
    """Drift per square-root event for a log-rank test.

    Schoenfeld: ``-ln(HR) * sqrt(r) / (1 + r)``; Freedman:
    ``(1 - HR) / (1 + HR)`` (1:1 only).
    """
    hr = np.asarray(hr, dtype=float)
    if np.any(hr <= 0):
        raise InputError("hazard ratio must be positive")
    if model == "schoenfeld":
        return -np.log(hr) * math.sqrt(ratio) / (1 + ratio)
    if model == "freedman":
        if ratio != 1:
            raise InputError("the Freedman mapping is implemented for 1:1 randomization only")
        return (1 - hr) / (1 + hr)
    raise InputError(f"unknown event model {model!r}; expected one of {EVENT_MODELS}")


def drift(effect, information, kind="normal", ratio=1.0, model="schoenfeld"):
    """Expected Z value ``sqrt(n) * theta``.

    With ``kind="hr"`` the effect is a hazard ratio and ``information`` an
    event count; superiority requires ``HR < 1``.

    >>> round(float(drift(0.15, 100)), 6)
    1.5
    """
    n = np.asarray(information, dtype=float)
    if np.any(n <= 0):
        raise InputError("information must be positive")
    if kind == "normal":
        return np.sqrt(n) * effect
    if kind == "hr":
        if np.any(np.asarray(effect) >= 1):
            raise InputError(f"hazard ratio must be below 1 for a superiority design, got {effect}")
        return np.sqrt(n) * log_rank_scale(effect, ratio, model)
    raise InputError(f"unknown effect kind {kind!r}")


def population_power(bounds: GsBounds, final_drift):
    """Probability of crossing ``bounds`` at some analysis.

    The drift at analysis ``k`` is ``final_drift * sqrt(t_k)``.
    """
    return crossing_prob(bounds, drift_from_fractions(final_drift, bounds.timings)).total


def power_at_events(bounds: GsBounds, hr, events, ratio=1.0, model="schoenfeld"):
    return population_power(bounds, float(drift(hr, events, "hr", ratio, model)))


def required_drift(bounds: GsBounds, target=0.9):
    """Final-analysis drift giving ``target`` power."""
    if not 0.5 <= target < 0.9999:
        raise InputError(f"target power must lie in [0.5, 0.9999), got {target}")
    lo, hi = 0.0, 2.0
    while population_power(bounds, hi) < target:
        hi *= 2
        if hi > 100:
            raise NumericalError(f"power {target} is not attainable for these bounds")
    return brentq(lambda d: population_power(bounds, d) - target, lo, hi, xtol=1e-10)


def required_information(bounds: GsBounds, effect, target=0.9):
    """Continuous information ``n`` with ``sqrt(n) * effect`` giving ``target`` power."""
    if effect <= 0:
        raise InputError("effect must be positive")
    return (required_drift(bounds, target) / effect) ** 2


def required_events(bounds: GsBounds, hr, target=0.9, ratio=1.0, model="schoenfeld"):
    """Smallest integer event count with power at least ``target``.

    Integer bisection on ``[8, 10**6]``.
    """
    if not 0.5 <= target < 0.9999:
        raise InputError(f"target power must lie in [0.5, 0.9999), got {target}")

    def ok(d):
        return power_at_events(bounds, hr, d, ratio, model) >= target

    lo, hi = _D_MIN, _D_MAX
    if not ok(hi):
        raise NumericalError(f"power {target} needs more than {_D_MAX} events at HR {hr}")
    if ok(lo):
        return lo
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


def hr_bound(z, events, ratio=1.0):
    """Hazard ratio at the efficacy bound, ``exp(-z (1 + r) / sqrt(r d))``.

    >>> round(float(hr_bound(0.0, 100)), 12)
    1.0
    """
    d = np.asarray(events, dtype=float)
    if np.any(d <= 0):
        raise InputError("event count must be positive")
    return np.exp(-np.asarray(z, dtype=float) * (1 + ratio) / np.sqrt(ratio * d))


def _event_fraction(rate, dropout, time, accrual):
    """Mean probability of an observed event for uniform entry over ``[0, accrual]``."""
    time = np.asarray(time, dtype=float)
    h = rate + dropout
    share = rate / h
    follow_max = np.clip(time, 0.0, None)
    follow_min = np.clip(time - accrual, 0.0, None)
    if accrual <= 0:
        return share * -np.expm1(-h * follow_max)
    # integral of 1 - exp(-h f) over follow-up f in [follow_min, follow_max], over accrual
    integral = (follow_max - follow_min) - (np.exp(-h * follow_min) - np.exp(-h * follow_max)) / h
    return share * integral / accrual


def expected_events(enrollment, time, median, hr=1.0, dropout_annual=0.0, accrual=0.0, ratio=1.0):
    """Expected events by calendar ``time`` (months) under exponential models.

    Control hazard is ``ln 2 / median``; the experimental arm has hazard
    ``hr`` times that. Dropout is exponential with the given annual
    probability. Patients enter uniformly over ``[0, accrual]``.
    """
    if median <= 0 or hr <= 0 or enrollment < 0:
        raise InputError("median, hazard ratio and enrollment must be positive")
    if not 0 <= dropout_annual < 1:
        raise InputError("annual dropout must lie in [0, 1)")
    lam = math.log(2) / median
    eta = -math.log1p(-dropout_annual) / 12
    pc = 1 / (1 + ratio)
    frac = pc * _event_fraction(lam, eta, time, accrual) + (1 - pc) * _event_fraction(lam * hr, eta, time, accrual)
    return enrollment * frac


def enrollment_for_events(events, time, median, hr=1.0, dropout_annual=0.0, accrual=0.0, ratio=1.0):
    """Patients needed so ``expected_events`` reaches ``events`` by ``time``."""
    per_patient = expected_events(1.0, time, median, hr, dropout_annual, accrual, ratio)
    if per_patient <= 0:
        raise NumericalError("no events are expected by the given time")
    return int(math.ceil(events / per_patient - 1e-9))


@dataclass(frozen=True)
class DesignSpec:
    """Design inputs for nested populations (smallest first, overall last)."""

    prevalence: Tuple[float, ...]
    timings: Tuple[float, ...]
    weights: Tuple[float, ...]
    transitions: Tuple[Tuple[float, ...], ...]
    spending: Tuple[SpendingSpec, ...]
    alpha: float = 0.025
    endpoint: str = "survival"
    hazard_ratios: Optional[Tuple[float, ...]] = None
    effects: Optional[Tuple[float, ...]] = None
    control_median: Optional[float] = None
    dropout_rate: float = 0.0
    randomization_ratio: float = 1.0
    accrual_months: Optional[float] = None
    study_months: Optional[float] = None
    target_power: float = 0.9
    event_model: str = "schoenfeld"
    algorithm: int = 1
    names: Optional[Tuple[str, ...]] = None

    def __post_init__(self):
        p = tuple(float(x) for x in self.prevalence)
        if not p or abs(p[-1] - 1.0) > 1e-12:
            raise NestingError("the last population must be the overall population (prevalence 1)")
        if any(x <= 0 for x in p) or any(b <= a for a, b in zip(p, p[1:])):
            raise NestingError(f"prevalences must be positive and strictly increasing, got {list(p)}")
        object.__setattr__(self, "prevalence", p)
        object.__setattr__(self, "timings", tuple(float(x) for x in self.timings))
        m = len(p)
        if len(self.weights) != m:
            raise InputError(f"need {m} weights, got {len(self.weights)}")
        if not 0 < self.alpha < 0.5:
            raise InputError(f"alpha must lie in (0, 0.5), got {self.alpha}")
        specs = self.spending
        if isinstance(specs, SpendingSpec):
            specs = (specs,) * m
        if len(specs) != m:
            raise InputError(f"need {m} spending specifications, got {len(specs)}")
        object.__setattr__(self, "spending", tuple(specs))
        if self.endpoint not in ("survival", "normal"):
            raise InputError(f"endpoint must be 'survival' or 'normal', got {self.endpoint!r}")
        if self.endpoint == "survival":
            if self.hazard_ratios is None or len(self.hazard_ratios) != m:
                raise InputError(f"survival endpoint needs {m} hazard ratios")
            if any(not 0 < h < 1 for h in self.hazard_ratios):
                raise InputError(f"hazard ratios must lie in (0, 1), got {list(self.hazard_ratios)}")
        else:
            if self.effects is None or len(self.effects) != m:
                raise InputError(f"normal endpoint needs {m} effect sizes")
            if any(e <= 0 for e in self.effects):
                raise InputError("effect sizes must be positive")
        if not 0.5 <= self.target_power < 0.9999:
            raise InputError(f"target power must lie in [0.5, 0.9999), got {self.target_power}")
        if self.event_model not in EVENT_MODELS:
            raise InputError(f"event_model must be one of {EVENT_MODELS}")
        if self.algorithm not in (1, 2, 3):
            raise InputError(f"algorithm must be 1, 2 or 3, got {self.algorithm}")
        if self.names is None:
            names = tuple(f"population {i + 1}" for i in range(m - 1)) + ("overall",)
            object.__setattr__(self, "names", names)
        self.graph()

    @property
    def n_populations(self):
        return len(self.prevalence)

    def graph(self):
        return MultiplicityGraph(self.weights, self.transitions)

    def information(self, total=1.0):
        return InformationTable.planned(self.prevalence, self.timings, total)


@dataclass(frozen=True)
class DesignReport:
    """Bonferroni and CCS columns for each population.

    ``methods`` maps ``"bonferroni"`` and ``"ccs"`` to dictionaries with
    per-population ``bounds`` (populations x analyses), ``nominal_alpha``,
    ``power`` (at the Bonferroni requirement) and ``required`` (events or
    information), and, for survival designs, ``hr_bounds`` and ``patients``.
    """

    spec: DesignSpec
    table: IntersectionBoundsTable = field(repr=False)
    methods: dict = field(default_factory=dict)

    def ratio(self):
        """Requirement ratio CCS / Bonferroni per population."""
        b, c = self.methods["bonferroni"]["required"], self.methods["ccs"]["required"]
        return [ci / bi for ci, bi in zip(c, b)]

    def as_dict(self):
        def clean(v):
            if isinstance(v, np.ndarray):
                return clean(v.tolist())
            if isinstance(v, (list, tuple)):
                return [clean(x) for x in v]
            if isinstance(v, dict):
                return {k: clean(x) for k, x in v.items()}
            if isinstance(v, (np.floating, np.integer)):
                return v.item()
            return v

        return {
            "populations": list(self.spec.names),
            "prevalence": list(self.spec.prevalence),
            "timings": list(self.spec.timings),
            "alpha": self.spec.alpha,
            "algorithm": self.spec.algorithm,
            "endpoint": self.spec.endpoint,
            "methods": clean(self.methods),
            "requirement_ratio": clean(self.ratio()),
        }


def _bonferroni_bounds(spec: DesignSpec):
    w = spec.graph().subset_weights(tuple(range(spec.n_populations)))
    out = []
    for i in range(spec.n_populations):
        if w[i] <= 0:
            out.append(None)
        else:
            out.append(bounds_from_spending(spec.timings, spec.spending[i].with_level(w[i] * spec.alpha)))
    return out, [w[i] * spec.alpha for i in range(spec.n_populations)]


def _requirement(spec, i, bounds):
    if bounds is None:
        return math.inf
    if spec.endpoint == "survival":
        return required_events(bounds, spec.hazard_ratios[i], spec.target_power,
                               spec.randomization_ratio, spec.event_model)
    return required_information(bounds, spec.effects[i], spec.target_power)


def _power(spec, i, bounds, requirement):
    if bounds is None or not math.isfinite(requirement):
        return 0.0
    if spec.endpoint == "survival":
        return power_at_events(bounds, spec.hazard_ratios[i], requirement,
                               spec.randomization_ratio, spec.event_model)
    return population_power(bounds, math.sqrt(requirement) * spec.effects[i])


def design_report(spec: DesignSpec, table: Optional[IntersectionBoundsTable] = None, n_jobs=None):
    """Plan the CCS bounds and compare them with Bonferroni bounds."""
    if table is None:
        table = plan(spec.information(), spec.graph(), spec.spending, spec.alpha,
                     algorithm=spec.algorithm, n_jobs=n_jobs)
    m, t = spec.n_populations, spec.timings
    bonf, bonf_levels = _bonferroni_bounds(spec)
    full = table.full()
    ccs = []
    for i in range(m):
        row = full.row(i)
        ccs.append(GsBounds(t, row) if np.all(np.isfinite(row)) else None)
    methods = {}
    bonf_req = [_requirement(spec, i, bonf[i]) for i in range(m)]
    for name, bnds, levels in (("bonferroni", bonf, bonf_levels), ("ccs", ccs, list(full.levels))):
        req = [_requirement(spec, i, bnds[i]) for i in range(m)]
        entry = {
            "bounds": [list(b.bounds) if b is not None else [math.inf] * len(t) for b in bnds],
            "nominal_alpha": levels,
            "power": [_power(spec, i, bnds[i], bonf_req[i]) for i in range(m)],
            "required": req,
        }
        if spec.endpoint == "survival":
            overall = req[-1]
            entry["hr_bounds"] = [
                list(hr_bound(np.asarray(b), overall * np.asarray(t), spec.randomization_ratio))
                for b in entry["bounds"]
            ]
            if spec.control_median and spec.study_months:
                entry["patients"] = enrollment_for_events(
                    overall, spec.study_months, spec.control_median, spec.hazard_ratios[-1],
                    spec.dropout_rate, spec.accrual_months or 0.0, spec.randomization_ratio,
                )
        methods[name] = entry
    return DesignReport(spec, table, methods)


def _sweep_row(args):
    base, p, target, effect = args
    spec = DesignSpec(
        prevalence=(p, 1.0), timings=base.timings, weights=base.weights,
        transitions=base.transitions, spending=base.spending, alpha=base.alpha,
        endpoint="normal", effects=(effect, math.sqrt(p) * effect), target_power=target,
        algorithm=base.algorithm,
    )
    report = design_report(spec)
    rows = []
    prev = (p, 1.0)
    for i in range(2):
        for method in ("bonferroni", "ccs"):
            e = report.methods[method]
            rows.append({
                "p": p,
                "pop": i + 1,
                "method": method,
                "nominal_alpha": e["nominal_alpha"][i],
                "power": e["power"][i],
                # total enrollment so that population i gets prevalence * N
                "n_required": e["required"][i] / prev[i],
            })
    return rows


def prevalence_sweep(base: DesignSpec, grid: Sequence[float], effect=0.15, n_jobs=None):
    """Rows of (p, pop, method, nominal_alpha, power, n_required) over ``grid``.

    Two populations: a subgroup with prevalence ``p`` and effect ``effect``,
    and the overall population with effect ``sqrt(p) * effect``. Power is
    evaluated at the Bonferroni requirement, so the CCS column shows the gain
    at a fixed sample size. Rows are ordered by ``p``.
    """
    grid = [float(x) for x in grid]
    if any(not 0 < p < 1 for p in grid):
        raise InputError("sweep prevalences must lie in (0, 1)")
    items = [(base, p, base.target_power, effect) for p in sorted(grid)]
    if n_jobs and n_jobs != 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=None if n_jobs < 0 else n_jobs) as ex:
            chunks = list(ex.map(_sweep_row, items))
    else:
        chunks = [_sweep_row(x) for x in items]
    return [r for chunk in chunks for r in chunk]
