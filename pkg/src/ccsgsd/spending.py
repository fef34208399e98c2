"""Alpha-spending function families."""

from dataclasses import dataclass, replace
import math
from typing import Optional

import numpy as np
from scipy.special import ndtr, ndtri

from .exceptions import InputError

__all__ = ["SpendingSpec", "spend", "FAMILIES"]

_ALIASES = {
    "ldof": "ldof",
    "obf": "ldof",
    "landemets-obf": "ldof",
    "lan-demets-obf": "ldof",
    "ldpocock": "ldpocock",
    "pocock": "ldpocock",
    "landemets-pocock": "ldpocock",
    "lan-demets-pocock": "ldpocock",
    "hsd": "hsd",
    "hwangshihdecani": "hsd",
    "hwang-shih-decani": "hsd",
    "kd": "kd",
    "power": "kd",
    "kimdemets-power": "kd",
    "kim-demets": "kd",
}

FAMILIES = ("ldof", "ldpocock", "hsd", "kd")


@dataclass(frozen=True)
class SpendingSpec:
    """A spending function family with its total one-sided level.

    ``family`` is one of ``ldof`` (Lan-DeMets O'Brien-Fleming), ``ldpocock``,
    ``hsd`` (Hwang-Shih-DeCani, ``parameter`` = gamma, nonzero) or ``kd``
    (Kim-DeMets power, ``parameter`` = rho > 0). Common spellings such as
    ``"LanDeMets-OBF"`` are accepted.
    """

    family: str = "ldof"
    level: float = 0.025
    parameter: Optional[float] = None

    def __post_init__(self):
        key = str(self.family).strip().lower().replace("_", "-").replace(" ", "")
        fam = _ALIASES.get(key) or _ALIASES.get(key.replace("-", ""))
        if fam is None:
            raise InputError(f"unknown spending family {self.family!r}")
        object.__setattr__(self, "family", fam)
        if not (0 < self.level < 1):
            raise InputError(f"spending level must lie in (0, 1), got {self.level}")
        if fam == "hsd":
            gamma = -4.0 if self.parameter is None else float(self.parameter)
            if gamma == 0:
                raise InputError("Hwang-Shih-DeCani gamma must be nonzero")
            object.__setattr__(self, "parameter", gamma)
        elif fam == "kd":
            rho = 3.0 if self.parameter is None else float(self.parameter)
            if not rho > 0:
                raise InputError("Kim-DeMets rho must be positive")
            object.__setattr__(self, "parameter", rho)
        elif self.parameter is not None:
            raise InputError(f"spending family {fam!r} takes no parameter")

    def with_level(self, level):
        return replace(self, level=level)

    def __call__(self, t):
        return spend(t, self)


def _fraction(t, family, level, parameter):
    if family == "ldof":
        # upper tail via ndtr(-x) keeps early spending from rounding to zero
        with np.errstate(divide="ignore"):
            return 2 * ndtr(ndtri(level / 2) / np.sqrt(t)) / level
    if family == "ldpocock":
        return np.log1p((math.e - 1) * t)
    if family == "hsd":
        return -np.expm1(-parameter * t) / -math.expm1(-parameter)
    return t ** parameter


def spend(t, spec: SpendingSpec):
    """Cumulative alpha spent by information fraction ``t``.

    Zero at ``t = 0`` and exactly ``spec.level`` for ``t >= 1``.
    """
    arr = np.asarray(t, dtype=float)
    if np.any(np.isnan(arr)) or np.any(arr < 0):
        raise InputError(f"information fraction must be nonnegative, got {t!r}")
    inner = np.clip(arr, 0.0, 1.0)
    out = np.where(
        arr >= 1,
        1.0,
        np.where(inner > 0, _fraction(np.where(inner > 0, inner, 1.0), spec.family, spec.level, spec.parameter), 0.0),
    ) * spec.level
    out = np.where(arr >= 1, spec.level, out)
    return float(out) if out.ndim == 0 else out
