"""Mann-Whitney statistics against a shared control and their standardized extremes."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ParameterError
from .moments import MomentSet
from .ranks import RankedSamples, _as_scores

ALTERNATIVES = ("greater", "less", "two_sided")

_STAT_FOR_ALTERNATIVE = {"greater": "s_max", "less": "s_min", "two_sided": "s_abs"}


def normalize_alternative(alternative: str) -> str:
    alt = str(alternative).replace("-", "_")
    if alt not in ALTERNATIVES:
        raise ParameterError(f"alternative must be one of {ALTERNATIVES}, got {alternative!r}")
    return alt


@dataclass(frozen=True)
class SteelObservation:
    """Observed Mann-Whitney values, their standardizations, and the three extremes.

    Treatments with zero null variance (fully tied data) get standardized value 0
    and are listed in ``degenerate``.
    """

    w_star: np.ndarray
    standardized: np.ndarray
    s_max: float
    s_min: float
    s_abs: float
    alternative: str
    degenerate: tuple[int, ...] = ()

    @property
    def statistic(self) -> str:
        return _STAT_FOR_ALTERNATIVE[self.alternative]

    @property
    def statistic_value(self) -> float:
        return {"s_max": self.s_max, "s_min": self.s_min, "s_abs": self.s_abs}[self.statistic]


def mann_whitney_star(control: Sequence[float], treatment: Sequence[float]) -> float:
    """Count of (control, treatment) pairs with control < treatment, plus half the ties.

    A half-integer in [0, n0*ni]; adding the value with samples swapped gives n0*ni.
    """
    x = np.sort(_as_scores(control))
    y = _as_scores(treatment)
    lo = np.searchsorted(x, y, side="left")
    hi = np.searchsorted(x, y, side="right")
    return float(lo.sum() + 0.5 * (hi - lo).sum())


def rank_sums(w_star: Sequence[float], treatment_sizes: Sequence[int]) -> np.ndarray:
    """Within-pair rank-sum form of the statistics: W* + n_i*(n_i+1)/2."""
    w = np.asarray(w_star, dtype=float)
    n = np.asarray(treatment_sizes, dtype=float)
    if w.shape != n.shape:
        raise ParameterError("w_star and treatment_sizes must have matching lengths")
    return w + n * (n + 1) / 2


def steel_statistics(
    samples: RankedSamples, moments: MomentSet, alternative: str = "two_sided"
) -> SteelObservation:
    """Standardize each treatment-vs-control statistic and take max/min/abs-max."""
    alt = normalize_alternative(alternative)
    if moments.sizes != samples.sizes:
        raise ParameterError("moments were computed for different group sizes")
    control = samples.group_midranks(0)
    w = np.array(
        [mann_whitney_star(control, samples.group_midranks(i)) for i in range(1, samples.n_groups)]
    )
    tau = moments.tau
    degenerate = tuple(int(i) for i in np.flatnonzero(tau == 0))
    z = np.zeros_like(w)
    ok = tau > 0
    z[ok] = (w[ok] - moments.mu[ok]) / tau[ok]
    return SteelObservation(
        w_star=w,
        standardized=z,
        s_max=float(z.max()),
        s_min=float(z.min()),
        s_abs=float(np.abs(z).max()),
        alternative=alt,
        degenerate=degenerate,
    )
