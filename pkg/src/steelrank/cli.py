"""Command-line front end: data ingestion, method selection, JSON/text reports,
and the approximation-quality harness."""
from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import sys
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from .confidence import ConfidenceResult, simultaneous_bounds, simultaneous_intervals
from .errors import BudgetError, NumericError, ParameterError
from .gauss import (
    DEFAULT_NODES,
    FactorModel,
    tail_prob_abs_multi,
    tail_prob_max_multi,
    tail_prob_min_multi,
)
from .moments import MomentSet, factor_decomposition
from .pairwise import pairwise_moment_matrix, pairwise_test
from .randomization import (
    DEFAULT_BUDGET,
    PValue,
    _mc_tail_counts,
    control_pairs,
    exact_p_value,
    simulate_p_value,
    split_count,
)
from .ranks import RankedSamples, TiePattern, check_asymptotic_conditions, rank_samples
from .statistics import SteelObservation, normalize_alternative, rank_sums, steel_statistics

SCHEMA_VERSION = 1
MODES = ("steel", "pairwise", "confidence", "quality_harness")
FORMATS = ("csv_long", "csv_wide", "whitespace")
METHODS = ("asymptotic", "simulated", "exact", "all")
HARNESS_P_GRID = (0.20, 0.15, 0.10, 0.05, 0.025, 0.01)


@dataclass(frozen=True)
class RunConfig:
    input: str
    format: str = "csv_long"
    control: str | None = None
    alternative: str = "two_sided"
    method: str = "all"
    nsim: int = 100_000
    seed: int = 0
    conf_level: float = 0.95
    rounding_eps: float = 0.0
    mode: str = "steel"
    nodes: int = DEFAULT_NODES
    output: str = "json"
    epsilon: float = 0.1
    pre_round: int | None = None
    exact_budget: int = DEFAULT_BUDGET
    continuity: bool = False
    conservative_mc: bool = False


def _validate(cfg: RunConfig) -> RunConfig:
    if cfg.mode not in MODES:
        raise ParameterError(f"mode must be one of {MODES}, got {cfg.mode!r}")
    if cfg.format not in FORMATS:
        raise ParameterError(f"format must be one of {FORMATS}, got {cfg.format!r}")
    if cfg.method not in METHODS:
        raise ParameterError(f"method must be one of {METHODS}, got {cfg.method!r}")
    if cfg.output not in ("json", "text"):
        raise ParameterError(f"output must be json or text, got {cfg.output!r}")
    if cfg.nsim < 1:
        raise ParameterError("nsim must be >= 1")
    if not 0 < cfg.conf_level < 1:
        raise ParameterError("conf-level must be in (0, 1)")
    if cfg.rounding_eps < 0:
        raise ParameterError("round-eps must be >= 0")
    return dataclasses.replace(cfg, alternative=normalize_alternative(cfg.alternative))


# ---------------------------------------------------------------------------
# input parsing


def _parse_float(text: str, line_no: int) -> float:
    try:
        return float(text)
    except ValueError:
        raise ParameterError(f"line {line_no}: cannot parse value {text!r}") from None


def read_groups(path: str, fmt: str) -> dict[str, list[float]]:
    """Ordered mapping of group label to values; raises with line numbers on bad input."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        text = fh.read()
    groups: dict[str, list[float]] = {}
    if fmt == "csv_long":
        rows = list(csv.reader(io.StringIO(text)))
        for line_no, row in enumerate(rows, start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise ParameterError(f"line {line_no}: expected two columns group,value")
            label, value = row[0].strip(), row[1].strip()
            if line_no == 1 and (label.lower(), value.lower()) == ("group", "value"):
                continue
            groups.setdefault(label, []).append(_parse_float(value, line_no))
    elif fmt == "csv_wide":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows:
            raise ParameterError("line 1: empty input")
        header = [c.strip() for c in rows[0]]
        if any(not h for h in header):
            raise ParameterError("line 1: every column needs a group label")
        for label in header:
            groups.setdefault(label, [])
        for line_no, row in enumerate(rows[1:], start=2):
            if all(not c.strip() for c in row):
                continue
            if len(row) > len(header):
                raise ParameterError(f"line {line_no}: more cells than header columns")
            for label, cell in zip(header, row):
                if cell.strip():
                    groups[label].append(_parse_float(cell.strip(), line_no))
    else:  # whitespace: each line is "label v1 v2 ..."; repeated labels concatenate
        for line_no, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            tokens = line.split()
            if len(tokens) < 2:
                raise ParameterError(f"line {line_no}: expected a label and at least one value")
            groups.setdefault(tokens[0], []).extend(
                _parse_float(t, line_no) for t in tokens[1:]
            )
    groups = {k: v for k, v in groups.items() if v}
    if len(groups) < 2:
        raise ParameterError("need at least two non-empty groups")
    return groups


def _ordered_groups(
    groups: dict[str, list[float]], control: str | None, mode: str
) -> tuple[list[str], list[list[float]]]:
    labels = list(groups)
    if mode in ("steel", "confidence"):
        ctrl = control if control is not None else labels[0]
        if ctrl not in groups:
            raise ParameterError(f"unknown group {ctrl!r}; available: {labels}")
        labels = [ctrl] + [g for g in labels if g != ctrl]
    return labels, [groups[g] for g in labels]


# ---------------------------------------------------------------------------
# report serialization


def _round_sig(x: float) -> float:
    if x == 0 or not np.isfinite(x):
        return float(x)
    return float(f"{x:.10g}")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        return _round_sig(float(obj))
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def render_json(report: dict) -> str:
    return json.dumps(_jsonable(report), sort_keys=True, indent=2) + "\n"


def render_text(report: dict) -> str:
    lines: list[str] = []

    def emit(prefix: str, obj) -> None:
        if isinstance(obj, dict):
            for k in sorted(obj):
                emit(f"{prefix}{k}.", obj[k])
        elif isinstance(obj, list) and obj and isinstance(obj[0], dict):
            for i, row in enumerate(obj):
                emit(f"{prefix}{i}.", row)
        else:
            lines.append(f"{prefix[:-1]}: {obj}")

    report = _jsonable(report)
    harness = report.pop("harness", None)
    emit("", report)
    out = "\n".join(lines) + "\n"
    if harness:
        cols = harness["columns"]
        rows = harness["rows"]
        out += ",".join(cols) + "\n"
        for row in rows:
            out += ",".join(repr(_round_sig(row[c])) for c in cols) + "\n"
    return out


def _pvalue_dict(pv: PValue) -> dict:
    out = {"estimate": pv.estimate, "method": pv.method}
    if pv.nsim is not None:
        out.update(nsim=pv.nsim, std_error=pv.std_error, seed=pv.seed)
    return out


def _moments_dict(ms: MomentSet) -> dict:
    return {
        "mu": ms.mu,
        "tau": ms.tau,
        "tau2": ms.tau2,
        "sigma0_2": ms.sigma0_2,
        "sigma2": ms.sigma2,
        "correction_ratio": ms.correction_ratio,
    }


def _observation_dict(obs: SteelObservation, sizes: Sequence[int]) -> dict:
    return {
        "w_star": obs.w_star,
        "rank_sums": rank_sums(obs.w_star, list(sizes[1:])),
        "standardized": obs.standardized,
        "s_max": obs.s_max,
        "s_min": obs.s_min,
        "s_abs": obs.s_abs,
        "alternative": obs.alternative,
        "statistic": obs.statistic,
        "statistic_value": obs.statistic_value,
        "degenerate": list(obs.degenerate),
    }


def _confidence_dict(cr: ConfidenceResult) -> dict:
    return {
        "direction": cr.direction,
        "nominal_gamma": cr.nominal_gamma,
        "one_sided_gamma": cr.one_sided_gamma,
        "lower": list(cr.lower),
        "upper": list(cr.upper),
        "j_lower": list(cr.j_lower) if cr.j_lower else None,
        "j_upper": list(cr.j_upper) if cr.j_upper else None,
        "achieved_conservative": cr.achieved_conservative,
        "achieved_closest": cr.achieved_closest,
        "unreachable": cr.unreachable,
        "widened_by": cr.widened_by,
        "warnings": list(cr.warnings),
    }


# ---------------------------------------------------------------------------
# analysis paths


def _asymptotic_p(
    model: FactorModel | None, obs: SteelObservation, continuity: bool, nodes: int
) -> tuple[PValue, list[str]]:
    if model is None:  # fully tied data: the statistics are constant
        return PValue(estimate=1.0, method="asymptotic"), [
            "degenerate data: asymptotic p-value set to 1"
        ]
    s = obs.statistic_value
    shift = 0.5 if continuity else 0.0
    if obs.alternative == "greater":
        u = (s * model.tau - shift) / model.tau
        p = tail_prob_max_multi(model, u, nodes)
    elif obs.alternative == "less":
        u = (s * model.tau + shift) / model.tau
        p = tail_prob_min_multi(model, u, nodes)
    else:
        u = np.maximum((s * model.tau - shift) / model.tau, 0.0)
        p = tail_prob_abs_multi(model, u, nodes)
    return PValue(estimate=p, method="asymptotic"), []


def _steel_section(cfg: RunConfig, samples: RankedSamples) -> dict:
    ms = factor_decomposition(samples.sizes, samples.tie_pattern)
    obs = steel_statistics(samples, ms, cfg.alternative)
    diag = check_asymptotic_conditions(samples, cfg.epsilon)
    degenerate = len(obs.degenerate) == samples.n_groups - 1
    model = None if degenerate else FactorModel.from_moments(ms)
    warnings = list(diag.warnings) + list(ms.warnings)

    p_values: dict[str, dict] = {}
    pv, extra = _asymptotic_p(model, obs, cfg.continuity, cfg.nodes)
    warnings += extra
    p_values["asymptotic"] = _pvalue_dict(pv)

    n_splits = split_count(samples.sizes)
    if cfg.method == "exact" or (cfg.method == "all" and n_splits <= cfg.exact_budget):
        p_values["exact"] = _pvalue_dict(exact_p_value(samples, obs, cfg.exact_budget))
    if cfg.method == "simulated" or (cfg.method == "all" and n_splits > cfg.exact_budget):
        p_values["monte_carlo"] = _pvalue_dict(
            simulate_p_value(samples, obs, cfg.nsim, cfg.seed, cfg.conservative_mc)
        )

    return {
        "diagnostics": {
            "max_tie_fraction": diag.max_tie_fraction,
            "min_group_fraction": diag.min_group_fraction,
            "epsilon": diag.epsilon,
            "small_sample_floor": diag.small_sample_floor,
        },
        "moments": _moments_dict(ms),
        "observation": _observation_dict(obs, samples.sizes),
        "p_values": p_values,
        "warnings": warnings,
    }


def _pairwise_section(cfg: RunConfig, samples: RankedSamples) -> dict:
    if cfg.method == "exact":
        raise ParameterError("pairwise mode supports methods: asymptotic (mvn), simulated, all")
    methods = []
    if cfg.method in ("simulated", "all"):
        methods.append("monte_carlo")
    if cfg.method in ("asymptotic", "all"):
        methods.append("mvn_sample")
    pm = pairwise_moment_matrix(samples.sizes, samples.tie_pattern)
    diag = check_asymptotic_conditions(samples, cfg.epsilon)
    p_values: dict[str, dict] = {}
    result = None
    for m in methods:
        result = pairwise_test(samples, cfg.alternative, m, cfg.nsim, cfg.seed, cfg.conservative_mc)
        p_values[m] = _pvalue_dict(result.p_values[m])
    return {
        "diagnostics": {
            "max_tie_fraction": diag.max_tie_fraction,
            "min_group_fraction": diag.min_group_fraction,
            "epsilon": diag.epsilon,
            "small_sample_floor": diag.small_sample_floor,
        },
        "pairwise": {
            "pairs": list(result.labels),
            "mu": pm.mu,
            "tau2": pm.tau2,
            "cov": pm.cov,
            "w_star": result.w_star,
            "standardized": result.standardized,
            "statistic": result.statistic,
            "statistic_value": result.statistic_value,
        },
        "p_values": p_values,
        "warnings": list(diag.warnings) + list(result.warnings),
    }


def quality_harness(
    groups: Sequence[Sequence[float]],
    alternative: str = "greater",
    p_grid: Sequence[float] = HARNESS_P_GRID,
    nsim: int = 100_000,
    seed: int = 0,
    nodes: int = DEFAULT_NODES,
) -> list[dict]:
    """Rows of (threshold, p_sim, p_asym_adj, p_asym_unadj) at the requested tail grid.

    Thresholds are standardized-statistic values where the tie-adjusted asymptotic
    tail equals each grid entry; one shared simulation run supplies p_sim.  The
    unadjusted column re-expresses the same raw event through the no-ties
    standardization, which is what ignoring ties would report; without ties the
    two asymptotic columns coincide.
    """
    alt = normalize_alternative(alternative)
    samples = rank_samples(groups)
    ms_adj = factor_decomposition(samples.sizes, samples.tie_pattern)
    ms_raw = factor_decomposition(samples.sizes, TiePattern.no_ties(samples.N))
    model_adj = FactorModel.from_moments(ms_adj)
    model_raw = FactorModel.from_moments(ms_raw)
    kind, tail = {
        "greater": ("s_max", "ge"),
        "less": ("s_min", "le"),
        "two_sided": ("s_abs", "ge"),
    }[alt]

    def asym(model: FactorModel, t: float, ratio: np.ndarray) -> float:
        u = t * ratio
        if alt == "greater":
            return tail_prob_max_multi(model, u, nodes)
        if alt == "less":
            return tail_prob_min_multi(model, u, nodes)
        return tail_prob_abs_multi(model, u, nodes)

    ones = np.ones(model_adj.K)
    # parameterize by v with threshold t = sgn*v so the solved map decreases in v
    sgn = -1.0 if tail == "le" else 1.0
    lo = 0.0 if alt == "two_sided" else -14.0
    thresholds = [
        sgn * brentq(lambda v: asym(model_adj, sgn * v, ones) - p, lo, 14.0, xtol=1e-12)
        for p in p_grid
    ]

    counts = _mc_tail_counts(
        samples.tie_pattern,
        samples.sizes,
        control_pairs(samples.n_groups),
        ms_adj.mu,
        ms_adj.tau,
        kind,
        np.asarray(thresholds),
        tail,
        nsim,
        seed,
    )
    ratio = ms_adj.tau / ms_raw.tau
    return [
        {
            "threshold": float(t),
            "p_sim": float(c / nsim),
            "p_asym_adj": asym(model_adj, t, ones),
            "p_asym_unadj": asym(model_raw, t, ratio),
        }
        for t, c in zip(thresholds, counts)
    ]


def _harness_section(cfg: RunConfig, arrays: list[list[float]]) -> dict:
    rows = quality_harness(
        arrays,
        alternative=cfg.alternative,
        nsim=cfg.nsim,
        seed=cfg.seed,
        nodes=cfg.nodes,
    )
    return {
        "harness": {
            "columns": ["threshold", "p_sim", "p_asym_adj", "p_asym_unadj"],
            "rows": rows,
        },
        "warnings": [],
    }


def run(cfg: RunConfig) -> dict:
    """Execute one analysis and return the report structure (deterministic per config)."""
    cfg = _validate(cfg)
    groups = read_groups(cfg.input, cfg.format)
    if cfg.pre_round is not None:
        groups = {k: [round(v, cfg.pre_round) for v in vals] for k, vals in groups.items()}
    labels, arrays = _ordered_groups(groups, cfg.control, cfg.mode)

    report: dict = {
        "schema_version": SCHEMA_VERSION,
        "config": dataclasses.asdict(cfg),
        "groups": {
            "labels": labels,
            "sizes": [len(a) for a in arrays],
            "control": labels[0] if cfg.mode in ("steel", "confidence") else None,
        },
    }
    if cfg.mode == "quality_harness":
        report.update(_harness_section(cfg, arrays))
        return report

    samples = rank_samples(arrays)
    if cfg.mode == "steel":
        report.update(_steel_section(cfg, samples))
    elif cfg.mode == "pairwise":
        report.update(_pairwise_section(cfg, samples))
    else:  # confidence: steel analysis plus the interval construction
        report.update(_steel_section(cfg, samples))
        direction = {"less": "upper", "greater": "lower"}.get(cfg.alternative)
        if direction is None:
            cr = simultaneous_intervals(arrays, cfg.conf_level, cfg.rounding_eps, cfg.nodes)
        else:
            cr = simultaneous_bounds(arrays, cfg.conf_level, direction, cfg.rounding_eps, cfg.nodes)
        report["confidence"] = _confidence_dict(cr)
        report["warnings"] = report["warnings"] + list(cr.warnings)
    return report


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="steelrank",
        description="Rank-based many-to-one and all-pairs comparisons with ties",
    )
    p.add_argument("--input", required=True, help="path to the data file")
    p.add_argument("--format", default="csv_long", choices=FORMATS)
    p.add_argument("--control", default=None, help="label of the control group")
    p.add_argument("--alternative", default="two-sided", choices=["greater", "less", "two-sided"])
    p.add_argument("--method", default="all", choices=METHODS)
    p.add_argument("--nsim", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--conf-level", type=float, default=0.95, dest="conf_level")
    p.add_argument("--round-eps", type=float, default=0.0, dest="rounding_eps")
    p.add_argument("--mode", default="steel", choices=MODES)
    p.add_argument("--nodes", type=int, default=DEFAULT_NODES)
    p.add_argument("--output", default="json", choices=["json", "text"])
    p.add_argument("--epsilon", type=float, default=0.1, help="tie-fraction tolerance for diagnostics")
    p.add_argument("--pre-round", type=int, default=None, dest="pre_round",
                   help="round inputs to this many decimals before ranking")
    p.add_argument("--exact-budget", type=int, default=DEFAULT_BUDGET, dest="exact_budget")
    p.add_argument("--continuity", action="store_true",
                   help="apply a half-unit continuity correction to asymptotic p-values")
    p.add_argument("--conservative-mc", action="store_true", dest="conservative_mc",
                   help="use the (hits+1)/(nsim+1) Monte Carlo p-value convention")
    p.add_argument("--out", default=None, help="write the report here instead of stdout")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    out_path = args.out
    fields = {f.name for f in dataclasses.fields(RunConfig)}
    cfg = RunConfig(**{k: v for k, v in vars(args).items() if k in fields})
    try:
        report = run(cfg)
    except (ParameterError, BudgetError, NumericError, OSError) as exc:
        err = {"error": {"type": type(exc).__name__, "message": str(exc)}}
        print(json.dumps(err, sort_keys=True), file=sys.stderr)
        return 2
    text = render_json(report) if cfg.output == "json" else render_text(report)
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
