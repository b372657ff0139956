"""All-pairs rank comparisons: covariance assembly and randomization/MVN p-values."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import NumericError, ParameterError
from .moments import _cov_w_exact, _var_w_exact
from .randomization import (
    CHUNK_SIZE,
    PValue,
    TestResult,
    _mc_tail_counts,
    _reduce,
    _standardize,
    _tail_for,
    all_pairs,
    worker_count,
)
from .ranks import RankedSamples, TiePattern
from .statistics import mann_whitney_star, normalize_alternative

METHODS = ("monte_carlo", "mvn_sample")


@dataclass(frozen=True)
class PairwiseMoments:
    """Null moments of the C(K,2) pair statistics, pairs in lexicographic order.

    The first index of each pair plays the control role in its statistic.
    """

    sizes: tuple[int, ...]
    pairs: tuple[tuple[int, int], ...]
    mu: np.ndarray
    tau2: np.ndarray
    cov: np.ndarray

    @property
    def tau(self) -> np.ndarray:
        return np.sqrt(self.tau2)


def pairwise_moment_matrix(sizes: Sequence[int], tie: TiePattern) -> PairwiseMoments:
    """Covariance matrix of all pairwise statistics from the shared-sample identities.

    Pairs sharing their first or their second sample covary positively (three-sample
    covariance with the shared size first); mixed sharing flips the sign because
    reflecting a statistic (swapping its samples) negates it around the mean;
    disjoint pairs are uncorrelated.
    """
    sizes = tuple(int(n) for n in sizes)
    if len(sizes) < 2:
        raise ParameterError("all-pairs comparison needs at least two groups")
    if any(n < 1 for n in sizes):
        raise ParameterError("every group needs at least one observation")
    if sum(sizes) != tie.N:
        raise ParameterError(f"sizes sum to {sum(sizes)} but tie pattern has N = {tie.N}")
    pairs = all_pairs(len(sizes))
    n_pairs = len(pairs)
    mu = np.array([sizes[a] * sizes[b] / 2 for a, b in pairs])
    cov = np.zeros((n_pairs, n_pairs), dtype=float)
    for p, (a, b) in enumerate(pairs):
        cov[p, p] = float(_var_w_exact(sizes[a], sizes[b], tie))
        for q in range(p + 1, n_pairs):
            c, d = pairs[q]
            shared = {a, b} & {c, d}
            if not shared:
                continue
            s = shared.pop()
            others = [v for v in (a, b, c, d) if v != s]
            sign = 1.0 if (s == a) == (s == c) else -1.0
            val = float(_cov_w_exact(sizes[s], sizes[others[0]], sizes[others[1]], tie))
            cov[p, q] = cov[q, p] = sign * val
    return PairwiseMoments(sizes=sizes, pairs=pairs, mu=mu, tau2=np.diag(cov).copy(), cov=cov)


def _mvn_tail_counts(
    corr_root: np.ndarray, kind: str, threshold: float, tail: str, nsim: int, seed: int
) -> int:
    """Tail count from sampling the standardized joint normal, chunked like the MC engine."""
    n_chunks = -(-nsim // CHUNK_SIZE)
    seeds = np.random.SeedSequence(seed).spawn(n_chunks)

    def one_chunk(ci: int) -> int:
        b = min(CHUNK_SIZE, nsim - ci * CHUNK_SIZE)
        rng = np.random.default_rng(seeds[ci])
        z = rng.standard_normal((b, corr_root.shape[1])) @ corr_root.T
        stats = _reduce(kind, z)
        return int((stats <= threshold).sum() if tail == "le" else (stats >= threshold).sum())

    threads = worker_count()
    if threads == 1 or n_chunks == 1:
        return sum(one_chunk(ci) for ci in range(n_chunks))
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return sum(pool.map(one_chunk, range(n_chunks)))


def pairwise_test(
    samples: RankedSamples,
    alternative: str,
    method: str,
    nsim: int,
    seed: int,
    conservative: bool = False,
) -> TestResult:
    """Max/min/abs-max over all standardized pairwise statistics with a sampled p-value.

    ``monte_carlo`` re-splits the pooled midranks (exact conditional model);
    ``mvn_sample`` draws from the approximating joint normal instead.
    """
    alt = normalize_alternative(alternative)
    if method not in METHODS:
        raise ParameterError(f"method must be one of {METHODS}, got {method!r}")
    if nsim < 1:
        raise ParameterError("nsim must be >= 1")
    if samples.n_groups < 2:
        raise ParameterError("all-pairs comparison needs at least two groups")
    pm = pairwise_moment_matrix(samples.sizes, samples.tie_pattern)
    tau = pm.tau
    w = np.array(
        [
            mann_whitney_star(samples.group_midranks(a), samples.group_midranks(b))
            for a, b in pm.pairs
        ]
    )
    z = _standardize(w[None, :], pm.mu, tau)[0]
    kind, tail = _tail_for(alt)
    observed = float(_reduce(kind, z[None, :])[0])
    warnings: list[str] = []
    if (tau == 0).any():
        warnings.append("fully tied data: statistics are degenerate at 0")

    if method == "monte_carlo":
        counts = _mc_tail_counts(
            samples.tie_pattern,
            samples.sizes,
            pm.pairs,
            pm.mu,
            tau,
            kind,
            np.array([observed]),
            tail,
            nsim,
            seed,
        )
        hits = int(counts[0])
    else:
        scale = np.where(tau > 0, tau, 1.0)
        corr = pm.cov / np.outer(scale, scale)
        corr[tau == 0, :] = 0.0
        corr[:, tau == 0] = 0.0
        eigvals, eigvecs = np.linalg.eigh(corr)
        tol = 1e-9 * max(1.0, float(np.abs(eigvals).max(initial=1.0)))
        if eigvals.min() < -tol:
            raise NumericError(
                f"pairwise covariance is not positive semidefinite: min eigenvalue "
                f"{eigvals.min():.3e} (tolerance {-tol:.3e})"
            )
        root = eigvecs * np.sqrt(np.clip(eigvals, 0.0, None))
        hits = _mvn_tail_counts(root, kind, observed, tail, nsim, seed)

    estimate = (hits + 1) / (nsim + 1) if conservative else hits / nsim
    pval = PValue(
        estimate=estimate,
        method=method,
        nsim=nsim,
        std_error=math.sqrt(estimate * (1 - estimate) / nsim),
        seed=seed,
    )
    return TestResult(
        labels=tuple(f"{a + 1}-{b + 1}" for a, b in pm.pairs),
        w_star=w,
        standardized=z,
        statistic=kind,
        statistic_value=observed,
        alternative=alt,
        p_values={method: pval},
        warnings=tuple(warnings),
    )
