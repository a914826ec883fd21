"""Chi-square test-pattern analysis: detection statistics for faulty output
distributions, minimal test repetitions, pattern sweeps, and fault coverage.

The default sequential protocol draws one sample at a time from the faulty
distribution and records the first sample count at which the accumulated
chi-square statistic against the fault-free expectation crosses the
configured quantile; results average that first-rejection count over the
configured number of trials.  The alternative fixed-size protocol instead
searches for the smallest batch size whose rejection fraction over fresh
batches reaches a target power.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import chi2

from . import circuits
from .faults import FaultSpec, FaultUniverse
from .parallel import run_blocks

# Outcomes with expected probability below this are pooled into one
# catch-all bin; the pooled expectation is floored at the same value so an
# impossible observed outcome yields a huge finite statistic.
POOL_THRESHOLD = 1e-12

_CHUNK = 2048


MODES = ("sequential", "fixed_n")


@dataclass(frozen=True)
class ChiSquareConfig:
    """Detection threshold quantile, trial count, and per-trial sample cap.

    ``mode`` selects the repetition estimate: ``sequential`` averages the
    first sample count at which the running statistic rejects, while
    ``fixed_n`` searches for the smallest batch size whose rejection
    fraction over fresh batches reaches ``power``.
    """

    quantile: float = 0.99
    trials: int = 50
    cap: int = 100000
    mode: str = "sequential"
    power: float = 0.9

    def __post_init__(self):
        if not 0.0 < self.quantile < 1.0:
            raise ValueError("quantile must lie in (0, 1)")
        if self.trials < 1 or self.cap < 1:
            raise ValueError("trials and cap must be positive")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if not 0.0 < self.power < 1.0:
            raise ValueError("power must lie in (0, 1)")


@dataclass(frozen=True)
class TestOutcome:
    """Detection result for one (pattern, fault) pair.

    ``repetitions`` is the rounded-up mean of the first-rejection sample
    counts over the detected trials, or None when every trial exhausted the
    cap (the undetectable case).
    """

    __test__ = False  # keep pytest from collecting the Test- prefix

    pattern: int
    fault: FaultSpec | None
    repetitions: int | None
    detection_rate: float
    trials: int
    cap: int

    @property
    def undetectable(self) -> bool:
        return self.repetitions is None

    def repetitions_label(self) -> str:
        return "UNDETECTABLE" if self.undetectable else str(self.repetitions)


def _pooled(expected_probs: np.ndarray):
    """(retained mask, catch-all probability, effective dof)."""
    p = np.asarray(expected_probs, dtype=float)
    retained = p >= POOL_THRESHOLD
    if not retained.any():
        raise ValueError("all expected probabilities are below the pooling threshold")
    catch_p = float(p[~retained].sum())
    pooled = bool((~retained).any())
    dof = int(retained.sum()) - 1 + (1 if pooled else 0)
    return retained, catch_p, pooled, dof


def chi_square_dof(expected_probs) -> int:
    """Degrees of freedom after pooling: retained bins minus one, plus the
    catch-all bin when pooling occurred."""
    return _pooled(expected_probs)[3]


def chi_square_statistic(counts, expected_probs) -> float:
    """Pearson statistic of observed counts against expected probabilities."""
    n_obs = np.asarray(counts, dtype=float)
    p = np.asarray(expected_probs, dtype=float)
    if n_obs.shape != p.shape:
        raise ValueError(f"shape mismatch: {n_obs.shape} vs {p.shape}")
    retained, catch_p, pooled, _ = _pooled(p)
    total = float(n_obs.sum())
    mu = total * p[retained]
    stat = float((((n_obs[retained] - mu) ** 2) / mu).sum())
    if pooled:
        catch_n = float(n_obs[~retained].sum())
        mu_c = total * catch_p
        stat += (catch_n - mu_c) ** 2 / max(mu_c, total * POOL_THRESHOLD)
    return stat


def chi_square_quantile(p: float, dof: int) -> float:
    """Inverse CDF of the chi-square law."""
    if not 0.0 < p < 1.0:
        raise ValueError("quantile probability must lie in (0, 1)")
    if dof < 1:
        raise ValueError("dof must be at least 1")
    return float(chi2.ppf(p, dof))


def _check_distribution(p: np.ndarray, name: str) -> np.ndarray:
    arr = np.asarray(p, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-d")
    if np.any(arr < -1e-12):
        raise ValueError(f"{name} has negative entries")
    total = arr.sum()
    if abs(total - 1.0) > 1e-8:
        raise ValueError(f"{name} sums to {total}, not 1")
    return np.clip(arr, 0.0, None) / total


def _first_rejection(rng: np.random.Generator, p_faulty: np.ndarray,
                     bin_of: np.ndarray, p_eff: np.ndarray,
                     threshold: float, cap: int) -> int | None:
    """Sample count at the first statistic crossing, or None at the cap."""
    n_eff = len(p_eff)
    floor = np.maximum(p_eff, POOL_THRESHOLD)
    counts = np.zeros(n_eff)
    n = 0
    while n < cap:
        block = min(_CHUNK, cap - n)
        draws = rng.choice(len(p_faulty), size=block, p=p_faulty)
        onehot = np.zeros((block, n_eff))
        onehot[np.arange(block), bin_of[draws]] = 1.0
        cum = counts[None, :] + np.cumsum(onehot, axis=0)
        ns = (n + 1 + np.arange(block)).astype(float)
        mu = ns[:, None] * p_eff[None, :]
        stat = ((cum - mu) ** 2 / (ns[:, None] * floor[None, :])).sum(axis=1)
        hit = np.nonzero(stat > threshold)[0]
        if hit.size:
            return n + int(hit[0]) + 1
        counts = cum[-1]
        n += block
    return None


def min_repetitions(p_faulty, p_ideal, cfg: ChiSquareConfig = ChiSquareConfig(),
                    seed: int | np.random.SeedSequence = 0, *,
                    pattern: int = 0, fault: FaultSpec | None = None) -> TestOutcome:
    """Average first-rejection sample count of the sequential chi-square test."""
    pf = _check_distribution(p_faulty, "p_faulty")
    pi = _check_distribution(p_ideal, "p_ideal")
    if pf.shape != pi.shape:
        raise ValueError(f"shape mismatch: {pf.shape} vs {pi.shape}")
    retained, catch_p, pooled, dof = _pooled(pi)
    threshold = chi_square_quantile(cfg.quantile, dof)
    n_retained = int(retained.sum())
    bin_of = np.full(len(pi), n_retained)
    bin_of[retained] = np.arange(n_retained)
    p_eff = np.concatenate([pi[retained], [catch_p]]) if pooled else pi[retained]
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    firsts = [_first_rejection(np.random.default_rng(child), pf, bin_of, p_eff,
                               threshold, cfg.cap)
              for child in ss.spawn(cfg.trials)]
    detected = [f for f in firsts if f is not None]
    repetitions = math.ceil(sum(detected) / len(detected)) if detected else None
    return TestOutcome(pattern=pattern, fault=fault, repetitions=repetitions,
                       detection_rate=len(detected) / cfg.trials,
                       trials=cfg.trials, cap=cfg.cap)


def _rejection_fraction(rng: np.random.Generator, p_faulty: np.ndarray,
                        bin_of: np.ndarray, p_eff: np.ndarray,
                        threshold: float, n: int, trials: int) -> float:
    """Fraction of fresh size-n batches whose statistic rejects."""
    full = rng.multinomial(n, p_faulty, size=trials).astype(float)
    counts = np.zeros((trials, len(p_eff)))
    np.add.at(counts, (slice(None), bin_of), full)
    mu = n * p_eff
    stat = ((counts - mu) ** 2 / np.maximum(mu, n * POOL_THRESHOLD)).sum(axis=1)
    return float((stat > threshold).mean())


def fixed_n_repetitions(p_faulty, p_ideal, cfg: ChiSquareConfig = ChiSquareConfig(),
                        seed: int | np.random.SeedSequence = 0, *,
                        pattern: int = 0, fault: FaultSpec | None = None) -> TestOutcome:
    """Smallest batch size reaching the target rejection power.

    Doubles the candidate size until the rejection fraction over
    ``cfg.trials`` fresh batches meets ``cfg.power``, then bisects to the
    smallest adequate size.  The search path, and hence the stream of
    random draws, is deterministic for a fixed seed.
    """
    pf = _check_distribution(p_faulty, "p_faulty")
    pi = _check_distribution(p_ideal, "p_ideal")
    if pf.shape != pi.shape:
        raise ValueError(f"shape mismatch: {pf.shape} vs {pi.shape}")
    retained, catch_p, pooled, dof = _pooled(pi)
    threshold = chi_square_quantile(cfg.quantile, dof)
    n_retained = int(retained.sum())
    bin_of = np.full(len(pi), n_retained)
    bin_of[retained] = np.arange(n_retained)
    p_eff = np.concatenate([pi[retained], [catch_p]]) if pooled else pi[retained]
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    rng = np.random.default_rng(ss)

    def power_at(n: int) -> float:
        return _rejection_fraction(rng, pf, bin_of, p_eff, threshold, n, cfg.trials)

    n = 1
    power = power_at(n)
    while power < cfg.power and n < cfg.cap:
        n = min(2 * n, cfg.cap)
        power = power_at(n)
    if power < cfg.power:
        return TestOutcome(pattern=pattern, fault=fault, repetitions=None,
                           detection_rate=power, trials=cfg.trials, cap=cfg.cap)
    lo, hi, hi_power = n // 2, n, power
    while hi - lo > 1:
        mid = (lo + hi) // 2
        p_mid = power_at(mid)
        if p_mid >= cfg.power:
            hi, hi_power = mid, p_mid
        else:
            lo = mid
    return TestOutcome(pattern=pattern, fault=fault, repetitions=hi,
                       detection_rate=hi_power, trials=cfg.trials, cap=cfg.cap)


def _pattern_outcome(circuit: circuits.Circuit, fault: FaultSpec,
                     cache: circuits.CzChannelCache, cfg: ChiSquareConfig,
                     seed: int, fault_ordinal: int, pattern: int) -> TestOutcome:
    p_ideal = circuits.simulate_distribution(circuit, pattern)
    chan = cache.channel_map(circuit, fault)
    p_faulty = circuits.simulate_distribution(circuit, pattern, channels=chan)
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(fault_ordinal, pattern))
    estimator = fixed_n_repetitions if cfg.mode == "fixed_n" else min_repetitions
    return estimator(p_faulty, p_ideal, cfg, ss, pattern=pattern, fault=fault)


def sweep_patterns(circuit: circuits.Circuit, fault: FaultSpec,
                   cache: circuits.CzChannelCache,
                   cfg: ChiSquareConfig = ChiSquareConfig(), seed: int = 0,
                   workers: int = 1, fault_ordinal: int = 0) -> list[TestOutcome]:
    """One TestOutcome per computational-basis input pattern."""
    cache.channel(fault)
    tasks = [(circuit, fault, cache, cfg, seed, fault_ordinal, pattern)
             for pattern in range(circuit.dim)]
    return run_blocks(_pattern_outcome, tasks, workers)


def best_outcome(outcomes: list[TestOutcome]) -> TestOutcome:
    """Lowest-repetition detected outcome; ties resolve to the lower pattern."""
    return min(outcomes, key=lambda o: (o.undetectable,
                                        math.inf if o.undetectable else o.repetitions,
                                        o.pattern))


def fault_coverage(circuit: circuits.Circuit, universe: FaultUniverse,
                   patterns, budget: int, cache: circuits.CzChannelCache,
                   cfg: ChiSquareConfig = ChiSquareConfig(), seed: int = 0,
                   workers: int = 1) -> float:
    """Fraction of faults detectable within the budget by at least one pattern."""
    if not universe.faults:
        return 0.0
    patterns = list(patterns)
    if not patterns:
        return 0.0
    for f in universe.faults:
        cache.channel(f)
    tasks = [(circuit, fault, cache, cfg, seed, ordinal, pattern)
             for ordinal, fault in enumerate(universe.faults)
             for pattern in patterns]
    outcomes = run_blocks(_pattern_outcome, tasks, workers)
    covered = 0
    per_fault = len(patterns)
    for k in range(len(universe.faults)):
        chunk = outcomes[k * per_fault:(k + 1) * per_fault]
        if any(not o.undetectable and o.repetitions <= budget for o in chunk):
            covered += 1
    return covered / len(universe.faults)
