"""Direct simulation of the parking process, the solvers' independent oracle.

Each trial parks cars one by one: a car placed at offset T on a free stretch
of length x splits it into independent sub-stretches of lengths T and
x - 1 - T, and the placement law on each sub-stretch is the same truncated
exponential by self-similarity, so a trial is just a stack of stretch
lengths.  Saturation is reached when every gap holds at most one car length.

Reproducibility: trial i draws from a counter-based generator keyed by
(seed, i), so results are independent of execution order, and all moment
accumulation happens in exact integer arithmetic, so parallel runs are
bit-identical to serial ones.
"""

from __future__ import annotations

import math
import multiprocessing
import os
from dataclasses import dataclass

import numpy as np

from .core import DomainError, lower_count_bound, upper_count_bound

__all__ = [
    "SimConfig",
    "SimStats",
    "sample_truncated_exp",
    "saturation_count",
    "run_mc",
    "z_diagnostics",
]

THREADS_ENV_VAR = "PARKLAB_THREADS"
_MIN_TRIALS_PER_WORKER = 2000


@dataclass(frozen=True)
class SimConfig:
    lam: float
    length: float
    trials: int
    seed: int = 0

    def __post_init__(self) -> None:
        if not (isinstance(self.lam, (int, float)) and math.isfinite(self.lam) and self.lam > 0):
            raise DomainError(f"rate lam must be finite and > 0, got {self.lam!r}")
        if not (isinstance(self.length, (int, float)) and math.isfinite(self.length) and self.length > 0):
            raise DomainError(f"length must be finite and > 0, got {self.length!r}")
        if not (isinstance(self.trials, int) and self.trials >= 1):
            raise DomainError(f"trials must be an integer >= 1, got {self.trials!r}")
        if not (isinstance(self.seed, int) and 0 <= self.seed < 2**64):
            raise DomainError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")


@dataclass(frozen=True)
class SimStats:
    """Summary of the simulated saturation counts.

    variance is the unbiased sample variance; skewness and excess_kurtosis
    are the standardized central sample moments (reported as 0.0 for
    degenerate, zero-variance counts).
    """

    trials: int
    mean: float
    variance: float
    stderr_mean: float
    skewness: float
    excess_kurtosis: float
    histogram: dict[int, int]

    def to_dict(self) -> dict:
        return {
            "trials": self.trials,
            "mean": self.mean,
            "variance": self.variance,
            "stderr_mean": self.stderr_mean,
            "skewness": self.skewness,
            "excess_kurtosis": self.excess_kurtosis,
            "histogram": {str(k): v for k, v in sorted(self.histogram.items())},
        }


def sample_truncated_exp(lam: float, support_len: float, u: float) -> float:
    """Inverse-CDF draw from the truncated exponential on [0, support_len).

    u = 0 maps to 0; the expm1/log1p forms keep the map accurate down to
    vanishing rates, where it degrades gracefully to u*support_len.
    """
    if not (support_len > 0.0):
        raise DomainError(f"support_len must be > 0, got {support_len!r}")
    return -math.log1p(u * math.expm1(-lam * support_len)) / lam


def saturation_count(lam: float, length: float, rng: np.random.Generator) -> int:
    """Cars parked at saturation on a stretch of the given length.

    Iterative work stack, no recursion depth limit; a gap admits a car only
    if strictly longer than 1.
    """
    if length <= 1.0:
        return 0
    expm1, log1p = math.expm1, math.log1p
    buf = rng.random(max(8, int(0.9 * length)))
    size = buf.shape[0]
    idx = 0
    count = 0
    stack = [length]
    pop = stack.pop
    push = stack.append
    while stack:
        free = pop() - 1.0
        if idx == size:
            buf = rng.random(size)
            idx = 0
        t = -log1p(buf[idx] * expm1(-lam * free)) / lam
        idx += 1
        count += 1
        if t > 1.0:
            push(t)
        rest = free - t
        if rest > 1.0:
            push(rest)
    return count


def _trial_rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=np.array([seed, trial], dtype=np.uint64)))


def _simulate_chunk(args: tuple[float, float, int, int, int]) -> tuple[int, int, int, int, dict[int, int]]:
    lam, length, seed, start, stop = args
    s1 = s2 = s3 = s4 = 0
    hist: dict[int, int] = {}
    for trial in range(start, stop):
        c = saturation_count(lam, length, _trial_rng(seed, trial))
        c2 = c * c
        s1 += c
        s2 += c2
        s3 += c2 * c
        s4 += c2 * c2
        hist[c] = hist.get(c, 0) + 1
    return s1, s2, s3, s4, hist


def _resolve_workers(threads: int | None, trials: int) -> int:
    if threads is None:
        raw = os.environ.get(THREADS_ENV_VAR, "0")
        try:
            threads = int(raw)
        except ValueError:
            raise DomainError(f"{THREADS_ENV_VAR} must be an integer, got {raw!r}")
    if threads < 0:
        raise DomainError(f"thread count must be >= 0, got {threads}")
    if threads == 0:
        threads = os.cpu_count() or 1
    return max(1, min(threads, trials // _MIN_TRIALS_PER_WORKER or 1))


def run_mc(config: SimConfig, threads: int | None = None) -> SimStats:
    """Simulate config.trials independent saturations and summarize them.

    threads: worker processes; None reads PARKLAB_THREADS, 0 means one per
    CPU.  The summary is bit-identical for any worker count because each
    trial's stream depends only on (seed, trial index) and the reduction is
    exact integer arithmetic.
    """
    workers = _resolve_workers(threads, config.trials)
    edges = np.linspace(0, config.trials, 4 * workers + 1).astype(int) if workers > 1 \
        else np.array([0, config.trials])
    jobs = [(config.lam, config.length, config.seed, int(a), int(b))
            for a, b in zip(edges[:-1], edges[1:]) if a < b]
    if workers == 1:
        parts = [_simulate_chunk(j) for j in jobs]
    else:
        with multiprocessing.Pool(processes=workers) as pool:
            parts = pool.map(_simulate_chunk, jobs)

    s1 = s2 = s3 = s4 = 0
    hist: dict[int, int] = {}
    for p1, p2, p3, p4, ph in parts:
        s1 += p1
        s2 += p2
        s3 += p3
        s4 += p4
        for k, v in ph.items():
            hist[k] = hist.get(k, 0) + v

    n = config.trials
    lo, hi = lower_count_bound(config.length), upper_count_bound(config.length)
    if hist and (min(hist) < lo or max(hist) > hi):
        raise RuntimeError(
            f"simulated count escaped the certified range [{lo}, {hi}]: "
            f"observed [{min(hist)}, {max(hist)}]")

    mean = s1 / n
    # exact integer numerators of the central power sums
    num2 = n * s2 - s1 * s1
    num3 = n * n * s3 - 3 * n * s1 * s2 + 2 * s1**3
    num4 = n**3 * s4 - 4 * n * n * s1 * s3 + 6 * n * s1 * s1 * s2 - 3 * s1**4
    variance = num2 / (n * (n - 1)) if n > 1 else 0.0
    m2 = num2 / n**2
    if m2 > 0.0:
        skew = (num3 / n**3) / m2**1.5
        exkurt = (num4 / n**4) / m2**2 - 3.0
    else:
        skew = 0.0
        exkurt = 0.0
    return SimStats(
        trials=n,
        mean=mean,
        variance=variance,
        stderr_mean=math.sqrt(variance / n),
        skewness=skew,
        excess_kurtosis=exkurt,
        histogram=hist,
    )


def z_diagnostics(
    config: SimConfig,
    mean_ref: float,
    var_ref: float,
    threads: int | None = None,
) -> tuple[float, float]:
    """Skewness and excess kurtosis of (count - mean_ref)/sqrt(var_ref).

    Standardizing against external references (solver values, or the sample
    moments themselves) makes this a direct check of asymptotic normality.
    """
    if not (var_ref > 0.0):
        raise DomainError(f"var_ref must be > 0, got {var_ref!r}")
    stats = run_mc(config, threads=threads)
    scale = math.sqrt(var_ref)
    z3 = z4 = 0.0
    for k, freq in sorted(stats.histogram.items()):
        z = (k - mean_ref) / scale
        z3 += freq * z**3
        z4 += freq * z**4
    n = config.trials
    return z3 / n, z4 / n - 3.0
