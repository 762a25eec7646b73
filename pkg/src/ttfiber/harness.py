"""Synthetic-data experiment harness: generation, noise, metrics, sweeps.

Per-trial randomness derives from ``numpy.random.SeedSequence`` keyed by
(sweep seed, snr index, rate index, trial index), so a sweep is fully
deterministic and appending SNR points or rates never reshuffles the
randomness of existing cells.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .completion import CompletionConfig, check_ranks, complete
from .errors import CompletionError
from .patterns import mask_apply, random_pattern, validate_pattern
from .tensor import TensorTrain, tt_to_dense


def random_tt(shape, ranks, seed):
    """Decomposition with standard-normal core entries; deterministic per seed."""
    ranks = check_ranks(shape, ranks)
    rng = np.random.default_rng(seed)
    cores = tuple(
        rng.standard_normal((ranks[n], size, ranks[n + 1]))
        for n, size in enumerate(shape)
    )
    return TensorTrain(cores)


def add_noise(t, snr_db, seed):
    """Add Gaussian noise scaled so the realized SNR equals ``snr_db`` exactly.

    SNR is 20*log10(|signal| / |noise|) in Frobenius norms; ``snr_db=inf``
    returns the tensor unchanged.
    """
    t = np.asarray(t, dtype=np.float64)
    if not np.isfinite(t).all():
        raise ValueError("input tensor must be finite")
    if math.isinf(snr_db) and snr_db > 0:
        return t.copy()
    signal = np.linalg.norm(t)
    if signal == 0.0:
        raise ValueError("cannot set an SNR against a zero tensor")
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(t.shape)
    noise *= signal * 10.0 ** (-snr_db / 20.0) / np.linalg.norm(noise)
    return t + noise


def relative_error(ref, est):
    """Frobenius-norm error of ``est`` against nonzero reference ``ref``."""
    ref = np.asarray(ref, dtype=np.float64)
    est = np.asarray(est, dtype=np.float64)
    if ref.shape != est.shape:
        raise ValueError(f"shape mismatch: {ref.shape} vs {est.shape}")
    denom = np.linalg.norm(ref)
    if denom == 0.0:
        raise ValueError("reference tensor is zero")
    return float(np.linalg.norm(ref - est) / denom)


@dataclass(frozen=True)
class ExperimentSpec:
    """One sweep: a grid of SNR levels and missing rates, ``trials`` runs each."""

    shape: tuple
    ranks_true: tuple
    ranks_fit: tuple
    snr_db: tuple
    missing_rate: tuple
    trials: int = 30
    seed: int = 0
    method: str = "intersection"
    combine: str = "none"

    def __post_init__(self):
        object.__setattr__(self, "shape", tuple(int(s) for s in self.shape))
        object.__setattr__(self, "ranks_true", check_ranks(self.shape, self.ranks_true))
        object.__setattr__(self, "ranks_fit", check_ranks(self.shape, self.ranks_fit))
        object.__setattr__(self, "snr_db", tuple(float(s) for s in self.snr_db))
        object.__setattr__(self, "missing_rate", tuple(float(r) for r in self.missing_rate))
        if self.trials < 1:
            raise ValueError("need at least one trial")
        if any(not 0 <= r < 1 for r in self.missing_rate):
            raise ValueError("missing rates must lie in [0, 1)")


@dataclass(frozen=True)
class TrialResult:
    snr_db: float
    missing_rate: float
    trial: int
    relative_error: float  # NaN when the trial failed
    wall_time_s: float
    valid_pattern: bool
    error: str = None


def trial_rngs(seed, snr_index, rate_index, trial):
    """Three independent generators (cores, noise, pattern) for one cell."""
    root = np.random.SeedSequence(entropy=seed, spawn_key=(snr_index, rate_index, trial))
    return tuple(np.random.default_rng(child) for child in root.spawn(3))


def run_sweep(spec):
    """Run every (snr, rate, trial) cell; failures are recorded, never raised.

    Wall time is measured around the completion call only.
    """
    results = []
    config = CompletionConfig(
        ranks=spec.ranks_fit,
        method=spec.method,
        combine=spec.combine,
        validate_first=False,
    )
    for si, snr in enumerate(spec.snr_db):
        for ri, rate in enumerate(spec.missing_rate):
            for trial in range(spec.trials):
                rng_cores, rng_noise, rng_pattern = trial_rngs(spec.seed, si, ri, trial)
                truth = tt_to_dense(random_tt(spec.shape, spec.ranks_true, rng_cores))
                noisy = add_noise(truth, snr, rng_noise)
                pattern = random_pattern(spec.shape[:-1], rate, rng_pattern)
                masked = mask_apply(noisy, pattern)
                valid = validate_pattern(pattern, spec.ranks_fit).overall_valid
                start = time.perf_counter()
                try:
                    tt_hat, _ = complete(masked, pattern, config)
                    wall = time.perf_counter() - start
                    err_value = relative_error(truth, tt_to_dense(tt_hat))
                    failure = None
                except CompletionError as exc:
                    wall = time.perf_counter() - start
                    err_value = math.nan
                    failure = f"{type(exc).__name__}: {exc}"
                results.append(
                    TrialResult(snr, rate, trial, err_value, wall, valid, failure)
                )
    return results


def median_errors(results):
    """Median relative error per (snr, rate) over clean trials.

    Trials that failed or ran on an invalid pattern are excluded from the
    median and counted separately.
    """
    cells = {}
    for r in results:
        cells.setdefault((r.snr_db, r.missing_rate), []).append(r)
    out = {}
    for key, trials in cells.items():
        good = [
            t.relative_error
            for t in trials
            if t.valid_pattern and math.isfinite(t.relative_error)
        ]
        out[key] = {
            "median_error": float(np.median(good)) if good else math.nan,
            "median_wall_time_s": float(
                np.median([t.wall_time_s for t in trials if t.error is None])
            ) if any(t.error is None for t in trials) else math.nan,
            "trials": len(trials),
            "used": len(good),
            "failed": sum(t.error is not None for t in trials),
            "invalid_patterns": sum(not t.valid_pattern for t in trials),
        }
    return out
