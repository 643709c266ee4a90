"""Nonparametric (row-resampling) percentile bootstrap for effect estimates."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .core import (BasisSpec, EffectContrast, EffectEstimate, MediationError,
                   ObservationTable)
from .effects import effect_table
from .estimation import fit_proposed

log = logging.getLogger(__name__)

MAX_DISCARD_FRACTION = 0.10


class BootstrapError(MediationError):
    pass


@dataclass(frozen=True)
class BootstrapConfig:
    replicates: int = 1000
    level: float = 0.95
    seed: int = 0

    def __post_init__(self):
        if int(self.replicates) < 2:
            raise BootstrapError("bootstrap needs at least 2 replicates")
        if not 0.0 < float(self.level) < 1.0:
            raise BootstrapError("interval level must lie in (0, 1)")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise BootstrapError("seed must be a 64-bit unsigned integer")

    def to_dict(self) -> dict:
        return {"replicates": int(self.replicates), "level": float(self.level), "seed": int(self.seed)}


def replicate_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for replicate ``index`` of a run seeded by
    ``seed``; the same pair always yields the same stream regardless of
    execution order."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))


def percentile_interval(samples, level: float) -> tuple[float, float]:
    """Equal-tailed percentile interval, linearly interpolating at zero-based
    position ``p * (B - 1)`` of the sorted samples."""
    samples = np.asarray(samples, dtype=float)
    if samples.size == 0:
        raise BootstrapError("no bootstrap samples")
    tail = (1.0 - level) / 2.0
    lo, hi = np.quantile(samples, [tail, 1.0 - tail], method="linear")
    return float(lo), float(hi)


@dataclass(frozen=True, eq=False)
class BootstrapDraws:
    """Replicate effect values, shape ``(B_ok, n_contrasts, 3)`` in
    replicate-index order, plus the count of discarded replicates."""

    values: np.ndarray
    replicates: int
    discarded: int


def bootstrap_draws(spec: BasisSpec, data: ObservationTable, contrasts: Sequence[EffectContrast],
                    cfg: BootstrapConfig, workers: Optional[int] = None,
                    fit: Callable = fit_proposed) -> BootstrapDraws:
    n = data.n

    def one(b: int):
        idx = replicate_rng(cfg.seed, b).integers(0, n, size=n)
        sample = data.take(idx)
        try:
            est = effect_table(fit(spec, sample), sample, contrasts)
        except MediationError as exc:
            log.debug("bootstrap replicate %d discarded: %s", b, exc)
            return b, None
        return b, [e.values() for e in est]

    B = int(cfg.replicates)
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, range(B)))
    else:
        results = [one(b) for b in range(B)]
    results.sort(key=lambda r: r[0])
    ok = [r[1] for r in results if r[1] is not None]
    discarded = B - len(ok)
    if discarded > MAX_DISCARD_FRACTION * B:
        raise BootstrapError(
            f"{discarded} of {B} bootstrap replicates failed to fit (limit {MAX_DISCARD_FRACTION:.0%}); "
            "the design is too close to rank deficient for resampling")
    values = np.array(ok, dtype=float).reshape(len(ok), len(contrasts), 3)
    return BootstrapDraws(values, B, discarded)


def attach_intervals(point: Sequence[EffectEstimate], draws: BootstrapDraws,
                     level: float) -> list[EffectEstimate]:
    out = []
    for k, est in enumerate(point):
        cis = [percentile_interval(draws.values[:, k, e], level) for e in range(3)]
        out.append(EffectEstimate(est.contrast, est.nde, est.nie, est.te, float(level), *cis))
    return out


def bootstrap_effects(spec: BasisSpec, data: ObservationTable, contrasts: Sequence[EffectContrast],
                      cfg: BootstrapConfig, workers: Optional[int] = None) -> list[EffectEstimate]:
    """Point estimates from the original data with percentile intervals from
    ``cfg.replicates`` row-resampled refits.

    Replicates whose refit fails are discarded; more than 10% discarded is
    an error. Results do not depend on ``workers``.
    """
    point = effect_table(fit_proposed(spec, data), data, contrasts)
    draws = bootstrap_draws(spec, data, contrasts, cfg, workers)
    return attach_intervals(point, draws, cfg.level)
