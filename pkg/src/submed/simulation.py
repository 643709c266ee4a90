"""Simulation studies 1 and 2: data generation, analytic truths and the
Monte-Carlo replication harness.

Both studies draw three treatments i.i.d. uniform on {1, 2, 3}, a latent
confounder U ~ N(0, 1) and independent N(0, 1) noises, with

    M = z1 + z2 + z3 + z1*z2 + z1*z3 + z2*z3 + U + e_M
    Y = z1 + z2 + z3 + M + z1*z2 + z1*z3 + 2U + e_Y      (study 1)
    Y = z1 + z2 + z3 + M + 2U + e_Y                      (study 2)

Random numbers come from numpy's PCG64 bit generator; normals use its
ziggurat sampler. Every replicate gets its own stream derived from
``SeedSequence([seed, study, n, replicate])``, so a report is a pure
function of ``(study, n, reps, seed)`` whatever the worker count.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np
from scipy import stats

from .core import (BasisSpec, BasisTerm, ConfigurationError, EffectContrast, FittedMediation,
                   MediationError, ObservationTable)
from .effects import effect_table
from .estimation import fit_proposed, fit_traditional

log = logging.getLogger(__name__)

STUDIES = (1, 2)
TREATMENTS = ("z1", "z2", "z3")
LEVELS = (1, 2, 3)
MEAN_LEVEL = 2.0
MAX_FAILURE_FRACTION = 0.05

MEDIATOR_TERMS = ("1", "z1", "z2", "z3", "z1*z2", "z1*z3", "z2*z3")
_TRUE_ALPHA = (0.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0)
# direct-path outcome coefficients on each study's outcome basis
_TRUE_GAMMA = {1: (0.0, 1.0, 1.0, 1.0, 1.0, 1.0), 2: (0.0, 1.0, 1.0, 1.0)}
_TRUE_BETA = 1.0
_CONFOUNDER_ON_Y = 2.0

ESTIMANDS = tuple((kind, j) for j in range(3) for kind in ("NDE", "NIE", "TE"))
METHODS = ("proposed", "traditional")


class ReplicationError(MediationError):
    pass


def _check_study(study: int) -> int:
    if study not in STUDIES:
        raise ConfigurationError(f"unknown study {study!r}; expected 1 or 2")
    return int(study)


def canonical_spec(study: int) -> BasisSpec:
    """Mediator basis with all pairwise products; outcome basis is its first
    six terms (study 1, instrument z2*z3) or first four (study 2, instruments
    the three products)."""
    L1 = 6 if _check_study(study) == 1 else 4
    return BasisSpec(tuple(BasisTerm.parse(t) for t in MEDIATOR_TERMS), L1)


def true_fit(study: int) -> FittedMediation:
    """Generating parameters packaged as a fit on the canonical basis."""
    spec = canonical_spec(study)
    alpha = np.array(_TRUE_ALPHA)
    gamma = np.array(_TRUE_GAMMA[study])
    delta = gamma + _TRUE_BETA * alpha[: spec.outcome_count]
    return FittedMediation(spec, alpha, _TRUE_BETA, delta, gamma, 0, TREATMENTS)


@dataclass(frozen=True)
class StudyDGP:
    """Generator settings. ``treatment_correlation`` > 0 switches to
    correlated treatments (a shared Gaussian factor cut at the normal
    tertiles, so each marginal stays uniform on {1, 2, 3}); the canonical
    studies use independent treatments."""

    study: int
    n: int
    seed: int = 0
    noiseless: bool = False
    treatment_correlation: float = 0.0

    def __post_init__(self):
        _check_study(self.study)
        if int(self.n) < 1:
            raise ConfigurationError("empty dataset requested: n must be >= 1")
        if not 0.0 <= self.treatment_correlation < 1.0:
            raise ConfigurationError("treatment_correlation must lie in [0, 1)")


def _treatments(rng: np.random.Generator, n: int, rho: float) -> np.ndarray:
    if rho == 0.0:
        return rng.integers(1, 4, size=(n, 3)).astype(float)
    factor = rng.standard_normal((n, 1))
    latent = np.sqrt(rho) * factor + np.sqrt(1.0 - rho) * rng.standard_normal((n, 3))
    cuts = stats.norm.ppf([1 / 3, 2 / 3])
    return 1.0 + np.searchsorted(cuts, latent).astype(float)


def generate_from_rng(rng: np.random.Generator, study: int, n: int, noiseless: bool = False,
                      treatment_correlation: float = 0.0) -> ObservationTable:
    Z = _treatments(rng, n, treatment_correlation)
    u, e_m, e_y = rng.standard_normal((3, n))
    if noiseless:
        u = e_m = e_y = np.zeros(n)
    z1, z2, z3 = Z.T
    m = z1 + z2 + z3 + z1 * z2 + z1 * z3 + z2 * z3 + u + e_m
    if study == 1:
        y = z1 + z2 + z3 + m + z1 * z2 + z1 * z3 + _CONFOUNDER_ON_Y * u + e_y
    else:
        y = z1 + z2 + z3 + m + _CONFOUNDER_ON_Y * u + e_y
    return ObservationTable(TREATMENTS, Z, m, y)


def generate_study_dataset(dgp: StudyDGP) -> ObservationTable:
    rng = np.random.default_rng(np.random.SeedSequence([int(dgp.seed), dgp.study, int(dgp.n)]))
    return generate_from_rng(rng, dgp.study, int(dgp.n), dgp.noiseless, dgp.treatment_correlation)


def true_effects(study: int, contrast: EffectContrast) -> tuple[float, float, float]:
    """Population (NDE, NIE, TE) for a contrast of z_j under the study DGP.

    Both true surfaces are multilinear in independent treatments, so
    averaging over the other treatments equals evaluating them at their
    mean level 2. Conditional contrasts evaluate at the given values.
    """
    fit = true_fit(_check_study(study))
    if contrast.treatment_index not in (0, 1, 2):
        raise ConfigurationError("study contrasts are over treatments z1, z2, z3")
    if contrast.is_conditional:
        est = effect_table(fit, None, [contrast])[0]
    else:
        others = tuple(MEAN_LEVEL for _ in range(2))
        c = EffectContrast(contrast.treatment_index, contrast.level_hi, contrast.level_lo, others)
        est = effect_table(fit, None, [c])[0]
    return est.nde, est.nie, est.te


def table_contrasts() -> list[EffectContrast]:
    return [EffectContrast(j, 2.0, 1.0) for j in range(3)]


def estimand_label(kind: str, j: int) -> str:
    return f"{kind}{j + 1}(2,1)"


@dataclass(frozen=True)
class ReplicationRow:
    estimand: str
    method: str
    truth: float
    mean: float
    bias: float
    se: float

    def to_dict(self) -> dict:
        return {"estimand": self.estimand, "method": self.method, "truth": self.truth,
                "mean": self.mean, "bias": self.bias, "se": self.se}


@dataclass(frozen=True, eq=False)
class ReplicationReport:
    """Bias and Monte-Carlo SE (standard deviation over replicates, ddof=1)
    for the nine (2,1) estimands under both methods.

    ``estimates`` has shape ``(R_ok, 2, 9)``: replicate x method x estimand,
    with estimands ordered NDE1, NIE1, TE1, NDE2, ... as in ``ESTIMANDS``.
    """

    study: int
    n: int
    reps: int
    seed: int
    failures: int
    rows: tuple[ReplicationRow, ...]
    estimates: Optional[np.ndarray] = None

    def row(self, estimand: str, method: str) -> ReplicationRow:
        for r in self.rows:
            if r.estimand == estimand and r.method == method:
                return r
        raise KeyError((estimand, method))

    def to_dict(self) -> dict:
        return {"study": self.study, "n": self.n, "reps": self.reps, "seed": self.seed,
                "failures": self.failures, "rows": [r.to_dict() for r in self.rows]}

    @classmethod
    def from_dict(cls, d: Mapping) -> "ReplicationReport":
        rows = tuple(ReplicationRow(**r) for r in d["rows"])
        return cls(d["study"], d["n"], d["reps"], d["seed"], d["failures"], rows)

    def format_table(self) -> str:
        header = ("estimand", "method", "truth", "bias", "SE")
        body = [(r.estimand, r.method, f"{r.truth:g}", f"{r.bias:.3f}", f"{r.se:.3f}") for r in self.rows]
        widths = [max(len(x[k]) for x in [header, *body]) for k in range(5)]
        title = f"Study {self.study}, n = {self.n}, {self.reps} replications ({self.failures} failed)"

        def fmt(cells):
            return "  ".join(c.ljust(w) if k < 2 else c.rjust(w) for k, (c, w) in enumerate(zip(cells, widths)))
        lines = [title, fmt(header), "  ".join("-" * w for w in widths)]
        lines += [fmt(b) for b in body]
        return "\n".join(lines) + "\n"


def _replicate(study: int, n: int, seed: int, r: int, spec: BasisSpec, contrasts):
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), study, int(n), int(r)]))
    data = generate_from_rng(rng, study, n)
    try:
        out = []
        for fitter in (fit_proposed, fit_traditional):
            est = effect_table(fitter(spec, data), data, contrasts)
            out.append([v for e in est for v in e.values()])
    except MediationError as exc:
        log.debug("replicate %d failed: %s", r, exc)
        return r, None
    return r, out


def run_replications(study: int, n: int, reps: int, seed: int = 0,
                     workers: Optional[int] = None) -> ReplicationReport:
    _check_study(study)
    if int(reps) < 2:
        raise ConfigurationError("at least 2 replications are needed for a standard error")
    if int(n) < 1:
        raise ConfigurationError("empty dataset requested: n must be >= 1")
    spec = canonical_spec(study)
    contrasts = table_contrasts()

    def job(r):
        return _replicate(study, n, seed, r, spec, contrasts)

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(job, range(reps)))
    else:
        results = [job(r) for r in range(reps)]
    results.sort(key=lambda t: t[0])
    ok = [v for _, v in results if v is not None]
    failures = reps - len(ok)
    if failures > MAX_FAILURE_FRACTION * reps or len(ok) < 2:
        raise ReplicationError(f"{failures} of {reps} replicates failed to fit (limit {MAX_FAILURE_FRACTION:.0%})")
    est = np.array(ok)  # (R_ok, method, estimand)
    truths = [true_effects(study, c) for c in contrasts]
    rows = []
    for e, (kind, j) in enumerate(ESTIMANDS):
        truth = truths[j][("NDE", "NIE", "TE").index(kind)]
        for k, method in enumerate(METHODS):
            x = est[:, k, e]
            mean = float(np.mean(x))
            rows.append(ReplicationRow(estimand_label(kind, j), method, float(truth), mean,
                                       mean - float(truth), float(np.std(x, ddof=1))))
    return ReplicationReport(study, int(n), int(reps), int(seed), failures, tuple(rows), est)
