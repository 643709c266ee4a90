"""Mediator least squares, moment-weighted outcome fit, and the naive
regression comparator."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (BasisSpec, FittedMediation, IdentificationError, MediationError,
                   ObservationTable, SampleSizeError, WeakInstrumentError, _frozen)
from .design import DesignMatrices, build_design, rank_tolerance, validate_identifiability


def _lstsq(a: np.ndarray, b: np.ndarray, what: str, error: type = IdentificationError):
    """SVD-based least squares with an explicit rank check.

    Returns the solution and the 2-norm condition number of ``a``.
    """
    x, _, rank, s = np.linalg.lstsq(a, b, rcond=None)
    tol = rank_tolerance(a, s[0] if s.size else 0.0)
    if rank < a.shape[1] or s.size == 0 or s[-1] <= tol:
        raise error(what)
    return x, float(s[0] / s[-1])


def _mediator_stage(design: DesignMatrices, m: np.ndarray):
    if design.n <= design.L:
        raise SampleSizeError(f"insufficient sample size: n = {design.n} must exceed L = {design.L}")
    return _lstsq(design.phi, np.asarray(m, dtype=float),
                  "basis not linearly independent on observed support: mediator design is rank deficient")


def fit_mediator_ols(design: DesignMatrices, m: np.ndarray) -> np.ndarray:
    """Least-squares coefficients of the mediator on the full basis."""
    return _mediator_stage(design, m)[0]


def _outcome_stage(design: DesignMatrices, alpha: np.ndarray, y: np.ndarray):
    phi, L1 = design.phi, design.outcome_count
    alpha = np.asarray(alpha, dtype=float)
    instrument = design.phi2 @ alpha[L1:]
    smax = np.linalg.norm(phi, 2)
    threshold = rank_tolerance(phi, smax) * np.linalg.norm(phi, "fro")
    if np.linalg.norm(instrument) <= threshold:
        raise WeakInstrumentError(
            "weak instruments: Phi2 @ alpha2 numerically zero, so the mediator coefficient "
            "is not identified")
    X = np.column_stack([design.phi1, instrument])
    A = phi.T @ X
    b = phi.T @ np.asarray(y, dtype=float)
    theta, cond = _lstsq(A, b, "outcome parameters unidentified on this sample: "
                               "[Phi1 | Phi2 @ alpha2] is rank deficient")
    return theta[:L1], float(theta[L1]), cond


def fit_outcome_gmm(design: DesignMatrices, alpha: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, float]:
    """Minimise ``||Phi^T (y - Phi1 delta - beta Phi2 alpha2)||^2`` in
    ``(delta, beta)``.

    The criterion is quadratic, so the minimiser is the least-squares
    solution of ``A theta = b`` with ``A = Phi^T [Phi1 | Phi2 alpha2]`` and
    ``b = Phi^T y``. It is computed by an orthogonal factorization rather
    than by inverting ``A^T A``.

    Returns
    -------
    delta : ndarray, shape (L1,)
    beta : float
    """
    delta, beta, _ = _outcome_stage(design, alpha, y)
    return delta, beta


def recover_gamma(delta: np.ndarray, beta: float, alpha: np.ndarray) -> np.ndarray:
    delta = np.asarray(delta, dtype=float)
    return delta - beta * np.asarray(alpha, dtype=float)[: delta.shape[0]]


def _staged(stage: str, fn, *args):
    try:
        return fn(*args)
    except MediationError as exc:
        raise exc.with_stage(stage) from exc


def canonical_order(data: ObservationTable) -> ObservationTable:
    """Rows sorted lexicographically by (treatments, mediator, outcome).

    Fitting on the sorted table makes estimates exactly independent of the
    input row order (floating-point sums are order dependent otherwise).
    """
    keys = (data.outcome, data.mediator) + tuple(data.treatments[:, k] for k in
                                                  range(data.treatments.shape[1] - 1, -1, -1))
    order = np.lexsort(keys)
    return data.take(order)


def fit_proposed(spec: BasisSpec, data: ObservationTable) -> FittedMediation:
    """Full pipeline: design, identifiability check, mediator fit, outcome
    fit and recovery of the direct-path coefficients."""
    if data.n <= spec.L + 1:
        raise SampleSizeError(f"insufficient sample size: n = {data.n} must exceed L + 1 = {spec.L + 1}",
                              stage="design")
    data = canonical_order(data)
    design = _staged("design", build_design, spec, data)
    _staged("validate", validate_identifiability, spec, design)
    alpha, cond_m = _staged("mediator", _mediator_stage, design, data.mediator)
    delta, beta, cond_y = _staged("outcome", _outcome_stage, design, alpha, data.outcome)
    gamma = recover_gamma(delta, beta, alpha)
    return FittedMediation(spec, alpha, beta, delta, gamma, data.n, data.treatment_names,
                           {"mediator": cond_m, "outcome": cond_y})


@dataclass(frozen=True, eq=False)
class TraditionalFit:
    """Regression comparator that ignores the mediator-outcome confounder.

    ``alpha`` is the same mediator fit as the proposed method; ``beta`` and
    ``gamma`` come from ordinary least squares of the outcome on
    ``[Phi1, M]``.
    """

    spec: BasisSpec
    alpha: np.ndarray
    beta: float
    gamma: np.ndarray
    n: int
    treatment_names: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "alpha", _frozen(self.alpha))
        object.__setattr__(self, "gamma", _frozen(self.gamma))
        object.__setattr__(self, "beta", float(self.beta))

    def to_dict(self) -> dict:
        return {"spec": self.spec.to_dict(), "treatment_names": list(self.treatment_names),
                "n": self.n, "alpha": self.alpha.tolist(), "beta": self.beta,
                "gamma": self.gamma.tolist()}


def fit_traditional(spec: BasisSpec, data: ObservationTable) -> TraditionalFit:
    data = canonical_order(data)
    design = _staged("design", build_design, spec, data)
    alpha, _ = _staged("mediator", _mediator_stage, design, data.mediator)
    X = np.column_stack([design.phi1, data.mediator])

    def outcome():
        return _lstsq(X, data.outcome, "[Phi1 | M] is rank deficient: naive outcome regression undefined")

    coef, _ = _staged("outcome", outcome)
    L1 = spec.outcome_count
    return TraditionalFit(spec, alpha, float(coef[L1]), coef[:L1], data.n, data.treatment_names)
