"""Basis evaluation, design matrices and the identifiability check."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.linalg

from .core import (BasisSpec, ConfigurationError, IdentificationError, ObservationTable,
                   TreatmentProfile, default_treatment_names, no_instrument_message)

EPS = np.finfo(float).eps


def _columns(names: Sequence[str], Z: np.ndarray) -> dict[str, np.ndarray]:
    return {name: Z[..., k] for k, name in enumerate(names)}


def evaluate_basis_row(spec: BasisSpec, z: TreatmentProfile | Sequence[float],
                       names: Optional[Sequence[str]] = None) -> np.ndarray:
    """Evaluate every basis term at one treatment profile.

    ``names`` label the coordinates of ``z``; they default to ``z1..zJ``.
    """
    values = z.values if isinstance(z, TreatmentProfile) else tuple(float(v) for v in z)
    names = default_treatment_names(len(values)) if names is None else tuple(names)
    if len(names) != len(values):
        raise ConfigurationError(f"profile has {len(values)} coordinates but {len(names)} names")
    cols = dict(zip(names, values))
    return np.array([float(t.evaluate(cols)) for t in spec.terms])


def basis_matrix(spec: BasisSpec, Z: np.ndarray, names: Sequence[str]) -> np.ndarray:
    """Evaluate the basis on each row of an ``(n, J)`` treatment array."""
    Z = np.asarray(Z, dtype=float)
    cols = _columns(names, Z)
    n = Z.shape[0]
    out = np.empty((n, spec.L))
    for l, term in enumerate(spec.terms):
        out[:, l] = term.evaluate(cols)
    return out


@dataclass(frozen=True, eq=False)
class DesignMatrices:
    phi: np.ndarray
    outcome_count: int

    @property
    def n(self) -> int:
        return self.phi.shape[0]

    @property
    def L(self) -> int:
        return self.phi.shape[1]

    @property
    def phi1(self) -> np.ndarray:
        return self.phi[:, : self.outcome_count]

    @property
    def phi2(self) -> np.ndarray:
        return self.phi[:, self.outcome_count:]


def build_design(spec: BasisSpec, data: ObservationTable) -> DesignMatrices:
    phi = basis_matrix(spec, data.treatments, data.treatment_names)
    phi.setflags(write=False)
    return DesignMatrices(phi, spec.outcome_count)


def rank_tolerance(a: np.ndarray, smax: Optional[float] = None) -> float:
    if smax is None:
        smax = float(np.linalg.norm(a, 2)) if a.size else 0.0
    return max(a.shape) * EPS * smax


@dataclass(frozen=True)
class ValidationReport:
    n: int
    L: int
    outcome_count: int
    rank: int
    tolerance: float
    singular_values: tuple[float, ...]
    passed: bool

    @property
    def condition_number(self) -> float:
        s = self.singular_values
        return float(s[0] / s[-1]) if s and s[-1] > 0 else float("inf")

    def to_dict(self) -> dict:
        return {"n": self.n, "L": self.L, "outcome_count": self.outcome_count, "rank": self.rank,
                "tolerance": self.tolerance, "singular_values": list(self.singular_values),
                "condition_number": self.condition_number, "passed": self.passed}


def validate_identifiability(spec: BasisSpec, design: DesignMatrices) -> ValidationReport:
    """Check that the outcome basis is a proper subset and that the full
    basis is linearly independent on the observed support.

    The instrument-strength part of the check depends on the fitted
    mediator coefficients and is done by the outcome stage of the fit.

    Raises
    ------
    IdentificationError
        On a missing instrument block or a rank-deficient design; the
        message names a column found to be dependent.
    """
    L, L1 = spec.L, spec.outcome_count
    if L1 >= L:
        raise IdentificationError(no_instrument_message(L1, L))
    phi = design.phi
    if phi.shape[1] != L:
        raise ConfigurationError("design does not match basis spec")
    s = np.linalg.svd(phi, compute_uv=False)
    tol = rank_tolerance(phi, s[0] if s.size else 0.0)
    rank = int(np.sum(s > tol))
    report = ValidationReport(phi.shape[0], L, L1, rank, tol, tuple(float(v) for v in s), rank == L)
    if rank < L:
        # Pivoted QR puts the columns it could not add independently at the end.
        _, r, piv = scipy.linalg.qr(phi, mode="economic", pivoting=True)
        dependent = [str(spec.terms[p]) for p in piv[rank:]]
        raise IdentificationError(
            f"basis not linearly independent on observed support: rank {rank} < {L}; "
            f"dependent column(s): {', '.join(dependent)}")
    return report
