"""Natural direct, indirect and total effects from fitted surfaces.

All functions accept either a :class:`~submed.core.FittedMediation` or a
:class:`~submed.estimation.TraditionalFit`; only ``spec``, ``alpha``,
``beta``, ``gamma`` and ``treatment_names`` are used.
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from .core import (ConfigurationError, EffectContrast, EffectEstimate, MediationError,
                   ObservationTable, TreatmentProfile, default_treatment_names)
from .design import basis_matrix, evaluate_basis_row


def _names(fit, j: int) -> tuple[str, ...]:
    return tuple(fit.treatment_names) or default_treatment_names(j)


def predict_gm(fit, z: TreatmentProfile | Sequence[float], names: Optional[Sequence[str]] = None) -> float:
    """Fitted mediator surface ``Phi(z) @ alpha``."""
    z = z if isinstance(z, TreatmentProfile) else TreatmentProfile(tuple(z))
    row = evaluate_basis_row(fit.spec, z, names or _names(fit, len(z)))
    return float(row @ fit.alpha)


def predict_gy(fit, z: TreatmentProfile | Sequence[float], names: Optional[Sequence[str]] = None) -> float:
    """Fitted direct-path outcome surface ``Phi1(z) @ gamma``."""
    z = z if isinstance(z, TreatmentProfile) else TreatmentProfile(tuple(z))
    row = evaluate_basis_row(fit.spec, z, names or _names(fit, len(z)))
    return float(row[: fit.spec.outcome_count] @ fit.gamma)


def _contrast_surfaces(fit, Z: np.ndarray, names, contrast: EffectContrast):
    """Per-row differences of the two fitted surfaces between the high and
    low levels of the contrasted treatment."""
    j = contrast.treatment_index
    if j >= Z.shape[1]:
        raise ConfigurationError(f"treatment index {j} out of range for {Z.shape[1]} treatments")
    hi, lo = Z.copy(), Z.copy()
    hi[:, j] = contrast.level_hi
    lo[:, j] = contrast.level_lo
    phi_hi = basis_matrix(fit.spec, hi, names)
    phi_lo = basis_matrix(fit.spec, lo, names)
    L1 = fit.spec.outcome_count
    dy = phi_hi[:, :L1] @ fit.gamma - phi_lo[:, :L1] @ fit.gamma
    dm = phi_hi @ fit.alpha - phi_lo @ fit.alpha
    return dy, dm


def conditional_effects(fit, contrast: EffectContrast,
                        names: Optional[Sequence[str]] = None) -> EffectEstimate:
    """CNDE, CNIE and CTE with the other treatments fixed at
    ``contrast.conditioning``."""
    if contrast.conditioning is None:
        raise ConfigurationError("conditional effects need conditioning values for the other treatments")
    cond = list(contrast.conditioning)
    J = len(cond) + 1
    names = tuple(names) if names is not None else _names(fit, J)
    if len(names) != J:
        raise ConfigurationError(
            f"conditioning supplies {len(cond)} values; {len(names) - 1} other treatments expected")
    j = contrast.treatment_index
    if j >= J:
        raise ConfigurationError(f"treatment index {j} out of range for {J} treatments")
    Z = np.array([cond[:j] + [0.0] + cond[j:]])
    dy, dm = _contrast_surfaces(fit, Z, names, contrast)
    return EffectEstimate.from_parts(contrast, dy[0], fit.beta * dm[0])


def average_effects(fit, data: ObservationTable, contrast: EffectContrast) -> EffectEstimate:
    """NDE, NIE and TE averaging the other treatments over the empirical
    distribution of ``data``."""
    if fit.treatment_names and tuple(fit.treatment_names) != data.treatment_names:
        raise ConfigurationError(
            f"fit treatments {tuple(fit.treatment_names)} differ from data treatments {data.treatment_names}")
    dy, dm = _contrast_surfaces(fit, data.treatments, data.treatment_names, contrast)
    return EffectEstimate.from_parts(contrast, np.mean(dy), fit.beta * np.mean(dm))


def effect_table(fit, data: Optional[ObservationTable],
                 contrasts: Sequence[EffectContrast]) -> list[EffectEstimate]:
    """Evaluate each contrast in order; conditional contrasts use their
    conditioning values, the rest are averaged over ``data``."""
    if not contrasts:
        raise ConfigurationError("no contrasts requested")
    names = data.treatment_names if data is not None else None
    out = []
    for c in contrasts:
        try:
            if c.is_conditional:
                out.append(conditional_effects(fit, c, names))
            else:
                if data is None:
                    raise ConfigurationError("average effects need the estimation data")
                out.append(average_effects(fit, data, c))
        except MediationError as exc:
            raise type(exc)(f"contrast {c.label(names or ())}: {exc}") from exc
    return out
