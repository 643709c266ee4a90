"""Domain types shared across the package.

Treatments are numerically coded reals. A dataset is held column-wise as
numpy arrays (read-only views); basis terms form a small closed algebra of
intercept / monomial / product so specs stay serializable.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np


class MediationError(ValueError):
    """Base class for configuration, identification and fitting failures."""

    def __init__(self, message: str, stage: Optional[str] = None):
        self.stage = stage
        super().__init__(f"{stage}: {message}" if stage else message)
        self.message = message

    def with_stage(self, stage: str) -> "MediationError":
        return type(self)(self.message, stage=stage)


class ConfigurationError(MediationError):
    pass


class IdentificationError(MediationError):
    pass


class WeakInstrumentError(IdentificationError):
    pass


class SampleSizeError(MediationError):
    pass


DELTA_IDENTITY_RTOL = 1e-10


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


# ---------------------------------------------------------------------------
# Treatments and data
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TreatmentProfile:
    """One treatment vector ``(z_1, ..., z_J)``."""

    values: tuple[float, ...]

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if len(vals) < 1:
            raise ConfigurationError("treatment profile must have at least one coordinate")
        if not all(math.isfinite(v) for v in vals):
            raise ConfigurationError(f"treatment profile has non-finite entries: {vals}")
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return len(self.values)

    def replace(self, index: int, value: float) -> "TreatmentProfile":
        vals = list(self.values)
        vals[index] = value
        return TreatmentProfile(tuple(vals))


def default_treatment_names(j: int) -> tuple[str, ...]:
    return tuple(f"z{k + 1}" for k in range(j))


@dataclass(frozen=True, eq=False)
class ObservationTable:
    """n rows of (treatment profile, mediator, outcome), stored column-wise.

    ``treatments`` is an ``(n, J)`` array whose columns follow
    ``treatment_names``.
    """

    treatment_names: tuple[str, ...]
    treatments: np.ndarray
    mediator: np.ndarray
    outcome: np.ndarray

    def __post_init__(self):
        names = tuple(str(s) for s in self.treatment_names)
        Z = np.asarray(self.treatments, dtype=float)
        if Z.ndim == 1:
            Z = Z.reshape(-1, 1)
        m = np.asarray(self.mediator, dtype=float).reshape(-1)
        y = np.asarray(self.outcome, dtype=float).reshape(-1)
        if len(set(names)) != len(names):
            raise ConfigurationError(f"duplicate treatment names: {names}")
        if Z.shape[0] < 1:
            raise ConfigurationError("dataset is empty")
        if Z.shape[1] != len(names):
            raise ConfigurationError(
                f"treatment matrix has {Z.shape[1]} columns but {len(names)} names were declared")
        if m.shape[0] != Z.shape[0] or y.shape[0] != Z.shape[0]:
            raise ConfigurationError("mediator/outcome length does not match number of rows")
        for label, arr in (("treatment", Z), ("mediator", m), ("outcome", y)):
            if not np.all(np.isfinite(arr)):
                raise ConfigurationError(f"{label} column contains non-finite values")
        object.__setattr__(self, "treatment_names", names)
        object.__setattr__(self, "treatments", _frozen(Z))
        object.__setattr__(self, "mediator", _frozen(m))
        object.__setattr__(self, "outcome", _frozen(y))

    @classmethod
    def from_rows(cls, treatment_names: Sequence[str],
                  rows: Sequence[tuple[TreatmentProfile | Sequence[float], float, float]]):
        Z = [tuple(r[0].values if isinstance(r[0], TreatmentProfile) else r[0]) for r in rows]
        return cls(tuple(treatment_names), np.array(Z, dtype=float).reshape(len(rows), -1),
                   np.array([r[1] for r in rows]), np.array([r[2] for r in rows]))

    @property
    def n(self) -> int:
        return self.treatments.shape[0]

    def __len__(self) -> int:
        return self.n

    def profile(self, i: int) -> TreatmentProfile:
        return TreatmentProfile(tuple(self.treatments[i]))

    def rows(self):
        for i in range(self.n):
            yield self.profile(i), float(self.mediator[i]), float(self.outcome[i])

    def take(self, index: np.ndarray) -> "ObservationTable":
        """Rows selected (with repetition allowed) by an integer index array."""
        return ObservationTable(self.treatment_names, self.treatments[index],
                                self.mediator[index], self.outcome[index])

    def distinct_levels(self) -> dict[str, int]:
        return {name: len(np.unique(self.treatments[:, k]))
                for k, name in enumerate(self.treatment_names)}

    def __eq__(self, other):
        if not isinstance(other, ObservationTable):
            return NotImplemented
        return (self.treatment_names == other.treatment_names
                and np.array_equal(self.treatments, other.treatments)
                and np.array_equal(self.mediator, other.mediator)
                and np.array_equal(self.outcome, other.outcome))

    def to_dict(self) -> dict:
        return {
            "treatment_names": list(self.treatment_names),
            "treatments": self.treatments.tolist(),
            "mediator": self.mediator.tolist(),
            "outcome": self.outcome.tolist(),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "ObservationTable":
        names = tuple(d["treatment_names"])
        Z = np.array(d["treatments"], dtype=float).reshape(-1, len(names))
        return cls(names, Z, np.array(d["mediator"]), np.array(d["outcome"]))


# ---------------------------------------------------------------------------
# Basis terms
# ---------------------------------------------------------------------------

_NAME = r"[A-Za-z_][A-Za-z0-9_.]*"
_FACTOR_RE = re.compile(rf"^\s*({_NAME})\s*(?:\^\s*(\d+))?\s*$")


@dataclass(frozen=True)
class BasisTerm:
    """A monomial ``prod_k z_k^{d_k}`` over named treatments.

    ``powers`` is a tuple of ``(variable, degree)`` pairs sorted by variable
    name; the empty tuple is the intercept.
    """

    powers: tuple[tuple[str, int], ...] = ()

    def __post_init__(self):
        seen = {}
        for var, deg in self.powers:
            if not isinstance(deg, (int, np.integer)) or isinstance(deg, bool) or deg < 1:
                raise ConfigurationError(f"degree of {var!r} must be a positive integer, got {deg!r}")
            if var in seen:
                raise ConfigurationError(f"variable {var!r} repeated in basis term")
            seen[var] = int(deg)
        object.__setattr__(self, "powers", tuple(sorted(seen.items())))

    @classmethod
    def intercept(cls) -> "BasisTerm":
        return cls(())

    @classmethod
    def monomial(cls, var: str, degree: int = 1) -> "BasisTerm":
        return cls(((var, degree),))

    @classmethod
    def product(cls, *factors: str | tuple[str, int]) -> "BasisTerm":
        powers = [(f, 1) if isinstance(f, str) else tuple(f) for f in factors]
        if len(powers) < 2:
            raise ConfigurationError("a product term needs at least two distinct variables")
        return cls(tuple(powers))

    @classmethod
    def parse(cls, descriptor: str) -> "BasisTerm":
        """Parse ``"1"``, ``"z1"``, ``"z1^2"``, ``"z1*z2"`` or ``"z1*z2^2"``."""
        text = str(descriptor).strip()
        if text == "1":
            return cls.intercept()
        powers = []
        for factor in text.split("*"):
            match = _FACTOR_RE.match(factor)
            if match is None:
                raise ConfigurationError(f"cannot parse basis term {descriptor!r}")
            powers.append((match.group(1), int(match.group(2) or 1)))
        if any(d < 1 for _, d in powers):
            raise ConfigurationError(f"degrees must be positive in {descriptor!r}")
        return cls(tuple(powers))

    @property
    def kind(self) -> str:
        if not self.powers:
            return "intercept"
        return "monomial" if len(self.powers) == 1 else "product"

    @property
    def variables(self) -> tuple[str, ...]:
        return tuple(v for v, _ in self.powers)

    def __str__(self) -> str:
        if not self.powers:
            return "1"
        return "*".join(v if d == 1 else f"{v}^{d}" for v, d in self.powers)

    def evaluate(self, columns: Mapping[str, np.ndarray | float]):
        """Evaluate on a name -> value (or column array) mapping."""
        out = 1.0
        for var, deg in self.powers:
            try:
                x = columns[var]
            except KeyError:
                raise ConfigurationError(f"basis term {self} refers to unknown treatment {var!r}") from None
            out = out * (x if deg == 1 else x ** deg)
        return out


def _as_term(t: BasisTerm | str) -> BasisTerm:
    return t if isinstance(t, BasisTerm) else BasisTerm.parse(t)


@dataclass(frozen=True)
class BasisSpec:
    """Ordered basis for the mediator surface; the first ``outcome_count``
    terms span the outcome surface, the remainder act as instruments."""

    terms: tuple[BasisTerm, ...]
    outcome_count: int

    def __post_init__(self):
        terms = tuple(_as_term(t) for t in self.terms)
        L, L1 = len(terms), int(self.outcome_count)
        if L == 0:
            raise ConfigurationError("basis spec has no terms")
        if len(set(terms)) != L:
            dup = [str(t) for t in terms if terms.count(t) > 1]
            raise ConfigurationError(f"basis terms must be pairwise distinct; repeated: {sorted(set(dup))}")
        if L1 < 1:
            raise ConfigurationError("outcome basis must contain at least one term")
        if L1 >= L:
            raise IdentificationError(no_instrument_message(L1, L))
        intercept = BasisTerm.intercept()
        if intercept in terms[L1:]:
            raise ConfigurationError("the intercept must belong to the outcome basis, not the instrument terms")
        object.__setattr__(self, "terms", terms)
        object.__setattr__(self, "outcome_count", L1)

    @classmethod
    def from_descriptors(cls, mediator_basis: Sequence[str], outcome_basis: Sequence[str]) -> "BasisSpec":
        """Build a spec from a mediator basis and an outcome subset of it.

        The outcome terms come first (in their declared order), followed by
        the remaining mediator terms in their declared order.
        """
        med = [_as_term(t) for t in mediator_basis]
        out = [_as_term(t) for t in outcome_basis]
        missing = [str(t) for t in out if t not in med]
        if missing:
            raise ConfigurationError(f"outcome basis terms not in mediator basis: {missing}")
        if len(set(out)) != len(out):
            raise ConfigurationError("outcome basis contains repeated terms")
        if len(set(med)) != len(med):
            raise ConfigurationError("mediator basis contains repeated terms")
        if len(out) == len(med):
            raise IdentificationError(no_instrument_message(len(out), len(med)))
        rest = [t for t in med if t not in out]
        return cls(tuple(out + rest), len(out))

    @property
    def L(self) -> int:
        return len(self.terms)

    @property
    def outcome_terms(self) -> tuple[BasisTerm, ...]:
        return self.terms[: self.outcome_count]

    @property
    def instrument_terms(self) -> tuple[BasisTerm, ...]:
        return self.terms[self.outcome_count:]

    @property
    def variables(self) -> tuple[str, ...]:
        seen: dict[str, None] = {}
        for t in self.terms:
            for v in t.variables:
                seen.setdefault(v)
        return tuple(seen)

    def descriptors(self) -> list[str]:
        return [str(t) for t in self.terms]

    def to_dict(self) -> dict:
        return {"terms": self.descriptors(), "outcome_count": self.outcome_count}

    @classmethod
    def from_dict(cls, d: Mapping) -> "BasisSpec":
        return cls(tuple(BasisTerm.parse(t) for t in d["terms"]), int(d["outcome_count"]))


def no_instrument_message(L1: int, L: int) -> str:
    return (f"no instrument terms: the outcome basis ({L1} terms) must be a proper subset of the "
            f"mediator basis ({L} terms) (Condition 1: outcome space is not a proper subspace)")


# ---------------------------------------------------------------------------
# Fits and effects
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FittedMediation:
    """Estimated parameters of the mediator and outcome models.

    ``delta`` holds the reduced-form outcome coefficients on the outcome
    basis; ``gamma = delta - beta * alpha[:L1]`` are the direct-path ones.
    """

    spec: BasisSpec
    alpha: np.ndarray
    beta: float
    delta: np.ndarray
    gamma: np.ndarray
    n: int
    treatment_names: tuple[str, ...] = ()
    condition_numbers: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "alpha", _frozen(self.alpha))
        object.__setattr__(self, "delta", _frozen(self.delta))
        object.__setattr__(self, "gamma", _frozen(self.gamma))
        object.__setattr__(self, "beta", float(self.beta))
        object.__setattr__(self, "treatment_names", tuple(self.treatment_names))
        L, L1 = self.spec.L, self.spec.outcome_count
        if self.alpha.shape != (L,) or self.delta.shape != (L1,) or self.gamma.shape != (L1,):
            raise ConfigurationError("parameter vector lengths do not match the basis spec")
        if self.delta_identity_error() > DELTA_IDENTITY_RTOL * (1.0 + float(np.max(np.abs(self.delta)))):
            raise ValueError("delta must equal gamma + beta * alpha[:L1]")

    @property
    def alpha_outcome(self) -> np.ndarray:
        return self.alpha[: self.spec.outcome_count]

    @property
    def alpha_instrument(self) -> np.ndarray:
        return self.alpha[self.spec.outcome_count:]

    def delta_identity_error(self) -> float:
        return float(np.max(np.abs(self.delta - self.gamma - self.beta * self.alpha_outcome)))

    def __eq__(self, other):
        if not isinstance(other, FittedMediation):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def to_dict(self) -> dict:
        return {
            "spec": self.spec.to_dict(),
            "treatment_names": list(self.treatment_names),
            "n": self.n,
            "alpha": self.alpha.tolist(),
            "beta": self.beta,
            "delta": self.delta.tolist(),
            "gamma": self.gamma.tolist(),
            "condition_numbers": dict(self.condition_numbers),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "FittedMediation":
        return cls(BasisSpec.from_dict(d["spec"]), np.array(d["alpha"]), d["beta"],
                   np.array(d["delta"]), np.array(d["gamma"]), int(d["n"]),
                   tuple(d.get("treatment_names", ())), dict(d.get("condition_numbers", {})))


@dataclass(frozen=True)
class EffectContrast:
    """Contrast of treatment ``treatment_index`` (0-based) from ``level_lo``
    to ``level_hi``. With ``conditioning`` (values of the other J-1
    treatments, in order) the effects are conditional; otherwise averaged."""

    treatment_index: int
    level_hi: float
    level_lo: float
    conditioning: Optional[tuple[float, ...]] = None

    def __post_init__(self):
        if int(self.treatment_index) < 0:
            raise ConfigurationError("treatment index must be non-negative")
        object.__setattr__(self, "treatment_index", int(self.treatment_index))
        object.__setattr__(self, "level_hi", float(self.level_hi))
        object.__setattr__(self, "level_lo", float(self.level_lo))
        if self.conditioning is not None:
            object.__setattr__(self, "conditioning", tuple(float(v) for v in self.conditioning))

    @property
    def is_conditional(self) -> bool:
        return self.conditioning is not None

    def swapped(self) -> "EffectContrast":
        return EffectContrast(self.treatment_index, self.level_lo, self.level_hi, self.conditioning)

    def label(self, names: Sequence[str] = ()) -> str:
        j = self.treatment_index
        name = names[j] if j < len(names) else f"z{j + 1}"
        base = f"{name}({_num(self.level_hi)},{_num(self.level_lo)})"
        if self.conditioning is not None:
            base += "|" + ",".join(_num(v) for v in self.conditioning)
        return base

    def to_dict(self) -> dict:
        return {"treatment_index": self.treatment_index, "level_hi": self.level_hi,
                "level_lo": self.level_lo,
                "conditioning": None if self.conditioning is None else list(self.conditioning)}

    @classmethod
    def from_dict(cls, d: Mapping) -> "EffectContrast":
        cond = d.get("conditioning")
        return cls(d["treatment_index"], d["level_hi"], d["level_lo"],
                   None if cond is None else tuple(cond))


def _num(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


Interval = tuple[float, float]


@dataclass(frozen=True)
class EffectEstimate:
    contrast: EffectContrast
    nde: float
    nie: float
    te: float
    interval_level: Optional[float] = None
    nde_ci: Optional[Interval] = None
    nie_ci: Optional[Interval] = None
    te_ci: Optional[Interval] = None

    def __post_init__(self):
        for name in ("nde", "nie", "te"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if self.te != self.nde + self.nie:
            raise ValueError(f"te ({self.te!r}) must equal nde + nie ({self.nde + self.nie!r})")
        if self.interval_level is not None and not 0.0 < self.interval_level < 1.0:
            raise ValueError("interval level must lie in (0, 1)")
        for name in ("nde_ci", "nie_ci", "te_ci"):
            ci = getattr(self, name)
            if ci is not None:
                lo, hi = float(ci[0]), float(ci[1])
                if lo > hi:
                    raise ValueError(f"{name} has lo > hi: {ci}")
                object.__setattr__(self, name, (lo, hi))

    @classmethod
    def from_parts(cls, contrast: EffectContrast, nde: float, nie: float) -> "EffectEstimate":
        nde, nie = float(nde), float(nie)
        return cls(contrast, nde, nie, nde + nie)

    def values(self) -> tuple[float, float, float]:
        return self.nde, self.nie, self.te

    def to_dict(self) -> dict:
        return {
            "contrast": self.contrast.to_dict(),
            "nde": self.nde, "nie": self.nie, "te": self.te,
            "interval_level": self.interval_level,
            "nde_ci": None if self.nde_ci is None else list(self.nde_ci),
            "nie_ci": None if self.nie_ci is None else list(self.nie_ci),
            "te_ci": None if self.te_ci is None else list(self.te_ci),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "EffectEstimate":
        def ci(key):
            v = d.get(key)
            return None if v is None else (v[0], v[1])
        return cls(EffectContrast.from_dict(d["contrast"]), d["nde"], d["nie"], d["te"],
                   d.get("interval_level"), ci("nde_ci"), ci("nie_ci"), ci("te_ci"))
