"""CSV data files, JSON analysis configs and JSON reports."""

from __future__ import annotations

import csv
import io as _io
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Optional, Sequence, TextIO

import numpy as np

from .core import (BasisSpec, BasisTerm, ConfigurationError, EffectContrast, EffectEstimate,
                   FittedMediation, IdentificationError, ObservationTable, no_instrument_message)
from .design import ValidationReport
from .inference import BootstrapConfig

REPORT_VERSION = 1


# ---------------------------------------------------------------------------
# Data
# ---------------------------------------------------------------------------

def read_table(source: str | Path | TextIO) -> tuple[list[str], np.ndarray]:
    """Read a numeric CSV with a header line. Returns (header, values)."""
    if isinstance(source, (str, Path)):
        with open(source, newline="", encoding="utf-8") as fh:
            return read_table(fh)
    reader = csv.reader(source)
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise ConfigurationError("data file is empty (no header line)") from None
    if len(set(header)) != len(header):
        raise ConfigurationError(f"duplicate column names in header: {header}")
    rows = []
    for lineno, rec in enumerate(reader, start=2):
        if not rec or all(not c.strip() for c in rec):
            continue
        if len(rec) != len(header):
            raise ConfigurationError(f"line {lineno}: expected {len(header)} fields, got {len(rec)}")
        try:
            rows.append([float(c) for c in rec])
        except ValueError:
            raise ConfigurationError(f"line {lineno}: non-numeric value in {rec}") from None
    return header, np.array(rows, dtype=float).reshape(len(rows), len(header))


def load_observations(source, treatments: Sequence[str], mediator: str, outcome: str) -> ObservationTable:
    header, values = read_table(source)
    missing = [c for c in [*treatments, mediator, outcome] if c not in header]
    if missing:
        raise ConfigurationError(f"columns missing from data header: {missing}")
    col = {name: k for k, name in enumerate(header)}
    if values.shape[0] == 0:
        raise ConfigurationError("data file has no rows")
    Z = values[:, [col[t] for t in treatments]]
    return ObservationTable(tuple(treatments), Z, values[:, col[mediator]], values[:, col[outcome]])


def _fmt(v: float) -> str:
    return str(int(v)) if float(v).is_integer() and abs(v) < 2 ** 53 else repr(float(v))


def write_observations(data: ObservationTable, out: TextIO, mediator: str = "m", outcome: str = "y"):
    """Write ``data`` so that reading it back reproduces every float exactly."""
    out.write(",".join([*data.treatment_names, mediator, outcome]) + "\n")
    for i in range(data.n):
        cells = [_fmt(v) for v in data.treatments[i]] + [repr(float(data.mediator[i])),
                                                        repr(float(data.outcome[i]))]
        out.write(",".join(cells) + "\n")


# ---------------------------------------------------------------------------
# Analysis config
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ContrastSpec:
    treatment: str
    hi: float
    lo: float
    given: Optional[Mapping[str, float]] = None


@dataclass(frozen=True)
class AnalysisConfig:
    treatments: tuple[str, ...]
    mediator: str
    outcome: str
    mediator_basis: tuple[str, ...]
    outcome_basis: tuple[str, ...]
    contrasts: tuple[ContrastSpec, ...]
    bootstrap: Optional[BootstrapConfig] = None

    def basis_spec(self) -> BasisSpec:
        spec = BasisSpec.from_descriptors(self.mediator_basis, self.outcome_basis)
        unknown = sorted(set(spec.variables) - set(self.treatments))
        if unknown:
            raise ConfigurationError(f"basis refers to undeclared treatments: {unknown}")
        return spec

    def effect_contrasts(self) -> list[EffectContrast]:
        out = []
        for c in self.contrasts:
            if c.treatment not in self.treatments:
                raise ConfigurationError(f"contrast names unknown treatment {c.treatment!r}")
            j = self.treatments.index(c.treatment)
            cond = None
            if c.given is not None:
                others = [t for t in self.treatments if t != c.treatment]
                missing = [t for t in others if t not in c.given]
                if missing:
                    raise ConfigurationError(
                        f"conditional contrast on {c.treatment!r} is missing values for {missing}")
                cond = tuple(float(c.given[t]) for t in others)
            out.append(EffectContrast(j, c.hi, c.lo, cond))
        return out

    def to_dict(self) -> dict:
        return {
            "treatments": list(self.treatments), "mediator": self.mediator, "outcome": self.outcome,
            "mediator_basis": list(self.mediator_basis), "outcome_basis": list(self.outcome_basis),
            "contrasts": [{"treatment": c.treatment, "hi": c.hi, "lo": c.lo,
                           **({"given": dict(c.given)} if c.given is not None else {})}
                          for c in self.contrasts],
            **({"bootstrap": self.bootstrap.to_dict()} if self.bootstrap else {}),
        }


def _parse_contrast(raw: Any, treatments: Sequence[str]) -> ContrastSpec:
    if isinstance(raw, Mapping):
        try:
            name, hi, lo = raw["treatment"], raw["hi"], raw["lo"]
        except KeyError as exc:
            raise ConfigurationError(f"contrast {raw} lacks key {exc}") from None
        given = raw.get("given")
    elif isinstance(raw, (list, tuple)) and len(raw) in (3, 4):
        name, hi, lo = raw[:3]
        given = raw[3] if len(raw) == 4 else None
    else:
        raise ConfigurationError(f"cannot parse contrast {raw!r}")
    if isinstance(given, (list, tuple)):
        others = [t for t in treatments if t != name]
        if len(given) != len(others):
            raise ConfigurationError(f"contrast on {name!r} gives {len(given)} conditioning values, "
                                     f"expected {len(others)}")
        given = dict(zip(others, given))
    try:
        return ContrastSpec(str(name), float(hi), float(lo),
                            None if given is None else {str(k): float(v) for k, v in given.items()})
    except (TypeError, ValueError):
        raise ConfigurationError(f"contrast {raw!r} has non-numeric levels") from None


def parse_config(doc: Mapping) -> AnalysisConfig:
    required = ("treatments", "mediator", "outcome", "mediator_basis", "outcome_basis", "contrasts")
    missing = [k for k in required if k not in doc]
    if missing:
        raise ConfigurationError(f"config is missing keys: {missing}")
    treatments = tuple(str(t) for t in doc["treatments"])
    if not treatments:
        raise ConfigurationError("config declares no treatments")
    med = tuple(str(t) for t in doc["mediator_basis"])
    out = tuple(str(t) for t in doc["outcome_basis"])
    med_terms = [BasisTerm.parse(t) for t in med]
    out_terms = [BasisTerm.parse(t) for t in out]
    if set(out_terms) == set(med_terms):
        raise IdentificationError(no_instrument_message(len(out_terms), len(med_terms)))
    contrasts = tuple(_parse_contrast(c, treatments) for c in doc["contrasts"])
    if not contrasts:
        raise ConfigurationError("config requests no contrasts")
    boot = doc.get("bootstrap")
    bootstrap = None
    if boot is not None:
        bootstrap = BootstrapConfig(int(boot.get("replicates", 1000)), float(boot.get("level", 0.95)),
                                    int(boot.get("seed", 0)))
    return AnalysisConfig(treatments, str(doc["mediator"]), str(doc["outcome"]), med, out,
                          contrasts, bootstrap)


def load_config(path: str | Path) -> AnalysisConfig:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"config is not valid JSON: {exc}") from None
    if not isinstance(doc, Mapping):
        raise ConfigurationError("config must be a JSON object")
    return parse_config(doc)


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

def _effect_row(est: EffectEstimate, names: Sequence[str]) -> dict:
    c = est.contrast
    row = {
        "label": c.label(names),
        "treatment": names[c.treatment_index],
        "hi": c.level_hi,
        "lo": c.level_lo,
        "given": None if c.conditioning is None else dict(
            zip([t for k, t in enumerate(names) if k != c.treatment_index], c.conditioning)),
        "nde": est.nde, "nie": est.nie, "te": est.te,
    }
    if est.interval_level is not None:
        row["interval_level"] = est.interval_level
        row["nde_ci"] = list(est.nde_ci)
        row["nie_ci"] = list(est.nie_ci)
        row["te_ci"] = list(est.te_ci)
    return row


def analysis_report(config: AnalysisConfig, fit: FittedMediation, validation: ValidationReport,
                    effects: Sequence[EffectEstimate], bootstrap: Optional[dict] = None) -> dict:
    spec = fit.spec
    return {
        "report_version": REPORT_VERSION,
        "kind": "analysis",
        "config": config.to_dict(),
        "fit": {
            "terms": spec.descriptors(),
            "outcome_terms": [str(t) for t in spec.outcome_terms],
            "instrument_terms": [str(t) for t in spec.instrument_terms],
            "alpha": fit.alpha.tolist(),
            "beta": fit.beta,
            "delta": fit.delta.tolist(),
            "gamma": fit.gamma.tolist(),
        },
        "effects": [_effect_row(e, fit.treatment_names) for e in effects],
        "diagnostics": {
            "n": fit.n,
            "L": spec.L,
            "L1": spec.outcome_count,
            "design_rank": validation.rank,
            "design_condition_number": validation.condition_number,
            "condition_numbers": dict(fit.condition_numbers),
            "bootstrap": bootstrap,
        },
    }


def dump_json(doc: Mapping, out: TextIO):
    json.dump(doc, out, indent=2, allow_nan=True)
    out.write("\n")


def dumps_json(doc: Mapping) -> str:
    buf = _io.StringIO()
    dump_json(doc, buf)
    return buf.getvalue()
