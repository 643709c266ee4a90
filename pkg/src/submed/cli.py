"""Command-line entry point.

    submed analyze --data F --config F --out F [--workers K]
    submed simulate --study {1|2} --n N --reps R --seed S --out F [--workers K]
    submed export-study --study {1|2} --n N --seed S --out F

``--out -`` writes to standard output. Exit status: 0 success, 1 I/O
failure, 2 configuration or validation failure, 3 too many failed
simulation replicates.
"""

from __future__ import annotations

import argparse
import contextlib
import logging
import sys
from typing import Optional, Sequence

from .core import MediationError
from .design import build_design, validate_identifiability
from .effects import effect_table
from .estimation import fit_proposed
from .inference import attach_intervals, bootstrap_draws
from .io import analysis_report, dump_json, load_config, load_observations, write_observations
from .simulation import ReplicationError, StudyDGP, generate_study_dataset, run_replications

log = logging.getLogger("submed")

EXIT_OK, EXIT_IO, EXIT_INVALID, EXIT_REPLICATES = 0, 1, 2, 3


@contextlib.contextmanager
def _open_out(path: str):
    if path == "-":
        yield sys.stdout
        sys.stdout.flush()
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            yield fh


def cmd_analyze(args) -> int:
    try:
        config = load_config(args.config)
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO
    except MediationError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_INVALID
    try:
        data = load_observations(args.data, config.treatments, config.mediator, config.outcome)
    except OSError as exc:
        print(f"error: cannot read data: {exc}", file=sys.stderr)
        return EXIT_IO
    except MediationError as exc:
        print(f"invalid data: {exc}", file=sys.stderr)
        return EXIT_INVALID

    try:
        spec = config.basis_spec()
        contrasts = config.effect_contrasts()
        validation = validate_identifiability(spec, build_design(spec, data))
        fit = fit_proposed(spec, data)
        effects = effect_table(fit, data, contrasts)
        boot_info = None
        if config.bootstrap is not None:
            draws = bootstrap_draws(spec, data, contrasts, config.bootstrap, workers=args.workers)
            effects = attach_intervals(effects, draws, config.bootstrap.level)
            boot_info = {**config.bootstrap.to_dict(), "discarded": draws.discarded}
    except MediationError as exc:
        print(f"validation failed: {exc}", file=sys.stderr)
        try:
            report = validate_identifiability(spec, build_design(spec, data))
            print(f"validation report: {report.to_dict()}", file=sys.stderr)
        except Exception:  # the report itself may be what failed
            pass
        return EXIT_INVALID

    report = analysis_report(config, fit, validation, effects, boot_info)
    try:
        with _open_out(args.out) as fh:
            dump_json(report, fh)
    except OSError as exc:
        print(f"error: cannot write report: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def cmd_simulate(args) -> int:
    try:
        rep = run_replications(args.study, args.n, args.reps, args.seed, workers=args.workers)
    except ReplicationError as exc:
        print(f"simulation failed: {exc}", file=sys.stderr)
        return EXIT_REPLICATES
    except MediationError as exc:
        print(f"invalid simulation request: {exc}", file=sys.stderr)
        return EXIT_INVALID
    try:
        with _open_out(args.out) as fh:
            dump_json({"report_version": 1, "kind": "replication", **rep.to_dict()}, fh)
    except OSError as exc:
        print(f"error: cannot write report: {exc}", file=sys.stderr)
        return EXIT_IO
    table_stream = sys.stderr if args.out == "-" else sys.stdout
    table_stream.write(rep.format_table())
    return EXIT_OK


def cmd_export_study(args) -> int:
    if args.n < 1:
        print("empty dataset requested: --n must be at least 1", file=sys.stderr)
        return EXIT_INVALID
    try:
        data = generate_study_dataset(StudyDGP(args.study, args.n, args.seed))
    except MediationError as exc:
        print(f"invalid request: {exc}", file=sys.stderr)
        return EXIT_INVALID
    try:
        with _open_out(args.out) as fh:
            write_observations(data, fh)
    except OSError as exc:
        print(f"error: cannot write data: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="submed", description=__doc__.split("\n\n")[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="fit a dataset and report effects")
    a.add_argument("--data", required=True)
    a.add_argument("--config", required=True)
    a.add_argument("--out", required=True)
    a.add_argument("--workers", type=int, default=None, help="threads for bootstrap replicates")
    a.set_defaults(func=cmd_analyze)

    s = sub.add_parser("simulate", help="Monte-Carlo bias/SE table for a simulation study")
    s.add_argument("--study", type=int, choices=(1, 2), required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--reps", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.add_argument("--workers", type=int, default=None)
    s.set_defaults(func=cmd_simulate)

    e = sub.add_parser("export-study", help="write one simulated dataset as CSV")
    e.add_argument("--study", type=int, choices=(1, 2), required=True)
    e.add_argument("--n", type=int, required=True)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_export_study)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
