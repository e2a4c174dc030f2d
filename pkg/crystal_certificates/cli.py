import argparse
from dataclasses import dataclass
import json
import logging
from pathlib import Path
import sys
from typing import Any

from crystal_certificates import __version__
from crystal_certificates.bundle import FORMATS, CertificateBundle, export
from crystal_certificates.crystals.basis3d import BasisSpec, theorem_certificate
from crystal_certificates.crystals.crystal2d import lemma1_certificate, oracle_check
from crystal_certificates.crystals.exceptions import (
    CapacityError,
    ConfigError,
    CrystalError,
    EnumerationLimitError,
)
from crystal_certificates.crystals.rare_sets import Engine, ExponentSequence
from crystal_certificates.crystals.sharpness import (
    PhiSpec,
    finite_s_report,
    sharpness_table,
    trend_report,
)
from crystal_certificates.default_settings import get_setting, overridden

logger = logging.getLogger(__name__)

CERTIFICATE_COMMANDS = ("verify-lemma1", "verify-theorem", "oracle-check")
COMMANDS = CERTIFICATE_COMMANDS + ("sharpness-table", "finite-s-report", "export")


class ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _int_list(text: str, flag: str) -> tuple[int, ...]:
    try:
        values = tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError:
        raise ConfigError(f"{flag} expects comma-separated integers, got {text!r}", flag)
    if not values:
        raise ConfigError(f"{flag} needs at least one value", flag)
    return values


@dataclass
class RunConfig:
    command: str
    sequence: tuple[int, ...] | None = None
    doubling_m1: int | None = None
    finite_s: tuple[int, ...] | None = None
    tower: bool = False
    k: int | None = None
    kmin: int = 4
    kmax: int = 12
    engine: Engine = Engine.SYMBOLIC
    format: str = "json"
    out: Path | None = None
    parallel: int = 1
    phis: tuple[int, ...] = (0, 1, 2)
    seed: int | None = None
    verbose: bool = False
    input: Path | None = None

    def basis(self) -> BasisSpec:
        if self.sequence is not None:
            return BasisSpec.finite(self.sequence)
        if self.doubling_m1 is not None:
            return BasisSpec.doubling(self.doubling_m1)
        if self.finite_s is not None:
            return BasisSpec.finite(self.finite_s)
        if self.tower:
            return BasisSpec.tower()
        raise ConfigError("no basis given: use --sequence, --doubling, --finite-s or --tower")

    def exponent_sequence(self) -> ExponentSequence:
        if self.sequence is not None:
            return ExponentSequence(self.sequence)
        if self.doubling_m1 is not None:
            return ExponentSequence.from_doubling(self.doubling_m1, self.k)
        return self.basis().subsequence(self.k)

    def echo(self) -> dict[str, Any]:
        """The configuration as recorded in the certificate body."""
        data: dict[str, Any] = {"command": self.command, "engine": self.engine.value}
        if self.sequence is not None:
            data["sequence"] = list(self.sequence)
        if self.doubling_m1 is not None:
            data["doubling"] = {"m1": self.doubling_m1}
        if self.finite_s is not None:
            data["finite_s"] = list(self.finite_s)
        if self.tower:
            data["tower"] = True
        if self.k is not None:
            data["k"] = self.k
        if self.command == "sharpness-table":
            data.update(kmin=self.kmin, kmax=self.kmax, phi=list(self.phis))
        if self.seed is not None:
            data["seed"] = self.seed
        return data


def build_parser() -> ArgumentParser:
    common = ArgumentParser(add_help=False)
    basis = common.add_mutually_exclusive_group()
    basis.add_argument("--sequence", help="explicit exponents, e.g. 1,2,4,8")
    basis.add_argument("--doubling", action="store_true", help="m_j = m1 * 2^(j-1)")
    basis.add_argument("--finite-s", dest="finite_s", help="finite set S, e.g. 1,2,4")
    basis.add_argument("--tower", action="store_true", help="S = {2^(n^n)}")
    common.add_argument("--m1", type=int)
    common.add_argument("--k", type=int)
    common.add_argument("--kmin", type=int, default=4)
    common.add_argument("--kmax", type=int, default=12)
    common.add_argument("--phi", default="0,1,2")
    common.add_argument("--engine", choices=[engine.value for engine in Engine])
    common.add_argument("--format", choices=FORMATS, default="json")
    common.add_argument("--out", type=Path)
    common.add_argument("--parallel", type=int, default=1)
    common.add_argument("--seed", type=int)
    common.add_argument("--input", type=Path)
    common.add_argument("--verbose", "-v", action="store_true")

    parser = ArgumentParser(
        prog="crystal-certify",
        description="Exact certificates for the crystal counterexamples to weak-type Orlicz"
        " estimates for rare bases.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    subparsers = parser.add_subparsers(dest="command", required=True)
    for command in COMMANDS:
        subparsers.add_parser(command, parents=[common])
    return parser


def _resolve_engine(config: RunConfig, requested: str | None) -> Engine:
    if config.command not in CERTIFICATE_COMMANDS:
        return Engine(requested) if requested else Engine.SYMBOLIC
    try:
        top = config.exponent_sequence().top
    except (CapacityError, EnumerationLimitError):
        # run() reports it with the proper exit code.
        return Engine(requested) if requested else Engine.SYMBOLIC
    if top <= get_setting("CROSS_CHECK_MAX_LOG2"):
        if requested and requested != Engine.BOTH.value:
            raise ConfigError(
                f"m_k = {top} is small enough to cross-check: certificates need --engine both",
                "--engine",
            )
        return Engine.BOTH
    if requested == Engine.BOTH.value:
        # Nothing to cross-check against beyond the bitset cap.
        return Engine.SYMBOLIC
    return Engine(requested) if requested else Engine.SYMBOLIC


def parse_config(argv) -> RunConfig:
    args = build_parser().parse_args(argv)
    config = RunConfig(
        command=args.command,
        k=args.k,
        kmin=args.kmin,
        kmax=args.kmax,
        format=args.format,
        out=args.out,
        parallel=args.parallel,
        seed=args.seed,
        verbose=args.verbose,
        input=args.input,
    )
    if args.parallel < 1:
        raise ConfigError("--parallel must be at least 1", "--parallel")
    config.phis = _int_list(args.phi, "--phi")
    for p in config.phis:
        PhiSpec(p)

    if args.command == "export":
        if args.input is None:
            raise ConfigError("export needs --input PATH", "--input")
        return config

    if args.sequence is not None:
        config.sequence = _int_list(args.sequence, "--sequence")
        ExponentSequence(config.sequence)
        if config.k is not None and config.k != len(config.sequence):
            raise ConfigError("--k conflicts with the length of --sequence", "--k")
        config.k = len(config.sequence)
    elif args.doubling:
        if args.m1 is None:
            raise ConfigError("--doubling needs --m1", "--m1")
        config.doubling_m1 = args.m1
        if args.command != "sharpness-table":
            if args.k is None:
                raise ConfigError("--doubling needs --k", "--k")
            ExponentSequence.from_doubling(args.m1, args.k)
    elif args.finite_s is not None:
        config.finite_s = _int_list(args.finite_s, "--finite-s")
    elif args.tower:
        config.tower = True
    elif args.command == "sharpness-table":
        config.doubling_m1 = args.m1 or 1
    else:
        raise ConfigError(
            f"{args.command} needs a basis: --sequence, --doubling, --finite-s or --tower"
        )

    if args.m1 is not None and not args.doubling and args.command != "sharpness-table":
        raise ConfigError("--m1 only applies with --doubling", "--m1")
    if args.command == "finite-s-report" and config.finite_s is None:
        raise ConfigError("finite-s-report needs --finite-s", "--finite-s")
    if args.command in CERTIFICATE_COMMANDS and config.k is None:
        raise ConfigError(f"{args.command} needs --k with this basis", "--k")
    if args.command == "sharpness-table":
        if config.kmin < 1 or config.kmax < config.kmin:
            raise ConfigError(f"bad k range {config.kmin}..{config.kmax}", "--kmax")

    config.engine = _resolve_engine(config, args.engine)
    if args.command in ("verify-lemma1", "oracle-check"):
        config.exponent_sequence().check_lemma_admissible()
    if args.command == "verify-theorem" and config.sequence is not None:
        config.exponent_sequence().check_doubling()
    return config


def _sharpness_certificates(config: RunConfig) -> list[dict[str, Any]]:
    rows = sharpness_table(
        config.basis(),
        range(config.kmin, config.kmax + 1),
        [PhiSpec(p) for p in config.phis],
        config.engine,
        config.parallel,
    )
    envelope = [row.meets_quadratic_envelope() for row in rows if row.phi.p == 0]
    table = {
        "kind": "sharpness",
        "rows": [row.to_json() for row in rows],
        "pass": all(envelope),
    }
    certificates = [table]
    if config.kmax - config.kmin >= 2:
        certificates.append(trend_report(rows).to_json())
    return certificates


def build_bundle(config: RunConfig) -> CertificateBundle:
    """Run the configured command. A --seed applies to this run only."""
    seeded = {} if config.seed is None else {"SAMPLE_SEED": config.seed}
    with overridden(**seeded):
        return _build_bundle(config)


def _build_bundle(config: RunConfig) -> CertificateBundle:
    if config.command == "export":
        return CertificateBundle.load(config.input)
    if config.command == "verify-lemma1":
        certificates = [
            lemma1_certificate(
                config.exponent_sequence(), config.engine, config.parallel
            ).to_json()
        ]
    elif config.command == "verify-theorem":
        certificates = [
            theorem_certificate(
                config.basis(), config.k, config.engine, config.parallel
            ).to_json()
        ]
    elif config.command == "oracle-check":
        certificates = [oracle_check(config.exponent_sequence(), config.engine).to_json()]
    elif config.command == "sharpness-table":
        certificates = _sharpness_certificates(config)
    else:
        report = finite_s_report(config.finite_s, config.engine, config.parallel)
        rows = [row.meets_quadratic_envelope() for row in report.rows]
        certificates = [{**report.to_json(), "pass": all(rows)}]
    return CertificateBundle(
        command=config.command, config=config.echo(), certificates=certificates
    )


def _write_diagnostic(config: RunConfig, error: CrystalError):
    if config.out is None:
        return
    path = config.out.with_name(config.out.name + ".diagnostic.json")
    diagnostic = {
        "command": config.command,
        "config": config.echo(),
        "error": type(error).__name__,
        "message": str(error),
        "exit_code": error.exit_code,
    }
    try:
        path.write_text(json.dumps(diagnostic, sort_keys=True, indent=2) + "\n")
    except OSError:
        logger.exception("Could not write diagnostic report %s", path)


def run(config: RunConfig) -> int:
    """
    Execute the configured command. Returns 0 when every certificate passes,
    1 when one fails, 2 on validation errors and 3 on engine disagreement.
    """
    try:
        bundle = build_bundle(config)
        text = export(bundle, config.format, config.out)
    except CrystalError as e:
        logger.error("%s failed: %s", config.command, e)
        print(f"error: {e}", file=sys.stderr)
        _write_diagnostic(config, e)
        return e.exit_code
    if config.out is None:
        print(text, end="")
    else:
        print(f"Certificate bundle written to: {config.out}")
    return 0 if bundle.passed else 1


def main(argv=None):
    try:
        config = parse_config(sys.argv[1:] if argv is None else argv)
    except CrystalError as e:
        flag = getattr(e, "flag", None)
        print(f"error: {e}" + (f" ({flag})" if flag else ""), file=sys.stderr)
        return e.exit_code
    logging.basicConfig(
        level=logging.DEBUG if config.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
