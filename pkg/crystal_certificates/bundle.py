import csv
from dataclasses import dataclass, field
import datetime
import io
import json
from pathlib import Path
from typing import Any

from crystal_certificates import __version__
from crystal_certificates.crystals.exceptions import ConfigError, ExportError

CSV_COLUMNS = (
    "k",
    "alpha_log2",
    "p",
    "lower_bound_m",
    "lower_bound_e",
    "denom",
    "ratio",
    "ratio_err",
)
FORMATS = ("json", "csv", "human")


@dataclass
class CertificateBundle:
    """
    Everything one run produced. The body is byte-stable for identical
    configurations; the generation timestamp lives in the sidecar only.
    """

    command: str
    config: dict[str, Any]
    certificates: list[dict[str, Any]]
    generated_at: datetime.datetime = field(
        default_factory=lambda: datetime.datetime.now(datetime.timezone.utc)
    )
    tool_version: str = __version__

    @property
    def passed(self) -> bool:
        return all(certificate.get("pass", True) for certificate in self.certificates)

    def body(self) -> dict[str, Any]:
        return {
            "tool_version": self.tool_version,
            "command": self.command,
            "config": self.config,
            "certificates": self.certificates,
            "pass": self.passed,
        }

    def sidecar(self) -> dict[str, Any]:
        return {"generated_at": self.generated_at.isoformat()}

    def body_text(self) -> str:
        return json.dumps(self.body(), sort_keys=True, indent=2) + "\n"

    def to_json(self) -> dict[str, Any]:
        return {"body": self.body(), "sidecar": self.sidecar()}

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "CertificateBundle":
        try:
            body = data["body"]
            bundle = cls(
                command=body["command"],
                config=body["config"],
                certificates=body["certificates"],
                tool_version=body["tool_version"],
            )
            generated_at = data.get("sidecar", {}).get("generated_at")
        except (KeyError, TypeError) as e:
            raise ConfigError(f"not a certificate bundle: missing {e}", flag="--input")
        if generated_at:
            bundle.generated_at = datetime.datetime.fromisoformat(generated_at)
        return bundle

    @classmethod
    def load(cls, path) -> "CertificateBundle":
        try:
            with open(path, encoding="utf-8") as f:
                data = json.load(f)
        except OSError as e:
            raise ExportError(f"cannot read bundle {path}: {e.strerror or e}") from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path} is not valid JSON: {e}", flag="--input") from e
        return cls.from_json(data)

    def sharpness_rows(self) -> list[dict[str, Any]]:
        rows = []
        for certificate in self.certificates:
            rows.extend(certificate.get("rows", []))
        return rows


def render_json(bundle: CertificateBundle) -> str:
    return json.dumps(bundle.to_json(), sort_keys=True, indent=2) + "\n"


def render_csv(bundle: CertificateBundle) -> str:
    rows = bundle.sharpness_rows()
    if not rows:
        raise ConfigError(f"{bundle.command} has no table rows to write as csv", "--format")
    buffer = io.StringIO()
    writer = csv.DictWriter(
        buffer, fieldnames=CSV_COLUMNS, extrasaction="ignore", lineterminator="\n"
    )
    writer.writeheader()
    writer.writerows(rows)
    return buffer.getvalue()


def _dyadic_text(data) -> str:
    mantissa, exponent = int(data["m"]), int(data["e"])
    if exponent == 0:
        return str(mantissa)
    return f"{mantissa}*2^{-exponent}"


def _human_lines(certificate: dict[str, Any]) -> list[str]:
    kind = certificate.get("kind")
    verdict = {True: "PASS", False: "FAIL", None: ""}[certificate.get("pass")]
    lines = []
    if kind == "lemma1":
        lines.append(f"Lemma certificate {certificate['sequence']} (J={certificate['J']}) {verdict}")
        lines.append(f"  union measure     {_dyadic_text(certificate['union_measure'])}")
        lines.append(f"  half-filling sum  {_dyadic_text(certificate['accounted_measure'])}")
        lines.append(f"  bound             {_dyadic_text(certificate['paper_bound'])}")
    elif kind == "theorem":
        lines.append(f"Theorem certificate {certificate['sequence']} {verdict}")
        for slab in certificate["slabs"]:
            lines.append(
                f"  r={slab['r']:<3} copies={slab['copies']:<12}"
                f" contribution={_dyadic_text(slab['contribution'])}"
            )
        lines.append(f"  total  {_dyadic_text(certificate['total'])}")
        lines.append(f"  bound  {_dyadic_text(certificate['paper_bound'])}")
    elif kind == "oracle":
        lines.append(
            f"Oracle check {certificate['sequence']} at level"
            f" {_dyadic_text(certificate['level'])} {verdict}"
        )
        lines.append(f"  certificate  {_dyadic_text(certificate['certificate_measure'])}")
        lines.append(f"  oracle       {_dyadic_text(certificate['oracle_measure'])}")
    elif kind in ("sharpness", "finite-s"):
        title = "Sharpness table" if kind == "sharpness" else "Finite S report"
        lines.append(f"{title} {verdict}")
        if kind == "finite-s":
            lines.append(f"  k_max = {certificate['k_max']}")
        for row in certificate["rows"]:
            lines.append(
                f"  k={row['k']:<3} p={row['p']}  ratio={row['ratio']} (+-{row['ratio_err']})"
            )
        if "statement" in certificate:
            lines.append(f"  {certificate['statement']}")
    elif kind == "trend":
        for trend in certificate["trends"]:
            lines.append(
                f"Trend p={trend['p']}: {trend['classification']}"
                f" (slope {trend['slope']}, max ratio {trend['max_ratio']})"
            )
        lines.append(f"  {certificate['statement']}")
    else:
        lines.append(json.dumps(certificate, sort_keys=True))
    return lines


def render_human(bundle: CertificateBundle) -> str:
    lines = [f"crystal-certify {bundle.tool_version}: {bundle.command}"]
    for certificate in bundle.certificates:
        lines.extend(_human_lines(certificate))
    lines.append("PASS" if bundle.passed else "FAIL")
    return "\n".join(lines) + "\n"


RENDERERS = {"json": render_json, "csv": render_csv, "human": render_human}


def export(bundle: CertificateBundle, format: str = "json", path=None) -> str:
    """
    Render the bundle and write it to `path` (or just return the text when no
    path is given).
    """
    if format not in RENDERERS:
        raise ConfigError(f"unknown format {format!r}, expected one of {FORMATS}", "--format")
    text = RENDERERS[format](bundle)
    if path is not None:
        try:
            Path(path).write_text(text, encoding="utf-8")
        except OSError as e:
            raise ExportError(f"cannot write {path}: {e.strerror or e}") from e
    return text
