import datetime
import re
from typing import Any

from django.contrib.auth.models import PermissionsMixin
from django.core.files.base import ContentFile
from django.db import models
import swapper

from crystal_certificates.bundle import CertificateBundle, export
from crystal_certificates.crystals.exceptions import ConfigError, CrystalError
from crystal_certificates.signals import certificate_generated

from .utils import get_storage

COMMAND_CHOICES = [
    ("verify-lemma1", "Lemma certificate"),
    ("verify-theorem", "Theorem certificate"),
    ("oracle-check", "Brute-force oracle check"),
    ("sharpness-table", "Sharpness table"),
    ("finite-s-report", "Finite S report"),
]
EXTENSIONS = {"json": "json", "csv": "csv", "human": "txt"}


class BaseCertificateDefinition(models.Model):
    name = models.CharField(max_length=255)
    description = models.TextField(blank=True)

    command = models.CharField(max_length=32, choices=COMMAND_CHOICES)

    config = models.JSONField(
        default=dict,
        blank=True,
        help_text="Command options: sequence, doubling {m1, k}, finite_s, k, kmin, kmax,"
        " phi, engine, format, seed, filename_template",
    )

    created = models.DateTimeField(auto_now_add=True)
    modified = models.DateTimeField(auto_now=True)

    class Meta:
        abstract = True

    def __str__(self):
        return self.name

    def build_argv(self) -> list[str]:
        """Translate the stored config into command-line arguments."""
        config = self.config or {}
        argv = [self.command]

        def joined(values):
            return ",".join(str(value) for value in values)

        if "sequence" in config:
            argv += ["--sequence", joined(config["sequence"])]
        # k may sit at the top level or inside the doubling rule; pass it once.
        ks = set()
        if "k" in config.get("doubling", {}):
            ks.add(config["doubling"]["k"])
        if "k" in config:
            ks.add(config["k"])
        if len(ks) > 1:
            raise ConfigError(f"conflicting k values {sorted(ks)} in the stored config", "--k")
        if "doubling" in config:
            argv += ["--doubling", "--m1", str(config["doubling"]["m1"])]
        if "finite_s" in config:
            argv += ["--finite-s", joined(config["finite_s"])]
        if config.get("tower"):
            argv.append("--tower")
        if ks:
            argv += ["--k", str(ks.pop())]
        for key in ("kmin", "kmax", "engine", "format", "seed"):
            if key in config:
                argv += [f"--{key}", str(config[key])]
        if "phi" in config:
            argv += ["--phi", joined(config["phi"])]
        return argv

    def build_run_config(self):
        """Validated RunConfig, through the same checks as the command line."""
        from crystal_certificates.cli import parse_config

        return parse_config(self.build_argv())

    def run_certificate(self, perm_user: PermissionsMixin | None = None):
        """
        Run the certificate and store the bundle as a CertificateRun.
        Returns a list of error strings, or None on success.
        """
        from crystal_certificates.cli import build_bundle

        try:
            run_config = self.build_run_config()
            bundle = build_bundle(run_config)
            output = export(bundle, run_config.format)
        except CrystalError as e:
            return [f"{type(e).__name__}: {e}"]

        filename = self.build_filename(bundle, run_config.format)
        output_content = ContentFile(output.encode("utf-8"), name=filename)

        CertificateRun = swapper.load_model("crystal_certificates", "CertificateRun")
        certificate_run = CertificateRun.objects.create(
            certificate_definition=self,
            file=output_content,
            passed=bundle.passed,
            **self.get_extra_creation_kwargs(bundle, perm_user),
        )

        certificate_generated.send(
            sender=self.__class__,
            certificate_run=certificate_run,
            bundle=bundle,
            perm_user=perm_user,
        )
        return None

    def build_filename(self, bundle: CertificateBundle, format: str = "json") -> str:
        """
        Name of the stored file, e.g. "certificate-20240105123456.json".

        A ``filename_template`` in the config is filled with str.format using
        {name}, {command} and {timestamp}. Override to customize further.
        """
        timestamp = bundle.generated_at.strftime("%Y%m%d%H%M%S")
        filename_template = (self.config or {}).get("filename_template")
        if filename_template:
            try:
                filename = filename_template.format(
                    name=self.name, command=self.command, timestamp=timestamp
                )
            except (KeyError, IndexError, ValueError):
                filename = f"certificate-{timestamp}"
        else:
            filename = f"certificate-{timestamp}"

        extension = f".{EXTENSIONS.get(format, 'json')}"
        if not filename.endswith(extension):
            filename += extension

        return re.sub(r"[@&#+/\\\s]", "-", filename)

    def get_extra_creation_kwargs(
        self, bundle: CertificateBundle, perm_user: PermissionsMixin | None
    ) -> dict[str, Any]:
        """
        Extra fields for the CertificateRun. Override to add metadata.
        """
        return {
            "data": {
                "body": bundle.body(),
                "sidecar": bundle.sidecar(),
                "perm_user": str(perm_user) if perm_user is not None else None,
            }
        }


class BaseCertificateRun(models.Model):
    certificate_definition = models.ForeignKey(
        swapper.get_model_name("crystal_certificates", "CertificateDefinition"),
        on_delete=models.SET_NULL,
        null=True,
    )

    # Certificate body and run metadata.
    data = models.JSONField()

    passed = models.BooleanField(default=False)

    file = models.FileField(
        upload_to="crystal_certificates/bundles/",
        storage=get_storage,
    )

    created = models.DateTimeField(auto_now_add=True)

    class Meta:
        abstract = True

    def __str__(self):
        name = self.certificate_definition.name if self.certificate_definition else "deleted"
        return f"{name} run at {self.created}"

    @property
    def generated_at(self) -> datetime.datetime | None:
        value = (self.data or {}).get("sidecar", {}).get("generated_at")
        return datetime.datetime.fromisoformat(value) if value else None
