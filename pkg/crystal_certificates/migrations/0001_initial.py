import django.db.models.deletion
from django.db import migrations, models
import swapper

import crystal_certificates.models.utils


class Migration(migrations.Migration):
    initial = True

    dependencies = [
        swapper.dependency("crystal_certificates", "CertificateDefinition"),
    ]

    operations = [
        migrations.CreateModel(
            name="CertificateDefinition",
            fields=[
                (
                    "id",
                    models.BigAutoField(
                        auto_created=True,
                        primary_key=True,
                        serialize=False,
                        verbose_name="ID",
                    ),
                ),
                ("name", models.CharField(max_length=255)),
                ("description", models.TextField(blank=True)),
                (
                    "command",
                    models.CharField(
                        choices=[
                            ("verify-lemma1", "Lemma certificate"),
                            ("verify-theorem", "Theorem certificate"),
                            ("oracle-check", "Brute-force oracle check"),
                            ("sharpness-table", "Sharpness table"),
                            ("finite-s-report", "Finite S report"),
                        ],
                        max_length=32,
                    ),
                ),
                (
                    "config",
                    models.JSONField(
                        blank=True,
                        default=dict,
                        help_text="Command options: sequence, doubling {m1, k}, finite_s, k,"
                        " kmin, kmax, phi, engine, format, seed, filename_template",
                    ),
                ),
                ("created", models.DateTimeField(auto_now_add=True)),
                ("modified", models.DateTimeField(auto_now=True)),
            ],
            options={
                "swappable": swapper.swappable_setting(
                    "crystal_certificates", "CertificateDefinition"
                ),
            },
        ),
        migrations.CreateModel(
            name="CertificateRun",
            fields=[
                (
                    "id",
                    models.BigAutoField(
                        auto_created=True,
                        primary_key=True,
                        serialize=False,
                        verbose_name="ID",
                    ),
                ),
                ("data", models.JSONField()),
                ("passed", models.BooleanField(default=False)),
                (
                    "file",
                    models.FileField(
                        storage=crystal_certificates.models.utils.get_storage,
                        upload_to="crystal_certificates/bundles/",
                    ),
                ),
                ("created", models.DateTimeField(auto_now_add=True)),
                (
                    "certificate_definition",
                    models.ForeignKey(
                        null=True,
                        on_delete=django.db.models.deletion.SET_NULL,
                        to=swapper.get_model_name(
                            "crystal_certificates", "CertificateDefinition"
                        ),
                    ),
                ),
            ],
            options={
                "swappable": swapper.swappable_setting("crystal_certificates", "CertificateRun"),
            },
        ),
    ]
