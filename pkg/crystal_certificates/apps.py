from django.apps import AppConfig


class CrystalCertificatesConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "crystal_certificates"
    verbose_name = "Crystal certificates"
