import swapper

from .base import BaseCertificateDefinition, BaseCertificateRun


class CertificateDefinition(BaseCertificateDefinition):
    class Meta:
        # Swappable, similar to Django's AUTH_USER_MODEL
        swappable = swapper.swappable_setting("crystal_certificates", "CertificateDefinition")


class CertificateRun(BaseCertificateRun):
    class Meta:
        swappable = swapper.swappable_setting("crystal_certificates", "CertificateRun")
