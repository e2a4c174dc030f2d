from .base import CertificateDefinitionAdmin, CertificateRunAdmin
