from .base import BaseCertificateDefinition, BaseCertificateRun
from .default import CertificateDefinition, CertificateRun
