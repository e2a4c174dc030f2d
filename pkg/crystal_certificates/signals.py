from django.dispatch import Signal

# Sent after a certificate bundle is stored as a CertificateRun.
# Provides: certificate_run, bundle (the CertificateBundle), perm_user (who triggered it)
certificate_generated = Signal()
