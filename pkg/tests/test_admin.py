from io import BytesIO
import zipfile

from django.contrib import admin
from django.contrib.messages import get_messages
from django.contrib.messages.storage.fallback import FallbackStorage
from django.contrib.sessions.backends.db import SessionStore
import pytest

from crystal_certificates.admin import CertificateDefinitionAdmin, CertificateRunAdmin
from crystal_certificates.models import CertificateDefinition, CertificateRun

pytestmark = pytest.mark.django_db


@pytest.fixture
def admin_request(rf, admin_user):
    request = rf.post("/admin/")
    request.user = admin_user
    request.session = SessionStore()
    request._messages = FallbackStorage(request)
    return request


def test_models_are_registered():
    assert isinstance(admin.site._registry[CertificateDefinition], CertificateDefinitionAdmin)
    assert isinstance(admin.site._registry[CertificateRun], CertificateRunAdmin)


def test_run_selected(admin_request):
    CertificateDefinition.objects.create(
        name="good", command="verify-theorem", config={"sequence": [1, 2]}
    )
    CertificateDefinition.objects.create(
        name="bad", command="verify-theorem", config={"finite_s": [1, 2, 4], "k": 4}
    )
    model_admin = CertificateDefinitionAdmin(CertificateDefinition, admin.site)
    model_admin.run_selected(admin_request, CertificateDefinition.objects.order_by("name"))

    messages = [str(message) for message in get_messages(admin_request)]
    assert messages[0].startswith("bad: CapacityError")
    assert messages[1] == "good: certificate generated"
    assert CertificateRun.objects.count() == 1


def test_download_files_as_zip(admin_request):
    definition = CertificateDefinition.objects.create(
        name="lemma", command="verify-lemma1", config={"sequence": [1, 2]}
    )
    assert definition.run_certificate() is None
    run = CertificateRun.objects.get()

    model_admin = CertificateRunAdmin(CertificateRun, admin.site)
    assert model_admin.file_name(run).startswith("certificate-")
    assert "Download" in model_admin.file_link(run)

    response = model_admin.download_files_as_zip(admin_request, CertificateRun.objects.all())
    assert response["Content-Type"] == "application/zip"
    assert response["Content-Disposition"].startswith("attachment; filename=certificates-")
    with zipfile.ZipFile(BytesIO(response.content)) as archive:
        assert archive.namelist() == [model_admin.file_name(run)]
